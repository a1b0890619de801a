"""Row-product and row-function matrices, random generators, and spectral
diagnostics (least singular value, operator norm, Euclidean-section probe).

Matrices are plain ``numpy.ndarray`` objects.  Rows of a d^k x n row-function
matrix are ordered lexicographically over J = (j1, ..., jk) with j1 slowest.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .boolfunc import (PLUS_MINUS, ZERO_ONE, MultilinearPoly, SignedFunction,
                       index_point, to_multilinear)

RNG_NAME = "numpy.PCG64"

BERNOULLI01 = "bernoulli01"
RADEMACHER = "rademacher"
UNIFORM = "uniform-symmetric"


@dataclass(frozen=True)
class TauRandomSpec:
    """Entry distribution for generated matrices.

    ``bernoulli01`` is allowed as a generator but is not tau-random (its mean
    is 1/2); ``is_tau_random`` reports that.
    """

    kind: str
    width: float = 1.0

    def __post_init__(self):
        if self.kind not in (BERNOULLI01, RADEMACHER, UNIFORM):
            raise ValueError(f"unknown matrix kind {self.kind!r}")
        if self.kind == UNIFORM and not 0 < self.width <= 1:
            raise ValueError("uniform half-width must be in (0, 1]")

    @property
    def tau(self) -> float:
        if self.kind == RADEMACHER:
            return 1.0
        if self.kind == UNIFORM:
            return self.width / np.sqrt(3.0)
        return 0.5  # standard deviation, but the entries are not centred

    @property
    def is_tau_random(self) -> bool:
        return self.kind != BERNOULLI01

    @classmethod
    def parse(cls, text: str) -> "TauRandomSpec":
        text = text.strip()
        if text.startswith(UNIFORM):
            rest = text[len(UNIFORM):].strip("()")
            return cls(UNIFORM, float(rest) if rest else 1.0)
        return cls(text)


def sample_entries(spec: TauRandomSpec, shape, rng: np.random.Generator) -> np.ndarray:
    if spec.kind == BERNOULLI01:
        return rng.integers(0, 2, size=shape).astype(np.int64)
    if spec.kind == RADEMACHER:
        return 2 * rng.integers(0, 2, size=shape).astype(np.int64) - 1
    return rng.uniform(-spec.width, spec.width, size=shape)


def gen_matrix(spec: TauRandomSpec, d: int, n: int, seed: int) -> np.ndarray:
    """A d x n matrix with i.i.d. entries; deterministic in ``seed``."""
    if d < 1 or n < 1:
        raise ValueError("matrix dimensions must be positive")
    return sample_entries(spec, (d, n), np.random.default_rng(seed))


def _check_same_cols(mats: Sequence[np.ndarray]) -> int:
    if not mats:
        raise ValueError("at least one matrix required")
    n = mats[0].shape[1]
    for M in mats:
        if M.ndim != 2 or M.shape[1] != n:
            raise ValueError("all factors must be 2-d with the same number of columns")
    return n


def _broadcast_factors(mats: Sequence[np.ndarray]):
    """Yield each factor reshaped so that broadcasting enumerates all J."""
    k = len(mats)
    for i, M in enumerate(mats):
        shape = [1] * k + [M.shape[1]]
        shape[i] = M.shape[0]
        yield M.reshape(shape)


def row_product(*mats: np.ndarray) -> np.ndarray:
    """Rows are entrywise products of one row from each factor."""
    n = _check_same_cols(mats)
    out = None
    for F in _broadcast_factors(mats):
        out = F if out is None else out * F
    rows = int(np.prod([M.shape[0] for M in mats]))
    full = np.broadcast_to(out, tuple(M.shape[0] for M in mats) + (n,))
    return np.array(full.reshape(rows, n))


def distinct_sorted_rows(d: int, k: int) -> np.ndarray:
    """Row indices (in the full lexicographic order) of strictly increasing J."""
    combos = list(itertools.combinations(range(d), k))
    weights = np.array([d ** (k - 1 - i) for i in range(k)])
    return np.array([int(np.dot(c, weights)) for c in combos], dtype=np.int64)


def row_function_matrix(h: SignedFunction | MultilinearPoly, *mats: np.ndarray,
                        mode: str = "all") -> np.ndarray:
    """Entry (J, a) is h(T1[j1, a], ..., Tk[jk, a]).

    A table ``h`` needs cube entries for its domain; a polynomial ``h`` is
    evaluated on arbitrary entries (Fraction coefficients give an exact object
    array).  ``mode="distinct-sorted"`` keeps only rows with j1 < ... < jk.
    """
    k = len(mats)
    if h.arity != k:
        raise ValueError(f"function arity {h.arity} but {k} matrices given")
    n = _check_same_cols(mats)
    if mode == "distinct-sorted" and len({M.shape[0] for M in mats}) != 1:
        raise ValueError("distinct-sorted mode needs equal row counts")

    if isinstance(h, MultilinearPoly):
        out = _poly_matrix(h, mats)
    else:
        allowed = (0, 1) if h.domain == ZERO_ONE else (-1, 1)
        index = None
        for i, F in enumerate(_broadcast_factors(mats)):
            if not np.isin(F, allowed).all():
                raise ValueError(
                    f"matrix {i + 1} has entries outside the {h.domain} cube")
            bits = (F == 1).astype(np.int64) << i
            index = bits if index is None else index + bits
        table = np.asarray(h.table, dtype=np.int64)
        full_shape = tuple(M.shape[0] for M in mats) + (n,)
        out = table[np.broadcast_to(index, full_shape)].reshape(-1, n)
    if mode == "distinct-sorted":
        return out[distinct_sorted_rows(mats[0].shape[0], k)]
    if mode != "all":
        raise ValueError(f"unknown row mode {mode!r}")
    return out


def _poly_matrix(poly: MultilinearPoly, mats: Sequence[np.ndarray]) -> np.ndarray:
    k = len(mats)
    n = mats[0].shape[1]
    full_shape = tuple(M.shape[0] for M in mats) + (n,)
    exact = any(isinstance(c, Fraction) for c in poly.coeffs) or any(
        M.dtype == object for M in mats)
    factors = list(_broadcast_factors([M.astype(object) if exact else M for M in mats]))
    out = np.zeros(full_shape, dtype=object if exact else np.result_type(
        float, *[type(c) for c in poly.coeffs]))
    if exact:
        out[...] = 0
    for mask, c in enumerate(poly.coeffs):
        if c == 0:
            continue
        term = np.full(full_shape, c, dtype=object) if exact else c
        for i in range(k):
            if (mask >> i) & 1:
                term = term * factors[i]
        out = out + np.broadcast_to(term, full_shape)
    return out.reshape(-1, n)


# -- spectral diagnostics ---------------------------------------------------

SVD_RESIDUAL_TOL = 1e-8


def _finite_float(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise ValueError("expected a 2-d matrix")
    if not np.isfinite(M).all():
        raise ValueError("matrix has non-finite entries")
    return M


def svd_checked(M):
    """Thin SVD with a reconstruction-residual check."""
    M = _finite_float(M)
    P, sv, Qt = np.linalg.svd(M, full_matrices=False)
    norm = np.linalg.norm(M)
    if norm > 0:
        resid = np.linalg.norm(M - (P * sv) @ Qt) / norm
        if resid > SVD_RESIDUAL_TOL:
            raise ArithmeticError(f"SVD residual {resid:.3g} exceeds {SVD_RESIDUAL_TOL}")
    return P, sv, Qt


def least_singular_value(M) -> float:
    """sigma_n(M) for an m x n matrix with m >= n."""
    M = _finite_float(M)
    m, n = M.shape
    if not m >= n >= 1:
        raise ValueError(f"need m >= n >= 1, got {m}x{n}")
    return float(svd_checked(M)[1][-1])


def operator_norm(M) -> float:
    return float(np.linalg.norm(_finite_float(M), 2))


@dataclass(frozen=True)
class SectionProbe:
    """Probe-based upper estimate of the Euclidean-section constant."""

    ratio: float
    probes: int
    rank_deficient: bool = False

    def __float__(self):
        return self.ratio


def euclidean_ratio_probe(M, num_probes: int, seed: int) -> SectionProbe:
    """min over probes x of ||Mx||_1 / (sqrt(m) ||Mx||_2).

    Probes are ``num_probes`` random unit vectors, the n canonical basis
    vectors and the right singular vector of the smallest singular value.
    The true section constant can only be smaller.
    """
    if num_probes < 1:
        raise ValueError("num_probes must be >= 1")
    M = _finite_float(M)
    m, n = M.shape
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, num_probes))
    X /= np.linalg.norm(X, axis=0)
    _, _, Qt = np.linalg.svd(M, full_matrices=False)
    probes = np.hstack([X, np.eye(n), Qt[-1][:, None]])
    Y = M @ probes
    l2 = np.linalg.norm(Y, axis=0)
    l1 = np.abs(Y).sum(axis=0)
    scale = max(np.linalg.norm(M, 2), 1e-300)
    dead = l2 <= 1e-12 * scale
    ratios = np.where(dead, 0.0, l1 / (np.sqrt(m) * np.where(dead, 1.0, l2)))
    return SectionProbe(float(ratios.min()), probes.shape[1], bool(dead.any()))


def l1_ratio_probe(M, num_probes: int, seed: int) -> float:
    """min over random unit probes of ||Mx||_1 / m."""
    M = _finite_float(M)
    X = np.random.default_rng(seed).standard_normal((M.shape[1], num_probes))
    X /= np.linalg.norm(X, axis=0)
    return float(np.abs(M @ X).sum(axis=0).min() / M.shape[0])


@dataclass(frozen=True)
class SpectralReport:
    m: int
    n: int
    sigma_min: float
    op_norm: float
    euclid_ratio_min: float
    probes_used: int
    rank_deficient: bool = False


def spectral_report(M, num_probes: int = 200, seed: int = 0) -> SpectralReport:
    M = _finite_float(M)
    sv = svd_checked(M)[1]
    probe = euclidean_ratio_probe(M, num_probes, seed)
    return SpectralReport(M.shape[0], M.shape[1], float(sv[-1]), float(sv[0]),
                          probe.ratio, probe.probes, probe.rank_deficient)


def perturbed_matrix(d: int, n: int, rank1_scale: float, seed: int) -> np.ndarray:
    """R + u 1^T with R Rademacher d x n and u a random direction of norm
    ``rank1_scale``.  R matches ``gen_matrix(rademacher, d, n, seed)``."""
    rng = np.random.default_rng(seed)
    R = sample_entries(TauRandomSpec(RADEMACHER), (d, n), rng).astype(float)
    if rank1_scale == 0:
        return R
    g = rng.standard_normal(d)
    u = rank1_scale * g / np.linalg.norm(g)
    return R + np.outer(u, np.ones(n))


def perturbed_sigma_probe(d: int, n: int, rank1_scale: float,
                          seeds: Sequence[int]) -> list[float]:
    """sigma_n(R + u 1^T) for each seed; see ``perturbed_matrix``."""
    if d < 2 * n:
        raise ValueError("perturbed probe needs d >= 2n")
    return [least_singular_value(perturbed_matrix(d, n, rank1_scale, s)) for s in seeds]


# -- matrix CSV -------------------------------------------------------------

def write_matrix_csv(path, M) -> None:
    """First line ``m,n``, then one comma-separated row per line."""
    M = np.atleast_2d(np.asarray(M))
    with open(path, "w", newline="\n") as fh:
        fh.write(f"{M.shape[0]},{M.shape[1]}\n")
        for row in M:
            fh.write(",".join(repr(v.item()) if M.dtype.kind == "f" else str(v) for v in row))
            fh.write("\n")


def read_matrix_csv(path) -> np.ndarray:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty matrix file")
    try:
        m, n = (int(t) for t in lines[0].split(","))
    except ValueError:
        raise ValueError(f"{path}: first line must be 'm,n'") from None
    if len(lines) - 1 != m:
        raise ValueError(f"{path}: header says {m} rows, found {len(lines) - 1}")
    rows = [[float(t) for t in ln.split(",")] for ln in lines[1:]]
    if any(len(r) != n for r in rows):
        raise ValueError(f"{path}: every row must have {n} values")
    M = np.array(rows, dtype=float).reshape(m, n)
    if not np.isfinite(M).all():
        raise ValueError(f"{path}: non-finite entries")
    if np.array_equal(M, np.round(M)):
        return M.astype(np.int64)
    return M


# -- exact identity checks --------------------------------------------------

def _c_h(h: SignedFunction) -> Fraction:
    top = to_multilinear(h).top_coeff
    if top == 0:
        raise ValueError("c_h undefined: full-monomial coefficient is zero")
    return 1 / Fraction(top)


def _all_point_pairs(k: int):
    pts = [index_point(i, k) for i in range(1 << k)]
    return itertools.product(pts, pts)


def derivative_identity_at(h: SignedFunction, x, xp, c=None) -> bool:
    """(x1-x1')...(xk-xk') == c_h * sum_I (-1)^|I| h(x(I)), x(I) takes x' on I."""
    k = h.arity
    c = _c_h(h) if c is None else c
    lhs = 1
    for a, b in zip(x, xp):
        lhs *= a - b
    total = 0
    for mask in range(1 << k):
        pt = tuple(xp[i] if (mask >> i) & 1 else x[i] for i in range(k))
        sign = -1 if bin(mask).count("1") % 2 else 1
        total += sign * h(pt)
    return Fraction(lhs) == c * total


def derivative_identity_matrices(h: SignedFunction, Ts, Tps, c=None) -> bool:
    """Matrix form: (T1-T1') ⊙ ... ⊙ (Tk-Tk') == c_h sum_I (-1)^|I| Pi_h(T(I)).

    T(I) uses T' at positions in I and T elsewhere.
    """
    k = h.arity
    c = _c_h(h) if c is None else c
    lhs = row_product(*[np.asarray(a, dtype=np.int64) - np.asarray(b, dtype=np.int64)
                        for a, b in zip(Ts, Tps)])
    acc = np.zeros_like(lhs, dtype=np.int64)
    for mask in range(1 << k):
        mats = [Tps[i] if (mask >> i) & 1 else Ts[i] for i in range(k)]
        sign = -1 if bin(mask).count("1") % 2 else 1
        acc = acc + sign * row_function_matrix(h, *mats)
    return all(Fraction(int(a)) == c * int(b) for a, b in zip(lhs.ravel(), acc.ravel()))


def check_derivative_identity(h: SignedFunction, trials: int, seed: int,
                              exhaustive: bool | None = None) -> bool:
    """Check the finite-difference identity at point pairs and in matrix form.

    With ``exhaustive`` (default for arity <= 2) every point pair is tested;
    otherwise ``trials`` random pairs.  ``trials`` random small 0/1 matrix
    tuples (d, n <= 4) are tested for the matrix form.
    """
    if h.domain != ZERO_ONE:
        raise ValueError("derivative identity is stated on {0,1}^k")
    c = _c_h(h)
    k = h.arity
    rng = np.random.default_rng(seed)
    if exhaustive is None:
        exhaustive = k <= 2
    if exhaustive:
        pairs = _all_point_pairs(k)
    else:
        pairs = ((tuple(rng.integers(0, 2, k)), tuple(rng.integers(0, 2, k)))
                 for _ in range(trials))
    if not all(derivative_identity_at(h, tuple(map(int, x)), tuple(map(int, y)), c)
               for x, y in pairs):
        return False
    for _ in range(trials):
        d, n = (int(v) for v in rng.integers(1, 5, 2))
        Ts = [rng.integers(0, 2, (d, n)) for _ in range(k)]
        Tps = [rng.integers(0, 2, (d, n)) for _ in range(k)]
        if not derivative_identity_matrices(h, Ts, Tps, c):
            return False
    return True


def pm_identity_at(h: SignedFunction, phi, poly=None, c=None) -> bool:
    """phi1...phik == c_h (sum_{I proper} (-1)^(k-|I|) P_I(phi) + h(phi))."""
    k = h.arity
    poly = to_multilinear(h) if poly is None else poly
    c = _c_h(h) if c is None else c
    lhs = 1
    for v in phi:
        lhs *= v
    full = (1 << k) - 1
    total = Fraction(h(tuple(phi)))
    for mask in range(full):
        sign = -1 if (k - bin(mask).count("1")) % 2 else 1
        total += sign * poly.restrict(mask)(*phi)
    return Fraction(lhs) == c * total


def pm_identity_matrices(h: SignedFunction, Vs, poly=None, c=None) -> bool:
    """V1 ⊙ ... ⊙ Vk == c_h (sum_{I proper} (-1)^(k-|I|) Pi_{P_I}(V) + Pi_h(V))."""
    k = h.arity
    poly = to_multilinear(h) if poly is None else poly
    c = _c_h(h) if c is None else c
    lhs = row_product(*[np.asarray(V, dtype=np.int64) for V in Vs])
    acc = row_function_matrix(h, *Vs).astype(object) + Fraction(0)
    full = (1 << k) - 1
    for mask in range(full):
        sign = -1 if (k - bin(mask).count("1")) % 2 else 1
        acc = acc + sign * row_function_matrix(poly.restrict(mask),
                                               *[np.asarray(V, dtype=object) for V in Vs])
    return all(Fraction(int(a)) == c * b for a, b in zip(lhs.ravel(), acc.ravel()))


def check_pm_identity(h: SignedFunction, trials: int, seed: int,
                      exhaustive: bool | None = None) -> bool:
    """Plus-minus analogue of :func:`check_derivative_identity`."""
    if h.domain != PLUS_MINUS:
        raise ValueError("plus-minus identity needs a plus-minus domain function")
    poly = to_multilinear(h)
    c = _c_h(h)
    k = h.arity
    rng = np.random.default_rng(seed)
    if exhaustive is None:
        exhaustive = k <= 2
    if exhaustive:
        pts = (index_point(i, k, PLUS_MINUS) for i in range(1 << k))
    else:
        pts = (tuple(int(v) for v in 2 * rng.integers(0, 2, k) - 1) for _ in range(trials))
    if not all(pm_identity_at(h, phi, poly, c) for phi in pts):
        return False
    for _ in range(trials):
        d, n = (int(v) for v in rng.integers(1, 5, 2))
        Vs = [2 * rng.integers(0, 2, (d, n)) - 1 for _ in range(k)]
        if not pm_identity_matrices(h, Vs, poly, c):
            return False
    return True
