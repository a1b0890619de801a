"""Least-squares and l1 (LP) decoding of noisy linear systems A s ≈ y - b."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .randmat import svd_checked

RANK_TOL = 1e-10
LP_CERT_TOL = 1e-7


class RankDeficientError(ValueError):
    def __init__(self, rank, n, sigma_min, sigma_max):
        super().__init__(
            f"design matrix is rank deficient: numerical rank {rank} < {n} "
            f"(sigma_min={sigma_min:.3g}, sigma_max={sigma_max:.3g})")
        self.rank = rank
        self._args = (rank, n, sigma_min, sigma_max)

    def __reduce__(self):
        return (type(self), self._args)


class LPDecodeError(RuntimeError):
    def __init__(self, message, incumbent=None, objective=None):
        super().__init__(message)
        self.incumbent = incumbent
        self.objective = objective

    def __reduce__(self):
        return (type(self), (str(self), self.incumbent, self.objective))


@dataclass(frozen=True)
class LinearSystem:
    """Encodes ``A @ s ≈ y - b``.  ``row_mask[i]`` True drops row i."""

    A: np.ndarray
    b: np.ndarray
    y: np.ndarray
    row_mask: np.ndarray | None = None

    def __post_init__(self):
        A = np.asarray(self.A)
        if A.ndim != 2:
            raise ValueError("A must be 2-d")
        m = A.shape[0]
        b = np.asarray(self.b)
        y = np.asarray(self.y)
        if b.shape != (m,) or y.shape != (m,):
            raise ValueError(f"b and y must have length {m}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "y", y)
        if self.row_mask is not None:
            mask = np.asarray(self.row_mask, dtype=bool)
            if mask.shape != (m,):
                raise ValueError(f"row_mask must have length {m}")
            object.__setattr__(self, "row_mask", mask)

    @property
    def kept(self) -> np.ndarray:
        m = self.A.shape[0]
        return np.ones(m, bool) if self.row_mask is None else ~self.row_mask

    def reduced(self):
        """(A, z) restricted to kept rows with z = y - b, as floats."""
        keep = self.kept
        A = np.asarray(self.A[keep], dtype=float)
        z = np.asarray(self.y[keep], dtype=float) - np.asarray(self.b[keep], dtype=float)
        return A, z

    def residual(self, s) -> np.ndarray:
        A, z = self.reduced()
        return A @ np.asarray(s, dtype=float) - z


@dataclass
class DecodeResult:
    s_real: np.ndarray
    s_bits: np.ndarray
    sigma_min: float
    residual_l2: float
    residual_l1: float
    wall_time: float
    rows_used: int
    rows_dropped: int
    rank_tol: float = RANK_TOL
    duality_gap: float | None = None


def round_to_bits(v) -> np.ndarray:
    """1 where v >= 1/2, else 0."""
    return (np.asarray(v, dtype=float) >= 0.5).astype(np.int64)


def _prepare(sys: LinearSystem):
    A, z = sys.reduced()
    m, n = A.shape
    if m < n:
        raise ValueError(f"only {m} usable rows for {n} unknowns")
    return A, z


def least_squares_decode(sys: LinearSystem) -> DecodeResult:
    """s_real = A_inv (y - b) with A_inv = Q diag(1/sigma) P^T from the SVD."""
    t0 = time.perf_counter()
    A, z = _prepare(sys)
    P, sv, Qt = svd_checked(A)
    n = A.shape[1]
    if sv[-1] <= RANK_TOL * sv[0]:
        rank = int(np.count_nonzero(sv > RANK_TOL * sv[0]))
        raise RankDeficientError(rank, n, sv[-1], sv[0])
    s_real = Qt.T @ ((P.T @ z) / sv)
    r = A @ s_real - z
    return DecodeResult(
        s_real, round_to_bits(s_real), float(sv[-1]),
        float(np.linalg.norm(r)), float(np.abs(r).sum()),
        time.perf_counter() - t0, A.shape[0], int((~sys.kept).sum()))


def l1_decode(sys: LinearSystem, box: bool = False, max_iter: int | None = None) -> DecodeResult:
    """argmin_s ||A s - (y - b)||_1 via the LP

        min sum(t)  s.t.  A s - t <= z,  -A s - t <= -z.

    The returned point is certified with the LP dual: w = mu2 - mu1 satisfies
    |w| <= 1 and A^T w ≈ 0, and z^T w must match the primal objective.
    ``box`` restricts s to [0, 1]^n.
    """
    t0 = time.perf_counter()
    A, z = _prepare(sys)
    m, n = A.shape
    sv = svd_checked(A)[1]
    I = sparse.identity(m, format="csr")
    As = sparse.csr_matrix(A)
    G = sparse.vstack([sparse.hstack([As, -I]), sparse.hstack([-As, -I])], format="csr")
    h = np.concatenate([z, -z])
    c = np.concatenate([np.zeros(n), np.ones(m)])
    s_bounds = (0.0, 1.0) if box else (None, None)
    bounds = [s_bounds] * n + [(0.0, None)] * m
    options = {"presolve": True}
    if max_iter is not None:
        options["maxiter"] = max_iter
    res = linprog(c, A_ub=G, b_ub=h, bounds=bounds, method="highs", options=options)
    if res.status != 0 or res.x is None:
        inc = None if res.x is None else res.x[:n]
        raise LPDecodeError(f"LP solver failed (status {res.status}): {res.message}",
                            incumbent=inc, objective=res.fun)
    s_real = res.x[:n]
    r = A @ s_real - z
    primal = float(np.abs(r).sum())
    gap = None
    if not box:
        marg = res.ineqlin.marginals
        w = marg[:m] - marg[m:]
        dual = float(z @ w)
        scale = 1.0 + float(np.abs(np.asarray(sys.y, dtype=float)[sys.kept]).sum())
        gap = abs(primal - dual)
        infeas = float(np.abs(A.T @ w).max(initial=0.0)) * (1.0 + float(np.abs(s_real).max()))
        if (gap > LP_CERT_TOL * scale or np.abs(w).max(initial=0.0) > 1 + 1e-7
                or infeas > LP_CERT_TOL * scale):
            raise LPDecodeError(
                f"LP optimality certificate failed (gap={gap:.3g}, dual infeasibility={infeas:.3g})",
                incumbent=s_real, objective=primal)
    return DecodeResult(
        s_real, round_to_bits(s_real), float(sv[-1]),
        float(np.linalg.norm(r)), primal, time.perf_counter() - t0,
        m, int((~sys.kept).sum()), duality_gap=gap)


DECODERS = {"ls": least_squares_decode, "lp": l1_decode}


def decode(sys: LinearSystem, decoder: str) -> DecodeResult:
    try:
        return DECODERS[decoder](sys)
    except KeyError:
        raise ValueError(f"unknown decoder {decoder!r}") from None


DECODE_CSV_HEADER = "n,m,sigma_min,res_l2,res_l1,hamming,seed,wall_ms"


def decode_csv_row(res: DecodeResult, hamming: float, seed: int, wall_ms: float | None = None) -> str:
    wall = res.wall_time * 1e3 if wall_ms is None else wall_ms
    return (f"{res.s_real.shape[0]},{res.rows_used},{res.sigma_min:.10g},"
            f"{res.residual_l2:.10g},{res.residual_l1:.10g},{hamming:.10g},{seed},{wall:.3f}")
