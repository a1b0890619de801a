"""Reductions from each release type to a LinearSystem, plus end-to-end
attack orchestration and scoring."""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .boolfunc import (BooleanFunction, decompose_last_variable,
                       is_nondegenerate_by_degree, pm_parts)
from .decode import DecodeResult, LinearSystem, decode
from .randmat import TauRandomSpec, row_function_matrix, sample_entries
from .release import (DEFAULT_ROW_CAP, Database, LossFunction, NoiseSpec,
                      ReleaseBundle, RowCapExceeded, release_counts,
                      release_estimators, sigmoid)

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def derive_seed(master: int, index: int) -> int:
    """Per-trial seed: splitmix64(splitmix64(master) ^ index)."""
    return splitmix64(splitmix64(master & MASK64) ^ (index & MASK64))


class AttackError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause

    def __reduce__(self):
        return (type(self), (self.stage, self.cause))


def hamming_fraction(s, s_hat) -> float:
    s = np.asarray(s)
    s_hat = np.asarray(s_hat)
    if s.shape != s_hat.shape:
        raise ValueError(f"length mismatch: {s.shape} vs {s_hat.shape}")
    return float(np.count_nonzero(s != s_hat)) / s.size


# -- builders ---------------------------------------------------------------

def _binary_T(U) -> np.ndarray:
    U = np.asarray(U)
    if U.ndim != 2 or not np.isin(U, (0, 1)).all():
        raise ValueError("boolean systems need a binary n x d matrix U")
    return U.T.astype(np.int64)


def _check_len(y, m):
    y = np.asarray(y)
    if y.shape != (m,):
        raise ValueError(f"released vector has length {y.shape[0] if y.ndim else 0}, expected {m}")
    return y


def _check_rows(d, k, row_cap):
    if d ** k > row_cap:
        raise RowCapExceeded(f"d^k = {d ** k} exceeds the row cap of {row_cap}")


def build_boolean_system(U, f: BooleanFunction, y, row_cap: int = DEFAULT_ROW_CAP) -> LinearSystem:
    """{0,1}-domain system y = b_f + Pi_{f2}(T, ..., T) s with T = U^T."""
    T = _binary_T(U)
    k = f.arity - 1
    _check_rows(T.shape[0], k, row_cap)
    y = _check_len(y, T.shape[0] ** k)
    if not is_nondegenerate_by_degree(f):
        warnings.warn(f"{f} is degenerate; the attack matrix may be singular")
    f0, _, f2 = decompose_last_variable(f)
    A = row_function_matrix(f2, *[T] * k)
    b = row_function_matrix(f0, *[T] * k).sum(axis=1)
    return LinearSystem(A, b, y)


def build_pm_boolean_system(U, f: BooleanFunction, y, row_cap: int = DEFAULT_ROW_CAP) -> LinearSystem:
    """±1-domain system y = q_g + Pi_{g2}(V, ..., V) s with V = 2U^T - 1."""
    T = _binary_T(U)
    n = T.shape[1]
    k = f.arity - 1
    _check_rows(T.shape[0], k, row_cap)
    y = _check_len(y, T.shape[0] ** k)
    if not is_nondegenerate_by_degree(f):
        warnings.warn(f"{f} is degenerate; the attack matrix may be singular")
    V = 2 * T - 1
    g2, g3 = pm_parts(f)
    A = row_function_matrix(g2, *[V] * k)
    twice_q = row_function_matrix(g3, *[V] * k).sum(axis=1) + n - A.sum(axis=1)
    assert not (twice_q % 2).any()
    return LinearSystem(A, twice_q // 2, y)


def _real_U(U, theta, k=1):
    U = np.asarray(U, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if U.ndim != 2 or theta.shape != (U.shape[1],):
        raise ValueError(f"need U with {theta.shape[0] if theta.ndim else '?'} columns "
                         f"and one estimate per column")
    if U.shape[1] % k:
        raise ValueError(f"d = {U.shape[1]} is not a multiple of k = {k}")
    return U, theta


def _row_mask(theta, mask):
    out = np.isnan(theta)
    if mask is not None:
        out = out | np.asarray(mask, dtype=bool)
    return out


def build_linreg_system(U, theta, mask=None, k: int = 1) -> LinearSystem:
    """U^T s ≈ (U_(i)^T U_(i) theta_i) stacked over blocks of k columns."""
    U, theta = _real_U(U, theta, k)
    rm = _row_mask(theta, mask)
    th = np.nan_to_num(theta)
    if k == 1:
        y = np.einsum("ji,ji->i", U, U) * th
    else:
        y = np.empty_like(th)
        for i in range(U.shape[1] // k):
            cols = slice(i * k, (i + 1) * k)
            block = U[:, cols]
            y[cols] = block.T @ block @ th[cols]
        # a failed block drops all of its rows
        rm = rm.reshape(-1, k).any(axis=1).repeat(k)
    return LinearSystem(U.T.copy(), np.zeros(U.shape[1]), y, rm)


def build_logreg_system(U, theta, mask=None) -> LinearSystem:
    """U^T s ≈ (<U_(i), sigmoid(theta_i U_(i))>)_i."""
    U, theta = _real_U(U, theta)
    rm = _row_mask(theta, mask)
    th = np.nan_to_num(theta)
    y = np.einsum("ji,ji->i", U, sigmoid(U * th[None, :]))
    return LinearSystem(U.T.copy(), np.zeros(U.shape[1]), y, rm)


def build_mest_system(U, theta, loss: LossFunction, mask=None) -> LinearSystem:
    """Row i: sum_j ell0(theta_i; U_ji) + ell2(theta_i; U_ji) s_j ≈ 0."""
    U, theta = _real_U(U, theta)
    if not hasattr(loss, "ell0") or not hasattr(loss, "ell2"):
        raise ValueError("loss has no binary decomposition")
    rm = _row_mask(theta, mask)
    th = np.nan_to_num(theta)[None, :]
    A = np.broadcast_to(loss.ell2(th, U), U.shape).T.copy()
    b = np.broadcast_to(loss.ell0(th, U), U.shape).sum(axis=0)
    return LinearSystem(A, b, np.zeros(U.shape[1]), rm)


# -- orchestration ----------------------------------------------------------

MECHANISMS = ("boolean-count", "linreg", "logreg", "mest")


@dataclass(frozen=True)
class Mechanism:
    """What gets released.  ``system`` picks the boolean reduction:
    ``auto`` uses the {0,1} system for least squares and the ±1 system for LP."""

    kind: str
    f: BooleanFunction | None = None
    loss: LossFunction | None = None
    k: int = 1
    normalize: bool = False
    system: str = "auto"
    row_cap: int = DEFAULT_ROW_CAP

    def __post_init__(self):
        if self.kind not in MECHANISMS:
            raise ValueError(f"unknown mechanism {self.kind!r}")
        if self.kind == "boolean-count":
            if self.f is None:
                raise ValueError("boolean-count needs a function f")
            if self.f.arity != self.k + 1:
                raise ValueError(f"f has arity {self.f.arity}, expected k+1 = {self.k + 1}")
        if self.kind == "mest" and self.loss is None:
            raise ValueError("mest needs a loss")
        if self.kind in ("logreg", "mest") and self.k != 1:
            raise ValueError(f"{self.kind} supports k = 1 only")
        if self.system not in ("auto", "zero-one", "pm"):
            raise ValueError(f"unknown system {self.system!r}")

    @property
    def tag(self) -> str:
        return self.kind if self.kind != "mest" else f"mest:{self.loss.name}"


@dataclass
class AttackReport:
    mechanism: str
    decoder: str
    n: int
    d: int
    k: int
    noise: NoiseSpec
    hamming_fraction: float
    sigma_min: float
    seed: int
    wall_time: float
    m: int = 0
    rows_dropped: int = 0
    max_rhs_noise: float = 0.0
    ls_bound: float | None = None
    s_hat: np.ndarray | None = field(default=None, repr=False)
    decode: DecodeResult | None = field(default=None, repr=False)
    bundle: ReleaseBundle | None = field(default=None, repr=False)
    database: Database | None = field(default=None, repr=False)

    @property
    def hamming(self) -> int:
        return int(round(self.hamming_fraction * self.n))


def _stage(name, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except AttackError:
        raise
    except Exception as exc:  # noqa: BLE001 - relabelled with the stage
        raise AttackError(name, exc) from exc


def release(db: Database, mech: Mechanism, noise: NoiseSpec) -> ReleaseBundle:
    if mech.kind == "boolean-count":
        return release_counts(db, mech.f, noise, normalize=mech.normalize, row_cap=mech.row_cap)
    est = {"linreg": "linear", "logreg": "logistic", "mest": "mest"}[mech.kind]
    return release_estimators(db, est, noise, loss=mech.loss, k=mech.k)


def build_system(db: Database, mech: Mechanism, bundle: ReleaseBundle, decoder: str) -> LinearSystem:
    if mech.kind == "boolean-count":
        y = bundle.values * db.n if bundle.normalized else bundle.values
        use_pm = mech.system == "pm" or (mech.system == "auto" and decoder == "lp")
        builder = build_pm_boolean_system if use_pm else build_boolean_system
        return builder(db.U, mech.f, y, row_cap=mech.row_cap)
    mask = bundle.missing
    if mech.kind == "linreg":
        return build_linreg_system(db.U, bundle.values, mask, k=mech.k)
    if mech.kind == "logreg":
        return build_logreg_system(db.U, bundle.values, mask)
    if decoder != "ls":
        raise ValueError("general M-estimator attacks use least-squares decoding only")
    return build_mest_system(db.U, bundle.values, mech.loss, mask)


def run_attack(db: Database, mech: Mechanism, noise: NoiseSpec, decoder: str,
               seed: int = 0) -> AttackReport:
    """release -> build system -> decode -> score."""
    if decoder not in ("ls", "lp"):
        raise ValueError(f"unknown decoder {decoder!r}")
    if mech.kind == "boolean-count" and not db.is_binary:
        raise ValueError("boolean mechanisms need a binary U")
    t0 = time.perf_counter()
    bundle = _stage("release", release, db, mech, noise)
    sys = _stage("build", build_system, db, mech, bundle, decoder)
    res = _stage("decode", decode, sys, decoder)
    hf = hamming_fraction(db.s, res.s_bits)

    rhs_noise = 0.0
    ls_bound = None
    if mech.kind == "boolean-count" and bundle.error is not None:
        scale = db.n if bundle.normalized else 1.0
        rhs_noise = float(np.abs(bundle.error).max(initial=0.0)) * scale
        if decoder == "ls":
            ls_bound = 4.0 * res.rows_used * rhs_noise ** 2 / res.sigma_min ** 2
    return AttackReport(
        mech.tag, decoder, db.n, db.d, mech.k, noise, hf, res.sigma_min, seed,
        time.perf_counter() - t0, m=res.rows_used, rows_dropped=res.rows_dropped,
        max_rhs_noise=rhs_noise, ls_bound=ls_bound, s_hat=res.s_bits, decode=res,
        bundle=bundle, database=db)


def generate_database(n: int, d: int, u_spec: TauRandomSpec, seed: int) -> Database:
    """Random U (n x d) from ``u_spec`` and uniformly random secret bits."""
    rng = np.random.default_rng(seed)
    U = sample_entries(u_spec, (n, d), rng)
    s = rng.integers(0, 2, n)
    return Database(U, s)


def run_trial(n: int, d: int, mech: Mechanism, noise: NoiseSpec, decoder: str,
              master_seed: int, trial: int, u_spec: TauRandomSpec | None = None,
              U=None) -> AttackReport:
    """One seeded trial: data from derive_seed(master, 2*trial), noise from
    derive_seed(master, 2*trial + 1).  A fixed ``U`` replaces the random one."""
    seed = derive_seed(master_seed, trial)
    data_seed, noise_seed = derive_seed(seed, 0), derive_seed(seed, 1)
    if u_spec is None:
        u_spec = TauRandomSpec("bernoulli01" if mech.kind == "boolean-count"
                               else "uniform-symmetric")
    if U is None:
        db = generate_database(n, d, u_spec, data_seed)
    else:
        s = np.random.default_rng(data_seed).integers(0, 2, np.asarray(U).shape[0])
        db = Database(np.asarray(U), s)
    noise = NoiseSpec(noise.kind, noise.beta, noise.gamma, noise.gross_magnitude, noise_seed)
    return run_attack(db, mech, noise, decoder, seed=seed)
