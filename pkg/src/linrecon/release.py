"""Simulated statistical releases: exact boolean-function counts and per-column
regression / M-estimators, corrupted by configurable noise."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .boolfunc import BooleanFunction

DEFAULT_ROW_CAP = 10 ** 6
DEFAULT_THETA_CAP = 50.0


class RowCapExceeded(ValueError):
    pass


class FitError(RuntimeError):
    """Estimator fit failed; carries the last iterate and gradient magnitude."""

    def __init__(self, message, theta=None, grad=None):
        super().__init__(message)
        self.theta = theta
        self.grad = grad

    def __reduce__(self):
        return (type(self), (str(self), self.theta, self.grad))


@dataclass(frozen=True)
class Database:
    """Nonsensitive attributes ``U`` (n x d) and the secret bit column ``s``."""

    U: np.ndarray
    s: np.ndarray

    def __post_init__(self):
        U = np.array(self.U)
        s = np.array(self.s).astype(np.int64)
        if U.ndim != 2:
            raise ValueError("U must be a 2-d matrix")
        if s.shape != (U.shape[0],):
            raise ValueError(f"s has shape {s.shape}, expected ({U.shape[0]},)")
        if not np.isin(s, (0, 1)).all():
            raise ValueError("secret bits must be 0 or 1")
        U.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "s", s)

    @property
    def n(self) -> int:
        return self.U.shape[0]

    @property
    def d(self) -> int:
        return self.U.shape[1]

    @property
    def is_binary(self) -> bool:
        return bool(np.isin(self.U, (0, 1)).all())


# -- noise ------------------------------------------------------------------

NOISE_NONE = "none"
NOISE_BOUNDED = "bounded-uniform"
NOISE_GROSS = "gross-plus-bounded"


@dataclass(frozen=True)
class NoiseSpec:
    kind: str = NOISE_NONE
    beta: float = 0.0
    gamma: float = 0.0
    gross_magnitude: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in (NOISE_NONE, NOISE_BOUNDED, NOISE_GROSS):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if not 0 <= self.gamma < 1:
            raise ValueError("gamma must lie in [0, 1)")


def apply_noise(y, spec: NoiseSpec):
    """Return ``(noisy, error)`` with ``noisy = y + error``.

    ``gross-plus-bounded`` corrupts exactly floor(gamma*m) positions, chosen
    uniformly without replacement, by ±gross_magnitude; every other position
    gets uniform[-beta, beta].
    """
    y = np.asarray(y, dtype=float)
    m = y.shape[0]
    if spec.kind == NOISE_NONE:
        return y.copy(), np.zeros(m)
    rng = np.random.default_rng(spec.seed)
    err = rng.uniform(-spec.beta, spec.beta, size=m)
    if spec.kind == NOISE_GROSS:
        count = math.floor(spec.gamma * m)
        pos = rng.choice(m, size=count, replace=False)
        err[pos] = spec.gross_magnitude * rng.choice((-1.0, 1.0), size=count)
    return y + err, err


def is_small(e, a: float, b: float) -> bool:
    """(a, b)-small: at least a (1-a) fraction of entries have |e_i| <= b."""
    e = np.abs(np.asarray(e, dtype=float))
    return np.count_nonzero(e <= b) >= (1 - a) * e.size


# -- boolean-count releases -------------------------------------------------

def sigma_f(db: Database, f: BooleanFunction, row_cap: int = DEFAULT_ROW_CAP) -> np.ndarray:
    """Counts sum_i f(U[i, j1], ..., U[i, jk], s_i) for every J in [d]^k."""
    if not db.is_binary:
        raise ValueError("boolean-count releases need a binary U")
    k = f.arity - 1
    if k < 1:
        raise ValueError("f must have arity >= 2")
    rows = db.d ** k
    if rows > row_cap:
        raise RowCapExceeded(f"d^k = {rows} exceeds the row cap of {row_cap}")
    U = db.U.astype(np.int64)
    table = np.asarray(f.table, dtype=np.int64)
    # index into f's table: variable i of J contributes bit i, s the top bit;
    # built one j1 slice at a time to bound memory at n * d^(k-1)
    rest = np.zeros((db.n,) + (db.d,) * (k - 1), dtype=np.int64)
    for i in range(1, k):
        shape = [db.n] + [1] * (k - 1)
        shape[i] = db.d
        rest = rest + (U.reshape(shape) << i)
    rest = rest + (db.s.reshape([db.n] + [1] * (k - 1)) << k)
    out = np.empty((db.d, db.d ** (k - 1)), dtype=np.int64)
    for j1 in range(db.d):
        idx = rest + U[:, j1].reshape([db.n] + [1] * (k - 1))
        out[j1] = table[idx].sum(axis=0).reshape(-1)
    return out.reshape(-1)


# -- losses -----------------------------------------------------------------

def sigmoid(t):
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class LossFunction:
    """Per-record loss l(theta; x, y) for scalar theta and binary y.

    The gradient in theta is defined through its binary-y decomposition
    ``gradient = ell0 + ell2 * y``; ``curvature`` is d(gradient)/d(theta).
    ``lipschitz`` bounds |curvature| for x in [-1, 1].
    """

    name: str
    value: Callable
    ell0: Callable
    ell2: Callable
    curvature: Callable
    lipschitz: float

    def gradient(self, theta, x, y):
        return self.ell0(theta, x) + self.ell2(theta, x) * y


def _squared():
    return LossFunction(
        "squared",
        value=lambda t, x, y: (y - x * t) ** 2,
        ell0=lambda t, x: 2.0 * x * x * t,
        ell2=lambda t, x: -2.0 * x,
        curvature=lambda t, x, y: 2.0 * x * x,
        lipschitz=2.0,
    )


def _logistic():
    def value(t, x, y):
        z = x * t
        return np.logaddexp(0.0, z) - y * z

    return LossFunction(
        "logistic",
        value=value,
        ell0=lambda t, x: x * sigmoid(x * t),
        ell2=lambda t, x: -x + 0.0 * t,
        curvature=lambda t, x, y: x * x * sigmoid(x * t) * (1.0 - sigmoid(x * t)),
        lipschitz=0.25,
    )


def _huber(delta=0.5):
    def psi(r):
        return np.clip(r, -delta, delta)

    def value(t, x, y):
        r = np.abs(y - x * t)
        return np.where(r <= delta, 0.5 * r * r, delta * (r - 0.5 * delta))

    def g(t, x, y):
        return -x * psi(y - x * t)

    def curv(t, x, y):
        return x * x * (np.abs(y - x * t) <= delta)

    return LossFunction(
        "huber",
        value=value,
        ell0=lambda t, x: g(t, x, 0.0),
        ell2=lambda t, x: g(t, x, 1.0) - g(t, x, 0.0),
        curvature=curv,
        lipschitz=1.0,
    )


LOSSES = {"squared": _squared, "logistic": _logistic, "huber": _huber}


def get_loss(name: str) -> LossFunction:
    try:
        return LOSSES[name]()
    except KeyError:
        raise ValueError(f"unknown loss {name!r}; known: {sorted(LOSSES)}") from None


def variance_condition(loss: LossFunction, theta: float, samples: int = 20000,
                       seed: int = 0, floor: float = 1e-3) -> float:
    """Monte-Carlo Var_x[ell2(theta; x)] for x ~ uniform[-1, 1].

    Warns when the estimate is below ``floor``.
    """
    x = np.random.default_rng(seed).uniform(-1.0, 1.0, samples)
    var = float(np.var(loss.ell2(theta, x)))
    if var < floor:
        warnings.warn(f"{loss.name}: Var[ell2] = {var:.3g} below floor {floor}")
    return var


# -- estimators -------------------------------------------------------------

def fit_linear_regression(x, s) -> float:
    x = np.asarray(x, dtype=float)
    xx = float(x @ x)
    if xx <= 0:
        raise FitError("degenerate regressor")
    return float(x @ np.asarray(s, dtype=float)) / xx


def fit_linear_regression_block(X, s) -> np.ndarray:
    """(X^T X)^{-1} X^T s for an n x k block of regressors."""
    X = np.asarray(X, dtype=float)
    G = X.T @ X
    if np.linalg.matrix_rank(G) < G.shape[0]:
        raise FitError("degenerate regressor block")
    return np.linalg.solve(G, X.T @ np.asarray(s, dtype=float))


@dataclass
class FitResult:
    theta: float
    grad: float
    iterations: int
    separated: bool = False


def _logistic_loglik(theta, x, s):
    z = theta * x
    return float(np.sum(s * z - np.logaddexp(0.0, z)))


def fit_logistic_regression(x, s, max_iter: int = 100, tol: float = 1e-10,
                            theta_cap: float = DEFAULT_THETA_CAP) -> FitResult:
    """Logistic MLE through the origin by damped Newton from theta = 0.

    Separable data (log-likelihood gradient of one sign everywhere) returns
    ±theta_cap with ``separated`` set.
    """
    x = np.asarray(x, dtype=float)
    s = np.asarray(s, dtype=float)
    if not np.any(x):
        raise FitError("degenerate regressor")
    # gradient x^T (s - zeta): terms with x>0,s=1 or x<0,s=0 push theta up
    up = np.any((x > 0) & (s == 1)) or np.any((x < 0) & (s == 0))
    down = np.any((x > 0) & (s == 0)) or np.any((x < 0) & (s == 1))
    if not (up and down):
        theta = theta_cap if up else -theta_cap
        grad = float(x @ (s - sigmoid(theta * x)))
        return FitResult(theta, grad, 0, separated=True)

    theta = 0.0
    for it in range(1, max_iter + 1):
        zeta = sigmoid(theta * x)
        grad = float(x @ (s - zeta))
        if abs(grad) <= tol:
            return FitResult(theta, grad, it - 1)
        hess = float(np.sum(x * x * zeta * (1.0 - zeta)))
        step = grad / hess if hess > 0 else math.copysign(1.0, grad)
        ll = _logistic_loglik(theta, x, s)
        while step != 0 and _logistic_loglik(theta + step, x, s) < ll:
            step *= 0.5
            if abs(step) < 1e-300:
                break
        theta += step
        if abs(theta) >= theta_cap:
            theta = math.copysign(theta_cap, theta)
            grad = float(x @ (s - sigmoid(theta * x)))
            return FitResult(theta, grad, it, separated=True)
    grad = float(x @ (s - sigmoid(theta * x)))
    if abs(grad) <= tol:
        return FitResult(theta, grad, max_iter)
    raise FitError(f"logistic fit did not converge in {max_iter} iterations",
                   theta=theta, grad=abs(grad))


def fit_mestimator_1d(loss: LossFunction, x, s, tol: float = 1e-10,
                      max_iter: int = 200,
                      theta_cap: float = DEFAULT_THETA_CAP) -> FitResult:
    """Root of sum_j gradient(theta; x_j, s_j) in [-cap, cap].

    Newton steps that leave the current sign-change bracket fall back to
    bisection.  The summed gradient must be continuous and change sign.
    """
    x = np.asarray(x, dtype=float)
    s = np.asarray(s, dtype=float)

    def G(t):
        return float(np.sum(loss.gradient(t, x, s)))

    def dG(t):
        return float(np.sum(loss.curvature(t, x, s)))

    lo, hi = -theta_cap, theta_cap
    glo, ghi = G(lo), G(hi)
    if abs(glo) <= tol:
        return FitResult(lo, glo, 0)
    if abs(ghi) <= tol:
        return FitResult(hi, ghi, 0)
    if glo * ghi > 0:
        raise FitError("no stationary point in range", theta=None, grad=min(abs(glo), abs(ghi)))
    if glo > 0:
        lo, hi = hi, lo  # keep G(lo) < 0 < G(hi)
    theta = 0.0 if min(lo, hi) < 0 < max(lo, hi) else 0.5 * (lo + hi)
    for it in range(1, max_iter + 1):
        g = G(theta)
        if abs(g) <= tol:
            return FitResult(theta, g, it - 1)
        if g < 0:
            lo = theta
        else:
            hi = theta
        dg = dG(theta)
        cand = theta - g / dg if dg != 0 else None
        if cand is None or not (min(lo, hi) < cand < max(lo, hi)):
            cand = 0.5 * (lo + hi)
        if cand == theta:
            break
        theta = cand
    g = G(theta)
    if abs(g) <= tol:
        return FitResult(theta, g, max_iter)
    raise FitError(f"M-estimator did not reach tolerance {tol}", theta=theta, grad=abs(g))


# -- estimator releases -----------------------------------------------------

@dataclass
class ReleaseBundle:
    mechanism: str
    k: int
    values: np.ndarray
    metadata: dict = field(default_factory=dict)
    normalized: bool = False
    exact: np.ndarray | None = None
    error: np.ndarray | None = None

    @property
    def missing(self) -> np.ndarray:
        """Entries a decoder should drop: failed fits and separated columns."""
        out = np.isnan(self.values)
        for i in self.metadata.get("separated", ()):
            out[i] = True
        return out


ESTIMATORS = ("linear", "logistic", "mest")


def release_estimators(db: Database, estimator: str, noise: NoiseSpec,
                       loss: LossFunction | None = None, k: int = 1,
                       theta_cap: float = DEFAULT_THETA_CAP,
                       tol: float = 1e-10) -> ReleaseBundle:
    """Fit one estimator per column (or per k-column block for ``linear``)
    against ``s`` and add noise to the fitted values.

    Failed fits become NaN and are listed in ``metadata["failed"]``;
    separated logistic fits are listed in ``metadata["separated"]``.
    """
    if estimator not in ESTIMATORS:
        raise ValueError(f"unknown estimator {estimator!r}")
    if k != 1 and estimator != "linear":
        raise ValueError("block estimators (k > 1) are only supported for linear regression")
    if estimator == "mest" and loss is None:
        raise ValueError("mest releases need a loss function")
    if db.d % k:
        raise ValueError(f"d = {db.d} is not a multiple of k = {k}")
    U = np.asarray(db.U, dtype=float)
    exact = np.full(db.d, np.nan)
    failed, separated, iters = [], [], []
    for i in range(db.d // k):
        cols = slice(i * k, (i + 1) * k)
        try:
            if estimator == "linear":
                if k == 1:
                    exact[i] = fit_linear_regression(U[:, i], db.s)
                else:
                    exact[cols] = fit_linear_regression_block(U[:, cols], db.s)
            elif estimator == "logistic":
                fit = fit_logistic_regression(U[:, i], db.s, tol=tol, theta_cap=theta_cap)
                exact[i] = fit.theta
                iters.append(fit.iterations)
                if fit.separated:
                    separated.append(i)
            else:
                fit = fit_mestimator_1d(loss, U[:, i], db.s, tol=tol, theta_cap=theta_cap)
                exact[i] = fit.theta
                iters.append(fit.iterations)
        except FitError:
            failed.append(i)
    noisy, err = apply_noise(np.nan_to_num(exact), noise)
    noisy[np.isnan(exact)] = np.nan
    meta = {
        "mechanism": estimator if estimator != "mest" else f"mest:{loss.name}",
        "k": k, "n": db.n, "d": db.d,
        "noise": noise.kind, "beta": noise.beta, "gamma": noise.gamma,
        "seed": noise.seed, "failed": failed, "separated": separated,
        "max_iterations": max(iters) if iters else 0,
    }
    if loss is not None:
        meta["loss"] = loss.name
    return ReleaseBundle(meta["mechanism"], k, noisy, meta, exact=exact, error=err)


def release_counts(db: Database, f: BooleanFunction, noise: NoiseSpec,
                   normalize: bool = False, row_cap: int = DEFAULT_ROW_CAP) -> ReleaseBundle:
    """Noisy Sigma_f(D), or Sigma_f(D)/n with noise added after scaling."""
    exact = sigma_f(db, f, row_cap=row_cap)
    base = exact / db.n if normalize else exact.astype(float)
    noisy, err = apply_noise(base, noise)
    meta = {
        "mechanism": "boolean-count", "k": f.arity - 1, "n": db.n, "d": db.d,
        "f": f.serialize(), "noise": noise.kind, "beta": noise.beta,
        "gamma": noise.gamma, "seed": noise.seed,
    }
    return ReleaseBundle("boolean-count", f.arity - 1, noisy, meta,
                         normalized=normalize, exact=exact, error=err)


# -- serialization ----------------------------------------------------------

def write_release(bundle: ReleaseBundle, csv_path, meta_path) -> None:
    """``index,value`` CSV plus a ``key=value`` sidecar of the metadata."""
    with open(csv_path, "w", newline="\n") as fh:
        fh.write("index,value\n")
        for i, v in enumerate(np.asarray(bundle.values, dtype=float)):
            fh.write(f"{i},{float(v)!r}\n")
    meta = dict(bundle.metadata)
    meta["normalized"] = bundle.normalized
    with open(meta_path, "w", newline="\n") as fh:
        for key in sorted(meta):
            val = meta[key]
            if isinstance(val, (list, tuple)):
                val = " ".join(str(v) for v in val)
            fh.write(f"{key}={val}\n")


def read_release(csv_path, meta_path) -> tuple[np.ndarray, dict]:
    with open(csv_path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != "index,value":
        raise ValueError(f"{csv_path}: expected header 'index,value'")
    values = np.array([float(ln.split(",")[1]) for ln in lines[1:] if ln], dtype=float)
    meta = {}
    with open(meta_path) as fh:
        for ln in fh:
            if ln.strip():
                key, _, val = ln.rstrip("\n").partition("=")
                meta[key] = val
    return values, meta
