"""Command-line harness: ``attack``, ``spectral``, ``sweep`` and ``selftest``.

Configs are flat ``key=value`` files with ``#`` comments.  Every CSV written
here starts with a ``#schema=1`` line followed by further ``#`` metadata
lines and a header.  Exit codes: 0 success, 2 configuration error,
3 runtime error.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import itertools
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import boolfunc as bf
from .attack import AttackError, Mechanism, derive_seed, run_trial
from .decode import DECODERS
from .randmat import (BERNOULLI01, RADEMACHER, RNG_NAME, TauRandomSpec,
                      gen_matrix, perturbed_matrix, read_matrix_csv,
                      row_function_matrix, spectral_report, write_matrix_csv)
from .release import (DEFAULT_ROW_CAP, LOSSES, NoiseSpec, get_loss,
                      write_release)

SCHEMA_VERSION = 1
SCHEMA_LINE = f"#schema={SCHEMA_VERSION}"
SEED_NOTE = f"#rng={RNG_NAME};trial_seed=splitmix64(splitmix64(master)^index)"
ATTACK_COLUMNS = ("mechanism", "decoder", "n", "d", "k", "beta", "gamma", "seed",
                  "hamming_fraction", "sigma_min", "wall_ms", "row_type", "hf_min", "hf_max")
SPECTRAL_COLUMNS = ("family", "h", "d", "n", "k", "seed", "sigma_min", "op_norm",
                    "euclid_ratio", "probes")
GRID_KEYS = ("beta", "d", "decoder", "f", "gamma", "gross_magnitude", "k", "loss", "n")
MAX_GRID_CELLS = 10 ** 4
DEFAULT_MEM_CAP = 2 * 1024 ** 3

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


class ConfigError(ValueError):
    pass


# -- config -----------------------------------------------------------------

def parse_config_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw.strip()!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = val
    return out


def read_config(path) -> dict[str, str]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
    return parse_config_text(text)


def _get(raw: dict, key: str, conv, default=None, required: bool = False):
    if key not in raw:
        if required:
            raise ConfigError(f"missing required key {key!r}")
        return default
    try:
        return conv(raw[key])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key!r}: {raw[key]!r} ({exc})") from None


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected true/false")


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2 ** 64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    return v


def _check_unknown(raw: dict, allowed) -> None:
    unknown = sorted(set(raw) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")


ATTACK_KEYS = ("mechanism", "f", "loss", "n", "d", "k", "noise", "beta", "beta_unit",
               "gamma", "gross_magnitude", "decoder", "trials", "master_seed", "out",
               "u_kind", "u_csv", "normalize", "system", "row_cap", "mem_cap",
               "matrix_out", "release_dir", "record_timing", "workers")
BETA_UNITS = ("abs", "sqrt_n", "inv_sqrt_n")


@dataclass(frozen=True)
class ExperimentConfig:
    mechanism: str
    n: int
    d: int
    k: int = 1
    f: str | None = None
    loss: str | None = None
    noise: str = "none"
    beta: float = 0.0
    beta_unit: str = "abs"
    gamma: float = 0.0
    gross_magnitude: float = 0.0
    decoder: str = "ls"
    trials: int = 1
    master_seed: int = 0
    out: str | None = None
    u_kind: str | None = None
    u_csv: str | None = None
    normalize: bool = False
    system: str = "auto"
    row_cap: int = DEFAULT_ROW_CAP
    mem_cap: int = DEFAULT_MEM_CAP
    matrix_out: str | None = None
    release_dir: str | None = None
    record_timing: bool = False
    workers: int | None = None
    U: np.ndarray | None = field(default=None, compare=False, repr=False)

    @property
    def beta_abs(self) -> float:
        if self.beta_unit == "sqrt_n":
            return self.beta * math.sqrt(self.n)
        if self.beta_unit == "inv_sqrt_n":
            return self.beta / math.sqrt(self.n)
        return self.beta

    def mechanism_obj(self) -> Mechanism:
        f = bf.parse_function(self.f, self.k + 1) if self.f else None
        loss = get_loss(self.loss) if self.loss else None
        return Mechanism(self.mechanism, f=f, loss=loss, k=self.k,
                         normalize=self.normalize, system=self.system,
                         row_cap=self.row_cap)

    def noise_spec(self) -> NoiseSpec:
        return NoiseSpec(self.noise, self.beta_abs, self.gamma, self.gross_magnitude)

    def u_spec(self) -> TauRandomSpec | None:
        return TauRandomSpec.parse(self.u_kind) if self.u_kind else None


def build_attack_config(raw: dict[str, str]) -> ExperimentConfig:
    """Parse and fully validate an attack config before any computation."""
    _check_unknown(raw, ATTACK_KEYS)
    U = None
    u_csv = _get(raw, "u_csv", str)
    if u_csv:
        try:
            U = read_matrix_csv(u_csv)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot load u_csv: {exc}") from None
    n = _get(raw, "n", int, None if U is None else U.shape[0], required=U is None)
    d = _get(raw, "d", int, None if U is None else U.shape[1], required=U is None)
    if U is not None and U.shape != (n, d):
        raise ConfigError(f"u_csv is {U.shape[0]}x{U.shape[1]} but config says n={n}, d={d}")
    cfg = ExperimentConfig(
        mechanism=_get(raw, "mechanism", str, required=True),
        n=n, d=d,
        k=_get(raw, "k", int, 1),
        f=_get(raw, "f", str),
        loss=_get(raw, "loss", str),
        noise=_get(raw, "noise", str, "none"),
        beta=_get(raw, "beta", float, 0.0),
        beta_unit=_get(raw, "beta_unit", str, "abs"),
        gamma=_get(raw, "gamma", float, 0.0),
        gross_magnitude=_get(raw, "gross_magnitude", float, 0.0),
        decoder=_get(raw, "decoder", str, "ls"),
        trials=_get(raw, "trials", int, 1),
        master_seed=_get(raw, "master_seed", _u64, 0),
        out=_get(raw, "out", str),
        u_kind=_get(raw, "u_kind", str),
        u_csv=u_csv,
        normalize=_get(raw, "normalize", _bool, False),
        system=_get(raw, "system", str, "auto"),
        row_cap=_get(raw, "row_cap", int, DEFAULT_ROW_CAP),
        mem_cap=_get(raw, "mem_cap", int, DEFAULT_MEM_CAP),
        matrix_out=_get(raw, "matrix_out", str),
        release_dir=_get(raw, "release_dir", str),
        record_timing=_get(raw, "record_timing", _bool, False),
        workers=_get(raw, "workers", int),
        U=U,
    )
    validate_attack_config(cfg)
    return cfg


def validate_attack_config(cfg: ExperimentConfig) -> None:
    if cfg.mechanism not in ("boolean-count", "linreg", "logreg", "mest"):
        raise ConfigError(f"unknown mechanism {cfg.mechanism!r}")
    if cfg.n < 1 or cfg.d < 1:
        raise ConfigError("n and d must be >= 1")
    if cfg.k < 1:
        raise ConfigError("k must be >= 1")
    if cfg.trials < 1:
        raise ConfigError("trials must be >= 1")
    if cfg.decoder not in DECODERS:
        raise ConfigError(f"unknown decoder {cfg.decoder!r}; use ls or lp")
    if cfg.beta_unit not in BETA_UNITS:
        raise ConfigError(f"beta_unit must be one of {', '.join(BETA_UNITS)}")
    if cfg.workers is not None and cfg.workers < 1:
        raise ConfigError("workers must be >= 1")
    try:
        cfg.noise_spec()
        if cfg.u_kind:
            cfg.u_spec()
        if cfg.loss and cfg.loss not in LOSSES:
            raise ValueError(f"unknown loss {cfg.loss!r}; known: {', '.join(sorted(LOSSES))}")
        mech = cfg.mechanism_obj()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if cfg.mechanism == "boolean-count":
        rows = cfg.d ** cfg.k
        if rows > cfg.row_cap:
            raise ConfigError(f"d^k = {rows} exceeds the row cap of {cfg.row_cap}")
        need = 8 * rows * cfg.n
        if need > cfg.mem_cap:
            raise ConfigError(f"attack matrix needs about {need} bytes, over the "
                              f"memory cap of {cfg.mem_cap}")
        if rows < cfg.n:
            raise ConfigError(f"d^k = {rows} rows cannot determine n = {cfg.n} unknowns")
        if cfg.u_kind and cfg.u_spec().kind != BERNOULLI01:
            raise ConfigError("boolean-count needs u_kind=bernoulli01")
        if cfg.U is not None and not np.isin(cfg.U, (0, 1)).all():
            raise ConfigError("boolean-count needs a binary u_csv matrix")
    else:
        if cfg.f:
            raise ConfigError(f"key 'f' does not apply to {cfg.mechanism}")
        if cfg.d % cfg.k:
            raise ConfigError(f"d = {cfg.d} is not a multiple of k = {cfg.k}")
        if cfg.d < cfg.n:
            raise ConfigError(f"d = {cfg.d} rows cannot determine n = {cfg.n} unknowns")
        if cfg.mechanism == "mest" and cfg.decoder != "ls":
            raise ConfigError("mest attacks use least-squares decoding only")
        if cfg.normalize:
            raise ConfigError("normalize applies to boolean-count only")
    if cfg.mechanism != "mest" and cfg.loss:
        raise ConfigError(f"key 'loss' does not apply to {cfg.mechanism}")
    del mech


# -- CSV helpers ------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def _csv_line(values) -> str:
    return ",".join(_fmt(v) for v in values) + "\n"


def read_csv(path_or_text, from_text: bool = False):
    """Return (meta_lines, header, rows) of a versioned CSV.

    Raises ValueError when the first line is not ``#schema=1``.
    """
    text = path_or_text if from_text else Path(path_or_text).read_text()
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#schema="):
        raise ValueError("missing #schema line")
    version = lines[0][len("#schema="):]
    if version != str(SCHEMA_VERSION):
        raise ValueError(f"unsupported CSV schema version {version!r}")
    meta = [ln for ln in lines[1:] if ln.startswith("#")]
    body = [ln for ln in lines[1:] if ln and not ln.startswith("#")]
    if not body:
        raise ValueError("missing header line")
    header = body[0].split(",")
    rows = [dict(zip(header, ln.split(","))) for ln in body[1:]]
    return meta, header, rows


def _emit(text: str, out: str | None) -> None:
    if out:
        tmp = f"{out}.tmp"
        with open(tmp, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, out)
    else:
        sys.stdout.write(text)


def _pool_map(fn, items, workers: int):
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as ex:
        return list(ex.map(fn, items))


def _default_workers() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


# -- attack -----------------------------------------------------------------

def _trial_row(job) -> tuple:
    cfg, trial = job
    rep = run_trial(cfg.n, cfg.d, cfg.mechanism_obj(), cfg.noise_spec(), cfg.decoder,
                    cfg.master_seed, trial, u_spec=cfg.u_spec(), U=cfg.U)
    if cfg.release_dir:
        base = Path(cfg.release_dir) / f"release_{trial}"
        write_release(rep.bundle, f"{base}.csv", f"{base}.meta")
    if cfg.matrix_out:
        p = Path(cfg.matrix_out)
        write_matrix_csv(p.with_name(f"{p.stem}_{trial}{p.suffix}"), rep.database.U)
    wall = rep.wall_time * 1e3 if cfg.record_timing else 0
    return (rep.mechanism, rep.decoder, rep.n, rep.d, rep.k, float(cfg.beta_abs),
            float(cfg.gamma), rep.seed, float(rep.hamming_fraction),
            float(rep.sigma_min), wall, "trial", None, None)


def attack_rows(cfg: ExperimentConfig, trial_offset: int = 0, workers: int = 1) -> list[tuple]:
    """Per-trial rows then one summary row (mean, min, max hamming fraction)."""
    if cfg.release_dir:
        Path(cfg.release_dir).mkdir(parents=True, exist_ok=True)
    jobs = [(cfg, trial_offset + t) for t in range(cfg.trials)]
    rows = _pool_map(_trial_row, jobs, workers)
    hf = np.array([r[8] for r in rows])
    sig = min(r[9] for r in rows)
    wall = sum(r[10] for r in rows)
    summary = (rows[0][0], cfg.decoder, cfg.n, cfg.d, cfg.k, float(cfg.beta_abs),
               float(cfg.gamma), cfg.master_seed, float(hf.mean()), float(sig), wall,
               "summary", float(hf.min()), float(hf.max()))
    return rows + [summary]


def cmd_attack(raw: dict, workers: int) -> str:
    cfg = build_attack_config(raw)
    buf = io.StringIO()
    buf.write(SCHEMA_LINE + "\n" + SEED_NOTE + "\n")
    buf.write(",".join(ATTACK_COLUMNS) + "\n")
    for row in attack_rows(cfg, workers=workers):
        buf.write(_csv_line(row))
    return buf.getvalue()


# -- spectral ---------------------------------------------------------------

SPECTRAL_KEYS = ("family", "h", "d", "n", "k", "seeds", "num_probes", "rank1_scale",
                 "master_seed", "out", "workers")
FAMILIES = ("identity", "rademacher", "rowfunc", "pmrowfunc", "perturbed")


@dataclass(frozen=True)
class SpectralConfig:
    family: str
    d_values: tuple[int, ...]
    n: int | None = None
    k: int = 1
    h: str = ""
    seeds: int = 1
    num_probes: int = 200
    rank1_scale: float = 0.0
    master_seed: int = 0
    out: str | None = None
    workers: int | None = None

    def n_for(self, d: int) -> int:
        if self.family == "identity":
            return d
        return self.n if self.n is not None else d

    def h_function(self):
        """Row function for rowfunc/pmrowfunc: ``f2:NAME``/``g2:NAME``/``g3:NAME``
        take that part of NAME over k+1 variables; otherwise a function of arity k."""
        text = self.h or ("f2:AND" if self.family == "rowfunc" else "g2:AND")
        part, sep, rest = text.partition(":")
        if sep and part in ("f0", "f2", "g2", "g3"):
            f = bf.parse_function(rest, self.k + 1)
            if part in ("f0", "f2"):
                f0, _, f2 = bf.decompose_last_variable(f)
                return f0 if part == "f0" else f2
            g2, g3 = bf.pm_parts(f)
            return g2 if part == "g2" else g3
        return bf.parse_function(text, self.k)


def build_spectral_config(raw: dict[str, str]) -> SpectralConfig:
    _check_unknown(raw, SPECTRAL_KEYS)
    family = _get(raw, "family", str, required=True)
    if family not in FAMILIES:
        raise ConfigError(f"unknown family {family!r}; known: {', '.join(FAMILIES)}")
    d_values = _get(raw, "d", lambda t: tuple(int(x) for x in t.split(",")), required=True)
    cfg = SpectralConfig(
        family=family, d_values=d_values,
        n=_get(raw, "n", int),
        k=_get(raw, "k", int, 1),
        h=_get(raw, "h", str, ""),
        seeds=_get(raw, "seeds", int, 1),
        num_probes=_get(raw, "num_probes", int, 200),
        rank1_scale=_get(raw, "rank1_scale", float, 0.0),
        master_seed=_get(raw, "master_seed", _u64, 0),
        out=_get(raw, "out", str),
        workers=_get(raw, "workers", int),
    )
    if cfg.k < 1 or cfg.seeds < 1 or cfg.num_probes < 1:
        raise ConfigError("k, seeds and num_probes must be >= 1")
    if cfg.rank1_scale < 0:
        raise ConfigError("rank1_scale must be >= 0")
    if cfg.h and family not in ("rowfunc", "pmrowfunc"):
        raise ConfigError(f"key 'h' does not apply to family {family}")
    if family in ("rowfunc", "pmrowfunc"):
        try:
            h = cfg.h_function()
        except ValueError as exc:
            raise ConfigError(f"bad h: {exc}") from None
        if h.arity != cfg.k:
            raise ConfigError(f"h has arity {h.arity}, expected k = {cfg.k}")
    for d in d_values:
        n = cfg.n_for(d)
        rows = d ** cfg.k if family in ("rowfunc", "pmrowfunc") else d
        if d < 1 or n < 1:
            raise ConfigError("d and n must be >= 1")
        if rows > DEFAULT_ROW_CAP:
            raise ConfigError(f"d^k = {rows} exceeds the row cap of {DEFAULT_ROW_CAP}")
        if rows < n:
            raise ConfigError(f"matrix with {rows} rows has fewer rows than columns ({n})")
        if family == "perturbed" and d < 2 * n:
            raise ConfigError("perturbed family needs d >= 2n")
    return cfg


def spectral_matrix(cfg: SpectralConfig, d: int, seed: int) -> np.ndarray:
    n = cfg.n_for(d)
    if cfg.family == "identity":
        return np.eye(d)
    if cfg.family == "rademacher":
        return gen_matrix(TauRandomSpec(RADEMACHER), d, n, seed)
    if cfg.family == "perturbed":
        return perturbed_matrix(d, n, cfg.rank1_scale, seed)
    T = gen_matrix(TauRandomSpec(BERNOULLI01), d, n, seed)
    if cfg.family == "pmrowfunc":
        T = 2 * T - 1
    return row_function_matrix(cfg.h_function(), *[T] * cfg.k)


def _spectral_row(job) -> tuple:
    cfg, d, seed = job
    rep = spectral_report(spectral_matrix(cfg, d, seed), cfg.num_probes, seed)
    if cfg.family in ("rowfunc", "pmrowfunc"):
        h = cfg.h or ("f2:AND" if cfg.family == "rowfunc" else "g2:AND")
    elif cfg.family == "perturbed":
        h = f"rank1={cfg.rank1_scale:g}"
    else:
        h = "-"
    k = cfg.k if cfg.family in ("rowfunc", "pmrowfunc") else 1
    return (cfg.family, h, d, cfg.n_for(d), k, seed, float(rep.sigma_min),
            float(rep.op_norm), float(rep.euclid_ratio_min), rep.probes_used)


def cmd_spectral(raw: dict, workers: int) -> str:
    cfg = build_spectral_config(raw)
    jobs = []
    for d in cfg.d_values:
        for j in range(cfg.seeds):
            jobs.append((cfg, d, derive_seed(cfg.master_seed, j)))
    rows = _pool_map(_spectral_row, jobs, workers)
    buf = io.StringIO()
    buf.write(SCHEMA_LINE + "\n" + SEED_NOTE + "\n")
    buf.write(",".join(SPECTRAL_COLUMNS) + "\n")
    for row in rows:
        buf.write(_csv_line(row))
    return buf.getvalue()


# -- sweep ------------------------------------------------------------------

def _grid(raw: dict[str, str]):
    axes = [k for k in GRID_KEYS if k in raw]
    values = [[v.strip() for v in raw[k].split(",")] for k in axes]
    for k, vals in zip(axes, values):
        if any(not v for v in vals):
            raise ConfigError(f"empty value in grid {k!r}")
    return axes, values


def _config_digest(raw: dict[str, str]) -> str:
    keep = {k: v for k, v in raw.items() if k not in ("out", "workers")}
    text = "\n".join(f"{k}={keep[k]}" for k in sorted(keep))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def sweep_cells(raw: dict[str, str]):
    """Validated (cell_index, grid_values, ExperimentConfig) for every cell."""
    axes, values = _grid(raw)
    total = math.prod(len(v) for v in values)
    if total > MAX_GRID_CELLS:
        raise ConfigError(f"grid has {total} cells, over the limit of {MAX_GRID_CELLS}")
    cells = []
    for idx, combo in enumerate(itertools.product(*values)):
        cell_raw = dict(raw)
        cell_raw.update(zip(axes, combo))
        try:
            cfg = build_attack_config(cell_raw)
        except ConfigError as exc:
            where = ", ".join(f"{a}={v}" for a, v in zip(axes, combo))
            raise ConfigError(f"grid cell {idx} ({where}): {exc}") from None
        cells.append((idx, combo, cfg))
    return axes, cells


def _sweep_job(job):
    idx, cfg = job
    return idx, attack_rows(cfg, trial_offset=idx * cfg.trials)


def _sweep_header(axes) -> list[str]:
    return ["cell", *(f"grid_{a}" for a in axes), *ATTACK_COLUMNS]


def _render_sweep(axes, digest, done: dict[int, list[str]]) -> str:
    buf = io.StringIO()
    buf.write(SCHEMA_LINE + "\n" + SEED_NOTE + "\n" + f"#config={digest}\n")
    buf.write(",".join(_sweep_header(axes)) + "\n")
    for idx in sorted(done):
        buf.writelines(done[idx])
    return buf.getvalue()


def _load_completed(out: str, axes, digest) -> dict[int, list[str]]:
    if not out or not Path(out).exists():
        return {}
    try:
        meta, header, _ = read_csv(out)
    except ValueError as exc:
        raise ConfigError(f"cannot resume from {out}: {exc}") from None
    if f"#config={digest}" not in meta:
        raise ConfigError(f"{out} was written by a different sweep config; "
                          f"remove it or choose another output path")
    if header != _sweep_header(axes):
        raise ConfigError(f"{out} has an unexpected header")
    by_cell: dict[int, list[str]] = {}
    for ln in Path(out).read_text().splitlines():
        if ln and not ln.startswith("#") and not ln.startswith("cell,"):
            by_cell.setdefault(int(ln.split(",", 1)[0]), []).append(ln + "\n")
    # only cells whose summary row made it to disk count as complete
    return {c: ls for c, ls in by_cell.items() if ",summary," in ls[-1]}


def cmd_sweep(raw: dict, workers: int) -> str | None:
    axes, cells = sweep_cells(raw)
    out = raw.get("out")
    digest = _config_digest(raw)
    done = _load_completed(out, axes, digest)
    todo = [(idx, cfg) for idx, _, cfg in cells if idx not in done]
    combos = {idx: combo for idx, combo, _ in cells}

    def record(idx, rows):
        prefix = (idx,) + tuple(combos[idx])
        done[idx] = [_csv_line(prefix + r) for r in rows]
        if out:
            _emit(_render_sweep(axes, digest, done), out)

    if workers <= 1 or len(todo) <= 1:
        for job in todo:
            record(*_sweep_job(job))
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(todo))) as ex:
            for idx, rows in ex.map(_sweep_job, todo):
                record(idx, rows)
    text = _render_sweep(axes, digest, done)
    return None if out else text


# -- selftest ---------------------------------------------------------------

def selftest_checks(seed: int = 0):
    """Exact-oracle invariant suite: yields (name, passed)."""
    from .attack import build_boolean_system, build_pm_boolean_system
    from .randmat import check_derivative_identity, check_pm_identity
    from .release import Database, sigma_f

    def multilinear_exact():
        for p in (1, 2, 3):
            for f in bf.all_functions(p):
                poly = bf.to_multilinear(f)
                if any(poly(*x) != f(*x) for x in f.points()):
                    return False
        return True

    def nondegeneracy_equivalence():
        return all(bf.is_nondegenerate_by_degree(f) == bf.is_nondegenerate_by_sign_sum(f)
                   for p in (1, 2, 3) for f in bf.all_functions(p))

    def nondegenerate_counts():
        return all(bf.nondegenerate_count(p) == 2 ** 2 ** p - math.comb(2 ** p, 2 ** (p - 1))
                   for p in (1, 2, 3))

    def decompositions():
        for p in (2, 3):
            for f in bf.all_functions(p):
                f0, _, f2 = bf.decompose_last_variable(f)
                g2, g3 = bf.pm_parts(f)
                for x in f.points():
                    phi = [2 * v - 1 for v in x]
                    if f(*x) != f0(*x[:-1]) + f2(*x[:-1]) * x[-1]:
                        return False
                    if 2 * f(*x) != g3(*phi[:-1]) + g2(*phi[:-1]) * phi[-1] + 1:
                        return False
        return True

    def reductions():
        rng = np.random.default_rng(seed)
        for f in [bf.AND(3), bf.OR(3), bf.XOR(3), bf.MAJORITY(3), bf.XOR(2), bf.AND(2)]:
            for _ in range(5):
                n, d = int(rng.integers(1, 21)), int(rng.integers(1, 7))
                db = Database(rng.integers(0, 2, (n, d)), rng.integers(0, 2, n))
                y = sigma_f(db, f)
                for build in (build_boolean_system, build_pm_boolean_system):
                    sys_ = build(db.U, f, y)
                    if not np.array_equal(sys_.A @ db.s + sys_.b, y):
                        return False
        return True

    def identities():
        ok = True
        for k in (1, 2):
            for h in bf.signed_functions(k, bf.ZERO_ONE):
                if bf.is_nondegenerate_by_degree(h):
                    ok &= check_derivative_identity(h, 5, seed, exhaustive=True)
            for h in bf.signed_functions(k, bf.PLUS_MINUS):
                if bf.is_nondegenerate_by_degree(h):
                    ok &= check_pm_identity(h, 5, seed, exhaustive=True)
        return bool(ok)

    for name, fn in [("multilinear_exact", multilinear_exact),
                     ("nondegeneracy_equivalence", nondegeneracy_equivalence),
                     ("nondegenerate_counts", nondegenerate_counts),
                     ("decompositions", decompositions),
                     ("reductions", reductions),
                     ("identities", identities)]:
        yield name, bool(fn())


def cmd_selftest(seed: int) -> tuple[str, bool]:
    buf = io.StringIO()
    buf.write(SCHEMA_LINE + "\ncheck,result\n")
    all_ok = True
    for name, ok in selftest_checks(seed):
        all_ok &= ok
        buf.write(f"{name},{'pass' if ok else 'FAIL'}\n")
    return buf.getvalue(), all_ok


# -- entry point ------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="linrecon", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=("attack", "spectral", "sweep", "selftest"))
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--seed", type=_u64, help="master seed (overrides master_seed)")
    p.add_argument("--out", help="output CSV path (default: stdout)")
    p.add_argument("--workers", type=int, help="worker processes (default: CPU count)")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "selftest":
            text, ok = cmd_selftest(args.seed or 0)
            _emit(text, args.out)
            return EXIT_OK if ok else EXIT_RUNTIME
        if not args.config:
            raise ConfigError(f"{args.command} needs --config")
        raw = read_config(args.config)
        if args.seed is not None:
            raw["master_seed"] = str(args.seed)
        if args.out is not None:
            raw["out"] = args.out
        workers = args.workers or _get(raw, "workers", int) or _default_workers()
        if workers < 1:
            raise ConfigError("workers must be >= 1")
        if args.command == "attack":
            _emit(cmd_attack(raw, workers), raw.get("out"))
        elif args.command == "spectral":
            _emit(cmd_spectral(raw, workers), raw.get("out"))
        else:
            text = cmd_sweep(raw, workers)
            if text is not None:
                sys.stdout.write(text)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AttackError as exc:
        print(f"runtime error in stage {exc.stage}: {exc.cause}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - mapped to the runtime exit code
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
