"""Configuration and drivers for the shape-parameter experiments.

All drivers are deterministic: work items are mapped over a thread pool but
results are gathered and written in canonical order (kernel, eps ascending,
n ascending) with 17-significant-digit floats, so the worker count never
changes the output bytes.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from shapelab._io import write_csv
from shapelab.greedy import p_greedy
from shapelab.interpolation import fit, rmse_error
from shapelab.kernels import TAGS, from_tag, radial_matern
from shapelab.points import grid_2d, midpoint_grid_1d
from shapelab.rates import BoundaryData, RateTable, predict_optimal_eps
from shapelab.spectral import discrete_mercer, eigenfunction_target
from shapelab.targets import TARGETS, Target, get_target

log = logging.getLogger(__name__)

EXPERIMENTS = ("ex1", "ex2", "preasymptotic", "sweep", "spectrum", "greedy", "rates")
SWEEP_HEADER = ["kernel", "eps", "n", "h", "rmse", "rate_prev", "cond", "dropped_rank"]


class ConfigError(ValueError):
    """Invalid configuration; ``key`` names the offending setting."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


class NumericalFailure(RuntimeError):
    def __init__(self, kernel: str, eps: float, n: int, reason: str):
        super().__init__(f"numerical failure for (kernel={kernel}, eps={eps!r}, n={n}): {reason}")
        self.kernel, self.eps, self.n = kernel, eps, n


@dataclass(frozen=True)
class EpsGrid:
    lo: float
    hi: float
    count: int
    log: bool = True

    @classmethod
    def parse(cls, text: str) -> EpsGrid:
        """``lo:hi:count[:log|lin]``, e.g. ``1e-3:1e2:101:log``."""
        parts = text.strip().split(":")
        if len(parts) not in (3, 4):
            raise ConfigError("eps_grid", f"expected lo:hi:count[:log|lin], got {text!r}")
        try:
            lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError:
            raise ConfigError("eps_grid", f"cannot parse {text!r}") from None
        scale = parts[3].lower() if len(parts) == 4 else "log"
        if scale not in ("log", "lin"):
            raise ConfigError("eps_grid", f"scale must be 'log' or 'lin', got {scale!r}")
        return cls(lo, hi, count, scale == "log")

    def validate(self) -> None:
        if not (self.lo > 0 and math.isfinite(self.hi)):
            raise ConfigError("eps_grid", "bounds must be positive and finite")
        if self.count < 1 or (self.count > 1 and not self.hi > self.lo):
            raise ConfigError("eps_grid", "need count >= 1 and hi > lo")

    def values(self) -> np.ndarray:
        if self.count == 1:
            return np.array([self.lo])
        if self.log:
            return np.logspace(math.log10(self.lo), math.log10(self.hi), self.count)
        return np.linspace(self.lo, self.hi, self.count)

    def __str__(self) -> str:
        return f"{self.lo:g}:{self.hi:g}:{self.count}:{'log' if self.log else 'lin'}"


DEFAULT_EPS_GRID = EpsGrid(1e-3, 1e2, 101, True)
PREASYMPTOTIC_EPS_GRID = EpsGrid(1e-2, 1e1, 25, True)
DEFAULT_LADDER = (100, 196, 387, 762, 1500)


def default_threads() -> int:
    env = os.environ.get("SHAPELAB_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError("SHAPELAB_THREADS", f"not an integer: {env!r}") from None
        if n < 1:
            raise ConfigError("SHAPELAB_THREADS", "must be >= 1")
        return n
    return os.cpu_count() or 1


@dataclass(frozen=True)
class ExperimentConfig:
    """Settings for one run. ``eps_grid=None`` selects the experiment's default."""

    experiment: str = "ex1"
    eps_grid: EpsGrid | None = None
    n_ladder: tuple = DEFAULT_LADDER
    kernels: tuple = ("k1", "k2", "k3")
    m_eval: int = 10_000
    mercer_grid: int = 60
    gamma: float = 1e-3
    greedy_m: int = 600
    checkpoints: tuple = (10, 50, 150, 600)
    output_dir: Path = Path("out")
    threads: int | None = None
    target: str = "f1"
    eps: float = 1.0
    k_top: int | None = None
    dim: int = 1

    @property
    def eps_values(self) -> np.ndarray:
        return self.resolved_eps_grid().values()

    def resolved_eps_grid(self) -> EpsGrid:
        if self.eps_grid is not None:
            return self.eps_grid
        return PREASYMPTOTIC_EPS_GRID if self.experiment == "preasymptotic" else DEFAULT_EPS_GRID

    @property
    def workers(self) -> int:
        return self.threads if self.threads is not None else default_threads()

    def validate(self) -> ExperimentConfig:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError("experiment", f"unknown experiment {self.experiment!r}")
        self.resolved_eps_grid().validate()
        lad = list(self.n_ladder)
        if not lad or any(n < 1 for n in lad) or any(b <= a for a, b in zip(lad, lad[1:])):
            raise ConfigError("n_ladder", f"must be strictly increasing positive integers, got {lad}")
        for k in self.kernels:
            if k not in TAGS:
                raise ConfigError("kernels", f"unknown kernel {k!r}; expected one of {sorted(TAGS)}")
        if not self.kernels:
            raise ConfigError("kernels", "at least one kernel is required")
        if self.m_eval < 2:
            raise ConfigError("m_eval", "must be >= 2")
        if self.experiment == "preasymptotic" and self.mercer_grid < 40:
            raise ConfigError("mercer_grid", "the preasymptotic experiment needs mercer_grid >= 40")
        if self.mercer_grid < 2:
            raise ConfigError("mercer_grid", "must be >= 2")
        if self.greedy_m < 1:
            raise ConfigError("greedy_m", "must be >= 1")
        if self.gamma < 0:
            raise ConfigError("gamma", "must be >= 0")
        if self.threads is not None and self.threads < 1:
            raise ConfigError("threads", "must be >= 1")
        if self.target not in TARGETS:
            raise ConfigError("target", f"unknown target {self.target!r}; expected one of {sorted(TARGETS)}")
        if not self.eps > 0:
            raise ConfigError("eps", "must be positive")
        if self.dim not in (1, 2):
            raise ConfigError("dim", "must be 1 or 2")
        if self.k_top is not None and self.k_top < 1:
            raise ConfigError("k_top", "must be >= 1")
        return self


def _int_list(key: str, text: str) -> tuple:
    try:
        return tuple(int(v) for v in text.replace(" ", "").split(",") if v)
    except ValueError:
        raise ConfigError(key, f"expected comma-separated integers, got {text!r}") from None


def _scalar(key: str, kind, text: str):
    try:
        return kind(text)
    except ValueError:
        raise ConfigError(key, f"cannot parse {text!r}") from None


_PARSERS = {
    "eps_grid": lambda v: EpsGrid.parse(v),
    "n_ladder": lambda v: _int_list("n_ladder", v),
    "checkpoints": lambda v: _int_list("checkpoints", v),
    "kernels": lambda v: tuple(k for k in v.replace(" ", "").split(",") if k),
    "m_eval": lambda v: _scalar("m_eval", int, v),
    "mercer_grid": lambda v: _scalar("mercer_grid", int, v),
    "gamma": lambda v: _scalar("gamma", float, v),
    "greedy_m": lambda v: _scalar("greedy_m", int, v),
    "output_dir": Path,
    "threads": lambda v: _scalar("threads", int, v),
    "target": str,
    "eps": lambda v: _scalar("eps", float, v),
    "k_top": lambda v: _scalar("k_top", int, v),
    "dim": lambda v: _scalar("dim", int, v),
}
CONFIG_KEYS = tuple(_PARSERS)


def parse_settings(items: dict) -> dict:
    """Convert string settings (config file or flags) into typed field values."""
    out = {}
    for key, raw in items.items():
        if key not in _PARSERS:
            raise ConfigError(key, "unknown configuration key")
        out[key] = _PARSERS[key](raw) if isinstance(raw, str) else raw
    return out


def read_config_file(path) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from None
    items = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("config", f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        items[key.replace("-", "_")] = value
    return parse_settings(items)


def make_config(experiment: str, file_settings: dict | None = None, overrides: dict | None = None) -> ExperimentConfig:
    settings = dict(file_settings or {})
    settings.update(overrides or {})
    names = {f.name for f in fields(ExperimentConfig)}
    unknown = set(settings) - names
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError(key, "unknown configuration key")
    return ExperimentConfig(experiment=experiment, **settings).validate()


# ---------------------------------------------------------------- 1D sweeps


@dataclass
class SweepResult:
    """Errors and solve diagnostics for one kernel over (eps, n)."""

    kernel: str
    table: RateTable
    cond: np.ndarray
    dropped: np.ndarray
    flat_rmse: np.ndarray = field(default=None)


def _fit_ladder(tag: str, eps: float, target: Target, ladder, m_eval: int):
    grid = midpoint_grid_1d(m_eval)
    truth = target(grid.points[:, 0])
    out = []
    for n in ladder:
        X = midpoint_grid_1d(n)
        try:
            s = fit(from_tag(tag, eps), X, target(X.points[:, 0]))
            err = rmse_error(s, truth, grid=grid)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure(tag, float(eps), int(n), str(exc)) from exc
        if not (math.isfinite(err) and err > 0):
            raise NumericalFailure(tag, float(eps), int(n), f"rmse = {err!r}")
        out.append((err, s.report.cond_estimate, s.report.dropped_rank))
    return out


def run_sweep(config: ExperimentConfig, target: Target) -> list[SweepResult]:
    """Fit ``target`` for every kernel, eps and n of the configuration."""
    eps_values = config.eps_values
    ladder = list(config.n_ladder)
    tasks = [(tag, float(e)) for tag in config.kernels for e in eps_values]
    log.info("sweep over %d (kernel, eps) tasks with %d workers", len(tasks), config.workers)
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        results = list(pool.map(lambda t: _fit_ladder(t[0], t[1], target, ladder, config.m_eval), tasks))
    h = 1.0 / (2.0 * np.asarray(ladder, dtype=float))
    out = []
    for k, tag in enumerate(config.kernels):
        block = results[k * len(eps_values):(k + 1) * len(eps_values)]
        errs = np.array([[r[0] for r in row] for row in block])
        cond = np.array([[r[1] for r in row] for row in block])
        drop = np.array([[r[2] for r in row] for row in block], dtype=int)
        res = SweepResult(tag, RateTable.from_errors(eps_values, ladder, h, errs), cond, drop)
        # flat-limit reference: error at the smallest shape parameter of the grid
        res.flat_rmse = errs[int(np.argmin(eps_values))]
        out.append(res)
    return out


def sweep_rows(res: SweepResult, with_flat: bool = False) -> list:
    t = res.table
    rows = []
    for i, e in enumerate(t.eps_grid):
        for k, n in enumerate(t.n_ladder):
            row = [res.kernel, e, int(n), t.h[k], t.errors[i, k],
                   t.slopes[i, k - 1] if k > 0 else None, res.cond[i, k], int(res.dropped[i, k])]
            if with_flat:
                row.append(res.flat_rmse[k])
            rows.append(row)
    return rows


def loglog_rows(res: SweepResult) -> list:
    t = res.table
    return [[res.kernel, int(n), math.log10(e), math.log10(t.h[k]), math.log10(t.errors[i, k]),
             math.log10(res.flat_rmse[k])]
            for i, e in enumerate(t.eps_grid) for k, n in enumerate(t.n_ladder)]


def write_sweep(path, results: list[SweepResult]) -> None:
    rows = [r for res in results for r in sweep_rows(res)]
    write_csv(path, SWEEP_HEADER, rows)


def _ensure_dir(path: Path) -> Path:
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError("output_dir", f"cannot create {path}: {exc}") from None
    if not os.access(path, os.W_OK):
        raise ConfigError("output_dir", f"{path} is not writable")
    return path


def run_ex(config: ExperimentConfig) -> dict:
    """Reproduce one of the 1D examples (``ex1``: Neumann target, ``ex2``: Robin target).

    Writes ``<ex>_<kernel>.csv`` (sweep schema plus ``flat_rmse``), a
    ``<ex>_<kernel>_loglog.csv`` companion and ``<ex>_summary.csv`` holding
    the shape parameters predicted by the boundary-condition test.
    """
    name = config.experiment
    if name not in ("ex1", "ex2"):
        raise ConfigError("experiment", f"run_ex handles ex1/ex2, got {name!r}")
    target = get_target("f1" if name == "ex1" else "f2")
    out_dir = _ensure_dir(Path(config.output_dir))
    results = run_sweep(config, target)
    bd = BoundaryData.from_function(target.func, target.deriv)
    summary = []
    paths = {}
    for res in results:
        p = out_dir / f"{name}_{res.kernel}.csv"
        write_csv(p, SWEEP_HEADER + ["flat_rmse"], sweep_rows(res, with_flat=True))
        write_csv(out_dir / f"{name}_{res.kernel}_loglog.csv",
                  ["kernel", "n", "log10_eps", "log10_h", "log10_rmse", "log10_flat_rmse"], loglog_rows(res))
        paths[res.kernel] = p
        summary.append(_summary_row(res, bd))
    sp = out_dir / f"{name}_summary.csv"
    write_csv(sp, ["kernel", "n_predicted", "predicted_eps", "final_rate_min", "final_rate_max",
                   "eps_at_final_rate_max", "final_rate_at_predicted_min", "flat_rmse_largest_n"], summary)
    paths["summary"] = sp
    return {"results": results, "paths": paths}


def _summary_row(res: SweepResult, bd: BoundaryData) -> list:
    t = res.table
    fam = TAGS[res.kernel]
    try:
        pred = predict_optimal_eps(bd, fam, t.eps_grid)
    except ValueError:
        pred = np.empty(0)
    final = t.final_rates() if len(t.n_ladder) > 1 else np.full(len(t.eps_grid), np.nan)
    has = np.isfinite(final)
    fmin = float(np.min(final[has])) if has.any() else None
    fmax = float(np.max(final[has])) if has.any() else None
    at_max = float(t.eps_grid[np.flatnonzero(has)[np.argmax(final[has])]]) if has.any() else None
    if pred.size and has.any():
        idx = [t.nearest(e) for e in pred]
        at_pred = float(np.nanmin(final[idx]))
    else:
        at_pred = None
    return [res.kernel, int(pred.size), ";".join(format(e, ".17g") for e in pred),
            fmin, fmax, at_max, at_pred, res.flat_rmse[-1]]


# ------------------------------------------------------ 2D preasymptotic


def dip_depth(errors) -> float:
    """How far the minimum sits below its lower shoulder (ratio >= 1).

    The shoulders are the nearest local maxima on either side of the
    minimiser, found by walking uphill; a side that ends at the sweep
    boundary uses the boundary value. A minimiser at an end of the sweep has
    only one shoulder.
    """
    e = np.asarray(errors, dtype=float)
    i = int(np.argmin(e))
    shoulders = []
    if i > 0:
        j = i
        while j > 0 and e[j - 1] >= e[j]:
            j -= 1
        shoulders.append(e[j])
    if i < len(e) - 1:
        j = i
        while j < len(e) - 1 and e[j + 1] >= e[j]:
            j += 1
        shoulders.append(e[j])
    if not shoulders:
        return 1.0
    return float(min(shoulders) / e[i])


@dataclass
class PreasymptoticResult:
    eps_grid: np.ndarray
    checkpoints: tuple
    errors: dict  # target name -> array [eps x checkpoint]
    cond: dict
    dropped: dict
    greedy: object
    mercer: object


def run_preasymptotic(config: ExperimentConfig, write: bool = True) -> PreasymptoticResult:
    """Shape sweep on the unit square with greedy points and eigenfunction targets.

    Builds the discrete Mercer basis of the radial Matern kernel (shape
    ``config.eps``) on a ``mercer_grid x mercer_grid`` grid, selects
    ``greedy_m`` P-greedy points from that grid and measures the grid RMSE of
    interpolants of ``phi_1`` and ``phi_1 + gamma |x1 - 0.5|`` for every
    shape parameter and checkpoint size.
    """
    grid = grid_2d(config.mercer_grid)
    if config.greedy_m > len(grid):
        raise ConfigError("greedy_m", f"{config.greedy_m} exceeds the {len(grid)} grid points")
    base = radial_matern(config.eps, dim=2)
    mercer = discrete_mercer(base, grid, k_top=min(config.k_top or 10, len(grid)))
    run = p_greedy(base, grid, config.greedy_m)
    checkpoints = tuple(c for c in config.checkpoints if c <= len(run.indices))
    targets = {
        "f1": eigenfunction_target(mercer, 1, 0.0, cusp=False),
        "f2": eigenfunction_target(mercer, 1, config.gamma, cusp=True),
    }
    eps_values = config.eps_values
    tasks = [(name, float(e), c) for name in targets for e in eps_values for c in checkpoints]

    def work(task):
        name, e, c = task
        X = run.selected.subset(np.arange(c))
        y = targets[name][run.indices[:c]]
        try:
            s = fit(radial_matern(e, dim=2), X, y)
            err = rmse_error(s, targets[name], grid=grid)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure("matern", e, c, str(exc)) from exc
        if not math.isfinite(err):
            raise NumericalFailure("matern", e, c, f"rmse = {err!r}")
        return err, s.report.cond_estimate, s.report.dropped_rank

    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        flat = list(pool.map(work, tasks))
    shape = (len(eps_values), len(checkpoints))
    per = len(eps_values) * len(checkpoints)
    errors, cond, dropped = {}, {}, {}
    for t, name in enumerate(targets):
        block = flat[t * per:(t + 1) * per]
        errors[name] = np.array([b[0] for b in block]).reshape(shape)
        cond[name] = np.array([b[1] for b in block]).reshape(shape)
        dropped[name] = np.array([b[2] for b in block], dtype=int).reshape(shape)
    result = PreasymptoticResult(eps_values, checkpoints, errors, cond, dropped, run, mercer)
    if write:
        _write_preasymptotic(config, result)
    return result


def _write_preasymptotic(config: ExperimentConfig, r: PreasymptoticResult) -> None:
    out_dir = _ensure_dir(Path(config.output_dir))
    header = ["target", "eps", "n", "rmse", "cond", "dropped_rank"]
    summary = []
    for name, E in r.errors.items():
        rows = [[name, e, c, E[i, k], r.cond[name][i, k], r.dropped[name][i, k]]
                for i, e in enumerate(r.eps_grid) for k, c in enumerate(r.checkpoints)]
        write_csv(out_dir / f"preasymptotic_{name}.csv", header, rows)
        for k, c in enumerate(r.checkpoints):
            col = E[:, k]
            summary.append([name, c, r.eps_grid[int(np.argmin(col))], float(col.min()), dip_depth(col)])
    write_csv(out_dir / "preasymptotic_summary.csv",
              ["target", "n", "argmin_eps", "min_rmse", "dip_depth"], summary)
    r.greedy.to_csv(out_dir / "preasymptotic_greedy.csv")


# ------------------------------------------------------------ small tools


def run_spectrum(config: ExperimentConfig) -> dict:
    tag = config.kernels[0]
    dim = config.dim if tag == "matern" else 1
    spec = from_tag(tag, config.eps, dim)
    grid = midpoint_grid_1d(config.mercer_grid) if dim == 1 else grid_2d(config.mercer_grid)
    k_top = min(config.k_top or len(grid), len(grid))
    M = discrete_mercer(spec, grid, k_top)
    out_dir = _ensure_dir(Path(config.output_dir))
    prefix = out_dir / f"spectrum_{tag}"
    M.to_csv(prefix)
    return {"mercer": M, "paths": [Path(f"{prefix}_eigvals.csv"), Path(f"{prefix}_eigfuns.csv")]}


def run_greedy(config: ExperimentConfig) -> dict:
    grid = grid_2d(config.mercer_grid)
    if config.greedy_m > len(grid):
        raise ConfigError("greedy_m", f"{config.greedy_m} exceeds the {len(grid)} grid points")
    run = p_greedy(radial_matern(config.eps, dim=2), grid, config.greedy_m)
    out_dir = _ensure_dir(Path(config.output_dir))
    path = out_dir / "greedy.csv"
    run.to_csv(path)
    return {"run": run, "paths": [path]}


def run_sweep_cli(config: ExperimentConfig) -> dict:
    target = get_target(config.target)
    results = run_sweep(config, target)
    out_dir = _ensure_dir(Path(config.output_dir))
    path = out_dir / f"sweep_{target.name}.csv"
    write_sweep(path, results)
    return {"results": results, "paths": [path]}


def rate_tables_from_sweep(path) -> dict:
    """Rebuild per-kernel RateTables from a sweep CSV."""
    from shapelab._io import read_csv

    rows = read_csv(path)
    missing = set(SWEEP_HEADER) - set(rows[0] if rows else {})
    if missing:
        raise ConfigError("input", f"{path} lacks sweep columns {sorted(missing)}")
    tables = {}
    for tag in dict.fromkeys(r["kernel"] for r in rows):
        sub = [r for r in rows if r["kernel"] == tag]
        eps = sorted({float(r["eps"]) for r in sub})
        ns = sorted({int(r["n"]) for r in sub})
        errs = np.empty((len(eps), len(ns)))
        for r in sub:
            errs[eps.index(float(r["eps"])), ns.index(int(r["n"]))] = float(r["rmse"])
        h = 1.0 / (2.0 * np.asarray(ns, dtype=float))
        tables[tag] = RateTable.from_errors(eps, ns, h, errs)
    return tables


def with_overrides(config: ExperimentConfig, **kw) -> ExperimentConfig:
    return replace(config, **kw).validate()

