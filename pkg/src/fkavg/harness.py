"""Experiment orchestration: ensembles end-to-end, ladders, identity sweeps.

Every run is a pure function of its RunConfig.  Per-path work is dispatched
to workers by path index and reduced in path-index order, and each path's
randomness comes from its own counter-based stream, so output bytes do not
depend on the worker count.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import IO

import numpy as np

from . import streams
from .errors import AssumptionViolationError, ConfigError, SingularRatioError
from .fields import ScalarField, check_assumptions
from .functional import FunctionalSeries, functional_series
from .measure import (DEFAULT_REL_TOL, InvariantDensity, invariant_density,
                      quadrature_q_over_K)
from .mvt import MvtRecord, mvt_identity_check
from .sde import SamplePath, SdeModel, simulate_path

#: Random verification windows span at least this many grid cells; shorter
#: windows measure interpolation noise rather than the identity.
MIN_WINDOW_CELLS = 10


def steps_for(T: float, dt: float) -> int:
    """Number of grid steps, requiring T/dt integral to within half an ulp."""
    x = T / dt
    n = round(x)
    if n < 1 or abs(x - n) > 0.5 * np.spacing(max(abs(x), 1.0)):
        raise ConfigError(f"T/dt = {x!r} is not an integral step count (T={T:g}, dt={dt:g})")
    return n


@dataclass(frozen=True)
class RunConfig:
    model: SdeModel
    q: ScalarField
    K: ScalarField
    dt: float
    T: float | None = None
    t_ladder: tuple[float, ...] = ()
    n_paths: int = 1
    master_seed: int = 0
    x0: float | str | None = None  # None -> model-natural start; "stationary" -> draw
    out: str | None = None
    allow_violations: bool = False
    workers: int = 1
    windows: int = 20
    target_rel_tol: float = DEFAULT_REL_TOL

    def resolved_x0(self) -> float | str:
        if self.x0 is None:
            if self.model.kind == "constant_state":
                return self.model["x0"]
            if self.model.kind == "ou":
                return self.model["mu"]
            return 0.0
        return self.x0

    def ladder(self) -> tuple[float, ...]:
        if self.t_ladder:
            return self.t_ladder
        if self.T is None:
            raise ConfigError("missing horizon: provide T or a T ladder")
        return (self.T,)

    def validate(self) -> "RunConfig":
        if self.dt <= 0.0:
            raise ConfigError(f"dt must be > 0, got {self.dt:g}")
        ladder = self.ladder()
        if any(t <= 0.0 for t in ladder):
            raise ConfigError("horizons must be > 0")
        if any(b <= a for a, b in zip(ladder, ladder[1:])):
            raise ConfigError(f"T ladder must be strictly increasing, got {ladder}")
        for t in ladder:
            steps_for(t, self.dt)
        if self.n_paths < 1:
            raise ConfigError(f"paths must be >= 1, got {self.n_paths}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if self.windows < 1:
            raise ConfigError(f"windows must be >= 1, got {self.windows}")
        if isinstance(self.x0, str) and self.x0 != "stationary":
            raise ConfigError(f"x0 must be a real number or 'stationary', got {self.x0!r}")
        return self


@dataclass(frozen=True)
class ConvergenceRow:
    T: float
    ebar_mean: float
    ebar_stderr: float
    target: float
    abs_gap: float
    n_paths: int


def _gate_assumptions(config: RunConfig, density: InvariantDensity):
    lo, hi = density.support
    if hi - lo < 2.0:  # widen degenerate or tiny supports to a real scan window
        mid = 0.5 * (lo + hi)
        lo, hi = mid - 1.0, mid + 1.0
    report = check_assumptions(config.q, config.K, domain=(lo, hi))
    if report.violations and not config.allow_violations:
        raise AssumptionViolationError(report)
    return report


def _initial_state(x0_spec, density: InvariantDensity | None,
                   master_seed: int, path_index: int) -> float:
    if x0_spec == "stationary":
        base = streams.stream_base(master_seed, path_index, streams.SALT_PATH)
        u0 = float(streams.uniforms(base, 0, 1)[0])  # reserved draw 0
        return density.ppf(u0)
    return float(x0_spec)


def _ebar_task(args) -> list[float]:
    model, q, K, dt, step_ladder, master_seed, path_index, x0_spec, density = args
    x0 = _initial_state(x0_spec, density, master_seed, path_index)
    path = simulate_path(model, x0, dt, step_ladder[-1], master_seed, path_index)
    out = []
    for n in step_ladder:
        series = functional_series(path.prefix(n), q, K)
        out.append(float(series.ebar[n]))
    return out


def _map_paths(task, args_list, workers: int):
    if workers <= 1 or len(args_list) <= 1:
        return [task(a) for a in args_list]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(task, args_list))


def _ensemble_ebars(config: RunConfig, step_ladder: list[int],
                    density: InvariantDensity) -> np.ndarray:
    x0_spec = config.resolved_x0()
    args = [
        (config.model, config.q, config.K, config.dt, step_ladder,
         config.master_seed, p, x0_spec, density if x0_spec == "stationary" else None)
        for p in range(config.n_paths)
    ]
    rows = _map_paths(_ebar_task, args, config.workers)
    return np.asarray(rows)  # shape (n_paths, len(ladder))


def _rows_from_ebars(ebars: np.ndarray, ladder, target: float, n_paths: int):
    rows = []
    for j, T in enumerate(ladder):
        vals = ebars[:, j]
        mean = float(np.mean(vals))
        stderr = float(np.std(vals, ddof=1) / math.sqrt(n_paths)) if n_paths > 1 else 0.0
        rows.append(ConvergenceRow(T=float(T), ebar_mean=mean, ebar_stderr=stderr,
                                   target=target, abs_gap=abs(mean - target),
                                   n_paths=n_paths))
    return rows


def run_limit(config: RunConfig) -> ConvergenceRow:
    """Ensemble time average at one horizon against the quadrature target."""
    config = config.validate()
    if config.T is None:
        if len(config.t_ladder) != 1:
            raise ConfigError("run_limit needs a single horizon T")
        config = replace(config, T=config.t_ladder[0], t_ladder=())
    density = invariant_density(config.model)
    _gate_assumptions(config, density)
    target = quadrature_q_over_K(config.q, config.K, density,
                                 rel_tol=config.target_rel_tol).value
    ebars = _ensemble_ebars(config, [steps_for(config.T, config.dt)], density)
    return _rows_from_ebars(ebars, [config.T], target, config.n_paths)[0]


def run_converge(config: RunConfig) -> list[ConvergenceRow]:
    """One row per ladder horizon, reusing each path's increments across T.

    Every horizon is a prefix of one long simulation per path, so gap trends
    across the ladder are not confounded by resampled noise, and a
    single-entry ladder reproduces `run_limit` exactly.
    """
    config = config.validate()
    ladder = config.ladder()
    density = invariant_density(config.model)
    _gate_assumptions(config, density)
    target = quadrature_q_over_K(config.q, config.K, density,
                                 rel_tol=config.target_rel_tol).value
    step_ladder = [steps_for(t, config.dt) for t in ladder]
    ebars = _ensemble_ebars(config, step_ladder, density)
    return _rows_from_ebars(ebars, ladder, target, config.n_paths)


def draw_windows(n_steps: int, count: int, master_seed: int, path_index: int,
                 min_cells: int = MIN_WINDOW_CELLS) -> list[tuple[int, int]]:
    """Deterministic random windows (t_index, T_index) with >= min_cells cells."""
    if n_steps <= min_cells:
        raise ConfigError(f"need more than {min_cells} grid steps for windows, "
                          f"got {n_steps}")
    base = streams.stream_base(master_seed, path_index, streams.SALT_WINDOWS)
    us = streams.uniforms(base, 0, 2 * count)
    out = []
    for w in range(count):
        lo_max = n_steps - min_cells
        lo = min(int(us[2 * w] * (lo_max + 1)), lo_max)
        span_max = n_steps - lo - min_cells
        hi = lo + min_cells + min(int(us[2 * w + 1] * (span_max + 1)), span_max)
        out.append((lo, hi))
    return out


def _mvt_task(args):
    model, q, K, dt, n_steps, master_seed, path_index, x0_spec, density, count = args
    x0 = _initial_state(x0_spec, density, master_seed, path_index)
    path = simulate_path(model, x0, dt, n_steps, master_seed, path_index)
    records = []
    skipped = 0
    for (lo, hi) in draw_windows(n_steps, count, master_seed, path_index):
        try:
            records.append(mvt_identity_check(path, q, K, lo, hi))
        except SingularRatioError:
            skipped += 1
    return records, skipped


def run_mvt(config: RunConfig) -> tuple[list[MvtRecord], dict]:
    """Identity records over random windows, with a residual summary.

    Singular windows (q vanishing) are counted and skipped, not fatal.
    """
    config = config.validate()
    if config.T is None:
        raise ConfigError("mvt run needs a horizon T")
    n_steps = steps_for(config.T, config.dt)
    x0_spec = config.resolved_x0()
    density = invariant_density(config.model) if x0_spec == "stationary" else None
    args = [
        (config.model, config.q, config.K, config.dt, n_steps,
         config.master_seed, p, x0_spec, density, config.windows)
        for p in range(config.n_paths)
    ]
    results = _map_paths(_mvt_task, args, config.workers)
    records: list[MvtRecord] = []
    skipped = 0
    for recs, sk in results:
        records.extend(recs)
        skipped += sk
    abs_res = np.array([abs(r.residual) for r in records]) if records else np.zeros(0)
    summary = {
        "n_records": len(records),
        "n_skipped": skipped,
        "max_abs_residual": float(abs_res.max()) if len(abs_res) else 0.0,
        "p95_abs_residual": float(np.percentile(abs_res, 95)) if len(abs_res) else 0.0,
        "crossing_rate": (sum(r.crossing_found for r in records) / len(records)
                          if records else 0.0),
    }
    return records, summary


def run_simulate(config: RunConfig) -> list[SamplePath]:
    config = config.validate()
    if config.T is None:
        raise ConfigError("simulate run needs a horizon T")
    n_steps = steps_for(config.T, config.dt)
    x0_spec = config.resolved_x0()
    density = invariant_density(config.model) if x0_spec == "stationary" else None
    return [
        simulate_path(config.model,
                      _initial_state(x0_spec, density, config.master_seed, p),
                      config.dt, n_steps, config.master_seed, p)
        for p in range(config.n_paths)
    ]


def run_functional(config: RunConfig) -> list[FunctionalSeries]:
    return [functional_series(p, config.q, config.K) for p in run_simulate(config)]


# ---------------------------------------------------------------------------
# CSV output.  RFC-4180 style: CRLF rows, mandatory header, 17 significant
# digits for reals, lowercase true/false for booleans.
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


def write_csv(stream: IO[str], header: list[str], rows) -> None:
    writer = csv.writer(stream, lineterminator="\r\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])


def path_csv(stream: IO[str], path: SamplePath) -> None:
    write_csv(stream, ["t", "x"], zip(path.times, path.states))


def series_csv(stream: IO[str], series: FunctionalSeries) -> None:
    t = series.path_ref.times
    write_csv(stream, ["t", "A", "Y", "ebar"], zip(t, series.A, series.Y, series.ebar))


def mvt_csv(stream: IO[str], records: list[MvtRecord], dt: float) -> None:
    rows = [
        (r.t_index * dt, r.T_index * dt, r.r, r.xi, r.crossing_found,
         r.lhs, r.rhs, r.residual)
        for r in records
    ]
    write_csv(stream, ["t", "T", "r", "xi", "crossing_found", "lhs", "rhs", "residual"], rows)


def convergence_csv(stream: IO[str], rows: list[ConvergenceRow]) -> None:
    write_csv(stream, ["T", "ebar_mean", "ebar_stderr", "target", "abs_gap", "n_paths"],
              [(r.T, r.ebar_mean, r.ebar_stderr, r.target, r.abs_gap, r.n_paths)
               for r in rows])
