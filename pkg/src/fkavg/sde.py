"""Diffusion model catalog and Euler-Maruyama path simulation.

Catalog models (all scalar, constant diffusion coefficient):

    ou(theta, mu, sigma)       dX = -theta (X - mu) dt + sigma dW
    double_well(a, b, sigma)   dX = -(a X^3 - b X) dt + sigma dW
                               (gradient of U(x) = a x^4/4 - b x^2/2)
    constant_state(x0)         dX = 0 (degenerate reference process)

Euler-Maruyama is the single integrator code path; with constant diffusion
it already attains strong order 1, so no Milstein variant is carried.
Increments for path ``i`` come from the stream derived from
``(master_seed, i)``; regenerating a path with identical arguments is
bit-identical, and ensembles are reproducible under any parallel schedule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import streams
from .errors import ConfigError, SimulationDiverged
from .grammar import bind_params, parse_call

MODEL_PARAMS: dict[str, tuple[str, ...]] = {
    "ou": ("theta", "mu", "sigma"),
    "double_well": ("a", "b", "sigma"),
    "constant_state": ("x0",),
}


@dataclass(frozen=True)
class SdeModel:
    kind: str
    params: tuple[tuple[str, float], ...]

    def __post_init__(self):
        if self.kind not in MODEL_PARAMS:
            raise ConfigError(
                f"unknown model kind {self.kind!r}; known: {sorted(MODEL_PARAMS)}"
            )
        names = tuple(n for n, _ in self.params)
        if names != MODEL_PARAMS[self.kind]:
            raise ConfigError(
                f"model {self.kind!r} needs parameters {MODEL_PARAMS[self.kind]}, got {names}"
            )
        for strict_pos in ("theta", "a", "b"):
            if strict_pos in names and self[strict_pos] <= 0.0:
                raise ConfigError(f"model parameter {strict_pos!r} must be > 0")
        # sigma = 0 is allowed: the deterministic limit is useful for testing.
        if "sigma" in names and self["sigma"] < 0.0:
            raise ConfigError("model parameter 'sigma' must be >= 0")

    def __getitem__(self, name: str) -> float:
        for n, v in self.params:
            if n == name:
                return v
        raise KeyError(name)

    @property
    def sigma(self) -> float:
        return self["sigma"] if self.kind != "constant_state" else 0.0

    def drift(self, x):
        """Drift field, vectorized.  Uses only exact-rounded arithmetic ops."""
        if self.kind == "ou":
            return -self["theta"] * (x - self["mu"])
        if self.kind == "double_well":
            return self["b"] * x - self["a"] * (x * x * x)
        return np.zeros_like(x)

    def spec(self) -> str:
        body = ",".join(f"{n}={v!r}" for n, v in self.params)
        return f"{self.kind}({body})"


def make_model(kind: str, **params: float) -> SdeModel:
    names = MODEL_PARAMS.get(kind)
    if names is None:
        raise ConfigError(f"unknown model kind {kind!r}; known: {sorted(MODEL_PARAMS)}")
    missing = [n for n in names if n not in params]
    if missing:
        raise ConfigError(f"model {kind!r} missing parameter {missing[0]!r}")
    extra = [n for n in params if n not in names]
    if extra:
        raise ConfigError(f"model {kind!r} got unknown parameter {extra[0]!r}")
    return SdeModel(kind, tuple((n, float(params[n])) for n in names))


def model_from_spec(text: str) -> SdeModel:
    """Parse a model spec such as ``ou(theta=1,mu=0,sigma=1.4142136)``."""
    kind, args = parse_call(text)
    if kind not in MODEL_PARAMS:
        raise ConfigError(f"unknown model kind {kind!r}; known: {sorted(MODEL_PARAMS)}")
    params = bind_params(kind, args, MODEL_PARAMS[kind], text)
    return make_model(kind, **params)


@dataclass(frozen=True)
class SamplePath:
    """A uniformly gridded realization with its seed provenance.

    ``states`` has length ``n_steps + 1`` and starts at t0 = 0.
    """

    dt: float
    n_steps: int
    states: np.ndarray
    master_seed: int
    path_index: int
    t0: float = 0.0

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n_steps + 1)

    @property
    def horizon(self) -> float:
        return self.n_steps * self.dt

    def prefix(self, n_steps: int) -> "SamplePath":
        """The restriction to the first ``n_steps`` steps (shares the grid)."""
        if not 1 <= n_steps <= self.n_steps:
            raise ConfigError(f"prefix length {n_steps} outside 1..{self.n_steps}")
        return SamplePath(self.dt, n_steps, self.states[: n_steps + 1],
                          self.master_seed, self.path_index, self.t0)


def _euler_states(model: SdeModel, x0: np.ndarray, dt: float, dW: np.ndarray,
                  path_indices: np.ndarray) -> np.ndarray:
    """Shared Euler loop, vectorized across paths.

    Cross-path arithmetic here is limited to IEEE exact-rounded ops so the
    result is bit-identical however the ensemble is partitioned.
    """
    n_paths, n_steps = dW.shape
    states = np.empty((n_paths, n_steps + 1))
    states[:, 0] = x0
    x = states[:, 0].copy()
    # overflow is detected explicitly below, so silence the transient warning
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(n_steps):
            x = x + model.drift(x) * dt + dW[:, i]
            if not np.all(np.isfinite(x)):
                bad = int(np.flatnonzero(~np.isfinite(x))[0])
                raise SimulationDiverged(step_index=i + 1, path_index=int(path_indices[bad]))
            states[:, i + 1] = x
    return states


def _path_normals(master_seed: int, path_index: int, n_steps: int) -> np.ndarray:
    # Draw 0 of the path stream is reserved for the initial-state draw;
    # increments always use draws 1..n_steps.
    base = streams.stream_base(master_seed, path_index, streams.SALT_PATH)
    return streams.normals(base, 1, n_steps)


def simulate_path(model: SdeModel, x0: float, dt: float, n_steps: int,
                  master_seed: int, path_index: int = 0) -> SamplePath:
    """One Euler-Maruyama path from the stream of ``(master_seed, path_index)``."""
    _check_grid(dt, n_steps)
    sdt = model.sigma * math.sqrt(dt)
    dW = sdt * _path_normals(master_seed, path_index, n_steps)
    states = _euler_states(model, np.array([float(x0)]), dt, dW[None, :],
                           np.array([path_index]))
    return SamplePath(dt, n_steps, states[0], master_seed, path_index)


def simulate_ensemble(model: SdeModel, x0, dt: float, n_steps: int,
                      master_seed: int, n_paths: int) -> list[SamplePath]:
    """Paths 0..n_paths-1, identical to per-path ``simulate_path`` calls.

    ``x0`` may be a scalar or a length-``n_paths`` sequence.
    """
    if n_paths < 1:
        raise ConfigError(f"n_paths must be >= 1, got {n_paths}")
    _check_grid(dt, n_steps)
    x0s = np.broadcast_to(np.asarray(x0, dtype=np.float64), (n_paths,)).copy()
    sdt = model.sigma * math.sqrt(dt)
    dW = np.empty((n_paths, n_steps))
    for p in range(n_paths):
        dW[p] = sdt * _path_normals(master_seed, p, n_steps)
    states = _euler_states(model, x0s, dt, dW, np.arange(n_paths))
    return [SamplePath(dt, n_steps, states[p], master_seed, p) for p in range(n_paths)]


def path_increments(model: SdeModel, path: SamplePath) -> np.ndarray:
    """Brownian increments recovered from the states (exact up to roundoff).

    Works for refined paths too, whose increments are not a plain stream.
    """
    x = path.states
    if model.sigma == 0.0:
        return np.zeros(path.n_steps)
    return (x[1:] - x[:-1] - model.drift(x[:-1]) * path.dt) / model.sigma


def refine_path(model: SdeModel, path: SamplePath, level: int = 1) -> SamplePath:
    """Halve the grid of ``path`` while keeping the same Brownian motion.

    Each coarse increment is split by a Brownian-bridge midpoint draw from
    the refinement stream for ``level`` (levels must increase by one per
    successive halving so bridge noise is never reused).  The returned path
    is a fresh Euler solution at dt/2, not an interpolation.
    """
    if level < 1:
        raise ConfigError(f"refinement level must be >= 1, got {level}")
    dt, n = path.dt, path.n_steps
    sig_dW = model.sigma * path_increments(model, path)
    base = streams.stream_base(path.master_seed, path.path_index,
                               streams.SALT_REFINE + level - 1)
    xi = streams.normals(base, 0, n)
    fine = np.empty(2 * n)
    half_sd = 0.5 * math.sqrt(dt) * model.sigma
    fine[0::2] = 0.5 * sig_dW + half_sd * xi
    fine[1::2] = sig_dW - fine[0::2]
    states = _euler_states(model, np.array([path.states[0]]), dt / 2.0,
                           fine[None, :], np.array([path.path_index]))
    return SamplePath(dt / 2.0, 2 * n, states[0], path.master_seed, path.path_index)


def _check_grid(dt: float, n_steps: int):
    if dt <= 0.0:
        raise ConfigError(f"dt must be > 0, got {dt}")
    if n_steps < 1:
        raise ConfigError(f"n_steps must be >= 1, got {n_steps}")
