"""Catalog of closed-form scalar fields on the real line.

These play the role of the decay-rate field K and the source field q.  The
catalog is fixed so that every field has an exact analytic derivative and
cheap, vectorized evaluation:

    const(c)          x -> c
    offset_sin(a, b)  x -> a + b*sin(x)
    rational1(c, d)   x -> c + d/(1 + x^2)
    gauss_bump(c, d, w)  x -> c + d*exp(-x^2 / (2 w^2))

``check_assumptions`` scans a field pair over a uniform grid and reports the
extrema needed to justify an ergodic-average run: a positive lower bound on
K, a bound on |q|, and a bound on |(q/K)'|.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, SingularityError
from .grammar import bind_params, parse_call

FIELD_PARAMS: dict[str, tuple[str, ...]] = {
    "const": ("c",),
    "offset_sin": ("a", "b"),
    "rational1": ("c", "d"),
    "gauss_bump": ("c", "d", "w"),
}

# Default scan window for assumption checks.  The bounds are required on all
# of R; a finite scan window is a practical stand-in and is recorded in the
# report so results stay reproducible.
DEFAULT_SCAN_DOMAIN = (-12.0, 12.0)

# A field used as K must clear this floor on the scan grid.  A strict
# positivity test on grid values alone would miss fields like 1 + sin(x)
# whose infimum is 0 but which stay positive at every sampled point.
K_POSITIVITY_FLOOR = 1e-3


@dataclass(frozen=True)
class ScalarField:
    """A catalog field: identifier plus named real parameters."""

    kind: str
    params: tuple[tuple[str, float], ...]

    def __post_init__(self):
        if self.kind not in FIELD_PARAMS:
            raise ConfigError(
                f"unknown field kind {self.kind!r}; known: {sorted(FIELD_PARAMS)}"
            )
        names = tuple(n for n, _ in self.params)
        if names != FIELD_PARAMS[self.kind]:
            raise ConfigError(
                f"field {self.kind!r} needs parameters {FIELD_PARAMS[self.kind]}, got {names}"
            )
        if self.kind == "gauss_bump" and self["w"] == 0.0:
            raise ConfigError("gauss_bump width w must be nonzero")

    def __getitem__(self, name: str) -> float:
        for n, v in self.params:
            if n == name:
                return v
        raise KeyError(name)

    def __call__(self, x):
        return eval_field(self, x)

    def derivative(self, x):
        return field_derivative(self, x)

    def spec(self) -> str:
        body = ",".join(f"{n}={v!r}" for n, v in self.params)
        return f"{self.kind}({body})"


def make_field(kind: str, **params: float) -> ScalarField:
    names = FIELD_PARAMS.get(kind)
    if names is None:
        raise ConfigError(f"unknown field kind {kind!r}; known: {sorted(FIELD_PARAMS)}")
    missing = [n for n in names if n not in params]
    if missing:
        raise ConfigError(f"field {kind!r} missing parameter {missing[0]!r}")
    extra = [n for n in params if n not in names]
    if extra:
        raise ConfigError(f"field {kind!r} got unknown parameter {extra[0]!r}")
    return ScalarField(kind, tuple((n, float(params[n])) for n in names))


def field_from_spec(text: str) -> ScalarField:
    """Parse a field spec such as ``offset_sin(a=2,b=1)`` or ``const(1)``."""
    kind, args = parse_call(text)
    if kind not in FIELD_PARAMS:
        raise ConfigError(f"unknown field kind {kind!r}; known: {sorted(FIELD_PARAMS)}")
    params = bind_params(kind, args, FIELD_PARAMS[kind], text)
    return make_field(kind, **params)


def eval_field(f: ScalarField, x):
    """Evaluate the closed form of ``f`` at ``x`` (scalar or array)."""
    x = np.asarray(x, dtype=np.float64)
    if f.kind == "const":
        out = np.broadcast_to(np.float64(f["c"]), x.shape).copy()
    elif f.kind == "offset_sin":
        out = f["a"] + f["b"] * np.sin(x)
    elif f.kind == "rational1":
        out = f["c"] + f["d"] / (1.0 + x * x)
    elif f.kind == "gauss_bump":
        w = f["w"]
        out = f["c"] + f["d"] * np.exp(-(x * x) / (2.0 * w * w))
    else:  # unreachable; construction validates the kind
        raise ConfigError(f"unknown field kind {f.kind!r}")
    return out if out.ndim else float(out)


def field_derivative(f: ScalarField, x):
    """Exact analytic derivative of ``f`` at ``x``."""
    x = np.asarray(x, dtype=np.float64)
    if f.kind == "const":
        out = np.zeros(x.shape)
    elif f.kind == "offset_sin":
        out = f["b"] * np.cos(x)
    elif f.kind == "rational1":
        u = 1.0 + x * x
        out = -2.0 * f["d"] * x / (u * u)
    elif f.kind == "gauss_bump":
        w2 = f["w"] * f["w"]
        out = -f["d"] * (x / w2) * np.exp(-(x * x) / (2.0 * w2))
    else:
        raise ConfigError(f"unknown field kind {f.kind!r}")
    return out if out.ndim else float(out)


def eval_ratio_derivative(q: ScalarField, K: ScalarField, x):
    """Derivative of q/K at ``x``: (q'K - qK') / K^2, from analytic derivatives."""
    x = np.asarray(x, dtype=np.float64)
    Kv = np.asarray(eval_field(K, x))
    if np.any(Kv == 0.0):
        bad = np.ravel(np.asarray(x))[np.ravel(Kv == 0.0)]
        raise SingularityError(f"K vanishes at x={float(bad[0]):g}")
    qv = eval_field(q, x)
    out = (field_derivative(q, x) * Kv - qv * field_derivative(K, x)) / (Kv * Kv)
    out = np.asarray(out)
    return out if out.ndim else float(out)


@dataclass
class AssumptionReport:
    """Grid-scan extrema of a field pair, with any bound violations.

    ``inf_K`` is the sampled lower bound on K, ``sup_abs_q`` the sampled
    bound on |q|, ``sup_abs_ratio_deriv`` the sampled bound on |(q/K)'|.
    ``violations`` holds (condition, worst x, worst value) triples and is
    empty exactly when inf_K clears the positivity floor and all three
    bounds are finite.
    """

    domain: tuple[float, float]
    inf_K: float
    sup_abs_q: float
    sup_abs_ratio_deriv: float
    grid_points: int
    k_floor: float
    violations: list[tuple[str, float, float]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def check_assumptions(q: ScalarField, K: ScalarField,
                      domain: tuple[float, float] = DEFAULT_SCAN_DOMAIN,
                      grid_points: int = 2001,
                      k_floor: float = K_POSITIVITY_FLOOR) -> AssumptionReport:
    """Scan [x_lo, x_hi] on a uniform grid and report the bound extrema.

    The scan is deliberately plain: all catalog fields are smooth, so grid
    extrema converge predictably, and the report records grid_points so any
    result can be reproduced exactly.
    """
    x_lo, x_hi = float(domain[0]), float(domain[1])
    if not x_lo < x_hi:
        raise ConfigError(f"scan domain must satisfy x_lo < x_hi, got [{x_lo:g}, {x_hi:g}]")
    if grid_points < 2:
        raise ConfigError(f"grid_points must be >= 2, got {grid_points}")

    xs = np.linspace(x_lo, x_hi, grid_points)
    Kv = np.asarray(eval_field(K, xs))
    qv = np.asarray(eval_field(q, xs))

    i_min = int(np.argmin(Kv))
    inf_K = float(Kv[i_min])
    i_q = int(np.argmax(np.abs(qv)))
    sup_abs_q = float(abs(qv[i_q]))

    # |(q/K)'| over the grid; where K vanishes the bound is infinite.
    with np.errstate(divide="ignore", invalid="ignore"):
        rd = (field_derivative(q, xs) * Kv - qv * field_derivative(K, xs)) / (Kv * Kv)
    rd = np.asarray(rd)
    abs_rd = np.abs(rd)
    finite_rd = abs_rd[np.isfinite(abs_rd)]
    if finite_rd.size and np.isfinite(abs_rd).all():
        i_rd = int(np.argmax(abs_rd))
        sup_abs_ratio_deriv = float(abs_rd[i_rd])
    else:
        bad = np.flatnonzero(~np.isfinite(abs_rd))
        i_rd = int(bad[0]) if bad.size else 0
        sup_abs_ratio_deriv = float("inf")

    violations: list[tuple[str, float, float]] = []
    if not (np.isfinite(inf_K) and inf_K > k_floor):
        violations.append(("inf_K_above_floor", float(xs[i_min]), inf_K))
    if not np.isfinite(sup_abs_q):
        violations.append(("sup_abs_q_finite", float(xs[i_q]), sup_abs_q))
    if not np.isfinite(sup_abs_ratio_deriv):
        violations.append(("sup_abs_ratio_deriv_finite", float(xs[i_rd]), sup_abs_ratio_deriv))

    return AssumptionReport(
        domain=(x_lo, x_hi),
        inf_K=inf_K,
        sup_abs_q=sup_abs_q,
        sup_abs_ratio_deriv=sup_abs_ratio_deriv,
        grid_points=grid_points,
        k_floor=k_floor,
        violations=violations,
    )
