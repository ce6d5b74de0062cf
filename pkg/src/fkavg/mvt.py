"""Pathwise mean-value identity for the exponential functional.

On any window [t, T] of a path with continuous q and K, the functional
admits an exact Cauchy-mean-value representation

    Y_[t,T](t) = (q/K)(X_xi) * (1 - exp(-(A(T) - A(t))))

at the first interior time xi where the ratio K(X_s)/q(X_s) crosses the
boundary level

    r_T(t) = (1 - exp(-(A(T) - A(t)))) / Y_[t,T](t).

This module computes r, locates xi on the grid (first sign change of
K/q - r, refined by linear interpolation), assembles the identity residual,
and evaluates the terminal limit of r, which tends to K(X_T)/q(X_T) as
t -> T.

A discrete path may fail to bracket a crossing that the continuum guarantees,
so records carry an explicit ``crossing_found`` flag instead of failing
silently; the fallback reports the grid argmin of |K/q - r|.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularRatioError
from .fields import ScalarField, eval_field
from .functional import FunctionalSeries, _step_coefficients, window_value
from .sde import SamplePath

# |K/q - r| below this (relative) on the whole window means the ratio is
# constant and every interior point satisfies the identity; the first
# interior grid time is returned to honor the infimum convention.
_CONST_RATIO_RTOL = 1e-10


@dataclass(frozen=True)
class MvtRecord:
    """One verification of the mean-value identity on a window."""

    t_index: int
    T_index: int
    r: float
    xi: float
    xi_bracket: tuple[int, int]
    lhs: float
    rhs: float
    residual: float
    crossing_found: bool


def boundary_ratio(series: FunctionalSeries, path: SamplePath, q: ScalarField,
                   K: ScalarField, t_index: int, T_index: int) -> float:
    """r_T(t) in the exponent-difference form, safe for long horizons."""
    _check_window(path, t_index, T_index)
    num = -np.expm1(-(series.A[T_index] - series.A[t_index]))
    den = window_value(path, q, K, t_index, T_index)
    if den == 0.0:
        raise SingularRatioError(
            f"window functional vanishes on [{t_index}, {T_index}] (q = 0 on the window?)"
        )
    return float(num / den)


def boundary_ratio_global_form(series: FunctionalSeries, path: SamplePath,
                               q: ScalarField, K: ScalarField,
                               t_index: int, T_index: int) -> float:
    """r_T(t) through bare exp(-A) factors.

    Underflows once A exceeds ~745, so this exists only as a cross-check of
    `boundary_ratio` on short windows; production code uses the
    exponent-difference form.
    """
    _check_window(path, t_index, T_index)
    A = series.A
    num = np.exp(-A[t_index]) - np.exp(-A[T_index])
    qv = np.asarray(eval_field(q, path.states[t_index:T_index + 1]))
    w = np.full(T_index - t_index + 1, path.dt)
    w[0] = w[-1] = 0.5 * path.dt
    den = float(np.sum(w * qv * np.exp(-A[t_index:T_index + 1])))
    if den == 0.0:
        raise SingularRatioError("global-form denominator vanished")
    return float(num / den)


def time_change(path: SamplePath, q: ScalarField, K: ScalarField, r: float,
                t_index: int, T_index: int) -> tuple[float, tuple[int, int], bool]:
    """First interior time where K(X)/q(X) crosses the level ``r``.

    Scans grid points s in (t, T].  A sign change of K/q - r between
    consecutive interior points brackets the crossing, which is then refined
    by linear interpolation.  If the ratio equals r everywhere (constant
    ratio), the first interior grid time realizes the infimum.  If no
    crossing is bracketed, returns the grid argmin of |K/q - r| with
    ``crossing_found`` False.
    """
    _check_window(path, t_index, T_index)
    states = path.states[t_index:T_index + 1]
    qv = np.asarray(eval_field(q, states))
    if np.any(qv == 0.0):
        k = int(np.flatnonzero(qv == 0.0)[0])
        raise SingularRatioError(f"q vanishes on the window at grid index {t_index + k}")
    rho = np.asarray(eval_field(K, states)) / qv
    phi = rho - r
    times = path.t0 + path.dt * np.arange(path.n_steps + 1)

    # interior scan points are s = t_index+1 .. T_index (local 1 .. W)
    interior = phi[1:]
    if np.max(np.abs(interior)) <= _CONST_RATIO_RTOL * max(1.0, abs(r)):
        lo = t_index + 1
        hi = min(t_index + 2, T_index)
        return float(times[lo]), (lo, hi), True

    prev = None
    for s in range(1, len(phi)):
        if phi[s] == 0.0:
            if s >= 2:
                lo, hi = s - 1, s
            else:
                lo, hi = s, min(s + 1, T_index - t_index)
            return float(times[t_index + s]), (t_index + lo, t_index + hi), True
        if prev is not None and (prev < 0.0) != (phi[s] < 0.0):
            frac = prev / (prev - phi[s])
            xi = float(times[t_index + s - 1] + frac * path.dt)
            return xi, (t_index + s - 1, t_index + s), True
        prev = phi[s]

    s_star = 1 + int(np.argmin(np.abs(interior)))
    return float(times[t_index + s_star]), (t_index + s_star, t_index + s_star), False


def mvt_identity_check(path: SamplePath, q: ScalarField, K: ScalarField,
                       t_index: int, T_index: int) -> MvtRecord:
    """Assemble both sides of the identity on a window and their residual.

    The state at xi is defined by linear interpolation between its
    bracketing grid states, matching the accuracy order of the Euler path.
    """
    _check_window(path, t_index, T_index)
    sub = SamplePath(path.dt, T_index - t_index, path.states[t_index:T_index + 1],
                     path.master_seed, path.path_index)
    dA, em, src, _ = _step_coefficients(sub, q, K)
    y = 0.0
    em_l = em.tolist()
    src_l = src.tolist()
    for k in range(len(em_l) - 1, -1, -1):
        y = y + em_l[k] * (src_l[k] - y)
    lhs = y
    num = -np.expm1(-float(np.sum(dA)))
    if lhs == 0.0:
        raise SingularRatioError("window functional vanishes; ratio undefined")
    r = float(num / lhs)

    xi, bracket, found = time_change(path, q, K, r, t_index, T_index)
    x_xi = float(np.interp(xi, path.t0 + path.dt * np.arange(path.n_steps + 1), path.states))
    K_xi = float(eval_field(K, x_xi))
    if K_xi == 0.0:
        raise SingularRatioError(f"K vanishes at the interpolated state x={x_xi:g}")
    rhs = float(eval_field(q, x_xi)) / K_xi * num
    return MvtRecord(
        t_index=t_index, T_index=T_index, r=r, xi=xi, xi_bracket=bracket,
        lhs=lhs, rhs=rhs, residual=lhs - rhs, crossing_found=found,
    )


def terminal_ratio_limit(path: SamplePath, q: ScalarField, K: ScalarField,
                         T_index: int, n_tail: int) -> np.ndarray:
    """r_T(t) at the last ``n_tail`` grid times before t_{T_index}.

    Returned in increasing t order; as t -> T the values approach
    K(X_T)/q(X_T) (the 0/0 limit of the ratio resolves to the local value).
    """
    if not 1 <= n_tail < T_index <= path.n_steps:
        raise IndexError(
            f"need 1 <= n_tail < T_index <= n_steps, got n_tail={n_tail}, "
            f"T_index={T_index}, n_steps={path.n_steps}"
        )
    t0_index = T_index - n_tail
    sub = SamplePath(path.dt, n_tail, path.states[t0_index:T_index + 1],
                     path.master_seed, path.path_index)
    dA, em, src, _ = _step_coefficients(sub, q, K)
    out = np.empty(n_tail)
    y = 0.0
    acc = 0.0
    for k in range(n_tail - 1, -1, -1):
        y = y + em[k] * (src[k] - y)
        acc += dA[k]
        if y == 0.0:
            raise SingularRatioError("window functional vanishes; ratio undefined")
        out[k] = -np.expm1(-acc) / y
    return out


def _check_window(path: SamplePath, t_index: int, T_index: int):
    if not 0 <= t_index < T_index <= path.n_steps:
        raise IndexError(
            f"window ({t_index}, {T_index}) invalid for grid 0..{path.n_steps}"
        )
