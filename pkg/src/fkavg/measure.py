"""Invariant densities of the catalog models and the q/K quadrature target.

The long-run target value is the integral of q/K against the invariant
density.  It is evaluated by adaptive Simpson quadrature on a truncated
support: every catalog density has Gaussian-type (or faster) tails, and the
integrand q/K is bounded on the scan region, so the truncation error is at
most (tail mass) * sup|q/K| and is folded into the reported error estimate.
The default tolerances (rel 1e-9, tail 1e-10) keep this oracle far more
accurate than any Monte Carlo estimate it will be compared against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .errors import ConfigError, QuadratureBudgetError, SingularityError
from .fields import ScalarField, eval_field
from .sde import SdeModel

DEFAULT_REL_TOL = 1e-9
DEFAULT_TAIL_MASS_TOL = 1e-10
DEFAULT_MAX_EVALS = 500_000

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass
class InvariantDensity:
    """A catalog invariant density with its quadrature support.

    kind is one of ``gaussian`` (params mean, var), ``unnormalized``
    (params a, b, sigma of the quartic double-well potential) or
    ``point_mass`` (param x0).  ``normalization`` divides the raw shape
    function; it is 1 for gaussian/point_mass and computed once by
    quadrature for the unnormalized kind.
    """

    kind: str
    params: dict[str, float]
    normalization: float
    support: tuple[float, float]
    _ppf_table: tuple[np.ndarray, np.ndarray] | None = field(default=None, repr=False)

    def shape(self, x):
        """Unnormalized density shape (peak-scaled for the quartic well)."""
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "gaussian":
            mean, var = self.params["mean"], self.params["var"]
            return np.exp(-((x - mean) ** 2) / (2.0 * var)) / math.sqrt(var) / _SQRT_2PI
        if self.kind == "unnormalized":
            a, b, sigma = self.params["a"], self.params["b"], self.params["sigma"]
            u = 0.25 * a * x ** 4 - 0.5 * b * x ** 2
            u_min = -b * b / (4.0 * a)
            return np.exp(-2.0 * (u - u_min) / (sigma * sigma))
        raise SingularityError("point mass has no density function")

    def pdf(self, x):
        return self.shape(x) / self.normalization

    def ppf(self, u: float) -> float:
        """Inverse CDF, used for stationary initial-state draws."""
        if self.kind == "point_mass":
            return self.params["x0"]
        if self.kind == "gaussian":
            return self.params["mean"] + math.sqrt(self.params["var"]) * float(ndtri(u))
        if self._ppf_table is None:
            xs = np.linspace(self.support[0], self.support[1], 8193)
            dens = self.pdf(xs)
            cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(xs))])
            cdf /= cdf[-1]
            self._ppf_table = (cdf, xs)
        cdf, xs = self._ppf_table
        return float(np.interp(u, cdf, xs))


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    abs_error_estimate: float
    evaluations: int
    support_used: tuple[float, float]


def truncation_interval(m: InvariantDensity, tail_mass_tol: float) -> tuple[float, float]:
    """Interval outside which the density is negligible at the given tolerance.

    Gaussian: mean +- z*sqrt(var) with each tail below tail_mass_tol/2.
    Unnormalized: symmetric interval grown until the boundary shape value,
    relative to the peak (which is 1 by construction), drops below the
    tolerance.  Point mass: the degenerate interval at the atom.
    """
    if not 0.0 < tail_mass_tol < 1e-2:
        raise ConfigError(f"tail_mass_tol must be in (0, 1e-2), got {tail_mass_tol:g}")
    if m.kind == "gaussian":
        z = -float(ndtri(tail_mass_tol / 2.0))
        half = z * math.sqrt(m.params["var"])
        return (m.params["mean"] - half, m.params["mean"] + half)
    if m.kind == "unnormalized":
        a, b = m.params["a"], m.params["b"]
        c = max(2.0 * math.sqrt(b / a), 1.0)
        while float(m.shape(c)) >= tail_mass_tol:
            c *= 1.25
        return (-c, c)
    x0 = m.params["x0"]
    return (x0, x0)


def invariant_density(model: SdeModel,
                      tail_mass_tol: float = DEFAULT_TAIL_MASS_TOL) -> InvariantDensity:
    """The invariant density of a catalog model.

    ou -> gaussian(mu, sigma^2 / (2 theta)); double_well -> the Gibbs shape
    exp(-2 U / sigma^2) normalized by quadrature; constant_state -> a point
    mass at x0.
    """
    if model.kind == "ou":
        var = model["sigma"] ** 2 / (2.0 * model["theta"])
        if var == 0.0:
            dens = InvariantDensity("point_mass", {"x0": model["mu"]}, 1.0, (0.0, 0.0))
            dens.support = truncation_interval(dens, tail_mass_tol)
            return dens
        dens = InvariantDensity("gaussian", {"mean": model["mu"], "var": var}, 1.0, (0.0, 0.0))
        dens.support = truncation_interval(dens, tail_mass_tol)
        return dens
    if model.kind == "double_well":
        if model["sigma"] == 0.0:
            raise ConfigError("double_well with sigma=0 has no absolutely continuous "
                              "invariant density")
        dens = InvariantDensity(
            "unnormalized",
            {"a": model["a"], "b": model["b"], "sigma": model["sigma"]},
            1.0, (0.0, 0.0),
        )
        dens.support = truncation_interval(dens, tail_mass_tol)
        # The normalization constant appears in every later integrand
        # evaluation, so compute it once here, tighter than the default.
        z, _, _ = _adaptive_simpson(dens.shape, dens.support[0], dens.support[1],
                                    rel_tol=1e-12, max_evals=DEFAULT_MAX_EVALS)
        dens.normalization = z
        return dens
    if model.kind == "constant_state":
        dens = InvariantDensity("point_mass", {"x0": model["x0"]}, 1.0, (0.0, 0.0))
        dens.support = truncation_interval(dens, tail_mass_tol)
        return dens
    raise ConfigError(f"no invariant density for model kind {model.kind!r}")


def quadrature_q_over_K(q: ScalarField, K: ScalarField, m: InvariantDensity,
                        rel_tol: float = DEFAULT_REL_TOL,
                        max_evals: int = DEFAULT_MAX_EVALS) -> QuadratureResult:
    """Adaptive Simpson integral of (q/K) * density over the truncated support.

    For a point mass the value is exactly q(x0)/K(x0).  Raises
    QuadratureBudgetError (carrying the best estimate) if the halving cannot
    reach tolerance within ``max_evals`` integrand evaluations.
    """
    if not 1e-14 < rel_tol < 1e-2:
        raise ConfigError(f"rel_tol must be in (1e-14, 1e-2), got {rel_tol:g}")
    if m.kind == "point_mass":
        x0 = m.params["x0"]
        K0 = float(eval_field(K, x0))
        if K0 == 0.0:
            raise SingularityError(f"K vanishes at the point mass x0={x0:g}")
        return QuadratureResult(float(eval_field(q, x0)) / K0, 0.0, 1, m.support)

    lo, hi = m.support
    scan = np.linspace(lo, hi, 1001)
    Ks = np.asarray(eval_field(K, scan))
    if np.min(np.abs(Ks)) == 0.0 or np.min(Ks) < 0.0 < np.max(Ks):
        raise SingularityError("K is not bounded away from 0 on the support")
    sup_ratio = float(np.max(np.abs(np.asarray(eval_field(q, scan)) / Ks)))

    def integrand(x):
        return eval_field(q, x) / eval_field(K, x) * m.pdf(x)

    value, err, evals = _adaptive_simpson(integrand, lo, hi, rel_tol, max_evals)
    # account for the discarded tails
    tail_tol = DEFAULT_TAIL_MASS_TOL if m.kind == "gaussian" else float(m.shape(hi))
    err = err + tail_tol * sup_ratio
    return QuadratureResult(value, err, evals, m.support)


def _simpson(fa, fm, fb, h):
    return (h / 6.0) * (fa + 4.0 * fm + fb)


def _adaptive_simpson(f, lo, hi, rel_tol, max_evals):
    """Interval-halving Simpson with the classic S/15 error estimate.

    Returns (value, error_estimate, evaluations).  On budget exhaustion
    raises QuadratureBudgetError carrying the best available estimate.
    """
    fl, fm, fh = (float(f(x)) for x in (lo, 0.5 * (lo + hi), hi))
    evals = 3
    s0 = _simpson(fl, fm, fh, hi - lo)
    tol0 = rel_tol * max(abs(s0), 1e-300)

    total = 0.0
    err_total = 0.0
    # stack entries: (a, b, fa, fm, fb, S, tol)
    stack = [(lo, hi, fl, fm, fh, s0, tol0)]
    while stack:
        a, b, fa, fm, fb, s, tol = stack.pop()
        m_ = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m_), 0.5 * (m_ + b)
        flm, frm = float(f(lm)), float(f(rm))
        evals += 2
        sl = _simpson(fa, flm, fm, m_ - a)
        sr = _simpson(fm, frm, fb, b - m_)
        delta = (sl + sr) - s
        if abs(delta) <= 15.0 * tol or (b - a) < 1e-13 * (hi - lo):
            total += sl + sr + delta / 15.0
            # report |delta| rather than the asymptotic |delta|/15: intervals
            # are accepted right at the threshold, where the sharper bound
            # can undershoot the realized error
            err_total += abs(delta)
        else:
            if evals + 4 > max_evals:
                best = total + sl + sr + sum(e[5] for e in stack)
                best_err = err_total + abs(delta) + 0.1 * sum(abs(e[5]) for e in stack)
                raise QuadratureBudgetError(
                    f"quadrature budget of {max_evals} evaluations exceeded",
                    best_value=best, best_error=best_err, evaluations=evals,
                )
            stack.append((a, m_, fa, flm, fm, sl, 0.5 * tol))
            stack.append((m_, b, fm, frm, fb, sr, 0.5 * tol))
    return total, err_total, evals
