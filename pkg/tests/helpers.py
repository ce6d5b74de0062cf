"""Shared oracles for the test suite.

Everything here is deliberately independent of the implementation under
test: closed forms, literal double-loop quadrature, midpoint rules and
bisection, used to freeze expected values.
"""

import math

import numpy as np

from fkavg import eval_field


def const_Y_steps(c, k, dt, m):
    """Closed form of the functional for constant fields, m steps from terminal.

    Parameterized by the step count so comparisons do not pick up rounding
    of the time grid itself: Y at grid index i with terminal n is
    (c/k) * (1 - exp(-k*dt*(n-i))).
    """
    return -(c / k) * math.expm1(-(k * dt) * m)


def const_ebar(c, k, T):
    """Closed form of the running average at horizon T for constant fields."""
    return (c / k) * (1.0 - (-math.expm1(-k * T)) / (k * T))


def naive_direct(path, q, K, i):
    """Literal double-loop trapezoid of the functional at index i.

    O(N^2) per call; guards the vectorized direct oracle on small paths.
    """
    n = path.n_steps
    dt = path.dt
    if i == n:
        return 0.0
    Kv = [float(eval_field(K, x)) for x in path.states]
    qv = [float(eval_field(q, x)) for x in path.states]
    total = 0.0
    for s in range(i, n + 1):
        # A[s] - A[i] by per-cell trapezoid sums
        expo = 0.0
        for j in range(i, s):
            expo += dt * 0.5 * (Kv[j] + Kv[j + 1])
        w = 0.5 * dt if s in (i, n) else dt
        total += w * qv[s] * math.exp(-expo)
    return total


def midpoint_quadrature(f, lo, hi, n):
    """Composite midpoint rule with n cells; the independent quadrature oracle."""
    h = (hi - lo) / n
    xs = lo + h * (np.arange(n) + 0.5)
    return float(np.sum(f(xs)) * h)


def bisect_root(f, a, b, iters=200):
    """Plain bisection for a bracketed root; oracle for interpolated crossings."""
    fa = f(a)
    for _ in range(iters):
        m = 0.5 * (a + b)
        fm = f(m)
        if fm == 0.0:
            return m
        if (fa < 0.0) != (fm < 0.0):
            b = m
        else:
            a, fa = m, fm
    return 0.5 * (a + b)


def synthetic_path(fn, dt, n_steps, master_seed=0, path_index=0):
    """A SamplePath whose states are exact samples of a smooth function of t.

    Used for grid-refinement studies where the path itself must not change
    between resolutions.
    """
    from fkavg import SamplePath

    t = dt * np.arange(n_steps + 1)
    return SamplePath(dt, n_steps, np.asarray(fn(t), dtype=float), master_seed, path_index)
