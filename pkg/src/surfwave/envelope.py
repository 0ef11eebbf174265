"""Decay-rate calculus: from a feedback law to an energy envelope.

The pipeline is h -> r -> p -> q -> S.  h turns the feedback's behavior near
zero into a concave gauge with h(s g(s)) >= s^2 + g(s)^2 on the unit
interval; r rescales it by the space-time measure; p composes the
observability constant and the gauge into a contraction rate; q is the
one-step decay increment; and S solves the scalar ODE S' + q(S) = 0, the
curve a damped trajectory's energy is expected to stay under after a time
rescaling.  Everything here is a pure function of a handful of positive
constants, so closed forms exist for linear and power laws and serve as
oracles for the generic bisection-based construction.
"""

from dataclasses import dataclass, field

import numpy as np

BISECT_TOL = 1e-12
BISECT_MAXITER = 200


def invert_monotone(fn, y, hi_guess=1.0):
    """Solve fn(x) = y for increasing fn with fn(0) = 0, y >= 0.

    Bracket growth is geometric; bisection runs to 1e-12 relative.
    """
    y = float(y)
    if y < 0:
        raise ValueError("monotone inversion needs a nonnegative target")
    if y == 0:
        return 0.0
    lo = 0.0
    hi = max(float(hi_guess), 1e-300)
    for _ in range(4000):
        if fn(hi) >= y:
            break
        lo = hi
        hi *= 2.0
    else:
        raise ValueError("could not bracket the inverse; is the function "
                         "increasing and unbounded?")
    for _ in range(BISECT_MAXITER):
        mid = 0.5 * (lo + hi)
        if fn(mid) < y:
            lo = mid
        else:
            hi = mid
        if hi - lo <= BISECT_TOL * max(hi, 1e-300):
            break
    return 0.5 * (lo + hi)


def build_h(law, n_samples=2001):
    """Concave increasing gauge with h(s g(s)) >= s^2 + g(s)^2 on [0, 1].

    Linear and power laws get their closed forms; a tabulated law gets the
    upper concave hull of the sampled parametric curve (s g(s), s^2+g^2(s)),
    extended linearly past the last sample with the final hull slope.
    """
    if law.kind == "linear":
        m = law.slope
        coeff = m + 1.0 / m
        return lambda x: coeff * np.asarray(x, dtype=float)
    if law.kind == "power":
        expo = 2.0 / (law.exponent + 1.0)
        def h_power(x):
            x = np.asarray(x, dtype=float)
            return 2.0 * np.maximum(x, 0.0) ** expo
        return h_power
    s = np.linspace(0.0, 1.0, int(n_samples))
    g = law(s)
    px = s * g
    py = s * s + g * g
    if np.any((px <= 1e-300) & (py > 1e-12)):
        raise ValueError("law vanishes away from zero; no concave gauge "
                         "with h(0) = 0 can dominate it")
    order = np.argsort(px, kind="stable")
    px, py = px[order], py[order]
    hull_x, hull_y = [0.0], [0.0]
    for x, y in zip(px, py):
        while len(hull_x) >= 2:
            # pop while the new point keeps the chain convex from above
            x1, y1 = hull_x[-2], hull_y[-2]
            x2, y2 = hull_x[-1], hull_y[-1]
            if (y2 - y1) * (x - x2) <= (y - y2) * (x2 - x1):
                hull_x.pop(); hull_y.pop()
            else:
                break
        if x > hull_x[-1]:
            hull_x.append(x); hull_y.append(y)
        elif y > hull_y[-1]:
            hull_y[-1] = y
    hx = np.asarray(hull_x)
    hy = np.asarray(hull_y)
    tail = (hy[-1] - hy[-2]) / (hx[-1] - hx[-2])
    def h_table(x):
        x = np.asarray(x, dtype=float)
        out = np.interp(x, hx, hy)
        beyond = x > hx[-1]
        out = np.where(beyond, hy[-1] + tail * (x - hx[-1]), out)
        return out if out.ndim else float(out)
    return h_table


@dataclass
class RateFunctions:
    """The decay calculus bundle; p and q invert monotone maps on demand."""
    h: object
    r: object
    p: object
    q: object
    c: float
    L: float
    meas_sigma: float
    K0: float
    a_norm: float


def build_rate_functions(law, meas_sigma, a_norm, C_obs):
    """Assemble the rate chain for a law and measured constants.

    c = (1/k + K) / (meas_sigma (1 + a_norm)) with (k, K) the law's linear
    sector bounds beyond the unit interval; L = 1/(C_obs meas_sigma
    (1 + a_norm)).  The inverses inside p and q are monotone bisections.
    """
    meas_sigma = float(meas_sigma)
    a_norm = float(a_norm)
    C_obs = float(C_obs)
    if meas_sigma <= 0 or a_norm < 0 or C_obs <= 0:
        raise ValueError("rate constants must be positive "
                         "(a_norm nonnegative)")
    h = build_h(law)
    k, big_k = law.sector_bounds()
    K0 = 1.0 / k + big_k
    c = K0 / (meas_sigma * (1.0 + a_norm))
    L = 1.0 / (C_obs * meas_sigma * (1.0 + a_norm))

    def r(s):
        return h(np.asarray(s, dtype=float) / meas_sigma)

    def cir(z):
        return c * z + r(z)

    def p(x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 0:
            return invert_monotone(cir, L * float(x))
        return np.array([invert_monotone(cir, L * xi) for xi in x])

    def ip(z):
        return z + p(z)

    def q(x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 0:
            return float(x) - invert_monotone(ip, float(x))
        return np.array([xi - invert_monotone(ip, xi) for xi in x])

    return RateFunctions(h=h, r=r, p=p, q=q, c=c, L=L,
                         meas_sigma=meas_sigma, K0=K0, a_norm=a_norm)


@dataclass
class Envelope:
    times: np.ndarray
    values: np.ndarray
    T0: float = 0.0

    def __call__(self, t):
        """Interpolated S(t); clamped to the last value beyond the grid."""
        return np.interp(t, self.times, self.values)

    def write_csv(self, path):
        with open(path, "w") as fh:
            fh.write("t,S\n")
            for t, s in zip(self.times, self.values):
                fh.write("%.17g,%.17g\n" % (t, s))


def solve_envelope(rate, E0, horizon, dt):
    """Integrate S' + q(S) = 0, S(0) = E0, by classical 4th-order steps.

    rate may be a RateFunctions bundle (its q is used) or a bare callable.
    S is clamped at zero if it ever crosses.
    """
    q = rate.q if hasattr(rate, "q") else rate
    E0 = float(E0)
    if E0 < 0:
        raise ValueError("initial energy must be nonnegative")
    dt = float(dt)
    horizon = float(horizon)
    if dt <= 0 or horizon <= 0:
        raise ValueError("need positive dt and horizon")
    n = int(np.ceil(horizon / dt - 1e-12))
    times = np.empty(n + 1)
    values = np.empty(n + 1)
    times[0], values[0] = 0.0, E0
    s = E0
    for i in range(n):
        if s <= 0.0:
            s = 0.0
            times[i + 1] = times[i] + dt
            values[i + 1] = 0.0
            continue
        k1 = -q(max(s, 0.0))
        k2 = -q(max(s + 0.5 * dt * k1, 0.0))
        k3 = -q(max(s + 0.5 * dt * k2, 0.0))
        k4 = -q(max(s + dt * k3, 0.0))
        s = s + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if s < 0.0:
            s = 0.0
        times[i + 1] = times[i] + dt
        values[i + 1] = s
    return Envelope(times=times, values=values)


def lemma_b_worst_sequence(p_fn, s0, m_max):
    """Saturated recursion s_{m+1} + p(s_{m+1}) = s_m, solved per term.

    This is the slowest-decaying sequence allowed by the one-step
    inequality; it is the thing the envelope has to dominate at integer
    times.
    """
    s0 = float(s0)
    if s0 < 0:
        raise ValueError("sequence seed must be nonnegative")
    out = np.empty(int(m_max) + 1)
    out[0] = s0
    s = s0
    for m in range(int(m_max)):
        def ip(z):
            return z + p_fn(z)
        try:
            s = invert_monotone(ip, s, hi_guess=max(s, 1e-12))
        except ValueError as err:
            raise ValueError(
                "recursion step %d failed to bracket; p does not look "
                "monotone increasing (%s)" % (m, err)) from None
        out[m + 1] = s
    return out


def envelope_compare(trace, env, t0_cap=None, grid_factor=1.05):
    """Fit the time rescaling T0 in E(t) <= S(t/T0 - 1).

    Scans T0 over a geometric grid and reports the smallest value for which
    every sampled energy at t > T0 sits under the (interpolated) envelope;
    samples whose rescaled argument falls past the envelope's grid make
    that T0 infeasible rather than silently passing.  Returns a dict with
    the fitted T0 (None if the cap is hit), the violation count at the
    reported T0 and the max ratio E/S.
    """
    t = np.asarray(trace.times, dtype=float)
    e = np.asarray(trace.energies, dtype=float)
    scale = max(abs(e[0]), abs(env.values[0]), 1e-300)
    if abs(e[0] - env.values[0]) > 1e-6 * scale:
        raise ValueError("trace and envelope do not share the initial "
                         "energy scaling")
    if t0_cap is None:
        t0_cap = max(t[-1], 1.0)
    t0 = max(t[1] - t[0], 1e-6 * t[-1]) if len(t) > 1 else 1.0

    def check(T0):
        sel = t > T0
        if not sel.any():
            return 0, 0.0, True     # vacuous: nothing to dominate
        arg = t[sel] / T0 - 1.0
        if arg.max() > env.times[-1]:
            return int(sel.sum()), np.inf, False
        s_vals = env(arg)
        ok = s_vals > 0
        bad = ~ok & (e[sel] > 0)
        ratio = np.max(np.where(ok, e[sel] / np.maximum(s_vals, 1e-300), np.inf)) \
            if ok.any() else np.inf
        violations = int(np.sum((e[sel] > s_vals) & (e[sel] > 0))) + int(bad.sum())
        return violations, float(ratio), violations == 0

    grid = []
    T0 = t0
    while T0 <= t0_cap:
        grid.append(T0)
        T0 *= grid_factor
    best = None
    for T0 in grid:
        violations, ratio, good = check(T0)
        if good:
            best = (T0, violations, ratio)
            break
    if best is None:
        violations, ratio, _ = check(grid[-1]) if grid else (0, np.inf, False)
        return {"T0": None, "t0_cap": float(t0_cap),
                "violations_at_cap": violations, "max_ratio_at_cap": ratio}
    env.T0 = best[0]
    return {"T0": best[0], "violations": best[1], "max_ratio": best[2],
            "t0_cap": float(t0_cap)}
