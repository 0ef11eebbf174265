"""Damping coefficients, feedback laws and collar cut-off profiles.

The damping term in the wave equation is a(x) g(u_t): a is a nonnegative
vertex field supported (at least) on the complement of the certified
multiplier region, and g is a monotone odd feedback law that is allowed to
be very weak near zero.  This module builds both, plus the C^1 cut-off
profile used whenever a field has to taper off over a collar of prescribed
width: the profile was chosen so that eta'^2 / eta stays bounded, which is
the property the absorption estimates actually use.
"""

from dataclasses import dataclass

import numpy as np

from .mesh import geodesic_distance


# -- cut-off profile ---------------------------------------------------------

def profile_eta(x, width=1.0):
    """C^1 taper profile, vectorized.

    Equal to 1 for x <= 0 and 0 for x >= width; in between the normalized
    variable t = x / width runs through a cubic 8t^3 - 7t^2 + 1 on (0, 1/2)
    and a parabola (t - 1)^2 on [1/2, 1].  The two branches meet at value
    1/4 with slope -1, so the ratio eta'^2 / eta is exactly 4 on the
    parabola and bounded overall.
    """
    width = float(width)
    if width <= 0:
        raise ValueError("profile width must be positive")
    t = np.asarray(x, dtype=float) / width
    out = np.zeros_like(t)
    out[t <= 0] = 1.0
    cubic = (t > 0) & (t < 0.5)
    tc = t[cubic]
    out[cubic] = (8.0 * tc - 7.0) * tc * tc + 1.0
    quad = (t >= 0.5) & (t <= 1.0)
    out[quad] = (t[quad] - 1.0) ** 2
    return out if out.ndim else float(out)


def profile_eta_prime(x, width=1.0):
    """Derivative of profile_eta with respect to x."""
    width = float(width)
    if width <= 0:
        raise ValueError("profile width must be positive")
    t = np.asarray(x, dtype=float) / width
    out = np.zeros_like(t)
    cubic = (t > 0) & (t < 0.5)
    tc = t[cubic]
    out[cubic] = (24.0 * tc - 14.0) * tc / width
    quad = (t >= 0.5) & (t <= 1.0)
    out[quad] = 2.0 * (t[quad] - 1.0) / width
    return out if out.ndim else float(out)


def verify_profile_bound(n_samples=500001):
    """Numerically certify sup eta'^2 / eta over the taper interval.

    Returns a dict with the supremum, its location in the normalized
    variable, and the exact constant ratio of the parabolic branch.  Dense
    sampling of the cubic branch is refined with one parabolic step, so the
    reported bound is stable far beyond the sampling resolution.
    """
    t = np.linspace(0.0, 0.5, int(n_samples))[1:-1]
    eta = (8.0 * t - 7.0) * t * t + 1.0
    ratio = ((24.0 * t - 14.0) * t) ** 2 / eta
    i = int(np.argmax(ratio))
    # parabolic refinement through the three samples around the peak
    t0, t1, t2 = t[i - 1], t[i], t[i + 1]
    r0, r1, r2 = ratio[i - 1], ratio[i], ratio[i + 1]
    denom = (r0 - 2.0 * r1 + r2)
    t_star = t1 if denom == 0 else t1 + 0.5 * (r0 - r2) / denom * (t1 - t0)
    eta_s = (8.0 * t_star - 7.0) * t_star * t_star + 1.0
    r_star = ((24.0 * t_star - 14.0) * t_star) ** 2 / eta_s
    bound = float(max(r_star, ratio[i], 4.0))
    return {"bound": bound, "argmax": float(t_star), "quadratic_branch": 4.0}


def build_cutoff_field(mesh, region, width):
    """Vertex field equal to 1 on the region, tapering to 0 over the collar.

    width must be at least two maximal edge lengths so the discrete taper has
    room to resolve the profile; the gradient bound inherits the profile's
    eta'^2 / eta <= M constant scaled by 1 / width^2.
    """
    width = float(width)
    region = np.atleast_1d(np.asarray(region))
    if region.dtype == bool:
        region = np.flatnonzero(region)
    if len(region) == 0:
        raise ValueError("cutoff region is empty")
    if width < 2.0 * mesh.max_edge_length:
        raise ValueError(
            "cutoff width %g is below two maximal edge lengths (%g)"
            % (width, 2.0 * mesh.max_edge_length))
    return profile_eta(geodesic_distance(mesh, region), width)


# -- feedback laws -----------------------------------------------------------

class FeedbackLaw:
    """Odd monotone feedback g acting on the velocity.

    kind "linear":  g(s) = slope * s.
    kind "power":   g(s) = s |s|^(p-1) for |s| <= 1, g(s) = s beyond, which
                    degenerates at the origin for p > 1.
    kind "table":   monotone interpolation of sample pairs on s >= 0,
                    extended oddly and linearly beyond the last node.

    Every law is globally sandwiched between linear functions away from the
    unit interval; sector_bounds() reports those slopes.
    """

    def __init__(self, kind, slope=None, exponent=None, table=None):
        self.kind = str(kind)
        if self.kind == "linear":
            if slope is None or not (float(slope) > 0):
                raise ValueError("linear law needs a positive slope")
            self.slope = float(slope)
        elif self.kind == "power":
            if exponent is None or not (float(exponent) >= 1):
                raise ValueError("power law needs an exponent >= 1")
            self.exponent = float(exponent)
        elif self.kind == "table":
            s, g = np.asarray(table[0], float), np.asarray(table[1], float)
            if s.ndim != 1 or s.shape != g.shape or len(s) < 2:
                raise ValueError("table law needs matching 1d sample arrays")
            if s[0] != 0.0 or g[0] != 0.0:
                raise ValueError("table must start at (0, 0)")
            if np.any(np.diff(s) <= 0):
                raise ValueError("table abscissae must increase strictly")
            if np.any(np.diff(g) < 0) or g[-1] <= 0:
                raise ValueError("table ordinates must be nondecreasing "
                                 "and end positive")
            self.table_s, self.table_g = s, g
            self.tail_slope = (g[-1] - g[-2]) / (s[-1] - s[-2])
            if self.tail_slope <= 0:
                self.tail_slope = g[-1] / s[-1]
        else:
            raise ValueError("unknown feedback kind %r" % kind)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "linear":
            out = self.slope * s
        elif self.kind == "power":
            mag = np.abs(s)
            out = np.where(mag <= 1.0,
                           np.sign(s) * mag ** self.exponent, s)
        else:
            mag = np.abs(s)
            out = np.interp(mag, self.table_s, self.table_g)
            beyond = mag > self.table_s[-1]
            out = np.where(
                beyond,
                self.table_g[-1] + self.tail_slope * (mag - self.table_s[-1]),
                out)
            out = np.sign(s) * out
        return out if out.ndim else float(out)

    def sector_bounds(self):
        """(k, K) with k |s| <= |g(s)| <= K |s| for |s| >= 1."""
        if self.kind == "linear":
            return (self.slope, self.slope)
        if self.kind == "power":
            return (1.0, 1.0)
        s = np.concatenate([self.table_s[self.table_s >= 1.0],
                            [max(1.0, self.table_s[-1]) * 2.0,
                             max(1.0, self.table_s[-1]) * 8.0]])
        if s[0] > 1.0:
            s = np.concatenate([[1.0], s])
        g = self(s)
        ratios = g / s
        k, big = float(ratios.min()), float(ratios.max())
        if not k > 0:
            raise ValueError("table law is not bounded below by a linear "
                             "function beyond the unit interval")
        return (k, big)

    def __repr__(self):
        if self.kind == "linear":
            return "FeedbackLaw(linear, slope=%g)" % self.slope
        if self.kind == "power":
            return "FeedbackLaw(power, exponent=%g)" % self.exponent
        return "FeedbackLaw(table, %d nodes)" % len(self.table_s)


# -- damping coefficient -----------------------------------------------------

@dataclass
class DampingField:
    """Vertex damping coefficient with its active-region bookkeeping.

    region_star collects the vertices where the coefficient reaches its
    floor a0; the decay estimates only ever use that the coefficient is at
    least a0 there and bounded overall.
    """
    a: np.ndarray
    a0: float
    mode: str
    smooth: bool
    width: float
    region_star: np.ndarray

    @property
    def a_max(self):
        return float(self.a.max())


def zero_damping(mesh):
    """The a = 0 coefficient (conservative dynamics)."""
    return DampingField(a=np.zeros(mesh.n_vertices), a0=0.0, mode="zero",
                        smooth=False, width=0.0,
                        region_star=np.empty(0, dtype=np.int64))


def build_damping(mesh, a0=1.0, mf=None, mode="complement", smooth=False,
                  width=None):
    """Damping coefficient on the mesh.

    mode "global" puts the constant a0 everywhere.  mode "complement" takes
    a certified multiplier field and supports the damping on the complement
    of its region: sharply (indicator times a0) or, with smooth=True,
    tapered into the region by the C^1 collar profile so the coefficient
    stays continuous.  The active region {a >= a0} is the complement in both
    cases; smoothing never shrinks it because the profile equals 1 at
    distance zero.
    """
    a0 = float(a0)
    if a0 <= 0:
        raise ValueError("damping floor a0 must be positive")
    n = mesh.n_vertices
    if mode == "global":
        a = np.full(n, a0)
        return DampingField(a=a, a0=a0, mode=mode, smooth=False, width=0.0,
                            region_star=np.arange(n))
    if mode != "complement":
        raise ValueError("unknown damping mode %r" % mode)
    if mf is None:
        raise ValueError("complement mode needs a multiplier field")
    comp = np.flatnonzero(~mf.region_mask(n))
    if len(comp) == 0:
        raise ValueError("certified region covers every vertex; "
                         "the damping would have empty support")
    if smooth:
        w = 2.0 * mesh.max_edge_length if width is None else float(width)
        a = a0 * build_cutoff_field(mesh, comp, w)
    else:
        w = 0.0
        a = np.zeros(n)
        a[comp] = a0
    star = np.flatnonzero(a >= a0 * (1.0 - 1e-12))
    return DampingField(a=a, a0=a0, mode=mode, smooth=bool(smooth), width=w,
                        region_star=star)
