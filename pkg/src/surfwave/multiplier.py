"""Construction and certification of the interior multiplier field.

The goal is a scalar field f on the mesh that looks like "distance along a
direction plus half the squared distance" in normal coordinates around many
well-spread origins: on the certified region its Hessian is close to the
metric, which is exactly what the velocity/gradient multiplier arguments
need.  The construction is chart-by-chart: polar normal charts are unfolded
around greedily chosen origins, the model field is laid down in each chart,
certified pointwise through least-squares Hessian fits, and the per-chart
pieces are glued with collar cut-offs into one global field whose certified
region covers the surface up to a prescribed area deficit.

Chart coordinates are normalized by the chart radius, so every certified
quantity (Hessian, Laplacian, gradient norm) is reported in chart units.
This makes certification invariant under uniform rescaling of the mesh with
the chart radius, and at unit radius it coincides with the physical picture
where the model field has Hessian equal to the identity, Laplacian 2 and
unit gradient at the origin.
"""

from dataclasses import dataclass, field

import numpy as np

from .damping import profile_eta
from .mesh import (geodesic_distance, gradient, triangle_gradients,
                   wavefront_distance)

DEFAULT_MARGINS = (0.05, 0.05, 0.05)


@dataclass
class NormalChart:
    """Polar normal chart around a mesh vertex.

    coords are dimensionless (offsets divided by radius); dist keeps the
    physical wavefront distance of every chart vertex to the origin.
    """
    origin: int
    radius: float
    basis: np.ndarray          # (3, 2) orthonormal tangent pair at the origin
    vertices: np.ndarray       # (k,) mesh indices, origin first
    coords: np.ndarray         # (k, 2) normalized chart coordinates
    dist: np.ndarray           # (k,) physical radial distance
    local_index: dict = field(repr=False, default_factory=dict)

    def __post_init__(self):
        if not self.local_index:
            self.local_index = {int(v): i for i, v in enumerate(self.vertices)}


@dataclass
class MultiplierField:
    """Glued multiplier with its certification payload.

    hess_f, laplacian_f and grad_norm hold chart-normalized values on the
    certified region (populated from the owning chart, where the glued field
    coincides with the local model) and global-fit values elsewhere.  grad_f
    is always the physical per-triangle gradient of the glued field, which is
    what the integral identities consume.
    """
    f: np.ndarray              # (n,) glued field values
    grad_f: np.ndarray         # (m, 3) physical per-triangle gradient
    grad_norm: np.ndarray      # (n,)
    hess_f: np.ndarray         # (n, 2, 2) in the vertex tangent bases
    laplacian_f: np.ndarray    # (n,)
    reliable: np.ndarray       # (n,) bool, quadratic fit trustworthy
    region_v: np.ndarray       # sorted vertex indices of the certified region
    epsilon_budget: float
    margins: tuple
    certified: bool
    report: dict = field(repr=False, default_factory=dict)

    def region_mask(self, n=None):
        mask = np.zeros(len(self.f) if n is None else n, dtype=bool)
        mask[self.region_v] = True
        return mask


def build_chart(mesh, origin, radius, pad=0.0):
    """Unfold a polar normal chart around a vertex.

    Radial data comes from the wavefront distance (shortest paths unfolded
    through triangles); the angular coordinate of each vertex is the azimuth
    of its offset in the origin's tangent plane.  Coordinates are these polar
    pairs divided by the radius.  Vertices whose tangent-plane projection is
    too short to carry an angle (near-antipodal points) are left out.

    pad extends the vertex collection beyond the nominal radius without
    changing the normalization; it exists so that difference stencils of
    rim vertices are complete.
    """
    origin = int(origin)
    radius = float(radius)
    pad = float(pad)
    if radius <= 0:
        raise ValueError("chart radius must be positive")
    if pad < 0:
        raise ValueError("chart pad must be nonnegative")
    if not (0 <= origin < mesh.n_vertices):
        raise ValueError("chart origin out of range")
    dist = wavefront_distance(mesh, [origin], max_dist=radius + pad)
    inside = np.flatnonzero(dist <= radius + pad)
    bases = mesh.vertex_tangent_bases()
    basis = bases[origin]
    rel = mesh.points[inside] - mesh.points[origin]
    plane = rel @ basis                        # (k, 2) tangent projections
    plen = np.linalg.norm(plane, axis=1)
    ok = (inside == origin) | (plen > 1e-12 * max(radius, 1.0))
    inside, plane, plen = inside[ok], plane[ok], plen[ok]
    d = dist[inside]
    with np.errstate(invalid="ignore", divide="ignore"):
        unit = plane / plen[:, None]
    unit[plen <= 0] = 0.0
    coords = (d / radius)[:, None] * unit
    order = np.argsort(d, kind="stable")
    inside, coords, d = inside[order], coords[order], d[order]
    return NormalChart(origin=origin, radius=radius, basis=basis,
                       vertices=inside, coords=coords, dist=d)


def build_local_f(mesh, chart, scale=None):
    """Model field x1 + |x|^2 / 2 in normal coordinates, zero off the chart.

    scale sets the length unit of the coordinates the model is written in
    (default: the chart radius).  The field's value at the origin, its unit
    gradient there and its identity Hessian there do not depend on scale;
    what changes is how fast the quadratic part takes over away from the
    origin.
    """
    if scale is None:
        scale = chart.radius
    scale = float(scale)
    if scale <= 0:
        raise ValueError("model scale must be positive")
    out = np.zeros(mesh.n_vertices)
    x = chart.coords * (chart.radius / scale)
    out[chart.vertices] = x[:, 0] + 0.5 * np.einsum("ij,ij->i", x, x)
    return out


def chart_triangles(mesh, chart):
    """Indices of mesh triangles with all three corners in the chart."""
    mask = np.zeros(mesh.n_vertices, dtype=bool)
    mask[chart.vertices] = True
    return np.flatnonzero(mask[mesh.triangles].all(axis=1))


def chart_field_gradient(mesh, chart, values, scale=None):
    """Per-triangle gradients of a field over in-chart triangles, in chart
    units (multiplied by the length scale, default the chart radius), with
    the triangle index list."""
    if scale is None:
        scale = chart.radius
    tidx = chart_triangles(mesh, chart)
    g = triangle_gradients(mesh.points, mesh.triangles[tidx], np.asarray(values, float))
    return tidx, g * float(scale)


MIN_FIT_NEIGHBORS = 5


def hessian(mesh, values, subset=None, within=None, scale=1.0):
    """Per-vertex symmetric 2x2 Hessian by quadratic least squares.

    Fits f(v) + g.x + x^T H x / 2 over the two-ring of each vertex, with
    neighbor offsets projected to the vertex tangent plane and divided by
    scale.  Vertices with fewer than five usable neighbors (or a
    rank-deficient fit) are flagged unreliable and get a zero form.

    Parameters
    ----------
    subset : optional index array
        Vertices to fit (default all).
    within : optional bool mask
        Only neighbors inside the mask are used (chart-local fits).
    scale : float
        Length normalization of the fit coordinates.

    Returns
    -------
    hess : (n, 2, 2) array
    reliable : (n,) bool array
    """
    values = np.asarray(values, dtype=float)
    n = mesh.n_vertices
    bases = mesh.vertex_tangent_bases()
    hess = np.zeros((n, 2, 2))
    reliable = np.zeros(n, dtype=bool)
    targets = np.arange(n) if subset is None else np.atleast_1d(subset)
    inv_scale = 1.0 / float(scale)
    for v in targets:
        nb = mesh.two_ring(v)
        if within is not None:
            nb = nb[within[nb]]
        if len(nb) < MIN_FIT_NEIGHBORS:
            continue
        x = (mesh.points[nb] - mesh.points[v]) @ bases[v] * inv_scale
        z = values[nb] - values[v]
        if not (np.isfinite(x).all() and np.isfinite(z).all()):
            continue
        cols = np.column_stack([
            x[:, 0], x[:, 1],
            0.5 * x[:, 0] ** 2, x[:, 0] * x[:, 1], 0.5 * x[:, 1] ** 2])
        sol, _, rank, _ = np.linalg.lstsq(cols, z, rcond=None)
        if rank < 5:
            continue
        hess[v, 0, 0] = sol[2]
        hess[v, 0, 1] = hess[v, 1, 0] = sol[3]
        hess[v, 1, 1] = sol[4]
        reliable[v] = True
    return hess, reliable


def theta1_form(hess):
    """Admissibility form: H + (1/4 - tr H / 2) * identity, per vertex."""
    hess = np.asarray(hess, dtype=float)
    tr = hess[..., 0, 0] + hess[..., 1, 1]
    shift = 0.25 - 0.5 * tr
    out = hess.copy()
    out[..., 0, 0] += shift
    out[..., 1, 1] += shift
    return out


def theta1(mesh, mf):
    """Admissibility form of a multiplier field (n, 2, 2)."""
    if len(mf.hess_f) != mesh.n_vertices:
        raise ValueError("multiplier field does not match mesh")
    return theta1_form(mf.hess_f)


def symmetric_eigenvalues(forms):
    """Eigenvalue pairs (n, 2) of symmetric 2x2 forms, ascending."""
    forms = np.asarray(forms, dtype=float)
    mean = 0.5 * (forms[..., 0, 0] + forms[..., 1, 1])
    rad = np.sqrt((0.5 * (forms[..., 0, 0] - forms[..., 1, 1])) ** 2
                  + forms[..., 0, 1] ** 2)
    return np.stack([mean - rad, mean + rad], axis=-1)


def margin_values(hess, grad_norm):
    """The three certified quantities per vertex: smallest eigenvalue of the
    admissibility form, the Laplacian slack tr H / 2 - 3/4, and |grad f|."""
    lam_min = symmetric_eigenvalues(theta1_form(hess))[..., 0]
    lap_slack = 0.5 * (hess[..., 0, 0] + hess[..., 1, 1]) - 0.75
    return lam_min, lap_slack, np.asarray(grad_norm, dtype=float)


def admissible_region(mesh, mf, margins=DEFAULT_MARGINS):
    """Vertices where all three margin inequalities hold (bool mask).

    Unreliable-fit vertices are never admissible.
    """
    d1, d2, d3 = margins
    lam_min, lap_slack, gn = margin_values(mf.hess_f, mf.grad_norm)
    return (mf.reliable & (lam_min >= d1) & (lap_slack >= d2) & (gn >= d3))


def multiplier_from_field(mesh, values, margins=DEFAULT_MARGINS,
                          epsilon=None):
    """Wrap an arbitrary smooth vertex field as a MultiplierField.

    All derivative data comes from global physical fits (scale 1), so this is
    the right adapter for analytic test fields and for feeding the integral
    identities with a field that was not produced by the chart construction.
    """
    values = np.asarray(values, dtype=float)
    hess, reliable = hessian(mesh, values)
    grad = gradient(mesh, values)
    gn_vec = np.zeros((mesh.n_vertices, 3))
    w = mesh.triangle_areas / 3.0
    for k in range(3):
        np.add.at(gn_vec, mesh.triangles[:, k], w[:, None] * grad)
    gn = np.linalg.norm(gn_vec / mesh.vertex_areas[:, None], axis=1)
    lap = hess[:, 0, 0] + hess[:, 1, 1]
    mf = MultiplierField(
        f=values, grad_f=grad, grad_norm=gn, hess_f=hess, laplacian_f=lap,
        reliable=reliable, region_v=np.empty(0, dtype=np.int64),
        epsilon_budget=np.inf if epsilon is None else float(epsilon),
        margins=tuple(margins), certified=False)
    mask = admissible_region(mesh, mf, margins)
    mf.region_v = np.flatnonzero(mask)
    area_v = float(mesh.vertex_areas[mf.region_v].sum())
    mf.report = {"mode": "from_field", "area": mesh.area, "area_v": area_v,
                 "deficit": mesh.area - area_v}
    if epsilon is not None:
        mf.certified = area_v >= mesh.area - float(epsilon)
    return mf


# -- greedy chart cover ------------------------------------------------------

def _approx_diameter(mesh):
    d = geodesic_distance(mesh, [0])
    far = int(np.argmax(d))
    return float(geodesic_distance(mesh, [far]).max())


def _chart_payload(mesh, chart, scale=None):
    """Local model field plus certified quantities over the chart vertices."""
    if scale is None:
        scale = chart.radius
    f_local = build_local_f(mesh, chart, scale=scale)
    within = np.zeros(mesh.n_vertices, dtype=bool)
    within[chart.vertices] = True
    hess, reliable = hessian(mesh, f_local, subset=chart.vertices,
                             within=within, scale=scale)
    tidx, g = chart_field_gradient(mesh, chart, f_local, scale=scale)
    gn_vec = np.zeros((mesh.n_vertices, 3))
    gn_wt = np.zeros(mesh.n_vertices)
    w = mesh.triangle_areas[tidx] / 3.0
    tri = mesh.triangles[tidx]
    for k in range(3):
        np.add.at(gn_vec, tri[:, k], w[:, None] * g)
        np.add.at(gn_wt, tri[:, k], w)
    has_tri = gn_wt > 0
    gn = np.zeros(mesh.n_vertices)
    gn[has_tri] = np.linalg.norm(
        gn_vec[has_tri] / gn_wt[has_tri, None], axis=1)
    usable = reliable & has_tri
    lam_min, lap_slack, _ = margin_values(hess, gn)
    return {
        "f": f_local, "hess": hess, "grad_norm": gn, "usable": usable,
        "lam_min": lam_min, "lap_slack": lap_slack,
    }


def _admissible_mask(payload, margins):
    d1, d2, d3 = margins
    return (payload["usable"]
            & (payload["lam_min"] >= d1)
            & (payload["lap_slack"] >= d2)
            & (payload["grad_norm"] >= d3))


def build_global_multiplier(mesh, epsilon, margins=DEFAULT_MARGINS,
                            chart_radius=None, scale_ratio=0.15,
                            shrink=0.75, inner_fraction=0.97,
                            min_radius_edges=4.0):
    """Greedy certified cover glued into one multiplier field.

    Each origin gets a chart (default radius 0.3 x mesh diameter, shrunk
    geometrically until the admissibility margins hold on essentially all of
    the inner half) and claims every admissible not-yet-claimed vertex
    within its radius.  The first origin is the largest-area vertex; each
    later origin is the unclaimed vertex farthest from everything claimed so
    far, which spreads the regions instead of letting them crowd.  The local
    model is written at length scale scale_ratio x radius: the scale does
    not move the origin anchors (unit gradient, identity Hessian) but a
    short scale suppresses the anisotropy the linear term picks up from
    curvature, which is what lets a single chart certify a large region.
    Charts carry a stencil pad past the nominal radius so rim fits stay
    complete.

    Claimed sets are then eroded so distinct regions stay at least two edge
    hops apart, and the local fields are glued with collar cut-offs sized to
    vanish on every other region.  The certified region is the union of the
    eroded claims; certification requires its area to reach
    area(M) - epsilon and every margin to hold on it.  An empty certified
    region certifies vacuously and is flagged degenerate in the report.

    The returned field never pretends: if the area budget cannot be met the
    field still comes back, with certified False and the deficit reported.
    """
    epsilon = float(epsilon)
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    margins = tuple(float(m) for m in margins)
    if len(margins) != 3 or any(m < 0 for m in margins):
        raise ValueError("margins must be three nonnegative numbers")
    scale_ratio = float(scale_ratio)
    if not (0 < scale_ratio <= 1):
        raise ValueError("scale_ratio must lie in (0, 1]")
    diameter = _approx_diameter(mesh)
    rho0 = float(chart_radius) if chart_radius else 0.3 * diameter
    rho_floor = min_radius_edges * mesh.mean_edge_length
    pad = 6.0 * mesh.mean_edge_length
    unclaimed = np.ones(mesh.n_vertices, dtype=bool)
    hopeless = np.zeros(mesh.n_vertices, dtype=bool)
    regions = []   # dicts: origin, radius, chart, payload, claim (index array)
    while True:
        candidates = unclaimed & ~hopeless
        if not candidates.any():
            break
        if not regions:
            areas = np.where(candidates, mesh.vertex_areas, -1.0)
            v = int(np.argmax(areas))
        else:
            claimed_now = np.flatnonzero(~unclaimed)
            away = geodesic_distance(mesh, claimed_now)
            away[~candidates] = -1.0
            v = int(np.argmax(away))
        rho = rho0
        chart = payload = admissible = None
        while True:
            chart = build_chart(mesh, v, rho, pad=pad)
            payload = _chart_payload(mesh, chart, scale=scale_ratio * rho)
            admissible = _admissible_mask(payload, margins)
            inner = chart.vertices[chart.dist <= 0.5 * rho]
            if len(inner) == 0:
                break
            frac = float(admissible[inner].mean())
            if frac >= inner_fraction or rho <= rho_floor:
                break
            rho *= shrink
        in_disc = np.zeros(mesh.n_vertices, dtype=bool)
        in_disc[chart.vertices[chart.dist <= rho]] = True
        claim = np.flatnonzero(admissible & unclaimed & in_disc)
        if len(claim) == 0:
            hopeless[v] = True
            continue
        unclaimed[claim] = False
        regions.append({"origin": int(v), "radius": rho, "chart": chart,
                        "payload": payload, "claim": claim})

    neighbors = mesh.vertex_neighbors()
    # one-sided frontier erosion: later regions step back from earlier ones,
    # which leaves every pair of regions two or more edge hops apart
    for i in range(len(regions)):
        ri = regions[i]["claim"]
        fence = np.zeros(mesh.n_vertices, dtype=bool)
        for v in ri:
            fence[neighbors[v]] = True
        fence[ri] = False
        for j in range(i + 1, len(regions)):
            rj = regions[j]["claim"]
            regions[j]["claim"] = rj[~fence[rj]]
    regions = [r for r in regions if len(r["claim"])]

    n = mesh.n_vertices
    f_glued = np.zeros(n)
    hess = np.zeros((n, 2, 2))
    lap = np.zeros(n)
    gn = np.zeros(n)
    reliable = np.zeros(n, dtype=bool)
    owner = np.full(n, -1, dtype=np.int64)
    chart_rows = []
    if regions:
        dists = [geodesic_distance(mesh, r["claim"]) for r in regions]
        gap = np.inf
        for i, di in enumerate(dists):
            for j, r in enumerate(regions):
                if j != i:
                    gap = min(gap, float(di[r["claim"]].min()))
        if not np.isfinite(gap):
            gap = 6.0 * mesh.mean_edge_length
        delta = 0.95 * gap
        for r, di in zip(regions, dists):
            eta = profile_eta(di, delta)
            f_glued += r["payload"]["f"] * eta
            claim = r["claim"]
            owner[claim] = r["origin"]
            hess[claim] = r["payload"]["hess"][claim]
            gn[claim] = r["payload"]["grad_norm"][claim]
            reliable[claim] = True
            lam_mins = r["payload"]["lam_min"][claim]
            chart_rows.append({
                "origin": r["origin"], "radius": r["radius"],
                "chart_vertices": len(r["chart"].vertices),
                "region_vertices": len(claim),
                "region_area": float(mesh.vertex_areas[claim].sum()),
                "min_theta1": float(lam_mins.min()),
                "min_lap_slack": float(r["payload"]["lap_slack"][claim].min()),
                "min_grad_norm": float(r["payload"]["grad_norm"][claim].min()),
            })
        lap = hess[:, 0, 0] + hess[:, 1, 1]

    region_v = np.flatnonzero(owner >= 0)
    outside = np.flatnonzero(owner < 0)
    if len(outside) and regions:
        hg, rg = hessian(mesh, f_glued, subset=outside)
        hess[outside] = hg[outside]
        lap[outside] = hg[outside, 0, 0] + hg[outside, 1, 1]
        reliable[outside] = rg[outside]
        gn_vec = np.zeros((n, 3))
        grads = gradient(mesh, f_glued)
        w = mesh.triangle_areas / 3.0
        for k in range(3):
            np.add.at(gn_vec, mesh.triangles[:, k], w[:, None] * grads)
        gn_all = np.linalg.norm(gn_vec / mesh.vertex_areas[:, None], axis=1)
        gn[outside] = gn_all[outside]

    area_v = float(mesh.vertex_areas[region_v].sum())
    if len(region_v):
        lam_min, lap_slack, gnv = margin_values(hess[region_v], gn[region_v])
        margin_minima = (float(lam_min.min()), float(lap_slack.min()),
                         float(gnv.min()))
        margins_ok = (lam_min.min() >= margins[0]
                      and lap_slack.min() >= margins[1]
                      and gnv.min() >= margins[2])
    else:
        margin_minima = (np.nan, np.nan, np.nan)
        margins_ok = True   # vacuous
    certified = bool(area_v >= mesh.area - epsilon and margins_ok)
    report = {
        "mode": "greedy_cover",
        "area": mesh.area,
        "area_v": area_v,
        "deficit": mesh.area - area_v,
        "epsilon": epsilon,
        "margins": margins,
        "margin_minima": margin_minima,
        "n_regions": len(regions),
        "degenerate": len(region_v) == 0,
        "diameter": diameter,
        "chart_radius_default": rho0,
        "scale_ratio": scale_ratio,
        "charts": chart_rows,
        "uncoverable_vertices": int(hopeless.sum()),
    }
    return MultiplierField(
        f=f_glued, grad_f=gradient(mesh, f_glued), grad_norm=gn,
        hess_f=hess, laplacian_f=lap, reliable=reliable,
        region_v=region_v, epsilon_budget=epsilon, margins=margins,
        certified=certified, report=report)
