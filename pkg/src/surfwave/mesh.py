"""Triangulated closed surfaces and their discrete tangential calculus.

Provides the mesh container used everywhere else in the package, generators
for the standard test surfaces (icosphere, torus, flat pillow), an ASCII mesh
format, the lumped-mass / cotangent-stiffness operator pair, per-triangle
gradients with their mass-adjoint divergence, and two notions of distance
along the surface (edge-graph shortest path, and a wavefront sweep that
unfolds triangle pairs and is much closer to the true geodesic distance).

Conventions
-----------
Vertices are rows of an (n, 3) float array, triangles rows of an (m, 3) int
array, oriented counterclockwise when seen from outside.  Scalar fields are
plain (n,) arrays sampled at vertices; tangent fields are (m, 3) arrays, one
tangent vector per triangle.  All meshes are closed (every edge shared by
exactly two triangles) and consistently oriented; constructors enforce this.
"""

import heapq

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import dijkstra


class MeshError(ValueError):
    """Raised for meshes that violate the closed-surface contract."""


def triangle_gradients(points, triangles, values):
    """Gradient of the piecewise-linear interpolant, one vector per triangle.

    For a linear field on a flat triangle this is the exact in-plane
    projection of the ambient gradient.  Standalone so it can be used on raw
    arrays (sub-meshes, single triangles) without a SurfaceMesh.

    Parameters
    ----------
    points : array (n, 3)
    triangles : int array (m, 3)
    values : array (n,)

    Returns
    -------
    array (m, 3)
        Per-triangle tangent vectors.
    """
    p0 = points[triangles[:, 0]]
    p1 = points[triangles[:, 1]]
    p2 = points[triangles[:, 2]]
    cr = np.cross(p1 - p0, p2 - p0)
    nrm = np.linalg.norm(cr, axis=1)
    if np.any(nrm <= 0):
        raise MeshError("degenerate triangle (zero area) in gradient")
    unit_n = cr / nrm[:, None]
    two_a = nrm[:, None]
    # grad of hat function at vertex i is (n x e_i) / (2A), e_i the opposite
    # edge taken counterclockwise
    g0 = np.cross(unit_n, p2 - p1) / two_a
    g1 = np.cross(unit_n, p0 - p2) / two_a
    g2 = np.cross(unit_n, p1 - p0) / two_a
    v = values[triangles]
    return g0 * v[:, 0:1] + g1 * v[:, 1:2] + g2 * v[:, 2:3]


class SurfaceMesh:
    """Closed, consistently oriented triangle mesh embedded in 3-space.

    Derived quantities (areas, normals, adjacency, operators) are computed
    once and cached; the vertex and triangle arrays are frozen after
    construction and should never be mutated.

    Parameters
    ----------
    points : array_like (n, 3)
        Vertex positions.
    triangles : array_like (m, 3)
        Vertex indices, counterclockwise from outside.

    Raises
    ------
    MeshError
        If an edge is on fewer or more than two triangles (open or
        non-manifold surface), if the winding is inconsistent, or if a
        triangle has zero area.
    """

    def __init__(self, points, triangles):
        self.points = np.ascontiguousarray(points, dtype=float)
        self.triangles = np.ascontiguousarray(triangles, dtype=np.int64)
        if self.points.ndim != 2 or self.points.shape[1] != 3:
            raise MeshError("points must be an (n, 3) array")
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3:
            raise MeshError("triangles must be an (m, 3) array")
        n = len(self.points)
        if self.triangles.size and (self.triangles.min() < 0 or self.triangles.max() >= n):
            raise MeshError("triangle index out of range")
        self._check_topology()
        self._compute_metric()
        self.points.setflags(write=False)
        self.triangles.setflags(write=False)
        self._operators = None
        self._vertex_normals = None
        self._tangent_bases = None
        self._neighbors = None
        self._adjacency = None

    # -- construction checks -------------------------------------------------

    def _check_topology(self):
        tri = self.triangles
        if len(tri) == 0:
            raise MeshError("mesh has no triangles")
        # directed edges: each must appear exactly once for consistent winding
        directed = np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
        dir_keys = directed[:, 0] * len(self.points) + directed[:, 1]
        if len(np.unique(dir_keys)) != len(dir_keys):
            # either a doubled face or a flipped neighbor; tell them apart by
            # the undirected count first
            und = np.sort(directed, axis=1)
            und_keys = und[:, 0] * len(self.points) + und[:, 1]
            _, counts = np.unique(und_keys, return_counts=True)
            if np.any(counts > 2):
                raise MeshError("non-manifold edge (more than two incident triangles)")
            raise MeshError("orientation failure: inconsistent triangle winding")
        und = np.sort(directed, axis=1)
        und_keys = und[:, 0] * len(self.points) + und[:, 1]
        uniq, counts = np.unique(und_keys, return_counts=True)
        if np.any(counts > 2):
            raise MeshError("non-manifold edge (more than two incident triangles)")
        if np.any(counts < 2):
            raise MeshError("not a closed surface: boundary edge present")
        self._edge_keys = uniq
        self.n_edges = len(uniq)

    def _compute_metric(self):
        p = self.points
        tri = self.triangles
        cr = np.cross(p[tri[:, 1]] - p[tri[:, 0]], p[tri[:, 2]] - p[tri[:, 0]])
        nrm = np.linalg.norm(cr, axis=1)
        if np.any(nrm <= 1e-300):
            raise MeshError("degenerate triangle (zero area)")
        self.triangle_areas = 0.5 * nrm
        self.triangle_normals = cr / nrm[:, None]
        # barycentric lumping: a third of each incident triangle
        va = np.zeros(len(p))
        np.add.at(va, tri.ravel(), np.repeat(self.triangle_areas / 3.0, 3))
        self.vertex_areas = va
        self.area = float(self.triangle_areas.sum())
        e01 = np.linalg.norm(p[tri[:, 1]] - p[tri[:, 0]], axis=1)
        e12 = np.linalg.norm(p[tri[:, 2]] - p[tri[:, 1]], axis=1)
        e20 = np.linalg.norm(p[tri[:, 0]] - p[tri[:, 2]], axis=1)
        self._edge_lengths_by_tri = np.stack([e01, e12, e20], axis=1)
        self.max_edge_length = float(self._edge_lengths_by_tri.max())
        self.mean_edge_length = float(self._edge_lengths_by_tri.mean())

    # -- basic properties ----------------------------------------------------

    @property
    def n_vertices(self):
        return len(self.points)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @property
    def euler_characteristic(self):
        return self.n_vertices - self.n_edges + self.n_triangles

    def quality_report(self):
        """Triangle shape statistics; obtuse triangles are kept, not clamped."""
        p = self.points
        tri = self.triangles
        angles = np.empty((len(tri), 3))
        for k in range(3):
            a = p[tri[:, (k + 1) % 3]] - p[tri[:, k]]
            b = p[tri[:, (k + 2) % 3]] - p[tri[:, k]]
            cosang = np.einsum("ij,ij->i", a, b) / (
                np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
            angles[:, k] = np.arccos(np.clip(cosang, -1.0, 1.0))
        return {
            "n_vertices": self.n_vertices,
            "n_triangles": self.n_triangles,
            "n_edges": self.n_edges,
            "euler_characteristic": self.euler_characteristic,
            "area": self.area,
            "min_angle": float(angles.min()),
            "max_angle": float(angles.max()),
            "n_obtuse": int((angles.max(axis=1) > np.pi / 2 + 1e-12).sum()),
            "min_edge": float(self._edge_lengths_by_tri.min()),
            "max_edge": self.max_edge_length,
            "mean_edge": self.mean_edge_length,
        }

    # -- adjacency -----------------------------------------------------------

    def vertex_neighbors(self):
        """One-ring neighbor index arrays, one per vertex (cached)."""
        if self._neighbors is None:
            tri = self.triangles
            src = np.concatenate([tri[:, 0], tri[:, 1], tri[:, 2],
                                  tri[:, 1], tri[:, 2], tri[:, 0]])
            dst = np.concatenate([tri[:, 1], tri[:, 2], tri[:, 0],
                                  tri[:, 0], tri[:, 1], tri[:, 2]])
            order = np.argsort(src, kind="stable")
            src, dst = src[order], dst[order]
            starts = np.searchsorted(src, np.arange(self.n_vertices + 1))
            self._neighbors = [np.unique(dst[starts[i]:starts[i + 1]])
                               for i in range(self.n_vertices)]
        return self._neighbors

    def two_ring(self, v):
        """Vertices within two edges of v, not including v."""
        nbr = self.vertex_neighbors()
        out = set(nbr[v])
        for w in nbr[v]:
            out.update(nbr[w])
        out.discard(v)
        return np.fromiter(out, dtype=np.int64)

    def edge_graph(self):
        """Sparse symmetric matrix of edge lengths (cached)."""
        if self._adjacency is None:
            tri = self.triangles
            p = self.points
            i = np.concatenate([tri[:, 0], tri[:, 1], tri[:, 2]])
            j = np.concatenate([tri[:, 1], tri[:, 2], tri[:, 0]])
            w = np.linalg.norm(p[i] - p[j], axis=1)
            g = sparse.coo_matrix((w, (i, j)), shape=(self.n_vertices,) * 2)
            g = g.maximum(g.T).tocsr()
            self._adjacency = g
        return self._adjacency

    def vertex_triangles(self):
        """List of incident-triangle index arrays, one per vertex."""
        tri = self.triangles
        src = tri.ravel()
        tidx = np.repeat(np.arange(len(tri)), 3)
        order = np.argsort(src, kind="stable")
        src, tidx = src[order], tidx[order]
        starts = np.searchsorted(src, np.arange(self.n_vertices + 1))
        return [tidx[starts[i]:starts[i + 1]] for i in range(self.n_vertices)]

    # -- normals and tangent frames -----------------------------------------

    def vertex_normals(self):
        if self._vertex_normals is None:
            vn = np.zeros((self.n_vertices, 3))
            w = self.triangle_areas[:, None] * self.triangle_normals
            for k in range(3):
                np.add.at(vn, self.triangles[:, k], w)
            norms = np.linalg.norm(vn, axis=1)
            # crease vertices may cancel exactly; borrow the largest
            # incident triangle's normal there
            flat = np.flatnonzero(norms < 1e-12 * self.mean_edge_length ** 2)
            if len(flat):
                vt = self.vertex_triangles()
                for v in flat:
                    best = vt[v][np.argmax(self.triangle_areas[vt[v]])]
                    vn[v] = self.triangle_normals[best]
                    norms[v] = 1.0
            vn /= norms[:, None]
            self._vertex_normals = vn
        return self._vertex_normals

    def vertex_tangent_bases(self):
        """Deterministic orthonormal tangent pair (n, 3, 2) at each vertex."""
        if self._tangent_bases is None:
            nrm = self.vertex_normals()
            # seed with the global axis least aligned with the normal
            seed = np.zeros_like(nrm)
            pick = np.argmin(np.abs(nrm), axis=1)
            seed[np.arange(len(nrm)), pick] = 1.0
            t1 = seed - nrm * np.einsum("ij,ij->i", seed, nrm)[:, None]
            t1 /= np.linalg.norm(t1, axis=1)[:, None]
            t2 = np.cross(nrm, t1)
            self._tangent_bases = np.stack([t1, t2], axis=2)
        return self._tangent_bases

    # -- operators -----------------------------------------------------------

    def operators(self):
        """Cotangent stiffness and lumped mass, cached as (stiffness, mass)."""
        if self._operators is None:
            self._operators = assemble_operators(self)
        return self._operators

    # -- io ------------------------------------------------------------------

    def save(self, path):
        """Write the ASCII mesh format; loading the file reproduces the mesh
        bit-exactly."""
        with open(path, "w") as fh:
            fh.write("verts %d tris %d\n" % (self.n_vertices, self.n_triangles))
            for x, y, z in self.points:
                fh.write("v %.17g %.17g %.17g\n" % (x, y, z))
            for i, j, k in self.triangles:
                fh.write("t %d %d %d\n" % (i, j, k))

    @classmethod
    def load(cls, path):
        """Read the ASCII mesh format.

        Line 1: ``verts N tris M``; then N lines ``v x y z`` and M lines
        ``t i j k`` (0-based, counterclockwise).  ``#`` starts a comment.
        """
        points, tris = [], []
        header = None
        with open(path) as fh:
            for ln, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                parts = line.split()
                if header is None:
                    if len(parts) != 4 or parts[0] != "verts" or parts[2] != "tris":
                        raise MeshError("%s:%d: expected header 'verts N tris M'" % (path, ln))
                    try:
                        header = (int(parts[1]), int(parts[3]))
                    except ValueError:
                        raise MeshError("%s:%d: bad counts in header" % (path, ln)) from None
                elif parts[0] == "v":
                    if len(parts) != 4:
                        raise MeshError("%s:%d: vertex line needs 3 coordinates" % (path, ln))
                    try:
                        points.append([float(t) for t in parts[1:]])
                    except ValueError:
                        raise MeshError("%s:%d: bad vertex coordinate" % (path, ln)) from None
                elif parts[0] == "t":
                    if len(parts) != 4:
                        raise MeshError("%s:%d: triangle line needs 3 indices" % (path, ln))
                    try:
                        tris.append([int(t) for t in parts[1:]])
                    except ValueError:
                        raise MeshError("%s:%d: bad triangle index" % (path, ln)) from None
                else:
                    raise MeshError("%s:%d: unknown record '%s'" % (path, ln, parts[0]))
        if header is None:
            raise MeshError("%s: empty mesh file" % path)
        if header != (len(points), len(tris)):
            raise MeshError("%s: header promises %d/%d records, found %d/%d"
                            % (path, header[0], header[1], len(points), len(tris)))
        return cls(np.array(points), np.array(tris, dtype=np.int64))


# -- generators --------------------------------------------------------------

_ICO_T = (1.0 + np.sqrt(5.0)) / 2.0
_ICO_POINTS = np.array([
    [-1, _ICO_T, 0], [1, _ICO_T, 0], [-1, -_ICO_T, 0], [1, -_ICO_T, 0],
    [0, -1, _ICO_T], [0, 1, _ICO_T], [0, -1, -_ICO_T], [0, 1, -_ICO_T],
    [_ICO_T, 0, -1], [_ICO_T, 0, 1], [-_ICO_T, 0, -1], [-_ICO_T, 0, 1],
], dtype=float)
_ICO_FACES = np.array([
    [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
    [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
    [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
    [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
], dtype=np.int64)


def build_icosphere(subdivision_level):
    """Unit sphere from recursive icosahedron subdivision.

    Level 0 is the icosahedron (12 vertices, 20 triangles); each level
    quadruples the triangle count and reprojects midpoints to the sphere.
    Levels above 8 are refused (multi-million-triangle meshes).
    """
    level = int(subdivision_level)
    if level < 0:
        raise ValueError("subdivision level must be nonnegative")
    if level > 8:
        raise ValueError("subdivision level capped at 8; %d requested" % level)
    points = _ICO_POINTS / np.linalg.norm(_ICO_POINTS, axis=1)[:, None]
    points = list(points)
    faces = _ICO_FACES
    for _ in range(level):
        cache = {}

        def midpoint(i, j):
            key = (i, j) if i < j else (j, i)
            idx = cache.get(key)
            if idx is None:
                mid = points[i] + points[j]
                points.append(mid / np.linalg.norm(mid))
                idx = len(points) - 1
                cache[key] = idx
            return idx

        new_faces = np.empty((4 * len(faces), 3), dtype=np.int64)
        for f, (a, b, c) in enumerate(faces):
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces[4 * f:4 * f + 4] = [
                [a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        faces = new_faces
    return SurfaceMesh(np.array(points), faces)


def build_torus(major_radius, minor_radius, major_count, minor_count):
    """Torus of revolution, regular parametric grid, outward orientation."""
    r_maj = float(major_radius)
    r_min = float(minor_radius)
    if r_min <= 0 or r_maj <= r_min:
        raise ValueError("need major_radius > minor_radius > 0")
    nu, nv = int(major_count), int(minor_count)
    if nu < 3 or nv < 3:
        raise ValueError("need at least 3 samples around each circle")
    u = 2 * np.pi * np.arange(nu) / nu
    v = 2 * np.pi * np.arange(nv) / nv
    uu, vv = np.meshgrid(u, v, indexing="ij")
    ring = r_maj + r_min * np.cos(vv)
    pts = np.stack([ring * np.cos(uu), ring * np.sin(uu),
                    r_min * np.sin(vv)], axis=2).reshape(-1, 3)

    def vid(i, j):
        return (i % nu) * nv + (j % nv)

    faces = []
    for i in range(nu):
        for j in range(nv):
            a, b = vid(i, j), vid(i + 1, j)
            c, d = vid(i + 1, j + 1), vid(i, j + 1)
            faces.append([a, b, c])
            faces.append([a, c, d])
    return SurfaceMesh(pts, np.array(faces, dtype=np.int64))


def build_flat_pillow(half_width, grid_count):
    """Closed zero-thickness pillow: two flat square sheets glued at the rim.

    Degenerate as an embedding but a perfectly valid closed mesh whose top
    sheet is an exactly flat patch; used to exercise flat-geometry paths
    (exact gradients, exact quadratic fits, planar distances).
    """
    n = int(grid_count)
    if n < 3:
        raise ValueError("grid_count must be at least 3")
    h = float(half_width)
    if h <= 0:
        raise ValueError("half_width must be positive")
    xs = np.linspace(-h, h, n + 1)
    top = {}
    points = []
    for i, x in enumerate(xs):
        for j, y in enumerate(xs):
            top[i, j] = len(points)
            points.append([x, y, 0.0])
    bot = {}
    for i, x in enumerate(xs):
        for j, y in enumerate(xs):
            if i in (0, n) or j in (0, n):
                bot[i, j] = top[i, j]  # rim is shared
            else:
                bot[i, j] = len(points)
                points.append([x, y, 0.0])

    def rim(i, j):
        return i in (0, n) or j in (0, n)

    faces = []
    for i in range(n):
        for j in range(n):
            # a rim-to-rim diagonal would coincide on both sheets; flip it
            flip = rim(i, j) and rim(i + 1, j + 1)
            for sheet, mirror in ((top, False), (bot, True)):
                a, b = sheet[i, j], sheet[i + 1, j]
                c, d = sheet[i + 1, j + 1], sheet[i, j + 1]
                if flip:
                    quads = ([a, b, d], [b, c, d])
                else:
                    quads = ([a, b, c], [a, c, d])
                for q in quads:
                    faces.append(q[::-1] if mirror else q)
    return SurfaceMesh(np.array(points), np.array(faces, dtype=np.int64))


def pillow_top_vertices(mesh):
    """Indices of the upper-sheet grid of a build_flat_pillow mesh (emitted
    first as a full (n+1) x (n+1) block by construction)."""
    side = len(np.unique(mesh.points[:, 0]))
    return np.arange(side * side)


# -- operators ---------------------------------------------------------------

def assemble_operators(mesh):
    """Cotangent-weight stiffness and barycentric lumped mass.

    Returns
    -------
    stiffness : csr_matrix (n, n)
        Symmetric positive semidefinite; annihilates constants.  The bilinear
        form ``u^T stiffness v`` equals the area-weighted sum over triangles
        of grad(u) . grad(v).
    mass : dia_matrix (n, n)
        Diagonal vertex areas (a third of each incident triangle).
    """
    p = mesh.points
    tri = mesh.triangles
    n = mesh.n_vertices
    rows, cols, vals = [], [], []
    for k in range(3):
        i = tri[:, (k + 1) % 3]
        j = tri[:, (k + 2) % 3]
        o = tri[:, k]
        a = p[i] - p[o]
        b = p[j] - p[o]
        # cot of the angle at the opposite vertex o
        cot = np.einsum("ij,ij->i", a, b) / np.linalg.norm(np.cross(a, b), axis=1)
        w = 0.5 * cot
        rows += [i, j, i, j]
        cols += [j, i, i, j]
        vals += [-w, -w, w, w]
    stiff = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n)).tocsr()
    mass = sparse.dia_matrix((mesh.vertex_areas, 0), shape=(n, n))
    return stiff, mass


def gradient(mesh, values):
    """Per-triangle tangent gradient of a vertex field."""
    values = np.asarray(values, dtype=float)
    if values.shape != (mesh.n_vertices,):
        raise ValueError("field length does not match vertex count")
    return triangle_gradients(mesh.points, mesh.triangles, values)


def divergence(mesh, field):
    """Mass-inverse adjoint of the gradient.

    Defined so that integrate(divergence(q) * phi) == -integrate_T(q . grad
    phi) holds exactly for every vertex field phi, which makes the discrete
    integration by parts an identity rather than an approximation.
    """
    field = np.asarray(field, dtype=float)
    if field.shape != (mesh.n_triangles, 3):
        raise ValueError("tangent field must be (n_triangles, 3)")
    p = mesh.points
    tri = mesh.triangles
    out = np.zeros(mesh.n_vertices)
    unit_n = mesh.triangle_normals
    for k in range(3):
        e_opp = p[tri[:, (k + 2) % 3]] - p[tri[:, (k + 1) % 3]]
        # A_t * grad(hat_k) = (n x e_opp) / 2
        contrib = 0.5 * np.einsum("ij,ij->i", field, np.cross(unit_n, e_opp))
        np.add.at(out, tri[:, k], -contrib)
    return out / mesh.vertex_areas


def integrate(mesh, values):
    """Lumped surface integral of a vertex field."""
    values = np.asarray(values, dtype=float)
    if values.shape != (mesh.n_vertices,):
        raise ValueError("field length does not match vertex count")
    return float(values @ mesh.vertex_areas)


def triangles_to_vertices(mesh, tri_values):
    """Area-weighted average of a per-triangle quantity onto vertices."""
    tri_values = np.asarray(tri_values, dtype=float)
    out = np.zeros(mesh.n_vertices)
    w = mesh.triangle_areas / 3.0
    for k in range(3):
        np.add.at(out, mesh.triangles[:, k], w * tri_values)
    return out / mesh.vertex_areas


def vertices_to_triangles(mesh, values):
    """Plain corner average of a vertex field onto triangles."""
    return np.asarray(values, dtype=float)[mesh.triangles].mean(axis=1)


def vertex_gradient(mesh, values):
    """Area-weighted average of the per-triangle gradient at vertices (n, 3)."""
    g = gradient(mesh, values)
    out = np.zeros((mesh.n_vertices, 3))
    w = mesh.triangle_areas / 3.0
    for k in range(3):
        np.add.at(out, mesh.triangles[:, k], w[:, None] * g)
    return out / mesh.vertex_areas[:, None]


# -- distances ---------------------------------------------------------------

def geodesic_distance(mesh, seeds):
    """Shortest-path distance along mesh edges from a seed set (graph metric).

    Overestimates the true geodesic distance by up to the lattice anisotropy
    of the triangulation, which is fine for collar construction; use
    wavefront_distance when metric accuracy matters.
    """
    seeds = np.atleast_1d(np.asarray(seeds, dtype=np.int64))
    if seeds.size == 0:
        raise ValueError("seed set must be nonempty")
    if seeds.min() < 0 or seeds.max() >= mesh.n_vertices:
        raise ValueError("seed index out of range")
    return dijkstra(mesh.edge_graph(), directed=False, indices=seeds,
                    min_only=True)


def wavefront_distance(mesh, seeds, max_dist=np.inf):
    """Eikonal distance by a heap sweep that unfolds triangles flat.

    Each accepted vertex relaxes the opposite corner of every incident
    triangle by placing a virtual source in the unfolded plane of the
    triangle (consistent with the two known corner distances) and measuring
    the straight segment, falling back to the edge update when that segment
    does not cross the shared edge.  Exact on flat regions reached by
    straight sight lines, and substantially more isotropic than the
    edge-graph metric everywhere else (errors well under a percent on the
    meshes used here, against up to ~15 percent for pure edges).  Vertices
    farther than max_dist keep distance inf.
    """
    seeds = np.atleast_1d(np.asarray(seeds, dtype=np.int64))
    if seeds.size == 0:
        raise ValueError("seed set must be nonempty")
    n = mesh.n_vertices
    p = mesh.points
    tri = mesh.triangles
    vtris = mesh.vertex_triangles()
    dist = np.full(n, np.inf)
    dist[seeds] = 0.0
    done = np.zeros(n, dtype=bool)
    heap = [(0.0, int(s)) for s in seeds]
    heapq.heapify(heap)
    while heap:
        dv, v = heapq.heappop(heap)
        if done[v] or dv > dist[v]:
            continue
        if dv > max_dist:
            break
        done[v] = True
        for t in vtris[v]:
            corners = tri[t]
            for c in corners:
                if done[c]:
                    continue
                others = corners[corners != c]
                if len(others) != 2:
                    continue  # degenerate index repetition
                a_idx, b_idx = int(others[0]), int(others[1])
                da, db = dist[a_idx], dist[b_idx]
                if not np.isfinite(da) and not np.isfinite(db):
                    continue
                trial = np.inf
                pb_c = p[c]
                la = np.linalg.norm(pb_c - p[a_idx])
                lb = np.linalg.norm(pb_c - p[b_idx])
                if np.isfinite(da):
                    trial = min(trial, da + la)
                if np.isfinite(db):
                    trial = min(trial, db + lb)
                if np.isfinite(da) and np.isfinite(db):
                    t2 = _planar_update(p[a_idx], p[b_idx], pb_c, da, db)
                    if t2 is not None:
                        trial = min(trial, t2)
                if trial < dist[c]:
                    dist[c] = trial
                    heapq.heappush(heap, (trial, int(c)))
    return dist


def _planar_update(pa, pb, pc, da, db):
    """Distance at pc from a virtual source unfolded across the edge pa-pb.

    The source is placed in the triangle plane, on the far side of the edge,
    at distances da and db from the two known corners; the update is the
    straight segment to pc, accepted only when it crosses the shared edge.
    """
    eab = pb - pa
    c = np.linalg.norm(eab)
    if c <= 0:
        return None
    xhat = eab / c
    rel = pc - pa
    xc = np.dot(rel, xhat)
    yc = np.linalg.norm(rel - xc * xhat)
    # virtual source (xs, -ys) consistent with the two known distances
    xs = (da * da - db * db + c * c) / (2 * c)
    ys2 = da * da - xs * xs
    if ys2 < 0 or yc <= 0:
        return None
    ys = np.sqrt(ys2)
    denom = ys + yc
    if denom <= 0:
        return None
    # the segment must enter through the open edge to be causal
    xcross = xs + (xc - xs) * ys / denom
    if xcross < -1e-12 * c or xcross > c * (1 + 1e-12):
        return None
    return np.hypot(xc - xs, yc + ys)
