"""Variational vertex smoothing with fixed and sliding boundary vertices.

The mesh is treated as a deformed elastic body: each tet carries a
volume-matched equilateral reference cell, and vertices move to minimize a
polyconvex stored-energy density (weighted shape + volume distortion of
the per-tet Jacobian).  Boundary vertices slide on the flat patches and
straight curves recovered by :func:`classify_boundary_vertices`.

Inverted or numerically degenerate elements are handled by a smooth
regularization of the Jacobian determinant in the energy denominators,
annealed toward the exact energy; accepted steps never invert an element
that the exact orientation predicate considers valid.
"""

import math
from dataclasses import dataclass

import numpy as np

from .mesh import FIXED, FREE, Mobility, seg_key
from .predicates import orient3d

__all__ = [
    "ElasticConfig",
    "elastic_potential",
    "mesh_energy",
    "grad_energy",
    "classify_boundary_vertices",
    "smooth",
]

# unit-edge equilateral reference simplex (volume sqrt(2)/12), edge matrix
# columns = edge vectors from vertex 0
_REF_EDGES = np.array(
    [
        [1.0, 0.5, 0.5],
        [0.0, math.sqrt(3.0) / 2.0, math.sqrt(3.0) / 6.0],
        [0.0, 0.0, math.sqrt(6.0) / 3.0],
    ]
)
_REF_EDGES_INV = np.linalg.inv(_REF_EDGES)
_REF_VOLUME = math.sqrt(2.0) / 12.0


@dataclass
class ElasticConfig:
    """Smoothing knobs.

    theta weighs volume distortion against shape distortion (0 = pure
    shape; with theta = 0 the reference cells are uniform, since no size
    distribution is being targeted).  delta_factor sets the untangling
    regularization relative to the mean element volume.  worst_fraction,
    when set, restricts sweeps to the 1-rings of the worst elements by
    minimum dihedral angle (anti-oversmoothing for adaptive refinement).
    """

    theta: float = 0.8
    max_iters: int = 30
    step_tol: float = 1e-10
    delta_factor: float = 1e-3
    worst_fraction: float | None = None
    max_line_search: int = 20

    def __post_init__(self):
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [0, 1]")


def elastic_potential(C, theta):
    """Polyconvex energy density of a 3x3 Jacobian: weighted sum of the
    scale-invariant shape term tr(C^T C)/3 / det^(2/3) and the volume term
    (1/det + det)/2.  Equals 1 exactly on rotations."""
    C = np.asarray(C, dtype=float)
    det = float(np.linalg.det(C))
    if det <= 0.0:
        return math.inf
    shape = (np.einsum("ij,ij->", C, C) / 3.0) / det ** (2.0 / 3.0)
    vol = 0.5 * (1.0 / det + det)
    return (1.0 - theta) * shape + theta * vol


# ---------------------------------------------------------------------------
# vectorized energy/gradient machinery


def _dets(M):
    return (
        M[:, 0, 0] * (M[:, 1, 1] * M[:, 2, 2] - M[:, 1, 2] * M[:, 2, 1])
        - M[:, 0, 1] * (M[:, 1, 0] * M[:, 2, 2] - M[:, 1, 2] * M[:, 2, 0])
        + M[:, 0, 2] * (M[:, 1, 0] * M[:, 2, 1] - M[:, 1, 1] * M[:, 2, 0])
    )


def _cofactors(M):
    K = np.empty_like(M)
    K[:, 0, 0] = M[:, 1, 1] * M[:, 2, 2] - M[:, 1, 2] * M[:, 2, 1]
    K[:, 0, 1] = M[:, 1, 2] * M[:, 2, 0] - M[:, 1, 0] * M[:, 2, 2]
    K[:, 0, 2] = M[:, 1, 0] * M[:, 2, 1] - M[:, 1, 1] * M[:, 2, 0]
    K[:, 1, 0] = M[:, 0, 2] * M[:, 2, 1] - M[:, 0, 1] * M[:, 2, 2]
    K[:, 1, 1] = M[:, 0, 0] * M[:, 2, 2] - M[:, 0, 2] * M[:, 2, 0]
    K[:, 1, 2] = M[:, 0, 1] * M[:, 2, 0] - M[:, 0, 0] * M[:, 2, 1]
    K[:, 2, 0] = M[:, 0, 1] * M[:, 1, 2] - M[:, 0, 2] * M[:, 1, 1]
    K[:, 2, 1] = M[:, 0, 2] * M[:, 1, 0] - M[:, 0, 0] * M[:, 1, 2]
    K[:, 2, 2] = M[:, 0, 0] * M[:, 1, 1] - M[:, 0, 1] * M[:, 1, 0]
    return K


def _chi(det, delta):
    """Smooth positive substitute for the determinant: (d + sqrt(d^2 +
    delta^2))/2, evaluated in the cancellation-free form for d < 0."""
    if delta == 0.0:
        return det, np.ones_like(det)
    r = np.sqrt(det * det + delta * delta)
    chi = np.where(det >= 0.0, 0.5 * (det + r), 0.5 * delta * delta / (r - det))
    dchi = 0.5 * (1.0 + det / r)
    return chi, dchi


class _ElasticProblem:
    """Frozen reference cells + energy/gradient evaluation for one
    smoothing run.

    Reference cells are equilateral simplices matched to the element's
    current volume (theta > 0), to a sizing-field target when one is
    given, or uniform (theta == 0, no size distribution to preserve).
    """

    def __init__(self, mesh, config, sizing=None, reference_points=None):
        self.mesh = mesh
        self.config = config
        self.tet_ids = mesh.live_tets()
        self.tets = np.array([mesh.tets[t] for t in self.tet_ids], dtype=np.int64)
        pts = (
            np.asarray(reference_points, dtype=float)
            if reference_points is not None
            else mesh.points_array()
        )
        E = self._edge_mats(pts, None)
        vols = _dets(E) / 6.0
        mean_vol = float(np.mean(np.abs(vols))) or 1.0
        if sizing is not None:
            sizes = np.array(
                [max(sizing.at_centroid(t), 1e-30) for t in self.tet_ids]
            )
            ref_vols = _REF_VOLUME * sizes ** 3
        elif config.theta == 0.0:
            ref_vols = np.full(len(vols), mean_vol)
        else:
            floor = 1e-3 * mean_vol
            ref_vols = np.maximum(np.abs(vols), floor)
        edges = (ref_vols / _REF_VOLUME) ** (1.0 / 3.0)
        self.ref_inv = _REF_EDGES_INV[None, :, :] / edges[:, None, None]
        self.ref_vol = ref_vols
        self.delta = 0.0  # exact energy unless an untangling phase sets it
        # the regularization applies to det(C) = volume / reference volume,
        # so it is scaled by the mean of that dimensionless ratio
        self.delta_scale = config.delta_factor * float(
            np.mean(np.abs(vols) / ref_vols)
        )

        # per-vertex caches for the 1-ring evaluations
        rows_of = {}
        for r in range(len(self.tets)):
            for v in self.tets[r]:
                rows_of.setdefault(int(v), []).append(r)
        self.rows_of = rows_of
        self._star = {}

    def star(self, v):
        s = self._star.get(v)
        if s is None:
            rows = np.array(self.rows_of.get(v, []), dtype=np.int64)
            tets = self.tets[rows]
            s = {
                "rows": rows,
                "tets": tets,
                "refinv": self.ref_inv[rows],
                "refvol": self.ref_vol[rows],
                # local position of v within each row
                "pos": np.argmax(tets == v, axis=1),
            }
            self._star[v] = s
        return s

    def _edge_mats(self, pts, rows):
        tets = self.tets if rows is None else rows
        P = pts[tets]
        return np.stack(
            (P[:, 1] - P[:, 0], P[:, 2] - P[:, 0], P[:, 3] - P[:, 0]), axis=2
        )

    def _terms(self, C, delta):
        det = _dets(C)
        if delta == 0.0 and np.any(det <= 0.0):
            return None, det
        chi, _ = _chi(det, delta)
        tr = np.einsum("kij,kij->k", C, C)
        th = self.config.theta
        W = (1.0 - th) * (tr / 3.0) / chi ** (2.0 / 3.0) + 0.5 * th * (
            1.0 / chi + det
        )
        return W, det

    def energy(self, pts, delta=None):
        d = self.delta if delta is None else delta
        C = self._edge_mats(pts, None) @ self.ref_inv
        W, _ = self._terms(C, d)
        if W is None:
            return math.inf
        return float(np.dot(W, self.ref_vol))

    def star_energy(self, pts, star, delta=None):
        d = self.delta if delta is None else delta
        C = self._edge_mats(pts, star["tets"]) @ star["refinv"]
        W, _ = self._terms(C, d)
        if W is None:
            return math.inf
        return float(np.dot(W, star["refvol"]))

    def star_gradient(self, pts, star, v, delta=None):
        d = self.delta if delta is None else delta
        C = self._edge_mats(pts, star["tets"]) @ star["refinv"]
        det = _dets(C)
        if d == 0.0 and np.any(det <= 0.0):
            # exact energy undefined; take the descent direction from a
            # mildly regularized energy instead
            d = self.delta_scale if self.delta_scale > 0 else 1e-12
        chi, dchi = _chi(det, d)
        K = _cofactors(C)
        tr = np.einsum("kij,kij->k", C, C)
        th = self.config.theta
        c23 = chi ** (2.0 / 3.0)
        coef_K = (
            -(1.0 - th) * (2.0 / 9.0) * tr / (c23 * chi) * dchi
            + 0.5 * th * (1.0 - dchi / (chi * chi))
        )
        dWdC = (1.0 - th) * (2.0 / 3.0) / c23[:, None, None] * C
        dWdC += coef_K[:, None, None] * K
        dWdE = np.einsum("k,kij,klj->kil", star["refvol"], dWdC, star["refinv"])
        pos = star["pos"]
        g = np.zeros(3)
        at0 = pos == 0
        if np.any(at0):
            g -= dWdE[at0].sum(axis=(0, 2))
        for j in (1, 2, 3):
            sel = pos == j
            if np.any(sel):
                g += dWdE[sel, :, j - 1].sum(axis=0)
        return g

    def vertex_gradient(self, pts, v, delta=None):
        if not self.rows_of.get(v):
            return np.zeros(3)
        return self.star_gradient(pts, self.star(v), v, delta)

    def star_min_float_det(self, pts, star):
        C = self._edge_mats(pts, star["tets"]) @ star["refinv"]
        return float(np.min(_dets(C)))

    def star_tiny_count(self, pts, star, thresh):
        C = self._edge_mats(pts, star["tets"]) @ star["refinv"]
        return int(np.count_nonzero(_dets(C) < thresh))

    def star_exact_valid(self, pts, star):
        """Exact orientation of all star tets at the given positions."""
        for row in star["tets"]:
            a, b, c, d = (pts[int(v)] for v in row)
            if orient3d(a, b, c, d) <= 0:
                return False
        return True

    def star_exact_inverted_count(self, pts, star):
        n = 0
        for row in star["tets"]:
            a, b, c, d = (pts[int(v)] for v in row)
            if orient3d(a, b, c, d) <= 0:
                n += 1
        return n


# ---------------------------------------------------------------------------
# public entry points


def mesh_energy(mesh, config, sizing=None, reference_points=None):
    """Total stored energy: sum over tets of W(C_k) * vol(reference cell).

    Reference cells are built from ``reference_points`` (default: the
    current vertex positions).  Returns +inf when any element is inverted
    (the exact energy is undefined there; smoothing handles that case
    through its regularized phases)."""
    prob = _ElasticProblem(mesh, config, sizing, reference_points)
    return prob.energy(mesh.points_array())


def grad_energy(mesh, v, config, sizing=None):
    """Analytic gradient of the stored energy with respect to vertex v,
    projected onto the vertex's mobility class (zero for fixed vertices,
    tangential for sliding ones)."""
    prob = _ElasticProblem(mesh, config, sizing)
    g = prob.vertex_gradient(mesh.points_array(), v)
    return _project(mesh, v, g)


def _project(mesh, v, g):
    mob = mesh.mobility[v]
    if mob.kind == "free":
        return g
    if mob.kind == "fixed":
        return np.zeros(3)
    if mob.kind == "face":
        n = np.asarray(mesh.patch_planes[mob.ref][1])
        return g - np.dot(g, n) * n
    d = np.asarray(mesh.curve_lines[mob.ref][1])
    return np.dot(g, d) * d


def _mobility_basis(mesh, v):
    mob = mesh.mobility[v]
    if mob.kind == "free":
        return np.eye(3)
    if mob.kind == "fixed":
        return None
    if mob.kind == "face":
        n = np.asarray(mesh.patch_planes[mob.ref][1])
        a = np.array([1.0, 0.0, 0.0])
        if abs(n[0]) > 0.9:
            a = np.array([0.0, 1.0, 0.0])
        t1 = np.cross(n, a)
        t1 /= np.linalg.norm(t1)
        t2 = np.cross(n, t1)
        return np.stack((t1, t2), axis=1)
    d = np.asarray(mesh.curve_lines[mob.ref][1])
    return np.asarray(d, dtype=float).reshape(3, 1)


# ---------------------------------------------------------------------------
# boundary aggregation


def classify_boundary_vertices(mesh, angle_tol=5.0):
    """Recover flat polygonal patches and straight curves from the
    boundary triangulation and assign vertex mobility classes.

    Boundary faces (protected facets plus bare hull faces) are aggregated
    into maximal patches of facets whose normals deviate less than
    angle_tol degrees; patch-boundary edges are chained into straight
    curves; curve endpoints and junctions become fixed.  Populates
    mesh.facets / mesh.segments / mesh.patch_planes / mesh.curve_lines
    and mesh.mobility.
    """
    cos_tol = math.cos(math.radians(angle_tol))
    pts = mesh.points_array()

    faces = dict(mesh.facets)
    for key, t, i in mesh.boundary_faces():
        if key not in faces:
            faces[key] = None
    face_list = sorted(faces)
    if not face_list:
        mesh.mobility_assigned = True
        return mesh

    # oriented normals: hull faces point outward; interior interface
    # facets get a deterministic orientation (from the lower-id tet side)
    normals = {}
    for key in face_list:
        owners = mesh.tets_with_face(key)
        if not owners:
            continue
        t = min(owners)
        i = mesh.face_slot(t, key)
        f = mesh.face_of(t, i)  # oriented toward the tet interior
        a, b, c = (pts[v] for v in f)
        n = np.cross(b - a, c - a)
        ln = np.linalg.norm(n)
        if ln == 0.0:
            continue
        normals[key] = -n / ln  # outward of tet t

    # edge -> faces adjacency
    edge_faces = {}
    for key in face_list:
        if key not in normals:
            continue
        a, b, c = key
        for e in ((a, b), (b, c), (a, c)):
            edge_faces.setdefault(seg_key(*e), []).append(key)

    # grow patches: BFS constrained by deviation from the patch seed normal
    patch_of = {}
    patch_id = 0
    patch_normal = {}
    for key in face_list:
        if key in patch_of or key not in normals:
            continue
        patch_id += 1
        ref_n = normals[key]
        acc = [normals[key]]
        patch_of[key] = patch_id
        stack = [key]
        while stack:
            cur = stack.pop()
            a, b, c = cur
            for e in ((a, b), (b, c), (a, c)):
                nbrs = edge_faces[seg_key(*e)]
                if len(nbrs) != 2:
                    continue  # rim or non-manifold junction bounds the patch
                for nb in nbrs:
                    if nb is cur or nb in patch_of or nb not in normals:
                        continue
                    if np.dot(normals[nb], ref_n) >= cos_tol:
                        patch_of[nb] = patch_id
                        acc.append(normals[nb])
                        stack.append(nb)
        patch_normal[patch_id] = np.mean(acc, axis=0)
        patch_normal[patch_id] /= np.linalg.norm(patch_normal[patch_id])

    # replace facet labels by the recovered patch ids
    mesh.facets = {key: patch_of[key] for key in face_list if key in patch_of}
    mesh.patch_planes = {}
    anchor = {}
    for key, pid in mesh.facets.items():
        if pid not in anchor:
            anchor[pid] = pts[key[0]]
    for pid, n in patch_normal.items():
        mesh.patch_planes[pid] = (tuple(anchor[pid]), tuple(n))

    # patch-boundary edges: shared by faces of different patches or by
    # anything other than exactly two faces
    boundary_edges = {}
    for e, nbrs in edge_faces.items():
        ps = {patch_of[f] for f in nbrs if f in patch_of}
        if len(nbrs) != 2 or len(ps) != 1:
            boundary_edges[e] = ps

    # chain boundary edges into straight curves
    vert_edges = {}
    for e in boundary_edges:
        vert_edges.setdefault(e[0], []).append(e)
        vert_edges.setdefault(e[1], []).append(e)

    def edge_dir(e):
        d = pts[e[1]] - pts[e[0]]
        return d / np.linalg.norm(d)

    curve_of = {}
    curve_id = 0
    for e0 in sorted(boundary_edges):
        if e0 in curve_of:
            continue
        curve_id += 1
        curve_of[e0] = curve_id
        ref_d = edge_dir(e0)
        for start in (e0[0], e0[1]):
            cur_v = start
            while True:
                cand = [e for e in vert_edges[cur_v] if e not in curve_of]
                if len(vert_edges[cur_v]) != 2 or not cand:
                    break
                nxt = cand[0]
                d = edge_dir(nxt)
                if abs(float(np.dot(d, ref_d))) < cos_tol:
                    break
                curve_of[nxt] = curve_id
                cur_v = nxt[1] if nxt[0] == cur_v else nxt[0]

    mesh.segments = dict(curve_of)
    mesh.curve_lines = {}
    for e, cid in curve_of.items():
        if cid not in mesh.curve_lines:
            mesh.curve_lines[cid] = (tuple(pts[e[0]]), tuple(edge_dir(e)))

    # vertex classification
    vertex_patches = {}
    for key, pid in mesh.facets.items():
        for v in key:
            vertex_patches.setdefault(v, set()).add(pid)
    vertex_curves = {}
    curve_degree = {}
    for e, cid in curve_of.items():
        for v in e:
            vertex_curves.setdefault(v, set()).add(cid)
            curve_degree[v] = curve_degree.get(v, 0) + 1

    for v in range(len(mesh.points)):
        if v not in vertex_patches:
            mesh.mobility[v] = FREE
            continue
        if v in vertex_curves:
            cs = vertex_curves[v]
            if len(cs) == 1 and curve_degree[v] == 2:
                mesh.mobility[v] = Mobility("edge", next(iter(cs)))
            else:
                mesh.mobility[v] = FIXED
        elif len(vertex_patches[v]) == 1:
            mesh.mobility[v] = Mobility("face", next(iter(vertex_patches[v])))
        else:
            mesh.mobility[v] = FIXED
    mesh.mobility_assigned = True
    return mesh


# ---------------------------------------------------------------------------
# the optimizer


def _worst_vertex_set(mesh, prob, fraction):
    scored = []
    for t in prob.tet_ids:
        scored.append((mesh.min_dihedral(t), t))
    scored.sort()
    n = max(1, int(math.ceil(fraction * len(scored))))
    verts = set()
    for _, t in scored[:n]:
        verts.update(mesh.tets[t])
    return verts


def smooth(mesh, config=None, sizing=None):
    """Gauss-Seidel vertex sweeps minimizing the stored energy.

    Every accepted step decreases the (possibly regularized) energy;
    boundary vertices move only within their patch plane / curve line; a
    step is rejected if it would invert an element that is currently
    valid under the exact orientation test.  A mesh that enters with
    exactly inverted elements is driven through annealed regularized
    phases first (untangling), during which the count of inverted
    elements never increases.
    """
    if config is None:
        config = ElasticConfig()
    prob = _ElasticProblem(mesh, config, sizing)
    pts = mesh.points_array()

    tangled = not prob.star_exact_valid(pts, {"tets": prob.tets})
    if tangled:
        base = prob.delta_scale if prob.delta_scale > 0 else 1.0
        phases = [base, base / 10.0, base / 100.0, 0.0]
    else:
        # exactly valid meshes run on the exact energy; stars containing
        # float-degenerate elements fall back to a local regularization
        # inside the vertex step
        phases = [0.0]

    movable = [
        v
        for v in range(len(mesh.points))
        if mesh.mobility[v].kind != "fixed" and prob.rows_of.get(v)
    ]
    if config.worst_fraction is not None:
        focus = _worst_vertex_set(mesh, prob, config.worst_fraction)
        movable = [v for v in movable if v in focus]

    scale = mesh.bbox_diag() or 1.0
    for phase_delta in phases:
        if phase_delta == 0.0:
            C = prob._edge_mats(pts, None) @ prob.ref_inv
            if bool(np.any(_dets(C) <= 0.0)):
                # the exact energy is still undefined somewhere; keep the
                # lightest regularization for the final phase
                phase_delta = (prob.delta_scale or 1.0) / 100.0
        prob.delta = phase_delta
        for _ in range(config.max_iters):
            max_move = 0.0
            for v in movable:
                moved = _optimize_vertex(mesh, prob, pts, v, config)
                max_move = max(max_move, moved)
            if max_move < config.step_tol * scale:
                break

    for v in movable:
        mesh.points[v] = (float(pts[v][0]), float(pts[v][1]), float(pts[v][2]))
    return mesh


def _optimize_vertex(mesh, prob, pts, v, config):
    B = _mobility_basis(mesh, v)
    if B is None:
        return 0.0
    star = prob.star(v)
    d_eval = prob.delta
    n_tiny0 = None
    if d_eval == 0.0 and prob.star_min_float_det(pts, star) <= 0.0:
        # exact star energy is +inf here; decide the step on a lightly
        # regularized energy, but never let the count of near-degenerate
        # elements grow (the capped energy must not invite flattening)
        d_eval = max(prob.delta_scale, 1e-12) / 100.0
        n_tiny0 = prob.star_tiny_count(pts, star, d_eval)
    g = prob.star_gradient(pts, star, v, delta=d_eval)
    gr = B.T @ g
    gnorm = float(np.linalg.norm(gr))
    if gnorm == 0.0 or not np.isfinite(gnorm):
        return 0.0
    ring_scale = float(np.mean(star["refvol"])) ** (1.0 / 3.0)

    # damped-Newton direction in the reduced coordinates; Hessian by
    # central differences of the analytic gradient
    k = B.shape[1]
    h = 1e-6 * max(ring_scale, 1e-30)
    H = np.empty((k, k))
    x0 = pts[v].copy()
    for j in range(k):
        pts[v] = x0 + h * B[:, j]
        gp = B.T @ prob.star_gradient(pts, star, v, delta=d_eval)
        pts[v] = x0 - h * B[:, j]
        gm = B.T @ prob.star_gradient(pts, star, v, delta=d_eval)
        H[:, j] = (gp - gm) / (2.0 * h)
    pts[v] = x0
    H = 0.5 * (H + H.T)
    lam = 0.0
    step = None
    for _ in range(8):
        try:
            cand = np.linalg.solve(H + lam * np.eye(k), -gr)
        except np.linalg.LinAlgError:
            cand = None
        if cand is not None and np.all(np.isfinite(cand)) and float(cand @ gr) < 0.0:
            step = cand
            break
        lam = max(2.0 * lam, float(np.abs(H).max()) * 1e-3 + 1e-30)
    if step is None:
        step = -gr * (ring_scale / gnorm)

    e0 = prob.star_energy(pts, star, delta=d_eval)
    valid0 = prob.star_exact_valid(pts, star)
    inv0 = None if valid0 else prob.star_exact_inverted_count(pts, star)
    t = 1.0
    delta = B @ step
    for _ in range(config.max_line_search):
        pts[v] = x0 + t * delta
        e1 = prob.star_energy(pts, star, delta=d_eval)
        if e1 < e0:
            if valid0:
                ok = prob.star_exact_valid(pts, star)
            else:
                ok = prob.star_exact_inverted_count(pts, star) <= inv0
            if ok and n_tiny0 is not None:
                ok = prob.star_tiny_count(pts, star, d_eval) <= n_tiny0
            if ok:
                return float(np.linalg.norm(t * delta))
        t *= 0.5
    pts[v] = x0
    return 0.0
