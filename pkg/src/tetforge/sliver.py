"""Detection, classification, and removal of slivers.

A sliver is a flat or nearly flat tet with four "side" edges of near-zero
dihedral angle and two "diagonal" edges of near-pi dihedral angle; its
circumradius stays small, so the circumradius/shortest-edge quality measure
cannot see it.  Slivers coupled through a shared diagonal edge form chains
(inconsistent triangulations of a flat polygonal region); slivers with a
face or all vertices on the fixed boundary are blocked and need the
prismatic padding treatment before smoothing can act on them.
"""

import math
from dataclasses import dataclass, field

from .delaunay import (
    DelaunayError,
    _replace_tets,
    commit_insert,
    plan_edge_removal,
    plan_flip23,
    plan_flip32,
    plan_insert,
)
from .mesh import FREE, Mobility, TetMesh, face_key, seg_key
from .predicates import (
    DegenerateElementError,
    TET_EDGES,
    circumsphere,
    dihedral_angles,
    orient3d,
)

__all__ = [
    "SliverInfo",
    "SliverGraph",
    "CosphericalCluster",
    "PaddingResult",
    "LockedPaddingError",
    "detect_slivers",
    "detect_cospherical_clusters",
    "remove_slivers",
    "improve_topology",
    "pad_locked",
]


class LockedPaddingError(RuntimeError):
    pass


@dataclass
class SliverInfo:
    tet: int
    side_edges: tuple      # 4 vertex-id pairs with dihedral < theta_low
    diagonal_edges: tuple  # 2 vertex-id pairs with dihedral > theta_high
    min_dihedral_deg: float
    max_dihedral_deg: float
    cls: str = "isolated"  # "isolated" | "blocked" | "chain-member"


@dataclass
class SliverGraph:
    slivers: dict = field(default_factory=dict)   # tet id -> SliverInfo
    couplings: list = field(default_factory=list)  # (tet, tet, "weak"|"strong")
    theta_low: float = 10.0
    theta_high: float = 170.0

    def __len__(self):
        return len(self.slivers)

    def chains(self):
        """Connected components over strong couplings, as lists of tet ids."""
        adj = {}
        for a, b, kind in self.couplings:
            if kind == "strong":
                adj.setdefault(a, []).append(b)
                adj.setdefault(b, []).append(a)
        seen = set()
        out = []
        for t in sorted(self.slivers):
            if t in seen:
                continue
            comp = [t]
            seen.add(t)
            stack = [t]
            while stack:
                cur = stack.pop()
                for n in adj.get(cur, ()):
                    if n not in seen:
                        seen.add(n)
                        comp.append(n)
                        stack.append(n)
            out.append(sorted(comp))
        return out


@dataclass
class CosphericalCluster:
    tets: list
    center: tuple
    radius: float
    tol: float


def _sliver_pattern(mesh, t, theta_low, theta_high):
    try:
        angs = dihedral_angles(*mesh.tet_points(t))
    except DegenerateElementError:
        return None
    lo = math.radians(theta_low)
    hi = math.radians(theta_high)
    small = [i for i, a in enumerate(angs) if a < lo]
    large = [i for i, a in enumerate(angs) if a > hi]
    if len(small) != 4 or len(large) != 2:
        return None
    tet = mesh.tets[t]
    side = tuple(seg_key(tet[TET_EDGES[i][0]], tet[TET_EDGES[i][1]]) for i in small)
    diag = tuple(seg_key(tet[TET_EDGES[i][0]], tet[TET_EDGES[i][1]]) for i in large)
    return SliverInfo(
        tet=t,
        side_edges=side,
        diagonal_edges=diag,
        min_dihedral_deg=math.degrees(min(angs)),
        max_dihedral_deg=math.degrees(max(angs)),
    )


def _boundary_face_keys(mesh):
    keys = set(mesh.facets)
    for key, _, _ in mesh.boundary_faces():
        keys.add(key)
    return keys


def detect_slivers(mesh, theta_low=10.0, theta_high=170.0):
    """Find all tets matching the 4-side/2-diagonal angle pattern and label
    their couplings and classes."""
    graph = SliverGraph(theta_low=theta_low, theta_high=theta_high)
    for t in mesh.live_tets():
        info = _sliver_pattern(mesh, t, theta_low, theta_high)
        if info is not None:
            graph.slivers[info.tet] = info

    boundary = _boundary_face_keys(mesh)
    # couplings via shared edges
    by_edge = {}
    for t, info in graph.slivers.items():
        for e in info.side_edges + info.diagonal_edges:
            by_edge.setdefault(e, []).append(t)
    seen_pairs = set()
    for e, ts in sorted(by_edge.items()):
        if len(ts) < 2:
            continue
        for i in range(len(ts)):
            for j in range(i + 1, len(ts)):
                a, b = ts[i], ts[j]
                pair = (a, b) if a < b else (b, a)
                if pair in seen_pairs:
                    continue
                strong = (
                    e in graph.slivers[a].diagonal_edges
                    and e in graph.slivers[b].diagonal_edges
                )
                if strong:
                    seen_pairs.add(pair)
                    graph.couplings.append((pair[0], pair[1], "strong"))
                else:
                    seen_pairs.add(pair)
                    graph.couplings.append((pair[0], pair[1], "weak"))

    strong_members = set()
    for a, b, kind in graph.couplings:
        if kind == "strong":
            strong_members.add(a)
            strong_members.add(b)

    for t, info in graph.slivers.items():
        tet = mesh.tets[t]
        has_bface = any(
            face_key(*mesh.face_of(t, i)) in boundary for i in range(4)
        )
        all_fixed = mesh.mobility_assigned and all(
            mesh.mobility[v].kind != "free" for v in tet
        )
        if has_bface or all_fixed:
            info.cls = "blocked"
        elif t in strong_members:
            info.cls = "chain-member"
        else:
            info.cls = "isolated"
    return graph


def detect_cospherical_clusters(mesh, rel_tol=1e-9):
    """Maximal face-connected groups of tets with coinciding circumspheres
    (tetrahedralizations of flat-polygon or polyhedral Delaunay cells)."""
    spheres = {}
    for t in mesh.live_tets():
        try:
            spheres[t] = circumsphere(*mesh.tet_points(t))
        except DegenerateElementError:
            continue

    def same_sphere(t1, t2):
        s1, s2 = spheres[t1], spheres[t2]
        r = 0.5 * (s1.radius + s2.radius)
        return (
            math.dist(s1.center, s2.center) <= rel_tol * r
            and abs(s1.radius - s2.radius) <= rel_tol * r
        )

    seen = set()
    clusters = []
    for t0 in sorted(spheres):
        if t0 in seen:
            continue
        comp = [t0]
        seen.add(t0)
        stack = [t0]
        while stack:
            t = stack.pop()
            for n in mesh.neighbor[t]:
                if n == -1 or n in seen or n not in spheres:
                    continue
                if same_sphere(t, n):
                    seen.add(n)
                    comp.append(n)
                    stack.append(n)
        if len(comp) > 1:
            comp.sort()
            cx = sum(spheres[t].center[0] for t in comp) / len(comp)
            cy = sum(spheres[t].center[1] for t in comp) / len(comp)
            cz = sum(spheres[t].center[2] for t in comp) / len(comp)
            rr = sum(spheres[t].radius for t in comp) / len(comp)
            clusters.append(CosphericalCluster(comp, (cx, cy, cz), rr, rel_tol))
    return clusters


# ---------------------------------------------------------------------------
# removal


def _bad_count(mesh, tet_point_sets, theta_low):
    lo = math.radians(theta_low)
    n = 0
    for pts in tet_point_sets:
        try:
            if min(dihedral_angles(*pts)) < lo:
                n += 1
        except DegenerateElementError:
            n += 1
    return n


def _group_score(point_sets, theta_low):
    """(count of below-threshold tets, -worst min dihedral): smaller is
    better; used to accept only strictly improving local moves."""
    lo = math.radians(theta_low)
    n = 0
    worst = math.inf
    for pts in point_sets:
        try:
            d = min(dihedral_angles(*pts))
        except DegenerateElementError:
            d = 0.0
        worst = min(worst, d)
        if d < lo:
            n += 1
    return (n, -worst)


def _attempt_move(mesh, plan, theta_low):
    """Commit a planned local re-tessellation only when it strictly
    improves (count of below-threshold tets, worst angle) locally, so the
    global below-threshold count never increases."""
    if plan is None:
        return False
    owners, defs = plan
    pts = mesh.points
    before = _group_score([mesh.tet_points(x) for x in owners], theta_low)
    after = _group_score(
        [tuple(pts[v] for v in vids) for vids, _ in defs], theta_low
    )
    if after[0] < before[0] or (
        after[0] == before[0] and after[1] < before[1] - 1e-12
    ):
        _replace_tets(mesh, owners, defs)
        return True
    return False


def _try_flips(mesh, info, theta_low):
    """Try 2-3 flips on faces at a diagonal edge, then 3-2 flips on side
    edges, then removal of the diagonal/side edges via the best ring
    re-triangulation (the move that kills a planar-quad sliver)."""
    t = info.tet
    candidates = []
    # each face of a sliver touches exactly one diagonal edge; order the
    # face attempts so diagonal-adjacent faces go first
    for i in range(4):
        f = mesh.face_of(t, i)
        has_diag = any(e[0] in f and e[1] in f for e in info.diagonal_edges)
        candidates.append((0 if has_diag else 1, face_key(*f)))
    candidates.sort()
    for _, fkey in candidates:
        if _attempt_move(mesh, plan_flip23(mesh, fkey), theta_low):
            return True
    for ekey in info.side_edges:
        if _attempt_move(mesh, plan_flip32(mesh, ekey), theta_low):
            return True
    for ekey in info.diagonal_edges:
        if _attempt_move(mesh, plan_flip32(mesh, ekey), theta_low):
            return True
    pts = mesh.points

    def score(defs):
        return _group_score(
            [tuple(pts[v] for v in vids) for vids, _ in defs], theta_low
        )

    for ekey in info.diagonal_edges + info.side_edges:
        if _attempt_move(mesh, plan_edge_removal(mesh, ekey, score=score), theta_low):
            return True
    return False


def improve_topology(mesh, min_angle_deg=10.0, max_passes=8):
    """Quality flip sweep: for every tet with min dihedral below the bar,
    try 2-3 face flips and edge removals, committing only strictly
    improving moves.  Iterates until a fixpoint (or max_passes)."""
    lo = math.radians(min_angle_deg)
    pts = mesh.points

    def score(defs):
        return _group_score(
            [tuple(pts[v] for v in vids) for vids, _ in defs], min_angle_deg
        )

    for _pass in range(max_passes):
        bad = []
        for t in mesh.live_tets():
            d = mesh.min_dihedral(t)
            if d < lo:
                bad.append((d, t))
        if not bad:
            break
        bad.sort()
        changed = False
        for _, t in bad:
            if not mesh.alive[t]:
                continue
            improved = False
            for i in range(4):
                fkey = face_key(*mesh.face_of(t, i))
                if _attempt_move(mesh, plan_flip23(mesh, fkey), min_angle_deg):
                    improved = True
                    break
            if improved:
                changed = True
                continue
            tet = mesh.tets[t]
            try:
                angs = dihedral_angles(*mesh.tet_points(t))
            except DegenerateElementError:
                angs = None
            edges = list(TET_EDGES)
            if angs is not None:
                edges = [e for _, e in sorted(zip(angs, edges), reverse=True)]
            for (i, j) in edges:
                ekey = seg_key(tet[i], tet[j])
                if _attempt_move(
                    mesh, plan_edge_removal(mesh, ekey, score=score), min_angle_deg
                ):
                    improved = True
                    break
            if improved:
                changed = True
        if not changed:
            break
    return mesh


def _try_circumcenter(mesh, info, theta_low, index=None):
    t = info.tet
    try:
        sph = circumsphere(*mesh.tet_points(t))
    except DegenerateElementError:
        return False
    c = sph.center
    if index is not None and index.encroaches_any(c):
        return False
    try:
        plan = plan_insert(mesh, c, hint=t)
    except DelaunayError:
        return False
    before = _bad_count(
        mesh, [mesh.tet_points(x) for x in plan.cavity], theta_low
    )
    after = _bad_count(mesh, plan.new_tet_points(mesh), theta_low)
    if after >= before:
        return False
    commit_insert(mesh, plan)
    return True


def remove_slivers(mesh, graph, index=None):
    """Best-effort sliver elimination: 2-3 flips at diagonal edges, 3-2
    flips at side edges, then circumcenter insertion (skipped when the
    center leaves the domain or encroaches a boundary entity).  Returns
    (mesh, residual graph); the local count of below-threshold tets never
    increases."""
    for t in sorted(graph.slivers):
        if not mesh.alive[t]:
            continue
        info = _sliver_pattern(mesh, t, graph.theta_low, graph.theta_high)
        if info is None:
            continue
        info.cls = graph.slivers[t].cls
        if _try_flips(mesh, info, graph.theta_low):
            continue
        _try_circumcenter(mesh, info, graph.theta_low, index)
    residual = detect_slivers(mesh, graph.theta_low, graph.theta_high)
    return mesh, residual


# ---------------------------------------------------------------------------
# prismatic padding of locked slivers


@dataclass
class PaddingResult:
    mesh: TetMesh
    vertex_map: dict          # boundary vertex -> inward duplicate
    shifted_tets: dict        # old tet id -> new tet id
    prism_tets: list
    delta: float


def _vertex_normals(mesh, pad_faces, verts):
    pts = mesh.points
    acc = {v: [0.0, 0.0, 0.0] for v in verts}
    for fk in pad_faces:
        owners = mesh.tets_with_face(fk)
        if not owners:
            continue
        t = owners[0]
        i = mesh.face_slot(t, fk)
        a, b, c = mesh.face_of(t, i)  # oriented toward the owning tet
        u = [pts[b][k] - pts[a][k] for k in range(3)]
        w = [pts[c][k] - pts[a][k] for k in range(3)]
        n = [
            u[1] * w[2] - u[2] * w[1],
            u[2] * w[0] - u[0] * w[2],
            u[0] * w[1] - u[1] * w[0],
        ]
        ln = math.sqrt(sum(x * x for x in n))
        if ln == 0.0:
            continue
        n = [x / ln for x in n]  # inward: face_of orients toward the tet
        for v in fk:
            if v in acc:
                for k in range(3):
                    acc[v][k] += n[k]
    out = {}
    for v, n in acc.items():
        ln = math.sqrt(sum(x * x for x in n))
        if ln == 0.0:
            raise LockedPaddingError(f"no usable inward normal at vertex {v}")
        out[v] = tuple(x / ln for x in n)
    return out


def _local_min_edge(mesh, v):
    pts = mesh.points
    best = math.inf
    for t in mesh.incident_tets(v):
        tet = mesh.tets[t]
        for i in range(4):
            for j in range(i + 1, 4):
                best = min(best, math.dist(pts[tet[i]], pts[tet[j]]))
    return best


def _prism_tets(mesh, fkey, dup, mat):
    """Staircase tetrahedralization of the gap between a padded facet and
    its inward copy; collapsed corners (rim vertices) are handled by the
    same lifting order.  Lifting the largest-index duplicated corner first
    makes the lateral quad diagonals agree across neighboring prisms."""
    owners = mesh.tets_with_face(fkey)
    t = owners[0]
    i = mesh.face_slot(t, fkey)
    face = list(mesh.face_of(t, i))  # oriented toward the owner (inward)
    lifted = [v for v in face if v in dup]
    lifted.sort(reverse=True)
    out = []
    cur = list(face)
    for v in lifted:
        w = dup[v]
        out.append(((cur[0], cur[1], cur[2], w), mat))
        cur[cur.index(v)] = w
    return out


def pad_locked(mesh, chain, pad_fraction=0.05):
    """Insert a thin prismatic layer between the fixed boundary and the
    given blocked slivers (a chain of tet ids).

    Every boundary vertex of the chain is duplicated and offset inward
    along the averaged inward normal of its boundary-face star; the star
    facets are padded by prisms so the mesh stays conforming.  Original
    boundary vertices, facets, and segments are untouched; the duplicates
    are free.  The offset is halved (up to 10 times) if it would invert a
    neighboring tet.
    """
    boundary_keys = _boundary_face_keys(mesh)
    boundary_verts = set()
    for key in boundary_keys:
        boundary_verts.update(key)

    locked = set()
    for t in chain:
        if not mesh.alive[t]:
            raise LockedPaddingError(f"chain tet {t} is dead")
        for v in mesh.tets[t]:
            if v in boundary_verts:
                locked.add(v)
    if not locked:
        raise LockedPaddingError("chain has no boundary vertices to pad")

    # pad the full boundary star of every locked vertex so the duplicates
    # detach completely from the boundary
    pad_faces = sorted(
        key for key in boundary_keys if any(v in locked for v in key)
    )
    normals = _vertex_normals(mesh, pad_faces, locked)
    base_delta = {v: pad_fraction * _local_min_edge(mesh, v) for v in locked}

    pts = mesh.points
    moved_tets = sorted({t for v in locked for t in mesh.incident_tets(v)})
    scale = 1.0
    for _attempt in range(10):
        offset = {
            v: tuple(
                pts[v][k] + scale * base_delta[v] * normals[v][k] for k in range(3)
            )
            for v in locked
        }

        def pos(v):
            return offset.get(v, pts[v])

        ok = True
        # shifted copies of all tets touching a locked vertex
        for t in moved_tets:
            a, b, c, d = mesh.tets[t]
            if orient3d(pos(a), pos(b), pos(c), pos(d)) <= 0:
                ok = False
                break
        if ok:
            # prisms between each padded facet and its shifted copy
            for fk in pad_faces:
                owners = mesh.tets_with_face(fk)
                if not owners:
                    continue
                t = owners[0]
                i = mesh.face_slot(t, fk)
                face = mesh.face_of(t, i)
                lifted = sorted((v for v in face if v in locked), reverse=True)
                cur = [pts[v] for v in face]
                for v in lifted:
                    w = offset[v]
                    if orient3d(cur[0], cur[1], cur[2], w) <= 0:
                        ok = False
                        break
                    cur[face.index(v)] = w
                if not ok:
                    break
        if ok:
            break
        scale *= 0.5
    else:
        raise LockedPaddingError("padding offset kept inverting tets")

    # commit: duplicate vertices, shift incident tets, add prisms
    dup = {}
    for v in sorted(locked):
        dup[v] = mesh.add_point(offset[v], mobility=FREE)

    shifted = {}
    new_defs = []
    for t in moved_tets:
        vids = tuple(dup.get(v, v) for v in mesh.tets[t])
        new_defs.append((vids, mesh.tet_mat[t]))
    prism_defs = []
    for fk in pad_faces:
        owners = mesh.tets_with_face(fk)
        if not owners:
            continue
        mat = mesh.tet_mat[owners[0]]
        prism_defs.extend(_prism_tets(mesh, fk, dup, mat))

    for t in moved_tets:
        mesh.kill_tet(t)
    base = len(mesh.tets)
    for vids, mat in new_defs + prism_defs:
        mesh.add_tet(vids, material=mat)
    mesh.build_adjacency()

    for k, t in enumerate(moved_tets):
        shifted[t] = base + k
    prisms = list(range(base + len(new_defs), len(mesh.tets)))
    delta = scale * max(base_delta.values())
    return PaddingResult(mesh, dup, shifted, prisms, delta)
