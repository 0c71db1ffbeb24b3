"""Shared helpers: brute-force oracles and small geometry builders."""

import math

import numpy as np

from tetforge.predicates import insphere


def tet_circumdata(mesh):
    """Vectorized circumcenters and radii of all live tets."""
    live = mesh.live_tets()
    pts = mesh.points_array()
    tets = np.array([mesh.tets[t] for t in live], dtype=int)
    a = pts[tets[:, 0]]
    u = pts[tets[:, 1]] - a
    v = pts[tets[:, 2]] - a
    w = pts[tets[:, 3]] - a
    vw = np.cross(v, w)
    wu = np.cross(w, u)
    uv = np.cross(u, v)
    det = np.einsum("ij,ij->i", u, vw)
    uu = np.einsum("ij,ij->i", u, u)
    vv = np.einsum("ij,ij->i", v, v)
    ww = np.einsum("ij,ij->i", w, w)
    off = (uu[:, None] * vw + vv[:, None] * wu + ww[:, None] * uv) / (2.0 * det)[:, None]
    centers = a + off
    radii = np.linalg.norm(off, axis=1)
    return live, tets, centers, radii


def empty_circumsphere_violations(mesh):
    """Brute-force Delaunay oracle: for every live tet, no mesh vertex may
    lie strictly inside its circumsphere.  A fast vectorized distance
    prefilter selects near-sphere candidates, whose status is then settled
    by the exact insphere predicate.  Returns a list of (tet, vertex)."""
    live, tets, centers, radii = tet_circumdata(mesh)
    pts = mesh.points_array()
    used = np.zeros(len(pts), dtype=bool)
    for t in live:
        for v in mesh.tets[t]:
            used[v] = True
    vids = np.nonzero(used)[0]
    coords = pts[vids]
    bad = []
    for k, t in enumerate(live):
        d = np.linalg.norm(coords - centers[k], axis=1)
        cand = vids[d < radii[k] * (1.0 + 1e-7)]
        own = set(mesh.tets[t])
        tp = mesh.tet_points(t)
        for v in cand:
            if int(v) in own:
                continue
            if insphere(*tp, mesh.points[int(v)]) > 0:
                bad.append((t, int(v)))
    return bad


def box_surface(lo=(0.0, 0.0, 0.0), hi=(1.0, 1.0, 1.0), patch_base=1):
    """8 corners and 12 facet triangles of an axis-aligned box; one patch
    per box face, numbered patch_base .. patch_base+5."""
    x0, y0, z0 = lo
    x1, y1, z1 = hi
    pts = [
        (x0, y0, z0), (x1, y0, z0), (x1, y1, z0), (x0, y1, z0),
        (x0, y0, z1), (x1, y0, z1), (x1, y1, z1), (x0, y1, z1),
    ]
    quads = [
        ((0, 3, 2, 1), 0),  # z = z0
        ((4, 5, 6, 7), 1),  # z = z1
        ((0, 1, 5, 4), 2),  # y = y0
        ((2, 3, 7, 6), 3),  # y = y1
        ((0, 4, 7, 3), 4),  # x = x0
        ((1, 2, 6, 5), 5),  # x = x1
    ]
    tris = []
    patches = []
    for (a, b, c, d), f in quads:
        tris.append((a, b, c))
        tris.append((a, c, d))
        patches.append(patch_base + f)
        patches.append(patch_base + f)
    return pts, tris, patches


def rotated_lattice_points(n, seed=0, angle=0.15):
    """n^3 cubic lattice under a rigid rotation; the rotation introduces
    the rounding errors that make lattice Delaunay meshes sprout slivers."""
    rng = np.random.default_rng(seed)
    ax = rng.normal(size=3)
    ax /= np.linalg.norm(ax)
    c, s = math.cos(angle), math.sin(angle)
    K = np.array(
        [[0, -ax[2], ax[1]], [ax[2], 0, -ax[0]], [-ax[1], ax[0], 0]]
    )
    R = np.eye(3) * c + s * K + (1 - c) * np.outer(ax, ax)
    grid = np.array(
        [[i, j, k] for i in range(n) for j in range(n) for k in range(n)],
        dtype=float,
    )
    return (grid @ R.T).tolist()
