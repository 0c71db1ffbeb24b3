import math
import random

import pytest

from conftest import box_surface, empty_circumsphere_violations

from tetforge.delaunay import (
    CoplanarPointsError,
    DuplicateVertexError,
    OutsideDomainError,
    delaunay_from_points,
    flip,
    insert_point,
    tetrahedralize,
)
from tetforge.mesh import face_key, seg_key, validate
from tetforge.predicates import tet_volume


def rand_points(n, seed):
    rng = random.Random(seed)
    return [tuple(rng.uniform(0, 1) for _ in range(3)) for _ in range(n)]


class TestFromPoints:
    def test_four_points_single_tet(self):
        m = delaunay_from_points([(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)])
        assert m.n_live == 1
        assert validate(m).ok

    def test_cube_corners(self):
        pts, _, _ = box_surface()
        m = delaunay_from_points(pts)
        assert m.n_live in (5, 6)
        assert empty_circumsphere_violations(m) == []
        assert m.volume() == pytest.approx(1.0, rel=1e-12)

    def test_random_cloud_is_delaunay(self):
        m = delaunay_from_points(rand_points(100, seed=42))
        assert validate(m).ok
        assert empty_circumsphere_violations(m) == []

    def test_coplanar_raises(self):
        with pytest.raises(CoplanarPointsError):
            delaunay_from_points([(0, 0, 0), (1, 0, 0), (0, 1, 0), (1, 1, 0), (2, 3, 0)])

    def test_insertion_order_deterministic(self):
        pts = rand_points(60, seed=1)
        m1 = delaunay_from_points(pts)
        m2 = delaunay_from_points(pts)
        assert m1.tets == m2.tets


class TestInsertPoint:
    def test_centroid_into_single_tet(self):
        m = delaunay_from_points([(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)])
        new = insert_point(m, (0.25, 0.25, 0.25))
        assert len(new) == 4
        assert m.n_live == 4
        assert validate(m).ok

    def test_insert_keeps_delaunay(self):
        m = delaunay_from_points(rand_points(100, seed=7))
        insert_point(m, (0.5, 0.5, 0.5))
        assert empty_circumsphere_violations(m) == []
        assert validate(m).ok

    def test_duplicate_raises(self):
        pts = rand_points(30, seed=9)
        m = delaunay_from_points(pts)
        with pytest.raises(DuplicateVertexError):
            insert_point(m, pts[10])

    def test_outside_raises(self):
        m = delaunay_from_points(rand_points(30, seed=11))
        with pytest.raises(OutsideDomainError):
            insert_point(m, (50.0, 50.0, 50.0))

    def test_segment_split_with_constraint(self):
        pts, tris, patches = box_surface()
        m = tetrahedralize(pts, tris, patches)
        # protected segments were derived from patch boundaries: box edges
        key = seg_key(0, 1)
        assert key in m.segments
        curve = m.segments[key]
        incident_before = [fk for fk in m.facets if 0 in fk and 1 in fk]
        a = m.points[0]
        b = m.points[1]
        mid = tuple((a[i] + b[i]) / 2 for i in range(3))
        events = []
        insert_point(m, mid, constraint=("segment", key), events=events)
        pid = len(m.points) - 1
        assert key not in m.segments
        assert m.segments[seg_key(0, pid)] == curve
        assert m.segments[seg_key(pid, 1)] == curve
        # each incident facet was split in two, children inherit the patch
        for fk in incident_before:
            assert fk not in m.facets
        assert validate(m).ok
        assert m.mobility[pid].kind == "edge"

    def test_facet_split_with_constraint(self):
        pts, tris, patches = box_surface()
        m = tetrahedralize(pts, tris, patches)
        fk = next(iter(m.facets))
        patch = m.facets[fk]
        pa, pb, pc = (m.points[v] for v in fk)
        cen = tuple((pa[i] + pb[i] + pc[i]) / 3 for i in range(3))
        insert_point(m, cen, constraint=("facet", fk))
        pid = len(m.points) - 1
        assert fk not in m.facets
        children = [k for k in m.facets if pid in k]
        assert len(children) == 3
        assert all(m.facets[k] == patch for k in children)
        assert validate(m).ok
        assert m.mobility[pid].kind == "face"


class TestFlip:
    def convex_bipyramid(self):
        from tetforge.mesh import TetMesh

        m = TetMesh()
        for p in [(0, 0, 0), (1, 0, 0), (0.5, 1, 0), (0.5, 0.4, 0.8), (0.5, 0.4, -0.8)]:
            m.add_point(p)
        m.add_tet((0, 1, 2, 3), reorient=True)
        m.add_tet((0, 1, 2, 4), reorient=True)
        m.build_adjacency()
        return m

    def test_flip_2_3(self):
        m = self.convex_bipyramid()
        vol = m.volume()
        assert flip(m, (0, 1, 2)) == "flipped-2-3"
        assert m.n_live == 3
        assert validate(m).ok
        assert m.volume() == pytest.approx(vol, rel=1e-12)

    def test_flip_3_2_reverses(self):
        m = self.convex_bipyramid()
        flip(m, (0, 1, 2))
        vol = m.volume()
        assert flip(m, (3, 4)) == "flipped-3-2"
        assert m.n_live == 2
        assert validate(m).ok
        assert m.volume() == pytest.approx(vol, rel=1e-12)

    def test_nonconvex_blocked(self):
        from tetforge.mesh import TetMesh

        m = TetMesh()
        # the apex-apex segment misses the shared face: union is non-convex
        for p in [(0, 0, 0), (1, 0, 0), (0, 1, 0), (0.9, 0.9, 0.5), (0.9, 0.9, -0.5)]:
            m.add_point(p)
        m.add_tet((0, 1, 2, 3), reorient=True)
        m.add_tet((0, 1, 2, 4), reorient=True)
        m.build_adjacency()
        before = list(m.tets)
        assert flip(m, (0, 1, 2)) == "blocked"
        assert m.tets == before

    def test_protected_face_blocked(self):
        m = self.convex_bipyramid()
        m.facets[face_key(0, 1, 2)] = 1
        assert flip(m, (0, 1, 2)) == "blocked"

    def test_boundary_face_blocked(self):
        m = self.convex_bipyramid()
        assert flip(m, (0, 1, 3)) == "blocked"


class TestTetrahedralize:
    def test_unit_box(self):
        pts, tris, patches = box_surface()
        m = tetrahedralize(pts, tris, patches)
        rep = validate(m)
        assert rep.ok, rep.violations
        assert m.volume() == pytest.approx(1.0, rel=1e-12)
        # all 12 input facets exist (possibly split during recovery)
        assert len(m.facets) >= 12
        assert m.mobility_assigned

    def test_boundary_conformity_after_inserts(self):
        pts, tris, patches = box_surface()
        m = tetrahedralize(pts, tris, patches)
        rng = random.Random(3)
        for _ in range(25):
            p = tuple(rng.uniform(0.1, 0.9) for _ in range(3))
            try:
                insert_point(m, p)
            except DuplicateVertexError:
                pass
        rep = validate(m)
        assert rep.ok, rep.violations

    def test_box_with_interior_slab(self):
        # two materials separated by protected interface facets
        pts1, tris1, patches1 = box_surface()
        pts2, tris2, patches2 = box_surface(
            (0.25, 0.25, 0.4), (0.75, 0.75, 0.6), patch_base=7
        )
        pts = pts1 + pts2
        tris = tris1 + [tuple(v + 8 for v in t) for t in tris2]
        patches = patches1 + patches2
        m = tetrahedralize(
            pts, tris, patches,
            region_seeds=[((0.1, 0.1, 0.1), 1), ((0.5, 0.5, 0.5), 2)],
        )
        rep = validate(m)
        assert rep.ok, rep.violations
        assert m.volume() == pytest.approx(1.0, rel=1e-12)
        vol2 = sum(
            tet_volume(*m.tet_points(t))
            for t in m.live_tets()
            if m.tet_mat[t] == 2
        )
        assert vol2 == pytest.approx(0.5 * 0.5 * 0.2, rel=1e-12)
