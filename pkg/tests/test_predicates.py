import math
import random
from fractions import Fraction

import pytest

from tetforge.predicates import (
    TET_EDGES,
    DegenerateElementError,
    GeometryError,
    circumcircle,
    circumsphere,
    dihedral_angles,
    incircle,
    insphere,
    orient2d,
    orient3d,
    tet_volume,
)

UNIT_TET = ((0.0, 0.0, 0.0), (1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))


def frac_orient3d(a, b, c, d):
    fa = [Fraction(x) for x in a]
    u = [Fraction(b[i]) - fa[i] for i in range(3)]
    v = [Fraction(c[i]) - fa[i] for i in range(3)]
    w = [Fraction(d[i]) - fa[i] for i in range(3)]
    det = (
        u[0] * (v[1] * w[2] - v[2] * w[1])
        - u[1] * (v[0] * w[2] - v[2] * w[0])
        + u[2] * (v[0] * w[1] - v[1] * w[0])
    )
    return (det > 0) - (det < 0)


def frac_insphere(a, b, c, d, p):
    fp = [Fraction(x) for x in p]
    rows = []
    for q in (a, b, c, d):
        dx = Fraction(q[0]) - fp[0]
        dy = Fraction(q[1]) - fp[1]
        dz = Fraction(q[2]) - fp[2]
        rows.append((dx, dy, dz, dx * dx + dy * dy + dz * dz))

    def det4(m):
        def det3(r):
            return (
                r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1])
                - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
                + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0])
            )
        total = Fraction(0)
        for j in range(4):
            sub = [[m[i][k] for k in range(4) if k != j] for i in range(1, 4)]
            term = m[0][j] * det3(sub)
            total += term if j % 2 == 0 else -term
        return total

    det = det4(rows)
    s = (det > 0) - (det < 0)
    return -frac_orient3d(a, b, c, d) * s


def rand_point(rng, scale=1.0):
    return tuple(rng.uniform(-scale, scale) for _ in range(3))


class TestOrient3d:
    def test_unit_determinant(self):
        assert orient3d(*UNIT_TET) == 1

    def test_coplanar(self):
        assert orient3d((0, 0, 0), (1, 0, 0), (0, 1, 0), (1, 1, 0)) == 0

    def test_mirrored(self):
        assert orient3d((0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, -1)) == -1

    def test_antisymmetry_under_odd_permutations(self):
        rng = random.Random(7)
        for _ in range(200):
            pts = [rand_point(rng) for _ in range(4)]
            base = orient3d(*pts)
            a, b, c, d = pts
            assert orient3d(b, a, c, d) == -base
            assert orient3d(a, c, b, d) == -base
            assert orient3d(a, b, d, c) == -base
            # even permutation: two swaps
            assert orient3d(b, a, d, c) == base

    def test_matches_rational_reference(self):
        rng = random.Random(11)
        for _ in range(300):
            pts = [rand_point(rng) for _ in range(4)]
            assert orient3d(*pts) == frac_orient3d(*pts)

    def test_near_degenerate_matches_rational_reference(self):
        rng = random.Random(13)
        for _ in range(300):
            a = rand_point(rng)
            b = rand_point(rng)
            c = rand_point(rng)
            s, t = rng.uniform(-1, 2), rng.uniform(-1, 2)
            d = tuple(a[i] + s * (b[i] - a[i]) + t * (c[i] - a[i]) for i in range(3))
            # d is coplanar up to float rounding; the exact sign of the
            # rounded coordinates is still well-defined
            assert orient3d(a, b, c, d) == frac_orient3d(a, b, c, d)

    def test_nonfinite_raises(self):
        with pytest.raises(GeometryError):
            orient3d((0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, math.nan))
        with pytest.raises(GeometryError):
            orient3d((math.inf, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1))


class TestInsphere:
    def test_centroid_inside(self):
        assert insphere(*UNIT_TET, (0.25, 0.25, 0.25)) == 1

    def test_far_outside(self):
        assert insphere(*UNIT_TET, (10.0, 10.0, 10.0)) == -1

    def test_vertex_on_sphere(self):
        assert insphere(*UNIT_TET, UNIT_TET[0]) == 0

    def test_degenerate_raises(self):
        with pytest.raises(DegenerateElementError):
            insphere((0, 0, 0), (1, 0, 0), (0, 1, 0), (1, 1, 0), (0.5, 0.5, 0.5))

    def test_orientation_independence(self):
        a, b, c, d = UNIT_TET
        p = (0.25, 0.25, 0.25)
        assert insphere(a, b, c, d, p) == insphere(b, a, c, d, p) == 1

    def test_matches_rational_reference(self):
        rng = random.Random(17)
        for _ in range(200):
            pts = [rand_point(rng) for _ in range(4)]
            if orient3d(*pts) == 0:
                continue
            p = rand_point(rng, 2.0)
            assert insphere(*pts, p) == frac_insphere(*pts, p)

    def test_cospherical_matches_rational_reference(self):
        rng = random.Random(19)
        for _ in range(200):
            # five points on (nearly, after rounding) one sphere
            pts = []
            for _ in range(5):
                v = rand_point(rng)
                n = math.sqrt(sum(x * x for x in v)) or 1.0
                pts.append(tuple(x / n for x in v))
            a, b, c, d, p = pts
            if orient3d(a, b, c, d) == 0:
                continue
            assert insphere(a, b, c, d, p) == frac_insphere(a, b, c, d, p)

    def test_rigid_motion_invariance(self):
        rng = random.Random(23)
        for _ in range(50):
            pts = [rand_point(rng) for _ in range(4)]
            if orient3d(*pts) == 0:
                continue
            p = rand_point(rng)
            ref = insphere(*pts, p)
            if ref == 0:
                continue
            # random rotation from normalized cross products
            u = rand_point(rng)
            v = rand_point(rng)
            un = math.sqrt(sum(x * x for x in u))
            u = tuple(x / un for x in u)
            w = (
                u[1] * v[2] - u[2] * v[1],
                u[2] * v[0] - u[0] * v[2],
                u[0] * v[1] - u[1] * v[0],
            )
            wn = math.sqrt(sum(x * x for x in w))
            w = tuple(x / wn for x in w)
            t = (
                w[1] * u[2] - w[2] * u[1],
                w[2] * u[0] - w[0] * u[2],
                w[0] * u[1] - w[1] * u[0],
            )
            shift = rand_point(rng, 5.0)

            def move(q):
                return (
                    u[0] * q[0] + u[1] * q[1] + u[2] * q[2] + shift[0],
                    t[0] * q[0] + t[1] * q[1] + t[2] * q[2] + shift[1],
                    w[0] * q[0] + w[1] * q[1] + w[2] * q[2] + shift[2],
                )

            moved = [move(q) for q in pts]
            assert insphere(*moved, move(p)) == ref


class TestCircumsphere:
    def test_unit_right_corner(self):
        s = circumsphere(*UNIT_TET)
        assert s.center == pytest.approx((0.5, 0.5, 0.5), abs=1e-14)
        assert s.radius == pytest.approx(math.sqrt(3) / 2, rel=1e-14)

    def test_regular_tet(self):
        a = (0.0, 0.0, 0.0)
        b = (1.0, 0.0, 0.0)
        c = (0.5, math.sqrt(3) / 2, 0.0)
        d = (0.5, math.sqrt(3) / 6, math.sqrt(6) / 3)
        s = circumsphere(a, b, c, d)
        assert s.radius == pytest.approx(math.sqrt(6) / 4, rel=1e-12)

    def test_near_flat_raises(self):
        with pytest.raises(DegenerateElementError):
            circumsphere((0, 0, 0), (1, 0, 0), (0, 1, 0), (0.3, 0.3, 1e-14))

    def test_equidistance_property(self):
        rng = random.Random(29)
        checked = 0
        while checked < 100:
            pts = [rand_point(rng) for _ in range(4)]
            if abs(tet_volume(*pts)) < 1e-3:
                continue
            s = circumsphere(*pts)
            for q in pts:
                d = math.dist(s.center, q)
                assert d == pytest.approx(s.radius, rel=1e-12)
            checked += 1


def normal_formula_dihedrals(a, b, c, d):
    # independent route: interior angle from outward face normals,
    # cos(theta) = -n1.n2 / (|n1||n2|)
    import numpy as np

    pts = np.array([a, b, c, d], dtype=float)
    faces = {
        frozenset((0, 1)): ((0, 1, 2), (0, 1, 3)),
        frozenset((0, 2)): ((0, 1, 2), (0, 2, 3)),
        frozenset((0, 3)): ((0, 1, 3), (0, 2, 3)),
        frozenset((1, 2)): ((0, 1, 2), (1, 2, 3)),
        frozenset((1, 3)): ((0, 1, 3), (1, 2, 3)),
        frozenset((2, 3)): ((0, 2, 3), (1, 2, 3)),
    }
    cen = pts.mean(axis=0)
    out = []
    for i, j in TET_EDGES:
        f1, f2 = faces[frozenset((i, j))]
        ns = []
        for f in (f1, f2):
            n = np.cross(pts[f[1]] - pts[f[0]], pts[f[2]] - pts[f[0]])
            mid = pts[list(f)].mean(axis=0)
            if np.dot(n, cen - mid) > 0:
                n = -n
            ns.append(n / np.linalg.norm(n))
        cosv = -float(np.dot(ns[0], ns[1]))
        out.append(math.acos(max(-1.0, min(1.0, cosv))))
    return out


class TestDihedralAngles:
    def test_regular_tet(self):
        a = (0.0, 0.0, 0.0)
        b = (1.0, 0.0, 0.0)
        c = (0.5, math.sqrt(3) / 2, 0.0)
        d = (0.5, math.sqrt(3) / 6, math.sqrt(6) / 3)
        want = math.acos(1.0 / 3.0)
        for ang in dihedral_angles(a, b, c, d):
            assert ang == pytest.approx(want, rel=1e-12)

    def test_right_corner_tet(self):
        angs = [math.degrees(x) for x in dihedral_angles(*UNIT_TET)]
        assert sum(1 for x in angs if abs(x - 90.0) < 1e-9) == 3

    def test_sliver_pattern(self):
        a, b = (0.0, 0.0, 0.0), (1.0, 1.0, 0.0)
        c, d = (1.0, 0.0, 0.01), (0.0, 1.0, 0.01)
        angs = [math.degrees(x) for x in dihedral_angles(a, b, c, d)]
        ref = [math.degrees(x) for x in normal_formula_dihedrals(a, b, c, d)]
        assert angs == pytest.approx(ref, abs=1e-8)
        assert sum(1 for x in angs if x > 170.0) == 2
        assert sum(1 for x in angs if x < 10.0) == 4

    def test_matches_normal_formula_random(self):
        rng = random.Random(31)
        checked = 0
        while checked < 50:
            pts = [rand_point(rng) for _ in range(4)]
            if abs(tet_volume(*pts)) < 1e-3:
                continue
            got = dihedral_angles(*pts)
            ref = normal_formula_dihedrals(*pts)
            assert list(got) == pytest.approx(ref, abs=1e-9)
            checked += 1

    def test_angles_strictly_interior(self):
        rng = random.Random(37)
        checked = 0
        while checked < 200:
            pts = [rand_point(rng) for _ in range(4)]
            if abs(tet_volume(*pts)) < 1e-9:
                continue
            for ang in dihedral_angles(*pts):
                assert 0.0 < ang < math.pi
            checked += 1


class TestPlanarPredicates:
    def test_orient2d_basic(self):
        assert orient2d((0, 0), (1, 0), (0, 1)) == 1
        assert orient2d((0, 0), (1, 0), (2, 0)) == 0
        assert orient2d((0, 0), (1, 0), (0, -1)) == -1

    def test_incircle_basic(self):
        assert incircle((0, 0), (1, 0), (0, 1), (0.3, 0.3)) == 1
        assert incircle((0, 0), (1, 0), (0, 1), (5, 5)) == -1
        # cocircular: (1,1) is on the circle through the right triangle
        assert incircle((0, 0), (1, 0), (0, 1), (1, 1)) == 0

    def test_incircle_orientation_independence(self):
        assert incircle((0, 0), (0, 1), (1, 0), (0.3, 0.3)) == 1

    def test_circumcircle(self):
        c = circumcircle((0.0, 0.0), (1.0, 0.0), (0.0, 1.0))
        assert c.center == pytest.approx((0.5, 0.5))
        assert c.radius == pytest.approx(math.sqrt(2) / 2)
        with pytest.raises(DegenerateElementError):
            circumcircle((0.0, 0.0), (1.0, 0.0), (2.0, 0.0))
