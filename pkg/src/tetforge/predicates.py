"""Exact-sign geometric predicates and basic metric computations.

Orientation and sphere-membership tests are first evaluated in hardware
floating point together with a forward error bound (static filter, constants
after Shewchuk).  Only when the computed value falls below the bound is the
sign recomputed exactly, using integer arithmetic on scaled coordinates, so
the common case stays fast while near-degenerate configurations never get a
wrong sign.
"""

import math
from typing import NamedTuple

__all__ = [
    "GeometryError",
    "DegenerateElementError",
    "Sphere",
    "Circle",
    "orient3d",
    "insphere",
    "orient2d",
    "incircle",
    "circumsphere",
    "circumcircle",
    "dihedral_angles",
    "tet_volume",
    "TET_EDGES",
]

_EPS = 2.0 ** -53  # half ulp of 1.0
_O3D_BOUND = (7.0 + 56.0 * _EPS) * _EPS
_ISP_BOUND = (16.0 + 224.0 * _EPS) * _EPS
_CCW_BOUND = (3.0 + 16.0 * _EPS) * _EPS
_ICC_BOUND = (10.0 + 96.0 * _EPS) * _EPS
_INF = math.inf
_TWO53 = 9007199254740992  # 2**53

# relative determinant magnitude below which a tet has no usable circumcenter
DEGENERACY_FACTOR = 1e-13

# local edge order: (i, j) vertex-index pairs; opposite pairs are
# (0,5), (1,4), (2,3) in this listing
TET_EDGES = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
_TET_EDGE_OPP = ((2, 3), (1, 3), (1, 2), (0, 3), (0, 2), (0, 1))


class GeometryError(ValueError):
    """Invalid geometric input (non-finite coordinates, zero-length entity)."""


class DegenerateElementError(GeometryError):
    """Element too flat for the requested metric computation."""


class Sphere(NamedTuple):
    center: tuple
    radius: float


class Circle(NamedTuple):
    center: tuple
    radius: float


def _exact_ints(values):
    # Every finite double is m * 2**e with a 53-bit integer m; putting all
    # values on the smallest common exponent makes differences and products
    # exact in (unbounded) Python integers.
    ms = []
    es = []
    for v in values:
        f, e = math.frexp(v)
        ms.append(int(f * _TWO53))
        es.append(e)
    emin = min((e for e, m in zip(es, ms) if m != 0), default=0)
    return [m << (e - emin) if m != 0 else 0 for m, e in zip(ms, es)]


def _orient3d_exact(a, b, c, d):
    ax, bx, cx, dx = _exact_ints((a[0], b[0], c[0], d[0]))
    ay, by, cy, dy = _exact_ints((a[1], b[1], c[1], d[1]))
    az, bz, cz, dz = _exact_ints((a[2], b[2], c[2], d[2]))
    ux, uy, uz = bx - ax, by - ay, bz - az
    vx, vy, vz = cx - ax, cy - ay, cz - az
    wx, wy, wz = dx - ax, dy - ay, dz - az
    det = (
        ux * (vy * wz - vz * wy)
        - uy * (vx * wz - vz * wx)
        + uz * (vx * wy - vy * wx)
    )
    return (det > 0) - (det < 0)


def orient3d(a, b, c, d):
    """Sign of det[b-a, c-a, d-a]: +1, 0, or -1, always exact.

    Positive when d lies on the side of plane (a, b, c) given by the
    right-hand rule on (b-a, c-a).
    """
    ux = b[0] - a[0]; uy = b[1] - a[1]; uz = b[2] - a[2]
    vx = c[0] - a[0]; vy = c[1] - a[1]; vz = c[2] - a[2]
    wx = d[0] - a[0]; wy = d[1] - a[1]; wz = d[2] - a[2]
    p = vy * wz; q = vz * wy
    r = vz * wx; s = vx * wz
    t = vx * wy; u = vy * wx
    det = ux * (p - q) + uy * (r - s) + uz * (t - u)
    perm = (
        abs(ux) * (abs(p) + abs(q))
        + abs(uy) * (abs(r) + abs(s))
        + abs(uz) * (abs(t) + abs(u))
    )
    if not perm < _INF:
        raise GeometryError("non-finite coordinate in orient3d")
    bound = _O3D_BOUND * perm
    if det > bound:
        return 1
    if det < -bound:
        return -1
    return _orient3d_exact(a, b, c, d)


def _insphere_exact(a, b, c, d, p):
    coords = _exact_ints(
        (a[0], a[1], a[2], b[0], b[1], b[2], c[0], c[1], c[2],
         d[0], d[1], d[2], p[0], p[1], p[2])
    )
    px, py, pz = coords[12], coords[13], coords[14]
    rows = []
    for i in range(4):
        x = coords[3 * i] - px
        y = coords[3 * i + 1] - py
        z = coords[3 * i + 2] - pz
        rows.append((x, y, z, x * x + y * y + z * z))
    (ax, ay, az, al), (bx, by, bz, bl), (cx, cy, cz, cl), (dx, dy, dz, dl) = rows
    ab = ax * by - bx * ay
    bc = bx * cy - cx * by
    cd = cx * dy - dx * cy
    da = dx * ay - ax * dy
    ac = ax * cy - cx * ay
    bd = bx * dy - dx * by
    abc = az * bc - bz * ac + cz * ab
    bcd = bz * cd - cz * bd + dz * bc
    cda = cz * da + dz * ac + az * cd
    dab = dz * ab + az * bd + bz * da
    det = (dl * abc - cl * dab) + (bl * cda - al * bcd)
    return (det > 0) - (det < 0)


def _insphere_raw(a, b, c, d, p):
    # Sign of the 4x4 lifted determinant relative to p; caller interprets
    # it against the tet orientation.
    aex = a[0] - p[0]; aey = a[1] - p[1]; aez = a[2] - p[2]
    bex = b[0] - p[0]; bey = b[1] - p[1]; bez = b[2] - p[2]
    cex = c[0] - p[0]; cey = c[1] - p[1]; cez = c[2] - p[2]
    dex = d[0] - p[0]; dey = d[1] - p[1]; dez = d[2] - p[2]

    axby = aex * bey; bxay = bex * aey
    bxcy = bex * cey; cxby = cex * bey
    cxdy = cex * dey; dxcy = dex * cey
    dxay = dex * aey; axdy = aex * dey
    axcy = aex * cey; cxay = cex * aey
    bxdy = bex * dey; dxby = dex * bey

    ab = axby - bxay
    bc = bxcy - cxby
    cd = cxdy - dxcy
    da = dxay - axdy
    ac = axcy - cxay
    bd = bxdy - dxby

    abc = aez * bc - bez * ac + cez * ab
    bcd = bez * cd - cez * bd + dez * bc
    cda = cez * da + dez * ac + aez * cd
    dab = dez * ab + aez * bd + bez * da

    alift = aex * aex + aey * aey + aez * aez
    blift = bex * bex + bey * bey + bez * bez
    clift = cex * cex + cey * cey + cez * cez
    dlift = dex * dex + dey * dey + dez * dez

    det = (dlift * abc - clift * dab) + (blift * cda - alift * bcd)

    aezp = abs(aez); bezp = abs(bez); cezp = abs(cez); dezp = abs(dez)
    axbyp = abs(axby); bxayp = abs(bxay)
    bxcyp = abs(bxcy); cxbyp = abs(cxby)
    cxdyp = abs(cxdy); dxcyp = abs(dxcy)
    dxayp = abs(dxay); axdyp = abs(axdy)
    axcyp = abs(axcy); cxayp = abs(cxay)
    bxdyp = abs(bxdy); dxbyp = abs(dxby)
    perm = (
        ((cxdyp + dxcyp) * bezp + (dxbyp + bxdyp) * cezp + (bxcyp + cxbyp) * dezp) * alift
        + ((dxayp + axdyp) * cezp + (axcyp + cxayp) * dezp + (cxdyp + dxcyp) * aezp) * blift
        + ((axbyp + bxayp) * dezp + (bxdyp + dxbyp) * aezp + (dxayp + axdyp) * bezp) * clift
        + ((bxcyp + cxbyp) * aezp + (cxayp + axcyp) * bezp + (axbyp + bxayp) * cezp) * dlift
    )
    if not perm < _INF:
        raise GeometryError("non-finite coordinate in insphere")
    bound = _ISP_BOUND * perm
    if det > bound:
        return 1
    if det < -bound:
        return -1
    return _insphere_exact(a, b, c, d, p)


def _insphere_oriented(a, b, c, d, p):
    # Assumes orient3d(a, b, c, d) == +1; +1 means p strictly inside.
    return -_insphere_raw(a, b, c, d, p)


def insphere(a, b, c, d, p):
    """Circumsphere test: +1 if p strictly inside the circumsphere of
    tet (a, b, c, d), -1 strictly outside, 0 on it.  Exact sign; works
    for either handedness of the tet.
    """
    o = orient3d(a, b, c, d)
    if o == 0:
        raise DegenerateElementError("insphere of a flat tetrahedron")
    return -o * _insphere_raw(a, b, c, d, p)


def _orient2d_exact(a, b, c):
    ax, bx, cx = _exact_ints((a[0], b[0], c[0]))
    ay, by, cy = _exact_ints((a[1], b[1], c[1]))
    det = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    return (det > 0) - (det < 0)


def orient2d(a, b, c):
    """Sign of the cross product (b-a) x (c-a): +1 for a counterclockwise
    triangle, 0 for collinear points.  Exact sign."""
    l = (b[0] - a[0]) * (c[1] - a[1])
    r = (b[1] - a[1]) * (c[0] - a[0])
    det = l - r
    perm = abs(l) + abs(r)
    if not perm < _INF:
        raise GeometryError("non-finite coordinate in orient2d")
    bound = _CCW_BOUND * perm
    if det > bound:
        return 1
    if det < -bound:
        return -1
    return _orient2d_exact(a, b, c)


def _incircle_exact(a, b, c, p):
    xs = _exact_ints((a[0], b[0], c[0], p[0]))
    ys = _exact_ints((a[1], b[1], c[1], p[1]))
    px, py = xs[3], ys[3]
    rows = []
    for i in range(3):
        x = xs[i] - px
        y = ys[i] - py
        rows.append((x, y, x * x + y * y))
    (ax, ay, al), (bx, by, bl), (cx, cy, cl) = rows
    det = (
        al * (bx * cy - cx * by)
        - bl * (ax * cy - cx * ay)
        + cl * (ax * by - bx * ay)
    )
    return (det > 0) - (det < 0)


def _incircle_raw(a, b, c, p):
    adx = a[0] - p[0]; ady = a[1] - p[1]
    bdx = b[0] - p[0]; bdy = b[1] - p[1]
    cdx = c[0] - p[0]; cdy = c[1] - p[1]

    bdxcdy = bdx * cdy; cdxbdy = cdx * bdy
    cdxady = cdx * ady; adxcdy = adx * cdy
    adxbdy = adx * bdy; bdxady = bdx * ady

    alift = adx * adx + ady * ady
    blift = bdx * bdx + bdy * bdy
    clift = cdx * cdx + cdy * cdy

    det = (
        alift * (bdxcdy - cdxbdy)
        + blift * (cdxady - adxcdy)
        + clift * (adxbdy - bdxady)
    )
    perm = (
        (abs(bdxcdy) + abs(cdxbdy)) * alift
        + (abs(cdxady) + abs(adxcdy)) * blift
        + (abs(adxbdy) + abs(bdxady)) * clift
    )
    if not perm < _INF:
        raise GeometryError("non-finite coordinate in incircle")
    bound = _ICC_BOUND * perm
    if det > bound:
        return 1
    if det < -bound:
        return -1
    return _incircle_exact(a, b, c, p)


def _incircle_oriented(a, b, c, p):
    # Assumes orient2d(a, b, c) == +1; +1 means p strictly inside.
    return _incircle_raw(a, b, c, p)


def incircle(a, b, c, p):
    """Circumcircle test for 2D points: +1 if p strictly inside the
    circumcircle of (a, b, c), works for either orientation."""
    o = orient2d(a, b, c)
    if o == 0:
        raise DegenerateElementError("incircle of a collinear triangle")
    return o * _incircle_raw(a, b, c, p)


def _sub(a, b):
    return (a[0] - b[0], a[1] - b[1], a[2] - b[2])


def _cross(u, v):
    return (
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    )


def _dot(u, v):
    return u[0] * v[0] + u[1] * v[1] + u[2] * v[2]


def _norm(u):
    return math.sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2])


def tet_volume(a, b, c, d):
    """Signed volume; positive for orient3d(a, b, c, d) > 0."""
    u = _sub(b, a)
    v = _sub(c, a)
    w = _sub(d, a)
    return _dot(u, _cross(v, w)) / 6.0


def _longest_edge(pts):
    best = 0.0
    n = len(pts)
    for i in range(n):
        for j in range(i + 1, n):
            best = max(best, _norm(_sub(pts[i], pts[j])))
    return best


def circumsphere(a, b, c, d):
    """Center and radius of the sphere through the four points.

    Raises DegenerateElementError when the tet is too flat for a reliable
    circumcenter (|det| below DEGENERACY_FACTOR times the cubed longest
    edge), so callers can fall back to a different insertion point.
    """
    u = _sub(b, a)
    v = _sub(c, a)
    w = _sub(d, a)
    vw = _cross(v, w)
    det = _dot(u, vw)
    lmax = _longest_edge((a, b, c, d))
    if not abs(det) > DEGENERACY_FACTOR * lmax ** 3:
        raise DegenerateElementError("flat tetrahedron has no stable circumcenter")
    uu = _dot(u, u)
    vv = _dot(v, v)
    ww = _dot(w, w)
    wu = _cross(w, u)
    uv = _cross(u, v)
    f = 0.5 / det
    ox = f * (uu * vw[0] + vv * wu[0] + ww * uv[0])
    oy = f * (uu * vw[1] + vv * wu[1] + ww * uv[1])
    oz = f * (uu * vw[2] + vv * wu[2] + ww * uv[2])
    center = (a[0] + ox, a[1] + oy, a[2] + oz)
    radius = math.sqrt(ox * ox + oy * oy + oz * oz)
    return Sphere(center, radius)


def circumcircle(a, b, c):
    """2D circumcircle of triangle (a, b, c)."""
    ux = b[0] - a[0]; uy = b[1] - a[1]
    vx = c[0] - a[0]; vy = c[1] - a[1]
    det = ux * vy - uy * vx
    lmax = max(math.hypot(ux, uy), math.hypot(vx, vy),
               math.hypot(c[0] - b[0], c[1] - b[1]))
    if not abs(det) > DEGENERACY_FACTOR * lmax ** 2:
        raise DegenerateElementError("collinear triangle has no circumcircle")
    uu = ux * ux + uy * uy
    vv = vx * vx + vy * vy
    f = 0.5 / det
    ox = f * (vy * uu - uy * vv)
    oy = f * (ux * vv - vx * uu)
    return Circle((a[0] + ox, a[1] + oy), math.hypot(ox, oy))


def dihedral_angles(a, b, c, d):
    """Interior dihedral angles (radians) at the six edges of the tet,
    in TET_EDGES order.

    Computed from the tangent-plane components of the two opposite
    vertices around each edge, which stays well-behaved for very flat
    elements (angles then approach 0 and pi).
    """
    pts = (a, b, c, d)
    lmax = _longest_edge(pts)
    if lmax == 0.0:
        raise DegenerateElementError("zero-size tetrahedron")
    tiny = 1e-14 * lmax
    angles = []
    for (i, j), (k, l) in zip(TET_EDGES, _TET_EDGE_OPP):
        p = pts[i]
        axis = _sub(pts[j], p)
        alen = _norm(axis)
        if alen < tiny:
            raise DegenerateElementError("zero-length edge")
        axis = (axis[0] / alen, axis[1] / alen, axis[2] / alen)
        vecs = []
        for m in (k, l):
            r = _sub(pts[m], p)
            t = _dot(r, axis)
            v = (r[0] - t * axis[0], r[1] - t * axis[1], r[2] - t * axis[2])
            if _norm(v) < tiny:
                raise DegenerateElementError("collinear face")
            vecs.append(v)
        v1, v2 = vecs
        ang = math.atan2(_norm(_cross(v1, v2)), _dot(v1, v2))
        angles.append(ang)
    return tuple(angles)
