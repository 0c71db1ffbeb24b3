"""Anisotropic encroachment domains around protected boundary entities.

A boundary segment is protected by the intersection of its diametral ball
with a tube of radius R/A around it; a boundary facet by the intersection
of its equatorial circumball with a slab of half-thickness R/A around the
triangle (distances to the closest point of the entity, so the regions are
rounded).  A -> 1 recovers the classical diametral-ball rule; larger A
admits proportionally thinner layers without splitting.

The EntityIndex keeps a uniform spatial hash over the current protected
entities so candidate insertion points can be tested against nearby
domains only.
"""

import math

from .mesh import face_key, seg_key

__all__ = [
    "encroaches_segment",
    "encroaches_face",
    "point_segment_distance",
    "point_triangle_distance",
    "segment_ball",
    "face_ball",
    "EntityIndex",
]


def _sub(a, b):
    return (a[0] - b[0], a[1] - b[1], a[2] - b[2])


def _dot(u, v):
    return u[0] * v[0] + u[1] * v[1] + u[2] * v[2]


def _norm(u):
    return math.sqrt(_dot(u, u))


def point_segment_distance(p, a, b):
    u = _sub(b, a)
    uu = _dot(u, u)
    if uu == 0.0:
        raise ValueError("zero-length segment")
    t = _dot(_sub(p, a), u) / uu
    t = 0.0 if t < 0.0 else (1.0 if t > 1.0 else t)
    q = (a[0] + t * u[0], a[1] + t * u[1], a[2] + t * u[2])
    return math.dist(p, q)


def point_triangle_distance(p, a, b, c):
    """Distance from p to the closed triangle (a, b, c)."""
    u = _sub(b, a)
    v = _sub(c, a)
    w = _sub(p, a)
    uu = _dot(u, u)
    vv = _dot(v, v)
    uv = _dot(u, v)
    wu = _dot(w, u)
    wv = _dot(w, v)
    den = uu * vv - uv * uv
    if den <= 0.0:
        # degenerate triangle: fall back to the longest edge
        return min(
            point_segment_distance(p, a, b),
            point_segment_distance(p, a, c) if vv > 0 else math.dist(p, a),
        )
    s = (vv * wu - uv * wv) / den
    t = (uu * wv - uv * wu) / den
    if s >= 0.0 and t >= 0.0 and s + t <= 1.0:
        q = (
            a[0] + s * u[0] + t * v[0],
            a[1] + s * u[1] + t * v[1],
            a[2] + s * u[2] + t * v[2],
        )
        return math.dist(p, q)
    return min(
        point_segment_distance(p, a, b),
        point_segment_distance(p, b, c),
        point_segment_distance(p, a, c),
    )


def segment_ball(a, b):
    """Diametral ball (midpoint, half-length) of a segment."""
    mid = ((a[0] + b[0]) / 2, (a[1] + b[1]) / 2, (a[2] + b[2]) / 2)
    return mid, math.dist(a, b) / 2.0


def face_ball(a, b, c):
    """Equatorial circumball (circumcenter, circumradius) of a triangle."""
    u = _sub(b, a)
    v = _sub(c, a)
    uu = _dot(u, u)
    vv = _dot(v, v)
    uv = _dot(u, v)
    den = 2.0 * (uu * vv - uv * uv)
    if den <= 0.0:
        raise ValueError("degenerate triangle has no circumball")
    s = vv * (uu - uv) / den
    t = uu * (vv - uv) / den
    center = (
        a[0] + s * u[0] + t * v[0],
        a[1] + s * u[1] + t * v[1],
        a[2] + s * u[2] + t * v[2],
    )
    return center, math.dist(center, a)


def encroaches_segment(p, a, b, anisotropy):
    """True iff p lies inside the segment's diametral ball and within
    R/A of the segment itself."""
    mid, r = segment_ball(a, b)
    if r == 0.0:
        raise ValueError("zero-length segment")
    if math.dist(p, mid) >= r:
        return False
    return point_segment_distance(p, a, b) < r / anisotropy


def encroaches_face(p, a, b, c, anisotropy):
    """True iff p lies inside the facet's equatorial ball and within
    R/A of the (closed) triangle."""
    center, r = face_ball(a, b, c)
    if math.dist(p, center) >= r:
        return False
    return point_triangle_distance(p, a, b, c) < r / anisotropy


class EntityIndex:
    """Uniform spatial hash over the protected segments and facets of a
    mesh.  Entities are addressed by their mesh keys, so splits only need
    the new children registered; stale parents are filtered at query time
    against the live mesh dictionaries."""

    def __init__(self, mesh, anisotropy):
        self.mesh = mesh
        self.anisotropy = anisotropy
        self.rebuild()

    # -- construction ---------------------------------------------------

    def _entity_ball(self, kind, key):
        pts = self.mesh.points
        if kind == "seg":
            return segment_ball(pts[key[0]], pts[key[1]])
        return face_ball(pts[key[0]], pts[key[1]], pts[key[2]])

    def rebuild(self):
        mesh = self.mesh
        entities = [("seg", k) for k in mesh.segments] + [
            ("facet", k) for k in mesh.facets
        ]
        radii = []
        balls = {}
        for ent in entities:
            try:
                ball = self._entity_ball(*ent)
            except ValueError:
                continue
            balls[ent] = ball
            radii.append(ball[1])
        radii.sort()
        med = radii[len(radii) // 2] if radii else 1.0
        self.cell = max(2.0 * med, 1e-12)
        self.grid = {}
        self.big = []
        self.count = 0
        for ent, ball in balls.items():
            self._register(ent, ball)

    def _register(self, ent, ball):
        (cx, cy, cz), r = ball
        h = self.cell
        lo = (
            math.floor((cx - r) / h),
            math.floor((cy - r) / h),
            math.floor((cz - r) / h),
        )
        hi = (
            math.floor((cx + r) / h),
            math.floor((cy + r) / h),
            math.floor((cz + r) / h),
        )
        if (hi[0] - lo[0] + 1) * (hi[1] - lo[1] + 1) * (hi[2] - lo[2] + 1) > 64:
            self.big.append(ent)
        else:
            for i in range(lo[0], hi[0] + 1):
                for j in range(lo[1], hi[1] + 1):
                    for k in range(lo[2], hi[2] + 1):
                        self.grid.setdefault((i, j, k), []).append(ent)
        self.count += 1

    def add(self, kind, key):
        try:
            ball = self._entity_ball(kind, key)
        except ValueError:
            return
        self._register((kind, key), ball)
        if self.count > 4 * max(len(self.mesh.segments) + len(self.mesh.facets), 16):
            self.rebuild()  # too many stale entries accumulated

    def apply_events(self, events):
        for ev in events:
            tag, _parent, children = ev
            kind = "seg" if tag == "segment_split" else "facet"
            for child in children:
                self.add(kind, child)

    # -- queries ----------------------------------------------------------

    def _candidates(self, p):
        h = self.cell
        cell = (math.floor(p[0] / h), math.floor(p[1] / h), math.floor(p[2] / h))
        out = list(self.grid.get(cell, ()))
        out.extend(self.big)
        return out

    def _alive(self, ent):
        kind, key = ent
        if kind == "seg":
            return key in self.mesh.segments
        return key in self.mesh.facets

    def encroached_segment(self, p, anisotropy=None):
        """Smallest-key protected segment whose domain contains p, or None."""
        a = anisotropy if anisotropy is not None else self.anisotropy
        pts = self.mesh.points
        best = None
        for ent in self._candidates(p):
            if ent[0] != "seg" or not self._alive(ent):
                continue
            key = ent[1]
            if encroaches_segment(p, pts[key[0]], pts[key[1]], a):
                if best is None or key < best:
                    best = key
        return best

    def encroached_facet(self, p, anisotropy=None):
        """Smallest-key protected facet whose domain contains p, or None."""
        a = anisotropy if anisotropy is not None else self.anisotropy
        pts = self.mesh.points
        best = None
        for ent in self._candidates(p):
            if ent[0] != "facet" or not self._alive(ent):
                continue
            key = ent[1]
            if encroaches_face(p, pts[key[0]], pts[key[1]], pts[key[2]], a):
                if best is None or key < best:
                    best = key
        return best

    def encroaches_any(self, p, anisotropy=None):
        return (
            self.encroached_segment(p, anisotropy) is not None
            or self.encroached_facet(p, anisotropy) is not None
        )
