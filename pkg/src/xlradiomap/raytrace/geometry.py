"""Flattened scene geometry and compiled geometric predicates.

Surfaces are numbered ground first (when the scene has one), then for each
building its walls in footprint order followed by its roof. Wall ``i`` of a
building spans footprint vertices ``i`` and ``i+1``; its outward normal is
``(e_y, -e_x)/|e|`` for the counter-clockwise edge vector ``e``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from ..scene import Scene

GROUND, WALL, ROOF = 0, 1, 2
SURFACE_KIND_NAMES = {GROUND: "ground", WALL: "wall", ROOF: "roof"}

# tolerance (m) for strict-interior and on-surface tests
GEOM_TOL = 1e-7


@dataclass(frozen=True, eq=False)
class SceneGeometry:
    scene: Scene
    # prisms
    b_start: np.ndarray  # (B+1,) offsets into vx/vy
    vx: np.ndarray
    vy: np.ndarray
    b_height: np.ndarray
    b_bbox: np.ndarray  # (B, 4) xmin, ymin, xmax, ymax
    # surfaces
    s_kind: np.ndarray
    s_normal: np.ndarray  # (S, 3)
    s_offset: np.ndarray  # plane: n . p = offset
    s_building: np.ndarray  # -1 for ground
    s_a: np.ndarray  # (S, 2) wall start vertex
    s_b: np.ndarray  # (S, 2) wall end vertex
    s_height: np.ndarray  # wall/roof top; 0 for ground
    s_eps: np.ndarray  # relative permittivity (roofs: unused, reflect with -1)
    s_index: np.ndarray  # wall index within its building, -1 otherwise
    # vertical edges (convex corners)
    e_xy: np.ndarray  # (E, 2)
    e_height: np.ndarray
    e_building: np.ndarray
    e_vertex: np.ndarray
    e_n: np.ndarray  # wedge index n = (2*pi - interior)/pi
    e_face0_angle: np.ndarray  # absolute direction of the 0-face
    e_face0_surf: np.ndarray
    e_facen_surf: np.ndarray

    @property
    def n_surfaces(self) -> int:
        return self.s_kind.size

    @property
    def n_edges(self) -> int:
        return self.e_xy.shape[0]

    def surface_label(self, s: int) -> str:
        kind = int(self.s_kind[s])
        if kind == GROUND:
            return "ground"
        if kind == WALL:
            return f"b{int(self.s_building[s])}.wall{int(self.s_index[s])}"
        return f"b{int(self.s_building[s])}.roof"


def build_geometry(scene: Scene) -> SceneGeometry:
    starts, vx, vy, heights, bbox = [0], [], [], [], []
    kind, normal, offset, bld, sa, sb, sh, eps, sidx = ([] for _ in range(9))
    if scene.ground_material is not None:
        kind.append(GROUND)
        normal.append((0.0, 0.0, 1.0))
        offset.append(0.0)
        bld.append(-1)
        sa.append((0.0, 0.0))
        sb.append((0.0, 0.0))
        sh.append(0.0)
        eps.append(scene.ground_material.relative_permittivity)
        sidx.append(-1)
    e_xy, e_h, e_b, e_v, e_n, e_ang, e_f0, e_fn = ([] for _ in range(8))
    for bi, b in enumerate(scene.buildings):
        fp = b.footprint
        nv = len(fp)
        vx.extend(p[0] for p in fp)
        vy.extend(p[1] for p in fp)
        starts.append(starts[-1] + nv)
        heights.append(b.height)
        bbox.append(b.bounds())
        first_wall = len(kind)
        for i in range(nv):
            (x0, y0), (x1, y1) = fp[i], fp[(i + 1) % nv]
            ex, ey = x1 - x0, y1 - y0
            ln = math.hypot(ex, ey)
            nx, ny = ey / ln, -ex / ln
            kind.append(WALL)
            normal.append((nx, ny, 0.0))
            offset.append(nx * x0 + ny * y0)
            bld.append(bi)
            sa.append((x0, y0))
            sb.append((x1, y1))
            sh.append(b.height)
            eps.append(b.wall_material.relative_permittivity)
            sidx.append(i)
        kind.append(ROOF)
        normal.append((0.0, 0.0, 1.0))
        offset.append(b.height)
        bld.append(bi)
        sa.append((0.0, 0.0))
        sb.append((0.0, 0.0))
        sh.append(b.height)
        eps.append(b.roof_material.relative_permittivity)
        sidx.append(-1)
        for i in range(nv):
            ax, ay = fp[i - 1]
            vxx, vyy = fp[i]
            bx, by = fp[(i + 1) % nv]
            to_prev = math.atan2(ay - vyy, ax - vxx)
            to_next = math.atan2(by - vyy, bx - vxx)
            interior = (to_prev - to_next) % (2 * math.pi)
            if interior >= math.pi - 1e-12:
                continue  # flat or reflex corner: no exterior wedge
            e_xy.append((vxx, vyy))
            e_h.append(b.height)
            e_b.append(bi)
            e_v.append(i)
            e_n.append((2 * math.pi - interior) / math.pi)
            e_ang.append(to_prev)
            e_f0.append(first_wall + (i - 1) % nv)
            e_fn.append(first_wall + i)

    f = lambda v, shape: np.asarray(v, dtype=np.float64).reshape(shape)  # noqa: E731
    i64 = lambda v: np.asarray(v, dtype=np.int64)  # noqa: E731
    return SceneGeometry(
        scene=scene,
        b_start=i64(starts), vx=f(vx, -1), vy=f(vy, -1), b_height=f(heights, -1),
        b_bbox=f(bbox, (-1, 4)),
        s_kind=i64(kind), s_normal=f(normal, (-1, 3)), s_offset=f(offset, -1),
        s_building=i64(bld), s_a=f(sa, (-1, 2)), s_b=f(sb, (-1, 2)), s_height=f(sh, -1),
        s_eps=f(eps, -1), s_index=i64(sidx),
        e_xy=f(e_xy, (-1, 2)), e_height=f(e_h, -1), e_building=i64(e_b), e_vertex=i64(e_v),
        e_n=f(e_n, -1), e_face0_angle=f(e_ang, -1), e_face0_surf=i64(e_f0),
        e_facen_surf=i64(e_fn),
    )


def mirror_point(p, normal, offset):
    p = np.asarray(p, dtype=float)
    d = float(np.dot(normal, p) - offset)
    return p - 2.0 * d * np.asarray(normal)


# --------------------------------------------------------------------------
# compiled predicates


@njit(cache=True, nogil=True)
def point_polygon_status(px, py, vx, vy, s, e, tol):
    """+1 strictly inside (farther than tol from the boundary), 0 on boundary, -1 outside."""
    inside = False
    dmin = 1e300
    j = e - 1
    for i in range(s, e):
        xi, yi, xj, yj = vx[i], vy[i], vx[j], vy[j]
        if (yi > py) != (yj > py):
            xc = xj + (py - yj) * (xi - xj) / (yi - yj)
            if px < xc:
                inside = not inside
        ex = xi - xj
        ey = yi - yj
        l2 = ex * ex + ey * ey
        t = ((px - xj) * ex + (py - yj) * ey) / l2 if l2 > 0 else 0.0
        t = min(max(t, 0.0), 1.0)
        dx = xj + t * ex - px
        dy = yj + t * ey - py
        d = dx * dx + dy * dy
        if d < dmin:
            dmin = d
        j = i
    if dmin <= tol * tol:
        return 0
    return 1 if inside else -1


@njit(cache=True, nogil=True)
def point_in_buildings(px, py, pz, b_start, vx, vy, b_height, b_bbox):
    """Index of a building whose closed prism contains the point, else -1."""
    for b in range(b_height.shape[0]):
        if pz > b_height[b] + GEOM_TOL or pz < -GEOM_TOL:
            continue
        if (px < b_bbox[b, 0] - GEOM_TOL or px > b_bbox[b, 2] + GEOM_TOL
                or py < b_bbox[b, 1] - GEOM_TOL or py > b_bbox[b, 3] + GEOM_TOL):
            continue
        if point_polygon_status(px, py, vx, vy, b_start[b], b_start[b + 1], GEOM_TOL) >= 0:
            return b
    return -1


@njit(cache=True, nogil=True)
def _segment_hits_prism(ax, ay, az, bx, by, bz, b, b_start, vx, vy, h, buf):
    dx = bx - ax
    dy = by - ay
    dz = bz - az
    # clip the parameter range to the slab 0 <= z <= h
    t0 = 0.0
    t1 = 1.0
    if abs(dz) < 1e-15:
        if az <= GEOM_TOL or az >= h - GEOM_TOL:
            return False
    else:
        ta = (0.0 - az) / dz
        tb = (h - az) / dz
        lo = min(ta, tb)
        hi = max(ta, tb)
        t0 = max(t0, lo)
        t1 = min(t1, hi)
    if t1 - t0 <= 0.0:
        return False
    s = b_start[b]
    e = b_start[b + 1]
    n = 0
    buf[n] = t0
    n += 1
    j = e - 1
    for i in range(s, e):
        ex = vx[i] - vx[j]
        ey = vy[i] - vy[j]
        den = dx * ey - dy * ex
        if den != 0.0:
            wx = vx[j] - ax
            wy = vy[j] - ay
            t = (wx * ey - wy * ex) / den
            u = (wx * dy - wy * dx) / den
            if t > t0 and t < t1 and u >= -1e-12 and u <= 1.0 + 1e-12:
                buf[n] = t
                n += 1
        j = i
    buf[n] = t1
    n += 1
    # insertion sort of the few crossing parameters
    for i in range(1, n):
        v = buf[i]
        k = i - 1
        while k >= 0 and buf[k] > v:
            buf[k + 1] = buf[k]
            k -= 1
        buf[k + 1] = v
    for i in range(n - 1):
        if buf[i + 1] - buf[i] <= 0.0:
            continue
        tm = 0.5 * (buf[i] + buf[i + 1])
        zm = az + tm * dz
        if zm <= GEOM_TOL or zm >= h - GEOM_TOL:
            continue
        if point_polygon_status(ax + tm * dx, ay + tm * dy, vx, vy, s, e, GEOM_TOL) > 0:
            return True
    return False


@njit(cache=True, nogil=True)
def segment_occluded(ax, ay, az, bx, by, bz, b_start, vx, vy, b_height, b_bbox, buf):
    """True when the open segment a-b passes through the interior of any prism."""
    xmin = min(ax, bx)
    xmax = max(ax, bx)
    ymin = min(ay, by)
    ymax = max(ay, by)
    zmin = min(az, bz)
    for b in range(b_height.shape[0]):
        h = b_height[b]
        if zmin >= h:
            continue
        if (xmax <= b_bbox[b, 0] or xmin >= b_bbox[b, 2]
                or ymax <= b_bbox[b, 1] or ymin >= b_bbox[b, 3]):
            continue
        if _segment_hits_prism(ax, ay, az, bx, by, bz, b, b_start, vx, vy, h, buf):
            return True
    return False


def occluded(geom: SceneGeometry, a, b) -> bool:
    buf = np.empty(int(np.diff(geom.b_start).max(initial=0)) + 2)
    return bool(segment_occluded(float(a[0]), float(a[1]), float(a[2]),
                                 float(b[0]), float(b[1]), float(b[2]),
                                 geom.b_start, geom.vx, geom.vy, geom.b_height,
                                 geom.b_bbox, buf))
