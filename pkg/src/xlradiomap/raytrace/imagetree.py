"""Image trees for specular path enumeration.

A node stands for an ordered sequence of reflecting surfaces together with
the image of the source mirrored through them. Nodes are emitted level by
level with children in surface order, so node ids follow the canonical
(depth, surface sequence) order.

Two pruning rules keep trees small and are both necessary conditions for a
valid path: the current image lies strictly in front of the next surface,
and the next surface has some point strictly in front of the previous one.
Roofs only ever send rays upward, so they are skipped unless some receiver
is above them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import GEOM_TOL, GROUND, ROOF, WALL, SceneGeometry


@dataclass(frozen=True, eq=False)
class ImageTree:
    parent: np.ndarray  # -1 for the root
    surface: np.ndarray  # -1 for the root
    depth: np.ndarray
    image: np.ndarray  # (M, 3); for edge trees (x, y, z-offset) see EdgeTrees

    def __len__(self):
        return self.parent.size

    def sequence(self, node: int) -> tuple[int, ...]:
        seq = []
        while self.parent[node] >= 0:
            seq.append(int(self.surface[node]))
            node = int(self.parent[node])
        return tuple(reversed(seq))


def _surface_corners(geom: SceneGeometry, s: int) -> np.ndarray | None:
    """Corner points of a finite surface; None for the infinite ground."""
    kind = geom.s_kind[s]
    if kind == GROUND:
        return None
    if kind == WALL:
        (ax, ay), (bx, by), h = geom.s_a[s], geom.s_b[s], geom.s_height[s]
        return np.array([[ax, ay, 0.0], [bx, by, 0.0], [ax, ay, h], [bx, by, h]])
    b = geom.s_building[s]
    sl = slice(geom.b_start[b], geom.b_start[b + 1])
    xs, ys = geom.vx[sl], geom.vy[sl]
    return np.column_stack([xs, ys, np.full(xs.size, geom.s_height[s])])


def surface_pair_table(geom: SceneGeometry) -> np.ndarray:
    """``ok[p, q]``: surface q has a point strictly in front of surface p."""
    n = geom.n_surfaces
    ok = np.zeros((n, n), dtype=bool)
    for q in range(n):
        corners = _surface_corners(geom, q)
        if corners is None:
            # the ground extends below every wall and roof
            ok[:, q] = geom.s_kind != GROUND
            continue
        d = corners @ geom.s_normal.T - geom.s_offset  # (corners, surfaces)
        ok[:, q] = (d > GEOM_TOL).any(axis=0)
    np.fill_diagonal(ok, False)
    return ok


def _allowed_surfaces(geom: SceneGeometry, max_rx_z: float) -> np.ndarray:
    allowed = np.ones(geom.n_surfaces, dtype=bool)
    roofs = geom.s_kind == ROOF
    allowed[roofs] = geom.s_height[roofs] < max_rx_z
    return allowed


def _cross(ax, ay, bx, by):
    return ax * by - ay * bx


def _clip_linear(lo, hi, f0, df):
    """Restrict [lo, hi] to where f0 + u*df >= 0 (vectorized over walls)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        root = -f0 / df
    lo = np.where(df > 0, np.maximum(lo, root), lo)
    hi = np.where(df < 0, np.minimum(hi, root), hi)
    dead = (df == 0) & (f0 < 0)
    return lo, np.where(dead, -np.inf, hi)


def build_image_tree(geom: SceneGeometry, source, max_depth: int, max_rx_z: float) -> ImageTree:
    """Image tree with 2-D beam pruning.

    Each node carries the horizontal beam of rays it can emit: an apex (its
    image), an optional angular window and an optional half-plane (the front
    of its last wall). A wall only becomes a child when part of it lies in
    that beam; the child's beam passes through the lit part only.
    """
    normals, offsets = geom.s_normal, geom.s_offset
    pair_ok = surface_pair_table(geom)
    allowed = _allowed_surfaces(geom, max_rx_z)
    walls = np.flatnonzero(geom.s_kind == WALL)
    wa = geom.s_a[walls]
    we = geom.s_b[walls] - wa
    source = np.asarray(source, dtype=float)
    parent, surface, depth, image = [-1], [-1], [0], [source]
    # beam: (window d0, d1) or None, (clip normal, offset) or None
    beams = [(None, None)]
    level = [0]
    pad = 1e-9
    for d in range(1, max_depth + 1):
        nxt = []
        for node in level:
            img = image[node]
            dist = normals @ img - offsets
            cand = allowed & (dist > GEOM_TOL)
            if surface[node] >= 0:
                cand &= pair_ok[surface[node]]
            window, clip = beams[node]
            # lit parameter interval of every wall
            lo = np.full(walls.size, -pad)
            hi = np.full(walls.size, 1.0 + pad)
            ax, ay = img[0], img[1]
            if clip is not None:
                g, c = clip
                lo, hi = _clip_linear(lo, hi, wa @ g - c + pad, we @ g)
            if window is not None:
                (d0x, d0y), (d1x, d1y) = window
                sgn = np.sign(_cross(d0x, d0y, d1x, d1y))
                rx_, ry_ = wa[:, 0] - ax, wa[:, 1] - ay
                lo, hi = _clip_linear(lo, hi, sgn * _cross(d0x, d0y, rx_, ry_) + pad,
                                      sgn * _cross(d0x, d0y, we[:, 0], we[:, 1]))
                lo, hi = _clip_linear(lo, hi, sgn * _cross(rx_, ry_, d1x, d1y) + pad,
                                      sgn * _cross(we[:, 0], we[:, 1], d1x, d1y))
            lit = np.zeros(geom.n_surfaces, dtype=bool)
            lit[walls] = hi - lo > 1e-12
            lit[geom.s_kind != WALL] = True
            wall_pos = np.full(geom.n_surfaces, -1)
            wall_pos[walls] = np.arange(walls.size)
            for s in np.flatnonzero(cand & lit):
                child_img = img - 2.0 * dist[s] * normals[s]
                if geom.s_kind[s] == WALL:
                    k = wall_pos[s]
                    u0, u1 = max(lo[k], 0.0), min(hi[k], 1.0)
                    p0 = wa[k] + u0 * we[k]
                    p1 = wa[k] + u1 * we[k]
                    beam = ((p0 - child_img[:2], p1 - child_img[:2]),
                            (normals[s][:2].copy(), offsets[s]))
                else:
                    beam = (window, clip)
                parent.append(node)
                surface.append(int(s))
                depth.append(d)
                image.append(child_img)
                beams.append(beam)
                nxt.append(len(parent) - 1)
        level = nxt
        if not level:
            break
    return ImageTree(
        np.asarray(parent, dtype=np.int64), np.asarray(surface, dtype=np.int64),
        np.asarray(depth, dtype=np.int64), np.asarray(image, dtype=np.float64).reshape(-1, 3),
    )


@dataclass(frozen=True, eq=False)
class EdgeTrees:
    """Reflection sequences that start on a diffracting edge.

    Per node the image of an edge point ``(x_e, y_e, z)`` is
    ``(img_x, img_y, z_sign * z + z_shift)``; ``start[e]:start[e+1]`` are the
    nodes of edge ``e``, the first one being its root.
    """

    start: np.ndarray
    parent: np.ndarray  # global node index, -1 for roots
    surface: np.ndarray
    depth: np.ndarray
    image_xy: np.ndarray
    z_sign: np.ndarray
    z_shift: np.ndarray


def build_edge_trees(geom: SceneGeometry, max_depth: int, max_rx_z: float) -> EdgeTrees:
    """Beam-pruned reflection trees rooted at each diffracting edge.

    The edge's top point stands in for the whole edge when pruning: walls are
    vertical, and any part of the edge above a roof or the ground includes
    the top.
    """
    start = [0]
    parent, surface, depth, ixy, zs, zo = [], [], [], [], [], []
    for e in range(geom.n_edges):
        x, y = geom.e_xy[e]
        tree = build_image_tree(geom, (x, y, geom.e_height[e]), max_depth, max_rx_z)
        base = len(parent)
        for i in range(len(tree)):
            p = int(tree.parent[i])
            parent.append(base + p if p >= 0 else -1)
            surface.append(int(tree.surface[i]))
            depth.append(int(tree.depth[i]))
            ixy.append(tree.image[i, :2])
            if p < 0:
                zs.append(1.0)
                zo.append(0.0)
            else:
                s = int(tree.surface[i])
                if geom.s_kind[s] == WALL:
                    zs.append(zs[base + p])
                    zo.append(zo[base + p])
                else:
                    zs.append(-zs[base + p])
                    zo.append(2 * geom.s_offset[s] - zo[base + p])
        start.append(len(parent))
    i64 = lambda v: np.asarray(v, dtype=np.int64)  # noqa: E731
    return EdgeTrees(
        i64(start), i64(parent), i64(surface), i64(depth),
        np.asarray(ixy, dtype=np.float64).reshape(-1, 2),
        np.asarray(zs, dtype=np.float64), np.asarray(zo, dtype=np.float64),
    )


def edge_source_pairs(geom: SceneGeometry, tree: ImageTree, max_pre_depth: int):
    """Image-tree nodes that can illuminate each edge, as CSR (start, nodes).

    The test is two-dimensional: walls are vertical, so a reflection chain
    that misses a wall's horizontal extent misses it at any height. Nodes
    whose incoming direction falls inside the wedge are dropped too.
    """
    start = [0]
    nodes = []
    two_pi = 2 * np.pi
    for e in range(geom.n_edges):
        ex, ey = geom.e_xy[e]
        for node in range(len(tree)):
            if tree.depth[node] > max_pre_depth:
                break
            img = tree.image[node]
            ang = (np.arctan2(img[1] - ey, img[0] - ex) - geom.e_face0_angle[e]) % two_pi
            if np.hypot(img[0] - ex, img[1] - ey) <= GEOM_TOL or ang > geom.e_n[e] * np.pi + 1e-12:
                continue
            if _chain_hits_walls_2d(geom, tree, node, ex, ey):
                nodes.append(node)
        start.append(len(nodes))
    return np.asarray(start, dtype=np.int64), np.asarray(nodes, dtype=np.int64)


def _chain_hits_walls_2d(geom, tree, node, px, py) -> bool:
    while tree.parent[node] >= 0:
        s = tree.surface[node]
        img = tree.image[node]
        if geom.s_kind[s] == WALL:
            n = geom.s_normal[s]
            dp = n[0] * px + n[1] * py - geom.s_offset[s]
            di = n[0] * img[0] + n[1] * img[1] - geom.s_offset[s]
            if dp <= GEOM_TOL or di >= 0:
                return False
            t = dp / (dp - di)
            qx, qy = px + t * (img[0] - px), py + t * (img[1] - py)
            (ax, ay), (bx, by) = geom.s_a[s], geom.s_b[s]
            ex, ey = bx - ax, by - ay
            u = ((qx - ax) * ex + (qy - ay) * ey) / (ex * ex + ey * ey)
            if u < -1e-9 or u > 1 + 1e-9:
                return False
            px, py = qx, qy
        node = tree.parent[node]
    return True
