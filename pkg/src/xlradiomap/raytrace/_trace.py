"""Compiled per-receiver path validation.

Every receiver walks the whole image tree: each node is back-propagated from
the receiver toward its images, checking that every reflection point lies on
its finite surface, and then every segment is tested for occlusion. Valid
paths are written as fixed-width float records (layout below).
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from .geometry import GEOM_TOL, GROUND, ROOF, WALL, point_in_buildings, point_polygon_status, segment_occluded

KIND_LOS, KIND_REFLECTED, KIND_DIFFRACTED, KIND_MIXED = 0, 1, 2, 3

# record layout
R_KIND = 0
R_DEPTH = 1
R_NODE = 2  # image-tree node (pre-diffraction chain for diffracted paths)
R_EDGE = 3
R_POST = 4  # edge-tree node
R_P1 = 5  # 5..7: first point after the source
R_REST = 8  # length from the first point to the receiver
R_TOTAL = 9
R_GAMMA = 10  # product of reflection coefficients
R_SPRE = 11  # unfolded source-to-edge length
R_SPOST = 12  # unfolded edge-to-receiver length
R_SINB = 13
R_PHIP = 14
R_PHI = 15
R_WEDGE_N = 16
R_R0 = 17
R_RN = 18
R_NPTS = 19
R_PTS = 20
MAX_POINTS = 3
RECORD_WIDTH = R_PTS + 3 * MAX_POINTS


@njit(cache=True, nogil=True, inline="always")
def fresnel_cos(eps, cos_t):
    s2 = 1.0 - cos_t * cos_t
    root = math.sqrt(eps - s2)
    return (root - eps * cos_t) / (root + eps * cos_t)


# columns of the per-node prefilter table
Q_NX, Q_NY, Q_NZ, Q_C, Q_IX, Q_IY, Q_IZ = 0, 1, 2, 3, 4, 5, 6
Q_AX, Q_AY, Q_EX, Q_EY, Q_INVL2 = 7, 8, 9, 10, 11
Q_XLO, Q_XHI, Q_YLO, Q_YHI, Q_ZLO, Q_ZHI = 12, 13, 14, 15, 16, 17
QUICK_WIDTH = 18
PREFILTER_BLOCK = 16


@njit(cache=True, nogil=True, error_model="numpy")
def _prefilter(rxs, c0, c1, quick, hit):
    """Branch-free test of each node's last reflection against its surface bounds.

    Fills ``hit[j, node]`` for receivers ``c0 + j``. Necessary but not
    sufficient (roofs are tested against their bounding box); the root
    always passes.
    """
    nc = c1 - c0
    for i in range(quick.shape[0]):
        nx = quick[i, Q_NX]
        ny = quick[i, Q_NY]
        nz = quick[i, Q_NZ]
        c = quick[i, Q_C]
        ix = quick[i, Q_IX]
        iy = quick[i, Q_IY]
        iz = quick[i, Q_IZ]
        ax = quick[i, Q_AX]
        ay = quick[i, Q_AY]
        ex = quick[i, Q_EX]
        ey = quick[i, Q_EY]
        il2 = quick[i, Q_INVL2]
        xlo = quick[i, Q_XLO]
        xhi = quick[i, Q_XHI]
        ylo = quick[i, Q_YLO]
        yhi = quick[i, Q_YHI]
        zlo = quick[i, Q_ZLO]
        zhi = quick[i, Q_ZHI]
        di = nx * ix + ny * iy + nz * iz - c
        for j in range(nc):
            px = rxs[c0 + j, 0]
            py = rxs[c0 + j, 1]
            pz = rxs[c0 + j, 2]
            dp = nx * px + ny * py + nz * pz - c
            den = dp - di
            t = dp / den if den != 0.0 else 0.0
            qx = px + t * (ix - px)
            qy = py + t * (iy - py)
            qz = pz + t * (iz - pz)
            u = ((qx - ax) * ex + (qy - ay) * ey) * il2
            ok = (dp > GEOM_TOL) & (di < 0.0)
            ok &= (u >= -1e-9) & (u <= 1.0 + 1e-9)
            ok &= (qx >= xlo) & (qx <= xhi) & (qy >= ylo) & (qy <= yhi)
            ok &= (qz >= zlo) & (qz <= zhi)
            hit[j, i] = ok
    for j in range(nc):
        hit[j, 0] = True


def prefilter_table(parent, surface, image, s_kind, s_normal, s_offset, s_a, s_b, s_height,
                    s_building, b_bbox):
    """Per-node prefilter rows (see ``_prefilter``)."""
    n = parent.shape[0]
    q = np.zeros((n, QUICK_WIDTH))
    big = 1e300
    q[:, Q_XLO] = q[:, Q_YLO] = q[:, Q_ZLO] = -big
    q[:, Q_XHI] = q[:, Q_YHI] = q[:, Q_ZHI] = big
    for i in range(1, n):
        s = surface[i]
        q[i, Q_NX:Q_C] = s_normal[s]
        q[i, Q_C] = s_offset[s]
        q[i, Q_IX:Q_AX] = image[i]
        pad = 1e-9
        if s_kind[s] == WALL:
            ax, ay = s_a[s]
            ex, ey = s_b[s] - s_a[s]
            q[i, Q_AX], q[i, Q_AY], q[i, Q_EX], q[i, Q_EY] = ax, ay, ex, ey
            q[i, Q_INVL2] = 1.0 / (ex * ex + ey * ey)
            q[i, Q_ZLO], q[i, Q_ZHI] = -pad, s_height[s] + pad
        elif s_kind[s] == ROOF:
            x0, y0, x1, y1 = b_bbox[s_building[s]]
            q[i, Q_XLO], q[i, Q_XHI], q[i, Q_YLO], q[i, Q_YHI] = x0 - pad, x1 + pad, y0 - pad, y1 + pad
    return q


@njit(cache=True, nogil=True)
def _on_surface(s, qx, qy, qz, s_kind, s_a, s_b, s_height, s_building, b_start, vx, vy):
    kind = s_kind[s]
    if kind == GROUND:
        return True
    if kind == WALL:
        if qz < -1e-9 or qz > s_height[s] + 1e-9:
            return False
        ax = s_a[s, 0]
        ay = s_a[s, 1]
        ex = s_b[s, 0] - ax
        ey = s_b[s, 1] - ay
        u = ((qx - ax) * ex + (qy - ay) * ey) / (ex * ex + ey * ey)
        return u >= -1e-9 and u <= 1.0 + 1e-9
    b = s_building[s]
    return point_polygon_status(qx, qy, vx, vy, b_start[b], b_start[b + 1], 1e-9) >= 0


@njit(cache=True, nogil=True)
def _reflect_coeff(s, cos_t, s_kind, s_eps):
    if s_kind[s] == ROOF:
        return -1.0
    return fresnel_cos(s_eps[s], cos_t)


@njit(cache=True, nogil=True)
def _backprop(px, py, pz, node, parent, surface, image, s_kind, s_normal, s_offset,
              s_a, s_b, s_height, s_building, s_eps, b_start, vx, vy, pts, first):
    """Walk ``node``'s chain from point p toward the source images.

    Writes reflection points into ``pts[first + depth - 1]`` down to
    ``pts[first]``; returns (ok, product of reflection coefficients).
    """
    gamma = 1.0
    cur = node
    k = first
    while parent[cur] >= 0:
        k += 1
        cur = parent[cur]
    cur = node
    while parent[cur] >= 0:
        s = surface[cur]
        nx = s_normal[s, 0]
        ny = s_normal[s, 1]
        nz = s_normal[s, 2]
        c = s_offset[s]
        dp = nx * px + ny * py + nz * pz - c
        if dp <= GEOM_TOL:
            return False, gamma
        ix = image[cur, 0]
        iy = image[cur, 1]
        iz = image[cur, 2]
        di = nx * ix + ny * iy + nz * iz - c
        if di >= 0.0:
            return False, gamma
        t = dp / (dp - di)
        qx = px + t * (ix - px)
        qy = py + t * (iy - py)
        qz = pz + t * (iz - pz)
        if not _on_surface(s, qx, qy, qz, s_kind, s_a, s_b, s_height, s_building, b_start, vx, vy):
            return False, gamma
        seg = math.sqrt((px - qx) ** 2 + (py - qy) ** 2 + (pz - qz) ** 2)
        gamma *= _reflect_coeff(s, min(dp / seg, 1.0), s_kind, s_eps)
        k -= 1
        pts[k, 0] = qx
        pts[k, 1] = qy
        pts[k, 2] = qz
        px = qx
        py = qy
        pz = qz
        cur = parent[cur]
    return True, gamma


@njit(cache=True, nogil=True)
def _chain_clear(sx, sy, sz, pts, npts, rx, ry, rz, b_start, vx, vy, b_height, b_bbox, buf):
    ax = sx
    ay = sy
    az = sz
    for i in range(npts):
        if segment_occluded(ax, ay, az, pts[i, 0], pts[i, 1], pts[i, 2],
                            b_start, vx, vy, b_height, b_bbox, buf):
            return False
        ax = pts[i, 0]
        ay = pts[i, 1]
        az = pts[i, 2]
    return not segment_occluded(ax, ay, az, rx, ry, rz, b_start, vx, vy, b_height, b_bbox, buf)


@njit(cache=True, nogil=True)
def _store(out, base, cap, cnt, rec):
    """Append ``rec`` to a cell's buffer, evicting the weakest when full."""
    proxy = abs(rec[R_GAMMA]) / rec[R_TOTAL]
    if cnt < cap:
        out[base + cnt, :] = rec
        return cnt + 1
    worst = -1
    wval = proxy
    for j in range(cap):
        r = out[base + j]
        v = abs(r[R_GAMMA]) / r[R_TOTAL]
        if v < wval:
            wval = v
            worst = j
    if worst >= 0:
        out[base + worst, :] = rec
    return cnt


@njit(cache=True, nogil=True)
def _finish_record(rec, sx, sy, sz, pts, npts, rx, ry, rz):
    total = 0.0
    ax = sx
    ay = sy
    az = sz
    for i in range(npts):
        total += math.sqrt((pts[i, 0] - ax) ** 2 + (pts[i, 1] - ay) ** 2 + (pts[i, 2] - az) ** 2)
        ax = pts[i, 0]
        ay = pts[i, 1]
        az = pts[i, 2]
        rec[R_PTS + 3 * i] = ax
        rec[R_PTS + 3 * i + 1] = ay
        rec[R_PTS + 3 * i + 2] = az
    total += math.sqrt((rx - ax) ** 2 + (ry - ay) ** 2 + (rz - az) ** 2)
    if npts > 0:
        p1x = pts[0, 0]
        p1y = pts[0, 1]
        p1z = pts[0, 2]
    else:
        p1x = rx
        p1y = ry
        p1z = rz
    first = math.sqrt((p1x - sx) ** 2 + (p1y - sy) ** 2 + (p1z - sz) ** 2)
    rec[R_P1] = p1x
    rec[R_P1 + 1] = p1y
    rec[R_P1 + 2] = p1z
    rec[R_TOTAL] = total
    rec[R_REST] = max(total - first, 0.0) if npts > 0 else 0.0
    rec[R_NPTS] = npts


@njit(cache=True, nogil=True)
def _wedge_angle(px, py, ex, ey, face0):
    a = math.atan2(py - ey, px - ex) - face0
    two_pi = 2.0 * math.pi
    a = a - two_pi * math.floor(a / two_pi)
    return a


@njit(cache=True, nogil=True)
def trace_cells(
    rxs, src, max_depth, cap,
    parent, surface, depth, image, quick,
    s_kind, s_normal, s_offset, s_a, s_b, s_height, s_building, s_eps,
    b_start, vx, vy, b_height, b_bbox,
    diffraction,
    e_xy, e_height, e_n, e_face0, e_f0, e_fn,
    pre_start, pre_nodes,
    et_start, et_parent, et_surface, et_depth, et_xy, et_sign, et_shift,
    out, counts, invalid,
):
    n_nodes = parent.shape[0]
    nb = b_start.shape[0] - 1
    maxv = 4
    for b in range(nb):
        maxv = max(maxv, b_start[b + 1] - b_start[b] + 2)
    buf = np.empty(maxv)
    pts = np.empty((MAX_POINTS + 1, 3))
    post = np.empty((MAX_POINTS + 1, 3))
    rec = np.zeros(RECORD_WIDTH)
    hit = np.empty((PREFILTER_BLOCK, n_nodes), dtype=np.bool_)
    sx = src[0]
    sy = src[1]
    sz = src[2]
    for ci in range(rxs.shape[0]):
        rx = rxs[ci, 0]
        ry = rxs[ci, 1]
        rz = rxs[ci, 2]
        counts[ci] = 0
        base = ci * cap
        if ci % PREFILTER_BLOCK == 0:
            _prefilter(rxs, ci, min(ci + PREFILTER_BLOCK, rxs.shape[0]), quick, hit)
        if point_in_buildings(rx, ry, rz, b_start, vx, vy, b_height, b_bbox) >= 0:
            invalid[ci] = True
            continue
        cnt = 0
        row = ci % PREFILTER_BLOCK
        for node in range(n_nodes):
            if not hit[row, node]:
                continue
            d = depth[node]
            ok, gamma = _backprop(rx, ry, rz, node, parent, surface, image, s_kind, s_normal,
                                  s_offset, s_a, s_b, s_height, s_building, s_eps,
                                  b_start, vx, vy, pts, 0)
            if not ok:
                continue
            if not _chain_clear(sx, sy, sz, pts, d, rx, ry, rz, b_start, vx, vy, b_height, b_bbox, buf):
                continue
            rec[:] = 0.0
            rec[R_KIND] = KIND_LOS if d == 0 else KIND_REFLECTED
            rec[R_DEPTH] = d
            rec[R_NODE] = node
            rec[R_EDGE] = -1
            rec[R_POST] = -1
            rec[R_GAMMA] = gamma
            _finish_record(rec, sx, sy, sz, pts, d, rx, ry, rz)
            cnt = _store(out, base, cap, cnt, rec)
        if diffraction:
            cnt = _diffraction_paths(
                rx, ry, rz, sx, sy, sz, max_depth, cap, base, cnt,
                parent, surface, depth, image,
                s_kind, s_normal, s_offset, s_a, s_b, s_height, s_building, s_eps,
                b_start, vx, vy, b_height, b_bbox,
                e_xy, e_height, e_n, e_face0, e_f0, e_fn,
                pre_start, pre_nodes,
                et_start, et_parent, et_surface, et_depth, et_xy, et_sign, et_shift,
                out, buf, pts, post, rec,
            )
        counts[ci] = cnt


@njit(cache=True, nogil=True)
def _diffraction_paths(
    rx, ry, rz, sx, sy, sz, max_depth, cap, base, cnt,
    parent, surface, depth, image,
    s_kind, s_normal, s_offset, s_a, s_b, s_height, s_building, s_eps,
    b_start, vx, vy, b_height, b_bbox,
    e_xy, e_height, e_n, e_face0, e_f0, e_fn,
    pre_start, pre_nodes,
    et_start, et_parent, et_surface, et_depth, et_xy, et_sign, et_shift,
    out, buf, pts, post, rec,
):
    n_edges = e_xy.shape[0]
    for e in range(n_edges):
        ex = e_xy[e, 0]
        ey = e_xy[e, 1]
        he = e_height[e]
        wedge_limit = e_n[e] * math.pi
        for pi in range(pre_start[e], pre_start[e + 1]):
            p = pre_nodes[pi]
            dpre = depth[p]
            ix = image[p, 0]
            iy = image[p, 1]
            iz = image[p, 2]
            rho_s = math.sqrt((ix - ex) ** 2 + (iy - ey) ** 2)
            for q in range(et_start[e], et_start[e + 1]):
                dpost = et_depth[q]
                if dpre + 1 + dpost > max_depth:
                    continue
                qx = et_xy[q, 0]
                qy = et_xy[q, 1]
                rho_r = math.sqrt((rx - qx) ** 2 + (ry - qy) ** 2)
                if rho_s + rho_r <= 0.0:
                    continue
                z_target = et_sign[q] * (rz - et_shift[q])
                zq = iz + (z_target - iz) * rho_s / (rho_s + rho_r)
                if zq < 0.0 or zq > he:
                    continue
                # post chain: from the receiver back to the edge point
                px = rx
                py = ry
                pz = rz
                gamma = 1.0
                ok = True
                k = dpost
                cur = q
                while et_parent[cur] >= 0:
                    s = et_surface[cur]
                    nx = s_normal[s, 0]
                    ny = s_normal[s, 1]
                    nz = s_normal[s, 2]
                    c = s_offset[s]
                    dp = nx * px + ny * py + nz * pz - c
                    tx_ = et_xy[cur, 0]
                    ty_ = et_xy[cur, 1]
                    tz_ = et_sign[cur] * zq + et_shift[cur]
                    di = nx * tx_ + ny * ty_ + nz * tz_ - c
                    if dp <= GEOM_TOL or di >= 0.0:
                        ok = False
                        break
                    t = dp / (dp - di)
                    hx = px + t * (tx_ - px)
                    hy = py + t * (ty_ - py)
                    hz = pz + t * (tz_ - pz)
                    if not _on_surface(s, hx, hy, hz, s_kind, s_a, s_b, s_height, s_building,
                                       b_start, vx, vy):
                        ok = False
                        break
                    seg = math.sqrt((px - hx) ** 2 + (py - hy) ** 2 + (pz - hz) ** 2)
                    gamma *= _reflect_coeff(s, min(dp / seg, 1.0), s_kind, s_eps)
                    k -= 1
                    post[k, 0] = hx
                    post[k, 1] = hy
                    post[k, 2] = hz
                    px = hx
                    py = hy
                    pz = hz
                    cur = et_parent[cur]
                if not ok:
                    continue
                # outgoing direction must leave through the wedge exterior
                phi = _wedge_angle(px, py, ex, ey, e_face0[e])
                if phi > wedge_limit or (px - ex) ** 2 + (py - ey) ** 2 <= GEOM_TOL * GEOM_TOL:
                    continue
                okp, gpre = _backprop(ex, ey, zq, p, parent, surface, image, s_kind, s_normal,
                                      s_offset, s_a, s_b, s_height, s_building, s_eps,
                                      b_start, vx, vy, pts, 0)
                if not okp:
                    continue
                npts = dpre + 1 + dpost
                pts[dpre, 0] = ex
                pts[dpre, 1] = ey
                pts[dpre, 2] = zq
                for j in range(dpost):
                    pts[dpre + 1 + j, 0] = post[j, 0]
                    pts[dpre + 1 + j, 1] = post[j, 1]
                    pts[dpre + 1 + j, 2] = post[j, 2]
                if not _chain_clear(sx, sy, sz, pts, npts, rx, ry, rz, b_start, vx, vy,
                                    b_height, b_bbox, buf):
                    continue
                s_pre = math.sqrt(rho_s * rho_s + (zq - iz) ** 2)
                s_post = math.sqrt(rho_r * rho_r + (z_target - zq) ** 2)
                if s_pre <= 0.0 or s_post <= 0.0:
                    continue
                phip = _wedge_angle(ix, iy, ex, ey, e_face0[e])
                rec[:] = 0.0
                rec[R_KIND] = KIND_DIFFRACTED if npts == 1 else KIND_MIXED
                rec[R_DEPTH] = npts
                rec[R_NODE] = p
                rec[R_EDGE] = e
                rec[R_POST] = q
                rec[R_GAMMA] = gamma * gpre
                rec[R_SPRE] = s_pre
                rec[R_SPOST] = s_post
                rec[R_SINB] = rho_s / s_pre
                rec[R_PHIP] = phip
                rec[R_PHI] = phi
                rec[R_WEDGE_N] = e_n[e]
                gi0 = abs(0.5 * math.pi - phip)
                gin = abs(0.5 * math.pi - (e_n[e] * math.pi - phi))
                rec[R_R0] = fresnel_cos(s_eps[e_f0[e]], math.cos(min(gi0, 0.5 * math.pi)))
                rec[R_RN] = fresnel_cos(s_eps[e_fn[e]], math.cos(min(gin, 0.5 * math.pi)))
                _finish_record(rec, sx, sy, sz, pts, npts, rx, ry, rz)
                cnt = _store(out, base, cap, cnt, rec)
    return cnt
