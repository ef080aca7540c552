"""Independent reference implementations used by the tests.

These deliberately avoid the package's kernels and geometry code: plain
numpy loops, shapely for polygons, textbook closed forms.
"""

from __future__ import annotations

import math

import numpy as np
import shapely
from shapely.geometry import LineString, Polygon

C = 3.0e8


def friis_dbm(p_t_mw, gain_dbi, r, f):
    lam = C / f
    fspl = 20 * math.log10(4 * math.pi * r / lam)
    return 10 * math.log10(p_t_mw) + gain_dbi - fspl


def fresnel_vertical(eps, theta):
    s = math.sin(theta)
    c = math.cos(theta) if theta < math.pi / 2 else 0.0
    root = math.sqrt(eps - s * s)
    return (root - eps * c) / (root + eps * c)


def gain_38901_db(theta, phi, gmax=8.0, amax=30.0, slav=30.0, hpbw=math.radians(65)):
    av = min(12 * ((theta - math.pi / 2) / hpbw) ** 2, slav)
    ah = min(12 * (phi / hpbw) ** 2, amax)
    return gmax - min(av + ah, amax)


def array_field(rows, cols, f, beam_az, rx, tx, isotropic=False):
    """Beamformed complex sum with explicit per-element loops."""
    lam = C / f
    d = lam / 2
    n = rows * cols
    acc = 0j
    for r in range(rows):
        for c in range(cols):
            pv = r - (rows - 1) / 2
            ph = c - (cols - 1) / 2
            e = (tx[0], tx[1] + ph * d, tx[2] - pv * d)
            dx, dy, dz = rx[0] - e[0], rx[1] - e[1], rx[2] - e[2]
            dist = math.sqrt(dx * dx + dy * dy + dz * dz)
            theta = math.pi / 2 - math.atan2(dz, math.hypot(dx, dy))
            # azimuth is undefined on the vertical axis; the convention there is 0
            phi = math.atan2(-dy, dx) if (dx or dy) else 0.0
            g = 1.0 if isotropic else 10 ** (gain_38901_db(theta, phi) / 10)
            w = np.exp(1j * math.pi * ph * math.sin(beam_az)) / math.sqrt(n)
            acc += np.conj(w) * math.sqrt(g) * np.exp(2j * math.pi * dist / lam) / dist
    return acc


def power_dbm(field, f, p_t_mw=1.0):
    lam = C / f
    return 10 * math.log10(lam * lam / (4 * math.pi) ** 2 * p_t_mw * abs(field) ** 2)


def two_ray_dbm(rho, h_t, h_r, f, eps, p_t_mw=1.0):
    lam = C / f
    k = 2 * math.pi / lam
    r1 = math.hypot(rho, h_t - h_r)
    r2 = math.hypot(rho, h_t + h_r)
    theta = math.atan2(rho, h_t + h_r)
    refl = fresnel_vertical(eps, theta)
    e = np.exp(1j * k * r1) / r1 + refl * np.exp(1j * k * r2) / r2
    return 10 * math.log10(p_t_mw * lam * lam / (4 * math.pi) ** 2 * abs(e) ** 2)


def segment_blocked(a, b, buildings, tol=1e-6):
    """True if the open segment a-b passes through the interior of any prism.

    The segment's ground projection is clipped against each footprint with
    shapely; along every clipped piece the segment height is linear, so the
    piece is inside the prism iff its lower end is below the roof.
    """
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    d2 = b[:2] - a[:2]
    line = LineString([a[:2], b[:2]])
    seglen2 = float(d2 @ d2)
    for bld in buildings:
        poly = Polygon(bld.footprint)
        if seglen2 < 1e-18:
            if poly.contains(shapely.Point(a[:2])) and min(a[2], b[2]) < bld.height - tol:
                return True
            continue
        inter = poly.intersection(line)
        if inter.is_empty:
            continue
        geoms = getattr(inter, "geoms", [inter])
        for g in geoms:
            if g.geom_type != "LineString" or g.length < tol:
                continue
            coords = np.asarray(g.coords)
            t = (coords - a[:2]) @ d2 / seglen2
            t0, t1 = t.min(), t.max()
            # pieces running along a wall are boundary contact, not interior
            mid = a[:2] + 0.5 * (t0 + t1) * d2
            if not poly.buffer(-tol).contains(shapely.Point(mid)):
                continue
            z0 = a[2] + t0 * (b[2] - a[2])
            z1 = a[2] + t1 * (b[2] - a[2])
            if min(z0, z1) < bld.height - tol:
                return True
    return False


def scene_surfaces(scene):
    """(kind, normal, offset, extra) for ground, then per building walls and roof."""
    out = []
    if scene.ground_material is not None:
        out.append(("ground", np.array([0.0, 0.0, 1.0]), 0.0, None))
    for b in scene.buildings:
        fp = b.footprint
        for i in range(len(fp)):
            a, c = np.array(fp[i]), np.array(fp[(i + 1) % len(fp)])
            e = c - a
            n = np.array([e[1], -e[0], 0.0]) / np.hypot(*e)
            out.append(("wall", n, float(n[:2] @ a), (a, c, b.height)))
        out.append(("roof", np.array([0.0, 0.0, 1.0]), b.height, Polygon(fp)))
    return out


def _on_surface(surf, q, tol=1e-7):
    kind, _, _, extra = surf
    if kind == "ground":
        return True
    if kind == "wall":
        a, c, h = extra
        e = c - a
        u = (q[:2] - a) @ e / (e @ e)
        return -tol <= u <= 1 + tol and -tol <= q[2] <= h + tol
    return extra.buffer(tol).contains(shapely.Point(q[:2]))


def brute_force_specular(scene, src, rx, max_depth):
    """Every specular path up to ``max_depth`` by exhaustive image enumeration.

    Returns a dict {surface-index sequence: (total length, points)}.
    """
    import itertools

    surfs = scene_surfaces(scene)
    src = np.asarray(src, float)
    rx = np.asarray(rx, float)
    found = {}
    if not segment_blocked(src, rx, scene.buildings):
        found[()] = (float(np.linalg.norm(rx - src)), [])
    for depth in range(1, max_depth + 1):
        for seq in itertools.product(range(len(surfs)), repeat=depth):
            if any(seq[i] == seq[i + 1] for i in range(depth - 1)):
                continue
            images = [src]
            for s in seq:
                _, n, c, _ = surfs[s]
                p = images[-1]
                images.append(p - 2 * (n @ p - c) * n)
            pts = []
            p = rx
            ok = True
            for i in range(depth, 0, -1):
                _, n, c, _ = surfs[seq[i - 1]]
                img = images[i]
                dp = n @ p - c
                di = n @ img - c
                if dp <= 1e-9 or di >= 0:
                    ok = False
                    break
                t = dp / (dp - di)
                q = p + t * (img - p)
                if not _on_surface(surfs[seq[i - 1]], q):
                    ok = False
                    break
                pts.append(q)
                p = q
            if not ok:
                continue
            pts = pts[::-1]
            chain = [src, *pts, rx]
            if any(segment_blocked(chain[i], chain[i + 1], scene.buildings) for i in range(len(chain) - 1)):
                continue
            length = sum(float(np.linalg.norm(chain[i + 1] - chain[i])) for i in range(len(chain) - 1))
            found[seq] = (length, pts)
    return found
