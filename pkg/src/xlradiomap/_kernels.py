"""Compiled inner loops for coherent array combining.

The hot loop evaluates, for each ray i (a point plus an extra path length
beyond it), the beamformed sum

    g_i = sum_n conj(w_n) * sqrt(G(theta_ni, phi_ni)) * exp(j k r_ni) / r_ni

with ``r_ni = |e_n - t_i| + extra_i``. Elementary functions are replaced by
branch-free polynomial versions (Cephes coefficients) so the loop over rays
vectorizes; each is accurate to a few ulp over the ranges used here.

Work is split into fixed-size chunks of rays that do not depend on the
thread count, and every ray is reduced over elements in row-major order, so
results are bitwise identical for any number of threads.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from numba import njit

THREADS_ENV = "XLRADIOMAP_THREADS"
CHUNK = 1024

_FM = {"contract"}
_PIO2 = 1.5707963267948966
_PIO4 = 0.7853981633974483
_MOREBITS = 6.123233995736765886130e-17
_T3P8 = 2.41421356237309504880
_DB_TO_NP_AMP = math.log(10.0) / 20.0
# exp_small keeps ~1e-15 relative accuracy for |x| <= 4
_FAST_EXP_LIMIT = 4.0


def default_threads() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


@njit(inline="always", error_model="numpy", fastmath=_FM)
def atan2_fast(y, x):
    ax = abs(x)
    ay = abs(y)
    big = ay > _T3P8 * ax
    mid = ay > 0.66 * ax
    num = -ax if big else (ay - ax if mid else ay)
    den = ay if big else (ay + ax if mid else ax)
    t = num / max(den, 1e-300)
    off = (_PIO2 + _MOREBITS) if big else ((_PIO4 + 0.5 * _MOREBITS) if mid else 0.0)
    z = t * t
    p = ((((-8.750608600031904122785e-01 * z - 1.615753718733365076637e1) * z
           - 7.500855792314704667340e1) * z - 1.228866684490136173410e2) * z
         - 6.485021904942025371773e1)
    q = (((((z + 2.485846490142306297962e1) * z + 1.650270098316988542046e2) * z
           + 4.328810604912902668951e2) * z + 4.853903996359136964868e2) * z
         + 1.945506571482613964425e2)
    a = off + (t * z * p / q + t)
    a = math.pi - a if x < 0 else a
    return -a if y < 0 else a


@njit(inline="always", error_model="numpy", fastmath=_FM)
def exp_small(x):
    t = x * 0.125
    p = 1.0 + t * (1.0 + t * (0.5 + t * (1 / 6 + t * (1 / 24 + t * (1 / 120 + t * (
        1 / 720 + t * (1 / 5040 + t * (1 / 40320 + t * (1 / 362880 + t * (
            1 / 3628800 + t * (1 / 39916800 + t * (1 / 479001600))))))))))))
    p = p * p
    p = p * p
    return p * p


@njit(inline="always", error_model="numpy", fastmath=_FM)
def sincos_cycles(f):
    """(cos 2*pi*f, sin 2*pi*f)."""
    g = f - np.floor(f + 0.5)
    q = np.floor(4.0 * g + 0.5)
    a = (g - 0.25 * q) * 6.283185307179586
    z = a * a
    s = a + a * z * (((((1.58962301576546568060e-10 * z - 2.50507477628578072866e-8) * z
                        + 2.75573136213857245213e-6) * z - 1.98412698295895385996e-4) * z
                      + 8.33333333332211858878e-3) * z - 1.66666666666666307295e-1)
    c = 1.0 - 0.5 * z + z * z * (((((-1.13585365213876817300e-11 * z + 2.08757008419747316778e-9) * z
                                    - 2.75573141792967388112e-7) * z + 2.48015872888517045348e-5) * z
                                  - 1.38888888888730564116e-3) * z + 4.16666666666665929218e-2)
    cc = c if q == 0.0 else (-s if q == 1.0 else (s if q == -1.0 else -c))
    ss = s if q == 0.0 else (c if q == 1.0 else (-c if q == -1.0 else -s))
    return cc, ss


def _make_combine(fast_exp: bool):
    @njit(nogil=True, error_model="numpy", fastmath=_FM, cache=True)
    def combine(ex, cy, rz, wr, wi, tx, ty, tz, extra, inv_lam,
                gmax, amax, slav, kv, kh, acc_re, acc_im, ah_buf, rho2_buf, rho_buf):
        n_rays = tx.shape[0]
        ncol = cy.shape[0]
        for c in range(ncol):
            eyc = cy[c]
            for i in range(n_rays):
                dx = tx[i] - ex
                dy = ty[i] - eyc
                phi = atan2_fast(-dy, dx)
                ah_buf[i] = min(kh * (phi * phi), amax)
                r2 = dx * dx + dy * dy
                rho2_buf[i] = r2
                rho_buf[i] = math.sqrt(r2)
            for r in range(rz.shape[0]):
                ezr = rz[r]
                a = wr[r * ncol + c]
                b = wi[r * ncol + c]
                for i in range(n_rays):
                    dz = tz[i] - ezr
                    dist = math.sqrt(rho2_buf[i] + dz * dz)
                    el = atan2_fast(dz, rho_buf[i])
                    av = min(kv * (el * el), slav)
                    gdb = gmax - min(av + ah_buf[i], amax)
                    if fast_exp:
                        amp = exp_small(gdb * _DB_TO_NP_AMP)
                    else:
                        amp = math.exp(gdb * _DB_TO_NP_AMP)
                    rr = dist + extra[i]
                    cs, sn = sincos_cycles(rr * inv_lam)
                    m = amp * (1.0 / rr)
                    hr = m * cs
                    hi = m * sn
                    # conj(w) * h
                    acc_re[i] += a * hr + b * hi
                    acc_im[i] += a * hi - b * hr
    return combine


_combine_fast = _make_combine(True)
_combine_generic = _make_combine(False)


def run_chunked(fn, n: int, threads: int | None = None, chunk: int = CHUNK):
    """Call ``fn(start, stop)`` over fixed chunks of ``range(n)``.

    Chunk boundaries never depend on ``threads``; ``fn`` must write its
    results into disjoint slices.
    """
    threads = default_threads() if threads is None else max(1, int(threads))
    bounds = [(s, min(s + chunk, n)) for s in range(0, n, chunk)]
    if threads == 1 or len(bounds) <= 1:
        for s, e in bounds:
            fn(s, e)
        return
    with ThreadPoolExecutor(max_workers=min(threads, len(bounds))) as pool:
        for fut in [pool.submit(fn, s, e) for s, e in bounds]:
            fut.result()


def beamformed_rays(config, weights, center, px, py, pz, extra=None, threads=None):
    """Beamformed sums ``g_i`` for rays starting at points ``p`` (see module doc).

    ``center`` is the array center; ``extra`` is the path length still to
    travel beyond each point (zero for direct line-of-sight).
    """
    from .array import index_offsets

    px = np.ascontiguousarray(px, dtype=np.float64).ravel()
    py = np.ascontiguousarray(py, dtype=np.float64).ravel()
    pz = np.ascontiguousarray(pz, dtype=np.float64).ravel()
    n = px.size
    extra = (np.zeros(n) if extra is None
             else np.ascontiguousarray(extra, dtype=np.float64).ravel())
    d = config.spacing
    cy = float(center[1]) + (np.arange(config.n_cols) - (config.n_cols - 1) / 2.0) * d
    rz = float(center[2]) - (np.arange(config.n_rows) - (config.n_rows - 1) / 2.0) * d
    w = np.asarray(weights, dtype=complex)
    wr = np.ascontiguousarray(w.real)
    wi = np.ascontiguousarray(w.imag)
    gmax, amax, slav, kv, kh = config.element_pattern.kernel_params()
    fast = max(abs(gmax), abs(gmax - amax)) * _DB_TO_NP_AMP <= _FAST_EXP_LIMIT
    kernel = _combine_fast if fast else _combine_generic
    ex = float(center[0])
    inv_lam = 1.0 / config.wavelength
    acc_re = np.zeros(n)
    acc_im = np.zeros(n)

    def work(s, e):
        m = e - s
        kernel(ex, cy, rz, wr, wi, px[s:e], py[s:e], pz[s:e], extra[s:e], inv_lam,
               gmax, amax, slav, kv, kh, acc_re[s:e], acc_im[s:e],
               np.empty(m), np.empty(m), np.empty(m))

    run_chunked(work, n, threads)
    return acc_re + 1j * acc_im
