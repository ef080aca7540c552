"""Reflection and diffraction coefficients.

Phases follow the channel convention used throughout the package, where a
wave travelling a distance r picks up ``exp(+j k r)``. Textbook UTD formulas
are written for ``exp(-j k r)``; the diffraction coefficient returned here is
their complex conjugate.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import modfresnelm

from ..errors import DomainError, GeometryError


def fresnel_reflection(eps_r, theta_i):
    """Lossless Fresnel coefficient for vertical polarization.

    ``theta_i`` is the incidence angle from the surface normal, in [0, pi/2].
    """
    eps_r = np.asarray(eps_r, dtype=float)
    theta_i = np.asarray(theta_i, dtype=float)
    if np.any(~(theta_i >= 0) | ~(theta_i <= math.pi / 2 + 1e-12)):
        raise DomainError("incidence angle must lie in [0, pi/2]")
    s2 = np.sin(theta_i) ** 2
    if np.any(eps_r <= s2):
        raise DomainError("relative permittivity must exceed sin^2(theta_i)")
    c = np.cos(theta_i)
    # cos(pi/2) is ~6e-17 in floating point; grazing incidence is exactly +1
    c = np.where(theta_i >= math.pi / 2, 0.0, c)
    root = np.sqrt(eps_r - s2)
    out = (root - eps_r * c) / (root + eps_r * c)
    return float(out) if out.ndim == 0 else out


def pseudo_brewster_angle(eps_r: float) -> float:
    """Zero of the vertical-polarization coefficient: tan(theta_B) = sqrt(eps_r)."""
    return math.atan(math.sqrt(eps_r))


def transition_function(x):
    """Kouyoumjian-Pathak transition function F(x) for x >= 0 (exp(+j w t) form)."""
    x = np.asarray(x, dtype=float)
    sx = np.sqrt(np.maximum(x, 0.0))
    fm, _ = modfresnelm(sx)
    return 2j * sx * np.exp(1j * x) * fm


def _a_pm(beta, n, sign):
    """a^(+/-)(beta) = 2 cos^2((2 n pi N - beta)/2) with N the nearest integer solution."""
    big_n = np.round((beta + sign * math.pi) / (2 * n * math.pi))
    return 2.0 * np.cos((2 * n * math.pi * big_n - beta) / 2.0) ** 2


_EDGE_EPS = 1e-9


def _cot_term(beta, n, sign, kl):
    """cot((pi + sign*beta)/(2n)) * F(k L a^sign(beta)), stable near boundaries."""
    ang = (math.pi + sign * beta) / (2 * n)
    s = np.sin(ang)
    # on a shadow/reflection boundary the product has a finite one-sided
    # limit; nudge beta off the singular point to evaluate it
    near = np.abs(s) < _EDGE_EPS
    if np.any(near):
        beta = np.where(near, beta + 1e3 * _EDGE_EPS, beta)
        ang = (math.pi + sign * beta) / (2 * n)
        s = np.sin(ang)
    cot = np.cos(ang) / s
    return cot * transition_function(kl * _a_pm(beta, n, sign))


def utd_diffraction(
    n, phi, phi_p, s_pre, s_post, wavelength, sin_beta0=1.0, r0=-1.0, rn=-1.0,
):
    """Kouyoumjian-Pathak wedge diffraction coefficient with Luebbers' lossy faces.

    ``n`` is the exterior wedge index (interior angle = (2 - n) pi), ``phi_p``
    and ``phi`` the incidence and diffraction angles measured from the 0-face
    through the exterior, ``s_pre``/``s_post`` the unfolded distances to and
    from the edge. ``r0``/``rn`` are the face reflection coefficients
    (-1 and -1 recover the perfectly conducting soft wedge).

    Returns the complex coefficient D (units sqrt(m)).
    """
    n = np.asarray(n, dtype=float)
    if np.any(n <= 1.0) or np.any(n > 2.0):
        raise GeometryError("wedge index must satisfy 1 < n <= 2 (interior angle in [0, pi))")
    phi = np.asarray(phi, dtype=float)
    phi_p = np.asarray(phi_p, dtype=float)
    k = 2 * math.pi / wavelength
    ell = np.asarray(s_pre) * np.asarray(s_post) / (np.asarray(s_pre) + np.asarray(s_post))
    ell = ell * np.asarray(sin_beta0) ** 2
    kl = k * ell
    bm = phi - phi_p
    bp = phi + phi_p
    total = (
        _cot_term(bm, n, +1, kl)
        + _cot_term(bm, n, -1, kl)
        + r0 * _cot_term(bp, n, -1, kl)
        + rn * _cot_term(bp, n, +1, kl)
    )
    pre = -np.exp(-1j * math.pi / 4) / (2 * n * np.sqrt(2 * math.pi * k) * np.asarray(sin_beta0))
    d = np.conj(pre * total)
    return complex(d) if np.ndim(d) == 0 else d


def diffraction_gamma(d, s_pre, s_post):
    """Path-interaction factor so that the diffracted field is e^{jk(s+s')}/(s+s') times it."""
    s_pre = np.asarray(s_pre, dtype=float)
    s_post = np.asarray(s_post, dtype=float)
    return d * np.sqrt((s_pre + s_post) / (s_pre * s_post))
