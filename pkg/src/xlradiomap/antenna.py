"""Directional element gain of the 3GPP TR 38.901 single-element pattern.

Angles follow the zenith convention: ``theta`` is measured from the global
up-axis with boresight at ``theta = pi/2``, and ``phi`` is the azimuth measured
from the array face normal.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ValidationError


class PatternKind(str, enum.Enum):
    TR38901 = "tr38901"
    ISOTROPIC = "isotropic"


@dataclass(frozen=True)
class ElementPattern:
    kind: PatternKind = PatternKind.TR38901
    g_e_max: float = 8.0
    a_max: float = 30.0
    sla_v: float = 30.0
    theta_3db: float = math.radians(65.0)
    phi_3db: float = math.radians(65.0)

    def __post_init__(self):
        object.__setattr__(self, "kind", PatternKind(self.kind))
        for name in ("g_e_max", "a_max", "sla_v"):
            if not getattr(self, name) >= 0:
                raise ValidationError(f"{name} must be >= 0 dB")
        for name in ("theta_3db", "phi_3db"):
            if not 0 < getattr(self, name) < math.pi:
                raise ValidationError(f"{name} must lie in (0, pi)")

    @classmethod
    def isotropic(cls) -> "ElementPattern":
        return cls(PatternKind.ISOTROPIC)

    def kernel_params(self) -> tuple[float, float, float, float, float]:
        """(g_max, a_max, sla_v, kv, kh) with A_V = kv*(theta - pi/2)^2, A_H = kh*phi^2.

        The isotropic pattern collapses to all zeros, which the compiled
        kernels evaluate as a flat 0 dB gain.
        """
        if self.kind is PatternKind.ISOTROPIC:
            return 0.0, 0.0, 0.0, 0.0, 0.0
        return (
            self.g_e_max, self.a_max, self.sla_v,
            12.0 / (self.theta_3db * self.theta_3db),
            12.0 / (self.phi_3db * self.phi_3db),
        )


TR38901 = ElementPattern()
ISOTROPIC = ElementPattern.isotropic()


def _check_angles(theta, phi):
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if np.any(~(theta >= 0) | ~(theta <= math.pi)):
        raise DomainError("theta must lie in [0, pi]")
    if np.any(~(phi >= -math.pi) | ~(phi <= math.pi)):
        raise DomainError("phi must lie in [-pi, pi]")
    return theta, phi


def element_gain_db(pattern: ElementPattern, theta, phi):
    """Element gain in dBi; accepts scalars or broadcastable arrays."""
    theta, phi = _check_angles(theta, phi)
    if pattern.kind is PatternKind.ISOTROPIC:
        out = np.zeros(np.broadcast(theta, phi).shape)
    else:
        a_v = np.minimum(12.0 * ((theta - math.pi / 2) / pattern.theta_3db) ** 2, pattern.sla_v)
        a_h = np.minimum(12.0 * (phi / pattern.phi_3db) ** 2, pattern.a_max)
        out = pattern.g_e_max - np.minimum(a_v + a_h, pattern.a_max)
    return float(out) if out.ndim == 0 else out


def element_gain_linear(pattern: ElementPattern, theta, phi):
    g = element_gain_db(pattern, theta, phi)
    return 10.0 ** (np.asarray(g) / 10.0) if np.ndim(g) else 10.0 ** (g / 10.0)
