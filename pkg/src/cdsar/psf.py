"""Closed-form coordinate-delay point spread function and ambiguity geometry."""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from cdsar.special import phi, sinc

C_LIGHT = 299_792_458.0


class RadarConfigWarning(UserWarning):
    pass


@dataclass(frozen=True)
class RadarConfig:
    """Physical radar and acquisition parameters.

    Frequencies are angular (rad/s). ``N`` is the number of pulses and ``R``
    the standoff range of the circular-arc trajectory.
    """

    omega0: float
    B: float
    tau: float
    phiT: float
    theta: float
    N: float
    R: float = 1.0e4

    def __post_init__(self):
        for name in ("omega0", "B", "tau", "phiT", "N", "R"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val > 0):
                raise ValueError(f"{name} must be positive and finite, got {val!r}")
        if not 0.0 < self.theta <= math.pi / 2:
            raise ValueError(f"theta must be in (0, pi/2], got {self.theta!r}")
        if self.phiT > 0.5:
            raise ValueError(f"phiT must be <= 0.5 (narrow aperture), got {self.phiT!r}")
        if self.B / self.omega0 > 0.1:
            warnings.warn(
                f"B/omega0 = {self.B / self.omega0:.3g} > 0.1; narrowband closed form is marginal",
                RadarConfigWarning,
                stacklevel=3,
            )
        if self.B * self.tau < 100:
            warnings.warn(
                f"B*tau = {self.B * self.tau:.3g} < 100; chirp is not strongly time-bandwidth",
                RadarConfigWarning,
                stacklevel=3,
            )

    @property
    def alpha(self):
        return self.B / (2.0 * self.tau)

    @property
    def k0theta(self):
        return self.omega0 / C_LIGHT * math.sin(self.theta)

    @property
    def kappa(self):
        return self.phiT**2 * self.omega0 / self.B

    @property
    def L(self):
        return self.R * math.sin(self.theta)

    @property
    def H(self):
        return self.R * math.cos(self.theta)


@dataclass(frozen=True)
class ImagePoint:
    t_y: float
    y1: float
    y2: float


def t_zero(p, q, cfg):
    """Zero-angle travel-time mismatch T0 between image point p and scatterer q."""
    return (p.y2 - q.y2) / C_LIGHT * math.sin(cfg.theta) + 0.5 * (p.t_y - q.t_y)


def psf_w(p, q, cfg):
    """Point spread function W(p; q) with the quadratic aperture term."""
    t0 = t_zero(p, q, cfg)
    k = cfg.k0theta
    v1 = k * cfg.phiT * (p.y1 - q.y1)
    v2 = k * cfg.phiT**2 * (p.y2 - q.y2)
    return (
        cfg.tau
        * cfg.N
        * np.exp(-2j * cfg.omega0 * t0)
        * phi(v1, v2)
        * sinc(cfg.B * t0)
    )


def psf_w_lin(p, q, cfg):
    """PSF with the quadratic aperture term dropped; constant on ambiguity lines."""
    t0 = t_zero(p, q, cfg)
    v1 = cfg.k0theta * cfg.phiT * (p.y1 - q.y1)
    return cfg.tau * cfg.N * np.exp(-2j * cfg.omega0 * t0) * sinc(v1) * sinc(cfg.B * t0)


def ambiguous_instantaneous_location(t_d, z_d, cfg):
    """Instantaneous scatterer position that mimics a return delayed by ``t_d``.

    ``z_d`` is a (y1, y2) pair; the shift is purely downrange.
    """
    if t_d < 0:
        raise ValueError(f"delay must be nonnegative (causality), got {t_d!r}")
    z1, z2 = z_d
    return (float(z1), float(z2) + C_LIGHT * t_d / (2.0 * math.sin(cfg.theta)))


def resolutions(cfg):
    """Return (azimuth resolution, range resolution, unambiguous-range lobe width)."""
    k = cfg.k0theta
    delta_az = math.pi / (k * cfg.phiT)
    delta_rng = math.pi * C_LIGHT / (cfg.B * math.sin(cfg.theta))
    delta_u = 20.0 / (k * cfg.phiT**2)
    return delta_az, delta_rng, delta_u


def delay_detectability(t_d, cfg):
    """True when a point return delayed by ``t_d`` clears the aperture main lobe."""
    if t_d < 0:
        raise ValueError(f"delay must be nonnegative, got {t_d!r}")
    return cfg.phiT**2 * cfg.omega0 * t_d >= 40.0
