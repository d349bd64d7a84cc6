"""
Thermal motion of the trapped atom and the resulting loss of scattering ratio.

A classical atom in a 3D harmonic trap at temperature T has a Gaussian position
distribution with sigma = sqrt(k_B T / m) / (2 pi nu) per axis. Scattered
power follows the local probe intensity, so the effective scattering ratio is
r0 * <I(rho, z) / I(0, 0)> with the paraxial Gaussian focal profile.
"""

from dataclasses import dataclass

import numpy as np
from scipy import constants

from .focus import FocusGeometry

RB87_MASS = 1.44316e-25  # kg


@dataclass(frozen=True)
class TrapConfig:
    """Trap frequencies [kHz], temperature [uK] and atom mass [kg]."""

    nu_transverse: float = 70.0
    nu_longitudinal: float = 20.0
    temperature: float = 100.0
    atom_mass: float = RB87_MASS

    def __post_init__(self):
        for name in ("nu_transverse", "nu_longitudinal", "temperature", "atom_mass"):
            v = getattr(self, name)
            if not (v > 0 and np.isfinite(v)):
                raise ValueError(f"{name} must be > 0, got {v}")


@dataclass(frozen=True)
class PositionSpread:
    """RMS position spread [nm], transverse (per axis) and longitudinal."""

    sigma_transverse: float
    sigma_longitudinal: float

    def __post_init__(self):
        for name in ("sigma_transverse", "sigma_longitudinal"):
            v = getattr(self, name)
            if not (v >= 0 and np.isfinite(v)):
                raise ValueError(f"{name} must be >= 0, got {v}")

    @property
    def is_zero(self):
        return self.sigma_transverse == 0 and self.sigma_longitudinal == 0


def thermal_sigma(nu, temperature, mass=RB87_MASS):
    """RMS position [nm] for trap frequency ``nu`` [kHz] at ``temperature`` [uK]."""
    omega = 2.0 * np.pi * nu * 1e3
    return np.sqrt(constants.k * temperature * 1e-6 / mass) / omega * 1e9


def position_spread(trap: TrapConfig) -> PositionSpread:
    return PositionSpread(
        float(thermal_sigma(trap.nu_transverse, trap.temperature, trap.atom_mass)),
        float(thermal_sigma(trap.nu_longitudinal, trap.temperature, trap.atom_mass)),
    )


def focal_intensity_ratio(rho, z, g: FocusGeometry):
    """I(rho, z) / I(0, 0) of the paraxial focused Gaussian; rho, z in nm."""
    w0 = g.focal_waist * 1e3
    w2 = w0**2 * (1.0 + (np.asarray(z) / g.rayleigh_range) ** 2)
    return w0**2 / w2 * np.exp(-2.0 * np.asarray(rho) ** 2 / w2)


def _check(spread, r0):
    if not isinstance(spread, PositionSpread):
        raise TypeError("spread must be a PositionSpread")
    if not (0 <= r0 < 2):
        raise ValueError("r0 must satisfy 0 <= r0 < 2")


def sample_positions(spread: PositionSpread, n_samples, seed):
    """Draw (x, y, z) positions [nm] from a Philox stream keyed by ``seed``."""
    rng = np.random.Generator(np.random.Philox(key=seed))
    xyz = rng.standard_normal((n_samples, 3))
    xyz[:, :2] *= spread.sigma_transverse
    xyz[:, 2] *= spread.sigma_longitudinal
    return xyz


def effective_scattering_ratio(r0, spread: PositionSpread, g: FocusGeometry,
                               n_samples=100_000, seed=0):
    """Monte Carlo thermal average of the scattering ratio.

    Returns
    -------
    mean : float
        r0 * <I / I0> over the position distribution.
    std_error : float
        Standard error of ``mean``.
    """
    _check(spread, r0)
    if n_samples < 1000:
        raise ValueError("n_samples must be >= 1000")
    if spread.is_zero:
        return float(r0), 0.0
    xyz = sample_positions(spread, int(n_samples), seed)
    rho = np.hypot(xyz[:, 0], xyz[:, 1])
    ratio = r0 * focal_intensity_ratio(rho, xyz[:, 2], g)
    return float(ratio.mean()), float(ratio.std(ddof=1) / np.sqrt(ratio.size))


def effective_scattering_ratio_quadrature(r0, spread: PositionSpread, g: FocusGeometry,
                                          order=40):
    """Same average by tensor-product Gauss-Hermite quadrature (deterministic)."""
    _check(spread, r0)
    if spread.is_zero:
        return float(r0)
    nodes, weights = np.polynomial.hermite_e.hermegauss(order)
    weights = weights / weights.sum()
    x = nodes * spread.sigma_transverse
    z = nodes * spread.sigma_longitudinal
    X, Y, Z = np.meshgrid(x, x, z, indexing="ij")
    W = weights[:, None, None] * weights[None, :, None] * weights[None, None, :]
    vals = focal_intensity_ratio(np.hypot(X, Y), Z, g)
    return float(r0 * np.sum(W * vals))
