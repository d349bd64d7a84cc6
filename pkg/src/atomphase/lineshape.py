"""
Atomic response, phase shift and transmission of a probe mode vs. detuning.

All detunings and linewidths are linear frequencies in MHz (Delta/2pi,
Gamma/2pi). Every expression here depends only on ratios Delta/Gamma, so no
factors of 2pi appear.

Sign convention
---------------
The raw argument of the amplitude ratio E_a'/E_a is negative above
resonance. :func:`phase_shift` reports the negated argument, so the phase
*advances* (positive) for detunings above the resonance and lags below it.
The interferometer forward model and the extraction routines use the same
convention.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AtomicTransition:
    """Probed transition: natural linewidth [MHz] and wavelength [nm]."""

    gamma_nat: float = 6.0
    wavelength: float = 780.0

    def __post_init__(self):
        if not (self.gamma_nat > 0 and np.isfinite(self.gamma_nat)):
            raise ValueError(f"gamma_nat must be > 0, got {self.gamma_nat}")
        if not (self.wavelength > 0 and np.isfinite(self.wavelength)):
            raise ValueError(f"wavelength must be > 0, got {self.wavelength}")


@dataclass(frozen=True)
class LineshapeParams:
    """Effective linewidth ``gamma`` [MHz], resonance offset ``delta0`` [MHz]
    and scattering ratio ``r_sc``.

    ``r_sc = 2`` is the full-extinction boundary and is excluded.
    """

    gamma: float
    delta0: float = 0.0
    r_sc: float = 0.0

    def __post_init__(self):
        if not (self.gamma > 0 and np.isfinite(self.gamma)):
            raise ValueError(f"gamma must be > 0, got {self.gamma}")
        if not np.isfinite(self.delta0):
            raise ValueError(f"delta0 must be finite, got {self.delta0}")
        if not (0.0 <= self.r_sc < 2.0):
            raise ValueError(f"r_sc must satisfy 0 <= r_sc < 2, got {self.r_sc}")


class DegenerateCurveError(ValueError):
    """Raised when a phase curve is identically flat (r_sc = 0)."""


def _check_finite(**values):
    for name, v in values.items():
        if not np.all(np.isfinite(v)):
            raise ValueError(f"{name} must be finite")


def lorentzian_response(delta, gamma):
    """Complex dipole response i*Gamma / (2*Delta + i*Gamma).

    Equal to 1 on resonance; ``delta`` may be an array.
    """
    _check_finite(delta=delta, gamma=gamma)
    if np.any(np.asarray(gamma) <= 0):
        raise ValueError("gamma must be > 0")
    return 1j * gamma / (2.0 * np.asarray(delta, dtype=float) + 1j * gamma)


def amplitude_ratio(p: LineshapeParams, delta):
    """Complex field ratio E_a'/E_a = 1 - (R/2) * L(Delta - Delta0)."""
    return 1.0 - 0.5 * p.r_sc * lorentzian_response(np.asarray(delta) - p.delta0, p.gamma)


def _to_public_phase(ratio):
    phi = -np.degrees(np.angle(ratio))
    # keep the principal branch (-180, 180]
    return np.where(phi == -180.0, 180.0, phi)


def phase_shift(p: LineshapeParams, delta):
    """Atom-induced phase shift in degrees, positive above resonance."""
    phi = _to_public_phase(amplitude_ratio(p, delta))
    return float(phi) if np.ndim(phi) == 0 else phi


def transmission_model(p: LineshapeParams, delta):
    """Power transmission 1 - Gamma^2 R (1 - R/4) / (4 (Delta-Delta0)^2 + Gamma^2)."""
    d = np.asarray(delta, dtype=float) - p.delta0
    g2 = p.gamma**2
    t = 1.0 - g2 * p.r_sc * (1.0 - p.r_sc / 4.0) / (4.0 * d**2 + g2)
    return float(t) if np.ndim(t) == 0 else t


def phase_extremum(p: LineshapeParams):
    """Location and value of the phase maximum.

    The phase curve is odd about ``delta0``; its maximum sits at
    ``delta0 + (gamma/2) sqrt(1 - R/2)`` with value
    ``atan(R / (4 sqrt(1 - R/2)))``. The minimum is the mirror image.

    Returns
    -------
    delta_star : float
        Detuning of the maximum [MHz].
    phi_star : float
        Phase at the maximum [deg], always > 0.
    """
    if p.r_sc == 0.0:
        raise DegenerateCurveError("r_sc = 0 gives a flat phase curve")
    root = np.sqrt(1.0 - p.r_sc / 2.0)
    delta_star = p.delta0 + 0.5 * p.gamma * root
    phi_star = np.degrees(np.arctan(p.r_sc / (4.0 * root)))
    return float(delta_star), float(phi_star)


def _lorentz_cdf(x, fwhm):
    return 0.5 + np.arctan(2.0 * x / fwhm) / np.pi


def convolve_probe_linewidth(detuning, values, fwhm, truncation=40.0):
    """Convolve a uniformly sampled curve with a unit-area Lorentzian.

    Each kernel tap carries the exact Lorentzian mass of its sampling cell.
    The mass beyond ``truncation`` FWHM is lumped onto the outermost taps and
    the curve is extended by its edge values, so a constant curve is returned
    unchanged.

    Parameters
    ----------
    detuning : array_like
        Uniform, increasing grid [MHz].
    values : array_like
        Curve samples on ``detuning``.
    fwhm : float
        Kernel full width at half maximum [MHz]; 0 returns a copy.
    truncation : float
        Kernel half-width in units of ``fwhm``.
    """
    x = np.asarray(detuning, dtype=float)
    y = np.asarray(values, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("detuning and values must be 1-D arrays of equal length")
    _check_finite(detuning=x, values=y, fwhm=fwhm)
    if fwhm < 0:
        raise ValueError("fwhm must be >= 0")
    if fwhm == 0 or x.size < 2:
        return y.copy()
    steps = np.diff(x)
    h = steps[0]
    if h <= 0 or not np.allclose(steps, h, rtol=1e-9, atol=0.0):
        raise ValueError("detuning grid must be uniform and increasing")
    if h > fwhm / 4.0:
        raise ValueError(f"grid step {h} exceeds fwhm/4 = {fwhm / 4.0}; sampling too coarse")

    half = int(np.ceil(truncation * fwhm / h))
    k = np.arange(-half, half + 1)
    w = _lorentz_cdf((k + 0.5) * h, fwhm) - _lorentz_cdf((k - 0.5) * h, fwhm)
    tail = _lorentz_cdf(-(half + 0.5) * h, fwhm)
    w[0] += tail
    w[-1] += tail

    n = y.size
    out = np.zeros(n)
    idx = np.arange(n)
    for kk, wk in zip(k, w):
        out += wk * y[np.clip(idx - kk, 0, n - 1)]
    return out
