"""
Locked Mach-Zehnder interferometer: forward model, photon counting, extraction.

Powers are in arbitrary units of |E|^2. The output port ``c`` carries the
``+`` interference term and port ``d`` the ``-`` term::

    P_{c,d} = 1/2 [ |E_a|^2 + |E_b|^2 +- 2 V |E_a| |E_b| cos(phi_ab) ]

An atom in arm ``a`` multiplies its field by the complex ratio E_a'/E_a; the
modulus changes |E_a| and the phase shift (sign convention of
:mod:`atomphase.lineshape`) adds to the arm phase difference. Extraction
inverts this for balanced arms::

    T        = 2 (P_c' + P_d') / (P_c + P_d) - 1
    phi_ab'  = arccos[ (P_c' - P_d') / ((P_c + P_d) sqrt(T)) ]

Both relations are exact for V = 1 and |E_a| = |E_b|: the sum P_c + P_d has
no interference term, and the difference is 2 |E_a'| |E_b| cos(phi_ab').
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .lineshape import LineshapeParams, amplitude_ratio
from .motion import focal_intensity_ratio

PUMP_MS = 20.0
PROBE_MS = (130.0, 140.0)
CHECK_MS = 20.0
BACKGROUND_MS = 2000.0


@dataclass(frozen=True)
class MZIConfig:
    """Interferometer and detection settings.

    ``probe_rate_scale`` converts power in a fiber to detected counts/s
    before the coupling efficiency; dark rates are in counts/s.
    """

    amp_atom_arm: float = 1.0
    amp_ref_arm: float = 1.0
    lock_phase: float = 90.0
    coupling_eff_c: float = 0.84
    coupling_eff_d: float = 0.84
    dark_rate_c: float = 200.0
    dark_rate_d: float = 200.0
    probe_rate_scale: float = 1.5e4
    visibility: float = 0.98

    def __post_init__(self):
        if self.amp_atom_arm < 0 or self.amp_ref_arm < 0:
            raise ValueError("arm amplitudes must be >= 0")
        for name in ("coupling_eff_c", "coupling_eff_d", "visibility"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        for name in ("dark_rate_c", "dark_rate_d", "probe_rate_scale"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not math.isfinite(self.lock_phase):
            raise ValueError("lock_phase must be finite")

    @property
    def balanced(self):
        return math.isclose(self.amp_atom_arm, self.amp_ref_arm, rel_tol=1e-12)


@dataclass(frozen=True)
class PowerPair:
    p_c: float
    p_d: float

    def __post_init__(self):
        if self.p_c < 0 or self.p_d < 0:
            raise ValueError("powers must be >= 0")

    @property
    def total(self):
        return self.p_c + self.p_d


@dataclass(frozen=True)
class SpectrumRecord:
    """One probe window (or background window) of the measurement sequence."""

    detuning: float
    counts_c: int
    counts_d: int
    duration: float
    atom_present: bool

    def __post_init__(self):
        if self.counts_c < 0 or self.counts_d < 0:
            raise ValueError("counts must be >= 0")
        if not self.duration > 0:
            raise ValueError("duration must be > 0")


class PhaseDomainError(ValueError):
    """The arccos argument of the phase extraction left [-1, 1].

    ``argument`` carries the raw value so a caller can clamp deliberately.
    """

    def __init__(self, argument):
        self.argument = argument
        super().__init__(f"arccos argument {argument:.6g} outside [-1, 1]")


class InconsistentExtractionWarning(UserWarning):
    pass


def _ports(a, b, visibility, phi_deg):
    mean = 0.5 * (a * a + b * b)
    fringe = visibility * a * b * math.cos(math.radians(phi_deg))
    # clip round-off below zero at full contrast
    return PowerPair(max(mean + fringe, 0.0), max(mean - fringe, 0.0))


def output_powers(cfg: MZIConfig, phi):
    """Output powers of the empty interferometer at arm phase ``phi`` [deg]."""
    return _ports(cfg.amp_atom_arm, cfg.amp_ref_arm, cfg.visibility, phi)


def atom_phase_deg(ratio):
    """Phase shift [deg] carried by an amplitude ratio, public sign convention."""
    return -math.degrees(math.atan2(ratio.imag, ratio.real))


def output_powers_with_atom(cfg: MZIConfig, ratio):
    """Output powers with the atom-arm field multiplied by ``ratio`` = E_a'/E_a."""
    if not cfg.balanced:
        raise ValueError("output_powers_with_atom requires |E_a| = |E_b|")
    ratio = complex(ratio)
    a = cfg.amp_atom_arm * abs(ratio)
    return _ports(a, cfg.amp_ref_arm, cfg.visibility, cfg.lock_phase + atom_phase_deg(ratio))


def blocked_reference_powers(cfg: MZIConfig, ratio=1.0):
    """Output powers with the reference arm blocked: the atom arm splits evenly."""
    p = 0.5 * (cfg.amp_atom_arm * abs(complex(ratio))) ** 2
    return PowerPair(p, p)


def lock_setpoints(n_max_c, n_min_c, n_max_d, n_min_d, b1, b2):
    """Count-rate setpoints (max - min)/2 + B for each detector.

    Implemented as written; it coincides with the mid-fringe value only for
    full visibility and zero minimum rate.
    """
    if n_max_c < n_min_c or n_max_d < n_min_d:
        raise ValueError("max rates must be >= min rates")
    if min(n_min_c, n_min_d) < 0:
        raise ValueError("rates must be >= 0")
    return 0.5 * (n_max_c - n_min_c) + b1, 0.5 * (n_max_d - n_min_d) + b2


def extract_transmission(with_atom: PowerPair, without_atom: PowerPair, eps=1e-9):
    """Atom-arm transmission from the summed outputs with and without the atom."""
    total = without_atom.total
    if not total > 0:
        raise ValueError("P_c + P_d without atom must be > 0")
    t = 2.0 * with_atom.total / total - 1.0
    if t < 0 or t > 1.0 + eps:
        warnings.warn(f"transmission {t:.6g} outside [0, 1]: inconsistent input",
                      InconsistentExtractionWarning, stacklevel=2)
    return t


def extract_phase(with_atom: PowerPair, without_atom: PowerPair, t, lock_phase=90.0):
    """Atom-induced phase shift [deg] from the output difference.

    The arccos branch is [0, 180] deg, which holds for a lock near 90 deg
    and phase shifts well below 90 deg.
    """
    if not t > 0:
        raise ValueError("transmission must be > 0")
    arg = (with_atom.p_c - with_atom.p_d) / (without_atom.total * math.sqrt(t))
    if abs(arg) > 1.0:
        raise PhaseDomainError(arg)
    return math.degrees(math.acos(arg)) - lock_phase


def _generator(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(key=seed))


def expected_rates(p: PowerPair, cfg: MZIConfig):
    """Mean detected rates [counts/s] for a pair of fiber powers."""
    return (cfg.coupling_eff_c * cfg.probe_rate_scale * p.p_c + cfg.dark_rate_c,
            cfg.coupling_eff_d * cfg.probe_rate_scale * p.p_d + cfg.dark_rate_d)


def counts_from_powers(p: PowerPair, cfg: MZIConfig, duration, seed=0, noiseless=False):
    """Detector counts over ``duration`` [ms].

    Independent Poisson draws per channel; ``noiseless`` returns the rounded
    means instead. ``seed`` may also be a :class:`numpy.random.Generator`.
    """
    if not duration > 0:
        raise ValueError("duration must be > 0")
    rc, rd = expected_rates(p, cfg)
    means = np.array([rc, rd]) * duration * 1e-3
    if noiseless:
        counts = np.rint(means)
    else:
        counts = _generator(seed).poisson(means)
    return int(counts[0]), int(counts[1])


def simulate_sequence(params: LineshapeParams, cfg: MZIConfig, detuning_grid,
                      cycles_per_point=100, p_survive=0.9, seed=0, *,
                      reference_blocked=False, spread=None, geometry=None,
                      noiseless=False):
    """Simulate the pump / probe / check cycle at each detuning.

    Every cycle probes for a window drawn uniformly from 130-140 ms. If the
    atom survives the check, the probe record is kept. Otherwise that record
    is discarded and a 2 s atom-free background record is taken at the same
    probe settings before the next atom is loaded. Pump and check windows
    produce no records.

    Parameters
    ----------
    params : LineshapeParams
        Atomic response; ``r_sc`` is the value for an atom at rest in the focus.
    spread, geometry : PositionSpread, FocusGeometry, optional
        If both are given, each cycle draws a thermal atom position and
        scales ``r_sc`` by the local focal intensity.
    reference_blocked : bool
        Simulate the transmission measurement with the reference arm blocked.
    noiseless : bool
        Use rounded mean counts instead of Poisson draws.

    Returns
    -------
    list of SpectrumRecord
    """
    grid = [float(d) for d in np.atleast_1d(detuning_grid)]
    if not grid:
        raise ValueError("detuning grid is empty")
    if not 0 <= p_survive <= 1:
        raise ValueError("p_survive must lie in [0, 1]")
    if (spread is None) != (geometry is None):
        raise ValueError("spread and geometry must be given together")

    rng = _generator(seed)
    if reference_blocked:
        empty = blocked_reference_powers(cfg)
    else:
        empty = output_powers(cfg, cfg.lock_phase)

    records = []
    for det in grid:
        for _ in range(int(cycles_per_point)):
            r = params.r_sc
            if spread is not None:
                pos = rng.standard_normal(3)
                rho = math.hypot(pos[0], pos[1]) * spread.sigma_transverse
                z = pos[2] * spread.sigma_longitudinal
                r *= float(focal_intensity_ratio(rho, z, geometry))
            ratio = complex(amplitude_ratio(
                LineshapeParams(params.gamma, params.delta0, r), det))
            with_atom = (blocked_reference_powers(cfg, ratio) if reference_blocked
                         else output_powers_with_atom(cfg, ratio))
            # microsecond resolution keeps durations exact through the CSV format
            duration = round(float(rng.uniform(*PROBE_MS)), 3)
            cc, cd = counts_from_powers(with_atom, cfg, duration, rng, noiseless)
            if p_survive == 1 or rng.random() < p_survive:
                records.append(SpectrumRecord(det, cc, cd, duration, True))
            else:
                bc, bd = counts_from_powers(empty, cfg, BACKGROUND_MS, rng, noiseless)
                records.append(SpectrumRecord(det, bc, bd, BACKGROUND_MS, False))
    return records
