"""
Run configuration: a flat ``key = value`` text format.

Lines are ``key = value``; ``#`` starts a comment. Numbers may carry a unit
suffix (``6 MHz``, ``100 uK``, ``1.1 mm``, ``0.75 um``) which is converted to
the native unit of the key; a bare number is taken in the native unit.
Unknown keys and dimension mismatches are errors. Omitted keys keep their
defaults.
"""

import math
import re
from dataclasses import dataclass, field, replace

import numpy as np

from .focus import FocusGeometry
from .interferometer import MZIConfig
from .lineshape import AtomicTransition, LineshapeParams
from .motion import TrapConfig


class ConfigError(ValueError):
    def __init__(self, message, line=None, path=None):
        self.line = line
        where = f"{path or '<config>'}:{line}: " if line is not None else ""
        super().__init__(where + message)


# unit symbol -> (dimension, factor to SI)
_UNITS = {
    "hz": ("frequency", 1.0), "khz": ("frequency", 1e3),
    "mhz": ("frequency", 1e6), "ghz": ("frequency", 1e9),
    "m": ("length", 1.0), "cm": ("length", 1e-2), "mm": ("length", 1e-3),
    "um": ("length", 1e-6), "µm": ("length", 1e-6), "μm": ("length", 1e-6),
    "nm": ("length", 1e-9),
    "k": ("temperature", 1.0), "mk": ("temperature", 1e-3),
    "uk": ("temperature", 1e-6), "µk": ("temperature", 1e-6),
    "μk": ("temperature", 1e-6), "nk": ("temperature", 1e-9),
    "kg": ("mass", 1.0), "g": ("mass", 1e-3), "u": ("mass", 1.66053906660e-27),
    "s": ("time", 1.0), "ms": ("time", 1e-3), "us": ("time", 1e-6),
    "deg": ("angle", 1.0), "rad": ("angle", 180.0 / math.pi),
    "/s": ("rate", 1.0), "1/s": ("rate", 1.0), "cps": ("rate", 1.0),
}

# key -> (section, field, kind, native unit)
_KEYS = {
    "gamma_nat": ("transition", "gamma_nat", "float", "MHz"),
    "wavelength": ("transition", "wavelength", "float", "nm"),
    "waist_at_lens": ("focus", "waist_at_lens", "float", "mm"),
    "focal_length": ("focus", "focal_length", "float", "mm"),
    "focal_waist": ("focus", "focal_waist", "float", "um"),
    "nu_transverse": ("trap", "nu_transverse", "float", "kHz"),
    "nu_longitudinal": ("trap", "nu_longitudinal", "float", "kHz"),
    "temperature": ("trap", "temperature", "float", "uK"),
    "atom_mass": ("trap", "atom_mass", "float", "kg"),
    "amp_atom_arm": ("mzi", "amp_atom_arm", "float", None),
    "amp_ref_arm": ("mzi", "amp_ref_arm", "float", None),
    "lock_phase": ("mzi", "lock_phase", "float", "deg"),
    "coupling_eff_c": ("mzi", "coupling_eff_c", "float", None),
    "coupling_eff_d": ("mzi", "coupling_eff_d", "float", None),
    "dark_rate_c": ("mzi", "dark_rate_c", "float", "/s"),
    "dark_rate_d": ("mzi", "dark_rate_d", "float", "/s"),
    "probe_rate_scale": ("mzi", "probe_rate_scale", "float", "/s"),
    "visibility": ("mzi", "visibility", "float", None),
    "gamma": ("lineshape", "gamma", "float", "MHz"),
    "delta0": ("lineshape", "delta0", "float", "MHz"),
    "r_sc": ("lineshape", "r_sc", "float", None),
    "detuning_min": ("run", "detuning_min", "float", "MHz"),
    "detuning_max": ("run", "detuning_max", "float", "MHz"),
    "detuning_step": ("run", "detuning_step", "float", "MHz"),
    "u_min": ("run", "u_min", "float", None),
    "u_max": ("run", "u_max", "float", None),
    "u_step": ("run", "u_step", "float", None),
    "seed": ("run", "seed", "int", None),
    "cycles_per_point": ("run", "cycles_per_point", "int", None),
    "p_survive": ("run", "p_survive", "float", None),
    "mc_samples": ("run", "mc_samples", "int", None),
    "probe_fwhm": ("run", "probe_fwhm", "float", "MHz"),
    "convolve": ("run", "convolve", "bool", None),
    "reference_blocked": ("run", "reference_blocked", "bool", None),
    "thermal_motion": ("run", "thermal_motion", "bool", None),
}


@dataclass(frozen=True)
class RunConfig:
    transition: AtomicTransition = field(default_factory=AtomicTransition)
    focus: FocusGeometry = field(default_factory=FocusGeometry)
    trap: TrapConfig = field(default_factory=TrapConfig)
    mzi: MZIConfig = field(default_factory=MZIConfig)
    lineshape: LineshapeParams = field(
        default_factory=lambda: LineshapeParams(gamma=8.20, delta0=35.1, r_sc=0.064))
    detuning_min: float = 5.1
    detuning_max: float = 65.1
    detuning_step: float = 1.0
    u_min: float = 0.05
    u_max: float = 10.0
    u_step: float = 0.01
    seed: int = 0
    cycles_per_point: int = 100
    p_survive: float = 0.9
    mc_samples: int = 100_000
    probe_fwhm: float = 0.75
    convolve: bool = False
    reference_blocked: bool = False
    thermal_motion: bool = False

    def __post_init__(self):
        if not self.detuning_step > 0:
            raise ValueError("detuning_step must be > 0")
        if not self.detuning_min < self.detuning_max:
            raise ValueError("detuning_min must be < detuning_max")
        if not (0 < self.u_min < self.u_max and self.u_step > 0):
            raise ValueError("u grid needs 0 < u_min < u_max and u_step > 0")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")
        if self.cycles_per_point < 1:
            raise ValueError("cycles_per_point must be >= 1")
        if not 0 <= self.p_survive <= 1:
            raise ValueError("p_survive must lie in [0, 1]")
        if self.mc_samples < 1000:
            raise ValueError("mc_samples must be >= 1000")
        if self.probe_fwhm < 0:
            raise ValueError("probe_fwhm must be >= 0")

    def detuning_grid(self):
        n = int(round((self.detuning_max - self.detuning_min) / self.detuning_step)) + 1
        return self.detuning_min + self.detuning_step * np.arange(n)

    def u_grid(self):
        n = int(round((self.u_max - self.u_min) / self.u_step)) + 1
        return self.u_min + self.u_step * np.arange(n)


_NUMBER = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(\S*)\s*$")
_BOOLS = {"true": True, "yes": True, "on": True, "1": True,
          "false": False, "no": False, "off": False, "0": False}


def _convert(key, raw, kind, native):
    if kind == "bool":
        try:
            return _BOOLS[raw.strip().lower()]
        except KeyError:
            raise ValueError(f"{key}: expected a boolean, got {raw!r}") from None
    m = _NUMBER.match(raw)
    if not m:
        raise ValueError(f"{key}: cannot parse number {raw!r}")
    value, unit = float(m.group(1)), m.group(2)
    if unit:
        if native is None:
            raise ValueError(f"{key} is dimensionless, got unit {unit!r}")
        try:
            dim, factor = _UNITS[unit.lower()]
        except KeyError:
            raise ValueError(f"{key}: unknown unit {unit!r}") from None
        ndim, nfactor = _UNITS[native.lower()]
        if dim != ndim:
            raise ValueError(f"{key}: unit {unit!r} is a {dim}, expected a {ndim}")
        value = value * factor / nfactor
    if kind == "int":
        if value != int(value):
            raise ValueError(f"{key}: expected an integer, got {raw!r}")
        return int(value)
    return value


def parse_config_text(text, path=None) -> RunConfig:
    values, lines = {}, {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"malformed line, expected 'key = value': {line!r}", lineno, path)
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"unknown key {key!r}", lineno, path)
        if key in values:
            raise ConfigError(f"duplicate key {key!r}", lineno, path)
        _, _, kind, native = _KEYS[key]
        try:
            values[key] = _convert(key, raw, kind, native)
        except ValueError as exc:
            raise ConfigError(str(exc), lineno, path) from None
        lines[key] = lineno
    return build_config(values, lines, path)


def build_config(values, lines=None, path=None) -> RunConfig:
    """Assemble a :class:`RunConfig` from ``{key: native value}`` overrides."""
    lines = lines or {}
    base = RunConfig()
    sections = {}
    for key, value in values.items():
        section, name = _KEYS[key][:2]
        sections.setdefault(section, {})[name] = (value, key)

    def culprit(obj, items):
        # apply overrides one at a time in file order to find the offending line
        done = {}
        for name, (v, key) in sorted(items.items(), key=lambda kv: lines.get(kv[1][1], 0)):
            done[name] = v
            try:
                replace(obj, **done)
            except ValueError:
                return lines.get(key)
        return None

    kwargs = {}
    for section, items in sections.items():
        fields_ = {name: v for name, (v, _) in items.items()}
        if section == "run":
            kwargs.update(fields_)
            continue
        try:
            kwargs[section] = replace(getattr(base, section), **fields_)
        except ValueError as exc:
            raise ConfigError(str(exc), culprit(getattr(base, section), items), path) from None
    try:
        return replace(base, **kwargs)
    except ValueError as exc:
        nested = {k: v for k, v in kwargs.items() if k not in sections.get("run", {})}
        base = replace(base, **nested)
        raise ConfigError(str(exc), culprit(base, sections.get("run", {})), path) from None


def parse_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read(), path=str(path))


def config_keys():
    return sorted(_KEYS)


def dump_config(cfg: RunConfig) -> str:
    """Render ``cfg`` in the config file format (native units, no suffixes)."""
    out = []
    for key, (section, name, kind, _) in _KEYS.items():
        obj = cfg if section == "run" else getattr(cfg, section)
        v = getattr(obj, name)
        if kind == "bool":
            out.append(f"{key} = {'true' if v else 'false'}")
        elif kind == "int":
            out.append(f"{key} = {v}")
        else:
            out.append(f"{key} = {v!r}")
    return "\n".join(out) + "\n"
