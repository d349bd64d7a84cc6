"""
Transmission-spectrum normalization and Lorentzian fitting.

The spectrum is fitted to

    T(Delta) = 1 - Gamma^2 R (1 - R/4) / (4 (Delta - Delta0)^2 + Gamma^2)

by weighted least squares with a damped Gauss-Newton (Levenberg-Marquardt)
iteration. The phase curve is then predicted from the fitted parameters
rather than fitted separately.
"""

import math
from dataclasses import dataclass

import numpy as np

from .interferometer import MZIConfig, PhaseDomainError
from .lineshape import DegenerateCurveError, LineshapeParams, phase_extremum, phase_shift

PARAM_NAMES = ("gamma", "delta0", "r_sc")
_SCALE = np.array([10.0, 10.0])  # MHz, for gamma and delta0


class DataError(ValueError):
    """Records cannot be turned into a spectrum."""


class NoDipError(DataError):
    pass


class DegenerateFitError(RuntimeError):
    """The weighted normal-equations matrix is singular."""


@dataclass(frozen=True)
class NormalizedSpectrum:
    detuning: np.ndarray
    transmission: np.ndarray
    sigma: np.ndarray

    def __len__(self):
        return len(self.detuning)


@dataclass(frozen=True)
class FitResult:
    params: LineshapeParams
    std_errors: np.ndarray
    covariance: np.ndarray
    residual_rms: float
    n_points: int
    converged: bool
    chi2_reduced: float = float("nan")
    n_iter: int = 0
    gradient_norm: float = float("nan")
    probe_fwhm: float = 0.0

    def as_dict(self):
        p, e = self.params, self.std_errors
        return {
            "gamma_mhz": p.gamma, "gamma_err": e[0],
            "delta0_mhz": p.delta0, "delta0_err": e[1],
            "r_sc": p.r_sc, "r_sc_err": e[2],
        }


# -- record reduction ---------------------------------------------------------

def _channel_sums(records):
    cc = sum(r.counts_c for r in records)
    cd = sum(r.counts_d for r in records)
    tau = sum(r.duration for r in records) * 1e-3
    return cc, cd, tau


def _light(cc, cd, tau, cfg):
    """Dark-subtracted, efficiency-corrected light levels and their variances."""
    if cfg.coupling_eff_c <= 0 or cfg.coupling_eff_d <= 0:
        raise DataError("coupling efficiencies must be > 0 to normalize counts")
    lc = (cc / tau - cfg.dark_rate_c) / cfg.coupling_eff_c
    ld = (cd / tau - cfg.dark_rate_d) / cfg.coupling_eff_d
    vc = cc / tau**2 / cfg.coupling_eff_c**2
    vd = cd / tau**2 / cfg.coupling_eff_d**2
    return lc, ld, vc, vd


def _split(records):
    present, background = {}, []
    for r in records:
        if r.atom_present:
            present.setdefault(r.detuning, []).append(r)
        else:
            background.append(r)
    if not background:
        raise DataError("no atom-absent background records")
    if not present:
        raise DataError("no atom-present records")
    return present, background


def _background(background, cfg):
    cc, cd, tau = _channel_sums(background)
    if cc + cd == 0:
        raise DataError("background records contain zero counts")
    lc, ld, vc, vd = _light(cc, cd, tau, cfg)
    if not lc + ld > 5.0 * math.sqrt(vc + vd):
        raise DataError("background carries no probe light above the dark counts")
    return lc, ld, vc, vd


def normalize_spectrum(records, cfg: MZIConfig, reference_blocked=False):
    """Reduce raw records to a transmission spectrum.

    Atom-present records are summed per detuning and compared with the pooled
    atom-free background (the empty interferometer does not depend on the
    probe detuning). Dark rates are subtracted and each channel is divided by
    its coupling efficiency before the channels are combined. With the
    reference arm blocked the ratio of summed light is the transmission;
    otherwise the interferometer relation T = 2 S - 1 applies. Uncertainties
    follow from Poisson statistics of the counts.
    """
    present, background = _split(records)
    bc, bd, bvc, bvd = _background(background, cfg)
    b_total, b_var = bc + bd, bvc + bvd

    det = np.array(sorted(present))
    ratio = np.empty(det.size)
    var = np.empty(det.size)
    for i, d in enumerate(det):
        lc, ld, vc, vd = _light(*_channel_sums(present[d]), cfg)
        ratio[i] = (lc + ld) / b_total
        var[i] = (vc + vd) / b_total**2 + ratio[i] ** 2 * b_var / b_total**2
    if reference_blocked:
        return NormalizedSpectrum(det, ratio, np.sqrt(var))
    return NormalizedSpectrum(det, 2.0 * ratio - 1.0, 2.0 * np.sqrt(var))


def extract_phase_spectrum(records, cfg: MZIConfig):
    """Phase shift [deg] per detuning from interferometric records.

    Returns detuning, phase and its standard error (propagated numerically
    from the four Poisson-distributed light levels).
    """
    present, background = _split(records)
    bc, bd, bvc, bvd = _background(background, cfg)

    def phase(lc, ld, b_c, b_d):
        s_b = b_c + b_d
        t = 2.0 * (lc + ld) / s_b - 1.0
        if not t > 0:
            raise DataError("extracted transmission is not positive")
        arg = (lc - ld) / (s_b * math.sqrt(t))
        if abs(arg) > 1:
            raise PhaseDomainError(arg)
        return math.degrees(math.acos(arg)) - cfg.lock_phase

    det, ph, err = [], [], []
    for d in sorted(present):
        lc, ld, vc, vd = _light(*_channel_sums(present[d]), cfg)
        x = np.array([lc, ld, bc, bd])
        v = np.array([vc, vd, bvc, bvd])
        p0 = phase(*x)
        var = 0.0
        for i in range(4):
            h = 1e-6 * abs(x[i]) + 1e-12
            xp, xm = x.copy(), x.copy()
            xp[i] += h
            xm[i] -= h
            var += ((phase(*xp) - phase(*xm)) / (2 * h)) ** 2 * v[i]
        det.append(d)
        ph.append(p0)
        err.append(math.sqrt(var))
    return np.array(det), np.array(ph), np.array(err)


# -- model --------------------------------------------------------------------

def transmission_curve(gamma, delta0, r_sc, detuning, probe_fwhm=0.0):
    """Transmission model, optionally convolved with a Lorentzian probe line.

    A Lorentzian dip convolved with a Lorentzian of FWHM w stays Lorentzian
    with width Gamma + w and the same area.
    """
    g = gamma + probe_fwhm
    d = np.asarray(detuning, dtype=float) - delta0
    return 1.0 - r_sc * (1.0 - r_sc / 4.0) * gamma * g / (4.0 * d * d + g * g)


def transmission_jacobian(gamma, delta0, r_sc, detuning, probe_fwhm=0.0):
    """Analytic derivatives of :func:`transmission_curve`, shape (n, 3)."""
    g = gamma + probe_fwhm
    d = np.asarray(detuning, dtype=float) - delta0
    q = 4.0 * d * d + g * g
    depth = r_sc * (1.0 - r_sc / 4.0)
    n = depth * gamma * g
    j = np.empty((d.size, 3))
    j[:, 0] = -depth * ((g + gamma) * q - 2.0 * gamma * g * g) / q**2
    j[:, 1] = -8.0 * d * n / q**2
    j[:, 2] = -(1.0 - r_sc / 2.0) * gamma * g / q
    return j


# -- initial guess ------------------------------------------------------------

def estimate_initial(spectrum: NormalizedSpectrum) -> LineshapeParams:
    """Starting values from the dip position, half-depth width and depth."""
    x, y, s = spectrum.detuning, spectrum.transmission, spectrum.sigma
    if len(x) < 5:
        raise DataError("need at least 5 spectrum points")
    order = np.argsort(x)
    x, y, s = x[order], y[order], s[order]
    i0 = int(np.argmin(y))
    depth = min(1.0 - y[i0], 1.0)
    if not depth > 3.0 * np.median(s):
        raise NoDipError(f"no dip: depth {depth:.3g} vs median sigma {np.median(s):.3g}")

    half = 1.0 - depth / 2.0

    def crossing(indices):
        prev = i0
        for i in indices:
            if y[i] >= half:
                frac = (half - y[prev]) / (y[i] - y[prev])
                return x[prev] + frac * (x[i] - x[prev])
            prev = i
        return None

    left = crossing(range(i0 - 1, -1, -1))
    right = crossing(range(i0 + 1, len(x)))
    if left is not None and right is not None:
        width = right - left
    elif left is not None or right is not None:
        width = 2.0 * abs((right if right is not None else left) - x[i0])
    else:
        width = 0.25 * (x[-1] - x[0])
    width = max(width, 1e-3 * (x[-1] - x[0]))
    r = 2.0 * (1.0 - math.sqrt(1.0 - depth))
    return LineshapeParams(gamma=float(width), delta0=float(x[i0]), r_sc=min(r, 1.999))


# -- fitting ------------------------------------------------------------------

def _to_internal(p: LineshapeParams):
    h = p.r_sc / 2.0
    h = min(max(h, 1e-12), 1.0 - 1e-12)
    return np.array([p.gamma / _SCALE[0], p.delta0 / _SCALE[1], math.log(h / (1.0 - h))])


def _to_natural(q):
    return q[0] * _SCALE[0], q[1] * _SCALE[1], 2.0 / (1.0 + math.exp(-q[2]))


def fit_transmission(spectrum: NormalizedSpectrum, init: LineshapeParams = None,
                     probe_fwhm=0.0, max_iter=200, ftol=1e-10, xtol=1e-8):
    """Weighted least-squares fit of the transmission model.

    Parameters are iterated in scaled form (Gamma/10 MHz, Delta0/10 MHz,
    logit(R/2)), which keeps R inside (0, 2). The damping factor drops by 10
    after each successful step and grows by 10 after a rejected one.
    Converged when the relative cost decrease stays below ``ftol`` for two
    consecutive accepted steps or the scaled step is shorter than ``xtol``.

    The covariance is the inverse weighted normal matrix in natural units,
    scaled by the reduced chi-square.
    """
    x = np.asarray(spectrum.detuning, dtype=float)
    y = np.asarray(spectrum.transmission, dtype=float)
    s = np.asarray(spectrum.sigma, dtype=float)
    m = x.size
    if m < 5:
        raise DataError("need at least 5 spectrum points")
    if not (np.all(np.isfinite(s)) and np.all(s > 0)):
        raise DataError("uncertainties must be finite and > 0")
    if init is None:
        init = estimate_initial(spectrum)

    def residuals(q):
        g, d0, r = _to_natural(q)
        return (y - transmission_curve(g, d0, r, x, probe_fwhm)) / s

    def scaled_jacobian(q):
        g, d0, r = _to_natural(q)
        j = transmission_jacobian(g, d0, r, x, probe_fwhm)
        j = j * np.array([_SCALE[0], _SCALE[1], r * (1.0 - r / 2.0)])
        # residuals are y - f, hence the sign
        return -j / s[:, None]

    q = _to_internal(init)
    r = residuals(q)
    cost = float(r @ r)
    jac = scaled_jacobian(q)
    if np.linalg.matrix_rank(jac) < 3:
        raise DegenerateFitError("Jacobian is rank deficient at the starting point")

    lam = 1e-3
    converged = False
    n_iter = 0
    small = 0
    while n_iter < max_iter:
        n_iter += 1
        a = jac.T @ jac
        grad = -jac.T @ r
        try:
            step = np.linalg.solve(a + lam * np.diag(np.diag(a)), grad)
        except np.linalg.LinAlgError:
            lam *= 10.0
            continue
        q_new = q + step
        ok = q_new[0] > 0 and np.all(np.isfinite(q_new))
        if ok:
            r_new = residuals(q_new)
            cost_new = float(r_new @ r_new)
        if ok and cost_new <= cost:
            rel = (cost - cost_new) / max(cost, 1e-300)
            q, r, cost = q_new, r_new, cost_new
            jac = scaled_jacobian(q)
            lam = max(lam / 10.0, 1e-12)
            # one tiny decrease can be a heavily damped step; require two in a row
            small = small + 1 if rel < ftol else 0
            if small >= 2 or np.linalg.norm(step) < xtol or cost < 1e-28:
                converged = True
                break
        else:
            if np.linalg.norm(step) < xtol:
                converged = True
                break
            lam *= 10.0
            if lam > 1e16:
                break

    if converged:
        # the stopping tests fire while the gradient can still be ~1e-4 when
        # the weights are large; a few undamped steps reach the noise floor
        for _ in range(5):
            try:
                step = np.linalg.solve(jac.T @ jac, -jac.T @ r)
            except np.linalg.LinAlgError:
                break
            r_new = residuals(q + step)
            cost_new = float(r_new @ r_new)
            jac_new = scaled_jacobian(q + step)
            # cost sits at the rounding floor here, so judge by the gradient
            if not (np.isfinite(cost_new) and cost_new <= cost * (1 + 1e-12)
                    and np.linalg.norm(jac_new.T @ r_new) < np.linalg.norm(jac.T @ r)):
                break
            q, r, cost, jac = q + step, r_new, cost_new, jac_new

    g, d0, rs = _to_natural(q)
    j_nat = transmission_jacobian(g, d0, rs, x, probe_fwhm) / s[:, None]
    normal = j_nat.T @ j_nat
    if np.linalg.cond(normal) > 1e14:
        raise DegenerateFitError("normal-equations matrix is singular at the optimum")
    chi2_red = cost / (m - 3) if m > 3 else float("nan")
    cov = np.linalg.inv(normal) * chi2_red
    cov = 0.5 * (cov + cov.T)
    unweighted = y - transmission_curve(g, d0, rs, x, probe_fwhm)
    return FitResult(
        params=LineshapeParams(gamma=float(g), delta0=float(d0), r_sc=float(rs)),
        std_errors=np.sqrt(np.clip(np.diag(cov), 0.0, None)),
        covariance=cov,
        residual_rms=float(np.sqrt(np.mean(unweighted**2))),
        n_points=m,
        converged=converged,
        chi2_reduced=float(chi2_red),
        n_iter=n_iter,
        gradient_norm=float(np.linalg.norm(jac.T @ r)),
        probe_fwhm=float(probe_fwhm),
    )


@dataclass(frozen=True)
class PhaseCurve:
    detuning: np.ndarray
    phase_deg: np.ndarray
    delta_star: float
    phi_star: float


def predict_phase_curve(fit: FitResult, detuning_grid) -> PhaseCurve:
    """Phase shift predicted from a transmission fit, with its exact maximum."""
    if not fit.converged:
        raise ValueError("fit did not converge")
    grid = np.atleast_1d(np.asarray(detuning_grid, dtype=float))
    phase = np.atleast_1d(phase_shift(fit.params, grid))
    try:
        delta_star, phi_star = phase_extremum(fit.params)
    except DegenerateCurveError:
        delta_star, phi_star = fit.params.delta0, 0.0
    return PhaseCurve(grid, phase, delta_star, phi_star)
