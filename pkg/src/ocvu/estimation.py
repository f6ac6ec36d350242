"""OCV-based SOC lookup, non-linearity coefficient and two-point capacity estimation."""

from dataclasses import dataclass

import numpy as np

from ._validation import check_positive, check_soc
from .exceptions import AmbiguousInverseError, IllConditionedDeltaError
from .ocv_model import _combine, derivative, is_monotone

VOLTAGE_TOL = 1e-10
SOC_TOL = 1e-12
NEWTON_SWITCH = 1e-3
MIN_DELTA_SOC = 1e-6
_MAX_NEWTON = 60


@dataclass(frozen=True)
class OcvObservation:
    """Measured or estimated OCV with its standard deviation (volts)."""

    e_hat: float
    sigma_e: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "e_hat", float(self.e_hat))
        object.__setattr__(self, "sigma_e", check_positive(self.sigma_e, "sigma_e", strict=False))
        if not np.isfinite(self.e_hat):
            raise ValueError("e_hat must be finite")


@dataclass(frozen=True)
class SocEstimate:
    s_hat: float
    variance: float
    nlc: float
    out_of_range: bool = False

    @property
    def sd(self):
        return float(np.sqrt(self.variance))


@dataclass(frozen=True)
class CapacityEstimate:
    q_inv_hat: float
    q_hat: float
    variance_q: float
    direction: str
    soc1: SocEstimate
    soc2: SocEstimate

    @property
    def sd_q(self):
        return float(np.sqrt(self.variance_q))


def invert(model, e_hat, check=True):
    """Solve ``f(s) = e_hat`` elementwise for a strictly increasing model.

    Bisection on ``[epsilon, 1 - epsilon]`` until the bracket is narrower than
    ``NEWTON_SWITCH``, then bracket-safeguarded Newton until
    ``|f(s) - e_hat| < VOLTAGE_TOL`` with a Newton step below ``SOC_TOL``, or
    the bracket itself is below ``SOC_TOL``.
    Voltages beyond the curve ends saturate at the domain edge.

    Returns
    -------
    s : ndarray
    out_of_range : ndarray of bool
    """
    if check and not is_monotone(model):
        raise AmbiguousInverseError("OCV model is not strictly increasing; inverse is ambiguous")
    e = np.atleast_1d(np.asarray(e_hat, dtype=float))
    lo_s, hi_s = model.soc_range
    f_lo, f_hi = _combine(model, np.array([lo_s, hi_s]), False)
    below = e <= f_lo
    above = e >= f_hi

    lo = np.full(e.shape, lo_s)
    hi = np.full(e.shape, hi_s)
    while True:
        wide = (hi - lo) >= NEWTON_SWITCH
        if not wide.any():
            break
        mid = 0.5 * (lo + hi)
        f_mid = _combine(model, mid, False)
        up = wide & (f_mid < e)
        down = wide & ~up
        lo = np.where(up, mid, lo)
        hi = np.where(down, mid, hi)

    s = 0.5 * (lo + hi)
    active = ~(below | above)
    for _ in range(_MAX_NEWTON):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        si, ei, loi, hii = s[idx], e[idx], lo[idx], hi[idx]
        r = _combine(model, si, False) - ei
        step = r / _combine(model, si, True)
        # voltage tolerance alone leaves ~1e-9 SOC error on flat curves
        done = ((np.abs(r) < VOLTAGE_TOL) & (np.abs(step) < SOC_TOL)) | (r == 0) | ((hii - loi) < SOC_TOL)
        loi = np.where(r < 0, si, loi)
        hii = np.where(r > 0, si, hii)
        cand = si - step
        bad = ~((cand > loi) & (cand < hii))
        cand = np.where(bad, 0.5 * (loi + hii), cand)
        s[idx] = np.where(done, si, cand)
        lo[idx], hi[idx] = loi, hii
        active[idx] = ~done

    s = np.where(below, lo_s, np.where(above, hi_s, s))
    return s, below | above


def lookup_soc(model, obs, check=True):
    """SOC estimate from one OCV observation, with first-order variance.

    ``variance = nlc * sigma_e**2`` where ``nlc = (1 / f'(s_hat))**2``.
    """
    s, flag = invert(model, obs.e_hat, check=check)
    s_hat = float(s[0])
    nlc = float(1.0 / derivative(model, s_hat) ** 2)
    return SocEstimate(s_hat=s_hat, variance=nlc * obs.sigma_e**2, nlc=nlc, out_of_range=bool(flag[0]))


def soc_variance(model, s, sigma_e):
    """Analytic SOC error variance ``(sigma_e / f'(s))**2`` at true SOC ``s``."""
    return sigma_e**2 / derivative(model, s) ** 2


def nlc_curve(model, grid):
    """``(s, (1/f'(s))**2)`` rows over an SOC grid.

    ``grid`` may be an integer (uniform points on ``[0, 1]``) or an array of SOC values.
    """
    if not is_monotone(model):
        raise AmbiguousInverseError("non-linearity coefficient needs a strictly increasing model")
    if np.ndim(grid) == 0:
        n = int(grid)
        if n < 2:
            raise ValueError("grid must have at least 2 points")
        grid = np.linspace(0.0, 1.0, n)
    s = check_soc(np.asarray(grid, dtype=float), "grid")
    return np.column_stack([s, 1.0 / derivative(model, s) ** 2])


def capacity_variance(var_s1, var_s2, coulombs_c, q_inv):
    """Variance of the capacity estimate from the two SOC error variances."""
    return (var_s1 + var_s2) / (coulombs_c**2 * q_inv**4)


def estimate_capacity(model, obs1, obs2, coulombs_c, check=True):
    """Two-point OCV capacity estimate.

    ``coulombs_c`` is the magnitude of the charge (Ah) moved between the two
    rests. The SOC change is taken in absolute value; its sign is kept in
    ``direction``.
    """
    coulombs_c = check_positive(coulombs_c, "coulombs_c")
    est1 = lookup_soc(model, obs1, check=check)
    est2 = lookup_soc(model, obs2, check=False)
    d_soc = est2.s_hat - est1.s_hat
    if abs(d_soc) < MIN_DELTA_SOC:
        raise IllConditionedDeltaError(f"SOC change {d_soc:.3g} too small to observe capacity")
    q_inv = abs(d_soc) / coulombs_c
    return CapacityEstimate(
        q_inv_hat=q_inv,
        q_hat=1.0 / q_inv,
        variance_q=capacity_variance(est1.variance, est2.variance, coulombs_c, q_inv),
        direction="charge" if d_soc > 0 else "discharge",
        soc1=est1,
        soc2=est2,
    )
