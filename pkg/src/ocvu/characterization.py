"""Synthetic OCV characterization: protocol generators, pseudo-OCV and curve fitting.

Current sign convention: positive current charges the cell (raises SOC).
Discharge protocols are parameterized by the magnitude of the current.
"""

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ._validation import check_positive, check_seed, check_soc
from .exceptions import (
    DegenerateFitError,
    IncompatibleTablesError,
    InsufficientDataError,
    ParseError,
)
from .ocv_model import FORMS, OcvModel, evaluate

DIRECTIONS = ("charge", "discharge", "averaged")
DEFAULT_BINS = 20
DEFAULT_C_RATE = 25.0


@dataclass(frozen=True, eq=False)
class OcvSocTable:
    """Ordered ``(soc, ocv)`` pairs with strictly increasing SOC."""

    soc: np.ndarray
    ocv: np.ndarray
    direction: str = "averaged"

    def __post_init__(self):
        soc = np.array(self.soc, dtype=float)
        ocv = np.array(self.ocv, dtype=float)
        if soc.ndim != 1 or soc.shape != ocv.shape:
            raise ValueError("soc and ocv must be 1-D arrays of equal length")
        if soc.size == 0:
            raise ValueError("table must have at least one row")
        check_soc(soc, "soc")
        if np.any(np.diff(soc) <= 0):
            raise ValueError("table SOC values must be strictly increasing")
        if not np.all(np.isfinite(ocv)):
            raise ValueError("table voltages must be finite")
        if self.direction not in DIRECTIONS:
            raise ValueError(f"direction must be one of {DIRECTIONS}")
        soc.flags.writeable = False
        ocv.flags.writeable = False
        object.__setattr__(self, "soc", soc)
        object.__setattr__(self, "ocv", ocv)

    def __len__(self):
        return self.soc.size

    def __eq__(self, other):
        if not isinstance(other, OcvSocTable):
            return NotImplemented
        return (
            self.direction == other.direction
            and np.array_equal(self.soc, other.soc)
            and np.array_equal(self.ocv, other.ocv)
        )

    @property
    def complete(self):
        """True when the table spans the full SOC range ``[0, 1]``."""
        return self.soc[0] == 0.0 and self.soc[-1] == 1.0

    def interp(self, s):
        return np.interp(s, self.soc, self.ocv)

    def to_csv(self, path_or_buf=None):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["soc", "ocv_volts"])
        for s, v in zip(self.soc, self.ocv):
            writer.writerow([repr(float(s)), repr(float(v))])
        text = buf.getvalue()
        if path_or_buf is None:
            return text
        with open(path_or_buf, "w", newline="") as fh:
            fh.write(text)
        return None

    @classmethod
    def from_csv(cls, path, direction="averaged"):
        with open(path, newline="") as fh:
            return cls.from_csv_text(fh.read(), direction)

    @classmethod
    def from_csv_text(cls, text, direction="averaged"):
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or [c.strip() for c in rows[0]] != ["soc", "ocv_volts"]:
            raise ParseError("table CSV must start with header 'soc,ocv_volts'")
        try:
            data = np.array([[float(a), float(b)] for a, b in (r for r in rows[1:] if r)])
        except ValueError as exc:
            raise ParseError(f"bad numeric value in table CSV: {exc}") from exc
        if data.size == 0:
            raise ParseError("table CSV has no rows")
        try:
            return cls(data[:, 0], data[:, 1], direction)
        except ValueError as exc:
            raise ParseError(str(exc)) from exc


@dataclass(frozen=True)
class CellSimConfig:
    """Ground-truth synthetic cell used by the protocol generators."""

    true_model: OcvModel
    capacity_q: float
    resistance_r: float = 0.0
    hysteresis_half: float = 0.0
    seed: int = 0

    def __post_init__(self):
        check_positive(self.capacity_q, "capacity_q")
        check_positive(self.resistance_r, "resistance_r", strict=False)
        check_positive(self.hysteresis_half, "hysteresis_half", strict=False)
        object.__setattr__(self, "seed", check_seed(self.seed))

    def to_dict(self):
        return {
            "true_model": self.true_model.to_dict(),
            "capacity_ah": self.capacity_q,
            "resistance_ohm": self.resistance_r,
            "hysteresis_v": self.hysteresis_half,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data):
        try:
            return cls(
                true_model=OcvModel.from_dict(data["true_model"]),
                capacity_q=float(data["capacity_ah"]),
                resistance_r=float(data.get("resistance_ohm", 0.0)),
                hysteresis_half=float(data.get("hysteresis_v", 0.0)),
                seed=int(data.get("seed", 0)),
            )
        except (KeyError, TypeError) as exc:
            raise ParseError(f"malformed cell config: {exc}") from exc

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"cell config is not valid JSON: {exc}") from exc
        return cls.from_dict(data)


def _constant_current_grid(c_rate_divisor, sample_period):
    # exact Coulomb integration at constant current: s(t) = t / (3600 * N)
    total = 3600.0 * c_rate_divisor
    n_steps = math.ceil(total / sample_period - 1e-9)
    k = np.arange(n_steps + 1, dtype=float)
    soc = np.minimum(k * sample_period / total, 1.0)
    soc[-1] = 1.0
    return np.unique(soc)


def simulate_low_rate_cycle(cfg, c_rate_divisor=DEFAULT_C_RATE, sample_period=60.0):
    """Full discharge followed by full charge at ``C/c_rate_divisor``.

    Returns ``(discharge, charge)`` tables on the same SOC grid. Terminal
    voltage is ``f(s) -/+ (i*R + hysteresis_half)`` with ``i = Q / N`` amps.
    Both sweeps sample SOC at the same points so that averaging them is exact.
    """
    if c_rate_divisor < 1:
        raise ValueError("c_rate_divisor must be >= 1")
    check_positive(sample_period, "sample_period")
    soc = _constant_current_grid(float(c_rate_divisor), float(sample_period))
    current = cfg.capacity_q / c_rate_divisor
    offset = current * cfg.resistance_r + cfg.hysteresis_half
    ocv = evaluate(cfg.true_model, soc)
    discharge = OcvSocTable(soc, ocv - offset, "discharge")
    charge = OcvSocTable(soc, ocv + offset, "charge")
    return discharge, charge


def simulate_gitt(cfg, step_percent=10, pulse_current=None):
    """Idealized GITT: pulses of ``step_percent`` SOC, each followed by full relaxation.

    ``pulse_current`` (amps) only sets the pulse duration; after the rest the
    cell sits exactly on its true OCV curve. Returns ``100/step_percent + 1`` rows.
    """
    step = float(step_percent)
    if step <= 0 or step > 100:
        raise ValueError("step_percent must lie in (0, 100]")
    n_steps = round(100.0 / step)
    if abs(n_steps * step - 100.0) > 1e-9:
        raise ValueError("step_percent must divide 100")
    if pulse_current is not None:
        check_positive(pulse_current, "pulse_current")
    soc = np.arange(n_steps + 1) / n_steps
    return OcvSocTable(soc, evaluate(cfg.true_model, soc), "discharge")


def pulse_duration(cfg, step_percent, pulse_current):
    """Seconds of constant ``pulse_current`` needed to move SOC by one GITT step."""
    return (step_percent / 100.0) * cfg.capacity_q * 3600.0 / pulse_current


def pseudo_ocv(discharge, charge):
    """Average charge and discharge voltages at equal SOC.

    Evaluated on the union of both SOC grids, restricted to their overlap, with
    linear interpolation where a grid lacks a point.
    """
    lo = max(discharge.soc[0], charge.soc[0])
    hi = min(discharge.soc[-1], charge.soc[-1])
    if lo >= hi:
        raise IncompatibleTablesError("charge and discharge tables do not overlap in SOC")
    grid = np.union1d(discharge.soc, charge.soc)
    grid = grid[(grid >= lo) & (grid <= hi)]
    v = 0.5 * (discharge.interp(grid) + charge.interp(grid))
    return OcvSocTable(grid, v, "averaged")


def add_voltage_noise(table, sd, seed):
    """Return a copy of ``table`` with i.i.d. Gaussian noise of s.d. ``sd`` volts added."""
    rng = np.random.default_rng(check_seed(seed))
    return OcvSocTable(table.soc, table.ocv + rng.normal(0.0, sd, size=len(table)), table.direction)


@dataclass(frozen=True, eq=False)
class FitReport:
    """Least-squares OCV fit with binned residual statistics.

    ``residual_mean_by_bin`` and ``residual_sd_by_bin`` are the empirical
    curve-fit error mean and s.d. per SOC bin. Empty bins report zeros and a
    zero entry in ``bin_counts``.
    """

    model: OcvModel
    residual_mean_by_bin: np.ndarray
    residual_sd_by_bin: np.ndarray
    bin_edges: np.ndarray
    bin_counts: np.ndarray
    rmse: float
    coef_cov: np.ndarray
    n_rows: int
    residuals: np.ndarray = field(repr=False, default=None)

    @property
    def coef_se(self):
        """Standard errors of the coefficients from the OLS covariance."""
        return np.sqrt(np.clip(np.diag(self.coef_cov), 0.0, None))

    @property
    def empty_bins(self):
        return int(np.sum(self.bin_counts == 0))

    def to_error_source(self):
        """Curve-fit error channel with knots at bin centres plus both ends."""
        from .uncertainty import ErrorSource

        centres = 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])
        knots = np.concatenate([[0.0], centres, [1.0]])
        mean = np.concatenate([self.residual_mean_by_bin[:1], self.residual_mean_by_bin, self.residual_mean_by_bin[-1:]])
        sd = np.concatenate([self.residual_sd_by_bin[:1], self.residual_sd_by_bin, self.residual_sd_by_bin[-1:]])
        return ErrorSource("curvefit", knots, mean, sd)


def fit(table, form="nernst", degree=None, bins=DEFAULT_BINS, epsilon=None):
    """Ordinary least-squares fit of an OCV model to a table.

    Parameters
    ----------
    table : OcvSocTable
    form : {"nernst", "poly"}
    degree : int, optional
        Required for ``form="poly"``.
    bins : int
        Number of uniform SOC bins for residual statistics.
    epsilon : float, optional
        Domain clamp of the fitted model; defaults to the model default.

    Returns
    -------
    FitReport
    """
    if form not in FORMS:
        raise ValueError(f"unknown form {form!r}")
    if int(bins) < 1:
        raise ValueError("bins must be >= 1")
    bins = int(bins)
    basis = FORMS[form]
    n_coef = basis.n_coefficients(degree)
    n = len(table)
    if n < n_coef:
        raise InsufficientDataError(f"need at least {n_coef} rows to fit {form}, got {n}")

    kwargs = {} if epsilon is None else {"epsilon": epsilon}
    # a throwaway model carries the clamp so regressors match evaluation exactly
    probe = OcvModel(form, (0.0,) * n_coef, **kwargs)
    X = basis.design(probe.clamp(table.soc), n_coef)
    y = table.ocv
    coefs, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < n_coef:
        raise DegenerateFitError(f"regressor matrix has rank {rank} < {n_coef}")
    model = OcvModel(form, tuple(coefs), probe.epsilon)

    resid = y - evaluate(model, table.soc)
    dof = n - n_coef
    sigma2 = float(resid @ resid) / dof if dof > 0 else 0.0
    cov = sigma2 * np.linalg.pinv(X.T @ X)

    edges = np.linspace(0.0, 1.0, bins + 1)
    idx = np.minimum((table.soc * bins).astype(int), bins - 1)
    counts = np.bincount(idx, minlength=bins)
    means = np.zeros(bins)
    sds = np.zeros(bins)
    for b in np.flatnonzero(counts):
        r = resid[idx == b]
        means[b] = r.mean()
        sds[b] = r.std(ddof=1) if r.size > 1 else 0.0

    return FitReport(
        model=model,
        residual_mean_by_bin=means,
        residual_sd_by_bin=sds,
        bin_edges=edges,
        bin_counts=counts,
        rmse=float(np.sqrt(np.mean(resid**2))),
        coef_cov=cov,
        n_rows=n,
        residuals=resid,
    )


class CoulombStep(NamedTuple):
    soc: float
    saturated: bool


# round-off slack before a clamp counts as real saturation
_SATURATION_SLACK = 1e-12


def coulomb_count(s_prev, current, dt, q):
    """One rectangular-rule Coulomb counting step.

    ``s = s_prev + (current * dt / 3600) / q`` with current in amps (positive
    charges), ``dt`` in seconds and ``q`` in amp-hours. The result is clamped to
    ``[0, 1]``; ``saturated`` reports a clamp beyond floating-point round-off.
    """
    s_prev = check_soc(s_prev, "s_prev")
    check_positive(q, "q")
    check_positive(dt, "dt")
    s = s_prev + (current * dt / 3600.0) / q
    saturated = s < -_SATURATION_SLACK or s > 1.0 + _SATURATION_SLACK
    return CoulombStep(min(max(s, 0.0), 1.0), saturated)


def coulomb_count_series(s0, currents, dt, q):
    """SOC trajectory for a current profile sampled every ``dt`` seconds.

    Charge is accumulated in amp-seconds before dividing by capacity, so a
    constant current whose per-step charge is exactly representable incurs no
    accumulation error. Returns an array of length ``len(currents) + 1``.
    """
    s0 = check_soc(s0, "s0")
    check_positive(q, "q")
    check_positive(dt, "dt")
    charge = np.concatenate([[0.0], np.cumsum(np.asarray(currents, dtype=float) * dt)])
    return np.clip(s0 + charge / 3600.0 / q, 0.0, 1.0)
