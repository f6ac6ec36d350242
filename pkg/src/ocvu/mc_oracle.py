"""Monte-Carlo checks of the closed-form SOC, capacity and budget statistics.

Sampling is split into fixed-size chunks, each with its own child seed of a
:class:`numpy.random.SeedSequence`. Chunk moments are merged in chunk order, so
a run is bit-reproducible for a given seed whatever the number of workers.
"""

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from ._validation import check_soc
from .estimation import MIN_DELTA_SOC, capacity_variance, invert, soc_variance
from .exceptions import AmbiguousInverseError
from .ocv_model import OcvModel, evaluate, is_monotone
from .uncertainty import ErrorBudget, ErrorSource, combined_bias, combined_variance, sample

QUANTITIES = ("SocVariance", "SocMean", "CapacityMean", "CapacityVariance", "BudgetMoments")
REL_FLOOR = 1e-15
CHUNK_SIZE = 1 << 16
UNRELIABLE_FRACTION = 0.01

SOC_MEAN_ABS_TOL = 0.002
SOC_VAR_REL_TOL = 0.05
CAP_MEAN_REL_TOL = 0.01
CAP_VAR_REL_TOL = 0.10
BUDGET_VAR_REL_TOL = 0.02


@dataclass(frozen=True)
class McReport:
    quantity: str
    analytic: float
    empirical: float
    n_samples: int
    rel_error: float
    passed: bool
    tolerance: float
    label: str = ""
    n_flagged: int = 0
    unreliable: bool = False
    asserted: bool = True
    extra: dict = field(default_factory=dict)

    @classmethod
    def compare(cls, quantity, analytic, empirical, n_samples, tolerance, **kwargs):
        if quantity not in QUANTITIES:
            raise ValueError(f"unknown quantity {quantity!r}")
        analytic = float(analytic)
        empirical = float(empirical)
        rel = relative_error(empirical, analytic)
        return cls(quantity, analytic, empirical, int(n_samples), rel, bool(rel <= tolerance), float(tolerance), **kwargs)

    def recheck(self):
        """Recompute the pass flag from the stored numbers."""
        return relative_error(self.empirical, self.analytic) <= self.tolerance

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict())


def relative_error(empirical, analytic):
    return abs(empirical - analytic) / max(abs(analytic), REL_FLOOR)


def _merge(a, b):
    # Chan et al. pairwise update of (count, mean, M2)
    na, ma, m2a = a
    nb, mb, m2b = b
    n = na + nb
    if n == 0:
        return a
    delta = mb - ma
    mean = ma + delta * nb / n
    return n, mean, m2a + m2b + delta * delta * na * nb / n


def _chunk_sizes(n):
    full, rest = divmod(int(n), CHUNK_SIZE)
    return [CHUNK_SIZE] * full + ([rest] if rest else [])


def run_chunked(draw, n, seed, n_jobs=1):
    """Evaluate ``draw(rng, m) -> (values, n_flagged)`` over ``n`` samples.

    Returns ``(count, mean, variance, n_flagged)`` where ``variance`` uses
    ``ddof=1`` and ``count`` excludes values returned as NaN (dropped trials).
    """
    sizes = _chunk_sizes(n)
    children = np.random.SeedSequence(seed).spawn(len(sizes))

    def one(job):
        m, ss = job
        values, flagged = draw(np.random.Generator(np.random.PCG64(ss)), m)
        values = values[np.isfinite(values)]
        if values.size == 0:
            return (0, 0.0, 0.0), flagged
        mu = values.mean()
        return (values.size, mu, float(((values - mu) ** 2).sum())), flagged

    jobs = list(zip(sizes, children))
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            parts = list(pool.map(one, jobs))
    else:
        parts = [one(j) for j in jobs]

    acc = (0, 0.0, 0.0)
    flagged = 0
    for moments, f in parts:
        acc = _merge(acc, moments)
        flagged += int(f)
    count, mean, m2 = acc
    var = m2 / (count - 1) if count > 1 else 0.0
    return count, float(mean), float(var), flagged


def validate_soc_lemma(model, s_true, sigma_e, n, seed, n_jobs=1, asserted=True):
    """Sample ``E_hat = f(s) + N(0, sigma_e**2)``, invert, compare mean and variance.

    Returns ``(mean_report, variance_report)``. The absolute mean tolerance is
    expressed relative to ``s_true`` so both reports share one error definition.
    """
    s_true = check_soc(s_true, "s_true")
    if not is_monotone(model):
        raise AmbiguousInverseError("model must be strictly increasing")
    if n < 10_000:
        raise ValueError("n must be >= 1e4")
    e_true = evaluate(model, s_true)

    def draw(rng, m):
        e = e_true + rng.normal(0.0, sigma_e, m)
        s_hat, flag = invert(model, e, check=False)
        return s_hat, int(flag.sum())

    count, mean, var, flagged = run_chunked(draw, n, seed, n_jobs)
    unreliable = flagged > UNRELIABLE_FRACTION * n
    label = f"soc@{s_true:g},sigma_e={sigma_e:g}"
    common = dict(label=label, n_flagged=flagged, unreliable=unreliable, asserted=asserted)
    mean_rep = McReport.compare(
        "SocMean", s_true, mean, count, SOC_MEAN_ABS_TOL / max(abs(s_true), REL_FLOOR), **common
    )
    var_rep = McReport.compare("SocVariance", soc_variance(model, s_true, sigma_e), var, count, SOC_VAR_REL_TOL, **common)
    return mean_rep, var_rep


def validate_capacity(model, s1, s2, q_true, sigma_e, n, seed, n_jobs=1):
    """Two-rest capacity estimate under independent OCV noise at both rests.

    The analytic variance is evaluated at the true SOCs and true capacity.
    Returns ``(mean_report, variance_report)``.
    """
    s1 = check_soc(s1, "s1")
    s2 = check_soc(s2, "s2")
    if abs(s1 - s2) < 0.1:
        raise ValueError("|s1 - s2| must be >= 0.1")
    if not is_monotone(model):
        raise AmbiguousInverseError("model must be strictly increasing")
    coulombs = q_true * abs(s1 - s2)
    e1, e2 = evaluate(model, s1), evaluate(model, s2)

    def draw(rng, m):
        noise = rng.normal(0.0, sigma_e, (2, m))
        a, fa = invert(model, e1 + noise[0], check=False)
        b, fb = invert(model, e2 + noise[1], check=False)
        d = np.abs(b - a)
        q_hat = np.where(d < MIN_DELTA_SOC, np.nan, coulombs / np.where(d < MIN_DELTA_SOC, 1.0, d))
        return q_hat, int((d < MIN_DELTA_SOC).sum() + fa.sum() + fb.sum())

    count, mean, var, flagged = run_chunked(draw, n, seed, n_jobs)
    analytic_var = capacity_variance(
        soc_variance(model, s1, sigma_e), soc_variance(model, s2, sigma_e), coulombs, 1.0 / q_true
    )
    common = dict(
        label=f"capacity@{s1:g}->{s2:g},q={q_true:g},sigma_e={sigma_e:g}",
        n_flagged=flagged,
        unreliable=flagged > UNRELIABLE_FRACTION * n,
        extra={"dropped": int(n - count)},
    )
    return (
        McReport.compare("CapacityMean", q_true, mean, count, CAP_MEAN_REL_TOL, **common),
        McReport.compare("CapacityVariance", analytic_var, var, count, CAP_VAR_REL_TOL, **common),
    )


def validate_budget(budget, s, n, seed, n_jobs=1):
    """Empirical variance of the summed channel draws against the combined variance."""
    s = check_soc(s)
    if n < 10_000:
        raise ValueError("n must be >= 1e4")

    def draw(rng, m):
        return np.asarray(sample(budget, s, rng, m), dtype=float), 0

    count, mean, var, _ = run_chunked(draw, n, seed, n_jobs)
    return McReport.compare(
        "BudgetMoments",
        combined_variance(budget, s),
        var,
        count,
        BUDGET_VAR_REL_TOL,
        label=f"budget@{s:g}",
        extra={"analytic_mean": combined_bias(budget, s), "empirical_mean": mean},
    )


def soc_bias_first_order(model, budget, s):
    """Diagnostic only: SOC bias ``combined_bias / f'(s)`` implied by nonzero channel means."""
    return combined_bias(budget, s) / model.derivative(s)


def default_model():
    return OcvModel.nernst(3.7, 0.1, -0.1)


def default_budget():
    """Illustrative six-channel budget with SOC-dependent curve-fit error."""
    knots = [0.0, 0.5, 1.0]
    return ErrorBudget(
        [
            ErrorSource.constant("c2c", 0.002),
            ErrorSource.constant("temperature", 0.0015, mean=0.001),
            ErrorSource.constant("aging", 0.001),
            ErrorSource.constant("crate", 0.001, mean=-0.0005),
            ErrorSource("curvefit", knots, [0.0, 0.0, 0.0], [0.003, 0.001, 0.002]),
            ErrorSource.constant("meas", 0.002),
        ]
    )


SUITES = {
    "full": {"soc_n": 1_000_000, "cap_n": 100_000, "budget_n": 1_000_000},
    "quick": {"soc_n": 20_000, "cap_n": 20_000, "budget_n": 20_000},
}


def run_suite(name="full", seed=7, sigma_e=0.005, n_jobs=1):
    """Default oracle campaign.

    Lemma checks at five SOCs, the 0.9 -> 0.4 capacity check at 5 Ah, budget
    checks at three SOCs, and an unasserted run at 50 mV to expose where the
    first-order approximation breaks down.
    """
    cfg = SUITES[name]
    model = default_model()
    reports = []
    case = 0
    for s in (0.1, 0.3, 0.5, 0.7, 0.9):
        reports.extend(validate_soc_lemma(model, s, sigma_e, cfg["soc_n"], (seed, case), n_jobs))
        case += 1
    reports.extend(validate_capacity(model, 0.9, 0.4, 5.0, sigma_e, cfg["cap_n"], (seed, case), n_jobs))
    case += 1
    budget = default_budget()
    for s in (0.05, 0.5, 0.95):
        reports.append(validate_budget(budget, s, cfg["budget_n"], (seed, case), n_jobs))
        case += 1
    for s in (0.1, 0.5):
        reports.extend(validate_soc_lemma(model, s, 0.05, cfg["soc_n"], (seed, case), n_jobs, asserted=False))
        case += 1
    return reports


def reports_to_jsonl(reports):
    return "".join(r.to_json() + "\n" for r in reports)


def reports_to_csv(reports):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["quantity", "analytic", "empirical", "rel_error", "passed"])
    for r in reports:
        writer.writerow([r.quantity, repr(r.analytic), repr(r.empirical), repr(r.rel_error), str(r.passed).lower()])
    return buf.getvalue()
