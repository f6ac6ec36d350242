import json

import numpy as np
import pytest

from ocvu import ErrorBudget, ErrorSource, OcvModel
from ocvu import mc_oracle as mc
from ocvu.estimation import soc_variance
from ocvu.exceptions import AmbiguousInverseError


def test_report_fields_and_recheck():
    r = mc.McReport.compare("SocVariance", 2.0, 2.1, 100, 0.05)
    assert r.rel_error == pytest.approx(0.05)
    assert r.passed == (r.rel_error <= r.tolerance)
    assert r.recheck() == r.passed
    with pytest.raises(ValueError):
        mc.McReport.compare("Bogus", 1, 1, 1, 0.1)


def test_relative_error_floor():
    assert mc.relative_error(0.0, 0.0) == 0.0
    assert mc.relative_error(1e-16, 0.0) == pytest.approx(0.1)


def test_merge_matches_numpy():
    rng = np.random.default_rng(0)
    x = rng.normal(size=1000)
    parts = [x[:137], x[137:600], x[600:]]
    acc = (0, 0.0, 0.0)
    for p in parts:
        acc = mc._merge(acc, (p.size, p.mean(), ((p - p.mean()) ** 2).sum()))
    assert acc[0] == 1000
    assert acc[1] == pytest.approx(x.mean(), rel=1e-13)
    assert acc[2] / 999 == pytest.approx(x.var(ddof=1), rel=1e-13)


def test_soc_lemma_zero_noise(nernst):
    mean_r, var_r = mc.validate_soc_lemma(nernst, 0.5, 0.0, 10_000, seed=1)
    assert var_r.empirical == 0.0 and var_r.analytic == 0.0 and var_r.passed
    assert mean_r.passed


def test_soc_lemma_midpoint(nernst):
    mean_r, var_r = mc.validate_soc_lemma(nernst, 0.5, 0.005, 1_000_000, seed=3)
    assert 0.95 <= var_r.empirical / var_r.analytic <= 1.05
    assert abs(mean_r.empirical - 0.5) < 0.002
    assert var_r.passed and mean_r.passed
    assert var_r.n_flagged == 0 and not var_r.unreliable


def test_soc_lemma_steep_region_smaller(nernst):
    _, steep = mc.validate_soc_lemma(nernst, 0.05, 0.005, 100_000, seed=4)
    _, flat = mc.validate_soc_lemma(nernst, 0.5, 0.005, 100_000, seed=4)
    assert steep.analytic < flat.analytic
    nlc_ratio = (nernst.derivative(0.5) / nernst.derivative(0.05)) ** 2
    assert steep.analytic / flat.analytic == pytest.approx(nlc_ratio, rel=1e-12)
    assert steep.empirical < flat.empirical


def test_soc_lemma_preconditions(nernst):
    with pytest.raises(ValueError):
        mc.validate_soc_lemma(nernst, 0.5, 0.005, 1000, seed=1)
    with pytest.raises(AmbiguousInverseError):
        mc.validate_soc_lemma(OcvModel.nernst(3.7, -0.1, 0.1), 0.5, 0.005, 10_000, seed=1)


def test_saturation_counted_and_marks_unreliable():
    flat = OcvModel.nernst(3.7, 0.001, -0.001)
    mean_r, var_r = mc.validate_soc_lemma(flat, 0.5, 0.05, 10_000, seed=2, asserted=False)
    assert var_r.n_flagged > 100
    assert var_r.unreliable


def test_capacity_zero_noise(nernst):
    mean_r, var_r = mc.validate_capacity(nernst, 0.9, 0.4, 5.0, 0.0, 10_000, seed=1)
    assert mean_r.empirical == pytest.approx(5.0, rel=1e-9)
    assert var_r.analytic == 0.0
    assert var_r.empirical < 1e-15


def test_capacity_oracle(nernst):
    mean_r, var_r = mc.validate_capacity(nernst, 0.9, 0.4, 5.0, 0.005, 100_000, seed=5)
    assert mean_r.passed and var_r.passed
    s1 = soc_variance(nernst, 0.9, 0.005)
    s2 = soc_variance(nernst, 0.4, 0.005)
    assert var_r.analytic == pytest.approx((s1 + s2) / (2.5**2 * 0.2**4), rel=1e-12)


def test_capacity_variance_grows_when_delta_halves(nernst):
    _, wide = mc.validate_capacity(nernst, 0.9, 0.4, 5.0, 0.005, 50_000, seed=6)
    _, narrow = mc.validate_capacity(nernst, 0.9, 0.65, 5.0, 0.005, 50_000, seed=6)
    assert narrow.empirical > wide.empirical


def test_capacity_preconditions(nernst):
    with pytest.raises(ValueError):
        mc.validate_capacity(nernst, 0.5, 0.45, 5.0, 0.005, 10_000, seed=1)


def test_budget_oracle():
    budget = ErrorBudget([ErrorSource.constant("c2c", 0.003, mean=0.001), ErrorSource.constant("meas", 0.004)])
    r = mc.validate_budget(budget, 0.5, 1_000_000, seed=8)
    assert r.passed
    assert r.analytic == pytest.approx(2.5e-5)
    assert abs(r.extra["empirical_mean"] - 0.001) < 4 * 0.005 / 1000


def test_budget_oracle_empty():
    r = mc.validate_budget(ErrorBudget(), 0.5, 10_000, seed=8)
    assert r.empirical == 0.0 and r.passed


def test_reproducible(nernst):
    a = mc.validate_soc_lemma(nernst, 0.3, 0.005, 100_000, seed=42)
    b = mc.validate_soc_lemma(nernst, 0.3, 0.005, 100_000, seed=42)
    assert a == b


def test_parallel_matches_serial(nernst):
    serial = mc.validate_capacity(nernst, 0.9, 0.4, 5.0, 0.005, 300_000, seed=9, n_jobs=1)
    parallel = mc.validate_capacity(nernst, 0.9, 0.4, 5.0, 0.005, 300_000, seed=9, n_jobs=4)
    for s, p in zip(serial, parallel):
        assert p.empirical == pytest.approx(s.empirical, rel=1e-12)


def _convergence_flags(n_seeds):
    budget = ErrorBudget([ErrorSource.constant("meas", 0.005)])
    flags = []
    for seed in range(n_seeds):
        small = mc.validate_budget(budget, 0.5, 10_000, seed=seed)
        large = mc.validate_budget(budget, 0.5, 1_000_000, seed=seed)
        flags.append(large.rel_error <= small.rel_error)
    return np.array(flags)


@pytest.mark.xfail(
    strict=False,
    reason="a 10x smaller Monte-Carlo error still exceeds the 1e4-sample error with "
    "probability (2/pi)*atan(0.1) = 6.3% > 5%, so a 95% bound cannot hold in general",
)
def test_convergence_over_seeds():
    assert _convergence_flags(20).mean() >= 0.95


def test_convergence_rate_matches_theory():
    # errors are ~Gaussian with s.d. ratio sqrt(1e6/1e4) = 10
    expected = 1 - 2 / np.pi * np.arctan(0.1)
    flags = _convergence_flags(300)
    se = np.sqrt(expected * (1 - expected) / flags.size)
    assert abs(flags.mean() - expected) < 3 * se


def test_bias_diagnostic(nernst):
    budget = ErrorBudget([ErrorSource.constant("temperature", 0.001, mean=0.004)])
    assert mc.soc_bias_first_order(nernst, budget, 0.5) == pytest.approx(0.01)


def test_jsonl_and_csv():
    reports = [mc.McReport.compare("SocMean", 0.5, 0.5001, 10, 0.004)]
    line = json.loads(mc.reports_to_jsonl(reports).splitlines()[0])
    assert line["quantity"] == "SocMean" and line["passed"] is True
    csv_text = mc.reports_to_csv(reports)
    assert csv_text.splitlines()[0] == "quantity,analytic,empirical,rel_error,passed"
    assert csv_text.splitlines()[1].endswith(",true")


def test_quick_suite_passes():
    reports = mc.run_suite("quick", seed=7)
    assert all(r.passed for r in reports if r.asserted)
    assert any(not r.asserted for r in reports)
