import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ocvu import ErrorBudget, ErrorSource, SourceKind, combined_bias, combined_sd, sample
from ocvu.exceptions import ParseError
from ocvu.uncertainty import combined_variance, soc_error_sd

ALL_KINDS = [k.value for k in SourceKind]


def test_six_kinds():
    assert ALL_KINDS == ["c2c", "temperature", "aging", "crate", "curvefit", "meas"]


def test_all_zero_budget_is_perfect(nernst):
    budget = ErrorBudget([ErrorSource.constant(k, 0.0) for k in ALL_KINDS])
    grid = np.linspace(0, 1, 11)
    assert np.all(combined_sd(budget, grid) == 0.0)
    assert np.all(soc_error_sd(nernst, budget, grid) == 0.0)


def test_empty_budget():
    budget = ErrorBudget()
    assert combined_sd(budget, 0.3) == 0.0
    assert combined_bias(budget, 0.3) == 0.0
    rng = np.random.default_rng(0)
    assert sample(budget, 0.3, rng) == 0.0
    assert np.all(sample(budget, 0.3, rng, 100) == 0.0)


def test_single_source():
    budget = ErrorBudget([ErrorSource.constant("meas", 0.005)])
    assert combined_sd(budget, 0.7) == 0.005


def test_three_four_five():
    budget = ErrorBudget([ErrorSource.constant("c2c", 0.003), ErrorSource.constant("aging", 0.004)])
    assert combined_sd(budget, 0.42) == pytest.approx(0.005, rel=2.3e-16)


def test_bias_sum_and_cancellation():
    assert combined_bias(ErrorBudget([ErrorSource.constant("temperature", 0.0)]), 0.5) == 0.0
    one = ErrorBudget([ErrorSource.constant("temperature", 0.001, mean=0.002)])
    assert np.all(combined_bias(one, np.linspace(0, 1, 7)) == 0.002)
    two = one.with_source(ErrorSource.constant("aging", 0.001, mean=-0.002))
    assert combined_bias(two, 0.5) == 0.0
    # means never enter the variance
    assert combined_variance(two, 0.5) == 2 * 0.001**2


def test_piecewise_linear_interpolation():
    src = ErrorSource("curvefit", [0.0, 0.5, 1.0], [0.0, 0.002, 0.0], [0.004, 0.002, 0.004])
    assert src.sd(0.25) == pytest.approx(0.003)
    assert src.mean(0.75) == pytest.approx(0.001)


def test_source_validation():
    with pytest.raises(ValueError):
        ErrorSource("meas", [0.0], [0.0], [0.0])
    with pytest.raises(ValueError):
        ErrorSource("meas", [0.0, 1.0], [0.0, 0.0], [0.001, -0.001])
    with pytest.raises(ValueError):
        ErrorSource("meas", [0.1, 1.0], [0.0, 0.0], [0.0, 0.0])
    with pytest.raises(ValueError):
        ErrorSource("humidity", [0.0, 1.0], [0.0, 0.0], [0.0, 0.0])


def test_duplicate_kind_rejected():
    with pytest.raises(ValueError):
        ErrorBudget([ErrorSource.constant("meas", 0.001), ErrorSource.constant("meas", 0.002)])


def test_budget_json_roundtrip():
    budget = ErrorBudget(
        [
            ErrorSource("curvefit", [0.0, 0.5, 1.0], [0.0, 0.001, 0.0], [0.003, 0.001, 0.002]),
            ErrorSource.constant("c2c", 0.002, mean=0.0005),
        ]
    )
    data = json.loads(budget.to_json())
    assert set(data["sources"][0]) == {"kind", "soc_knots", "mean_v", "sd_v"}
    back = ErrorBudget.from_json(budget.to_json())
    grid = np.linspace(0, 1, 13)
    np.testing.assert_array_equal(combined_sd(back, grid), combined_sd(budget, grid))
    np.testing.assert_array_equal(combined_bias(back, grid), combined_bias(budget, grid))


def test_budget_json_errors():
    with pytest.raises(ParseError):
        ErrorBudget.from_json("{not json")
    with pytest.raises(ParseError):
        ErrorBudget.from_json('{"sources": [{"kind": "meas"}]}')


sd_lists = st.lists(st.floats(0.0, 0.02), min_size=3, max_size=3)


@settings(max_examples=40)
@given(st.lists(st.tuples(st.sampled_from(ALL_KINDS), sd_lists), min_size=0, max_size=6,
                unique_by=lambda x: x[0]))
def test_additivity_at_knots(spec):
    knots = [0.0, 0.4, 1.0]
    budget = ErrorBudget([ErrorSource(k, knots, [0.0] * 3, sds) for k, sds in spec])
    for j, s in enumerate(knots):
        expected = 0.0
        for src in budget:
            expected += src.sd_v[j] ** 2
        assert combined_variance(budget, s) == expected
        assert combined_sd(budget, s) == pytest.approx(np.sqrt(expected), rel=1e-15, abs=0)


def test_order_independence():
    sources = [
        ErrorSource.constant("c2c", 0.002, mean=0.001),
        ErrorSource("curvefit", [0.0, 0.5, 1.0], [0.0, 0.0, 0.0], [0.003, 0.001, 0.002]),
        ErrorSource.constant("meas", 0.004),
    ]
    grid = np.linspace(0, 1, 9)
    ref = ErrorBudget(sources)
    ref_draws = sample(ref, 0.3, np.random.default_rng(5), 1000)
    for perm in itertools.permutations(sources):
        b = ErrorBudget(perm)
        np.testing.assert_array_equal(combined_sd(b, grid), combined_sd(ref, grid))
        np.testing.assert_array_equal(combined_bias(b, grid), combined_bias(ref, grid))
        np.testing.assert_array_equal(sample(b, 0.3, np.random.default_rng(5), 1000), ref_draws)


def test_sample_moments():
    budget = ErrorBudget([ErrorSource.constant("c2c", 0.003, mean=0.001), ErrorSource.constant("meas", 0.004)])
    draws = sample(budget, 0.5, np.random.default_rng(2024), 1_000_000)
    sd = combined_sd(budget, 0.5)
    assert abs(draws.mean() - combined_bias(budget, 0.5)) < 4 * sd / 1000
    assert draws.std(ddof=1) == pytest.approx(sd, rel=0.01)


def test_sample_independence():
    a = ErrorSource.constant("c2c", 0.003)
    b = ErrorSource.constant("aging", 0.004)
    both = sample(ErrorBudget([a, b]), 0.5, np.random.default_rng(8), 1_000_000)
    va = sample(ErrorBudget([a]), 0.5, np.random.default_rng(9), 1_000_000).var(ddof=1)
    vb = sample(ErrorBudget([b]), 0.5, np.random.default_rng(10), 1_000_000).var(ddof=1)
    assert both.var(ddof=1) == pytest.approx(va + vb, rel=0.02)


def test_sample_deterministic():
    budget = ErrorBudget([ErrorSource.constant("meas", 0.004)])
    assert sample(budget, 0.2, np.random.default_rng(1)) == sample(budget, 0.2, np.random.default_rng(1))
