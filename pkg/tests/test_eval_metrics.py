from __future__ import annotations

import numpy as np
import pytest

from predfolio.errors import (
    ConfigError,
    DegenerateInputError,
    InsufficientDataError,
    MetricError,
)
from predfolio.eval_metrics import (
    evaluate,
    hit_rates,
    ks_normality_test,
    mape,
    mean_error,
    rmse,
    signed_mean_error,
    summarize_reports,
)


# ------------------------------------------------------------ point metrics

def test_mean_error_hand_values():
    assert mean_error([0.1, 0.2], [0.1, 0.2]) == 0.0
    assert mean_error([0.02, -0.01], [0.01, 0.01]) == pytest.approx(0.015, abs=1e-12)


def test_signed_mean_error_tracks_bias():
    assert signed_mean_error([0.02, -0.01], [0.01, 0.01]) == pytest.approx(-0.005, abs=1e-12)
    assert signed_mean_error([0.1, 0.1], [0.1, 0.1]) == 0.0


def test_rmse_hand_values():
    assert rmse([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert rmse([0.03, -0.04], [0.0, 0.0]) == pytest.approx(np.sqrt(0.00125), abs=1e-9)


def test_rmse_never_below_mean_error(rng):
    for _ in range(50):
        n = int(rng.integers(1, 30))
        real = rng.normal(size=n)
        predicted = rng.normal(size=n)
        assert rmse(real, predicted) >= mean_error(real, predicted) - 1e-15


def test_length_mismatch_raises():
    with pytest.raises(MetricError):
        mean_error([1.0], [1.0, 2.0])
    with pytest.raises(MetricError):
        rmse([], [])


def test_mape_hand_value_and_guard():
    assert mape([0.02], [0.01]).value == pytest.approx(0.5, abs=1e-12)
    assert mape([0.1, 0.2], [0.1, 0.2]) == (0.0, 0)
    undefined = mape([0.0], [0.01])
    assert undefined.value is None
    assert undefined.skipped == 1


def test_mape_skips_only_near_zero_terms():
    result = mape([0.0, 0.02], [0.05, 0.01])
    assert result.skipped == 1
    assert result.value == pytest.approx(0.5, abs=1e-12)


def test_hit_rates_hand_count():
    rates = hit_rates([1.0, -1.0, 1.0, 0.0], [1.0, 1.0, -1.0, 1.0])
    assert rates.hr == pytest.approx(1.0 / 3.0)
    assert rates.hr_plus == pytest.approx(1.0 / 3.0)
    assert rates.hr_minus == 0.0


def test_hit_rates_perfect_signals(rng):
    real = rng.choice([-0.02, 0.03], size=40)
    rates = hit_rates(real, real)
    assert rates == (1.0, 1.0, 1.0)


def test_hit_rates_undefined_when_denominator_zero():
    rates = hit_rates([1.0, -1.0], [0.0, 0.0])
    assert rates.hr is None
    assert rates.hr_plus is None
    assert rates.hr_minus is None


def test_metrics_permutation_invariant(rng):
    real = rng.normal(size=25)
    predicted = rng.normal(size=25)
    perm = rng.permutation(25)
    base = evaluate(real, predicted)
    shuffled = evaluate(real[perm], predicted[perm])
    assert base.me == pytest.approx(shuffled.me, rel=1e-12)
    assert base.rmse == pytest.approx(shuffled.rmse, rel=1e-12)
    assert base.mape == pytest.approx(shuffled.mape, rel=1e-12)
    assert base.hr == shuffled.hr
    assert base.hr_plus == shuffled.hr_plus
    assert base.hr_minus == shuffled.hr_minus


def test_hit_rate_bounds(rng):
    for _ in range(50):
        real = rng.normal(size=20)
        predicted = rng.normal(size=20)
        for rate in hit_rates(real, predicted):
            if rate is not None:
                assert 0.0 <= rate <= 1.0


def test_summarize_reports_drops_undefined(rng):
    reports = {
        "A": evaluate([0.01, -0.02], [0.02, -0.01]),
        "B": evaluate([0.0, 0.0], [0.01, 0.02]),  # mape undefined, hr undefined
    }
    rows = {name: (mean, var, std) for name, mean, var, std in summarize_reports(reports)}
    assert "me" in rows and "rmse" in rows
    assert rows["mape"][0] == pytest.approx(reports["A"].mape)


# ------------------------------------------------------------------ KS test

def test_ks_accepts_seeded_normal_samples():
    accepted = 0
    for seed in range(100):
        x = np.random.default_rng(seed).normal(size=1000)
        if ks_normality_test(x, alpha=0.05).accepted:
            accepted += 1
    assert accepted >= 90


def test_ks_rejects_uniform_samples():
    x = np.random.default_rng(0).uniform(size=1000)
    result = ks_normality_test(x, alpha=0.05)
    assert not result.accepted
    assert result.d_statistic > result.threshold


def test_ks_degenerate_sample_errors():
    with pytest.raises(DegenerateInputError):
        ks_normality_test(np.full(16, 3.0))


def test_ks_input_guards():
    with pytest.raises(InsufficientDataError):
        ks_normality_test(np.arange(5.0))
    with pytest.raises(ConfigError):
        ks_normality_test(np.random.default_rng(0).normal(size=50), alpha=1.5)


def test_ks_statistic_in_unit_interval_and_consistent(rng):
    for _ in range(20):
        x = rng.normal(size=int(rng.integers(10, 200)))
        result = ks_normality_test(x)
        assert 0.0 <= result.d_statistic <= 1.0
        assert result.accepted == (result.d_statistic <= result.threshold)


def test_ks_outlier_never_decreases_d():
    for seed in range(10):
        x = np.random.default_rng(seed).normal(size=500)
        base = ks_normality_test(x).d_statistic
        spiked = ks_normality_test(np.append(x, 1e6)).d_statistic
        assert spiked >= base


def test_ks_plain_threshold_available():
    x = np.random.default_rng(3).normal(size=200)
    plain = ks_normality_test(x, lilliefors=False)
    corrected = ks_normality_test(x, lilliefors=True)
    assert plain.threshold == pytest.approx(1.3581 / np.sqrt(200), rel=1e-3)
    assert plain.threshold > corrected.threshold
