"""Acceptance criteria, each at its stated tolerance and sample size.

Every test records a one-line verdict that is printed in the terminal
summary, whether the test passes or not.
"""

import time

import pytest

from selbias import validate
from conftest import ACCEPTANCE_LINES


def run_check(check, *args, time_limit=None, **kwargs):
    t0 = time.perf_counter()
    result = check(*args, **kwargs)
    elapsed = time.perf_counter() - t0
    on_time = time_limit is None or elapsed < time_limit
    verdict = "PASS" if result.passed and on_time else "FAIL"
    limit = f" (limit {time_limit:g} s)" if time_limit else ""
    line = f"[{verdict}] {result.name}: {result.detail}; {elapsed:.2f} s{limit}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert result.passed, result.detail
    assert on_time, f"took {elapsed:.2f} s{limit}"


def test_golden_lambda():
    run_check(validate.check_golden_lambda, tol=0.005, time_limit=1.0)


def test_golden_probabilities():
    run_check(validate.check_golden_probabilities, tol=0.002, time_limit=1.0)


def test_regression_discrepancies():
    run_check(validate.check_regression, seed=0, time_limit=10.0)


def test_zero_bias():
    run_check(validate.check_zero_bias, seed=0, n_points=100, tol=1e-12)


def test_sign_law():
    run_check(validate.check_sign_law, seed=0, n_random=200)


def test_limits():
    run_check(validate.check_limits, tail_tol=1e-8)


def test_monotone_in_p():
    run_check(validate.check_monotone_in_p)


@pytest.mark.slow
def test_truncated_mean_oracle():
    run_check(validate.check_truncated_mean_rejection, seed=0, n_specs=10, n_accepted=10 ** 6,
                  dims=(2, 3, 5), time_limit=60.0)


@pytest.mark.slow
def test_bias_oracle():
    run_check(validate.check_bias_vs_simulation, seed=0, n_configs=5, n_reps=10 ** 6,
                  max_p=6, time_limit=120.0)


def test_cross_engine_cdf():
    run_check(validate.check_cross_engine_cdf, seed=0, n_instances=50, max_dim=10)


def test_density_normalization():
    run_check(validate.check_density_normalization, seed=0, max_dim=6, tol=1e-6)


@pytest.mark.slow
def test_selection_paradox():
    run_check(validate.check_paradox, seed=0, n_reps=10 ** 6)
