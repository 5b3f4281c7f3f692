import math

import pytest

from fbm_lab.errors import DomainError
from fbm_lab.estimators.intersection import expected_alpha
from fbm_lab.estimators.local_time import default_kernel
from fbm_lab.simulator.covariance import CovKind, ModelParams
from fbm_lab.theory.constants import RateBounds
from fbm_lab.theory.moments import QUADRATURE, MomentEstimate
from fbm_lab.utils.loader_and_saver import ExperimentConfig
from fbm_lab.utils.statistics import HOLDS, INCONCLUSIVE, VIOLATED
from fbm_lab.utils.verification import (
    HURST_GRID,
    LAW_EPSILON,
    CheckResult,
    SuiteReport,
    _core_checks,
    _intersection_checks,
    bracket_check,
    list_suites,
    sigma_check,
    threshold_check,
    tolerance_check,
    verify_suite,
)


def test_suites():
    assert list_suites() == ["core", "moments", "rkhs", "intersection"]
    with pytest.raises(DomainError):
        verify_suite("nope", ExperimentConfig("verify"))


def test_tolerance_check():
    assert tolerance_check("x", 1.0, 1.0 + 1e-13, 1e-12).verdict == HOLDS
    assert tolerance_check("x", 1.0, 1.1, 1e-12).verdict == VIOLATED


def test_sigma_check_bands():
    assert sigma_check("x", 1.01, 0.01, 1.0).verdict == HOLDS
    assert sigma_check("x", 1.02, 0.001, 1.0).verdict == INCONCLUSIVE
    assert sigma_check("x", 1.5, 0.001, 1.0).verdict == VIOLATED


def test_threshold_check():
    assert threshold_check("ks", 0.01, 0.05).verdict == HOLDS
    assert threshold_check("ks", 0.07, 0.05).verdict == INCONCLUSIVE


def test_bracket_check():
    bounds = RateBounds("moment", 1.0, 2.0)
    inside = MomentEstimate(2, 1.5, 0.001, 10, QUADRATURE)
    outside = MomentEstimate(2, 3.0, 0.001, 10, QUADRATURE)
    noisy = MomentEstimate(2, 1.5, 0.5, 10, QUADRATURE)
    assert bracket_check("b", inside, bounds).verdict == HOLDS
    assert bracket_check("b", outside, bounds).verdict == VIOLATED
    assert bracket_check("b", noisy, bounds).verdict == INCONCLUSIVE


def test_suite_exit_codes():
    def check(verdict):
        return CheckResult("c", "hard", verdict)

    assert SuiteReport("s", [check(HOLDS)]).exit_code == 0
    assert SuiteReport("s", [check(HOLDS), check(INCONCLUSIVE)]).exit_code == 5
    assert SuiteReport("s", [check(INCONCLUSIVE), check(VIOLATED)]).exit_code == 1
    record = SuiteReport("s", [check(HOLDS)]).to_dict()
    assert record["counts"] == {HOLDS: 1, INCONCLUSIVE: 0, VIOLATED: 0}


@pytest.mark.slow
def test_core_suite_has_no_violation():
    config = ExperimentConfig(
        "verify",
        replicas=400,
        n=128,
        budget=20000,
        seed=7,
        options={"law_steps": 4096, "decomposition_points": 8},
    )
    seen = []
    report = verify_suite(
        "core",
        config,
        on_check=lambda checks: seen.append(len(checks)),
    )
    assert report.counts[VIOLATED] == 0
    assert seen == list(range(1, len(report.checks) + 1))


def test_hurst_grid_of_the_c_H_bound():
    assert len(HURST_GRID) == 18
    assert HURST_GRID[0] == 0.05
    assert HURST_GRID[-1] == 0.95
    assert 0.5 not in HURST_GRID


def test_core_checks_bound_c_H_on_the_whole_grid():
    config = ExperimentConfig("verify", seed=7)
    checks = {check.name: check for check in _take(_core_checks(config), 10)}
    bound = checks["c_H = 1 at H=1/2 and c_H^2 < 2H elsewhere"]
    assert bound.verdict == HOLDS


def test_intersection_mean_uses_riemann_liouville_paths():
    config = ExperimentConfig("verify", replicas=40, n=32, seed=3)
    check = next(_intersection_checks(config))
    params = ModelParams(0.25, 1, 2)
    epsilon = default_kernel(1.0 / 32, params.H).epsilon
    rl = expected_alpha(params, CovKind.RL, [1.0, 1.0], epsilon)
    fbm = expected_alpha(params, CovKind.FBM, [1.0, 1.0], epsilon)
    assert check.expected == pytest.approx(rl, rel=1e-12)
    assert check.expected != pytest.approx(fbm, rel=1e-3)


def _take(checks, count):
    return [check for _, check in zip(range(count), checks)]


def test_law_kernel_keeps_smoothing_bias_inside_tolerance():
    def relative_bias(epsilon):
        return 1.0 - (math.sqrt(1.0 + epsilon) - math.sqrt(epsilon))

    assert relative_bias(1e-3) > 0.03
    assert relative_bias(LAW_EPSILON) < 0.02
