"""Acceptance criteria, each run at its stated tolerance.

Every test prints one PASS/FAIL line; the lines are also collected in the
terminal summary.
"""
import pytest

from nlrd import verify


def _run(record_check, fn, *args):
    check = record_check(fn(*args))
    assert check.passed, check.report()


def test_c01_fourier_pairs(record_check):
    _run(record_check, verify.check_fourier_pairs)


def test_c02_i2_against_direct_integration(record_check):
    _run(record_check, verify.check_i2_oracle)


def test_c03_uv_regulation_ordering(record_check):
    _run(record_check, verify.check_uv_ordering)


def test_c04a_effective_coupling_local_slope(record_check):
    _run(record_check, verify.check_effective_coupling_local)


def test_c04b_effective_coupling_spherical_small_t_slope(record_check):
    _run(record_check, verify.check_effective_coupling_spherical)


def test_c04c_spherical_remainder_slope_supplementary(record_check):
    _run(record_check, verify.check_spherical_remainder)


def test_c05_model1_flow_fixed_points(record_check):
    _run(record_check, verify.check_model1_flow)


def test_c06_callan_symanzik_identity(record_check):
    _run(record_check, verify.check_cs_identity)


@pytest.mark.slow
def test_c07_simulated_decay_d1(record_check):
    _run(record_check, verify.check_sim_d1)


@pytest.mark.slow
def test_c08_simulated_decay_d3(record_check):
    _run(record_check, verify.check_sim_d3)


@pytest.mark.slow
def test_c09_kernel_universality(record_check):
    _run(record_check, verify.check_sim_universality)


@pytest.mark.slow
def test_c10_model2_steady_state(record_check):
    _run(record_check, verify.check_sim_steady_state)


def test_c11_model2_flow(record_check):
    _run(record_check, verify.check_model2_flow)


def test_c12_two_loop_scaling(record_check):
    _run(record_check, verify.check_two_loop_scaling)


def test_c13_x1_scaling_collapse(record_check):
    _run(record_check, verify.check_x1_collapse)
