import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deadline_goodput import DomainError, ModelParams, coding, skipping
from deadline_goodput.optimizer import additional_gain, golden_section_max, optimal_threshold
from reference import SUSPECT_CELL, TABLE1, TABLE1_D


@pytest.mark.parametrize("lam,d,expected", [(8, 0.2, 24.20), (1, 0.4, 2.21), (0.5, 0.5, 0.48), (4, 0.3, 15.30)])
def test_table_cells(lam, d, expected):
    assert optimal_threshold(ModelParams.single(lam, 1, d)).gain_percent == pytest.approx(expected, abs=0.05)


def test_suspect_cell_is_smooth_in_lambda():
    row = [optimal_threshold(ModelParams.single(lam, 1, SUSPECT_CELL[1])).gain_percent for lam in TABLE1]
    assert row == sorted(row)
    assert TABLE1[1.0][0] < row[2] < TABLE1[4.0][0]


def test_long_deadline_prefers_no_threshold():
    res = optimal_threshold(ModelParams.single(1, 1, 1e6))
    assert res.theta_star == 0.0 and res.gain_at_star == 0.0


def test_degenerate_inputs():
    assert optimal_threshold(ModelParams.single(0, 1, 1)).theta_star == 0.0
    assert optimal_threshold(ModelParams.single(1, 1, 0)).gain_at_star == 0.0
    with pytest.raises(DomainError):
        optimal_threshold(ModelParams.single(1, 1, 1), resolution=0)
    with pytest.raises(DomainError):
        optimal_threshold(ModelParams.single(1, 1, 1), model="coding")


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 10), st.floats(0.01, 2))
def test_gain_nonnegative_and_refined(lam, d):
    p = ModelParams.single(lam, 1, d)
    res = optimal_threshold(p)
    assert 0 <= res.theta_star <= d and res.gain_at_star >= 0
    thetas = np.linspace(0, d, 2001)
    curve = skipping.goodput_curve(p, thetas)
    grid_best = (curve.max() - curve[0]) / curve[0]
    assert res.gain_at_star >= grid_best - 1e-12
    achieved = skipping.goodput(p.replace(theta=res.theta_star))
    assert (achieved - curve[0]) / curve[0] == pytest.approx(res.gain_at_star, abs=1e-12)


def test_joint_optimum_is_relative_to_coding():
    p = ModelParams.symmetric(4, 1, 0.3)
    res = optimal_threshold(p, "joint")
    coded = coding.goodput_report(p).gamma_total
    best = coding.goodput_report(p.replace(theta=res.theta_star)).gamma_total
    assert res.gain_at_star == pytest.approx((best - coded) / coded, rel=1e-12)
    theta, extra = additional_gain(p)
    assert isinstance(extra, float)
    assert theta == res.theta_star
    assert extra == pytest.approx((best - coded) / coding.base_goodput(p), rel=1e-12)


def test_golden_section():
    x, fx = golden_section_max(lambda x: -((x - 0.3) ** 2), 0, 1, 1e-9)
    assert x == pytest.approx(0.3, abs=1e-8) and fx <= 0
    assert golden_section_max(math.sin, 0, 1, 1e-9)[0] == pytest.approx(1, abs=1e-8)
