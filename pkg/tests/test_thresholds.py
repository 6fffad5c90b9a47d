import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anosov_lab.lp_calculus import Grid2Field, GridSpec
from anosov_lab.systems import cat_map_system
from anosov_lab.thresholds import (SubadditiveSpec, forward_threshold, metric_independence_check,
                                   sobolev_threshold_integral, subadditive_limit)

CAT = cat_map_system()


@settings(max_examples=15, deadline=None)
@given(st.floats(0.0, 2.0))
def test_constant_weight_threshold(c):
    rep = forward_threshold(CAT, c, P=6)
    assert rep.omega_plus == pytest.approx(c / CAT.log_lambda, abs=1 / 64)


def test_threshold_reports_serialize():
    rep = forward_threshold(CAT, 0.3, P=5)
    assert '"omega_plus"' in rep.to_json()
    head = rep.orbit_csv().splitlines()[0]
    assert head == "orbit_id,period,length,weight_rate,unstable_rate,stable_rate"


def test_threshold_monotone_in_weight():
    w = [forward_threshold(CAT, c, P=6).omega_plus for c in (0.1, 0.4, 0.9)]
    assert w[0] <= w[1] <= w[2]


def test_metric_independence():
    out = metric_independence_check(CAT, 0.4, P=6)
    assert out is not None


def test_doubling_bounded_by_orbit_max_for_constant():
    rep = subadditive_limit(SubadditiveSpec("birkhoff", 0.25), CAT, m_max=6, P=6, n=64)
    assert rep.doubling[-1] == pytest.approx(0.25)
    assert rep.orbit_max == pytest.approx(0.25)


def test_l2_threshold_not_above_sup():
    w = Grid2Field.from_function(GridSpec(64), lambda x1, x2: np.sin(2 * np.pi * x2))
    s = sobolev_threshold_integral(CAT, w, T_max=5)
    f = forward_threshold(CAT, w, P=8)
    assert s.omega <= f.omega_plus + 1 / 64
