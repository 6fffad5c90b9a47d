import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anosov_lab.lp_calculus import Grid2Field, GridSpec
from anosov_lab.systems import (NotHyperbolicError, cat_map_system, fuchsian_bolza, lyapunov_data,
                                perturbed_cat_map, projector_lie_residual, suspension_flow)

CAT = cat_map_system()
pts = st.tuples(st.floats(0, 1, exclude_max=True), st.floats(0, 1, exclude_max=True))


def test_eigendata():
    assert CAT.lam_u == pytest.approx((3 + math.sqrt(5)) / 2)
    assert CAT.lam_u * CAT.lam_s == pytest.approx(1.0)
    assert CAT.log_lambda == pytest.approx(math.log((3 + math.sqrt(5)) / 2))
    assert abs(CAT.e_u @ CAT.e_s) < 1e-12


def test_non_hyperbolic_rejected():
    with pytest.raises(NotHyperbolicError):
        cat_map_system(((1, 1), (0, 1)))


@settings(max_examples=50, deadline=None)
@given(pts)
def test_inverse_roundtrip_linear(x):
    x = np.array([x])
    y = CAT.inverse(CAT(x))
    d = (y - x + 0.5) % 1.0 - 0.5
    assert np.max(np.abs(d)) < 1e-12


@settings(max_examples=30, deadline=None)
@given(pts)
def test_inverse_roundtrip_perturbed(x):
    m = perturbed_cat_map(CAT, 0.01)
    x = np.array([x])
    d = (m.inverse(m(x)) - x + 0.5) % 1.0 - 0.5
    assert np.max(np.abs(d)) < 1e-10


def test_perturbed_is_certified():
    m = perturbed_cat_map(CAT, 0.01)
    assert m.is_perturbed
    assert m.certificate is not None


def test_derivative_of_linear_map():
    D = CAT.derivative(np.array([[0.3, 0.7]]))
    assert np.array_equal(D[0], CAT.matrix.astype(float))


def test_lyapunov_suspension_scales_with_roof():
    spec = GridSpec(16)
    flow = suspension_flow(CAT, Grid2Field.constant(spec, 2.0))
    rep = lyapunov_data(flow, [[0.1, 0.2]], T=100)
    assert rep.lambda_u_max == pytest.approx(CAT.log_lambda / 2, abs=1e-8)


def test_lie_residual_linear_is_roundoff():
    assert projector_lie_residual(CAT, 1e-3) < 1e-10


def test_lie_residual_perturbed_shrinks():
    m = perturbed_cat_map(CAT, 0.01)
    r = [projector_lie_residual(m, d) for d in (1e-2, 1e-3)]
    assert r[1] < r[0] / 50


def test_bolza_relation():
    G = fuchsian_bolza()
    assert G.relation == "aBcDAbCd"
    assert G.relation_residual < 1e-10
    M = G.word_matrix("a")
    assert abs(np.linalg.det(M) - 1) < 1e-12
    assert abs(np.trace(M)) == pytest.approx(2 * (1 + math.sqrt(2)))
