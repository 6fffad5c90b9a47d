import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anosov_lab.cohomology import CocycleWeight
from anosov_lab.lp_calculus import Grid2Field, GridSpec, random_trig_field
from anosov_lab.source_lab import (SaturationError, SpectralPropagator, WaveFamily, block_decay_probe,
                                   make_radial_pair, propagation_pair, propagation_sweep, propagator_apply,
                                   stable_dual_direction, telescoping_residual, transport, validate_coverage)
from anosov_lab.systems import cat_map_system

CAT = cat_map_system()
SPEC = GridSpec(64)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), t=st.integers(1, 5))
def test_propagator_roundtrip(seed, t):
    f = random_trig_field(SPEC, 6, np.random.default_rng(seed))
    g = propagator_apply(CAT, -t, propagator_apply(CAT, t, f))
    assert np.array_equal(g.values, f.values)


def test_constant_weight_scales_exactly():
    f = Grid2Field.constant(SPEC, 1.0)
    g = propagator_apply(CAT, 4, f, weight=0.2)
    assert np.allclose(g.values, math.exp(0.8), rtol=1e-14)


def test_fractional_time_rejected():
    with pytest.raises(ValueError):
        propagator_apply(CAT, 0.5, Grid2Field.constant(SPEC, 1.0))


def test_transport_group_law():
    xi = np.array([[1.0, 2.0]])
    assert np.allclose(transport(transport(xi, CAT.matrix, 3), CAT.matrix, -3), xi)
    assert np.allclose(transport(xi, CAT.matrix, 2), transport(transport(xi, CAT.matrix, 1), CAT.matrix, 1))


def test_dual_directions_scale_under_transpose():
    es, eu = stable_dual_direction(CAT)
    B = CAT.matrix.T.astype(float)
    assert np.linalg.norm(B @ es) == pytest.approx(CAT.lam_u)
    assert np.linalg.norm(B @ eu) == pytest.approx(1 / CAT.lam_u)
    assert abs(es @ eu) < 1e-12


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), T=st.integers(1, 6))
def test_telescoping_identity(seed, T):
    u = random_trig_field(SPEC, 10, np.random.default_rng(seed))
    L = SpectralPropagator(SPEC.n_side, CAT.matrix, CocycleWeight("scalar", 0.3))
    assert telescoping_residual(u, L, T) < 1e-9


def test_radial_pair_narrow_and_wide():
    pair = make_radial_pair(CAT, math.radians(20))
    assert pair.T == 1 and pair.max_B_deficit == 0
    with pytest.raises(SaturationError):
        make_radial_pair(CAT, math.radians(60))


def test_propagation_pair_covers():
    A, B, D = propagation_pair(CAT, T=3)
    assert validate_coverage(A, D, B, CAT.matrix, 3) == (0.0, 0.0)
    out = propagation_sweep(CAT, A, B, D, 0.5, 3, n_samples=8, spec=GridSpec(128))
    assert out["coverage_deficit"] == (0.0, 0.0)
    assert out["max"] < 10


def test_block_decay_rate_and_flat_profile():
    es, _ = stable_dual_direction(CAT)
    h = 2.0**-6
    fam = WaveFamily.along(es, 0.6 * CAT.lam_u**8 / h)
    Ts = list(range(2, 9))
    _, vals, slope = block_decay_probe(CAT, fam, 0.5, Ts, h=h)
    assert slope == pytest.approx(-0.5 * CAT.log_lambda, rel=0.2)
    _, _, flat = block_decay_probe(CAT, fam, 0.0, Ts, h=h)
    assert abs(flat) < 0.02
