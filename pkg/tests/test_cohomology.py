import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anosov_lab.cohomology import (ObstructionError, coboundary, coboundary_free_part, livsic_solve,
                                   quotient_seminorm_lower, regularity_profile, weierstrass_field)
from anosov_lab.lp_calculus import Grid2Field, GridSpec, random_trig_field
from anosov_lab.orbits import enumerate_periodic_orbits, orbit_sum
from anosov_lab.systems import cat_map_system

CAT = cat_map_system()
SPEC = GridSpec(64)
ORBS = enumerate_periodic_orbits(CAT, 6)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), k=st.integers(1, 10))
def test_livsic_recovers(seed, k):
    u = random_trig_field(SPEC, k, np.random.default_rng(seed))
    res = livsic_solve(coboundary(u, CAT), system=CAT)
    assert np.max(np.abs(res.u.values - u.values)) < 1e-10
    assert res.backward_gap is not None and res.backward_gap < 1e-10


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_coboundary_orbit_sums_vanish(seed):
    F = coboundary(random_trig_field(SPEC, 5, np.random.default_rng(seed)), CAT)
    assert max(abs(orbit_sum(F, o)) for o in ORBS) < 1e-11


def test_nonzero_mean_is_obstructed():
    F = Grid2Field.constant(SPEC, 0.1)
    with pytest.raises(ObstructionError):
        livsic_solve(F, system=CAT)


def test_non_coboundary_is_obstructed():
    F = Grid2Field.from_function(SPEC, lambda x1, x2: np.cos(2 * np.pi * x1))
    with pytest.raises(ObstructionError):
        livsic_solve(F, system=CAT)


def test_free_part_of_coboundary_is_zero():
    F = coboundary(random_trig_field(SPEC, 4, np.random.default_rng(0)), CAT)
    rep = coboundary_free_part(F, CAT)
    assert np.max(np.abs(rep.values)) < 1e-10


def test_seminorm_detects_non_coboundary():
    f = lambda x1, x2: np.cos(2 * np.pi * x1)
    assert quotient_seminorm_lower(f, ORBS, CAT) > 0.1


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.8])
def test_weierstrass_exponent(alpha):
    spec = GridSpec(256)
    bank_top = 7
    f = weierstrass_field(spec, alpha, bank_top - 1)
    prof = regularity_profile(f)
    assert prof.alpha_hat == pytest.approx(alpha, abs=0.05)
    assert prof.to_csv().startswith("j,b_j\n")
