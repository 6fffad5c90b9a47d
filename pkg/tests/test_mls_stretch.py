import numpy as np
import pytest

from anosov_lab.cohomology import coboundary
from anosov_lab.lp_calculus import ConfigurationError, Grid2Field, GridSpec, random_trig_field
from anosov_lab.mls_stretch import (ReparameterizationError, compose, conformal_linearization_experiment,
                                    glued_test_function, mls_compare, reparam_invariance_check,
                                    spectrum_rigidity_check, stability_experiment, stretch_from_roofs,
                                    stretch_orbit_integral)
from anosov_lab.orbits import ConformalFactor, enumerate_periodic_orbits, orbit_period
from anosov_lab.systems import cat_map_system, fuchsian_bolza, suspension_flow

CAT = cat_map_system()
SPEC = GridSpec(32)
ONE = Grid2Field.constant(SPEC, 1.0)
RP = Grid2Field.from_function(SPEC, lambda x1, x2: 1 + 0.1 * np.cos(2 * np.pi * x1))
ORBS = enumerate_periodic_orbits(CAT, 6)


def test_stretch_integral_gives_target_period():
    a = stretch_from_roofs(ONE, RP, CAT)
    f2 = suspension_flow(CAT, RP)
    for o in ORBS:
        assert stretch_orbit_integral(a, o) == pytest.approx(orbit_period(f2, o), abs=1e-12)


def test_fixed_point_value():
    a = stretch_from_roofs(ONE, RP, CAT)
    fp = [o for o in ORBS if o.period == 1][0]
    assert stretch_orbit_integral(a, fp) == pytest.approx(1.1)


def test_compose_chains():
    R3 = Grid2Field.constant(SPEC, 2.0)
    a = compose(stretch_from_roofs(ONE, RP), stretch_from_roofs(RP, R3))
    o = ORBS.orbits[3]
    assert stretch_orbit_integral(a, o) == pytest.approx(2.0 * o.period)
    with pytest.raises(ConfigurationError):
        compose(stretch_from_roofs(ONE, RP), stretch_from_roofs(ONE, R3))


def test_mls_first_order_exact_for_suspensions():
    c = mls_compare(suspension_flow(CAT, ONE), suspension_flow(CAT, RP), 6, ORBS)
    assert c.max_residual() < 1e-12
    assert c.to_csv().count("\n") == len(ORBS) + 1


def test_rigidity_check_separates():
    w = coboundary(random_trig_field(SPEC, 3, np.random.default_rng(0)), CAT)
    cob = ONE + w * (0.3 / w.sup())
    eq, small, gap, _ = spectrum_rigidity_check(ONE, cob, CAT, 6, orbits=ORBS)
    assert eq and small and gap < 1e-12
    eq, small, _, _ = spectrum_rigidity_check(ONE, RP, CAT, 6, orbits=ORBS)
    assert not eq and not small


@pytest.mark.parametrize("u", [None, 0.37])
def test_reparam_invariance_simple(u):
    R2 = Grid2Field.from_function(SPEC, lambda x1, x2: 1.2 + 0.1 * np.sin(2 * np.pi * (x1 + x2)))
    a = stretch_from_roofs(RP, R2, CAT)
    short = [o for o in ORBS if o.period <= 3]
    assert reparam_invariance_check(a, u, short) < 1e-12


def test_reparam_invariance_glued():
    R2 = Grid2Field.from_function(SPEC, lambda x1, x2: 1.2 + 0.1 * np.sin(2 * np.pi * (x1 + x2)))
    a = stretch_from_roofs(RP, R2, CAT)
    g = random_trig_field(SPEC, 3, np.random.default_rng(4))
    u = glued_test_function(g * (0.05 / g.sup()), CAT.matrix)
    short = [o for o in ORBS if o.period <= 2]
    assert reparam_invariance_check(a, u, short) < 1e-10


def test_reparam_rejects_degenerate_time_change():
    R2 = Grid2Field.constant(SPEC, 1.0)
    a = stretch_from_roofs(RP, R2, CAT)
    g = random_trig_field(SPEC, 3, np.random.default_rng(4))
    u = glued_test_function(g * (50.0 / g.sup()), CAT.matrix)
    with pytest.raises(ReparameterizationError):
        reparam_invariance_check(a, u, ORBS.orbits[:2])


def test_stability_homogeneous():
    g = Grid2Field.from_function(SPEC, lambda x1, x2: np.cos(2 * np.pi * x1))
    rep = stability_experiment(ONE, [g * 1e-3, g * 1e-2], 6, CAT, orbits=ORBS)
    r = [row["ratio"] for row in rep.rows]
    assert r[0] == pytest.approx(r[1], rel=1e-12)


def test_stability_skips_coboundaries():
    w = coboundary(random_trig_field(SPEC, 3, np.random.default_rng(1)), CAT)
    rep = stability_experiment(ONE, [w * 0.01], 6, CAT, orbits=ORBS)
    assert rep.skipped == [0]


def test_conformal_needs_geometric_eps():
    with pytest.raises(ConfigurationError):
        conformal_linearization_experiment(fuchsian_bolza(), ConformalFactor(constant=1.0), [1e-2, 5e-3], ["a"])
