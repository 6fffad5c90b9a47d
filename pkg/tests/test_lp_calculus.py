import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anosov_lab.lp_calculus import (ConeSymbol, ConfigurationError, CutoffSpec, Grid2Field, GridSpec,
                                    annulus_symbol, band_filter, build_lp_filters, hz_norm, hz_norm_coeffs,
                                    lattice_compose, random_trig_field, smoothstep, symbol_table)

SPEC = GridSpec(64)


def test_gridspec_rejects_non_power_of_two():
    with pytest.raises(ConfigurationError):
        GridSpec(100)
    with pytest.raises(ConfigurationError):
        GridSpec(4)


def test_coeff_normalization_plane_wave():
    f = Grid2Field.from_function(SPEC, lambda x1, x2: np.exp(2j * np.pi * (3 * x1 - 2 * x2)))
    c = f.coeffs
    assert abs(c[3, -2] - 1.0) < 1e-12
    assert np.sum(np.abs(c)) == pytest.approx(1.0)


def test_filter_bank_partition_of_unity():
    bank = build_lp_filters(GridSpec(256))
    assert bank.reconstruction_error() <= 1e-12
    assert bank.describe()["j_max"] == bank.j_max


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), k_max=st.integers(1, 30))
def test_band_sum_reconstructs(seed, k_max):
    f = random_trig_field(SPEC, k_max, np.random.default_rng(seed))
    bank = build_lp_filters(SPEC)
    rec = sum(band_filter(f, bank, j).values for j in range(len(bank)))
    assert np.max(np.abs(rec - f.values)) <= 1e-10 * max(1.0, f.sup())


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), c=st.floats(-5, 5).filter(lambda v: abs(v) > 1e-3),
       s=st.floats(-1, 2))
def test_hz_norm_homogeneous(seed, c, s):
    f = random_trig_field(SPEC, 10, np.random.default_rng(seed))
    assert hz_norm(f * c, s) == pytest.approx(abs(c) * hz_norm(f, s), rel=1e-10)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), s=st.floats(-1, 2))
def test_hz_norm_coeffs_matches_grid_path(seed, s):
    f = random_trig_field(SPEC, 20, np.random.default_rng(seed))
    bank = build_lp_filters(SPEC)
    assert hz_norm_coeffs(f.coeffs, s, bank) == pytest.approx(hz_norm(f, s, bank), rel=1e-10)


def test_hz_norm_monotone_in_s():
    f = random_trig_field(SPEC, 20, np.random.default_rng(1))
    vals = [hz_norm(f, s) for s in (-1, 0, 0.5, 1, 2)]
    assert all(a <= b for a, b in zip(vals, vals[1:]))


@given(st.floats(-1, 2, allow_nan=False))
def test_smoothstep_range(y):
    v = float(smoothstep(y))
    assert 0.0 <= v <= 1.0
    if y <= 0:
        assert v == 0.0
    if y >= 1:
        assert v == 1.0


def test_smoothstep_symmetry():
    y = np.linspace(0, 1, 101)
    assert np.allclose(smoothstep(y) + smoothstep(1 - y), 1.0, atol=1e-14)


def test_cutoff_psi_profile():
    c = CutoffSpec()
    t = np.linspace(0, 4, 401)
    p = c.psi(t)
    assert np.all(np.diff(p) <= 1e-15)
    assert p[0] == 1.0 and p[-1] == 0.0


def test_cone_symbol_values():
    sym = ConeSymbol(direction=(1, 0), half_angle=math.radians(20), r_lo=1.0, r_hi=4.0)
    assert sym(2.0, 0.0) == pytest.approx(1.0)
    assert sym(-2.0, 0.0) == pytest.approx(1.0)
    assert sym(0.0, 2.0) == 0.0
    assert sym(0.5, 0.0) == 0.0
    tab = symbol_table(sym, 64, h=0.1)
    assert tab.min() >= 0 and tab.max() <= 1


def test_cone_symbol_validation():
    with pytest.raises(ConfigurationError):
        ConeSymbol(direction=(1, 0), half_angle=None)
    with pytest.raises(ConfigurationError):
        ConeSymbol(r_lo=3.0, r_hi=2.0)


def test_annulus_scaled():
    a = annulus_symbol()
    b = a.scaled(2.0)
    assert b(3.0, 0.0) == pytest.approx(a(1.5, 0.0))


def test_lattice_compose_inverse():
    v = random_trig_field(SPEC, 8, np.random.default_rng(2)).values
    A = np.array([[2, 1], [1, 1]])
    back = lattice_compose(lattice_compose(v, A, 1), A, -1)
    assert np.array_equal(back, v)


def test_random_trig_field_nyquist_guard():
    with pytest.raises(ConfigurationError):
        random_trig_field(SPEC, 32, np.random.default_rng(0))
