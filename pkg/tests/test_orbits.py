import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from anosov_lab.lp_calculus import Grid2Field, GridSpec
from anosov_lab.orbits import (SYSTOLE, canonical_word, cyclic_reduce, enumerate_periodic_orbits, invert_word,
                               marked_spectrum, orbit_period, period_point_count, trace_recursion_counts, xray)
from anosov_lab.systems import cat_map_system, suspension_flow

CAT = cat_map_system()
words = st.text(alphabet="abcdABCD", min_size=1, max_size=8)


def test_point_counts_match_trace():
    rec = trace_recursion_counts(8)
    for n in range(1, 9):
        assert period_point_count(CAT.matrix, n) == rec[n]


def test_orbits_are_periodic_and_distinct():
    orbs = enumerate_periodic_orbits(CAT, 6)
    ids = [o.orbit_id for o in orbs]
    assert len(ids) == len(set(ids))
    for o in orbs:
        p = o.points
        img = CAT(p)
        d = (np.roll(p, -1, axis=0) - img + 0.5) % 1.0 - 0.5
        assert np.max(np.abs(d)) < 1e-12


def test_rotation_keeps_identity():
    o = [x for x in enumerate_periodic_orbits(CAT, 5) if x.period == 5][0]
    assert o.rotated(2).orbit_id == o.orbit_id


def test_unit_roof_period_is_combinatorial():
    flow = suspension_flow(CAT, Grid2Field.constant(GridSpec(16), 1.0))
    for o in enumerate_periodic_orbits(CAT, 5):
        assert orbit_period(flow, o) == pytest.approx(o.period)


def test_xray_constant():
    f = Grid2Field.constant(GridSpec(16), 0.7)
    for o in enumerate_periodic_orbits(CAT, 4):
        assert xray(f, o, CAT) == pytest.approx(0.7)


def test_marked_spectrum_csv_deterministic():
    flow = suspension_flow(CAT, Grid2Field.constant(GridSpec(16), 1.0))
    assert marked_spectrum(flow, 4).to_csv() == marked_spectrum(flow, 4).to_csv()


@given(words, st.integers(0, 7))
def test_canonical_word_rotation_invariant(w, k):
    r = cyclic_reduce(w)
    if not r:
        return
    k %= len(r)
    assert canonical_word(r[k:] + r[:k]) == canonical_word(r)


@given(words)
def test_canonical_word_inverse_invariant(w):
    assert canonical_word(invert_word(w)) == canonical_word(w)


def test_systole_value():
    assert SYSTOLE == pytest.approx(2 * math.acosh(1 + math.sqrt(2)))
