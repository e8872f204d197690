"""Progression forms: dual routes, projections, and the gap bound."""

import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reclab.harmonic import GridFunction
from reclab.lattice import SubgroupModel
from reclab.roth import (
    annihilator_contains,
    quotient_gap_bound,
    quotient_project,
    quotient_project_exact,
    quotient_project_spectral,
    roth_form,
    roth_form_exact,
)


def indicator(dim, q, points):
    vals = np.zeros((q,) * dim)
    for p in points:
        vals[p] = 1.0
    return GridFunction(dim, q, vals)


def test_point_mass_form_value():
    # only x = s = 0 contributes: exactly 1/q^2
    f = indicator(1, 5, [(0,)])
    assert abs(roth_form(f, f, f) - 1 / 25) < 1e-15
    exact = np.zeros((5,), dtype=object)
    exact[:] = Fraction(0)
    exact[0] = Fraction(1)
    assert roth_form_exact(exact, exact, exact) == Fraction(1, 25)


def test_form_counts_progressions():
    # for indicators the form is (number of (x, s) pairs with x, x+s, x+2s
    # in the set) / q^2, degenerate progressions included
    rng = random.Random(4)
    for q in (5, 7, 9):
        pts = {(rng.randrange(q),) for _ in range(rng.randint(1, q))}
        f = indicator(1, q, pts)
        count = sum(
            1
            for x in range(q)
            for s in range(q)
            if (x,) in pts and ((x + s) % q,) in pts and ((x + 2 * s) % q,) in pts
        )
        assert abs(roth_form(f, f, f) - count / q**2) < 1e-12


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=40)
def test_direct_equals_spectral_on_odd_grids(seed):
    rng = random.Random(seed)
    q = rng.choice([3, 5, 7, 9])
    dim = rng.randint(1, 2)
    fs = [GridFunction.random(dim, q, seed + i) for i in range(3)]
    direct = roth_form(*fs, method="direct")
    spectral = roth_form(*fs, method="spectral")
    assert abs(direct - spectral) < 1e-9


def test_spectral_rejects_even_grids():
    fs = [GridFunction.random(1, 6, i) for i in range(3)]
    with pytest.raises(ValueError, match="odd"):
        roth_form(*fs, method="spectral")
    # the direct route stays available
    roth_form(*fs, method="direct")


def test_form_translation_invariance():
    fs = [GridFunction.random(2, 5, 10 + i) for i in range(3)]
    base = roth_form(*fs)
    shifted = [f.translate([2, 3]) for f in fs]
    assert abs(base - roth_form(*shifted)) < 1e-12


def test_exact_form_matches_float():
    rng = random.Random(9)
    arrs = []
    for _ in range(3):
        a = np.empty((7,), dtype=object)
        for i in range(7):
            a[i] = Fraction(rng.randint(-6, 6), 5)
        arrs.append(a)
    exact = roth_form_exact(*arrs)
    floats = [GridFunction(1, 7, a.astype(complex)) for a in arrs]
    assert abs(float(exact) - roth_form(*floats).real) < 1e-12


# ---- projections ----


def test_project_trivial_and_full_subgroups():
    f = GridFunction.random(2, 5, 3)
    identity = quotient_project(f, SubgroupModel.trivial(5, 2))
    assert np.allclose(identity.values, f.values)
    const = quotient_project(f, SubgroupModel.full(5, 2))
    assert np.allclose(const.values, f.mean())


def test_project_line_subgroup_gives_row_means():
    # averaging over {0} x Z_5 replaces each row by its mean
    f = GridFunction.random(2, 5, 8)
    K = SubgroupModel.from_generators(5, 2, [[0, 1]])
    proj = quotient_project(f, K)
    for i in range(5):
        assert np.allclose(proj.values[i, :], f.values[i, :].mean())
    # spectrum support: only frequencies (a, 0) survive
    hat = proj.dft().values
    for n in range(5):
        for m in range(1, 5):
            assert abs(hat[n, m]) < 1e-12
    assert annihilator_contains(K, (3, 0)) and not annihilator_contains(K, (3, 1))


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=30)
def test_projection_routes_agree_and_are_idempotent(seed):
    rng = random.Random(seed)
    q = rng.choice([4, 5, 6, 9])
    dim = rng.randint(1, 2)
    gens = [[rng.randrange(q) for _ in range(dim)] for _ in range(rng.randint(0, 2))]
    K = SubgroupModel.from_generators(q, dim, gens)
    f = GridFunction.random(dim, q, seed)
    direct = quotient_project(f, K)
    spectral = quotient_project_spectral(f, K)
    assert np.allclose(direct.values, spectral.values, atol=1e-10)
    twice = quotient_project(direct, K)
    assert np.allclose(twice.values, direct.values, atol=1e-12)
    assert abs(direct.mean() - f.mean()) < 1e-12


def test_exact_projection_matches_and_is_exactly_idempotent():
    rng = random.Random(12)
    vals = np.empty((6, 6), dtype=object)
    for idx in np.ndindex(6, 6):
        vals[idx] = Fraction(rng.randint(-9, 9), 4)
    K = SubgroupModel.from_generators(6, 2, [[2, 0], [0, 3]])
    proj = quotient_project_exact(vals, K)
    again = quotient_project_exact(proj, K)
    assert (proj == again).all()
    f = GridFunction(2, 6, vals.astype(complex))
    assert np.allclose(proj.astype(complex), quotient_project(f, K).values)
    # mean preserved exactly
    assert sum(proj.flat, Fraction(0)) == sum(vals.flat, Fraction(0))


# ---- gap bound ----


def test_projected_one_slot_equals_projected_all():
    # masking the last slot to the annihilator equals projecting all three
    fs = [GridFunction.random(2, 5, 20 + i) for i in range(3)]
    K = SubgroupModel.from_generators(5, 2, [[1, 2]])
    projected = [quotient_project(f, K) for f in fs]
    one = roth_form(fs[0], fs[1], projected[2])
    all_three = roth_form(*projected)
    assert abs(one - all_three) < 1e-12


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=30)
def test_gap_bound_holds(seed):
    rng = random.Random(seed)
    gens = [[rng.randrange(5) for _ in range(2)] for _ in range(rng.randint(0, 2))]
    K = SubgroupModel.from_generators(5, 2, gens)
    fs = [GridFunction.random(2, 5, seed + 7 * i) for i in range(3)]
    report = quotient_gap_bound(*fs, K)
    assert report["gap"] <= report["bound"] + 1e-9


def test_gap_bound_rejects_even_grid():
    fs = [GridFunction.random(1, 4, i) for i in range(3)]
    with pytest.raises(ValueError, match="odd"):
        quotient_gap_bound(*fs, SubgroupModel.trivial(4, 1))
