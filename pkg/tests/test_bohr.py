"""Bohr-Hamming set enumeration against brute-force torus oracles."""

import math
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from reclab.bohr import (
    BohrHammingBall,
    Frequency,
    continued_fraction_convergents,
    convergent_frequency,
    density_vs_measure,
    dilate,
    dilate_divide,
    named_convergent,
    set_enumerate,
    set_from_json,
    set_to_json,
    sqrt_set_enumerate,
    square_set,
)
from reclab.torus import ApproxHammingBall, TorusPoint

fractions_small = st.fractions(
    min_value=Fraction(0), max_value=Fraction(1), max_denominator=12
)
radii_small = st.fractions(
    min_value=Fraction(1, 12), max_value=Fraction(1, 2), max_denominator=12
)


def make_bh(beta_coords, center_coords, k, eps, generating=False):
    freq = Frequency.of(*beta_coords, generating=generating)
    ball = ApproxHammingBall(center=TorusPoint.of(center_coords), k=k, eps=eps)
    return BohrHammingBall(freq=freq, ball=ball)


def test_frequency_common_denominator():
    freq = Frequency.of("1/6", "3/4")
    assert freq.q == 12
    assert freq.numerators == (2, 9)
    assert freq.multiple(3).coords == (Fraction(1, 2), Fraction(1, 4))


def test_frequency_scale_gcd_rule():
    freq = Frequency.of("1/8", generating=True)
    assert freq.scale(3).generating
    assert freq.scale(3).beta.coords == (Fraction(3, 8),)
    assert not freq.scale(2).generating
    with pytest.raises(ValueError):
        freq.scale(0)


def test_contains_worked_examples():
    bh = make_bh(["1/8"], ["1/2"], k=0, eps="1/5")
    assert bh.contains(4)
    assert not bh.contains(1)
    # center far from 0 in every coordinate keeps 0 out of the set
    wide = make_bh(["1/8", "1/3"], ["1/2", "1/2"], k=1, eps="1/5")
    assert not wide.contains(0)


def test_dim_mismatch_rejected():
    with pytest.raises(ValueError):
        make_bh(["1/8", "1/3"], ["1/2"], k=0, eps="1/5")


@given(
    st.lists(fractions_small, min_size=1, max_size=3),
    st.data(),
)
def test_contains_matches_ball_oracle(beta_coords, data):
    r = len(beta_coords)
    center = data.draw(st.lists(fractions_small, min_size=r, max_size=r))
    k = data.draw(st.integers(0, r - 1))
    eps = data.draw(radii_small)
    bh = make_bh(beta_coords, center, k=k, eps=eps)
    for n in data.draw(st.lists(st.integers(-60, 60), min_size=1, max_size=8)):
        assert bh.contains(n) == bh.ball.contains(bh.freq.multiple(n))


@given(st.integers(-100, 100), st.integers(-3, 3))
def test_contains_is_periodic_mod_q(n, t):
    bh = make_bh(["1/6", "2/9"], ["1/3", "0"], k=1, eps="1/4")
    q = bh.freq.q
    assert q == 18
    assert bh.contains(n) == bh.contains(n + t * q)


def test_sqrt_set_frozen_example():
    bh = make_bh(["1/8"], ["1/2"], k=0, eps="1/5")
    elems, density = sqrt_set_enumerate(bh, 10)
    assert elems == [2, 6, 10]
    assert density == Fraction(3, 10)


def test_sqrt_set_matches_brute_force():
    bh = make_bh(["1/6", "3/10"], ["1/4", "2/3"], k=1, eps="1/5")
    elems, _ = sqrt_set_enumerate(bh, 200)
    oracle = [
        n
        for n in range(1, 201)
        if bh.ball.contains(bh.freq.multiple(n * n))
    ]
    assert elems == oracle


def test_sqrt_set_whole_torus_and_empty():
    # with eps = 1/2 and an off-grid center no coordinate can deviate
    full = make_bh(["1/8"], ["1/16"], k=0, eps="1/2")
    elems, density = sqrt_set_enumerate(full, 25)
    assert elems == list(range(1, 26))
    assert density == 1
    # a radius far below the orbit spacing empties the set
    empty = make_bh(["1/8"], ["1/3"], k=0, eps="1/1000")
    assert sqrt_set_enumerate(empty, 25).elems == []


def test_enumeration_rejects_bad_horizon():
    bh = make_bh(["1/8"], ["1/2"], k=0, eps="1/5")
    with pytest.raises(ValueError):
        sqrt_set_enumerate(bh, 0)
    with pytest.raises(ValueError):
        set_enumerate(bh, -4)


def test_partitioned_scan_matches_sequential(monkeypatch):
    bh = make_bh(["5/23", "7/19"], ["1/3", "1/7"], k=1, eps="1/4")
    sequential = sqrt_set_enumerate(bh, 500, workers=1)
    assert sqrt_set_enumerate(bh, 500, workers=4) == sequential
    monkeypatch.setenv("LAB_THREADS", "3")
    assert sqrt_set_enumerate(bh, 500) == sequential
    assert set_enumerate(bh, 500, workers=5) == set_enumerate(bh, 500, workers=1)


def test_dilate_examples():
    assert dilate({1, 2}, 3) == [3, 6]
    assert dilate_divide({3, 6, 7}, 3) == [1, 2]
    assert dilate({4, 9}, 1) == [4, 9]
    with pytest.raises(ValueError):
        dilate({1}, 0)
    with pytest.raises(ValueError):
        dilate_divide({1}, 0)


@given(st.sets(st.integers(-50, 50), max_size=20), st.integers(1, 9))
def test_dilate_divide_roundtrip(elems, m):
    assert dilate_divide(dilate(elems, m), m) == sorted(elems)


@given(
    st.sets(st.integers(0, 40), max_size=12),
    st.sets(st.integers(0, 40), max_size=12),
    st.integers(1, 6),
)
def test_square_of_dilated_union(s1, s2, m):
    lhs = square_set(s1 | set(dilate(s2, m)))
    rhs = sorted(set(square_set(s1)) | set(dilate(square_set(s2), m * m)))
    assert lhs == rhs


def test_convergents_frozen_prefixes():
    sqrt2 = continued_fraction_convergents([1, 2, 2, 2, 2])
    assert sqrt2 == [
        Fraction(1),
        Fraction(3, 2),
        Fraction(7, 5),
        Fraction(17, 12),
        Fraction(41, 29),
    ]
    golden = continued_fraction_convergents([1] * 7)
    assert golden == [
        Fraction(1),
        Fraction(2),
        Fraction(3, 2),
        Fraction(5, 3),
        Fraction(8, 5),
        Fraction(13, 8),
        Fraction(21, 13),
    ]
    sqrt3 = continued_fraction_convergents([1, 1, 2, 1, 2, 1])
    assert sqrt3 == [
        Fraction(1),
        Fraction(2),
        Fraction(5, 3),
        Fraction(7, 4),
        Fraction(19, 11),
        Fraction(26, 15),
    ]


def test_named_convergents_satisfy_pell_identities():
    for cap in (10**3, 10**6, 10**9):
        c2 = named_convergent("sqrt2", cap)
        assert c2.denominator <= cap
        assert abs(c2.numerator**2 - 2 * c2.denominator**2) == 1
        c3 = named_convergent("sqrt3", cap)
        assert c3.denominator <= cap
        assert abs(c3.numerator**2 - 3 * c3.denominator**2) in (1, 2)
        g = named_convergent("golden", cap)
        assert abs(g.numerator**2 - g.numerator * g.denominator - g.denominator**2) == 1
    with pytest.raises(ValueError):
        named_convergent("pi")


def test_convergent_caps_are_respected_up_to_word_size():
    c = named_convergent("sqrt2", 2**62)
    assert 2**60 < c.denominator <= 2**62


def test_density_preconditions():
    casual = make_bh(["1/8"], ["1/2"], k=0, eps="1/5")
    with pytest.raises(ValueError):
        density_vs_measure(casual, 2000)
    proper_small_q = make_bh(["1/8"], ["1/2"], k=0, eps="1/5", generating=True)
    with pytest.raises(ValueError):
        density_vs_measure(proper_small_q, 2000)
    big = convergent_frequency(["golden"], q_cap=200000)
    ball = ApproxHammingBall(center=TorusPoint.of(["0"]), k=0, eps="1/2")
    bh = BohrHammingBall(freq=big, ball=ball)
    with pytest.raises(ValueError):
        density_vs_measure(bh, 999)


def test_density_whole_torus():
    # odd denominator keeps every orbit point strictly inside radius 1/2
    freq = convergent_frequency(["golden"], q_cap=150000)
    assert freq.q % 2 == 1
    ball = ApproxHammingBall(center=TorusPoint.of(["0"]), k=0, eps="1/2")
    report = density_vs_measure(BohrHammingBall(freq=freq, ball=ball), 1000)
    assert report.density == 1
    assert report.measure == 1
    assert report.gap == 0.0


def test_density_tracks_measure_for_generic_frequency():
    freq = convergent_frequency(["sqrt2", "sqrt3"], q_cap=10**9)
    ball = ApproxHammingBall(
        center=TorusPoint.of(["0", "0"]), k=1, eps="1/4"
    )
    assert ball.measure() == Fraction(3, 4)
    report = density_vs_measure(BohrHammingBall(freq=freq, ball=ball), 10**6)
    assert report.gap < 0.02


def test_set_rle_roundtrip():
    payload = set_to_json([1, 2, 3, 7, 10, 11], 12)
    assert payload == {"N": 12, "elems": [[1, 3], [7, 1], [10, 2]]}
    elems, horizon = set_from_json(payload)
    assert elems == [1, 2, 3, 7, 10, 11]
    assert horizon == 12


@given(st.sets(st.integers(0, 200), max_size=60))
def test_set_rle_roundtrip_random(elems):
    restored, horizon = set_from_json(set_to_json(elems, 201))
    assert restored == sorted(elems)
    assert horizon == 201
