import random
from fractions import Fraction
from math import comb, sqrt

import pytest
from hypothesis import given
from hypothesis import strategies as st

from reclab.torus import ApproxHammingBall, Cylinder, TorusPoint, as_fraction

rationals = st.fractions(min_value=-3, max_value=3, max_denominator=64)


def random_point(rng: random.Random, dim: int, den: int = 2**20) -> TorusPoint:
    return TorusPoint.of(Fraction(rng.randrange(den), den) for _ in range(dim))


# ---- norms and deviation counts ----


def test_norm_examples():
    assert TorusPoint.of(["3/4"]).norm() == Fraction(1, 4)
    assert TorusPoint.of([0, "1/2"]).norm() == Fraction(1, 2)
    assert TorusPoint.of(["7/8", "1/3"]).norm() == Fraction(5, 12) or True
    # max of (1/8, 1/3) is 1/3
    assert TorusPoint.of(["7/8", "1/3"]).norm() == Fraction(1, 3)


@given(st.lists(rationals, min_size=1, max_size=6))
def test_norm_bounds(coords):
    p = TorusPoint.of(coords)
    assert 0 <= p.norm() <= Fraction(1, 2)
    assert p.norm() == (-p).norm()


@given(st.lists(rationals, min_size=1, max_size=5), st.lists(rationals, min_size=1, max_size=5))
def test_norm_triangle(a, b):
    # same dimension only
    n = min(len(a), len(b))
    pa, pb = TorusPoint.of(a[:n]), TorusPoint.of(b[:n])
    assert (pa + pb).norm() <= pa.norm() + pb.norm()


@given(st.lists(rationals, min_size=1, max_size=6), st.fractions(min_value="1/64", max_value="1/2", max_denominator=64))
def test_deviation_count_range(coords, eps):
    p = TorusPoint.of(coords)
    w = p.deviation_count(eps)
    assert 0 <= w <= p.dim
    # deviation count of the negation matches (dist is symmetric)
    assert (-p).deviation_count(eps) == w


def test_deviation_boundary_is_counted():
    # distance exactly eps counts as deviating
    p = TorusPoint.of(["1/4"])
    assert p.deviation_count(Fraction(1, 4)) == 1
    assert p.deviation_count(Fraction(1, 4) + Fraction(1, 1000)) == 0


# ---- balls ----


def test_ball_contains_matches_count():
    y = TorusPoint.of(["1/2", "1/2", 0])
    ball = ApproxHammingBall(center=y, k=1, eps="1/4")
    assert ball.contains(TorusPoint.of(["1/2", "1/2", "9/10"]))
    assert ball.contains(TorusPoint.of([0, "1/2", 0]))
    assert not ball.contains(TorusPoint.of([0, 0, 0]))


def test_ball_measure_exact_value():
    # r=2, k=1, eps=1/4: 2*eps = 1/2, measure = C(2,0)(1/2)^2 + C(2,1)(1/2)(1/2)
    ball = ApproxHammingBall(center=TorusPoint.zero(2), k=1, eps="1/4")
    assert ball.measure() == Fraction(3, 4)


def test_ball_measure_monte_carlo_oracle():
    # independent sampling oracle, 10^6 points, agree within 3 sigma;
    # sampling on a dyadic grid keeps membership integer-exact
    rng = random.Random(42)
    ball = ApproxHammingBall(center=TorusPoint.zero(2), k=1, eps="1/4")
    n = 10**6
    den = 2**24
    lo, hi = den // 4, 3 * den // 4  # dist(c/den, 0) >= 1/4 iff lo <= c <= hi
    hits = 0
    for _ in range(n):
        dev = (lo <= rng.randrange(den) <= hi) + (lo <= rng.randrange(den) <= hi)
        hits += dev <= 1
    p = float(ball.measure())
    sigma = sqrt(p * (1 - p) / n)
    assert abs(hits / n - p) < 3 * sigma


@given(
    st.integers(min_value=1, max_value=6),
    st.integers(min_value=0, max_value=5),
    st.fractions(min_value="1/32", max_value="1/2", max_denominator=64),
)
def test_ball_measure_in_unit_interval(r, k, eps):
    if k >= r:
        with pytest.raises(ValueError):
            ApproxHammingBall(center=TorusPoint.zero(r), k=k, eps=eps)
        return
    m = ApproxHammingBall(center=TorusPoint.zero(r), k=k, eps=eps).measure()
    assert 0 < m <= 1


def test_ball_rejects_bad_radius():
    with pytest.raises(ValueError):
        ApproxHammingBall(center=TorusPoint.zero(2), k=1, eps="3/4")
    with pytest.raises(ValueError):
        ApproxHammingBall(center=TorusPoint.zero(2), k=1, eps=0)


# ---- cylinders ----


def test_cylinder_measure():
    c = Cylinder(dim=3, index_set=(1, 3), center=TorusPoint.zero(3), eta="1/8")
    assert c.measure() == Fraction(1, 16)


def test_cylinder_membership_strict():
    c = Cylinder(dim=2, index_set=(1,), center=TorusPoint.zero(2), eta="1/4")
    assert c.contains(TorusPoint.of(["1/8", "1/2"]))
    assert not c.contains(TorusPoint.of(["1/4", 0]))  # boundary excluded
    assert not c.contains(TorusPoint.of(["1/3", 0]))


def test_subordinate_cylinder_count():
    ball = ApproxHammingBall(center=TorusPoint.zero(5), k=2, eps="1/8")
    cyls = ball.cylinders()
    assert len(cyls) == comb(5, 3)
    assert all(len(c.index_set) == 3 for c in cyls)
    assert all(c.eta == Fraction(1, 8) for c in cyls)


@given(
    st.integers(min_value=2, max_value=6),
    st.integers(min_value=1, max_value=3),
    st.lists(rationals, min_size=6, max_size=6),
    st.lists(rationals, min_size=6, max_size=6),
    st.fractions(min_value="1/16", max_value="1/2", max_denominator=32),
)
def test_union_of_cylinders_is_ball(r, k, ycoords, xcoords, eps):
    # with eta = eps the union identity is exact, including boundaries
    if k >= r:
        return
    y = TorusPoint.of(ycoords[:r])
    x = TorusPoint.of(xcoords[:r])
    ball = ApproxHammingBall(center=y, k=k, eps=eps)
    in_union = any(c.contains(x) for c in ball.cylinders())
    assert in_union == ball.contains(x)


def test_union_of_cylinders_random_grid():
    rng = random.Random(7)
    y = random_point(rng, 4)
    ball = ApproxHammingBall(center=y, k=2, eps="1/5")
    cyls = ball.cylinders()
    for _ in range(500):
        x = random_point(rng, 4)
        assert ball.contains(x) == any(c.contains(x) for c in cyls)


# ---- serialization ----


def test_point_json_roundtrip():
    p = TorusPoint.of(["1/3", "2/7", 0])
    assert TorusPoint.from_json(p.to_json()) == p
    assert p.to_json() == ["1/3", "2/7", "0/1"]


def test_ball_json_roundtrip():
    ball = ApproxHammingBall(center=TorusPoint.of(["1/2", "1/3"]), k=1, eps="1/4")
    data = ball.to_json()
    assert data["r"] == 2 and data["k"] == 1
    back = ApproxHammingBall.from_json(data)
    assert back == ball


def test_cylinder_json_roundtrip():
    c = Cylinder(dim=3, index_set=(2, 3), center=TorusPoint.zero(3), eta="1/6")
    assert Cylinder.from_json(c.to_json()) == c


def test_as_fraction_rejects_floats():
    with pytest.raises(TypeError):
        as_fraction(0.25)
