"""Joining models: exact decompositions, the star kernel, certified zeros."""

import cmath
import random
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reclab.harmonic import Character, CoefficientTable
from reclab.joinings import (
    AffineJoining,
    annihilate_over_joining,
    cyclic_closure,
    cylinder_grid_density,
    extract_affine_joining,
    grid_aligned_cylinder,
    offset_projection,
    pair_embedding,
    progression_subgroup,
    quadratic_direction,
    quadratic_orbit_decomposition,
    root_of_unity_sum_is_zero,
    star_kernel,
    star_transform_factor,
    uniformize_over_joining,
)
from reclab.lattice import SubgroupModel
from reclab.torus import ApproxHammingBall, TorusPoint


def frac(a, b=1):
    return Fraction(a, b)


def ball_on(center_coords, k, eps):
    return ApproxHammingBall(center=TorusPoint.of(center_coords), k=k, eps=eps)


# ---- cyclic closures ----


def test_cyclic_closure_examples():
    G = cyclic_closure([frac(1, 2), frac(1, 3)])
    assert G.q == 6 and G.order() == 6
    assert cyclic_closure([frac(1, 4)]).order() == 4
    assert cyclic_closure([0, 0], modulus=5).order() == 1


def test_cyclic_closure_coprime_blocks_give_full_product():
    # numerators 7 and 5 mod 35: the pair generates the product of the factors
    G = cyclic_closure([frac(1, 5), frac(1, 7)])
    assert G.q == 35
    product = SubgroupModel.from_generators(35, 2, [[7, 0], [0, 5]])
    assert G == product and G.order() == 35


@given(st.integers(2, 20), st.integers(0, 19), st.integers(0, 19))
def test_cyclic_closure_projections_are_factor_closures(q, a, b):
    # each coordinate projection of <(a, b)> is exactly the closure of that entry
    G = cyclic_closure([frac(a, q), frac(b, q)], modulus=q)
    proj0 = SubgroupModel.from_generators(q, 1, [[row[0]] for row in G.basis])
    proj1 = SubgroupModel.from_generators(q, 1, [[row[1]] for row in G.basis])
    assert proj0 == cyclic_closure([frac(a, q)], modulus=q)
    assert proj1 == cyclic_closure([frac(b, q)], modulus=q)


def test_progression_subgroup_shape():
    P = progression_subgroup(1, 1, 9)
    assert P.order() == 81
    assert (1, 0, 2, 0, 0) in P and (0, 1, 0, 2, 0) in P
    assert (1, 0, 3, 0, 0) not in P and (0, 0, 0, 0, 1) not in P


# ---- orbit decompositions ----


def test_torsion_fixture_mod3():
    # orbit 3n + 5n^2 in Z_15: the quadratic part is 3-torsion
    dec = quadratic_orbit_decomposition([3], [5], 15)
    assert dec.period == 30
    assert dec.stabilizer.order() == 5
    assert dec.cosets == ((0,), (2,))
    assert dec.weights == (frac(1, 3), frac(2, 3))
    assert dec.verify_measure_identity()


def test_torsion_fixture_mod7_square_counts():
    # orbit 7n + 5n^2 in Z_35: weights follow the square counts mod 7,
    # one residue hit once and three residues hit twice
    dec = quadratic_orbit_decomposition([7], [5], 35)
    assert dec.stabilizer.order() == 5
    assert sorted(dec.weights) == [frac(1, 7), frac(2, 7), frac(2, 7), frac(2, 7)]
    assert dec.verify_measure_identity()


def test_pure_rotation_is_single_coset():
    dec = quadratic_orbit_decomposition([1, 3], [0, 0], 12)
    assert dec.weights == (frac(1),)
    assert dec.stabilizer == cyclic_closure([frac(1, 12), frac(3, 12)], modulus=12)
    assert dec.verify_measure_identity()


def test_period_doubling_counts():
    dec = quadratic_orbit_decomposition([2], [3], 9)
    single = dec.visit_counts()
    double = Counter(dec.orbit_point(n) for n in range(2 * dec.q))
    assert double == {x: 2 * c for x, c in single.items()}


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=40)
def test_decomposition_identity_random(seed):
    rng = random.Random(seed)
    q = rng.randint(1, 24)
    dim = rng.randint(1, 2)
    c = [rng.randrange(q) for _ in range(dim)]
    u = [rng.randrange(q) for _ in range(dim)]
    dec = quadratic_orbit_decomposition(c, u, q)
    assert sum(dec.weights, frac(0)) == 1
    assert dec.verify_measure_identity()

    def fn(x):
        return Fraction(sum((a * a + 3 * a) % q for a in x), q + 1)

    assert dec.averaging_gap(fn) == 0


# ---- extraction ----


def diagonal_example():
    lin = pair_embedding([frac(1, 3)], [frac(1, 5)], 1)
    quad = quadratic_direction([frac(1, 15)], [frac(1, 15)])
    return extract_affine_joining(lin, quad, 1, 1)


def test_extraction_equal_frequencies_concentrate_on_diagonal():
    ex = diagonal_example()
    assert ex.q == 15
    assert ex.joining.base.order() == 1
    assert all(s[0] == s[1] for s in ex.joining.shifts)
    assert ex.joining.shifts == ((0, 0), (1, 1), (4, 4), (6, 6), (9, 9), (10, 10))
    assert ex.joining.weights == (
        frac(1, 15),
        frac(4, 15),
        frac(4, 15),
        frac(2, 15),
        frac(2, 15),
        frac(2, 15),
    )
    # the group idealization is the full diagonal
    assert ex.group_joining.base == SubgroupModel.from_generators(15, 2, [[1, 1]])
    assert ex.decomposition.verify_measure_identity()


def test_extraction_coprime_frequencies_group_is_full_product():
    lin = pair_embedding([frac(1, 5)], [frac(1, 7)], 1)
    quad = quadratic_direction([frac(1, 5)], [frac(1, 7)])
    ex = extract_affine_joining(lin, quad, 1, 1)
    assert ex.q == 35
    product = SubgroupModel.from_generators(35, 2, [[7, 0], [0, 5]])
    assert ex.group_joining.base == product
    assert ex.group_joining.weights == (frac(1),)
    # offset marginals: w1 sweeps squares times alpha, w2 squares times beta
    w_visits = {offset_projection(ex.decomposition.orbit_point(n), 1, 1, 35) for n in range(35)}
    assert w_visits == {(7 * n * n % 35, 5 * n * n % 35) for n in range(35)}


def test_extraction_zero_quadratic_part_is_point_mass():
    lin = pair_embedding([frac(1, 3)], [frac(1, 5)], 1)
    ex = extract_affine_joining(lin, [0] * 5, 1, 1)
    assert ex.joining.base.order() == 1
    assert ex.joining.shifts == ((0, 0),)
    assert ex.joining.weights == (frac(1),)

    rng = np.random.default_rng(3)
    f = rng.standard_normal((15, 15)) + 1j * rng.standard_normal((15, 15))
    g = rng.standard_normal((15,)) + 0j
    out = star_kernel(f, g, ex.joining)
    assert np.allclose(out, f * g[0])


def test_extraction_rejects_degenerate_linear_part():
    # off the progression diagonal
    with pytest.raises(ValueError, match="diagonal"):
        extract_affine_joining(
            [frac(1, 3), frac(1, 5), frac(1, 3), frac(2, 5), 0], [0] * 5, 1, 1
        )
    # nonzero trailing block
    with pytest.raises(ValueError, match="trailing"):
        extract_affine_joining(
            pair_embedding([frac(1, 3)], [frac(1, 5)], 0) + [frac(1, 3)], [0] * 5, 1, 1
        )
    # blocks with equal orders cannot generate the block product
    with pytest.raises(ValueError, match="coprime orders"):
        extract_affine_joining(
            pair_embedding([frac(1, 3)], [frac(1, 3)], 1), [0] * 5, 1, 1
        )


def test_extraction_rejects_even_modulus():
    with pytest.raises(ValueError, match="even"):
        extract_affine_joining(
            pair_embedding([frac(1, 2)], [frac(1, 3)], 1), [0] * 5, 1, 1
        )


def test_extraction_weights_invariant_under_generator_change():
    # replacing the linear part by a unit multiple keeps the same closure
    # and must keep the same projected joining
    lin = pair_embedding([frac(1, 3)], [frac(1, 5)], 1)
    quad = quadratic_direction([frac(1, 15)], [frac(2, 15)])
    ex1 = extract_affine_joining(lin, quad, 1, 1)
    for m in (2, 4, 7, 8):
        lin_m = [m * a for a in lin]
        ex2 = extract_affine_joining(lin_m, quad, 1, 1, modulus=15)
        assert cyclic_closure(lin_m, modulus=15) == cyclic_closure(lin, modulus=15)
        assert ex2.joining == ex1.joining


def test_offset_projection_needs_odd_modulus():
    with pytest.raises(ValueError, match="odd"):
        offset_projection([0] * 5, 1, 1, 8)


# ---- affine joining container ----


def test_affine_joining_validation():
    base = SubgroupModel.from_generators(5, 2, [[1, 1]])
    with pytest.raises(ValueError, match="sum"):
        AffineJoining(base=base, d=1, r=1, shifts=((0, 0),), weights=(frac(1, 2),))
    with pytest.raises(ValueError, match="twice"):
        AffineJoining(
            base=base, d=1, r=1,
            shifts=((0, 0), (1, 1)),
            weights=(frac(1, 2), frac(1, 2)),
        )


def test_affine_joining_json_roundtrip():
    ex = diagonal_example()
    data = ex.joining.to_json()
    back = AffineJoining.from_json(data)
    assert back == ex.joining
    assert AffineJoining.from_json(ex.group_joining.to_json()) == ex.group_joining


# ---- star kernel ----


def test_star_kernel_exact_matches_float():
    ex = diagonal_example()
    rng = random.Random(11)
    fF = np.empty((15, 15), dtype=object)
    for idx in np.ndindex(15, 15):
        fF[idx] = frac(rng.randint(-20, 20), 7)
    gF = np.empty((15,), dtype=object)
    for i in range(15):
        gF[i] = frac(rng.randint(-10, 10), 3)
    exact = star_kernel(fF, gF, ex.joining)
    approx = star_kernel(fF.astype(complex), gF.astype(complex), ex.joining)
    assert np.allclose(exact.astype(complex), approx)


def test_star_kernel_projection_identity_exact():
    # g grid aligned with joining mass exactly 1: averaging the kernel over y
    # returns the y-average of f, coordinate by coordinate, exactly
    ex = diagonal_example()
    cyl = grid_aligned_cylinder(1, (1,), (0,), 2, 15)
    gd = cylinder_grid_density(cyl, 15)
    assert ex.joining.integrate(lambda w: gd[w[1:]]) == 1

    rng = random.Random(23)
    fF = np.empty((15, 15), dtype=object)
    for idx in np.ndindex(15, 15):
        fF[idx] = frac(rng.randint(-9, 9), 4)
    out = star_kernel(fF, gd, ex.joining)
    for x in range(15):
        assert sum(out[x, :]) / 15 == sum(fF[x, :]) / 15


def test_star_kernel_shape_checks():
    ex = diagonal_example()
    with pytest.raises(ValueError, match="axes"):
        star_kernel(np.zeros((15,)), np.zeros((15,)), ex.joining)
    with pytest.raises(ValueError, match="axes"):
        star_kernel(np.zeros((15, 15)), np.zeros((5,)), ex.joining)


# ---- root of unity certificates ----


def test_root_of_unity_sum_examples():
    # all q-th roots sum to zero
    assert root_of_unity_sum_is_zero({t: frac(1) for t in range(6)}, 6)
    # paired opposite phases cancel
    assert root_of_unity_sum_is_zero({1: frac(2, 3), 4: frac(2, 3)}, 6)
    # a lone root is nonzero, as is an unbalanced pair
    assert not root_of_unity_sum_is_zero({2: frac(1)}, 6)
    assert not root_of_unity_sum_is_zero({1: frac(1), 4: frac(2)}, 6)
    # q = 1: plain rational sum
    assert root_of_unity_sum_is_zero({0: frac(0)}, 1)
    assert not root_of_unity_sum_is_zero({0: frac(1, 7)}, 1)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=40)
def test_root_of_unity_zero_agrees_with_numeric(seed):
    rng = random.Random(seed)
    q = rng.randint(1, 30)
    masses = {
        rng.randrange(q): frac(rng.randint(-5, 5), rng.randint(1, 5))
        for _ in range(rng.randint(1, 6))
    }
    claim = root_of_unity_sum_is_zero(masses, q)
    numeric = sum(float(m) * cmath.exp(2j * cmath.pi * t / q) for t, m in masses.items())
    if claim:
        assert abs(numeric) < 1e-9
    else:
        assert abs(numeric) > 1e-12


# ---- annihilation over a joining ----


def order_two_model():
    base = SubgroupModel.full(6, 2)
    return AffineJoining.haar(base, 1, 1)


def test_annihilate_order_two_character_full_product():
    # kernel of the w2 projection is all of Z_6 x {0}; the order-2 character
    # cancels fiber by fiber and any subordinate cylinder works
    J = order_two_model()
    ball = ball_on([0], 0, frac(1, 5))
    cyl = annihilate_over_joining(ball, J, [Character((3,))])
    assert cyl.index_set == (1,)
    total = sum(
        cmath.exp(2j * cmath.pi * 3 * w[0] / 6)
        * float(cyl.normalized_value(TorusPoint.of([frac(w[1], 6)])))
        for w in J.coset_elements(0)
    )
    assert abs(total) < 1e-12


def test_annihilate_via_character_extension():
    # kernel trivial: the character must be pushed through the w2 marginal
    base = SubgroupModel.from_generators(6, 3, [[1, 1, 0], [0, 0, 1]])
    J = AffineJoining.haar(base, 1, 2)
    ball = ball_on([0, frac(1, 6)], 1, frac(1, 5))
    cyl = annihilate_over_joining(ball, J, [Character((2,))])
    assert cyl.index_set == (2,)
    total = sum(
        cmath.exp(2j * cmath.pi * 2 * w[0] / 6)
        * float(cyl.normalized_value(TorusPoint.of([frac(w[1], 6), frac(w[2], 6)])))
        for w in J.coset_elements(0)
    )
    assert abs(total) < 1e-12


def test_annihilate_zero_characters_returns_subordinate_cylinder():
    J = order_two_model()
    ball = ball_on([frac(1, 6)], 0, frac(1, 7))
    cyl = annihilate_over_joining(ball, J, [])
    assert cyl.index_set == (1,)
    assert cyl.eta == frac(1, 7) and cyl.center == TorusPoint.of([frac(1, 6)])


def test_annihilate_rejects_character_trivial_on_joining():
    base = SubgroupModel.from_generators(6, 2, [[0, 1]])
    J = AffineJoining.haar(base, 1, 1)
    ball = ball_on([0], 0, frac(1, 5))
    with pytest.raises(ValueError, match="vanishes on the joining"):
        annihilate_over_joining(ball, J, [Character((2,))])


def test_annihilate_rejects_grid_trivial_character():
    J = order_two_model()
    ball = ball_on([0], 0, frac(1, 5))
    with pytest.raises(ValueError, match="trivial on the grid"):
        annihilate_over_joining(ball, J, [Character((6,))])


def test_annihilate_raises_when_not_certifiable():
    # sparse diagonal marginal: the windowed cylinder cannot cancel exactly
    base = SubgroupModel.from_generators(6, 3, [[1, 1, 1]])
    J = AffineJoining.haar(base, 1, 2)
    ball = ball_on([0, 0], 1, frac(1, 6))
    with pytest.raises(ArithmeticError, match="not certifiably zero"):
        annihilate_over_joining(ball, J, [Character((2,))])


def test_annihilate_holds_on_every_coset():
    # a shifted coset joining: the certificate runs on each coset separately
    base = SubgroupModel.from_generators(6, 3, [[1, 1, 0], [0, 0, 2]])
    J = AffineJoining(
        base=base, d=1, r=2,
        shifts=((0, 0, 0), (0, 0, 1)),
        weights=(frac(1, 3), frac(2, 3)),
    )
    ball = ball_on([0, frac(1, 6)], 1, frac(1, 5))
    cyl = annihilate_over_joining(ball, J, [Character((2,))])
    for j in range(2):
        total = sum(
            cmath.exp(2j * cmath.pi * 2 * w[0] / 6)
            * float(cyl.normalized_value(TorusPoint.of([frac(w[1], 6), frac(w[2], 6)])))
            for w in J.coset_elements(j)
        )
        assert abs(total) < 1e-12


# ---- uniformization over a joining ----


def uniformize_fixture():
    q = 5
    base = SubgroupModel.from_generators(q, 4, [[1, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]])
    J = AffineJoining.haar(base, 1, 3)
    ball = ball_on([0, frac(1, 5), 0], 2, frac(3, 10))
    return q, J, ball


def grid_dft2(a, q):
    out = np.zeros((q, q), dtype=complex)
    for n in range(q):
        for m in range(q):
            acc = 0j
            for x in range(q):
                for y in range(q):
                    acc += a[x, y] * cmath.exp(-2j * cmath.pi * (n * x + m * y) / q)
            out[n, m] = acc / q**2
    return out


def test_uniformize_kills_selected_modes_exactly():
    q, J, ball = uniformize_fixture()
    table = CoefficientTable(2)
    table[Character((1, 2))] = 0.4
    table[Character((0, 1))] = 0.3 - 0.2j
    table[Character((3, 0))] = 0.5
    cyl, report = uniformize_over_joining(table, ball, J)
    assert sorted(report["psi_blocks"]) == [[1], [2]]
    assert report["residual"] == 0.0

    f = np.zeros((q, q), dtype=complex)
    for x in range(q):
        for y in range(q):
            f[x, y] = table.evaluate(TorusPoint.of([frac(x, q), frac(y, q)]))
    g = np.zeros((q, q, q))
    for idx in np.ndindex(q, q, q):
        g[idx] = float(cyl.normalized_value(TorusPoint.of([frac(a, q) for a in idx])))

    Fh = grid_dft2(star_kernel(f, g, J), q)
    fh = grid_dft2(f, q)
    # selected mixed modes die; every coefficient obeys the factor identity
    assert abs(Fh[1, 2]) < 1e-12 and abs(Fh[0, 1]) < 1e-12
    for n in range(q):
        for m in range(q):
            factor = star_transform_factor(J, Character((m,)), g)
            assert abs(Fh[n, m] - fh[n, m] * factor) < 1e-12
    # the grid aligned window keeps the mean factor exactly 1
    assert abs(star_transform_factor(J, Character((0,)), g) - 1.0) < 1e-12


def test_uniformize_residual_bound_random_table():
    q, J, ball = uniformize_fixture()
    rng = random.Random(5)
    table = CoefficientTable(2)
    entries = []
    for n in range(q):
        for m in range(q):
            if (n, m) == (0, 0):
                continue
            entries.append((n, m))
    rng.shuffle(entries)
    total = 1.0
    for n, m in entries[:8]:
        c = complex(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3))
        table[Character((n, m))] = c
    norm = max(1.0, np.sqrt(table.norm_sq()))
    cyl, report = uniformize_over_joining(table, ball, J, norm_bound=float(norm))
    assert report["residual"] <= float(norm) / np.sqrt(ball.k) + 1e-12


def test_uniformize_rejects_even_grid():
    base = SubgroupModel.full(6, 3)
    J = AffineJoining.haar(base, 1, 2)
    ball = ball_on([0, 0], 1, frac(1, 5))
    with pytest.raises(ValueError, match="even"):
        uniformize_over_joining(CoefficientTable(2), ball, J)
