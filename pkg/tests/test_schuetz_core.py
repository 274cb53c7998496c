"""Tests for the lattice F-functions, the transition determinant, and the
interlacing decomposition machinery."""

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from tasepdet import (
    ContourError,
    ContourSpec,
    ParticleConfig,
    WindowError,
    antisymmetric_domain_check,
    brute_force_correlation,
    decomposition_sum,
    eval_F,
    transition_probability,
)
from tasepdet.schuetz_core import fn_exact, gen_binomial, path_binomial


# ---------------------------------------------------------------------------
# F_n basics
# ---------------------------------------------------------------------------


def test_f0_is_poisson_mass():
    # F_0(x, t) = e^{-t} t^x / x!
    got = eval_F(0, 3, 2.0)
    assert got.value == pytest.approx(math.exp(-2.0) * 8 / 6, abs=1e-15)
    assert eval_F(0, 0, 0.0).value == 1.0
    assert eval_F(0, -1, 1.7).value == 0.0


def test_fn_vanishes_left_of_support():
    # coefficient extraction is empty when x - n < 0
    assert eval_F(-2, -3, 1.7).value == 0.0
    assert eval_F(0, -5, 0.3).value == 0.0


@pytest.mark.parametrize("x", range(0, 7))
@pytest.mark.parametrize("t", [0.4, 1.0, 3.7])
def test_f1_is_poisson_tail(x, t):
    # summation relation gives F_1(x, t) = P(Poisson(t) >= x); independent
    # oracle for the quadrature path
    got = eval_F(1, x, t)
    assert got.value == pytest.approx(stats.poisson.sf(x - 1, t), abs=1e-13)
    assert got.est_error < 1e-12


@pytest.mark.parametrize("n", [-2, -1, 1, 2, 3])
def test_difference_recurrence(n):
    t = 1.3
    for x in range(-4, 7):
        lhs = eval_F(n - 1, x, t).value
        rhs = eval_F(n, x, t).value - eval_F(n, x + 1, t).value
        assert lhs == pytest.approx(rhs, abs=1e-12)


@pytest.mark.parametrize("n", [1, 2])
def test_summation_recurrence_oracle(n):
    # F_{n+1}(x) = sum_{y >= x} F_n(y): pins the n > 0 quadrature values to
    # an independently summed tail
    t = 2.0
    for x in range(-2, 4):
        tail = math.fsum(eval_F(n, yv, t).value for yv in range(x, x + 250))
        assert eval_F(n + 1, x, t).value == pytest.approx(tail, abs=1e-12)


@pytest.mark.parametrize("n", [-1, -2])
def test_negative_summation_recurrence(n):
    # F_{n+1}(x) = -sum_{y < x} F_n(y) (the contour has only the origin pole)
    t = 2.0
    for x in range(-1, 5):
        tail = -math.fsum(eval_F(n, yv, t).value for yv in range(x - 60, x))
        assert eval_F(n + 1, x, t).value == pytest.approx(tail, abs=1e-13)


@pytest.mark.parametrize("n", [0, -1, -3])
def test_quadrature_agrees_with_exact_extraction(n):
    spec = ContourSpec(mode="quadrature", nodes=128)
    for x in range(-2, 9):
        exact = eval_F(n, x, 1.9).value
        quad = eval_F(n, x, 1.9, spec)
        assert quad.value == pytest.approx(exact, abs=1e-13)
        assert abs(quad.value - exact) <= max(quad.est_error, 1e-15)


def test_series_mode_rejects_positive_n():
    with pytest.raises(ContourError):
        eval_F(2, 1, 1.0, ContourSpec(mode="series"))


def test_contour_spec_validation():
    with pytest.raises(ContourError):
        ContourSpec(mode="midpoint")
    with pytest.raises(ContourError):
        ContourSpec(nodes=8)
    with pytest.raises(ContourError):
        ContourSpec(radius=-1.0)
    with pytest.raises(ContourError):
        # contour must enclose w = 1 when n > 0
        eval_F(1, 0, 1.0, ContourSpec(mode="quadrature", radius=0.5))


def test_negative_time_rejected():
    with pytest.raises(ValueError):
        eval_F(0, 0, -0.5)


@given(
    n=st.integers(min_value=-8, max_value=0),
    x=st.integers(min_value=-10, max_value=20),
    t=st.fractions(min_value=0, max_value=10, max_denominator=64),
)
@settings(max_examples=200, deadline=None)
def test_exact_recurrence_is_an_identity(n, x, t):
    # the difference recurrence holds exactly for the rational parts
    assert fn_exact(n - 1, x, t) == fn_exact(n, x, t) - fn_exact(n, x + 1, t)


def test_binomial_conventions():
    assert path_binomial(5, 2) == 10
    assert path_binomial(3, 5) == 0
    assert path_binomial(-1, 0) == 0  # vanishes unless 0 <= b <= a
    assert path_binomial(4, 0) == 1
    assert gen_binomial(-1, 3) == -1
    assert gen_binomial(-2, 2) == 3
    assert gen_binomial(5, 2) == 10
    assert gen_binomial(3, -1) == 0


# ---------------------------------------------------------------------------
# particle configurations
# ---------------------------------------------------------------------------


def test_particle_config_orders_right_to_left():
    cfg = ParticleConfig((3, 1, -2))
    assert cfg.n_particles == 3
    assert cfg.position(1) == 3
    assert cfg.position(3) == -2
    with pytest.raises(ValueError):
        cfg.position(4)


def test_particle_config_rejects_disorder():
    with pytest.raises(ValueError):
        ParticleConfig((1, 1))
    with pytest.raises(ValueError):
        ParticleConfig((0, 2))
    with pytest.raises(ValueError):
        ParticleConfig(())


# ---------------------------------------------------------------------------
# transition probabilities
# ---------------------------------------------------------------------------


def test_single_particle_is_poisson():
    y = ParticleConfig((0,))
    for k in range(0, 6):
        got = transition_probability(y, ParticleConfig((k,)), 1.4)
        assert got == pytest.approx(stats.poisson.pmf(k, 1.4), abs=1e-14)


def test_two_particle_closed_form():
    # y = (0, -2) -> x = (1, 0): the determinant reduces to
    # e^{-2t} t^3/2 - e^{-t}(1-t) P(Poisson(t) >= 3); at t = 1 the second
    # term vanishes, leaving exactly e^{-2}/2
    got = transition_probability(ParticleConfig((0, -2)), ParticleConfig((1, 0)), 1.0)
    assert got == pytest.approx(math.exp(-2.0) / 2, abs=1e-15)


def test_transition_identity_at_t0():
    y = ParticleConfig((0, -2, -5))
    assert transition_probability(y, y, 0.0) == pytest.approx(1.0, abs=1e-14)
    moved = ParticleConfig((1, -2, -5))
    assert transition_probability(y, moved, 0.0) == pytest.approx(0.0, abs=1e-14)


def test_transition_normalizes_to_one():
    y = ParticleConfig((0, -2))
    t = 0.6
    total = math.fsum(
        transition_probability(y, ParticleConfig((x1, x2)), t)
        for x1 in range(0, 14)
        for x2 in range(-2, x1)
    )
    assert total == pytest.approx(1.0, abs=1e-10)


def test_transition_never_significantly_negative():
    y = ParticleConfig((1, 0, -3))
    t = 0.9
    for x1 in range(1, 6):
        for x2 in range(0, x1):
            for x3 in range(-3, x2):
                g = transition_probability(y, ParticleConfig((x1, x2, x3)), t)
                assert g >= -1e-10


def test_transition_size_mismatch():
    with pytest.raises(ValueError):
        transition_probability(ParticleConfig((0,)), ParticleConfig((1, 0)), 1.0)


# ---------------------------------------------------------------------------
# interlacing decomposition
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "y,x,t",
    [
        ((0, -2), (1, 0), 1.0),
        ((0, -1), (4, 2), 0.5),
        ((0, -2, -4), (1, -1, -2), 0.8),
        ((0, -1, -2), (3, 1, -1), 1.0),
    ],
)
def test_decomposition_matches_determinant(y, x, t):
    yc, xc = ParticleConfig(y), ParticleConfig(x)
    expect = transition_probability(yc, xc, t)
    got = decomposition_sum(yc, xc, t)
    assert got == pytest.approx(expect, abs=1e-10)


def test_decomposition_window_recheck_trips():
    y = ParticleConfig((0, -2))
    x = ParticleConfig((1, 0))
    with pytest.raises(WindowError):
        decomposition_sum(y, x, 3.0, window=1)


def test_decomposition_rejects_large_systems():
    y = ParticleConfig((0, -1, -2, -3, -4))
    with pytest.raises(ValueError):
        decomposition_sum(y, y, 0.5)


# ---------------------------------------------------------------------------
# antisymmetric-domain identity (exact arithmetic)
# ---------------------------------------------------------------------------


def _vandermonde_cut(hi):
    def f(*xs):
        if max(xs) > hi:
            return 0
        prod = 1
        for i in range(len(xs)):
            for j in range(i + 1, len(xs)):
                prod *= xs[j] - xs[i]
        return prod

    return f


@pytest.mark.parametrize("x_fixed,hi", [((2, 0, -3), 8), ((1, 0, -1), 6), ((5, 2, 0, -2), 7)])
def test_antisymmetric_sums_agree_exactly(x_fixed, hi):
    cmp = antisymmetric_domain_check(_vandermonde_cut(hi), x_fixed, hi)
    assert cmp.equal
    assert isinstance(cmp.constrained_sum, Fraction)


def test_generic_summand_distinguishes_domains():
    def f(*xs):
        return sum(v * v for v in xs) + xs[0]

    cmp = antisymmetric_domain_check(f, (2, 0, -3), 6)
    assert not cmp.equal


@given(
    coeffs=st.tuples(*(st.integers(min_value=-3, max_value=3) for _ in range(3))),
    data=st.data(),
)
@settings(max_examples=25, deadline=None)
def test_antisymmetric_identity_randomized(coeffs, data):
    # antisymmetric = Vandermonde times a symmetric polynomial
    a, b, c = coeffs
    xs_fixed = sorted(
        data.draw(
            st.lists(
                st.integers(min_value=-4, max_value=4), min_size=3, max_size=3, unique=True
            )
        ),
        reverse=True,
    )
    hi = max(xs_fixed) + 4

    def f(*xs):
        if max(xs) > hi:
            return 0
        vand = 1
        for i in range(len(xs)):
            for j in range(i + 1, len(xs)):
                vand *= xs[j] - xs[i]
        sym = a + b * sum(xs) + c * sum(v * v for v in xs)
        return vand * sym

    assert antisymmetric_domain_check(f, tuple(xs_fixed), hi).equal


def test_domain_check_rejects_bad_top_row():
    with pytest.raises(ValueError):
        antisymmetric_domain_check(_vandermonde_cut(4), (0, 0, -1), 4)


# ---------------------------------------------------------------------------
# brute-force correlations of the signed measure
# ---------------------------------------------------------------------------


def test_level_one_marginal_is_rightmost_particle():
    # level 1 of the measure carries exactly the right-most TASEP particle
    y = ParticleConfig((0, -2))
    t = 0.9
    got = brute_force_correlation(y, t, [(1, 1)], window=12)
    expect = math.fsum(
        transition_probability(y, ParticleConfig((1, x2)), t) for x2 in range(-2, 1)
    )
    assert got == pytest.approx(expect, abs=1e-9)


def test_level_one_marginal_three_particles():
    y = ParticleConfig((0, -2, -4))
    t = 0.7
    got = brute_force_correlation(y, t, [(1, 2)], window=10)
    expect = math.fsum(
        transition_probability(y, ParticleConfig((2, x2, x3)), t)
        for x2 in range(-2, 2)
        for x3 in range(-4, x2)
    )
    assert got == pytest.approx(expect, abs=1e-9)


def test_single_particle_correlation_is_poisson():
    y = ParticleConfig((0,))
    got = brute_force_correlation(y, 0.8, [(1, 2)], window=25)
    assert got == pytest.approx(stats.poisson.pmf(2, 0.8), abs=1e-12)


def test_correlation_validation():
    y = ParticleConfig((0, -2))
    with pytest.raises(ValueError):
        brute_force_correlation(y, 1.0, [(3, 0)], window=10)  # level > N
    with pytest.raises(ValueError):
        brute_force_correlation(y, 1.0, [(1, 0)] * 3, window=10)  # too many points
    with pytest.raises(ValueError):
        brute_force_correlation(y, 1.0, [(1, 0)], window=80)  # window too wide
    y4 = ParticleConfig((0, -1, -2, -3))
    with pytest.raises(ValueError):
        brute_force_correlation(y4, 1.0, [(1, 0)], window=10)


def test_point_outside_window_has_zero_mass():
    y = ParticleConfig((0,))
    assert brute_force_correlation(y, 0.5, [(1, 99)], window=10) == 0.0
