"""Fredholm determinant routes checked against direct probability sums,
brute-force correlation minors, and their own refinement ladders."""

import itertools
import math

import numpy as np
import pytest

from tasepdet.airy_scaling import ScaledPoint, kernel_f1
from tasepdet.fredholm import (
    DetResult,
    KernelMatrix,
    ThresholdSpec,
    TruncationPolicy,
    assemble_continuum,
    assemble_discrete,
    f1_marginal,
    joint_distribution_continuum,
    joint_distribution_discrete,
    truncation_report,
)
from tasepdet.kernels import LatticePoint, kernel_flat, kernel_general
from tasepdet.schuetz_core import (
    NumericsError,
    ParticleConfig,
    brute_force_correlation,
    transition_probability,
)

Y2 = ParticleConfig((0, -2))
Y3 = ParticleConfig((1, 0, -2))


def bound_kernel(y, t):
    return lambda p1, p2: kernel_general(p1, p2, y, t)


def margin_policy(y, selections, margin=5, **kw):
    return TruncationPolicy(
        x_min=tuple(y.positions[n - 1] - margin for n in selections), **kw
    )


def direct_joint(y, t, selections, thresholds, window):
    """P(x_sel(t) >= a for all selections) by exhaustive transition sums."""
    lo = min(y.positions) - 2
    hi = max(y.positions) + window
    total = 0.0
    for xs in itertools.combinations(range(lo, hi + 1), y.n_particles):
        pos = tuple(sorted(xs, reverse=True))
        if all(pos[n - 1] >= a for n, a in zip(selections, thresholds)):
            total += transition_probability(y, ParticleConfig(pos), t)
    return total


# ---------------------------------------------------------------------------
# types
# ---------------------------------------------------------------------------


def test_threshold_spec_validation():
    with pytest.raises(ValueError):
        ThresholdSpec((), ())
    with pytest.raises(ValueError):
        ThresholdSpec((1, 2), (0,))
    with pytest.raises(ValueError):
        ThresholdSpec((2, 1), (0, 0))
    with pytest.raises(ValueError):
        ThresholdSpec((1, 1), (0, 0))
    assert ThresholdSpec((1, 3), (5, -1)).m == 2


def test_truncation_policy_validation():
    with pytest.raises(ValueError):
        TruncationPolicy(x_min=(0,), growth_step=0)
    with pytest.raises(ValueError):
        TruncationPolicy(x_min=(0,), max_rounds=1)


def test_kernel_matrix_shape_invariant():
    with pytest.raises(ValueError):
        KernelMatrix(labels=(1,), ranges=((0.0, 1.0),), matrix=np.zeros((3, 3)))
    km = KernelMatrix(labels=(1,), ranges=((0.0, 1.0),), matrix=np.zeros((2, 2)))
    assert km.matrix.shape == (2, 2)


# ---------------------------------------------------------------------------
# discrete route vs exhaustive sums
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("a", [-1, 0, 1, 2, 4])
def test_single_particle_matches_transition_sums(a):
    det = joint_distribution_discrete(
        bound_kernel(Y2, 1.0), ThresholdSpec((1,), (a,)), margin_policy(Y2, (1,))
    )
    ref = direct_joint(Y2, 1.0, (1,), (a,), window=26)
    assert det.converged
    assert det.value == pytest.approx(ref, abs=1e-10)


@pytest.mark.parametrize("a", [-3, -1, 0, 2])
def test_second_particle_matches_transition_sums(a):
    det = joint_distribution_discrete(
        bound_kernel(Y2, 1.0), ThresholdSpec((2,), (a,)), margin_policy(Y2, (2,))
    )
    ref = direct_joint(Y2, 1.0, (2,), (a,), window=26)
    assert det.value == pytest.approx(ref, abs=1e-10)


@pytest.mark.parametrize(
    "thresholds", [(1, -1), (0, -2), (2, 0), (1, 1), (-1, -3)]
)
def test_two_particle_joint_matches_transition_sums(thresholds):
    det = joint_distribution_discrete(
        bound_kernel(Y2, 1.0),
        ThresholdSpec((1, 2), thresholds),
        margin_policy(Y2, (1, 2)),
    )
    ref = direct_joint(Y2, 1.0, (1, 2), thresholds, window=26)
    assert det.value == pytest.approx(ref, abs=1e-10)


@pytest.mark.parametrize(
    "selections, thresholds",
    [((1, 3), (2, -1)), ((2,), (1,)), ((1, 2, 3), (2, 1, -1))],
)
def test_three_particle_cases_match_transition_sums(selections, thresholds):
    det = joint_distribution_discrete(
        bound_kernel(Y3, 0.8),
        ThresholdSpec(selections, thresholds),
        margin_policy(Y3, selections),
    )
    ref = direct_joint(Y3, 0.8, selections, thresholds, window=18)
    assert det.value == pytest.approx(ref, abs=1e-9)


def test_vacuous_thresholds_give_probability_one():
    # thresholds at or below every reachable site leave nothing to cut
    det = joint_distribution_discrete(
        bound_kernel(Y2, 1.0),
        ThresholdSpec((1, 2), (-30, -30)),
        margin_policy(Y2, (1, 2)),
    )
    assert det.value == 1.0
    assert det.stabilization_delta == 0.0


def test_probability_nonincreasing_in_threshold():
    values = [
        joint_distribution_discrete(
            bound_kernel(Y2, 1.0), ThresholdSpec((1,), (a,)), margin_policy(Y2, (1,))
        ).value
        for a in range(-2, 6)
    ]
    assert all(b <= a + 1e-12 for a, b in zip(values, values[1:]))
    assert values[0] == pytest.approx(1.0, abs=1e-12)


# ---------------------------------------------------------------------------
# inclusion-exclusion over brute-force minors
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("a", [1, 2])
def test_first_level_expansion_is_one_minus_density(a):
    # one particle on level 1, so the Fredholm expansion stops at order 1
    t, window = 0.6, 14
    sites = range(Y2.positions[0] - 3, a)
    ie = 1.0 - sum(brute_force_correlation(Y2, t, [(1, x)], window) for x in sites)
    det = joint_distribution_discrete(
        bound_kernel(Y2, t),
        ThresholdSpec((1,), (a,)),
        TruncationPolicy(x_min=(Y2.positions[0] - 3,)),
    )
    assert det.value == pytest.approx(ie, abs=1e-7)


@pytest.mark.parametrize("a", [-1, 0, 1])
def test_second_level_expansion_stops_at_pair_minors(a):
    # two points on level 2: orders 0, 1, 2 reconstruct the determinant exactly
    t, window = 0.6, 14
    sites = list(range(Y2.positions[1] - 3, a))
    ie = 1.0 - sum(brute_force_correlation(Y2, t, [(2, x)], window) for x in sites)
    ie += sum(
        brute_force_correlation(Y2, t, [(2, x1), (2, x2)], window)
        for x1, x2 in itertools.combinations(sites, 2)
    )
    det = joint_distribution_discrete(
        bound_kernel(Y2, t),
        ThresholdSpec((2,), (a,)),
        TruncationPolicy(x_min=(Y2.positions[1] - 3,)),
    )
    assert det.value == pytest.approx(ie, abs=1e-7)


# ---------------------------------------------------------------------------
# flat kernel route
# ---------------------------------------------------------------------------


def test_flat_determinant_matches_finite_general():
    n_embed, t = 30, 2.0
    y = ParticleConfig(tuple(2 * n_embed - 2 * i for i in range(1, 2 * n_embed + 1)))
    flat_kern = lambda p1, p2: kernel_flat(p1, p2, t)
    gen_kern = lambda p1, p2: kernel_general(
        LatticePoint(p1.n + n_embed, p1.x), LatticePoint(p2.n + n_embed, p2.x), y, t
    )
    for a in (0, 2):
        spec = ThresholdSpec((1,), (a,))
        pol = TruncationPolicy(x_min=(-7,))
        df = joint_distribution_discrete(flat_kern, spec, pol)
        dg = joint_distribution_discrete(gen_kern, spec, pol)
        assert df.value == pytest.approx(dg.value, abs=1e-10)


def test_flat_single_particle_distribution_shape():
    # frozen from the stabilized determinant at t=2 (delta < 1e-14); the
    # MC cross-check at 4 standard errors lives in the acceptance suite
    flat_kern = lambda p1, p2: kernel_flat(p1, p2, 2.0)
    got = {
        a: joint_distribution_discrete(
            flat_kern, ThresholdSpec((1,), (a,)), TruncationPolicy(x_min=(-7,))
        ).value
        for a in (-2, 0, 1, 3)
    }
    assert got[-2] == pytest.approx(1.0, abs=1e-12)
    assert got[0] == pytest.approx(0.440343228165, abs=1e-9)
    assert got[1] == pytest.approx(0.087699030440, abs=1e-9)
    assert got[3] == pytest.approx(0.000062059525, abs=1e-9)


# ---------------------------------------------------------------------------
# truncation behaviour
# ---------------------------------------------------------------------------


def test_truncation_report_flat_is_already_exact():
    # particles never move left, so cutting at the initial position loses
    # nothing: depth 0 and depth 20 agree to 1e-12
    flat_kern = lambda p1, p2: kernel_flat(p1, p2, 2.0)
    spec = ThresholdSpec((1,), (1,))
    rows = truncation_report(
        flat_kern,
        spec,
        [
            TruncationPolicy(x_min=(-2,), growth_step=10, max_rounds=3),
            TruncationPolicy(x_min=(-22,), growth_step=20, max_rounds=2),
        ],
    )
    assert len(rows) == 5
    values = [r.value for r in rows]
    assert max(values) - min(values) < 1e-12
    assert all(r.within_tolerance for r in rows if math.isfinite(r.delta))


def test_truncation_refinement_recovers_from_bad_cutoff():
    # a cutoff above the initial position cuts live sites; one growth step
    # restores them and the ladder settles
    kern = bound_kernel(Y2, 1.0)
    spec = ThresholdSpec((1,), (4,))
    det = joint_distribution_discrete(
        kern, spec, TruncationPolicy(x_min=(1,), growth_step=10, max_rounds=4)
    )
    ref = direct_joint(Y2, 1.0, (1,), (4,), window=26)
    assert det.converged
    assert det.value == pytest.approx(ref, abs=1e-10)


def test_non_stabilizing_truncation_raises_or_flags():
    kern = bound_kernel(Y2, 1.0)
    spec = ThresholdSpec((1,), (4,))
    # two rounds starting above the support: the only delta compares a wrong
    # value against the right one, so stabilization cannot be certified
    with pytest.raises(NumericsError):
        joint_distribution_discrete(
            kern, spec, TruncationPolicy(x_min=(3,), growth_step=1, max_rounds=2)
        )
    soft = joint_distribution_discrete(
        kern,
        spec,
        TruncationPolicy(x_min=(3,), growth_step=1, max_rounds=2, strict=False),
    )
    assert not soft.converged
    assert soft.stabilization_delta > 1e-8


def test_discrete_input_validation():
    kern = bound_kernel(Y2, 1.0)
    with pytest.raises(ValueError):
        joint_distribution_discrete(
            kern, ThresholdSpec((1,), (0.5,)), TruncationPolicy(x_min=(-5,))
        )
    with pytest.raises(ValueError):
        joint_distribution_discrete(
            kern, ThresholdSpec((1, 2), (0, 0)), TruncationPolicy(x_min=(-5,))
        )
    with pytest.raises(ValueError):
        truncation_report(
            kern, ThresholdSpec((1,), (0,)), [TruncationPolicy(x_min=(-5, -5))]
        )


def test_determinant_outside_unit_interval_is_refused():
    bogus = lambda p1, p2: -10.0 if (p1.n, p1.x) == (p2.n, p2.x) else 0.0
    with pytest.raises(NumericsError):
        joint_distribution_discrete(
            bogus, ThresholdSpec((1,), (1,)), TruncationPolicy(x_min=(0,))
        )


# ---------------------------------------------------------------------------
# continuum route
# ---------------------------------------------------------------------------


def test_continuum_validation():
    with pytest.raises(ValueError):
        joint_distribution_continuum([0.0, 1.0], [0.0])
    with pytest.raises(ValueError):
        joint_distribution_continuum([], [])
    with pytest.raises(ValueError):
        joint_distribution_continuum([0.0] * 5, [0.0] * 5)
    with pytest.raises(ValueError):
        joint_distribution_continuum([1.0, 0.0], [0.0, 0.0])
    with pytest.raises(ValueError):
        joint_distribution_continuum([0.0], [0.0], quad_order=19)
    with pytest.raises(ValueError):
        f1_marginal(-6.5)
    with pytest.raises(ValueError):
        f1_marginal(4.5)


def test_continuum_entries_are_weighted_limit_kernel():
    u, s, q = [0.0, 0.8], [-0.3, 0.4], 20
    km = assemble_continuum(u, s, q, interval_length=10.0)
    z, w = np.polynomial.legendre.leggauss(q)
    half = 5.0
    for j, k, a, b in [(0, 0, 3, 17), (0, 1, 5, 2), (1, 0, 11, 9), (1, 1, 0, 19)]:
        expected = (
            math.sqrt(w[a] * half)
            * kernel_f1(
                ScaledPoint(u[j], km.ranges[j][a]), ScaledPoint(u[k], km.ranges[k][b])
            )
            * math.sqrt(w[b] * half)
        )
        assert km.matrix[j * q + a, k * q + b] == pytest.approx(
            expected, rel=1e-12, abs=1e-300
        )


def test_marginal_cdf_shape_and_limits():
    sweep = [-6.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0]
    values = [f1_marginal(s) for s in sweep]
    assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))
    assert abs(values[0]) <= 1e-6
    assert abs(values[-1] - 1.0) <= 1e-6


def test_marginal_matches_independent_discretization():
    # frozen from a run with interval_length 24 and a 96/192-point ladder;
    # agrees with the classical value of the GOE edge law at the origin
    ref = joint_distribution_continuum(
        [0.0], [0.0], quad_order=64, interval_length=24.0
    )
    assert ref.value == pytest.approx(0.831908066202905, abs=1e-11)
    assert f1_marginal(0.0) == pytest.approx(ref.value, abs=1e-10)


@pytest.mark.parametrize("s", [-2.0, 0.0, 2.0])
def test_marginal_self_convergence_across_orders(s):
    v30 = joint_distribution_continuum([0.0], [s], quad_order=30).value
    v60 = joint_distribution_continuum([0.0], [s], quad_order=60).value
    assert abs(v30 - v60) < 1e-8


def test_two_time_reduces_to_marginal_when_one_cut_is_vacuous():
    m1 = joint_distribution_continuum([0.0], [0.5], quad_order=40)
    m2 = joint_distribution_continuum([0.0, 1.0], [0.5, 5.8], quad_order=40)
    assert m2.value == pytest.approx(m1.value, abs=1e-7)


def test_two_time_monotone_in_each_threshold():
    values = [
        joint_distribution_continuum([0.0, 1.0], [s1, 0.5], quad_order=24).value
        for s1 in (-1.0, 0.0, 1.0, 2.0)
    ]
    assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))


def test_three_time_determinant_is_a_probability():
    det = joint_distribution_continuum(
        [-0.5, 0.0, 0.5], [0.2, 0.4, 0.1], quad_order=24
    )
    assert det.converged
    assert 0.0 <= det.value <= 1.0
    assert det.value == pytest.approx(0.737202597666, abs=1e-8)


def test_sparse_rule_on_long_interval_fails_self_check():
    with pytest.raises(NumericsError):
        joint_distribution_continuum(
            [0.0], [-2.0], quad_order=20, interval_length=60.0
        )
    soft = joint_distribution_continuum(
        [0.0], [-2.0], quad_order=20, interval_length=60.0, strict=False
    )
    assert not soft.converged
    assert soft.stabilization_delta > 1e-7


def test_det_result_is_plain_data():
    r = DetResult(value=0.5, stabilization_delta=1e-12, converged=True)
    assert (r.value, r.converged) == (0.5, True)
    with pytest.raises(AttributeError):
        r.value = 0.6
