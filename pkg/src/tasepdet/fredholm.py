"""Joint distribution functions as Fredholm determinants.

Discrete route: det(1 - chi K chi) with the extended lattice kernel cut
below integer thresholds per selected particle -- the probability that each
selected particle sits at or right of its threshold.  Continuum route: the
same structure for the limit kernel on (s_k, inf) blocks, Gauss-Legendre
discretized with the symmetric sqrt(w) K sqrt(w) weighting.

The underlying lattice point measure is signed, so individual minors and
intermediate determinant values may dip below zero; only the final gap
probabilities are asserted (and only within 1e-8) to live in [0, 1].

Kernel evaluations are independent of each other, so assembly order is
irrelevant and results are deterministic; the factorization is a plain
pivoted LU per determinant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from tasepdet.airy_scaling import _SERIES_EDGE, _gl_rule, airy, airy_log
from tasepdet.kernels import LatticePoint
from tasepdet.schuetz_core import NumericsError

__all__ = [
    "ThresholdSpec",
    "TruncationPolicy",
    "TruncationRow",
    "KernelMatrix",
    "DetResult",
    "assemble_discrete",
    "assemble_continuum",
    "joint_distribution_discrete",
    "joint_distribution_continuum",
    "f1_marginal",
    "truncation_report",
]

KernelEvaluator = Callable[[LatticePoint, LatticePoint], float]

_PROB_SLACK = 1e-8


@dataclass(frozen=True)
class ThresholdSpec:
    """Which particles are constrained and where: strictly increasing labels
    sigma(1) < ... < sigma(m), one threshold per label."""

    selections: tuple[int, ...]
    thresholds: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.selections:
            raise ValueError("need at least one selected particle")
        if len(self.selections) != len(self.thresholds):
            raise ValueError("one threshold per selected particle")
        if any(b <= a for a, b in zip(self.selections, self.selections[1:])):
            raise ValueError("particle selections must be strictly increasing")

    @property
    def m(self) -> int:
        return len(self.selections)


@dataclass(frozen=True)
class TruncationPolicy:
    """Lower cutoffs for the semi-infinite discrete blocks.

    x_min holds one starting cutoff per selected particle (particles never
    jump left, so anything at or below the initial position is provably
    dead weight; a margin of ~5 is pure caution).  The determinant is then
    recomputed with every cutoff pushed down by growth_step until two
    consecutive values agree to tolerance, at most max_rounds times.
    """

    x_min: tuple[int, ...]
    growth_step: int = 10
    tolerance: float = 1e-8
    max_rounds: int = 4
    strict: bool = True

    def __post_init__(self) -> None:
        if self.growth_step < 1 or self.max_rounds < 2:
            raise ValueError("need growth_step >= 1 and max_rounds >= 2")


@dataclass(frozen=True)
class TruncationRow:
    """One stabilization sample: the cutoffs actually used, the determinant,
    and the change from the previous (shallower) cutoffs."""

    x_min: tuple[int, ...]
    value: float
    delta: float
    within_tolerance: bool


@dataclass(frozen=True)
class KernelMatrix:
    """Discretized cut kernel: m x m blocks flattened into one matrix, with
    the per-block index sets kept for bookkeeping."""

    labels: tuple[int, ...]
    ranges: tuple[tuple[float, ...], ...]
    matrix: np.ndarray
    x_min: tuple[int, ...] | None = None
    quad_order: int | None = None

    def __post_init__(self) -> None:
        dim = sum(len(r) for r in self.ranges)
        if self.matrix.shape != (dim, dim):
            raise ValueError(
                f"matrix shape {self.matrix.shape} inconsistent with "
                f"block sizes {[len(r) for r in self.ranges]}"
            )


@dataclass(frozen=True)
class DetResult:
    """A Fredholm determinant value plus its own error bar: the change under
    one refinement step (deeper truncation or doubled quadrature)."""

    value: float
    stabilization_delta: float
    converged: bool


def _det_one_minus(a: np.ndarray) -> float:
    n = a.shape[0]
    if n == 0:
        return 1.0
    return float(np.linalg.det(np.eye(n) - a))


def _check_probability(value: float, what: str) -> None:
    if not (-_PROB_SLACK <= value <= 1.0 + _PROB_SLACK):
        raise NumericsError(f"{what} = {value!r} outside [-1e-8, 1+1e-8]")


# ---------------------------------------------------------------------------
# discrete determinants
# ---------------------------------------------------------------------------


def assemble_discrete(
    kernel: KernelEvaluator, spec: ThresholdSpec, x_min: Sequence[int]
) -> KernelMatrix:
    """Cut-kernel matrix over sites x in [x_min_k, a_k) per block.

    Entries are conjugated by 2^x (entry -> 2^{x2-x1} K) -- a diagonal
    similarity that leaves every minor determinant unchanged while keeping
    the graded kernel's entries O(1) for the LU factorization.
    """
    sites = []
    for lo, a in zip(x_min, spec.thresholds):
        hi = int(math.ceil(a))
        sites.append(tuple(range(lo, hi)))
    dim = sum(len(s) for s in sites)
    mat = np.empty((dim, dim))
    row = 0
    for j, nj in enumerate(spec.selections):
        for x1 in sites[j]:
            col = 0
            for k, nk in enumerate(spec.selections):
                for x2 in sites[k]:
                    raw = kernel(LatticePoint(nj, x1), LatticePoint(nk, x2))
                    mat[row, col] = math.ldexp(raw, x2 - x1)
                    col += 1
            row += 1
    return KernelMatrix(
        labels=spec.selections,
        ranges=tuple(tuple(float(x) for x in s) for s in sites),
        matrix=mat,
        x_min=tuple(x_min),
    )


def joint_distribution_discrete(
    kernel: KernelEvaluator, spec: ThresholdSpec, trunc: TruncationPolicy
) -> DetResult:
    """P(every selected particle sits at or right of its threshold), as the
    Fredholm determinant of the cut extended kernel.

    The thresholds must be integers (lattice positions).  The truncation
    policy is refined until the value stabilizes; a non-stabilizing policy
    raises under strict=True and is returned flagged otherwise.
    """
    if len(trunc.x_min) != spec.m:
        raise ValueError("truncation policy must give one x_min per particle")
    if any(a != int(a) for a in spec.thresholds):
        raise ValueError("discrete thresholds must be integers")
    prev = None
    delta = math.inf
    for r in range(trunc.max_rounds):
        cuts = [lo - r * trunc.growth_step for lo in trunc.x_min]
        value = _det_one_minus(assemble_discrete(kernel, spec, cuts).matrix)
        if prev is not None:
            delta = abs(value - prev)
            if delta <= trunc.tolerance:
                _check_probability(value, "discrete Fredholm determinant")
                return DetResult(value=value, stabilization_delta=delta, converged=True)
        prev = value
    if trunc.strict:
        raise NumericsError(
            f"truncation did not stabilize: last delta {delta:.3e} > "
            f"{trunc.tolerance:.1e} after {trunc.max_rounds} rounds"
        )
    _check_probability(prev, "discrete Fredholm determinant")
    return DetResult(value=prev, stabilization_delta=delta, converged=False)


def truncation_report(
    kernel: KernelEvaluator, spec: ThresholdSpec, policies: Sequence[TruncationPolicy]
) -> list[TruncationRow]:
    """Determinant value as a function of the truncation depth, one row per
    (policy, refinement round); the delta column certifies stabilization."""
    rows: list[TruncationRow] = []
    for pol in policies:
        if len(pol.x_min) != spec.m:
            raise ValueError("policy x_min length must match the selection")
        prev = None
        for r in range(pol.max_rounds):
            cuts = tuple(lo - r * pol.growth_step for lo in pol.x_min)
            value = _det_one_minus(assemble_discrete(kernel, spec, cuts).matrix)
            delta = math.inf if prev is None else abs(value - prev)
            rows.append(
                TruncationRow(
                    x_min=cuts,
                    value=value,
                    delta=delta,
                    within_tolerance=delta <= pol.tolerance,
                )
            )
            prev = value
    return rows


# ---------------------------------------------------------------------------
# continuum determinants
# ---------------------------------------------------------------------------


def _curved_block(d: float, ssum: np.ndarray) -> np.ndarray:
    """Vectorized Ai(ssum + d^2) exp(d ssum + (2/3) d^3) for a whole block;
    large Airy arguments go through the log path elementwise."""
    arg = ssum + d * d
    expo = d * ssum + 2.0 / 3.0 * d**3
    out = np.empty_like(arg)
    small = arg <= _SERIES_EDGE
    if np.any(small):
        out[small] = airy(arg[small]) * np.exp(expo[small])
    for idx in np.flatnonzero(~small.ravel()):
        ln = airy_log(float(arg.ravel()[idx])) + float(expo.ravel()[idx])
        out.ravel()[idx] = math.exp(ln) if ln > -745.0 else 0.0
    return out


def assemble_continuum(
    u_list: Sequence[float],
    s_list: Sequence[float],
    quad_order: int,
    interval_length: float = 18.0,
) -> KernelMatrix:
    """Gauss-Legendre discretization of the cut limit kernel.

    Block k lives on (s_k, s_k + interval_length); the kernel decays
    super-exponentially upward, so the finite interval stands in for
    (s_k, inf).  Entries carry the symmetric sqrt(w_a) K sqrt(w_b) weights,
    so the determinant of I - M is the quadrature approximation of the
    Fredholm determinant.
    """
    z, w = _gl_rule(quad_order)
    half = interval_length / 2.0
    nodes = [np.asarray(s) + (z + 1.0) * half for s in s_list]
    root_w = np.sqrt(w * half)
    m = len(u_list)
    q = quad_order
    mat = np.empty((m * q, m * q))
    for j in range(m):
        for k in range(m):
            d = u_list[k] - u_list[j]
            ssum = nodes[j][:, None] + nodes[k][None, :]
            block = _curved_block(d, ssum)
            if d > 0:
                diff = nodes[k][None, :] - nodes[j][:, None]
                block = block - np.exp(-(diff**2) / (4.0 * d)) / math.sqrt(
                    4.0 * math.pi * d
                )
            mat[j * q : (j + 1) * q, k * q : (k + 1) * q] = (
                root_w[:, None] * block * root_w[None, :]
            )
    return KernelMatrix(
        labels=tuple(range(1, m + 1)),
        ranges=tuple(tuple(float(x) for x in ns) for ns in nodes),
        matrix=mat,
        quad_order=quad_order,
    )


def joint_distribution_continuum(
    u_list: Sequence[float],
    s_list: Sequence[float],
    quad_order: int = 40,
    interval_length: float = 18.0,
    tolerance: float = 1e-7,
    strict: bool = True,
) -> DetResult:
    """P(limit process <= s_k at every u_k): det(1 - chi K chi) over the
    blocks (s_k, inf), self-checked by doubling the quadrature order."""
    if len(u_list) != len(s_list):
        raise ValueError("one threshold per time point")
    if not 1 <= len(u_list) <= 4:
        raise ValueError("continuum determinants support 1 <= m <= 4")
    if any(b <= a for a, b in zip(u_list, u_list[1:])):
        raise ValueError("u_list must be strictly increasing")
    if quad_order < 20:
        raise ValueError("quad_order must be at least 20")
    coarse = _det_one_minus(
        assemble_continuum(u_list, s_list, quad_order, interval_length).matrix
    )
    fine = _det_one_minus(
        assemble_continuum(u_list, s_list, 2 * quad_order, interval_length).matrix
    )
    delta = abs(fine - coarse)
    if delta > tolerance:
        if strict:
            raise NumericsError(
                f"quadrature not converged: orders {quad_order} vs "
                f"{2 * quad_order} differ by {delta:.3e}"
            )
        return DetResult(value=fine, stabilization_delta=delta, converged=False)
    _check_probability(fine, "continuum Fredholm determinant")
    return DetResult(value=fine, stabilization_delta=delta, converged=True)


def f1_marginal(s: float, quad_order: int = 40) -> float:
    """Single-time gap probability det(1 - B_0) on (s, inf) with
    B_0(x, y) = Ai(x + y): the distribution the scaling limit obeys."""
    if not -6.0 <= s <= 4.0:
        raise ValueError("f1_marginal rated for s in [-6, 4]")
    return joint_distribution_continuum([0.0], [s], quad_order=quad_order).value
