"""Exact N-particle transition probabilities for the continuous-time TASEP.

The totally asymmetric simple exclusion process on the integer lattice moves
each particle one site to the right at rate 1, suppressing jumps onto occupied
sites.  For a finite system of N particles started at positions
``y_1 > y_2 > ... > y_N`` (labels run right to left), the probability of
finding them at ``x_1 > ... > x_N`` at time t is an N x N determinant built
from a single one-parameter family of lattice functions

    F_n(x, t) = ((-1)^n / 2 pi i) * loop-integral of
                w^(n-x-1) * (1-w)^(-n) * exp(t (w-1)) dw,

the contour enclosing w = 0 and (for n > 0) w = 1.  For n <= 0 the integrand
has a pole only at the origin and F_n reduces to a finite sum

    F_n(x, t) = (-1)^n e^{-t} * sum_j (-1)^j C(-n, j) t^(K-j)/(K-j)!,
    K = x - n,

which this module evaluates in exact rational arithmetic (any float t is a
dyadic rational, so the only inexactness is the final e^{-t} factor).  For
n > 0 the pole at w = 1 makes the sum infinite and the integral is evaluated
by trapezoid quadrature on a circle enclosing both poles; the trapezoid rule
on a circle converges geometrically for analytic integrands.

The family satisfies the difference/summation relations

    F_{n-1}(x, t) = F_n(x, t) - F_n(x+1, t)
    F_{n+1}(x, t) = sum_{y >= x} F_n(y, t)            (n >= 0)
    F_{n+1}(x, t) = -sum_{y < x} F_n(y, t)            (n < 0)

which the tests use as independent oracles for the quadrature path.

Beyond the determinant itself, the module exposes the combinatorial
decomposition of the transition probability as a sum of simpler determinants
over a triangular array of auxiliary interlacing variables, the exact
summation identity on which that decomposition rests (a cancellation property
of antisymmetric summands), and a direct evaluator for correlation functions
of the associated signed measure.  These are the ground truth against which
the kernel machinery in :mod:`tasepdet.kernels` is validated.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterator, Sequence

import numpy as np

__all__ = [
    "ContourError",
    "ContourSpec",
    "CrossCheckError",
    "DomainComparison",
    "FnValue",
    "NumericsError",
    "ParticleConfig",
    "WindowError",
    "antisymmetric_domain_check",
    "brute_force_correlation",
    "decomposition_sum",
    "eval_F",
    "fn_exact",
    "gen_binomial",
    "path_binomial",
    "transition_probability",
]


class NumericsError(RuntimeError):
    """A numerical self-check failed (cross-path disagreement, bad window...)."""


class WindowError(NumericsError):
    """A lattice summation window proved too small under the +10 recheck."""


class CrossCheckError(NumericsError):
    """Two independent evaluation paths disagree beyond tolerance."""


class ContourError(ValueError):
    """Invalid contour specification for the requested evaluation."""


# ---------------------------------------------------------------------------
# basic types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ParticleConfig:
    """Ordered particle configuration; ``positions[0]`` is the right-most
    particle (label 1), positions strictly decrease with the label."""

    positions: tuple[int, ...]

    def __post_init__(self) -> None:
        pos = tuple(int(p) for p in self.positions)
        object.__setattr__(self, "positions", pos)
        if len(pos) < 1:
            raise ValueError("need at least one particle")
        if any(a <= b for a, b in zip(pos, pos[1:])):
            raise ValueError(f"positions must strictly decrease: {pos}")

    @property
    def n_particles(self) -> int:
        return len(self.positions)

    def position(self, label: int) -> int:
        """Position of the particle with 1-based label (1 = right-most)."""
        if not 1 <= label <= len(self.positions):
            raise ValueError(f"label {label} outside 1..{len(self.positions)}")
        return self.positions[label - 1]


@dataclass(frozen=True)
class ContourSpec:
    """How to evaluate a lattice contour integral.

    mode 'series' extracts the residue coefficient exactly (finite rational
    sum); 'quadrature' uses the M-node trapezoid rule on a circle; 'auto'
    picks per integrand.  ``radius=None`` selects a saddle-informed default.
    """

    mode: str = "auto"
    series_order: int = 400
    radius: float | None = None
    nodes: int = 256

    def __post_init__(self) -> None:
        if self.mode not in ("auto", "series", "quadrature"):
            raise ContourError(f"unknown contour mode {self.mode!r}")
        if self.series_order < 0:
            raise ContourError("series_order must be nonnegative")
        if self.nodes < 16:
            raise ContourError("need at least 16 quadrature nodes")
        if self.radius is not None and self.radius <= 0:
            raise ContourError("radius must be positive")


@dataclass(frozen=True)
class FnValue:
    """Value of F_n(x, t) together with an evaluation-error estimate."""

    value: float
    est_error: float


# ---------------------------------------------------------------------------
# binomials
# ---------------------------------------------------------------------------


def path_binomial(a: int, b: int) -> int:
    """Binomial coefficient with the lattice-path convention: zero unless
    0 <= b <= a.  Used by the kernel transfer term, where C(x1-x2-1, d-1)
    counts weakly decreasing integer paths."""
    if b < 0 or a < 0 or b > a:
        return 0
    return math.comb(a, b)


def gen_binomial(a: int, b: int) -> int:
    """Generalized binomial C(a, b) = a(a-1)...(a-b+1)/b! for integer a of
    any sign and b >= 0 (zero for b < 0)."""
    if b < 0:
        return 0
    if a >= 0:
        return math.comb(a, b) if b <= a else 0
    # C(a, b) = (-1)^b C(b - a - 1, b) for a < 0
    return (-1) ** b * math.comb(b - a - 1, b)


# ---------------------------------------------------------------------------
# F_n evaluation
# ---------------------------------------------------------------------------


def fn_exact(n: int, x: int, t: Fraction) -> Fraction:
    """Exact rational part of F_n(x, t) for n <= 0:  F_n = e^{-t} * fn_exact.

    The coefficient of w^(x-n) in (1-w)^(-n) e^{tw}, times (-1)^n.  Finite
    alternating sum; doing it over Fractions avoids all cancellation loss.
    """
    if n > 0:
        raise ValueError("exact residue extraction only applies for n <= 0")
    m = -n
    K = x - n
    if K < 0:
        return Fraction(0)
    if t == 0:
        # only the j = K term survives (t^0 = 1)
        return Fraction((-1) ** (m + K) * math.comb(m, K)) if K <= m else Fraction(0)
    total = Fraction(0)
    # walk t^(K-j)/(K-j)! downward to reuse the factorial product
    power = t ** K
    fact = Fraction(math.factorial(K))
    for j in range(0, min(m, K) + 1):
        total += ((-1) ** j * math.comb(m, j)) * power / fact
        if j < min(m, K):
            power /= t
            fact /= K - j
    return (-1) ** m * total


def _quad_F(n: int, x: int, t: float, radius: float, nodes: int) -> tuple[float, float]:
    """Trapezoid contour quadrature for F_n; returns (value, error estimate).

    Error estimate = node-doubling difference plus the residual imaginary
    part (the exact value is real)."""

    def attempt(m: int) -> complex:
        theta = 2.0 * np.pi * np.arange(m) / m
        w = radius * np.exp(1j * theta)
        integrand = w ** (n - x - 1) * (1.0 - w) ** (-n) * np.exp(t * (w - 1.0))
        return (-1) ** n * np.mean(integrand * w)

    q1 = attempt(nodes)
    q2 = attempt(2 * nodes)
    err = abs(q1 - q2) + abs(q2.imag)
    return float(q2.real), float(err)


@lru_cache(maxsize=200_000)
def _fn_cached(n: int, x: int, t: float) -> float:
    if n <= 0:
        return float(fn_exact(n, x, Fraction(t))) * math.exp(-t)
    value, _ = _quad_F(n, x, t, 1.5, 256)
    return value


def eval_F(n: int, x: int, t: float, spec: ContourSpec | None = None) -> FnValue:
    """Evaluate F_n(x, t).

    With no spec (or mode 'auto') the pole structure selects the path:
    exact residue extraction for n <= 0, circle quadrature (default radius
    1.5, enclosing both w = 0 and w = 1) for n > 0.  Requesting 'series'
    for n > 0 raises, since the pole at w = 1 makes the coefficient sum
    infinite.
    """
    if t < 0:
        raise ValueError("time must be nonnegative")
    spec = spec or ContourSpec()
    mode = spec.mode
    if mode == "auto":
        mode = "series" if n <= 0 else "quadrature"
    if mode == "series":
        if n > 0:
            raise ContourError(
                "series extraction undefined for n > 0 (pole at w = 1); "
                "use quadrature"
            )
        if x - n > max(spec.series_order, 0) + abs(n):
            # far in the Poisson tail; still exact, just note the scale
            pass
        rat = fn_exact(n, x, Fraction(t))
        value = float(rat) * math.exp(-t)
        return FnValue(value, 8.0 * abs(value) * np.finfo(float).eps)
    # quadrature
    if n > 0:
        radius = spec.radius if spec.radius is not None else 1.5
        if radius <= 1.0:
            raise ContourError("contour for n > 0 must enclose w = 1")
    else:
        K = x - n
        if spec.radius is not None:
            radius = spec.radius
        else:
            radius = min(50.0, max(0.75, (K + 1) / t)) if t > 0 else 1.0
    value, err = _quad_F(n, x, t, radius, spec.nodes)
    return FnValue(value, err)


# ---------------------------------------------------------------------------
# transition probability (N x N determinant)
# ---------------------------------------------------------------------------


def transition_probability(y: ParticleConfig, x: ParticleConfig, t: float) -> float:
    """Probability of the TASEP moving y to exactly x in time t.

    det( F_{i-j}(x_{N+1-i} - y_{N+1-j}, t) ), i, j = 1..N.  Entries with
    i <= j come from the exact path, the rest from quadrature.
    """
    if y.n_particles != x.n_particles:
        raise ValueError("initial and final configurations differ in size")
    N = y.n_particles
    a = np.empty((N, N))
    for i in range(1, N + 1):
        for j in range(1, N + 1):
            a[i - 1, j - 1] = _fn_cached(
                i - j, x.positions[N - i] - y.positions[N - j], t
            )
    if N == 1:
        return float(a[0, 0])
    return float(np.linalg.det(a))


# ---------------------------------------------------------------------------
# decomposition over the interlacing triangular array
# ---------------------------------------------------------------------------


def _iter_domain(
    x_fixed: Sequence[int], hi: int, relaxed: bool
) -> Iterator[tuple[int, ...]]:
    """Yield the bottom row (x_1^N, ..., x_N^N) once per admissible filling
    of the triangular array {x_i^j : 2 <= i <= j <= N}, top row fixed.

    Constraints: x_i^j >= x_{i-1}^{j-1} always; and, unless ``relaxed``,
    x_i^j > x_i^{j+1}.  Variables are filled row by row (i ascending),
    within a row by level j ascending, so each variable's lower bound
    (x_{i-1}^{j-1}) and upper bound (x_i^{j-1} - 1, since positions strictly
    decrease along a row as the level grows) are both already assigned.
    """
    N = len(x_fixed)
    vals: dict[tuple[int, int], int] = {(1, j): x_fixed[j - 1] for j in range(1, N + 1)}
    order = [(i, j) for i in range(2, N + 1) for j in range(i, N + 1)]

    def rec(k: int) -> Iterator[tuple[int, ...]]:
        if k == len(order):
            yield tuple(vals[(i, N)] for i in range(1, N + 1))
            return
        i, j = order[k]
        lo_k = vals[(i - 1, j - 1)]
        hi_k = hi if (j == i or relaxed) else vals[(i, j - 1)] - 1
        for v in range(lo_k, hi_k + 1):
            vals[(i, j)] = v
            yield from rec(k + 1)
        vals.pop((i, j), None)

    yield from rec(0)


def decomposition_sum(
    y: ParticleConfig,
    x: ParticleConfig,
    t: float,
    window: int | None = None,
    check_window: bool = True,
    tol: float = 1e-10,
) -> float:
    """Transition probability recomputed as a sum of N x N determinants
    det( F_{-j}(x^N_{i+1} - y_{N-j}, t) ) over all interlacing fillings of
    the triangular auxiliary array whose top row is the final configuration.

    Every auxiliary variable is capped at ``max(x) + window``; the result is
    recomputed with window + 10 and a :class:`WindowError` is raised if the
    two disagree beyond ``tol`` (the summand decays like a Poisson tail, so
    agreement certifies the cap).
    """
    if y.n_particles != x.n_particles:
        raise ValueError("initial and final configurations differ in size")
    N = y.n_particles
    if N > 4:
        raise ValueError("decomposition enumerations are supported for N <= 4")
    if window is None:
        window = int(math.ceil(10.0 * t + 20.0 * math.sqrt(t))) + 2

    def run(win: int) -> float:
        hi = max(x.positions) + win
        det_cache: dict[tuple[int, ...], float] = {}
        terms: list[float] = []
        for col in _iter_domain(x.positions, hi, relaxed=False):
            d = det_cache.get(col)
            if d is None:
                a = np.empty((N, N))
                for i in range(N):
                    for j in range(N):
                        a[i, j] = _fn_cached(-j, col[i] - y.positions[N - j - 1], t)
                d = float(np.linalg.det(a)) if N > 1 else float(a[0, 0])
                det_cache[col] = d
            terms.append(d)
        return math.fsum(terms)

    value = run(window)
    if check_window:
        wide = run(window + 10)
        if abs(wide - value) > tol * max(1.0, abs(value)):
            raise WindowError(
                f"decomposition window {window} too small: "
                f"{value!r} vs {wide!r} at window+10"
            )
        value = wide
    return value


# ---------------------------------------------------------------------------
# exact antisymmetric-domain identity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DomainComparison:
    """Exact sums of an antisymmetric summand over the nested-inequality
    domain and over its relaxed version (row inequalities dropped)."""

    constrained_sum: Fraction
    relaxed_sum: Fraction

    @property
    def equal(self) -> bool:
        return self.constrained_sum == self.relaxed_sum


def antisymmetric_domain_check(
    f: Callable[..., int | Fraction],
    x_fixed: Sequence[int],
    hi: int,
) -> DomainComparison:
    """Compare sum of f(bottom row) over the interlacing domain against the
    relaxed domain, in exact arithmetic.

    For f antisymmetric in its N arguments the two sums agree identically
    (the extra terms of the relaxed domain cancel in pairs); for generic f
    they differ.  f must vanish once any argument exceeds ``hi`` so both
    sums are finite on the window.

    The relaxed sum is evaluated in closed form: dropping the row
    inequalities decouples the diagonals of the array into independent
    nondecreasing chains, and a chain from base b to top v with c interior
    variables contributes C(v - b + c, c) fillings.
    """
    xf = tuple(int(v) for v in x_fixed)
    if any(a <= b for a, b in zip(xf, xf[1:])):
        raise ValueError("fixed top row must strictly decrease")
    N = len(xf)
    constrained = Fraction(0)
    for col in _iter_domain(xf, hi, relaxed=False):
        constrained += Fraction(f(*col))
    relaxed = Fraction(0)
    # bottom-row entry i (2-based) tops the diagonal chain rooted at
    # x_{N-i+1}; i-2 interior chain variables give the stars-and-bars weight
    tops = [range(xf[N - i], hi + 1) for i in range(2, N + 1)]
    for vs in itertools.product(*tops):
        mult = 1
        for i, v in zip(range(2, N + 1), vs):
            mult *= math.comb(v - xf[N - i] + i - 2, i - 2)
        if mult:
            relaxed += mult * Fraction(f(xf[N - 1], *vs))
    return DomainComparison(constrained, relaxed)


# ---------------------------------------------------------------------------
# signed-measure correlation functions by direct summation
# ---------------------------------------------------------------------------


def _level_transfer(prev: np.ndarray, cur: np.ndarray) -> np.ndarray:
    """Signed 0/1 transfer determinants between consecutive level configs.

    prev: (P, n-1) ascending rows, cur: (C, n) ascending rows.  Entry (p, c)
    is det of the n x n indicator matrix 1(prev_i > cur_j) with a final
    all-ones row standing in for the virtual particle at +infinity.
    """
    P, C = prev.shape[0], cur.shape[0]
    n = cur.shape[1]
    out = np.empty((P, C))
    chunk = max(1, int(4e6) // max(P * n * n, 1))
    for s in range(0, C, chunk):
        cc = cur[s : s + chunk]
        mats = np.ones((P, cc.shape[0], n, n))
        mats[:, :, : n - 1, :] = (
            prev[:, None, :, None] > cc[None, :, None, :]
        ).astype(float)
        out[:, s : s + chunk] = np.rint(np.linalg.det(mats))
    return out


def brute_force_correlation(
    y: ParticleConfig,
    t: float,
    points: Sequence[tuple[int, int]],
    window: int,
) -> float:
    """Correlation function of the signed interlacing measure at the given
    (level, position) points, by direct normalized summation.

    The measure on the triangular array {x_i^n : 1 <= i <= n <= N} has
    weight  prod_{n=2..N} det(1(x_i^{n-1} > x_j^n))  *
    det(F_{-j}(x_{i+1}^N - y_{N-j}, t)), with a virtual +infinity particle
    per level.  Within-level permutations leave the weight invariant, so the
    sum runs over ascending tuples per level (the common ordering factor
    cancels in the normalized ratio).  Correlation = (sum over arrays whose
    level-n_k config contains a_k for every point) / (sum over all arrays).
    """
    N = y.n_particles
    if N > 3:
        raise ValueError("direct summation supported for N <= 3")
    if len(points) > 2:
        raise ValueError("at most two correlation points")
    if abs(window) > 40:
        raise ValueError("window capped at 40 sites")
    for lev, _pos in points:
        if not 1 <= lev <= N:
            raise ValueError(f"point level {lev} outside 1..{N}")

    lo = min(y.positions) - window
    hi = max(y.positions) + window
    sites = np.arange(lo, hi + 1)
    required: dict[int, list[int]] = {}
    for lev, pos in points:
        if not lo <= pos <= hi:
            return 0.0
        required.setdefault(lev, []).append(pos)

    configs: list[np.ndarray] = []
    for n in range(1, N + 1):
        combos = np.array(list(itertools.combinations(sites.tolist(), n)), dtype=int)
        configs.append(combos)

    def level_mask(n: int) -> np.ndarray:
        need = required.get(n)
        cfg = configs[n - 1]
        if not need:
            return np.ones(cfg.shape[0], dtype=bool)
        mask = np.ones(cfg.shape[0], dtype=bool)
        for a in need:
            mask &= (cfg == a).any(axis=1)
        return mask

    # forward DP, full and point-constrained in one pass
    f_full = np.ones(configs[0].shape[0])
    f_con = f_full * level_mask(1)
    for n in range(2, N + 1):
        T = _level_transfer(configs[n - 2], configs[n - 1])
        f_full = f_full @ T
        f_con = (f_con @ T) * level_mask(n)

    # bottom-level determinants det F_{-j}(c_{i+1} - y_{N-j})
    cN = configs[N - 1]
    mats = np.empty((cN.shape[0], N, N))
    for j in range(N):
        yj = y.positions[N - j - 1]
        args = cN - yj  # (C, N): column i is c_{i+1} - y_{N-j}
        uniq = np.unique(args)
        table = {int(v): _fn_cached(-j, int(v), t) for v in uniq}
        mats[:, :, j] = np.vectorize(lambda v: table[int(v)])(args)
    dets = np.linalg.det(mats) if N > 1 else mats[:, 0, 0]

    Z = float(f_full @ dets)
    if Z == 0.0:
        raise NumericsError("signed measure normalizes to zero on this window")
    return float(f_con @ dets) / Z
