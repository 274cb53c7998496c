"""Airy function machinery and the scaling limit of the flat kernel.

The centerpiece is the extended limit kernel

    K(u1, s1; u2, s2) = -heat(u2-u1, s1, s2) * 1(u2 > u1)
        + Ai(s1 + s2 + (u2-u1)^2) * exp((u2-u1)(s1+s2) + (2/3)(u2-u1)^3)

together with the diagnostics that tie it back to the lattice: a contour
identity reducing cubic-exponential integrals to Airy values, a heat-kernel
smoothing identity, and a convergence scan of the conjugated, rescaled
discrete kernel onto K.

Everything here is pure and deterministic; scan grids may be evaluated in
any order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from tasepdet.kernels import _flat_quad_radius, _flat_term2_quadrature
from tasepdet.schuetz_core import ContourSpec, NumericsError


@lru_cache(maxsize=64)
def _gl_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes/weights on [-1, 1]; cached because generating
    them is an O(n^3) eigenproblem while using them is O(n)."""
    z, w = np.polynomial.legendre.leggauss(n)
    z.setflags(write=False)
    w.setflags(write=False)
    return z, w


def _gl_size(n: float) -> int:
    # quantize requested node counts so the rule cache actually hits
    return 64 * max(1, math.ceil(n / 64.0))

__all__ = [
    "ScaledPoint",
    "SnapReport",
    "ScanRow",
    "airy",
    "airy_log",
    "airy_contour_identity",
    "kernel_f1",
    "heat_propagator",
    "smoothed_identity_check",
    "rescaled_kernel",
    "convergence_scan",
    "scan_csv",
]


@dataclass(frozen=True)
class ScaledPoint:
    """Observation point in scaled coordinates: u in units of t^{2/3}
    (label direction), s in units of t^{1/3} (fluctuation direction)."""

    u: float
    s: float


@dataclass(frozen=True)
class SnapReport:
    """How a scaled point landed on the lattice: the requested (u, s), the
    rounded integers (n, x), and the effective (u, s) those integers imply
    (the honest comparison target for convergence measurements)."""

    requested: ScaledPoint
    n: int
    x: int
    effective: ScaledPoint


AIRY_MIN = -25.0

# Ai(0) = 3^{-2/3}/Gamma(2/3) and -Ai'(0) = 3^{-1/3}/Gamma(1/3)
_AI0 = 3.0 ** (-2.0 / 3.0) / math.gamma(2.0 / 3.0)
_AI0P = 3.0 ** (-1.0 / 3.0) / math.gamma(1.0 / 3.0)
_SERIES_EDGE = 5.5


def _airy_series(x: np.ndarray) -> np.ndarray:
    """Maclaurin evaluation Ai = Ai(0) F - Ai'(0) G, for |x| <= 5.5.

    F and G are the two cube-pattern entire solutions of the Airy ODE;
    term ratios are rational in k, so the sums are generated incrementally.
    """
    x = np.asarray(x, dtype=float)
    x3 = x**3
    f_term = np.ones_like(x)
    g_term = x.copy()
    f_sum = f_term.copy()
    g_sum = g_term.copy()
    for k in range(60):
        f_term = f_term * x3 / ((3 * k + 2) * (3 * k + 3))
        g_term = g_term * x3 / ((3 * k + 3) * (3 * k + 4))
        f_sum += f_term
        g_sum += g_term
    return _AI0 * f_sum - _AI0P * g_sum


def _airy_pos_log(x: float) -> float:
    """log Ai(x) for x > 0 by quadrature on the vertical line through the
    saddle sqrt(x): there the integrand is a pure Gaussian times the small
    residual phase w^3/3, so no cancellation occurs at any magnitude."""
    rx = math.sqrt(x)
    # Gaussian width x^{-1/4}; 14 widths of the e^{-sqrt(x) w^2} factor
    half = 14.0 / max(x**0.25, 0.2)
    w, wts = _gl_rule(192)
    w = w * half
    wts = wts * half
    vals = np.exp(-rx * w**2) * np.cos(w**3 / 3.0)
    integral = float(np.sum(wts * vals))
    if integral <= 0:  # pragma: no cover - Gaussian bulk keeps this positive
        raise NumericsError(f"Airy descent quadrature collapsed at x={x}")
    return -2.0 / 3.0 * x**1.5 + math.log(integral / (2.0 * math.pi))


def _airy_neg(x: float) -> float:
    """Ai(x) for x < 0 via Im of the upper half-contour: a vertical leg from
    0 to the saddle i sqrt(|x|) (unimodular integrand, pure phase), then a
    steepest-descent ray at angle pi/4 off the saddle."""
    r = math.sqrt(-x)

    def g(v: np.ndarray) -> np.ndarray:
        return v**3 / 3.0 - x * v

    # leg 1: v = i w, w in [0, r]; phase ~ (2/3)|x|^{3/2} total
    w, wts = _gl_rule(_gl_size(160 + 24 * r**1.5))
    w = (w + 1.0) * (r / 2.0)
    wts = wts * (r / 2.0)
    leg1 = np.sum(wts * np.exp(g(1j * w)) * 1j)
    # leg 2: v = i r + rho e^{i pi/4}; descends like e^{-r rho^2/sqrt(2)}
    half = 12.0 / max(math.sqrt(r), 0.45)
    rho, rwts = _gl_rule(192)
    rho = (rho + 1.0) * (half / 2.0)
    rwts = rwts * (half / 2.0)
    d = complex(math.cos(math.pi / 4.0), math.sin(math.pi / 4.0))
    leg2 = np.sum(rwts * np.exp(g(1j * r + rho * d)) * d)
    return float((leg1 + leg2).imag) / math.pi


def airy(x):
    """The Airy function Ai on [-25, inf), to ~1e-13 absolute.

    Scalar in, scalar out; array in, array out.  Two independent methods:
    the Maclaurin series for |x| <= 5.5 and saddle-adapted contour
    quadrature outside (tested against each other on the overlap band).
    Raises ValueError below -25, where the oscillatory quadrature would
    need rephrasing in Stokes form.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(arr < AIRY_MIN):
        raise ValueError(f"airy supported on [{AIRY_MIN}, inf)")
    out = np.empty_like(arr)
    small = np.abs(arr) <= _SERIES_EDGE
    if np.any(small):
        out[small] = _airy_series(arr[small])
    for idx in np.flatnonzero(~small.ravel()):
        xi = float(arr.ravel()[idx])
        if xi > 0:
            ln = _airy_pos_log(xi)
            out.ravel()[idx] = math.exp(ln) if ln > -745.0 else 0.0
        else:
            out.ravel()[idx] = _airy_neg(xi)
    if np.isscalar(x) or arr.ndim == 0:
        return float(out)
    return out


def airy_log(x: float) -> float:
    """log Ai(x) for x >= 0 (Ai is positive there); stays finite long after
    Ai itself underflows, which is what the scaled kernels need."""
    if x < 0:
        raise ValueError("airy_log needs x >= 0 (Ai oscillates below)")
    if x <= _SERIES_EDGE:
        return math.log(float(_airy_series(np.asarray(x))))
    return _airy_pos_log(x)


def airy_contour_identity(
    a: float, b: float, quad: ContourSpec | None = None
) -> tuple[float, float]:
    """Both sides of the cubic-exponential reduction

        (1/-2 pi i) int_{gamma} e^{v^3/3 + a v^2 + b v} dv
            = Ai(a^2 - b) exp(2a^3/3 - ab),

    the left by ray quadrature (e^{+-i pi/3} directions, conjugate symmetry
    folded), the right from :func:`airy`.  Phase cancellation limits the
    achievable absolute accuracy to ~1e-16 * exp(max Re); within
    |a|, |b| <= 5 that is at worst ~1e-10 and on the |a|, |b| <= 2 grid
    better than 1e-12.
    """
    if abs(a) > 5 or abs(b) > 5:
        raise ValueError("identity quadrature rated for |a|, |b| <= 5")
    quad = quad or ContourSpec()
    # truncate where e^{Re g} < 1e-18 relative to the ray maximum
    upper = 4.0
    while upper < 40.0:
        re_end = -(upper**3) / 3.0 + abs(a) * upper**2 / 2.0 + abs(b) * upper / 2.0
        if re_end < -45.0:
            break
        upper *= 1.25
    else:
        raise NumericsError("could not find an adequate truncation radius")
    rho, wts = _gl_rule(_gl_size(max(quad.nodes, 128)))
    rho = (rho + 1.0) * (upper / 2.0)
    wts = wts * (upper / 2.0)
    d = complex(math.cos(math.pi / 3.0), math.sin(math.pi / 3.0))
    v = rho * d
    vals = np.exp(v**3 / 3.0 + a * v**2 + b * v) * d
    lhs = float(np.sum(wts * vals).imag) / math.pi
    rhs = airy(a * a - b) * math.exp(2.0 * a**3 / 3.0 - a * b)
    return lhs, rhs


def heat_propagator(du: float, s1: float, s2: float) -> float:
    """One-dimensional heat kernel with time du > 0: Gaussian in s2 - s1
    with variance 2 du, normalized to unit mass."""
    if du <= 0:
        raise ValueError("heat propagator needs du > 0")
    return math.exp(-((s2 - s1) ** 2) / (4.0 * du)) / math.sqrt(4.0 * math.pi * du)


def _curved_term(d: float, s1: float, s2: float) -> float:
    """Ai(s1+s2+d^2) exp(d(s1+s2) + (2/3)d^3), assembled in log space when
    the Airy argument is large (the two factors can individually overflow
    and underflow while the product stays modest)."""
    ssum = s1 + s2
    arg = ssum + d * d
    expo = d * ssum + 2.0 / 3.0 * d**3
    if arg > _SERIES_EDGE:
        ln = airy_log(arg) + expo
        return math.exp(ln) if ln > -745.0 else 0.0
    return airy(arg) * math.exp(expo)


def kernel_f1(p1: ScaledPoint, p2: ScaledPoint) -> float:
    """Extended limit kernel at two scaled points (expanded form).

    The heat term enters only for u2 > u1; on the equal-u slice the value
    reduces term-by-term to Ai(s1 + s2).  Rated accuracy ~1e-12 for
    |u2 - u1| <= 10 and |s_i| <= 10.
    """
    d = p2.u - p1.u
    val = _curved_term(d, p1.s, p2.s)
    if d > 0:
        val -= heat_propagator(d, p1.s, p2.s)
    return val


def _gauss_grid(center: float, var2: float, nodes: int) -> tuple[np.ndarray, np.ndarray]:
    # integration grid for a Gaussian of variance var2 centered at center
    sig = math.sqrt(var2)
    half = 12.0 * sig + 2.0
    z, w = _gl_rule(_gl_size(nodes))
    return center + z * half, w * half


def smoothed_identity_check(
    u1: float, u2: float, s1: float, s2: float, nodes: int = 200
) -> tuple[float, float]:
    """Both sides of the heat-smoothing identity for the same-time Airy
    kernel: smoothing Ai(x+y) backward by |u1| in its first argument and
    forward by u2 in its second equals the curved single-Airy closed form.

    The left side is computed by honest double Gaussian-convolution
    quadrature (that is the point of the check); the right side reuses the
    kernel's own curved term.  Requires u1 <= 0 <= u2.
    """
    if not (u1 <= 0.0 <= u2):
        raise ValueError("need u1 <= 0 <= u2 (both smoothings forward)")
    a, b = -u1, u2
    rhs = _curved_term(u2 - u1, s1, s2)

    if a == 0.0 and b == 0.0:
        return float(airy(s1 + s2)), rhs
    if a > 0.0 and b > 0.0:
        z1, w1 = _gauss_grid(s1, 2.0 * a, nodes)
        z2, w2 = _gauss_grid(s2, 2.0 * b, nodes)
        g1 = np.array([heat_propagator(a, s1, z) for z in z1])
        g2 = np.array([heat_propagator(b, z, s2) for z in z2])
        args = z1[:, None] + z2[None, :]
        mask = args < AIRY_MIN + 0.5
        if np.any(mask):
            lost = float(np.sum(np.abs(w1 * g1)[:, None] * np.abs(w2 * g2)[None, :] * mask))
            if lost > 1e-9:
                raise NumericsError(
                    f"quadrature domain truncated {lost:.2e} of the Gaussian mass"
                )
            args = np.where(mask, 0.0, args)
        vals = airy(args)
        if np.any(mask):
            vals = np.where(mask, 0.0, vals)
        lhs = float((w1 * g1) @ vals @ (w2 * g2))
        return lhs, rhs
    # single-sided smoothing
    if a > 0.0:
        z1, w1 = _gauss_grid(s1, 2.0 * a, nodes)
        g1 = np.array([heat_propagator(a, s1, z) for z in z1])
        lhs = float(np.sum(w1 * g1 * airy(np.maximum(z1 + s2, AIRY_MIN + 0.5))))
        return lhs, rhs
    z2, w2 = _gauss_grid(s2, 2.0 * b, nodes)
    g2 = np.array([heat_propagator(b, z, s2) for z in z2])
    lhs = float(np.sum(w2 * g2 * airy(np.maximum(s1 + z2, AIRY_MIN + 0.5))))
    return lhs, rhs


# ---------------------------------------------------------------------------
# lattice -> continuum: the rescaled discrete kernel
# ---------------------------------------------------------------------------


def _snap(t: float, p: ScaledPoint) -> SnapReport:
    t23 = t ** (2.0 / 3.0)
    t13 = t ** (1.0 / 3.0)
    n = round(t / 4.0 + p.u * t23)
    x = round(-2.0 * p.u * t23 - p.s * t13)
    u_eff = (n - t / 4.0) / t23
    s_eff = (-x - 2.0 * (n - t / 4.0)) / t13
    return SnapReport(requested=p, n=int(n), x=int(x), effective=ScaledPoint(u_eff, s_eff))


def rescaled_kernel(
    t: float, p1: ScaledPoint, p2: ScaledPoint, spec: ContourSpec | None = None
) -> tuple[float, tuple[SnapReport, SnapReport]]:
    """t^{1/3} 2^{x2-x1} K_t at the lattice points nearest the scaled ones.

    The conjugation and the t^{1/3} factor are folded into the quadrature
    exponent before exponentiation (both terms of the kernel stay O(1) even
    when 2^{x2-x1} alone would overflow).  Returns the value and the two
    snap reports; compare against kernel_f1 at the *effective* scaled
    points to measure pure t-convergence without discretization bias.
    """
    if t < 16.0:
        raise ValueError("rescaled comparison needs t >= 16")
    spec = spec or ContourSpec()
    r1, r2 = _snap(t, p1), _snap(t, p2)
    if r1.n == r2.n and (p1.u != p2.u):
        # distinct u's landing on one label is the only way rounding can
        # break the time ordering (at equal u the x-rounding is monotone in
        # s, so positions can never invert); report rather than nudge
        raise NumericsError(
            f"labels collapsed by rounding: u1={p1.u}, u2={p2.u} both -> "
            f"n={r1.n}; increase t or separate the u values"
        )
    n1, x1, n2, x2 = r1.n, r1.x, r2.n, r2.x
    ln_conj = (x2 - x1) * math.log(2.0) + math.log(t) / 3.0

    term1 = 0.0
    if n2 > n1 and x1 - x2 - 1 >= n2 - n1 - 1 >= 0:
        ln_b = (
            math.lgamma(x1 - x2)
            - math.lgamma(n2 - n1)
            - math.lgamma(x1 - x2 - n2 + n1 + 1)
        )
        term1 = -math.exp(ln_b + ln_conj)

    p = x1 + n1 + n2 + 1
    q = x2 + n1 + n2
    radius = spec.radius if spec.radius is not None else _flat_quad_radius(p, q, t)
    value, err = _flat_term2_quadrature(p, q, t, radius, spec.nodes, extra_log=ln_conj)
    if err > 1e-8 * max(1.0, abs(value)):
        raise NumericsError(
            f"rescaled-kernel quadrature not converged (err={err:.2e}) at t={t}"
        )
    return term1 + value, (r1, r2)


@dataclass(frozen=True)
class ScanRow:
    """One convergence-scan sample: requested grid point, rescaled lattice
    value, limit-kernel value at the snapped-back effective point, error."""

    t: float
    u1: float
    s1: float
    u2: float
    s2: float
    rescaled: float
    limit: float
    abs_err: float


def convergence_scan(
    t_list: Sequence[float], points: Sequence[tuple[ScaledPoint, ScaledPoint]]
) -> list[ScanRow]:
    """Evaluate the rescaled kernel against its limit on a (t, point-pair)
    grid; t_list must be strictly increasing (the scan exists to witness
    error decay along it)."""
    ts = list(t_list)
    if any(b <= a for a, b in zip(ts, ts[1:])):
        raise ValueError("t_list must be strictly increasing")
    rows: list[ScanRow] = []
    for t in ts:
        for pa, pb in points:
            val, (ra, rb) = rescaled_kernel(t, pa, pb)
            lim = kernel_f1(ra.effective, rb.effective)
            rows.append(
                ScanRow(
                    t=t,
                    u1=pa.u,
                    s1=pa.s,
                    u2=pb.u,
                    s2=pb.s,
                    rescaled=val,
                    limit=lim,
                    abs_err=abs(val - lim),
                )
            )
    return rows


def scan_csv(rows: Sequence[ScanRow]) -> str:
    """Render scan rows as CSV (fixed column set, stable order)."""
    out = ["t,u1,s1,u2,s2,rescaled,limit,abs_err"]
    for r in rows:
        out.append(
            f"{r.t:.6g},{r.u1:.6g},{r.s1:.6g},{r.u2:.6g},{r.s2:.6g},"
            f"{r.rescaled:.12g},{r.limit:.12g},{r.abs_err:.6g}"
        )
    return "\n".join(out) + "\n"
