"""Mellin-transform delay analysis for the secure downlink queue.

Arrival and service processes are characterised by Mellin transforms in the
exponential (SNR) domain; the steady-state kernel

    K(s, T) = [M_psi(1-s)]^T / (1 - M_zeta(1+s) * M_psi(1-s))

upper-bounds the delay-violation probability at horizon T, and the window
determinacy is the difference of the two clamped kernel infima.

The service transform reduces to the double integral H(s) over the Eve and
user SNR densities; it is evaluated by tensor-product Gauss-Legendre
quadrature after substituting both variables onto the unit interval, with
order doubling until the requested tolerance is met.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .channel import LinkStats
from .fbc import SecrecyParams, q_inv

LN2 = math.log(2.0)


class StabilityError(RuntimeError):
    """Kernel denominator not positive: M_zeta(1+s)*M_psi(1-s) >= 1."""

    def __init__(self, product: float, s: float | None = None):
        self.product = product
        self.s = s
        super().__init__(f"stability violated: transform product {product:.6g}"
                         + (f" at s={s:.6g}" if s is not None else ""))


class QuadratureError(RuntimeError):
    """Service-transform quadrature failed to converge."""


@dataclass
class ArrivalModel:
    """Poisson packet arrivals: lambda_pkts packets/slot of pkt_bits bits.

    ``paper_literal`` treats the per-slot arrival bits as Poisson(x*lambda)
    (transform exp(x*lambda*(e^(s-1)-1))); ``standard_compound`` is the
    compound-Poisson bit arrival exp(lambda*(e^((s-1)*x)-1)).  Both equal 1
    at s = 1; the compound form is the one the queue oracle validates.
    """

    lambda_pkts: float
    pkt_bits: int
    variant: str = "standard_compound"

    def __post_init__(self):
        if self.lambda_pkts <= 0:
            raise ValueError("lambda_pkts must be positive")
        if int(self.pkt_bits) != self.pkt_bits or self.pkt_bits <= 0:
            raise ValueError("pkt_bits must be a positive integer")
        self.pkt_bits = int(self.pkt_bits)
        if self.variant not in ("paper_literal", "standard_compound"):
            raise ValueError(f"unknown arrival variant: {self.variant}")


@dataclass
class QuadratureSpec:
    """Tolerances and truncation rules for the H(s) double integral."""

    rel_tol: float = 1e-6
    abs_tol: float = 1e-14
    outer_truncation_mult: float = 40.0
    inner_truncation_mult: float = 40.0
    max_subdivisions: int = 8
    base_order: int = 16

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.outer_truncation_mult < 20 or self.inner_truncation_mult < 20:
            raise ValueError("truncation multipliers must be >= 20")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")


@dataclass
class SearchSpec:
    """Infimum-search controls for the kernel over the stability interval."""

    grid_points: int = 200
    s_floor: float = 1e-4
    s_max_margin: float = 1e-6
    bisect_tol: float = 1e-8
    golden_iters: int = 60
    s_cap: float = 64.0

    def __post_init__(self):
        if self.grid_points < 3:
            raise ValueError("grid_points must be >= 3")
        if not 0 < self.s_floor < self.s_cap:
            raise ValueError("s_floor must be in (0, s_cap)")


@dataclass
class DelayWindow:
    """Slot-count window (t_min, t_max) with 0 <= t_min < t_max."""

    t_min: int
    t_max: int

    def __post_init__(self):
        if int(self.t_min) != self.t_min or int(self.t_max) != self.t_max:
            raise ValueError("window bounds must be integers")
        self.t_min = int(self.t_min)
        self.t_max = int(self.t_max)
        if not 0 <= self.t_min < self.t_max:
            raise ValueError("require 0 <= t_min < t_max")


@dataclass
class ServiceModel:
    """Secure-transmission service process: link stats + secrecy coding.

    Holds a per-instance cache of H(s) evaluations so that kernel sweeps at
    several horizons reuse the expensive quadrature.
    """

    stats: LinkStats
    secrecy: SecrecyParams
    quadrature: QuadratureSpec = field(default_factory=QuadratureSpec)
    _h_cache: dict = field(default_factory=dict, repr=False)
    _h_err_max: float = field(default=0.0, repr=False)


@dataclass
class ViolationBound:
    """min(1, inf_s K(s, T)) plus search diagnostics."""

    bound: float
    s_star: float
    s_max: float
    vacuous: bool
    raw_inf: float


@dataclass
class DeterminacyResult:
    """Window-determinacy bound varpi plus all diagnostics."""

    varpi: float
    bound_tmin: float
    bound_tmax: float
    s_star_tmin: float
    s_star_tmax: float
    s_max: float
    ordering_ok: bool
    clamped: dict
    quadrature_error_estimate: float


def arrival_mellin(s: float, model: ArrivalModel) -> float:
    """Mellin transform of the per-slot arrival increment at argument s.

    Saturates to +inf instead of overflowing; the caller sees the point as
    unstable.
    """
    if model.variant == "paper_literal":
        inner = s - 1.0
        scale = model.pkt_bits * model.lambda_pkts
    else:
        inner = (s - 1.0) * model.pkt_bits
        scale = model.lambda_pkts
    if inner > 700.0:
        return math.inf
    expo = scale * math.expm1(inner)
    if expo > 700.0:
        return math.inf
    return math.exp(expo)


@lru_cache(maxsize=64)
def _gl_nodes(order: int):
    """Gauss-Legendre nodes/weights mapped to [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(order)
    return (x + 1.0) / 2.0, w / 2.0


def _h_eval(s, stats, secrecy, spec, order):
    """Fixed-order tensor evaluation of H(s).

    Both improper integrals are mapped onto the unit interval by the exact
    exponential substitutions gamma_e = -ln(1-q)/lambda_E and
    gamma_k = gamma_e - m*ln(1-p) with m = rho*delta^2, so the truncation
    multipliers become fixed sub-unit upper limits.
    """
    a = s / LN2
    lam_e = stats.lambda_eve
    m = stats.rho * stats.delta_k_sq
    n_cbl = secrecy.blocklength
    pen_u = q_inv(secrecy.epsilon_e) / math.sqrt(n_cbl)
    qinv_sigma = q_inv(secrecy.sigma_leak)

    q_hi = -math.expm1(-spec.outer_truncation_mult)
    p_hi = -math.expm1(-spec.inner_truncation_mult)
    xq, wq = _gl_nodes(order)
    xo, wo = xq * q_hi, wq * q_hi
    xi, wi = xq * p_hi, wq * p_hi

    gamma_e = -np.log1p(-xo) / lam_e                       # (order,)
    v_eve = 1.0 - 1.0 / (1.0 + gamma_e) ** 2
    pen_e = np.sqrt(v_eve / n_cbl) * qinv_sigma
    gamma_k = gamma_e[:, None] - m * np.log1p(-xi)[None, :]  # (order, order)

    log_term = (a * (np.log1p(gamma_e)[:, None] - np.log1p(gamma_k))
                + (a * pen_e - gamma_e / m)[:, None])
    inner = np.exp(log_term) @ wi
    prefac = math.exp(-stats.upsilon_k / stats.delta_k_sq + a * pen_u)
    return prefac * float(wo @ inner)


def _h_tail_bound(s, stats, secrecy, spec):
    """Analytic bound on the truncated outer/inner tails."""
    a = s / LN2
    m = stats.rho * stats.delta_k_sq
    lam_e = stats.lambda_eve
    pen_u = q_inv(secrecy.epsilon_e) / math.sqrt(secrecy.blocklength)
    pen_e_max = max(0.0, q_inv(secrecy.sigma_leak)) / math.sqrt(secrecy.blocklength)
    prefac = math.exp(-stats.upsilon_k / stats.delta_k_sq + a * (pen_u + pen_e_max))
    # (1+g_e)^a * (1+g_k)^-a <= 1 on the wedge, so the outer tail integrand
    # is dominated by lam_e*exp(-(lam_e + 1/m)*gamma_e)
    expo = -spec.outer_truncation_mult * (1.0 + 1.0 / (m * lam_e))
    outer = prefac * lam_e / (lam_e + 1.0 / m) * math.exp(max(expo, -700.0))
    return outer


def service_mellin_u(s: float, model: ServiceModel) -> float:
    """H(s): Mellin transform of the success-branch rate factor u.

    Double integral of u^(-s/ln2) over gamma_Eve in [0, inf) against the
    exponential Eve density and gamma_k in [gamma_Eve, inf) against the
    (sub-normalised) user SNR density, with the user dispersion taken as 1.
    """
    val, _ = service_mellin_u_with_error(s, model)
    return val


def service_mellin_u_with_error(s: float, model: ServiceModel):
    if s < 0:
        raise ValueError("transform argument must be >= 0")
    cached = model._h_cache.get(s)
    if cached is not None:
        return cached
    spec = model.quadrature
    order = spec.base_order
    prev = None
    result = None
    for _ in range(spec.max_subdivisions):
        val = _h_eval(s, model.stats, model.secrecy, spec, order)
        if prev is not None:
            err = abs(val - prev)
            if err <= max(spec.abs_tol, spec.rel_tol * abs(val)):
                result = (val, err + _h_tail_bound(s, model.stats, model.secrecy, spec))
                break
        prev = val
        order *= 2
    if result is None:
        raise QuadratureError(
            f"H(s={s:.6g}) did not converge within {spec.max_subdivisions} refinements")
    model._h_cache[s] = result
    model._h_err_max = max(model._h_err_max, result[1])
    return result


def service_mellin(s_arg: float, model: ServiceModel) -> float:
    """Mellin transform of the service process at argument s_arg:

        M_psi(s_arg) = (1 - eps_e) * M_u(1 + (s_arg-1)/ln2) + eps_e

    which for s_arg = 1 - s equals (1 - eps_e)*H(s) + eps_e.  At s_arg = 1
    the value is (1 - eps_e)*M_u(1) + eps_e with M_u(1) the wedge mass.
    """
    eps = model.secrecy.epsilon_e
    if eps >= 1.0:
        return 1.0
    return (1.0 - eps) * service_mellin_u(1.0 - s_arg, model) + eps


def kernel_from_values(m_arrival: float, m_service: float, horizon: int) -> float:
    """Steady-state kernel from precomputed transform values."""
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    product = m_arrival * m_service
    if not product < 1.0:
        raise StabilityError(product)
    return m_service ** horizon / (1.0 - product)


def kernel(s: float, horizon: int, arrival: ArrivalModel,
           service: ServiceModel) -> float:
    """K(s, T) = [M_psi(1-s)]^T / (1 - M_zeta(1+s)*M_psi(1-s))."""
    m_arr = arrival_mellin(1.0 + s, arrival)
    m_srv = service_mellin(1.0 - s, service)
    try:
        return kernel_from_values(m_arr, m_srv, horizon)
    except StabilityError as exc:
        raise StabilityError(exc.product, s) from None


def lemma1_kernel(s: float, horizon: int, arrival: ArrivalModel,
                  service: ServiceModel) -> float:
    """Closed-form kernel assembled directly from the bound expression:

        [(1-eps)*H + eps]^T / (1 - e^(x*lambda*(e^s - 1)) * [(1-eps)*H + eps])

    Uses the literal Poisson-bit arrival factor regardless of the arrival
    variant; pair with variant="paper_literal" for exact agreement with
    kernel().
    """
    eps = service.secrecy.epsilon_e
    bracket = (1.0 - eps) * service_mellin_u(s, service) + eps
    expo = arrival.pkt_bits * arrival.lambda_pkts * math.expm1(s)
    m_arr = math.inf if expo > 700.0 else math.exp(expo)
    return kernel_from_values(m_arr, bracket, horizon)


def stability_product(s: float, arrival: ArrivalModel, service: ServiceModel) -> float:
    m_arr = arrival_mellin(1.0 + s, arrival)
    if math.isinf(m_arr):
        return math.inf
    return m_arr * service_mellin(1.0 - s, service)


def stability_smax(arrival: ArrivalModel, service: ServiceModel,
                   search: SearchSpec | None = None) -> float | None:
    """Right edge of the stability interval, or None when it is empty.

    The product is probed at the grid floor; if already >= 1 there the
    interval is treated as empty (bound vacuous).  Otherwise the edge is
    bracketed by doubling and located by bisection.
    """
    search = search or SearchSpec()
    lo = search.s_floor
    if not stability_product(lo, arrival, service) < 1.0:
        return None
    hi = lo
    while stability_product(hi, arrival, service) < 1.0:
        lo = hi
        hi *= 2.0
        if hi > search.s_cap:
            return search.s_cap
    while hi - lo > search.bisect_tol:
        mid = 0.5 * (lo + hi)
        if stability_product(mid, arrival, service) < 1.0:
            lo = mid
        else:
            hi = mid
    return lo


def _golden_min(f, lo, hi, iters):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
        if b - a < 1e-12 * max(1.0, b):
            break
    return (c, fc) if fc < fd else (d, fd)


def violation_bound(horizon: int, arrival: ArrivalModel, service: ServiceModel,
                    search: SearchSpec | None = None,
                    s_max: float | None = None) -> ViolationBound:
    """min(1, inf_{s in stability interval} K(s, T)) with the optimizing s.

    Log-spaced grid scan followed by golden-section refinement around the
    grid minimum; an empty stability interval yields the vacuous bound 1.
    """
    search = search or SearchSpec()
    if s_max is None:
        s_max = stability_smax(arrival, service, search)
    if s_max is None:
        return ViolationBound(1.0, search.s_floor, math.nan, True, math.inf)

    def safe_kernel(s):
        try:
            val = kernel(s, horizon, arrival, service)
        except StabilityError:
            return math.inf
        return val if np.isfinite(val) else math.inf

    hi = s_max * (1.0 - search.s_max_margin)
    grid = np.geomspace(search.s_floor, hi, search.grid_points)
    vals = np.array([safe_kernel(s) for s in grid])
    if not np.any(np.isfinite(vals)):
        return ViolationBound(1.0, search.s_floor, s_max, True, math.inf)
    i = int(np.argmin(vals))
    lo_b = grid[max(i - 1, 0)]
    hi_b = grid[min(i + 1, len(grid) - 1)]
    s_star, f_star = _golden_min(safe_kernel, lo_b, hi_b, search.golden_iters)
    if vals[i] < f_star:
        s_star, f_star = float(grid[i]), float(vals[i])
    return ViolationBound(min(1.0, f_star), float(s_star), float(s_max), False,
                          float(f_star))


def delay_determinacy(window: DelayWindow, arrival: ArrivalModel,
                      service: ServiceModel,
                      search: SearchSpec | None = None) -> DeterminacyResult:
    """Window-determinacy bound: clamped inf-kernel difference of Lemma form.

    varpi = bound(t_min) - bound(t_max), clamped to [0, 1]; ordering_ok
    records the checkable surrogate bound(t_max) <= bound(t_min) of the
    kernel-ordering constraint.
    """
    search = search or SearchSpec()
    s_max = stability_smax(arrival, service, search)
    b_min = violation_bound(window.t_min, arrival, service, search, s_max=s_max)
    b_max = violation_bound(window.t_max, arrival, service, search, s_max=s_max)
    ordering_ok = b_max.bound <= b_min.bound + 1e-12
    varpi = min(1.0, max(0.0, b_min.bound - b_max.bound))
    clamped = {
        "tmin": b_min.raw_inf > 1.0,
        "tmax": b_max.raw_inf > 1.0,
        "vacuous": b_min.vacuous,
        "ordering": not ordering_ok,
    }
    return DeterminacyResult(
        varpi=varpi,
        bound_tmin=b_min.bound,
        bound_tmax=b_max.bound,
        s_star_tmin=b_min.s_star,
        s_star_tmax=b_max.s_star,
        s_max=b_min.s_max,
        ordering_ok=ordering_ok,
        clamped=clamped,
        quadrature_error_estimate=service._h_err_max,
    )
