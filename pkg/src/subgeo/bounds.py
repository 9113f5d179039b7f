"""Explicit convergence-bound calculators for adaptive MCMC.

Lower bounds follow from a tail lower bound on the target together with a
simultaneous growth condition on the kernel family::

    pi(W >= r) >= C r^(-kappa),   (P_gamma W^alpha)(x) - W(x)^alpha <= phi(W(x)^alpha)

which gives ``TV(t) >= M / H^{-1}(t)^(kappa / (alpha - kappa))``.  Upper bounds
need a simultaneous drift condition, local contraction and quantitative
diminishing adaptation.  Every calculator returns its value clamped to
``[0, 1]``; the unclamped number is always available (``clamp=False`` or the
``raw`` entry of the constants map).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._errors import DomainError, NumericError
from .rates import ConstantRate, HTransform, LogRate, PowerRate, RateFunction

__all__ = [
    "TailLowerBound",
    "GrowthCertificate",
    "DriftCertificate",
    "DiminishingSchedule",
    "BoundReport",
    "m_constant",
    "log_m_constant",
    "tv_lower_bound",
    "weak_lower_rate",
    "polynomial_example_bound",
    "subgeometric_example_bound",
    "drift_split",
    "adapt_upper_bound",
    "table1_envelope",
    "log_table1_envelope",
    "mhi_constants",
    "mhi_lower_bound",
    "mhi_upper_bound",
    "table3_delta",
    "ula_lower_rate",
    "rwm_lower_rate",
    "PRINTED_TABLE2",
    "PRINTED_TABLE3",
]

# Published table values, kept verbatim for comparison output.
PRINTED_TABLE2 = {
    (3, 5): {10**3: 0.0048, 10**4: 0.0015, 10**5: 0.0005, 10**6: 0.0001},
    (4, 6): {10**3: 0.0247, 10**4: 0.0115, 10**5: 0.00532, 10**6: 0.00247},
    (8, 10): {10**3: 0.173, 10**4: 0.125, 10**5: 0.0898, 10**6: 0.0646},
}
PRINTED_TABLE3 = {
    (1.2, 1.5): {10**3: 2.048e-1, 10**4: 2.217e-3, 10**5: 2.379e-5, 10**6: 2.550e-7},
    (1.2, 1.6): {10**3: 7.859e0, 10**4: 1.784e-1, 10**5: 4.018e-5, 10**6: 9.04e-5},
    (1.2, 1.7): {10**3: 7.368e2, 10**4: 2.867e1, 10**5: 1.106e0, 10**6: 4.26e-2},
}


def _clamp(raw):
    clamped = not (0.0 <= raw <= 1.0)
    return min(1.0, max(0.0, raw)), clamped


@dataclass(frozen=True)
class TailLowerBound:
    """Target tail bound ``pi(W >= r) >= C r^(-kappa)``."""

    C: float
    kappa: float
    W_id: str = "W"

    def __post_init__(self):
        if not (self.C > 0 and self.kappa > 0):
            raise DomainError(f"need C > 0 and kappa > 0; got {self.C!r}, {self.kappa!r}")

    def __call__(self, r):
        return self.C * np.power(r, -self.kappa)


@dataclass(frozen=True)
class GrowthCertificate:
    """Growth condition ``P W^alpha - W^alpha <= phi(W^alpha)``, started at ``w0 = W(x0)^alpha``."""

    phi: RateFunction
    alpha: float
    w0: float = 1.0
    W_id: str = "W"

    def __post_init__(self):
        if not self.alpha > 0:
            raise DomainError(f"alpha must be positive; got {self.alpha!r}")
        if not self.w0 >= 1:
            raise DomainError(f"w0 = W(x0)^alpha must be >= 1; got {self.w0!r}")

    @property
    def H(self):
        return HTransform(self.phi, self.w0)


@dataclass(frozen=True)
class DriftCertificate:
    """Drift ``P V - V <= -phi(V) + K`` with local contraction ``alpha`` on the level set.

    Attributes:
        phi: Concave, strictly increasing rate with ``phi(v) / v -> 0``.
        K: Drift constant.
        contraction_alpha: ``TV(P(x, .), P(y, .)) <= 1 - alpha`` on the level set.
        delta: Drift split parameter in (0, 1).
        V_x0: ``V`` at the initial state.
        pi_V: ``int V dpi``.
    """

    phi: RateFunction
    K: float
    contraction_alpha: float
    delta: float
    V_x0: float = 1.0
    pi_V: float = 1.0
    V_id: str = "V"

    def __post_init__(self):
        if isinstance(self.phi, ConstantRate):
            raise DomainError("a drift certificate needs a strictly increasing phi")
        if not self.K >= 0:
            raise DomainError(f"K must be >= 0; got {self.K!r}")
        if not 0 < self.contraction_alpha < 1:
            raise DomainError(f"contraction alpha must lie in (0, 1); got {self.contraction_alpha!r}")
        if not 0 < self.delta < 1:
            raise DomainError(f"delta must lie in (0, 1); got {self.delta!r}")
        if not (self.V_x0 >= 1 and self.pi_V >= 1):
            raise DomainError("V(x0) and int V dpi must be >= 1")


@dataclass(frozen=True)
class DiminishingSchedule:
    """Declared decay ``G`` of the adaptation, active from time ``s_eps``.

    ``kind`` is one of ``"exp_linear"`` (``exp(-a t)``), ``"exp_power"``
    (``exp(-t^a)``, ``0 < a < 1``) or ``"polynomial"`` (``t^(-a)``, ``a > 1``).
    """

    kind: str
    a: float
    s_eps: int = 0

    KINDS = ("exp_linear", "exp_power", "polynomial")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise DomainError(f"unknown schedule kind {self.kind!r}; expected one of {self.KINDS}")
        ok = {
            "exp_linear": self.a > 0,
            "exp_power": 0 < self.a < 1,
            "polynomial": self.a > 1,
        }[self.kind]
        if not ok:
            raise DomainError(f"parameter a={self.a!r} invalid for {self.kind}")
        if int(self.s_eps) != self.s_eps or self.s_eps < 0:
            raise DomainError(f"s_eps must be a nonnegative integer; got {self.s_eps!r}")

    def G(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "exp_linear":
            out = np.exp(-self.a * t)
        elif self.kind == "exp_power":
            out = np.exp(-np.power(t, self.a))
        else:
            out = np.power(t, -self.a)
        return float(out) if out.ndim == 0 else out

    def inverse_reciprocal(self, y):
        """Solve ``1 / G(t) = y`` for ``t`` (``y >= 1``)."""
        if y < 1:
            return 0.0
        if self.kind == "exp_linear":
            return math.log(y) / self.a
        if self.kind == "exp_power":
            return math.log(y) ** (1.0 / self.a)
        return y ** (1.0 / self.a)

    def adaptation_time(self, y):
        """``s_eps + ceil((1/G)^{-1}(y))``, the integer time adaptation is frozen."""
        return int(self.s_eps) + math.ceil(self.inverse_reciprocal(y) - 1e-12)


@dataclass
class BoundReport:
    """Bound values over a time grid, clamped to ``[0, 1]`` with raw values kept."""

    t_grid: list
    lower: list
    upper: list | None = None
    constants: dict = field(default_factory=dict)
    clamped: list = field(default_factory=list)
    raw_lower: list = field(default_factory=list)
    raw_upper: list | None = None

    @classmethod
    def from_raw(cls, t_grid, raw_lower, raw_upper=None, constants=None):
        lower, flags = zip(*(_clamp(float(v)) for v in raw_lower)) if len(raw_lower) else ((), ())
        upper = None
        flags = list(flags)
        if raw_upper is not None:
            up = [_clamp(float(v)) for v in raw_upper]
            upper = [v for v, _ in up]
            flags = [a or b for a, (_, b) in zip(flags, up)]
        return cls(
            t_grid=[int(t) for t in t_grid],
            lower=list(lower),
            upper=upper,
            constants=dict(constants or {}),
            clamped=flags,
            raw_lower=[float(v) for v in raw_lower],
            raw_upper=None if raw_upper is None else [float(v) for v in raw_upper],
        )

    def rows(self):
        for i, t in enumerate(self.t_grid):
            row = {"t": t, "lower": self.lower[i], "raw_lower": self.raw_lower[i]}
            if self.upper is not None:
                row["upper"] = self.upper[i]
                row["raw_upper"] = self.raw_upper[i]
            row["clamped"] = self.clamped[i]
            yield row


def log_m_constant(C, kappa, alpha):
    """Natural log of :func:`m_constant`, finite where the constant underflows."""
    if not (C > 0 and kappa > 0):
        raise DomainError("need C > 0 and kappa > 0")
    if not alpha > kappa:
        raise DomainError(f"need alpha > kappa; got alpha={alpha!r}, kappa={kappa!r}")
    gap = alpha - kappa
    ratio = kappa / alpha
    # rho^(a/g) = rho * rho^(k/g), so the bracket factors as rho^(k/g) (1 - rho)
    return (alpha / gap) * math.log(C) + (kappa / gap) * math.log(ratio) + math.log1p(-ratio)


def m_constant(C, kappa, alpha):
    """``C^(a/(a-k)) [(k/a)^(k/(a-k)) - (k/a)^(a/(a-k))]``, the optimized tail-gap constant."""
    log_m = log_m_constant(C, kappa, alpha)
    if log_m > 709:
        raise NumericError(f"M overflows float64 (log M = {log_m:.1f})")
    return math.exp(log_m)


def tv_lower_bound(tail, growth, t, clamp=True):
    """Total-variation lower bound valid for every adaptation plan.

    Returns ``M / H^{-1}_{w0,phi}(t)^(kappa / (alpha - kappa))``, clamped to
    ``[0, 1]`` unless ``clamp=False``.
    """
    if t < 0:
        raise DomainError(f"t must be nonnegative; got {t!r}")
    exponent = tail.kappa / (growth.alpha - tail.kappa)
    log_raw = log_m_constant(tail.C, tail.kappa, growth.alpha) - exponent * growth.H.log_inverse(t)
    raw = math.exp(log_raw)
    return _clamp(raw)[0] if clamp else raw


def weak_lower_rate(tail, growth, eps, t):
    """Rate factor of the weak-convergence lower bound.

    The Wasserstein bound is ``delta_eps`` times the returned value, where
    ``delta_eps`` exists but has no explicit form; only the rate factor
    ``(1 - eps) M / H^{-1}(t)^(kappa / (alpha - kappa))`` is computed here.

    Returns:
        ``(rate_value, valid_from)``: the factor for this ``t`` and the first
        integer time from which the bound holds.
    """
    if not 0 < eps < 1:
        raise DomainError(f"eps must lie in (0, 1); got {eps!r}")
    value = (1.0 - eps) * tv_lower_bound(tail, growth, t, clamp=False)
    level = tail.kappa * tail.C * (1.0 - eps) ** growth.alpha / growth.alpha
    H = growth.H
    valid_from = 0 if level <= H.w0 else math.ceil(float(H(level)))
    return value, valid_from


def polynomial_example_bound(C, c, beta, w0, t):
    """Closed form of the lower bound for ``kappa = 1``, ``alpha = 2``, ``phi = c w^beta``."""
    return C**2 / (4.0 * ((1 - beta) * c * t + w0 ** (1 - beta)) ** (1.0 / (1 - beta)))


def subgeometric_example_bound(C, c, beta, w0, t):
    """Envelope form of the log-type lower bound for ``kappa = 1``, ``alpha = 2``.

    Uses ``H^{-1}(t) <= (w0 + K) exp((1 + beta) c t^(1/(1+beta)))`` with
    ``K = exp(beta + 1)``; it never exceeds the exact :func:`tv_lower_bound`
    when ``c (1 + beta) >= 1``.
    """
    K = math.exp(beta + 1.0)
    return C**2 / (4.0 * (w0 + K)) * math.exp(-(1 + beta) * c * t ** (1.0 / (1 + beta)))


def drift_split(phi, K, delta):
    """Split ``-phi(V) + K`` into ``-delta phi(V) + (R + K) 1{V <= R}``.

    Returns:
        ``(delta, R, R + K)`` with level ``R = phi^{-1}(K / (1 - delta))``.
    """
    if not 0 < delta < 1:
        raise DomainError(f"delta must lie in (0, 1); got {delta!r}")
    if not K > 0:
        raise DomainError("K must be positive for a nondegenerate level set")
    R = phi.inverse(K / (1.0 - delta))
    return delta, R, R + K


def adapt_upper_bound(cert, sched, eps, t, clamp=True):
    """Upper bound at time ``T_{eps,t} + t`` under diminishing adaptation.

    Args:
        cert: Drift and contraction certificate.
        sched: Diminishing-adaptation schedule; ``sched.s_eps`` plays the
            role of the onset time for probability ``1 - eps/2``.
        eps: Failure probability allowance in (0, 1).
        t: Time after adaptation is frozen, ``t >= 1``.

    Returns:
        ``(value, T_eps_t, constants)``.  ``value`` is clamped unless
        ``clamp=False``; ``constants["raw"]`` always holds the raw bound.
    """
    if not 0 < eps < 1:
        raise DomainError(f"eps must lie in (0, 1); got {eps!r}")
    if t < 1:
        raise DomainError(f"t must be >= 1; got {t!r}")
    phi, K, delta, a = cert.phi, cert.K, cert.delta, cert.contraction_alpha
    H = HTransform(phi, 1.0)
    r0 = float(phi(1.0))
    r1 = float(phi(H.inverse(1.0)))
    R = phi.inverse(2.0 * K / (1.0 - delta))
    C = (r1 + 1.0) * (R + (r1 / r0) * (R + 4.0 * K))
    log_H_t = H.log_inverse(t)
    m_t = max(1, math.ceil(log_H_t / math.log(1.0 / (1.0 - a))))
    T = sched.adaptation_time(2.0 * t**2 / eps)
    log_H_tm = H.log_inverse(t / m_t)
    numerator = delta + (r1 + 1.0) * (cert.V_x0 + cert.pi_V + K * T) + C
    log_vanishing = math.log(numerator / delta) - log_H_tm
    raw = math.exp(log_vanishing) + eps
    value, clamped = _clamp(raw)
    constants = {
        "r0": r0, "r1": r1, "R": R, "C": C, "m_t": m_t, "T_eps_t": T,
        "log_H_inv_t": log_H_t, "log_H_inv_t_over_m": log_H_tm, "numerator": numerator,
        "log_vanishing": log_vanishing, "eps": eps, "delta": delta, "K": K, "alpha": a,
        "V_x0": cert.V_x0, "pi_V": cert.pi_V, "s_eps": sched.s_eps,
        "raw": raw, "clamped": clamped,
    }
    return (value if clamp else raw), T, constants


def log_table1_envelope(G_kind, phi_kind, params, t):
    """Natural log of :func:`table1_envelope`; stays finite where the envelope underflows."""
    c, beta = params["c"], params["beta"]
    a = params.get("a")
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore"):
        if G_kind == "exp_linear":
            num = np.log(np.log(t))
        elif G_kind == "exp_power":
            num = np.log(np.log(t)) / a
        elif G_kind == "polynomial":
            num = 2.0 / a * np.log(t)
        else:
            raise DomainError(f"unsupported schedule kind {G_kind!r}")
    if phi_kind == "power":
        out = num - np.log1p((1 - beta) * c * t) / (1 - beta)
    elif phi_kind in ("log", "logtype"):
        out = num - (1 + beta) * c * np.power(t, 1.0 / (1 + beta))
    else:
        raise DomainError(f"unsupported rate kind {phi_kind!r}")
    return float(out) if out.ndim == 0 else out


def table1_envelope(G_kind, phi_kind, params, t):
    """Rate envelope for a (schedule, rate function) pair, up to a constant.

    Args:
        G_kind: Schedule kind (see :class:`DiminishingSchedule`).
        phi_kind: ``"power"`` for ``c w^beta`` or ``"log"`` for the log-type rate.
        params: Mapping with ``c``, ``beta`` and the schedule parameter ``a``.
        t: Time (scalar or array).
    """
    out = np.exp(log_table1_envelope(G_kind, phi_kind, params, t))
    return float(out) if np.ndim(out) == 0 else out


def _check_mhi_pair(gamma_star, gamma_upper):
    if not gamma_star > 1:
        raise DomainError(f"need gamma_* > 1; got {gamma_star!r}")
    if not gamma_upper > gamma_star:
        raise DomainError(f"need gamma^* > gamma_*; got {gamma_upper!r} <= {gamma_star!r}")


def mhi_constants(gamma_star, gamma_upper):
    """``(M_*, c_*)`` of the independence-sampler lower bound."""
    _check_mhi_pair(gamma_star, gamma_upper)
    g = gamma_star
    M = g ** (-1.0 / (g - 1)) - g ** (-g / (g - 1))
    c = gamma_upper / (g - 1) + gamma_upper - 1
    return M, c


def mhi_lower_bound(gamma_star, gamma_upper, x0, t, clamp=True):
    """Lower bound ``M_* / (c_* t + exp(gamma_* x0))^(1/(gamma_* - 1))`` for the MHI family."""
    if x0 < 0:
        raise DomainError(f"x0 must be nonnegative; got {x0!r}")
    M, c = mhi_constants(gamma_star, gamma_upper)
    raw = M / (c * t + math.exp(gamma_star * x0)) ** (1.0 / (gamma_star - 1))
    return _clamp(raw)[0] if clamp else raw


def table3_delta(gamma_upper, eps, t):
    """``delta = (1 + c t)^((1 - eps)/(1 - gamma^*))`` with ``c = (gamma^* - 1)/(1 - eps)``."""
    c = (gamma_upper - 1) / (1 - eps)
    return (1 + c * t) ** ((1 - eps) / (1 - gamma_upper))


def mhi_upper_bound(gamma_star, gamma_upper, eps, delta, sched, compact_radius_r, t):
    """Upper bound for the adaptive independence sampler with ``gamma^* < 2 - eps``.

    The adaptation is assumed frozen outside ``[0, r)`` with
    ``r = compact_radius_r``; ``sched.s_eps`` is used as ``s_delta``.

    Returns:
        ``(value, constants)``; ``value`` is clamped to ``[0, 1]`` and the
        constants map carries every intermediate plus ``raw``.
    """
    _check_mhi_pair(gamma_star, gamma_upper)
    if not 0 < eps < 1:
        raise DomainError(f"eps must lie in (0, 1); got {eps!r}")
    if not gamma_upper < 2 - eps:
        raise DomainError(f"need gamma^* < 2 - eps; got {gamma_upper!r} >= {2 - eps!r}")
    if not 0 < delta < 1:
        raise DomainError(f"delta must lie in (0, 1); got {delta!r}")
    if t < 1:
        raise DomainError(f"t must be >= 1; got {t!r}")
    gs, gu, r = gamma_star, gamma_upper, compact_radius_r
    J = 2.0 / gs**2 + r + 1.0 / gs
    c = (gu - 1) / (1 - eps)
    K = gu / (gs - 1 + eps)
    alpha = gs / (2 * K) ** ((gu - 1) / (1 - eps))
    r1 = (c + 1) ** ((2 - eps - gu) / (gu - 1))
    R = (4 * K) ** ((1 - eps) / (2 - eps - gu))
    C = 1 + 2 * (r1 + 1) * (1 + 1 / eps) + (r1 + 1) * (R + r1 * (R + 4 * K))
    T = sched.adaptation_time(J * t**2 / delta)
    # -log(1 + ct)/log(1 - alpha) + 1 stands in for the number of returns m_t
    m = -math.log1p(c * t) / math.log1p(-alpha) + 1
    denom = (1 + c * t / m) ** ((1 - eps) / (gu - 1))
    raw = (2 * (r1 + 1) * K * T + C) / denom + delta
    value, clamped = _clamp(raw)
    M_star, c_star = mhi_constants(gs, gu)
    constants = {
        "J": J, "c": c, "K": K, "alpha": alpha, "r1": r1, "R": R, "C": C,
        "T_delta_t": T, "m": m, "denominator": denom, "delta": delta,
        "eps": eps, "r": r, "s_delta": sched.s_eps, "M_star": M_star,
        "c_star": c_star, "raw": raw, "clamped": clamped,
    }
    return value, constants


def ula_lower_rate(v, d, M, t):
    """Polynomial weak lower rate ``M / (1 + t)^(v + d - 2)`` for Langevin on Student-t."""
    if not v + d - 2 > 0:
        raise DomainError(f"need v + d > 2; got v={v!r}, d={d!r}")
    return M / (1.0 + t) ** (v + d - 2)


def rwm_lower_rate(m, M_star, c_star, t):
    """Stretched-exponential lower rate ``M_* exp(-c_* t^(m/(2-m)))`` for adaptive RWM."""
    if not 0 < m < 2:
        raise DomainError(f"need 0 < m < 2; got {m!r}")
    return M_star * math.exp(-c_star * t ** (m / (2 - m)))
