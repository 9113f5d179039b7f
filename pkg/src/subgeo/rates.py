"""Concave rate functions and the H-transform that turns them into rates.

A rate function ``phi`` is a positive concave function on ``(0, inf)``.  The
transform

    H(w) = integral_{w0}^{w} dv / phi(v)

is strictly increasing, and its inverse ``H^{-1}`` is the growth envelope that
drives both the lower and the upper convergence bounds in :mod:`subgeo.bounds`.
Closed forms are used for the constant, power and log-type families; the
tabulated family (and the ``numeric=True`` path of every family) falls back to
adaptive quadrature and bracketed root finding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from ._errors import DomainError, NumericError, RangeError

__all__ = [
    "RateFunction",
    "ConstantRate",
    "PowerRate",
    "LogRate",
    "TabulatedRate",
    "HTransform",
    "eval_phi",
    "h_eval",
    "h_inverse",
    "r_function",
    "parse_rate",
]

_QUAD_EPSABS = 1e-12
_QUAD_EPSREL = 1e-13
_ROOT_RTOL = 1e-13
_ROOT_MAXITER = 200
_BRACKET_LIMIT = 1e300


def _as_float_or_array(x):
    if np.ndim(x) == 0:
        return float(x)
    return np.asarray(x, dtype=float)


class RateFunction:
    """Base class for concave rate functions.

    Subclasses implement ``_value``; closed-form families additionally
    implement ``_h`` and ``_h_inv`` and set ``closed_form = True``.
    """

    closed_form = False

    def __call__(self, w):
        w = _as_float_or_array(w)
        if np.any(np.asarray(w) <= 0):
            raise DomainError(f"rate functions are defined on (0, inf); got w={w!r}")
        return self._value(w)

    def _value(self, w):
        raise NotImplementedError

    @property
    def infimum(self):
        """Limit of phi(w) as w -> 0+."""
        return float(self._value(np.finfo(float).tiny))

    def inverse(self, y):
        """Return the unique ``w > 0`` with ``phi(w) = y``.

        The generic implementation brackets by doubling and solves with
        Brent's method; families with a closed-form inverse override it.
        """
        y = float(y)
        if not y > self.infimum:
            raise DomainError(
                f"{y!r} is not above the infimum {self.infimum!r} of {self!r}"
            )
        lo, hi = np.finfo(float).tiny, 1.0
        while self._value(hi) < y:
            lo, hi = hi, 2.0 * hi
            if hi > _BRACKET_LIMIT:
                raise DomainError(f"{y!r} exceeds the range of {self!r}")
        return _brent(lambda w: self._value(w) - y, lo, hi)

    def _h(self, w, w0):
        raise NotImplementedError

    def _h_inv(self, t, w0):
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantRate(RateFunction):
    """phi(w) = c."""

    c: float
    closed_form = True

    def __post_init__(self):
        if not self.c > 0:
            raise DomainError(f"scale c must be positive; got {self.c!r}")

    def _value(self, w):
        return self.c + 0.0 * w

    def inverse(self, y):
        raise DomainError("a constant rate function has no inverse")

    def _h(self, w, w0):
        return (w - w0) / self.c

    def _h_inv(self, t, w0):
        return w0 + self.c * t


@dataclass(frozen=True)
class PowerRate(RateFunction):
    """phi(w) = c * w**beta with beta in (0, 1)."""

    c: float
    beta: float
    closed_form = True

    def __post_init__(self):
        if not self.c > 0:
            raise DomainError(f"scale c must be positive; got {self.c!r}")
        if not 0 < self.beta < 1:
            raise DomainError(f"exponent beta must lie in (0, 1); got {self.beta!r}")

    def _value(self, w):
        return self.c * np.power(w, self.beta)

    @property
    def infimum(self):
        return 0.0

    def inverse(self, y):
        if not y > 0:
            raise DomainError(f"power rate inverse needs y > 0; got {y!r}")
        return float((y / self.c) ** (1.0 / self.beta))

    def _h(self, w, w0):
        p = 1.0 - self.beta
        return (np.power(w, p) - w0**p) / (self.c * p)

    def _h_inv(self, t, w0):
        p = 1.0 - self.beta
        return np.power(p * self.c * t + w0**p, 1.0 / p)

    def _log_h_inv(self, t, w0):
        p = 1.0 - self.beta
        return np.log(p * self.c * t + w0**p) / p


@dataclass(frozen=True)
class LogRate(RateFunction):
    """phi(w) = c * (w + K) / log(w + K)**beta.

    ``K`` defaults to ``exp(beta + 1)``, the smallest shift for which the
    function is concave on the whole half line.
    """

    c: float
    beta: float
    K: float | None = None
    closed_form = True

    def __post_init__(self):
        if not self.c > 0:
            raise DomainError(f"scale c must be positive; got {self.c!r}")
        if not self.beta > 0:
            raise DomainError(f"exponent beta must be positive; got {self.beta!r}")
        if self.K is None:
            object.__setattr__(self, "K", math.exp(self.beta + 1.0))
        # concavity on (0, inf) needs log(w + K) >= beta + 1
        if self.K < math.exp(self.beta + 1.0) * (1.0 - 1e-12):
            raise DomainError(
                f"K={self.K!r} < exp(beta + 1); phi would not be concave near 0"
            )

    def _value(self, w):
        s = w + self.K
        return self.c * s / np.power(np.log(s), self.beta)

    @property
    def infimum(self):
        return self.c * self.K / math.log(self.K) ** self.beta

    def _h(self, w, w0):
        q = 1.0 + self.beta
        return (np.power(np.log(w + self.K), q) - math.log(w0 + self.K) ** q) / (
            self.c * q
        )

    def _h_inv(self, t, w0):
        q = 1.0 + self.beta
        inner = self.c * q * t + math.log(w0 + self.K) ** q
        return np.exp(np.power(inner, 1.0 / q)) - self.K

    def _log_h_inv(self, t, w0):
        q = 1.0 + self.beta
        u = np.power(self.c * q * t + math.log(w0 + self.K) ** q, 1.0 / q)
        # log(exp(u) - K) without forming exp(u)
        return u + np.log1p(-self.K * np.exp(-u))


@dataclass(frozen=True, eq=False)
class TabulatedRate(RateFunction):
    """Piecewise-linear interpolation of a concave sample table.

    Args:
        w: Strictly increasing positive abscissae.
        phi: Positive, concave, non-decreasing values at ``w``.
    """

    w: np.ndarray
    phi: np.ndarray
    _slopes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        phi = np.asarray(self.phi, dtype=float)
        if w.ndim != 1 or w.shape != phi.shape or w.size < 2:
            raise DomainError("table needs matching 1-D arrays of length >= 2")
        if np.any(w <= 0) or np.any(np.diff(w) <= 0):
            raise DomainError("table abscissae must be positive and strictly increasing")
        if np.any(phi <= 0):
            raise DomainError("table values must be positive")
        slopes = np.diff(phi) / np.diff(w)
        scale = max(1.0, float(np.max(np.abs(slopes))))
        if np.any(np.diff(slopes) > 1e-12 * scale):
            raise DomainError("table values are not concave")
        if np.any(slopes < 0):
            raise DomainError("table values must be non-decreasing")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "_slopes", slopes)

    @property
    def support(self):
        return float(self.w[0]), float(self.w[-1])

    def _check_range(self, w):
        lo, hi = self.support
        arr = np.asarray(w)
        if np.any(arr < lo) or np.any(arr > hi):
            raise RangeError(f"w={w!r} outside the table range [{lo}, {hi}]")

    def __call__(self, w):
        w = _as_float_or_array(w)
        if np.any(np.asarray(w) <= 0):
            raise DomainError(f"rate functions are defined on (0, inf); got w={w!r}")
        self._check_range(w)
        return self._value(w)

    def _value(self, w):
        out = np.interp(w, self.w, self.phi)
        return float(out) if np.ndim(out) == 0 else out

    @property
    def infimum(self):
        return float(self.phi[0])

    def inverse(self, y):
        if np.any(self._slopes <= 0):
            raise DomainError("table is not strictly increasing; no inverse")
        if not self.phi[0] <= y <= self.phi[-1]:
            raise RangeError(f"y={y!r} outside the tabulated range of phi")
        return float(np.interp(y, self.phi, self.w))


def _brent(f, lo, hi):
    try:
        root, info = optimize.brentq(
            f, lo, hi, rtol=_ROOT_RTOL, maxiter=_ROOT_MAXITER, full_output=True,
            disp=False,
        )
    except ValueError as exc:
        raise NumericError(f"root not bracketed in [{lo}, {hi}]") from exc
    if not info.converged:
        raise NumericError(
            f"root finding did not converge after {_ROOT_MAXITER} iterations"
        )
    return float(root)


@dataclass(frozen=True)
class HTransform:
    """The transform ``H(w) = int_{w0}^w dv / phi(v)`` and its inverse.

    Calling the object evaluates ``H``; :meth:`inverse` evaluates ``H^{-1}``.
    Both use closed forms when ``phi`` has one unless ``numeric=True``.
    """

    phi: RateFunction
    w0: float = 1.0

    def __post_init__(self):
        if not self.w0 >= 1.0:
            raise DomainError(f"w0 must be >= 1; got {self.w0!r}")
        if isinstance(self.phi, TabulatedRate):
            self.phi._check_range(self.w0)

    @property
    def closed_form(self):
        return self.phi.closed_form

    def __call__(self, w, numeric=False):
        w = _as_float_or_array(w)
        if np.any(np.asarray(w) < self.w0):
            raise DomainError(f"H is defined for w >= w0={self.w0}; got {w!r}")
        if self.closed_form and not numeric:
            return self.phi._h(w, self.w0)
        if np.ndim(w):
            return np.array([self._h_numeric(float(v)) for v in np.ravel(w)]).reshape(
                np.shape(w)
            )
        return self._h_numeric(w)

    def inverse(self, t, numeric=False):
        t = _as_float_or_array(t)
        if np.any(np.asarray(t) < 0):
            raise DomainError(f"H^-1 is defined for t >= 0; got {t!r}")
        if self.closed_form and not numeric:
            # rounding can land a few ulps below w0
            out = np.maximum(self.phi._h_inv(t, self.w0), self.w0)
            return float(out) if np.ndim(out) == 0 else out
        if np.ndim(t):
            return np.array(
                [self._h_inv_numeric(float(s)) for s in np.ravel(t)]
            ).reshape(np.shape(t))
        return self._h_inv_numeric(t)

    def log_inverse(self, t):
        """``log H^{-1}(t)``, finite even where ``H^{-1}(t)`` overflows."""
        t = _as_float_or_array(t)
        if np.any(np.asarray(t) < 0):
            raise DomainError(f"H^-1 is defined for t >= 0; got {t!r}")
        log_w0 = math.log(self.w0)
        if hasattr(self.phi, "_log_h_inv"):
            out = np.maximum(self.phi._log_h_inv(t, self.w0), log_w0)
        else:
            out = np.log(self.inverse(t))
        return float(out) if np.ndim(out) == 0 else out

    def _h_numeric(self, w):
        if w == self.w0:
            return 0.0
        phi = self.phi
        if isinstance(phi, TabulatedRate):
            knots = phi.w[(phi.w > self.w0) & (phi.w < w)]
            edges = np.concatenate(([self.w0], knots, [w]))
            total = 0.0
            for a, b in zip(edges[:-1], edges[1:]):
                val, _ = integrate.quad(
                    lambda v: 1.0 / phi._value(v), a, b,
                    epsabs=_QUAD_EPSABS, epsrel=_QUAD_EPSREL,
                )
                total += val
            return total
        # integrate in log(v): the integrand v / phi(v) is smooth and slowly varying
        val, _ = integrate.quad(
            lambda u: math.exp(u) / float(phi._value(math.exp(u))),
            math.log(self.w0), math.log(w),
            epsabs=_QUAD_EPSABS, epsrel=_QUAD_EPSREL, limit=200,
        )
        return val

    def _h_inv_numeric(self, t):
        if t == 0:
            return self.w0
        lo, hi = self.w0, 2.0 * self.w0
        cap = self.phi.support[1] if isinstance(self.phi, TabulatedRate) else _BRACKET_LIMIT
        while self._h_numeric(min(hi, cap)) < t:
            if hi >= cap:
                if cap < _BRACKET_LIMIT:
                    raise RangeError(f"H^-1({t}) lies beyond the table range")
                raise NumericError(f"could not bracket H^-1({t})")
            lo, hi = hi, 2.0 * hi
        hi = min(hi, cap)
        return _brent(lambda w: self._h_numeric(w) - t, lo, hi)


def eval_phi(phi, w):
    """Evaluate a rate function at ``w > 0``."""
    return phi(w)


def h_eval(H, w, numeric=False):
    """Evaluate ``H(w)`` for ``w >= H.w0``."""
    return H(w, numeric=numeric)


def h_inverse(H, t, numeric=False):
    """Evaluate ``H^{-1}(t)`` for ``t >= 0``."""
    return H.inverse(t, numeric=numeric)


def r_function(H, s, numeric=False):
    """Return ``r(s) = phi(H^{-1}(s))``, the derivative of ``H^{-1}``.

    ``H`` must be anchored at ``w0 = 1``.  ``r`` is log-concave, so
    ``r(s + u) * r(0) <= r(s) * r(u)``.
    """
    if H.w0 != 1.0:
        raise DomainError(f"r is defined for w0 = 1; got w0={H.w0!r}")
    return H.phi(H.inverse(s, numeric=numeric))


def parse_rate(text):
    """Build a rate function from ``kind:arg:arg`` text.

    Accepted forms are ``constant:c``, ``power:c:beta`` and
    ``log:c:beta[:K]``.

    >>> parse_rate("power:1:0.5")
    PowerRate(c=1.0, beta=0.5)
    """
    kind, *args = text.strip().split(":")
    try:
        nums = [float(a) for a in args]
    except ValueError as exc:
        raise DomainError(f"bad rate function spec {text!r}") from exc
    kind = kind.lower()
    if kind == "constant" and len(nums) == 1:
        return ConstantRate(*nums)
    if kind == "power" and len(nums) == 2:
        return PowerRate(*nums)
    if kind in ("log", "logtype") and len(nums) in (2, 3):
        return LogRate(*nums)
    raise DomainError(f"bad rate function spec {text!r}")
