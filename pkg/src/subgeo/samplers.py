"""Adaptive Markov chain engine and the three shipped kernel families.

Each step of an adaptive run first asks the adaptation plan for the next
tuning parameter, given the history so far, then moves the state with the
kernel at that parameter.  The families are

* :class:`IndependenceMH` -- independence Metropolis-Hastings on the Exp(1)
  target with an Exp(gamma) proposal,
* :class:`UnadjustedLangevin` -- Langevin steps on a multivariate Student-t,
* :class:`RandomWalkMetropolis` -- random walk with a truncated Gaussian
  proposal scaled by a covariance parameter.

Step functions are vectorized: pass a batch of states (leading axis) to move
many independent chains with one parameter.
"""

from __future__ import annotations

import copy
import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from ._errors import ConfigError, DomainError
from .bounds import DiminishingSchedule

__all__ = [
    "IndependenceMH",
    "UnadjustedLangevin",
    "RandomWalkMetropolis",
    "mhi_accept_prob",
    "mhi_step",
    "ula_step",
    "rwm_step",
    "truncated_gaussian",
    "project_spd",
    "CovarianceState",
    "cov_adapt_update",
    "FixedPlan",
    "SchedulePlan",
    "StochasticApproxPlan",
    "SampleCovariancePlan",
    "Trajectory",
    "chain_rngs",
    "run_adaptive",
    "simulate_marginal",
    "write_trajectories_csv",
    "write_manifest",
]

_SPECTRAL_TOL = 1e-10


def mhi_accept_prob(x, gamma):
    """Probability that the independence sampler accepts a move from ``x``.

    Equals ``gamma e^{(1-gamma) x} + (1 - gamma) e^{-gamma x}``, so the
    rejection probability is one minus this value.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("the independence sampler lives on [0, inf)")
    out = gamma * np.exp((1.0 - gamma) * x) + (1.0 - gamma) * np.exp(-gamma * x)
    return float(out) if out.ndim == 0 else out


def mhi_step(x, gamma, rng):
    """One independence Metropolis-Hastings move for a state or batch of states."""
    x = np.asarray(x, dtype=float)
    y = rng.exponential(1.0 / gamma, size=x.shape)
    u = rng.random(size=x.shape)
    accept = u < np.exp(np.minimum(0.0, (gamma - 1.0) * (y - x)))
    out = np.where(accept, y, x)
    return float(out) if out.ndim == 0 else out


def _student_grad(x, v):
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    sq = np.sum(x * x, axis=-1, keepdims=True)
    return (v + d) * x / (1.0 + sq)


def ula_step(x, gamma, rng, *, v):
    """One unadjusted Langevin move on the Student-t target with ``v`` degrees of freedom.

    ``x`` has shape ``(d,)`` or ``(n, d)``; the update is
    ``x - gamma (v + d) x / (1 + |x|^2) + sqrt(2 gamma) Z``.
    """
    x = np.asarray(x, dtype=float)
    noise = rng.standard_normal(size=x.shape)
    return x - gamma * _student_grad(x, v) + math.sqrt(2.0 * gamma) * noise


def truncated_gaussian(rng, n, d, radius):
    """Draw ``n`` standard Gaussian vectors in ``R^d`` conditioned on ``|z| <= radius``."""
    out = rng.standard_normal(size=(n, d))
    bad = np.sum(out * out, axis=1) > radius * radius
    while np.any(bad):
        k = int(bad.sum())
        out[bad] = rng.standard_normal(size=(k, d))
        bad = np.sum(out * out, axis=1) > radius * radius
    return out


def _weibull_potential(x, m):
    x = np.asarray(x, dtype=float)
    return np.power(1.0 + np.sum(x * x, axis=-1), m / 2.0) - 1.0


def _sqrtm(G):
    vals, vecs = np.linalg.eigh(G)
    return (vecs * np.sqrt(np.maximum(vals, 0.0))) @ vecs.T


def _check_spd(G, lo=None, hi=None):
    G = np.asarray(G, dtype=float)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise DomainError("covariance parameter must be a square matrix")
    scale = max(1.0, float(np.max(np.abs(G))))
    if np.max(np.abs(G - G.T)) > _SPECTRAL_TOL * scale:
        raise DomainError("covariance parameter must be symmetric")
    vals = np.linalg.eigvalsh(G)
    if lo is not None and vals[0] < lo - _SPECTRAL_TOL * scale:
        raise DomainError(f"smallest eigenvalue {vals[0]:.6g} below {lo}")
    if hi is not None and vals[-1] > hi + _SPECTRAL_TOL * scale:
        raise DomainError(f"largest eigenvalue {vals[-1]:.6g} above {hi}")
    if vals[0] <= 0:
        raise DomainError("covariance parameter must be positive definite")
    return G


def rwm_step(x, Gamma, rng, *, m=0.5, radius=2.0, lambda_star=None, lambda_upper=None):
    """One random-walk Metropolis move with proposal ``x + Gamma^{1/2} xi``.

    ``xi`` is a standard Gaussian truncated to the ball of ``radius``; the
    target density is proportional to ``exp(-U)`` with
    ``U(x) = (1 + |x|^2)^(m/2) - 1``.
    """
    G = _check_spd(Gamma, lambda_star, lambda_upper)
    x = np.asarray(x, dtype=float)
    batch = x.reshape(-1, G.shape[0])
    xi = truncated_gaussian(rng, batch.shape[0], G.shape[0], radius)
    prop = batch + xi @ _sqrtm(G).T
    log_a = _weibull_potential(batch, m) - _weibull_potential(prop, m)
    u = rng.random(size=batch.shape[0])
    accept = u < np.exp(np.minimum(0.0, log_a))
    out = np.where(accept[:, None], prop, batch)
    return out.reshape(x.shape)


def project_spd(G, lambda_star, lambda_upper):
    """Nearest matrix with eigenvalues in ``[lambda_star, lambda_upper]`` (eigenvalue clipping)."""
    G = np.asarray(G, dtype=float)
    G = 0.5 * (G + G.T)
    vals, vecs = np.linalg.eigh(G)
    vals = np.clip(vals, lambda_star, lambda_upper)
    out = (vecs * vals) @ vecs.T
    return 0.5 * (out + out.T)


@dataclass(frozen=True)
class IndependenceMH:
    """Independence sampler for Exp(1) with parameters in ``[gamma_star, gamma_upper]``."""

    gamma_star: float
    gamma_upper: float
    name = "mhi"

    def __post_init__(self):
        if not 1 < self.gamma_star < self.gamma_upper:
            raise DomainError(
                f"need 1 < gamma_* < gamma^*; got {self.gamma_star!r}, {self.gamma_upper!r}"
            )

    @property
    def midpoint(self):
        return 0.5 * (self.gamma_star + self.gamma_upper)

    def contains(self, gamma):
        return self.gamma_star <= float(gamma) <= self.gamma_upper

    def project(self, gamma):
        return float(min(self.gamma_upper, max(self.gamma_star, gamma)))

    def check_state(self, x):
        if np.any(np.asarray(x) < 0):
            raise DomainError("independence sampler states must be nonnegative")

    def step(self, x, gamma, rng):
        return mhi_step(x, gamma, rng)

    def describe(self):
        return {"family": self.name, "gamma_star": self.gamma_star, "gamma_upper": self.gamma_upper}


@dataclass(frozen=True)
class UnadjustedLangevin:
    """Langevin kernels for the ``d``-dimensional Student-t with ``v`` degrees of freedom."""

    v: float
    d: int
    step_range: tuple = (0.1, 0.9)
    name = "ula"

    def __post_init__(self):
        lo, hi = self.step_range
        if not 0 < lo <= hi < 1:
            raise DomainError(f"step range must lie inside (0, 1); got {self.step_range!r}")
        if not self.v > 0 or int(self.d) != self.d or self.d < 1:
            raise DomainError("need v > 0 and a positive integer dimension")

    def potential(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * (self.v + self.d) * np.log1p(np.sum(x * x, axis=-1))

    def grad_potential(self, x):
        return _student_grad(x, self.v)

    def contains(self, gamma):
        lo, hi = self.step_range
        return lo <= float(gamma) <= hi

    def project(self, gamma):
        lo, hi = self.step_range
        return float(min(hi, max(lo, gamma)))

    def check_state(self, x):
        if np.shape(x)[-1] != self.d:
            raise DomainError(f"state must have trailing dimension {self.d}")

    def step(self, x, gamma, rng):
        return ula_step(x, gamma, rng, v=self.v)

    def describe(self):
        return {"family": self.name, "v": self.v, "d": self.d, "step_range": list(self.step_range)}


@dataclass(frozen=True)
class RandomWalkMetropolis:
    """Random-walk Metropolis on ``exp(-((1 + |x|^2)^(m/2) - 1))`` with covariance adaptation."""

    d: int = 1
    m: float = 0.5
    lambda_star: float = 0.5
    lambda_upper: float = 2.0
    proposal_radius: float = 2.0
    name = "rwm"

    def __post_init__(self):
        if not 0 < self.lambda_star <= self.lambda_upper:
            raise DomainError("need 0 < lambda_* <= lambda^*")
        if not self.proposal_radius > 0:
            raise DomainError("proposal radius must be positive")
        if not 0 < self.m < 2:
            raise DomainError(f"need 0 < m < 2; got {self.m!r}")

    def potential(self, x):
        return _weibull_potential(x, self.m)

    def contains(self, Gamma):
        try:
            _check_spd(Gamma, self.lambda_star, self.lambda_upper)
        except DomainError:
            return False
        return np.shape(Gamma) == (self.d, self.d)

    def project(self, Gamma):
        return project_spd(Gamma, self.lambda_star, self.lambda_upper)

    def check_state(self, x):
        if np.shape(x)[-1] != self.d:
            raise DomainError(f"state must have trailing dimension {self.d}")

    def step(self, x, Gamma, rng):
        return rwm_step(
            x, Gamma, rng, m=self.m, radius=self.proposal_radius,
            lambda_star=self.lambda_star, lambda_upper=self.lambda_upper,
        )

    def describe(self):
        return {
            "family": self.name, "d": self.d, "m": self.m,
            "lambda_star": self.lambda_star, "lambda_upper": self.lambda_upper,
            "proposal_radius": self.proposal_radius,
        }


@dataclass
class CovarianceState:
    """Running mean and unprojected covariance after observing ``X_0, ..., X_count``."""

    mean: np.ndarray
    cov: np.ndarray
    count: int = 0
    h: float = 1.0

    @classmethod
    def start(cls, x0, gamma0, h=1.0):
        x0 = np.atleast_1d(np.asarray(x0, dtype=float))
        return cls(x0.copy(), np.array(gamma0, dtype=float, copy=True).reshape(x0.size, x0.size), 0, h)


def cov_adapt_update(state, x, lambda_star, lambda_upper):
    """Fold the observation ``x`` into ``state`` and return the projected covariance.

    The recursion ``G_t = (t-1)/t G_{t-1} + h/(t+1) (x - mean)(x - mean)^T`` is
    applied to the unprojected matrix held in ``state``, which is updated in
    place; only the returned parameter is clipped to the eigenvalue band.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    t = state.count + 1
    dev = x - state.mean
    state.cov = (t - 1) / t * state.cov + state.h / (t + 1) * np.outer(dev, dev)
    state.mean = state.mean + dev / (t + 1)
    state.count = t
    return project_spd(state.cov, lambda_star, lambda_upper)


class _Plan:
    """Common plan interface: ``reset`` before a chain, ``next`` once per step."""

    decay: DiminishingSchedule | None = None

    def reset(self, family, x0, gamma0):
        self.family = family

    def next(self, t, x_prev, gamma_prev, rng):
        raise NotImplementedError

    def diagnostics(self):
        return {}


class FixedPlan(_Plan):
    """Always emit the same parameter."""

    def __init__(self, gamma):
        self.gamma = gamma

    def next(self, t, x_prev, gamma_prev, rng):
        return self.gamma

    def describe(self):
        return {"plan": "fixed", "gamma": np.asarray(self.gamma).tolist()}


class SchedulePlan(_Plan):
    """Deterministic parameter sequence ``t -> gamma_t`` for ``t >= 1``."""

    def __init__(self, fn, label="schedule", decay=None):
        self.fn = fn
        self.label = label
        self.decay = decay

    @classmethod
    def alternating(cls, *values):
        vals = tuple(float(v) for v in values)
        if len(vals) < 2:
            raise ConfigError("an alternating schedule needs at least two values", field="plan")
        return cls(lambda t: vals[(t - 1) % len(vals)], label="alternate:" + ",".join(map(repr, vals)))

    @classmethod
    def from_values(cls, values):
        vals = list(values)

        def fn(t):
            if t > len(vals):
                raise ConfigError(f"schedule has {len(vals)} entries; asked for step {t}", field="plan")
            return vals[t - 1]

        return cls(fn, label="table")

    def next(self, t, x_prev, gamma_prev, rng):
        return self.fn(t)

    def values(self, t_max):
        return [self.fn(t) for t in range(1, t_max + 1)]

    def describe(self):
        return {"plan": self.label}


def moment_matching_rule(x, gamma):
    """Nudge an Exp(gamma) proposal toward the target mean: ``1 - gamma x``."""
    return 1.0 - gamma * x


class StochasticApproxPlan(_Plan):
    """Projected stochastic approximation ``gamma_t = proj(gamma_{t-1} + h_t L(x_{t-1}, gamma_{t-1}))``.

    Args:
        rule: Update direction ``L(x, gamma)``; values are clipped to ``bound``.
        bound: Declared bound on ``|L|``.
        h0, power: Step sizes ``h_t = h0 * t^(-power)``.
        decay: Declared diminishing schedule; the engine records
            ``|gamma_{t+1} - gamma_t| / G(t)`` against it.
    """

    def __init__(self, rule=moment_matching_rule, bound=1.0, h0=0.5, power=1.0, decay=None):
        if not bound > 0 or not h0 > 0 or not power > 0:
            raise ConfigError("bound, h0 and power must be positive", field="plan")
        self.rule, self.bound, self.h0, self.power = rule, bound, h0, power
        self.decay = decay if decay is not None else DiminishingSchedule(
            "polynomial", power if power > 1 else 1.0 + 1e-9
        )

    def reset(self, family, x0, gamma0):
        super().reset(family, x0, gamma0)
        self.ratios = []

    def step_size(self, t):
        return self.h0 * t ** (-self.power)

    def next(self, t, x_prev, gamma_prev, rng):
        if t == 1:
            return gamma_prev
        direction = float(np.clip(self.rule(x_prev, gamma_prev), -self.bound, self.bound))
        gamma = self.family.project(gamma_prev + self.step_size(t) * direction)
        self.ratios.append(abs(gamma - gamma_prev) / self.decay.G(t - 1))
        return gamma

    def diagnostics(self):
        return {"adaptation_over_G": list(self.ratios)}

    def describe(self):
        return {
            "plan": "sa", "bound": self.bound, "h0": self.h0, "power": self.power,
            "decay": {"kind": self.decay.kind, "a": self.decay.a},
        }


class SampleCovariancePlan(_Plan):
    """Scaled running sample covariance, clipped to the family's eigenvalue band."""

    def __init__(self, h=1.0):
        if not h > 0:
            raise ConfigError("covariance scale h must be positive", field="plan")
        self.h = h

    def reset(self, family, x0, gamma0):
        super().reset(family, x0, gamma0)
        self.state = CovarianceState.start(x0, gamma0, self.h)

    def next(self, t, x_prev, gamma_prev, rng):
        if t == 1:
            return self.family.project(self.state.cov)
        return cov_adapt_update(self.state, x_prev, self.family.lambda_star, self.family.lambda_upper)

    def describe(self):
        return {"plan": "cov", "h": self.h}


@dataclass
class Trajectory:
    """One chain: ``params[t]`` drove the move into ``states[t]``; index 0 is the start."""

    chain_id: int
    seed: int
    states: np.ndarray
    params: list
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.states) != len(self.params):
            raise DomainError("states and params must have equal length")


def chain_rngs(seed, n_chains):
    """Independent, replayable generators for ``n_chains`` chains from one root seed."""
    children = np.random.SeedSequence(seed).spawn(n_chains)
    return [np.random.default_rng(c) for c in children]


def run_adaptive(family, plan, x0, gamma0, t_max, n_chains=1, seed=0):
    """Run ``n_chains`` independent adaptive chains for ``t_max`` steps.

    Raises:
        DomainError: if the plan emits a parameter outside the family's set.
    """
    if not family.contains(gamma0):
        raise DomainError(f"initial parameter {gamma0!r} is outside the parameter set")
    family.check_state(x0)
    out = []
    for chain_id, rng in enumerate(chain_rngs(seed, n_chains)):
        runner = copy.deepcopy(plan)
        runner.reset(family, x0, gamma0)
        x = np.array(x0, dtype=float, copy=True)
        states = [x.copy()]
        params = [gamma0]
        gamma = gamma0
        for t in range(1, t_max + 1):
            gamma = runner.next(t, x, gamma, rng)
            if not family.contains(gamma):
                raise DomainError(f"plan emitted {gamma!r} outside the parameter set at t={t}")
            x = np.asarray(family.step(x, gamma, rng))
            states.append(x.copy())
            params.append(gamma)
        out.append(Trajectory(chain_id, seed, np.array(states), params, runner.diagnostics()))
    return out


def simulate_marginal(family, gammas, x0, n, seed=0, record=None):
    """Draw ``n`` independent copies of ``X_t`` under a deterministic parameter sequence.

    All copies move together as one batch. ``record`` optionally lists the
    times at which to keep a snapshot; the return value is then a dict
    ``t -> batch``, otherwise the final batch.
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    x = np.repeat(np.asarray(x0, dtype=float)[None, ...], n, axis=0)
    keep = set(record or ())
    snaps = {0: x.copy()} if 0 in keep else {}
    for t, gamma in enumerate(gammas, start=1):
        if not family.contains(gamma):
            raise DomainError(f"parameter {gamma!r} at t={t} is outside the parameter set")
        x = family.step(x, gamma, rng)
        if t in keep:
            snaps[t] = np.array(x, copy=True)
    return snaps if record is not None else x


def _flatten(value):
    return ";".join(repr(float(v)) for v in np.ravel(np.asarray(value, dtype=float)))


def write_trajectories_csv(trajectories, path):
    """Write trajectories as rows ``chain_id, t, param, state``.

    Vector and matrix entries are flattened row-major and joined with ``;``.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["chain_id", "t", "param", "state"])
        for tr in trajectories:
            for t, (p, x) in enumerate(zip(tr.params, tr.states)):
                writer.writerow([tr.chain_id, t, _flatten(p), _flatten(x)])


def write_manifest(path, seed, config, family, plan, version):
    """Write the JSON run manifest next to a trajectory export."""
    body = {
        "seed": seed,
        "config": config,
        "family": family.describe(),
        "plan": plan.describe(),
        "version": version,
    }
    with open(path, "w") as fh:
        json.dump(body, fh, indent=2, sort_keys=True)
    return body
