"""Independent verification: exact MHI marginals, condition checkers and MC witnesses.

The independence sampler on Exp(1) is one-dimensional and its kernel is
piecewise exponential, so the law of ``X_t`` under any deterministic
parameter sequence can be propagated on a quadrature grid.  The marginal is
kept as a point mass at the start (tracked analytically) plus a density on
uniform nodes.  The grid operator is built so that total mass is conserved
to rounding error; the rejection probability it uses is the discrete adjoint
of the acceptance integral rather than the continuous closed form.

The remaining checkers evaluate growth, drift, contraction and diminishing
adaptation inequalities by closed form, 1-D quadrature or Monte Carlo, and
return a :class:`VerificationReport`.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate, signal, stats

from ._errors import DomainError, NumericError, RangeError
from .bounds import TailLowerBound, mhi_constants, mhi_upper_bound, DiminishingSchedule
from .rates import ConstantRate, LogRate, PowerRate
from .samplers import (
    IndependenceMH,
    RandomWalkMetropolis,
    UnadjustedLangevin,
    mhi_accept_prob,
    truncated_gaussian,
    _weibull_potential,
)

__all__ = [
    "GridConfig",
    "GridMeasure",
    "VerificationReport",
    "point_mass",
    "discretized_target",
    "mhi_transition_apply",
    "exact_tv_to_pi",
    "iterate_marginals",
    "marginal_at",
    "tv_trace",
    "mhi_growth_lhs",
    "mhi_growth_lhs_quad",
    "mhi_transition_tv",
    "verify_growth",
    "calibrate_growth",
    "verify_drift_and_contraction",
    "measure_diminishing",
    "rwm_J_star",
    "verify_stationarity",
    "empirical_tail_discrepancy",
    "W_FUNCTIONS",
]

_MASS_TOL = 1e-9


@dataclass(frozen=True)
class GridConfig:
    """Uniform quadrature nodes on ``[0, x_max]``."""

    x_max: float = 28.0
    n_nodes: int = 2**14

    def __post_init__(self):
        if not self.x_max > 0 or self.n_nodes < 3:
            raise DomainError("grid needs x_max > 0 and at least 3 nodes")

    @property
    def step(self):
        return self.x_max / (self.n_nodes - 1)

    def nodes(self):
        return np.linspace(0.0, self.x_max, self.n_nodes)

    def weights(self):
        w = np.full(self.n_nodes, self.step)
        w[0] = w[-1] = 0.5 * self.step
        return w


@dataclass
class GridMeasure:
    """Point mass ``atom_mass`` at ``x0`` plus a trapezoid-interpreted density on ``grid``."""

    x0: float
    atom_mass: float
    grid: np.ndarray
    density: np.ndarray
    weights: np.ndarray

    def total_mass(self):
        return self.atom_mass + float(self.weights @ self.density)

    def check(self, tol=_MASS_TOL):
        if not 0.0 <= self.atom_mass <= 1.0:
            raise NumericError(f"atom mass {self.atom_mass!r} outside [0, 1]")
        if abs(self.total_mass() - 1.0) > tol:
            raise NumericError(f"total mass {self.total_mass()!r} differs from 1 by more than {tol}")
        return self


def point_mass(x0, config=GridConfig()):
    if not 0 <= x0 <= config.x_max:
        raise RangeError(f"x0={x0!r} outside [0, {config.x_max}]")
    grid = config.nodes()
    return GridMeasure(float(x0), 1.0, grid, np.zeros_like(grid), config.weights())


def discretized_target(config=GridConfig(), normalize=True):
    """Exp(1) sampled on the grid; ``normalize`` rescales to unit trapezoid mass."""
    grid, w = config.nodes(), config.weights()
    dens = np.exp(-grid)
    if normalize:
        dens = dens / float(w @ dens)
    return GridMeasure(0.0, 0.0, grid, dens, w)


def _scan(values, rho):
    # y[k] = values[k] + rho * y[k-1]
    return signal.lfilter([1.0], [1.0, -rho], values)


def _mhi_operator(grid, w, gamma):
    h = grid[1] - grid[0]
    rho = math.exp(-(gamma - 1.0) * h)
    p = gamma * np.exp(-gamma * grid)
    u = w * p
    suffix = np.cumsum(u[::-1])[::-1]
    V = _scan(u, rho)
    A = np.zeros_like(grid)
    A[:-1] += 0.5 * h * (suffix[1:] + V[:-1])
    A[1:] += 0.5 * h * (suffix[1:] + rho * V[:-1])
    return rho, p, 1.0 - A / w


def mhi_transition_apply(mu, gamma, tol=_MASS_TOL):
    """One exact independence-sampler step applied to a grid measure.

    The acceptance integral ``int a(x, y) f(x) dx`` is split at ``x = y``
    into a cumulative part (``a = 1``) and an exponentially weighted tail,
    both accumulated by linear recursions over the nodes.
    """
    if not gamma > 1:
        raise DomainError(f"gamma must exceed 1; got {gamma!r}")
    grid, w, f = mu.grid, mu.weights, mu.density
    h = grid[1] - grid[0]
    rho, p, reject = _mhi_operator(grid, w, gamma)
    F = np.concatenate(([0.0], np.cumsum(0.5 * h * (f[:-1] + f[1:]))))
    c = np.zeros_like(f)
    c[:-1] = 0.5 * h * (f[:-1] + rho * f[1:])
    S = _scan(c[::-1], rho)[::-1]
    new = p * (F + S) + reject * f

    stay = 1.0 - mhi_accept_prob(mu.x0, gamma)
    if mu.atom_mass > 0:
        from_atom = p * np.exp(np.minimum(0.0, (gamma - 1.0) * (grid - mu.x0)))
        mass = float(w @ from_atom)
        new = new + mu.atom_mass * (1.0 - stay) / mass * from_atom
    out = GridMeasure(mu.x0, mu.atom_mass * stay, grid, new, w)
    drift = abs(out.total_mass() - mu.total_mass())
    if drift > tol:
        raise NumericError(
            f"mass changed by {drift:.3e} in one step (gamma={gamma}, nodes={grid.size})"
        )
    return out


def exact_tv_to_pi(mu):
    """TV distance from a grid measure to Exp(1), counting the target mass beyond the grid."""
    diff = float(mu.weights @ np.abs(mu.density - np.exp(-mu.grid)))
    return min(1.0, 0.5 * (mu.atom_mass + diff + math.exp(-mu.grid[-1])))


def _gamma_sequence(schedule, t):
    if callable(schedule):
        return [schedule(s) for s in range(1, t + 1)]
    if hasattr(schedule, "values"):
        return schedule.values(t)
    seq = list(schedule)
    if len(seq) < t:
        raise RangeError(f"schedule has {len(seq)} entries; need {t}")
    return seq[:t]


def iterate_marginals(schedule, t, x0=0.0, config=GridConfig()):
    """Yield ``(s, marginal)`` for ``s = 0, ..., t``."""
    mu = point_mass(x0, config)
    yield 0, mu
    for s, gamma in enumerate(_gamma_sequence(schedule, t), start=1):
        mu = mhi_transition_apply(mu, gamma)
        yield s, mu


def marginal_at(schedule, t, config=GridConfig(), x0=0.0):
    """Law of ``X_t`` for a deterministic parameter sequence started at ``x0``."""
    for _, mu in iterate_marginals(schedule, t, x0, config):
        pass
    return mu


def tv_trace(schedule, t, x0=0.0, config=GridConfig()):
    """Exact TV to the target at ``s = 0, ..., t``."""
    return np.array([exact_tv_to_pi(mu) for _, mu in iterate_marginals(schedule, t, x0, config)])


@dataclass
class VerificationReport:
    """Outcome of checking one condition over a grid of inputs.

    ``rows`` holds one dict per checked input with at least ``margin``;
    a run passes when every margin is at least ``-tolerance`` (or at least
    ``-3 * stderr`` for Monte Carlo rows).
    """

    condition: str
    rows: list
    worst_margin: float
    passed: bool
    tolerance: float = 0.0
    constants: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @classmethod
    def from_rows(cls, condition, rows, tolerance=0.0, constants=None, notes=None, mc=False):
        margins = [r["margin"] for r in rows]
        worst = float(min(margins)) if margins else float("nan")
        if mc:
            ok = all(r["margin"] >= -3.0 * r["stderr"] for r in rows)
        else:
            ok = all(m >= -tolerance for m in margins)
        return cls(condition, rows, worst, bool(ok), tolerance, dict(constants or {}), list(notes or []))

    def to_dict(self):
        return _jsonable(asdict(self))

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self):
        buf = io.StringIO()
        keys = sorted({k for r in self.rows for k in r})
        writer = csv.DictWriter(buf, fieldnames=keys)
        writer.writeheader()
        for r in self.rows:
            writer.writerow({k: _fmt(r.get(k)) for k in keys})
        return buf.getvalue()


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


# -- independence sampler: growth, drift, contraction, diminishing ---------------


def mhi_growth_lhs(x, gamma, alpha):
    """Closed form of ``(P_gamma W^alpha)(x) - W^alpha(x)`` for ``W = e^x``.

    Infinite when ``gamma <= alpha`` (the proposal cannot integrate ``e^{alpha y}``).
    """
    x = np.asarray(x, dtype=float)
    if gamma <= alpha:
        return np.full(x.shape, np.inf) if x.ndim else math.inf
    if alpha == 1.0:
        raise DomainError("alpha = 1 is a removable singularity of the closed form; perturb it")
    lead = gamma / (alpha - 1.0) + gamma / (gamma - alpha) + gamma - 1.0
    out = (
        lead * np.exp(-(gamma - alpha) * x)
        - gamma / (alpha - 1.0) * np.exp(-(gamma - 1.0) * x)
        - gamma * np.exp((1.0 + alpha - gamma) * x)
    )
    return float(out) if out.ndim == 0 else out


def mhi_growth_lhs_quad(x, gamma, alpha):
    """The same quantity by adaptive quadrature of the defining integral.

    Writes the integral as ``gamma e^{(alpha-gamma) x}`` times
    ``int_0^x e^u (e^{-alpha u} - 1) du + int_0^inf e^{-gamma s}(e^{alpha s} - 1) ds``.
    """
    if gamma <= alpha:
        return math.inf
    tail = integrate.quad(lambda s: math.exp((alpha - gamma) * s) - math.exp(-gamma * s), 0, np.inf,
                          epsabs=1e-14, epsrel=1e-13, limit=200)[0]
    body = 0.0
    if x > 0:
        body = integrate.quad(lambda u: math.exp(u) * math.expm1(-alpha * u), 0, x,
                              epsabs=1e-14, epsrel=1e-13, limit=200)[0]
    return gamma * math.exp((alpha - gamma) * x) * (body + tail)


def mhi_transition_tv(x, y, gamma, quad=False):
    """``TV(P_gamma(x, .), P_gamma(y, .))``; equals the rejection probability at ``max(x, y)``."""
    if x == y:
        return 0.0
    lo, hi = sorted((x, y))
    if not quad:
        return 1.0 - mhi_accept_prob(hi, gamma)
    p = lambda z: gamma * math.exp(-gamma * z)
    acc = lambda s, z: math.exp(min(0.0, (gamma - 1.0) * (z - s)))
    diff = lambda z: abs(acc(lo, z) - acc(hi, z)) * p(z)
    dens = integrate.quad(diff, 0, hi, points=[lo] if lo > 0 else None, epsabs=1e-14, epsrel=1e-12, limit=200)[0]
    rej = [1.0 - mhi_accept_prob(s, gamma) for s in (lo, hi)]
    return 0.5 * (rej[0] + rej[1] + dens)


def _mhi_kernel_tv(x, ga, gb):
    """``TV(P_ga(x, .), P_gb(x, .))`` by quadrature of the density part."""
    def dens(z, g):
        return g * math.exp(-g * z) * math.exp(min(0.0, (g - 1.0) * (z - x)))

    f = lambda z: abs(dens(z, ga) - dens(z, gb))
    pts = [x] if x > 0 else None
    body = integrate.quad(f, 0, max(x, 1.0) * 60, points=pts, epsabs=1e-14, epsrel=1e-12, limit=400)[0]
    atoms = abs(mhi_accept_prob(x, ga) - mhi_accept_prob(x, gb))
    return 0.5 * (atoms + body)


def measure_diminishing(family, gamma_a, gamma_b, x_grid, radius=1.0, n=20_000, seed=0):
    """Largest kernel change over ``x_grid`` and the Lipschitz constant it is checked against.

    Returns:
        ``(sup_tv, J)``.  For the independence sampler ``J = 2/gamma_*^2 + r + 1/gamma_*``
        and ``x_grid`` is restricted to ``[0, r]``; for random-walk Metropolis
        ``sup_tv`` is a Monte Carlo estimate and ``J`` is :func:`rwm_J_star`,
        to be multiplied by the Frobenius distance of the two matrices.
    """
    if isinstance(family, IndependenceMH):
        if not (family.contains(gamma_a) and family.contains(gamma_b)):
            raise DomainError("both parameters must lie in the parameter set")
        xs = [x for x in np.asarray(x_grid, dtype=float) if 0 <= x <= radius]
        J = 2.0 / family.gamma_star**2 + radius + 1.0 / family.gamma_star
        if gamma_a == gamma_b:
            return 0.0, J
        return max(_mhi_kernel_tv(x, gamma_a, gamma_b) for x in xs), J
    if isinstance(family, RandomWalkMetropolis):
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        Ga, Gb = np.asarray(gamma_a, float), np.asarray(gamma_b, float)
        if np.array_equal(Ga, Gb):
            return 0.0, rwm_J_star(family)
        sup = max(
            _rwm_tv_mc(family, np.atleast_1d(x).astype(float), Ga, np.atleast_1d(x).astype(float), Gb, n, rng)[0]
            for x in x_grid
        )
        return sup, rwm_J_star(family)
    raise DomainError(f"no diminishing check for family {type(family).__name__}")


# -- random-walk Metropolis helpers ---------------------------------------------


def rwm_J_star(family):
    """``2 d (2 pi)^{d/2} / (lambda_* int_ball exp(-|z|^2/2) dz) = 2 d / (lambda_* P(chi2_d <= r^2))``."""
    ball = stats.chi2.cdf(family.proposal_radius**2, family.d)
    return 2.0 * family.d / (family.lambda_star * ball)


def _rwm_proposal_density(family, x, G, y):
    d = family.d
    Ginv = np.linalg.inv(G)
    dev = y - x
    q = np.einsum("ni,ij,nj->n", dev, Ginv, dev)
    norm = (2 * math.pi) ** (d / 2) * math.sqrt(np.linalg.det(G)) * stats.chi2.cdf(family.proposal_radius**2, d)
    return np.where(q <= family.proposal_radius**2, np.exp(-0.5 * q) / norm, 0.0)


def _rwm_accepted_density(family, x, G, y):
    a = np.exp(np.minimum(0.0, family.potential(x[None, :]) - family.potential(y)))
    return _rwm_proposal_density(family, x, G, y) * a


def _rwm_proposals(family, x, G, n, rng):
    vals, vecs = np.linalg.eigh(G)
    root = (vecs * np.sqrt(vals)) @ vecs.T
    return x[None, :] + truncated_gaussian(rng, n, family.d, family.proposal_radius) @ root.T


def _rwm_tv_mc(family, x1, G1, x2, G2, n, rng):
    """MC estimate of ``TV(P_{G1}(x1, .), P_{G2}(x2, .))`` with its standard error.

    The continuous parts are compared by importance sampling from the even
    mixture of the two proposals; rejection atoms are estimated from the
    same draws and matched when ``x1 == x2``.
    """
    y = np.concatenate([_rwm_proposals(family, x1, G1, n, rng), _rwm_proposals(family, x2, G2, n, rng)])
    mix = 0.5 * (_rwm_proposal_density(family, x1, G1, y) + _rwm_proposal_density(family, x2, G2, y))
    q1 = _rwm_accepted_density(family, x1, G1, y)
    q2 = _rwm_accepted_density(family, x2, G2, y)
    dens_terms = np.abs(q1 - q2) / mix
    acc1_terms = q1 / mix
    acc2_terms = q2 / mix
    r1, r2 = 1.0 - acc1_terms.mean(), 1.0 - acc2_terms.mean()
    if np.array_equal(x1, x2):
        terms = 0.5 * (dens_terms + np.abs(acc2_terms - acc1_terms) * np.sign(r1 - r2))
        est = 0.5 * (dens_terms.mean() + abs(r1 - r2))
    else:
        terms = 0.5 * (dens_terms + 2.0 - acc1_terms - acc2_terms)
        est = 0.5 * (dens_terms.mean() + r1 + r2)
    se = float(terms.std(ddof=1) / math.sqrt(terms.size))
    return float(est), se


# -- growth verification --------------------------------------------------------


def _ula_W_alpha(x, family, alpha):
    return np.power(1.0 + np.sum(np.asarray(x) ** 2, axis=-1), 0.5 * alpha * (family.v + family.d))


def _rwm_W_alpha(x, family, alpha):
    return np.exp(alpha * family.potential(x))


def _point(x, d):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = np.concatenate(([float(x)], np.zeros(d - 1)))
    return x


def _mc_growth(family, alpha, x, gamma, n, rng):
    W = _ula_W_alpha if isinstance(family, UnadjustedLangevin) else _rwm_W_alpha
    x = _point(x, family.d)
    nxt = family.step(np.repeat(x[None, :], n, axis=0), gamma, rng)
    base = float(W(x, family, alpha))
    diff = W(nxt, family, alpha) - base
    return float(diff.mean()), float(diff.std(ddof=1) / math.sqrt(n)), base


def _gamma_value(family, g):
    if isinstance(family, RandomWalkMetropolis) and np.ndim(g) == 0:
        return float(g) * np.eye(family.d)
    return g


def calibrate_growth(family, alpha, x_grid, gamma_grid, n=100_000, seed=0, compact_radius=1.0):
    """Fit the constants the growth certificates leave open, by Monte Carlo.

    Langevin: scale ``C`` of ``phi(w) = C w^(1 - 2/(alpha (v + d)))`` as the
    largest ratio ``LHS / W^alpha(x)^beta`` over the grid.  Random walk: scale
    ``c`` of the log-type rate with exponent ``2/m - 2`` from points outside
    the ball of ``compact_radius``, then the slack ``L`` from points inside.

    Returns:
        ``(phi, slack)``.
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    if isinstance(family, UnadjustedLangevin):
        beta = 1.0 - 2.0 / (alpha * (family.v + family.d))
        ratios = []
        for g in gamma_grid:
            for x in x_grid:
                lhs, se, base = _mc_growth(family, alpha, x, g, n, rng)
                ratios.append((lhs + 3 * se) / base**beta)
        return PowerRate(max(max(ratios), 1e-12), beta), 0.0
    if isinstance(family, RandomWalkMetropolis):
        beta = 2.0 / family.m - 2.0
        unit = LogRate(1.0, beta)
        far, near = [], []
        for g in gamma_grid:
            G = _gamma_value(family, g)
            for x in x_grid:
                lhs, se, base = _mc_growth(family, alpha, x, G, n, rng)
                (far if np.linalg.norm(_point(x, family.d)) > compact_radius else near).append(
                    (lhs + 3 * se, base)
                )
        c = float(max([v / unit(b) for v, b in far] + [1e-12]))
        phi = LogRate(c, beta)
        slack = float(max([v - phi(b) for v, b in near] + [0.0]))
        return phi, slack
    raise DomainError(f"no Monte Carlo calibration for family {type(family).__name__}")


def verify_growth(family, cert, x_grid, gamma_grid, method="closed_form", n=100_000, seed=0,
                  slack=0.0, quad_tol=1e-8):
    """Check ``(P_gamma W^alpha)(x) - W^alpha(x) <= phi(W^alpha(x)) + slack`` over a grid.

    Args:
        family: A shipped kernel family.
        cert: Growth certificate; for the independence sampler ``W = e^x``.
        method: ``"closed_form"`` (independence sampler; also cross-checked
            by quadrature, the largest relative disagreement goes in the
            constants), ``"quadrature"`` or ``"monte_carlo"``.
        slack: Additive constant ``L`` on the right-hand side.
    """
    rows = []
    if isinstance(family, IndependenceMH):
        worst_gap = 0.0
        for g in gamma_grid:
            for x in x_grid:
                w = math.exp(cert.alpha * x)
                closed = mhi_growth_lhs(x, g, cert.alpha)
                quad = mhi_growth_lhs_quad(x, g, cert.alpha)
                if math.isfinite(closed):
                    worst_gap = max(worst_gap, abs(closed - quad) / max(1.0, abs(closed)))
                lhs = closed if method == "closed_form" else quad
                rhs = float(cert.phi(w)) + slack
                rows.append({"x": float(x), "gamma": float(g), "lhs": lhs, "lhs_quad": quad,
                             "rhs": rhs, "margin": rhs - lhs})
        consts = {"alpha": cert.alpha, "quad_max_rel_gap": worst_gap, "quad_tol": quad_tol}
        notes = []
        if worst_gap > quad_tol:
            notes.append(f"closed form and quadrature disagree by {worst_gap:.3e}")
        if any(g <= cert.alpha for g in gamma_grid):
            notes.append("gamma <= alpha: the proposal does not integrate W^alpha, the left side is infinite")
        rep = VerificationReport.from_rows("growth", rows, 1e-12, consts, notes)
        rep.passed = rep.passed and worst_gap <= quad_tol
        return rep
    if isinstance(family, (UnadjustedLangevin, RandomWalkMetropolis)):
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        for g in gamma_grid:
            G = _gamma_value(family, g)
            for x in x_grid:
                lhs, se, base = _mc_growth(family, cert.alpha, x, G, n, rng)
                rhs = float(cert.phi(base)) + slack
                rows.append({"x": float(np.linalg.norm(_point(x, family.d))), "gamma": float(np.ravel(G)[0]),
                             "lhs": lhs, "stderr": se, "rhs": rhs, "margin": float(rhs - lhs)})
        consts = {"alpha": cert.alpha, "phi": repr(cert.phi), "slack": slack, "n": n}
        return VerificationReport.from_rows("growth", rows, 0.0, consts, mc=True)
    raise DomainError(f"no growth verifier for family {type(family).__name__}")


def verify_drift_and_contraction(family, x_grid, gamma_grid, eps=0.01, n=20_000, seed=0,
                                 level=None, pairs=20):
    """Check the drift inequality and local contraction of the adaptive kernels.

    Independence sampler with ``V = e^x``: the drift is checked for
    ``V^{1-eps}`` in the form
    ``P V' - V' <= -gamma_* V'^{(2-eps-gamma^*)/(1-eps)} + gamma^*/(gamma_*-1+eps) + gamma^* - 1``
    by closed form; contraction on ``{V' <= level}`` (default ``level = 2K``)
    compares the exact sup of ``TV(P(x, .), P(y, .))`` to ``1 - alpha`` with
    the minorization constant reported by :func:`mhi_upper_bound`.

    Random-walk Metropolis: contraction only, by MC overlap on random pairs
    in the ball ``|x| <= level`` (default 1), against ``1 - alpha`` where the
    reported alpha is the smallest observed ``1 - TV``.

    Returns:
        ``(drift_report, contraction_report)``; the drift report is ``None``
        for random-walk Metropolis.
    """
    if isinstance(family, IndependenceMH):
        gs, gu = family.gamma_star, family.gamma_upper
        a = 1.0 - eps
        beta = (2.0 - eps - gu) / (1.0 - eps)
        K = gu / (gs - 1.0 + eps)
        K_drift = K + gu - 1.0
        rows = []
        for g in gamma_grid:
            for x in x_grid:
                v = math.exp(a * x)
                lhs = mhi_growth_lhs(x, g, a)
                rhs = -gs * v**beta + K_drift
                rows.append({"x": float(x), "gamma": float(g), "lhs": lhs, "rhs": rhs, "margin": rhs - lhs})
        drift = VerificationReport.from_rows(
            "drift", rows, 1e-12, {"eps": eps, "K": K, "K_drift": K_drift, "phi_exponent": beta}
        )
        _, consts = mhi_upper_bound(gs, gu, eps, 0.5, DiminishingSchedule("exp_linear", 1.0), 1.0, 1)
        alpha = consts["alpha"]
        lvl = 2.0 * K if level is None else level
        x_top = math.log(lvl) / a
        xs = [x for x in x_grid if x <= x_top] + [x_top]
        crow = []
        for g in gamma_grid:
            sup = max(mhi_transition_tv(0.0, x, g) for x in xs if x > 0)
            sup_q = max(mhi_transition_tv(0.0, x, g, quad=True) for x in xs if x > 0)
            crow.append({"gamma": float(g), "sup_tv": sup, "sup_tv_quad": sup_q,
                         "bound": 1.0 - alpha, "margin": (1.0 - alpha) - max(sup, sup_q)})
        contraction = VerificationReport.from_rows(
            "contraction", crow, 1e-12, {"alpha": alpha, "level": lvl, "x_top": x_top}
        )
        return drift, contraction
    if isinstance(family, RandomWalkMetropolis):
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        lvl = 1.0 if level is None else level
        draws = []
        for g in gamma_grid:
            G = _gamma_value(family, g)
            for _ in range(pairs):
                x1, x2 = (rng.uniform(-lvl, lvl, size=family.d) for _ in range(2))
                tv, se = _rwm_tv_mc(family, x1, G, x2, G, n, rng)
                draws.append((float(np.ravel(G)[0]), tv, se))
        alpha = 1.0 - max(tv + 3 * se for _, tv, se in draws)
        crow = [{"gamma": g, "tv": tv, "stderr": se, "bound": 1.0 - alpha, "margin": (1.0 - alpha) - tv}
                for g, tv, se in draws]
        rep = VerificationReport.from_rows("contraction", crow, 0.0, {"alpha": alpha, "level": lvl}, mc=True)
        rep.passed = rep.passed and alpha > 0
        return None, rep
    raise DomainError(f"no drift verifier for family {type(family).__name__}")


def verify_stationarity(gamma_grid, config=GridConfig(), tol=1e-6):
    """L1 distance moved by the normalized discretized target under one exact step."""
    pi = discretized_target(config)
    rows = []
    for g in gamma_grid:
        nxt = mhi_transition_apply(pi, g)
        moved = float(pi.weights @ np.abs(nxt.density - pi.density)) + nxt.atom_mass
        rows.append({"gamma": float(g), "l1": moved, "margin": tol - moved})
    return VerificationReport.from_rows("stationarity", rows, 0.0, {"tol": tol, "n_nodes": config.n_nodes})


# -- tail witness ---------------------------------------------------------------


def _student_W(x, v=3.0):
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    return np.power(1.0 + np.sum(x * x, axis=-1), 0.5 * (v + d))


W_FUNCTIONS = {
    "exp": lambda x: np.exp(np.asarray(x, dtype=float).reshape(len(x), -1)[:, 0]),
    "student": _student_W,
    "exp_potential": lambda x, m=0.5: np.exp(_weibull_potential(np.asarray(x, float).reshape(len(x), -1), m)),
}


def empirical_tail_discrepancy(samples, W_id, r_grid, t, tail=TailLowerBound(1.0, 1.0)):
    """Compare ``C r^-kappa`` with the empirical ``P(W(X_t) >= r)`` across chains.

    Args:
        samples: Either a list of trajectories or an array of draws of
            ``X_t`` (one per chain, leading axis).
        W_id: Key of :data:`W_FUNCTIONS` or a callable.
        t: Time index read from each trajectory.
        tail: Lower bound on the target tail.

    Returns:
        ``(rows, witness)``; ``witness`` is the largest
        ``C r^-kappa - empirical - 3 stderr``, a certified lower bound on
        ``TV(law(X_t), pi)`` when positive.
    """
    if isinstance(samples, (list, tuple)) and samples and hasattr(samples[0], "states"):
        if any(t >= len(tr.states) for tr in samples):
            raise RangeError(f"t={t} beyond trajectory length")
        xs = np.array([tr.states[t] for tr in samples])
    else:
        xs = np.asarray(samples)
    W = W_FUNCTIONS[W_id] if isinstance(W_id, str) else W_id
    w = W(xs)
    n = len(w)
    rows = []
    for r in r_grid:
        emp = float(np.mean(w >= r))
        se = math.sqrt(emp * (1 - emp) / n)
        lb = float(tail(r))
        rows.append({"r": float(r), "tail_lb": lb, "empirical": emp, "stderr": se, "witness": lb - emp - 3 * se})
    witness = max(r["witness"] for r in rows)
    return rows, witness
