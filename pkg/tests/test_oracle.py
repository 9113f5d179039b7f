import json
import math

import numpy as np
import pytest
from scipy import integrate

from subgeo import DomainError, RangeError
from subgeo.bounds import GrowthCertificate, mhi_constants, mhi_lower_bound
from subgeo.oracle import (
    GridConfig,
    discretized_target,
    empirical_tail_discrepancy,
    exact_tv_to_pi,
    marginal_at,
    measure_diminishing,
    mhi_growth_lhs,
    mhi_growth_lhs_quad,
    mhi_transition_apply,
    mhi_transition_tv,
    point_mass,
    tv_trace,
    verify_drift_and_contraction,
    verify_growth,
    verify_stationarity,
)
from subgeo.rates import ConstantRate
from subgeo.samplers import FixedPlan, IndependenceMH, SchedulePlan, mhi_accept_prob, run_adaptive, simulate_marginal

SMALL = GridConfig(x_max=12.0, n_nodes=241)


def _dense_step(mu, gamma):
    """O(n^2) reference: explicit kernel matrix with the inner integral split at each node."""
    y, w, f = mu.grid, mu.weights, mu.density
    n = y.size
    h = y[1] - y[0]
    K = np.zeros((n, n))
    for j in range(n):
        # trapezoid on [0, y_j] with a = 1 and on [y_j, x_max] with a = e^{(gamma-1)(y_j - x)}
        left = np.zeros(n)
        if j > 0:
            left[: j + 1] = h
            left[0] = left[j] = h / 2
        right = np.zeros(n)
        if j < n - 1:
            right[j:] = h
            right[j] = right[-1] = h / 2
            right[j:] *= np.exp((gamma - 1) * (y[j] - y[j:]))
        K[j] = left + right
    p = gamma * np.exp(-gamma * y)
    accepted = p * (K @ f)
    A = (w * p) @ K
    reject = 1 - A / w
    return accepted + reject * f


class TestTransition:
    def test_first_step_from_origin(self):
        mu = mhi_transition_apply(point_mass(0.0), 4.0)
        y = mu.grid
        assert mu.atom_mass == 0.0
        np.testing.assert_allclose(mu.density, 4 * np.exp(-4 * y), rtol=1e-5, atol=1e-12)

    def test_matches_dense_reference(self):
        rng = np.random.default_rng(0)
        mu = point_mass(0.0, SMALL)
        mu.density = rng.uniform(0, 1, SMALL.n_nodes) * np.exp(-SMALL.nodes())
        mu.density /= mu.weights @ mu.density
        mu.atom_mass = 0.0
        for g in (1.3, 3.0, 4.7):
            out = mhi_transition_apply(mu, g)
            np.testing.assert_allclose(out.density, _dense_step(mu, g), rtol=1e-11, atol=1e-14)

    def test_mass_conservation_100_steps(self):
        mu = point_mass(0.0)
        for _ in range(100):
            mu = mhi_transition_apply(mu, 4.0)
        assert abs(mu.total_mass() - 1) <= 1e-7

    def test_mass_conservation_1000_steps(self):
        plan = SchedulePlan.alternating(3.1, 4.9)
        mu = marginal_at(plan, 1000)
        assert abs(mu.total_mass() - 1) <= 1e-6

    def test_atom_product(self):
        x0 = 0.8
        fixed = marginal_at(lambda t: 4.0, 5, SMALL, x0=x0)
        assert fixed.atom_mass == pytest.approx((1 - mhi_accept_prob(x0, 4.0)) ** 5, rel=1e-14)
        alt = marginal_at(SchedulePlan.alternating(3.5, 4.5), 2, SMALL, x0=x0)
        expect = (1 - mhi_accept_prob(x0, 3.5)) * (1 - mhi_accept_prob(x0, 4.5))
        assert alt.atom_mass == pytest.approx(expect, rel=1e-14)
        assert marginal_at(lambda t: 4.0, 3).atom_mass == 0.0

    def test_zero_steps(self):
        mu = marginal_at([], 0, SMALL, x0=1.5)
        assert mu.atom_mass == 1.0 and mu.x0 == 1.5

    def test_start_outside_grid(self):
        with pytest.raises(RangeError):
            point_mass(30.0)

    def test_matches_monte_carlo_cdf(self):
        fam = IndependenceMH(3, 5)
        plan = SchedulePlan.alternating(3.5, 4.5)
        t = 10
        mu = marginal_at(plan, t, x0=0.5)
        draws = simulate_marginal(fam, plan.values(t), 0.5, 200_000, seed=3)
        pts = np.array([0.1, 0.5, 1.0, 2.0, 4.0])
        cdf = np.interp(pts, mu.grid, integrate.cumulative_trapezoid(mu.density, mu.grid, initial=0))
        cdf = cdf + mu.atom_mass * (pts >= 0.5)
        emp = np.array([(draws <= p).mean() for p in pts])
        se = np.sqrt(cdf * (1 - cdf) / draws.size)
        assert np.all(np.abs(cdf - emp) <= 4 * se + 1e-5)


class TestTotalVariation:
    def test_point_mass(self):
        assert exact_tv_to_pi(point_mass(0.0)) == 1.0

    def test_target(self):
        assert exact_tv_to_pi(discretized_target(normalize=False)) <= 1e-6
        assert exact_tv_to_pi(discretized_target()) <= 1e-6

    @pytest.mark.parametrize("plan", [FixedPlan(4.0), SchedulePlan.alternating(3.5, 4.5)], ids=["fixed", "alt"])
    def test_dominates_lower_bound(self, plan):
        tv = tv_trace(lambda t: plan.next(t, None, None, None), 200)
        lb = np.array([mhi_lower_bound(3, 5, 0, t) for t in range(201)])
        assert np.all(tv[1:] >= lb[1:])

    def test_stationarity(self):
        rep = verify_stationarity([3.0, 4.0, 5.0])
        assert rep.passed and all(r["l1"] <= 1e-6 for r in rep.rows)


class TestGrowth:
    def test_closed_form_example(self):
        assert mhi_growth_lhs(0.0, 4.0, 3.0) == pytest.approx(3.0, rel=1e-14)
        assert mhi_growth_lhs_quad(0.0, 4.0, 3.0) == pytest.approx(3.0, rel=1e-10)

    def test_far_field_sign(self):
        x = 40.0
        lhs = mhi_growth_lhs(x, 4.0, 3.0)
        assert lhs < 0
        assert lhs == pytest.approx(-4.0 * math.exp((1 + 3 - 4) * x), rel=1e-6)

    @pytest.mark.parametrize("gamma,alpha", [(4.0, 3.0), (5.0, 3.0), (1.35, 0.99), (2.5, 1.3)])
    def test_closed_form_matches_quadrature(self, gamma, alpha):
        for x in np.linspace(0, 50, 26):
            c = mhi_growth_lhs(x, gamma, alpha)
            assert mhi_growth_lhs_quad(x, gamma, alpha) == pytest.approx(c, rel=1e-8, abs=1e-8)

    def test_direct_integral(self):
        # independent route: integrate the kernel against W^alpha without the substitution
        x, g, a = 1.3, 4.0, 3.0
        f = lambda y: g * math.exp(min(0.0, (g - 1) * (y - x))) * (math.exp((a - g) * y) - math.exp(a * x - g * y))
        val = integrate.quad(f, 0, x)[0] + integrate.quad(f, x, np.inf)[0]
        assert mhi_growth_lhs(x, g, a) == pytest.approx(val, rel=1e-9)

    def test_margin_interior(self):
        _, c = mhi_constants(3, 5)
        cert = GrowthCertificate(ConstantRate(c), 3.0, 1.0)
        rep = verify_growth(IndependenceMH(3, 5), cert, np.linspace(0, 50, 200), [4.0])
        assert rep.passed
        assert rep.rows[0]["margin"] == pytest.approx(3.5, rel=1e-12)

    def test_boundary_gamma_infinite(self):
        _, c = mhi_constants(3, 5)
        cert = GrowthCertificate(ConstantRate(c), 3.0, 1.0)
        rep = verify_growth(IndependenceMH(3, 5), cert, [0.0, 1.0], [3.0])
        assert not rep.passed and rep.worst_margin == -math.inf

    def test_report_serializes(self):
        _, c = mhi_constants(3, 5)
        rep = verify_growth(IndependenceMH(3, 5), GrowthCertificate(ConstantRate(c), 3.0), [0.0, 1.0], [3.0, 4.0])
        body = json.loads(rep.to_json())
        assert body["condition"] == "growth" and body["worst_margin"] == "-inf"
        assert rep.to_csv().splitlines()[0].split(",")[0] == "gamma"


class TestDriftContraction:
    def test_mhi_drift_and_minorization(self):
        drift, contraction = verify_drift_and_contraction(
            IndependenceMH(1.2, 1.5), np.linspace(0, 50, 200), [1.2, 1.35, 1.5], eps=0.01
        )
        assert drift.passed and contraction.passed
        assert contraction.constants["alpha"] == pytest.approx(0.3133, abs=1e-4)

    def test_transition_tv_closed_vs_quad(self):
        for x, y in [(0.0, 1.0), (0.4, 2.2), (3.0, 0.5)]:
            for g in (1.2, 1.5, 4.0):
                assert mhi_transition_tv(x, y, g) == pytest.approx(mhi_transition_tv(x, y, g, quad=True), abs=1e-10)

    def test_identical_states(self):
        assert mhi_transition_tv(1.7, 1.7, 1.3) == 0.0


class TestDiminishing:
    FAM = IndependenceMH(1.2, 1.5)

    def test_equal_parameters(self):
        assert measure_diminishing(self.FAM, 1.3, 1.3, np.linspace(0, 1, 11))[0] == 0.0

    def test_example(self):
        sup, J = measure_diminishing(self.FAM, 1.3, 1.31, np.linspace(0, 1, 21), radius=1.0)
        assert J == pytest.approx(2 / 1.44 + 1 + 1 / 1.2, rel=1e-14)
        assert 0 < sup <= J * 0.01

    def test_symmetric(self):
        xs = np.linspace(0, 1, 11)
        a = measure_diminishing(self.FAM, 1.25, 1.45, xs)[0]
        b = measure_diminishing(self.FAM, 1.45, 1.25, xs)[0]
        assert a == pytest.approx(b, rel=1e-10)

    def test_out_of_set(self):
        with pytest.raises(DomainError):
            measure_diminishing(self.FAM, 1.1, 1.3, [0.0])


class TestTailDiscrepancy:
    def test_unit_threshold(self):
        trs = run_adaptive(IndependenceMH(3, 5), FixedPlan(4.0), 0.0, 4.0, 5, n_chains=50, seed=0)
        rows, _ = empirical_tail_discrepancy(trs, "exp", [1.0], 5)
        assert rows[0]["tail_lb"] == 1.0 and rows[0]["empirical"] == 1.0 and rows[0]["witness"] == 0.0

    def test_exact_target_tail(self):
        rng = np.random.default_rng(0)
        x = rng.exponential(size=400_000)
        rows, _ = empirical_tail_discrepancy(x, "exp", [2.0, 10.0], 0)
        for r in rows:
            assert abs(r["empirical"] - 1 / r["r"]) <= 4 * r["stderr"]

    def test_witness_against_bound(self):
        fam = IndependenceMH(3, 5)
        draws = simulate_marginal(fam, [4.0] * 100, 0.0, 100_000, seed=5)
        rows, witness = empirical_tail_discrepancy(draws, "exp", np.geomspace(1.5, 500, 40), 100)
        se = max(r["stderr"] for r in rows)
        assert witness >= mhi_lower_bound(3, 5, 0, 100) - 3 * se

    def test_past_end(self):
        trs = run_adaptive(IndependenceMH(3, 5), FixedPlan(4.0), 0.0, 4.0, 5, seed=0)
        with pytest.raises(RangeError):
            empirical_tail_discrepancy(trs, "exp", [2.0], 6)
