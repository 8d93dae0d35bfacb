import math

import numpy as np
import pytest

from achlio.kinetics import (
    EnumerationBudgetError,
    GenericKernel,
    KineticsConfig,
    PairKernel,
    er_analytic,
    er_analytic_derivative,
    er_analytic_state,
    initial_state,
    integrate,
    make_rhs,
    ode_susceptibility,
    rhs_er_closed,
)
from achlio.rules import bohman_frieze_table, builtin

ER = builtin("erdos_renyi")


def random_state(rng, K, mass=None, max_support=None):
    """Random valid state: nonnegative, total mass <= 1."""
    support = max_support or K
    rho = np.zeros(K)
    rho[:support] = rng.random(support) ** 3
    rho *= (mass if mass is not None else rng.uniform(0.3, 1.0)) / rho.sum()
    return rho


class TestErClosed:
    def test_monodisperse(self):
        rho = initial_state(5)
        d = rhs_er_closed(rho)
        assert d[0] == pytest.approx(-2.0)
        assert d[1] == pytest.approx(2.0)
        assert np.all(d[2:] == 0.0)

    def test_zero_state(self):
        assert np.all(rhs_er_closed(np.zeros(10)) == 0.0)

    def test_hand_convolution(self):
        rho = np.zeros(5)
        rho[0], rho[1] = 0.5, 0.25
        d = rhs_er_closed(rho)
        # rho_3' = -6 rho_3 + 3 * (2 rho_1 rho_2)
        assert d[2] == pytest.approx(0.75)


class TestErAnalytic:
    def test_k1_is_exponential(self):
        for t in (0.0, 0.1, 0.3):
            assert er_analytic(1, t) == pytest.approx(math.exp(-2 * t))

    def test_k2_hand_value(self):
        assert er_analytic(2, 0.1) == pytest.approx(0.2 * math.exp(-0.4), rel=1e-12)

    def test_pre_gelation_mass(self):
        total = sum(er_analytic(k, 0.25) for k in range(1, 5001))
        assert total == pytest.approx(1.0, abs=1e-8)

    def test_residual_against_closed_system(self):
        K = 400
        for t in np.arange(0.05, 0.401, 0.05):
            rho = er_analytic_state(K, t)
            d = rhs_er_closed(rho)
            for k in range(1, 21):
                assert abs(d[k - 1] - er_analytic_derivative(k, t)) < 1e-8

    def test_bad_args(self):
        with pytest.raises(ValueError):
            er_analytic(0, 0.1)
        with pytest.raises(ValueError):
            er_analytic(1, -0.1)


class TestGenericKernel:
    def test_matches_er_closed(self):
        kern = GenericKernel(ER, K=50, gel_mode="with_gel")
        rng = np.random.default_rng(0)
        for _ in range(20):
            rho = random_state(rng, 50)
            assert np.max(np.abs(kern(rho) - rhs_er_closed(rho))) < 1e-12

    def test_all_mass_in_gel_is_stationary(self):
        kern = GenericKernel(builtin("product"), K=6, gel_mode="with_gel")
        assert np.all(kern(np.zeros(6)) == 0.0)

    def test_budget_guard(self):
        with pytest.raises(EnumerationBudgetError):
            GenericKernel(builtin("product"), K=200)

    def test_monodisperse_er(self):
        kern = GenericKernel(ER, K=5)
        d = kern(initial_state(5))
        assert d[0] == pytest.approx(-2.0)
        assert d[1] == pytest.approx(2.0)


RULES_SMALL = [
    builtin("erdos_renyi"),
    builtin("product"),
    builtin("sum"),
    builtin("bohman_frieze"),
    builtin("bounded_size", B=2, table={k: (1 if k[0] + k[1] <= k[2] + k[3] else 2)
                                        for k in bohman_frieze_table(2)}),
    builtin("dcdgm"),
    builtin("adjacent_edge"),
]


class TestPairKernel:
    @pytest.mark.parametrize("rule", RULES_SMALL, ids=lambda r: r.name)
    @pytest.mark.parametrize("gel_mode", ["with_gel", "no_gel"])
    def test_matches_generic(self, rule, gel_mode):
        K = 12
        fast = PairKernel(rule, K, gel_mode)
        slow = GenericKernel(rule, K, gel_mode)
        rng = np.random.default_rng(17)
        for _ in range(10):
            rho = random_state(rng, K)
            assert np.max(np.abs(fast(rho) - slow(rho))) < 1e-12

    @pytest.mark.parametrize("rule", RULES_SMALL, ids=lambda r: r.name)
    def test_derivative_bound(self, rule):
        K = 30
        kern = PairKernel(rule, K)
        rng = np.random.default_rng(5)
        kvec = np.arange(1, K + 1)
        for _ in range(50):
            d = kern(random_state(rng, K))
            assert np.all(np.abs(d) <= rule.ell * kvec + 1e-12)

    @pytest.mark.parametrize("rule", RULES_SMALL, ids=lambda r: r.name)
    def test_no_gel_mass_conservation(self, rule):
        # supports below K/ell so no created component falls past the cutoff
        K = 40
        kern = PairKernel(rule, K, gel_mode="no_gel")
        rng = np.random.default_rng(9)
        for _ in range(20):
            rho = random_state(rng, K, max_support=K // rule.ell)
            assert abs(kern(rho).sum()) < 1e-12


class TestIntegrate:
    def test_er_isolated_vertex_mass(self):
        cfg = KineticsConfig(rule=ER, K=200, t_end=0.3, grid=np.array([0.0, 0.3]))
        series = integrate(cfg)
        assert series.rho_at(0.3, 1) == pytest.approx(math.exp(-0.6), abs=1e-6)

    def test_t_end_zero_is_initial_condition(self):
        cfg = KineticsConfig(rule=builtin("product"), K=30, t_end=0.0, grid=np.array([0.0]))
        series = integrate(cfg)
        assert np.array_equal(series.rho[0], initial_state(30))

    def test_er_truncated_gelation(self):
        cfg = KineticsConfig(rule=ER, K=1000, t_end=1.0,
                             grid=np.array([0.0, 0.25, 0.45, 1.0]), rtol=1e-6, atol=1e-8)
        series = integrate(cfg)
        mass = series.mass
        assert mass[1] >= 0.999 and mass[2] >= 0.999
        assert mass[3] < 0.8

    def test_rk4_fixed_deterministic(self):
        cfg = KineticsConfig(rule=ER, K=50, t_end=0.2, integrator="rk4_fixed", h=1e-3,
                             grid=np.array([0.0, 0.1, 0.2]))
        a = integrate(cfg)
        b = integrate(cfg)
        assert np.array_equal(a.rho, b.rho)

    def test_projection_is_small(self):
        cfg = KineticsConfig(rule=ER, K=100, t_end=0.4, grid=np.array([0.4]))
        series = integrate(cfg)
        assert series.meta["max_projection"] < 1e-8

    def test_truncation_convergence_order(self):
        # the always-first-pair system is closed from below, so K-doubling
        # only bites for rules whose decisions feed back from the tail
        rule = builtin("product")
        grids = np.array([0.4, 0.8])
        sols = {}
        for K in (100, 200, 400):
            cfg = KineticsConfig(rule=rule, K=K, t_end=0.8, grid=grids,
                                 rtol=1e-9, atol=1e-12)
            sols[K] = integrate(cfg).rho[:, :20]
        d1 = np.max(np.abs(sols[100] - sols[200]))
        d2 = np.max(np.abs(sols[200] - sols[400]))
        assert d2 <= max(d1 / 4.0, 1e-11)

    def test_bad_grid(self):
        with pytest.raises(ValueError):
            KineticsConfig(rule=ER, K=10, t_end=0.1, grid=np.array([0.0, 0.2])).output_grid()


class TestSusceptibility:
    def test_initial_state(self):
        assert ode_susceptibility(initial_state(10)) == 1.0

    def test_zero_state(self):
        assert ode_susceptibility(np.zeros(10)) == 0.0

    def test_er_analytic_branching_identity(self):
        rho = er_analytic_state(2000, 0.25)
        assert ode_susceptibility(rho) == pytest.approx(1.0 / (1.0 - 0.5), abs=5e-3)


def test_make_rhs_dispatch():
    assert isinstance(make_rhs(ER, 10), PairKernel)

    from achlio.rules import RuleSpec, EdgeChoice, PAIR_12
    custom = RuleSpec(name="custom", ell=2,
                      decide=lambda s, p: [EdgeChoice(PAIR_12, 1.0)], g=lambda s: s)
    assert isinstance(make_rhs(custom, 10), GenericKernel)
