import numpy as np
import pytest

from stratref.game import GameInstance, RatePair, Strategy, expected_encoder_distortion
from stratref.instances import aligned_hamming, prosecutor, random_instance, threshold_instance
from stratref.solver import (
    InvalidConfig,
    SolverConfig,
    feasible,
    information_rates,
    rate_sweep,
    solve,
    solve_r1_zero,
    solve_r2_zero,
    solve_zero_rates,
)

HAM = np.array([[0.0, 1.0], [1.0, 0.0]])


class TestFeasible:
    def test_uninformative_always_feasible(self):
        g = aligned_hamming()
        for r in [(0, 0), (0.3, 0), (0, 0.3), (1, 1)]:
            assert feasible(Strategy.uninformative(2, 2, 2), g, r)

    def test_revealing_needs_rate(self):
        g = aligned_hamming()
        assert not feasible(Strategy.from_w2_channel(np.eye(2)), g, (0, 0.5))
        assert feasible(Strategy.from_w2_channel(np.eye(2)), g, (0, 1))

    def test_bsc(self):
        g = aligned_hamming()
        s = Strategy.from_w2_channel([[0.9, 0.1], [0.1, 0.9]], w1_size=2)
        assert feasible(s, g, (0, 0.54))
        assert not feasible(s, g, (0, 0.53))

    def test_refinement_needs_decoder1_rate(self):
        g = aligned_hamming()
        q = np.zeros((2, 2, 1))
        q[0, 0, 0] = q[1, 1, 0] = 1.0
        s = Strategy(q)
        assert not feasible(s, g, (0, 1))
        assert feasible(s, g, (1, 0))

    def test_strict(self):
        g = aligned_hamming()
        s = Strategy.from_w2_channel(np.eye(2))
        assert feasible(s, g, (0, 1)) and not feasible(s, g, (0, 1), strict=True)


class TestZeroRates:
    def test_examples(self):
        assert solve_zero_rates(aligned_hamming()).value == pytest.approx(1.0)
        assert solve_zero_rates(aligned_hamming([0.9, 0.1])).value == pytest.approx(0.2)
        g = GameInstance([0.2, 0.8], np.full((2, 2, 2), 0.35), HAM, HAM)
        assert solve_zero_rates(g).value == pytest.approx(0.35)

    def test_solve_dispatches(self):
        rng = np.random.default_rng(42)
        for _ in range(10):
            g = random_instance(rng, 3, 2, 3)
            assert solve(g, (0, 0)).value == solve_zero_rates(g).value


class TestR2Zero:
    def test_decoder1_only_distortion(self):
        g0 = aligned_hamming()
        g = GameInstance(g0.prior, np.repeat(HAM[:, :, None], 2, axis=2), HAM, HAM)
        assert solve_r2_zero(g, 1.0).value == pytest.approx(0.0, abs=1e-6)

    def test_aligned(self):
        assert solve(aligned_hamming(), (1, 0)).value == pytest.approx(0.5, abs=1e-6)

    def test_d_e_independent_of_v1(self):
        rng = np.random.default_rng(42)
        for _ in range(5):
            g = random_instance(rng, 2, 2, 2)
            d_e = np.repeat(g.d_e[:, :1, :], 2, axis=1)
            g = GameInstance(g.prior, d_e, g.d_1, g.d_2)
            assert solve_r2_zero(g, 0.7).value == pytest.approx(solve_zero_rates(g).value, abs=1e-6)


class TestR1Zero:
    def test_prosecutor(self):
        res = solve_r1_zero(prosecutor(), 1.0)
        assert res.value == pytest.approx(0.4, abs=1e-2)
        assert res.lower_bound <= 0.4 + 1e-6

    def test_aligned_full_rate(self):
        assert solve_r1_zero(aligned_hamming(), 1.0).value == pytest.approx(0.0, abs=1e-6)

    def test_zero_rate(self):
        g = prosecutor()
        assert solve_r1_zero(g, 0.0).value == solve_zero_rates(g).value

    def test_matches_general_route(self):
        rng = np.random.default_rng(42)
        for _ in range(5):
            g = threshold_instance(rng)
            a = solve(g, (0, 0.5)).value
            b = solve_r1_zero(g, 0.5).value
            assert abs(a - b) <= 2e-2


class TestSolve:
    def test_aligned_endpoints(self):
        g = aligned_hamming()
        assert solve(g, (1, 1)).value == pytest.approx(0.0, abs=1e-6)
        assert solve(g, (0, 0)).value == pytest.approx(1.0)

    def test_value_is_attained_by_strategy(self):
        rng = np.random.default_rng(42)
        for _ in range(5):
            g = threshold_instance(rng)
            for r in [(0.25, 0.25), (0.5, 0), (0, 0.5), (1, 0.25)]:
                res = solve(g, r)
                assert abs(res.value - expected_encoder_distortion(g, res.strategy)) <= 1e-10
                assert feasible(res.strategy, g, r)
                assert res.lower_bound <= res.value + 1e-12
                assert res.epsilon_report == pytest.approx(res.value - res.lower_bound)
                i2, i12 = information_rates(g, res.strategy)
                assert res.rates_used == pytest.approx((i2, i12))

    def test_monotone(self):
        rng = np.random.default_rng(7)
        g = threshold_instance(rng)
        vals = [r.value for r in rate_sweep(g, [(x, x) for x in (0, 0.1, 0.3, 0.6, 1.0)])]
        assert all(b <= a + 1e-6 for a, b in zip(vals, vals[1:]))

    def test_search_method_agrees(self):
        g = prosecutor()
        cfg = SolverConfig(method="search", restarts=8, max_iters=300)
        res = solve(g, (0.0, 1.0), cfg)
        exact = solve(g, (0.0, 1.0))
        assert res.method == "search"
        assert res.value >= exact.lower_bound - 1e-9
        assert res.value <= exact.value + 0.1

    def test_optimistic_not_worse(self):
        g = prosecutor()
        pess = solve(g, (0, 1)).value
        opt = solve(g, (0, 1), SolverConfig(optimistic=True)).value
        assert opt <= pess + 1e-9
        assert opt == pytest.approx(0.4, abs=1e-6)

    def test_rejects_negative_rates(self):
        with pytest.raises(ValueError):
            solve(aligned_hamming(), (-1, 0))


class TestSweep:
    def test_endpoints(self):
        vals = [r.value for r in rate_sweep(aligned_hamming(), [(0, 0), (1, 1)])]
        np.testing.assert_allclose(vals, [1.0, 0.0], atol=1e-6)

    def test_single_point(self):
        g = prosecutor()
        assert rate_sweep(g, [RatePair(0, 0)])[0].value == solve_zero_rates(g).value

    def test_empty(self):
        with pytest.raises(ValueError):
            rate_sweep(prosecutor(), [])


class TestConfig:
    @pytest.mark.parametrize("kw", [
        {"restarts": 0},
        {"grid_step": 0.0},
        {"grid_step": 1.5},
        {"boundary_eps": 0.0},
        {"tie_tol": -1.0},
        {"max_iters": 0},
        {"method": "annealing"},
    ])
    def test_invalid(self, kw):
        with pytest.raises(InvalidConfig):
            solve(aligned_hamming(), (0.5, 0.5), SolverConfig(**kw))

    def test_deterministic(self):
        g = threshold_instance(np.random.default_rng(42))
        a, b = solve(g, (0.5, 0.25)), solve(g, (0.5, 0.25))
        assert a.value == b.value
        assert a.strategy == b.strategy
