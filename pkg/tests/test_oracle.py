import numpy as np
import pytest

from stratref.game import RatePair, Strategy, expected_encoder_distortion
from stratref.instances import aligned_hamming, prosecutor, random_instance, threshold_instance
from stratref.oracle import (
    InstanceTooLarge,
    brute_force_game_value,
    grid_oracle_dstar,
    message_counts,
)
from stratref.solver import feasible, solve, solve_zero_rates


class TestGridOracle:
    def test_aligned_full_rate(self):
        assert grid_oracle_dstar(aligned_hamming(), (1, 1), 0.1).value == pytest.approx(0.0, abs=1e-12)

    def test_zero_rates_exact(self):
        rng = np.random.default_rng(42)
        for _ in range(5):
            g = random_instance(rng, 2, 2, 2)
            assert grid_oracle_dstar(g, (0, 0), 0.1).value == solve_zero_rates(g).value

    def test_prosecutor(self):
        res = grid_oracle_dstar(prosecutor(), (0, 1), 0.01)
        assert res.value == pytest.approx(0.4, abs=0.02)
        assert res.slack == pytest.approx(0.01)

    def test_aligned_decoder1_only(self):
        assert grid_oracle_dstar(aligned_hamming(), (1, 0), 0.05).value == pytest.approx(0.5, abs=1e-9)

    def test_nested_resolutions_monotone(self):
        rng = np.random.default_rng(42)
        g = threshold_instance(rng)
        for r in [(0.25, 0.25), (0, 0.5), (0.5, 0)]:
            coarse = grid_oracle_dstar(g, r, 0.1).value
            fine = grid_oracle_dstar(g, r, 0.05).value
            assert fine <= coarse + 1e-12

    def test_argmin_is_feasible_and_attains_value(self):
        rng = np.random.default_rng(3)
        g = threshold_instance(rng)
        r = RatePair(0.25, 0.5)
        res = grid_oracle_dstar(g, r, 0.05)
        q = np.asarray(res.argmin_description["q"])
        s = Strategy(q)
        assert feasible(s, g, r)
        assert expected_encoder_distortion(g, s) == pytest.approx(res.value, abs=1e-9)

    def test_three_symbol_instances(self):
        rng = np.random.default_rng(42)
        g = random_instance(rng, 3, 2, 2)
        res = grid_oracle_dstar(g, (0, 0), 0.25)
        assert res.value == pytest.approx(solve_zero_rates(g).value, abs=1e-12)

    def test_bad_resolution(self):
        with pytest.raises(ValueError):
            grid_oracle_dstar(prosecutor(), (0, 1), 0.3)
        with pytest.raises(ValueError):
            grid_oracle_dstar(prosecutor(), (0, 1), 0.03)

    def test_too_large(self):
        g = random_instance(np.random.default_rng(0), 4, 2, 2)
        with pytest.raises(InstanceTooLarge):
            grid_oracle_dstar(g, (0.5, 0.5), 0.25)

    def test_agrees_with_solver(self):
        rng = np.random.default_rng(11)
        g = threshold_instance(rng)
        for r in [(0.25, 0.25), (0.5, 1.0), (0, 0.25), (1.0, 0)]:
            assert abs(solve(g, r).value - grid_oracle_dstar(g, r, 0.02).value) <= 0.02 * g.d_norm


class TestBruteForce:
    def test_message_counts(self):
        assert message_counts(RatePair(0.5, 0.5), 2) == (2, 2)
        assert message_counts(RatePair(0.5, 1.0), 1) == (1, 2)
        assert message_counts(RatePair(0.0, 0.0), 5) == (1, 1)

    def test_zero_rates(self):
        rng = np.random.default_rng(42)
        for _ in range(3):
            g = random_instance(rng, 2, 3, 2)
            for n in (1, 2):
                assert brute_force_game_value(g, (0, 0), n).value == pytest.approx(solve_zero_rates(g).value,
                                                                                  abs=1e-12)

    def test_identity_encoding(self):
        assert brute_force_game_value(aligned_hamming(), (1, 1), 1).value == pytest.approx(0.0, abs=1e-12)

    def test_subadditive_on_aligned(self):
        g = aligned_hamming()
        d1 = brute_force_game_value(g, (0.5, 0.5), 1)
        d2 = brute_force_game_value(g, (0.5, 0.5), 2)
        assert d1.value == pytest.approx(1.0)
        assert d2.value <= d1.value + 1e-12
        assert d2.value == pytest.approx(0.25, abs=1e-12)

    def test_above_single_letter(self):
        rng = np.random.default_rng(5)
        g = threshold_instance(rng)
        for r in [(0.5, 0.5), (1, 0.5)]:
            dstar = grid_oracle_dstar(g, r, 0.02)
            for n in (1, 2):
                assert brute_force_game_value(g, r, n).value >= dstar.value - dstar.slack - 1e-6

    def test_bad_n(self):
        with pytest.raises(ValueError):
            brute_force_game_value(aligned_hamming(), (1, 1), 3)
