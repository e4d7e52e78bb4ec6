import numpy as np
import pytest

from stratref.blocksim import (
    BlockTooLongForExact,
    Codebook,
    CodebookTooLarge,
    EncodingTable,
    NotInQ0Tilde,
    SimConfig,
    all_sequences,
    code_rates,
    distortion_gap_bound,
    encode,
    encoding_table,
    exact_posteriors,
    generate_codebook,
    run_monte_carlo,
    run_trial,
    sequence_index,
)
from stratref.game import Strategy, worst_pair
from stratref.instances import aligned_hamming, prosecutor, random_instance
from stratref.prob import is_typical

BSC01 = [[0.9, 0.1], [0.1, 0.9]]


def bsc(p, w1_size=1):
    return Strategy.from_w2_channel([[1 - p, p], [p, 1 - p]], w1_size=w1_size)


def hand_codebook(n, k1, k2, prior):
    """Placeholder codebook for tests that supply their own encoding table."""
    u = len(prior)
    ref = np.full((u, 1, 1), 1.0) * np.asarray(prior)[:, None, None]
    return Codebook(n, np.zeros((k2, n), dtype=int), np.zeros((k2, k1, n), dtype=int), 0, ref, (0.0, 0.0))


def hand_table(prior, n, m1, m2):
    seqs = all_sequences(len(prior), n)
    m1, m2 = np.asarray(m1), np.asarray(m2)
    err = np.zeros(seqs.shape[0], dtype=bool)
    return EncodingTable(m1, m2, err, err, np.prod(np.asarray(prior)[seqs], axis=1))


class TestCodebook:
    def test_uninformative_zero_eta(self):
        g = aligned_hamming()
        cb = generate_codebook(g, Strategy.uninformative(2), SimConfig(n=1, eta=0.0))
        assert (cb.m1_count, cb.m2_count) == (1, 1)
        assert cb.w2_words.shape == (1, 1)

    def test_bsc_size(self):
        g = aligned_hamming()
        s = bsc(0.1)
        r1, r2 = code_rates(g, s, 0.1)
        assert r2 == pytest.approx(0.631004, abs=1e-6)
        cb = generate_codebook(g, s, SimConfig(n=12, eta=0.1))
        assert cb.m2_count == 128
        assert cb.m1_count == 2

    def test_seeded(self):
        g = random_instance(np.random.default_rng(42), 2, 2, 2)
        s = Strategy(np.random.default_rng(1).dirichlet(np.ones(4), size=2).reshape(2, 2, 2))
        cfg = SimConfig(n=8)
        a, b = generate_codebook(g, s, cfg, seed=5), generate_codebook(g, s, cfg, seed=5)
        np.testing.assert_array_equal(a.w2_words, b.w2_words)
        np.testing.assert_array_equal(a.w1_words, b.w1_words)
        c = generate_codebook(g, s, cfg, seed=6)
        assert not np.array_equal(a.w1_words, c.w1_words)

    def test_w1_words_follow_conditional(self):
        g = aligned_hamming()
        q = np.zeros((2, 2, 2))
        q[0, 0, 0] = q[1, 1, 1] = 1.0  # w1 = w2 = u
        cb = generate_codebook(g, Strategy(q), SimConfig(n=6, eta=0.5))
        np.testing.assert_array_equal(cb.w1_words, np.broadcast_to(cb.w2_words[:, None, :], cb.w1_words.shape))

    def test_too_large(self):
        g = aligned_hamming()
        with pytest.raises(CodebookTooLarge):
            generate_codebook(g, bsc(0.0), SimConfig(n=16, eta=1.0, max_codebook_symbols=1000))


class TestEncode:
    def test_everything_typical(self):
        g = aligned_hamming()
        cb = generate_codebook(g, Strategy.uninformative(2), SimConfig(n=1, eta=0.0))
        assert encode([1], cb, 2.0) == (0, 0, False)

    def test_impossible_type(self):
        g = aligned_hamming([1.0, 0.0])
        cb = generate_codebook(g, Strategy.uninformative(2), SimConfig(n=4, eta=0.0))
        assert encode([1, 1, 0, 1], cb, 0.5) == (0, 0, True)

    def test_revealing_recheck(self):
        g = aligned_hamming()
        s = Strategy.from_w2_channel(np.eye(2))
        cb = generate_codebook(g, s, SimConfig(n=8, eta=0.2), seed=3)
        rng = np.random.default_rng(42)
        found = 0
        for _ in range(30):
            u = rng.integers(0, 2, size=8)
            m1, m2, err = encode(u, cb, 0.3)
            typical_any = any(is_typical((u, cb.w1_words[b, a], cb.w2_words[b]), cb.ref_joint, 0.3)
                              for b in range(cb.m2_count) for a in range(cb.m1_count))
            assert err == (not typical_any)
            if not err:
                found += 1
                assert is_typical((u, cb.w1_words[m2, m1], cb.w2_words[m2]), cb.ref_joint, 0.3)
                earlier = [(b, a) for b in range(m2 + 1) for a in range(cb.m1_count) if (b, a) < (m2, m1)]
                assert not any(is_typical((u, cb.w1_words[b, a], cb.w2_words[b]), cb.ref_joint, 0.3)
                               for b, a in earlier)
        assert found > 0

    def test_table_matches_encode(self):
        rng = np.random.default_rng(42)
        g = random_instance(rng, 3, 2, 2)
        s = Strategy(rng.dirichlet(np.ones(4), size=3).reshape(3, 2, 2))
        cfg = SimConfig(n=5, eta=0.3, delta=0.5)
        cb = generate_codebook(g, s, cfg, seed=1)
        table = encoding_table(cb, g.prior, cfg.delta, cfg)
        seqs = all_sequences(3, 5)
        for i in rng.choice(seqs.shape[0], size=40, replace=False):
            m1, m2, err = encode(seqs[i], cb, cfg.delta)
            assert (int(table.m1[i]), int(table.m2[i]), bool(table.error[i])) == (m1, m2, err)
            assert sequence_index(seqs[i], 3) == i

    def test_wrong_length(self):
        g = aligned_hamming()
        cb = generate_codebook(g, Strategy.uninformative(2), SimConfig(n=3, eta=0.0))
        with pytest.raises(ValueError):
            encode([0, 1], cb, 0.5)


class TestPosteriors:
    def test_singleton_messages(self):
        prior = [0.3, 0.7]
        cb = hand_codebook(1, 1, 1, prior)
        table = hand_table(prior, 1, [0, 0], [0, 0])
        p12, p2 = exact_posteriors(cb, prior, table, 0, 0)
        np.testing.assert_allclose(p12, [prior])
        np.testing.assert_allclose(p2, [prior])

    def test_identity_encoding(self):
        prior = [0.5, 0.5]
        cb = hand_codebook(1, 1, 2, prior)
        table = hand_table(prior, 1, [0, 0], [0, 1])
        np.testing.assert_allclose(exact_posteriors(cb, prior, table, 0, 0)[1], [[1.0, 0.0]])
        np.testing.assert_allclose(exact_posteriors(cb, prior, table, 0, 1)[1], [[0.0, 1.0]])

    def test_equality_indicator(self):
        prior = [0.5, 0.5]
        cb = hand_codebook(2, 1, 2, prior)
        # sequences 00, 01, 10, 11 -> m2 = 1{u1 = u2}
        table = hand_table(prior, 2, [0, 0, 0, 0], [1, 0, 0, 1])
        _, p2 = exact_posteriors(cb, prior, table, 0, 1)
        np.testing.assert_allclose(p2, [[0.5, 0.5], [0.5, 0.5]])

    def test_tower_identity(self):
        rng = np.random.default_rng(42)
        g = aligned_hamming([0.4, 0.6])
        s = Strategy(rng.dirichlet(np.ones(4), size=2).reshape(2, 2, 2))
        cfg = SimConfig(n=8, eta=0.4, delta=0.5)
        cb = generate_codebook(g, s, cfg, seed=2)
        table = encoding_table(cb, g.prior, cfg.delta, cfg)
        for m2 in np.unique(table.m2[table.seq_prob > 0])[:4]:
            sel = table.m2 == m2
            total = table.seq_prob[sel].sum()
            acc = np.zeros((8, 2))
            p2 = None
            for m1 in np.unique(table.m1[sel]):
                mass = table.seq_prob[sel & (table.m1 == m1)].sum()
                p12, p2 = exact_posteriors(cb, g.prior, table, int(m1), int(m2))
                np.testing.assert_allclose(p12.sum(axis=1), 1.0, atol=1e-12)
                acc += mass / total * p12
            np.testing.assert_allclose(acc, p2, atol=1e-10)

    def test_block_cap(self):
        g = aligned_hamming()
        with pytest.raises(BlockTooLongForExact):
            run_monte_carlo(g, Strategy.uninformative(2), SimConfig(n=17, trials=1))


class TestTrials:
    def test_singleton_messages_reproduce_zero_rate_actions(self):
        rng = np.random.default_rng(42)
        for _ in range(5):
            g = random_instance(rng, 2, 3, 2)
            s = Strategy.uninformative(2)
            v1, v2, _ = worst_pair(g.prior, g.prior, g)
            rep = run_monte_carlo(g, s, SimConfig(n=1, eta=0.0, delta=2.0, trials=20, seed=3))
            for rec in rep.records:
                assert rec.d_e_emp == g.d_e[rec.u_seq[0], v1, v2]
                assert rec.kl_avg_d1 == 0.0

    def test_revealing_without_error_is_exact(self):
        g = aligned_hamming()
        s = Strategy.from_w2_channel(np.eye(2))
        rep = run_monte_carlo(g, s, SimConfig(n=4, eta=0.2, delta=0.2, trials=40, seed=1))
        clean = [r for r in rep.records if not r.encoder_error]
        assert clean
        assert all(r.d_e_emp == 0.0 for r in clean)

    def test_deterministic(self):
        g = prosecutor()
        s = bsc(0.3)
        cfg = SimConfig(n=6, trials=5, seed=9)
        a, b = run_monte_carlo(g, s, cfg), run_monte_carlo(g, s, cfg)
        for ra, rb in zip(a.records, b.records):
            np.testing.assert_array_equal(ra.u_seq, rb.u_seq)
            np.testing.assert_array_equal(ra.v2_seq, rb.v2_seq)
            assert (ra.m1, ra.m2, ra.d_e_emp, ra.kl_avg_d1) == (rb.m1, rb.m2, rb.d_e_emp, rb.kl_avg_d1)

    def test_fixed_codebook_shares_table(self):
        g = aligned_hamming()
        s = bsc(0.2)
        cfg = SimConfig(n=6, trials=4, seed=0, fixed_codebook=True)
        cb = generate_codebook(g, s, cfg)
        table = encoding_table(cb, g.prior, cfg.delta, cfg)
        rec = run_trial(g, s, cb, cfg, np.random.default_rng(0), table=table)
        assert rec.n == 6 and 0 <= rec.m2 < cb.m2_count


class TestMonteCarlo:
    def test_wide_delta_never_errs(self):
        rep = run_monte_carlo(aligned_hamming(), bsc(0.2), SimConfig(n=6, delta=2.0, trials=30))
        assert rep.error_rate == 0.0

    def test_large_eta_low_error(self):
        # delta = 0.5 keeps the source's own atypicality rare at n = 12.
        rep = run_monte_carlo(aligned_hamming(), bsc(0.3), SimConfig(n=12, eta=0.5, delta=0.5, trials=100))
        assert rep.error_rate < 0.1

    def test_kl_bound(self):
        rep = run_monte_carlo(aligned_hamming(), bsc(0.2), SimConfig(n=10, trials=60, seed=4))
        mean, se = rep.stat("kl_avg_d1", no_error=True)
        assert mean <= rep.kl_bound + 3 * se

    def test_f1_rate_not_increasing_in_eta(self):
        g = aligned_hamming()
        lo = run_monte_carlo(g, bsc(0.2), SimConfig(n=10, eta=0.0, trials=60, seed=2)).f1_rate
        hi = run_monte_carlo(g, bsc(0.2), SimConfig(n=10, eta=0.6, trials=60, seed=2)).f1_rate
        assert hi <= lo + 3 * np.sqrt(0.25 / 60)


class TestGapBound:
    def test_uninformative_n1(self):
        g = aligned_hamming([0.8, 0.2])
        s = Strategy.uninformative(2)
        rep = run_monte_carlo(g, s, SimConfig(n=1, eta=0.0, delta=2.0, trials=1))
        gap, bound = distortion_gap_bound(rep, s, g, 0.0, 0.0, 2.0)
        assert bound == pytest.approx(2 * g.d_norm)
        rep_many = run_monte_carlo(g, s, SimConfig(n=1, eta=0.0, delta=2.0, trials=200, seed=1))
        gap, bound = distortion_gap_bound(rep_many, s, g, 0.3, 0.2, 0.25)
        assert bound >= 0
        mean, se = rep_many.stat("d_e_emp")
        assert gap <= 3 * se + 1e-12

    def test_requires_singleton_worst_pairs(self):
        g = aligned_hamming()
        s = Strategy.uninformative(2)
        rep = run_monte_carlo(g, s, SimConfig(n=2, trials=2))
        with pytest.raises(NotInQ0Tilde):
            distortion_gap_bound(rep, s, g, 0.3, 0.2, 0.25)

    @pytest.mark.parametrize("seed", [0, 1])
    def test_generic_instance(self, seed):
        g = aligned_hamming([0.35, 0.65])
        s = bsc(0.2)
        rep = run_monte_carlo(g, s, SimConfig(n=12, alpha=0.3, gamma=0.2, delta=0.2, trials=40, seed=seed))
        gap, bound = distortion_gap_bound(rep, s, g, 0.3, 0.2, 0.2)
        assert gap <= bound + 3 * rep.stat("d_e_emp")[1]
