"""Monte Carlo simulation of the n-block successive-refinement scheme.

Each trial draws a random codebook (w2 words i.i.d. from the W2 marginal of
the target strategy, w1 words conditionally i.i.d. given their w2 word),
draws a source block, and encodes it with the first codeword pair in
(m2, m1) order that is jointly typical with it. Decoders know the codebook
and the encoding map, so their beliefs are the exact Bayes posteriors given
the messages; these are computed by enumerating every source block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .game import (
    DEFAULT_TIE_TOL,
    GameInstance,
    Strategy,
    expected_encoder_distortion,
    singleton_worst_pairs,
    split_from_strategy,
)
from .prob import kl_divergence
from .solver import information_rates

MAX_EXACT_SEQUENCES = 2 ** 20


class CodebookTooLarge(ValueError):
    """Raised when the codebook would exceed the configured symbol budget."""


class BlockTooLongForExact(ValueError):
    """Raised when exact posteriors would need too many source blocks."""


class ZeroProbabilityMessage(ValueError):
    """Raised when no source block maps to the requested messages."""


class NotInQ0Tilde(ValueError):
    """Raised when a strategy has ties among the encoder-worst action pairs."""


@dataclass(frozen=True)
class SimConfig:
    n: int = 12
    delta: float = 0.25
    eta: float = 0.2
    alpha: float = 0.3
    gamma: float = 0.2
    trials: int = 200
    seed: int = 0
    exact_posterior_max_n: int = 16
    tie_tol: float = DEFAULT_TIE_TOL
    max_codebook_symbols: int = 2 ** 24
    fixed_codebook: bool = False

    def validate(self) -> "SimConfig":
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if self.eta < 0:
            raise ValueError("eta must be nonnegative")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.alpha < 0 or self.gamma < 0:
            raise ValueError("alpha and gamma must be nonnegative")
        return self


@dataclass(frozen=True, eq=False)
class Codebook:
    """w2_words[m2, t] and w1_words[m2, m1, t], with the reference joint law."""

    n: int
    w2_words: np.ndarray
    w1_words: np.ndarray
    seed: int
    ref_joint: np.ndarray
    rates: tuple[float, float]

    @property
    def m1_count(self) -> int:
        return self.w1_words.shape[1]

    @property
    def m2_count(self) -> int:
        return self.w2_words.shape[0]


@dataclass
class TrialRecord:
    trial: int
    n: int
    u_seq: np.ndarray
    m1: int
    m2: int
    encoder_error: bool
    f1_error: bool
    d2_error: bool
    v1_seq: np.ndarray
    v2_seq: np.ndarray
    d_e_emp: float
    d_1_emp: float
    d_2_emp: float
    kl_avg_d1: float
    kl_avg_d2: float
    typical_fraction: float
    w_type_dev: float
    kl_t_d1: np.ndarray = field(repr=False)
    kl_t_d2: np.ndarray = field(repr=False)

    def in_b(self, alpha: float, gamma: float, delta: float) -> bool:
        """Membership in the good set: most positions have controlled beliefs and the codeword type is close."""
        return (_typical_fraction(self.kl_t_d1, self.kl_t_d2, alpha) >= 1 - gamma
                and self.w_type_dev <= delta + 1e-12)


def _typical_fraction(kl1: np.ndarray, kl2: np.ndarray, alpha: float) -> float:
    thr = alpha ** 2 / (2 * math.log(2))
    return float(np.mean(np.maximum(kl1, kl2) <= thr))


def code_rates(g: GameInstance, s: Strategy, eta: float) -> tuple[float, float]:
    """(R1, R2) = (I(U;W1|W2) + eta, I(U;W2) + eta)."""
    i2, i12 = information_rates(g, s)
    return max(0.0, i12 - i2) + eta, i2 + eta


def generate_codebook(g: GameInstance, s: Strategy, cfg: SimConfig, seed: int | None = None) -> Codebook:
    cfg.validate()
    seed = cfg.seed if seed is None else seed
    r1, r2 = code_rates(g, s, cfg.eta)
    k1 = 2 ** math.floor(cfg.n * r1 + 1e-9)
    k2 = 2 ** math.floor(cfg.n * r2 + 1e-9)
    if k1 * k2 * cfg.n > cfg.max_codebook_symbols:
        raise CodebookTooLarge(f"{k1}x{k2} codewords of length {cfg.n} exceed the symbol budget")
    joint = s.joint(g.prior)
    p_w1w2 = joint.sum(axis=0)
    p_w2 = p_w1w2.sum(axis=0)
    cond = np.where(p_w2 > 0, p_w1w2 / np.where(p_w2 > 0, p_w2, 1.0), 1.0 / s.w1_size)
    rng = np.random.default_rng(seed)
    w2_words = rng.choice(s.w2_size, size=(k2, cfg.n), p=p_w2 / p_w2.sum())
    cdf = np.cumsum(cond, axis=0).T
    cdf[:, -1] = 1.0
    draws = rng.random((k2, k1, cfg.n))
    w1_words = (draws[..., None] >= cdf[w2_words][:, None, :, :]).sum(axis=-1)
    w1_words = np.minimum(w1_words, s.w1_size - 1)
    for arr in (w2_words, w1_words):
        arr.setflags(write=False)
    ref = np.array(joint)
    ref.setflags(write=False)
    return Codebook(cfg.n, w2_words, w1_words, int(seed), ref, (r1, r2))


@lru_cache(maxsize=8)
def all_sequences(u_size: int, n: int) -> np.ndarray:
    """Every source block in lexicographic order, shape (|U|^n, n)."""
    if u_size ** n > MAX_EXACT_SEQUENCES:
        raise BlockTooLongForExact(f"{u_size}^{n} source blocks exceed {MAX_EXACT_SEQUENCES}")
    idx = np.arange(u_size ** n)
    powers = u_size ** np.arange(n - 1, -1, -1)
    seqs = (idx[:, None] // powers[None, :]) % u_size
    seqs.setflags(write=False)
    return seqs


def sequence_index(u_seq, u_size: int) -> int:
    out = 0
    for x in np.asarray(u_seq, dtype=int):
        out = out * u_size + int(x)
    return out


def _first_typical(seqs: np.ndarray, cb: Codebook, delta: float, chunk: int = 2048, pair_chunk: int = 32):
    """For each source block: index m2 * K1 + m1 of the first typical pair, -1 if none.

    Also returns whether any w2 word alone is typical with the block. Blocks
    whose own type is already farther than delta from P_U are skipped, since
    marginalising cannot increase the L1 distance.
    """
    u_size, w1_size, w2_size = cb.ref_joint.shape
    n, k1, k2 = cb.n, cb.m1_count, cb.m2_count
    thr = delta * n + 1e-9
    eye_u = np.eye(u_size)
    first = np.full(seqs.shape[0], -1, dtype=np.int64)
    any_w2 = np.zeros(seqs.shape[0], dtype=bool)
    u_counts = eye_u[seqs].sum(axis=1)
    live = np.flatnonzero(np.abs(u_counts - cb.ref_joint.sum(axis=(1, 2)) * n).sum(axis=1) <= thr)
    if live.size == 0:
        return first, any_w2

    # Identical codeword pairs behave identically; keep the first index of each.
    cells, first_idx = np.unique((cb.w1_words * w2_size + cb.w2_words[:, None, :]).reshape(k2 * k1, n),
                                 axis=0, return_index=True)
    w2_rows = np.unique(cb.w2_words, axis=0)
    c = w1_size * w2_size
    onehot_c = np.eye(c)[cells].transpose(1, 0, 2).reshape(n, -1)
    onehot_w2 = np.eye(w2_size)[w2_rows].transpose(1, 0, 2).reshape(n, -1)
    ref = cb.ref_joint.reshape(u_size, c) * n
    ref2 = cb.ref_joint.sum(axis=1) * n
    # Scan pairs in codebook order; a block stops at its first typical pair.
    order = np.argsort(first_idx)
    cells, first_idx = cells[order], first_idx[order]
    onehot_c = onehot_c.reshape(n, -1, c)[:, order].reshape(n, -1)
    n_pairs = cells.shape[0]
    for lo in range(0, live.size, chunk):
        rows = live[lo:lo + chunk]
        a = eye_u[seqs[rows]].transpose(0, 2, 1)
        pending = np.arange(rows.size)
        for p_lo in range(0, n_pairs, pair_chunk):
            if pending.size == 0:
                break
            p_hi = min(p_lo + pair_chunk, n_pairs)
            sub = a[pending].reshape(-1, n)
            counts = (sub @ onehot_c[:, p_lo * c:p_hi * c]).reshape(pending.size, u_size, p_hi - p_lo, c)
            ok = np.abs(counts - ref[None, :, None, :]).sum(axis=(1, 3)) <= thr
            hit = ok.any(axis=1)
            first[rows[pending[hit]]] = first_idx[p_lo + ok[hit].argmax(axis=1)]
            pending = pending[~hit]
        # A typical pair makes its w2 word typical on its own.
        any_w2[rows] = True
        if pending.size:
            sub = a[pending].reshape(-1, n)
            counts2 = (sub @ onehot_w2).reshape(pending.size, u_size, w2_rows.shape[0], w2_size)
            dev2 = np.abs(counts2 - ref2[None, :, None, :]).sum(axis=(1, 3))
            any_w2[rows[pending]] = (dev2 <= thr).any(axis=1)
    return first, any_w2


def encode(u_seq, cb: Codebook, delta: float) -> tuple[int, int, bool]:
    """First typical (m1, m2) in (m2, m1) order; (0, 0) with an error flag if none."""
    u_seq = np.asarray(u_seq, dtype=np.int64)
    if u_seq.shape != (cb.n,):
        raise ValueError(f"source block must have length {cb.n}")
    first, _ = _first_typical(u_seq[None, :], cb, delta)
    j = int(first[0])
    if j < 0:
        return 0, 0, True
    return j % cb.m1_count, j // cb.m1_count, False


@dataclass(frozen=True, eq=False)
class EncodingTable:
    """Messages and error flags for every source block (lexicographic order)."""

    m1: np.ndarray
    m2: np.ndarray
    error: np.ndarray
    f1_error: np.ndarray
    seq_prob: np.ndarray


def encoding_table(cb: Codebook, prior, delta: float, cfg: SimConfig | None = None) -> EncodingTable:
    cap = cfg.exact_posterior_max_n if cfg is not None else SimConfig.exact_posterior_max_n
    if cb.n > cap:
        raise BlockTooLongForExact(f"block length {cb.n} exceeds the exact-posterior cap {cap}")
    prior = np.asarray(prior, dtype=float)
    seqs = all_sequences(prior.size, cb.n)
    first, any_w2 = _first_typical(seqs, cb, delta)
    err = first < 0
    j = np.where(err, 0, first)
    seq_prob = np.prod(prior[seqs], axis=1)
    return EncodingTable(j % cb.m1_count, j // cb.m1_count, err, ~any_w2, seq_prob)


def exact_posteriors(cb: Codebook, prior, table: EncodingTable, m1: int, m2: int):
    """Per-position posteriors P(U_t | M1=m1, M2=m2) and P(U_t | M2=m2), each of shape (n, |U|)."""
    prior = np.asarray(prior, dtype=float)
    seqs = all_sequences(prior.size, cb.n)
    by_m1 = _posteriors_given_m2(seqs, prior.size, table, m2, cb.m1_count)
    mass12 = by_m1[m1].sum(axis=1)[0]
    if mass12 <= 0:
        raise ZeroProbabilityMessage(f"no source block maps to (m1={m1}, m2={m2})")
    tot = by_m1.sum(axis=0)
    return by_m1[m1] / mass12, tot / tot[0].sum()


def _posteriors_given_m2(seqs, u_size, table: EncodingTable, m2: int, k1: int) -> np.ndarray:
    """Unnormalised P(U_t = u, M1 = m1, M2 = m2), shape (K1, n, |U|)."""
    sel = table.m2 == m2
    if not np.any(sel & (table.seq_prob > 0)):
        raise ZeroProbabilityMessage(f"no source block maps to m2={m2}")
    n = seqs.shape[1]
    onehot = np.eye(u_size)[seqs[sel]].reshape(-1, n * u_size)
    w = table.seq_prob[sel]
    out = np.zeros((k1, n * u_size))
    np.add.at(out, table.m1[sel], w[:, None] * onehot)
    return out.reshape(k1, n, u_size)


def _decoder_actions(g: GameInstance, by_m1: np.ndarray, m1: int, tie_tol: float):
    """Actions per position for the realised messages with worst-case tie-breaking.

    Decoder 2 chooses one action per position for the whole m2 cell, taking
    the encoder-worst among its best responses with decoder 1's reaction to
    each m1 accounted for.
    """
    mass1 = by_m1.sum(axis=2)
    e1 = np.einsum("mtu,uv->mtv", by_m1, g.d_1)
    br1 = e1 - e1.min(axis=2, keepdims=True) <= tie_tol * mass1[..., None]
    de = np.einsum("mtu,uvk->mtvk", by_m1, g.d_e)
    de_masked = np.where(br1[..., None], de, -np.inf)
    score = de_masked.max(axis=2).sum(axis=0)
    joint2 = by_m1.sum(axis=0)
    e2 = joint2 @ g.d_2
    br2 = e2 - e2.min(axis=1, keepdims=True) <= tie_tol * joint2.sum(axis=1, keepdims=True)
    v2 = np.where(br2, score, -np.inf).argmax(axis=1)
    t = np.arange(by_m1.shape[1])
    v1 = de_masked[m1, t, :, v2].argmax(axis=1)
    return v1, v2


def run_trial(g: GameInstance, s: Strategy, cb: Codebook, cfg: SimConfig,
              rng: np.random.Generator, trial: int = 0, table: EncodingTable | None = None) -> TrialRecord:
    table = table if table is not None else encoding_table(cb, g.prior, cfg.delta, cfg)
    u_seq = rng.choice(g.u_size, size=cb.n, p=g.prior)
    idx = sequence_index(u_seq, g.u_size)
    m1, m2 = int(table.m1[idx]), int(table.m2[idx])
    seqs = all_sequences(g.u_size, cb.n)
    by_m1 = _posteriors_given_m2(seqs, g.u_size, table, m2, cb.m1_count)
    v1, v2 = _decoder_actions(g, by_m1, m1, cfg.tie_tol)

    post12 = by_m1[m1] / by_m1[m1].sum(axis=1, keepdims=True)
    tot = by_m1.sum(axis=0)
    post2 = tot / tot.sum(axis=1, keepdims=True)
    split12, split2 = split_from_strategy(g, s)
    w1t = cb.w1_words[m2, m1]
    w2t = cb.w2_words[m2]
    tgt12 = split12.beliefs[w1t * s.w2_size + w2t]
    tgt2 = split2.beliefs[w2t]
    kl1 = np.array([kl_divergence(post12[t], tgt12[t]) for t in range(cb.n)])
    kl2 = np.array([kl_divergence(post2[t], tgt2[t]) for t in range(cb.n)])

    p_w = split12.weights.reshape(s.w1_size, s.w2_size)
    freq = np.zeros_like(p_w)
    np.add.at(freq, (w1t, w2t), 1.0 / cb.n)
    ref2 = cb.ref_joint.sum(axis=1)
    type2 = np.zeros_like(ref2)
    np.add.at(type2, (u_seq, w2t), 1.0 / cb.n)
    return TrialRecord(
        trial=trial,
        n=cb.n,
        u_seq=u_seq,
        m1=m1,
        m2=m2,
        encoder_error=bool(table.error[idx]),
        f1_error=bool(table.f1_error[idx]),
        d2_error=bool(np.abs(type2 - ref2).sum() > cfg.delta + 1e-12),
        v1_seq=v1,
        v2_seq=v2,
        d_e_emp=float(np.mean(g.d_e[u_seq, v1, v2])),
        d_1_emp=float(np.mean(g.d_1[u_seq, v1])),
        d_2_emp=float(np.mean(g.d_2[u_seq, v2])),
        kl_avg_d1=float(np.mean(kl1)),
        kl_avg_d2=float(np.mean(kl2)),
        typical_fraction=_typical_fraction(kl1, kl2, cfg.alpha),
        w_type_dev=float(np.abs(freq - p_w).sum()),
        kl_t_d1=kl1,
        kl_t_d2=kl2,
    )


def _mean_se(x) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return float("nan"), float("nan")
    if x.size == 1 or not np.all(np.isfinite(x)):
        return float(np.mean(x)), float("nan") if x.size == 1 else float("inf")
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


@dataclass
class MonteCarloReport:
    cfg: SimConfig
    records: list[TrialRecord]
    rates: tuple[float, float]
    m1_count: int
    m2_count: int
    target_distortion: float
    u_size: int

    @property
    def error_rate(self) -> float:
        return float(np.mean([r.encoder_error for r in self.records]))

    @property
    def f1_rate(self) -> float:
        return float(np.mean([r.f1_error for r in self.records]))

    def stat(self, name: str, no_error: bool = False) -> tuple[float, float]:
        recs = [r for r in self.records if not (no_error and r.encoder_error)]
        return _mean_se([getattr(r, name) for r in recs])

    def p_b(self, alpha: float, gamma: float, delta: float) -> float:
        return float(np.mean([r.in_b(alpha, gamma, delta) for r in self.records]))

    @property
    def kl_bound(self) -> float:
        """eta + delta + 1/n + log2|U| * (empirical encoder error rate)."""
        return self.cfg.eta + self.cfg.delta + 1.0 / self.cfg.n + math.log2(self.u_size) * self.error_rate

    def to_dict(self) -> dict:
        out = {
            "n": self.cfg.n,
            "trials": self.cfg.trials,
            "seed": self.cfg.seed,
            "eta": self.cfg.eta,
            "delta": self.cfg.delta,
            "alpha": self.cfg.alpha,
            "gamma": self.cfg.gamma,
            "r1": self.rates[0],
            "r2": self.rates[1],
            "m1_count": self.m1_count,
            "m2_count": self.m2_count,
            "target_distortion": self.target_distortion,
            "encoder_error_rate": self.error_rate,
            "f1_error_rate": self.f1_rate,
            "p_b": self.p_b(self.cfg.alpha, self.cfg.gamma, self.cfg.delta),
            "kl_bound": self.kl_bound,
        }
        for name in ("d_e_emp", "d_1_emp", "d_2_emp"):
            out[f"mean_{name}"], out[f"se_{name}"] = self.stat(name)
        for name in ("kl_avg_d1", "kl_avg_d2"):
            out[f"mean_{name}_no_error"], out[f"se_{name}_no_error"] = self.stat(name, no_error=True)
        return out


def run_monte_carlo(g: GameInstance, s: Strategy, cfg: SimConfig) -> MonteCarloReport:
    """Independent trials with per-trial seeds derived from (cfg.seed, trial index)."""
    cfg.validate()
    if cfg.n > cfg.exact_posterior_max_n:
        raise BlockTooLongForExact(f"block length {cfg.n} exceeds the exact-posterior cap {cfg.exact_posterior_max_n}")
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.trials)
    fixed = generate_codebook(g, s, cfg) if cfg.fixed_codebook else None
    fixed_table = encoding_table(fixed, g.prior, cfg.delta, cfg) if fixed is not None else None
    records = []
    cb = fixed
    for i, child in enumerate(children):
        rng = np.random.default_rng(child)
        if fixed is None:
            cb = generate_codebook(g, s, cfg, seed=int(rng.integers(2 ** 63)))
            table = encoding_table(cb, g.prior, cfg.delta, cfg)
        else:
            table = fixed_table
        records.append(run_trial(g, s, cb, cfg, rng, trial=i, table=table))
    rep = MonteCarloReport(cfg, records, cb.rates, cb.m1_count, cb.m2_count,
                           expected_encoder_distortion(g, s, cfg.tie_tol), g.u_size)
    return rep


def distortion_gap_bound(report: MonteCarloReport, s: Strategy, g: GameInstance, alpha: float,
                         gamma: float, delta: float, tie_tol: float = DEFAULT_TIE_TOL) -> tuple[float, float]:
    """|mean empirical d_e - single-letter value| and (alpha + 2 gamma + delta + 1 - P(B)) * ||D||."""
    if not singleton_worst_pairs(g, s, tie_tol):
        raise NotInQ0Tilde("some positive-probability message pair has tied worst action pairs")
    target = expected_encoder_distortion(g, s, tie_tol)
    mean = float(np.mean([r.d_e_emp for r in report.records]))
    p_b = report.p_b(alpha, gamma, delta)
    bound = (alpha + 2 * gamma + delta) * g.d_norm + (1.0 - p_b) * g.d_norm
    return abs(mean - target), bound
