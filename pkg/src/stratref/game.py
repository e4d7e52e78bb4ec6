"""Game instances, encoder strategies and the single-letter decision layer.

Decoder 1 sees both auxiliary symbols (w1, w2) and decoder 2 sees only w2.
Each decoder minimises its own expected distortion under its posterior
belief; among its optimal actions it plays the one that is worst for the
encoder. Tie sets use an absolute tolerance on posterior expected
distortions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .prob import SIMPLEX_TOL, as_distribution

DEFAULT_TIE_TOL = 1e-9


def _frozen(a, ndim: int, name: str) -> np.ndarray:
    arr = np.array(a, dtype=float, copy=True)
    if arr.ndim != ndim:
        raise ValueError(f"{name} must have {ndim} dimensions, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class GameInstance:
    """Prior over U and distortion tables d_e[u,v1,v2], d_1[u,v1], d_2[u,v2]."""

    prior: np.ndarray
    d_e: np.ndarray
    d_1: np.ndarray
    d_2: np.ndarray
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "prior", as_distribution(self.prior))
        object.__setattr__(self, "d_e", _frozen(self.d_e, 3, "d_e"))
        object.__setattr__(self, "d_1", _frozen(self.d_1, 2, "d_1"))
        object.__setattr__(self, "d_2", _frozen(self.d_2, 2, "d_2"))
        u, v1, v2 = self.d_e.shape
        if self.prior.shape[0] != u:
            raise ValueError(f"prior has {self.prior.shape[0]} entries but d_e has |U|={u}")
        if self.d_1.shape != (u, v1):
            raise ValueError(f"d_1 has shape {self.d_1.shape}, expected {(u, v1)}")
        if self.d_2.shape != (u, v2):
            raise ValueError(f"d_2 has shape {self.d_2.shape}, expected {(u, v2)}")

    @property
    def u_size(self) -> int:
        return self.d_e.shape[0]

    @property
    def v1_size(self) -> int:
        return self.d_e.shape[1]

    @property
    def v2_size(self) -> int:
        return self.d_e.shape[2]

    @property
    def d_norm(self) -> float:
        return float(np.max(np.abs(self.d_e)))

    def with_prior(self, prior) -> "GameInstance":
        return GameInstance(prior, self.d_e, self.d_1, self.d_2, self.name)

    def __eq__(self, other) -> bool:
        if not isinstance(other, GameInstance):
            return NotImplemented
        return (
            self.name == other.name
            and np.array_equal(self.prior, other.prior)
            and np.array_equal(self.d_e, other.d_e)
            and np.array_equal(self.d_1, other.d_1)
            and np.array_equal(self.d_2, other.d_2)
        )

    __hash__ = None


@dataclass(frozen=True)
class RatePair:
    """Rates (r1, r2) in bits per source symbol."""

    r1: float
    r2: float

    def __post_init__(self):
        for name in ("r1", "r2"):
            val = float(getattr(self, name))
            if not np.isfinite(val) or val < 0:
                raise ValueError(f"{name} must be a finite nonnegative number, got {val!r}")
            object.__setattr__(self, name, val)

    def __iter__(self):
        yield self.r1
        yield self.r2

    def __le__(self, other: "RatePair") -> bool:
        return self.r1 <= other.r1 and self.r2 <= other.r2


def as_rates(r) -> RatePair:
    return r if isinstance(r, RatePair) else RatePair(*r)


@dataclass(frozen=True, eq=False)
class Strategy:
    """Encoder channel q[u, w1, w2] = Q(w1, w2 | u)."""

    q: np.ndarray

    def __post_init__(self):
        q = _frozen(self.q, 3, "strategy q")
        if np.any(q < 0):
            raise ValueError("strategy has negative entries")
        rows = q.reshape(q.shape[0], -1).sum(axis=1)
        bad = np.abs(rows - 1.0) > 1e-9
        if np.any(bad):
            raise ValueError(f"strategy rows {np.flatnonzero(bad).tolist()} do not sum to 1")
        object.__setattr__(self, "q", q)

    @property
    def u_size(self) -> int:
        return self.q.shape[0]

    @property
    def w1_size(self) -> int:
        return self.q.shape[1]

    @property
    def w2_size(self) -> int:
        return self.q.shape[2]

    @property
    def channel(self) -> np.ndarray:
        """Q(w1,w2|u) flattened to a U x (W1*W2) matrix, w1-major."""
        return self.q.reshape(self.u_size, -1)

    @property
    def channel_w2(self) -> np.ndarray:
        return self.q.sum(axis=1)

    def joint(self, prior) -> np.ndarray:
        """P(u, w1, w2)."""
        return np.asarray(prior, dtype=float)[:, None, None] * self.q

    def padded(self, w1_size: int, w2_size: int) -> "Strategy":
        """Same strategy with extra never-used auxiliary symbols."""
        if w1_size < self.w1_size or w2_size < self.w2_size:
            raise ValueError("padding cannot shrink the auxiliary alphabets")
        q = np.zeros((self.u_size, w1_size, w2_size))
        q[:, : self.w1_size, : self.w2_size] = self.q
        return Strategy(q)

    @classmethod
    def uninformative(cls, u_size: int, w1_size: int = 1, w2_size: int = 1) -> "Strategy":
        q = np.zeros((u_size, w1_size, w2_size))
        q[:, 0, 0] = 1.0
        return cls(q)

    @classmethod
    def from_w2_channel(cls, ch2, w1_size: int = 1) -> "Strategy":
        """Strategy sending information only through w2 (w1 constant)."""
        ch2 = np.asarray(ch2, dtype=float)
        q = np.zeros((ch2.shape[0], w1_size, ch2.shape[1]))
        q[:, 0, :] = ch2
        return cls(q)

    def to_dict(self) -> dict:
        return {"w1_size": self.w1_size, "w2_size": self.w2_size, "q": self.q.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Strategy":
        s = cls(np.asarray(d["q"], dtype=float))
        if "w1_size" in d and (s.w1_size, s.w2_size) != (d["w1_size"], d["w2_size"]):
            raise ValueError("strategy sizes do not match its table")
        return s

    def __eq__(self, other) -> bool:
        if not isinstance(other, Strategy):
            return NotImplemented
        return np.array_equal(self.q, other.q)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class BeliefSplit:
    """Weights over messages and the posterior belief attached to each."""

    weights: np.ndarray
    beliefs: np.ndarray

    def mean(self) -> np.ndarray:
        return self.weights @ self.beliefs

    def is_splitting_of(self, prior, tol: float = 1e-10) -> bool:
        return bool(np.max(np.abs(self.mean() - np.asarray(prior))) <= tol)


def best_response_set(q, d, tie_tol: float = DEFAULT_TIE_TOL) -> frozenset[int]:
    """Actions whose expected distortion under belief q is within tie_tol of the minimum."""
    e = np.asarray(q, dtype=float) @ np.asarray(d, dtype=float)
    return frozenset(np.flatnonzero(e - e.min() <= tie_tol).tolist())


def best_response_set_d1(q1, g: GameInstance, tie_tol: float = DEFAULT_TIE_TOL) -> frozenset[int]:
    return best_response_set(q1, g.d_1, tie_tol)


def best_response_set_d2(q2, g: GameInstance, tie_tol: float = DEFAULT_TIE_TOL) -> frozenset[int]:
    return best_response_set(q2, g.d_2, tie_tol)


def _pair_values(q12, q2, g, tie_tol):
    br1 = sorted(best_response_set_d1(q12, g, tie_tol))
    br2 = sorted(best_response_set_d2(q2, g, tie_tol))
    vals = np.einsum("u,uab->ab", np.asarray(q12, dtype=float), g.d_e)[np.ix_(br1, br2)]
    return br1, br2, vals


def worst_pair(q12, q2, g: GameInstance, tie_tol: float = DEFAULT_TIE_TOL,
               optimistic: bool = False) -> tuple[int, int, float]:
    """Encoder-worst (v1, v2) in V1*(q12) x V2*(q2) and its expected d_e under q12.

    Exact ties are broken towards the lexicographically smallest pair. With
    ``optimistic`` the encoder-best pair is returned instead.
    """
    br1, br2, vals = _pair_values(q12, q2, g, tie_tol)
    flat = np.argmin(vals) if optimistic else np.argmax(vals)
    i, j = np.unravel_index(flat, vals.shape)
    return br1[i], br2[j], float(vals[i, j])


def worst_pair_set(q12, q2, g: GameInstance, tie_tol: float = DEFAULT_TIE_TOL) -> list[tuple[int, int]]:
    """All pairs within tie_tol of the worst value (the set whose size matters for strict feasibility)."""
    br1, br2, vals = _pair_values(q12, q2, g, tie_tol)
    idx = np.argwhere(vals >= vals.max() - tie_tol)
    return [(br1[i], br2[j]) for i, j in idx]


def psi_e(q, g: GameInstance, tie_tol: float = DEFAULT_TIE_TOL, optimistic: bool = False) -> float:
    """Worst-pair value when both decoders hold belief q."""
    return worst_pair(q, q, g, tie_tol, optimistic)[2]


def worst_case_value_from_joint(g: GameInstance, joint, tie_tol: float = DEFAULT_TIE_TOL,
                                optimistic: bool = False) -> np.ndarray:
    """Encoder distortion for joint tables p[..., u, w1, w2] under worst-case decoders.

    Decoder 1 best-responds per (w1, w2). Decoder 2 commits to one action per
    w2, chosen among its best responses to maximise the encoder's distortion
    summed over the w1 cells that share that w2. Leading axes are batched.
    """
    joint = np.asarray(joint, dtype=float)
    sign = -1.0 if optimistic else 1.0
    mass12 = joint.sum(axis=-3)
    e1 = np.einsum("...uab,uv->...abv", joint, g.d_1)
    br1 = e1 - e1.min(axis=-1, keepdims=True) <= tie_tol * mass12[..., None]
    de = np.einsum("...uab,uvk->...abvk", joint, g.d_e) * sign
    de = np.where(br1[..., None], de, -np.inf)
    cell = de.max(axis=-2)
    score = cell.sum(axis=-3)
    joint2 = joint.sum(axis=-2)
    mass2 = joint2.sum(axis=-2)
    e2 = np.einsum("...ub,uk->...bk", joint2, g.d_2)
    br2 = e2 - e2.min(axis=-1, keepdims=True) <= tie_tol * mass2[..., None]
    best = np.where(br2, score, -np.inf).max(axis=-1)
    return sign * best.sum(axis=-1)


def expected_encoder_distortion(g: GameInstance, s: Strategy, tie_tol: float = DEFAULT_TIE_TOL,
                                optimistic: bool = False) -> float:
    """Single-letter encoder distortion of strategy s with worst-case decoder tie-breaking."""
    if s.u_size != g.u_size:
        raise ValueError("strategy and instance disagree on |U|")
    return float(worst_case_value_from_joint(g, s.joint(g.prior), tie_tol, optimistic))


def _split(prior, joint2d) -> BeliefSplit:
    weights = joint2d.sum(axis=0)
    beliefs = np.tile(np.asarray(prior, dtype=float), (joint2d.shape[1], 1))
    pos = weights > 0
    beliefs[pos] = (joint2d[:, pos] / weights[pos]).T
    return BeliefSplit(weights, beliefs)


def split_from_strategy(g: GameInstance, s: Strategy) -> tuple[BeliefSplit, BeliefSplit]:
    """Posterior splittings over (w1, w2) pairs (w1-major) and over w2.

    Zero-weight messages are assigned the prior as a placeholder belief.
    """
    joint = s.joint(g.prior)
    return _split(g.prior, joint.reshape(g.u_size, -1)), _split(g.prior, joint.sum(axis=1))


def singleton_worst_pairs(g: GameInstance, s: Strategy, tie_tol: float = DEFAULT_TIE_TOL) -> bool:
    """True iff every positive-probability (w1, w2) has a unique worst outcome.

    Pairs whose encoder-distortion columns d_e(., v1, v2) coincide are the
    same outcome for the encoder and count once.
    """
    split12, split2 = split_from_strategy(g, s)
    for idx in np.flatnonzero(split12.weights > SIMPLEX_TOL):
        w2 = idx % s.w2_size
        pairs = worst_pair_set(split12.beliefs[idx], split2.beliefs[w2], g, tie_tol)
        cols = {tuple(g.d_e[:, a, b]) for a, b in pairs}
        if len(cols) != 1:
            return False
    return True
