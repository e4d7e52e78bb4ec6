"""Finite-alphabet probability primitives.

Distributions are 1-D numpy arrays, channels are 2-D arrays whose rows are
distributions, and joint distributions are arrays of any rank summing to one.
All information quantities are in bits.
"""

from __future__ import annotations

import numpy as np

SIMPLEX_TOL = 1e-12


class ZeroProbabilityObservation(ValueError):
    """Raised when conditioning on an observation of probability zero."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


def as_distribution(p, tol: float = SIMPLEX_TOL) -> np.ndarray:
    """Validate ``p`` as a probability vector and return a read-only copy."""
    arr = np.asarray(p, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"distribution must be a nonempty vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("distribution has non-finite entries")
    if np.any(arr < 0):
        raise ValueError("distribution has negative entries")
    if abs(arr.sum() - 1.0) > tol:
        raise ValueError(f"distribution sums to {arr.sum()!r}, not 1")
    return _frozen(arr)


def as_channel(ch, n_inputs: int | None = None, tol: float = SIMPLEX_TOL) -> np.ndarray:
    """Validate a row-stochastic matrix and return a read-only copy."""
    arr = np.asarray(ch, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"channel must be a matrix, got shape {arr.shape}")
    if n_inputs is not None and arr.shape[0] != n_inputs:
        raise ValueError(f"channel has {arr.shape[0]} rows, expected {n_inputs}")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise ValueError("channel has negative or non-finite entries")
    bad = np.abs(arr.sum(axis=1) - 1.0) > tol
    if np.any(bad):
        raise ValueError(f"channel rows {np.flatnonzero(bad).tolist()} do not sum to 1")
    return _frozen(arr)


def as_joint(table, tol: float = SIMPLEX_TOL) -> np.ndarray:
    """Validate a joint probability table of any rank."""
    arr = np.asarray(table, dtype=float)
    if arr.size == 0 or not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise ValueError("joint table must be nonempty, finite and nonnegative")
    if abs(arr.sum() - 1.0) > tol:
        raise ValueError(f"joint table sums to {arr.sum()!r}, not 1")
    return _frozen(arr)


def _xlog2x(p: np.ndarray) -> np.ndarray:
    out = np.zeros_like(p, dtype=float)
    pos = p > 0
    out[pos] = p[pos] * np.log2(p[pos])
    return out


def entropy(p) -> float:
    """Shannon entropy in bits; zero-mass symbols contribute nothing."""
    p = np.asarray(p, dtype=float)
    return float(max(0.0, -_xlog2x(p).sum()))


def joint_mutual_information(joint) -> float:
    """I(X;Y) for a 2-D joint table p[x, y]."""
    joint = np.asarray(joint, dtype=float)
    px = joint.sum(axis=1)
    py = joint.sum(axis=0)
    val = entropy(px) + entropy(py) - entropy(joint.ravel())
    return float(max(0.0, val))


def mutual_information(p_in, ch) -> float:
    """I(X;Y) for input ``p_in`` through channel ``ch[x, y]``."""
    p_in = np.asarray(p_in, dtype=float)
    ch = np.asarray(ch, dtype=float)
    if ch.shape[0] != p_in.shape[0]:
        raise ValueError("channel input size does not match the input distribution")
    return joint_mutual_information(p_in[:, None] * ch)


def conditional_mutual_information(p_in, ch_joint) -> float:
    """I(U;W1|W2) for a channel ``ch_joint[u, w1, w2]`` from U to pairs."""
    p_in = np.asarray(p_in, dtype=float)
    ch_joint = np.asarray(ch_joint, dtype=float)
    u = p_in.shape[0]
    i12 = mutual_information(p_in, ch_joint.reshape(u, -1))
    i2 = mutual_information(p_in, ch_joint.sum(axis=1))
    return float(max(0.0, i12 - i2))


def kl_divergence(p, q) -> float:
    """D(p||q) in bits; +inf unless supp p is contained in supp q."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError("kl_divergence needs distributions on the same alphabet")
    pos = p > 0
    if np.any(q[pos] <= 0):
        return float("inf")
    val = float(np.sum(p[pos] * np.log2(p[pos] / q[pos])))
    return max(0.0, val)


def posterior(prior, ch, observation: int) -> np.ndarray:
    """Bayes posterior over inputs after observing output ``observation``."""
    prior = np.asarray(prior, dtype=float)
    ch = np.asarray(ch, dtype=float)
    col = prior * ch[:, observation]
    mass = col.sum()
    if mass <= 0:
        raise ZeroProbabilityObservation(f"observation {observation} has probability zero")
    return _frozen(col / mass)


def empirical_type(seqs, shape) -> np.ndarray:
    """Joint empirical frequencies of aligned integer sequences."""
    seqs = [np.asarray(s, dtype=np.int64) for s in seqs]
    n = seqs[0].shape[0]
    if n < 1 or any(s.shape != (n,) for s in seqs):
        raise ValueError("sequences must be 1-D, nonempty and of equal length")
    flat = np.ravel_multi_index(tuple(seqs), shape)
    counts = np.bincount(flat, minlength=int(np.prod(shape)))
    return counts.reshape(shape) / n


def type_deviation(seqs, ref) -> float:
    """L1 distance between the joint empirical type and ``ref``."""
    ref = np.asarray(ref, dtype=float)
    return float(np.abs(empirical_type(seqs, ref.shape) - ref).sum())


def is_typical(seqs, ref, delta: float) -> bool:
    """True iff the joint empirical type is within L1 distance ``delta`` of ``ref``."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    return type_deviation(seqs, ref) <= delta + 1e-12
