"""Reference game instances and a random-instance generator."""

from __future__ import annotations

import numpy as np

from .game import GameInstance


def aligned_hamming(prior=(0.5, 0.5)) -> GameInstance:
    """Binary source; both decoders want to guess u, and so does the encoder.

    d_e(u, v1, v2) = 1{u != v1} + 1{u != v2}.
    """
    ham = 1.0 - np.eye(2)
    d_e = ham[:, :, None] + ham[:, None, :]
    return GameInstance(np.asarray(prior, dtype=float), d_e, ham, ham, name="aligned-hamming")


def prosecutor(prior_guilty: float = 0.3) -> GameInstance:
    """Judge (decoder 2) convicts iff guilt is more likely; the prosecutor wants convictions.

    u: 0 innocent, 1 guilty. v2: 0 acquit, 1 convict. Decoder 1 is a
    bystander with two actions and a constant distortion.
    """
    prior = np.array([1.0 - prior_guilty, prior_guilty])
    d_2 = 1.0 - np.eye(2)
    d_e = np.zeros((2, 2, 2))
    d_e[:, :, 0] = 1.0
    return GameInstance(prior, d_e, np.zeros((2, 2)), d_2, name="prosecutor")


def random_instance(rng: np.random.Generator, u_size: int = 2, v1_size: int = 2,
                    v2_size: int = 2, name: str = "random") -> GameInstance:
    """Dirichlet(1) prior and distortion tables uniform on [0, 1]."""
    prior = rng.dirichlet(np.ones(u_size))
    d_e = rng.uniform(size=(u_size, v1_size, v2_size))
    d_1 = rng.uniform(size=(u_size, v1_size))
    d_2 = rng.uniform(size=(u_size, v2_size))
    return GameInstance(prior, d_e, d_1, d_2, name=name)


def threshold_instance(rng: np.random.Generator, name: str = "threshold") -> GameInstance:
    """Binary instance whose decoders use weighted Hamming losses.

    Each decoder switches action at an interior belief, so information moves
    actions and the optimal distortion typically depends on the rates.
    """
    prior = rng.dirichlet(np.ones(2))
    ham = 1.0 - np.eye(2)
    d_1 = ham * rng.uniform(0.5, 1.5, size=(2, 1))
    d_2 = ham * rng.uniform(0.5, 1.5, size=(2, 1))
    d_e = rng.uniform(size=(2, 2, 2))
    return GameInstance(prior, d_e, d_1, d_2, name=name)
