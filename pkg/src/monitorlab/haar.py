"""Haar-random unitaries and states, and reproducible random streams."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats


@dataclass(frozen=True)
class RandomStream:
    """Address of an independent random stream.

    ``(seed, stream_id, tag)`` is expanded through ``numpy.random.SeedSequence``
    into a counter-based Philox generator, so equal addresses give bit-identical
    draws and distinct addresses give independent streams. ``tag`` lets one
    trajectory carve out sub-streams (gates, measurement positions, outcomes).
    """

    seed: int
    stream_id: int = 0
    tag: tuple[int, ...] = ()

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id, *self.tag))
        return np.random.Generator(np.random.Philox(ss))

    def child(self, *tag: int) -> RandomStream:
        return RandomStream(self.seed, self.stream_id, self.tag + tuple(tag))


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RandomStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def sample_haar_unitary(dim: int, rng) -> np.ndarray:
    """Haar-random ``U(dim)`` matrix via Ginibre QR with the R-diagonal phase fix."""
    if dim < 1:
        raise ValueError("dimension must be >= 1")
    rng = as_generator(rng)
    z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(z / np.sqrt(2.0))
    diag = np.diagonal(r)
    return q * (diag / np.abs(diag))


def sample_haar_unitaries(dim: int, count: int, rng) -> np.ndarray:
    """Batch of ``count`` independent Haar unitaries, shape ``(count, dim, dim)``."""
    rng = as_generator(rng)
    z = rng.standard_normal((count, dim, dim)) + 1j * rng.standard_normal(
        (count, dim, dim)
    )
    q, r = np.linalg.qr(z / np.sqrt(2.0))
    diag = np.diagonal(r, axis1=1, axis2=2)
    return q * (diag / np.abs(diag))[:, None, :]


def sample_haar_state(dim: int, rng) -> np.ndarray:
    """Haar-random unit vector in ``C^dim``."""
    rng = as_generator(rng)
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def sample_haar_states(dim: int, count: int, rng) -> np.ndarray:
    rng = as_generator(rng)
    v = rng.standard_normal((count, dim)) + 1j * rng.standard_normal((count, dim))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def sample_orthogonal_haar_pair(dim: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Two orthonormal vectors distributed as two columns of a Haar unitary."""
    if dim < 2:
        raise ValueError("need dim >= 2 for an orthogonal pair")
    rng = as_generator(rng)
    a = sample_haar_state(dim, rng)
    b = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    b = b - np.vdot(a, b) * a
    return a, b / np.linalg.norm(b)


def porter_thomas_ks(samples, dim: int) -> float:
    """KS distance between the law of ``dim * x`` and Exp(1)."""
    x = np.asarray(samples, dtype=float)
    if np.any(x < 0) or np.any(x > 1):
        raise ValueError("Born probabilities must lie in [0, 1]")
    return float(stats.kstest(dim * x, "expon").statistic)

