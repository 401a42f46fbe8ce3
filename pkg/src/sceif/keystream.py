"""Deterministic random streams, keyed rotations and Gram-Schmidt orthonormalization."""

from __future__ import annotations

import numpy as np

GAMMA = 0x9E3779B97F4A7C15
MASK64 = (1 << 64) - 1

_GAMMA = np.uint64(GAMMA)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


class DegenerateSetError(ValueError):
    """Raised when a matrix set handed to :func:`orthonormalize` is rank deficient."""

    def __init__(self, position):
        super().__init__(f"degenerate matrix set at position {position}")
        self.position = position


class RandomStream:
    """SplitMix64 stream.

    The i-th output (1-based) only depends on ``seed + i * GAMMA`` so blocks of
    draws are produced in one vectorised pass. ``counter`` counts raw draws.
    """

    def __init__(self, seed, origin="public_seed"):
        self.seed = int(seed) & MASK64
        self.origin = origin
        self.counter = 0

    @property
    def state(self):
        return (self.seed + self.counter * GAMMA) & MASK64

    def raw(self, count):
        """Next ``count`` raw 64-bit outputs as a uint64 array."""
        steps = np.arange(self.counter + 1, self.counter + count + 1, dtype=np.uint64)
        self.counter += count
        with np.errstate(over="ignore"):
            z = np.uint64(self.seed) + steps * _GAMMA
            z = (z ^ (z >> np.uint64(30))) * _MIX1
            z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))

    def uniform(self, count):
        """Next ``count`` reals in [-1, 1)."""
        top = (self.raw(count) >> np.uint64(11)).astype(np.float64)
        return 2.0 * (top / 2.0**53) - 1.0

    def unit(self, count):
        """Next ``count`` reals in [0, 1)."""
        return (self.raw(count) >> np.uint64(11)).astype(np.float64) / 2.0**53


def stream_new(seed, origin="public_seed"):
    return RandomStream(seed, origin)


def stream_uniform(stream):
    return float(stream.uniform(1)[0])


def random_matrix(stream, n):
    return stream.uniform(n * n).reshape(n, n)


def random_matrices(stream, count, n):
    """``count`` consecutive :func:`random_matrix` draws stacked along axis 0."""
    return stream.uniform(count * n * n).reshape(count, n, n)


def pi_key_transform(key_stream, mats):
    """Keyed span-preserving mixing of a list of matrices.

    Applies ``2L`` plane rotations; each rotation draws a pair ``a != b`` and an
    angle from ``key_stream``. Accepts a list or an ``(L, n, n)`` array and
    returns an array of the same shape.
    """
    x = np.array(mats, dtype=np.float64, copy=True)
    count = x.shape[0]
    if count == 0:
        raise ValueError("pi_key_transform needs at least one matrix")
    if count == 1:
        return x
    shape = x.shape
    x = x.reshape(count, -1)
    n_rot = 2 * count
    draws = key_stream.raw(3 * n_rot).reshape(n_rot, 3)
    a_idx = (draws[:, 0] % np.uint64(count)).astype(np.int64)
    b_idx = (draws[:, 1] % np.uint64(count - 1)).astype(np.int64)
    b_idx += b_idx >= a_idx
    theta = 2.0 * np.pi * ((draws[:, 2] >> np.uint64(11)).astype(np.float64) / 2.0**53)
    cos, sin = np.cos(theta), np.sin(theta)
    for a, b, c, s in zip(a_idx.tolist(), b_idx.tolist(), cos.tolist(), sin.tolist()):
        xa = x[a]
        xb = x[b]
        x[a], x[b] = c * xa + s * xb, c * xb - s * xa
    return x.reshape(shape)


def orthonormalize(mats, tol=1e-10):
    """Orthonormalize matrices in list order (Gram-Schmidt plus one re-orthogonalization).

    Raises DegenerateSetError (1-based position) when a matrix has no
    component left outside the span of its predecessors.
    """
    x = np.array(mats, dtype=np.float64)
    shape = x.shape
    v = x.reshape(shape[0], -1)
    q = np.zeros_like(v)
    for i in range(v.shape[0]):
        w = v[i].copy()
        norm0 = np.linalg.norm(w)
        if i:
            basis = q[:i]
            w -= basis.T @ (basis @ w)
            w -= basis.T @ (basis @ w)
        norm = np.linalg.norm(w)
        if norm <= tol * norm0 or norm == 0.0:
            raise DegenerateSetError(i + 1)
        q[i] = w / norm
    return q.reshape(shape)
