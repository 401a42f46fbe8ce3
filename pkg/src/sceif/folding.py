"""
Self-contained encrypted image folding.

The plain-text image is the block approximation. The first ``H`` blocks (raster
order) are hosts: the coefficients of every other block are written, channel
by channel, along a key-dependent orthonormal basis of the orthogonal
complement of each host's atom span. Because that complement is invisible to
the projector, each host still projects back onto its own approximation.

The atom labels of all blocks, each block's list preceded by its atom count,
form one integer stream stored in extra "ad-hoc" blocks: the amplitude of a
constant anchor atom holds the number of used slots and the stream values sit
along a keyed basis of the anchor's complement.

Draw order on both random streams: all ad-hoc blocks first, then hosts in
raster order, channels inside a host. Unfolding replays exactly this order.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .container import ContainerError, HeaderFields, assemble_image, pack_container, to_channels
from .dictionary import build_mixed, flatten_index, unflatten_index
from .keystream import RandomStream, orthonormalize, pi_key_transform, random_matrices
from .omp2d import (
    DependentAtomError,
    approximate_image,
    extend_state,
    new_state,
    project,
    reconstruct_blocks,
    state_from_indices,
    synthesize,
)

log = logging.getLogger(__name__)


class NotFoldableError(ValueError):
    pass


class FoldError(RuntimeError):
    pass


# Planning ------------------------------------------------------------------


def host_capacity(ks, n_hosts, block_n):
    return sum(block_n * block_n - k for k in ks[:n_hosts])


def payload_size(ks, n_hosts):
    return sum(ks[n_hosts:])


@dataclass
class FoldPlan:
    n_blocks: int
    n_hosts: int
    n_adhoc: int
    block_n: int
    adhoc_n: int
    payload: list  # per channel: 1D array of coefficients of the non-host blocks
    index_stream: np.ndarray  # [K_1, labels_1..., K_2, labels_2..., ...]
    ks: list = field(default_factory=list)


def plan_fold(approxs, block_n, adhoc_n=None):
    adhoc_n = adhoc_n or block_n
    q = len(approxs)
    if q < 1:
        raise NotFoldableError("nothing to fold")
    ks = [a.k for a in approxs]
    # capacity grows and payload shrinks with H: the first H that fits is minimal
    n_hosts = None
    cap, load = 0, sum(ks)
    for h in range(q):
        if cap >= load:
            n_hosts = h
            break
        cap += block_n * block_n - ks[h]
        load -= ks[h]
    if n_hosts is None:
        raise NotFoldableError("image not foldable at this quality")
    m_y = build_mixed(block_n).m
    stream = []
    for a in approxs:
        stream.append(a.k)
        stream.extend(flatten_index(lx, ly, m_y) for lx, ly in a.indices)
    z = approxs[0].channels
    payload = [
        np.concatenate([np.zeros(0)] + [a.coeffs[c] for a in approxs[n_hosts:]]) for c in range(z)
    ]
    slots = adhoc_n * adhoc_n - 1
    return FoldPlan(
        n_blocks=q,
        n_hosts=n_hosts,
        n_adhoc=math.ceil(len(stream) / slots),
        block_n=block_n,
        adhoc_n=adhoc_n,
        payload=payload,
        index_stream=np.array(stream, dtype=np.int64),
        ks=ks,
    )


# Host blocks ---------------------------------------------------------------


def build_nullspace_basis(state, seed_stream, key_stream, count, n):
    """Keyed orthonormal basis, shape ``(count, n, n)``, of the complement of the state's span."""
    if count < 1:
        return np.zeros((0, n, n))
    y = random_matrices(seed_stream, count, n)
    o = y - project(state, y)
    x = pi_key_transform(key_stream, o)
    return orthonormalize(x)


def embed_host(approx_block, payload, bases):
    """``G_z = I_z^K + sum_i h_i^z U_i^z`` for every channel."""
    g = np.array(approx_block, dtype=np.float64, copy=True)
    for c in range(g.shape[0]):
        h = np.asarray(payload[c], dtype=np.float64)
        u = bases[c]
        if len(h) > len(u):
            raise ValueError(f"payload of {len(h)} values exceeds host capacity {len(u)}")
        if len(h):
            g[c] += np.tensordot(h, u[: len(h)], axes=1)
    return g


def _lenient_state(indices, dx, dy):
    """State built from ``indices``, silently dropping dependent or repeated atoms."""
    state = new_state(dx.n)
    dropped = 0
    for pair in indices:
        if pair in state.selected:
            dropped += 1
            continue
        try:
            extend_state(state, pair, dx, dy)
        except DependentAtomError:
            dropped += 1
    return state, dropped


def extract_host(g, indices, dx, dy, seed_stream, key_stream, lenient=False):
    """Recover ``(I^K, payload)`` of a host block from its folded pixels.

    ``payload`` is a list with one array of ``n*n - K`` values per channel.
    """
    if lenient:
        state, _ = _lenient_state(indices, dx, dy)
    else:
        try:
            state = state_from_indices(indices, dx, dy)
        except DependentAtomError as exc:
            raise ContainerError(f"corrupt host indices: {exc}") from exc
    return _extract_host(g, state, seed_stream, key_stream)


def _extract_host(g, state, seed_stream, key_stream):
    g = np.asarray(g, dtype=np.float64)
    if g.ndim == 2:
        g = g[None]
    n = g.shape[-1]
    approx = project(state, g)
    f = g - approx
    count = n * n - state.k
    payload = []
    for c in range(g.shape[0]):
        u = build_nullspace_basis(state, seed_stream, key_stream, count, n)
        payload.append(u.reshape(count, n * n) @ f[c].ravel())
    return approx, payload


# Ad-hoc blocks -------------------------------------------------------------


def anchor_atom(n):
    return np.full((n, n), 1.0 / n)


def _adhoc_basis(seed_stream, key_stream, n):
    a = anchor_atom(n).ravel()
    y = random_matrices(seed_stream, n * n - 1, n).reshape(n * n - 1, -1)
    o = y - np.outer(y @ a, a)
    return orthonormalize(pi_key_transform(key_stream, o)).reshape(-1, n, n)


def build_adhoc_block(values, count, seed_stream, key_stream, n):
    """Anchor amplitude ``count`` plus ``values`` along the keyed complement basis."""
    values = np.asarray(values, dtype=np.float64)
    if count > n * n - 1 or len(values) > count:
        raise ValueError(f"ad-hoc block holds at most {n * n - 1} values")
    u = _adhoc_basis(seed_stream, key_stream, n)
    g = count * anchor_atom(n)
    if len(values):
        g = g + np.tensordot(values, u[: len(values)], axes=1)
    return g


def extract_adhoc(g, seed_stream, key_stream, n):
    """Inverse of :func:`build_adhoc_block`: ``(count, integer values)``."""
    g = np.asarray(g, dtype=np.float64)
    a = anchor_atom(n)
    amplitude = float(np.sum(a * g))
    count = int(round(amplitude))
    u = _adhoc_basis(seed_stream, key_stream, n)
    if not 0 <= count <= n * n - 1:
        raise ContainerError(f"ad-hoc slot count {amplitude:.3f} out of range")
    f = g - count * a
    values = np.rint(u[:count].reshape(count, n * n) @ f.ravel()).astype(np.int64)
    return count, values


# Fold / unfold -------------------------------------------------------------


def wallclock_seed():
    return time.time_ns() // 1000 & 0xFFFFFFFF


def fold(image, key, seed=None, *, target_psnr=43.0, bits=8, block_n=8, approximation=None, workers=1):
    """Approximate ``image`` and fold it into a :class:`FoldedContainer`.

    ``approximation`` may be a precomputed :class:`~sceif.omp2d.ImageApproximation`
    of the same image, in which case no pursuit is run.
    """
    if seed is None:
        seed = wallclock_seed()
    if not 0 <= seed <= 0xFFFFFFFF:
        raise ValueError("public seed must be a 32-bit unsigned integer")
    ch = to_channels(image)
    z, nx, ny = ch.shape
    if approximation is None:
        approximation = approximate_image(image, target_psnr, bits, block_n, workers=workers)
    approxs = approximation.blocks
    plan = plan_fold(approxs, block_n)
    d = build_mixed(block_n)

    seed_stream = RandomStream(seed, "public_seed")
    key_stream = RandomStream(key, "private_key")
    slots = block_n * block_n - 1
    stream = plan.index_stream
    adhoc = [
        build_adhoc_block(stream[i : i + slots], len(stream[i : i + slots]), seed_stream, key_stream, block_n)
        for i in range(0, len(stream), slots)
    ]

    plain_blocks = reconstruct_blocks(approxs[: plan.n_hosts], d)
    offsets = [0] * z
    hosts = []
    for q in range(plan.n_hosts):
        state = state_from_indices(approxs[q].indices, d, d)
        count = block_n * block_n - state.k
        bases, payload = [], []
        for c in range(z):
            try:
                bases.append(build_nullspace_basis(state, seed_stream, key_stream, count, block_n))
            except ValueError as exc:
                raise FoldError(f"host {q}: {exc}; retry with another seed") from exc
            payload.append(plan.payload[c][offsets[c] : offsets[c] + count])
            offsets[c] += len(payload[c])
        hosts.append(embed_host(plain_blocks[q], payload, bases))
    assert all(off == len(p) for off, p in zip(offsets, plan.payload))

    header = HeaderFields(
        orig_nx=nx,
        orig_ny=ny,
        channels=z,
        block_n=block_n,
        n_blocks=plan.n_blocks,
        n_hosts=plan.n_hosts,
        n_adhoc=plan.n_adhoc,
        seed=seed,
        flags=bits,
    )
    hosts = np.array(hosts).reshape(-1, z, block_n, block_n)
    return pack_container(header, hosts, np.array(adhoc))


@dataclass
class UnfoldResult:
    image: np.ndarray
    suspect: bool
    notes: list = field(default_factory=list)


def _parse_index_stream(values, n_blocks, block_n, m_x, m_y, notes):
    """Split the stream into per-block index lists, repairing whatever is out of range."""
    out = []
    pos = 0
    total = m_x * m_y
    for _ in range(n_blocks):
        if pos >= len(values):
            notes.append("index stream exhausted")
            out.append([])
            continue
        k = int(values[pos])
        pos += 1
        if not 0 <= k <= block_n * block_n:
            notes.append(f"atom count {k} out of range")
            k %= block_n * block_n + 1
        labels = values[pos : pos + k]
        pos += len(labels)
        if len(labels) < k:
            notes.append("index stream exhausted")
        pairs = []
        for label in labels.tolist():
            if not 1 <= label <= total:
                notes.append(f"atom label {label} out of range")
                label = (label - 1) % total + 1
            pairs.append(unflatten_index(label, m_y))
        out.append(pairs)
    if pos < len(values):
        notes.append(f"{len(values) - pos} trailing index values")
    return out


def decode(container, key, strict=False):
    """Unfold with diagnostics. A wrong key is never an error: the result is
    garbled and ``suspect`` is set when decoded indices are inconsistent.
    With ``strict`` the first inconsistency raises ContainerError instead.
    """
    h = container.header
    n, z = h.block_n, h.channels
    d = build_mixed(n)
    seed_stream = RandomStream(h.seed, "public_seed")
    key_stream = RandomStream(key, "private_key")

    values = []
    for g in container.adhoc_blocks():
        _, vals = extract_adhoc(g, seed_stream, key_stream, n)
        values.append(vals)
    values = np.concatenate(values) if values else np.zeros(0, dtype=np.int64)
    notes = []
    indices = _parse_index_stream(values, h.n_blocks, n, d.m, d.m, notes)
    if notes and strict:
        raise ContainerError(notes[0])

    blocks = np.zeros((h.n_blocks, z, n, n))
    payload = [[] for _ in range(z)]
    for q, g in enumerate(container.host_blocks()):
        state, dropped = _lenient_state(indices[q], d, d)
        if dropped:
            notes.append(f"host {q}: {dropped} dependent atoms dropped")
            if strict:
                raise ContainerError(notes[-1])
        indices[q] = state.selected
        approx, vals = _extract_host(g, state, seed_stream, key_stream)
        blocks[q] = approx
        for c in range(z):
            payload[c].append(vals[c])
    payload = [np.concatenate(p) if p else np.zeros(0) for p in payload]

    pos = 0
    for q in range(h.n_hosts, h.n_blocks):
        k = len(indices[q])
        coeffs = np.zeros((z, k))
        for c in range(z):
            got = payload[c][pos : pos + k]
            coeffs[c, : len(got)] = got
        if pos + k > len(payload[0]):
            notes.append("coefficient stream exhausted")
            if strict:
                raise ContainerError(notes[-1])
        pos += k
        blocks[q] = synthesize(indices[q], coeffs, d, d)

    image = assemble_image(blocks, (h.orig_nx, h.orig_ny))
    suspect = bool(notes)
    if suspect:
        log.warning("decoded container is inconsistent (wrong key suspected): %s", notes[0])
    return UnfoldResult(image=image, suspect=suspect, notes=notes)


def unfold(container, key):
    return decode(container, key).image
