"""
Simultaneous multi-channel Orthogonal Matching Pursuit in 2D.

Blocks are approximated with atoms ``dx[:, lx] (x) dy[:, ly]`` shared by all
channels. Coefficients come from biorthogonal (dual) matrices that are updated
adaptively each time an atom is added, so every intermediate approximation is
the orthogonal projection of the block onto the span of the selected atoms.

All 2D quantities are handled flattened to vectors of length ``n*n``.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .container import assemble_image, tile_image
from .dictionary import build_mixed


class DependentAtomError(ValueError):
    pass


class NoSelectableAtom(Exception):
    pass


@dataclass
class OmpConfig:
    rho: float
    max_k: int | None = None
    tol_dependent: float = 1e-10

    def __post_init__(self):
        if self.rho < 0:
            raise ValueError("rho must be non-negative")
        if self.max_k is not None and self.max_k < 1:
            raise ValueError("max_k must be at least 1")


@dataclass
class OmpState:
    """Selected atoms ``A``, orthogonal Gram-Schmidt vectors ``W`` and duals ``B``.

    Row ``i`` of each array is the flattened matrix for the i-th selected atom.
    """

    shape: tuple
    selected: list = field(default_factory=list)
    A: np.ndarray = None
    W: np.ndarray = None
    B: np.ndarray = None

    def __post_init__(self):
        size = self.shape[0] * self.shape[1]
        if self.A is None:
            self.A = np.empty((0, size))
            self.W = np.empty((0, size))
            self.B = np.empty((0, size))

    @property
    def k(self):
        return len(self.selected)


@dataclass
class BlockApproximation:
    indices: list
    coeffs: np.ndarray  # (Z, K)
    block_n: int
    residual_sq: float
    residual_trace: list = field(default_factory=list)

    @property
    def k(self):
        return len(self.indices)

    @property
    def channels(self):
        return self.coeffs.shape[0]


def new_state(n):
    return OmpState(shape=(n, n))


def _as_channels(blocks):
    arr = np.asarray(blocks, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[None]
    return arr


def correlations(residuals, dx, dy):
    """Channel-summed absolute correlations ``sum_z |dx^T R_z dy|``, shape (M_x, M_y)."""
    r = _as_channels(residuals)
    return np.abs(dx.atoms.T @ r @ dy.atoms).sum(axis=0)


def select_atom(residuals, dx, dy, blocked=()):
    """Index pair (1-based) with the largest channel-summed absolute correlation.

    Ties go to the smallest flat label. Raises NoSelectableAtom when every
    admissible score is zero.
    """
    scores = correlations(residuals, dx, dy)
    for lx, ly in blocked:
        scores[lx - 1, ly - 1] = -1.0
    flat = int(np.argmax(scores))
    if not scores.flat[flat] > 0.0:
        raise NoSelectableAtom()
    lx, ly = divmod(flat, dy.m)
    return lx + 1, ly + 1


def extend_state(state, pair, dx, dy, tol=1e-10):
    """Append atom ``pair`` and update the duals. Returns the same (mutated) state."""
    lx, ly = pair
    a = np.outer(dx.atoms[:, lx - 1], dy.atoms[:, ly - 1]).ravel()
    w = a.copy()
    if state.k:
        wn = state.W
        sq = np.einsum("ij,ij->i", wn, wn)
        w -= ((wn @ w) / sq) @ wn
        w -= ((wn @ w) / sq) @ wn
    w_sq = float(w @ w)
    if math.sqrt(w_sq) <= tol * np.linalg.norm(a):
        raise DependentAtomError(f"atom {pair} is dependent on the selected set")
    b_new = w / w_sq
    if state.k:
        state.B = state.B - np.outer(state.B @ a, b_new)
    state.A = np.vstack([state.A, a])
    state.W = np.vstack([state.W, w])
    state.B = np.vstack([state.B, b_new])
    state.selected.append((int(lx), int(ly)))
    return state


def state_from_indices(indices, dx, dy, tol=1e-10):
    state = new_state(dx.n)
    for pair in indices:
        extend_state(state, pair, dx, dy, tol)
    return state


def coefficients(state, channels):
    """Per-channel coefficients ``<B_n, I_z>``, shape (Z, k)."""
    x = _as_channels(channels)
    return x.reshape(x.shape[0], -1) @ state.B.T


def project(state, x):
    """Orthogonal projection onto the span of the selected atoms.

    Accepts a single block or a stack of blocks along the leading axis.
    """
    x = np.asarray(x, dtype=np.float64)
    n2 = state.shape[0] * state.shape[1]
    flat = x.reshape(-1, n2)
    if state.k == 0:
        return np.zeros_like(x)
    out = (flat @ state.B.T) @ state.A
    return out.reshape(x.shape)


def synthesize(indices, coeffs, dx, dy):
    """Blocks ``sum_n c_n^z A_n`` for each channel, shape (Z, n, n)."""
    coeffs = np.atleast_2d(np.asarray(coeffs, dtype=np.float64))
    out = np.zeros((coeffs.shape[0], dx.n, dy.n))
    if len(indices) == 0:
        return out
    lx = np.array([p[0] for p in indices]) - 1
    ly = np.array([p[1] for p in indices]) - 1
    # sum_n c[z,n] dx[:,lx_n] dy[:,ly_n]^T
    return np.einsum("zn,in,jn->zij", coeffs, dx.atoms[:, lx], dy.atoms[:, ly])


def approximate_block(blocks, dx, dy, cfg, on_step=None):
    """Approximate one block (all channels share the atoms) until
    ``sum_z ||R_z||_F^2 < cfg.rho``, ``cfg.max_k`` atoms, or no atom is left.

    ``on_step(state, residuals)`` is called after every accepted atom.
    """
    x = _as_channels(blocks)
    z, n, _ = x.shape
    max_k = cfg.max_k or n * n
    state = new_state(n)
    blocked = set()
    residuals = x.copy()
    energy = float(np.sum(residuals**2))
    trace = [energy]
    c = np.zeros((z, 0))
    while energy >= cfg.rho and state.k < max_k:
        try:
            pair = select_atom(residuals, dx, dy, blocked)
        except NoSelectableAtom:
            break
        blocked.add(pair)
        try:
            extend_state(state, pair, dx, dy, cfg.tol_dependent)
        except DependentAtomError:
            continue
        c = coefficients(state, x)
        residuals = x - (c @ state.A).reshape(x.shape)
        energy = float(np.sum(residuals**2))
        trace.append(energy)
        if on_step is not None:
            on_step(state, residuals)
    return BlockApproximation(
        indices=list(state.selected),
        coeffs=c,
        block_n=n,
        residual_sq=energy,
        residual_trace=trace,
    )


def rho_from_psnr(target_psnr, bits=8, block_n=8, channels=1):
    """Per-block squared-error budget matching ``target_psnr`` on average."""
    if target_psnr < 0:
        raise ValueError("target_psnr must be non-negative")
    peak = (2**bits - 1) ** 2
    return channels * block_n**2 * peak * 10.0 ** (-target_psnr / 10.0)


def truncate(approx, blocks, k, dx, dy):
    """Approximation made of the first ``k`` atoms of ``approx`` (same greedy path)."""
    if k >= approx.k:
        return approx
    x = _as_channels(blocks)
    indices = approx.indices[:k]
    if k == 0:
        c = np.zeros((x.shape[0], 0))
        res = float(np.sum(x**2))
    else:
        state = state_from_indices(indices, dx, dy)
        c = coefficients(state, x)
        res = float(np.sum((x - (c @ state.A).reshape(x.shape)) ** 2))
    return BlockApproximation(indices, c, approx.block_n, res, approx.residual_trace[: k + 1])


# Image-level driver --------------------------------------------------------


def _approx_chunk(args):
    blocks, n, rho, max_k, tol = args
    d = build_mixed(n)
    cfg = OmpConfig(rho=rho, max_k=max_k, tol_dependent=tol)
    return [approximate_block(b, d, d, cfg) for b in blocks]


def approximate_blocks(blocks, cfg, dictionary=None, workers=1):
    """Approximate a ``(Q, Z, n, n)`` block stack with the mixed dictionary.

    Results do not depend on ``workers``.
    """
    blocks = np.asarray(blocks, dtype=np.float64)
    n = blocks.shape[-1]
    d = dictionary if dictionary is not None else build_mixed(n)
    if workers is None or workers <= 1 or len(blocks) < 2 * workers:
        return [approximate_block(b, d, d, cfg) for b in blocks]
    chunks = np.array_split(np.arange(len(blocks)), workers * 4)
    jobs = [(blocks[c], n, cfg.rho, cfg.max_k, cfg.tol_dependent) for c in chunks if len(c)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_approx_chunk, jobs))
    return [a for part in parts for a in part]


def reconstruct_blocks(approxs, dictionary):
    if not approxs:
        return np.zeros((0, 1, dictionary.n, dictionary.n))
    return np.stack([synthesize(a.indices, a.coeffs, dictionary, dictionary) for a in approxs])


def stopping_index(trace, rho):
    """Number of atoms at which the criterion ``energy < rho`` is first met."""
    for k, e in enumerate(trace):
        if e < rho:
            return k
    return len(trace) - 1


def calibrate_rho(approxs, target_psnr, bits, n_values, rho_min=None, iters=60):
    """Largest per-block ``rho`` whose truncated paths still give PSNR >= target.

    ``approxs`` must come from a run with ``rho_min`` or smaller (the greedy path
    does not depend on ``rho``, only where it stops). ``n_values`` is the pixel
    count times channel count used for the MSE.
    """
    peak = (2**bits - 1) ** 2
    max_err = n_values * peak * 10.0 ** (-target_psnr / 10.0)
    width = max(len(a.residual_trace) for a in approxs)
    traces = np.array(
        [a.residual_trace + [a.residual_trace[-1]] * (width - len(a.residual_trace)) for a in approxs]
    )
    rows = np.arange(len(traces))

    def total(rho):
        below = traces < rho
        k = np.where(below.any(axis=1), below.argmax(axis=1), width - 1)
        return float(traces[rows, k].sum())

    lo = float(traces[:, -1].min()) if rho_min is None else rho_min
    hi = float(traces[:, 0].max()) + 1.0
    if total(lo) > max_err:
        return lo
    # invariant: total(lo) <= max_err < total(hi) (or hi is beyond every start)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if total(mid) <= max_err:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-9 * hi:
            break
    return lo


def psnr_from_error(total_sq, n_values, bits):
    if total_sq <= 0:
        return math.inf
    return 10.0 * math.log10((2**bits - 1) ** 2 * n_values / total_sq)


@dataclass
class ImageApproximation:
    """Block approximations of a whole image plus the assembled plain-text image."""

    blocks: list
    plain: np.ndarray
    rho: float
    bits: int
    block_n: int

    @property
    def n_atoms(self):
        return sum(a.k for a in self.blocks)

    @property
    def sparsity_ratio(self):
        """Pixels per coefficient (atoms are shared by channels, so per channel)."""
        nx, ny = self.plain.shape[:2]
        if self.n_atoms == 0:
            raise ZeroDivisionError("zero coefficients")
        return nx * ny / self.n_atoms


def approximate_image(image, target_psnr=43.0, bits=8, block_n=8, *, rho=None, calibrate=True,
                      max_k=None, workers=1):
    """Approximate ``image`` block by block.

    With ``rho`` given it is used as is. Otherwise the per-block budget derived
    from ``target_psnr`` is used and, if ``calibrate``, enlarged to the largest
    value still meeting the target over the whole image.
    """
    blocks = tile_image(image, block_n)
    q, z = blocks.shape[:2]
    d = build_mixed(block_n)
    if rho is not None:
        approxs = approximate_blocks(blocks, OmpConfig(rho=rho, max_k=max_k), d, workers)
    else:
        rho = rho_from_psnr(target_psnr, bits, block_n, z)
        approxs = approximate_blocks(blocks, OmpConfig(rho=rho, max_k=max_k), d, workers)
        if calibrate:
            rho = calibrate_rho(approxs, target_psnr, bits, q * z * block_n**2, rho_min=rho)
            approxs = [
                truncate(a, b, stopping_index(a.residual_trace, rho), d, d)
                for a, b in zip(approxs, blocks)
            ]
    dims = np.shape(image)[:2]
    plain = assemble_image(reconstruct_blocks(approxs, d), dims)
    return ImageApproximation(blocks=approxs, plain=plain, rho=rho, bits=bits, block_n=block_n)
