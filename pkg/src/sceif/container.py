"""
Folded-image container: block tiling, 16-bit section quantization, the header
row and the on-disk PGM/PPM representation.

Layout of a container with ``Z`` channels and width ``w`` (the padded image
width)::

    host rows     ceil(H / bpr) block rows, hosts in raster order, per channel
    ad-hoc rows   ceil(ceil(H_tilde / Z) / bpr) block rows; ad-hoc block t goes
                  to channel t % Z, slot t // Z
    header row    one row of 16-bit words in channel 0, zeros elsewhere

where ``bpr = w // block_n``. Unused block slots are zero.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, replace

import numpy as np

from . import netpbm

MAGIC = 0x5343
VERSION = 1
HEADER_WORDS = 33
WORD_MAX = 65535


class ContainerError(ValueError):
    """Malformed or inconsistent container."""


# Images and blocks ---------------------------------------------------------


def to_channels(image):
    """(rows, cols) or (rows, cols, Z) -> (Z, rows, cols) float64."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim == 2:
        return arr[None]
    if arr.ndim == 3:
        return np.moveaxis(arr, -1, 0)
    raise ValueError(f"expected a 2D or 3D image, got shape {arr.shape}")


def from_channels(channels):
    if channels.shape[0] == 1:
        return channels[0]
    return np.moveaxis(channels, 0, -1)


def tile_image(image, block_n):
    """Raster-order ``(Q, Z, n, n)`` blocks; edges padded by replicating the last row/column."""
    ch = to_channels(image)
    z, nx, ny = ch.shape
    px = -nx % block_n
    py = -ny % block_n
    if px or py:
        ch = np.pad(ch, ((0, 0), (0, px), (0, py)), mode="edge")
    bx, by = ch.shape[1] // block_n, ch.shape[2] // block_n
    blocks = ch.reshape(z, bx, block_n, by, block_n).transpose(1, 3, 0, 2, 4)
    return blocks.reshape(bx * by, z, block_n, block_n).copy()


def assemble_image(blocks, dims):
    """Inverse of :func:`tile_image`; ``dims`` is the original ``(rows, cols)``."""
    blocks = np.asarray(blocks, dtype=np.float64)
    q, z, n, _ = blocks.shape
    nx, ny = dims
    bx, by = math.ceil(nx / n), math.ceil(ny / n)
    if bx * by != q:
        raise ValueError(f"{q} blocks do not tile a {nx}x{ny} image")
    ch = blocks.reshape(bx, by, z, n, n).transpose(2, 0, 3, 1, 4).reshape(z, bx * n, by * n)
    return from_channels(ch[:, :nx, :ny])


# Quantization --------------------------------------------------------------


def quantize_section(values, bits=16):
    """Affine map of ``values`` onto integer words in [0, 2**bits - 1].

    Returns ``(words, min, scale)`` with ``word = round((v - min) * scale)``.
    """
    v = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise ValueError("cannot quantize non-finite values")
    top = 2**bits - 1
    if v.size == 0:
        return np.zeros(v.shape, dtype=np.uint16), 0.0, 1.0
    lo, hi = float(v.min()), float(v.max())
    scale = top / (hi - lo) if hi > lo else 1.0
    words = np.clip(np.rint((v - lo) * scale), 0, top)
    return words.astype(np.uint16), lo, scale


def dequantize_section(words, vmin, scale):
    return np.asarray(words, dtype=np.float64) / scale + vmin


# Header --------------------------------------------------------------------


@dataclass(frozen=True)
class HeaderFields:
    orig_nx: int
    orig_ny: int
    channels: int
    block_n: int
    n_blocks: int
    n_hosts: int
    n_adhoc: int
    seed: int
    flags: int = 0
    host_min: float = 0.0
    host_scale: float = 1.0
    adhoc_min: float = 0.0
    adhoc_scale: float = 1.0

    @property
    def bits(self):
        """Bit depth of the source image, kept in the low 5 bits of ``flags``."""
        return self.flags & 0x1F or 8


def _u32_words(value):
    if not 0 <= value <= 0xFFFFFFFF:
        raise ContainerError(f"header value {value} does not fit in 32 bits")
    return [value >> 16, value & 0xFFFF]


def _f64_words(value):
    return list(struct.unpack(">4H", struct.pack(">d", value)))


def encode_header(h, width):
    words = [MAGIC, VERSION]
    words += _u32_words(h.orig_nx) + _u32_words(h.orig_ny)
    for small in (h.channels, h.block_n):
        if not 0 <= small <= WORD_MAX:
            raise ContainerError(f"header value {small} does not fit in 16 bits")
        words.append(small)
    words += _u32_words(h.n_blocks) + _u32_words(h.n_hosts) + _u32_words(h.n_adhoc)
    words += _u32_words(h.seed)
    if not 0 <= h.flags <= WORD_MAX:
        raise ContainerError("flags do not fit in 16 bits")
    words.append(h.flags)
    for f in (h.host_min, h.host_scale, h.adhoc_min, h.adhoc_scale):
        words += _f64_words(f)
    assert len(words) == HEADER_WORDS
    if width < HEADER_WORDS:
        raise ContainerError(f"image too narrow for the header ({width} < {HEADER_WORDS} words)")
    row = np.zeros(width, dtype=np.uint16)
    row[:HEADER_WORDS] = words
    return row


def decode_header(row):
    w = [int(x) for x in np.asarray(row)[:HEADER_WORDS]]
    if len(w) < HEADER_WORDS:
        raise ContainerError("header row too short")
    if w[0] != MAGIC or w[1] != VERSION:
        raise ContainerError("bad container magic or version")

    def u32(i):
        return (w[i] << 16) | w[i + 1]

    def f64(i):
        return struct.unpack(">d", struct.pack(">4H", *w[i : i + 4]))[0]

    return HeaderFields(
        orig_nx=u32(2),
        orig_ny=u32(4),
        channels=w[6],
        block_n=w[7],
        n_blocks=u32(8),
        n_hosts=u32(10),
        n_adhoc=u32(12),
        seed=u32(14),
        flags=w[16],
        host_min=f64(17),
        host_scale=f64(21),
        adhoc_min=f64(25),
        adhoc_scale=f64(29),
    )


# Container -----------------------------------------------------------------


def _geometry(h):
    n = h.block_n
    width = math.ceil(h.orig_ny / n) * n
    bpr = width // n
    host_rows = math.ceil(h.n_hosts / bpr) * n
    adhoc_rows = math.ceil(math.ceil(h.n_adhoc / h.channels) / bpr) * n
    return width, bpr, host_rows, adhoc_rows


def _check_header(h):
    if h.orig_nx < 1 or h.orig_ny < 1 or h.block_n < 1 or h.channels not in (1, 3):
        raise ContainerError("invalid dimensions in header")
    q = math.ceil(h.orig_nx / h.block_n) * math.ceil(h.orig_ny / h.block_n)
    if q != h.n_blocks or h.n_hosts > h.n_blocks:
        raise ContainerError("inconsistent block counts in header")


@dataclass
class FoldedContainer:
    header: HeaderFields
    hosts: np.ndarray  # (Z, host_rows, width)
    adhoc: np.ndarray  # (Z, adhoc_rows, width)
    words: np.ndarray | None = None  # set when decoded from 16-bit words

    @property
    def shape(self):
        z, hr, w = self.hosts.shape
        return (hr + self.adhoc.shape[1] + 1, w, z)

    def host_blocks(self):
        """Hosts as ``(H, Z, n, n)``."""
        h = self.header
        n = h.block_n
        z, rows, width = self.hosts.shape
        grid = self.hosts.reshape(z, rows // n, n, width // n, n).transpose(1, 3, 0, 2, 4)
        return grid.reshape(-1, z, n, n)[: h.n_hosts]

    def adhoc_blocks(self):
        """Ad-hoc blocks in stream order as ``(H_tilde, n, n)``."""
        h = self.header
        n = h.block_n
        z, rows, width = self.adhoc.shape
        grid = self.adhoc.reshape(z, rows // n, n, width // n, n).transpose(1, 3, 0, 2, 4)
        slots = grid.reshape(-1, z, n, n)
        # ad-hoc block t lives in slot t // Z of channel t % Z
        return slots.reshape(-1, n, n)[: h.n_adhoc]


def pack_container(header, host_blocks, adhoc_blocks):
    """Lay out ``(H, Z, n, n)`` hosts and ``(H_tilde, n, n)`` ad-hoc blocks."""
    _check_header(header)
    width, bpr, host_rows, adhoc_rows = _geometry(header)
    n, z = header.block_n, header.channels

    def grid(blocks, rows):
        slots = (rows // n) * bpr
        full = np.zeros((slots, z, n, n))
        full[: len(blocks)] = blocks
        g = full.reshape(rows // n, bpr, z, n, n).transpose(2, 0, 3, 1, 4)
        return g.reshape(z, rows, width)

    hosts = grid(np.asarray(host_blocks, dtype=np.float64).reshape(-1, z, n, n), host_rows)
    adhoc_flat = np.zeros((math.ceil(header.n_adhoc / z) * z, n, n))
    adhoc_flat[: header.n_adhoc] = np.asarray(adhoc_blocks, dtype=np.float64).reshape(-1, n, n)
    adhoc = grid(adhoc_flat.reshape(-1, z, n, n), adhoc_rows)
    return FoldedContainer(header=header, hosts=hosts, adhoc=adhoc)


def to_words(container):
    """Quantize both sections to 16 bits and append the header row: ``(Z, rows, width)`` uint16."""
    if container.words is not None:
        return container.words.copy()
    words_h, hmin, hscale = quantize_section(container.hosts)
    words_a, amin, ascale = quantize_section(container.adhoc)
    header = replace(container.header, host_min=hmin, host_scale=hscale, adhoc_min=amin, adhoc_scale=ascale)
    z, _, width = container.hosts.shape
    head = np.zeros((z, 1, width), dtype=np.uint16)
    head[0, 0] = encode_header(header, width)
    return np.concatenate([words_h, words_a, head], axis=1)


def from_words(words):
    words = np.asarray(words)
    if words.ndim != 3 or words.shape[1] < 1:
        raise ContainerError("container words must be (Z, rows, width)")
    header = decode_header(words[0, -1])
    _check_header(header)
    width, _, host_rows, adhoc_rows = _geometry(header)
    if words.shape != (header.channels, host_rows + adhoc_rows + 1, width):
        raise ContainerError(
            f"container geometry {words.shape} does not match header "
            f"({header.channels}, {host_rows + adhoc_rows + 1}, {width})"
        )
    hosts = dequantize_section(words[:, :host_rows], header.host_min, header.host_scale)
    adhoc = dequantize_section(words[:, host_rows : host_rows + adhoc_rows], header.adhoc_min, header.adhoc_scale)
    return FoldedContainer(header=header, hosts=hosts, adhoc=adhoc, words=words.astype(np.uint16))


def container_bytes(container):
    words = to_words(container)
    return netpbm.encode(from_channels(words).astype(np.uint16), maxval=WORD_MAX)


def write_container(container, path):
    with open(path, "wb") as fh:
        fh.write(container_bytes(container))


def parse_container(data):
    try:
        arr, maxval = netpbm.decode(data)
    except netpbm.NetpbmError as exc:
        raise ContainerError(f"unreadable container: {exc}") from exc
    if maxval != WORD_MAX:
        raise ContainerError("container must be 16-bit (maxval 65535)")
    return from_words(to_channels(arr).astype(np.uint16))


def read_container(path):
    with open(path, "rb") as fh:
        return parse_container(fh.read())
