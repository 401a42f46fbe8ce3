"""Binary PGM (P5) / PPM (P6) reading and writing, 8 or 16 bit."""

from __future__ import annotations

import re

import numpy as np


class NetpbmError(ValueError):
    pass


_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def _parse_header(data):
    pos = 0
    fields = []
    for _ in range(4):
        m = _TOKEN.match(data, pos)
        if m is None:
            raise NetpbmError("truncated netpbm header")
        fields.append(m.group(1))
        pos = m.end()
    # exactly one whitespace byte separates the header from the raster
    if pos >= len(data) or data[pos : pos + 1] not in b" \t\r\n":
        raise NetpbmError("malformed netpbm header")
    magic = fields[0]
    if magic not in (b"P5", b"P6"):
        raise NetpbmError(f"unsupported netpbm type {magic!r}")
    try:
        width, height, maxval = (int(f) for f in fields[1:])
    except ValueError:
        raise NetpbmError("non-numeric netpbm header field") from None
    if width < 1 or height < 1 or not 0 < maxval < 65536:
        raise NetpbmError("invalid netpbm dimensions or maxval")
    return magic, width, height, maxval, pos + 1


def decode(data):
    """Decode P5/P6 bytes into ``(array, maxval)``.

    Gray images come back as ``(rows, cols)``, color as ``(rows, cols, 3)``;
    dtype is uint8 for maxval < 256 and uint16 otherwise.
    """
    magic, width, height, maxval, offset = _parse_header(data)
    channels = 3 if magic == b"P6" else 1
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    count = width * height * channels
    need = count * dtype.itemsize
    if len(data) - offset < need:
        raise NetpbmError("truncated netpbm raster")
    arr = np.frombuffer(data, dtype=dtype, count=count, offset=offset)
    arr = arr.astype(np.uint16 if maxval > 255 else np.uint8)
    shape = (height, width, 3) if channels == 3 else (height, width)
    return arr.reshape(shape), maxval


def encode(arr, maxval=None):
    arr = np.asarray(arr)
    if arr.ndim == 3 and arr.shape[2] == 3:
        magic = b"P6"
    elif arr.ndim == 2:
        magic = b"P5"
    else:
        raise NetpbmError(f"cannot encode array of shape {arr.shape}")
    if maxval is None:
        maxval = 255 if arr.dtype == np.uint8 else 65535
    if arr.size and (arr.min() < 0 or arr.max() > maxval):
        raise NetpbmError("sample values outside [0, maxval]")
    dtype = ">u2" if maxval > 255 else "u1"
    height, width = arr.shape[:2]
    header = b"%s\n%d %d\n%d\n" % (magic, width, height, maxval)
    return header + np.ascontiguousarray(arr, dtype=dtype).tobytes()


def read(path):
    with open(path, "rb") as fh:
        return decode(fh.read())


def write(path, arr, maxval=None):
    with open(path, "wb") as fh:
        fh.write(encode(arr, maxval))


def read_image(path):
    """Read an image as float64 plus its bit depth (8 or 16)."""
    arr, maxval = read(path)
    bits = 8 if maxval <= 255 else 16
    return arr.astype(np.float64), bits


def write_image(path, image, bits=8):
    """Round and clip a float image to ``bits`` and write it."""
    peak = 2**bits - 1
    out = np.clip(np.rint(image), 0, peak)
    write(path, out.astype(np.uint8 if bits == 8 else np.uint16), maxval=peak)
