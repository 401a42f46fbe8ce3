import dataclasses

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sceif.container import (
    HEADER_WORDS,
    ContainerError,
    HeaderFields,
    assemble_image,
    container_bytes,
    decode_header,
    dequantize_section,
    encode_header,
    from_words,
    pack_container,
    parse_container,
    quantize_section,
    read_container,
    tile_image,
    to_words,
    write_container,
)
from sceif import netpbm


def header(**kw):
    base = dict(orig_nx=16, orig_ny=40, channels=1, block_n=8, n_blocks=10, n_hosts=3, n_adhoc=2, seed=7, flags=8)
    base.update(kw)
    return HeaderFields(**base)


def test_quantize_examples():
    words, lo, scale = quantize_section(np.array([-1.0, 0.0, 1.0]))
    assert words.tolist() == [0, 32768, 65535]
    assert lo == -1.0 and scale == 65535 / 2
    words, lo, scale = quantize_section(np.full(4, 3.5))
    assert words.tolist() == [0, 0, 0, 0] and lo == 3.5 and scale == 1.0
    words, lo, scale = quantize_section(np.zeros(0))
    assert words.size == 0 and (lo, scale) == (0.0, 1.0)
    with pytest.raises(ValueError):
        quantize_section(np.array([0.0, np.nan]))


def test_quantize_error_bound(rng):
    v = rng.normal(0, 300, 5000)
    words, lo, scale = quantize_section(v)
    err = np.abs(dequantize_section(words, lo, scale) - v)
    assert err.max() <= 0.5 / scale + 1e-9


def test_header_round_trip():
    h = header(host_min=-123.456, host_scale=0.1 + 0.2, adhoc_min=-1e-300, adhoc_scale=65535 / 7.0)
    row = encode_header(h, 40)
    assert row.shape == (40,) and row[0] == 0x5343 and row[1] == 1
    assert np.all(row[HEADER_WORDS:] == 0)
    assert decode_header(row) == h


@given(
    st.integers(1, 2**32 - 1), st.integers(1, 2**32 - 1), st.integers(0, 2**32 - 1),
    st.floats(allow_nan=False, allow_infinity=False), st.integers(0, 0xFFFF),
)
def test_header_extremes(nx, ny, seed, f, flags):
    h = header(orig_nx=nx, orig_ny=ny, seed=seed, host_min=f, flags=flags)
    assert decode_header(encode_header(h, 64)) == h


def test_header_errors():
    with pytest.raises(ContainerError, match="too narrow"):
        encode_header(header(), 32)
    with pytest.raises(ContainerError):
        encode_header(header(seed=2**32), 40)
    row = encode_header(header(), 40)
    row[0] = 0x1234
    with pytest.raises(ContainerError, match="magic"):
        decode_header(row)


def test_bits_flag():
    assert header(flags=16).bits == 16
    assert header(flags=0).bits == 8


def test_tile_and_assemble(rng):
    img = rng.uniform(0, 255, (13, 9, 3))
    blocks = tile_image(img, 8)
    assert blocks.shape == (4, 3, 8, 8)
    # edge padding replicates the last row / column
    np.testing.assert_array_equal(blocks[3, 0, 7, :], np.pad(img[12, 8:, 0], (0, 7), mode="edge"))
    np.testing.assert_array_equal(assemble_image(blocks, (13, 9)), img)
    gray = rng.uniform(0, 255, (16, 24))
    np.testing.assert_array_equal(assemble_image(tile_image(gray, 8), (16, 24)), gray)


def make_container(rng, z=1):
    h = header(channels=z, orig_nx=24, orig_ny=40, n_blocks=15, n_hosts=6, n_adhoc=4)
    hosts = rng.normal(0, 100, (6, z, 8, 8))
    adhoc = rng.normal(0, 30, (4, 8, 8))
    return pack_container(h, hosts, adhoc), hosts, adhoc


@pytest.mark.parametrize("z", [1, 3])
def test_pack_layout(rng, z):
    c, hosts, adhoc = make_container(rng, z)
    np.testing.assert_array_equal(c.host_blocks(), hosts)
    np.testing.assert_array_equal(c.adhoc_blocks(), adhoc)
    rows, width, zz = c.shape
    assert width == 40 and zz == z
    assert rows == 16 + (8 if z == 3 else 8) + 1


@pytest.mark.parametrize("z", [1, 3])
def test_file_round_trip(rng, tmp_path, z):
    c, hosts, adhoc = make_container(rng, z)
    path = tmp_path / "c.ppm"
    write_container(c, path)
    back = read_container(path)
    assert back.header.seed == 7 and back.header.channels == z
    np.testing.assert_allclose(back.host_blocks(), hosts, atol=1e-2)
    np.testing.assert_allclose(back.adhoc_blocks(), adhoc, atol=1e-2)
    # read then write reproduces the bytes exactly
    assert container_bytes(back) == path.read_bytes()
    np.testing.assert_array_equal(to_words(from_words(to_words(back))), to_words(back))


def test_parse_errors(rng):
    c, _, _ = make_container(rng)
    data = container_bytes(c)
    with pytest.raises(ContainerError, match="16-bit"):
        parse_container(netpbm.encode(np.zeros((4, 40), dtype=np.uint8)))
    with pytest.raises(ContainerError):
        parse_container(data[:-10])
    words = to_words(c)
    with pytest.raises(ContainerError, match="geometry"):
        from_words(words[:, 1:])
    with pytest.raises(ContainerError):
        parse_container(b"P2\n1 1\n255\n0")


def test_header_inconsistent_blocks(rng):
    c, _, _ = make_container(rng)
    bad = dataclasses.replace(c.header, n_blocks=99)
    with pytest.raises(ContainerError):
        pack_container(bad, np.zeros((6, 1, 8, 8)), np.zeros((4, 8, 8)))
