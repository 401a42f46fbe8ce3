import math

import numpy as np
import pytest

from sceif.container import ContainerError, from_words, to_words
from sceif.folding import (
    NotFoldableError,
    build_adhoc_block,
    build_nullspace_basis,
    decode,
    embed_host,
    extract_adhoc,
    extract_host,
    fold,
    host_capacity,
    payload_size,
    plan_fold,
    unfold,
)
from sceif.keystream import RandomStream
from sceif.omp2d import BlockApproximation, approximate_image, project, state_from_indices, synthesize

from conftest import smooth_image


def fake_blocks(ks, z=1, n=8):
    out = []
    for k in ks:
        idx = [(17 + i // 8, 17 + i % 8) for i in range(k)]
        out.append(BlockApproximation(idx, np.ones((z, k)), n, 0.0, [0.0]))
    return out


def test_plan_small_example():
    plan = plan_fold(fake_blocks([10, 10, 10, 10]), 8)
    # H=1: capacity 54 >= 30
    assert plan.n_hosts == 1
    assert len(plan.index_stream) == 4 + 40
    assert plan.n_adhoc == 1
    assert len(plan.payload[0]) == 30


def test_plan_two_hosts_three_adhoc():
    ks = [60, 60, 5, 5, 5]
    plan = plan_fold(fake_blocks(ks), 8)
    # H=1: 4 >= 75 no; H=2: 8 >= 15 no; H=3: 67 >= 10 yes
    assert plan.n_hosts == 3
    stream = 5 + sum(ks)
    assert plan.n_adhoc == math.ceil(stream / 63) == 3


def test_plan_index_stream_layout():
    plan = plan_fold(fake_blocks([2, 0, 1]), 8)
    assert plan.index_stream.tolist() == [2, 17 * 40 - 40 + 17, 16 * 40 + 18, 0, 1, 16 * 40 + 17]


def test_plan_zero_atoms_no_hosts():
    plan = plan_fold(fake_blocks([0, 0, 0]), 8)
    assert plan.n_hosts == 0
    assert plan.n_adhoc == 1


def test_plan_not_foldable():
    with pytest.raises(NotFoldableError):
        plan_fold(fake_blocks([64, 64, 64]), 8)
    with pytest.raises(NotFoldableError):
        plan_fold([], 8)


def test_capacity_helpers():
    assert host_capacity([10, 20, 30], 2, 8) == 54 + 44
    assert payload_size([10, 20, 30], 2) == 30


def test_nullspace_basis_orthogonal(d8):
    s = state_from_indices([(1, 1), (5, 9), (30, 2)], d8, d8)
    u = build_nullspace_basis(s, RandomStream(1), RandomStream(2), 61, 8).reshape(61, -1)
    np.testing.assert_allclose(u @ u.T, np.eye(61), atol=1e-10)
    assert np.max(np.abs(u @ s.A.T)) < 1e-10
    assert build_nullspace_basis(s, RandomStream(1), RandomStream(2), 0, 8).shape == (0, 8, 8)


def test_embed_extract_round_trip(d8, rng):
    idx = [(1, 1), (2, 17), (40, 3)]
    s = state_from_indices(idx, d8, d8)
    c = rng.normal(0, 50, (3, 3))
    plain = synthesize(idx, c, d8, d8)
    payload = [rng.normal(0, 20, 61), rng.normal(0, 20, 10), np.zeros(0)]
    seed, key = RandomStream(11), RandomStream(12)
    bases = [build_nullspace_basis(s, seed, key, 61, 8) for _ in range(3)]
    g = embed_host(plain, payload, bases)
    np.testing.assert_allclose(project(s, g), plain, atol=1e-9)
    approx, got = extract_host(g, idx, d8, d8, RandomStream(11), RandomStream(12))
    np.testing.assert_allclose(approx, plain, atol=1e-9)
    np.testing.assert_allclose(got[0], payload[0], atol=1e-9)
    np.testing.assert_allclose(got[1][:10], payload[1], atol=1e-9)
    np.testing.assert_allclose(got[1][10:], 0, atol=1e-9)


def test_embed_overflow(d8):
    s = state_from_indices([(1, 1)], d8, d8)
    u = build_nullspace_basis(s, RandomStream(1), RandomStream(1), 63, 8)
    with pytest.raises(ValueError):
        embed_host(np.zeros((1, 8, 8)), [np.ones(64)], [u])


def test_extract_host_dependent_indices(d8):
    with pytest.raises(ContainerError):
        extract_host(np.zeros((8, 8)), [(1, 1), (1, 1)], d8, d8, RandomStream(1), RandomStream(1))


def test_adhoc_round_trip(rng):
    values = rng.integers(0, 1601, 63)
    g = build_adhoc_block(values, 63, RandomStream(4), RandomStream(5), 8)
    count, got = extract_adhoc(g, RandomStream(4), RandomStream(5), 8)
    assert count == 63
    np.testing.assert_array_equal(got, values)
    g = build_adhoc_block(values[:7], 7, RandomStream(4), RandomStream(5), 8)
    count, got = extract_adhoc(g, RandomStream(4), RandomStream(5), 8)
    assert count == 7 and got.tolist() == values[:7].tolist()


def test_adhoc_count_out_of_range():
    g = np.full((8, 8), 100 / 8)
    with pytest.raises(ContainerError):
        extract_adhoc(g, RandomStream(1), RandomStream(1), 8)


def test_wrong_key_payload_decorrelated(d8, rng):
    dots = []
    s = state_from_indices([(1, 1), (20, 20)], d8, d8)
    for t in range(100):
        h = rng.normal(0, 1, 62)
        u = build_nullspace_basis(s, RandomStream(t), RandomStream(1234567891), 62, 8)
        g = embed_host(np.zeros((1, 8, 8)), [h], [u])
        _, got = extract_host(g, [(1, 1), (20, 20)], d8, d8, RandomStream(t), RandomStream(1234567890))
        dots.append(abs(got[0] @ h) / (np.linalg.norm(got[0]) * np.linalg.norm(h)))
    assert np.mean(dots) < 0.3


@pytest.mark.parametrize("channels", [None, 3])
def test_fold_float_inversion(rng, channels):
    img = smooth_image(rng, (40, 56), channels=channels)
    ap = approximate_image(img, 40.0)
    folded = fold(img, 99, 7, approximation=ap)
    res = decode(folded, 99)
    assert not res.suspect
    assert np.max(np.abs(res.image - ap.plain)) < 1e-6


def test_fold_quantized_round_trip(rng):
    img = smooth_image(rng, (64, 64))
    ap = approximate_image(img, 43.0)
    got = unfold(from_words(to_words(fold(img, 5, 6, approximation=ap))), 5)
    assert 10 * np.log10(255**2 / np.mean((got - ap.plain) ** 2)) > 55


def test_wrong_key_lenient_and_strict(rng):
    img = smooth_image(rng, (64, 64)) + rng.normal(0, 3, (64, 64))
    folded = from_words(to_words(fold(img, 1234567891, 3)))
    res = decode(folded, 1234567890)
    assert res.suspect and res.notes
    assert res.image.shape == (64, 64)
    with pytest.raises(ContainerError):
        decode(folded, 1234567890, strict=True)


def test_fold_rejects_bad_seed(rng):
    with pytest.raises(ValueError):
        fold(np.zeros((16, 16)), 1, 2**32)


def test_fold_zero_image():
    folded = fold(np.zeros((16, 16)), 1, 2)
    assert folded.header.n_hosts == 0
    np.testing.assert_array_equal(unfold(folded, 1), 0)
