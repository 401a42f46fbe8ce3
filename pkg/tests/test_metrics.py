import math

import numpy as np
import pytest
from skimage.metrics import structural_similarity

from sceif.metrics import mse, mssim, psnr, quality_report, sparsity_ratio


def test_psnr_examples():
    a = np.zeros((10, 10))
    b = np.full((10, 10), 255 * 10 ** (-40 / 20))
    assert psnr(a, b) == pytest.approx(40.0)
    assert psnr(a, a) == math.inf
    assert psnr(a, np.full((10, 10), 255.0)) == pytest.approx(0.0)
    assert psnr(a, b, bits=16) == pytest.approx(40 + 20 * math.log10(65535 / 255))


def test_psnr_symmetric_and_monotone(rng):
    a = rng.uniform(0, 255, (32, 32, 3))
    n1 = rng.normal(0, 1, a.shape)
    assert psnr(a, a + n1) == pytest.approx(psnr(a + n1, a))
    assert psnr(a, a + n1) > psnr(a, a + 2 * n1)
    assert mse(a, a + 2) == pytest.approx(4.0)


def test_shape_mismatch():
    with pytest.raises(ValueError):
        psnr(np.zeros((4, 4)), np.zeros((4, 5)))


@pytest.mark.parametrize("shape", [(40, 52), (33, 29, 3)])
def test_mssim_matches_reference(rng, shape):
    a = rng.uniform(0, 255, shape)
    b = np.clip(a + rng.normal(0, 20, shape), 0, 255)
    ref = structural_similarity(
        a, b, data_range=255, gaussian_weights=True, sigma=1.5, use_sample_covariance=False,
        channel_axis=-1 if len(shape) == 3 else None,
    )
    assert mssim(a, b) == pytest.approx(ref, abs=1e-6)


def test_mssim_identity_and_small(rng):
    a = rng.uniform(0, 255, (16, 16))
    assert mssim(a, a) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        mssim(np.zeros((8, 8)), np.zeros((8, 8)))


def test_sparsity_ratio():
    assert sparsity_ratio(512 * 512, 40000) == pytest.approx(6.5536)
    with pytest.raises(ZeroDivisionError):
        sparsity_ratio(64, 0)


def test_report_lines(rng):
    a = rng.uniform(0, 255, (16, 16))
    lines = quality_report(a, a + 1, sr=4.0).lines()
    assert lines[0].startswith("PSNR") and lines[-1] == "SR     4.00"
