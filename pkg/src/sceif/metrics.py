"""Image quality measures: MSE, PSNR, mean SSIM and the sparsity ratio."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .container import to_channels

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _pair(a, b):
    a = to_channels(a)
    b = to_channels(b)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def mse(a, b):
    a, b = _pair(a, b)
    return float(np.mean((a - b) ** 2))


def psnr(a, b, bits=8):
    """Peak signal-to-noise ratio in dB; ``inf`` for identical images."""
    err = mse(a, b)
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10((2**bits - 1) ** 2 / err)


def _gaussian_taps(size=SSIM_WINDOW, sigma=SSIM_SIGMA):
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(x**2) / (2.0 * sigma**2))
    return g / g.sum()


def _filter_valid(x, taps):
    r = len(taps) // 2
    y = correlate1d(x, taps, axis=0, mode="reflect")
    y = correlate1d(y, taps, axis=1, mode="reflect")
    return y[r:-r, r:-r]


def ssim_map(a, b, bits=8):
    """SSIM over every full 11x11 Gaussian window of two single-channel images."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if min(a.shape) < SSIM_WINDOW:
        raise ValueError(f"image smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")
    peak = 2**bits - 1
    c1 = (SSIM_K1 * peak) ** 2
    c2 = (SSIM_K2 * peak) ** 2
    w = _gaussian_taps()
    mu_a = _filter_valid(a, w)
    mu_b = _filter_valid(b, w)
    s_aa = _filter_valid(a * a, w) - mu_a * mu_a
    s_bb = _filter_valid(b * b, w) - mu_b * mu_b
    s_ab = _filter_valid(a * b, w) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * s_ab + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (s_aa + s_bb + c2)
    return num / den


def mssim(a, b, bits=8):
    """Mean SSIM, averaged over channels for color images."""
    a, b = _pair(a, b)
    return float(np.mean([ssim_map(x, y, bits).mean() for x, y in zip(a, b)]))


def sparsity_ratio(total_pixels, total_coeffs):
    if total_coeffs < 1:
        raise ZeroDivisionError("sparsity ratio undefined for zero coefficients")
    return total_pixels / total_coeffs


@dataclass
class QualityReport:
    psnr: float
    mse: float
    mssim: float
    sr: float | None = None

    def lines(self):
        out = [f"PSNR   {self.psnr:.2f} dB", f"MSE    {self.mse:.6g}", f"MSSIM  {self.mssim:.6f}"]
        if self.sr is not None:
            out.append(f"SR     {self.sr:.2f}")
        return out


def quality_report(reference, test, bits=8, sr=None):
    return QualityReport(psnr=psnr(reference, test, bits), mse=mse(reference, test),
                         mssim=mssim(reference, test, bits), sr=sr)
