"""Sparse 2D OMP image approximation and self-contained encrypted image folding."""

from .container import FoldedContainer, read_container, write_container
from .dictionary import build_mixed
from .folding import decode, fold, unfold
from .keystream import RandomStream
from .metrics import mssim, psnr, sparsity_ratio
from .omp2d import OmpConfig, approximate_block, approximate_image, rho_from_psnr

__version__ = "0.1.0"

__all__ = [
    "FoldedContainer",
    "OmpConfig",
    "RandomStream",
    "approximate_block",
    "approximate_image",
    "build_mixed",
    "decode",
    "fold",
    "mssim",
    "psnr",
    "read_container",
    "rho_from_psnr",
    "sparsity_ratio",
    "unfold",
    "write_container",
]
