"""Frame quality metrics: PSNR, SSIM and Charbonnier distance."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np
from scipy.ndimage import correlate1d

PSNR_CAP_DB = 99.0
CHARBONNIER_EPS = 1e-12
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class FrameScore:
    frame_index: int
    psnr: float
    ssim: float
    pixel_loss: float


def _check_shapes(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """PSNR in dB over all channels, capped at 99 dB for identical frames."""
    _check_shapes(a, b)
    mse = np.mean((a.astype(np.float64) - b.astype(np.float64)) ** 2)
    if mse == 0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 10.0 * math.log10(255.0 ** 2 / mse))


def luma(image: np.ndarray) -> np.ndarray:
    image = np.asarray(image, dtype=np.float64)
    return image @ LUMA_WEIGHTS if image.ndim == 3 else image


def _gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2
    g = np.exp(-(x ** 2) / (2 * sigma ** 2))
    return g / g.sum()


def _filter_valid(img: np.ndarray, g: np.ndarray) -> np.ndarray:
    r = len(g) // 2
    out = correlate1d(correlate1d(img, g, axis=0, mode="constant"), g, axis=1, mode="constant")
    return out[r:-r, r:-r]


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Mean SSIM on BT.601 luma with an 11x11 Gaussian window (sigma 1.5)."""
    _check_shapes(a, b)
    if a.shape[0] < 11 or a.shape[1] < 11:
        raise ValueError("SSIM needs frames of at least 11x11")
    x, y = luma(a), luma(b)
    g = _gaussian_window()
    c1, c2 = (0.01 * 255) ** 2, (0.03 * 255) ** 2
    mx, my = _filter_valid(x, g), _filter_valid(y, g)
    sxx = _filter_valid(x * x, g) - mx * mx
    syy = _filter_valid(y * y, g) - my * my
    sxy = _filter_valid(x * y, g) - mx * my
    num = (2 * mx * my + c1) * (2 * sxy + c2)
    den = (mx * mx + my * my + c1) * (sxx + syy + c2)
    return float(np.mean(num / den))


def charbonnier(a: np.ndarray, b: np.ndarray, eps: float = CHARBONNIER_EPS) -> float:
    """Sum over every pixel and channel of sqrt((a - b)^2 + eps^2)."""
    _check_shapes(a, b)
    d = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    return float(np.sqrt(d * d + eps * eps).sum())


def charbonnier_grad(x, eps: float = CHARBONNIER_EPS):
    """Derivative of sqrt(x^2 + eps^2) with respect to x."""
    x = np.asarray(x, dtype=np.float64)
    return x / np.sqrt(x * x + eps * eps)


def score_frame(frame_index: int, shown: np.ndarray, truth: np.ndarray, pixel_loss: float) -> FrameScore:
    return FrameScore(frame_index, psnr(shown, truth), ssim(shown, truth), pixel_loss)


REPORT_COLUMNS = ("frame_index", "scheme", "psnr_db", "ssim", "pixel_loss")


def write_scores_csv(path: str | Path, scheme: str, scores: Iterable[FrameScore]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        for s in scores:
            writer.writerow([s.frame_index, scheme, f"{s.psnr:.6f}", f"{s.ssim:.6f}", f"{s.pixel_loss:.6f}"])


def read_scores_csv(path: str | Path) -> list[tuple[str, FrameScore]]:
    with open(path, newline="") as fh:
        return [(row["scheme"], FrameScore(int(row["frame_index"]), float(row["psnr_db"]),
                                           float(row["ssim"]), float(row["pixel_loss"])))
                for row in csv.DictReader(fh)]
