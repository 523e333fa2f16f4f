from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from oracles import charbonnier_loop
from skimage.metrics import structural_similarity

from statecast.metrics import (CHARBONNIER_EPS, FrameScore, charbonnier, luma, psnr, read_scores_csv,
                               ssim, write_scores_csv)


def rand_img(seed, h=32, w=40):
    return np.random.default_rng(seed).integers(0, 256, size=(h, w, 3), dtype=np.uint8)


def test_psnr_cases():
    a = rand_img(0)
    assert psnr(a, a) == 99.0
    b = np.full((8, 8, 3), 100, np.uint8)
    assert psnr(b, b + 16) == pytest.approx(10 * math.log10(255**2 / 256))
    assert psnr(b + 16, b) == pytest.approx(24.0484, abs=1e-4)
    assert psnr(np.zeros((8, 8, 3), np.uint8), np.full((8, 8, 3), 255, np.uint8)) == 0.0


def test_psnr_shape_mismatch():
    with pytest.raises(ValueError):
        psnr(np.zeros((8, 8, 3)), np.zeros((8, 9, 3)))


def test_ssim_cases():
    a = rand_img(1, 48, 48)
    assert ssim(a, a) == pytest.approx(1.0)
    smooth = np.clip(np.kron(rand_img(2, 6, 6), np.ones((8, 8, 1))).astype(int), 0, 245).astype(np.uint8)
    v = ssim(smooth, smooth + 10)
    assert 0.9 < v < 1.0
    noise = ssim(rand_img(3, 64, 64), rand_img(4, 64, 64))
    assert abs(noise) < 0.2
    with pytest.raises(ValueError):
        ssim(np.zeros((8, 8, 3)), np.zeros((8, 8, 3)))


@pytest.mark.parametrize("seed", range(3))
def test_ssim_matches_skimage(seed):
    a, b = rand_img(seed, 40, 56), rand_img(seed + 10, 40, 56)
    b = ((a.astype(int) + b.astype(int)) // 2).astype(np.uint8)
    ref = structural_similarity(luma(a), luma(b), gaussian_weights=True, sigma=1.5,
                                use_sample_covariance=False, data_range=255.0)
    assert ssim(a, b) == pytest.approx(ref, abs=1e-9)


def test_charbonnier_cases():
    a = rand_img(5)
    assert charbonnier(a, a) < 1e-3
    b = a.copy()
    b[3, 4, 1] = a[3, 4, 1] + 3 if a[3, 4, 1] < 250 else a[3, 4, 1] - 3
    n = a.size
    assert charbonnier(a, b) == pytest.approx(3 + (n - 1) * CHARBONNIER_EPS, rel=1e-12)


@pytest.mark.parametrize("seed", range(3))
def test_charbonnier_matches_loop(seed):
    a, b = rand_img(seed, 12, 12), rand_img(seed + 1, 12, 12)
    assert charbonnier(a, b) == pytest.approx(charbonnier_loop(a, b), rel=1e-9)


def test_scores_csv_round_trip(tmp_path):
    scores = [FrameScore(0, 31.5, 0.91, 0.0), FrameScore(1, 99.0, 1.0, 0.25)]
    write_scores_csv(tmp_path / "s.csv", "recover", scores)
    assert (tmp_path / "s.csv").read_text().splitlines()[0] == "frame_index,scheme,psnr_db,ssim,pixel_loss"
    back = read_scores_csv(tmp_path / "s.csv")
    assert [s for _, s in back] == scores and {k for k, _ in back} == {"recover"}


@given(st.integers(0, 2**31 - 1), st.integers(-40, 40))
def test_psnr_symmetric_and_translation_invariant(seed, c):
    a = rand_img(seed).astype(np.int64) + 50
    b = rand_img(seed + 1).astype(np.int64) + 50
    assert psnr(a, b) == psnr(b, a)
    assert psnr(a + c, b + c) == pytest.approx(psnr(a, b), abs=1e-9)


@given(st.integers(0, 2**31 - 1))
def test_ssim_bounds(seed):
    a, b = rand_img(seed, 24, 24), rand_img(seed + 7, 24, 24)
    assert -1.0 <= ssim(a, b) <= 1.0
    assert ssim(a, a) == pytest.approx(1.0)


@given(st.integers(0, 2**31 - 1))
def test_charbonnier_dominates_l1(seed):
    a, b = rand_img(seed, 10, 10), rand_img(seed + 3, 10, 10)
    l1 = float(np.abs(a.astype(float) - b.astype(float)).sum())
    c = charbonnier(a, b)
    n = a.size
    assert c >= l1
    assert abs(c - l1) < n * CHARBONNIER_EPS * n
