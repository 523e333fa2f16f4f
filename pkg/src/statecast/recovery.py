"""Frame recovery from game states.

Pipeline for one frame: optical flow between the previous and current game
states (pyramidal Lucas-Kanade), bilinear upsampling of that flow to RGB
resolution, backward warping of the previous frame, a per-channel affine
correction fitted against the received part of the current frame, diffusion
inpainting where the warp found no source, and finally the received pixels
pasted back over the prediction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter, uniform_filter

from . import kernels
from .codec import CorruptionMask
from .gamestate import GameStateFrame, state_to_image
from .metrics import CHARBONNIER_EPS

MID_GRAY = 128.0


@dataclass
class FlowField:
    """Per-pixel displacement: content at (x, y) in the current frame came from (x-u, y-v)."""

    u: np.ndarray
    v: np.ndarray

    @property
    def width(self) -> int:
        return self.u.shape[1]

    @property
    def height(self) -> int:
        return self.u.shape[0]

    @classmethod
    def zeros(cls, width: int, height: int) -> FlowField:
        return cls(np.zeros((height, width)), np.zeros((height, width)))


@dataclass
class EnhanceParams:
    gain: np.ndarray = field(default_factory=lambda: np.ones(3))
    bias: np.ndarray = field(default_factory=lambda: np.zeros(3))   # pixel units
    loss_history: list[list[float]] = field(default_factory=list, compare=False, repr=False)

    @property
    def is_identity(self) -> bool:
        return bool((self.gain == 1.0).all() and (self.bias == 0.0).all())

    def apply(self, image: np.ndarray) -> np.ndarray:
        return image * self.gain + self.bias


@dataclass
class RecoveryInput:
    prev_state: GameStateFrame | None
    curr_state: GameStateFrame | None
    prev_frame: np.ndarray
    partial_frame: np.ndarray | None = None
    partial_mask: CorruptionMask | None = None

    def __post_init__(self):
        if (self.partial_frame is None) != (self.partial_mask is None):
            raise ValueError("partial_frame and partial_mask must be given together")
        if self.prev_state is not None and self.curr_state is not None:
            if self.prev_state.color_index.shape != self.curr_state.color_index.shape:
                raise ValueError("game states differ in resolution")


@dataclass(frozen=True)
class RecoveryConfig:
    levels: int = 4
    window: int = 5
    lk_iterations: int = 3
    blur_sigma: float = 1.5
    enhance_lr: float = 0.01
    enhance_iterations: int = 100
    inpaint_iterations: int = 50
    flow_median: int = 15         # median window applied to estimated flow; 0 disables
    eps: float = CHARBONNIER_EPS


@dataclass
class RecoveryResult:
    frame: np.ndarray
    coverage: np.ndarray          # M, uint8 per pixel
    enhance: EnhanceParams
    flow: FlowField               # at RGB resolution

    @property
    def coverage_fraction(self) -> float:
        return float(self.coverage.mean())


# --- optical flow -------------------------------------------------------------------

def resize_bilinear(arr: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize with half-pixel centers and edge clamping."""
    h, w = arr.shape
    ys = np.clip((np.arange(out_h) + 0.5) * (h / out_h) - 0.5, 0, h - 1)
    xs = np.clip((np.arange(out_w) + 0.5) * (w / out_w) - 0.5, 0, w - 1)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    top = arr[y0][:, x0] * (1 - fx) + arr[y0][:, x1] * fx
    bot = arr[y1][:, x0] * (1 - fx) + arr[y1][:, x1] * fx
    return top * (1 - fy) + bot * fy


def _sample_clamped(img: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    h, w = img.shape[:2]
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    sx = np.clip(xs - u, 0, w - 1)
    sy = np.clip(ys - v, 0, h - 1)
    x0 = np.minimum(np.floor(sx).astype(int), w - 2) if w > 1 else np.zeros_like(sx, dtype=int)
    y0 = np.minimum(np.floor(sy).astype(int), h - 2) if h > 1 else np.zeros_like(sy, dtype=int)
    fx, fy = sx - x0, sy - y0
    x1, y1 = np.minimum(x0 + 1, w - 1), np.minimum(y0 + 1, h - 1)
    if img.ndim == 3:
        fx, fy = fx[..., None], fy[..., None]
    return ((1 - fy) * ((1 - fx) * img[y0, x0] + fx * img[y0, x1])
            + fy * ((1 - fx) * img[y1, x0] + fx * img[y1, x1]))


def _downsample2(img: np.ndarray) -> np.ndarray:
    h, w = img.shape[:2]
    img = img[:h - h % 2, :w - w % 2]
    return 0.25 * (img[0::2, 0::2] + img[1::2, 0::2] + img[0::2, 1::2] + img[1::2, 1::2])


def lucas_kanade_pyramid(prev: np.ndarray, curr: np.ndarray, levels: int = 4, window: int = 5,
                         iterations: int = 3, sigma: float = 1.5,
                         min_eig: float = 1e-2) -> FlowField:
    """Coarse-to-fine iterative Lucas-Kanade between two images.

    Inputs are (H, W) or (H, W, C); for color inputs the structure tensor
    and mismatch terms are summed over channels, so edges between colors of
    equal brightness still constrain the flow. Pixels whose windowed
    structure tensor is near singular keep the flow carried up from the
    coarser level. At the coarsest level they take the median flow of the
    well-conditioned pixels.
    """
    if prev.shape != curr.shape:
        raise ValueError("flow inputs differ in resolution")
    if levels < 1:
        raise ValueError("levels must be >= 1")
    h, w = prev.shape[:2]
    if min(h, w) >> (levels - 1) < 8:
        raise ValueError(f"{w}x{h} is too small for {levels} pyramid levels (top level < 8x8)")
    prev = np.asarray(prev, dtype=np.float64)
    curr = np.asarray(curr, dtype=np.float64)
    if prev.ndim == 2:
        prev, curr = prev[..., None], curr[..., None]
    blur = (sigma, sigma, 0)
    pyr = [(gaussian_filter(prev, blur), gaussian_filter(curr, blur))]
    for _ in range(levels - 1):
        a, b = pyr[-1]
        pyr.append((_downsample2(a), _downsample2(b)))

    def window_sum(x):
        return uniform_filter(x.sum(axis=-1), window, mode="constant")

    u = v = None
    for level in range(levels - 1, -1, -1):
        a, b = pyr[level]
        lh, lw = a.shape[:2]
        if u is None:
            u, v = np.zeros((lh, lw)), np.zeros((lh, lw))
        else:
            u = resize_bilinear(u, lh, lw) * (lw / u.shape[1])
            v = resize_bilinear(v, lh, lw) * (lh / v.shape[0])
        good = np.zeros((lh, lw), dtype=bool)
        for _ in range(iterations):
            warped = _sample_clamped(a, u, v)
            iy, ix = np.gradient(0.5 * (warped + b), axis=(0, 1))
            it = b - warped
            sxx, syy, sxy = window_sum(ix * ix), window_sum(iy * iy), window_sum(ix * iy)
            sxt, syt = window_sum(ix * it), window_sum(iy * it)
            det = sxx * syy - sxy * sxy
            lam_min = 0.5 * (sxx + syy - np.sqrt((sxx - syy) ** 2 + 4 * sxy * sxy))
            good = lam_min > min_eig
            safe = np.where(good, det, 1.0)
            u = u + np.where(good, (-syy * sxt + sxy * syt) / safe, 0.0)
            v = v + np.where(good, (sxy * sxt - sxx * syt) / safe, 0.0)
        if level == levels - 1 and good.any() and not good.all():
            u = np.where(good, u, np.median(u[good]))
            v = np.where(good, v, np.median(v[good]))
    u = np.clip(u, -w, w)
    v = np.clip(v, -h, h)
    return FlowField(u, v)


def regularize_flow(flow: FlowField, size: int) -> FlowField:
    """Component-wise median filter; suppresses the cell-quantization noise of sparse inputs."""
    if size <= 1:
        return flow
    if size % 2 == 0:
        raise ValueError("median window must be odd")
    return FlowField(kernels.median_filter2d(np.ascontiguousarray(flow.u, dtype=np.float64), size),
                     kernels.median_filter2d(np.ascontiguousarray(flow.v, dtype=np.float64), size))


def estimate_flow(prev: GameStateFrame, curr: GameStateFrame, palette, levels: int = 4,
                  config: RecoveryConfig | None = None) -> FlowField:
    """Flow from ``prev`` to ``curr`` at state resolution, computed on colorized states.

    With ``config.flow_median == 0`` this is plain pyramidal Lucas-Kanade.
    """
    cfg = config or RecoveryConfig(levels=levels)
    if prev.color_index.shape != curr.color_index.shape:
        raise ValueError("game states differ in resolution")
    a = state_to_image(prev, palette).astype(np.float64)
    b = state_to_image(curr, palette).astype(np.float64)
    flow = lucas_kanade_pyramid(a, b, levels, cfg.window, cfg.lk_iterations, cfg.blur_sigma)
    return regularize_flow(flow, cfg.flow_median)


def estimate_flow_from_frames(older: np.ndarray, newer: np.ndarray, resolution: tuple[int, int],
                              levels: int = 4, config: RecoveryConfig | None = None) -> FlowField:
    """Flow between two RGB frames, computed at ``resolution`` like the state flow.

    Used by the baseline that has no game states and extrapolates the last
    observed motion instead.
    """
    cfg = config or RecoveryConfig(levels=levels)
    w, h = resolution
    a = resize_area(np.asarray(older, dtype=np.float64), h, w)
    b = resize_area(np.asarray(newer, dtype=np.float64), h, w)
    flow = lucas_kanade_pyramid(a, b, levels, cfg.window, cfg.lk_iterations, cfg.blur_sigma)
    return regularize_flow(flow, cfg.flow_median)


def resize_area(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Box-filter downscale of a 2-D or (H, W, C) image.

    Exact block means for integer ratios, pre-blurred bilinear otherwise.
    """
    if img.ndim == 3:
        return np.stack([resize_area(img[..., c], out_h, out_w) for c in range(img.shape[2])], axis=-1)
    h, w = img.shape
    if h % out_h == 0 and w % out_w == 0:
        return img.reshape(out_h, h // out_h, out_w, w // out_w).mean(axis=(1, 3))
    return resize_bilinear(gaussian_filter(img, 0.5 * max(h / out_h, w / out_w)), out_h, out_w)


def upsample_flow(flow: FlowField, target: tuple[int, int]) -> FlowField:
    W, H = target
    if W < flow.width or H < flow.height:
        raise ValueError("target resolution is smaller than the flow")
    sx, sy = W / flow.width, H / flow.height
    return FlowField(resize_bilinear(flow.u, H, W) * sx, resize_bilinear(flow.v, H, W) * sy)


# --- warping, enhancement, inpainting ------------------------------------------------

def _round_u8(image: np.ndarray) -> np.ndarray:
    return np.floor(np.clip(image, 0.0, 255.0) + 0.5).astype(np.uint8)


def _warp_float(prev: np.ndarray, flow: FlowField) -> tuple[np.ndarray, np.ndarray]:
    if flow.u.shape != prev.shape[:2]:
        raise ValueError("flow must be at the frame's resolution")
    return kernels.bilinear_warp(np.ascontiguousarray(prev, dtype=np.float64),
                                 np.ascontiguousarray(flow.u, dtype=np.float64),
                                 np.ascontiguousarray(flow.v, dtype=np.float64))


def warp_frame(prev: np.ndarray, flow: FlowField) -> tuple[np.ndarray, np.ndarray]:
    """Backward bilinear warp; coverage is 1 where the source point lies inside ``prev``."""
    out, mask = _warp_float(prev, flow)
    return _round_u8(out), mask


def fit_enhance(warped: np.ndarray, partial: np.ndarray, overlap: np.ndarray,
                config: RecoveryConfig | None = None) -> EnhanceParams:
    """Per-channel gain and bias minimizing Charbonnier distance to ``partial`` on ``overlap``.

    Intensities are scaled to [0, 1] and the mean loss is descended with
    backtracking, so every accepted step lowers the loss. An empty overlap
    yields the identity.
    """
    cfg = config or RecoveryConfig()
    sel = np.asarray(overlap, dtype=bool)
    gain, bias, history = np.ones(3), np.zeros(3), []
    if not sel.any():
        return EnhanceParams(gain, bias, history)
    wsel = np.asarray(warped, dtype=np.float64)[sel] / 255.0
    psel = np.asarray(partial, dtype=np.float64)[sel] / 255.0
    for c in range(3):
        a, b, hist = kernels.fit_affine_charbonnier(np.ascontiguousarray(wsel[:, c]),
                                                    np.ascontiguousarray(psel[:, c]),
                                                    cfg.enhance_lr, cfg.enhance_iterations, cfg.eps)
        gain[c], bias[c] = a, b * 255.0
        history.append(list(hist))
    return EnhanceParams(gain, bias, history)


def _inpaint_float(image: np.ndarray, hole: np.ndarray, state: GameStateFrame | None,
                   palette, iterations: int) -> np.ndarray:
    hole = np.asarray(hole, dtype=bool)
    out = np.array(image, dtype=np.float64, copy=True)
    if not hole.any():
        return out
    H, W = hole.shape
    known = ~hole
    if state is not None and palette is not None:
        ys, xs = np.nonzero(hole)
        cy = ys * state.height // H
        cx = xs * state.width // W
        cells = state.color_index[cy, cx]
        seeded = cells >= 0
        if seeded.any():
            colors = np.array([palette[int(c)] for c in cells[seeded]], dtype=np.float64)
            out[ys[seeded], xs[seeded]] = colors
            known = known.copy()
            known[ys[seeded], xs[seeded]] = True
    if known.all():
        return out
    if not known.any():
        out[:] = MID_GRAY
        return out
    filled, reached = kernels.jacobi_fill(np.ascontiguousarray(out), known.astype(np.uint8), iterations)
    filled = np.asarray(filled)
    filled[~np.asarray(reached, dtype=bool)] = MID_GRAY
    return filled


def inpaint(composite: np.ndarray, hole: np.ndarray, curr_state: GameStateFrame | None, palette,
            iterations: int = 50) -> np.ndarray:
    """Fill ``hole`` pixels: game-state seeds first, then 4-neighbour Jacobi diffusion.

    Pixels the diffusion never reaches become mid-gray.
    """
    return _round_u8(_inpaint_float(composite, hole, curr_state, palette, iterations))


# --- full pipeline ----------------------------------------------------------------------

def recover_with_details(inp: RecoveryInput, palette=None, config: RecoveryConfig | None = None,
                         flow: FlowField | None = None) -> RecoveryResult:
    """Run the recovery pipeline.

    ``flow`` may be supplied (at any resolution up to the frame's) to bypass
    state-based flow estimation; otherwise both game states are required.
    """
    cfg = config or RecoveryConfig()
    H, W = inp.prev_frame.shape[:2]
    if flow is None:
        if inp.prev_state is None or inp.curr_state is None:
            raise ValueError("game states are required when no flow is supplied")
        flow = estimate_flow(inp.prev_state, inp.curr_state, palette, cfg.levels, cfg)
    full = upsample_flow(flow, (W, H)) if flow.u.shape != (H, W) else flow
    warped, coverage = _warp_float(inp.prev_frame, full)
    cov = coverage.astype(bool)

    if inp.partial_frame is not None:
        if inp.partial_frame.shape != inp.prev_frame.shape:
            raise ValueError("partial frame resolution differs from the previous frame")
        part_valid = inp.partial_mask.pixel_valid()
        if part_valid.shape != (H, W):
            raise ValueError("partial mask resolution differs from the frame")
        part = inp.partial_frame.astype(np.float64)
        params = fit_enhance(warped, part, cov & part_valid, cfg)
    else:
        part_valid = np.zeros((H, W), dtype=bool)
        part = None
        params = EnhanceParams()

    enhanced = params.apply(warped) if not params.is_identity else warped
    base = np.where(cov[..., None], enhanced, 0.0)
    if part is not None:
        base = np.where(part_valid[..., None], part, base)
    hole = ~cov & ~part_valid
    inpainted = _inpaint_float(base, hole, inp.curr_state, palette, cfg.inpaint_iterations)
    composite = np.where(cov[..., None], enhanced, inpainted)
    if part is not None:
        composite = np.where(part_valid[..., None], part, composite)
    return RecoveryResult(_round_u8(composite), coverage, params, full)


def recover(inp: RecoveryInput, palette=None, config: RecoveryConfig | None = None,
            flow: FlowField | None = None) -> np.ndarray:
    return recover_with_details(inp, palette, config, flow).frame
