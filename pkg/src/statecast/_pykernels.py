"""Pure numpy versions of the compiled kernels.

Every function here returns bit-identical results to ``_ckernels`` except
``fit_affine_charbonnier``, whose reductions sum in a different order.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import median_filter


def _top_left(dx: int, dy: int) -> bool:
    return (dy == 0 and dx > 0) or dy < 0


def rasterize(xy, inv_depth, color, image, zbuf, subpixel_bits):
    height, width = image.shape[:2]
    one = 1 << subpixel_bits
    half = one >> 1
    for t in range(xy.shape[0]):
        (ax, ay), (bx, by), (cx, cy) = (tuple(int(c) for c in p) for p in xy[t])
        iza, izb, izc = (float(z) for z in inv_depth[t])
        area = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
        if area == 0:
            continue
        if area < 0:
            bx, cx = cx, bx
            by, cy = cy, by
            izb, izc = izc, izb
            area = -area
        x0 = max(((min(ax, bx, cx) - half) >> subpixel_bits), 0)
        x1 = min(((max(ax, bx, cx) - half) >> subpixel_bits) + 1, width - 1)
        y0 = max(((min(ay, by, cy) - half) >> subpixel_bits), 0)
        y1 = min(((max(ay, by, cy) - half) >> subpixel_bits) + 1, height - 1)
        if x0 > x1 or y0 > y1:
            continue
        px = (np.arange(x0, x1 + 1, dtype=np.int64) * one + half)[None, :]
        py = (np.arange(y0, y1 + 1, dtype=np.int64) * one + half)[:, None]
        w0 = (cx - bx) * (py - by) - (cy - by) * (px - bx)
        w1 = (ax - cx) * (py - cy) - (ay - cy) * (px - cx)
        w2 = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
        inside = (w0 > 0) | ((w0 == 0) & _top_left(cx - bx, cy - by))
        inside &= (w1 > 0) | ((w1 == 0) & _top_left(ax - cx, ay - cy))
        inside &= (w2 > 0) | ((w2 == 0) & _top_left(bx - ax, by - ay))
        if not inside.any():
            continue
        tz = (w0.astype(np.float64) * iza + w1.astype(np.float64) * izb
              + w2.astype(np.float64) * izc) / float(area)
        zview = zbuf[y0:y1 + 1, x0:x1 + 1]
        win = inside & (tz > zview)
        zview[win] = tz[win]
        image[y0:y1 + 1, x0:x1 + 1][win] = color[t]


def motion_search(cur, ref, candidates, block, skip_threshold):
    height, width = cur.shape[:2]
    nby, nbx = height // block, width // block
    cur32 = cur.astype(np.int32)
    ref32 = ref.astype(np.int32)

    def block_sad(diff):
        return diff.reshape(nby, block, nbx, block, 3).sum(axis=(1, 3, 4))

    zero_sad = block_sad(np.abs(cur32 - ref32)).astype(np.int64)
    mode = np.where(zero_sad <= skip_threshold, 2, 1).astype(np.int8)
    best = np.full((nby, nbx), -1, dtype=np.int64)
    mv = np.zeros((nby, nbx, 2), dtype=np.int64)
    by_idx = np.arange(nby)[:, None] * block
    bx_idx = np.arange(nbx)[None, :] * block
    for dx, dy in candidates:
        dx, dy = int(dx), int(dy)
        inb = ((bx_idx - dx >= 0) & (bx_idx - dx + block <= width)
               & (by_idx - dy >= 0) & (by_idx - dy + block <= height))
        if not inb.any():
            continue
        shifted = np.zeros_like(ref32)
        ys = slice(max(dy, 0), height + min(dy, 0))
        xs = slice(max(dx, 0), width + min(dx, 0))
        shifted[ys, xs] = ref32[max(-dy, 0):height - max(dy, 0), max(-dx, 0):width - max(dx, 0)]
        sad = block_sad(np.abs(cur32 - shifted)).astype(np.int64)
        better = inb & ((best < 0) | (sad < best))
        best[better] = sad[better]
        mv[better] = (dx, dy)
    skip = mode == 2
    best[skip] = zero_sad[skip]
    mv[skip] = 0
    return mode, mv, best


def bilinear_warp(img, u, v):
    height, width = img.shape[:2]
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    sx = xs - u
    sy = ys - v
    mask = (sx >= 0.0) & (sy >= 0.0) & (sx <= width - 1) & (sy <= height - 1)
    sxc = np.where(mask, sx, 0.0)
    syc = np.where(mask, sy, 0.0)
    x0 = np.floor(sxc).astype(np.int64)
    y0 = np.floor(syc).astype(np.int64)
    fx = (sxc - x0)[..., None]
    fy = (syc - y0)[..., None]
    x1 = np.minimum(x0 + 1, width - 1)
    y1 = np.minimum(y0 + 1, height - 1)
    out = ((1.0 - fy) * ((1.0 - fx) * img[y0, x0] + fx * img[y0, x1])
           + fy * ((1.0 - fx) * img[y1, x0] + fx * img[y1, x1]))
    out[~mask] = 0.0
    return out, mask.astype(np.uint8)


def _charb_loss(w, p, a, b, eps):
    r = a * w + b - p
    return float(np.sqrt(r * r + eps * eps).mean())


def fit_affine_charbonnier(w, p, lr, iterations, eps):
    a, b = 1.0, 0.0
    history: list[float] = []
    if w.size == 0:
        return a, b, history
    step = lr
    loss = _charb_loss(w, p, a, b, eps)
    history.append(loss)
    for _ in range(iterations):
        r = a * w + b - p
        s = r / np.sqrt(r * r + eps * eps)
        ga = float((s * w).mean())
        gb = float(s.mean())
        while True:
            na, nb = a - step * ga, b - step * gb
            trial = _charb_loss(w, p, na, nb, eps)
            if trial <= loss:
                break
            step *= 0.5
            if step < 1e-12:
                na, nb, trial = a, b, loss
                break
        a, b, loss = na, nb, trial
        history.append(loss)
    return a, b, history


def jacobi_fill(img, known, iterations):
    cur = np.array(img, dtype=np.float64, copy=True)
    kn = known.astype(bool).copy()
    fixed = kn.copy()
    height, width = kn.shape
    for _ in range(iterations):
        acc = np.zeros_like(cur)
        cnt = np.zeros((height, width), dtype=np.int64)
        # neighbour order matches the compiled loop: up, down, left, right
        for src_y, dst_y, src_x, dst_x in (
            (slice(0, height - 1), slice(1, height), slice(None), slice(None)),
            (slice(1, height), slice(0, height - 1), slice(None), slice(None)),
            (slice(None), slice(None), slice(0, width - 1), slice(1, width)),
            (slice(None), slice(None), slice(1, width), slice(0, width - 1)),
        ):
            nk = np.zeros_like(kn)
            nk[dst_y, dst_x] = kn[src_y, src_x]
            nv = np.zeros_like(cur)
            nv[dst_y, dst_x] = cur[src_y, src_x]
            acc = np.where(nk[..., None], acc + nv, acc)
            cnt += nk
        update = ~fixed & (cnt > 0)
        cur = np.where(update[..., None], acc / np.maximum(cnt, 1)[..., None], cur)
        kn = kn | update
    return cur, kn.astype(np.uint8)


def median_filter2d(arr, size):
    """Square-window median with edge replication (odd ``size``)."""
    return median_filter(np.asarray(arr, dtype=np.float64), size, mode="nearest")
