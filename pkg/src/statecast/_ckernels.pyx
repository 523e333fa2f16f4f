# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops. Signatures and results mirror :mod:`statecast._pykernels`."""

import numpy as np
cimport numpy as cnp
from libc.math cimport floor, sqrt

cnp.import_array()

ctypedef cnp.int64_t i64


cdef inline bint _top_left(i64 dx, i64 dy) nogil:
    return (dy == 0 and dx > 0) or dy < 0


def rasterize(i64[:, :, ::1] xy, double[:, ::1] inv_depth, cnp.uint8_t[:, ::1] color,
              cnp.uint8_t[:, :, ::1] image, double[:, ::1] zbuf, int subpixel_bits):
    cdef Py_ssize_t n = xy.shape[0], t
    cdef int height = image.shape[0], width = image.shape[1]
    cdef i64 one = (<i64>1) << subpixel_bits
    cdef i64 half = one >> 1
    cdef i64 ax, ay, bx, by, cx, cy, tmp, area, px, py
    cdef i64 w0, w1, w2
    cdef double iza, izb, izc, tz, fa
    cdef int x, y, x0, x1, y0, y1, ch
    cdef bint tl0, tl1, tl2
    with nogil:
        for t in range(n):
            ax = xy[t, 0, 0]; ay = xy[t, 0, 1]
            bx = xy[t, 1, 0]; by = xy[t, 1, 1]
            cx = xy[t, 2, 0]; cy = xy[t, 2, 1]
            iza = inv_depth[t, 0]; izb = inv_depth[t, 1]; izc = inv_depth[t, 2]
            area = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
            if area == 0:
                continue
            if area < 0:
                tmp = bx; bx = cx; cx = tmp
                tmp = by; by = cy; cy = tmp
                tz = izb; izb = izc; izc = tz
                area = -area
            fa = <double>area
            tl0 = _top_left(cx - bx, cy - by)
            tl1 = _top_left(ax - cx, ay - cy)
            tl2 = _top_left(bx - ax, by - ay)
            x0 = <int>((min(ax, bx, cx) - half) >> subpixel_bits)
            x1 = <int>((max(ax, bx, cx) - half) >> subpixel_bits) + 1
            y0 = <int>((min(ay, by, cy) - half) >> subpixel_bits)
            y1 = <int>((max(ay, by, cy) - half) >> subpixel_bits) + 1
            if x0 < 0:
                x0 = 0
            if y0 < 0:
                y0 = 0
            if x1 > width - 1:
                x1 = width - 1
            if y1 > height - 1:
                y1 = height - 1
            for y in range(y0, y1 + 1):
                py = y * one + half
                for x in range(x0, x1 + 1):
                    px = x * one + half
                    w0 = (cx - bx) * (py - by) - (cy - by) * (px - bx)
                    if w0 < 0 or (w0 == 0 and not tl0):
                        continue
                    w1 = (ax - cx) * (py - cy) - (ay - cy) * (px - cx)
                    if w1 < 0 or (w1 == 0 and not tl1):
                        continue
                    w2 = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
                    if w2 < 0 or (w2 == 0 and not tl2):
                        continue
                    tz = (<double>w0 * iza + <double>w1 * izb + <double>w2 * izc) / fa
                    if tz > zbuf[y, x]:
                        zbuf[y, x] = tz
                        for ch in range(3):
                            image[y, x, ch] = color[t, ch]


def motion_search(cnp.uint8_t[:, :, ::1] cur, cnp.uint8_t[:, :, ::1] ref,
                  i64[:, ::1] candidates, int block, long skip_threshold):
    """Per-block SKIP test then ordered full search. Returns (mode, mv, sad)."""
    cdef int height = cur.shape[0], width = cur.shape[1]
    cdef int nby = height // block, nbx = width // block
    cdef Py_ssize_t nc = candidates.shape[0], k
    mode_arr = np.zeros((nby, nbx), dtype=np.int8)
    mv_arr = np.zeros((nby, nbx, 2), dtype=np.int64)
    sad_arr = np.zeros((nby, nbx), dtype=np.int64)
    cdef cnp.int8_t[:, ::1] mode = mode_arr
    cdef i64[:, :, ::1] mv = mv_arr
    cdef i64[:, ::1] sads = sad_arr
    cdef int bi, bj, x, y, rx, ry, dx, dy, i, j, ch
    cdef long best, s, diff
    cdef int bdx, bdy
    with nogil:
        for bi in range(nby):
            for bj in range(nbx):
                y = bi * block
                x = bj * block
                s = 0
                for i in range(block):
                    for j in range(block):
                        for ch in range(3):
                            diff = <long>cur[y + i, x + j, ch] - <long>ref[y + i, x + j, ch]
                            s += diff if diff >= 0 else -diff
                if s <= skip_threshold:
                    mode[bi, bj] = 2
                    sads[bi, bj] = s
                    continue
                best = -1
                bdx = 0
                bdy = 0
                for k in range(nc):
                    dx = <int>candidates[k, 0]
                    dy = <int>candidates[k, 1]
                    rx = x - dx
                    ry = y - dy
                    if rx < 0 or ry < 0 or rx + block > width or ry + block > height:
                        continue
                    s = 0
                    for i in range(block):
                        for j in range(block):
                            for ch in range(3):
                                diff = <long>cur[y + i, x + j, ch] - <long>ref[ry + i, rx + j, ch]
                                s += diff if diff >= 0 else -diff
                        if best >= 0 and s > best:
                            break
                    if best < 0 or s < best:
                        best = s
                        bdx = dx
                        bdy = dy
                mode[bi, bj] = 1
                mv[bi, bj, 0] = bdx
                mv[bi, bj, 1] = bdy
                sads[bi, bj] = best
    return mode_arr, mv_arr, sad_arr


def bilinear_warp(double[:, :, ::1] img, double[:, ::1] u, double[:, ::1] v):
    cdef int height = img.shape[0], width = img.shape[1], nch = img.shape[2]
    out_arr = np.zeros((height, width, nch), dtype=np.float64)
    mask_arr = np.zeros((height, width), dtype=np.uint8)
    cdef double[:, :, ::1] out = out_arr
    cdef cnp.uint8_t[:, ::1] mask = mask_arr
    cdef int x, y, x0, y0, x1, y1, ch
    cdef double sx, sy, fx, fy
    with nogil:
        for y in range(height):
            for x in range(width):
                sx = x - u[y, x]
                sy = y - v[y, x]
                if not (sx >= 0.0 and sy >= 0.0 and sx <= width - 1 and sy <= height - 1):
                    continue
                x0 = <int>floor(sx)
                y0 = <int>floor(sy)
                fx = sx - x0
                fy = sy - y0
                x1 = x0 + 1 if x0 + 1 < width else x0
                y1 = y0 + 1 if y0 + 1 < height else y0
                mask[y, x] = 1
                for ch in range(nch):
                    out[y, x, ch] = ((1.0 - fy) * ((1.0 - fx) * img[y0, x0, ch] + fx * img[y0, x1, ch])
                                     + fy * ((1.0 - fx) * img[y1, x0, ch] + fx * img[y1, x1, ch]))
    return out_arr, mask_arr


cdef double _charb_loss(double[::1] w, double[::1] p, double a, double b, double eps) nogil:
    cdef Py_ssize_t i, n = w.shape[0]
    cdef double r, acc = 0.0
    for i in range(n):
        r = a * w[i] + b - p[i]
        acc += sqrt(r * r + eps * eps)
    return acc / n


def fit_affine_charbonnier(double[::1] w, double[::1] p, double lr, int iterations, double eps):
    """Backtracking gradient descent on mean Charbonnier of a*w + b - p."""
    cdef Py_ssize_t i, n = w.shape[0]
    cdef double a = 1.0, b = 0.0, loss, trial, ga, gb, r, s, na, nb, step = lr
    cdef int it
    history = []
    if n == 0:
        return a, b, history
    loss = _charb_loss(w, p, a, b, eps)
    history.append(loss)
    for it in range(iterations):
        ga = 0.0
        gb = 0.0
        with nogil:
            for i in range(n):
                r = a * w[i] + b - p[i]
                s = r / sqrt(r * r + eps * eps)
                ga += s * w[i]
                gb += s
        ga /= n
        gb /= n
        while True:
            na = a - step * ga
            nb = b - step * gb
            trial = _charb_loss(w, p, na, nb, eps)
            if trial <= loss:
                break
            step *= 0.5
            if step < 1e-12:
                na = a
                nb = b
                trial = loss
                break
        a = na
        b = nb
        loss = trial
        history.append(loss)
    return a, b, history


def jacobi_fill(double[:, :, ::1] img, cnp.uint8_t[:, ::1] known, int iterations):
    """Diffuse known values into unknown pixels; returns (image, reached mask)."""
    cdef int height = img.shape[0], width = img.shape[1], nch = img.shape[2]
    cur_arr = np.array(img, dtype=np.float64, copy=True)
    nxt_arr = cur_arr.copy()
    kn_arr = np.array(known, dtype=np.uint8, copy=True)
    fixed_arr = kn_arr.copy()
    kn_next_arr = kn_arr.copy()
    cdef double[:, :, ::1] cur = cur_arr
    cdef double[:, :, ::1] nxt = nxt_arr
    cdef cnp.uint8_t[:, ::1] kn = kn_arr
    cdef cnp.uint8_t[:, ::1] kn_next = kn_next_arr
    cdef cnp.uint8_t[:, ::1] fixed = fixed_arr
    holes = np.ascontiguousarray(np.argwhere(fixed_arr == 0), dtype=np.int64)
    cdef i64[:, ::1] hp = holes
    cdef Py_ssize_t nh = holes.shape[0], h
    cdef int it, x, y, ch, cnt
    cdef double acc
    with nogil:
        for it in range(iterations):
            for h in range(nh):
                y = <int>hp[h, 0]
                x = <int>hp[h, 1]
                cnt = 0
                if y > 0 and kn[y - 1, x]:
                    cnt += 1
                if y < height - 1 and kn[y + 1, x]:
                    cnt += 1
                if x > 0 and kn[y, x - 1]:
                    cnt += 1
                if x < width - 1 and kn[y, x + 1]:
                    cnt += 1
                if cnt == 0:
                    continue
                kn_next[y, x] = 1
                for ch in range(nch):
                    acc = 0.0
                    if y > 0 and kn[y - 1, x]:
                        acc = acc + cur[y - 1, x, ch]
                    if y < height - 1 and kn[y + 1, x]:
                        acc = acc + cur[y + 1, x, ch]
                    if x > 0 and kn[y, x - 1]:
                        acc = acc + cur[y, x - 1, ch]
                    if x < width - 1 and kn[y, x + 1]:
                        acc = acc + cur[y, x + 1, ch]
                    nxt[y, x, ch] = acc / cnt
            for h in range(nh):
                y = <int>hp[h, 0]
                x = <int>hp[h, 1]
                kn[y, x] = kn_next[y, x]
                for ch in range(nch):
                    cur[y, x, ch] = nxt[y, x, ch]
    return cur_arr, kn_arr


cdef double _select(double* buf, int n, int k) nogil:
    """k-th smallest of buf[0:n] (Hoare quickselect, reorders buf)."""
    cdef int lo = 0, hi = n - 1, i, j
    cdef double pivot, tmp
    while lo < hi:
        pivot = buf[(lo + hi) >> 1]
        i = lo
        j = hi
        while i <= j:
            while buf[i] < pivot:
                i += 1
            while buf[j] > pivot:
                j -= 1
            if i <= j:
                tmp = buf[i]; buf[i] = buf[j]; buf[j] = tmp
                i += 1
                j -= 1
        if k <= j:
            hi = j
        elif k >= i:
            lo = i
        else:
            break
    return buf[k]


def median_filter2d(double[:, ::1] arr, int size):
    """Square-window median with edge replication (odd ``size``)."""
    cdef int height = arr.shape[0], width = arr.shape[1], r = size // 2
    cdef int x, y, dx, dy, sx, sy, m, n = size * size
    out_arr = np.empty((height, width), dtype=np.float64)
    buf_arr = np.empty(n, dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double* buf = <double*>cnp.PyArray_DATA(buf_arr)
    cdef double* src = &arr[0, 0]
    cdef double* row
    with nogil:
        for y in range(height):
            for x in range(width):
                m = 0
                for dy in range(-r, r + 1):
                    sy = min(max(y + dy, 0), height - 1)
                    row = src + sy * width
                    for dx in range(-r, r + 1):
                        sx = min(max(x + dx, 0), width - 1)
                        buf[m] = row[sx]
                        m += 1
                out[y, x] = _select(buf, n, n >> 1)
    return out_arr
