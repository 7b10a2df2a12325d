"""Numba-jitted hot kernels: ray marching, backprojection, convolutions.

Loops are organized so every output element is accumulated by exactly
one thread in a fixed order, which keeps results bit-identical for any
thread count. Convolutions carry an unrolled fast path for the common
3-tap kernel.
"""

from __future__ import annotations

import numba
import numpy as np
from numba import njit, prange


def set_num_threads(n):
    numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))


@njit(inline="always")
def _trilinear(data, org0, org1, org2, sp0, sp1, sp2, x, y, z):
    # clamp-to-edge sampling; grids must have >= 2 voxels per axis
    nx, ny, nz = data.shape
    gx = (x - org0) / sp0 - 0.5
    gy = (y - org1) / sp1 - 0.5
    gz = (z - org2) / sp2 - 0.5
    if gx < 0.0:
        gx = 0.0
    elif gx > nx - 1:
        gx = float(nx - 1)
    if gy < 0.0:
        gy = 0.0
    elif gy > ny - 1:
        gy = float(ny - 1)
    if gz < 0.0:
        gz = 0.0
    elif gz > nz - 1:
        gz = float(nz - 1)
    ix = int(gx)
    iy = int(gy)
    iz = int(gz)
    if ix > nx - 2:
        ix = nx - 2
    if iy > ny - 2:
        iy = ny - 2
    if iz > nz - 2:
        iz = nz - 2
    fx = gx - ix
    fy = gy - iy
    fz = gz - iz
    c00 = data[ix, iy, iz] * (1.0 - fx) + data[ix + 1, iy, iz] * fx
    c10 = data[ix, iy + 1, iz] * (1.0 - fx) + data[ix + 1, iy + 1, iz] * fx
    c01 = data[ix, iy, iz + 1] * (1.0 - fx) + data[ix + 1, iy, iz + 1] * fx
    c11 = data[ix, iy + 1, iz + 1] * (1.0 - fx) + data[ix + 1, iy + 1, iz + 1] * fx
    c0 = c00 * (1.0 - fy) + c10 * fy
    c1 = c01 * (1.0 - fy) + c11 * fy
    return c0 * (1.0 - fz) + c1 * fz


@njit(parallel=True, fastmath=True, cache=True)
def line_integrals(data, spacing, origin, origins, dirs, step_mm):
    # trapezoid nodes at t0 + k*step only; the partial tail interval is
    # dropped, giving first-order convergence in step_mm
    n = origins.shape[0]
    out = np.zeros(n)
    hi0 = origin[0] + spacing[0] * data.shape[0]
    hi1 = origin[1] + spacing[1] * data.shape[1]
    hi2 = origin[2] + spacing[2] * data.shape[2]
    for i in prange(n):
        ox = origins[i, 0]
        oy = origins[i, 1]
        oz = origins[i, 2]
        dx = dirs[i, 0]
        dy = dirs[i, 1]
        dz = dirs[i, 2]
        t0 = 0.0
        t1 = 1.0e300
        miss = False
        for ax in range(3):
            if ax == 0:
                o, d, lo, hi = ox, dx, origin[0], hi0
            elif ax == 1:
                o, d, lo, hi = oy, dy, origin[1], hi1
            else:
                o, d, lo, hi = oz, dz, origin[2], hi2
            if abs(d) < 1e-12:
                if o < lo or o > hi:
                    miss = True
                    break
            else:
                ta = (lo - o) / d
                tb = (hi - o) / d
                if ta > tb:
                    ta, tb = tb, ta
                if ta > t0:
                    t0 = ta
                if tb < t1:
                    t1 = tb
        if miss or t1 <= t0:
            continue
        m = int((t1 - t0) / step_mm)
        if m < 1:
            continue
        f0 = _trilinear(
            data, origin[0], origin[1], origin[2], spacing[0], spacing[1], spacing[2],
            ox + t0 * dx, oy + t0 * dy, oz + t0 * dz,
        )
        fsum = 0.0
        fm = f0
        for k in range(1, m + 1):
            t = t0 + k * step_mm
            fk = _trilinear(
                data, origin[0], origin[1], origin[2], spacing[0], spacing[1], spacing[2],
                ox + t * dx, oy + t * dy, oz + t * dz,
            )
            fsum += fk
            fm = fk
        out[i] = step_mm * (0.5 * f0 + fsum - 0.5 * fm)
    return out


@njit(parallel=True, fastmath=True, cache=True)
def backproject_view(
    acc, proj, vol_origin, spacing, src, det00, row_dir, col_dir, normal, pixel_mm, weight_sid, scale
):
    nx, ny, nz = acc.shape
    rows, cols = proj.shape
    for ix in prange(nx):
        x = vol_origin[0] + (ix + 0.5) * spacing[0]
        for iy in range(ny):
            y = vol_origin[1] + (iy + 0.5) * spacing[1]
            for iz in range(nz):
                z = vol_origin[2] + (iz + 0.5) * spacing[2]
                dx = src[0] - x
                dy = src[1] - y
                dz = src[2] - z
                denom = dx * normal[0] + dy * normal[1] + dz * normal[2]
                tnum = (
                    (det00[0] - x) * normal[0]
                    + (det00[1] - y) * normal[1]
                    + (det00[2] - z) * normal[2]
                )
                t = tnum / denom
                qx = x + t * dx - det00[0]
                qy = y + t * dy - det00[1]
                qz = z + t * dz - det00[2]
                u = (qx * row_dir[0] + qy * row_dir[1] + qz * row_dir[2]) / pixel_mm
                v = (qx * col_dir[0] + qy * col_dir[1] + qz * col_dir[2]) / pixel_mm
                r0 = int(np.floor(u))
                c0 = int(np.floor(v))
                fr = u - r0
                fc = v - c0
                val = 0.0
                for dr in range(2):
                    rr = r0 + dr
                    if rr < 0 or rr >= rows:
                        continue
                    wr = fr if dr == 1 else 1.0 - fr
                    for dc in range(2):
                        cc = c0 + dc
                        if cc < 0 or cc >= cols:
                            continue
                        wc = fc if dc == 1 else 1.0 - fc
                        val += wr * wc * proj[rr, cc]
                if weight_sid > 0.0:
                    s = x * normal[0] + y * normal[1] + z * normal[2]
                    ratio = weight_sid / (weight_sid - s)
                    val *= ratio * ratio
                acc[ix, iy, iz] += scale * val


# -- convolutions ---------------------------------------------------------


@njit(parallel=True, fastmath=True, cache=True)
def _fwd2d_k3(x, w, b, out):
    n_im, n_out, hh, ww = out.shape
    n_in = x.shape[1]
    for t in prange(n_im * hh):
        n = t // hh
        h = t % hh
        acc = np.empty((n_out, ww), dtype=x.dtype)
        for o in range(n_out):
            for iw in range(ww):
                acc[o, iw] = b[o]
        for c in range(n_in):
            for kh in range(3):
                xrow = x[n, c, h + kh]
                for o in range(n_out):
                    w0 = w[o, c, kh, 0]
                    w1 = w[o, c, kh, 1]
                    w2 = w[o, c, kh, 2]
                    arow = acc[o]
                    for iw in range(ww):
                        arow[iw] += w0 * xrow[iw] + w1 * xrow[iw + 1] + w2 * xrow[iw + 2]
        for o in range(n_out):
            for iw in range(ww):
                out[n, o, h, iw] = acc[o, iw]


@njit(parallel=True, fastmath=True, cache=True)
def _fwd2d_gen(x, w, b, out):
    n_im, n_out, hh, ww = out.shape
    n_in = x.shape[1]
    kk = w.shape[2]
    for t in prange(n_im * hh):
        n = t // hh
        h = t % hh
        acc = np.empty((n_out, ww), dtype=x.dtype)
        for o in range(n_out):
            for iw in range(ww):
                acc[o, iw] = b[o]
        for c in range(n_in):
            for kh in range(kk):
                xrow = x[n, c, h + kh]
                for o in range(n_out):
                    wrow = w[o, c, kh]
                    arow = acc[o]
                    for kw in range(kk):
                        wv = wrow[kw]
                        for iw in range(ww):
                            arow[iw] += wv * xrow[iw + kw]
        for o in range(n_out):
            for iw in range(ww):
                out[n, o, h, iw] = acc[o, iw]


def conv_fwd_2d(xpad, w, b):
    n, _, hp, wp = xpad.shape
    k = w.shape[2]
    out = np.empty((n, w.shape[0], hp - (k - 1), wp - (k - 1)), dtype=xpad.dtype)
    if k == 3:
        _fwd2d_k3(xpad, w, b, out)
    else:
        _fwd2d_gen(xpad, w, b, out)
    return out


@njit(parallel=True, fastmath=True, cache=True)
def _dw2d(x, dout, dw):
    n_im, n_out, hh, ww = dout.shape
    n_in = x.shape[1]
    kk = dw.shape[2]
    for t in prange(n_out * n_in):
        o = t // n_in
        c = t % n_in
        for kh in range(kk):
            for kw in range(kk):
                s = 0.0
                for n in range(n_im):
                    for h in range(hh):
                        grow = dout[n, o, h]
                        xrow = x[n, c, h + kh]
                        ss = x.dtype.type(0.0)
                        for iw in range(ww):
                            ss += grow[iw] * xrow[iw + kw]
                        s += ss
                dw[o, c, kh, kw] = s


def conv_dw_2d(xpad, dout):
    k = xpad.shape[2] - dout.shape[2] + 1
    dw = np.empty((dout.shape[1], xpad.shape[1], k, k), dtype=xpad.dtype)
    _dw2d(xpad, dout, dw)
    return dw


@njit(parallel=True, fastmath=True, cache=True)
def _fwd3d_k3(x, w, b, out):
    n_im, n_out, dd, hh, ww = out.shape
    n_in = x.shape[1]
    for t in prange(n_im * dd):
        n = t // dd
        d = t % dd
        acc = np.empty((n_out, ww), dtype=x.dtype)
        for h in range(hh):
            for o in range(n_out):
                for iw in range(ww):
                    acc[o, iw] = b[o]
            for c in range(n_in):
                for kd in range(3):
                    for kh in range(3):
                        xrow = x[n, c, d + kd, h + kh]
                        for o in range(n_out):
                            w0 = w[o, c, kd, kh, 0]
                            w1 = w[o, c, kd, kh, 1]
                            w2 = w[o, c, kd, kh, 2]
                            arow = acc[o]
                            for iw in range(ww):
                                arow[iw] += w0 * xrow[iw] + w1 * xrow[iw + 1] + w2 * xrow[iw + 2]
            for o in range(n_out):
                for iw in range(ww):
                    out[n, o, d, h, iw] = acc[o, iw]


@njit(parallel=True, fastmath=True, cache=True)
def _fwd3d_gen(x, w, b, out):
    n_im, n_out, dd, hh, ww = out.shape
    n_in = x.shape[1]
    kk = w.shape[2]
    for t in prange(n_im * dd):
        n = t // dd
        d = t % dd
        acc = np.empty((n_out, ww), dtype=x.dtype)
        for h in range(hh):
            for o in range(n_out):
                for iw in range(ww):
                    acc[o, iw] = b[o]
            for c in range(n_in):
                for kd in range(kk):
                    for kh in range(kk):
                        xrow = x[n, c, d + kd, h + kh]
                        for o in range(n_out):
                            wrow = w[o, c, kd, kh]
                            arow = acc[o]
                            for kw in range(kk):
                                wv = wrow[kw]
                                for iw in range(ww):
                                    arow[iw] += wv * xrow[iw + kw]
            for o in range(n_out):
                for iw in range(ww):
                    out[n, o, d, h, iw] = acc[o, iw]


def conv_fwd_3d(xpad, w, b):
    n, _, dp, hp, wp = xpad.shape
    k = w.shape[2]
    out = np.empty(
        (n, w.shape[0], dp - (k - 1), hp - (k - 1), wp - (k - 1)), dtype=xpad.dtype
    )
    if k == 3:
        _fwd3d_k3(xpad, w, b, out)
    else:
        _fwd3d_gen(xpad, w, b, out)
    return out


@njit(parallel=True, fastmath=True, cache=True)
def _dw3d(x, dout, dw):
    n_im, n_out, dd, hh, ww = dout.shape
    n_in = x.shape[1]
    kk = dw.shape[2]
    for t in prange(n_out * n_in):
        o = t // n_in
        c = t % n_in
        for kd in range(kk):
            for kh in range(kk):
                for kw in range(kk):
                    s = 0.0
                    for n in range(n_im):
                        for d in range(dd):
                            for h in range(hh):
                                grow = dout[n, o, d, h]
                                xrow = x[n, c, d + kd, h + kh]
                                ss = x.dtype.type(0.0)
                                for iw in range(ww):
                                    ss += grow[iw] * xrow[iw + kw]
                                s += ss
                    dw[o, c, kd, kh, kw] = s


def conv_dw_3d(xpad, dout):
    k = xpad.shape[2] - dout.shape[2] + 1
    dw = np.empty((dout.shape[1], xpad.shape[1], k, k, k), dtype=xpad.dtype)
    _dw3d(xpad, dout, dw)
    return dw
