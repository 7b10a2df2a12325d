"""Pure-numpy reference implementations of the hot kernels.

Same contracts as the numba backend; selected via RIBTOMO_BACKEND=numpy
or used automatically when numba is unavailable. Rays are vectorized
over the batch axis, convolutions over kernel offsets, so everything
stays deterministic (fixed reduction order) at numpy speed.
"""

from __future__ import annotations

import numpy as np


def _trilinear(data, origin, spacing, pts):
    """Sample data at world points, clamping coordinates to the grid edge.

    Clamp-to-edge extrapolation keeps uniform volumes exactly uniform up
    to the bounding box faces; grids must have at least 2 voxels per axis.
    """
    shape = np.asarray(data.shape, dtype=np.int64)
    g = (pts - origin[None, :]) / spacing[None, :] - 0.5
    g = np.clip(g, 0.0, (shape - 1)[None, :].astype(np.float64))
    i0 = np.minimum(np.floor(g).astype(np.int64), shape[None, :] - 2)
    f = g - i0
    out = np.zeros(pts.shape[0])
    for corner in range(8):
        off = np.array([(corner >> 2) & 1, (corner >> 1) & 1, corner & 1], dtype=np.int64)
        idx = i0 + off[None, :]
        w = np.prod(np.where(off[None, :] == 1, f, 1.0 - f), axis=1)
        out += w * data[idx[:, 0], idx[:, 1], idx[:, 2]]
    return out


def line_integrals(data, spacing, origin, origins, dirs, step_mm):
    """Trapezoid ray marching through the volume bounding box.

    Nodes sit at t0 + k*step_mm for k = 0..floor(L/step); the leftover
    partial interval is not sampled, so the estimate converges first
    order in step_mm. Rays that miss the box (or cross less than one
    step) return 0.
    """
    origin = np.asarray(origin, dtype=np.float64)
    spacing = np.asarray(spacing, dtype=np.float64)
    lo = origin
    hi = origin + spacing * np.asarray(data.shape, dtype=np.float64)
    n = origins.shape[0]

    t0 = np.zeros(n)
    t1 = np.full(n, np.inf)
    for ax in range(3):
        o = origins[:, ax]
        d = dirs[:, ax]
        with np.errstate(divide="ignore", invalid="ignore"):
            ta = (lo[ax] - o) / d
            tb = (hi[ax] - o) / d
        near = np.minimum(ta, tb)
        far = np.maximum(ta, tb)
        parallel = np.abs(d) < 1e-12
        inside = (o >= lo[ax]) & (o <= hi[ax])
        near = np.where(parallel, np.where(inside, -np.inf, np.inf), near)
        far = np.where(parallel, np.where(inside, np.inf, -np.inf), far)
        t0 = np.maximum(t0, near)
        t1 = np.minimum(t1, far)

    length = t1 - t0
    hit = length > 0.0
    out = np.zeros(n)
    if not np.any(hit):
        return out

    m = np.zeros(n, dtype=np.int64)
    m[hit] = np.floor(length[hit] / step_mm).astype(np.int64)
    idx = np.nonzero(hit & (m >= 1))[0]
    if idx.size == 0:
        return out

    f0 = _trilinear(data, origin, spacing, origins[idx] + t0[idx, None] * dirs[idx])
    # running sum of nodes k = 1..m and the value at the last node
    fsum = np.zeros(idx.size)
    fm = f0.copy()
    for k in range(1, int(m[idx].max()) + 1):
        sel = m[idx] >= k
        act = idx[sel]
        t = t0[act] + k * step_mm
        fk = _trilinear(data, origin, spacing, origins[act] + t[:, None] * dirs[act])
        fsum[sel] += fk
        fm[sel] = fk

    out[idx] = step_mm * (0.5 * f0 + fsum - 0.5 * fm)
    return out


def backproject_view(
    acc, proj, vol_origin, spacing, src, det00, row_dir, col_dir, normal, pixel_mm, weight_sid, scale
):
    """Accumulate one filtered view into acc (f64, in place).

    Each voxel center is projected along the line to the source onto the
    detector plane and the projection is sampled bilinearly (zero outside
    the detector). weight_sid > 0 enables the (sid/(sid - s))^2 distance
    weight with s the voxel displacement toward the source.
    """
    nx, ny, nz = acc.shape
    rows, cols = proj.shape
    xs = vol_origin[0] + (np.arange(nx) + 0.5) * spacing[0]
    ys = vol_origin[1] + (np.arange(ny) + 0.5) * spacing[1]
    zs = vol_origin[2] + (np.arange(nz) + 0.5) * spacing[2]
    px = xs[:, None, None]
    py = ys[None, :, None]
    pz = zs[None, None, :]

    dx = src[0] - px
    dy = src[1] - py
    dz = src[2] - pz
    denom = dx * normal[0] + dy * normal[1] + dz * normal[2]
    tnum = (det00[0] - px) * normal[0] + (det00[1] - py) * normal[1] + (det00[2] - pz) * normal[2]
    t = tnum / denom
    qx = px + t * dx - det00[0]
    qy = py + t * dy - det00[1]
    qz = pz + t * dz - det00[2]
    u = (qx * row_dir[0] + qy * row_dir[1] + qz * row_dir[2]) / pixel_mm
    v = (qx * col_dir[0] + qy * col_dir[1] + qz * col_dir[2]) / pixel_mm

    r0 = np.floor(u).astype(np.int64)
    c0 = np.floor(v).astype(np.int64)
    fr = u - r0
    fc = v - c0
    val = np.zeros((nx, ny, nz))
    p = proj.astype(np.float64, copy=False)
    for dr in (0, 1):
        for dc in (0, 1):
            rr = r0 + dr
            cc = c0 + dc
            w = (fr if dr else 1.0 - fr) * (fc if dc else 1.0 - fc)
            valid = (rr >= 0) & (rr < rows) & (cc >= 0) & (cc < cols)
            rv = np.where(valid, rr, 0)
            cv = np.where(valid, cc, 0)
            val += np.where(valid, w * p[rv, cv], 0.0)

    if weight_sid > 0:
        s = px * normal[0] + py * normal[1] + pz * normal[2]
        val *= (weight_sid / (weight_sid - s)) ** 2
    acc += scale * val


# -- convolutions ---------------------------------------------------------
#
# Same-padding inputs arrive pre-padded; channel contraction is done per
# kernel offset so the reduction order is fixed.


def conv_fwd_2d(xpad, w, b):
    n, c, hp, wp = xpad.shape
    o = w.shape[0]
    k = w.shape[2]
    hh, ww = hp - (k - 1), wp - (k - 1)
    out = np.zeros((n, o, hh, ww), dtype=xpad.dtype)
    for kh in range(k):
        for kw in range(k):
            seg = xpad[:, :, kh : kh + hh, kw : kw + ww]
            out += np.einsum("oc,nchw->nohw", w[:, :, kh, kw], seg, optimize=True)
    return out + b[None, :, None, None].astype(xpad.dtype)


def conv_dw_2d(xpad, dout):
    n, c, hp, wp = xpad.shape
    o = dout.shape[1]
    hh, ww = dout.shape[2], dout.shape[3]
    k = hp - hh + 1
    dw = np.empty((o, c, k, k), dtype=xpad.dtype)
    for kh in range(k):
        for kw in range(k):
            seg = xpad[:, :, kh : kh + hh, kw : kw + ww]
            dw[:, :, kh, kw] = np.einsum("nohw,nchw->oc", dout, seg, optimize=True)
    return dw


def conv_fwd_3d(xpad, w, b):
    n, c, dp, hp, wp = xpad.shape
    o = w.shape[0]
    k = w.shape[2]
    dd, hh, ww = dp - (k - 1), hp - (k - 1), wp - (k - 1)
    out = np.zeros((n, o, dd, hh, ww), dtype=xpad.dtype)
    for kd in range(k):
        for kh in range(k):
            for kw in range(k):
                seg = xpad[:, :, kd : kd + dd, kh : kh + hh, kw : kw + ww]
                out += np.einsum("oc,ncdhw->nodhw", w[:, :, kd, kh, kw], seg, optimize=True)
    return out + b[None, :, None, None, None].astype(xpad.dtype)


def conv_dw_3d(xpad, dout):
    n, c, dp, hp, wp = xpad.shape
    o = dout.shape[1]
    dd, hh, ww = dout.shape[2], dout.shape[3], dout.shape[4]
    k = dp - dd + 1
    dw = np.empty((o, c, k, k, k), dtype=xpad.dtype)
    for kd in range(k):
        for kh in range(k):
            for kw in range(k):
                seg = xpad[:, :, kd : kd + dd, kh : kh + hh, kw : kw + ww]
                dw[:, :, kd, kh, kw] = np.einsum("nodhw,ncdhw->oc", dout, seg, optimize=True)
    return dw


def set_num_threads(n):  # numpy backend has no thread pool of its own
    pass
