"""Pure NumPy ray-tracing kernels, the fallback when the compiled core is absent.

Both backends receive the same precomputed geometry tables and evaluate the
same per-step expression u = u0 + t*slope, so results match to rounding error.
"""

import numpy as np


def forward(img, axis, slope, wgt, u0, out):
    side = img.shape[0]
    steps = np.arange(side)
    for a in range(u0.shape[0]):
        u = u0[a][:, None] + steps[None, :] * slope[a]  # (n_dtc, side)
        j0 = np.floor(u).astype(np.int64)
        fr = u - j0
        wl = np.where((j0 >= 0) & (j0 < side), 1.0 - fr, 0.0)
        wr = np.where((j0 >= -1) & (j0 < side - 1), fr, 0.0)
        jl = np.clip(j0, 0, side - 1)
        jr = np.clip(j0 + 1, 0, side - 1)
        if axis[a] == 0:
            vals = img[steps[None, :], jl] * wl + img[steps[None, :], jr] * wr
        else:
            vals = img[jl, steps[None, :]] * wl + img[jr, steps[None, :]] * wr
        out[a] = wgt[a] * vals.sum(axis=1)
    return out


def adjoint(sino, axis, slope, wgt, u0, out):
    side = out.shape[0]
    steps = np.arange(side)
    acc = out.ravel()
    for a in range(u0.shape[0]):
        u = u0[a][:, None] + steps[None, :] * slope[a]
        j0 = np.floor(u).astype(np.int64)
        fr = u - j0
        wl = np.where((j0 >= 0) & (j0 < side), 1.0 - fr, 0.0)
        wr = np.where((j0 >= -1) & (j0 < side - 1), fr, 0.0)
        jl = np.clip(j0, 0, side - 1)
        jr = np.clip(j0 + 1, 0, side - 1)
        ray = wgt[a] * sino[a]  # (n_dtc,)
        if axis[a] == 0:
            fl = steps[None, :] * side + jl
            fr_idx = steps[None, :] * side + jr
        else:
            fl = jl * side + steps[None, :]
            fr_idx = jr * side + steps[None, :]
        acc += np.bincount(fl.ravel(), weights=(wl * ray[:, None]).ravel(), minlength=side * side)
        acc += np.bincount(fr_idx.ravel(), weights=(wr * ray[:, None]).ravel(), minlength=side * side)
    return out
