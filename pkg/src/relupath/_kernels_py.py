"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``."""

import numpy as np

_CHUNK = 1 << 16


def pattern_sups(lo, hi):
    lo = np.ascontiguousarray(lo, dtype=np.float64)
    hi = np.ascontiguousarray(hi, dtype=np.float64)
    if lo.shape[1] == 0 or hi.shape[1] != lo.shape[1]:
        raise ValueError("lo and hi must share a nonzero column count")
    nlo = lo.shape[0]
    out = np.empty(nlo * hi.shape[0])
    step = max(1, _CHUNK // max(nlo, 1))
    for start in range(0, hi.shape[0], step):
        block = hi[start:start + step]
        sums = block[:, None, :] + lo[None, :, :]
        out[start * nlo:(start + len(block)) * nlo] = sums.max(axis=2).ravel()
    return out


def path_product_sum(mats):
    if len(mats) == 0:
        raise ValueError("need at least one weight matrix")
    # tensor of all path products, one axis per level
    prods = np.asarray(mats[0], dtype=np.float64)[0]
    for m in mats[1:]:
        prods = prods[..., None] * np.asarray(m, dtype=np.float64)
    return float(prods.sum())


def greedy_pack(vals, eps2):
    vals = np.ascontiguousarray(vals, dtype=np.float64)
    centers = []
    for i in range(vals.shape[0]):
        if centers:
            diff = vals[centers] - vals[i]
            if np.any(np.einsum("ij,ij->i", diff, diff) <= eps2):
                continue
        centers.append(i)
    return np.asarray(centers, dtype=np.intp)
