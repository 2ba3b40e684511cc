"""Backend selection for the hot similarity kernels.

Two interchangeable implementations of the per-tile cosine kernel:

* a numba ``@njit(nogil=True)`` scalar loop (default), and
* a pure-numpy path that accumulates over the feature axis in the same
  sequential order.

Both accumulate in float64 element by element, so they produce bitwise
identical similarities. Set ``DBGRAPH_NO_NUMBA=1`` to force the numpy path
(also used automatically when numba is unavailable).
"""

from __future__ import annotations

import os

import numpy as np

_DISABLED = os.environ.get("DBGRAPH_NO_NUMBA", "").lower() in ("1", "true", "yes")

if not _DISABLED:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is a declared dependency
        _DISABLED = True

USING_NUMBA = not _DISABLED


def _tile_pairs_numpy(data, i0, i1, j0, j1, threshold):
    """Pure-numpy tile kernel: Gram block accumulated one feature at a time,
    matching the scalar loop's sequential float64 sums bitwise."""
    sims = np.zeros((i1 - i0, j1 - j0), dtype=np.float64)
    for t in range(data.shape[1]):
        sims += np.outer(data[i0:i1, t], data[j0:j1, t])
    np.clip(sims, -1.0, 1.0, out=sims)
    ii, jj = np.nonzero(sims >= threshold)
    gi = ii + i0
    gj = jj + j0
    keep = gi < gj
    return gi[keep], gj[keep], sims[ii, jj][keep]


def _tile_hist_numpy(data, i0, i1, j0, j1, edges):
    sims = np.zeros((i1 - i0, j1 - j0), dtype=np.float64)
    for t in range(data.shape[1]):
        sims += np.outer(data[i0:i1, t], data[j0:j1, t])
    np.clip(sims, -1.0, 1.0, out=sims)
    gi = np.arange(i0, i1)[:, None]
    gj = np.arange(j0, j1)[None, :]
    vals = sims[gi < gj]
    counts, _ = np.histogram(vals, bins=edges)
    return counts.astype(np.int64)


if USING_NUMBA:

    @njit(nogil=True, cache=True)
    def _tile_pairs_numba(data, i0, i1, j0, j1, threshold):  # pragma: no cover
        d = data.shape[1]
        cap = (i1 - i0) * (j1 - j0)
        out_i = np.empty(cap, dtype=np.int64)
        out_j = np.empty(cap, dtype=np.int64)
        out_s = np.empty(cap, dtype=np.float64)
        n = 0
        for i in range(i0, i1):
            for j in range(j0, j1):
                if j <= i:
                    continue
                s = 0.0
                for t in range(d):
                    s += data[i, t] * data[j, t]
                if s > 1.0:
                    s = 1.0
                elif s < -1.0:
                    s = -1.0
                if s >= threshold:
                    out_i[n] = i
                    out_j[n] = j
                    out_s[n] = s
                    n += 1
        return out_i[:n], out_j[:n], out_s[:n]

    @njit(nogil=True, cache=True)
    def _tile_hist_numba(data, i0, i1, j0, j1, edges):  # pragma: no cover
        d = data.shape[1]
        nbins = edges.shape[0] - 1
        counts = np.zeros(nbins, dtype=np.int64)
        span = edges[nbins] - edges[0]
        for i in range(i0, i1):
            for j in range(j0, j1):
                if j <= i:
                    continue
                s = 0.0
                for t in range(d):
                    s += data[i, t] * data[j, t]
                if s > 1.0:
                    s = 1.0
                elif s < -1.0:
                    s = -1.0
                b = int((s - edges[0]) / span * nbins)
                if b < 0:
                    b = 0
                elif b >= nbins:
                    b = nbins - 1
                counts[b] += 1
        return counts

    tile_pairs = _tile_pairs_numba
    tile_hist = _tile_hist_numba
else:
    tile_pairs = _tile_pairs_numpy
    tile_hist = _tile_hist_numpy
