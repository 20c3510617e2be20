"""Uniform spatial hash grid over the unit hypercube.

Points are bucketed into cubic cells of side ``1/G``. Nearest-point queries
scan the block of cells within Chebyshev cell-radius ``k`` of the query's
cell and double ``k`` until the answer is provably exact: any point outside
the block is farther than ``k`` cell widths in every norm we use.
"""

from __future__ import annotations

import itertools

import numpy as np

# keeps the dense cell-start table small relative to n
_MAX_CELLS_PER_POINT = 4
# (query, cell) slots enumerated per chunk
_CHUNK_SLOTS = 1 << 20


def norms(diff: np.ndarray, p: float) -> np.ndarray:
    """Row norms of ``diff`` for ``p`` in {2, inf}.

    The Euclidean branch accumulates squares coordinate by coordinate so that
    every caller gets bit-identical distances for the same pair.
    """
    if p == np.inf:
        return np.abs(diff).max(axis=1)
    acc = diff[:, 0] * diff[:, 0]
    for j in range(1, diff.shape[1]):
        acc = acc + diff[:, j] * diff[:, j]
    return np.sqrt(acc)


class SpatialGrid:
    """Bucket ``points`` (shape ``(n, d)``, coordinates in [0, 1]) by cell."""

    def __init__(self, points: np.ndarray, cell: float):
        points = np.asarray(points, dtype=float)
        n, d = points.shape
        g = max(1, int(np.floor(1.0 / cell))) if cell > 0 else 1
        g_cap = max(1, int(np.floor((_MAX_CELLS_PER_POINT * max(n, 1)) ** (1.0 / d))))
        g = min(g, g_cap)
        self.dim = d
        self.G = g
        self.cell = 1.0 / g
        self._strides = g ** np.arange(d - 1, -1, -1, dtype=np.int64)

        ids = self._cell_ids(self._cell_coords(points))
        order = np.argsort(ids, kind="stable")
        self.index = order
        self.points = points[order]
        self.starts = np.searchsorted(ids[order], np.arange(g**d + 1, dtype=np.int64))

    def _cell_coords(self, x: np.ndarray) -> np.ndarray:
        return np.clip(np.floor(x * self.G), 0, self.G - 1).astype(np.int64)

    def _cell_ids(self, coords: np.ndarray) -> np.ndarray:
        return coords @ self._strides

    def pairs(self, q: np.ndarray, k: int):
        """All (query, stored point) pairs within Chebyshev cell-radius ``k``.

        Returns ``(qrep, pidx, per_q)``: ``qrep`` is nondecreasing, ``pidx``
        indexes :attr:`points` (sorted order), ``per_q`` counts pairs per query.
        """
        m, d = q.shape
        offs = np.array(list(itertools.product(range(-k, k + 1), repeat=d)), dtype=np.int64)
        nc = self._cell_coords(q)[:, None, :] + offs[None, :, :]
        valid = np.all((nc >= 0) & (nc < self.G), axis=2)
        lid = np.where(valid, nc @ self._strides, 0)
        st = self.starts[lid]
        cnt = np.where(valid, self.starts[lid + 1] - st, 0).ravel()
        st = st.ravel()
        per_q = cnt.reshape(m, -1).sum(axis=1)
        total = int(cnt.sum())
        qrep = np.repeat(np.arange(m), per_q)
        run_start = np.cumsum(cnt) - cnt
        pidx = np.arange(total) - np.repeat(run_start - st, cnt)
        return qrep, pidx, per_q

    def _block_min(self, q, k, p, exclude):
        step = max(1, _CHUNK_SLOTS // (2 * k + 1) ** self.dim)
        if q.shape[0] > step:
            return np.concatenate([
                self._block_min(q[i : i + step], k, p, None if exclude is None else exclude[i : i + step])
                for i in range(0, q.shape[0], step)
            ])
        out = np.full(q.shape[0], np.inf)
        qrep, pidx, per_q = self.pairs(q, k)
        if not qrep.size:
            return out
        dist = norms(q[qrep] - self.points[pidx], p)
        if exclude is not None:
            dist[self.index[pidx] == exclude[qrep]] = np.inf
        nz = per_q > 0
        bounds = (np.cumsum(per_q) - per_q)[nz]
        out[nz] = np.minimum.reduceat(dist, bounds)
        return out

    def nearest(self, q, p=np.inf, cap=None, exclude=None) -> np.ndarray:
        """Distance from each query row to the nearest stored point.

        With ``cap`` the result is ``min(distance, cap)``, which lets the search
        stop as soon as the cap is known to bind. ``exclude`` gives, per query,
        the original index of a point to ignore (self-matches).
        """
        q = np.asarray(q, dtype=float)
        m = q.shape[0]
        out = np.full(m, np.inf)
        cap_arr = np.full(m, np.inf) if cap is None else np.asarray(cap, dtype=float)
        pending = np.arange(m)
        k = 1
        while pending.size:
            exc = None if exclude is None else exclude[pending]
            found = self._block_min(q[pending], k, p, exc)
            # guard against floor() disagreements at cell faces
            reach = k * self.cell * (1.0 - 1e-9)
            done = (found <= reach) | (cap_arr[pending] <= reach) | (k >= self.G - 1)
            out[pending[done]] = found[done]
            pending = pending[~done]
            k *= 2
        return np.minimum(out, cap_arr)
