"""NumPy fallback for the compiled kernels.

Same signatures and results as ``_ckernels``. The permanent routine
vectorises the Gray-code walk across a batch of submatrices; the tree grower
mirrors the compiled one step for step (same random stream, same scores,
same stable partition), so both backends return identical trees.
"""
from __future__ import annotations

import numpy as np

BACKEND = "python"

_MASK64 = (1 << 64) - 1


def _ryser_batch(mats: np.ndarray) -> np.ndarray:
    b, k, _ = mats.shape
    rowsum = np.zeros((b, k), dtype=np.complex128)
    total = np.zeros(b, dtype=np.complex128)
    prev = 0
    size = 0
    for step in range(1, 1 << k):
        gray = step ^ (step >> 1)
        diff = gray ^ prev
        j = diff.bit_length() - 1
        if gray & diff:
            rowsum += mats[:, :, j]
            size += 1
        else:
            rowsum -= mats[:, :, j]
            size -= 1
        prev = gray
        prod = rowsum.prod(axis=1)
        if (k - size) % 2 == 0:
            total += prod
        else:
            total -= prod
    return total


def permanent(a: np.ndarray) -> complex:
    m = np.asarray(a, dtype=np.complex128)
    return complex(_ryser_batch(m[None, :, :])[0])


def submatrix_permanents(u: np.ndarray, cols: np.ndarray, rows: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=np.complex128)
    cols = np.asarray(cols, dtype=np.int64)
    rows = np.asarray(rows, dtype=np.int64)
    # subs[c, i, j] = u[rows[c, i], cols[j]]
    subs = u[rows[:, :, None], cols[None, None, :]]
    return _ryser_batch(subs)


class _SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)


class _Grower:
    def __init__(self, X, y, idx, K, f, seed):
        self.X = X
        self.y = y
        self.idx = idx
        self.K = K
        self.F = X.shape[1]
        self.f = f
        self.rng = _SplitMix64(seed)
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.nsamp: list[int] = []
        self.value: list[np.ndarray] = []

    def _new_node(self, n, counts):
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.nsamp.append(n)
        self.value.append(counts)
        return len(self.feature) - 1

    def _best_for_feature(self, rows, labels, counts, feat):
        v = self.X[rows, feat]
        order = np.argsort(v, kind="stable")
        v = v[order]
        onehot = np.zeros((len(rows), self.K), dtype=np.int64)
        onehot[np.arange(len(rows)), labels[order]] = 1
        lc = np.cumsum(onehot, axis=0)[:-1]
        valid = v[:-1] < v[1:]
        if not valid.any():
            return None
        pos = np.flatnonzero(valid)
        lc = lc[pos]
        rc = counts[None, :] - lc
        nl = pos + 1
        nr = len(rows) - nl
        num = (lc * lc).sum(axis=1) * nr + (rc * rc).sum(axis=1) * nl
        score = num.astype(np.float64) / (nl * nr).astype(np.float64)
        best = int(np.argmax(score))
        i = int(pos[best])
        thr = 0.5 * (v[i] + v[i + 1])
        if thr >= v[i + 1]:
            thr = v[i]
        return float(score[best]), float(thr)

    def build(self, start: int, end: int) -> int:
        n = end - start
        rows = self.idx[start:end]
        labels = self.y[rows]
        counts = np.bincount(labels, minlength=self.K).astype(np.int64)
        node = self._new_node(n, counts)
        if n < 2 or counts.max() == n:
            return node
        parent_score = float(int((counts * counts).sum())) / float(n)
        best_score, best_feat, best_thr = parent_score, -1, 0.0
        perm = list(range(self.F))
        for j in range(self.F):
            if j >= self.f and best_feat >= 0:
                break
            r = j + self.rng.next() % (self.F - j)
            perm[j], perm[r] = perm[r], perm[j]
            feat = perm[j]
            found = self._best_for_feature(rows, labels, counts, feat)
            if found is not None and found[0] > best_score:
                best_score, best_feat, best_thr = found[0], feat, found[1]
        if best_feat < 0:
            return node
        goes_left = self.X[rows, best_feat] <= best_thr
        nl = int(goes_left.sum())
        self.idx[start:end] = np.concatenate([rows[goes_left], rows[~goes_left]])
        self.feature[node] = best_feat
        self.threshold[node] = best_thr
        self.left[node] = self.build(start, start + nl)
        self.right[node] = self.build(start + nl, end)
        return node


def grow_tree(X, y, sample, n_classes, max_features, seed):
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.int64)
    idx = np.array(sample, dtype=np.int64, copy=True)
    g = _Grower(X, y, idx, int(n_classes), int(max_features), int(seed))
    g.build(0, len(idx))
    return (
        np.asarray(g.feature, dtype=np.int64),
        np.asarray(g.threshold, dtype=np.float64),
        np.asarray(g.left, dtype=np.int64),
        np.asarray(g.right, dtype=np.int64),
        np.asarray(g.nsamp, dtype=np.int64),
        np.asarray(g.value, dtype=np.int64).reshape(len(g.feature), int(n_classes)),
    )
