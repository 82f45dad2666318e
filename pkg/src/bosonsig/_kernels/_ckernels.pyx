# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: Ryser permanents and Gini tree growth.

Every function here has a NumPy twin in ``_pykernels`` with the same
signature; the tree grower is bit-compatible with its twin.
"""
import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, free, qsort

cnp.import_array()

ctypedef unsigned long long u64

BACKEND = "cython"


cdef inline double complex _ryser(const double complex* a, Py_ssize_t k,
                                  double complex* rowsum) noexcept nogil:
    # a is row-major k x k; Gray-code walk over column subsets
    cdef Py_ssize_t i, j
    cdef u64 step, gray, prev = 0, diff
    cdef Py_ssize_t size = 0
    cdef double complex total = 0, prod
    for i in range(k):
        rowsum[i] = 0
    for step in range(1, (<u64>1) << k):
        gray = step ^ (step >> 1)
        diff = gray ^ prev
        j = 0
        while not ((diff >> j) & 1):
            j += 1
        if gray & diff:
            for i in range(k):
                rowsum[i] = rowsum[i] + a[i * k + j]
            size += 1
        else:
            for i in range(k):
                rowsum[i] = rowsum[i] - a[i * k + j]
            size -= 1
        prev = gray
        prod = rowsum[0]
        for i in range(1, k):
            prod = prod * rowsum[i]
        if (k - size) % 2 == 0:
            total = total + prod
        else:
            total = total - prod
    return total


def permanent(cnp.ndarray a):
    cdef const double complex[:, ::1] m = np.ascontiguousarray(a, dtype=np.complex128)
    cdef Py_ssize_t k = m.shape[0]
    cdef double complex* rowsum = <double complex*> malloc(k * sizeof(double complex))
    cdef double complex out
    try:
        out = _ryser(&m[0, 0], k, rowsum)
    finally:
        free(rowsum)
    return complex(out)


def submatrix_permanents(cnp.ndarray u, cnp.ndarray cols, cnp.ndarray rows):
    """Permanents of ``u[rows[c]][:, cols]`` for every row list ``rows[c]``."""
    cdef const double complex[:, ::1] um = np.ascontiguousarray(u, dtype=np.complex128)
    cdef const long long[::1] cm = np.ascontiguousarray(cols, dtype=np.int64)
    cdef const long long[:, ::1] rm = np.ascontiguousarray(rows, dtype=np.int64)
    cdef Py_ssize_t n = cm.shape[0], nconf = rm.shape[0]
    cdef Py_ssize_t c, i, j
    out = np.empty(nconf, dtype=np.complex128)
    cdef double complex[::1] om = out
    cdef double complex* sub = <double complex*> malloc(n * n * sizeof(double complex))
    cdef double complex* rowsum = <double complex*> malloc(n * sizeof(double complex))
    try:
        with nogil:
            for c in range(nconf):
                for i in range(n):
                    for j in range(n):
                        sub[i * n + j] = um[rm[c, i], cm[j]]
                om[c] = _ryser(sub, n, rowsum)
    finally:
        free(sub)
        free(rowsum)
    return out


# ---------------------------------------------------------------- trees

cdef inline u64 _splitmix_next(u64* state) noexcept nogil:
    cdef u64 z
    state[0] = state[0] + <u64>0x9E3779B97F4A7C15
    z = state[0]
    z = (z ^ (z >> 30)) * <u64>0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <u64>0x94D049BB133111EB
    return z ^ (z >> 31)


ctypedef struct Pair:
    double v
    long long y


cdef int _cmp_pair(const void* a, const void* b) noexcept nogil:
    cdef double va = (<Pair*>a).v
    cdef double vb = (<Pair*>b).v
    if va < vb:
        return -1
    if va > vb:
        return 1
    return 0


cdef class _Grower:
    cdef const double[:, ::1] X
    cdef const long long[::1] y
    cdef long long[::1] idx
    cdef long long[::1] buf
    cdef Py_ssize_t K, F, f
    cdef u64 state
    cdef Py_ssize_t n_nodes
    cdef long long[::1] feature, left, right, nsamp
    cdef double[::1] threshold
    cdef long long[:, ::1] value
    cdef long long* perm
    cdef Pair* pairs
    cdef long long* lcounts
    cdef long long* counts

    def __cinit__(self, X, y, idx, Py_ssize_t K, Py_ssize_t f, u64 seed):
        self.X = X
        self.y = y
        self.idx = idx
        self.K = K
        self.F = X.shape[1]
        self.f = f
        self.state = seed
        self.n_nodes = 0
        cap = 2 * idx.shape[0] + 1
        self.buf = np.empty(idx.shape[0], dtype=np.int64)
        self.feature = np.full(cap, -1, dtype=np.int64)
        self.left = np.full(cap, -1, dtype=np.int64)
        self.right = np.full(cap, -1, dtype=np.int64)
        self.nsamp = np.zeros(cap, dtype=np.int64)
        self.threshold = np.zeros(cap, dtype=np.float64)
        self.value = np.zeros((cap, K), dtype=np.int64)
        self.perm = <long long*> malloc(self.F * sizeof(long long))
        self.pairs = <Pair*> malloc(max(idx.shape[0], 1) * sizeof(Pair))
        self.lcounts = <long long*> malloc(K * sizeof(long long))
        self.counts = <long long*> malloc(K * sizeof(long long))

    def __dealloc__(self):
        free(self.perm)
        free(self.pairs)
        free(self.lcounts)
        free(self.counts)

    cdef Py_ssize_t build(self, Py_ssize_t start, Py_ssize_t end):
        cdef Py_ssize_t node = self.n_nodes
        cdef Py_ssize_t n = end - start
        cdef Py_ssize_t i, j, c, r, feat, best_feat = -1, nl, nr, tmp
        cdef long long sq, sl, sr, num, den
        cdef double score, best_score, parent_score, thr, best_thr = 0.0
        cdef bint pure
        self.n_nodes += 1
        self.nsamp[node] = n
        for c in range(self.K):
            self.counts[c] = 0
        for i in range(start, end):
            self.counts[self.y[self.idx[i]]] += 1
        sq = 0
        pure = False
        for c in range(self.K):
            self.value[node, c] = self.counts[c]
            sq += self.counts[c] * self.counts[c]
            if self.counts[c] == n:
                pure = True
        if n < 2 or pure:
            return node

        parent_score = <double>sq / <double>n
        best_score = parent_score
        for j in range(self.F):
            self.perm[j] = j
        for j in range(self.F):
            if j >= self.f and best_feat >= 0:
                break
            r = j + <Py_ssize_t>(_splitmix_next(&self.state) % <u64>(self.F - j))
            tmp = self.perm[j]
            self.perm[j] = self.perm[r]
            self.perm[r] = tmp
            feat = self.perm[j]
            for i in range(n):
                self.pairs[i].v = self.X[self.idx[start + i], feat]
                self.pairs[i].y = self.y[self.idx[start + i]]
            qsort(self.pairs, n, sizeof(Pair), _cmp_pair)
            for c in range(self.K):
                self.lcounts[c] = 0
            for i in range(n - 1):
                self.lcounts[self.pairs[i].y] += 1
                if not (self.pairs[i].v < self.pairs[i + 1].v):
                    continue
                nl = i + 1
                nr = n - nl
                sl = 0
                sr = 0
                for c in range(self.K):
                    sl += self.lcounts[c] * self.lcounts[c]
                    sr += (self.counts[c] - self.lcounts[c]) * (self.counts[c] - self.lcounts[c])
                num = sl * nr + sr * nl
                den = <long long>nl * nr
                score = <double>num / <double>den
                if score > best_score:
                    best_score = score
                    best_feat = feat
                    thr = 0.5 * (self.pairs[i].v + self.pairs[i + 1].v)
                    if thr >= self.pairs[i + 1].v:
                        thr = self.pairs[i].v
                    best_thr = thr
        if best_feat < 0:
            return node

        # stable partition: left block keeps original order, then right block
        nl = 0
        for i in range(start, end):
            if self.X[self.idx[i], best_feat] <= best_thr:
                self.buf[nl] = self.idx[i]
                nl += 1
        nr = 0
        for i in range(start, end):
            if not (self.X[self.idx[i], best_feat] <= best_thr):
                self.buf[nl + nr] = self.idx[i]
                nr += 1
        for i in range(n):
            self.idx[start + i] = self.buf[i]

        self.feature[node] = best_feat
        self.threshold[node] = best_thr
        self.left[node] = self.build(start, start + nl)
        self.right[node] = self.build(start + nl, end)
        return node


def grow_tree(cnp.ndarray X, cnp.ndarray y, cnp.ndarray sample, Py_ssize_t n_classes,
              Py_ssize_t max_features, u64 seed):
    """Grow one unpruned Gini tree on ``X[sample]``.

    Returns ``(feature, threshold, left, right, n_samples, value)`` arrays in
    preorder; leaves carry ``feature == -1``.
    """
    Xc = np.ascontiguousarray(X, dtype=np.float64)
    yc = np.ascontiguousarray(y, dtype=np.int64)
    idx = np.array(sample, dtype=np.int64, copy=True)
    g = _Grower(Xc, yc, idx, n_classes, max_features, seed)
    g.build(0, idx.shape[0])
    k = g.n_nodes
    return (
        np.asarray(g.feature)[:k].copy(),
        np.asarray(g.threshold)[:k].copy(),
        np.asarray(g.left)[:k].copy(),
        np.asarray(g.right)[:k].copy(),
        np.asarray(g.nsamp)[:k].copy(),
        np.asarray(g.value)[:k].copy(),
    )
