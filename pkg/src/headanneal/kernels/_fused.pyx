# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled fused cost kernel: two small MLPs evaluated on a sparse bit state.

Scores one pruning state in a single call without touching the Python
object layer, which is what makes the annealing loop fast at large head
counts. Semantics mirror kernels.fallback.NumpyPairKernel exactly (up to
floating summation order).
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


cdef inline double _clip(double y, double lo, double hi) nogil:
    if y < lo:
        return lo
    if y > hi:
        return hi
    return y


cdef class CompiledPairKernel:
    """Evaluates eps*clip(net_b(s)) + (1-eps)*clip(net_p(s)) for a bit state.

    Each net is a [n, h1, h2, 1] feedforward stack with rectifier hiddens.
    The input is passed as the array of set-bit indices; the first layer is
    computed as a row gather-sum, so cost scales with the pruned-head count
    rather than with n.
    """

    cdef double[:, ::1] bw1
    cdef double[::1] bb1
    cdef double[:, ::1] bw2t
    cdef double[::1] bb2
    cdef double[::1] bw3
    cdef double bb3
    cdef double[:, ::1] pw1
    cdef double[::1] pb1
    cdef double[:, ::1] pw2t
    cdef double[::1] pb2
    cdef double[::1] pw3
    cdef double pb3
    cdef double[::1] scratch1
    cdef double[::1] scratch2
    cdef public double epsilon
    cdef public double clip_lo
    cdef public double clip_hi
    cdef public int n

    def __init__(self, bias_net, ppl_net, double epsilon,
                 double clip_lo=0.0, double clip_hi=1.5):
        w1, b1, w2, b2, w3, b3 = bias_net
        self.bw1 = np.ascontiguousarray(w1, dtype=np.float64)
        self.bb1 = np.ascontiguousarray(b1, dtype=np.float64)
        # store W2 transposed so the second layer walks contiguous rows
        self.bw2t = np.ascontiguousarray(np.asarray(w2, dtype=np.float64).T)
        self.bb2 = np.ascontiguousarray(b2, dtype=np.float64)
        self.bw3 = np.ascontiguousarray(np.asarray(w3, dtype=np.float64).ravel())
        self.bb3 = float(np.asarray(b3).ravel()[0])
        w1, b1, w2, b2, w3, b3 = ppl_net
        self.pw1 = np.ascontiguousarray(w1, dtype=np.float64)
        self.pb1 = np.ascontiguousarray(b1, dtype=np.float64)
        self.pw2t = np.ascontiguousarray(np.asarray(w2, dtype=np.float64).T)
        self.pb2 = np.ascontiguousarray(b2, dtype=np.float64)
        self.pw3 = np.ascontiguousarray(np.asarray(w3, dtype=np.float64).ravel())
        self.pb3 = float(np.asarray(b3).ravel()[0])
        if self.bw1.shape[0] != self.pw1.shape[0]:
            raise ValueError("bias and perplexity nets disagree on input width")
        self.n = self.bw1.shape[0]
        self.epsilon = epsilon
        self.clip_lo = clip_lo
        self.clip_hi = clip_hi
        cdef Py_ssize_t h1 = max(self.bw1.shape[1], self.pw1.shape[1])
        cdef Py_ssize_t h2 = max(self.bw2t.shape[0], self.pw2t.shape[0])
        self.scratch1 = np.empty(h1, dtype=np.float64)
        self.scratch2 = np.empty(h2, dtype=np.float64)

    cdef double _forward(self, double[:, ::1] w1, double[::1] b1,
                         double[:, ::1] w2t, double[::1] b2,
                         double[::1] w3, double b3,
                         cnp.int64_t[::1] idx) nogil:
        cdef Py_ssize_t h1 = w1.shape[1]
        cdef Py_ssize_t h2 = w2t.shape[0]
        cdef Py_ssize_t i, j, k
        cdef double acc, a0, a1, a2, a3
        cdef double[::1] z1 = self.scratch1
        cdef double[::1] z2 = self.scratch2
        for j in range(h1):
            z1[j] = b1[j]
        for i in range(idx.shape[0]):
            k = idx[i]
            for j in range(h1):
                z1[j] += w1[k, j]
        for j in range(h1):
            if z1[j] < 0.0:
                z1[j] = 0.0
        for i in range(h2):
            # four independent accumulators keep the dot product pipelined
            a0 = 0.0
            a1 = 0.0
            a2 = 0.0
            a3 = 0.0
            j = 0
            while j + 4 <= h1:
                a0 += w2t[i, j] * z1[j]
                a1 += w2t[i, j + 1] * z1[j + 1]
                a2 += w2t[i, j + 2] * z1[j + 2]
                a3 += w2t[i, j + 3] * z1[j + 3]
                j += 4
            acc = b2[i] + ((a0 + a1) + (a2 + a3))
            while j < h1:
                acc += w2t[i, j] * z1[j]
                j += 1
            z2[i] = acc if acc > 0.0 else 0.0
        acc = b3
        for i in range(h2):
            acc += w3[i] * z2[i]
        return _clip(acc, self.clip_lo, self.clip_hi)

    cpdef double cost_of_indices(self, cnp.int64_t[::1] idx):
        """Cost of the state whose set bits are listed in idx."""
        cdef double yb = 0.0
        cdef double yp = 0.0
        if self.epsilon > 0.0:
            yb = self._forward(self.bw1, self.bb1, self.bw2t, self.bb2,
                               self.bw3, self.bb3, idx)
        if self.epsilon < 1.0:
            yp = self._forward(self.pw1, self.pb1, self.pw2t, self.pb2,
                               self.pw3, self.pb3, idx)
        return self.epsilon * yb + (1.0 - self.epsilon) * yp

    def predictions_of_indices(self, cnp.int64_t[::1] idx):
        """(bias, ppl) clipped predictions for one state; both nets run."""
        cdef double yb = self._forward(self.bw1, self.bb1, self.bw2t, self.bb2,
                                       self.bw3, self.bb3, idx)
        cdef double yp = self._forward(self.pw1, self.pb1, self.pw2t, self.pb2,
                                       self.pw3, self.pb3, idx)
        return yb, yp
