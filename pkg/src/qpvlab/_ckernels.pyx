# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: cyclic Jacobi Hermitian eigensolver, batched PSD
projection and the Monte Carlo round tally loop."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, hypot

cnp.import_array()

NAME = "cython"

cdef double OFF_TOL = 1e-13
cdef int MAX_SWEEPS = 100


cdef void _jacobi(double complex[:, ::1] a, double complex[:, ::1] v) noexcept nogil:
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t i, p, q, k
    cdef int sweep
    cdef double norm2 = 0.0, off2, mag, theta, t, c, s
    cdef double complex apq, ph, phc, x, y

    for i in range(n):
        for k in range(n):
            v[i, k] = 1.0 if i == k else 0.0
            norm2 += a[i, k].real * a[i, k].real + a[i, k].imag * a[i, k].imag
    if norm2 == 0.0:
        return

    for sweep in range(MAX_SWEEPS):
        off2 = 0.0
        for p in range(n):
            for q in range(p + 1, n):
                off2 += 2.0 * (a[p, q].real * a[p, q].real + a[p, q].imag * a[p, q].imag)
        if off2 <= OFF_TOL * OFF_TOL * norm2:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                mag = hypot(apq.real, apq.imag)
                if mag == 0.0:
                    continue
                ph = apq / mag
                phc = ph.conjugate()
                theta = (a[q, q].real - a[p, p].real) / (2.0 * mag)
                t = 1.0 / (fabs(theta) + sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / sqrt(t * t + 1.0)
                s = t * c
                # G = [[c, s], [-s*conj(ph), c*conj(ph)]] on (p, q); A <- G^H A G
                for k in range(n):
                    x = a[k, p]
                    y = a[k, q]
                    a[k, p] = c * x - s * phc * y
                    a[k, q] = s * x + c * phc * y
                for k in range(n):
                    x = a[p, k]
                    y = a[q, k]
                    a[p, k] = c * x - s * ph * y
                    a[q, k] = s * x + c * ph * y
                a[p, q] = 0.0
                a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
                for k in range(n):
                    x = v[k, p]
                    y = v[k, q]
                    v[k, p] = c * x - s * phc * y
                    v[k, q] = s * x + c * phc * y


def eigh(h):
    """Eigenvalues (ascending) and eigenvectors of a Hermitian matrix."""
    a = np.array(h, dtype=np.complex128, order="C", copy=True)
    n = a.shape[0]
    v = np.empty((n, n), dtype=np.complex128)
    cdef double complex[:, ::1] av = a
    cdef double complex[:, ::1] vv = v
    with nogil:
        _jacobi(av, vv)
    w = a.diagonal().real.copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def psd_project(stack):
    """Project each matrix of a (m, n, n) Hermitian stack onto the PSD cone."""
    work = np.array(stack, dtype=np.complex128, order="C", copy=True)
    cdef Py_ssize_t m = work.shape[0]
    cdef Py_ssize_t n = work.shape[1]
    out = np.zeros_like(work)
    vecs = np.empty((n, n), dtype=np.complex128)
    cdef double complex[:, :, ::1] wv = work
    cdef double complex[:, :, ::1] ov = out
    cdef double complex[:, ::1] vv = vecs
    cdef Py_ssize_t b, i, j, k
    cdef double lam
    cdef double complex acc
    with nogil:
        for b in range(m):
            _jacobi(wv[b], vv)
            for i in range(n):
                for j in range(i, n):
                    acc = 0.0
                    for k in range(n):
                        lam = wv[b, k, k].real
                        if lam > 0.0:
                            acc = acc + vv[i, k] * lam * vv[j, k].conjugate()
                    ov[b, i, j] = acc
                    ov[b, j, i] = acc.conjugate()
                ov[b, i, i] = ov[b, i, i].real
    return out


def min_eigvals(stack):
    work = np.array(stack, dtype=np.complex128, order="C", copy=True)
    cdef Py_ssize_t m = work.shape[0]
    cdef Py_ssize_t n = work.shape[1]
    res = np.empty(m, dtype=np.float64)
    vecs = np.empty((n, n), dtype=np.complex128)
    cdef double complex[:, :, ::1] wv = work
    cdef double complex[:, ::1] vv = vecs
    cdef double[::1] rv = res
    cdef Py_ssize_t b, k
    cdef double lo
    with nogil:
        for b in range(m):
            _jacobi(wv[b], vv)
            lo = wv[b, 0, 0].real
            for k in range(1, n):
                if wv[b, k, k].real < lo:
                    lo = wv[b, k, k].real
            rv[b] = lo
    return res


cdef inline Py_ssize_t _search(const double[:] cdf, double u) noexcept nogil:
    # first index with cdf[idx] > u, clipped to the last entry
    cdef Py_ssize_t lo = 0, hi = cdf.shape[0], mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if cdf[mid] <= u:
            lo = mid + 1
        else:
            hi = mid
    if lo >= cdf.shape[0]:
        lo = cdf.shape[0] - 1
    return lo


def tally_rounds(const double[:, :] uniforms, const double[:] prior_cdf,
                 const double[:, :] joint_cdf, Py_ssize_t n_ob,
                 const cnp.int64_t[:, :] rule_a, const cnp.int64_t[:, :] rule_b,
                 const cnp.int64_t[:] labels):
    """Tally one block of simulated rounds (see the numpy twin for layout)."""
    cdef Py_ssize_t n = uniforms.shape[0]
    cdef Py_ssize_t n_r = rule_a.shape[1]
    cdef Py_ssize_t i, h, j, r
    cdef cnp.int64_t la, lb, lab
    cdef cnp.int64_t conclusive = 0, success = 0, agree = 0
    cdef cnp.int64_t ans_a = 0, ans_b = 0, loc_a = 0, loc_b = 0
    with nogil:
        for i in range(n):
            h = _search(prior_cdf, uniforms[i, 0])
            j = _search(joint_cdf[h], uniforms[i, 1])
            r = <Py_ssize_t>(uniforms[i, 2] * n_r)
            if r >= n_r:
                r = n_r - 1
            la = rule_a[j // n_ob, r]
            lb = rule_b[j % n_ob, r]
            lab = labels[h]
            if la >= 0:
                ans_a += 1
            if lb >= 0:
                ans_b += 1
            if la == lab:
                loc_a += 1
            if lb == lab:
                loc_b += 1
            if la >= 0 and lb >= 0:
                conclusive += 1
                if la == lb:
                    agree += 1
                    if la == lab:
                        success += 1
    return np.array([n, conclusive, success, agree, ans_a, ans_b, loc_a, loc_b],
                    dtype=np.int64)
