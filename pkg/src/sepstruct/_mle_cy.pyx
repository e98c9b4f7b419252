# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled diluted likelihood-maximization kernel.

Hot loop of the tomography stage: one call runs the full fixed-point
iteration without touching Python objects, which is what makes
10^4-sample null distributions affordable. Effects arrive in the packed
Hermitian layout of _mle_py.pack_effects, so the probability vector and
the update operator are single BLAS matrix-vector products.

Mirrors _mle_py.run_mle exactly; see that module for the contract.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport log
from scipy.linalg.cython_blas cimport dgemv

cnp.import_array()

BACKEND = "cython"

cdef int MAX_HALVINGS = 20
cdef double DECREASE_ATOL = 1e-9


cdef void _pack(double[::1] rho_re, double[::1] rho_im, double[::1] out, int d) noexcept nogil:
    cdef int i, j, pos
    for i in range(d):
        out[i] = rho_re[i * d + i]
    pos = d
    for i in range(d):
        for j in range(i + 1, d):
            out[pos] = rho_re[i * d + j]
            pos += 1
    for i in range(d):
        for j in range(i + 1, d):
            out[pos] = rho_im[i * d + j]
            pos += 1


cdef void _unpack_half(double[::1] vec, double[::1] out_re, double[::1] out_im,
                       int d) noexcept nogil:
    cdef int i, j, pos
    cdef double re, im
    for i in range(d * d):
        out_re[i] = 0.0
        out_im[i] = 0.0
    for i in range(d):
        out_re[i * d + i] = vec[i]
    pos = d
    for i in range(d):
        for j in range(i + 1, d):
            re = 0.5 * vec[pos]
            out_re[i * d + j] = re
            out_re[j * d + i] = re
            pos += 1
    for i in range(d):
        for j in range(i + 1, d):
            im = 0.5 * vec[pos]
            out_im[i * d + j] = im
            out_im[j * d + i] = -im
            pos += 1


cdef void _cmatmul(double[::1] a_re, double[::1] a_im, double[::1] b_re, double[::1] b_im,
                   double[::1] c_re, double[::1] c_im, int d) noexcept nogil:
    cdef int i, j, k
    cdef double sr, si, ar, ai, br, bi
    for i in range(d):
        for j in range(d):
            sr = 0.0
            si = 0.0
            for k in range(d):
                ar = a_re[i * d + k]
                ai = a_im[i * d + k]
                br = b_re[k * d + j]
                bi = b_im[k * d + j]
                sr += ar * br - ai * bi
                si += ar * bi + ai * br
            c_re[i * d + j] = sr
            c_im[i * d + j] = si


cdef double _loglike(double[::1] freqs, double[::1] p, double prob_floor,
                     int n_eff) noexcept nogil:
    cdef int m
    cdef double ll = 0.0, pm
    for m in range(n_eff):
        if freqs[m] > 0.0:
            pm = p[m] if p[m] > prob_floor else prob_floor
            ll += freqs[m] * log(pm)
    return ll


def run_mle(double[:, ::1] packed_effects, double[::1] freqs, rho0, double epsilon,
            int max_iters, double tol_per_shot, double prob_floor):
    cdef int n_eff = packed_effects.shape[0]
    cdef int dd = packed_effects.shape[1]
    cdef int d = rho0.shape[0]
    if d * d != dd:
        raise ValueError("packed effect width does not match the state dimension")

    rho0 = np.ascontiguousarray(rho0, dtype=complex)
    cdef double[::1] rho_re = np.ascontiguousarray(rho0.real).reshape(dd)
    cdef double[::1] rho_im = np.ascontiguousarray(rho0.imag).reshape(dd)

    cdef double[::1] packed = np.empty(dd)
    cdef double[::1] p = np.empty(n_eff)
    cdef double[::1] pc = np.empty(n_eff)
    cdef double[::1] wvec = np.empty(n_eff)
    cdef double[::1] racc = np.empty(dd)
    cdef double[::1] r_re = np.empty(dd)
    cdef double[::1] r_im = np.empty(dd)
    cdef double[::1] t_re = np.empty(dd)
    cdef double[::1] t_im = np.empty(dd)
    cdef double[::1] w1_re = np.empty(dd)
    cdef double[::1] w1_im = np.empty(dd)
    cdef double[::1] c_re = np.empty(dd)
    cdef double[::1] c_im = np.empty(dd)
    cdef double[::1] trace = np.empty(max_iters + 1)

    cdef double m_total = 0.0
    cdef int m, j, i, it, h
    for m in range(n_eff):
        m_total += freqs[m]
    if m_total <= 0.0:
        raise ValueError("frequency vector sums to zero")

    # Fortran views our C-contiguous (n_eff, dd) array as (dd, n_eff) with lda=dd:
    # trans='T' gives p = E x, trans='N' gives the weighted column sum E^T w.
    cdef char trans_t = b'T'
    cdef char trans_n = b'N'
    cdef int inc = 1
    cdef double one = 1.0, zero = 0.0
    cdef double pm, ll, llc, gain, eps, tr, scale, hr, hi
    cdef int n_kept = 0, converged = 0, accepted

    with nogil:
        _pack(rho_re, rho_im, packed, d)
        dgemv(&trans_t, &dd, &n_eff, &one, &packed_effects[0, 0], &dd,
              &packed[0], &inc, &zero, &p[0], &inc)
        ll = _loglike(freqs, p, prob_floor, n_eff)
        trace[0] = ll
        for it in range(max_iters):
            # R = sum_m f_m / (M p_m) Pi_m, accumulated in packed form
            for m in range(n_eff):
                pm = p[m] if p[m] > prob_floor else prob_floor
                wvec[m] = freqs[m] / (pm * m_total)
            dgemv(&trans_n, &dd, &n_eff, &one, &packed_effects[0, 0], &dd,
                  &wvec[0], &inc, &zero, &racc[0], &inc)
            _unpack_half(racc, r_re, r_im, d)
            eps = epsilon
            accepted = 0
            for h in range(MAX_HALVINGS + 1):
                # T = I + eps R, candidate = T rho T, trace-normalized, hermitized
                for j in range(dd):
                    t_re[j] = eps * r_re[j]
                    t_im[j] = eps * r_im[j]
                for i in range(d):
                    t_re[i * d + i] += 1.0
                _cmatmul(t_re, t_im, rho_re, rho_im, w1_re, w1_im, d)
                _cmatmul(w1_re, w1_im, t_re, t_im, c_re, c_im, d)
                tr = 0.0
                for i in range(d):
                    tr += c_re[i * d + i]
                scale = 1.0 / tr
                for j in range(dd):
                    c_re[j] *= scale
                    c_im[j] *= scale
                for i in range(d):
                    for j in range(i, d):
                        hr = 0.5 * (c_re[i * d + j] + c_re[j * d + i])
                        hi = 0.5 * (c_im[i * d + j] - c_im[j * d + i])
                        c_re[i * d + j] = hr
                        c_re[j * d + i] = hr
                        c_im[i * d + j] = hi
                        c_im[j * d + i] = -hi
                _pack(c_re, c_im, packed, d)
                dgemv(&trans_t, &dd, &n_eff, &one, &packed_effects[0, 0], &dd,
                      &packed[0], &inc, &zero, &pc[0], &inc)
                llc = _loglike(freqs, pc, prob_floor, n_eff)
                if llc >= ll - DECREASE_ATOL:
                    accepted = 1
                    break
                eps *= 0.5
            if accepted == 0:
                converged = 1
                break
            gain = llc - ll
            for j in range(dd):
                rho_re[j] = c_re[j]
                rho_im[j] = c_im[j]
            for m in range(n_eff):
                p[m] = pc[m]
            ll = llc
            n_kept += 1
            trace[n_kept] = ll
            if gain < tol_per_shot * m_total:
                converged = 1
                break

    rho = (np.asarray(rho_re) + 1j * np.asarray(rho_im)).reshape(d, d)
    return rho, np.asarray(trace)[: n_kept + 1].copy(), bool(converged)
