# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled chart kernels.  Same signatures and semantics as ``_pykernels``.

Per span, operands are shifted by their maximum and accumulated in linear
space; a running maximum over split points rescales the accumulator so the
result equals log-sum-exp over all rule applications.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, INFINITY, isfinite

cnp.import_array()

ctypedef cnp.float64_t f64
ctypedef Py_ssize_t idx


cdef inline void _scale_row(const f64[:] logv, f64[:] lin, f64* shift) noexcept nogil:
    cdef idx i, n = logv.shape[0]
    cdef f64 m = -INFINITY
    for i in range(n):
        if logv[i] > m:
            m = logv[i]
    shift[0] = m
    if m == -INFINITY:
        for i in range(n):
            lin[i] = 0.0
    else:
        for i in range(n):
            lin[i] = exp(logv[i] - m)


cdef inline void _csr_matvec(const idx[:] indptr, const idx[:] indices, const f64[:] data,
                             const f64[:] x, f64[:] out) noexcept nogil:
    cdef idx r, k
    cdef f64 acc
    for r in range(out.shape[0]):
        acc = 0.0
        for k in range(indptr[r], indptr[r + 1]):
            acc = acc + data[k] * x[indices[k]]
        out[r] = acc


cdef inline f64 _store_log(f64[:] lin, f64 shift, f64[:] dest) noexcept nogil:
    """dest = log(lin) + shift; returns the max of dest."""
    cdef idx i
    cdef f64 m = -INFINITY, v
    for i in range(lin.shape[0]):
        if lin[i] > 0.0:
            v = log(lin[i]) + shift
        else:
            v = -INFINITY
        dest[i] = v
        if v > m:
            m = v
    return m


cdef inline void _prune(f64[:] logv, f64 m, f64 beam) noexcept nogil:
    cdef idx i
    if not isfinite(beam) or m == -INFINITY:
        return
    for i in range(logv.shape[0]):
        if logv[i] < m - beam:
            logv[i] = -INFINITY


def inside_chart(const f64[:, :] lex_logp, const idx[:] bin_lhs, const idx[:] bin_left,
                 const idx[:] bin_right, const f64[:] bin_prob, closure_csr,
                 double beam=INFINITY):
    cdef idx n = lex_logp.shape[0], N = lex_logp.shape[1], R = bin_prob.shape[0]
    cdef const idx[:] c_ptr = closure_csr[0]
    cdef const idx[:] c_idx = closure_csr[1]
    cdef const f64[:] c_dat = closure_csr[2]

    bot_a = np.full((n + 1, n + 1, N), -np.inf)
    top_a = np.full((n + 1, n + 1, N), -np.inf)
    cdef f64[:, :, :] bot = bot_a
    cdef f64[:, :, :] top = top_a
    cdef f64[:, :, :] lin = np.zeros((n + 1, n + 1, N))
    cdef f64[:, :] shift = np.full((n + 1, n + 1), -np.inf)
    cdef f64[:] acc = np.zeros(N)
    cdef f64[:] blin = np.zeros(N)
    cdef f64[:] tlin = np.zeros(N)

    cdef idx length, p, q, k, r, a
    cdef f64 s, m, w, bm, tm, wl

    with nogil:
        for length in range(1, n + 1):
            for p in range(n - length + 1):
                q = p + length
                if length == 1:
                    for a in range(N):
                        bot[p, q, a] = lex_logp[p, a]
                else:
                    for a in range(N):
                        acc[a] = 0.0
                    m = -INFINITY
                    for k in range(p + 1, q):
                        s = shift[p, k] + shift[k, q]
                        if s == -INFINITY:
                            continue
                        if s > m:
                            if m != -INFINITY:
                                w = exp(m - s)
                                for a in range(N):
                                    acc[a] = acc[a] * w
                            m = s
                        w = exp(s - m)
                        for r in range(R):
                            wl = lin[p, k, bin_left[r]]
                            if wl != 0.0:
                                acc[bin_lhs[r]] += w * bin_prob[r] * wl * lin[k, q, bin_right[r]]
                    if m == -INFINITY:
                        continue
                    _store_log(acc, m, bot[p, q])
                _scale_row(bot[p, q], blin, &bm)
                if bm == -INFINITY:
                    continue
                _csr_matvec(c_ptr, c_idx, c_dat, blin, tlin)
                tm = _store_log(tlin, bm, top[p, q])
                _prune(top[p, q], tm, beam)
                _scale_row(top[p, q], lin[p, q], &shift[p, q])
    return bot_a, top_a


def outside_chart(const f64[:, :, :] bot, const f64[:, :, :] top, const idx[:] bin_lhs,
                  const idx[:] bin_left, const idx[:] bin_right, const f64[:] bin_prob,
                  closure_t_csr, idx start):
    cdef idx n1 = top.shape[0], N = top.shape[2], R = bin_prob.shape[0]
    cdef idx n = n1 - 1
    cdef const idx[:] c_ptr = closure_t_csr[0]
    cdef const idx[:] c_idx = closure_t_csr[1]
    cdef const f64[:] c_dat = closure_t_csr[2]

    out_top_a = np.full((n1, n1, N), -np.inf)
    out_bot_a = np.full((n1, n1, N), -np.inf)
    cdef f64[:, :, :] out_top = out_top_a
    cdef f64[:, :, :] out_bot = out_bot_a
    cdef f64[:, :, :] in_lin = np.zeros((n1, n1, N))
    cdef f64[:, :] in_shift = np.full((n1, n1), -np.inf)
    cdef f64[:, :, :] o_lin = np.zeros((n1, n1, N))
    cdef f64[:, :] o_shift = np.full((n1, n1), -np.inf)
    cdef f64[:] acc = np.zeros(N)
    cdef f64[:] tlin = np.zeros(N)
    cdef f64[:] blin = np.zeros(N)

    cdef idx length, p, q, q2, p0, r, a
    cdef f64 s, m, w, tm, bm, po

    with nogil:
        for p in range(n):
            for q in range(p + 1, n1):
                _scale_row(top[p, q], in_lin[p, q], &in_shift[p, q])
        for length in range(n, 0, -1):
            for p in range(n - length + 1):
                q = p + length
                if length == n:
                    out_top[p, q, start] = 0.0
                else:
                    for a in range(N):
                        acc[a] = 0.0
                    m = -INFINITY
                    # span as left child of [p, q2), sibling [q, q2)
                    for q2 in range(q + 1, n + 1):
                        s = o_shift[p, q2] + in_shift[q, q2]
                        if s == -INFINITY:
                            continue
                        if s > m:
                            if m != -INFINITY:
                                w = exp(m - s)
                                for a in range(N):
                                    acc[a] = acc[a] * w
                            m = s
                        w = exp(s - m)
                        for r in range(R):
                            po = o_lin[p, q2, bin_lhs[r]]
                            if po != 0.0:
                                acc[bin_left[r]] += w * bin_prob[r] * po * in_lin[q, q2, bin_right[r]]
                    # span as right child of [p0, q), sibling [p0, p)
                    for p0 in range(p):
                        s = o_shift[p0, q] + in_shift[p0, p]
                        if s == -INFINITY:
                            continue
                        if s > m:
                            if m != -INFINITY:
                                w = exp(m - s)
                                for a in range(N):
                                    acc[a] = acc[a] * w
                            m = s
                        w = exp(s - m)
                        for r in range(R):
                            po = o_lin[p0, q, bin_lhs[r]]
                            if po != 0.0:
                                acc[bin_right[r]] += w * bin_prob[r] * po * in_lin[p0, p, bin_left[r]]
                    if m == -INFINITY:
                        continue
                    _store_log(acc, m, out_top[p, q])
                _scale_row(out_top[p, q], tlin, &tm)
                if tm == -INFINITY:
                    continue
                _csr_matvec(c_ptr, c_idx, c_dat, tlin, blin)
                _store_log(blin, tm, out_bot[p, q])
                _scale_row(out_bot[p, q], o_lin[p, q], &o_shift[p, q])
    return out_bot_a, out_top_a


def prefix_forward(const f64[:, :, :] top, const f64[:, :] lex_logp, const idx[:] bin_lhs,
                   const idx[:] bin_left, const idx[:] bin_right, const f64[:] bin_prob,
                   lc_closure_t_csr, idx start):
    cdef idx n = lex_logp.shape[0], N = lex_logp.shape[1], R = bin_prob.shape[0]
    cdef const idx[:] c_ptr = lc_closure_t_csr[0]
    cdef const idx[:] c_idx = lc_closure_t_csr[1]
    cdef const f64[:] c_dat = lc_closure_t_csr[2]

    forward_a = np.full((n, N), -np.inf)
    prefix_a = np.full(n + 1, -np.inf)
    cdef f64[:, :] forward = forward_a
    cdef f64[:] prefix = prefix_a
    cdef f64[:, :, :] in_lin = np.zeros((n + 1, n + 1, N))
    cdef f64[:, :] in_shift = np.full((n + 1, n + 1), -np.inf)
    cdef f64[:, :] f_lin = np.zeros((n, N))
    cdef f64[:] f_shift = np.full(n, -np.inf)
    cdef f64[:] g = np.zeros(N)
    cdef f64[:] flin = np.zeros(N)

    cdef idx j, k, r, a, p, q
    cdef f64 s, m, w, fa, v, mv, tot

    with nogil:
        prefix[0] = 0.0
        for p in range(n):
            for q in range(p + 1, n + 1):
                _scale_row(top[p, q], in_lin[p, q], &in_shift[p, q])
        for j in range(n):
            if j == 0:
                for a in range(N):
                    g[a] = 0.0
                g[start] = 1.0
                m = 0.0
            else:
                for a in range(N):
                    g[a] = 0.0
                m = -INFINITY
                for k in range(j):
                    s = f_shift[k] + in_shift[k, j]
                    if s == -INFINITY:
                        continue
                    if s > m:
                        if m != -INFINITY:
                            w = exp(m - s)
                            for a in range(N):
                                g[a] = g[a] * w
                        m = s
                    w = exp(s - m)
                    for r in range(R):
                        fa = f_lin[k, bin_lhs[r]]
                        if fa != 0.0:
                            g[bin_right[r]] += w * bin_prob[r] * fa * in_lin[k, j, bin_left[r]]
            if m != -INFINITY:
                _csr_matvec(c_ptr, c_idx, c_dat, g, flin)
                _store_log(flin, m, forward[j])
                _scale_row(forward[j], f_lin[j], &f_shift[j])
            mv = -INFINITY
            for a in range(N):
                v = forward[j, a] + lex_logp[j, a]
                if v > mv:
                    mv = v
            if mv == -INFINITY:
                prefix[j + 1] = -INFINITY
            else:
                tot = 0.0
                for a in range(N):
                    v = forward[j, a] + lex_logp[j, a]
                    if v != -INFINITY:
                        tot = tot + exp(v - mv)
                prefix[j + 1] = mv + log(tot)
    return forward_a, prefix_a
