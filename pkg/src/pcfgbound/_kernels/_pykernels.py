"""Pure numpy chart kernels (fallback for the compiled ``_ckernels``).

All charts are stored as natural-log arrays indexed ``[p, q, A]`` for the
half-open span ``[p, q)``.  Inside each span the arithmetic runs in linear
space after shifting every operand by its maximum, which is exactly
log-sum-exp without an exp/log per rule application.

Sparse matrices are passed as CSR triples ``(indptr, indices, data)``.
"""

import numpy as np

NEG_INF = -np.inf


def _scaled(logv):
    """Split a log-vector into (exp(logv - m), m); m is -inf for all-zero."""
    m = logv.max(axis=-1)
    if np.ndim(m) == 0:
        if m == NEG_INF:
            return np.zeros_like(logv), NEG_INF
        return np.exp(logv - m), m
    safe = np.where(np.isfinite(m), m, 0.0)
    return np.exp(logv - safe[..., None]), m


def _unscale(lin, shift):
    with np.errstate(divide="ignore"):
        return np.log(lin) + shift


def _csr_matvec(csr, x):
    indptr, indices, data = csr
    out = np.zeros(len(indptr) - 1)
    if len(data):
        rows = np.repeat(np.arange(len(indptr) - 1), np.diff(indptr))
        np.add.at(out, rows, data * x[indices])
    return out


def _prune(logv, beam):
    if np.isfinite(beam):
        m = logv.max()
        if m > NEG_INF:
            logv[logv < m - beam] = NEG_INF


def inside_chart(lex_logp, bin_lhs, bin_left, bin_right, bin_prob,
                 closure_csr, beam=np.inf):
    n, N = lex_logp.shape
    bot = np.full((n + 1, n + 1, N), NEG_INF)
    top = np.full((n + 1, n + 1, N), NEG_INF)
    lin = np.zeros((n + 1, n + 1, N))
    shift = np.full((n + 1, n + 1), NEG_INF)

    for length in range(1, n + 1):
        for p in range(n - length + 1):
            q = p + length
            if length == 1:
                b = lex_logp[p].copy()
            else:
                ks = np.arange(p + 1, q)
                s = shift[p, ks] + shift[ks, q]
                ok = np.isfinite(s)
                if not ok.any() or len(bin_prob) == 0:
                    continue
                ks, s = ks[ok], s[ok]
                m = s.max()
                w = np.exp(s - m)
                terms = (w[:, None] * lin[p, ks][:, bin_left]
                         * lin[ks, q][:, bin_right]).sum(axis=0) * bin_prob
                acc = np.bincount(bin_lhs, weights=terms, minlength=N)
                b = _unscale(acc, m)
            bot[p, q] = b
            bl, bm = _scaled(b)
            if bm == NEG_INF:
                continue
            t = _unscale(_csr_matvec(closure_csr, bl), bm)
            _prune(t, beam)
            top[p, q] = t
            lin[p, q], shift[p, q] = _scaled(t)
    return bot, top


def outside_chart(bot, top, bin_lhs, bin_left, bin_right, bin_prob,
                  closure_t_csr, start):
    n1, _, N = top.shape
    n = n1 - 1
    out_top = np.full_like(top, NEG_INF)
    out_bot = np.full_like(top, NEG_INF)
    in_lin, in_shift = _scaled(top)
    o_lin = np.zeros_like(top)
    o_shift = np.full((n1, n1), NEG_INF)

    for length in range(n, 0, -1):
        for p in range(n - length + 1):
            q = p + length
            if length == n:
                t = np.full(N, NEG_INF)
                t[start] = 0.0
            else:
                t = _outside_pull(p, q, n, N, o_lin, o_shift, in_lin, in_shift,
                                  bin_lhs, bin_left, bin_right, bin_prob)
            out_top[p, q] = t
            tl, tm = _scaled(t)
            if tm == NEG_INF:
                continue
            b = _unscale(_csr_matvec(closure_t_csr, tl), tm)
            out_bot[p, q] = b
            o_lin[p, q], o_shift[p, q] = _scaled(b)
    return out_bot, out_top


def _outside_pull(p, q, n, N, o_lin, o_shift, in_lin, in_shift,
                  bin_lhs, bin_left, bin_right, bin_prob):
    acc = np.zeros(N)
    if len(bin_prob) == 0:
        return np.full(N, NEG_INF)
    # (parent span, sibling span, child-is-left)
    parents_r = np.arange(q + 1, n + 1)     # span is left child of [p, q2)
    parents_l = np.arange(0, p)             # span is right child of [p0, q)
    s_r = o_shift[p, parents_r] + in_shift[q, parents_r]
    s_l = o_shift[parents_l, q] + in_shift[parents_l, p]
    all_s = np.concatenate([s_r, s_l])
    if not np.isfinite(all_s).any():
        return np.full(N, NEG_INF)
    m = all_s[np.isfinite(all_s)].max()
    ok = np.isfinite(s_r)
    if ok.any():
        q2, w = parents_r[ok], np.exp(s_r[ok] - m)
        terms = (w[:, None] * o_lin[p, q2][:, bin_lhs]
                 * in_lin[q, q2][:, bin_right]).sum(axis=0) * bin_prob
        acc += np.bincount(bin_left, weights=terms, minlength=N)
    ok = np.isfinite(s_l)
    if ok.any():
        p0, w = parents_l[ok], np.exp(s_l[ok] - m)
        terms = (w[:, None] * o_lin[p0, q][:, bin_lhs]
                 * in_lin[p0, p][:, bin_left]).sum(axis=0) * bin_prob
        acc += np.bincount(bin_right, weights=terms, minlength=N)
    return _unscale(acc, m)


def prefix_forward(top, lex_logp, bin_lhs, bin_left, bin_right, bin_prob,
                   lc_closure_t_csr, start):
    """Earley forward sweep over collapsed state sets.

    ``forward[j, Y]`` is the log forward mass of predicting Y at position j
    (all left-corner chains folded in); ``prefix[j]`` is log P(w_1..w_j).
    """
    n, N = lex_logp.shape
    in_lin, in_shift = _scaled(top)
    forward = np.full((n, N), NEG_INF)
    f_lin = np.zeros((n, N))
    f_shift = np.full(n, NEG_INF)
    prefix = np.full(n + 1, NEG_INF)
    prefix[0] = 0.0

    seed = np.zeros(N)
    seed[start] = 1.0
    f0 = _csr_matvec(lc_closure_t_csr, seed)
    forward[0] = _unscale(f0, 0.0)
    f_lin[0], f_shift[0] = _scaled(forward[0])

    for j in range(n):
        if j > 0:
            ks = np.arange(j)
            s = f_shift[ks] + in_shift[ks, j]
            ok = np.isfinite(s)
            if ok.any() and len(bin_prob):
                ks, s = ks[ok], s[ok]
                m = s.max()
                w = np.exp(s - m)
                terms = (w[:, None] * f_lin[ks][:, bin_lhs]
                         * in_lin[ks, j][:, bin_left]).sum(axis=0) * bin_prob
                g = np.bincount(bin_right, weights=terms, minlength=N)
                forward[j] = _unscale(_csr_matvec(lc_closure_t_csr, g), m)
                f_lin[j], f_shift[j] = _scaled(forward[j])
        v = forward[j] + lex_logp[j]
        mv = v.max()
        prefix[j + 1] = NEG_INF if mv == NEG_INF else mv + np.log(np.exp(v - mv).sum())
    return forward, prefix
