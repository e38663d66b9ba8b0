# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled sequence-model kernels.

Same contracts as kernels/pure.py: emissions (L, K) and transitions (K, K)
are log-potentials; ties in viterbi resolve to the lowest tag index.
"""

import numpy as np

from libc.math cimport exp, log


cdef void _forward_step(double[::1] alpha, double[:, ::1] transitions,
                        double[:, ::1] emissions, Py_ssize_t t,
                        double[::1] out) noexcept:
    cdef Py_ssize_t K = alpha.shape[0]
    cdef Py_ssize_t a, b
    cdef double m, acc, cand
    for b in range(K):
        m = alpha[0] + transitions[0, b]
        for a in range(1, K):
            cand = alpha[a] + transitions[a, b]
            if cand > m:
                m = cand
        acc = 0.0
        for a in range(K):
            acc += exp(alpha[a] + transitions[a, b] - m)
        out[b] = emissions[t, b] + m + log(acc)


cdef double _vec_logsumexp(double[::1] row) noexcept:
    cdef Py_ssize_t k, n = row.shape[0]
    cdef double m = row[0]
    cdef double acc = 0.0
    for k in range(1, n):
        if row[k] > m:
            m = row[k]
    for k in range(n):
        acc += exp(row[k] - m)
    return m + log(acc)


def forward_logz(double[:, ::1] emissions, double[:, ::1] transitions):
    cdef Py_ssize_t L = emissions.shape[0]
    cdef Py_ssize_t K = emissions.shape[1]
    cdef Py_ssize_t t, b
    cur_arr = np.empty(K, dtype=np.float64)
    nxt_arr = np.empty(K, dtype=np.float64)
    cdef double[::1] cur = cur_arr
    cdef double[::1] nxt = nxt_arr
    for b in range(K):
        cur[b] = emissions[0, b]
    for t in range(1, L):
        _forward_step(cur, transitions, emissions, t, nxt)
        cur, nxt = nxt, cur
    return _vec_logsumexp(cur)


def forward_backward(double[:, ::1] emissions, double[:, ::1] transitions):
    cdef Py_ssize_t L = emissions.shape[0]
    cdef Py_ssize_t K = emissions.shape[1]
    cdef Py_ssize_t t, a, b
    alpha_arr = np.empty((L, K), dtype=np.float64)
    beta_arr = np.empty((L, K), dtype=np.float64)
    marg_arr = np.empty((L, K), dtype=np.float64)
    pair_arr = np.zeros((K, K), dtype=np.float64)
    cdef double[:, ::1] alpha = alpha_arr
    cdef double[:, ::1] beta = beta_arr
    cdef double[:, ::1] marg = marg_arr
    cdef double[:, ::1] pair = pair_arr
    cdef double m, acc, cand, logz

    for b in range(K):
        alpha[0, b] = emissions[0, b]
    for t in range(1, L):
        _forward_step(alpha[t - 1], transitions, emissions, t, alpha[t])

    for b in range(K):
        beta[L - 1, b] = 0.0
    for t in range(L - 2, -1, -1):
        for a in range(K):
            m = transitions[a, 0] + emissions[t + 1, 0] + beta[t + 1, 0]
            for b in range(1, K):
                cand = transitions[a, b] + emissions[t + 1, b] + beta[t + 1, b]
                if cand > m:
                    m = cand
            acc = 0.0
            for b in range(K):
                acc += exp(transitions[a, b] + emissions[t + 1, b] + beta[t + 1, b] - m)
            beta[t, a] = m + log(acc)

    logz = _vec_logsumexp(alpha[L - 1])

    for t in range(L):
        for b in range(K):
            marg[t, b] = exp(alpha[t, b] + beta[t, b] - logz)
    for t in range(L - 1):
        for a in range(K):
            for b in range(K):
                pair[a, b] += exp(
                    alpha[t, a] + transitions[a, b]
                    + emissions[t + 1, b] + beta[t + 1, b] - logz
                )
    return logz, marg_arr, pair_arr


def viterbi(double[:, ::1] emissions, double[:, ::1] transitions):
    cdef Py_ssize_t L = emissions.shape[0]
    cdef Py_ssize_t K = emissions.shape[1]
    cdef Py_ssize_t t, a, b, best_a
    delta_arr = np.empty(K, dtype=np.float64)
    next_arr = np.empty(K, dtype=np.float64)
    back_arr = np.empty((L, K), dtype=np.int64)
    path_arr = np.empty(L, dtype=np.int64)
    cdef double[::1] delta = delta_arr
    cdef double[::1] nxt = next_arr
    cdef long long[:, ::1] back = back_arr
    cdef long long[::1] path = path_arr
    cdef double best, cand

    for b in range(K):
        delta[b] = emissions[0, b]
    for t in range(1, L):
        for b in range(K):
            best = delta[0] + transitions[0, b]
            best_a = 0
            for a in range(1, K):
                cand = delta[a] + transitions[a, b]
                if cand > best:
                    best = cand
                    best_a = a
            back[t, b] = best_a
            nxt[b] = emissions[t, b] + best
        for b in range(K):
            delta[b] = nxt[b]

    best = delta[0]
    best_a = 0
    for b in range(1, K):
        if delta[b] > best:
            best = delta[b]
            best_a = b
    path[L - 1] = best_a
    for t in range(L - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    return path_arr
