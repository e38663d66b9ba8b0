"""Pure NumPy reference implementation of the sequence-model kernels.

All three kernels take an emission score matrix E of shape (L, K) and a
transition score matrix T of shape (K, K); scores are log-potentials.
The compiled extension in _speedups.pyx implements the same contracts.
"""

from __future__ import annotations

import numpy as np


def _logsumexp(arr: np.ndarray, axis: int | None = None) -> np.ndarray:
    m = np.max(arr, axis=axis, keepdims=True)
    out = m + np.log(np.sum(np.exp(arr - m), axis=axis, keepdims=True))
    return np.squeeze(out, axis=axis) if axis is not None else out.reshape(())


def forward_logz(emissions: np.ndarray, transitions: np.ndarray) -> float:
    """Log partition function via the forward recursion in log space."""
    alpha = emissions[0].copy()
    for t in range(1, emissions.shape[0]):
        alpha = emissions[t] + _logsumexp(alpha[:, None] + transitions, axis=0)
    return float(_logsumexp(alpha))


def forward_backward(
    emissions: np.ndarray, transitions: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray]:
    """Returns (logZ, per-position tag marginals (L, K), expected
    transition counts summed over positions (K, K))."""
    L, K = emissions.shape
    alpha = np.empty((L, K))
    beta = np.empty((L, K))
    alpha[0] = emissions[0]
    for t in range(1, L):
        alpha[t] = emissions[t] + _logsumexp(alpha[t - 1][:, None] + transitions, axis=0)
    beta[L - 1] = 0.0
    for t in range(L - 2, -1, -1):
        beta[t] = _logsumexp(transitions + (emissions[t + 1] + beta[t + 1])[None, :], axis=1)
    logz = float(_logsumexp(alpha[L - 1]))
    marginals = np.exp(alpha + beta - logz)
    pairwise = np.zeros((K, K))
    for t in range(L - 1):
        joint = alpha[t][:, None] + transitions + (emissions[t + 1] + beta[t + 1])[None, :]
        pairwise += np.exp(joint - logz)
    return logz, marginals, pairwise


def viterbi(emissions: np.ndarray, transitions: np.ndarray) -> np.ndarray:
    """Highest-scoring tag sequence; ties resolve to the lowest tag index
    at every step (np.argmax keeps the first maximum)."""
    L, K = emissions.shape
    delta = emissions[0].copy()
    backptr = np.empty((L, K), dtype=np.int64)
    for t in range(1, L):
        scores = delta[:, None] + transitions
        backptr[t] = np.argmax(scores, axis=0)
        delta = emissions[t] + scores[backptr[t], np.arange(K)]
    path = np.empty(L, dtype=np.int64)
    path[L - 1] = int(np.argmax(delta))
    for t in range(L - 1, 0, -1):
        path[t - 1] = backptr[t, path[t]]
    return path
