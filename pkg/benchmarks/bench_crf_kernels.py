#!/usr/bin/env python3
"""Benchmark the compiled sequence-model kernels against the pure NumPy
fallback.

Usage: python benchmarks/bench_crf_kernels.py [--sentences N] [--repeats R]

Times forward_backward (the training hot path) and viterbi (the decode hot
path) over batches of random sentences at several lengths.
"""

import argparse
import time

import numpy as np

from reviewkg.ner.kernels import pure

try:
    from reviewkg.ner.kernels import _speedups
except ImportError:
    _speedups = None

K = 7


def make_batch(rng, n_sentences, length):
    return [
        (
            np.ascontiguousarray(rng.normal(size=(length, K))),
            np.ascontiguousarray(rng.normal(size=(K, K))),
        )
        for _ in range(n_sentences)
    ]


def time_impl(impl, batch, repeats):
    fb = vit = 0.0
    for _ in range(repeats):
        start = time.perf_counter()
        for E, T in batch:
            impl.forward_backward(E, T)
        fb += time.perf_counter() - start
        start = time.perf_counter()
        for E, T in batch:
            impl.viterbi(E, T)
        vit += time.perf_counter() - start
    return fb / repeats, vit / repeats


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--sentences", type=int, default=500)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    if _speedups is None:
        print("compiled kernels not built; showing pure NumPy timings only")

    rng = np.random.default_rng(0)
    print(f"{args.sentences} sentences per batch, best of {args.repeats} runs\n")
    header = f"{'L':>4}  {'fb pure':>10}  {'fb ext':>10}  {'speedup':>8}  {'vit pure':>10}  {'vit ext':>10}  {'speedup':>8}"
    print(header)
    for length in (5, 10, 20, 40):
        batch = make_batch(rng, args.sentences, length)
        fb_p, vit_p = time_impl(pure, batch, args.repeats)
        if _speedups is not None:
            fb_c, vit_c = time_impl(_speedups, batch, args.repeats)
            print(
                f"{length:>4}  {fb_p*1e3:>8.2f}ms  {fb_c*1e3:>8.2f}ms  {fb_p/fb_c:>7.1f}x"
                f"  {vit_p*1e3:>8.2f}ms  {vit_c*1e3:>8.2f}ms  {vit_p/vit_c:>7.1f}x"
            )
        else:
            print(f"{length:>4}  {fb_p*1e3:>8.2f}ms  {'-':>10}  {'-':>8}  {vit_p*1e3:>8.2f}ms  {'-':>10}  {'-':>8}")

    # sanity: both implementations agree on a random instance
    if _speedups is not None:
        E, T = make_batch(rng, 1, 12)[0]
        lz_p, marg_p, pair_p = pure.forward_backward(E, T)
        lz_c, marg_c, pair_c = _speedups.forward_backward(E, T)
        assert abs(lz_p - lz_c) < 1e-10
        assert np.allclose(marg_p, marg_c) and np.allclose(pair_p, pair_c)
        assert (pure.viterbi(E, T) == np.asarray(_speedups.viterbi(E, T))).all()
        print("\nagreement check: OK")


if __name__ == "__main__":
    main()
