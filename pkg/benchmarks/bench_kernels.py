#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Times the three hot paths of training -- scoring a matrix, the full
forward/backward gradient of one triple, and one epoch over a batch of
synthetic triples -- once per backend, and verifies that both backends
produce the same numbers. Run from the repository root:

    python3 benchmarks/bench_kernels.py [--triples 64] [--repeats 5]

Backend selection happens at import time, so each backend runs in its own
interpreter; this driver re-executes itself with TILERANK_BACKEND set.
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

N_Q, N_B = 5, 30


def synthetic_pair(rng):
    pos = np.zeros((N_Q, N_B, 3))
    start = int(rng.integers(0, N_B - 5))
    for row in range(N_Q):
        for col in range(start, start + 4):
            pos[row, col] = (int(rng.integers(2, 6)), 2.0, 1.0)
    neg = np.zeros((N_Q, N_B, 3))
    for row in range(N_Q):
        for col in rng.choice(N_B, size=4, replace=False):
            neg[row, col] = (1.0, 2.0, rng.uniform(0.1, 0.6))
    return pos, neg


def run_backend(n_triples, repeats):
    from tilerank import kernels
    from tilerank.ranker import (
        AdamState, Hyperparams, adam_step, gradients, init_model, score,
    )

    hyper = Hyperparams(seed=0)
    rng = np.random.default_rng(0)
    model = init_model(hyper, N_Q, N_B, rng)
    pairs = [synthetic_pair(rng) for _ in range(n_triples)]

    # warm up (numba compiles here; cached for later processes)
    score(pairs[0][0], model)
    gradients(model, *pairs[0])

    t0 = time.perf_counter()
    total = 0.0
    for _ in range(repeats):
        for pos, _neg in pairs:
            total += score(pos, model)
    score_us = (time.perf_counter() - t0) / (repeats * n_triples) * 1e6

    t0 = time.perf_counter()
    for _ in range(repeats):
        for pos, neg in pairs:
            gradients(model, pos, neg)
    grad_us = (time.perf_counter() - t0) / (repeats * n_triples) * 1e6

    state = AdamState.for_model(model)
    t0 = time.perf_counter()
    losses = []
    for pos, neg in pairs:
        g, loss = gradients(model, pos, neg)
        adam_step(model, g, state, hyper)
        losses.append(loss)
    epoch_ms = (time.perf_counter() - t0) * 1e3

    return {
        "backend": kernels.BACKEND,
        "score_us": score_us,
        "grad_us": grad_us,
        "epoch_ms": epoch_ms,
        "checksum_score": total,
        "checksum_loss": float(np.sum(losses)),
        "final_param_norm": float(np.linalg.norm(model.flat)),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--triples", type=int, default=64)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--as-backend", choices=["numba", "numpy"], help=argparse.SUPPRESS)
    args = parser.parse_args()

    if args.as_backend:
        print(json.dumps(run_backend(args.triples, args.repeats)))
        return

    results = {}
    for backend in ("numpy", "numba"):
        env = dict(os.environ, TILERANK_BACKEND=backend)
        out = subprocess.run(
            [sys.executable, __file__, "--as-backend", backend,
             "--triples", str(args.triples), "--repeats", str(args.repeats)],
            capture_output=True, text=True, env=env, check=True,
        )
        results[backend] = json.loads(out.stdout.splitlines()[-1])

    print(f"config: n_q={N_Q} n_b={N_B} widths=1..10 filters=3 hidden=3 "
          f"triples={args.triples} repeats={args.repeats}")
    print(f"{'':14s}{'score/call':>14s}{'grad/call':>14s}{'epoch':>12s}")
    for backend in ("numpy", "numba"):
        r = results[backend]
        print(f"{backend:14s}{r['score_us']:>11.1f} us{r['grad_us']:>11.1f} us"
              f"{r['epoch_ms']:>9.1f} ms")
    for metric in ("score_us", "grad_us", "epoch_ms"):
        speedup = results["numpy"][metric] / results["numba"][metric]
        print(f"numba speedup on {metric.split('_')[0]}: {speedup:.1f}x")

    score_close = np.isclose(
        results["numpy"]["checksum_score"], results["numba"]["checksum_score"],
        rtol=1e-9,
    )
    loss_close = np.isclose(
        results["numpy"]["checksum_loss"], results["numba"]["checksum_loss"],
        rtol=1e-9,
    )
    norm_close = np.isclose(
        results["numpy"]["final_param_norm"], results["numba"]["final_param_norm"],
        rtol=1e-9,
    )
    print(f"backend agreement: scores={'ok' if score_close else 'MISMATCH'} "
          f"losses={'ok' if loss_close else 'MISMATCH'} "
          f"trained-params={'ok' if norm_close else 'MISMATCH'}")
    if not (score_close and loss_close and norm_close):
        sys.exit(1)


if __name__ == "__main__":
    main()
