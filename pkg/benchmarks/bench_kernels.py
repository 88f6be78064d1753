"""Time the numba loop kernels against their numpy counterparts.

    python benchmarks/bench_kernels.py [--repeat N]

Each kernel is called once before timing so that compilation is excluded.
Prints one CSV row per kernel: name,size,loop_ms,numpy_ms,speedup.
"""
import argparse
import time

import numpy as np

from gcnlstm import kernels
from gcnlstm._accel import HAVE_NUMBA, USE_NUMBA
from gcnlstm.graph import RelationGraph
from gcnlstm.semantic import semantic_labels


def best_ms(fn, args, repeat):
    fn(*args)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return 1000 * min(times)


def box_pairs(rng, n):
    def boxes():
        lo = rng.uniform(0, 0.7, (n, 2))
        wh = rng.uniform(0.05, 0.3, (n, 2))
        return np.ascontiguousarray(np.hstack([lo, lo + wh]))

    return boxes(), boxes()


def graph_case(rng, k, d, n_sem=20):
    edges = [(i, j, int(rng.integers(1, n_sem + 1))) for i in range(k) for j in range(k) if i != j and rng.random() < 0.3]
    g = RelationGraph.build(k, edges, semantic_labels(n_sem))
    tgt, src, wi, bi = g.incidences(True)
    X = rng.normal(size=(k, d))
    W = rng.normal(size=(3, d, d)) / np.sqrt(d)
    b = rng.normal(size=(n_sem + 1, d))
    gw = rng.normal(size=(3, d))
    gb = rng.normal(size=n_sem + 1)
    return (X, W, b, gw, gb, tgt, src, wi, bi, True), n_sem + 1


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if not (HAVE_NUMBA and USE_NUMBA):
        print("# numba unavailable or disabled; loop kernels run as plain python")
    rng = np.random.default_rng(args.seed)
    rows = []

    for n in (1_000, 100_000):
        a, b = box_pairs(rng, n)
        rows.append(("classify_pairs", n, best_ms(kernels.classify_pairs_loop, (a, b), args.repeat),
                     best_ms(kernels.classify_pairs_numpy, (a, b), args.repeat)))  # fmt: skip

    for k, d in ((10, 64), (36, 256)):
        fwd, n_bias = graph_case(rng, k, d)
        rows.append(("graph_conv_forward", f"{k}x{d}", best_ms(kernels.graph_conv_forward_loop, fwd, args.repeat),
                     best_ms(kernels.graph_conv_forward_numpy, fwd, args.repeat)))  # fmt: skip
        out, pre, lin, gate = kernels.graph_conv_forward_numpy(*fwd)
        X, W, _, gw, _, tgt, src, wi, bi, gated = fwd
        bwd = (rng.normal(size=out.shape), X, W, gw, tgt, src, wi, bi, pre, lin, gate, gated, n_bias)
        rows.append(("graph_conv_backward", f"{k}x{d}", best_ms(kernels.graph_conv_backward_loop, bwd, args.repeat),
                     best_ms(kernels.graph_conv_backward_numpy, bwd, args.repeat)))  # fmt: skip

    for h, n_in in ((64, 160), (512, 1536)):
        x, hh, c = rng.normal(size=n_in), rng.normal(size=h), rng.normal(size=h)
        W, b = rng.normal(size=(4 * h, n_in + h)) / np.sqrt(n_in + h), rng.normal(size=4 * h)
        rows.append(("lstm_forward", f"{h}", best_ms(kernels.lstm_forward_loop, (x, hh, c, W, b), args.repeat),
                     best_ms(kernels.lstm_forward_numpy, (x, hh, c, W, b), args.repeat)))  # fmt: skip
        _, _, acts, tc = kernels.lstm_forward_numpy(x, hh, c, W, b)
        bargs = (rng.normal(size=h), rng.normal(size=h), x, hh, c, W, acts, tc)
        rows.append(("lstm_backward", f"{h}", best_ms(kernels.lstm_backward_loop, bargs, args.repeat),
                     best_ms(kernels.lstm_backward_numpy, bargs, args.repeat)))  # fmt: skip

    print("kernel,size,loop_ms,numpy_ms,speedup")
    for name, size, loop_ms, np_ms in rows:
        print(f"{name},{size},{loop_ms:.3f},{np_ms:.3f},{np_ms / loop_ms:.2f}")


if __name__ == "__main__":
    main()
