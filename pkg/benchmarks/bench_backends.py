"""Compare the compiled kernels against the numpy fallback.

Micro benchmarks time each kernel on autoencoder-sized shapes with both
modules loaded side by side; the end-to-end section re-launches this script
in a subprocess per backend (HRIAD_BACKEND pins the selection at import)
and times a full training run.

Usage:
    python benchmarks/bench_backends.py            # full comparison
    python benchmarks/bench_backends.py --quick    # fewer repeats
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from hriad.nn import _kernels_py

try:
    from hriad.nn import _kernels
except ImportError:
    _kernels = None

BATCH = 64
WIDTHS = (836, 512)  # first multimodal encoder stage


def timeit(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def micro_cases(rng):
    x = rng.normal(size=(BATCH, WIDTHS[0]))
    w = rng.normal(size=(WIDTHS[1], WIDTHS[0]))
    b = rng.normal(size=WIDTHS[1])
    gy = rng.normal(size=(BATCH, WIDTHS[1]))
    h = rng.normal(size=(BATCH, WIDTHS[1]))
    gamma = rng.uniform(0.5, 1.5, WIDTHS[1])
    beta = rng.normal(size=WIDTHS[1])
    mask = (rng.random((BATCH, WIDTHS[1])) > 0.1).astype(np.uint8)
    flat_p = rng.normal(size=WIDTHS[0] * WIDTHS[1])
    flat_g = rng.normal(size=WIDTHS[0] * WIDTHS[1])

    def bn_fwd_bwd(K):
        y, mean, var, xhat = K.bn_forward_train(h, gamma, beta, 1e-5)
        K.bn_backward(gy, gamma, xhat, var, 1e-5)

    def adam(K):
        m = np.zeros_like(flat_p)
        v = np.zeros_like(flat_p)
        K.adam_update(flat_p.copy(), flat_g, m, v, 1e-3, 0.9, 0.999, 1e-8, 0.1, 0.001)

    return [
        ("linear_forward 64x836->512", lambda K: K.linear_forward(x, w, b)),
        ("linear_backward same shape", lambda K: K.linear_backward(x, w, gy)),
        ("batchnorm fwd+bwd 64x512", bn_fwd_bwd),
        ("relu fwd+bwd 64x512", lambda K: K.relu_backward(K.relu_forward(h), h)),
        ("dropout mask_scale 64x512", lambda K: K.mask_scale(h, mask, 1.25)),
        ("l1 loss+grad 64x836", lambda K: (K.l1_loss(x, 0.9 * x), K.l1_grad(x, 0.9 * x))),
        ("adam step 428k params", adam),
    ]


def run_micro(repeats):
    rng = np.random.default_rng(0)
    cases = micro_cases(rng)
    print(f"{'kernel':34s} {'numpy':>10s} {'cython':>10s} {'speedup':>8s}")
    for name, fn in cases:
        t_py = timeit(lambda: fn(_kernels_py), repeats)
        if _kernels is None:
            print(f"{name:34s} {t_py * 1e6:9.1f}us {'n/a':>10s} {'':>8s}")
            continue
        t_cy = timeit(lambda: fn(_kernels), repeats)
        print(f"{name:34s} {t_py * 1e6:9.1f}us {t_cy * 1e6:9.1f}us {t_py / t_cy:7.2f}x")


def train_once(epochs):
    from hriad.autoencoder import AEConfig, TrainConfig, build, train
    from hriad.nn import backend_name

    rng = np.random.default_rng(1)
    X = rng.normal(size=(512, 836))
    cfg = AEConfig.multimodal(836)
    t0 = time.perf_counter()
    train(build(cfg, seed=0), X, TrainConfig(epochs=epochs, batch_size=64, seed=0))
    print(f"end-to-end [{backend_name()}]: {epochs} epochs x 512 vectors "
          f"in {time.perf_counter() - t0:.2f}s")


def run_end_to_end(epochs):
    backends = ["numpy"] + (["cython"] if _kernels is not None else [])
    sys.stdout.flush()
    for backend in backends:
        env = dict(os.environ, HRIAD_BACKEND=backend)
        subprocess.run(
            [sys.executable, __file__, "--train-only", "--epochs", str(epochs)],
            env=env, check=True,
        )


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--quick", action="store_true", help="fewer repeats/epochs")
    parser.add_argument("--train-only", action="store_true", help=argparse.SUPPRESS)
    parser.add_argument("--epochs", type=int, default=None)
    args = parser.parse_args()

    if args.train_only:
        train_once(args.epochs or 10)
        return

    repeats = 20 if args.quick else 100
    epochs = args.epochs or (5 if args.quick else 10)
    if _kernels is None:
        print("note: compiled extension not built; showing numpy fallback only\n")
    run_micro(repeats)
    print()
    run_end_to_end(epochs)


if __name__ == "__main__":
    main()
