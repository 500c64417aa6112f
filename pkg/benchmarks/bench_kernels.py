"""Time the compiled kernels against the numpy fallback on CNN-A sized inputs.

    python3 benchmarks/bench_kernels.py [--repeat 20]
"""

import argparse
import timeit

import numpy as np

from friendly.kernels import available_backends, get_backend

SHAPES = {
    "conv1 (32x1x28x28, 3x3)": ((32, 1, 28, 28), 3),
    "conv2 (32x16x26x26, 3x3)": ((32, 16, 26, 26), 3),
}


def cases(dtype):
    rng = np.random.default_rng(0)
    for label, (shape, k) in SHAPES.items():
        x = rng.normal(size=shape).astype(dtype)
        n, c, h, w = shape
        col = rng.normal(size=(n * (h - k + 1) * (w - k + 1), c * k * k)).astype(dtype)
        yield f"im2col {label}", lambda b, x=x, k=k: b.im2col(x, k, k)
        yield f"col2im {label}", lambda b, col=col, shape=shape, k=k: b.col2im(col, shape, k, k)
    x = rng.normal(size=(32, 32, 24, 24)).astype(dtype)
    out, arg = get_backend("python").maxpool2x2_forward(x)
    g = rng.normal(size=out.shape).astype(dtype)
    yield "maxpool fwd (32x32x24x24)", lambda b: b.maxpool2x2_forward(x)
    yield "maxpool bwd (32x32x24x24)", lambda b: b.maxpool2x2_backward(g, arg, x.shape)


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--repeat", type=int, default=20)
    args = p.parse_args()
    names = available_backends()
    if "cython" not in names:
        print("compiled kernels are not built; only the python backend is available")
    for dtype in (np.float64, np.float32):
        print(f"\n{np.dtype(dtype).name}")
        print(f"{'kernel':<36s}" + "".join(f"{n + ' ms':>12s}" for n in names) + f"{'speedup':>10s}")
        for label, fn in cases(dtype):
            ms = []
            for n in names:
                b = get_backend(n)
                fn(b)  # warm up
                ms.append(min(timeit.repeat(lambda: fn(b), number=1, repeat=args.repeat)) * 1e3)
            speed = f"{ms[0] / ms[-1]:.2f}x" if len(ms) > 1 else "-"
            print(f"{label:<36s}" + "".join(f"{m:12.3f}" for m in ms) + f"{speed:>10s}")


if __name__ == "__main__":
    main()
