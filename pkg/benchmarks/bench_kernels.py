"""Compare the compiled and numpy kernel backends.

    python benchmarks/bench_kernels.py [--repeat N]

Times the raw conv/pool kernels at a few shapes, a full mini-model forward
pass, one training step, and a depth-4 attribution run, once per backend.
"""

import argparse
import time

import numpy as np

from dncshap import kernels
from dncshap.attribution import dnc_shap
from dncshap.data import make_synthetic
from dncshap.fusion import FusionConfig, FusionModel
from dncshap.nn.losses import combined_loss_grad
from dncshap.nn.train import one_hot


def timeit(fn, repeat):
    fn()  # warm-up
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases():
    rng = np.random.default_rng(0)
    out = []
    for n, hw, cin, cout in ((1, 32, 3, 4), (1, 128, 3, 4), (16, 16, 8, 8), (1, 64, 16, 16)):
        x = rng.standard_normal((n, hw + 2, hw + 2, cin))
        w = rng.standard_normal((3, 3, cin, cout))
        b = np.zeros(cout)
        dy = rng.standard_normal((n, hw, hw, cout))
        tag = f"{n}x{hw}x{hw}x{cin}->{cout}"
        out.append((f"conv fwd {tag}", lambda x=x, w=w, b=b: kernels.conv2d_forward(x, w, b)))
        out.append((f"conv bwd {tag}", lambda x=x, w=w, dy=dy: kernels.conv2d_backward(x, w, dy)))
        xp = rng.standard_normal((n, hw, hw, cout))
        out.append((f"maxpool fwd {tag}", lambda xp=xp: kernels.maxpool_forward(xp, 2)))

    model = FusionModel(FusionConfig.mini(size=32, seed=0))
    img, spc = rng.uniform(size=(32, 32, 3)), rng.uniform(size=(32, 32, 1))
    out.append(("model predict 32x32", lambda: model.predict(img, spc)))
    data = make_synthetic(32, 32, 32, seed=0)
    target = one_hot(data.labels, 4)

    def step():
        probs, cache = model.forward_train(data.images, data.speech)
        model.backward(cache, combined_loss_grad(probs, target))

    out.append(("train step batch 32", step))
    out.append(("dnc_shap depth 4", lambda: dnc_shap(model, img, spc, times=4)))
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = kernels.available_backends()
    if "compiled" not in backends:
        print("compiled extension not built; only the numpy backend is available")
    results = {}
    for name in backends:
        kernels.use_backend(name)
        for label, fn in cases():
            results.setdefault(label, {})[name] = timeit(fn, args.repeat)
    print(f"{'case':<36}" + "".join(f"{b:>12}" for b in backends) + ("     speedup" if len(backends) > 1 else ""))
    for label, row in results.items():
        line = f"{label:<36}" + "".join(f"{row[b] * 1e3:>10.3f}ms" for b in backends)
        if len(backends) > 1:
            line += f"{row['python'] / row['compiled']:>11.2f}x"
        print(line)


if __name__ == "__main__":
    main()
