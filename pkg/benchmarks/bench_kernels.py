"""Compare the compiled kernels with the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat N]

Micro-benchmarks call both backends in-process. The end-to-end TD3 update
runs in a subprocess per backend, since the backend is fixed at import.
"""
import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from batchrl import _kernels_py

try:
    from batchrl import _kernels
except ImportError:
    _kernels = None

TD3_SNIPPET = """
import json, sys, timeit
import numpy as np
from batchrl import kernels
from batchrl.dataset import LabeledBatch
from batchrl.offline import Td3Config, Td3Learner, td3_update
rng = np.random.default_rng(0)
learner = Td3Learner(4, 2, [-1.0, -1.0], [1.0, 1.0], Td3Config(), rng)
n = 256
batch = LabeledBatch(rng.normal(size=(n, 4)), rng.uniform(-1, 1, (n, 2)), rng.normal(size=n),
                     rng.normal(size=(n, 4)), np.ones(n))
td3_update(learner, batch, rng)
t = min(timeit.repeat(lambda: td3_update(learner, batch, rng), number=50, repeat=int(sys.argv[1]))) / 50
print(json.dumps({"backend": kernels.BACKEND, "seconds": t}))
"""


def _best(fn, number, repeat):
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def micro(backend, batch, repeat):
    rng = np.random.default_rng(0)
    x = rng.normal(size=(batch, 64))
    W = rng.normal(size=(64, 64)) * 0.1
    b = np.zeros(64)
    y = backend.dense_forward(x, W, b, 1)
    gy = rng.normal(size=y.shape)
    gW, gb = np.zeros_like(W), np.zeros_like(b)
    number = 2000 if batch == 1 else 200
    return {
        "dense_forward": _best(lambda: backend.dense_forward(x, W, b, 1), number, repeat),
        "dense_backward": _best(lambda: backend.dense_backward(x, W, y, gy, 1, gW, gb, True), number, repeat),
    }


def adam(backend, repeat):
    rng = np.random.default_rng(0)
    n = 9000  # about one 64x64 two-hidden-layer critic
    values, grads = rng.normal(size=n), rng.normal(size=n)
    m, v = np.zeros(n), np.zeros(n)
    return _best(lambda: backend.adam_update(values, grads, m, v, 1e-3, 0.9, 0.999, 1e-8, 1), 2000, repeat)


def td3_step(pure, repeat):
    env = dict(os.environ, BATCHRL_PURE_PYTHON="1" if pure else "0")
    out = subprocess.run([sys.executable, "-c", TD3_SNIPPET, str(repeat)], env=env, check=True,
                         capture_output=True, text=True)
    return json.loads(out.stdout)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    backends = [("numpy", _kernels_py)]
    if _kernels is not None:
        backends.insert(0, ("cython", _kernels))
    else:
        print("compiled extension not built; only the numpy fallback is measured")

    rows = []
    for batch in (1, 256):
        results = {name: micro(mod, batch, args.repeat) for name, mod in backends}
        for op in ("dense_forward", "dense_backward"):
            rows.append((f"{op} 64x64 batch={batch}", {name: r[op] for name, r in results.items()}))
    rows.append(("adam n=9000", {name: adam(mod, args.repeat) for name, mod in backends}))
    td3 = {}
    for pure in ((False, True) if _kernels is not None else (True,)):
        r = td3_step(pure, args.repeat)
        td3["cython" if r["backend"] != _kernels_py.NAME else "numpy"] = r["seconds"]
    rows.append(("td3_update hidden=64,64 batch=256", td3))

    names = [name for name, _ in backends]
    print(f"{'benchmark':<36}" + "".join(f"{n + ' (us)':>14}" for n in names) + f"{'speedup':>10}")
    for label, times in rows:
        cells = "".join(f"{times[n] * 1e6:>14.1f}" for n in names)
        speed = f"{times['numpy'] / times['cython']:>9.2f}x" if "cython" in times else ""
        print(f"{label:<36}{cells}{speed}")


if __name__ == "__main__":
    main()
