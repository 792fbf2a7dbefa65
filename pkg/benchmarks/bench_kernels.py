"""Compare the compiled and NumPy kernels, then time one training update.

    python3 benchmarks/bench_kernels.py [--n N] [--repeat R]
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from unload_rl import _kernels_py, kernels
from unload_rl.approximator import CriticEnsemble
from unload_rl.trainer import desk_config

try:
    from unload_rl import _kernels as compiled
except ImportError:
    compiled = None


def bench(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat)) * 1e3


def kernel_table(n, repeat):
    rng = np.random.default_rng(0)
    p, g, m = rng.normal(size=(3, n))
    v = np.abs(rng.normal(size=n))
    tgt = rng.normal(size=n)
    backends = {"numpy": _kernels_py}
    if compiled is not None:
        backends["cython"] = compiled
    rows = []
    for name, mod in backends.items():
        adam = bench(lambda: mod.adam_step(p, g, m, v, 1e-4, 0.9, 0.999, 1e-8, 0.5, 0.5), repeat)
        polyak = bench(lambda: mod.polyak(tgt, p, 0.005), repeat)
        rows.append((name, adam, polyak))
    return rows


def update_time(repeat):
    cfg = desk_config()
    ens = CriticEnsemble.initialize(cfg.net_config(0))
    rng = np.random.default_rng(1)
    obs = rng.random((cfg.batch_size, 3, 32, 32)).astype(np.float32)
    acts = rng.integers(0, 32 * 32, cfg.batch_size)
    y = rng.normal(size=cfg.batch_size)

    def one():
        ens.td_target(y, obs, np.zeros(cfg.batch_size, bool), cfg.gamma)
        ens.update(obs, acts, y)
        ens.polyak_update(cfg.zeta)

    return ens.params.size, bench(one, repeat)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=1_440_000, help="vector length")
    parser.add_argument("--repeat", type=int, default=20)
    args = parser.parse_args()
    print(f"active backend: {kernels.BACKEND}")
    print(f"{'backend':8s} {'adam ms':>9s} {'polyak ms':>10s}   (n={args.n})")
    for name, adam, polyak in kernel_table(args.n, args.repeat):
        print(f"{name:8s} {adam:9.2f} {polyak:10.2f}")
    n_params, ms = update_time(max(3, args.repeat // 4))
    print(f"desk training update ({n_params} params, batch 64): {ms:.1f} ms")


if __name__ == "__main__":
    main()
