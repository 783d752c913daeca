"""Time the numba and numpy rollout/tally kernels on the same inputs.

    python benchmarks/bench_kernels.py --n 2048 --horizons 16,128,512 --repeat 5

Both backends are run in-process, so the numpy timings here do not depend on
TABULAR_OPE_DISABLE_NUMBA. Outputs are compared bit for bit before timing.
"""

import argparse
import time

import numpy as np

from tabular_ope import _kernels
from tabular_ope._jit import NUMBA_AVAILABLE
from tabular_ope._rng import as_key
from tabular_ope.experiment import build_sim_mdp
from tabular_ope.mdp import random_mdp, random_policy


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def _inputs(H, S, A):
    if S == 2 and A == 2:
        mdp, mu = build_sim_mdp(H, seed=0)
    else:
        g = np.random.default_rng(0)
        mdp, mu = random_mdp(S, A, H, g), random_policy(S, A, H, g)
    return (
        _kernels.cumulative(mdp.P), _kernels.cumulative(mdp.d1), _kernels.cumulative(mu.probs),
        np.ascontiguousarray(mdp.r), _kernels.NOISE_DETERMINISTIC, as_key(1),
    )


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2048)
    ap.add_argument("--horizons", default="16,128,512")
    ap.add_argument("--S", type=int, default=2)
    ap.add_argument("--A", type=int, default=2)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not NUMBA_AVAILABLE:
        raise SystemExit("numba is not importable (or disabled by TABULAR_OPE_DISABLE_NUMBA); nothing to compare")

    print(f"{'kernel':8} {'H':>5} {'n':>6} {'numba ms':>10} {'numpy ms':>10} {'speedup':>8}")
    for H in (int(h) for h in args.horizons.split(",")):
        base = _inputs(H, args.S, args.A)
        ra = _kernels.rollout_numba(*base, args.n, 0)  # also triggers compilation
        rb = _kernels.rollout_numpy(*base, args.n, 0)
        assert all(np.array_equal(x, y) for x, y in zip(ra, rb)), "rollout backends disagree"
        ta = _kernels.tally_numba(*ra, args.S, args.A)
        tb = _kernels.tally_numpy(*ra, args.S, args.A)
        assert all(np.array_equal(x, y) for x, y in zip(ta, tb)), "tally backends disagree"

        for name, fa, fb in (
            ("rollout", lambda: _kernels.rollout_numba(*base, args.n, 0), lambda: _kernels.rollout_numpy(*base, args.n, 0)),
            ("tally", lambda: _kernels.tally_numba(*ra, args.S, args.A), lambda: _kernels.tally_numpy(*ra, args.S, args.A)),
        ):
            a, b = _best(fa, args.repeat), _best(fb, args.repeat)
            print(f"{name:8} {H:5d} {args.n:6d} {a * 1e3:10.3f} {b * 1e3:10.3f} {b / a:8.1f}x")


if __name__ == "__main__":
    main()
