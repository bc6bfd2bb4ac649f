"""Compare the numba loop kernels with their numpy fallbacks.

Two parts:

* per-kernel timings of ``<name>_loops`` (njit, warmed up) against
  ``<name>_numpy`` on random inputs of target dimension 2 and 3;
* an end-to-end run of one second-variation integral in two fresh
  interpreters, with ``STATVAR_NUMBA=1`` and ``STATVAR_NUMBA=0``.

Usage::

    python benchmarks/bench_kernels.py [--repeat 2000] [--skip-e2e]
"""
import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from statvar import kernels as K
from statvar._accel import numba


def random_inputs(m, n, rng):
    def sym(a, i, j):
        return 0.5 * (a + np.swapaxes(a, i, j))
    A = rng.normal(size=(m, m))
    G = A @ A.T + m * np.eye(m)
    gam = sym(rng.normal(size=(n, n, n)), 1, 2)
    return {
        "christoffel": (G, sym(rng.normal(size=(m,) * 3), 0, 1)),
        "christoffel_d1": (G, sym(rng.normal(size=(m,) * 3), 0, 1), sym(rng.normal(size=(m,) * 4), 0, 1)),
        "christoffel_d2": (G, sym(rng.normal(size=(m,) * 3), 0, 1), sym(rng.normal(size=(m,) * 4), 0, 1),
                           sym(rng.normal(size=(m,) * 5), 0, 1)),
        "riemann": (gam, rng.normal(size=(n,) * 4)),
        "riemann_d1": (gam, rng.normal(size=(n,) * 4), rng.normal(size=(n,) * 5)),
        "covd12": (gam, rng.normal(size=(n,) * 3), rng.normal(size=(n,) * 4)),
        "covd13": (gam, rng.normal(size=(n,) * 4), rng.normal(size=(n,) * 5)),
        "tension": (G, sym(rng.normal(size=(m,) * 3), 1, 2), gam, rng.normal(size=(n, m)),
                    sym(rng.normal(size=(n, m, m)), 1, 2)),
        "section_laplacian": (G, sym(rng.normal(size=(m,) * 3), 1, 2), gam, rng.normal(size=(n,) * 4),
                              rng.normal(size=(n, m)), sym(rng.normal(size=(n, m, m)), 1, 2),
                              rng.normal(size=n), rng.normal(size=(n, m)),
                              sym(rng.normal(size=(n, m, m)), 1, 2)),
    }


def per_kernel(repeat):
    rows = []
    rng = np.random.default_rng(0)
    for m, n in [(2, 2), (3, 3)]:
        inputs = random_inputs(m, n, rng)
        for name in K.KERNELS:
            args = inputs[name]
            loops, vec = getattr(K, f"{name}_loops"), getattr(K, f"{name}_numpy")
            loops(*args)  # compile
            t_l = min(timeit.repeat(lambda: loops(*args), number=repeat, repeat=3)) / repeat
            t_n = min(timeit.repeat(lambda: vec(*args), number=repeat, repeat=3)) / repeat
            rows.append((f"{name} (m={m}, n={n})", t_l * 1e6, t_n * 1e6))
    return rows


_E2E = r"""
import json, time, numpy as np
from statvar import catalog as C, variation as V
from statvar.jets import Box
from statvar.quadrature import QuadratureRule
from statvar.kernels import USING_NUMBA
u = C.map("exp_curve", lam=1.0)
om = Box((-0.9,), (0.9,))
probes = V.random_probes(u, om, 4, np.random.default_rng(0))
def run():
    return [V.second_variation(u, p, p.support, QuadratureRule.gauss_legendre(p.support, 10, 4), "chc(2)")
            for p in probes]
t0 = time.perf_counter(); first = run(); t1 = time.perf_counter()
run(); t2 = time.perf_counter()
print(json.dumps({"numba": USING_NUMBA, "first": t1 - t0, "warm": t2 - t1, "values": first}))
"""


def end_to_end():
    out = {}
    for flag in ("1", "0"):
        env = dict(os.environ, STATVAR_NUMBA=flag)
        r = subprocess.run([sys.executable, "-c", _E2E], env=env, capture_output=True, text=True, check=True)
        out[flag] = json.loads(r.stdout.strip().splitlines()[-1])
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=2000)
    ap.add_argument("--skip-e2e", action="store_true")
    args = ap.parse_args(argv)
    if numba is None:
        print("numba is not installed; only the numpy kernels exist")
        return 1
    print(f"{'kernel':34s} {'numba µs':>10s} {'numpy µs':>10s} {'speedup':>8s}")
    for label, tl, tn in per_kernel(args.repeat):
        print(f"{label:34s} {tl:10.2f} {tn:10.2f} {tn / tl:7.1f}x")
    if not args.skip_e2e:
        res = end_to_end()
        print("\nsecond variation, 4 probes, exp curve (seconds)")
        for flag, label in (("1", "numba"), ("0", "numpy")):
            r = res[flag]
            print(f"  {label:6s} first call {r['first']:7.2f}   warm {r['warm']:7.2f}")
        gap = max(abs(a - b) / max(1.0, abs(b)) for a, b in zip(res["1"]["values"], res["0"]["values"]))
        print(f"  max relative difference between backends: {gap:.2e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
