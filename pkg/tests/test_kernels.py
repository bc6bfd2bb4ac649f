"""The numba loop kernels and the einsum kernels compute the same tensors."""
import os
import subprocess
import sys

import numpy as np
import pytest

from statvar import kernels as K
from statvar import catalog, manifold


def _sym(a, i, j):
    return 0.5 * (a + np.swapaxes(a, i, j))


def _inputs(m, n, seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(m, m))
    G = A @ A.T + m * np.eye(m)
    dg = _sym(rng.normal(size=(m, m, m)), 0, 1)
    d2g = _sym(_sym(rng.normal(size=(m,) * 4), 0, 1), 2, 3)
    d3g = rng.normal(size=(m,) * 5)
    d3g = _sym(d3g, 0, 1)
    d3g = (d3g + d3g.transpose(0, 1, 3, 2, 4) + d3g.transpose(0, 1, 4, 3, 2) + d3g.transpose(0, 1, 2, 4, 3)
           + d3g.transpose(0, 1, 3, 4, 2) + d3g.transpose(0, 1, 4, 2, 3)) / 6
    gam = _sym(rng.normal(size=(n, n, n)), 1, 2)
    return {
        "christoffel": (G, dg),
        "christoffel_d1": (G, dg, d2g),
        "christoffel_d2": (G, dg, d2g, d3g),
        "riemann": (gam, rng.normal(size=(n,) * 4)),
        "riemann_d1": (gam, rng.normal(size=(n,) * 4), rng.normal(size=(n,) * 5)),
        "covd12": (gam, rng.normal(size=(n,) * 3), rng.normal(size=(n,) * 4)),
        "covd13": (gam, rng.normal(size=(n,) * 4), rng.normal(size=(n,) * 5)),
        "tension": (G, _sym(rng.normal(size=(m, m, m)), 1, 2), gam, rng.normal(size=(n, m)),
                    _sym(rng.normal(size=(n, m, m)), 1, 2)),
        "section_laplacian": (G, _sym(rng.normal(size=(m, m, m)), 1, 2), gam, rng.normal(size=(n,) * 4),
                              rng.normal(size=(n, m)), _sym(rng.normal(size=(n, m, m)), 1, 2),
                              rng.normal(size=n), rng.normal(size=(n, m)),
                              _sym(rng.normal(size=(n, m, m)), 1, 2)),
    }


@pytest.mark.parametrize("name", K.KERNELS)
@pytest.mark.parametrize("m,n,seed", [(1, 2, 0), (2, 2, 1), (2, 3, 2), (3, 3, 3)])
def test_loop_and_numpy_kernels_agree(name, m, n, seed):
    args = _inputs(m, n, seed)[name]
    if name.startswith("christoffel"):
        args = (np.linalg.inv(args[0]),) + args[1:]
    a = getattr(K, f"{name}_loops")(*args)
    b = getattr(K, f"{name}_numpy")(*args)
    assert a.shape == b.shape
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


def test_public_names_follow_the_flag():
    from statvar._accel import USING_NUMBA
    want = "_loops" if USING_NUMBA else "_numpy"
    for name in K.KERNELS:
        assert getattr(K, name) is getattr(K, name + want)


def test_numpy_fallback_selected_by_env():
    code = "from statvar._accel import USING_NUMBA; print(USING_NUMBA)"
    env = dict(os.environ, STATVAR_NUMBA="0")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "False"


def test_chart_results_independent_of_backend(monkeypatch):
    c = catalog.chart("normal_distributions")
    x = np.array([0.3, 1.4])
    ref = manifold.hessian_curvature(c, x).components
    for name in K.KERNELS:
        monkeypatch.setattr(K, name, getattr(K, name + "_numpy"))
    fresh = catalog.chart("normal_distributions")
    np.testing.assert_allclose(manifold.hessian_curvature(fresh, x).components, ref, atol=1e-13)


def test_benchmark_script_runs():
    import importlib.util
    from pathlib import Path
    path = Path(__file__).resolve().parents[1] / "benchmarks" / "bench_kernels.py"
    spec = importlib.util.spec_from_file_location("bench_kernels", path)
    bench = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(bench)
    rows = bench.per_kernel(repeat=2)
    assert len(rows) == 2 * len(K.KERNELS)
    assert all(tl > 0 and tn > 0 for _, tl, tn in rows)
