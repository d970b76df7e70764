"""The numba kernels and their pure-numpy fallback must agree."""
import importlib.util
import json
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from layered_paging import kernels
from layered_paging._accel import NUMBA_ENABLED, backend_name

from coverage_exact import expected_cover_time

pages_arrays = st.lists(st.integers(0, 11), max_size=80).map(lambda xs: np.array(xs, dtype=np.int64))


def _both(fn, *args):
    return fn(*args), fn.py_func(*args)


@given(pages_arrays, st.integers(1, 8))
def test_lru_paths_agree(pages, k):
    a, b = _both(kernels.lru_hits, pages, k)
    assert a.tolist() == b.tolist()


@given(pages_arrays, st.integers(1, 8), st.integers(1, 5), st.sampled_from([0, 1]))
def test_llru_paths_agree(pages, k, ell, shift):
    times = np.arange(1, pages.size + 1, dtype=np.int64)
    a, b = _both(kernels.llru_hits, pages, times, k, ell, shift)
    assert a.tolist() == b.tolist()


@given(pages_arrays, st.integers(1, 8))
def test_belady_paths_agree(pages, k):
    a, b = _both(kernels.belady_hits, pages, k)
    assert a.tolist() == b.tolist()


@given(pages_arrays, st.integers(1, 8), st.integers(0, 2**31))
def test_marking_paths_agree(pages, k, seed):
    u = np.random.default_rng(seed).random(pages.size)
    a, b = _both(kernels.marking_hits, pages, k, u)
    assert a.tolist() == b.tolist()


@given(pages_arrays)
def test_next_use(pages):
    nxt = kernels.next_use(pages).tolist()
    for i, p in enumerate(pages.tolist()):
        later = [j for j in range(i + 1, pages.size) if pages[j] == p]
        assert nxt[i] == (later[0] if later else -1)


@pytest.mark.parametrize("N, C", [(4, 1), (3, 5), (2, 16)])
@pytest.mark.parametrize("fn", [kernels._cover_times_numpy, kernels.cover_times], ids=["numpy", "dispatch"])
def test_cover_time_backends_match_exact_mean(fn, N, C):
    t = fn(N, C, 20_000, 123).astype(float)
    assert abs(t.mean() - expected_cover_time(N, C)) <= 4 * t.std() / np.sqrt(t.size)


def test_cover_time_single_coupon():
    assert np.all(kernels._cover_times_numpy(1, 3, 100, 0) == 1)
    assert np.all(kernels._cover_times_jit.py_func(1, 3, 100, 0) == 1)
    assert np.all(kernels.cover_times(1, 3, 100, 0) == 1)


def test_cover_time_numpy_chunking_is_consistent():
    # chunk size changes the stream layout but never the distribution support
    t = kernels._cover_times_numpy(3, 4, 1000, 5, chunk_cells=64)
    assert t.min() >= 3 and t.size == 1000


_SCRIPT = r"""
import json, numpy as np
from layered_paging._accel import backend_name
from layered_paging.registry import run_policy
from layered_paging.offline import belady_simulate
from layered_paging.generators import gen_zipf, ZipfParams
from layered_paging.model import ModelShape
tr = gen_zipf(ModelShape(6, 4), ZipfParams(1.1), 300, 4)
out = {"backend": backend_name()}
for name in ["lru", "llru", "llru-formula", "marking", "lru-dist", "marking-dist"]:
    out[name] = run_policy(name, tr, 9, seed=2).hits.tolist()
out["opt"] = belady_simulate(tr, 9).hits.tolist()
print(json.dumps(out))
"""


def _run(disable):
    env = dict(os.environ)
    env.pop("LAYERED_PAGING_DISABLE_NUMBA", None)
    if disable:
        env["LAYERED_PAGING_DISABLE_NUMBA"] = "1"
    proc = subprocess.run([sys.executable, "-c", _SCRIPT], env=env, capture_output=True, text=True, check=True)
    return json.loads(proc.stdout)


@pytest.mark.slow
def test_env_flag_selects_numpy_path_with_identical_results():
    plain = _run(False)
    fallback = _run(True)
    assert fallback.pop("backend") == "numpy"
    assert plain.pop("backend") == ("numba" if importlib.util.find_spec("numba") else "numpy")
    assert plain == fallback


def test_backend_name():
    assert backend_name() in ("numba", "numpy")


@pytest.mark.slow
def test_benchmark_script_runs(tmp_path):
    script = os.path.join(os.path.dirname(__file__), os.pardir, "benchmarks", "bench_kernels.py")
    out = tmp_path / "bench.csv"
    proc = subprocess.run([sys.executable, script, "--rounds", "20", "--samples", "200", "--repeat", "1",
                           "--csv", str(out)], capture_output=True, text=True)
    if not NUMBA_ENABLED:
        assert proc.returncode == 1
        return
    assert proc.returncode == 0, proc.stderr
    rows = out.read_text().splitlines()
    assert len(rows) == 6 and all(",True" in r for r in rows[1:5])
