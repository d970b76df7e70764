import os
from collections import OrderedDict

import numpy as np
import pytest
from hypothesis import settings, strategies as st

from layered_paging.model import LayeredTrace, ModelShape

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def fixtures_dir():
    return FIXTURES


def random_trace(rng, n, ell, length):
    experts = rng.integers(1, n + 1, size=length)
    layers = np.arange(length) % ell + 1
    return LayeredTrace(ModelShape(n, ell), layers, experts)


@st.composite
def layered_traces(draw, max_n=4, max_ell=4, max_len=48, min_len=0):
    n = draw(st.integers(1, max_n))
    ell = draw(st.integers(1, max_ell))
    length = draw(st.integers(min_len, max_len))
    experts = draw(st.lists(st.integers(1, n), min_size=length, max_size=length))
    layers = [i % ell + 1 for i in range(length)]
    return LayeredTrace(ModelShape(n, ell), layers, experts)


def lru_oracle(pages, k):
    """Textbook LRU on an OrderedDict; returns the hit list."""
    cache = OrderedDict()
    hits = []
    for p in pages:
        if p in cache:
            cache.move_to_end(p)
            hits.append(True)
            continue
        if len(cache) >= k:
            cache.popitem(last=False)
        cache[p] = None
        hits.append(False)
    return hits


def belady_oracle(pages, k):
    """Furthest-next-use by direct forward scan; never-requested-again pages first (smallest id)."""
    cache = set()
    faults = 0
    for i, p in enumerate(pages):
        if p in cache:
            continue
        faults += 1
        if len(cache) >= k:
            def next_use(q):
                for j in range(i + 1, len(pages)):
                    if pages[j] == q:
                        return j
                return len(pages) + 10**6 - q
            cache.remove(max(cache, key=next_use))
        cache.add(p)
    return faults


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
