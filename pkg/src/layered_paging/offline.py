"""Offline baselines: Belady's rule, its per-layer split, and an exact search oracle."""
from __future__ import annotations

from typing import Dict, FrozenSet

import numpy as np

from . import kernels
from .errors import ConfigError, OracleCapExceeded
from .model import LayeredTrace, validate_trace
from .policies import SimResult, dist_quotas

DP_MAX_PAGES = 9
DP_MAX_LENGTH = 24


def _check(trace: LayeredTrace, k: int) -> None:
    if k < 1:
        raise ConfigError(f"cache size must be >= 1, got {k}")
    report = validate_trace(trace)
    if not report.ok:
        raise ValueError(f"invalid trace at position {report.violation.position}")


def belady_simulate(trace: LayeredTrace, k: int) -> SimResult:
    """Evict the resident whose next request is furthest away.

    Pages never requested again go first; among those the canonically smallest
    page is chosen.
    """
    _check(trace, k)
    hits = kernels.belady_hits(trace.page_indices(), k)
    return SimResult(hits, trace.shape.ell, "opt", k)


def opt_dist_simulate(trace: LayeredTrace, k: int) -> SimResult:
    """Belady run independently on each layer's requests with its own sub-cache."""
    _check(trace, k)
    ell = trace.shape.ell
    quotas = dist_quotas(k, ell)
    pages = trace.page_indices()
    hits = np.zeros(len(trace), dtype=np.bool_)
    for j in range(ell):
        sel = np.flatnonzero(trace.layers == j + 1)
        if sel.size:
            hits[sel] = kernels.belady_hits(pages[sel], quotas[j])
    return SimResult(hits, ell, "opt-dist", k)


def dp_opt(trace: LayeredTrace, k: int, max_pages: int = DP_MAX_PAGES, max_length: int = DP_MAX_LENGTH) -> int:
    """Exact minimum fault count by exhaustive search over cache contents.

    Forward dynamic programme over (position, resident set). A miss on a full
    cache branches on every possible victim; the requested page is always
    brought in.
    """
    _check(trace, k)
    if trace.shape.num_pages > max_pages or len(trace) > max_length:
        raise OracleCapExceeded(
            f"oracle cap exceeded: {trace.shape.num_pages} pages (max {max_pages}), "
            f"length {len(trace)} (max {max_length})"
        )
    frontier: Dict[FrozenSet[int], int] = {frozenset(): 0}
    for p in trace.page_indices().tolist():
        nxt: Dict[FrozenSet[int], int] = {}
        for cache, cost in frontier.items():
            if p in cache:
                succ = [(cache, cost)]
            elif len(cache) < k:
                succ = [(cache | {p}, cost + 1)]
            else:
                succ = [((cache - {v}) | {p}, cost + 1) for v in cache]
            for s, c in succ:
                if c < nxt.get(s, c + 1):
                    nxt[s] = c
        frontier = nxt
    return min(frontier.values())
