"""Online eviction policies and the simulation engine.

Two execution paths produce the same outcomes:

* the reference engine (:class:`CacheSimulator`) steps through a trace,
  calling ``choose_victim`` / ``on_hit`` / ``on_miss`` on a policy object;
* the array kernels in :mod:`layered_paging.kernels`, used by :func:`simulate`
  whenever the policy provides one.

Step-wise use (e.g. an adaptive adversary inspecting the cache between
requests) always goes through the reference engine.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from . import kernels
from .errors import ConfigError, SimulationFault
from .model import LayeredTrace, ModelShape, PageId, validate_trace


# -- results ---------------------------------------------------------------

@dataclass
class SimResult:
    hits: np.ndarray
    ell: int
    policy_name: str
    k: int
    seed: Optional[int] = None

    @property
    def faults(self) -> int:
        return int(self.hits.size - np.count_nonzero(self.hits))

    @property
    def outcomes(self) -> List[str]:
        return ["hit" if h else "miss" for h in self.hits.tolist()]

    @property
    def misses(self) -> np.ndarray:
        return ~self.hits

    @property
    def faults_per_round(self) -> np.ndarray:
        if self.hits.size == 0:
            return np.zeros(0, dtype=np.int64)
        starts = np.arange(0, self.hits.size, self.ell)
        return np.add.reduceat(self.misses.astype(np.int64), starts)

    def faults_after(self, warmup: int) -> int:
        """Faults on requests past the first ``warmup`` ones."""
        return int(np.count_nonzero(self.misses[warmup:]))

    def miss_positions(self) -> np.ndarray:
        return np.flatnonzero(self.misses) + 1


# -- cache state -----------------------------------------------------------

@dataclass
class CacheState:
    """Resident pages with the time each was last requested."""

    capacity: int
    last_use: Dict[PageId, int] = field(default_factory=dict)
    clock: int = 0

    @property
    def residents(self):
        return self.last_use.keys()

    def __contains__(self, page) -> bool:
        return page in self.last_use

    def __len__(self) -> int:
        return len(self.last_use)

    @property
    def full(self) -> bool:
        return len(self.last_use) >= self.capacity

    def layer_view(self, layer: int, capacity: int) -> "CacheState":
        sub = {p: tau for p, tau in self.last_use.items() if p.layer == layer}
        return CacheState(capacity, sub, self.clock)


# -- policies --------------------------------------------------------------

class EvictionPolicy:
    """Base eviction policy.

    ``choose_victim`` is asked only when the engine must evict and has to name a
    resident page. ``on_hit`` / ``on_miss`` let the policy update its own state.
    Subclasses may implement ``kernel`` to run a whole trace at once.
    """

    name = "policy"
    seed: Optional[int] = None
    randomized = False

    def reset(self, k: int, shape: ModelShape) -> None:
        self.k = k
        self.shape = shape

    def needs_eviction(self, state: CacheState, page: PageId) -> bool:
        return state.full

    def choose_victim(self, state: CacheState, t: int, page: PageId) -> PageId:
        raise NotImplementedError

    def on_hit(self, page: PageId, t: int) -> None:
        pass

    def on_miss(self, page: PageId, t: int, victim: Optional[PageId]) -> None:
        pass

    def kernel(self, pages: np.ndarray, times: np.ndarray, k: int, ell: int) -> Optional[np.ndarray]:
        return None


class LRU(EvictionPolicy):
    name = "lru"

    def choose_victim(self, state, t, page):
        return lru_choose_victim(state)

    def kernel(self, pages, times, k, ell):
        return kernels.lru_hits(pages, k)


def lru_choose_victim(state: CacheState) -> PageId:
    return min(state.last_use, key=state.last_use.__getitem__)


def llru_indices(tau: int, t: int, ell: int) -> Tuple[int, int]:
    """Last-round index ``R`` and relative layer distance ``D`` of a page last used at ``tau``."""
    return (t - tau) // ell, (tau - t) % ell


def llru_key(tau: int, t: int, ell: int, current_layer_first: bool = True) -> Tuple[int, int]:
    """Eviction key for LLRU; the resident with the largest key is evicted.

    With ``current_layer_first`` the layer distance is counted from the request
    after ``t``, so a page of the layer being requested right now ranks as
    furthest away (``D = ell - 1``) instead of nearest (``D = 0``).
    """
    r, d = llru_indices(tau, t, ell)
    if current_layer_first:
        d = (d - 1) % ell
    return r, d


def llru_choose_victim(state: CacheState, t: int, ell: int, current_layer_first: bool = True) -> PageId:
    best = None
    best_key = None
    # sorted() keeps the canonical page order as the (unreachable) tie-breaker
    for p in sorted(state.last_use):
        key = llru_key(state.last_use[p], t, ell, current_layer_first)
        if best_key is None or key > best_key:
            best, best_key = p, key
    return best


class LLRU(EvictionPolicy):
    """Layered LRU: evict the largest last-round index, then the largest layer distance."""

    def __init__(self, current_layer_first: bool = True):
        self.current_layer_first = current_layer_first
        self.name = "llru" if current_layer_first else "llru-formula"

    def choose_victim(self, state, t, page):
        return llru_choose_victim(state, t, self.shape.ell, self.current_layer_first)

    def kernel(self, pages, times, k, ell):
        return kernels.llru_hits(pages, times, k, ell, 1 if self.current_layer_first else 0)


def _rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


class Marking(EvictionPolicy):
    """Randomised marking with an explicitly seeded PCG64 stream.

    Each eviction consumes one ``random()`` draw, which indexes the unmarked
    residents in canonical page order.
    """

    name = "marking"
    randomized = True

    def __init__(self, seed=0):
        self.seed = seed
        self.marked = set()
        self._reset_pending = False

    def reset(self, k, shape):
        super().reset(k, shape)
        self.rng = _rng(self.seed)
        self.marked = set()
        self._reset_pending = False

    def choose_victim(self, state, t, page):
        candidates = sorted(p for p in state.last_use if p not in self.marked)
        self._reset_pending = not candidates
        if not candidates:
            candidates = sorted(state.last_use)
        return candidates[int(self.rng.random() * len(candidates))]

    def on_hit(self, page, t):
        self.marked.add(page)

    def on_miss(self, page, t, victim):
        if self._reset_pending:
            self.marked.clear()
            self._reset_pending = False
        self.marked.discard(victim)
        self.marked.add(page)

    def kernel(self, pages, times, k, ell):
        uniforms = _rng(self.seed).random(pages.shape[0])
        return kernels.marking_hits(pages, k, uniforms)


def dist_quotas(k: int, ell: int) -> List[int]:
    """Per-layer capacities: ``k // ell`` each, one extra for layers 1..(k mod ell)."""
    if k < ell:
        raise ConfigError(f"a per-layer split needs k >= ell, got k={k}, ell={ell}")
    base, extra = divmod(k, ell)
    return [base + (1 if j < extra else 0) for j in range(ell)]


def spawn_seeds(seed, count: int) -> list:
    """Child seeds for per-layer sub-policies: ``SeedSequence(seed).spawn(count)``."""
    if seed is None:
        return [None] * count
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return root.spawn(count)


class DistPolicy(EvictionPolicy):
    """Static per-layer split of the cache, one inner policy per layer.

    ``factory(seed)`` builds an inner policy; sub-cache j only ever holds pages
    of layer j and evicts only when that sub-cache is full.
    """

    def __init__(self, factory: Callable, k: int, ell: int, seed=None, name: Optional[str] = None):
        self.quotas = dist_quotas(k, ell)
        self.factory = factory
        self.seed = seed
        self.inner = [factory(s) for s in spawn_seeds(seed, ell)]
        self.name = name or f"{self.inner[0].name}-dist"
        self.randomized = any(p.randomized for p in self.inner)

    def reset(self, k, shape):
        super().reset(k, shape)
        if dist_quotas(k, shape.ell) != self.quotas:
            raise ConfigError(f"{self.name} was built for k={sum(self.quotas)}, ell={len(self.quotas)}")
        self.counts = [0] * shape.ell
        for j, pol in enumerate(self.inner):
            pol.reset(self.quotas[j], shape)

    def needs_eviction(self, state, page):
        return self.counts[page.layer - 1] >= self.quotas[page.layer - 1]

    def choose_victim(self, state, t, page):
        j = page.layer - 1
        view = state.layer_view(page.layer, self.quotas[j])
        return self.inner[j].choose_victim(view, t, page)

    def on_hit(self, page, t):
        self.inner[page.layer - 1].on_hit(page, t)

    def on_miss(self, page, t, victim):
        j = page.layer - 1
        if victim is None:
            self.counts[j] += 1
        self.inner[j].on_miss(page, t, victim)

    def kernel(self, pages, times, k, ell):
        hits = np.zeros(pages.shape[0], dtype=np.bool_)
        layer_idx = (times - 1) % ell
        for j, pol in enumerate(self.inner):
            sel = np.flatnonzero(layer_idx == j)
            if sel.size == 0:
                continue
            sub = pol.kernel(pages[sel], times[sel], self.quotas[j], ell)
            if sub is None:
                return None
            hits[sel] = sub
        return hits


def dist_wrapper(inner_policy_factory: Callable, k: int, ell: int, seed=None) -> DistPolicy:
    return DistPolicy(inner_policy_factory, k, ell, seed)


def marking_policy(seed=0) -> Marking:
    return Marking(seed)


# -- engine ----------------------------------------------------------------

class CacheSimulator:
    """Step-wise engine: cold cache, compulsory misses counted, evict-then-insert."""

    def __init__(self, policy: EvictionPolicy, k: int, shape: ModelShape):
        if k < 1:
            raise ConfigError(f"cache size must be >= 1, got {k}")
        self.policy = policy
        self.shape = shape
        self.state = CacheState(k)
        self.hits: List[bool] = []
        policy.reset(k, shape)

    @property
    def t(self) -> int:
        return self.state.clock

    def step(self, page: PageId) -> bool:
        state = self.state
        state.clock += 1
        t = state.clock
        if page in state.last_use:
            state.last_use[page] = t
            self.policy.on_hit(page, t)
            self.hits.append(True)
            return True
        victim = None
        if self.policy.needs_eviction(state, page):
            victim = self.policy.choose_victim(state, t, page)
            if victim not in state.last_use:
                raise SimulationFault(
                    f"{self.policy.name} chose non-resident victim {victim} at t={t} "
                    f"(request {page}, {len(state)} resident)"
                )
            del state.last_use[victim]
        elif len(state) >= state.capacity:
            raise SimulationFault(f"{self.policy.name} declined to evict from a full cache at t={t}")
        state.last_use[page] = t
        self.policy.on_miss(page, t, victim)
        self.hits.append(False)
        return False

    def result(self, seed=None) -> SimResult:
        return SimResult(np.array(self.hits, dtype=np.bool_), self.shape.ell, self.policy.name, self.state.capacity, seed)


def _seed_label(seed):
    return seed if seed is None or isinstance(seed, (int, np.integer)) else str(seed)


def simulate(policy: EvictionPolicy, trace: LayeredTrace, k: int, engine: str = "auto") -> SimResult:
    """Run ``policy`` over ``trace`` with a cold cache of ``k`` pages.

    ``engine`` is ``"auto"`` (kernel if the policy has one), ``"kernel"`` or
    ``"reference"``.
    """
    if k < 1:
        raise ConfigError(f"cache size must be >= 1, got {k}")
    report = validate_trace(trace)
    if not report.ok:
        v = report.violation
        raise ValueError(f"invalid trace at position {v.position}: layer {v.found_layer}, expected {v.expected_layer}")
    seed = _seed_label(getattr(policy, "seed", None))
    if engine in ("auto", "kernel"):
        policy.reset(k, trace.shape)
        times = np.arange(1, len(trace) + 1, dtype=np.int64)
        hits = policy.kernel(trace.page_indices(), times, k, trace.shape.ell)
        if hits is not None:
            return SimResult(np.asarray(hits, dtype=np.bool_), trace.shape.ell, policy.name, k, seed)
        if engine == "kernel":
            raise ConfigError(f"{policy.name} has no array kernel")
    elif engine != "reference":
        raise ConfigError(f"unknown engine {engine!r}")
    sim = CacheSimulator(policy, k, trace.shape)
    for page in trace:
        sim.step(page)
    return sim.result(seed)
