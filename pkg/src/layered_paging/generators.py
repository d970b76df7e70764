"""Synthetic and adversarial request sequences, plus cover-time sampling."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from . import kernels
from ._accel import backend_name
from .errors import ConfigError
from .model import LayeredTrace, ModelShape, PageId
from .policies import CacheSimulator, EvictionPolicy, SimResult


def harmonic(n: int) -> float:
    return math.fsum(1.0 / i for i in range(1, n + 1))


# -- Zipf ------------------------------------------------------------------

@dataclass(frozen=True)
class ZipfParams:
    a: float = 2.0
    b: float = 0.0
    per_layer_permutation: bool = False

    def __post_init__(self):
        if not self.a > 0:
            raise ConfigError(f"Zipf exponent must be > 0, got {self.a}")
        if not self.b >= 0:
            raise ConfigError(f"Zipf shift must be >= 0, got {self.b}")


def zipf_probabilities(n: int, a: float, b: float = 0.0) -> np.ndarray:
    """Rank probabilities proportional to ``1 / (rank + b) ** a``, ranks 1..n."""
    ranks = np.arange(1, n + 1, dtype=np.float64)
    # log-space keeps large exponents (a ~ 50) from underflowing to all-zero
    logw = -a * np.log(ranks + b)
    w = np.exp(logw - logw.max())
    return w / w.sum()


def gen_zipf(shape: ModelShape, params: ZipfParams, rounds: int, seed) -> LayeredTrace:
    """Independent Zipf draw per request, sampled by inverse CDF over the ranks.

    The permutation stream and the draw stream are spawned separately from
    ``seed``, so toggling ``per_layer_permutation`` leaves the ranks unchanged.
    """
    if rounds < 0:
        raise ConfigError("rounds must be >= 0")
    n, ell = shape.n, shape.ell
    perm_ss, draw_ss = np.random.SeedSequence(seed).spawn(2)
    cdf = np.cumsum(zipf_probabilities(n, params.a, params.b))
    cdf[-1] = 1.0
    u = np.random.default_rng(draw_ss).random((rounds, ell))
    ranks = np.minimum(np.searchsorted(cdf, u, side="right"), n - 1)
    if params.per_layer_permutation:
        prng = np.random.default_rng(perm_ss)
        perms = np.stack([prng.permutation(n) for _ in range(ell)])  # (ell, n): rank -> expert
        experts = perms[np.arange(ell)[None, :], ranks] + 1
    else:
        experts = ranks + 1
    return LayeredTrace.from_rounds(
        shape, experts, generator="zipf", a=params.a, b=params.b,
        per_layer_permutation=params.per_layer_permutation, rounds=rounds, seed=seed,
    )


# -- adversaries -------------------------------------------------------------

@dataclass(frozen=True)
class LruNemesis:
    """Cyclic sequence over all ``n * ell = k + 1`` pages; round i uses expert (i mod n) + 1."""

    shape: ModelShape
    k: int

    def __iter__(self) -> Iterator[PageId]:
        for i in itertools.count():
            e = i % self.shape.n + 1
            for layer in range(1, self.shape.ell + 1):
                yield PageId(layer, e)

    def trace(self, rounds: int) -> LayeredTrace:
        experts = np.arange(rounds, dtype=np.int64) % self.shape.n + 1
        grid = np.repeat(experts[:, None], self.shape.ell, axis=1)
        return LayeredTrace.from_rounds(self.shape, grid, generator="lru-nemesis", k=self.k, rounds=rounds)

    def requests(self, count: int) -> LayeredTrace:
        """First ``count`` requests; ``count`` must be a whole number of rounds."""
        if count % self.shape.ell:
            raise ConfigError(f"{count} requests is not a whole number of {self.shape.ell}-request rounds")
        return self.trace(count // self.shape.ell)


def gen_lru_nemesis(k: int, ell: int) -> LruNemesis:
    if k < 1 or ell < 1 or (k + 1) % ell:
        raise ConfigError(f"LRU nemesis needs ell to divide k + 1, got k={k}, ell={ell}")
    return LruNemesis(ModelShape((k + 1) // ell, ell), k)


def gen_fixed_partition_adversary(n: int, ell: int, z: int, rounds: int, k: int) -> LayeredTrace:
    """Expert 1 in every layer except ``z``; layer ``z`` cycles through all n experts."""
    if n < 2 or ell < 2:
        raise ConfigError(f"needs n >= 2 and ell >= 2, got n={n}, ell={ell}")
    if not n + ell - 1 <= k < n * ell:
        raise ConfigError(f"needs n + ell - 1 <= k < n * ell, got k={k}")
    if not 1 <= z <= ell:
        raise ConfigError(f"layer z={z} outside [1, {ell}]")
    grid = np.ones((rounds, ell), dtype=np.int64)
    grid[:, z - 1] = np.arange(1, rounds + 1) % n + 1
    return LayeredTrace.from_rounds(ModelShape(n, ell), grid, generator="fixed-partition", z=z, k=k, rounds=rounds)


@dataclass
class AdaptiveRun:
    trace: LayeredTrace
    result: SimResult
    warmup: int  # requests in the fill phase

    def __iter__(self):
        return iter((self.trace, self.result))


def gen_adaptive_adversary(policy: EvictionPolicy, ell: int, n: int, rounds: int) -> AdaptiveRun:
    """Co-simulate a deterministic policy and request its missing page each round.

    The cache has ``k = n * ell - 1`` slots. A fill phase of n rounds (round r
    asks for expert r in every layer) touches every page once, so exactly one
    page is absent afterwards. Each adversarial round repeats the previous one
    except in the missing page's layer, which asks for the missing page.
    """
    if getattr(policy, "randomized", False):
        raise ConfigError(f"{policy.name} is randomised; the adaptive adversary needs a deterministic policy")
    shape = ModelShape(n, ell)
    k = n * ell - 1
    if k < 1:
        raise ConfigError("needs n * ell >= 2")
    sim = CacheSimulator(policy, k, shape)
    all_pages = [PageId(j, e) for j in range(1, ell + 1) for e in range(1, n + 1)]
    grid = np.empty((n + rounds, ell), dtype=np.int64)
    for r in range(n):
        grid[r, :] = r + 1
        for j in range(ell):
            sim.step(PageId(j + 1, r + 1))
    for r in range(n, n + rounds):
        absent = [p for p in all_pages if p not in sim.state]
        if len(absent) != 1:
            raise ConfigError(f"expected exactly one absent page, found {len(absent)}")
        missing = absent[0]
        grid[r, :] = grid[r - 1, :]
        grid[r, missing.layer - 1] = missing.expert
        for j in range(ell):
            sim.step(PageId(j + 1, int(grid[r, j])))
    trace = LayeredTrace.from_rounds(shape, grid, generator="adaptive-adversary", policy=policy.name, rounds=rounds)
    return AdaptiveRun(trace, sim.result(getattr(policy, "seed", None)), n * ell)


def gen_yao_random(n: int, ell: int, rounds: int, seed) -> LayeredTrace:
    """Every request uniform over its layer's n experts."""
    grid = np.random.default_rng(seed).integers(1, n + 1, size=(rounds, ell))
    return LayeredTrace.from_rounds(ModelShape(n, ell), grid, generator="yao-random", rounds=rounds, seed=seed)


# -- parallel coupon collector ---------------------------------------------

@dataclass(frozen=True)
class CoverTimeEstimate:
    N: int
    C: int
    samples: int
    mean: float
    stderr: float
    backend: str = "numba"

    @property
    def lower_bound(self) -> float:
        return cover_time_lower_bound(self.N, self.C)


def cover_time_lower_bound(N: int, C: int) -> float:
    """max(N * H_N, ln(C) / 6)."""
    return max(N * harmonic(N), math.log(C) / 6.0)


def _kernel_seed(seed) -> int:
    return int(np.random.SeedSequence(seed).generate_state(1, dtype=np.uint32)[0])


def coupon_cover_time(N: int, C: int, samples: int, seed=0) -> CoverTimeEstimate:
    """Monte Carlo estimate of E[T(N, C)] for C independent collectors of N coupons."""
    if N < 1 or C < 1 or samples < 1:
        raise ConfigError(f"needs N, C, samples >= 1, got N={N}, C={C}, samples={samples}")
    t = kernels.cover_times(N, C, samples, _kernel_seed(seed)).astype(np.float64)
    stderr = float(t.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0
    return CoverTimeEstimate(N, C, samples, float(t.mean()), stderr, backend_name())
