"""Name-based lookup of every policy, online and offline."""
from __future__ import annotations

from typing import Iterable

from .errors import ConfigError
from .model import LayeredTrace
from .offline import belady_simulate, opt_dist_simulate
from .policies import LLRU, LRU, DistPolicy, EvictionPolicy, Marking, SimResult, simulate

ONLINE = {
    "lru": lambda k, ell, seed: LRU(),
    "llru": lambda k, ell, seed: LLRU(),
    "llru-formula": lambda k, ell, seed: LLRU(current_layer_first=False),
    "marking": lambda k, ell, seed: Marking(seed),
    "lru-dist": lambda k, ell, seed: DistPolicy(lambda s: LRU(), k, ell, seed, name="lru-dist"),
    "llru-dist": lambda k, ell, seed: DistPolicy(lambda s: LLRU(), k, ell, seed, name="llru-dist"),
    "marking-dist": lambda k, ell, seed: DistPolicy(Marking, k, ell, seed, name="marking-dist"),
}
OFFLINE = {"opt": belady_simulate, "opt-dist": opt_dist_simulate}
POLICY_NAMES = tuple(ONLINE) + tuple(OFFLINE)
SPLIT_POLICIES = frozenset({"lru-dist", "llru-dist", "marking-dist", "opt-dist"})


def check_policy_names(names: Iterable[str]) -> list:
    names = list(names)
    unknown = [p for p in names if p not in POLICY_NAMES]
    if unknown:
        raise ConfigError(f"unknown policy {', '.join(unknown)}; choose from {', '.join(POLICY_NAMES)}")
    return names


def applicable(name: str, k: int, ell: int) -> bool:
    """Split policies need at least one slot per layer."""
    return k >= 1 and (name not in SPLIT_POLICIES or k >= ell)


def make_policy(name: str, k: int, ell: int, seed=0) -> EvictionPolicy:
    if name not in ONLINE:
        raise ConfigError(f"{name!r} is not an online policy; choose from {', '.join(ONLINE)}")
    return ONLINE[name](k, ell, seed)


def run_policy(name: str, trace: LayeredTrace, k: int, seed=0, engine: str = "auto") -> SimResult:
    if name in OFFLINE:
        return OFFLINE[name](trace, k)
    return simulate(make_policy(name, k, trace.shape.ell, seed), trace, k, engine=engine)
