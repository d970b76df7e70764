"""Simulation toolkit for layered paging: caching MoE expert weights layer by layer."""
from .errors import ConfigError, OracleCapExceeded, SimulationFault, TraceFormatError
from .generators import (
    CoverTimeEstimate,
    ZipfParams,
    coupon_cover_time,
    cover_time_lower_bound,
    gen_adaptive_adversary,
    gen_fixed_partition_adversary,
    gen_lru_nemesis,
    gen_yao_random,
    gen_zipf,
)
from .ingest import RawMoeTrace, parse_moe_trace, round_expand, serialize_moe_trace, trace_stats
from .model import (
    LayeredTrace,
    ModelShape,
    PageId,
    layer_of_position,
    read_trace,
    round_of_position,
    validate_trace,
    write_trace,
)
from .offline import belady_simulate, dp_opt, opt_dist_simulate
from .policies import LLRU, LRU, CacheState, DistPolicy, EvictionPolicy, Marking, SimResult, dist_wrapper, simulate
from .registry import POLICY_NAMES, make_policy, run_policy

__version__ = "0.1.0"

__all__ = [
    "CacheState", "ConfigError", "CoverTimeEstimate", "DistPolicy", "EvictionPolicy", "LLRU", "LRU",
    "LayeredTrace", "Marking", "ModelShape", "OracleCapExceeded", "POLICY_NAMES", "PageId", "RawMoeTrace",
    "SimResult", "SimulationFault", "TraceFormatError", "ZipfParams", "belady_simulate", "coupon_cover_time",
    "cover_time_lower_bound", "dist_wrapper", "dp_opt", "gen_adaptive_adversary", "gen_fixed_partition_adversary",
    "gen_lru_nemesis", "gen_yao_random", "gen_zipf", "layer_of_position", "make_policy", "opt_dist_simulate",
    "parse_moe_trace", "read_trace", "round_expand", "round_of_position", "run_policy", "serialize_moe_trace",
    "simulate", "trace_stats", "validate_trace", "write_trace",
]
