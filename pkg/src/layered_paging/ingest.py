"""Recorded MoE expert-usage traces (several experts per layer per token).

JSONL layout, one JSON object per line::

    {"n": 8, "l": 32, "e": 2, "model": "mixtral"}        # header
    {"token": 0, "layers": [[3, 7], [1, 2], ...]}         # l lists of e experts

Experts are 1-indexed; within a layer list the order is the gate's selection
rank, which round expansion preserves.
"""
from __future__ import annotations

import io
import json
import os
from dataclasses import dataclass, field
from typing import IO, Iterable, Optional, Union

import numpy as np

from .errors import TraceFormatError
from .model import LayeredTrace, ModelShape


@dataclass
class RawMoeTrace:
    shape: ModelShape
    e: int
    tokens: np.ndarray  # (num_tokens, ell, e), 1-indexed experts
    model: Optional[str] = None
    token_ids: list = field(default_factory=list)

    def __post_init__(self):
        self.tokens = np.asarray(self.tokens, dtype=np.int64).reshape(-1, self.shape.ell, self.e)
        if not self.token_ids:
            self.token_ids = list(range(self.tokens.shape[0]))

    @property
    def num_tokens(self) -> int:
        return int(self.tokens.shape[0])

    def __eq__(self, other):
        if not isinstance(other, RawMoeTrace):
            return NotImplemented
        return (
            self.shape == other.shape and self.e == other.e and self.model == other.model
            and self.token_ids == other.token_ids and np.array_equal(self.tokens, other.tokens)
        )


def _positive_int(value, name, lineno, source):
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise TraceFormatError(f"header field {name!r} must be a positive integer, got {value!r}", lineno, source)
    return value


def _iter_text_lines(src) -> Iterable[str]:
    for raw in src:
        yield raw.decode("utf-8") if isinstance(raw, bytes) else raw


def parse_moe_trace(src: Union[str, os.PathLike, IO]) -> RawMoeTrace:
    """Parse and validate a JSONL expert trace (path, text or binary stream)."""
    if isinstance(src, (str, os.PathLike)):
        with open(src, "rb") as fh:
            return _parse(fh, os.fspath(src))
    return _parse(src, getattr(src, "name", None))


def _parse(stream, source) -> RawMoeTrace:
    header = None
    rows, ids = [], []
    for lineno, line in enumerate(_iter_text_lines(stream), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TraceFormatError(f"malformed JSON: {exc.msg}", lineno, source) from None
        if not isinstance(obj, dict):
            raise TraceFormatError("each line must be a JSON object", lineno, source)
        if header is None:
            n = _positive_int(obj.get("n"), "n", lineno, source)
            ell = _positive_int(obj.get("l"), "l", lineno, source)
            e = _positive_int(obj.get("e"), "e", lineno, source)
            if e > n:
                raise TraceFormatError(f"e={e} experts per layer exceeds n={n}", lineno, source)
            model = obj.get("model")
            header = (n, ell, e, None if model is None else str(model))
            continue
        n, ell, e, _ = header
        layers = obj.get("layers")
        token = obj.get("token", len(rows))
        if isinstance(token, bool) or not isinstance(token, int):
            raise TraceFormatError(f"token id must be an integer, got {token!r}", lineno, source)
        if not isinstance(layers, list) or len(layers) != ell:
            got = len(layers) if isinstance(layers, list) else type(layers).__name__
            raise TraceFormatError(f"expected {ell} layer entries, got {got}", lineno, source)
        for j, entry in enumerate(layers, 1):
            if not isinstance(entry, list) or len(entry) != e:
                got = len(entry) if isinstance(entry, list) else type(entry).__name__
                raise TraceFormatError(f"layer {j}: expected {e} experts, got {got}", lineno, source)
            for x in entry:
                if isinstance(x, bool) or not isinstance(x, int) or not 1 <= x <= n:
                    raise TraceFormatError(f"layer {j}: expert {x!r} outside [1, {n}]", lineno, source)
            if len(set(entry)) != e:
                raise TraceFormatError(f"layer {j}: repeated expert in {entry}", lineno, source)
        rows.append(layers)
        ids.append(token)
    if header is None:
        raise TraceFormatError("missing header record", None, source)
    n, ell, e, model = header
    tokens = np.array(rows, dtype=np.int64).reshape(-1, ell, e)
    return RawMoeTrace(ModelShape(n, ell), e, tokens, model, ids)


def serialize_moe_trace(raw: RawMoeTrace, dest: Optional[IO[str]] = None) -> str:
    """Inverse of :func:`parse_moe_trace`; returns the text and writes it to ``dest`` if given."""
    head = {"n": raw.shape.n, "l": raw.shape.ell, "e": raw.e}
    if raw.model is not None:
        head["model"] = raw.model
    buf = io.StringIO()
    buf.write(json.dumps(head) + "\n")
    for tid, tok in zip(raw.token_ids, raw.tokens.tolist()):
        buf.write(json.dumps({"token": tid, "layers": tok}, separators=(",", ":")) + "\n")
    text = buf.getvalue()
    if dest is not None:
        dest.write(text)
    return text


def round_expand(raw: RawMoeTrace) -> LayeredTrace:
    """One round per selection rank: token -> e rounds, round r takes each layer's r-th expert."""
    rounds = raw.tokens.transpose(0, 2, 1).reshape(-1, raw.shape.ell)
    return LayeredTrace.from_rounds(raw.shape, rounds, source="moe", model=raw.model, e=raw.e, tokens=raw.num_tokens)


# -- statistics ------------------------------------------------------------

@dataclass
class TraceStats:
    length: int
    rounds: int
    distinct_pages: int
    expert_frequency: np.ndarray  # (ell, n) request counts
    reuse_distances: np.ndarray  # position gap between successive requests of a page

    def to_dict(self) -> dict:
        d = self.reuse_distances
        reuse = {"count": int(d.size)}
        if d.size:
            q = np.percentile(d, [0, 25, 50, 75, 100])
            reuse.update(min=int(q[0]), q1=float(q[1]), median=float(q[2]), q3=float(q[3]), max=int(q[4]),
                         mean=float(d.mean()))
        return {
            "length": self.length,
            "rounds": self.rounds,
            "distinct_pages": self.distinct_pages,
            "expert_frequency": self.expert_frequency.tolist(),
            "reuse_distance": reuse,
        }


def trace_stats(trace: LayeredTrace) -> TraceStats:
    n, ell = trace.shape.n, trace.shape.ell
    freq = np.zeros((ell, n), dtype=np.int64)
    if len(trace) == 0:
        return TraceStats(0, 0, 0, freq, np.zeros(0, dtype=np.int64))
    np.add.at(freq, (trace.layers - 1, trace.experts - 1), 1)
    pages = trace.page_indices()
    order = np.lexsort((np.arange(pages.size), pages))
    same = pages[order][1:] == pages[order][:-1]
    reuse = np.diff(order)[same]
    return TraceStats(len(trace), trace.num_rounds, trace.distinct_pages(), freq, reuse.astype(np.int64))
