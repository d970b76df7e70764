"""Core types for layered paging: shapes, pages, traces and the trace file format.

Positions, layers and experts are all 1-indexed. A page ``(layer, expert)``
is encoded internally as the integer ``(layer - 1) * n + (expert - 1)``, which
preserves the canonical layer-major ordering of :class:`PageId`.
"""
from __future__ import annotations

import io
import os
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, TextIO, Tuple, Union

import numpy as np

from .errors import TraceFormatError

TRACE_MAGIC = "layered-trace"
TRACE_VERSION = "v1"
_HEADER_RE = re.compile(r"^layered-trace\s+v1\s+n=(\d+)\s+l=(\d+)\s*$")


@dataclass(frozen=True)
class ModelShape:
    n: int
    ell: int

    def __post_init__(self):
        if int(self.n) < 1 or int(self.ell) < 1:
            raise ValueError(f"ModelShape needs n >= 1 and ell >= 1, got n={self.n}, ell={self.ell}")

    @property
    def num_pages(self) -> int:
        return self.n * self.ell

    def encode(self, layer: int, expert: int) -> int:
        return (layer - 1) * self.n + (expert - 1)

    def decode(self, index: int) -> "PageId":
        layer, expert = divmod(int(index), self.n)
        return PageId(layer + 1, expert + 1)


@dataclass(frozen=True, order=True)
class PageId:
    """Expert weight page; ordered layer-major, then by expert."""

    layer: int
    expert: int

    def __str__(self):
        return f"E{self.expert}^({self.layer})"


def layer_of_position(i: int, ell: int) -> int:
    return (i - 1) % ell + 1


def round_of_position(i: int, ell: int) -> int:
    return -(-i // ell)


@dataclass
class LayeredTrace:
    """Request sequence with its model shape.

    ``layers`` and ``experts`` are parallel int64 arrays. Construction does not
    check the layer constraint; use :func:`validate_trace` for that.
    """

    shape: ModelShape
    layers: np.ndarray
    experts: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        self.layers = np.ascontiguousarray(self.layers, dtype=np.int64).reshape(-1)
        self.experts = np.ascontiguousarray(self.experts, dtype=np.int64).reshape(-1)
        if self.layers.shape != self.experts.shape:
            raise ValueError("layers and experts must have the same length")

    @classmethod
    def from_pages(cls, shape: ModelShape, pages: Iterable[Union[PageId, Tuple[int, int]]], **meta) -> "LayeredTrace":
        pairs = [(p.layer, p.expert) if isinstance(p, PageId) else (int(p[0]), int(p[1])) for p in pages]
        arr = np.array(pairs, dtype=np.int64).reshape(-1, 2)
        return cls(shape, arr[:, 0], arr[:, 1], dict(meta))

    @classmethod
    def from_rounds(cls, shape: ModelShape, experts_by_round: np.ndarray, **meta) -> "LayeredTrace":
        """Build from a ``(rounds, ell)`` array of expert indices."""
        grid = np.asarray(experts_by_round, dtype=np.int64)
        if grid.ndim != 2 or grid.shape[1] != shape.ell:
            raise ValueError(f"expected a (rounds, {shape.ell}) array, got {grid.shape}")
        layers = np.tile(np.arange(1, shape.ell + 1, dtype=np.int64), grid.shape[0])
        return cls(shape, layers, grid.reshape(-1), dict(meta))

    def __len__(self) -> int:
        return int(self.layers.shape[0])

    def __iter__(self) -> Iterator[PageId]:
        for layer, expert in zip(self.layers.tolist(), self.experts.tolist()):
            yield PageId(layer, expert)

    def __getitem__(self, i: int) -> PageId:
        """0-indexed access (position ``i + 1``)."""
        return PageId(int(self.layers[i]), int(self.experts[i]))

    @property
    def requests(self) -> list:
        return list(self)

    @property
    def num_rounds(self) -> int:
        return round_of_position(len(self), self.shape.ell) if len(self) else 0

    def page_indices(self) -> np.ndarray:
        """Encoded page ids (0-based, canonical order preserved)."""
        return (self.layers - 1) * self.shape.n + (self.experts - 1)

    def distinct_pages(self) -> int:
        return int(np.unique(self.page_indices()).size)

    def __eq__(self, other):
        if not isinstance(other, LayeredTrace):
            return NotImplemented
        return (
            self.shape == other.shape
            and np.array_equal(self.layers, other.layers)
            and np.array_equal(self.experts, other.experts)
        )


@dataclass(frozen=True)
class Violation:
    position: int
    expected_layer: int
    found_layer: int
    expert: int
    reason: str = "layer"  # "layer" or "expert"


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    violation: Optional[Violation] = None
    length: int = 0
    ragged_tail: int = 0  # requests in an incomplete final round

    def __bool__(self):
        return self.ok


def validate_trace(trace: LayeredTrace) -> ValidationReport:
    """Check the cyclic layer constraint and expert ranges.

    Reports the first offending position rather than raising, so callers can
    attach file/line context.
    """
    n, ell = trace.shape.n, trace.shape.ell
    length = len(trace)
    ragged = length % ell
    if length == 0:
        return ValidationReport(True, None, 0, 0)
    expected = np.arange(length, dtype=np.int64) % ell + 1
    bad_layer = trace.layers != expected
    bad_expert = (trace.experts < 1) | (trace.experts > n)
    bad = np.flatnonzero(bad_layer | bad_expert)
    if bad.size == 0:
        return ValidationReport(True, None, length, ragged)
    i = int(bad[0])
    reason = "layer" if bad_layer[i] else "expert"
    v = Violation(i + 1, int(expected[i]), int(trace.layers[i]), int(trace.experts[i]), reason)
    return ValidationReport(False, v, length, ragged)


# -- canonical text format -------------------------------------------------

def format_header(shape: ModelShape) -> str:
    return f"{TRACE_MAGIC} {TRACE_VERSION} n={shape.n} l={shape.ell}"


def write_trace(trace: LayeredTrace, dest: Union[str, os.PathLike, TextIO], comment: Optional[str] = None) -> None:
    """Write the canonical format. ``comment`` becomes a ``#`` line after the header."""
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "w", encoding="utf-8", newline="\n") as fh:
            write_trace(trace, fh, comment)
        return
    dest.write(format_header(trace.shape) + "\n")
    if comment:
        for line in comment.splitlines():
            dest.write(f"# {line}\n")
    body = np.column_stack([trace.layers, trace.experts])
    buf = io.StringIO()
    np.savetxt(buf, body, fmt="%d", delimiter=" ")
    dest.write(buf.getvalue())


def _parse_lines(lines: Iterable[str], source: Optional[str]):
    shape = None
    comments = []
    layers, experts, line_nos = [], [], []
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            comments.append(line[1:].strip())
            continue
        if shape is None:
            m = _HEADER_RE.match(line)
            if not m:
                raise TraceFormatError(f"expected header 'layered-trace v1 n=<n> l=<l>', got {line!r}", lineno, source)
            try:
                shape = ModelShape(int(m.group(1)), int(m.group(2)))
            except ValueError as exc:
                raise TraceFormatError(str(exc), lineno, source) from None
            continue
        parts = line.split()
        if len(parts) != 2:
            raise TraceFormatError(f"expected '<layer> <expert>', got {line!r}", lineno, source)
        try:
            layer, expert = int(parts[0]), int(parts[1])
        except ValueError:
            raise TraceFormatError(f"non-integer request {line!r}", lineno, source) from None
        if not 1 <= layer <= shape.ell:
            raise TraceFormatError(f"layer {layer} outside [1, {shape.ell}]", lineno, source)
        if not 1 <= expert <= shape.n:
            raise TraceFormatError(f"expert {expert} outside [1, {shape.n}]", lineno, source)
        layers.append(layer)
        experts.append(expert)
        line_nos.append(lineno)
    if shape is None:
        raise TraceFormatError("missing header line", None, source)
    trace = LayeredTrace(shape, np.array(layers, dtype=np.int64), np.array(experts, dtype=np.int64))
    if comments:
        trace.meta["comments"] = comments
    return trace, line_nos


def load_trace_with_lines(src: Union[str, os.PathLike, TextIO]) -> Tuple[LayeredTrace, list]:
    """Parse without checking the layer sequence; returns the source line of each request."""
    if isinstance(src, (str, os.PathLike)):
        with open(src, encoding="utf-8") as fh:
            return _parse_lines(fh, os.fspath(src))
    return _parse_lines(src, getattr(src, "name", None))


def read_trace(src: Union[str, os.PathLike, TextIO], strict: bool = True) -> LayeredTrace:
    """Read a canonical trace file.

    Out-of-range layers or experts are always rejected. With ``strict`` the
    layer sequence is checked too and the first violation raises with its line.
    """
    trace, line_nos = load_trace_with_lines(src)
    if strict:
        report = validate_trace(trace)
        if not report.ok:
            v = report.violation
            source = os.fspath(src) if isinstance(src, (str, os.PathLike)) else None
            raise TraceFormatError(
                f"request {v.position} is from layer {v.found_layer}, expected layer {v.expected_layer}",
                line_nos[v.position - 1],
                source,
            )
    return trace


def trace_from_text(text: str, strict: bool = True) -> LayeredTrace:
    return read_trace(io.StringIO(text), strict=strict)


def trace_to_text(trace: LayeredTrace, comment: Optional[str] = None) -> str:
    buf = io.StringIO()
    write_trace(trace, buf, comment)
    return buf.getvalue()


def figure_example_trace() -> LayeredTrace:
    """The three-token, n = ell = 4 walkthrough sequence (12 requests)."""
    experts = [[1, 1, 2, 3], [2, 2, 2, 1], [2, 3, 4, 2]]
    return LayeredTrace.from_rounds(ModelShape(4, 4), np.array(experts), source="figure-example")
