import io

import numpy as np
import pytest
from hypothesis import given, strategies as st

from layered_paging.errors import TraceFormatError
from layered_paging.model import (
    LayeredTrace,
    ModelShape,
    PageId,
    figure_example_trace,
    layer_of_position,
    read_trace,
    round_of_position,
    trace_from_text,
    trace_to_text,
    validate_trace,
    write_trace,
)

from conftest import layered_traces


@pytest.mark.parametrize("i, ell, want", [(1, 4, 1), (5, 4, 1), (11, 4, 3)])
def test_layer_of_position(i, ell, want):
    assert layer_of_position(i, ell) == want


@pytest.mark.parametrize("i, ell, want", [(4, 4, 1), (5, 4, 2), (1, 1, 1)])
def test_round_of_position(i, ell, want):
    assert round_of_position(i, ell) == want


@given(st.integers(1, 10_000), st.integers(1, 64))
def test_layer_of_position_is_periodic(i, ell):
    assert layer_of_position(i + ell, ell) == layer_of_position(i, ell)
    assert 1 <= layer_of_position(i, ell) <= ell
    assert round_of_position(i, ell) == -(-i // ell)


def test_shape_rejects_nonpositive():
    with pytest.raises(ValueError):
        ModelShape(0, 3)
    with pytest.raises(ValueError):
        ModelShape(2, 0)
    assert ModelShape(3, 5).num_pages == 15


def test_page_order_is_layer_major():
    pages = [PageId(2, 1), PageId(1, 3), PageId(1, 1), PageId(3, 2)]
    assert sorted(pages) == [PageId(1, 1), PageId(1, 3), PageId(2, 1), PageId(3, 2)]
    assert PageId(1, 2) == PageId(1, 2)


@given(st.integers(1, 8), st.integers(1, 8))
def test_encoding_preserves_order(n, ell):
    shape = ModelShape(n, ell)
    pages = [PageId(j, e) for j in range(1, ell + 1) for e in range(1, n + 1)]
    codes = [shape.encode(p.layer, p.expert) for p in pages]
    assert codes == list(range(n * ell))
    assert [shape.decode(c) for c in codes] == pages


def test_three_token_trace_is_valid():
    tr = figure_example_trace()
    rep = validate_trace(tr)
    assert rep.ok and rep.length == 12 and rep.ragged_tail == 0
    assert tr.num_rounds == 3
    assert tr[6] == PageId(3, 2)


def test_wrong_first_layer_is_reported():
    tr = LayeredTrace.from_pages(ModelShape(2, 2), [PageId(2, 1)])
    rep = validate_trace(tr)
    assert not rep.ok
    assert (rep.violation.position, rep.violation.expected_layer, rep.violation.found_layer) == (1, 1, 2)


def test_empty_trace_is_valid():
    rep = validate_trace(LayeredTrace.from_pages(ModelShape(3, 3), []))
    assert rep.ok and rep.length == 0


def test_expert_out_of_range_is_reported():
    tr = LayeredTrace(ModelShape(2, 2), [1, 2], [1, 3])
    rep = validate_trace(tr)
    assert not rep.ok and rep.violation.position == 2 and rep.violation.reason == "expert"


def test_ragged_tail_accepted():
    tr = LayeredTrace(ModelShape(2, 3), [1, 2, 3, 1], [1, 1, 2, 2])
    rep = validate_trace(tr)
    assert rep.ok and rep.ragged_tail == 1


@given(st.integers(1, 6), st.lists(st.integers(1, 6), max_size=40))
def test_single_layer_accepts_any_sequence(n, experts):
    experts = [min(e, n) for e in experts]
    tr = LayeredTrace(ModelShape(n, 1), [1] * len(experts), experts)
    assert validate_trace(tr).ok


@given(layered_traces())
def test_text_round_trip(tr):
    assert trace_from_text(trace_to_text(tr, comment="x=1")) == tr


def test_reader_skips_comments_and_keeps_them(fixtures_dir):
    tr = read_trace(f"{fixtures_dir}/three_tokens.trace")
    assert tr == figure_example_trace()
    assert tr.meta["comments"] == ["three-token walkthrough, n=4 l=4"]


def test_strict_reader_points_at_line(fixtures_dir):
    with pytest.raises(TraceFormatError) as exc:
        read_trace(f"{fixtures_dir}/bad_layer.trace")
    # position 3 ("2 1") sits on line 5, after the comment line
    assert exc.value.line == 5
    assert "bad_layer.trace:5" in str(exc.value)
    lax = read_trace(f"{fixtures_dir}/bad_layer.trace", strict=False)
    assert validate_trace(lax).violation.position == 3


@pytest.mark.parametrize(
    "text, line",
    [
        ("layered-trace v1 n=2 l=2\n1 3\n", 2),
        ("layered-trace v1 n=2 l=2\n3 1\n", 2),
        ("layered-trace v1 n=2 l=2\n1\n", 2),
        ("layered-trace v1 n=2 l=2\n1 x\n", 2),
        ("bogus header\n", 1),
        ("layered-trace v1 n=0 l=2\n", 1),
    ],
)
def test_reader_rejects_bad_bodies(text, line):
    with pytest.raises(TraceFormatError) as exc:
        trace_from_text(text)
    assert exc.value.line == line


def test_missing_header():
    with pytest.raises(TraceFormatError):
        trace_from_text("# only a comment\n")


def test_write_to_stream_and_path(tmp_path):
    tr = figure_example_trace()
    buf = io.StringIO()
    write_trace(tr, buf, comment="a\nb")
    lines = buf.getvalue().splitlines()
    assert lines[:3] == ["layered-trace v1 n=4 l=4", "# a", "# b"]
    path = tmp_path / "t.trace"
    write_trace(tr, path)
    assert read_trace(path) == tr


def test_from_rounds_shape_check():
    with pytest.raises(ValueError):
        LayeredTrace.from_rounds(ModelShape(2, 3), np.ones((2, 2)))
