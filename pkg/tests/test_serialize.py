from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given, settings

from conftest import graphs, two_triangles
from ftdist.errors import ParseError, VersionError
from ftdist.harness import generate_graph
from ftdist.labels import LabelParams, build_labels
from ftdist.serialize import (
    MAGIC,
    Reader,
    Writer,
    decode_vlabel,
    dumps,
    encode_elabel,
    encode_vlabel,
    label_sizes,
    loads,
)


@pytest.fixture(scope="module")
def store():
    labels = build_labels(generate_graph(4))
    return labels, dumps(labels)


def test_round_trip_identical(store):
    labels, data = store
    back = loads(data)
    assert back.vlabels == labels.vlabels
    assert back.elabels == labels.elabels
    assert back.params == labels.params and back.i_max == labels.i_max
    assert dumps(back) == data


def test_encoding_deterministic():
    g = two_triangles()
    assert dumps(build_labels(g)) == dumps(build_labels(g))


def test_vertex_label_record_round_trip(store):
    labels, _ = store
    for v in labels.vlabels:
        r = Reader(encode_vlabel(v))
        assert decode_vlabel(r) == v
        r.done()


def test_every_truncation_is_a_parse_error(store):
    _, data = store
    for cut in range(0, len(data), max(1, len(data) // 200)):
        with pytest.raises(ParseError):
            loads(data[:cut])


def test_trailing_bytes_rejected(store):
    _, data = store
    with pytest.raises(ParseError, match="trailing"):
        loads(data + b"\x00")


def test_bad_magic_and_version(store):
    _, data = store
    with pytest.raises(VersionError, match="magic"):
        loads(b"XXXX" + data[4:])
    with pytest.raises(VersionError, match="version") as info:
        loads(MAGIC + b"\x02" + data[5:])
    assert info.value.offset == len(MAGIC)


def test_parse_error_reports_offset():
    with pytest.raises(ParseError) as info:
        Reader(b"\x80\x80").uint()
    assert info.value.offset == 0
    assert "byte offset 0" in str(info.value)


def test_varint_round_trip_and_canonical_form():
    w = Writer()
    values = [0, 1, 127, 128, 300, 2**40 + 5]
    for x in values:
        w.uint(x)
    w.frac(Fraction(-0) + Fraction(3, 7))
    r = Reader(w.bytes())
    assert [r.uint() for _ in values] == values
    assert r.frac() == Fraction(3, 7)
    r.done()
    with pytest.raises(ParseError, match="non-canonical"):
        Reader(b"\x81\x00").uint()


def test_fraction_validation():
    with pytest.raises(ParseError, match="zero denominator"):
        Reader(b"\x01\x00").frac()
    with pytest.raises(ParseError, match="lowest terms"):
        Reader(b"\x02\x04").frac()


def test_negative_integer_rejected():
    with pytest.raises(ValueError):
        Writer().uint(-1)


def test_size_report_counts_only_nontrivial(store):
    labels, _ = store
    sizes = label_sizes(labels)
    assert sizes["nontrivial_edges"] == labels.nontrivial_count()
    assert sizes["trivial_edges"] == labels.m - labels.nontrivial_count()
    nontrivial = [e for e in labels.elabels.values() if not e.trivial]
    assert sizes["edge_max"] == max((len(encode_elabel(e)) for e in nontrivial), default=0)


@settings(max_examples=15)
@given(graphs(n_max=5, m_max=6, max_length=3))
def test_round_trip_random(g):
    labels = build_labels(g, LabelParams(f=1, d=1))
    data = dumps(labels)
    assert dumps(loads(data)) == data
