"""Canonical byte encoding of label stores.

Layout: magic, format version, header (n, m, i_max, parameters), ``n``
length-prefixed vertex labels, a bitmap marking trivial edge labels, then a
length-prefixed record for every non-trivial edge label in id order. Edge
labels embed the full encodings of the vertex labels they reference.
Integers are unsigned LEB128 varints; fractions are numerator/denominator
pairs.
"""

from __future__ import annotations

from collections.abc import Callable
from fractions import Fraction
from typing import TypeVar

from .errors import ParseError, VersionError
from .labels import (
    ClusterEntry,
    EdgeFingerprint,
    ELabel,
    ELabelScale,
    IntervalEntry,
    LabelHeader,
    LabelParams,
    LabelSet,
    VertexFingerprint,
    VLabel,
    VLabelScale,
    trivial_elabel,
)

MAGIC = b"FTDL"
FORMAT_VERSION = 1

T = TypeVar("T")


class Writer:
    def __init__(self) -> None:
        self.buf = bytearray()

    def uint(self, x: int) -> None:
        if x < 0:
            raise ValueError(f"cannot encode negative integer {x}")
        while True:
            byte = x & 0x7F
            x >>= 7
            if x:
                self.buf.append(byte | 0x80)
            else:
                self.buf.append(byte)
                return

    def frac(self, x: Fraction) -> None:
        x = Fraction(x)
        self.uint(x.numerator)
        self.uint(x.denominator)

    def text(self, s: str) -> None:
        raw = s.encode()
        self.uint(len(raw))
        self.buf += raw

    def raw(self, data: bytes) -> None:
        self.buf += data

    def record(self, data: bytes) -> None:
        self.uint(len(data))
        self.buf += data

    def seq(self, items, put: Callable) -> None:
        self.uint(len(items))
        for x in items:
            put(x)

    def bytes(self) -> bytes:
        return bytes(self.buf)


class Reader:
    def __init__(self, data: bytes, base: int = 0) -> None:
        self.data = data
        self.pos = 0
        self.base = base  # offset of ``data`` inside the outer stream, for error messages

    def fail(self, message: str) -> ParseError:
        return ParseError(message, self.base + self.pos)

    def uint(self) -> int:
        shift = 0
        value = 0
        start = self.pos
        while True:
            if self.pos >= len(self.data):
                self.pos = start
                raise self.fail("truncated integer")
            byte = self.data[self.pos]
            self.pos += 1
            value |= (byte & 0x7F) << shift
            if not byte & 0x80:
                if byte == 0 and shift:
                    raise self.fail("non-canonical integer encoding")
                return value
            shift += 7

    def frac(self) -> Fraction:
        at = self.pos
        num, den = self.uint(), self.uint()
        if den == 0:
            self.pos = at
            raise self.fail("zero denominator")
        x = Fraction(num, den)
        if x.denominator != den:
            self.pos = at
            raise self.fail("fraction not in lowest terms")
        return x

    def take(self, k: int) -> bytes:
        if self.pos + k > len(self.data):
            raise self.fail(f"truncated: need {k} bytes")
        out = self.data[self.pos : self.pos + k]
        self.pos += k
        return out

    def text(self) -> str:
        at = self.pos
        raw = self.take(self.uint())
        try:
            return raw.decode()
        except UnicodeDecodeError:
            self.pos = at
            raise self.fail("invalid utf-8 text") from None

    def record(self) -> Reader:
        size = self.uint()
        start = self.base + self.pos
        return Reader(self.take(size), start)

    def seq(self, get: Callable[[], T]) -> tuple[T, ...]:
        count = self.uint()
        if count > len(self.data) - self.pos:
            raise self.fail(f"sequence length {count} exceeds remaining input")
        return tuple(get() for _ in range(count))

    def done(self) -> None:
        if self.pos != len(self.data):
            raise self.fail(f"{len(self.data) - self.pos} trailing bytes")


# ---------------------------------------------------------------- label records


def put_fingerprint(w: Writer, fp: VertexFingerprint) -> None:
    w.uint(fp.vertex)
    w.uint(len(fp.clusters))
    for c in fp.clusters:
        w.uint(c.cluster)
        w.uint(c.size)
        w.seq(c.levels, w.uint)
        w.uint(c.start)
        w.uint(c.end)
        w.seq(c.cluster_mass, w.frac)
        w.seq(c.subtree_mass, w.frac)


def get_fingerprint(r: Reader) -> VertexFingerprint:
    vertex = r.uint()

    def entry() -> ClusterEntry:
        return ClusterEntry(r.uint(), r.uint(), r.seq(r.uint), r.uint(), r.uint(), r.seq(r.frac), r.seq(r.frac))

    return VertexFingerprint(vertex, r.seq(entry))


def put_edge_fp(w: Writer, e: EdgeFingerprint) -> None:
    w.uint(e.edge)
    w.uint(e.length)
    put_fingerprint(w, e.u)
    put_fingerprint(w, e.v)


def get_edge_fp(r: Reader) -> EdgeFingerprint:
    return EdgeFingerprint(r.uint(), r.uint(), get_fingerprint(r), get_fingerprint(r))


def put_header(w: Writer, h: LabelHeader) -> None:
    for x in (h.f, h.s_nc, h.s_ed, h.d):
        w.uint(x)


def get_header(r: Reader) -> LabelHeader:
    return LabelHeader(r.uint(), r.uint(), r.uint(), r.uint())


def encode_vlabel(label: VLabel) -> bytes:
    w = Writer()
    w.uint(label.vertex)
    put_header(w, label.header)
    w.uint(len(label.scales))
    for part in label.scales:
        w.uint(part.scale)
        w.frac(part.tau_heavy)
        put_fingerprint(w, part.own)
        w.seq(part.edges, lambda e: put_edge_fp(w, e))
    return w.bytes()


def decode_vlabel(r: Reader) -> VLabel:
    vertex = r.uint()
    header = get_header(r)

    def part() -> VLabelScale:
        return VLabelScale(r.uint(), r.frac(), get_fingerprint(r), r.seq(lambda: get_edge_fp(r)))

    return VLabel(vertex, header, r.seq(part))


def encode_elabel(label: ELabel) -> bytes:
    w = Writer()
    w.uint(label.edge)
    w.uint(len(label.scales))
    for part in label.scales:
        w.uint(part.scale)
        put_edge_fp(w, part.edge)
        w.seq(part.clusters, w.uint)
        w.uint(len(part.intervals))
        for iv in part.intervals:
            for x in (iv.cluster, iv.tail, iv.head, iv.level, iv.start, iv.stop):
                w.uint(x)
            w.seq(iv.edges, w.uint)
        w.seq(part.edge_fps, lambda e: put_edge_fp(w, e))
    w.seq(label.vlabels, lambda v: w.record(encode_vlabel(v)))
    return w.bytes()


def decode_elabel(r: Reader) -> ELabel:
    edge = r.uint()

    def interval() -> IntervalEntry:
        return IntervalEntry(r.uint(), r.uint(), r.uint(), r.uint(), r.uint(), r.uint(), r.seq(r.uint))

    def part() -> ELabelScale:
        return ELabelScale(r.uint(), get_edge_fp(r), r.seq(r.uint), r.seq(interval), r.seq(lambda: get_edge_fp(r)))

    scales = r.seq(part)

    def vlabel() -> VLabel:
        sub = r.record()
        out = decode_vlabel(sub)
        sub.done()
        return out

    return ELabel(edge, scales, r.seq(vlabel))


# ---------------------------------------------------------------- label store


def put_params(w: Writer, p: LabelParams) -> None:
    for x in (p.f, p.s_nc, p.s_ed, p.d, p.c_tau, p.c_omega):
        w.uint(x)
    if p.phi is None:
        w.uint(0)
    else:
        w.uint(1)
        w.frac(p.phi)
    w.text(p.mode)


def get_params(r: Reader) -> LabelParams:
    at = r.pos
    f, s_nc, s_ed, d, c_tau, c_omega = (r.uint() for _ in range(6))
    flag = r.uint()
    if flag not in (0, 1):
        raise r.fail("bad phi flag")
    phi = r.frac() if flag else None
    mode = r.text()
    try:
        return LabelParams(f, s_nc, s_ed, d, c_tau, c_omega, phi, mode)
    except ValueError as exc:
        r.pos = at
        raise r.fail(f"invalid parameters: {exc}") from None


def dumps(labels: LabelSet) -> bytes:
    w = Writer()
    w.raw(MAGIC)
    w.uint(FORMAT_VERSION)
    w.uint(labels.n)
    w.uint(labels.m)
    w.uint(labels.i_max)
    put_params(w, labels.params)
    for v in labels.vlabels:
        w.record(encode_vlabel(v))
    bitmap = bytearray((labels.m + 7) // 8)
    for eid in range(labels.m):
        if labels.elabels[eid].trivial:
            bitmap[eid // 8] |= 1 << (eid % 8)
    w.raw(bytes(bitmap))
    for eid in range(labels.m):
        if not labels.elabels[eid].trivial:
            w.record(encode_elabel(labels.elabels[eid]))
    return w.bytes()


def loads(data: bytes) -> LabelSet:
    data = bytes(data)
    if data[: len(MAGIC)] != MAGIC:
        raise VersionError("not a label store (bad magic)", 0)
    r = Reader(data)
    r.pos = len(MAGIC)
    version = r.uint()
    if version != FORMAT_VERSION:
        raise VersionError(f"unsupported format version {version}", len(MAGIC))
    n, m, i_max = r.uint(), r.uint(), r.uint()
    params = get_params(r)
    vlabels = []
    for v in range(n):
        sub = r.record()
        label = decode_vlabel(sub)
        sub.done()
        if label.vertex != v:
            raise sub.fail(f"vertex label {label.vertex} out of order (expected {v})")
        vlabels.append(label)
    bitmap = r.take((m + 7) // 8)
    if m % 8 and bitmap[-1] >> (m % 8):
        raise r.fail("padding bits set in trivial-label bitmap")
    elabels = {}
    for eid in range(m):
        if bitmap[eid // 8] >> (eid % 8) & 1:
            elabels[eid] = trivial_elabel(eid)
            continue
        sub = r.record()
        label = decode_elabel(sub)
        sub.done()
        if label.edge != eid or label.trivial:
            raise sub.fail(f"edge label {label.edge} out of order or empty (expected {eid})")
        elabels[eid] = label
    r.done()
    return LabelSet(n, m, params, i_max, tuple(vlabels), elabels)


def label_sizes(labels: LabelSet) -> dict:
    """Encoded byte sizes; edge label sizes count the embedded vertex labels."""
    v_sizes = [len(encode_vlabel(v)) for v in labels.vlabels]
    e_sizes = {eid: len(encode_elabel(e)) for eid, e in labels.elabels.items() if not e.trivial}
    return {
        "vertex_max": max(v_sizes, default=0),
        "vertex_total": sum(v_sizes),
        "edge_max": max(e_sizes.values(), default=0),
        "edge_total": sum(e_sizes.values()),
        "nontrivial_edges": len(e_sizes),
        "trivial_edges": labels.m - len(e_sizes),
    }
