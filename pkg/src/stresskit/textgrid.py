"""Praat TextGrid reading and writing.

Accepts both the long ("ooTextFile" with ``key = value`` lines) and the
short (bare values) text forms, in UTF-8 or UTF-16.  Writing always emits
the long form.  Quote escaping follows Praat's convention: a literal ``"``
inside a label is doubled (``""``), and labels may span several lines.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

TIME_TOL = 1e-9  # tolerance when comparing times read back from text

INTERVAL_TIER = "interval"
POINT_TIER = "point"

_CLASS_BY_KIND = {INTERVAL_TIER: "IntervalTier", POINT_TIER: "TextTier"}
_KIND_BY_CLASS = {v: k for k, v in _CLASS_BY_KIND.items()}


class TextGridParseError(ValueError):
    """Malformed TextGrid content; carries the offending line number."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class TextGridWriteError(ValueError):
    """Refused serialization: the document violates its invariants."""


@dataclass
class Interval:
    xmin: float
    xmax: float
    text: str


@dataclass
class Point:
    time: float
    text: str


@dataclass
class Tier:
    name: str
    kind: str  # INTERVAL_TIER or POINT_TIER
    xmin: float
    xmax: float
    intervals: list[Interval] = field(default_factory=list)
    points: list[Point] = field(default_factory=list)

    def __len__(self):
        return len(self.intervals) if self.kind == INTERVAL_TIER else len(self.points)


@dataclass
class TextGridDoc:
    xmin: float
    xmax: float
    tiers: list[Tier] = field(default_factory=list)

    def tier(self, name):
        """First tier with the given name, or None."""
        for t in self.tiers:
            if t.name == name:
                return t
        return None

    def tier_names(self):
        return [t.name for t in self.tiers]


def structurally_equal(a, b, time_tol=TIME_TOL):
    """True when two documents agree up to `time_tol` on every time stamp."""
    if abs(a.xmin - b.xmin) > time_tol or abs(a.xmax - b.xmax) > time_tol:
        return False
    if len(a.tiers) != len(b.tiers):
        return False
    for ta, tb in zip(a.tiers, b.tiers):
        if ta.name != tb.name or ta.kind != tb.kind:
            return False
        if abs(ta.xmin - tb.xmin) > time_tol or abs(ta.xmax - tb.xmax) > time_tol:
            return False
        if len(ta.intervals) != len(tb.intervals) or len(ta.points) != len(tb.points):
            return False
        for ia, ib in zip(ta.intervals, tb.intervals):
            if ia.text != ib.text:
                return False
            if abs(ia.xmin - ib.xmin) > time_tol or abs(ia.xmax - ib.xmax) > time_tol:
                return False
        for pa, pb in zip(ta.points, tb.points):
            if pa.text != pb.text or abs(pa.time - pb.time) > time_tol:
                return False
    return True


def _decode(content):
    """Decode raw TextGrid bytes, sniffing the BOM (Praat writes UTF-16 too)."""
    if isinstance(content, str):
        return content.lstrip("﻿")
    for bom, enc in (
        (b"\xef\xbb\xbf", "utf-8-sig"),
        (b"\xff\xfe", "utf-16"),
        (b"\xfe\xff", "utf-16"),
    ):
        if content.startswith(bom):
            return content.decode(enc)
    return content.decode("utf-8")


class _Reader:
    """Sequential token reader over TextGrid lines with 1-based line numbers.

    The long form carries `key = value` lines plus structural lines such as
    `item [1]:` that hold no data; the short form is one bare value per line.
    Quoted strings may contain doubled quotes and embedded newlines in both
    forms.
    """

    def __init__(self, text, long_form):
        self.lines = text.split("\n")
        self.pos = 0  # index of the next line to consume
        self.last_line = 1  # 1-based number of the line last consumed
        self.long_form = long_form

    @property
    def lineno(self):
        return min(self.pos + 1, len(self.lines))

    def _next_data_line(self):
        """Advance to the next line holding data; returns (lineno, payload).

        In long form, payload is the part after '='; structural and blank
        lines are skipped.  In short form, payload is the stripped line.
        """
        while self.pos < len(self.lines):
            raw = self.lines[self.pos]
            self.pos += 1
            stripped = raw.strip()
            if not stripped:
                continue
            if self.long_form:
                if "=" not in raw:
                    continue  # "item [1]:" and friends
                payload = raw.split("=", 1)[1].strip()
                self.last_line = self.pos
                return self.pos, payload
            self.last_line = self.pos
            return self.pos, stripped
        raise TextGridParseError("unexpected end of file", self.lineno)

    def next_number(self):
        line, payload = self._next_data_line()
        token = payload.split()[0] if payload.split() else ""
        try:
            return float(token)
        except ValueError:
            raise TextGridParseError(f"expected a number, got {payload!r}", line) from None

    def next_int(self):
        value = self.next_number()
        if value != int(value):
            raise TextGridParseError(f"expected an integer, got {value}", self.last_line)
        return int(value)

    def next_flag(self):
        """Consume a `tiers? <exists>` / `<exists>` line; True when tiers exist."""
        while self.pos < len(self.lines):
            raw = self.lines[self.pos].strip()
            self.pos += 1
            if raw:
                self.last_line = self.pos
                return "<exists>" in raw
        raise TextGridParseError("unexpected end of file", self.lineno)

    def next_string(self):
        """Read one quoted string, unescaping doubled quotes, spanning lines."""
        # Find the opening quote.
        while self.pos < len(self.lines):
            raw = self.lines[self.pos]
            start_line = self.pos + 1
            idx = raw.find('"')
            if idx < 0:
                if raw.strip() and not self.long_form:
                    raise TextGridParseError(
                        f"expected a quoted string, got {raw.strip()!r}", start_line
                    )
                self.pos += 1
                continue
            self.last_line = start_line
            return self._scan_string(raw, idx + 1, start_line)
        raise TextGridParseError("unexpected end of file", self.lineno)

    def _scan_string(self, raw, start, start_line):
        out = []
        i = start
        while True:
            if i >= len(raw):
                # Label continues on the next line.
                self.pos += 1
                if self.pos >= len(self.lines):
                    raise TextGridParseError("unterminated string", start_line)
                raw = self.lines[self.pos]
                out.append("\n")
                i = 0
                continue
            ch = raw[i]
            if ch == '"':
                if i + 1 < len(raw) and raw[i + 1] == '"':
                    out.append('"')
                    i += 2
                    continue
                self.pos += 1
                return "".join(out)
            out.append(ch)
            i += 1

    def expect_eof(self):
        while self.pos < len(self.lines):
            stripped = self.lines[self.pos].strip()
            # Long form: bare structural lines ("item []:") are not data.
            if stripped and not (self.long_form and "=" not in stripped):
                raise TextGridParseError(f"trailing content: {stripped!r}", self.pos + 1)
            self.pos += 1


def parse_textgrid(content):
    """Parse TextGrid text (str, or bytes in UTF-8/UTF-16) into a TextGridDoc.

    Raises TextGridParseError, with a line number, on malformed input.
    """
    text = _decode(content)
    lines = text.split("\n")

    def _fail(msg, line):
        raise TextGridParseError(msg, line)

    if not lines or "ooTextFile" not in lines[0]:
        _fail('missing \'File type = "ooTextFile"\' header', 1)
    if len(lines) < 2 or "TextGrid" not in lines[1]:
        _fail('missing \'Object class = "TextGrid"\' header', 2)

    # Long form marks its first data line with "xmin ="; short form is bare.
    long_form = False
    for raw in lines[2:]:
        if raw.strip():
            long_form = "=" in raw
            break

    r = _Reader(text, long_form)
    r.pos = 2  # past the two header lines

    xmin = r.next_number()
    xmax = r.next_number()
    if xmin > xmax:
        _fail(f"xmin {xmin} > xmax {xmax}", r.lineno)
    doc = TextGridDoc(xmin=xmin, xmax=xmax)

    if not r.next_flag():
        r.expect_eof()
        return doc
    size = r.next_int()
    if size < 0:
        _fail(f"negative tier count {size}", r.lineno)

    for _ in range(size):
        try:
            cls = r.next_string()
        except TextGridParseError as err:
            raise TextGridParseError(
                f"tier count mismatch: expected {size} tiers, file ended early", err.line
            ) from None
        if cls not in _KIND_BY_CLASS:
            _fail(f"unknown tier class {cls!r}", r.lineno)
        kind = _KIND_BY_CLASS[cls]
        name = r.next_string()
        t_xmin = r.next_number()
        t_xmax = r.next_number()
        if t_xmin > t_xmax:
            _fail(f"tier {name!r}: xmin {t_xmin} > xmax {t_xmax}", r.lineno)
        if t_xmin < xmin - TIME_TOL or t_xmax > xmax + TIME_TOL:
            _fail(f"tier {name!r} bounds outside document bounds", r.lineno)
        tier = Tier(name=name, kind=kind, xmin=t_xmin, xmax=t_xmax)
        count = r.next_int()
        if kind == INTERVAL_TIER:
            prev_end = None
            for _ in range(count):
                i_xmin = r.next_number()
                line_here = r.last_line
                i_xmax = r.next_number()
                i_text = r.next_string()
                if i_xmin > i_xmax:
                    _fail(f"interval with xmin {i_xmin} > xmax {i_xmax}", line_here)
                if prev_end is not None and i_xmin < prev_end - TIME_TOL:
                    _fail(
                        f"non-monotone intervals in tier {name!r}: "
                        f"interval starting at {i_xmin} overlaps previous end {prev_end}",
                        line_here,
                    )
                prev_end = i_xmax
                tier.intervals.append(Interval(i_xmin, i_xmax, i_text))
        else:
            prev_time = None
            for _ in range(count):
                p_time = r.next_number()
                line_here = r.last_line
                p_text = r.next_string()
                if prev_time is not None and p_time < prev_time - TIME_TOL:
                    _fail(f"non-monotone points in tier {name!r}", line_here)
                prev_time = p_time
                tier.points.append(Point(p_time, p_text))
        doc.tiers.append(tier)

    r.expect_eof()
    return doc


def read_textgrid(path):
    """Parse a .TextGrid file (UTF-8 or UTF-16, long or short form)."""
    with open(path, "rb") as fh:
        return parse_textgrid(fh.read())


def _check_doc(doc):
    if doc.xmin > doc.xmax:
        raise TextGridWriteError(f"document xmin {doc.xmin} > xmax {doc.xmax}")
    for tier in doc.tiers:
        if tier.kind not in (INTERVAL_TIER, POINT_TIER):
            raise TextGridWriteError(f"tier {tier.name!r}: unknown kind {tier.kind!r}")
        if tier.xmin > tier.xmax:
            raise TextGridWriteError(f"tier {tier.name!r}: xmin > xmax")
        if tier.xmin < doc.xmin - TIME_TOL or tier.xmax > doc.xmax + TIME_TOL:
            raise TextGridWriteError(f"tier {tier.name!r}: bounds outside document")
        prev = None
        for iv in tier.intervals:
            if iv.xmin > iv.xmax:
                raise TextGridWriteError(
                    f"tier {tier.name!r}: interval xmin {iv.xmin} > xmax {iv.xmax}"
                )
            if prev is not None and iv.xmin < prev - TIME_TOL:
                raise TextGridWriteError(f"tier {tier.name!r}: overlapping intervals")
            prev = iv.xmax
        prev = None
        for pt in tier.points:
            if prev is not None and pt.time < prev - TIME_TOL:
                raise TextGridWriteError(f"tier {tier.name!r}: points out of order")
            prev = pt.time


def _num(x):
    """Shortest decimal text that parses back to the same float."""
    return repr(float(x))


def _quote(s):
    return '"' + s.replace('"', '""') + '"'


def serialize_textgrid(doc):
    """Emit long-form TextGrid text for a valid document.

    Raises TextGridWriteError when the document violates its invariants.
    """
    _check_doc(doc)
    out = [
        'File type = "ooTextFile"',
        'Object class = "TextGrid"',
        "",
        f"xmin = {_num(doc.xmin)}",
        f"xmax = {_num(doc.xmax)}",
        "tiers? <exists>",
        f"size = {len(doc.tiers)}",
        "item []:",
    ]
    for ti, tier in enumerate(doc.tiers, 1):
        out.append(f"    item [{ti}]:")
        out.append(f'        class = {_quote(_CLASS_BY_KIND[tier.kind])}')
        out.append(f"        name = {_quote(tier.name)}")
        out.append(f"        xmin = {_num(tier.xmin)}")
        out.append(f"        xmax = {_num(tier.xmax)}")
        if tier.kind == INTERVAL_TIER:
            out.append(f"        intervals: size = {len(tier.intervals)}")
            for ii, iv in enumerate(tier.intervals, 1):
                out.append(f"        intervals [{ii}]:")
                out.append(f"            xmin = {_num(iv.xmin)}")
                out.append(f"            xmax = {_num(iv.xmax)}")
                out.append(f"            text = {_quote(iv.text)}")
        else:
            out.append(f"        points: size = {len(tier.points)}")
            for pi, pt in enumerate(tier.points, 1):
                out.append(f"        points [{pi}]:")
                out.append(f"            number = {_num(pt.time)}")
                out.append(f"            mark = {_quote(pt.text)}")
    return "\n".join(out) + "\n"


def write_textgrid(doc, path, encoding="utf-8"):
    with open(path, "w", encoding=encoding, newline="\n") as fh:
        fh.write(serialize_textgrid(doc))
