"""Read and write term sheets in a flat ``key = value`` text format.

Grammar, one entry per line::

    # comment
    issue_date = 2009-01-06
    maturity_date = 2014-01-06
    face = 100
    coupon_rate = 0.08
    coupon_frequency = 2            # generates unadjusted dates from maturity
    coupon.1.date = 2009-07-06      # ...or list them explicitly
    conversion.1.window = 2009-01-06/2014-01-06
    conversion.1.ratio = 1
    call.1.window = 2011-01-06/2014-01-06
    call.1.price = 110
    put.1.date = 2012-01-06
    put.1.price = 105
    recovery = 0.4
    redemption = 100                # optional, defaults to face
    day_count = ACT/365

Dates are ISO-8601 and windows are ISO-8601 intervals ``start/end``, both
ends included.  Indexed entries (``call.N.*`` and so on) may appear in any
order; they are sorted by index.
"""

from __future__ import annotations

import re
from collections import defaultdict
from datetime import date
from pathlib import Path

from .instrument import CallPeriod, ConversionPeriod, ConvertibleTerms, PutDate, coupon_schedule

_SCALARS = {"issue_date", "maturity_date", "face", "coupon_rate", "coupon_frequency", "recovery", "redemption", "day_count"}
_INDEXED = {
    "coupon": {"date"},
    "conversion": {"window", "ratio"},
    "call": {"window", "price"},
    "put": {"date", "price"},
}
_INDEXED_KEY = re.compile(r"^([a-z_]+)\.(\d+)\.([a-z_]+)$")


class TermSheetError(ValueError):
    token = "CONFIG"

    def __init__(self, message: str, source: str = "<string>", line: int | None = None, key: str | None = None):
        where = source if line is None else f"{source}:{line}"
        if key:
            where = f"{where}: {key}"
        super().__init__(f"{where}: {message}")
        self.source, self.line, self.key = source, line, key


def _parse_date(text: str) -> date:
    return date.fromisoformat(text)


def _parse_window(text: str) -> tuple[date, date]:
    start, sep, end = text.partition("/")
    if not sep:
        raise ValueError("expected an interval 'start/end'")
    return _parse_date(start.strip()), _parse_date(end.strip())


def parse_terms(text: str, source: str = "<string>") -> ConvertibleTerms:
    scalars: dict[str, tuple[str, int]] = {}
    indexed: dict[str, dict[int, dict[str, tuple[str, int]]]] = defaultdict(lambda: defaultdict(dict))

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key or not value:
            raise TermSheetError("expected 'key = value'", source, lineno)
        m = _INDEXED_KEY.match(key)
        if m:
            group, idx, field = m.group(1), int(m.group(2)), m.group(3)
            if group not in _INDEXED or field not in _INDEXED[group]:
                raise TermSheetError("unknown key", source, lineno, key)
            if field in indexed[group][idx]:
                raise TermSheetError("duplicate key", source, lineno, key)
            indexed[group][idx][field] = (value, lineno)
        elif key in _SCALARS:
            if key in scalars:
                raise TermSheetError("duplicate key", source, lineno, key)
            scalars[key] = (value, lineno)
        else:
            raise TermSheetError("unknown key", source, lineno, key)

    def get(key, conv, default=None, required=False):
        if key not in scalars:
            if required:
                raise TermSheetError("missing required key", source, None, key)
            return default
        value, lineno = scalars[key]
        try:
            return conv(value)
        except ValueError as exc:
            raise TermSheetError(str(exc), source, lineno, key) from None

    def entries(group):
        out = []
        for idx in sorted(indexed.get(group, {})):
            fields = indexed[group][idx]
            missing = _INDEXED[group] - fields.keys()
            if missing:
                raise TermSheetError(f"missing {', '.join(sorted(missing))}", source, None, f"{group}.{idx}")
            out.append((idx, fields))
        return out

    def field(group, idx, fields, name, conv):
        value, lineno = fields[name]
        try:
            return conv(value)
        except ValueError as exc:
            raise TermSheetError(str(exc), source, lineno, f"{group}.{idx}.{name}") from None

    issue = get("issue_date", _parse_date, required=True)
    maturity = get("maturity_date", _parse_date, required=True)
    freq = get("coupon_frequency", int)
    explicit = tuple(field("coupon", i, f, "date", _parse_date) for i, f in entries("coupon"))
    if freq is not None and explicit:
        raise TermSheetError("give coupon_frequency or coupon.N.date, not both", source, scalars["coupon_frequency"][1], "coupon_frequency")
    if freq is not None:
        try:
            coupon_dates = coupon_schedule(issue, maturity, freq)
        except ValueError as exc:
            raise TermSheetError(str(exc), source, scalars["coupon_frequency"][1], "coupon_frequency") from None
    else:
        coupon_dates = explicit

    conversion = []
    for i, f in entries("conversion"):
        start, end = field("conversion", i, f, "window", _parse_window)
        conversion.append(ConversionPeriod(start, end, field("conversion", i, f, "ratio", float)))
    calls = []
    for i, f in entries("call"):
        start, end = field("call", i, f, "window", _parse_window)
        calls.append(CallPeriod(start, end, field("call", i, f, "price", float)))
    puts = [
        PutDate(field("put", i, f, "date", _parse_date), field("put", i, f, "price", float))
        for i, f in entries("put")
    ]

    try:
        return ConvertibleTerms(
            issue_date=issue,
            maturity_date=maturity,
            face=get("face", float, 100.0),
            coupon_rate=get("coupon_rate", float, 0.0),
            coupon_dates=coupon_dates,
            conversion=tuple(conversion),
            calls=tuple(calls),
            puts=tuple(puts),
            recovery=get("recovery", float, 0.0),
            redemption=get("redemption", float),
            day_count=get("day_count", str, "ACT/365"),
        )
    except TermSheetError:
        raise
    except ValueError as exc:
        raise TermSheetError(str(exc), source) from None


def load_terms(path: str | Path) -> ConvertibleTerms:
    path = Path(path)
    return parse_terms(path.read_text(), source=str(path))


def dump_terms(terms: ConvertibleTerms) -> str:
    """Serialise with explicit coupon dates; floats use their shortest repr."""
    lines = [
        f"issue_date = {terms.issue_date.isoformat()}",
        f"maturity_date = {terms.maturity_date.isoformat()}",
        f"face = {terms.face!r}",
        f"coupon_rate = {terms.coupon_rate!r}",
        f"recovery = {terms.recovery!r}",
        f"day_count = {terms.day_count}",
    ]
    if terms.redemption is not None:
        lines.append(f"redemption = {terms.redemption!r}")
    for i, d in enumerate(terms.coupon_dates, start=1):
        lines.append(f"coupon.{i}.date = {d.isoformat()}")
    for i, p in enumerate(terms.conversion, start=1):
        lines.append(f"conversion.{i}.window = {p.start.isoformat()}/{p.end.isoformat()}")
        lines.append(f"conversion.{i}.ratio = {p.ratio!r}")
    for i, c in enumerate(terms.calls, start=1):
        lines.append(f"call.{i}.window = {c.start.isoformat()}/{c.end.isoformat()}")
        lines.append(f"call.{i}.price = {c.price!r}")
    for i, p in enumerate(terms.puts, start=1):
        lines.append(f"put.{i}.date = {p.date.isoformat()}")
        lines.append(f"put.{i}.price = {p.price!r}")
    return "\n".join(lines) + "\n"
