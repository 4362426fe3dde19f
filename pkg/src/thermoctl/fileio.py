"""Protocol files and CSV/JSON writers.

Protocol file (``# thermoctl-protocol v1`` header)::

    # thermoctl-protocol v1
    # interp: linear            (optional; ``cubic`` also accepted)
    t,E
    0.0,1.5
    0.0,2.0                     <- repeated t: quench 1.5 -> 2.0
    1.0,2.5

or piecewise-constant rows ``segment,t_start,t_end,E``. Lines starting with
``#`` are comments; a non-numeric column-name line is skipped.
"""

from __future__ import annotations

import csv
import io
import json
import math

import numpy as np

from .core import Protocol, Quench, Segment
from .errors import DomainError, ParseError

HEADER = "# thermoctl-protocol v1"


def fmt(x) -> str:
    """Locale-independent float with 17 significant digits."""
    if x is None:
        return ""
    return "%.17g" % x


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _clean(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return obj


def dumps_json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True, default=_json_default) + "\n"


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _floats(fields, lineno):
    try:
        values = [float(x) for x in fields]
    except ValueError:
        raise ParseError(f"expected numbers, got {','.join(fields)!r}", lineno) from None
    if not all(math.isfinite(v) for v in values):
        raise ParseError("values must be finite", lineno)
    return values


def parse_protocol(text: str) -> Protocol:
    """Parse the protocol file format into a :class:`Protocol`."""
    lines = text.splitlines()
    interp = "linear"
    samples, segments = [], []
    seen_header = False
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        if not seen_header:
            if line != HEADER:
                raise ParseError(f"first line must be {HEADER!r}", lineno)
            seen_header = True
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("interp:"):
                interp = body.split(":", 1)[1].strip()
                if interp not in ("linear", "cubic"):
                    raise ParseError(f"unknown interpolation {interp!r}", lineno)
            continue
        fields = [f.strip() for f in line.split(",")]
        if fields in (["t", "E"], ["segment", "t_start", "t_end", "E"]):
            continue
        if len(fields) == 2:
            samples.append((lineno, *_floats(fields, lineno)))
        elif len(fields) == 4:
            if fields[0] != "segment":
                _floats(fields[:1], lineno)
            segments.append((lineno, *_floats(fields[1:], lineno)))
        else:
            raise ParseError(f"expected 2 or 4 comma-separated fields, got {len(fields)}", lineno)
    if not seen_header:
        raise ParseError("empty protocol file", 1)
    if samples and segments:
        raise ParseError("cannot mix t,E rows with segment rows", segments[0][0])
    try:
        if segments:
            return _from_segment_rows(segments)
        if samples:
            return _from_sample_rows(samples, interp)
    except DomainError as exc:
        raise ParseError(str(exc)) from exc
    raise ParseError("no data rows", len(lines))


def _from_segment_rows(rows):
    edges, levels = [], []
    for lineno, t0, t1, E in rows:
        if not t1 > t0:
            raise ParseError("segment must have t_end > t_start", lineno)
        if edges and t0 != edges[-1]:
            raise ParseError(f"segment starts at {t0!r}, previous ended at {edges[-1]!r}", lineno)
        if not edges:
            if t0 != 0.0:
                raise ParseError("first segment must start at t = 0", lineno)
            edges.append(t0)
        edges.append(t1)
        levels.append(E)
    return Protocol.piecewise_constant(edges, levels)


def _from_sample_rows(rows, interp):
    # group consecutive rows sharing a time
    groups = []
    for lineno, t, E in rows:
        if groups and t == groups[-1][0]:
            groups[-1][1].append(E)
            if len(groups[-1][1]) > 2:
                raise ParseError("at most two rows may share a time (one quench)", lineno)
        else:
            if groups and t < groups[-1][0]:
                raise ParseError("times must be nondecreasing", lineno)
            groups.append((t, [E], lineno))
    if groups[0][0] != 0.0:
        raise ParseError("protocol must start at t = 0", groups[0][2])
    if len(groups) < 2:
        raise ParseError("need samples at two distinct times", groups[0][2])
    segments, quenches = [], []
    times, energies = [], []
    last = len(groups) - 1
    for k, (t, values, lineno) in enumerate(groups):
        arrive, leave = values[0], values[-1]
        if k == 0:
            if arrive != leave:
                quenches.append(Quench(t, arrive, leave))
            times, energies = [t], [leave]
            continue
        times.append(t)
        energies.append(arrive)
        if arrive != leave:
            quenches.append(Quench(t, arrive, leave))
        if k == last or arrive != leave:
            kind = interp if len(times) >= 4 else "linear"
            segments.append(Segment(times, energies, kind))
            times, energies = [t], [leave]
    return Protocol(tuple(segments), tuple(quenches))


def read_protocol(path) -> Protocol:
    with open(path, encoding="utf-8") as fh:
        return parse_protocol(fh.read())


def format_protocol(protocol: Protocol) -> str:
    """Serialise a protocol with smooth segments as ``t,E`` rows (quenches as repeated t)."""
    interp = {s.interp for s in protocol.segments}
    if interp == {"constant"}:
        rows = [
            f"segment,{fmt(s.t_start)},{fmt(s.t_end)},{fmt(s.E_start)}" for s in protocol.segments
        ]
        return "\n".join([HEADER, "segment,t_start,t_end,E", *rows]) + "\n"
    out = [HEADER]
    if "cubic" in interp:
        out.append("# interp: cubic")
    out.append("t,E")
    q_at = {q.time: q for q in protocol.quenches}
    first = protocol.segments[0]
    if 0.0 in q_at:
        out.append(f"{fmt(0.0)},{fmt(q_at[0.0].E_before)}")
    for k, seg in enumerate(protocol.segments):
        start = 0 if k == 0 else 1
        for t, E in zip(seg.times[start:], seg.energies[start:]):
            out.append(f"{fmt(t)},{fmt(E)}")
        if k + 1 < len(protocol.segments):
            out.append(f"{fmt(seg.t_end)},{fmt(protocol.segments[k + 1].E_start)}")
    tau = protocol.duration
    if tau in q_at:
        out.append(f"{fmt(tau)},{fmt(q_at[tau].E_after)}")
    del first
    return "\n".join(out) + "\n"
