"""JSON-lines reading and writing for event streams and CE outputs."""

from __future__ import annotations

import json
from typing import IO, Iterable, Iterator

from .errors import EventValidationError, ProbCERError, StreamError
from .events import CEInstance, ProbEvent, event_to_record, validate_event


def _lines(path_or_fh):
    if hasattr(path_or_fh, "read"):
        yield from enumerate(path_or_fh, 1)
        return
    try:
        fh = open(path_or_fh)
    except OSError as exc:
        raise ProbCERError("CANNOT_OPEN", f"cannot open {path_or_fh}: {exc.strerror}", path=str(path_or_fh)) from exc
    with fh:
        yield from enumerate(fh, 1)


def iter_events(source) -> Iterator[ProbEvent]:
    """Validated events in file order.

    Events without an ``id`` get ``e<n>`` where n counts events read so far.
    Malformed or invalid lines are stream errors carrying the line number.
    """
    seen: set[str] = set()
    n = 0
    for lineno, line in _lines(source):
        if not line.strip():
            continue
        n += 1
        try:
            raw = json.loads(line)
        except ValueError as exc:
            raise StreamError("MALFORMED_EVENT", f"line {lineno}: {exc}", line=lineno) from exc
        try:
            ev = validate_event(raw, default_id=f"e{n}")
        except EventValidationError as exc:
            raise StreamError(exc.code, f"line {lineno}: {exc.message}", line=lineno) from exc
        if ev.id in seen:
            raise StreamError("DUPLICATE_EVENT_ID", f"line {lineno}: id {ev.id!r} repeats", line=lineno)
        seen.add(ev.id)
        yield ev


def read_events(source) -> list[ProbEvent]:
    return list(iter_events(source))


def write_events(events: Iterable[ProbEvent], fh: IO[str]) -> None:
    for ev in events:
        fh.write(json.dumps(event_to_record(ev), separators=(",", ":")) + "\n")


def dumps_instance(inst: CEInstance, with_prob: bool = True) -> str:
    return json.dumps(inst.to_record(with_prob), separators=(",", ":"))


def write_instances(instances: Iterable[CEInstance], fh: IO[str], with_prob: bool = True) -> int:
    n = 0
    for inst in instances:
        fh.write(dumps_instance(inst, with_prob) + "\n")
        n += 1
    return n


def parse_instance(raw) -> CEInstance:
    """Inverse of :meth:`CEInstance.to_record`; ``prob`` and ``ids`` are optional (gold labels)."""
    if not isinstance(raw, dict):
        raise ProbCERError("MALFORMED_LINE", "CE record must be an object")
    ce_type, ts, args = raw.get("type"), raw.get("ts"), raw.get("args", {})
    if not isinstance(ce_type, str) or isinstance(ts, bool) or not isinstance(ts, int) or not isinstance(args, dict):
        raise ProbCERError("MALFORMED_LINE", "CE record needs a string type, an integer ts and an args object")
    prob = raw.get("prob", 1.0)
    if isinstance(prob, bool) or not isinstance(prob, (int, float)) or not 0.0 <= prob <= 1.0:
        raise ProbCERError("MALFORMED_LINE", f"bad probability {prob!r}")
    ids = raw.get("ids", [])
    if not isinstance(ids, list):
        raise ProbCERError("MALFORMED_LINE", "'ids' must be a list")
    return CEInstance(ce_type, tuple(args.items()), ts, float(prob), tuple(str(i) for i in ids))


def read_instances(source) -> list[CEInstance]:
    out = []
    for lineno, line in _lines(source):
        if not line.strip():
            continue
        try:
            out.append(parse_instance(json.loads(line)))
        except ValueError as exc:
            raise ProbCERError("MALFORMED_LINE", f"line {lineno}: {exc}", line=lineno) from exc
        except ProbCERError as exc:
            raise ProbCERError(exc.code, f"line {lineno}: {exc.message}", line=lineno) from exc
    return out
