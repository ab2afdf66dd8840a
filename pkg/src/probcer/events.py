"""Event data model: probabilistic simple events, histories and CE instances.

A :class:`ProbEvent` is an annotated disjunction: a list of mutually exclusive
alternatives (attribute assignments with probabilities) plus an implicit
non-occurrence alternative carrying the residual mass.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator, Mapping, Sequence

from .errors import EventValidationError, ModelError

PROB_TOL = 1e-9
NON_OCCURRENCE = -1

AttrValue = "str | int | float | bool"
_ATTR_TYPES = (str, int, float, bool)


def attr_tag(value: Any) -> str:
    """Type tag used for comparisons; int and float share the numeric tag."""
    if isinstance(value, bool):
        return "bool"
    if isinstance(value, (int, float)):
        return "num"
    if isinstance(value, str):
        return "str"
    raise EventValidationError("BAD_ATTR_VALUE", f"unsupported attribute value {value!r}")


def values_equal(a: Any, b: Any) -> bool:
    """Equality that never conflates tags (``1 == True`` is false here)."""
    ta, tb = type(a), type(b)
    if ta is tb:
        return a == b
    if ta is bool or tb is bool or ta is str or tb is str:
        return False
    return a == b


@dataclass(frozen=True, slots=True)
class Alternative:
    attrs: tuple[tuple[str, Any], ...]
    prob: float

    @classmethod
    def of(cls, attrs: Mapping[str, Any] | None, prob: float) -> "Alternative":
        return cls(tuple((attrs or {}).items()), float(prob))

    @property
    def values(self) -> tuple:
        return tuple(v for _, v in self.attrs)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(k for k, _ in self.attrs)

    def as_dict(self) -> dict[str, Any]:
        return dict(self.attrs)


@dataclass(frozen=True, slots=True)
class ProbEvent:
    event_type: str
    ts: int
    alternatives: tuple[Alternative, ...]
    id: str

    @property
    def occurrence_prob(self) -> float:
        return math.fsum(a.prob for a in self.alternatives)

    @property
    def non_occurrence_prob(self) -> float:
        return max(0.0, 1.0 - self.occurrence_prob)

    @property
    def is_crisp(self) -> bool:
        return len(self.alternatives) == 1 and self.alternatives[0].prob == 1.0

    def choice_prob(self, choice: int) -> float:
        if choice == NON_OCCURRENCE:
            return self.non_occurrence_prob
        return self.alternatives[choice].prob


def validate_event(raw: Mapping[str, Any] | ProbEvent, default_id: str | None = None) -> ProbEvent:
    """Build a validated :class:`ProbEvent` from a decoded record.

    Accepts the full form ``{"type", "ts", "alts": [{"args", "prob"}]}`` and
    the single-alternative shorthand ``{"type", "ts", "args", "prob"}``
    (``prob`` defaults to 1). Passing a ProbEvent re-validates it.
    """
    if isinstance(raw, ProbEvent):
        raw = event_to_record(raw)
    if not isinstance(raw, Mapping):
        raise EventValidationError("MISSING_FIELD", "event record must be an object")
    for key in ("type", "ts"):
        if key not in raw:
            raise EventValidationError("MISSING_FIELD", f"missing {key!r}", field=key)
    etype = raw["type"]
    if not isinstance(etype, str) or not etype:
        raise EventValidationError("MISSING_FIELD", "event type must be a non-empty string", field="type")
    ts = raw["ts"]
    if isinstance(ts, bool) or not isinstance(ts, int) or ts < 0:
        raise EventValidationError("BAD_TIMESTAMP", f"timestamp must be a non-negative integer, got {ts!r}")

    if "alts" in raw:
        alts_raw = raw["alts"]
        if not isinstance(alts_raw, list) or not alts_raw:
            raise EventValidationError("MISSING_FIELD", "'alts' must be a non-empty list", field="alts")
    else:
        alts_raw = [{"args": raw.get("args", {}), "prob": raw.get("prob", 1.0)}]

    alts = []
    keys = None
    for a in alts_raw:
        if not isinstance(a, Mapping):
            raise EventValidationError("MISSING_FIELD", "alternative must be an object")
        args = a.get("args", {})
        if not isinstance(args, Mapping):
            raise EventValidationError("MISSING_FIELD", "'args' must be an object", field="args")
        prob = a.get("prob", 1.0)
        if isinstance(prob, bool) or not isinstance(prob, (int, float)) or math.isnan(prob):
            raise EventValidationError("BAD_PROB", f"probability must be a number, got {prob!r}")
        if prob < 0:
            raise EventValidationError("NEGATIVE_PROB", f"negative probability {prob}")
        if prob > 1 + PROB_TOL:
            raise EventValidationError("PROB_SUM_EXCEEDED", f"probability {prob} exceeds 1")
        for v in args.values():
            if not isinstance(v, _ATTR_TYPES):
                raise EventValidationError("BAD_ATTR_VALUE", f"unsupported attribute value {v!r}")
        if keys is None:
            keys = tuple(args.keys())
        elif tuple(args.keys()) != keys:
            raise EventValidationError("MIXED_ATTR_KEYS", f"alternatives disagree on attributes: {keys} vs {tuple(args.keys())}")
        alts.append(Alternative.of(args, min(float(prob), 1.0)))

    total = math.fsum(a.prob for a in alts)
    if total > 1 + PROB_TOL:
        raise EventValidationError("PROB_SUM_EXCEEDED", f"alternative probabilities sum to {total}")

    eid = raw.get("id", default_id)
    if eid is None:
        raise EventValidationError("MISSING_FIELD", "event has no id and none was assigned", field="id")
    return ProbEvent(etype, ts, tuple(alts), str(eid))


def event_to_record(ev: ProbEvent) -> dict:
    return {
        "id": ev.id,
        "type": ev.event_type,
        "ts": ev.ts,
        "alts": [{"args": a.as_dict(), "prob": a.prob} for a in ev.alternatives],
    }


def make_event(etype: str, ts: int, prob: float = 1.0, id: str | None = None, **args: Any) -> ProbEvent:
    """Convenience constructor for a single-alternative event."""
    return validate_event({"type": etype, "ts": ts, "args": args, "prob": prob}, default_id=id or f"{etype}@{ts}")


def history_space_size(events: Sequence[ProbEvent]) -> int:
    size = 1
    for ev in events:
        size *= len(ev.alternatives) + 1
    return size


@dataclass(frozen=True)
class EventHistory:
    """One joint choice (alternative index or NON_OCCURRENCE) per event id."""

    choices: Mapping[str, int] = field(default_factory=dict)

    def choice(self, event_id: str) -> int:
        return self.choices[event_id]


def history_prob(h: EventHistory, events: Sequence[ProbEvent]) -> float:
    p = 1.0
    for ev in events:
        if ev.id not in h.choices:
            raise ModelError("INCOMPLETE_HISTORY", f"no choice for event {ev.id}")
        p *= ev.choice_prob(h.choices[ev.id])
    return p


def enumerate_histories(events: Sequence[ProbEvent]) -> Iterator[EventHistory]:
    """Yield every history; alternative indices first, non-occurrence last."""
    ranges = [list(range(len(ev.alternatives))) + [NON_OCCURRENCE] for ev in events]
    ids = [ev.id for ev in events]
    for combo in itertools.product(*ranges):
        yield EventHistory(dict(zip(ids, combo)))


@dataclass(frozen=True)
class CEInstance:
    ce_type: str
    attrs: tuple[tuple[str, Any], ...]
    ts: int
    prob: float
    contributing_ids: tuple[str, ...] = ()
    lineage: Any = field(default=None, compare=False, repr=False)

    @property
    def key(self) -> tuple:
        return instance_key(self.ce_type, self.attrs, self.ts)

    def to_record(self, with_prob: bool = True) -> dict:
        rec: dict[str, Any] = {"type": self.ce_type, "ts": self.ts, "args": dict(self.attrs)}
        if with_prob:
            rec["prob"] = float(f"{self.prob:.9g}")
            rec["ids"] = list(self.contributing_ids)
        return rec


def instance_key(ce_type: str, attrs: Iterable[tuple[str, Any]], ts: int) -> tuple:
    """Hashable identity of a CE instance; values carry their tag."""
    return (ce_type, tuple((k, attr_tag(v), v) for k, v in attrs), ts)
