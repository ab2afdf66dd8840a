"""Probability models for matches and the small combinators around them."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

from ..errors import ModelError, QueryError


@dataclass(frozen=True)
class CPT:
    """First-order conditional table over event types: (prev, next) -> P(next | prev)."""

    entries: Mapping[tuple[str, str], float] = field(default_factory=dict)

    def __post_init__(self):
        for key, p in self.entries.items():
            if not (0.0 <= p <= 1.0):
                raise ModelError("BAD_CPT", f"CPT entry {key} = {p} not in [0, 1]")

    @classmethod
    def from_mapping(cls, raw: Mapping[str, float]) -> "CPT":
        entries = {}
        for key, p in raw.items():
            if "->" not in key:
                raise ModelError("BAD_CPT", f"CPT key {key!r} must look like 'prev->next'")
            a, b = (s.strip() for s in key.split("->", 1))
            if isinstance(p, bool) or not isinstance(p, (int, float)):
                raise ModelError("BAD_CPT", f"CPT entry {key!r} is not a number")
            entries[(a, b)] = float(p)
        return cls(entries)

    @classmethod
    def load(cls, path) -> "CPT":
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except (OSError, ValueError) as exc:
            raise ModelError("BAD_CPT", f"cannot read CPT file: {exc}") from exc
        if not isinstance(raw, dict):
            raise ModelError("BAD_CPT", "CPT file must hold a JSON object")
        return cls.from_mapping(raw)

    def get(self, prev: str, nxt: str):
        return self.entries.get((prev, nxt))

    def types(self) -> set[str]:
        return {t for pair in self.entries for t in pair}

    def __bool__(self):
        return bool(self.entries)


@dataclass(frozen=True)
class ProbModelConfig:
    kind: str = "independent"  # or "markov"
    cpt: CPT = field(default_factory=CPT)
    decay: float | None = None
    monotone: bool = True

    def __post_init__(self):
        if self.kind not in ("independent", "markov"):
            raise ModelError("BAD_MODEL", f"unknown model kind {self.kind!r}")
        if self.decay is not None and not (0.0 < self.decay <= 1.0):
            raise ModelError("BAD_DECAY", f"decay {self.decay} not in (0, 1]")


def require_monotone(model: ProbModelConfig) -> None:
    if not model.monotone:
        raise ModelError("MODEL_NOT_MONOTONE", "threshold pruning needs a monotone model")


def _alt_prob(ev, alt: int) -> float:
    return ev.alternatives[alt].prob


def match_prob_independent(selected: Sequence[tuple[Any, int]], neg_factor: float = 1.0) -> float:
    """Product of the chosen alternatives' probabilities (times negation factors)."""
    p = 1.0
    for ev, alt in selected:
        p *= _alt_prob(ev, alt)
    return p * neg_factor


def match_prob_markov(selected: Sequence[tuple[Any, int]], cpt: CPT, neg_factor: float = 1.0) -> float:
    """Chain over adjacent selected events; falls back to marginals without a CPT entry.

    A CPT entry replaces the occurrence probability of the successor; with
    several alternatives it is shared out in proportion to their marginals.
    """
    p = 1.0
    prev = None
    for ev, alt in selected:
        marg = _alt_prob(ev, alt)
        entry = cpt.get(prev.event_type, ev.event_type) if prev is not None else None
        if entry is None:
            p *= marg
        else:
            occ = ev.occurrence_prob
            p *= entry * (marg / occ) if occ > 0 else 0.0
        prev = ev
    return p * neg_factor


def apply_decay(p: float, intervening: int, decay: float | None) -> float:
    if decay is None or intervening <= 0:
        return p
    return p * decay ** intervening


def apply_rule_prob(rule_prob: float, match_prob: float) -> float:
    return rule_prob * match_prob


def combine_noisy_or(probs: Iterable[float]) -> float:
    q = 1.0
    for p in probs:
        q *= 1.0 - p
    return 1.0 - q


def map_query(matches: Sequence[Any]):
    """Most probable match; ties go to the earliest last event, then smallest ids.

    Items need ``prob``, ``last_ts`` and ``event_ids`` attributes.
    """
    if not matches:
        raise QueryError("EMPTY_MATCH_SET", "no matches to choose from")
    return min(matches, key=lambda m: (-m.prob, m.last_ts, tuple(m.event_ids)))


def within(a: float, b: float, tol: float = 1e-9) -> bool:
    return math.isclose(a, b, rel_tol=0.0, abs_tol=tol)
