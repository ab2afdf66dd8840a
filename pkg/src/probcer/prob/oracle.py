"""Possible-worlds oracle.

Enumerates every event history of a stream, weights it (independently or
with the chain-factored Markov variant) and evaluates the reference
semantics on it. Histories that agree on the events the rules can see are
grouped, so the reference evaluator runs once per distinct projection
while the weighting still covers the whole space.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ..errors import CapacityError, QueryError
from ..events import NON_OCCURRENCE, ProbEvent, history_space_size, instance_key
from ..lang import ast as A
from ..semantics import ce_distribution, naive_matches, rule_levels, world_of
from . import _kernels as K
from .models import ProbModelConfig

ORACLE_CAP = 2 ** 22


@dataclass
class OracleResult:
    marginals: dict
    histories: int
    projections: int

    def marginal(self, ce_type: str, attrs, ts: int) -> float:
        return self.marginals.get(instance_key(ce_type, tuple(attrs), ts), 0.0)


class _Space:
    """History weights over the whole stream plus projection onto ``relevant``."""

    def __init__(self, stream: Sequence[ProbEvent], relevant: Sequence[int], model: ProbModelConfig | None,
                 cap: int, numba=None):
        size = history_space_size(stream)
        if size > cap:
            raise CapacityError("SPACE_TOO_LARGE", f"{size} histories exceed the oracle cap {cap}",
                                histories=size, cap=cap)
        self.size = size
        radix = np.array([len(ev.alternatives) + 1 for ev in stream], dtype=np.int64)
        width = int(radix.max()) if len(radix) else 1
        probs = np.zeros((len(stream), width))
        for i, ev in enumerate(stream):
            for j, a in enumerate(ev.alternatives):
                probs[i, j] = a.prob
            probs[i, len(ev.alternatives)] = ev.non_occurrence_prob
        stride = np.zeros(len(stream), dtype=np.int64)
        s = 1
        for i in relevant:
            stride[i] = s
            s *= int(radix[i])
        self.n_proj = s
        self.relevant = list(relevant)
        model = model or ProbModelConfig()
        if model.kind == "markov" and model.cpt:
            types = sorted({ev.event_type for ev in stream} | model.cpt.types())
            tix = {t: k for k, t in enumerate(types)}
            cpt = np.full((len(types), len(types)), np.nan)
            for (a, b), p in model.cpt.entries.items():
                cpt[tix[a], tix[b]] = p
            type_idx = np.array([tix[ev.event_type] for ev in stream], dtype=np.int64)
            self.weights, self.proj = K.markov_history_weights(radix, probs, stride, type_idx, cpt, numba=numba)
        else:
            self.weights, self.proj = K.history_weights(radix, probs, stride, numba=numba)
        self.stream = stream

    def projections(self):
        """Yield (index, choices) per projection; choices use NON_OCCURRENCE."""
        ranges = [range(len(self.stream[i].alternatives) + 1) for i in self.relevant]
        # first relevant event is the least significant digit
        for idx, digits in enumerate(itertools.product(*reversed(ranges))):
            digits = digits[::-1]
            choices = {}
            for i, d in zip(self.relevant, digits):
                choices[i] = NON_OCCURRENCE if d == len(self.stream[i].alternatives) else d
            yield idx, choices

    def world(self, choices):
        events = [self.stream[i] for i in self.relevant]
        return world_of(events, [choices[i] for i in self.relevant])

    def expect(self, q: np.ndarray, numba=None) -> float:
        """E[q(projection)] with a fixed summation order."""
        return K.pairwise_sum(self.weights * q[self.proj], numba=numba)


def _sde_types(ruleset: A.RuleSet) -> set[str]:
    heads = ruleset.ce_types
    return {a.event_type for r in ruleset.rules for a in A.atoms(r.body)} - heads


def oracle_marginals(stream: Sequence[ProbEvent], ruleset: A.RuleSet, model: ProbModelConfig | None = None,
                     cap: int = ORACLE_CAP, numba=None) -> OracleResult:
    """Exact marginal of every CE instance recognizable on some history."""
    types = _sde_types(ruleset)
    relevant = [i for i, ev in enumerate(stream) if ev.event_type in types]
    space = _Space(stream, relevant, model, cap, numba)
    levels = rule_levels(ruleset)
    per_proj: list[dict] = []
    keys: dict = {}
    for idx, choices in space.projections():
        dist = ce_distribution(ruleset, space.world(choices), levels)
        per_proj.append(dist)
        for k in dist:
            keys.setdefault(k, None)
    out = {}
    for k in sorted(keys, key=repr):
        q = np.array([d.get(k, 0.0) for d in per_proj])
        out[k] = space.expect(q, numba)
    return OracleResult(out, space.size, space.n_proj)


def oracle_marginal(stream, ruleset: A.RuleSet, ce_type: str, attrs, ts: int,
                    model: ProbModelConfig | None = None, cap: int = ORACLE_CAP) -> float:
    if ce_type not in ruleset.ce_types:
        raise QueryError("NO_SUCH_CE", f"no rule defines {ce_type!r}")
    return oracle_marginals(stream, ruleset, model, cap).marginal(ce_type, attrs, ts)


def oracle_match_probs(stream: Sequence[ProbEvent], ruleset: A.RuleSet, cap: int = ORACLE_CAP) -> dict:
    """P(match with this key exists) per (rule index, match key), SDE-level rules only."""
    types = _sde_types(ruleset)
    relevant = [i for i, ev in enumerate(stream) if ev.event_type in types]
    space = _Space(stream, relevant, None, cap)
    per_proj = []
    keys: dict = {}
    heads = ruleset.ce_types
    rules = [r for r in ruleset.rules if not any(a.event_type in heads for a in A.atoms(r.body))]
    for idx, choices in space.projections():
        world = space.world(choices)
        found = set()
        for r in rules:
            for m in naive_matches(r, world):
                found.add((r.index, m.key))
        per_proj.append(found)
        for k in found:
            keys.setdefault(k, None)
    out = {}
    for k in keys:
        q = np.array([1.0 if k in s else 0.0 for s in per_proj])
        out[k] = space.expect(q)
    return out


def oracle_conjunction_prob(stream: Sequence[ProbEvent], literals: Iterable[tuple[str, int]],
                            model: ProbModelConfig | None = None, cap: int = ORACLE_CAP, numba=None) -> float:
    """P(every listed event takes the listed alternative) under ``model``."""
    want = dict(literals)
    pos = {ev.id: i for i, ev in enumerate(stream)}
    relevant = sorted(pos[e] for e in want)
    space = _Space(stream, relevant, model, cap, numba)
    q = np.zeros(space.n_proj)
    for idx, choices in space.projections():
        if all(choices[pos[e]] == a for e, a in want.items()):
            q[idx] = 1.0
    return space.expect(q, numba)


def history_count(stream: Sequence[ProbEvent]) -> int:
    return history_space_size(stream)
