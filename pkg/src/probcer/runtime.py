"""Streaming recognition runtime.

Runs are immutable partial matches; extending a run clones it, so every
event may feed any number of runs and rules (skip-till-any-match with zero
consumption). Each run points at its newest Active Instance Stack entry,
and entries point at their predecessors, so a full match is rebuilt by
walking back from the accepting entry.

Completed matches wait until the stream has moved past every instant their
negation checks depend on, then get their probability and are released.
Rules are grouped into hierarchy levels; recognized CEs are re-injected into
the next level once no earlier-stamped CE can still appear.
"""

from __future__ import annotations

import bisect
import heapq
import itertools
from collections import ChainMap, defaultdict, deque
from dataclasses import dataclass, field
from typing import Any, Iterable

from .errors import CapacityError, ModelError, StreamError
from .events import Alternative, CEInstance, ProbEvent, instance_key, values_equal
from .lang import ast as A
from .plan import BIND, CHECK, CONST, NONSTRICT, STRICT, HierarchyPlan, NFAPlan, compile as compile_plan
from .prob.lineage import DEFAULT_LINEAGE_CAP, Lineage, VarTable, ce_marginal
from .prob.models import ProbModelConfig, apply_decay, match_prob_markov, map_query, require_monotone
from .semantics import head_time, rule_outcomes

REPORTS = ("per-match", "marginal", "map")
NEG_INF = float("-inf")
POS_INF = float("inf")


@dataclass
class EngineConfig:
    model: ProbModelConfig = field(default_factory=ProbModelConfig)
    threshold: float = 0.0
    report: str = "per-match"
    approx_hierarchy: bool = False
    run_cap: int = 100_000
    lineage_cap: int = DEFAULT_LINEAGE_CAP
    hard_negation: bool = False
    all_late: bool = False
    evict_every: int = 4096
    keep_matches: bool = True

    def __post_init__(self):
        if not (0.0 <= self.threshold <= 1.0):
            raise ModelError("BAD_THRESHOLD", f"threshold {self.threshold} not in [0, 1]")
        if self.report not in REPORTS:
            raise ModelError("BAD_REPORT", f"report mode must be one of {', '.join(REPORTS)}")
        if self.report == "marginal" and self.model.kind == "markov":
            raise ModelError("UNSUPPORTED_MODEL", "marginal reports need the independent model")
        if self.run_cap < 1:
            raise ModelError("BAD_RUN_CAP", "run cap must be positive")


class Entry:
    """One Active Instance Stack cell: an event bound at a plan position."""

    __slots__ = ("event", "alt", "pos", "seq", "ts", "pred")

    def __init__(self, event, alt, pos, seq, ts, pred):
        self.event = event
        self.alt = alt
        self.pos = pos
        self.seq = seq
        self.ts = ts
        self.pred = pred

    def path(self) -> list["Entry"]:
        out = []
        e = self
        while e is not None:
            out.append(e)
            e = e.pred
        out.reverse()
        return out


class Run:
    __slots__ = ("plan", "branch", "pos", "env", "entry", "prob", "first_ts", "deadline", "alive")

    def __init__(self, plan, branch, pos, env, entry, prob, first_ts, deadline):
        self.plan = plan
        self.branch = branch
        self.pos = pos
        self.env = env
        self.entry = entry
        self.prob = prob
        self.first_ts = first_ts
        self.deadline = deadline
        self.alive = True


@dataclass
class Match:
    plan: NFAPlan
    branch: Any
    env: dict
    entries: tuple  # path order
    key: frozenset
    release_at: float
    head_ts: float
    prob: float = 0.0
    instances: list = field(default_factory=list)
    neg_literals: tuple = ()

    @property
    def rule(self) -> int:
        return self.plan.index

    @property
    def selected(self) -> list[tuple[ProbEvent, int]]:
        return [(e.event, e.alt) for e in sorted(self.entries, key=lambda e: (e.ts, e.seq))]

    @property
    def event_ids(self) -> tuple[str, ...]:
        return tuple(ev.id for ev, _ in self.selected)

    @property
    def last_ts(self) -> int:
        return max(e.ts for e in self.entries)

    @property
    def order_key(self) -> tuple:
        return (self.plan.index,) + tuple(-s for s in sorted((e.seq for e in self.entries), reverse=True))


@dataclass
class _Candidate:
    instance: CEInstance
    prob: float
    last_ts: int
    event_ids: tuple


class _Aggregate:
    __slots__ = ("ce_type", "attrs", "ts", "lineage", "ids")

    def __init__(self, ce_type, attrs, ts):
        self.ce_type = ce_type
        self.attrs = attrs
        self.ts = ts
        self.lineage = Lineage.false()
        self.ids: dict = {}


def _unify(atom: A.Atom, values: tuple, env) -> dict | None:
    if len(atom.args) != len(values):
        return None
    new: dict = {}
    for term, v in zip(atom.args, values):
        if isinstance(term, A.Wild):
            continue
        if isinstance(term, A.Const):
            if not values_equal(term.value, v):
                return None
        elif term.name in new:
            if not values_equal(new[term.name], v):
                return None
        elif term.name in env:
            if not values_equal(env[term.name], v):
                return None
        else:
            new[term.name] = v
    return new


class Level:
    def __init__(self, engine: "Engine", index: int, plans: list[NFAPlan]):
        self.engine = engine
        self.index = index
        self.plans = plans
        self.starters: dict[str, list] = defaultdict(list)
        self.waiting: dict[str, list] = defaultdict(list)
        self.types: set[str] = set()
        self.neg_types: set[str] = set()
        self.head_types = {p.head.name for p in plans}
        for plan in plans:
            for b in plan.branches:
                if b.positions:
                    self.starters[b.positions[0].event_type].append((plan, b))
                for p in b.positions:
                    self.types.add(p.event_type)
                for ng in b.negations:
                    self.neg_types.add(ng.atom.event_type)
        self.types |= self.neg_types
        self.cur_ts = -1
        self.seq = 0
        self.same_ts: dict[str, list] = defaultdict(list)
        self.neg_ts: dict[str, list] = defaultdict(list)
        self.neg_ev: dict[str, list] = defaultdict(list)
        self.pending: list = []
        self.counter = itertools.count()
        self.stacks: dict[tuple, deque] = defaultdict(deque)
        self.seen: set = set()
        self.dedupe = any(NONSTRICT in {p.rel for p in b.positions} for plan in plans for b in plan.branches)
        self.inbox: list = []
        self.aggregates: dict = {}
        self.hold = any(not p.head_time_bound for p in plans)
        self.since_evict = 0

    # -- event processing -----------------------------------------------------

    def advance(self, ts) -> None:
        """Release matches whose checks are settled once the stream reaches ``ts``."""
        if self.pending and self.pending[0][0] < ts:
            batch = []
            while self.pending and self.pending[0][0] < ts:
                batch.append(heapq.heappop(self.pending)[2])
            batch.sort(key=lambda m: m.order_key)
            for m in batch:
                self.engine._finalize(self, m)

    def process(self, ev: ProbEvent) -> None:
        eng = self.engine
        if ev.ts > self.cur_ts:
            self.cur_ts = ev.ts
            self.same_ts.clear()
        seq = self.seq
        self.seq += 1
        et = ev.event_type
        if et in self.neg_types:
            self.neg_ts[et].append(ev.ts)
            self.neg_ev[et].append(ev)
        vals = [a.values + (ev.ts,) for a in ev.alternatives]
        runs = self.waiting.get(et)
        if runs:
            self.waiting[et] = []
            keep = []
            ts = ev.ts
            for run in runs:
                if not run.alive:
                    continue
                if run.deadline is not None and ts > run.deadline:
                    run.alive = False
                    eng.live -= 1
                    continue
                keep.append(run)
                for t, rel, loop in run.branch.transitions[run.pos + 1]:
                    if run.branch.positions[t].event_type == et:
                        for alt in range(len(vals)):
                            self.extend(run, t, rel, ev, alt, vals[alt], seq, run.plan, run.branch)
            added = self.waiting[et]
            keep.extend(added)
            self.waiting[et] = keep
        starters = self.starters.get(et)
        if starters:
            for plan, branch in starters:
                w = plan.window
                if w is not None and not w.relative and not (w.lo <= ev.ts <= w.hi):
                    continue
                for alt in range(len(vals)):
                    self.extend(None, 0, None, ev, alt, vals[alt], seq, plan, branch)
        self.same_ts[et].append((ev, seq))
        self.since_evict += 1
        if self.since_evict >= eng.config.evict_every:
            self.since_evict = 0
            self.evict(ev.ts)

    def extend(self, run, t, rel, ev, alt, values, seq, plan, branch) -> None:
        eng = self.engine
        ts = ev.ts
        if run is not None:
            last = run.entry
            if rel == STRICT or rel is None:
                if ts <= last.ts:
                    return
            else:
                if ts < last.ts:
                    return
                if ts == last.ts:
                    e = last
                    while e is not None and e.ts == ts:
                        if e.event is ev:
                            return
                        e = e.pred
            if run.deadline is not None and ts > run.deadline:
                return
            env = run.env
            drop = branch.positions[run.pos].drop
            if drop:
                env = {k: v for k, v in env.items() if k not in drop}
        else:
            env = {}
        pos = branch.positions[t]
        ops = pos.ops
        if len(ops) != len(values):
            return
        new = None
        for (kind, arg), v in zip(ops, values):
            if kind is CHECK:
                cur = env[arg] if new is None else new[arg]
                if cur is not v and not values_equal(cur, v):
                    return
            elif kind is BIND:
                if new is None:
                    new = dict(env)
                new[arg] = v
            elif kind is CONST:
                if not values_equal(arg, v):
                    return
        if new is None:
            new = env
        for chk in pos.checks:
            if not chk(new):
                return
        if eng.promoted_key and ev.id in eng.promoted_key and run is not None:
            k = eng.promoted_key[ev.id]
            e = run.entry
            while e is not None:
                if eng.promoted_key.get(e.event.id) == k:
                    return
                e = e.pred
        p = (run.prob if run is not None else 1.0) * eng.factor(ev, alt)
        if eng.eps > 0.0 and p * plan.max_outcome_prob < eng.eps:
            eng.pruned += 1
            return
        entry = Entry(ev, alt, t, seq, ts, run.entry if run is not None else None)
        self.stacks[(plan.index, branch.index, t)].append(entry)
        if run is not None:
            first_ts, deadline = run.first_ts, run.deadline
        else:
            first_ts = ts
            w = plan.window
            deadline = None if w is None else (ts + w.hi if w.relative else w.hi)
        nrun = Run(plan, branch, t, new, entry, p, first_ts, deadline)
        if t in branch.accepting:
            self.complete(nrun)
        outs = branch.transitions[t + 1]
        if outs:
            if len(outs) == 1:
                self.waiting[branch.positions[outs[0][0]].event_type].append(nrun)
            else:
                for typ in {branch.positions[o[0]].event_type for o in outs}:
                    self.waiting[typ].append(nrun)
            eng.live += 1
            if eng.live > eng.peak:
                eng.peak = eng.live
                if eng.live > eng.config.run_cap:
                    raise CapacityError("RUN_CAP_EXCEEDED", f"more than {eng.config.run_cap} live runs",
                                        cap=eng.config.run_cap)
            for t2, rel2, loop2 in outs:
                if rel2 == NONSTRICT:
                    for e2, s2 in list(self.same_ts.get(branch.positions[t2].event_type, ())):
                        for alt2, a in enumerate(e2.alternatives):
                            self.extend(nrun, t2, rel2, e2, alt2, a.values + (e2.ts,), s2, plan, branch)

    def complete(self, run: Run) -> None:
        plan, branch = run.plan, run.branch
        entries = tuple(run.entry.path())
        env = dict(run.env)
        for m in branch.emits:
            env[m.name] = A.eval_expr(m.expr, env)
        for chk in branch.late_checks:
            if not chk(env):
                return
        key = frozenset((branch.positions[e.pos].atom.aid, e.event.id, e.alt) for e in entries)
        if self.dedupe:
            full = (plan.index, key)
            if full in self.seen:
                return
            self.seen.add(full)
        release = max(e.ts for e in entries)
        for ng in branch.negations:
            if ng.form == "trailing":
                release = max(release, plan.window.hi)
            elif ng.form == "bound":
                inst = self._instant(ng.atom, env)
                if isinstance(inst, (int, float)) and not isinstance(inst, bool):
                    release = max(release, inst)
        if plan.head_time_bound:
            hts = env.get(plan.head.time_var, NEG_INF)
        else:
            hts = NEG_INF
        m = Match(plan, branch, env, entries, key, release, hts)
        heapq.heappush(self.pending, (release, next(self.counter), m))

    @staticmethod
    def _instant(atom: A.Atom, env):
        t = atom.time_arg
        if isinstance(t, A.Var):
            return env.get(t.name)
        if isinstance(t, A.Const):
            return t.value
        return None

    # -- negation ---------------------------------------------------------------

    def violators(self, m: Match) -> dict:
        """Events (and their alternatives) that would violate ``m``'s negations."""
        out: dict = {}
        entries = m.entries
        window = m.plan.window
        for ng in m.branch.negations:
            et = ng.atom.event_type
            tss, evs = self.neg_ts.get(et, []), self.neg_ev.get(et, [])
            if ng.form == "bound":
                inst = self._instant(ng.atom, m.env)
                if inst is None:
                    continue
                lo_i = bisect.bisect_left(tss, inst)
                hi_i = bisect.bisect_right(tss, inst)
            elif ng.form == "gap":
                i = next(k for k, e in enumerate(entries) if e.pos == ng.anchor)
                lo_i = bisect.bisect_right(tss, entries[i - 1].ts)
                hi_i = bisect.bisect_left(tss, entries[i].ts)
            elif ng.form == "leading":
                lo_i = bisect.bisect_left(tss, window.lo)
                hi_i = bisect.bisect_left(tss, entries[0].ts)
            else:
                lo_i = bisect.bisect_right(tss, entries[-1].ts)
                hi_i = bisect.bisect_right(tss, window.hi)
            for ev in evs[lo_i:hi_i]:
                for j, a in enumerate(ev.alternatives):
                    new = _unify(ng.atom, a.values + (ev.ts,), m.env)
                    if new is None:
                        continue
                    scoped = ChainMap(new, m.env)
                    if all(A.eval_pred(p, scoped) for p in ng.preds):
                        out.setdefault(ev, set()).add(j)
        return out

    # -- watermark and housekeeping ----------------------------------------------

    def frontier(self, below) -> float:
        if self.index == 0:
            return below
        f = below
        if self.inbox:
            f = min(f, self.inbox[0][0])
        return f

    def watermark(self, frontier) -> float:
        if frontier == POS_INF:
            return POS_INF
        if self.hold:
            return NEG_INF
        w = frontier
        for rel, _, m in self.pending:
            if m.head_ts < w:
                w = m.head_ts
        seen = set()
        for runs in self.waiting.values():
            for run in runs:
                if not run.alive or id(run) in seen:
                    continue
                seen.add(id(run))
                if run.deadline is not None and run.deadline < self.cur_ts:
                    continue
                t = run.env.get(run.plan.head.time_var)
                if t is not None and t < w:
                    w = t
        return w

    def evict(self, now) -> int:
        eng = self.engine
        n = 0
        horizon = now
        for typ, runs in list(self.waiting.items()):
            keep = []
            for run in runs:
                if not run.alive:
                    continue
                if run.deadline is not None and run.deadline < now:
                    run.alive = False
                    eng.live -= 1
                    n += 1
                    continue
                keep.append(run)
                if run.first_ts < horizon:
                    horizon = run.first_ts
            self.waiting[typ] = keep
        for _, _, m in self.pending:
            horizon = min(horizon, m.entries[0].ts)
        for plan in self.plans:
            w = plan.window
            if w is not None and not w.relative and now <= w.hi:
                horizon = min(horizon, w.lo)
        for key, stack in self.stacks.items():
            while stack and stack[0].ts < horizon:
                stack.popleft()
                n += 1
        for typ in list(self.neg_ts):
            cut = bisect.bisect_left(self.neg_ts[typ], horizon)
            if cut:
                del self.neg_ts[typ][:cut]
                del self.neg_ev[typ][:cut]
                n += cut
        return n

    def prune(self, eps: float) -> int:
        n = 0
        for typ, runs in list(self.waiting.items()):
            keep = []
            for run in runs:
                if not run.alive:
                    continue
                if run.prob * run.plan.max_outcome_prob < eps:
                    run.alive = False
                    self.engine.live -= 1
                    n += 1
                    continue
                keep.append(run)
            self.waiting[typ] = keep
        return n

    def live_runs(self) -> int:
        return len({id(r) for runs in self.waiting.values() for r in runs if r.alive})


class Engine:
    """Drives all hierarchy levels over one ordered input stream."""

    def __init__(self, rules, config: EngineConfig | None = None, plan: HierarchyPlan | None = None):
        self.config = config or EngineConfig()
        cfg = self.config
        self.model = cfg.model
        self.plan = plan if plan is not None else compile_plan(rules, all_late=cfg.all_late, decay=cfg.model.decay)
        self.ruleset = rules
        self.levels = [Level(self, k, self.plan.plans_at(k)) for k in range(self.plan.n_levels)]
        self.type_levels: dict[str, list[int]] = defaultdict(list)
        for lvl in self.levels[1:]:
            for t in lvl.types:
                self.type_levels[t].append(lvl.index)
        self.level_of_head = {}
        for lvl in self.levels:
            for h in lvl.head_types:
                self.level_of_head[h] = lvl.index
        self.eps = 0.0
        self.live = 0
        self.peak = 0
        self.pruned = 0
        self.now = -1
        self.n_events = 0
        self.matches: list[Match] = []
        self.n_matches = 0
        self.outputs: list[CEInstance] = []
        self._fresh: list[CEInstance] = []
        self.candidates: dict[str, list] = defaultdict(list)
        self.table = VarTable()
        self.lineage_of: dict[str, Lineage] = {}
        self.promoted_key: dict[str, tuple] = {}
        self.promote_count: dict[str, int] = defaultdict(int)
        self.multi = len(self.levels) > 1
        self.marginal = cfg.report == "marginal"
        self._markov = self.model.kind == "markov" and bool(self.model.cpt)
        if self._markov:
            best: dict[str, float] = defaultdict(float)
            for (a, b), p in self.model.cpt.entries.items():
                best[b] = max(best[b], p)
            self._cpt_max = dict(best)
        if cfg.threshold > 0 and cfg.report != "marginal":
            self.prune_below(cfg.threshold)

    # -- probability hooks ------------------------------------------------------

    def factor(self, ev: ProbEvent, alt: int) -> float:
        p = ev.alternatives[alt].prob
        if self._markov:
            entry = self._cpt_max.get(ev.event_type)
            if entry is not None:
                occ = ev.occurrence_prob
                alt_share = p / occ if occ > 0 else 0.0
                return max(p, entry * alt_share)
        return p

    # -- public API --------------------------------------------------------------

    def ingest(self, ev: ProbEvent) -> list[CEInstance]:
        """Feed one event; returns CE outputs released by this call."""
        if ev.ts < self.now:
            raise StreamError("OUT_OF_ORDER_EVENT", f"event {ev.id} at {ev.ts} after {self.now}",
                              event=ev.id, ts=ev.ts, last=self.now)
        advanced = ev.ts > self.now
        self.now = ev.ts
        self.n_events += 1
        lvl0 = self.levels[0] if self.levels else None
        if lvl0 is not None:
            if advanced:
                lvl0.advance(ev.ts)
                if self.marginal or self.multi:
                    self._settle(ev.ts)
            lvl0.process(ev)
        for k in self.type_levels.get(ev.event_type, ()):
            lvl = self.levels[k]
            heapq.heappush(lvl.inbox, (ev.ts, next(lvl.counter), ev))
        return self._drain()

    def flush(self) -> list[CEInstance]:
        """End of stream: release everything still pending."""
        if self.levels:
            self.levels[0].advance(POS_INF)
            self._settle(POS_INF)
        if self.config.report == "map":
            for ce_type in sorted(self.candidates):
                best = map_query(self.candidates[ce_type])
                self._emit(best.instance)
        return self._drain()

    def run(self, events: Iterable) -> list[CEInstance]:
        for ev in events:
            self.ingest(ev)
        self.flush()
        return list(self.outputs)

    def evict(self, now=None) -> int:
        now = self.now if now is None else now
        return sum(lvl.evict(now) for lvl in self.levels)

    def prune_below(self, eps: float) -> int:
        require_monotone(self.model)
        if not (0.0 <= eps <= 1.0):
            raise ModelError("BAD_THRESHOLD", f"epsilon {eps} not in [0, 1]")
        self.eps = eps
        if eps <= 0.0:
            return 0
        return sum(lvl.prune(eps) for lvl in self.levels)

    def live_runs(self) -> int:
        return sum(lvl.live_runs() for lvl in self.levels)

    # -- internals ----------------------------------------------------------------

    def _drain(self) -> list[CEInstance]:
        out, self._fresh = self._fresh, []
        return out

    def _emit(self, inst: CEInstance) -> None:
        self.outputs.append(inst)
        self._fresh.append(inst)

    def _settle(self, frontier0) -> None:
        """Finalize level-0 instances and propagate CEs upward as far as safe."""
        below = frontier0
        for lvl in self.levels:
            if lvl.index > 0:
                while lvl.inbox and lvl.inbox[0][0] < below:
                    ts, _, ev = heapq.heappop(lvl.inbox)
                    if ts > lvl.cur_ts:
                        lvl.advance(ts)
                    lvl.process(ev)
                front = lvl.frontier(below)
                lvl.advance(front)
            else:
                front = frontier0
            w = lvl.watermark(front)
            if self.marginal:
                self._finalize_instances(lvl, w)
            below = w

    def _finalize(self, lvl: Level, m: Match) -> None:
        cfg = self.config
        viol = lvl.violators(m) if m.branch.negations else {}
        chosen = {e.event.id: e.alt for e in m.entries}
        factor = 1.0
        neg_lits = []
        for ev in sorted(viol, key=lambda e: e.id):
            alts = viol[ev]
            if ev.id in chosen:
                if chosen[ev.id] in alts:
                    return
                continue
            if cfg.hard_negation:
                return
            q = 0.0
            for j in sorted(alts):
                q += ev.alternatives[j].prob
                neg_lits.append((ev.id, j, False))
            factor *= 1.0 - q
            if self.marginal and ev.id not in self.table:
                self.table.add(ev.id, [a.prob for a in ev.alternatives])
        if factor <= 0.0:
            return
        selected = m.selected
        if self._markov:
            p = match_prob_markov(selected, self.model.cpt)
        else:
            p = 1.0
            for ev, alt in selected:
                p *= ev.alternatives[alt].prob
        p *= factor
        decay = self.model.decay
        if decay is not None and decay < 1.0:
            seqs = [e.seq for e in m.entries]
            p = apply_decay(p, max(seqs) - min(seqs) + 1 - len(seqs), decay)
        m.prob = p
        m.neg_literals = tuple(neg_lits)
        self.n_matches += 1
        if cfg.keep_matches:
            self.matches.append(m)
        rule = m.plan.rule
        gkey, outs = rule_outcomes(rule, m.env)
        ids = tuple(ev.id for ev, _ in selected)
        if self.marginal:
            self._accumulate(lvl, m, gkey, outs, selected)
            return
        for op, attrs, ts in outs:
            inst = CEInstance(rule.head.name, attrs, ts, op * p, ids)
            m.instances.append(inst)
            if inst.prob <= 0.0:
                continue
            if cfg.report == "map":
                if inst.prob >= cfg.threshold:
                    self.candidates[inst.ce_type].append(_Candidate(inst, inst.prob, m.last_ts, ids))
            elif inst.prob >= cfg.threshold:
                self._emit(inst)
            self._promote(lvl, inst, None)

    def _accumulate(self, lvl: Level, m: Match, gkey, outs, selected) -> None:
        lits = list(m.neg_literals)
        ce_parts = []
        for ev, alt in selected:
            if ev.id in self.promoted_key:
                if self.config.approx_hierarchy:
                    lits.append((("ce", ev.id), 0, True))
                else:
                    ce_parts.append(self.lineage_of[ev.id])
            else:
                lits.append((ev.id, alt, True))
                if ev.id not in self.table:
                    self.table.add(ev.id, [a.prob for a in ev.alternatives])
        decay = self.model.decay
        if decay is not None and decay < 1.0:
            seqs = [e.seq for e in m.entries]
            k = max(seqs) - min(seqs) + 1 - len(seqs)
            if k > 0:
                var = ("decay", m.plan.index, m.key)
                self.table.add(var, [decay ** k])
                lits.append((var, 0, True))
        base = Lineage.of(tuple(lits))
        for part in ce_parts:
            base = base & part
        coin = None
        if len(outs) > 1 or outs[0][0] < 1.0:
            coin = ("coin",) + gkey
            if coin not in self.table:
                self.table.add(coin, [o[0] for o in outs])
        ids = {ev.id: (ev.ts, i) for i, (ev, _) in enumerate(selected)}
        for j, (op, attrs, ts) in enumerate(outs):
            if op <= 0.0:
                continue
            lin = base if coin is None else base.and_literals([(coin, j, True)])
            ik = instance_key(m.plan.head.name, attrs, ts)
            agg = lvl.aggregates.get(ik)
            if agg is None:
                agg = lvl.aggregates[ik] = _Aggregate(m.plan.head.name, attrs, ts)
            agg.lineage = agg.lineage | lin
            for eid, tsi in ids.items():
                agg.ids.setdefault(eid, tsi)

    def _finalize_instances(self, lvl: Level, w) -> None:
        ready = [k for k, a in lvl.aggregates.items() if a.ts < w]
        if not ready:
            return
        ready.sort(key=lambda k: (lvl.aggregates[k].ts, repr(k)))
        for k in ready:
            agg = lvl.aggregates.pop(k)
            p = ce_marginal(agg.lineage, self.table, self.config.lineage_cap)
            ids = tuple(e for e, _ in sorted(agg.ids.items(), key=lambda x: (x[1][0], x[0])))
            inst = CEInstance(agg.ce_type, agg.attrs, agg.ts, p, ids, agg.lineage)
            if p >= self.config.threshold and p > 0.0:
                self._emit(inst)
            self._promote(lvl, inst, agg.lineage)

    def _promote(self, lvl: Level, inst: CEInstance, lineage) -> None:
        """Re-inject a recognized CE as an input event of the levels that read it."""
        targets = self.type_levels.get(inst.ce_type)
        if not targets or inst.prob <= 0.0:
            return
        self.promote_count[inst.ce_type] += 1
        eid = f"{inst.ce_type}@{self.promote_count[inst.ce_type]}"
        ev = ProbEvent(inst.ce_type, inst.ts, (Alternative(inst.attrs, min(1.0, inst.prob)),), eid)
        self.promoted_key[eid] = inst.key
        if self.marginal:
            if self.config.approx_hierarchy:
                self.table.add(("ce", eid), [min(1.0, inst.prob)])
            else:
                self.lineage_of[eid] = lineage
        for k in targets:
            if k <= lvl.index:
                raise StreamError("HIERARCHY_ORDER_VIOLATION", f"{inst.ce_type} is read at level {k}")
            tgt = self.levels[k]
            heapq.heappush(tgt.inbox, (inst.ts, next(tgt.counter), ev))


def recognize(rules, events, config: EngineConfig | None = None) -> list[CEInstance]:
    """Run a whole stream through a fresh engine and return every output."""
    return Engine(rules, config).run(events)
