from __future__ import annotations

import json
import math
from types import SimpleNamespace

import numpy as np
import pytest

from probcer.errors import CapacityError, ModelError, QueryError
from probcer.events import NON_OCCURRENCE, enumerate_histories, history_prob, make_event
from probcer.prob import (CPT, Lineage, ProbModelConfig, VarTable, apply_decay, apply_rule_prob, ce_marginal,
                          combine_noisy_or, map_query, match_prob_independent, match_prob_markov)
from probcer.prob import _kernels as K


def _sel(events):
    return [(e, 0) for e in events]


@pytest.fixture
def assist_p2(table1):
    by = {e.id: e for e in table1}
    return [by[i] for i in ("e5", "e7", "e8", "e10")]


class TestMatchProb:
    def test_independent(self, assist_p2):
        assert match_prob_independent(_sel(assist_p2)) == pytest.approx(0.48195, abs=1e-12)

    def test_independent_earlier_pass(self, table1):
        by = {e.id: e for e in table1}
        sel = _sel([by[i] for i in ("e4", "e7", "e8", "e10")])
        assert match_prob_independent(sel) == pytest.approx(0.5508, abs=1e-12)

    def test_crisp(self):
        assert match_prob_independent(_sel([make_event("a", 1), make_event("b", 2)])) == 1.0

    def test_negation_factor(self, assist_p2):
        assert match_prob_independent(_sel(assist_p2), 0.5) == pytest.approx(0.240975, abs=1e-12)

    def test_markov(self, assist_p2):
        cpt = CPT.from_mapping({"shooting->ballInNet": 0.95})
        assert match_prob_markov(_sel(assist_p2), cpt) == pytest.approx(0.508725, abs=1e-12)

    def test_markov_empty_cpt(self, assist_p2):
        assert match_prob_markov(_sel(assist_p2), CPT()) == match_prob_independent(_sel(assist_p2))

    def test_markov_all_ones(self, assist_p2):
        types = [e.event_type for e in assist_p2]
        cpt = CPT.from_mapping({f"{a}->{b}": 1.0 for a, b in zip(types, types[1:])})
        assert match_prob_markov(_sel(assist_p2), cpt) == pytest.approx(0.7)

    def test_markov_shares_alternatives(self):
        from probcer.events import validate_event
        a = make_event("a", 1, 0.5, id="a")
        b = validate_event({"type": "b", "ts": 2, "alts": [{"args": {"k": 1}, "prob": 0.2},
                                                             {"args": {"k": 2}, "prob": 0.6}]}, default_id="b")
        cpt = CPT.from_mapping({"a->b": 0.4})
        assert match_prob_markov([(a, 0), (b, 1)], cpt) == pytest.approx(0.5 * 0.4 * 0.75)


class TestCPT:
    def test_load(self, tmp_path):
        p = tmp_path / "cpt.json"
        p.write_text(json.dumps({"shooting->ballInNet": 0.95}))
        assert CPT.load(p).get("shooting", "ballInNet") == 0.95

    @pytest.mark.parametrize("raw", [{"ab": 0.5}, {"a->b": 1.5}, {"a->b": "x"}])
    def test_bad(self, raw):
        with pytest.raises(ModelError) as ei:
            CPT.from_mapping(raw)
        assert ei.value.code == "BAD_CPT"

    def test_unreadable(self, tmp_path):
        with pytest.raises(ModelError):
            CPT.load(tmp_path / "missing.json")


class TestCombinators:
    @pytest.mark.parametrize("p, k, d, want", [(0.7, 5, 1.0, 0.7), (0.5, 2, 0.9, 0.405), (0.3, 0, 0.5, 0.3)])
    def test_decay(self, p, k, d, want):
        assert apply_decay(p, k, d) == pytest.approx(want, abs=1e-12)

    def test_decay_bounds(self):
        with pytest.raises(ModelError):
            ProbModelConfig(decay=0.0)
        with pytest.raises(ModelError):
            ProbModelConfig(decay=1.2)

    @pytest.mark.parametrize("r, m, want", [(0.9, 0.5, 0.45), (1.0, 0.37, 0.37), (0.6, 0.0, 0.0)])
    def test_rule_prob(self, r, m, want):
        assert apply_rule_prob(r, m) == pytest.approx(want, abs=1e-12)

    @pytest.mark.parametrize("ps, want", [([0.9, 0.7], 0.97), ([0.42], 0.42), ([], 0.0)])
    def test_noisy_or(self, ps, want):
        assert combine_noisy_or(ps) == pytest.approx(want, abs=1e-12)


class TestMapQuery:
    @staticmethod
    def m(p, ts, ids):
        return SimpleNamespace(prob=p, last_ts=ts, event_ids=ids)

    def test_assist(self):
        ms = [self.m(0.48195, 7, ("e5",)), self.m(0.5508, 7, ("e4",)), self.m(0.61965, 7, ("e1",))]
        assert map_query(ms).event_ids == ("e1",)

    def test_single(self):
        m = self.m(0.1, 1, ("x",))
        assert map_query([m]) is m

    def test_tie_earliest(self):
        assert map_query([self.m(0.5, 7, ("a",)), self.m(0.5, 5, ("b",))]).last_ts == 5

    def test_empty(self):
        with pytest.raises(QueryError) as ei:
            map_query([])
        assert ei.value.code == "EMPTY_MATCH_SET"


def _brute(conjs, events):
    """P(some conjunct holds) by enumerating histories of ``events``."""
    total = 0.0
    for h in enumerate_histories(events):
        if any(all(h.choices[e] == a for e, a in c) for c in conjs):
            total += history_prob(h, events)
    return total


class TestLineage:
    def test_single_conjunct(self, table1):
        lin = Lineage.of([(i, 0, True) for i in ("e5", "e7", "e8", "e10")])
        assert ce_marginal(lin, table1) == pytest.approx(0.48195, abs=1e-12)

    def test_merged_assist(self, table1):
        tails = ("e7", "e8", "e10")
        conjs = [[(h, 0)] + [(t, 0) for t in tails] for h in ("e1", "e4", "e5")]
        lin = Lineage.of(*[[(e, a, True) for e, a in c] for c in conjs])
        got = ce_marginal(lin, table1)
        used = [e for e in table1 if e.id in {"e1", "e4", "e5", *tails}]
        assert got == pytest.approx(_brute(conjs, used), abs=1e-12)
        assert got == pytest.approx(0.684369, abs=1e-12)

    def test_disjoint_halves(self):
        evs = [make_event("a", 1, 0.5, id="x"), make_event("b", 2, 0.5, id="y")]
        assert ce_marginal(Lineage.of([("x", 0, True)], [("y", 0, True)]), evs) == pytest.approx(0.75)

    def test_negative_literal(self):
        evs = [make_event("a", 1, 0.5, id="x"), make_event("b", 2, 0.4, id="y")]
        lin = Lineage.of([("x", 0, True), ("y", 0, False)])
        assert ce_marginal(lin, evs) == pytest.approx(0.3)

    def test_contradiction_dropped(self):
        assert Lineage.of([("x", 0, True), ("x", 0, False)]).is_false
        assert Lineage.of([("x", 0, True), ("x", 1, True)]).is_false

    def test_exclusive_alternatives(self):
        t = VarTable()
        t.add("x", [0.2, 0.3])
        lin = Lineage.of([("x", 0, True)], [("x", 1, True)])
        assert ce_marginal(lin, t) == pytest.approx(0.5)

    def test_cap(self):
        evs = [make_event("a", i, 0.5, id=f"x{i}") for i in range(26)]
        lin = Lineage.of(*[[(e.id, 0, True)] for e in evs])
        with pytest.raises(CapacityError) as ei:
            ce_marginal(lin, evs)
        assert ei.value.code == "LINEAGE_TOO_LARGE"
        assert ce_marginal(lin, evs, cap=26) == pytest.approx(1 - 0.5 ** 26)


class TestKernels:
    def _space(self, seed=3, n=12):
        rng = np.random.default_rng(seed)
        radix = rng.integers(2, 4, n)
        probs = np.zeros((n, 3))
        for i, r in enumerate(radix):
            w = rng.uniform(0.05, 1.0, r)
            probs[i, :r] = w / w.sum()
        stride = np.zeros(n, dtype=np.int64)
        s = 1
        for i in range(0, n, 2):
            stride[i] = s
            s *= radix[i]
        return radix, probs, stride

    @pytest.mark.skipif(not K.HAVE_NUMBA, reason="numba missing")
    def test_weights_bitwise(self):
        radix, probs, stride = self._space()
        w1, p1 = K.history_weights(radix, probs, stride, numba=True)
        w2, p2 = K.history_weights(radix, probs, stride, numba=False)
        assert np.array_equal(w1, w2) and np.array_equal(p1, p2)
        assert K.pairwise_sum(w1, numba=True) == K.pairwise_sum(w2, numba=False)

    @pytest.mark.skipif(not K.HAVE_NUMBA, reason="numba missing")
    def test_markov_bitwise(self):
        radix, probs, stride = self._space(5)
        type_idx = np.arange(len(radix)) % 3
        cpt = np.full((3, 3), np.nan)
        cpt[0, 1], cpt[1, 2], cpt[2, 0] = 0.9, 0.2, 0.6
        a = K.markov_history_weights(radix, probs, stride, type_idx, cpt, numba=True)
        b = K.markov_history_weights(radix, probs, stride, type_idx, cpt, numba=False)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])

    def test_weights_normalized(self):
        radix, probs, stride = self._space()
        w, _ = K.history_weights(radix, probs, stride, numba=False)
        assert len(w) == int(np.prod(radix))
        assert K.pairwise_sum(w, numba=False) == pytest.approx(1.0, abs=1e-12)

    def test_pairwise_matches_fsum(self):
        x = np.random.default_rng(0).uniform(0, 1, 1001)
        assert K.pairwise_sum(x, numba=False) == pytest.approx(math.fsum(x), rel=1e-13)

    def test_env_flag(self, monkeypatch):
        import importlib
        monkeypatch.setenv("PROBCER_NO_NUMBA", "1")
        mod = importlib.reload(K)
        try:
            assert mod.USE_NUMBA is False
        finally:
            monkeypatch.delenv("PROBCER_NO_NUMBA")
            importlib.reload(K)
