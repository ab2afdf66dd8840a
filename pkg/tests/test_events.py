from __future__ import annotations

import math

import pytest

from probcer.errors import EventValidationError, ModelError
from probcer.events import (NON_OCCURRENCE, EventHistory, ProbEvent, enumerate_histories, event_to_record,
                            history_prob, history_space_size, make_event, validate_event)


class TestValidateEvent:
    def test_has_ball_residual(self):
        ev = validate_event({"type": "hasBall", "ts": 4, "alts": [{"args": {"player": "p2"}, "prob": 0.7}]},
                            default_id="e5")
        assert ev.occurrence_prob == pytest.approx(0.7)
        assert ev.non_occurrence_prob == pytest.approx(0.3)
        assert ev.id == "e5"

    def test_crisp_event(self):
        ev = validate_event({"type": "e", "ts": 0, "args": {"x": 1}}, default_id="x")
        assert ev.is_crisp
        assert ev.non_occurrence_prob == 0.0
        assert len(ev.alternatives) == 1 and ev.alternatives[0].prob == 1.0

    def test_sum_exceeded(self):
        raw = {"type": "e", "ts": 0, "alts": [{"args": {"x": 1}, "prob": 0.7}, {"args": {"x": 2}, "prob": 0.5}]}
        with pytest.raises(EventValidationError) as ei:
            validate_event(raw, default_id="a")
        assert ei.value.code == "PROB_SUM_EXCEEDED"

    def test_sum_within_tolerance(self):
        raw = {"type": "e", "ts": 0, "alts": [{"args": {"x": 1}, "prob": 0.5}, {"args": {"x": 2}, "prob": 0.5 + 1e-10}]}
        assert validate_event(raw, default_id="a").non_occurrence_prob >= 0.0

    @pytest.mark.parametrize("raw, code", [
        ({"type": "e", "ts": 0, "prob": -0.1}, "NEGATIVE_PROB"),
        ({"ts": 0}, "MISSING_FIELD"),
        ({"type": "e"}, "MISSING_FIELD"),
        ({"type": "e", "ts": 0, "alts": []}, "MISSING_FIELD"),
        ({"type": "e", "ts": 0, "alts": [{"args": {"x": 1}, "prob": 0.2}, {"args": {"y": 1}, "prob": 0.2}]},
         "MIXED_ATTR_KEYS"),
        ({"type": "e", "ts": -1}, "BAD_TIMESTAMP"),
    ])
    def test_rejections(self, raw, code):
        with pytest.raises(EventValidationError) as ei:
            validate_event(raw, default_id="a")
        assert ei.value.code == code

    def test_idempotent(self):
        ev = make_event("hasBall", 3, 0.8, id="e4", player="p2")
        assert validate_event(ev) == ev
        assert validate_event(event_to_record(ev)) == ev


@pytest.mark.parametrize("n, size", [(3, 8), (10, 1024), (0, 1)])
def test_history_space_size(n, size):
    evs = [make_event("a", i, 0.5, id=f"e{i}") for i in range(n)]
    assert history_space_size(evs) == size


def test_history_space_multi_alt():
    ev = validate_event({"type": "e", "ts": 0, "alts": [{"args": {"k": 1}, "prob": 0.2},
                                                         {"args": {"k": 2}, "prob": 0.3}]}, default_id="a")
    assert history_space_size([ev, ev]) == 9


class TestHistoryProb:
    def setup_method(self):
        self.evs = [make_event("running", 1, 0.8, id="r"), make_event("jumping", 2, 0.6, id="j"),
                    make_event("dunking", 3, 0.7, id="d")]

    def test_all_occur(self):
        h = EventHistory({"r": 0, "j": 0, "d": 0})
        assert history_prob(h, self.evs) == pytest.approx(0.336, abs=1e-12)

    def test_none_occur(self):
        h = EventHistory({e.id: NON_OCCURRENCE for e in self.evs})
        assert history_prob(h, self.evs) == pytest.approx(0.024, abs=1e-12)

    def test_empty(self):
        assert history_prob(EventHistory({}), []) == 1.0

    def test_incomplete(self):
        with pytest.raises(ModelError) as ei:
            history_prob(EventHistory({"r": 0}), self.evs)
        assert ei.value.code == "INCOMPLETE_HISTORY"

    def test_enumeration_normalizes(self):
        hs = list(enumerate_histories(self.evs))
        assert len(hs) == 8
        assert math.fsum(history_prob(h, self.evs) for h in hs) == pytest.approx(1.0, abs=1e-12)


def test_probevent_is_frozen():
    ev = make_event("a", 0)
    with pytest.raises(Exception):
        ev.ts = 3  # type: ignore[misc]
    assert isinstance(ev, ProbEvent)
