"""Accuracy and throughput reporting."""

from __future__ import annotations

from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Sequence

from .events import CEInstance
from .io import read_instances


@dataclass
class MetricsReport:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    precision: float = 0.0
    recall: float = 0.0
    f_measure: float = 0.0
    undefined: list[str] = field(default_factory=list)
    # throughput section, filled by the bench harness
    events_per_sec: float | None = None
    mean_latency_us: float | None = None
    p99_latency_us: float | None = None

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}


def _ratio(num: int, den: int):
    return (num / den, False) if den else (0.0, True)


def score_instances(pred: Sequence[CEInstance], gold: Sequence[CEInstance], threshold: float = 0.0) -> MetricsReport:
    """One-to-one matching on (type, attrs, ts); predictions below ``threshold`` are ignored.

    A gold line pairs with at most one prediction, so duplicate predictions
    of one instance beyond the gold multiplicity count as false positives.
    """
    wanted = Counter(g.key for g in gold)
    remaining = Counter(wanted)
    tp = fp = 0
    for p in pred:
        if p.prob < threshold:
            continue
        if remaining[p.key] > 0:
            remaining[p.key] -= 1
            tp += 1
        else:
            fp += 1
    fn = sum(remaining.values())
    rep = MetricsReport(tp, fp, fn)
    if tp + fp + fn == 0:
        # nothing predicted and nothing to find: perfect agreement
        rep.precision = rep.recall = rep.f_measure = 1.0
        return rep
    rep.precision, p_undef = _ratio(tp, tp + fp)
    rep.recall, r_undef = _ratio(tp, tp + fn)
    if p_undef:
        rep.undefined.append("precision")
    if r_undef:
        rep.undefined.append("recall")
    if p_undef or r_undef or rep.precision + rep.recall == 0:
        rep.undefined.append("f_measure")
        rep.f_measure = 0.0
    else:
        rep.f_measure = 2 * rep.precision * rep.recall / (rep.precision + rep.recall)
    return rep


def score(pred_path, gold_path, threshold: float = 0.0) -> MetricsReport:
    return score_instances(read_instances(pred_path), read_instances(gold_path), threshold)


def latency_summary(samples_ns: Sequence[int]) -> tuple[float, float]:
    """Mean and p99 of per-event latencies, in microseconds."""
    import numpy as np

    if not len(samples_ns):
        return 0.0, 0.0
    arr = np.asarray(samples_ns, dtype=np.float64) / 1e3
    return float(arr.mean()), float(np.percentile(arr, 99))
