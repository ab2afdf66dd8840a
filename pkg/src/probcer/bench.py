"""Synthetic stream generator and throughput / latency measurements."""

from __future__ import annotations

import hashlib
import io as _io
import random
import time
from dataclasses import dataclass, field

import numpy as np

from .events import Alternative, ProbEvent
from .io import write_events
from .lang.validate import parse_rules
from .metrics import MetricsReport, latency_summary
from .prob import _kernels as K
from .runtime import Engine, EngineConfig

SEQ3_RULE = "seq3(X, T3) ::= (a(X, T1) ; b(X, T2) ; c(X, T3)) within [0, 10] ."
KLEENE_RULE = "burst(T2) ::= (a(_, T1) ; b(1, L)* ; c(_, T2)) within [0, 12] ."


@dataclass
class GeneratorSpec:
    n_events: int = 100_000
    types: tuple[str, ...] = ("a", "b", "c", "d")
    rates: tuple[float, ...] | None = None  # relative frequency per type
    prob_range: tuple[float, float] = (0.5, 1.0)
    attr_domain: int = 100
    advance_prob: float = 0.5  # chance the clock ticks before an event
    seed: int = 0
    # type -> probability that its attribute takes the value 1 (else uniform over the domain)
    hot: dict = field(default_factory=dict)


def generate(spec: GeneratorSpec) -> list[ProbEvent]:
    rng = random.Random(spec.seed)
    lo, hi = spec.prob_range
    weights = list(spec.rates) if spec.rates else None
    types = rng.choices(spec.types, weights=weights, k=spec.n_events)
    out = []
    ts = 0
    for i, etype in enumerate(types):
        if rng.random() < spec.advance_prob:
            ts += 1
        hot = spec.hot.get(etype)
        if hot is not None:
            val = 1 if rng.random() < hot else 0
        else:
            val = rng.randrange(spec.attr_domain)
        prob = round(rng.uniform(lo, hi), 4)
        out.append(ProbEvent(etype, ts, (Alternative((("k", val),), prob),), f"e{i + 1}"))
    return out


def stream_digest(events) -> str:
    buf = _io.StringIO()
    write_events(events, buf)
    return hashlib.sha256(buf.getvalue().encode()).hexdigest()


def run_bench(rules_text: str, events, config: EngineConfig | None = None, latency: bool = True) -> dict:
    """Feed pre-loaded events through one engine; wall-clock excludes generation and I/O."""
    cfg = config or EngineConfig(keep_matches=False)
    eng = Engine(parse_rules(rules_text), cfg)
    ingest = eng.ingest
    n = len(events)
    lat = np.empty(n, dtype=np.int64) if latency else None
    clock = time.perf_counter_ns
    t0 = clock()
    if latency:
        for i, ev in enumerate(events):
            s = clock()
            ingest(ev)
            lat[i] = clock() - s
    else:
        for ev in events:
            ingest(ev)
    eng.flush()
    elapsed = (clock() - t0) / 1e9
    rep = MetricsReport()
    rep.events_per_sec = n / elapsed if elapsed > 0 else float("inf")
    if latency:
        rep.mean_latency_us, rep.p99_latency_us = latency_summary(lat)
    out = {k: v for k, v in rep.to_dict().items() if k.endswith(("_sec", "_us"))}
    out.update(events=n, seconds=elapsed, matches=eng.n_matches, outputs=len(eng.outputs),
               peak_runs=eng.peak, pruned=eng.pruned)
    return out


def selectivity_sweep(fractions=(0.01, 0.05, 0.1, 0.25, 0.5), n_events: int = 20_000, seed: int = 0,
                      run_cap: int = 10_000_000) -> list[dict]:
    """Peak live runs of a Kleene rule as the share of qualifying ``b`` events grows."""
    rows = []
    for frac in fractions:
        spec = GeneratorSpec(n_events=n_events, types=("a", "b", "c"), rates=(1, 6, 1), seed=seed,
                             hot={"b": frac}, advance_prob=0.7)
        events = generate(spec)
        res = run_bench(KLEENE_RULE, events, EngineConfig(keep_matches=False, run_cap=run_cap), latency=False)
        rows.append({"selectivity": frac, "peak_runs": res["peak_runs"], "matches": res["matches"],
                     "events_per_sec": res["events_per_sec"]})
    return rows


def superlinear(rows) -> bool:
    """Peak runs grow faster than selectivity between the sweep's ends and never drop."""
    peaks = [r["peak_runs"] for r in rows]
    if any(b < a for a, b in zip(peaks, peaks[1:])):
        return False
    lo, hi = rows[0], rows[-1]
    if lo["peak_runs"] == 0:
        return hi["peak_runs"] > 0
    return hi["peak_runs"] / lo["peak_runs"] > hi["selectivity"] / lo["selectivity"]


def kernel_timing(n_events: int = 18, repeats: int = 3, seed: int = 0) -> dict:
    """History-weight kernel: compiled path against the numpy path."""
    rng = np.random.default_rng(seed)
    radix = np.full(n_events, 2, dtype=np.int64)
    p = rng.uniform(0.1, 0.9, n_events)
    probs = np.stack([p, 1 - p], axis=1)
    stride = np.zeros(n_events, dtype=np.int64)
    stride[: n_events // 2] = 2 ** np.arange(n_events // 2)

    def best(numba):
        K.history_weights(radix[:4], probs[:4], stride[:4], numba=numba)  # compile / warm up
        times = []
        for _ in range(repeats):
            t = time.perf_counter()
            w, proj = K.history_weights(radix, probs, stride, numba=numba)
            times.append(time.perf_counter() - t)
        return min(times), w, proj

    t_np, w_np, pr_np = best(False)
    row = {"histories": int(2 ** n_events), "numpy_ms": t_np * 1e3, "numba_available": K.HAVE_NUMBA}
    if K.HAVE_NUMBA:
        t_nb, w_nb, pr_nb = best(True)
        row["numba_ms"] = t_nb * 1e3
        row["speedup"] = t_np / t_nb if t_nb > 0 else float("inf")
        row["bitwise_equal"] = bool(np.array_equal(w_np, w_nb) and np.array_equal(pr_np, pr_nb))
    return row


def bench_suite(n_events: int = 100_000, seed: int = 0, sweep_events: int = 20_000) -> dict:
    events = generate(GeneratorSpec(n_events=n_events, seed=seed))
    first = run_bench(SEQ3_RULE, events)
    replay = run_bench(SEQ3_RULE, events, latency=False)
    rows = selectivity_sweep(n_events=sweep_events, seed=seed)
    return {
        "seed": seed,
        "stream_sha256": stream_digest(events),
        "sequence": first,
        "replay_matches_equal": replay["matches"] == first["matches"],
        "kleene_sweep": rows,
        "kleene_superlinear": superlinear(rows),
        "kernels": kernel_timing(),
    }
