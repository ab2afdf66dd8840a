from __future__ import annotations

import json

from probcer.bench import (SEQ3_RULE, GeneratorSpec, generate, kernel_timing, run_bench, selectivity_sweep,
                           stream_digest, superlinear)
from probcer.cli import main


def test_generator_deterministic():
    a = generate(GeneratorSpec(n_events=500, seed=4))
    b = generate(GeneratorSpec(n_events=500, seed=4))
    assert stream_digest(a) == stream_digest(b)
    assert stream_digest(a) != stream_digest(generate(GeneratorSpec(n_events=500, seed=5)))


def test_generator_ordered_and_ranged():
    evs = generate(GeneratorSpec(n_events=2000, prob_range=(0.2, 0.4), seed=1))
    assert all(x.ts <= y.ts for x, y in zip(evs, evs[1:]))
    assert all(0.2 <= e.alternatives[0].prob <= 0.4 for e in evs)


def test_replay_equal_matches():
    evs = generate(GeneratorSpec(n_events=20_000, attr_domain=10, seed=2))
    a = run_bench(SEQ3_RULE, evs)
    b = run_bench(SEQ3_RULE, evs, latency=False)
    assert a["matches"] == b["matches"] > 0
    assert a["events_per_sec"] > 0 and a["p99_latency_us"] >= 0


def test_sweep_monotone():
    rows = selectivity_sweep(n_events=3000)
    peaks = [r["peak_runs"] for r in rows]
    assert peaks == sorted(peaks)
    assert superlinear(rows)


def test_kernel_timing_row():
    row = kernel_timing(n_events=10, repeats=1)
    assert row["histories"] == 1024
    if row["numba_available"]:
        assert row["bitwise_equal"]


def test_cli_bench(capsys):
    assert main(["bench", "--events", "2000", "--sweep-events", "1500", "--seed", "3"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["replay_matches_equal"] is True
    assert rep["sequence"]["events"] == 2000
    assert len(rep["kleene_sweep"]) == 5
