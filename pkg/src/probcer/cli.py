"""Command-line entry point: ``probcer recognize|oracle|score|bench|validate``."""

from __future__ import annotations

import argparse
import json
import sys
from contextlib import contextmanager

from .errors import ModelError, ProbCERError
from .io import dumps_instance, iter_events, read_events
from .lang.validate import parse_rules
from .plan import compile as compile_plan
from .plan import dump_plan
from .prob.lineage import DEFAULT_LINEAGE_CAP
from .prob.models import CPT, ProbModelConfig

EXIT_OK = 0


def _read_text(path) -> str:
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as exc:
        raise ProbCERError("CANNOT_OPEN", f"cannot open {path}: {exc.strerror}", path=str(path)) from exc


@contextmanager
def _out(path):
    if path in (None, "-"):
        yield sys.stdout
        sys.stdout.flush()
        return
    try:
        fh = open(path, "w")
    except OSError as exc:
        raise ProbCERError("CANNOT_OPEN", f"cannot write {path}: {exc.strerror}", path=str(path)) from exc
    with fh:
        yield fh


def _model(args) -> ProbModelConfig:
    cpt = CPT.load(args.cpt) if getattr(args, "cpt", None) else CPT()
    if args.model == "independent" and cpt:
        raise ModelError("BAD_MODEL", "--cpt needs --model markov")
    return ProbModelConfig(kind=args.model, cpt=cpt, decay=getattr(args, "decay", None))


def cmd_recognize(args) -> int:
    from .runtime import Engine, EngineConfig

    rules = parse_rules(_read_text(args.rules))
    cfg = EngineConfig(model=_model(args), threshold=args.threshold, report=args.report,
                       approx_hierarchy=args.approx_hierarchy, run_cap=args.run_cap,
                       lineage_cap=args.lineage_cap, hard_negation=args.hard_negation, keep_matches=False)
    engine = Engine(rules, cfg)
    if args.dump_plan:
        sys.stderr.write(dump_plan(engine.plan) + "\n")
    n_out = 0
    with _out(args.output) as fh:
        for ev in iter_events(args.input):
            for inst in engine.ingest(ev):
                fh.write(dumps_instance(inst) + "\n")
                n_out += 1
        for inst in engine.flush():
            fh.write(dumps_instance(inst) + "\n")
            n_out += 1
    if args.summary:
        summary = {"events": engine.n_events, "matches": engine.n_matches, "outputs": n_out,
                   "peak_runs": engine.peak, "pruned": engine.pruned}
        sys.stderr.write(json.dumps(summary) + "\n")
    return EXIT_OK


def cmd_oracle(args) -> int:
    from .events import CEInstance
    from .prob.oracle import ORACLE_CAP, oracle_marginals

    model = _model(args)
    if model.decay is not None:
        raise ModelError("UNSUPPORTED_MODEL", "the oracle does not model penalty decay")
    rules = parse_rules(_read_text(args.rules))
    events = read_events(args.input)
    res = oracle_marginals(events, rules, model, cap=args.cap or ORACLE_CAP)
    with _out(args.output) as fh:
        for (ce_type, attrs, ts), p in res.marginals.items():
            if args.query and ce_type != args.query:
                continue
            if p <= 0.0:
                continue
            inst = CEInstance(ce_type, tuple((k, v) for k, _, v in attrs), ts, p)
            fh.write(dumps_instance(inst) + "\n")
    if args.summary:
        sys.stderr.write(json.dumps({"histories": res.histories, "projections": res.projections}) + "\n")
    return EXIT_OK


def cmd_score(args) -> int:
    from .metrics import score

    rep = score(args.predicted, args.gold, args.threshold)
    print(json.dumps(rep.to_dict()))
    return EXIT_OK


def cmd_bench(args) -> int:
    from .bench import bench_suite

    print(json.dumps(bench_suite(n_events=args.events, seed=args.seed, sweep_events=args.sweep_events)))
    return EXIT_OK


def cmd_validate(args) -> int:
    rules = parse_rules(_read_text(args.rules))
    hp = compile_plan(rules)
    if args.dump_plan:
        sys.stdout.write(dump_plan(hp))
    else:
        warnings = [d.code for d in rules.diagnostics]
        print(json.dumps({"ok": True, "rules": len(rules), "levels": hp.n_levels, "warnings": warnings}))
    return EXIT_OK


def _unit(text: str) -> float:
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"{text} not in [0, 1]")
    return v


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        sys.stderr.write(json.dumps({"error": "BAD_ARGUMENTS", "message": message}) + "\n")
        sys.exit(2)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="probcer", description="Probabilistic complex event recognition.")
    sub = ap.add_subparsers(dest="command", required=True)

    def model_flags(p):
        p.add_argument("--model", choices=("independent", "markov"), default="independent")
        p.add_argument("--cpt", help="JSON map like {\"shooting->ballInNet\": 0.95}")
        p.add_argument("--decay", type=float, help="per intervening event penalty factor in (0, 1]")

    p = sub.add_parser("recognize", help="run rules over a JSONL event stream")
    p.add_argument("--rules", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", default="-")
    model_flags(p)
    p.add_argument("--threshold", type=_unit, default=0.0)
    p.add_argument("--report", choices=("per-match", "marginal", "map"), default="per-match")
    p.add_argument("--approx-hierarchy", action="store_true")
    p.add_argument("--hard-negation", action="store_true", help="drop matches with any possible violator")
    p.add_argument("--run-cap", type=int, default=100_000)
    p.add_argument("--lineage-cap", type=int, default=DEFAULT_LINEAGE_CAP)
    p.add_argument("--dump-plan", action="store_true", help="print the compiled plan to stderr first")
    p.add_argument("--summary", action="store_true", help="print run counters to stderr")
    p.set_defaults(func=cmd_recognize)

    p = sub.add_parser("oracle", help="exact marginals by enumerating event histories")
    p.add_argument("--rules", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", default="-")
    model_flags(p)
    p.add_argument("--query", help="only report this CE type")
    p.add_argument("--cap", type=int, default=None, help="history space limit")
    p.add_argument("--summary", action="store_true")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("score", help="precision / recall against gold labels")
    p.add_argument("predicted")
    p.add_argument("gold")
    p.add_argument("--threshold", type=_unit, default=0.0)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("bench", help="synthetic throughput and latency benchmark")
    p.add_argument("--events", type=int, default=100_000)
    p.add_argument("--sweep-events", type=int, default=20_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("validate", help="parse and compile a rule file")
    p.add_argument("--rules", required=True)
    p.add_argument("--dump-plan", action="store_true")
    p.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ProbCERError as exc:
        sys.stderr.write(json.dumps(exc.to_json()) + "\n")
        return exc.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
