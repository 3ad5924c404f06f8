"""Command-line front end.

Subcommands:
  run        full synthetic experiment, rows appended to a CSV
  calibrate  conformal threshold from a plain scores file (one per line)
  mbest      best-first set enumeration for ranking or matching inputs
  eval       coverage report for prediction sets against a JSONL dataset
  gen        write a synthetic dataset as JSONL

Precedence for `run`/`gen` settings: built-in defaults, then command-line
flags, then the --config file (TOML or JSON) when given. Errors are
reported as one JSON object on stderr with exit code 1.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys

import numpy as np

from . import synth
from .conformal import (
    LabelSet,
    PredictionInterval,
    conformal_threshold,
    evaluate,
)
from .harness import ExperimentConfig, run as run_experiment
from .labels import FormatError, read_jsonl, weak_contains, write_jsonl
from .matching import MatchingProblem, read_cost_csv
from .mbest import enumerate_until, m_best
from .ranking import PsiSpec, RankingProblem

__all__ = ["main"]


def _load_config(path: str) -> dict:
    if path.endswith(".toml"):
        try:
            import tomllib  # py >= 3.11
        except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
            try:
                import tomli as tomllib
            except ModuleNotFoundError as exc:
                raise FormatError(
                    "TOML config needs tomllib (py3.11+) or the tomli package; "
                    "use a JSON config instead"
                ) from exc
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


# --- run -----------------------------------------------------------------


_RUN_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def _cmd_run(args: argparse.Namespace) -> int:
    settings: dict = {}
    for name in _RUN_FIELDS:
        flag = getattr(args, name, None)
        if flag is not None:
            settings[name] = flag
    if args.config:
        loaded = _load_config(args.config)
        unknown = set(loaded) - set(_RUN_FIELDS)
        if unknown:
            raise FormatError(f"unknown config keys: {sorted(unknown)}")
        settings.update(loaded)
    if "methods" in settings and isinstance(settings["methods"], str):
        settings["methods"] = tuple(settings["methods"].split(","))
    if "methods" in settings:
        settings["methods"] = tuple(settings["methods"])
    if "split" in settings and isinstance(settings["split"], str):
        settings["split"] = tuple(float(v) for v in settings["split"].split(","))
    if "split" in settings:
        settings["split"] = tuple(settings["split"])
    cfg = ExperimentConfig(**settings)
    results = run_experiment(cfg)
    summary: dict = {"task": cfg.task, "alpha": cfg.alpha, "rows": len(results)}
    if cfg.out:
        summary["out"] = cfg.out
    for method in cfg.methods:
        rows = [r for r in results if r.method == method]
        summary[method] = {
            "strong_cov": float(np.mean([r.strong_cov for r in rows])),
            "weak_cov": float(np.mean([r.weak_cov for r in rows])),
            "avg_size": float(np.mean([r.avg_size for r in rows])),
        }
    print(json.dumps(summary, indent=2))
    return 0


# --- calibrate -------------------------------------------------------------


def _cmd_calibrate(args: argparse.Namespace) -> int:
    if args.scores == "-":
        lines = sys.stdin.read().split()
    else:
        with open(args.scores, "r", encoding="utf-8") as fh:
            lines = fh.read().split()
    if not lines:
        raise FormatError("scores file is empty")
    scores = np.array([float(v) for v in lines])
    t = conformal_threshold(scores, args.alpha)
    print(t.value)
    return 0


# --- mbest -----------------------------------------------------------------


def _mbest_problem(path: str):
    if path.endswith(".csv"):
        return MatchingProblem(read_cost_csv(path))
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if "relevances" in payload:
        psi_spec = payload.get("psi", {"kind": "hinge"})
        psi = PsiSpec(psi_spec.get("kind", "hinge"), float(psi_spec.get("c", 0.0)))
        return RankingProblem(np.array(payload["relevances"], dtype=float), psi)
    if "costs" in payload:
        return MatchingProblem(np.array(payload["costs"], dtype=float))
    raise FormatError("mbest input needs a 'relevances' or 'costs' key")


def _cmd_mbest(args: argparse.Namespace) -> int:
    problem = _mbest_problem(args.input)
    if args.threshold is not None:
        result = enumerate_until(problem, args.threshold, cap=args.cap)
    else:
        result = m_best(problem, args.m)
    print(
        json.dumps(
            {
                "configs": [list(c) for c in result.configs],
                "scores": list(result.scores),
                "truncated": result.truncated,
            }
        )
    )
    return 0


# --- eval ------------------------------------------------------------------


class _ConfigSet:
    """Explicit set of structured configurations (rankings, matchings)."""

    def __init__(self, configs):
        self.members = {tuple(int(v) for v in c) for c in configs}

    def __contains__(self, y) -> bool:
        return tuple(int(v) for v in y) in self.members

    def intersects(self, w) -> bool:
        return any(weak_contains(w, m) for m in self.members)

    def size(self) -> float:
        return float(len(self.members))


def _set_from_payload(payload: dict, line: int):
    kind = payload.get("kind")
    try:
        if kind == "set":
            return LabelSet(payload["labels"], payload["k"])
        if kind == "interval":
            return PredictionInterval(payload["lo"], payload["hi"])
        if kind == "configs":
            return _ConfigSet(payload["configs"])
    except KeyError as exc:
        raise FormatError(
            f"missing field {exc.args[0]!r} for prediction-set kind {kind!r}", line=line
        ) from exc
    raise FormatError(f"unknown prediction-set kind {kind!r}", line=line)


def _cmd_eval(args: argparse.Namespace) -> int:
    records = list(read_jsonl(args.data))
    sets = []
    with open(args.sets, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                payload = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise FormatError(f"bad JSON: {exc}", line=line_no) from exc
            sets.append(_set_from_payload(payload, line_no))
    report = evaluate(sets, records)
    out = {
        "n": report.n,
        "strong_coverage": report.strong_coverage,
        "weak_coverage": report.weak_coverage,
        "avg_size": report.avg_size,
    }
    if report.size_histogram is not None:
        out["size_histogram"] = {str(k): v for k, v in sorted(report.size_histogram.items())}
    print(json.dumps(out, indent=2))
    return 0


# --- gen -------------------------------------------------------------------


def _cmd_gen(args: argparse.Namespace) -> int:
    task = args.task
    seed = args.seed if args.seed is not None else 0
    n = args.n if args.n is not None else 1000
    d = args.d if args.d is not None else 2
    if task == "classify":
        k = args.k if args.k is not None else 10
        data = synth.gen_multiclass(
            synth.MulticlassConfig(
                n=n, k=k, d=d, sigma=args.sigma if args.sigma is not None else 1.0,
                seed=seed,
                min_weak_size=args.min_weak_size if args.min_weak_size is not None else 1,
            )
        )
    elif task == "rank":
        k = args.k if args.k is not None else 7
        data = synth.gen_ranking(
            synth.RankingSimConfig(
                n=n, k=k, d=d,
                sigma=args.sigma if args.sigma is not None else 1.0, seed=seed,
            )
        )
    elif task == "match":
        k = args.k if args.k is not None else 6
        data = synth.gen_matching(
            n, k, args.noise if args.noise is not None else 0.25, seed
        )
    elif task == "regress":
        data = synth.gen_regression(
            n, d, args.mu if args.mu is not None else 0.05, seed,
            min_half_width=args.min_half_width,
        )
    else:  # pragma: no cover - argparse choices guard this
        raise FormatError(f"unknown task {task!r}")
    write_jsonl(args.out, synth.to_records(data))
    print(json.dumps({"task": task, "n": n, "out": args.out}))
    return 0


# --- parser ----------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="weakconformal",
        description="Conformal prediction sets calibrated on weakly labeled data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a synthetic experiment")
    p_run.add_argument("--task", choices=["classify", "rank", "match", "regress"])
    p_run.add_argument("--alpha", type=float)
    p_run.add_argument("--trials", dest="n_trials", type=int)
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--n", type=int)
    p_run.add_argument("--k", type=int)
    p_run.add_argument("--d", type=int)
    p_run.add_argument("--sigma", type=float)
    p_run.add_argument("--noise", type=float)
    p_run.add_argument("--mu", type=float)
    p_run.add_argument("--min-weak-size", dest="min_weak_size", type=int)
    p_run.add_argument("--min-half-width", dest="min_half_width", type=float)
    p_run.add_argument("--methods", help="comma-separated, e.g. wsc,fsc")
    p_run.add_argument("--m-max", dest="m_max", type=int)
    p_run.add_argument("--psi-c", dest="psi_c", type=float)
    p_run.add_argument("--split", help="three comma-separated fractions")
    p_run.add_argument("--out", help="CSV path (appended, never overwritten)")
    p_run.add_argument("--config", help="TOML or JSON config file (overrides flags)")
    p_run.set_defaults(fn=_cmd_run)

    p_cal = sub.add_parser("calibrate", help="threshold from a scores file")
    p_cal.add_argument("--scores", required=True, help="one score per line, or -")
    p_cal.add_argument("--alpha", type=float, required=True)
    p_cal.set_defaults(fn=_cmd_calibrate)

    p_mb = sub.add_parser("mbest", help="best-first enumeration")
    p_mb.add_argument("--input", required=True, help="JSON (relevances/costs) or cost CSV")
    group = p_mb.add_mutually_exclusive_group(required=True)
    group.add_argument("--m", type=int, help="number of configurations")
    group.add_argument("--threshold", type=float, help="enumerate scores <= threshold")
    p_mb.add_argument("--cap", type=int, default=100_000)
    p_mb.set_defaults(fn=_cmd_mbest)

    p_ev = sub.add_parser("eval", help="coverage report for prediction sets")
    p_ev.add_argument("--sets", required=True, help="JSONL of prediction sets")
    p_ev.add_argument("--data", required=True, help="JSONL of weak records")
    p_ev.set_defaults(fn=_cmd_eval)

    p_gen = sub.add_parser("gen", help="write a synthetic dataset as JSONL")
    p_gen.add_argument("--task", required=True,
                       choices=["classify", "rank", "match", "regress"])
    p_gen.add_argument("--n", type=int)
    p_gen.add_argument("--k", type=int)
    p_gen.add_argument("--d", type=int)
    p_gen.add_argument("--sigma", type=float)
    p_gen.add_argument("--noise", type=float)
    p_gen.add_argument("--mu", type=float)
    p_gen.add_argument("--min-weak-size", dest="min_weak_size", type=int)
    p_gen.add_argument("--min-half-width", dest="min_half_width", type=float)
    p_gen.add_argument("--seed", type=int)
    p_gen.add_argument("--out", required=True)
    p_gen.set_defaults(fn=_cmd_gen)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (FormatError, ValueError, OSError, KeyError) as exc:
        line = getattr(exc, "line", None)
        payload = {"error": str(exc)}
        if line is not None:
            payload["line"] = line
        print(json.dumps(payload), file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
