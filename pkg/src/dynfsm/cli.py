"""Command-line interface: evolve, cv, simulate, evaluate, export."""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
import time
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

from . import analysis
from .analysis import (IPD_COLUMNS, IPD_PREDICTORS, accessible_mask, builtin_strategy,
                       identifiability, variable_importance)
from .codec import Layout
from .dataset import DataError, Dataset, Schema, SplitSpec, load_table, split_train_test
from .fitness import accuracy
from .fsm import Fsm, to_dot
from .ga import GaConfig, evolve
from .selection import HyperGrid, cross_validate, subset_search
from .simulate import (BOTH_NOISY, OPPONENT_ONLY, PAPER_NOISE_LEVELS, PAPER_PAIRINGS,
                       ExperimentDesign, recovery_study, recovery_table, run_experiment)

EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 2, 3, 4


class UsageError(Exception):
    pass


def _version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "0+unknown"


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _names(text: str | None) -> list[str] | None:
    return [x.strip() for x in text.split(",") if x.strip()] if text else None


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1, help="worker threads for fitness evaluation")
    p.add_argument("--out", help="write the run document here (default: stdout)")


def _add_data(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="CSV with period, outcome and predictor columns")
    p.add_argument("--period-col", default="period")
    p.add_argument("--outcome-col", default="outcome")
    p.add_argument("--group-col", default="group")
    p.add_argument("--predictors", help="comma-separated predictor columns (default: all others)")
    p.add_argument("--actions", help="comma-separated outcome labels in index order")
    p.add_argument("--predictor-levels", help="low,high spellings of predictor values")


def _add_ga(p: argparse.ArgumentParser) -> None:
    p.add_argument("--pop-size", type=int, default=175)
    p.add_argument("--crossover", type=float, default=0.8)
    p.add_argument("--mutation", type=float, default=0.1)
    p.add_argument("--elitism", type=float, default=0.05)
    p.add_argument("--max-gen", type=int, default=500)
    p.add_argument("--stagnation", type=int, default=100)
    p.add_argument("--selection", choices=["rank", "proportional"], default="rank")


def _ga_config(args, prior: list[Fsm] | None = None) -> GaConfig:
    return GaConfig(args.pop_size, args.crossover, args.mutation, args.elitism,
                    args.max_gen or None, args.stagnation or None, args.seed, args.selection,
                    tuple(prior or ()), args.threads)


def _load(args) -> Dataset:
    schema = Schema(
        predictors=_names(args.predictors),
        period=args.period_col,
        outcome=args.outcome_col,
        group=args.group_col or None,
        action_labels=_names(args.actions),
        predictor_levels=_names(args.predictor_levels),
    )
    try:
        return load_table(args.data, schema)
    except OSError as exc:
        raise DataError(f"cannot read {args.data}: {exc.strerror or exc}") from exc


def _ipd_like(data_or_fsm) -> bool:
    return (tuple(data_or_fsm.predictor_names) == IPD_PREDICTORS
            and tuple(data_or_fsm.action_labels) == analysis.IPD_ACTIONS)


def _decorate(fsm: Fsm) -> Fsm:
    return fsm.relabel(column_labels=IPD_COLUMNS) if _ipd_like(fsm) else fsm


def _own_index(fsm: Fsm, own: str | None) -> int | None:
    if own is None:
        return 0 if _ipd_like(fsm) else None
    if own not in fsm.predictor_names:
        raise UsageError(f"--own-predictor {own!r} is not a predictor")
    return fsm.predictor_names.index(own)


def _dot(fsm: Fsm, own: int | None) -> str:
    mask = accessible_mask(fsm, own) if own is not None and fsm.n_actions == 2 else None
    return to_dot(fsm, mask)


def _emit(doc: dict, args, extra: dict[str, str] | None = None) -> None:
    """Write every output only after the whole run succeeded."""
    files = dict(extra or {})
    text = json.dumps(doc, indent=2, sort_keys=False) + "\n"
    if args.out:
        files[args.out] = text
    for path, content in files.items():
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.")
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(content)
        os.replace(tmp, target)
    if not args.out:
        sys.stdout.write(text)


def _document(args, argv, kind: str, config: dict, data: Dataset | None, result: dict,
              started: float) -> dict:
    return {
        "tool": "dynfsm",
        "version": _version(),
        "command": kind,
        "argv": list(argv),
        "config": config,
        "dataset": data.fingerprint() if data is not None else None,
        "result": result,
        "timings": {"seconds": round(time.perf_counter() - started, 3)},
    }


def cmd_evolve(args, argv) -> int:
    started = time.perf_counter()
    data = _load(args)
    train, test = data, None
    if args.test_frac:
        train, test = split_train_test(data, SplitSpec(1.0 - args.test_frac, args.seed))
    layout = Layout.for_predictors(args.states, max(2, data.n_actions), data.n_predictors)
    config = _ga_config(args)
    res = evolve(train, layout, config)
    res.best_fsm = _decorate(res.best_fsm)
    res.identifiability = identifiability(res.best_fsm, train, args.threads)
    res.importance = variable_importance(res.best_fsm, train, report=res.identifiability)
    if test is not None:
        res.test_accuracy = accuracy(res.best_fsm, test).accuracy
    own = _own_index(res.best_fsm, args.own_predictor)
    result = res.to_dict()
    result["train_rows"] = train.n_rows
    result["test_rows"] = test.n_rows if test is not None else 0
    result["label_mapping"] = {lab: i + 1 for i, lab in enumerate(data.action_labels)}
    doc = _document(args, argv, "evolve",
                    {"layout": layout.__dict__, "ga": config.to_dict(),
                     "test_frac": args.test_frac}, data, result, started)
    extra = {args.dot: _dot(res.best_fsm, own)} if args.dot else None
    _emit(doc, args, extra)
    return 0


def cmd_cv(args, argv) -> int:
    started = time.perf_counter()
    data = _load(args)
    config = _ga_config(args)
    states = _ints(args.states)
    if args.subset_search:
        ranked = subset_search(data, args.max_predictors, config, states, args.folds, args.seed)
        result = {"ranked_subsets": [r.to_dict() for r in ranked], "best": ranked[0].to_dict()}
        table_csv = None
    else:
        subsets = None
        if args.subsets:
            subsets = tuple(tuple(s.split("|")) for s in args.subsets.split(";"))
        grid = HyperGrid(tuple(states), subsets, k=args.folds, seed=args.seed,
                         tie_tolerance=args.tie_tolerance)
        cv = cross_validate(data, grid, config)
        result = cv.to_dict()
        table_csv = cv.to_csv()
    n_rows = len(result.get("table", result.get("ranked_subsets")))
    result["cost"] = {"grid_rows": n_rows, "folds": args.folds, "ga_runs": n_rows * args.folds}
    doc = _document(args, argv, "cv", {"ga": config.to_dict(), "states": states,
                                        "folds": args.folds, "subset_search": args.subset_search,
                                        "max_predictors": args.max_predictors},
                    data, result, started)
    extra = {args.table: table_csv} if args.table and table_csv else None
    _emit(doc, args, extra)
    return 0


def _design(args) -> ExperimentDesign:
    match_length = args.match_length if args.match_length else None
    if args.design == "paper":
        return ExperimentDesign(
            pairings=PAPER_PAIRINGS,
            noise_levels=tuple(_floats(args.noise)) if args.noise else PAPER_NOISE_LEVELS,
            noise_conditions=(BOTH_NOISY, OPPONENT_ONLY) if args.condition == "both"
            else (args.condition,) if args.condition else (BOTH_NOISY, OPPONENT_ONLY),
            replicates=args.reps or 25,
            periods=args.periods or 4000,
            base_seed=args.seed,
            match_length=match_length,
        )
    if not args.player or not args.opponent:
        raise UsageError("--player and --opponent are required unless --design paper")
    cond = args.condition or BOTH_NOISY
    return ExperimentDesign(
        pairings=((args.player, args.opponent),),
        noise_levels=tuple(_floats(args.noise or "0")),
        noise_conditions=(BOTH_NOISY, OPPONENT_ONLY) if cond == "both" else (cond,),
        replicates=args.reps or 1,
        periods=args.periods or 4000,
        base_seed=args.seed,
        match_length=match_length if match_length and match_length < (args.periods or 4000)
        else None,
    )


def cmd_simulate(args, argv) -> int:
    started = time.perf_counter()
    for name in (args.player, args.opponent):
        if name is not None:
            try:
                builtin_strategy(name)
            except ValueError as exc:
                raise UsageError(str(exc)) from exc
    design = _design(args)
    if args.out_dir:
        out_dir = Path(args.out_dir)
        out_dir.parent.mkdir(parents=True, exist_ok=True)
        staging = Path(tempfile.mkdtemp(prefix=f".{out_dir.name}.staging-", dir=out_dir.parent))
        reps, manifest = run_experiment(design, staging)
    else:
        reps, manifest = run_experiment(design)
    result: dict = {"runs": len(reps), "manifest": manifest}
    config = {"design": design.to_dict()}
    if args.recover:
        ga = _ga_config(args)
        layout = Layout(args.states, 2, 4)
        rows = recovery_study(design, layout, ga)
        result["recovery"] = [r.to_dict() for r in rows]
        result["error_vs_noise"] = recovery_table(rows)
        config["ga"] = ga.to_dict()
        config["layout"] = layout.__dict__
    if args.out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
        for f in staging.iterdir():
            os.replace(f, out_dir / f.name)
        staging.rmdir()
    doc = _document(args, argv, "simulate", config, None, result, started)
    _emit(doc, args)
    return 0


def _machine(args) -> Fsm:
    if bool(args.strategy) == bool(args.machine):
        raise UsageError("give exactly one of --strategy or --machine")
    if args.strategy:
        try:
            return builtin_strategy(args.strategy)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    try:
        doc = json.loads(Path(args.machine).read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataError(f"cannot read {args.machine}: {exc.strerror or exc}") from exc
    # accept a bare machine or a run document from `evolve`
    doc = doc.get("result", {}).get("machine", doc) if "result" in doc else doc
    return Fsm.from_dict(doc)


def cmd_evaluate(args, argv) -> int:
    started = time.perf_counter()
    fsm = _machine(args)
    data = _load(args)
    if fsm.n_predictors != data.n_predictors:
        raise DataError(f"machine expects {fsm.n_predictors} predictors, data has "
                        f"{data.n_predictors}")
    report = accuracy(fsm, data, per_group=True)
    result = {"machine": fsm.to_dict(), "accuracy": report.accuracy, "rows": report.row_count,
              "matches": report.matches, "per_group_accuracy": list(report.per_group_accuracy)}
    doc = _document(args, argv, "evaluate", {"strategy": args.strategy, "machine": args.machine},
                    data, result, started)
    _emit(doc, args)
    return 0


def cmd_export(args, argv) -> int:
    fsm = _decorate(_machine(args))
    text = _dot(fsm, _own_index(fsm, args.own_predictor))
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dynfsm", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {_version()}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evolve", help="estimate a machine with the genetic algorithm")
    _add_data(p), _add_ga(p), _add_common(p)
    p.add_argument("--states", type=int, default=2)
    p.add_argument("--test-frac", type=float, default=0.0, help="hold out this share of groups")
    p.add_argument("--dot", help="also write the machine as Graphviz DOT")
    p.add_argument("--own-predictor", help="predictor holding the player's own lagged action")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("cv", help="k-fold cross-validation over states / predictor subsets")
    _add_data(p), _add_ga(p), _add_common(p)
    p.add_argument("--states", default="2")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--subsets", help="';'-separated subsets, predictors joined by '|'")
    p.add_argument("--subset-search", action="store_true")
    p.add_argument("--max-predictors", type=int, default=3)
    p.add_argument("--tie-tolerance", type=float, default=0.0)
    p.add_argument("--table", help="also write the CV table as CSV")
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("simulate", help="noisy IPD simulation and recovery study")
    _add_ga(p), _add_common(p)
    p.add_argument("--player")
    p.add_argument("--opponent")
    p.add_argument("--noise", help="comma-separated noise levels")
    p.add_argument("--condition", choices=[BOTH_NOISY, OPPONENT_ONLY, "both"])
    p.add_argument("--periods", type=int)
    p.add_argument("--reps", type=int)
    p.add_argument("--match-length", type=int, default=100,
                   help="periods per restarted match; 0 = one match per replicate")
    p.add_argument("--design", choices=["paper"])
    p.add_argument("--out-dir", help="write replicate CSVs and manifest.json here")
    p.add_argument("--recover", action="store_true", help="estimate each replicate and score it")
    p.add_argument("--states", type=int, default=2)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate", help="accuracy of a fixed machine on a dataset")
    _add_data(p), _add_common(p)
    p.add_argument("--strategy", help=f"one of: {', '.join(sorted(analysis.STRATEGIES))}")
    p.add_argument("--machine", help="machine JSON (or an evolve run document)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("export", help="write a machine as Graphviz DOT")
    p.add_argument("--strategy")
    p.add_argument("--machine")
    p.add_argument("--own-predictor")
    p.add_argument("--out")
    p.set_defaults(func=cmd_export)
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "threads", 1) < 1:
        parser.error("--threads must be >= 1")
    try:
        return args.func(args, argv)
    except UsageError as exc:
        print(f"dynfsm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"dynfsm: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ValueError, OSError) as exc:
        print(f"dynfsm: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
