"""Command-line entry points.

Exit codes: 0 success, 2 invalid configuration, 3 evaluator failure.
Run directories always contain the effective config snapshot, the event log,
the budget ledger, and the final front export; figures are rendered next to
them unless --no-figures is given.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from .analysis import export_front, fidelity_sweep, ranking_study
from .config import RunConfig, apply_settings, config_to_text, parse_config_file
from .decoder import to_dot
from .evaluation import EvaluationError
from .genome import EvalResult, from_line, to_line
from .search import RunResult, run_baseline, run_search
from .variation import ConfigurationError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_EVALUATOR = 3

_OVERRIDE_KEYS = [
    "pop_size", "gen_budget", "node_range", "mf", "complete_epochs",
    "archive_capacity", "seed", "evaluator", "out_dir",
    "p_crossover", "p_inter_cell", "p_link", "p_op", "p_add_node", "node_cap",
]


def _add_config_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="flat key = value config file")
    for key in _OVERRIDE_KEYS:
        flag = "--" + key.replace("_", "-")
        parser.add_argument(flag, dest=f"cfg_{key}", metavar="VALUE", help=f"override {key}")


def _build_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if args.config is not None:
        cfg = parse_config_file(args.config, cfg)
    overrides = {
        key: getattr(args, f"cfg_{key}")
        for key in _OVERRIDE_KEYS
        if getattr(args, f"cfg_{key}", None) is not None
    }
    cfg = apply_settings(cfg, overrides)
    cfg.validate()
    return cfg


def _write_run_artifacts(result: RunResult, cfg: RunConfig, out_dir: Path,
                         figures: bool) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "run_config.txt").write_text(config_to_text(cfg))
    with (out_dir / "events.jsonl").open("w") as fh:
        for event in result.events:
            fh.write(json.dumps(event, sort_keys=True) + "\n")
    budget = dict(result.usage)
    budget["total_simulated_epochs"] = result.total_epochs
    (out_dir / "budget.json").write_text(json.dumps(budget, indent=2, sort_keys=True) + "\n")
    with (out_dir / "final_population.jsonl").open("w") as fh:
        for g in result.population:
            fh.write(json.dumps({
                "id": g.id,
                "f1": g.eval.f1,
                "f2": g.eval.f2,
                "epochs_trained": g.eval.epochs_trained,
                "counters": {"ss": g.counters.ss, "ms": g.counters.ms, "me": g.counters.me},
                "genome": to_line(g),
            }, sort_keys=True) + "\n")
    export_front(result.population, out_dir)
    if figures:
        from . import report

        report.save_pareto_figure(result.population, out_dir / "pareto.png")
        report.save_hv_figure(result.events, out_dir / "hv.png")


def _cmd_search(args: argparse.Namespace, baseline: bool) -> int:
    try:
        cfg = _build_config(args)
    except (ConfigurationError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = cfg.out_dir if cfg.out_dir is not None else Path(args.default_out)
    try:
        result = run_baseline(cfg) if baseline else run_search(cfg)
    except (EvaluationError, OSError) as exc:
        print(f"evaluator failure: {exc}", file=sys.stderr)
        return EXIT_EVALUATOR
    _write_run_artifacts(result, cfg, out_dir, figures=not args.no_figures)
    print(f"run complete: {len(result.population)} individuals, "
          f"{result.total_epochs} simulated epochs -> {out_dir}")
    return EXIT_OK


def _cmd_rank_study(args: argparse.Namespace) -> int:
    taus = ranking_study(args.n, args.epochs, args.seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    table = out_dir / "tau.csv"
    with table.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "tau_vs_final"])
        for epoch, tau in enumerate(taus, 1):
            writer.writerow([epoch, repr(tau)])
    meta = {"evaluator": "synthetic", "n_architectures": args.n,
            "max_epochs": args.epochs, "seed": args.seed}
    (out_dir / "tau_meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    if not args.no_figures:
        from . import report

        report.save_tau_figure(taus, out_dir / "tau.png")
    for epoch, tau in enumerate(taus, 1):
        print(f"epoch {epoch:3d}: tau = {tau:.4f}")
    return EXIT_OK


def _cmd_fidelity_sweep(args: argparse.Namespace) -> int:
    try:
        cfg = _build_config(args)
        mf_values = [int(x) for x in args.mf_values.split(",")]
        seeds = [int(x) for x in args.seeds.split(",")]
    except (ConfigurationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    rows = fidelity_sweep(mf_values, seeds, cfg)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    table = out_dir / "sweep.csv"
    with table.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["mf", "cost_reduction", "tau", "epochs", "baseline_epochs"])
        for row in rows:
            writer.writerow([row["mf"], repr(row["cost_reduction"]), repr(row["tau"]),
                             row["epochs"], row["baseline_epochs"]])
    if not args.no_figures:
        from . import report

        report.save_sweep_figure(rows, out_dir / "sweep.png")
    for row in rows:
        print(f"mf {row['mf']:3d}: cost_reduction = {row['cost_reduction']:.4f}  "
              f"tau = {row['tau']:.4f}")
    return EXIT_OK


def _cmd_export(args: argparse.Namespace) -> int:
    run_dir = Path(args.run)
    pop_file = run_dir / "final_population.jsonl"
    if not pop_file.exists():
        print(f"error: {pop_file} not found (not a finished run directory?)", file=sys.stderr)
        return EXIT_CONFIG
    population = []
    for line in pop_file.read_text().splitlines():
        record = json.loads(line)
        genome = from_line(record["genome"])
        population.append(genome.__class__(
            normal=genome.normal,
            reduction=genome.reduction,
            eval=EvalResult(
                f1=record["f1"], f2=record["f2"],
                epochs_trained=record.get("epochs_trained", 0),
                checkpoint_id=record["id"],
            ),
        ))
    out_dir = Path(args.out) if args.out else run_dir
    export_front(population, out_dir)
    print(f"exported {len(population)} individuals -> {out_dir / 'front.csv'}")
    return EXIT_OK


def _cmd_validate_config(args: argparse.Namespace) -> int:
    try:
        cfg = _build_config(args)
    except (ConfigurationError, OSError, ValueError) as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    sys.stdout.write(config_to_text(cfg))
    return EXIT_OK


def _cmd_render_dot(args: argparse.Namespace) -> int:
    if args.genome:
        lines = [args.genome]
    else:
        lines = [l for l in Path(args.file).read_text().splitlines() if l.strip()]
    for line in lines:
        genome = from_line(line)
        text = to_dot(genome)
        if args.out:
            out_dir = Path(args.out)
            out_dir.mkdir(parents=True, exist_ok=True)
            (out_dir / f"{genome.id}.dot").write_text(text)
            print(f"wrote {out_dir / (genome.id + '.dot')}")
        else:
            sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mfnas",
        description="Multi-fidelity evolutionary architecture search over cell encodings",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-generation progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p_search = sub.add_parser("search", help="run the multi-fidelity search")
    _add_config_args(p_search)
    p_search.add_argument("--no-figures", action="store_true")
    p_search.set_defaults(func=lambda a: _cmd_search(a, baseline=False), default_out="runs/search")

    p_base = sub.add_parser("baseline", help="run the complete-epoch baseline")
    _add_config_args(p_base)
    p_base.add_argument("--no-figures", action="store_true")
    p_base.set_defaults(func=lambda a: _cmd_search(a, baseline=True), default_out="runs/baseline")

    p_rank = sub.add_parser("rank-study", help="tau between per-epoch and final rankings")
    p_rank.add_argument("--n", type=int, default=200, help="architectures to sample")
    p_rank.add_argument("--epochs", type=int, default=25)
    p_rank.add_argument("--seed", type=int, default=0)
    p_rank.add_argument("--out", default="runs/rank_study")
    p_rank.add_argument("--no-figures", action="store_true")
    p_rank.set_defaults(func=_cmd_rank_study)

    p_sweep = sub.add_parser("fidelity-sweep", help="cost/tau across fidelity counts")
    _add_config_args(p_sweep)
    p_sweep.add_argument("--mf-values", default="1,2,4,6,8,12")
    p_sweep.add_argument("--seeds", default="0,1,2")
    p_sweep.add_argument("--out", default="runs/fidelity_sweep")
    p_sweep.add_argument("--no-figures", action="store_true")
    p_sweep.set_defaults(func=_cmd_fidelity_sweep)

    p_export = sub.add_parser("export", help="re-export front.csv + DOT from a run directory")
    p_export.add_argument("--run", required=True)
    p_export.add_argument("--out", default=None)
    p_export.set_defaults(func=_cmd_export)

    p_val = sub.add_parser("validate-config", help="check invariants, print effective config")
    _add_config_args(p_val)
    p_val.set_defaults(func=_cmd_validate_config)

    p_dot = sub.add_parser("render-dot", help="render cell diagrams for genome lines")
    group = p_dot.add_mutually_exclusive_group(required=True)
    group.add_argument("--genome", help="one canonical genome line: NC=[...] RC=[...]")
    group.add_argument("--file", help="file with one genome line per row")
    p_dot.add_argument("--out", default=None)
    p_dot.set_defaults(func=_cmd_render_dot)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
