"""Command-line entry point.

Verbs::

    riscap run <scenario.yaml> [more.yaml ...] [--phases-csv PATH] [--jobs N]
    riscap table {table1,table2}
    riscap figure {fig3,fig4_5,fig6,fig7,fig8}
    riscap oracle <scenario.yaml> --starts N --seed S

Common flags: ``--out PATH``, ``--format {csv,json}``, ``--eps TOL``,
``--max-iter N``.  Validation failures print a JSON error document and exit
with status 2.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from concurrent.futures import ProcessPoolExecutor

from . import export
from .alloc import SolverConfig
from .channel import ChannelError
from .experiments import FIGURES, TABLES, run_figure, run_table
from .oracle import check_agreement, projected_gradient_multistart
from .reflection import ReflectionError
from .scenario import (Scenario, ScenarioError, load_scenario, pipeline_snrs, run_scenario)

EXIT_INVALID = 2


def _solver(args, base: SolverConfig = SolverConfig()) -> SolverConfig:
    changes = {}
    if args.eps is not None:
        changes["eps_conv"] = args.eps
    if args.max_iter is not None:
        changes["max_iterations"] = args.max_iter
    return dataclasses.replace(base, **changes)


def _load(path, args) -> Scenario:
    sc = load_scenario(path)
    return dataclasses.replace(sc, solver=_solver(args, sc.solver))


def _run_one(path_and_args):
    path, args = path_and_args
    return run_scenario(_load(path, args))


def _scenario_csv(doc: dict) -> str:
    rows = []
    for j, b in enumerate(doc["reflected"]):
        rows.append(["reflected", j, b["tx_col"], repr(b["snr"]), repr(b["r"]), repr(b["q"])])
    for j, b in enumerate(doc["direct"]):
        rows.append(["direct", j, b["tx_col"], repr(b["snr"]), "", repr(b["q"])])
    return export._csv(["kind", "index", "tx_col", "snr", "r", "q"], rows)


def cmd_run(args) -> str:
    jobs = [(p, args) for p in args.scenarios]
    if len(jobs) > 1 and args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            docs = list(pool.map(_run_one, jobs))
    else:
        docs = [_run_one(j) for j in jobs]
    if args.phases_csv:
        if len(docs) != 1 or docs[0]["ris"] is None:
            raise ScenarioError("--phases-csv needs exactly one scenario with a RIS")
        with open(args.phases_csv, "w") as fh:
            fh.write(export.phases_csv(docs[0]["ris"]["element_phases"]))
    if args.format == "csv":
        return "".join(_scenario_csv(d) for d in docs)
    if len(docs) == 1:
        return export.dumps(docs[0])
    return export.dumps({d["scenario"]: d for d in docs})


def cmd_table(args) -> str:
    table = run_table(args.table_id, _solver(args))
    return export.table_json(table) if args.format == "json" else export.table_csv(table)


def cmd_figure(args) -> str:
    fig = run_figure(args.figure_id, _solver(args))
    return export.figure_json(fig) if args.format == "json" else export.figure_csv(fig)


def oracle_report(sc: Scenario, n_starts: int, seed: int, tol: float = 1e-4) -> dict:
    """Run the scenario and check its capacity against the multistart oracle."""
    doc = run_scenario(sc)
    pl = pipeline_snrs(sc)
    objective = "P4" if pl.direct_beams else "P3"
    rep = projected_gradient_multistart(objective, pl.snr_direct, pl.snr_reflected,
                                        n_starts=n_starts, seed=seed)
    rep = check_agreement(rep, doc["capacity"] / doc["bandwidth"], tol)
    return {"scenario": sc.name, "objective": objective, "tolerance": tol,
            "algorithm_capacity": doc["capacity"] / doc["bandwidth"], **rep.to_dict()}


def cmd_oracle(args) -> str:
    sc = _load(args.scenario, args)
    seed = sc.seed if args.seed is None else args.seed
    return export.dumps(oracle_report(sc, args.starts, seed))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="write output to this file instead of stdout")
    common.add_argument("--format", choices=("csv", "json"), default=None)
    common.add_argument("--eps", type=float, default=None, help="convergence tolerance")
    common.add_argument("--max-iter", type=int, default=None, help="iteration cap")

    parser = argparse.ArgumentParser(prog="riscap", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="run scenario files")
    p.add_argument("scenarios", nargs="+")
    p.add_argument("--phases-csv", help="also write RIS element phases as CSV")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_run, default_format="json")

    p = sub.add_parser("table", parents=[common], help="reproduce an allocation table")
    p.add_argument("table_id", choices=TABLES)
    p.set_defaults(func=cmd_table, default_format="csv")

    p = sub.add_parser("figure", parents=[common], help="emit figure data")
    p.add_argument("figure_id", choices=FIGURES)
    p.set_defaults(func=cmd_figure, default_format="csv")

    p = sub.add_parser("oracle", parents=[common], help="check a scenario against the oracle")
    p.add_argument("scenario")
    p.add_argument("--starts", type=int, default=50)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_oracle, default_format="json")
    return parser


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.format is None:
        args.format = args.default_format
    try:
        text = args.func(args)
    except (ScenarioError, ChannelError, ReflectionError, ValueError, OSError) as exc:
        error = {"type": type(exc).__name__, "message": str(exc)}
        error.update(getattr(exc, "details", {}) or {})
        if getattr(exc, "rows", None):
            error["rows"] = exc.rows
        _emit(export.dumps({"error": error}), args.out)
        return EXIT_INVALID
    _emit(text, args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
