"""Built-in experiments: the two allocation tables and the figure data sets."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .alloc import (SolverConfig, db_to_linear, joint_power_dir_ris_alloc_1,
                    joint_power_ris_alloc_1, mimo_vs_reflection_sweep, opt_dir_ris_rank,
                    opt_ris_rank)
from .oracle import capacity_surface

__all__ = [
    "TABLE1_DB", "TABLE2_REFLECTED_DB", "TABLE2_DIRECT_DB",
    "FIG3_LEVELS_DB", "FIG7_RANGE_DB",
    "TableData", "FigureData", "run_table", "run_figure",
    "TABLES", "FIGURES",
]

TABLE1_DB = (22.0, 21.0, 20.0, 19.0)
TABLE2_REFLECTED_DB = (24.0, 22.0, 21.0, 20.0)
TABLE2_DIRECT_DB = (20.0, 19.0, 18.0, 17.0)
FIG3_LEVELS_DB = (5.0, 15.0, 30.0)
FIG7_RANGE_DB = tuple(float(x) for x in range(10, 31))

TABLES = ("table1", "table2")
FIGURES = ("fig3", "fig4_5", "fig6", "fig7", "fig8")


@dataclass
class TableData:
    name: str
    columns: list[str]
    rows: list[dict]
    meta: dict = field(default_factory=dict)


@dataclass
class FigureData:
    name: str
    columns: list[str]
    rows: list[list]
    meta: dict = field(default_factory=dict)


def _table1(cfg: SolverConfig) -> TableData:
    s = db_to_linear(TABLE1_DB)
    rows = []
    for k in range(1, len(s) + 1):
        res = opt_ris_rank(s[:k], cfg)
        rows.append({"n_pairs": k, "snr_db": list(TABLE1_DB[:k]),
                     "capacity": res.capacity, "r": list(res.r)})
    best = joint_power_ris_alloc_1(s, cfg)
    return TableData("table1", ["n_pairs", "snr_db", "capacity", "r"], rows,
                     {"optimal_rank": best.rank, "optimal_capacity": best.capacity,
                      "optimal_n_pairs": best.n_reflected_used})


def _table2(cfg: SolverConfig) -> TableData:
    sr = db_to_linear(TABLE2_REFLECTED_DB)
    sd = db_to_linear(TABLE2_DIRECT_DB)
    rows = []
    for k in range(1, len(sr) + 1):
        res = opt_dir_ris_rank(sd, sr[:k], cfg)
        rows.append({
            "n_beams": f"{len(sd)}+{k}",
            "snr_db": list(TABLE2_DIRECT_DB) + list(TABLE2_REFLECTED_DB[:k]),
            "capacity_reflected": res.capacity_reflected,
            "capacity_direct": res.capacity_direct,
            "capacity_total": res.capacity,
            "r": list(res.r), "q_reflected": list(res.q_reflected),
            "q_direct": list(res.q_direct)})
    best = joint_power_dir_ris_alloc_1(sd, sr, cfg)
    cols = ["n_beams", "snr_db", "capacity_reflected", "capacity_direct", "capacity_total",
            "r", "q_reflected", "q_direct"]
    return TableData("table2", cols, rows,
                     {"optimal_rank": best.rank, "optimal_capacity": best.capacity,
                      "optimal_n_reflected": best.n_reflected_used})


def run_table(table_id: str, cfg: SolverConfig = SolverConfig()) -> TableData:
    """Every row of the table, including the non-optimal ranks."""
    if table_id == "table1":
        return _table1(cfg)
    if table_id == "table2":
        return _table2(cfg)
    raise ValueError(f"unknown table {table_id!r}; choose from {TABLES}")


def _surface(n_pairs: int, resolution: int) -> FigureData:
    cols = ["snr_db"] + [f"r{i + 1}" for i in range(n_pairs)] + ["capacity"]
    rows = []
    for db in FIG3_LEVELS_DB:
        grid = capacity_surface(np.full(n_pairs, db_to_linear(db)), resolution)
        for p, c in zip(grid.points, grid.capacity):
            rows.append([db, *(float(x) for x in p), float(c)])
    return FigureData("fig3" if n_pairs == 2 else "fig4_5", cols, rows,
                      {"levels_db": list(FIG3_LEVELS_DB), "resolution": resolution})


def _trace_fig6(cfg: SolverConfig) -> FigureData:
    res = opt_ris_rank(db_to_linear(TABLE1_DB), cfg)
    n = len(TABLE1_DB)
    rows = [[i, *(float(x) for x in r)] for i, r in enumerate(res.trace_r)]
    return FigureData("fig6", ["iteration"] + [f"r{i + 1}" for i in range(n)], rows,
                      {"snr_db": list(TABLE1_DB), "iterations": res.iterations,
                       "converged": res.converged, "capacity": res.capacity})


def _trace_fig8(cfg: SolverConfig) -> FigureData:
    sr, sd = db_to_linear(TABLE2_REFLECTED_DB), db_to_linear(TABLE2_DIRECT_DB)
    res = opt_dir_ris_rank(sd, sr, cfg)
    n_r, n_d = len(sr), len(sd)
    cols = (["iteration"] + [f"q_R{i + 1}" for i in range(n_r)]
            + [f"q_D{i + 1}" for i in range(n_d)] + [f"r{i + 1}" for i in range(n_r)])
    rows = [[i, *(float(x) for x in q), *(float(x) for x in r)]
            for i, (q, r) in enumerate(zip(res.trace_q, res.trace_r))]
    return FigureData("fig8", cols, rows,
                      {"snr_reflected_db": list(TABLE2_REFLECTED_DB),
                       "snr_direct_db": list(TABLE2_DIRECT_DB),
                       "iterations": res.iterations, "converged": res.converged,
                       "capacity": res.capacity})


def _sweep_fig7(cfg: SolverConfig) -> FigureData:
    rows = mimo_vs_reflection_sweep(4, FIG7_RANGE_DB, cfg)
    cols = ["snr_db", "mimo_rank", "mimo_capacity", "refl_rank", "refl_capacity",
            "mimo_layer_snr", "refl_layer_snr"]
    return FigureData("fig7", cols,
                      [[getattr(row, c) for c in cols] for row in rows], {"n_beams": 4})


def run_figure(figure_id: str, cfg: SolverConfig = SolverConfig()) -> FigureData:
    if figure_id == "fig3":
        return _surface(2, 200)
    if figure_id == "fig4_5":
        return _surface(3, 60)
    if figure_id == "fig6":
        return _trace_fig6(cfg)
    if figure_id == "fig7":
        return _sweep_fig7(cfg)
    if figure_id == "fig8":
        return _trace_fig8(cfg)
    raise ValueError(f"unknown figure {figure_id!r}; choose from {FIGURES}")
