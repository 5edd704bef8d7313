"""Scenario files and the end-to-end allocation pipeline.

A scenario is a YAML document::

    name: example
    units: grid              # angles in DFT-bin units of each array, or "radians"
    tx:  {n_elements: 8, spacing_over_lambda: 0.5}
    rx:  {n_elements: 8}
    ris: {n_elements: 64, phase_bits: 2}     # phase_bits optional
    budget: {noise_power: 1.0, total_power: 1.0, p_max: 1.0, bandwidth: 1.0}
    solver: {eps_conv: 1.0e-4, max_iterations: 1000, rank_selection: induction}
    hard_threshold: false
    paths_tx_ris:            # theta_t on the TX grid, theta_r on the RIS grid
      - {power_db: 22, phase_deg: 0, theta_t: 1, theta_r: 10}
    paths_ris_rx:            # theta_t on the RIS grid, theta_r on the RX grid
      - {magnitude: 1.0, theta_t: 5, theta_r: 0}
    paths_direct: []

Each path gives ``|beta|`` either as ``magnitude`` or as ``power_db``
(``|beta|^2`` in dB) plus an optional ``phase_deg`` and ``tau``.
``rank_selection`` is ``induction`` (solve every rank) or ``uniform``
(pick the rank under uniform shares, then solve once).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from . import alloc
from .alloc import SolverConfig
from .channel import (ArrayGeometry, ChannelError, PathDescriptor,
                      VirtualChannel, build_virtual_channel, hard_threshold, nonzero_tx_beams)
from .direct import LinkBudget, direct_link_capacity
from .reflection import (RISEncoding, pair_beams, quantize_phases, shared_beams,
                         shift_phase_param, synthesize_phase_vector)

__all__ = ["ScenarioError", "Scenario", "load_scenario", "parse_scenario", "run_scenario",
           "pipeline_snrs", "recompute_capacity"]

TWO_PI = 2.0 * math.pi


class ScenarioError(ValueError):
    """Invalid scenario; ``details`` is merged into the CLI error document."""

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.details = details


@dataclass(frozen=True)
class Scenario:
    tx: ArrayGeometry
    rx: ArrayGeometry
    ris: ArrayGeometry
    paths_tx_ris: tuple = ()
    paths_ris_rx: tuple = ()
    paths_direct: tuple = ()
    budget: LinkBudget = LinkBudget()
    solver: SolverConfig = SolverConfig()
    seed: int = 0
    name: str = "scenario"
    rank_selection: str = "induction"
    phase_bits: int | None = None
    apply_hard_threshold: bool = False
    extra: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        has_reflection = bool(self.paths_tx_ris) and bool(self.paths_ris_rx)
        if bool(self.paths_tx_ris) != bool(self.paths_ris_rx):
            raise ScenarioError("both RIS legs (paths_tx_ris and paths_ris_rx) are needed "
                                "for a reflected link")
        if not (has_reflection or self.paths_direct):
            raise ScenarioError("scenario needs direct paths or both RIS legs")
        if self.rank_selection not in ("induction", "uniform"):
            raise ScenarioError(f"unknown rank_selection {self.rank_selection!r}")
        if self.phase_bits is not None and self.phase_bits < 1:
            raise ScenarioError("phase_bits must be >= 1")

    @property
    def mode(self) -> str:
        if self.paths_tx_ris and self.paths_direct:
            return "composite"
        return "reflection" if self.paths_tx_ris else "direct"


def _angle(value: float, units: str, n: int) -> float:
    theta = TWO_PI * value / n if units == "grid" else float(value)
    return theta % TWO_PI


def _parse_path(doc: dict, units: str, n_t: int, n_r: int, where: str) -> PathDescriptor:
    if not isinstance(doc, dict):
        raise ScenarioError(f"{where}: path must be a mapping")
    if ("magnitude" in doc) == ("power_db" in doc):
        raise ScenarioError(f"{where}: give exactly one of 'magnitude' or 'power_db'")
    mag = float(doc["magnitude"]) if "magnitude" in doc else 10.0 ** (float(doc["power_db"]) / 20.0)
    phase = math.radians(float(doc.get("phase_deg", 0.0)))
    try:
        return PathDescriptor(mag * complex(math.cos(phase), math.sin(phase)),
                              _angle(doc["theta_t"], units, n_t),
                              _angle(doc["theta_r"], units, n_r),
                              float(doc.get("tau", 0.0)))
    except KeyError as exc:
        raise ScenarioError(f"{where}: missing field {exc.args[0]!r}") from None


def _geometry(doc: dict | None, where: str) -> ArrayGeometry:
    if not isinstance(doc, dict) or "n_elements" not in doc:
        raise ScenarioError(f"{where}: 'n_elements' is required")
    try:
        return ArrayGeometry(int(doc["n_elements"]), float(doc.get("spacing_over_lambda", 0.5)))
    except ChannelError as exc:
        raise ScenarioError(f"{where}: {exc}") from None


def parse_scenario(doc: dict, name: str | None = None) -> Scenario:
    """Validate a parsed scenario mapping."""
    if not isinstance(doc, dict):
        raise ScenarioError("scenario document must be a mapping")
    units = doc.get("units", "grid")
    if units not in ("grid", "radians"):
        raise ScenarioError(f"units must be 'grid' or 'radians', got {units!r}")
    tx = _geometry(doc.get("tx"), "tx")
    rx = _geometry(doc.get("rx"), "rx")
    paths_tx_ris = doc.get("paths_tx_ris") or []
    paths_ris_rx = doc.get("paths_ris_rx") or []
    ris_doc = doc.get("ris")
    if ris_doc is None and not (paths_tx_ris or paths_ris_rx):
        ris_doc = {"n_elements": 1}
    ris = _geometry(ris_doc, "ris")
    legs = {
        "paths_tx_ris": (paths_tx_ris, tx.n_elements, ris.n_elements),
        "paths_ris_rx": (paths_ris_rx, ris.n_elements, rx.n_elements),
        "paths_direct": (doc.get("paths_direct") or [], tx.n_elements, rx.n_elements),
    }
    parsed = {}
    for key, (items, n_t, n_r) in legs.items():
        parsed[key] = tuple(_parse_path(p, units, n_t, n_r, f"{key}[{i}]")
                            for i, p in enumerate(items))
    solver_doc = dict(doc.get("solver") or {})
    rank_selection = solver_doc.pop("rank_selection", "induction")
    try:
        budget = LinkBudget(**(doc.get("budget") or {}))
        solver = SolverConfig(**solver_doc)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(str(exc)) from None
    bits = ris_doc.get("phase_bits") if isinstance(ris_doc, dict) else None
    return Scenario(
        tx=tx, rx=rx, ris=ris, budget=budget, solver=solver,
        seed=int(doc.get("seed", 0)), name=str(doc.get("name", name or "scenario")),
        rank_selection=rank_selection, phase_bits=None if bits is None else int(bits),
        apply_hard_threshold=bool(doc.get("hard_threshold", False)), **parsed)


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ScenarioError(f"cannot parse {path}: {exc}") from None
    return parse_scenario(doc, name=path.stem)


def _channel(paths, tx, rx, label: str, threshold: bool) -> VirtualChannel:
    try:
        h = build_virtual_channel(paths, tx, rx)
    except ChannelError as exc:
        raise ScenarioError(f"{label}: {exc}", channel=label) from None
    if threshold:
        h = hard_threshold(h)
    if not h.row_sparse:
        raise ScenarioError(f"{label} channel is not row-sparse", channel=label,
                            rows=h.dense_rows())
    return h


@dataclass
class _Pipeline:
    scenario: Scenario
    h1: VirtualChannel | None
    h2: VirtualChannel | None
    hd: VirtualChannel | None
    pairs: list
    direct_beams: list
    snr_reflected: np.ndarray
    snr_direct: np.ndarray


def pipeline_snrs(sc: Scenario) -> _Pipeline:
    """Build and validate the channels, pair beams and derive per-beam SNRs."""
    thr = sc.apply_hard_threshold
    h1 = h2 = hd = None
    pairs, direct_beams = [], []
    if sc.paths_tx_ris:
        h1 = _channel(sc.paths_tx_ris, sc.tx, sc.ris, "tx_ris", thr)
        h2 = _channel(sc.paths_ris_rx, sc.ris, sc.rx, "ris_rx", thr)
        pairs = pair_beams(h1, h2, sc.budget)
    if sc.paths_direct:
        hd = _channel(sc.paths_direct, sc.tx, sc.rx, "direct", thr)
        direct_beams = nonzero_tx_beams(hd)
    if h1 is not None and hd is not None:
        aods, aoas = shared_beams(h1, h2, hd)
        if aods or aoas:
            raise ScenarioError("direct and reflected channels must not share beams",
                                shared_aods=aods, shared_aoas=aoas)
    b = sc.budget
    # Direct-only links use the per-antenna budget N_T * p_max.
    direct_power = b.total_power if pairs else sc.tx.n_elements * b.p_max
    snr_r = np.array([p.snr_normalized for p in pairs])
    snr_d = np.array([g * direct_power / b.noise_power for _, g in direct_beams])
    return _Pipeline(sc, h1, h2, hd, pairs, direct_beams, snr_r, snr_d)


def _allocate(pl: _Pipeline) -> alloc.AllocationResult:
    sc = pl.scenario
    uniform = sc.rank_selection == "uniform"
    if pl.pairs and pl.direct_beams:
        fn = alloc.joint_power_dir_ris_alloc_2 if uniform else alloc.joint_power_dir_ris_alloc_1
        return fn(pl.snr_direct, pl.snr_reflected, sc.solver)
    if pl.pairs:
        fn = alloc.joint_power_ris_alloc_2 if uniform else alloc.joint_power_ris_alloc_1
        return fn(pl.snr_reflected, sc.solver)
    res = direct_link_capacity(pl.hd, sc.budget)
    q = res.allocation.levels / res.allocation.total
    return alloc.AllocationResult(
        rank=int(np.count_nonzero(q > 0)), r=np.zeros(0), q_reflected=np.zeros(0),
        q_direct=q, capacity=res.capacity / sc.budget.bandwidth, iterations=1,
        converged=True, snr_reflected=np.zeros(0), snr_direct=pl.snr_direct)


def _ris_config(pl: _Pipeline, result: alloc.AllocationResult) -> dict | None:
    if not pl.pairs:
        return None
    sc = pl.scenario
    n_s = sc.ris.n_elements
    active = [j for j, rj in enumerate(result.r) if rj > 0]
    if not active:
        return {"n_elements": n_s, "phase_bits": sc.phase_bits, "subarrays": [],
                "element_phases": [0.0] * n_s}
    sizes = np.array([result.r[j] for j in active])
    sizes = sizes / sizes.sum()
    params = [shift_phase_param(pl.pairs[j].shift, n_s) for j in active]
    enc = RISEncoding(sizes, params, n_s)
    vec = synthesize_phase_vector(enc)
    if sc.phase_bits:
        vec = quantize_phases(vec, sc.phase_bits)
    subarrays = []
    start = 0
    for j, count, phi in zip(active, enc.counts, params):
        subarrays.append({"pair": j, "first_element": start, "elements": count,
                          "shift": pl.pairs[j].shift, "phase_param": phi})
        start += count
    return {"n_elements": n_s, "phase_bits": sc.phase_bits, "subarrays": subarrays,
            "element_phases": [float(a) for a in np.angle(vec)]}


def run_scenario(sc: Scenario) -> dict:
    """Run the full pipeline and return the result document."""
    pl = pipeline_snrs(sc)
    res = _allocate(pl)
    w = sc.budget.bandwidth
    reflected = []
    for j, p in enumerate(pl.pairs):
        reflected.append({
            "incident_row": p.incident_row, "tx_col": p.tx_col, "outgoing_col": p.outgoing_col,
            "shift": p.shift, "gain": p.gain, "snr": p.snr_normalized,
            "snr_db": 10.0 * math.log10(p.snr_normalized),
            "r": float(res.r[j]), "q": float(res.q_reflected[j])})
    direct = []
    for j, (col, g) in enumerate(pl.direct_beams):
        direct.append({"tx_col": col, "gain": g, "snr": float(pl.snr_direct[j]),
                       "snr_db": 10.0 * math.log10(pl.snr_direct[j]),
                       "q": float(res.q_direct[j])})
    return {
        "scenario": sc.name,
        "mode": sc.mode,
        "bandwidth": w,
        "capacity": w * res.capacity,
        "capacity_reflected": w * res.capacity_reflected,
        "capacity_direct": w * res.capacity_direct,
        "rank": res.rank,
        "n_reflected_used": res.n_reflected_used,
        "iterations": res.iterations,
        "converged": res.converged,
        "reflected": reflected,
        "direct": direct,
        "ris": _ris_config(pl, res),
    }


def recompute_capacity(doc: dict) -> float:
    """Capacity implied by the per-beam ``r``, ``q`` and ``snr`` fields of a result document."""
    c = sum(math.log2(1.0 + b["r"] ** 2 * b["q"] * b["snr"]) for b in doc["reflected"])
    c += sum(math.log2(1.0 + b["q"] * b["snr"]) for b in doc["direct"])
    return doc["bandwidth"] * c
