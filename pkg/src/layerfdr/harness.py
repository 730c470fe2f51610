"""Seeded experiment executor: replicate runs, method/effect-size grids, CSVs.

Single-layer methods (GAI, LORD, LOND) test the stream with singleton groups
only; their group-level metrics are computed post hoc from the individual
rejections.  Multi-layer methods run two layers side by side — individual
singletons plus the scenario's group structure — so their individual and
group rows always come from the same paired runs.

Per-replicate seeds are split from the master seed by hashing
(master_seed, method, beta, replicate) with SHA-256, so results per method
are independent of method ordering and adding grid values never perturbs
existing cells.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

from .core import HypothesisEvent, truth_state_from_events
from .metrics import AggregateResult, LayerTally, aggregate, layer_tally, tally_from_sets
from .procedures import METHODS, make_procedure, replay
from .simgen import ScenarioSpec, StreamData, make_stream

LAYER_NAMES = ("individual", "group")

#: default effect-size grid for sweeps
DEFAULT_BETA_GRID = tuple(x / 2.0 for x in range(1, 11))

RESULTS_HEADER = "method,beta,layer,fdr,fdr_se,mfdr,mfdr_se,power,power_se,replicates"


@dataclass(frozen=True)
class SweepSpec:
    """A (method x beta x replicate) grid over one base scenario."""

    scenario: ScenarioSpec
    beta_grid: tuple[float, ...] = DEFAULT_BETA_GRID
    methods: tuple[str, ...] = METHODS
    replicates: int = 100
    master_seed: int = 0

    def __post_init__(self) -> None:
        if self.replicates < 1:
            raise ValueError("at least one replicate is required")
        if not self.beta_grid:
            raise ValueError("beta grid must be nonempty")
        if not self.methods:
            raise ValueError("method list must be nonempty")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ValueError(f"unknown methods: {unknown}")
        if len(set(self.methods)) != len(self.methods):
            raise ValueError("duplicate method names")


@dataclass(frozen=True)
class ReplicateRun:
    """Decision log and per-layer tallies of a single replicate."""

    records: tuple
    tallies: dict[str, LayerTally]


def replicate_seed(master_seed: int, method: str, beta: float, r: int) -> int:
    """Stable 64-bit seed for one grid cell replicate."""
    key = f"{master_seed}|{method}|{beta!r}|{r}".encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "big")


def multilayer_events(data: StreamData) -> list[HypothesisEvent]:
    """Events with the individual singleton layer first, group layer second."""
    return [
        HypothesisEvent(t=i + 1, p=float(p), group_index=(i + 1, int(g)), truth=int(th))
        for i, (p, g, th) in enumerate(zip(data.pvalues, data.groups, data.truths))
    ]


def singleton_events(data: StreamData) -> list[HypothesisEvent]:
    """Events carrying only the individual singleton layer."""
    return [
        HypothesisEvent(t=i + 1, p=float(p), group_index=(i + 1,), truth=int(th))
        for i, (p, th) in enumerate(zip(data.pvalues, data.truths))
    ]


def run_replicate(scenario: ScenarioSpec, method: str, seed: int) -> ReplicateRun:
    """One seeded run of one method, tallied at both reporting layers.

    An alpha-investing halt is recorded in the log, not raised.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method name: {method!r}")
    data = make_stream(replace(scenario, seed=seed))
    if method.startswith("ml-"):
        events = multilayer_events(data)
        procedure = make_procedure(method, 2, scenario.alpha, scenario.eta)
        records = replay(procedure, events)
        truth = truth_state_from_events(events, 2)
        tallies = {
            "individual": layer_tally(records, truth, 0),
            "group": layer_tally(records, truth, 1),
        }
    else:
        events = singleton_events(data)
        procedure = make_procedure(method, 1, scenario.alpha, scenario.eta)
        records = replay(procedure, events)
        truth = truth_state_from_events(events, 1)
        selected = {
            int(g) for g, record in zip(data.groups, records) if record.rejected
        }
        true_groups = {int(g) for g, th in zip(data.groups, data.truths) if th == 1}
        tallies = {
            "individual": layer_tally(records, truth, 0),
            "group": tally_from_sets(selected, true_groups),
        }
    return ReplicateRun(records=tuple(records), tallies=tallies)


def run_cell(
    scenario: ScenarioSpec, method: str, beta: float, replicates: int, master_seed: int
) -> dict[str, list[LayerTally]]:
    """All replicate tallies of one (method, beta) cell, keyed by layer."""
    per_layer: dict[str, list[LayerTally]] = {name: [] for name in LAYER_NAMES}
    cell_scenario = replace(scenario, beta=beta)
    for r in range(replicates):
        seed = replicate_seed(master_seed, method, beta, r)
        run = run_replicate(cell_scenario, method, seed)
        for name in LAYER_NAMES:
            per_layer[name].append(run.tallies[name])
    return per_layer


def run_sweep(sweep: SweepSpec) -> list[AggregateResult]:
    """Aggregate every (method, beta, layer) cell of the sweep.

    Rows come out sorted by canonical method order, then beta, then layer,
    so emission is deterministic regardless of the input method order.
    """
    rows: list[AggregateResult] = []
    for method in sorted(sweep.methods, key=METHODS.index):
        for beta in sweep.beta_grid:
            per_layer = run_cell(
                sweep.scenario, method, beta, sweep.replicates, sweep.master_seed
            )
            for name in LAYER_NAMES:
                rows.append(
                    aggregate(
                        per_layer[name],
                        sweep.scenario.eta,
                        method=method,
                        beta=beta,
                        layer=name,
                    )
                )
    return rows


def _fmt(value: float) -> str:
    return f"{value:.6g}"


def format_result_row(row: AggregateResult) -> str:
    return ",".join(
        [
            row.method,
            _fmt(row.beta),
            row.layer,
            _fmt(row.fdr),
            _fmt(row.fdr_se),
            _fmt(row.mfdr),
            _fmt(row.mfdr_se),
            _fmt(row.power),
            _fmt(row.power_se),
            str(row.replicates),
        ]
    )


def emit_results(rows: Sequence[AggregateResult], out_dir) -> list[Path]:
    """Write the results table plus one plot-data file per metric and layer.

    ``results.csv`` holds every aggregate row; the six ``panel_*.csv`` files
    hold one beta-indexed column per method for power/fdr/mfdr at each layer.
    Values carry six significant digits; repeated runs produce identical
    bytes.
    """
    rows = list(rows)
    if not rows:
        raise ValueError("empty result table")
    methods = sorted({row.method for row in rows}, key=METHODS.index)
    betas = sorted({row.beta for row in rows})
    cells = {(row.method, row.beta, row.layer): row for row in rows}
    missing = [
        (m, b, layer)
        for m in methods
        for b in betas
        for layer in LAYER_NAMES
        if (m, b, layer) not in cells
    ]
    if missing:
        raise ValueError(f"result table is not a full grid; missing {missing[:3]}")

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    ordered = sorted(
        rows, key=lambda r: (METHODS.index(r.method), r.beta, LAYER_NAMES.index(r.layer))
    )
    results_path = out / "results.csv"
    lines = [RESULTS_HEADER] + [format_result_row(row) for row in ordered]
    results_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    written.append(results_path)

    for metric in ("power", "fdr", "mfdr"):
        for layer in LAYER_NAMES:
            path = out / f"panel_{metric}_{layer}.csv"
            lines = ["beta," + ",".join(methods)]
            for beta in betas:
                values = [
                    _fmt(getattr(cells[(m, beta, layer)], metric)) for m in methods
                ]
                lines.append(_fmt(beta) + "," + ",".join(values))
            path.write_text("\n".join(lines) + "\n", encoding="utf-8")
            written.append(path)
    return written


def standard_scenarios(alpha: float = 0.1, eta: float = 1.0) -> dict[str, ScenarioSpec]:
    """The shipped benchmark grid: every unique structure/pattern/strength
    panel at the baseline sizes (G=20 groups of n=10, s=20, alpha=0.1)."""
    base = ScenarioSpec(G=20, n=10, s=20.0, k=100.0, alpha=alpha, eta=eta)
    panels = {
        "block-fixed-constant": base,
        "interleaved-fixed-constant": replace(base, structure="interleaved"),
        "unbalanced-fixed-constant": replace(base, structure="unbalanced"),
        "interleaved-random-constant": replace(
            base, structure="interleaved", pattern="random"
        ),
        "interleaved-markov-constant": replace(
            base, structure="interleaved", pattern="markov"
        ),
        "block-fixed-increasing": replace(base, strength="increasing"),
        "block-fixed-decreasing": replace(base, strength="decreasing"),
        "interleaved-random-constant-k50": replace(
            base, structure="interleaved", pattern="random", k=50.0
        ),
        "interleaved-random-increasing-k50": replace(
            base, structure="interleaved", pattern="random", strength="increasing", k=50.0
        ),
        "interleaved-random-decreasing-k50": replace(
            base, structure="interleaved", pattern="random", strength="decreasing", k=50.0
        ),
    }
    return panels
