"""Independent reference implementations and diagnostic probes.

Nothing in this module shares logic with the production step machines: the
single-layer references are separate, deliberately naive transcriptions of
the per-step rules, and the counting diagnostics evaluate their defining
formulas directly from decision logs.  Agreement with the engines is
therefore evidence of correctness rather than a tautology.
"""

from __future__ import annotations

import math
from dataclasses import replace
from typing import Sequence

import numpy as np

from .core import DecisionRecord, HypothesisEvent
from .metrics import TallyTracker
from .procedures import AlphaInvesting, replay
from .simgen import ScenarioSpec, make_stream


def single_layer_gai_reference(
    pvalues: Sequence[float], alpha: float, eta: float = 1.0
) -> tuple[list[int], int]:
    """Classic alpha-investing with the constant spend/reward schedule.

    Returns (decisions, tested_steps).  Events arriving after the wealth
    crosses zero are not tested and decided 0.
    """
    wealth = alpha * eta
    spend = alpha / (1.0 - alpha)
    reward = spend + alpha
    decisions: list[int] = []
    tested = 0
    for p in pvalues:
        if wealth <= 0.0:
            decisions.append(0)
            continue
        tested += 1
        if p < alpha:
            decisions.append(1)
            wealth = wealth + reward - spend
        else:
            decisions.append(0)
            wealth = wealth - spend
    return decisions, tested


def single_layer_lond_reference(
    pvalues: Sequence[float], alpha: float
) -> tuple[list[int], list[float]]:
    """Classic LOND: level sequence element i scaled by (discoveries + 1)."""
    decisions: list[int] = []
    thresholds: list[float] = []
    discoveries = 0
    for i, p in enumerate(pvalues, start=1):
        level = alpha * 6.0 / (math.pi ** 2 * i * i)
        threshold = min(1.0, level * (discoveries + 1))
        thresholds.append(threshold)
        if p < threshold:
            decisions.append(1)
            discoveries += 1
        else:
            decisions.append(0)
    return decisions, thresholds


def single_layer_lord_reference(
    pvalues: Sequence[float], alpha: float
) -> tuple[list[int], list[float]]:
    """Classic LORD: level sequence indexed by tests since last discovery."""
    decisions: list[int] = []
    thresholds: list[float] = []
    gap = 1
    for p in pvalues:
        threshold = alpha * 6.0 / (math.pi ** 2 * gap * gap)
        thresholds.append(threshold)
        if p < threshold:
            decisions.append(1)
            gap = 1
        else:
            decisions.append(0)
            gap += 1
    return decisions, thresholds


def kappa_direct(records: Sequence[DecisionRecord], layer: int, i: int) -> int:
    """Effective tests in a layer by time i, straight from the definition.

    Counts i minus the number of hypotheses among the first i whose group is
    rejected as of time i, plus the number of rejected groups as of time i.
    """
    if i < 1 or i > len(records):
        raise IndexError(f"time {i} outside the log of length {len(records)}")
    rejected: set[int] = set()
    for record in records[:i]:
        if record.layers[layer].newly_rejected:
            rejected.add(record.group_index[layer])
    in_rejected = sum(
        1 for record in records[:i] if record.group_index[layer] in rejected
    )
    return i - in_rejected + len(rejected)


def kappa_direct_trajectory(
    records: Sequence[DecisionRecord], layer: int
) -> np.ndarray:
    """``kappa_direct`` for every prefix at once (same counting identity).

    A hypothesis starts counting toward the collapsed total at the later of
    its own arrival and its group's rejection time, which turns the double
    count into two cumulative histograms.
    """
    n = len(records)
    never = n + 1
    group_rejected_at: dict[int, int] = {}
    for idx, record in enumerate(records):
        if record.layers[layer].newly_rejected:
            group_rejected_at[record.group_index[layer]] = idx + 1
    event_from = np.empty(n, dtype=np.int64)
    for idx, record in enumerate(records):
        rejected_at = group_rejected_at.get(record.group_index[layer], never)
        event_from[idx] = max(idx + 1, rejected_at)
    in_rejected = np.cumsum(np.bincount(event_from, minlength=never + 1))[1 : n + 1]
    group_times = np.fromiter(group_rejected_at.values(), dtype=np.int64, count=len(group_rejected_at))
    groups_rejected = np.cumsum(np.bincount(group_times, minlength=never + 1))[1 : n + 1]
    return np.arange(1, n + 1) - in_rejected + groups_rejected


def per_discovery_fdp(
    records: Sequence[DecisionRecord], truths: Sequence[int], layer: int
) -> list[float]:
    """False discovery proportion of one layer at each of its discovery times.

    The k-th entry is the number of rejected-but-null groups divided by k,
    evaluated at the step of the k-th group discovery (truth accumulated
    through that same step).
    """
    selected: set[int] = set()
    true_groups: set[int] = set()
    false_count = 0
    out: list[float] = []
    for record, truth in zip(records, truths):
        group = record.group_index[layer]
        if truth == 1 and group not in true_groups:
            true_groups.add(group)
            if group in selected:
                false_count -= 1
        if record.rejected and group not in selected:
            selected.add(group)
            if group not in true_groups:
                false_count += 1
            out.append(false_count / len(selected))
    return out


def balance_trajectories(
    events: Sequence[HypothesisEvent],
    records: Sequence[DecisionRecord],
    alpha: float,
    eta: float,
) -> np.ndarray:
    """Per-layer path of alpha*R - V + alpha*eta - W over one investing run.

    Index j of the returned (layers, N+1) array is the value after j steps;
    index 0 is exactly zero because R = V = 0 and W = alpha * eta at start.
    The path freezes once the stream halts.
    """
    layers = len(records[0].layers) if records else 0
    tracker = TallyTracker(layers)
    out = np.zeros((layers, len(records) + 1))
    for j, (event, record) in enumerate(zip(events, records), start=1):
        tracker.update(event, record)
        for m in range(layers):
            snapshot = record.layers[m]
            if snapshot.wealth is None:
                raise ValueError("balance trajectories require wealth snapshots")
            out[m, j] = (
                alpha * snapshot.rejections
                - tracker.tally(m).false_discoveries
                + alpha * eta
                - snapshot.wealth
            )
    return out


def submartingale_probe(
    scenario: ScenarioSpec, n_rep: int, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Monte Carlo check of the investing balance process for ml-GAI.

    Runs ``n_rep`` independent two-layer streams (individual singletons plus
    the scenario's group layer) and returns per-layer means and standard
    errors of the balance path at every step count j = 0..N.  Because the
    process starts at zero and drifts upward in expectation, the caller
    asserts mean(j) >= -3 * se(j) everywhere.
    """
    if n_rep < 1:
        raise ValueError("at least one replicate is required")
    total = scenario.total
    sums = np.zeros((2, total + 1))
    squares = np.zeros((2, total + 1))
    rep_seeds = np.random.SeedSequence(seed).generate_state(n_rep, dtype=np.uint64)
    for rep_seed in rep_seeds:
        data = make_stream(replace(scenario, seed=int(rep_seed)))
        events = [
            HypothesisEvent(
                t=i + 1,
                p=float(p),
                group_index=(i + 1, int(g)),
                truth=int(th),
            )
            for i, (p, g, th) in enumerate(
                zip(data.pvalues, data.groups, data.truths)
            )
        ]
        procedure = AlphaInvesting(2, scenario.alpha, scenario.eta)
        records = replay(procedure, events)
        paths = balance_trajectories(events, records, scenario.alpha, scenario.eta)
        sums += paths
        squares += paths ** 2
    means = sums / n_rep
    if n_rep > 1:
        variances = np.maximum(squares / n_rep - means ** 2, 0.0) * n_rep / (n_rep - 1)
        ses = np.sqrt(variances / n_rep)
    else:
        ses = np.zeros_like(means)
    return means, ses
