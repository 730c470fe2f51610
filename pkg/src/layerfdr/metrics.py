"""Per-layer discovery accounting and replicate aggregation.

A discovery is a group containing at least one rejected hypothesis; it is
false while the group contains no true hypothesis seen so far.  FDP is the
realized false fraction V / max(R, 1) of a single run; FDR averages FDP over
replicates, while mFDR is the ratio of mean false discoveries to mean
discoveries plus eta.  Group-level power is reported as the mean of
per-replicate ratios TD / max(T, 1).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    DecisionRecord,
    HypothesisEvent,
    TruthState,
    group_selection_sets,
)


@dataclass(frozen=True)
class LayerTally:
    """End-of-stream discovery counts for one layer of one run."""

    false_discoveries: int
    true_discoveries: int
    true_groups: int

    def __post_init__(self) -> None:
        if min(self.false_discoveries, self.true_discoveries, self.true_groups) < 0:
            raise ValueError("tally counts must be non-negative")
        if self.true_discoveries > self.true_groups:
            raise ValueError(
                f"true discoveries ({self.true_discoveries}) cannot exceed "
                f"true groups seen ({self.true_groups})"
            )

    @property
    def discoveries(self) -> int:
        return self.false_discoveries + self.true_discoveries

    @property
    def fdp(self) -> float:
        return self.false_discoveries / max(self.discoveries, 1)

    @property
    def power(self) -> float:
        return self.true_discoveries / max(self.true_groups, 1)


def tally_from_sets(selected: set[int], true_groups: set[int]) -> LayerTally:
    """Tally a selection set against the set of true groups seen."""
    hits = len(selected & true_groups)
    return LayerTally(
        false_discoveries=len(selected) - hits,
        true_discoveries=hits,
        true_groups=len(true_groups),
    )


def layer_tally(
    decisions: Sequence[DecisionRecord], truth_state: TruthState, layer: int
) -> LayerTally:
    """Recompute one layer's tally from a full decision log."""
    selected = group_selection_sets(decisions, truth_state.layers)[layer]
    return tally_from_sets(selected, truth_state.true_groups[layer])


class TallyTracker:
    """Incrementally maintained tallies across a stream.

    Feeding each (event, record) pair keeps per-layer counts identical to a
    full recomputation at every prefix.  A group discovered while null is
    reclassified as true the moment a true hypothesis inside it arrives.
    """

    def __init__(self, layers: int):
        if layers < 1:
            raise ValueError("at least one layer is required")
        self._selected: list[set[int]] = [set() for _ in range(layers)]
        self._true: list[set[int]] = [set() for _ in range(layers)]
        self._false_count = [0] * layers
        self.layers = layers

    def update(self, event: HypothesisEvent, record: DecisionRecord) -> None:
        if event.truth is None:
            raise ValueError("truth required")
        for m in range(self.layers):
            group = event.group_index[m]
            if event.truth == 1 and group not in self._true[m]:
                self._true[m].add(group)
                if group in self._selected[m]:
                    self._false_count[m] -= 1
            if record.rejected and group not in self._selected[m]:
                self._selected[m].add(group)
                if group not in self._true[m]:
                    self._false_count[m] += 1

    def tally(self, layer: int) -> LayerTally:
        selected = self._selected[layer]
        return LayerTally(
            false_discoveries=self._false_count[layer],
            true_discoveries=len(selected) - self._false_count[layer],
            true_groups=len(self._true[layer]),
        )


@dataclass(frozen=True)
class AggregateResult:
    """Replicate-averaged error and power estimates for one (method, beta, layer)."""

    method: str
    beta: float
    layer: str
    fdr: float
    fdr_se: float
    mfdr: float
    mfdr_se: float
    power: float
    power_se: float
    replicates: int


def _mean_se(values: np.ndarray) -> float:
    if len(values) < 2:
        return 0.0
    return float(values.std(ddof=1) / np.sqrt(len(values)))


def _bootstrap_ratio_se(
    v: np.ndarray, r: np.ndarray, eta: float, resamples: int, seed: int
) -> float:
    """Nonparametric bootstrap SE of mean(V) / (mean(R) + eta) over replicates."""
    n = len(v)
    if n < 2 or resamples < 2:
        return 0.0
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, n, size=(resamples, n))
    ratios = v[idx].mean(axis=1) / (r[idx].mean(axis=1) + eta)
    return float(ratios.std(ddof=1))


def aggregate(
    tallies: Sequence[LayerTally],
    eta: float,
    *,
    method: str = "",
    beta: float = 0.0,
    layer: str = "",
    bootstrap: int = 1000,
    bootstrap_seed: int = 0,
) -> AggregateResult:
    """Aggregate replicate tallies sharing one (method, beta, layer) cell.

    FDR and power are means of per-replicate ratios with plain standard
    errors; mFDR is a ratio of means, so its SE comes from a seeded
    nonparametric bootstrap over replicates (ratio-of-means has no clean
    closed form).
    """
    if not tallies:
        raise ValueError("at least one replicate is required")
    if eta <= 0.0:
        raise ValueError(f"eta must be positive, got {eta}")
    v = np.array([t.false_discoveries for t in tallies], dtype=float)
    r = np.array([t.discoveries for t in tallies], dtype=float)
    fdps = np.array([t.fdp for t in tallies], dtype=float)
    powers = np.array([t.power for t in tallies], dtype=float)
    return AggregateResult(
        method=method,
        beta=beta,
        layer=layer,
        fdr=float(fdps.mean()),
        fdr_se=_mean_se(fdps),
        mfdr=float(v.mean() / (r.mean() + eta)),
        mfdr_se=_bootstrap_ratio_se(v, r, eta, bootstrap, bootstrap_seed),
        power=float(powers.mean()),
        power_se=_mean_se(powers),
        replicates=len(tallies),
    )
