"""Seeded generators for synthetic grouped hypothesis streams.

Every scenario is a pure function of its spec (including the seed): the same
spec always produces the same (group ids, truth labels, p-values) triple.
Null hypotheses draw z from the standard normal, so their two-sided p-values
are exactly Uniform(0, 1); true hypotheses draw z from a unit-variance normal
whose mean is set by the strength profile.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import erfc as _erfc

STRUCTURES = ("block", "interleaved", "unbalanced")
PATTERNS = ("fixed", "random", "markov")
STRENGTHS = ("constant", "increasing", "decreasing")

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class ScenarioSpec:
    """Complete generative description of one simulated stream.

    Args:
        structure: group arrival order — "block" (group by group),
            "interleaved" (cycling 1..G), or "unbalanced" (Markov chain with
            stay probability 1 - p1 and uniform jumps).
        pattern: which hypotheses are true — "fixed" (first s% of groups,
            first k% of features inside each), "random" (uniformly sampled
            groups and features of the same sizes), or "markov" (two-state
            hidden chain emitting labels, ignoring group structure).
        strength: mean profile of true z-statistics — "constant" (1.5 * beta),
            "increasing" (beta * (1 + t / total)) or "decreasing"
            (beta * (2 - t / total)), t being the running count of true
            signals.
        G: number of groups in the group layer.
        n: hypotheses per group (balanced structures).
        s: percent of groups that are true.
        k: percent of true features within each true group.
        beta: effect-size parameter.
        alpha: target FDR level carried along for the procedures.
        eta: discovery-count offset carried along for mFDR and wealth.
        seed: 64-bit generator seed.
        p1: jump probability of the unbalanced chain.
        N: total stream length; defaults to n * G and must equal it for
            balanced structures.
    """

    structure: str = "block"
    pattern: str = "fixed"
    strength: str = "constant"
    G: int = 20
    n: int = 10
    s: float = 20.0
    k: float = 100.0
    beta: float = 2.0
    alpha: float = 0.1
    eta: float = 1.0
    seed: int = 0
    p1: float = 0.5
    N: Optional[int] = None

    def __post_init__(self) -> None:
        if self.structure not in STRUCTURES:
            raise ValueError(f"unknown structure: {self.structure!r}")
        if self.pattern not in PATTERNS:
            raise ValueError(f"unknown pattern: {self.pattern!r}")
        if self.strength not in STRENGTHS:
            raise ValueError(f"unknown strength: {self.strength!r}")
        if self.G < 1 or self.n < 1:
            raise ValueError("G and n must be positive")
        if not 0.0 <= self.s <= 100.0 or not 0.0 <= self.k <= 100.0:
            raise ValueError("s and k are percentages in [0, 100]")
        if self.beta < 0.0:
            raise ValueError(f"beta must be non-negative, got {self.beta}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.eta <= 0.0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        if not 0.0 <= self.p1 <= 1.0:
            raise ValueError(f"p1 must lie in [0, 1], got {self.p1}")
        if self.N is not None:
            if self.N < 1:
                raise ValueError("N must be positive")
            if self.structure != "unbalanced" and self.N != self.n * self.G:
                raise ValueError(
                    f"balanced structures require N = n * G, "
                    f"got N={self.N} with n={self.n}, G={self.G}"
                )

    @property
    def total(self) -> int:
        return self.N if self.N is not None else self.n * self.G


@dataclass(frozen=True)
class StreamData:
    """Realized arrays of one scenario: group ids, truth labels, p-values."""

    groups: np.ndarray
    truths: np.ndarray
    pvalues: np.ndarray


def _percent_count(percent: float, total: int) -> int:
    # round up so any positive percentage yields at least one pick;
    # snap near-integers first to keep float noise out of the ceiling
    return min(total, math.ceil(round(percent * total / 100.0, 9)))


def gen_structure(spec: ScenarioSpec, rng: np.random.Generator) -> np.ndarray:
    """Generate the group id (1-based) of each arrival in the group layer.

    block repeats each group id n times in order; interleaved cycles 1..G
    n times; unbalanced walks a Markov chain over {1..G} starting at group 1
    with stay probability 1 - p1 and a uniform jump otherwise.
    """
    if spec.structure == "block":
        return np.repeat(np.arange(1, spec.G + 1), spec.n)
    if spec.structure == "interleaved":
        return np.tile(np.arange(1, spec.G + 1), spec.n)
    if spec.G < 2:
        raise ValueError("unbalanced structure requires at least two groups")
    groups = np.empty(spec.total, dtype=np.int64)
    current = 1
    for i in range(spec.total):
        if i > 0 and rng.random() < spec.p1:
            offset = int(rng.integers(1, spec.G))
            current = (current - 1 + offset) % spec.G + 1
        groups[i] = current
    return groups


def gen_truth(
    spec: ScenarioSpec, structure: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Generate 0/1 truth labels for each arrival.

    The fixed pattern is deterministic given the structure and consumes no
    randomness.  The markov pattern assigns labels from a hidden two-state
    chain (stationary: independent fair coin; eruption: sticky labels with
    persistence 0.9) and ignores the group structure entirely.
    """
    total = len(structure)
    truths = np.zeros(total, dtype=np.int8)
    if spec.pattern == "markov":
        stationary = True
        previous: Optional[int] = None
        for i in range(total):
            if stationary or previous is None:
                truths[i] = 1 if rng.random() < 0.5 else 0
            else:
                truths[i] = previous if rng.random() < 0.9 else 1 - previous
            previous = int(truths[i])
            if rng.random() < 0.1:
                stationary = not stationary
        return truths

    order = _first_appearance_order(structure)
    count = _percent_count(spec.s, spec.G)
    count = min(count, len(order))
    if count == 0:
        return truths
    if spec.pattern == "fixed":
        chosen = order[:count]
    else:
        chosen = list(rng.choice(np.asarray(order), size=count, replace=False))
    chosen_set = set(int(g) for g in chosen)
    for group in order:
        if group not in chosen_set:
            continue
        positions = np.flatnonzero(structure == group)
        picks = _percent_count(spec.k, len(positions))
        if picks == 0:
            continue
        if spec.pattern == "fixed":
            truths[positions[:picks]] = 1
        else:
            truths[rng.choice(positions, size=picks, replace=False)] = 1
    return truths


def _first_appearance_order(structure: np.ndarray) -> list[int]:
    seen: set[int] = set()
    order: list[int] = []
    for g in structure:
        g = int(g)
        if g not in seen:
            seen.add(g)
            order.append(g)
    return order


def signal_means(theta, strength: str, beta: float) -> np.ndarray:
    """Mean of the z-statistic for each arrival under a strength profile.

    Nulls have mean 0.  For the increasing/decreasing profiles the t-th true
    signal (t = running count, 1-based) gets mean beta * (1 + t / total) or
    beta * (2 - t / total); with no true signals the profile is irrelevant.
    """
    theta = np.asarray(theta)
    means = np.zeros(len(theta), dtype=float)
    total = int(theta.sum())
    if total == 0:
        return means
    mask = theta == 1
    if strength == "constant":
        means[mask] = 1.5 * beta
        return means
    ranks = np.cumsum(theta)[mask] / total
    if strength == "increasing":
        means[mask] = beta * (1.0 + ranks)
    elif strength == "decreasing":
        means[mask] = beta * (2.0 - ranks)
    else:
        raise ValueError(f"unknown strength: {strength!r}")
    return means


def gen_pvalues(
    theta, strength: str, beta: float, rng: np.random.Generator
) -> np.ndarray:
    """Draw z ~ N(mean, 1) per arrival and convert to two-sided p-values."""
    means = signal_means(theta, strength, beta)
    z = means + rng.standard_normal(len(means))
    return two_sided_p_array(z)


def two_sided_p(z: float) -> float:
    """Two-sided standard-normal p-value, 2 * (1 - Phi(|z|)).

    Computed as erfc(|z| / sqrt(2)), accurate to well below 1e-12 absolute.
    """
    if not math.isfinite(z):
        raise ValueError(f"non-finite z-statistic: {z}")
    return math.erfc(abs(z) / _SQRT2)


def two_sided_p_array(z) -> np.ndarray:
    """Vectorized two-sided standard-normal p-values."""
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise ValueError("non-finite z-statistic in input")
    return _erfc(np.abs(z) / _SQRT2)


def make_stream(spec: ScenarioSpec) -> StreamData:
    """Realize a scenario: structure, then truth, then p-values, one seed."""
    rng = np.random.default_rng(spec.seed)
    groups = gen_structure(spec, rng)
    truths = gen_truth(spec, groups, rng)
    pvalues = gen_pvalues(truths, spec.strength, spec.beta, rng)
    return StreamData(groups=groups, truths=truths, pvalues=pvalues)
