"""Multi-layer online testing procedures and their threshold schedules.

Three decision rules share one skeleton: each arriving hypothesis is tested
only in the layers whose group is still undecided ("pending"), it is rejected
iff its p-value clears every pending layer's threshold, and a rejection flips
every pending layer's group to discovered.

* Alpha-investing: each layer holds a wealth budget, pays a spend charge for
  every test and earns a reward on discovery; the stream halts once any
  layer's wealth is exhausted.
* LOND: the threshold at step t is the t-th element of a summable level
  sequence scaled by (discoveries + 1); the modified variant indexes the
  sequence by the number of tests the layer has effectively performed
  instead of by raw time, which recovers the levels wasted on hypotheses
  whose group was already decided.
* LORD: the threshold is the sequence element indexed by the number of
  tests since the layer's most recent discovery (reset to 1 on discovery).

Rejection requires strict inequality p < threshold; ties are accepts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from .core import (
    DecisionRecord,
    HypothesisEvent,
    LayerConfig,
    LayerOutcome,
    LayerState,
    StreamHalted,
)

_PI_SQUARED = math.pi ** 2

#: the seven shipped method names (single-layer originals and ml variants)
METHODS = ("GAI", "LORD", "LOND", "ml-GAI", "ml-LORD", "ml-LOND", "ml-LOND_m")

UNTESTED_LITERAL = "literal"
UNTESTED_ACCEPT = "accept"


@dataclass(frozen=True)
class BetaSequence:
    """Positive level sequence whose infinite sum equals ``alpha``.

    ``inverse-square`` is the default family, alpha * 6 / (pi^2 j^2), chosen
    because its sum telescopes to alpha exactly.  ``geometric`` with ratio
    r in (0, 1) gives alpha * (1 - r) * r^(j-1), which also sums to alpha.
    """

    alpha: float
    kind: str = "inverse-square"
    ratio: float = 0.5

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.kind == "geometric" and not 0.0 < self.ratio < 1.0:
            raise ValueError(f"geometric ratio must lie in (0, 1), got {self.ratio}")
        if self.kind not in ("inverse-square", "geometric"):
            raise ValueError(f"unknown beta sequence kind: {self.kind!r}")

    def value(self, j: int) -> float:
        if j < 1:
            raise IndexError(f"beta sequence index starts at 1, got {j}")
        if self.kind == "inverse-square":
            return self.alpha * 6.0 / (_PI_SQUARED * j * j)
        return self.alpha * (1.0 - self.ratio) * self.ratio ** (j - 1)


def beta_eval(sequence: BetaSequence, j: int) -> float:
    """Evaluate the j-th element (j >= 1) of a level sequence."""
    return sequence.value(j)


PolicyRule = Callable[[int, LayerState], float]


@dataclass(frozen=True)
class SpendingPolicy:
    """Per-test level/spend/reward/power-bound rules for alpha-investing.

    Each rule receives (t, layer state) and is evaluated before the step's
    decision, so values may depend on the layer's wealth and discovery
    history but never on the current outcome.
    """

    alpha_level: PolicyRule
    spend: PolicyRule
    reward: PolicyRule
    power_bound: PolicyRule


def simple_choice(alpha: float) -> SpendingPolicy:
    """Constant schedule: level alpha, spend alpha/(1-alpha), reward spend+alpha.

    The reward sits exactly on the admissibility bound with power bound 1,
    the most conservative choice.
    """
    spend = alpha / (1.0 - alpha)
    reward = spend + alpha
    return SpendingPolicy(
        alpha_level=lambda t, state: alpha,
        spend=lambda t, state: spend,
        reward=lambda t, state: reward,
        power_bound=lambda t, state: 1.0,
    )


def constant_policy(
    alpha_level: float, spend: float, reward: float, power_bound: float = 1.0
) -> SpendingPolicy:
    """Wrap four constants as a SpendingPolicy."""
    return SpendingPolicy(
        alpha_level=lambda t, state: alpha_level,
        spend=lambda t, state: spend,
        reward=lambda t, state: reward,
        power_bound=lambda t, state: power_bound,
    )


@dataclass(frozen=True)
class PolicyReport:
    """Outcome of an admissibility scan; ``t`` is the first violating step."""

    ok: bool
    t: Optional[int] = None
    reward: Optional[float] = None
    power_cap: Optional[float] = None
    level_cap: Optional[float] = None

    def __bool__(self) -> bool:
        return self.ok


def validate_policy(
    policy: SpendingPolicy, alpha: float, horizon: int
) -> PolicyReport:
    """Scan the reward-admissibility inequality over t = 1..horizon.

    At every step the reward must satisfy
    0 <= reward <= min(spend / power_bound + alpha, spend / level + alpha + 1).
    Rules are evaluated against a pristine layer snapshot (initial wealth
    alpha, no discoveries), so state-dependent rules are spot-checked at
    that snapshot only.  Returns the first violation or an ok report.
    """
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    snapshot = LayerState(wealth=alpha)
    tolerance = 1e-12
    for t in range(1, horizon + 1):
        rho = policy.power_bound(t, snapshot)
        if not 0.0 < rho <= 1.0:
            raise ValueError(f"invalid power bound at t={t}: {rho}")
        level = policy.alpha_level(t, snapshot)
        if not 0.0 < level <= 1.0:
            raise ValueError(f"invalid significance level at t={t}: {level}")
        spend = policy.spend(t, snapshot)
        reward = policy.reward(t, snapshot)
        power_cap = spend / rho + alpha
        level_cap = spend / level + alpha + 1.0
        if reward < -tolerance or reward > min(power_cap, level_cap) + tolerance:
            return PolicyReport(
                ok=False, t=t, reward=reward, power_cap=power_cap, level_cap=level_cap
            )
    return PolicyReport(ok=True)


class OnlineProcedure:
    """Shared skeleton of the sequential multi-layer decision engines.

    One instance owns one stream.  ``step`` consumes the next event and
    returns a DecisionRecord; after an alpha-investing halt further ``step``
    calls raise StreamHalted while ``skip`` records the event as not tested.
    Replaying the same events through a freshly configured instance yields
    identical records.
    """

    records_wealth = False
    records_gap = False

    def __init__(
        self,
        layers: int,
        alpha: float,
        eta: float = 1.0,
        untested: str = UNTESTED_LITERAL,
        statistics: Optional[Sequence[Optional[Callable[[HypothesisEvent], float]]]] = None,
    ):
        if layers < 1:
            raise ValueError(f"at least one layer is required, got {layers}")
        if not 0.0 < alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
        if eta <= 0.0:
            raise ValueError(f"eta must be positive, got {eta}")
        if untested not in (UNTESTED_LITERAL, UNTESTED_ACCEPT):
            raise ValueError(f"unknown untested-hypothesis mode: {untested!r}")
        if statistics is not None and len(statistics) != layers:
            raise ValueError("one statistic transform per layer is required")
        self.layers = layers
        self.alpha = alpha
        self.eta = eta
        self.untested = untested
        self.statistics = tuple(statistics) if statistics is not None else None
        self.states = [LayerState() for _ in range(layers)]
        self.t = 0
        self.halted = False

    # -- method-specific hooks -------------------------------------------

    def _thresholds(self, t: int, pending: list[int]) -> dict[int, float]:
        raise NotImplementedError

    def _charges(self, t: int, pending: list[int]):
        return None

    def _settle(self, t: int, pending: list[int], rejected: bool, charges) -> None:
        pass

    def _exhausted(self) -> bool:
        return False

    # -- stream driving ---------------------------------------------------

    def step(self, event: HypothesisEvent) -> DecisionRecord:
        if self.halted:
            raise StreamHalted("wealth exhausted")
        self._check_event(event)
        self.t += 1
        t = self.t
        pending = [
            m
            for m, state in enumerate(self.states)
            if state.observe(event.group_index[m])
        ]
        if not pending:
            # every layer's group is already decided; nothing to test or charge
            rejected = self.untested == UNTESTED_LITERAL
            return self._finish(t, event, rejected, {})
        thresholds = self._thresholds(t, pending)
        charges = self._charges(t, pending)
        rejected = all(
            self._layer_pvalue(m, event) < thresholds[m] for m in pending
        )
        if rejected:
            for m in pending:
                self.states[m].mark_rejected(event.group_index[m], t)
        self._settle(t, pending, rejected, charges)
        return self._finish(t, event, rejected, thresholds)

    def skip(self, event: HypothesisEvent) -> DecisionRecord:
        """Record an event arriving after a halt: not tested, never rejected."""
        if not self.halted:
            raise RuntimeError("skip() is only valid after the stream has halted")
        self._check_event(event)
        self.t += 1
        for m, state in enumerate(self.states):
            state.observe(event.group_index[m])
        return self._finish(self.t, event, False, {})

    def run_pvalues(self, pvalues: Sequence[float]) -> list[DecisionRecord]:
        """Feed bare p-values as fresh singleton-group events."""
        events = [
            HypothesisEvent(
                t=self.t + i + 1,
                p=float(p),
                group_index=(self.t + i + 1,) * self.layers,
            )
            for i, p in enumerate(pvalues)
        ]
        return replay(self, events)

    # -- internals ---------------------------------------------------------

    def _check_event(self, event: HypothesisEvent) -> None:
        if len(event.group_index) != self.layers:
            raise ValueError(
                f"event carries {len(event.group_index)} group ids, "
                f"expected {self.layers}"
            )

    def _layer_pvalue(self, m: int, event: HypothesisEvent) -> float:
        transform = self.statistics[m] if self.statistics else None
        if transform is None:
            return event.p
        p = transform(event)
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"layer {m} statistic produced p outside [0, 1]: {p}")
        return p

    def _finish(
        self,
        t: int,
        event: HypothesisEvent,
        rejected: bool,
        thresholds: dict[int, float],
    ) -> DecisionRecord:
        halted = self._exhausted()
        outcomes = []
        for m, state in enumerate(self.states):
            tested = m in thresholds
            outcomes.append(
                LayerOutcome(
                    tested=tested,
                    threshold=thresholds.get(m),
                    newly_rejected=tested and rejected,
                    wealth=state.wealth if self.records_wealth else None,
                    rejections=state.rejections,
                    effective_tests=state.effective_tests(t),
                    since_last_discovery=(
                        state.since_last_discovery if self.records_gap else None
                    ),
                )
            )
        self.halted = halted
        return DecisionRecord(
            t=t,
            rejected=rejected,
            group_index=event.group_index,
            layers=tuple(outcomes),
            halted=halted,
        )


class AlphaInvesting(OnlineProcedure):
    """Multi-layer alpha-investing.

    Every layer starts with wealth alpha * eta.  Each pending layer pays the
    spend charge whether or not the hypothesis is rejected and earns the
    reward only on rejection; a layer whose group is already decided is
    neither tested nor charged.  The stream halts once min wealth <= 0 —
    the final charged step may push wealth below zero.
    """

    records_wealth = True

    def __init__(
        self,
        layers: int,
        alpha: float,
        eta: float = 1.0,
        policy: Optional[SpendingPolicy] = None,
        policies: Optional[Sequence[SpendingPolicy]] = None,
        **kwargs,
    ):
        super().__init__(layers, alpha, eta, **kwargs)
        if policies is not None:
            if len(policies) != layers:
                raise ValueError("one spending policy per layer is required")
            self.policies = tuple(policies)
        else:
            shared = policy if policy is not None else simple_choice(alpha)
            self.policies = (shared,) * layers
        for state in self.states:
            state.wealth = alpha * eta

    def _thresholds(self, t: int, pending: list[int]) -> dict[int, float]:
        out = {}
        for m in pending:
            level = self.policies[m].alpha_level(t, self.states[m])
            if not 0.0 < level <= 1.0:
                raise ValueError(f"significance level outside (0, 1]: {level}")
            out[m] = level
        return out

    def _charges(self, t: int, pending: list[int]):
        # evaluated before the decision so both rules see the pre-step state
        return {
            m: (
                self.policies[m].spend(t, self.states[m]),
                self.policies[m].reward(t, self.states[m]),
            )
            for m in pending
        }

    def _settle(self, t: int, pending: list[int], rejected: bool, charges) -> None:
        # evaluate the update exactly as written (W + reward - spend) so the
        # halt comparison is reproducible across independent implementations
        for m in pending:
            spend, reward = charges[m]
            state = self.states[m]
            if rejected:
                state.wealth = state.wealth + reward - spend
            else:
                state.wealth = state.wealth - spend

    def _exhausted(self) -> bool:
        return min(state.wealth for state in self.states) <= 0.0


class Lond(OnlineProcedure):
    """Multi-layer LOND, optionally indexed by effective test counts.

    The pending threshold at step t is min(1, beta(idx) * (R + 1)) with R the
    layer's current discovery count; idx is the raw time t, or with
    ``modified=True`` the layer's effective test count, which treats every
    hypothesis landing in an already-rejected group as part of that group's
    single collapsed test.
    """

    def __init__(
        self,
        layers: int,
        alpha: float,
        eta: float = 1.0,
        betas: Optional[Sequence[BetaSequence]] = None,
        modified: bool = False,
        **kwargs,
    ):
        super().__init__(layers, alpha, eta, **kwargs)
        self.betas = _layer_betas(betas, layers, alpha)
        self.modified = modified

    def _thresholds(self, t: int, pending: list[int]) -> dict[int, float]:
        out = {}
        for m in pending:
            state = self.states[m]
            index = state.effective_tests(t) if self.modified else t
            out[m] = min(1.0, self.betas[m].value(index) * (state.rejections + 1))
        return out


class Lord(OnlineProcedure):
    """Multi-layer LORD: thresholds reset on each discovery.

    Each layer counts tests since its last discovery (starting at 1) and uses
    the level sequence at that index.  On rejection every pending layer's
    counter resets to 1; otherwise every pending layer's counter advances,
    including layers the failing comparison short-circuited past.
    """

    records_gap = True

    def __init__(
        self,
        layers: int,
        alpha: float,
        eta: float = 1.0,
        betas: Optional[Sequence[BetaSequence]] = None,
        **kwargs,
    ):
        super().__init__(layers, alpha, eta, **kwargs)
        self.betas = _layer_betas(betas, layers, alpha)

    def _thresholds(self, t: int, pending: list[int]) -> dict[int, float]:
        return {
            m: self.betas[m].value(self.states[m].since_last_discovery)
            for m in pending
        }

    def _settle(self, t: int, pending: list[int], rejected: bool, charges) -> None:
        if rejected:
            for m in pending:
                self.states[m].since_last_discovery = 1
        else:
            for m in pending:
                self.states[m].since_last_discovery += 1


def _layer_betas(
    betas: Optional[Sequence[BetaSequence]], layers: int, alpha: float
) -> tuple[BetaSequence, ...]:
    if betas is None:
        return (BetaSequence(alpha),) * layers
    if len(betas) != layers:
        raise ValueError("one beta sequence per layer is required")
    return tuple(betas)


def make_procedure(
    method: str,
    layers: int,
    alpha: float,
    eta: float = 1.0,
    *,
    beta_kind: str = "inverse-square",
    untested: str = UNTESTED_LITERAL,
    policy: Optional[SpendingPolicy] = None,
    statistics=None,
    layer_configs: Optional[Sequence[LayerConfig]] = None,
) -> OnlineProcedure:
    """Instantiate a procedure by method name.

    The ``ml-`` prefix only documents intent — the engine is the same; the
    multi-layer character comes from the layer count and the group ids the
    events carry.  ``layer_configs`` optionally customizes individual layers
    (level sequence, spending policy, statistic transform); unset entries
    fall back to the shared defaults.
    """
    name = method[3:] if method.startswith("ml-") else method
    shared_policy = policy if policy is not None else simple_choice(alpha)
    default_beta = BetaSequence(alpha, kind=beta_kind)
    if layer_configs is not None:
        if len(layer_configs) != layers:
            raise ValueError("one layer config per layer is required")
        if statistics is None:
            statistics = [config.statistic for config in layer_configs]
        betas = tuple(
            config.beta_sequence if config.beta_sequence is not None else default_beta
            for config in layer_configs
        )
        policies = tuple(
            config.spending_policy
            if config.spending_policy is not None
            else shared_policy
            for config in layer_configs
        )
    else:
        betas = (default_beta,) * layers
        policies = (shared_policy,) * layers
    kwargs = {"untested": untested, "statistics": statistics}
    if name == "GAI":
        return AlphaInvesting(layers, alpha, eta, policies=policies, **kwargs)
    if name == "LOND":
        return Lond(layers, alpha, eta, betas=betas, modified=False, **kwargs)
    if name == "LOND_m":
        return Lond(layers, alpha, eta, betas=betas, modified=True, **kwargs)
    if name == "LORD":
        return Lord(layers, alpha, eta, betas=betas, **kwargs)
    raise ValueError(f"unknown method name: {method!r}")


def make_single_layer(
    method: str, alpha: float, eta: float = 1.0, **kwargs
) -> OnlineProcedure:
    """Configure the classic single-layer rule: one layer, singleton groups.

    With a fresh group per arrival every step is tested, so the decisions
    coincide with the original GAI/LOND/LORD procedures.
    """
    if method not in ("GAI", "LOND", "LORD"):
        raise ValueError(f"unknown method name: {method!r}")
    return make_procedure(method, 1, alpha, eta, **kwargs)


def replay(
    procedure: OnlineProcedure, events: Sequence[HypothesisEvent]
) -> list[DecisionRecord]:
    """Drive a procedure over a whole stream, freezing instead of erroring
    once an alpha-investing halt occurs."""
    records = []
    for event in events:
        if procedure.halted:
            records.append(procedure.skip(event))
        else:
            records.append(procedure.step(event))
    return records
