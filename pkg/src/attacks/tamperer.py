from dataclasses import dataclass, field

import numpy as np

from src.attacks.blinding import (
    BlindingStrategy,
    edge_blinding_apply,
    event_blinding_apply,
    is_target,
    random_blinding_rule,
    random_hallucination_rule,
)
from src.attacks.selection import RANKINGS
from src.attacks.timing import TIMING_KINDS, TimingState, should_blind
from src.common.common import ConfigError
from src.rm.labels import LabelString
from src.rm.rewardmachine import RewardMachine

TAMPER_KINDS = ("identity", "random_hallucination", "random_blinding", "event_blinding", "edge_blinding")


@dataclass(frozen=True)
class AttackConfig:
    """One attack of a session, as given in the `attacks` list of a run configuration."""

    name: str = ""
    kind: str = "identity"
    mode: str = "compound"
    timing: str = "all_instances"
    trigger_p: float = 0.5
    per_occurrence: bool = False
    rho: float = 0.0
    observation_episodes: int = 100
    observation_budget: int | None = None
    ranking: str = "lexicographic"
    targets: tuple[str, ...] = ()
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in TAMPER_KINDS:
            raise ConfigError(f"Unknown attack kind {self.kind!r}, expected one of {TAMPER_KINDS}.")
        if self.kind == "event_blinding" and self.mode not in ("atomic", "compound"):
            raise ConfigError(f"event_blinding needs mode atomic or compound, got {self.mode!r}.")
        if self.kind == "edge_blinding" and self.mode not in ("edge", "state"):
            raise ConfigError(f"edge_blinding needs mode edge or state, got {self.mode!r}.")
        if self.timing not in TIMING_KINDS:
            raise ConfigError(f"Unknown timing strategy {self.timing!r}, expected one of {TIMING_KINDS}.")
        if not 0 <= self.rho <= 1:
            raise ConfigError(f"rho must be in [0, 1], got {self.rho}.")
        if self.timing == "triggered_stream" and not 0 < self.trigger_p <= 1:
            raise ConfigError(f"trigger-p must be in (0, 1], got {self.trigger_p}.")
        if self.observation_episodes < 1:
            raise ConfigError("observation-episodes must be at least 1.")
        if self.ranking not in RANKINGS:
            raise ConfigError(f"Unknown ranking {self.ranking!r}, expected one of {tuple(RANKINGS)}.")

    @classmethod
    def from_params(cls, params: dict) -> "AttackConfig":
        """Build from kebab-case parameters as stored in the JSON configuration."""
        kwargs = {key.replace("-", "_"): value for key, value in params.items()}
        if "targets" in kwargs:
            kwargs["targets"] = tuple(kwargs["targets"])
        try:
            return cls(**kwargs)
        except TypeError as e:
            raise ConfigError(f"Invalid attack configuration: {e}") from e

    @property
    def is_blinding(self) -> bool:
        return self.kind in ("event_blinding", "edge_blinding")

    @property
    def timing_label(self) -> str:
        """Short timing column value of the metric tables."""
        if not self.is_blinding:
            return ""
        if self.timing == "triggered_stream":
            return f"trigger_{round(self.trigger_p * 100)}"
        return {"all_instances": "all", "first_stream": "first"}[self.timing]

    @property
    def label(self) -> str:
        """Attack column value of the metric tables."""
        if self.name:
            return self.name
        if self.is_blinding:
            return f"{self.kind}/{self.mode}"
        return self.kind


@dataclass
class Tamperer:
    """
    Stateful tampering function between the labeling function and the victim's
    reward machine. Counters accumulate over the tamperer's lifetime; `history`
    holds (t, input, output) of the current episode.
    """

    kind: str = "identity"
    strategy: BlindingStrategy | None = None
    timing: TimingState | None = None
    rho: float = 0.0
    alphabet: tuple[LabelString, ...] = ()
    rm: RewardMachine | None = None
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))
    tamper_count: int = 0
    output_count: int = 0
    done: bool = False
    history: list = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.kind not in TAMPER_KINDS:
            raise ValueError(f"Unknown tamperer kind {self.kind!r}.")
        if self.kind in ("event_blinding", "edge_blinding"):
            if self.strategy is None:
                raise ValueError(f"{self.kind} needs a blinding strategy.")
            self.timing = self.timing or TimingState()
        if self.kind == "edge_blinding":
            if self.rm is None:
                raise ValueError("edge_blinding needs the victim's reward machine.")
            self._edge_pairs = self.strategy.edge_pairs(self.rm)

    def start_episode(self) -> None:
        if self.timing is not None:
            self.timing.reset()
        self.done = False
        self.history = []

    def _apply(self, label: LabelString, u: str | None) -> LabelString:
        if self.kind == "identity":
            return label
        if self.kind == "random_blinding":
            return random_blinding_rule(label, self.rho, self.rng)
        if self.kind == "random_hallucination":
            return random_hallucination_rule(label, self.rho, self.alphabet, self.rng)
        if self.done:
            return label
        if self.kind == "event_blinding":
            target = is_target(self.strategy, label)
        else:
            target = is_target(self.strategy, label, u, self.rm, self._edge_pairs)
        blind, self.done = should_blind(self.timing, target, self.rng)
        if not blind:
            return label
        if self.kind == "event_blinding":
            return event_blinding_apply(self.strategy.mode, self.strategy.targets, label)
        return edge_blinding_apply(self.rm, u, self._edge_pairs, label)

    def tamper(self, t: int, label: LabelString, u: str | None = None) -> tuple[LabelString, bool]:
        """
        Tamper with the labeling output of timestep t.

        Args:
            t (int): 1-based timestep within the episode.
            label (LabelString): The true label.
            u (str | None): The victim's current reward machine state (edge blinding).

        Returns:
            tuple[LabelString, bool]: The label passed on to the victim and whether
            the attack is over for this episode.
        """
        tampered = self._apply(label, u)
        self.output_count += 1
        self.tamper_count += int(tampered != label)
        self.history.append((t, label, tampered))
        return tampered, self.done


def tamper(t: int, label: LabelString, tamperer: Tamperer, u: str | None = None) -> tuple[LabelString, bool]:
    return tamperer.tamper(t, label, u)


def build_tamperer(
    config: AttackConfig,
    rng: np.random.Generator,
    rm: RewardMachine | None = None,
    alphabet: tuple[LabelString, ...] = (),
    targets: tuple[str, ...] | None = None,
) -> Tamperer:
    """
    Create a fresh tamperer for one episode.

    Args:
        config (AttackConfig): The attack.
        rng (np.random.Generator): The tamperer's own random stream.
        rm (RewardMachine | None): The victim's reward machine (edge blinding).
        alphabet (tuple[LabelString, ...]): Emittable labels (random hallucination).
        targets (tuple[str, ...] | None): Blinding targets chosen for this victim,
            the config's explicit targets if None.
    """
    strategy = timing = None
    if config.is_blinding:
        chosen = targets if targets is not None else config.targets
        if not chosen:
            raise ConfigError(f"Attack {config.label} has no blinding targets.")
        strategy = BlindingStrategy.parse(config.mode, chosen)
        timing = TimingState(config.timing, config.trigger_p, config.per_occurrence)
    return Tamperer(
        kind=config.kind,
        strategy=strategy,
        timing=timing,
        rho=config.rho,
        alphabet=tuple(alphabet),
        rm=rm,
        rng=rng,
    )
