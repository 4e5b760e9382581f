from dataclasses import dataclass
from typing import Iterable

import numpy as np

from src.rm.labels import EMPTY, LabelString
from src.rm.rewardmachine import RewardMachine, rm_step

BLINDING_MODES = ("atomic", "compound", "edge", "state")


@dataclass(frozen=True)
class BlindingStrategy:
    """
    What to deprive the victim of.

    atomic targets are propositions, compound targets are whole labels, edge
    targets are (state, label) pairs and a state target stands for every edge
    entering that state from another state.
    """

    mode: str
    targets: frozenset

    def __post_init__(self) -> None:
        if self.mode not in BLINDING_MODES:
            raise ValueError(f"Unknown blinding mode {self.mode!r}, expected one of {BLINDING_MODES}.")
        if not self.targets:
            raise ValueError("A blinding strategy needs at least one target.")

    @classmethod
    def parse(cls, mode: str, targets: Iterable[str]) -> "BlindingStrategy":
        """
        Build a strategy from target strings: propositions ("B"), labels ("3B"),
        edges ("u0:3B") or states ("u1").
        """
        parsed = []
        for target in targets:
            if mode == "atomic":
                if len(target) != 1:
                    raise ValueError(f"Atomic target {target!r} must be a single proposition.")
                parsed.append(target)
            elif mode == "compound":
                parsed.append(LabelString.parse(target))
            elif mode == "edge":
                state, sep, label = target.partition(":")
                if not sep:
                    raise ValueError(f"Edge target {target!r} must look like '<state>:<label>'.")
                parsed.append((state, LabelString.parse(label)))
            else:
                parsed.append(target)
        return cls(mode, frozenset(parsed))

    def edge_pairs(self, rm: RewardMachine) -> frozenset[tuple[str, str]]:
        """Targeted (source, destination) state pairs, for the edge and state modes."""
        if self.mode == "edge":
            return frozenset((u, rm_step(rm, u, label)[0]) for u, label in self.targets)
        if self.mode == "state":
            return frozenset().union(*(state_edges(rm, state) for state in self.targets))
        raise ValueError(f"Mode {self.mode!r} has no edges.")


def state_edges(rm: RewardMachine, state: str) -> frozenset[tuple[str, str]]:
    """Every edge entering `state` from another state."""
    return frozenset((edge.source, edge.target) for edge in rm.edges if edge.target == state and edge.source != state)


def traverses(rm: RewardMachine, u: str, label: LabelString, edge_pairs: frozenset) -> bool:
    next_u, _ = rm_step(rm, u, label)
    return next_u != u and (u, next_u) in edge_pairs


def is_target(strategy: BlindingStrategy, label: LabelString, u: str | None = None, rm: RewardMachine | None = None,
              edge_pairs: frozenset | None = None) -> bool:
    if strategy.mode == "compound":
        return label in strategy.targets
    if strategy.mode == "atomic":
        return any(symbol in strategy.targets for symbol in label)
    if rm is None or u is None:
        raise ValueError("Edge and state blinding need the victim's reward machine and state.")
    return traverses(rm, u, label, edge_pairs if edge_pairs is not None else strategy.edge_pairs(rm))


def event_blinding_apply(mode: str, targets: Iterable, label: LabelString) -> LabelString:
    """Compound targets are blinded entirely, atomic ones lose every occurrence of the target propositions."""
    if mode == "compound":
        return EMPTY
    if mode == "atomic":
        return label.without(targets)
    raise ValueError(f"Event blinding mode must be atomic or compound, got {mode!r}.")


def _removal_order(label: LabelString) -> list[LabelString]:
    # larger first, then the ones keeping the room digit, then canonical order
    return sorted(label.submultisets(), key=lambda s: (-len(s), s.room is None, s.serialize()))


def edge_blinding_apply(rm: RewardMachine, u: str, edge_pairs: frozenset, label: LabelString) -> LabelString:
    """
    Largest sub-multiset of `label` that does not make the victim traverse a
    targeted edge from `u`. The empty label always qualifies.
    """
    for candidate in _removal_order(label):
        if not traverses(rm, u, candidate, edge_pairs):
            return candidate
    return EMPTY


def random_blinding_rule(label: LabelString, rho: float, rng: np.random.Generator) -> LabelString:
    """With probability rho, replace the label by a uniform proper sub-multiset."""
    if not label:
        return label
    if rng.random() < rho:
        subsets = label.proper_submultisets()
        return subsets[int(rng.integers(len(subsets)))]
    return label


def random_hallucination_rule(
    label: LabelString, rho: float, alphabet: Iterable[LabelString], rng: np.random.Generator
) -> LabelString:
    """With probability rho, replace the label by a uniform draw from the other emittable labels."""
    others = sorted((x for x in set(alphabet) if x != label), key=LabelString.serialize)
    if not others:
        return label
    if rng.random() < rho:
        return others[int(rng.integers(len(others)))]
    return label
