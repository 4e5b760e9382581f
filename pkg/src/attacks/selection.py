import math
from dataclasses import dataclass, field
from typing import Hashable, Iterable

from src.learning.qrm import TraceStep


@dataclass
class CandidateStats:
    """
    Per candidate target: h1 = episodes in which it occurred, h2 = earliest
    1-based timestep of its first occurrence in an episode, h3 = total occurrences.
    """

    mode: str
    h1: dict[Hashable, int] = field(default_factory=dict)
    h2: dict[Hashable, float] = field(default_factory=dict)
    h3: dict[Hashable, int] = field(default_factory=dict)
    episodes: int = 0
    outputs: int = 0

    def add(self, candidate: Hashable, t: int, first_in_episode: bool) -> None:
        self.h1.setdefault(candidate, 0)
        self.h2.setdefault(candidate, math.inf)
        self.h3[candidate] = self.h3.get(candidate, 0) + 1
        if first_in_episode:
            self.h1[candidate] += 1
            self.h2[candidate] = min(self.h2[candidate], t)

    def candidates(self) -> list[Hashable]:
        return list(self.h3)

    def __len__(self) -> int:
        return len(self.h3)


def serialize_candidate(candidate: Hashable) -> str:
    """Canonical text of a candidate, as accepted by BlindingStrategy.parse."""
    if isinstance(candidate, tuple):
        u, label = candidate
        return f"{u}:{label}"
    return str(candidate)


def _candidates_of(step: TraceStep, mode: str, terminals: frozenset[str]) -> list[Hashable]:
    if mode == "compound":
        return [step.label] if step.label else []
    if mode == "atomic":
        return sorted(set(step.label))
    if step.next_rm_state == step.rm_state:
        return []
    if mode == "edge":
        return [(step.rm_state, step.label)]
    if mode == "state":
        return [] if step.next_rm_state in terminals else [step.next_rm_state]
    raise ValueError(f"Unknown blinding mode {mode!r}.")


def collect_candidates(
    trace: Iterable[TraceStep], mode: str, k: int | None = None, terminals: Iterable[str] = ()
) -> CandidateStats:
    """
    Passively observe the victim and gather statistics for every candidate target.

    Args:
        trace (Iterable[TraceStep]): The victim's labels with its reward machine states.
        mode (str): "compound", "atomic", "edge" or "state".
        k (int | None): Stop after this many labeling outputs, the whole trace if None.
        terminals (Iterable[str]): Terminal reward machine states, never state candidates.

    Returns:
        CandidateStats: The statistics.

    Raises:
        ValueError: If nothing was observed that could be targeted.
    """
    if k is not None and k < 1:
        raise ValueError(f"Observation budget must be at least 1, got {k}.")
    stats = CandidateStats(mode)
    terminals = frozenset(terminals)
    current_episode, seen = None, set()
    for step in trace:
        if k is not None and stats.outputs >= k:
            break
        if step.episode != current_episode:
            current_episode, seen = step.episode, set()
            stats.episodes += 1
        stats.outputs += 1
        for candidate in _candidates_of(step, mode, terminals):
            stats.add(candidate, step.t, candidate not in seen)
            seen.add(candidate)
    if not stats:
        raise ValueError(f"No {mode} blinding candidates observed in {stats.outputs} outputs.")
    return stats


def rank_candidates(stats: CandidateStats) -> list[Hashable]:
    """
    Rank candidates by reliability (h1, descending), then early appearance
    (h2, ascending), then rarity (h3, ascending). Remaining ties follow the
    canonical serialization.
    """
    ranking = sorted(stats.candidates(), key=serialize_candidate)
    ranking.sort(key=lambda c: stats.h3[c])
    ranking.sort(key=lambda c: stats.h2[c])
    ranking.sort(key=lambda c: -stats.h1[c])
    return ranking


def rank_candidates_weighted(stats: CandidateStats, weights: tuple[float, float, float] = (1.0, 1.0, 1.0)) -> list[Hashable]:
    """
    Rank candidates by w1 * h1 - w2 * h2 - w3 * h3, each heuristic normalized by
    its largest observed value; ties follow the canonical serialization.
    """
    w1, w2, w3 = weights
    candidates = stats.candidates()
    max_h1 = max(stats.h1.values()) or 1
    finite_h2 = [v for v in stats.h2.values() if math.isfinite(v)]
    max_h2 = max(finite_h2, default=1) or 1
    max_h3 = max(stats.h3.values()) or 1

    def score(c: Hashable) -> float:
        h2 = stats.h2[c] / max_h2 if math.isfinite(stats.h2[c]) else 1.0
        return w1 * stats.h1[c] / max_h1 - w2 * h2 - w3 * stats.h3[c] / max_h3

    return sorted(sorted(candidates, key=serialize_candidate), key=score, reverse=True)


RANKINGS = {
    "lexicographic": rank_candidates,
    "weighted": rank_candidates_weighted,
}


def head_target(stats: CandidateStats, ranking: str = "lexicographic") -> str:
    """The serialized top-ranked candidate under the named ranking."""
    if ranking not in RANKINGS:
        raise ValueError(f"Unknown ranking {ranking!r}, expected one of {sorted(RANKINGS)}.")
    return serialize_candidate(RANKINGS[ranking](stats)[0])
