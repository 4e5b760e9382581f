from dataclasses import dataclass

from src.rm.labels import EMPTY
from src.rm.rewardmachine import RewardMachine


@dataclass(frozen=True)
class PotentialTable:
    """Potential per reward machine state. Terminal states hold 0."""

    values: dict[str, float]
    gamma: float

    def __getitem__(self, u: str) -> float:
        return self.values[u]


def ars_sweep(rm: RewardMachine, values: dict[str, float], gamma: float) -> dict[str, float]:
    """
    One synchronous Bellman sweep over the reward machine seen as a deterministic
    MDP whose actions are the labels. Only labels with a transition entry and the
    self-loop are considered; every other label is a zero-reward self-loop.
    """
    updated = dict(values)
    for u in rm.states:
        best = gamma * values[u]
        for label in rm.labels_from(u) + [EMPTY]:
            next_u, reward = rm.step(u, label)
            best = max(best, reward + gamma * values[next_u])
        updated[u] = best
    return updated


def ars_potentials(rm: RewardMachine, gamma: float, tol: float = 1e-9, max_sweeps: int = 100_000) -> PotentialTable:
    """
    Value iteration over the reward machine, used as shaping potential.

    Args:
        rm (RewardMachine): A valid reward machine.
        gamma (float): Discount factor in (0, 1).
        tol (float): Stop once no value changes by more than this.
        max_sweeps (int): Safety limit on the number of sweeps.

    Returns:
        PotentialTable: V(u) for every state, 0 for terminals.
    """
    if not 0 < gamma < 1:
        raise ValueError(f"gamma must be in (0, 1) for reward machine value iteration, got {gamma}.")
    values = {u: 0.0 for u in rm.states | rm.terminals}
    for _ in range(max_sweeps):
        updated = ars_sweep(rm, values, gamma)
        delta = max((abs(updated[u] - values[u]) for u in values), default=0.0)
        values = updated
        if delta <= tol:
            break
    return PotentialTable(values, gamma)


def shape_reward(reward: float, phi_u: float, phi_next: float, gamma: float) -> float:
    """Potential-based shaping: r + gamma * phi(u') - phi(u)."""
    return reward + gamma * phi_next - phi_u
