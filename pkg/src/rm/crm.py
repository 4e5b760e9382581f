from dataclasses import dataclass
from typing import Hashable

from src.rm.labels import LabelString
from src.rm.rewardmachine import RewardMachine, rm_step


@dataclass(frozen=True)
class CounterfactualExperience:
    """One (possibly counterfactual) experience for the Q-table of `rm_state`."""

    obs_key: Hashable
    rm_state: str
    action: int
    reward: float
    next_obs_key: Hashable
    next_rm_state: str
    terminal: bool


def crm_batch(
    rm: RewardMachine,
    obs_key: Hashable,
    action: int,
    next_obs_key: Hashable,
    label: LabelString,
    env_terminal: bool,
) -> list[CounterfactualExperience]:
    """
    Build one experience per non-terminal reward machine state, as if the agent
    had been in that state when the environment emitted `label`.

    Args:
        rm (RewardMachine): The agent's reward machine.
        obs_key (Hashable): Observation key before the step.
        action (int): Action taken.
        next_obs_key (Hashable): Observation key after the step.
        label (LabelString): Label emitted on the step.
        env_terminal (bool): Whether the environment itself ended the episode.

    Returns:
        list[CounterfactualExperience]: Experiences ordered by state id.
    """
    batch = []
    for u in rm.sorted_states():
        next_u, reward = rm_step(rm, u, label)
        batch.append(
            CounterfactualExperience(
                obs_key=obs_key,
                rm_state=u,
                action=action,
                reward=reward,
                next_obs_key=next_obs_key,
                next_rm_state=next_u,
                terminal=env_terminal or rm.is_terminal(next_u),
            )
        )
    return batch
