import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Iterator, NamedTuple, Protocol

import numpy as np
import pandas as pd

from src.common.common import ConfigError
from src.evaluation.records import EpisodeRecord
from src.gridworlds.domains import GridDomain
from src.learning.qtable import QTable
from src.rm.crm import CounterfactualExperience, crm_batch
from src.rm.labels import LabelString
from src.rm.rewardmachine import RewardMachine, rm_step
from src.rm.shaping import PotentialTable, ars_potentials, shape_reward

BIN_WIDTH = 10_000

# Training budgets per domain
DEFAULT_TOTAL_STEPS = {
    "cookie": 300_000,
    "keys": 1_000_000,
    "symbol": 200_000,
    "simple_cookie": 20_000,
}


@dataclass(frozen=True)
class TrainConfig:
    gamma: float = 0.9
    epsilon: float = 0.1
    learning_rate: float = 0.1
    total_steps: int = 300_000
    use_crm: bool = True
    use_ars: bool = False
    episode_cap: int = 500
    seed: int = 0
    # Initial action value of unvisited pairs. Any positive value makes untried
    # actions look better than tried ones that have seen no reward yet.
    q_init: float = 1e-6

    def __post_init__(self) -> None:
        if not 0 <= self.q_init < 1:
            raise ConfigError(f"q_init must be in [0, 1), got {self.q_init}.")
        if not 0 < self.gamma < 1:
            raise ConfigError(f"gamma must be in (0, 1), got {self.gamma}.")
        if not 0 <= self.epsilon <= 1:
            raise ConfigError(f"epsilon must be in [0, 1], got {self.epsilon}.")
        if not 0 < self.learning_rate <= 1:
            raise ConfigError(f"learning rate must be in (0, 1], got {self.learning_rate}.")
        if self.total_steps < 0 or self.episode_cap < 1:
            raise ConfigError("total_steps must be >= 0 and episode_cap >= 1.")

    @property
    def variant(self) -> str:
        return ("crm" if self.use_crm else "qrm") + ("+ars" if self.use_ars else "")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        return cls(**data)


@dataclass
class LearningCurve:
    """Raw reward accumulated per bin of training steps, plus episode counters."""

    rewards: list[float] = field(default_factory=list)
    bin_width: int = BIN_WIDTH
    episodes: int = 0
    successes: int = 0
    updates: int = 0

    @property
    def bin_starts(self) -> list[int]:
        return [i * self.bin_width for i in range(len(self.rewards))]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"bin_start": self.bin_starts, "reward": self.rewards})

    def to_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False)

    @classmethod
    def from_csv(cls, path) -> "LearningCurve":
        df = pd.read_csv(path)
        width = int(df["bin_start"].iloc[1]) if len(df) > 1 else BIN_WIDTH
        return cls(rewards=df["reward"].astype(float).tolist(), bin_width=width)


class Tampering(Protocol):
    """What run_episode needs from a tamperer."""

    history: list

    def start_episode(self) -> None: ...

    def tamper(self, t: int, label: LabelString, u: str | None = None) -> tuple[LabelString, bool]: ...


class TraceStep(NamedTuple):
    episode: int
    t: int
    label: LabelString
    rm_state: str
    next_rm_state: str


def epsilon_greedy(q: QTable, u: str, obs_key, epsilon: float, rng: np.random.Generator) -> int:
    """
    Random action with probability epsilon, otherwise a greedy action with ties
    broken uniformly at random.
    """
    if epsilon > 0 and rng.random() < epsilon:
        return int(rng.integers(q.n_actions))
    row = q.row(u, obs_key)
    best = np.flatnonzero(row == row.max())
    if len(best) == 1:
        return int(best[0])
    return int(rng.choice(best))


def qrm_update(q: QTable, exp: CounterfactualExperience, alpha: float, gamma: float) -> None:
    target = exp.reward
    if not exp.terminal:
        target += gamma * q.max_value(exp.next_rm_state, exp.next_obs_key)
    row = q.writable_row(exp.rm_state, exp.obs_key)
    row[exp.action] += alpha * (target - row[exp.action])


def initial_values(rm: RewardMachine, cfg: TrainConfig, potentials: PotentialTable | None = None) -> dict[str, float]:
    """
    Initial action value per reward machine state. Shaped tables learn Q - phi(u),
    so they start at q_init - phi(u) and explore like unshaped ones.
    """
    if potentials is None:
        return {u: cfg.q_init for u in rm.sorted_states()}
    return {u: cfg.q_init - potentials[u] for u in rm.sorted_states()}


def train(
    domain: GridDomain,
    rm: RewardMachine,
    cfg: TrainConfig,
    logger=None,
    checkpoint: Callable[[int, QTable], bool] | None = None,
    checkpoint_every: int = BIN_WIDTH,
) -> tuple[QTable, LearningCurve]:
    """
    Tabular Q-learning with one table per reward machine state.

    Every step updates all counterfactual experiences (use_crm) or only the true
    one. With use_ars the update rewards are shaped with the reward machine's value
    function as potential; the learning curve always records the raw rewards.
    Tables start at initial_values(rm, cfg, potentials).

    Args:
        domain (GridDomain): Bound environment.
        rm (RewardMachine): The agent's reward machine.
        cfg (TrainConfig): Training parameters.
        logger (Logger): Optional workflow logger for progress messages.
        checkpoint (Callable): Called as checkpoint(steps, q) every `checkpoint_every`
            steps, training stops early when it returns True.
        checkpoint_every (int): Checkpoint interval in steps.

    Returns:
        tuple[QTable, LearningCurve]: Learned tables and the raw reward curve.
    """
    rng = np.random.default_rng(cfg.seed)
    potentials = ars_potentials(rm, cfg.gamma) if cfg.use_ars else None
    q = QTable(rm.sorted_states(), init=initial_values(rm, cfg, potentials))
    curve = LearningCurve(rewards=[0.0] * math.ceil(cfg.total_steps / BIN_WIDTH))

    steps, next_report = 0, 10 * BIN_WIDTH
    while steps < cfg.total_steps:
        state, obs, label = domain.reset(rng)
        u, _ = rm_step(rm, rm.initial, label)
        for _ in range(cfg.episode_cap):
            action = epsilon_greedy(q, u, obs.key, cfg.epsilon, rng)
            tr = domain.env_step(state, action, rng)
            next_u, reward = rm_step(rm, u, tr.label)
            curve.rewards[steps // BIN_WIDTH] += reward
            if cfg.use_crm:
                experiences = crm_batch(rm, obs.key, action, tr.observation.key, tr.label, tr.task_done)
            else:
                experiences = [
                    CounterfactualExperience(
                        obs.key, u, action, reward, tr.observation.key, next_u, tr.task_done or rm.is_terminal(next_u)
                    )
                ]
            for exp in experiences:
                if potentials is not None:
                    shaped = shape_reward(exp.reward, potentials[exp.rm_state], potentials[exp.next_rm_state], cfg.gamma)
                    exp = replace(exp, reward=shaped)
                qrm_update(q, exp, cfg.learning_rate, cfg.gamma)
            curve.updates += len(experiences)
            steps += 1
            if checkpoint is not None and steps % checkpoint_every == 0 and checkpoint(steps, q):
                return q, curve
            state, obs, u = tr.state, tr.observation, next_u
            if tr.done or rm.is_terminal(u) or steps >= cfg.total_steps:
                break
        if tr.done or rm.is_terminal(u):
            curve.episodes += 1
            curve.successes += int(tr.task_done and (tr.reward_event or 0.0) > 0)
        if logger is not None and steps >= next_report:
            next_report += 10 * BIN_WIDTH
            logger.log(f"seed {cfg.seed}: {steps}/{cfg.total_steps} steps, {curve.episodes} episodes", 2)
    return q, curve


def run_episode(
    q: QTable,
    domain: GridDomain,
    rm: RewardMachine,
    rng: np.random.Generator,
    cap: int | None = None,
    tamperer: Tampering | None = None,
    agent_id: int = 0,
    episode: int = 0,
    seed: int = 0,
) -> EpisodeRecord:
    """
    Run one greedy evaluation episode. A tamperer sits between the labeling
    function and the agent's reward machine; the environment itself is untouched.
    The episode also ends if the agent's reward machine reaches a terminal state
    on a tampered label, since the agent then considers its task done.
    """
    cap = min(cap or domain.episode_cap, domain.episode_cap)
    if tamperer is not None:
        tamperer.start_episode()
    state, obs, label = domain.reset(rng)
    u_agent, _ = rm_step(rm, rm.initial, label)
    u_true = u_agent
    tamper_count = desync = t = 0
    reward = 0.0
    task_done = False
    while True:
        action = epsilon_greedy(q, u_agent, obs.key, 0.0, rng)
        tr = domain.env_step(state, action, rng)
        t += 1
        seen = tr.label
        if tamperer is not None:
            seen, _ = tamperer.tamper(t, tr.label, u_agent)
        tamper_count += int(seen != tr.label)
        u_agent, _ = rm_step(rm, u_agent, seen)
        if not rm.is_terminal(u_true):
            u_true, _ = rm_step(rm, u_true, tr.label)
        desync += int(u_agent != u_true)
        state, obs = tr.state, tr.observation
        task_done = tr.task_done
        if tr.done or t >= cap or rm.is_terminal(u_agent):
            reward = tr.reward_event or 0.0
            break
    if tamper_count == 0 and desync:
        raise RuntimeError("Reward machine states diverged without any tampering.")
    success = task_done and reward > 0
    if success:
        outcome = "success"
    elif task_done or rm.is_terminal(u_agent):
        outcome = "failure"
    else:
        outcome = "timeout"
    return EpisodeRecord(
        agent_id=agent_id,
        episode=episode,
        success=success,
        steps=t,
        reward=reward,
        tamper_count=tamper_count,
        episode_length=t,
        seed=seed,
        outcome=outcome,
        desync_steps=desync,
    )


def evaluate_policy(
    q: QTable,
    domain: GridDomain,
    rm: RewardMachine,
    episodes: int,
    rng: np.random.Generator,
    cap: int | None = None,
    tamperer: Tampering | None = None,
    agent_id: int = 0,
) -> list[EpisodeRecord]:
    """Greedy evaluation over `episodes` episodes drawn from one random stream."""
    return [
        run_episode(q, domain, rm, rng, cap, tamperer, agent_id=agent_id, episode=i)
        for i in range(episodes)
    ]


def victim_trace(
    q: QTable,
    domain: GridDomain,
    rm: RewardMachine,
    episodes: int,
    rng: np.random.Generator,
) -> Iterator[TraceStep]:
    """
    Passively observe the greedy victim: yields every emitted label together with
    the victim's reward machine state before and after it.
    """
    for episode in range(episodes):
        state, obs, label = domain.reset(rng)
        u, _ = rm_step(rm, rm.initial, label)
        t = 0
        while True:
            action = epsilon_greedy(q, u, obs.key, 0.0, rng)
            tr = domain.env_step(state, action, rng)
            t += 1
            next_u, _ = rm_step(rm, u, tr.label)
            yield TraceStep(episode, t, tr.label, u, next_u)
            state, obs, u = tr.state, tr.observation, next_u
            if tr.done or rm.is_terminal(u):
                break
