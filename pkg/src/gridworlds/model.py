from collections import deque
from dataclasses import dataclass, field
from typing import Hashable

import numpy as np

from src.common.common import ModelSizeError
from src.gridworlds.domains import MOVES, EnvState, GridDomain
from src.rm.rewardmachine import RewardMachine, rm_step

MAX_MODEL_STATES = 10**6


@dataclass
class EnvModel:
    """
    Explicit cross-product model. Transitions are stored as flat arrays indexed by
    entry; `sa` holds state * n_actions + action for every entry.

    With `observable=True` the states are (observation, reward machine state)
    pairs and every entry's probability is taken over the belief of the hidden
    state, which a perfect reward machine makes a function of that pair.
    """

    keys: list[Hashable]
    index: dict[Hashable, int]
    n_actions: int
    sa: np.ndarray
    next_state: np.ndarray
    prob: np.ndarray
    reward: np.ndarray
    done: np.ndarray
    initial: list[tuple[float, int]]
    observable: bool = False
    terminal: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    @property
    def n_states(self) -> int:
        return len(self.keys)

    def row_sums(self) -> np.ndarray:
        return np.bincount(self.sa, weights=self.prob, minlength=self.n_states * self.n_actions)

    def key_of(self, domain: GridDomain, state: EnvState) -> Hashable:
        if self.observable:
            obs = domain.observe(state.agent, state.payload)
            return (obs.agent, obs.room, obs.visible, state.rm_state, False)
        return (*domain.model_key(state), False)


def _hidden_id(agent, payload, u) -> Hashable:
    return (agent, payload.model_key() if payload is not None else (), u)


def enumerate_model(
    domain: GridDomain,
    rm: RewardMachine | None = None,
    observable: bool = False,
    max_states: int = MAX_MODEL_STATES,
) -> EnvModel:
    """
    Enumerate every reachable cross-product state with exact transition probabilities:
    (1 - slip) for the intended direction plus slip / 4 for each of the four directions.
    Episode termination leads to an absorbing terminal state.

    Args:
        domain (GridDomain): The bound domain.
        rm (RewardMachine | None): Reward machine of the cross product, the domain's if None.
        observable (bool): Key states on (observation, RM state) instead of the full state.
        max_states (int): Raise ModelSizeError beyond this many states.

    Returns:
        EnvModel: The explicit model. Rewards are the environment's reward events.
    """
    rm = rm or domain.rm
    n_actions = len(MOVES)

    def node_key(agent, payload, u, done):
        if observable:
            obs = domain.observe(agent, payload)
            return (obs.agent, obs.room, obs.visible, u, done)
        return (*_hidden_id(agent, payload, u), done)

    keys, index, beliefs = [], {}, []

    def add(key, belief):
        if key in index:
            return index[key]
        if len(keys) >= max_states:
            raise ModelSizeError(f"Model of {domain.name} exceeds {max_states} states.")
        index[key] = len(keys)
        keys.append(key)
        beliefs.append(belief)
        queue.append(index[key])
        return index[key]

    queue = deque()
    initial = {}
    for p, payload in domain.initial_payloads():
        obs = domain.observe(domain.map.start, payload)
        u, _ = rm_step(rm, rm.initial, domain.label_of(None, None, obs))
        key = node_key(domain.map.start, payload, u, False)
        initial.setdefault(key, {})[_hidden_id(domain.map.start, payload, u)] = [p, (domain.map.start, payload, u)]
    initial_dist = []
    for key, belief in initial.items():
        mass = sum(p for p, _ in belief.values())
        add(key, [(p / mass, hidden) for p, hidden in belief.values()])
        initial_dist.append((mass, index[key]))

    sa, nxt, prob, reward, done_flags = [], [], [], [], []
    while queue:
        s = queue.popleft()
        if keys[s][-1]:
            for a in range(n_actions):
                sa.append(s * n_actions + a)
                nxt.append(s)
                prob.append(1.0)
                reward.append(0.0)
                done_flags.append(True)
            continue
        for a in range(n_actions):
            # next key -> [probability, probability * reward, belief accumulator]
            acc = {}
            for q, (agent, payload, u) in beliefs[s]:
                for d in range(n_actions):
                    p_dir = (1.0 - domain.slip) * (d == a) + domain.slip / n_actions
                    if p_dir == 0.0:
                        continue
                    prev_obs = domain.observe(agent, payload)
                    for o in domain.outcomes(agent, payload, d):
                        p = q * p_dir * o.prob
                        obs = domain.observe(o.agent, o.payload, o.touched)
                        next_u, _ = rm_step(rm, u, domain.label_of(prev_obs, a, obs))
                        finished = o.task_done or rm.is_terminal(next_u)
                        key = node_key(o.agent, o.payload, next_u, finished)
                        entry = acc.setdefault(key, [0.0, 0.0, {}])
                        entry[0] += p
                        entry[1] += p * (o.reward_event or 0.0)
                        hidden = _hidden_id(o.agent, o.payload, next_u)
                        if hidden in entry[2]:
                            entry[2][hidden][0] += p
                        else:
                            entry[2][hidden] = [p, (o.agent, o.payload, next_u)]
            for key, (p, pr, belief) in acc.items():
                target = add(key, [(bp / p, hidden) for bp, hidden in belief.values()])
                sa.append(s * n_actions + a)
                nxt.append(target)
                prob.append(p)
                reward.append(pr / p)
                done_flags.append(bool(key[-1]))

    return EnvModel(
        keys=keys,
        index=index,
        n_actions=n_actions,
        sa=np.asarray(sa, dtype=np.int64),
        next_state=np.asarray(nxt, dtype=np.int64),
        prob=np.asarray(prob, dtype=float),
        reward=np.asarray(reward, dtype=float),
        done=np.asarray(done_flags, dtype=bool),
        initial=initial_dist,
        observable=observable,
        terminal=np.asarray([bool(k[-1]) for k in keys], dtype=bool),
    )


def q_values(model: EnvModel, values: np.ndarray, gamma: float) -> np.ndarray:
    """One Bellman backup, returns Q with shape (n_states, n_actions)."""
    backup = model.prob * (model.reward + gamma * np.where(model.done, 0.0, values[model.next_state]))
    q = np.bincount(model.sa, weights=backup, minlength=model.n_states * model.n_actions)
    return q.reshape(model.n_states, model.n_actions)


def oracle_value_iteration(model: EnvModel, gamma: float, tol: float = 1e-6) -> tuple[np.ndarray, np.ndarray]:
    """
    Value iteration until the largest update falls below tol * (1 - gamma) / gamma.

    Args:
        model (EnvModel): The explicit model.
        gamma (float): Discount factor in (0, 1).
        tol (float): Accuracy of the returned values.

    Returns:
        tuple[np.ndarray, np.ndarray]: Values per state and the greedy policy, ties
        going to the lowest action index.
    """
    if not 0 < gamma < 1:
        raise ValueError(f"gamma must be in (0, 1), got {gamma}.")
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}.")
    threshold = tol * (1 - gamma) / gamma
    values = np.zeros(model.n_states)
    while True:
        updated = q_values(model, values, gamma).max(axis=1)
        delta = np.max(np.abs(updated - values), initial=0.0)
        values = updated
        if delta < threshold:
            break
    return values, q_values(model, values, gamma).argmax(axis=1)


class OraclePolicy:
    """Acts in the environment with a policy computed on an EnvModel."""

    def __init__(self, domain: GridDomain, model: EnvModel, policy: np.ndarray) -> None:
        self.domain = domain
        self.model = model
        self.policy = policy

    def act(self, state: EnvState) -> int:
        return int(self.policy[self.model.index[self.model.key_of(self.domain, state)]])

    def rollouts(self, episodes: int, rng: np.random.Generator) -> list[tuple[bool, int]]:
        """Run the policy, returning (success, steps) per episode."""
        results = []
        for _ in range(episodes):
            state, _, _ = self.domain.reset(rng)
            while True:
                transition = self.domain.env_step(state, self.act(state), rng)
                state = transition.state
                if transition.done:
                    success = transition.task_done and (transition.reward_event or 0.0) > 0
                    results.append((success, state.step_count))
                    break
        return results
