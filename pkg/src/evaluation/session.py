from dataclasses import dataclass, field

from src.attacks.selection import collect_candidates, head_target
from src.attacks.tamperer import AttackConfig, build_tamperer
from src.common.common import ERRORS, ConfigError, derive_seed, make_rng
from src.evaluation.records import EpisodeRecord
from src.gridworlds.domains import GridDomain
from src.learning.agentfile import Agent
from src.learning.qrm import run_episode, victim_trace
from src.rm.rewardmachine import RewardMachine

TAMPER_LOG_COLUMNS = ["episode", "t", "sigma_in", "sigma_out", "blinded"]


@dataclass
class SessionResult:
    records: list[EpisodeRecord] = field(default_factory=list)
    # agent id -> rows (episode, t, sigma_in, sigma_out, blinded)
    tamper_logs: dict[int, list[tuple]] = field(default_factory=dict)
    # agent id -> blinding targets used against it
    targets: dict[int, tuple[str, ...]] = field(default_factory=dict)


def select_targets(agent: Agent, domain: GridDomain, rm: RewardMachine, config: AttackConfig, base_seed: int) -> tuple[str, ...] | None:
    """
    Blinding targets for one victim: the explicit targets of the config, or the
    head of the candidate ranking after a passive observation phase.
    """
    if not config.is_blinding:
        return None
    if config.targets:
        return tuple(config.targets)
    rng = make_rng(base_seed, agent.agent_id, config.seed, 2)
    trace = victim_trace(agent.q, domain, rm, config.observation_episodes, rng)
    stats = collect_candidates(trace, config.mode, config.observation_budget, rm.terminals)
    return (head_target(stats, config.ranking),)


def agent_session(job: tuple) -> tuple[list[EpisodeRecord], list[tuple], tuple[str, ...] | None]:
    """Run every evaluation episode of one agent. Jobs are tuples so that they pickle."""
    agent, domain, rm, config, episodes, cap, base_seed = job
    targets = select_targets(agent, domain, rm, config, base_seed)
    records, log = [], []
    for episode in range(episodes):
        seed = derive_seed(base_seed, agent.agent_id, episode)
        tamperer = build_tamperer(
            config,
            make_rng(base_seed, agent.agent_id, episode, config.seed, 1),
            rm=rm,
            alphabet=tuple(domain.emittable_labels),
            targets=targets,
        )
        rng = make_rng(seed)
        records.append(run_episode(agent.q, domain, rm, rng, cap, tamperer, agent.agent_id, episode, seed))
        log += [(episode, t, str(a), str(b), int(a != b)) for t, a, b in tamperer.history]
    return records, log, targets


def run_session(
    agents: list[Agent],
    domain: GridDomain,
    rm: RewardMachine,
    config: AttackConfig,
    episodes: int = 1000,
    cap: int = 500,
    base_seed: int = 0,
    executor=None,
    workers: int = 1,
    logger=None,
) -> SessionResult:
    """
    Evaluate every agent under one attack.

    Each episode gets its own seed derived from (base_seed, agent id, episode) and
    a fresh tamperer, so results do not depend on how agents are spread over
    workers. Records come back ordered by agent id and episode.

    Args:
        agents (list[Agent]): Trained agents.
        domain (GridDomain): Bound environment.
        rm (RewardMachine): The agents' reward machine.
        config (AttackConfig): The attack.
        episodes (int): Evaluation episodes per agent.
        cap (int): Step limit per episode.
        base_seed (int): Session seed.
        executor (JobExecutor): Optional executor running agents in parallel.
        workers (int): Number of parallel workers.
        logger (Logger): Optional workflow logger.

    Returns:
        SessionResult: Records, tamper logs and chosen targets.
    """
    for agent in agents:
        if agent.rm_name != rm.name:
            raise ConfigError(ERRORS["domain-mismatch"].format(agent=agent.agent_id, trained=agent.rm_name, used=rm.name))
    jobs = [(agent, domain, rm, config, episodes, cap, base_seed) for agent in sorted(agents, key=lambda a: a.agent_id)]
    if executor is not None:
        results = executor.run_multiple_jobs(agent_session, jobs, workers)
    else:
        results = [agent_session(job) for job in jobs]
    session = SessionResult()
    for (agent, *_), (records, log, targets) in zip(jobs, results):
        session.records += records
        session.tamper_logs[agent.agent_id] = log
        if targets is not None:
            session.targets[agent.agent_id] = targets
            if logger is not None:
                logger.log(f"Agent {agent.agent_id}: blinding targets {', '.join(targets)}", 2)
    session.records.sort(key=lambda r: (r.agent_id, r.episode))
    return session
