from .qtable import QTable
from .qrm import (
    BIN_WIDTH,
    DEFAULT_TOTAL_STEPS,
    LearningCurve,
    TrainConfig,
    TraceStep,
    epsilon_greedy,
    evaluate_policy,
    qrm_update,
    run_episode,
    train,
    victim_trace,
)
from .agentfile import AGENT_FILE_VERSION, Agent, load_agent, save_agent
