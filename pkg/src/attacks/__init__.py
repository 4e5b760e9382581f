from .blinding import (
    BLINDING_MODES,
    BlindingStrategy,
    edge_blinding_apply,
    event_blinding_apply,
    is_target,
    random_blinding_rule,
    random_hallucination_rule,
    state_edges,
)
from .selection import RANKINGS, CandidateStats, collect_candidates, head_target, rank_candidates, rank_candidates_weighted
from .tamperer import TAMPER_KINDS, AttackConfig, Tamperer, build_tamperer, tamper
from .timing import TIMING_KINDS, TimingState, should_blind
