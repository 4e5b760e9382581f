from dataclasses import dataclass

import numpy as np

TIMING_KINDS = ("all_instances", "first_stream", "triggered_stream")


@dataclass
class TimingState:
    """
    When to blind target occurrences.

    all_instances blinds every occurrence. first_stream blinds the first
    contiguous run of occurrences and stops. triggered_stream draws at the start
    of every run and blinds the first run whose draw succeeds; with
    per_occurrence the draw is repeated on every untriggered occurrence.
    """

    kind: str = "all_instances"
    trigger_p: float = 1.0
    per_occurrence: bool = False
    phase: str = "idle"
    previous_target: bool = False

    def __post_init__(self) -> None:
        if self.kind not in TIMING_KINDS:
            raise ValueError(f"Unknown timing strategy {self.kind!r}, expected one of {TIMING_KINDS}.")
        if self.kind == "triggered_stream" and not 0 < self.trigger_p <= 1:
            raise ValueError(f"trigger_p must be in (0, 1], got {self.trigger_p}.")

    def reset(self) -> None:
        self.phase = "idle"
        self.previous_target = False

    @property
    def done(self) -> bool:
        return self.phase == "done"


def should_blind(timing: TimingState, is_target_now: bool, rng: np.random.Generator | None = None) -> tuple[bool, bool]:
    """
    Advance the timing state by one labeling output.

    Args:
        timing (TimingState): State, updated in place.
        is_target_now (bool): Whether the current output is a target occurrence.
        rng (np.random.Generator): Needed by triggered_stream.

    Returns:
        tuple[bool, bool]: (blind this output, attack done).
    """
    if timing.kind == "all_instances":
        return is_target_now, False

    stream_start = is_target_now and not timing.previous_target
    timing.previous_target = is_target_now
    if timing.phase == "done":
        return False, True
    if timing.phase == "in_stream":
        if is_target_now:
            return True, False
        timing.phase = "done"
        return False, True
    # idle
    if not is_target_now:
        return False, False
    if timing.kind == "first_stream":
        timing.phase = "in_stream"
        return True, False
    if stream_start or timing.per_occurrence:
        if rng is None:
            raise ValueError("triggered_stream timing needs a random generator.")
        if rng.random() < timing.trigger_p:
            timing.phase = "in_stream"
            return True, False
    return False, False
