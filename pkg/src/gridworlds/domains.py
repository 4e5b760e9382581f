from dataclasses import dataclass, replace
from enum import IntEnum
from typing import Any, NamedTuple

import numpy as np

from src.common.common import EpisodeDoneError, ValidationError, default_assets
from src.gridworlds.gridmap import Cell, GridMap, read_map
from src.rm.labels import LabelString
from src.rm.rewardmachine import RewardMachine, load_rm, rm_step

SLIP_PROBABILITY = 0.1
EPISODE_CAP = 500


class Action(IntEnum):
    UP = 0
    DOWN = 1
    LEFT = 2
    RIGHT = 3


MOVES = {Action.UP: (-1, 0), Action.DOWN: (1, 0), Action.LEFT: (0, -1), Action.RIGHT: (0, 1)}

# Entity touched on a step -> (visibility event it consumes, achievement event)
ACHIEVEMENTS = {
    "button": ("b", "B"),
    "cookie": ("c", "C"),
    "goal": ("g", "G"),
    "symbol_a": ("a", "A"),
    "symbol_b": ("b", "B"),
    "symbol_c": ("c", "C"),
}


@dataclass(frozen=True)
class CookiePayload:
    cookie: int | None = None
    pressed: int = 0

    def model_key(self) -> tuple:
        return (self.cookie,)


@dataclass(frozen=True)
class KeysPayload:
    # sorted dispositions of the two keys: "room0", "room2", "carried" or "consumed"
    keys: tuple[str, str] = ("room0", "room2")
    doors: tuple[bool, bool] = (False, False)

    @property
    def carrying(self) -> bool:
        return "carried" in self.keys

    def model_key(self) -> tuple:
        return (self.keys, self.doors)


@dataclass(frozen=True)
class SymbolPayload:
    # (target symbol, location rule), rule x = either room, n = room 0, s = room 2
    instruction: tuple[str, str] = ("a", "x")
    collected: str | None = None

    def model_key(self) -> tuple:
        return (self.instruction, self.collected)


@dataclass(frozen=True)
class EnvState:
    agent: Cell
    payload: Any
    rm_state: str
    step_count: int = 0
    done: bool = False


@dataclass(frozen=True)
class Observation:
    """What the agent perceives: its cell, its room and the content of that room only."""

    agent: Cell
    room: int
    visible: tuple[str, ...] = ()
    touched: str | None = None

    @property
    def key(self) -> str:
        r, c = self.agent
        return f"{r},{c}|{self.room}|{''.join(self.visible)}|{self.touched or ''}"


class Outcome(NamedTuple):
    prob: float
    agent: Cell
    payload: Any
    touched: str | None = None
    reward_event: float | None = None
    task_done: bool = False


class Transition(NamedTuple):
    state: EnvState
    observation: Observation
    label: LabelString
    done: bool
    reward_event: float | None
    task_done: bool


class GridDomain:
    """
    Base class of the benchmark worlds. A domain is bound to a map and to the
    perfect reward machine that decides episode termination. Subclasses fill in
    the hooks `check_markers`, `initial_payloads`, `blocked`, `enter` and `visible`.
    """

    name = ""
    # declared propositions and the labels the domain can emit
    alphabet = ""
    emittable: tuple[str, ...] = ()

    def __init__(
        self,
        grid_map: GridMap,
        rm: RewardMachine,
        slip: float = SLIP_PROBABILITY,
        episode_cap: int = EPISODE_CAP,
    ) -> None:
        self.map = grid_map
        self.rm = rm
        self.slip = slip
        self.episode_cap = episode_cap
        violations = self.check_markers()
        if violations:
            raise ValidationError(violations, f"map for domain {self.name}")

    # Hooks

    def check_markers(self) -> list[str]:
        return []

    def initial_payloads(self) -> list[tuple[float, Any]]:
        return [(1.0, None)]

    def blocked(self, payload: Any, cell: Cell) -> Any | None:
        """Payload after bumping into `cell` if the cell blocks the move, else None."""
        return None

    def enter(self, payload: Any, prev: Cell, cell: Cell) -> list[Outcome]:
        return [Outcome(1.0, cell, payload)]

    def visible(self, payload: Any, cell: Cell, room: int) -> tuple[str, ...]:
        return ()

    # Shared dynamics

    @property
    def emittable_labels(self) -> list[LabelString]:
        return [LabelString.parse(label) for label in self.emittable]

    def _count_markers(self, marker: str, room: int | None = None) -> int:
        return sum(1 for cell in self.map.cells_with(marker) if room is None or self.map.room(cell) == room)

    def _require(self, marker: str, rooms: tuple, count: int = 1) -> list[str]:
        return [
            f"domain {self.name} needs {count} {marker} in room {room}, found {self._count_markers(marker, room)}"
            for room in rooms
            if self._count_markers(marker, room) != count
        ]

    def observe(self, agent: Cell, payload: Any, touched: str | None = None) -> Observation:
        room = self.map.room(agent)
        return Observation(agent, room, self.visible(payload, agent, room), touched)

    def label_of(self, prev_obs: Observation | None, action: int | None, obs: Observation) -> LabelString:
        """
        Label of a step: the room digit of the new observation, the visibility
        events of its room, and the achievement of the touched entity replacing
        the visibility event it consumes.
        """
        events = list(obs.visible)
        if obs.touched in ACHIEVEMENTS:
            seen, achieved = ACHIEVEMENTS[obs.touched]
            if seen in events:
                events.remove(seen)
            events.append(achieved)
        return LabelString((str(obs.room), *events))

    def reset(self, rng: np.random.Generator) -> tuple[EnvState, Observation, LabelString]:
        payloads = self.initial_payloads()
        if len(payloads) == 1:
            payload = payloads[0][1]
        else:
            payload = payloads[rng.choice(len(payloads), p=[p for p, _ in payloads])][1]
        obs = self.observe(self.map.start, payload)
        label = self.label_of(None, None, obs)
        rm_state, _ = rm_step(self.rm, self.rm.initial, label)
        return EnvState(self.map.start, payload, rm_state), obs, label

    def outcomes(self, agent: Cell, payload: Any, direction: int) -> list[Outcome]:
        """All outcomes of executing `direction` (after slip) with their probabilities."""
        dr, dc = MOVES[Action(direction)]
        target = (agent[0] + dr, agent[1] + dc)
        if self.map.is_wall(target):
            return [Outcome(1.0, agent, payload)]
        bumped = self.blocked(payload, target)
        if bumped is not None:
            return [Outcome(1.0, agent, bumped)]
        return self.enter(payload, agent, target)

    def env_step(self, state: EnvState, action: int, rng: np.random.Generator) -> Transition:
        """
        Execute one step. With probability `slip` the executed direction is
        resampled uniformly over the four actions.

        Raises:
            EpisodeDoneError: If the episode has already ended.
        """
        if state.done:
            raise EpisodeDoneError("The episode is over, call reset first.")
        direction = int(action)
        if rng.random() < self.slip:
            direction = int(rng.integers(len(MOVES)))
        outcomes = self.outcomes(state.agent, state.payload, direction)
        if len(outcomes) == 1:
            outcome = outcomes[0]
        else:
            outcome = outcomes[rng.choice(len(outcomes), p=[o.prob for o in outcomes])]
        prev_obs = self.observe(state.agent, state.payload)
        obs = self.observe(outcome.agent, outcome.payload, outcome.touched)
        label = self.label_of(prev_obs, action, obs)
        rm_state, _ = rm_step(self.rm, state.rm_state, label)
        step_count = state.step_count + 1
        task_done = outcome.task_done or self.rm.is_terminal(rm_state)
        done = task_done or step_count >= self.episode_cap
        next_state = EnvState(outcome.agent, outcome.payload, rm_state, step_count, done)
        return Transition(next_state, obs, label, done, outcome.reward_event, task_done)

    def model_key(self, state: EnvState) -> tuple:
        payload_key = state.payload.model_key() if state.payload is not None else ()
        return (state.agent, payload_key, state.rm_state)


class CookieWorld(GridDomain):
    """
    Pressing the button in room 3 makes a cookie appear in room 0 or room 2,
    replacing any previous cookie. Eating it ends the episode with reward 1.
    """

    name = "cookie"
    alphabet = "0123bcBC"
    emittable = ("1", "0", "0c", "0C", "2", "2c", "2C", "3b", "3B")

    def check_markers(self) -> list[str]:
        return self._require("button", (3,)) + self._require("cookie_slot", (0, 2))

    def initial_payloads(self) -> list[tuple[float, Any]]:
        return [(1.0, CookiePayload())]

    def cookie_rooms(self) -> list[int]:
        return sorted({self.map.room(cell) for cell in self.map.cells_with("cookie_slot")})

    def enter(self, payload: CookiePayload, prev: Cell, cell: Cell) -> list[Outcome]:
        marker = self.map.marker_at(cell)
        if marker == "button" and prev != cell:
            rooms = self.cookie_rooms()
            return [
                Outcome(1.0 / len(rooms), cell, CookiePayload(room, payload.pressed + 1), "button")
                for room in rooms
            ]
        if marker == "cookie_slot" and payload.cookie == self.map.room(cell):
            return [Outcome(1.0, cell, replace(payload, cookie=None), "cookie", 1.0, True)]
        return [Outcome(1.0, cell, payload)]

    def visible(self, payload: CookiePayload, cell: Cell, room: int) -> tuple[str, ...]:
        events = []
        if any(self.map.room(b) == room for b in self.map.cells_with("button")):
            events.append("b")
        if payload.cookie is not None and payload.cookie == room:
            events.append("c")
        return tuple(events)


class SimpleCookieWorld(CookieWorld):
    """Fully observable single-room variant with a step cost. Emits only B and C."""

    name = "simple_cookie"
    alphabet = "BC"
    emittable = ("", "B", "C")

    def check_markers(self) -> list[str]:
        return self._require("button", (1,)) + self._require("cookie_slot", (1,))

    def visible(self, payload: CookiePayload, cell: Cell, room: int) -> tuple[str, ...]:
        return ("c",) if payload.cookie is not None else ()

    def label_of(self, prev_obs: Observation | None, action: int | None, obs: Observation) -> LabelString:
        if obs.touched in ("button", "cookie"):
            return LabelString((ACHIEVEMENTS[obs.touched][1],))
        return LabelString()


class KeysWorld(GridDomain):
    """
    Two keys lie in rooms 0 and 2. The agent carries at most one key, picks it up
    by walking onto the key cell and spends it by walking into a closed door.
    Reaching the goal behind both doors ends the episode with reward 1.
    """

    name = "keys"
    alphabet = "0123*dgkG"
    emittable = (
        "1", "1*", "0", "0k", "0kk", "0*", "0*k", "2", "2k", "2kk", "2*", "2*k",
        "3dg", "3*dg", "3g", "3G",
    )

    def check_markers(self) -> list[str]:
        violations = self._require("goal", (3,)) + self._require("cookie_slot", (0, 2))
        if len(self.map.door_slots) != 2:
            violations.append(f"domain {self.name} needs 2 door slots, found {len(self.map.door_slots)}")
        return violations

    def initial_payloads(self) -> list[tuple[float, Any]]:
        # each key independently uniform over room 0 and room 2
        return [
            (0.25, KeysPayload(("room0", "room0"))),
            (0.5, KeysPayload(("room0", "room2"))),
            (0.25, KeysPayload(("room2", "room2"))),
        ]

    def blocked(self, payload: KeysPayload, cell: Cell) -> KeysPayload | None:
        doors = self.map.door_slots
        if cell not in doors:
            return None
        i = doors.index(cell)
        if payload.doors[i]:
            return None
        if not payload.carrying:
            return payload
        keys = tuple(sorted("consumed" if k == "carried" else k for k in payload.keys))
        opened = tuple(True if j == i else d for j, d in enumerate(payload.doors))
        return KeysPayload(keys, opened)

    def enter(self, payload: KeysPayload, prev: Cell, cell: Cell) -> list[Outcome]:
        marker = self.map.marker_at(cell)
        here = f"room{self.map.room(cell)}"
        if marker == "cookie_slot" and not payload.carrying and here in payload.keys:
            keys = list(payload.keys)
            keys[keys.index(here)] = "carried"
            return [Outcome(1.0, cell, replace(payload, keys=tuple(sorted(keys))), "key")]
        if marker == "goal":
            return [Outcome(1.0, cell, payload, "goal", 1.0, True)]
        return [Outcome(1.0, cell, payload)]

    def visible(self, payload: KeysPayload, cell: Cell, room: int) -> tuple[str, ...]:
        events = ["*"] if payload.carrying else []
        if room in (0, 2):
            events += ["k"] * payload.keys.count(f"room{room}")
        elif room == 3:
            events += ["d"] * payload.doors.count(False)
            events.append("g")
        return tuple(events)


class SymbolWorld(GridDomain):
    """
    Rooms 0 and 2 both hold the symbols a, b and c; room 3 shows the instruction.
    Collecting any symbol ends the episode, with reward 1 if it satisfies the
    instruction and -1 otherwise.
    """

    name = "symbol"
    alphabet = "0123abcnsxABC"
    symbols = ("a", "b", "c")
    rules = ("x", "n", "s")
    emittable = (
        "1",
        "0abc", "0Abc", "0aBc", "0abC",
        "2abc", "2Abc", "2aBc", "2abC",
        "3ax", "3an", "3as", "3bx", "3bn", "3bs", "3cx", "3cn", "3cs",
    )

    def check_markers(self) -> list[str]:
        violations = self._require("instruction", (3,))
        for symbol in self.symbols:
            violations += self._require(f"symbol_{symbol}", (0, 2))
        return violations

    def initial_payloads(self) -> list[tuple[float, Any]]:
        return [(1.0 / 9, SymbolPayload((s, r))) for s in self.symbols for r in self.rules]

    @staticmethod
    def satisfies(instruction: tuple[str, str], symbol: str, room: int) -> bool:
        target, rule = instruction
        return symbol == target and (rule == "x" or (rule == "n" and room == 0) or (rule == "s" and room == 2))

    def enter(self, payload: SymbolPayload, prev: Cell, cell: Cell) -> list[Outcome]:
        marker = self.map.marker_at(cell)
        if marker is not None and marker.startswith("symbol_"):
            symbol, room = marker[-1], self.map.room(cell)
            reward = 1.0 if self.satisfies(payload.instruction, symbol, room) else -1.0
            collected = replace(payload, collected=f"{symbol}{room}")
            return [Outcome(1.0, cell, collected, marker, reward, True)]
        return [Outcome(1.0, cell, payload)]

    def visible(self, payload: SymbolPayload, cell: Cell, room: int) -> tuple[str, ...]:
        if room in (0, 2):
            return tuple(s for s in self.symbols if payload.collected != f"{s}{room}")
        if room == 3:
            return payload.instruction
        return ()


DOMAINS = {
    "cookie": CookieWorld,
    "keys": KeysWorld,
    "symbol": SymbolWorld,
    "simple_cookie": SimpleCookieWorld,
}


def make_domain(
    name: str,
    grid_map: GridMap | None = None,
    rm: RewardMachine | None = None,
    slip: float = SLIP_PROBABILITY,
    episode_cap: int = EPISODE_CAP,
) -> GridDomain:
    """
    Bind a benchmark domain to a map and a reward machine, loading the shipped
    assets for whatever is not given.

    Args:
        name (str): One of "cookie", "keys", "symbol", "simple_cookie".
        grid_map (GridMap | None): Map to bind, the domain's default map if None.
        rm (RewardMachine | None): Perfect reward machine, the shipped one if None.
        slip (float): Slip probability.
        episode_cap (int): Maximum number of steps per episode.

    Returns:
        GridDomain: The bound domain.
    """
    if name not in DOMAINS:
        raise ValueError(f"Unknown domain {name!r}, expected one of {sorted(DOMAINS)}.")
    if grid_map is None or rm is None:
        assets = default_assets(name)
        grid_map = grid_map or read_map(assets["map"])
        rm = rm or load_rm(assets["rm"])
    return DOMAINS[name](grid_map, rm, slip=slip, episode_cap=episode_cap)
