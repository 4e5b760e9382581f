import shlex
from dataclasses import dataclass, field
from pathlib import Path

from src.common.common import ParseError, TerminalStateError, ValidationError, natural_key
from src.rm.labels import LabelString


@dataclass(frozen=True)
class Edge:
    """One edge line of a reward machine file. Several labels form a disjunction."""

    source: str
    labels: tuple[LabelString, ...]
    target: str
    reward: float


@dataclass(frozen=True)
class RewardMachine:
    """
    Simple reward machine (U, u0, T, delta_u, delta_r) over canonical labels.

    Non-terminal states are held in `states`, terminal ones in `terminals`.
    Transitions are built from the grouped `edges`; any (state, label) pair
    without an entry is an implicit self-loop with reward 0.
    """

    name: str
    states: frozenset[str]
    initial: str
    terminals: frozenset[str]
    edges: tuple[Edge, ...]
    transitions: dict = field(init=False, repr=False, compare=False)
    duplicates: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        transitions, duplicates = {}, []
        for edge in self.edges:
            for label in edge.labels:
                key = (edge.source, label)
                if key in transitions:
                    duplicates.append(key)
                    continue
                transitions[key] = (edge.target, float(edge.reward))
        object.__setattr__(self, "transitions", transitions)
        object.__setattr__(self, "duplicates", tuple(duplicates))

    def is_terminal(self, u: str) -> bool:
        return u in self.terminals

    def sorted_states(self) -> list[str]:
        return sorted(self.states, key=natural_key)

    def labels(self) -> list[LabelString]:
        """Every label appearing in the transition table, in canonical order."""
        return sorted({label for _, label in self.transitions}, key=LabelString.serialize)

    def labels_from(self, u: str) -> list[LabelString]:
        return sorted((label for src, label in self.transitions if src == u), key=LabelString.serialize)

    def step(self, u: str, label: LabelString) -> tuple[str, float]:
        return rm_step(self, u, label)


def validate(rm: RewardMachine) -> list[str]:
    """
    Check the reward machine invariants.

    Args:
        rm (RewardMachine): The reward machine to check.

    Returns:
        list[str]: One description per violation, empty for a valid machine.
    """
    violations = []
    if rm.initial in rm.terminals:
        violations.append("initial state is terminal")
    elif rm.initial not in rm.states:
        violations.append(f"initial state '{rm.initial}' is not a state")
    for u in sorted(rm.states & rm.terminals, key=natural_key):
        if u != rm.initial:
            violations.append(f"state '{u}' is both terminal and non-terminal")
    known = rm.states | rm.terminals
    for edge in rm.edges:
        if edge.source in rm.terminals:
            violations.append(f"transition leaves terminal state '{edge.source}'")
        elif edge.source not in rm.states:
            violations.append(f"transition source '{edge.source}' is not a state")
        if edge.target not in known:
            violations.append(f"transition target '{edge.target}' is not a state")
        if not edge.labels:
            violations.append(f"transition from '{edge.source}' has no label")
    for u, label in rm.duplicates:
        violations.append(f"nondeterministic transition ('{u}', \"{label}\")")
    return violations


def rm_step(rm: RewardMachine, u: str, label: LabelString) -> tuple[str, float]:
    """
    Advance the reward machine by one label.

    Args:
        rm (RewardMachine): The reward machine.
        u (str): Current non-terminal state.
        label (LabelString): Label emitted on this step.

    Returns:
        tuple[str, float]: Next state and reward, (u, 0.0) for unlisted labels.
    """
    if u in rm.terminals:
        raise TerminalStateError(f"Reward machine {rm.name} is in terminal state {u}.")
    if u not in rm.states:
        raise ValueError(f"Unknown reward machine state {u!r}.")
    return rm.transitions.get((u, label), (u, 0.0))


def _format_reward(reward: float) -> str:
    reward = float(reward)
    if reward.is_integer():
        return str(int(reward))
    return repr(reward)


def parse_rm(text: str) -> RewardMachine:
    """
    Parse a reward machine file and validate the result.

    Grammar (one statement per line, `#` starts a comment):
        rm <name> initial=<id>
        state <id> [terminal]
        edge <src> "<label>[|<label>...]" <dst> <reward>

    Raises:
        ParseError: On syntax errors, with the 1-based line number.
        ValidationError: If the parsed machine violates an invariant.
    """
    name, initial = None, None
    states, terminals, edges = set(), set(), []
    for number, line in enumerate(text.splitlines(), start=1):
        try:
            tokens = shlex.split(line, comments=True)
        except ValueError as e:
            raise ParseError(str(e), number) from e
        if not tokens:
            continue
        keyword = tokens[0]
        if name is None and keyword != "rm":
            raise ParseError("expected header 'rm <name> initial=<id>'", number)
        if keyword == "rm":
            if name is not None:
                raise ParseError("duplicate header", number)
            if len(tokens) != 3 or not tokens[2].startswith("initial="):
                raise ParseError("malformed header, expected 'rm <name> initial=<id>'", number)
            name, initial = tokens[1], tokens[2].removeprefix("initial=")
        elif keyword == "state":
            if len(tokens) == 2:
                states.add(tokens[1])
            elif len(tokens) == 3 and tokens[2] == "terminal":
                terminals.add(tokens[1])
            else:
                raise ParseError("malformed state line, expected 'state <id> [terminal]'", number)
        elif keyword == "edge":
            if len(tokens) != 5:
                raise ParseError("malformed edge line, expected 'edge <src> \"<label>\" <dst> <reward>'", number)
            try:
                labels = tuple(LabelString.parse(part) for part in tokens[2].split("|"))
                reward = float(tokens[4])
            except ValueError as e:
                raise ParseError(str(e), number) from e
            edges.append(Edge(tokens[1], labels, tokens[3], reward))
        else:
            raise ParseError(f"unknown statement {keyword!r}", number)
    if name is None:
        raise ParseError("empty reward machine file", 1)
    # A state listed both ways stays in both sets so that validate reports it
    rm = RewardMachine(name, frozenset(states), initial, frozenset(terminals), tuple(edges))
    violations = validate(rm)
    if violations:
        raise ValidationError(violations, f"reward machine {name}")
    return rm


def serialize_rm(rm: RewardMachine) -> str:
    """Serialize a reward machine to its canonical file form."""
    lines = [f"rm {rm.name} initial={rm.initial}"]
    lines += [f"state {u}" for u in rm.sorted_states()]
    lines += [f"state {u} terminal" for u in sorted(rm.terminals, key=natural_key)]
    for edge in rm.edges:
        label = "|".join(str(l) for l in edge.labels)
        lines.append(f'edge {edge.source} "{label}" {edge.target} {_format_reward(edge.reward)}')
    return "\n".join(lines) + "\n"


def load_rm(path: str | Path) -> RewardMachine:
    """Read and parse a reward machine file."""
    with open(path, "r", encoding="utf-8") as f:
        return parse_rm(f.read())
