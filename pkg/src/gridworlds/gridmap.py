from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

from src.common.common import ParseError, ValidationError

Cell = tuple[int, int]

# Map characters and the marker they place on a floor cell
MARKERS = {
    "S": "start",
    "B": "button",
    "G": "goal",
    "D": "door_slot",
    "I": "instruction",
    "a": "symbol_a",
    "b": "symbol_b",
    "c": "symbol_c",
    "o": "cookie_slot",
}
NEIGHBOURS = ((-1, 0), (1, 0), (0, -1), (0, 1))


@dataclass(frozen=True)
class GridMap:
    """
    Immutable grid with walls, room ids and markers. Cells are (row, column).
    """

    width: int
    height: int
    walls: frozenset[Cell]
    room_of: dict[Cell, int] = field(hash=False)
    markers: dict[Cell, str] = field(hash=False)
    start: Cell
    text: str = field(default="", repr=False, compare=False, hash=False)

    def is_wall(self, cell: Cell) -> bool:
        r, c = cell
        return not (0 <= r < self.height and 0 <= c < self.width) or cell in self.walls

    def room(self, cell: Cell) -> int:
        return self.room_of[cell]

    def rooms(self) -> list[int]:
        return sorted(set(self.room_of.values()))

    def cells_with(self, marker: str) -> list[Cell]:
        """Cells holding `marker`, in reading order."""
        return sorted(cell for cell, m in self.markers.items() if m == marker)

    def marker_at(self, cell: Cell) -> str | None:
        return self.markers.get(cell)

    def floor_cells(self) -> list[Cell]:
        return sorted(self.room_of)

    @property
    def door_slots(self) -> list[Cell]:
        return self.cells_with("door_slot")


def _floor_neighbours(cell: Cell, floor: set[Cell]) -> list[Cell]:
    r, c = cell
    return [(r + dr, c + dc) for dr, dc in NEIGHBOURS if (r + dr, c + dc) in floor]


def _is_passage(cell: Cell, floor: set[Cell]) -> bool:
    """A floor cell connecting exactly two opposite floor neighbours (doorways, corridors)."""
    neighbours = _floor_neighbours(cell, floor)
    if len(neighbours) != 2:
        return False
    (r1, c1), (r2, c2) = neighbours
    return r1 == r2 or c1 == c2


def _flood(start: Cell, allowed: set[Cell]) -> set[Cell]:
    seen, queue = {start}, deque([start])
    while queue:
        for n in _floor_neighbours(queue.popleft(), allowed):
            if n not in seen:
                seen.add(n)
                queue.append(n)
    return seen


def _assign_rooms(floor: set[Cell], start: Cell, anchors: dict[int, Cell], doors: set[Cell]) -> dict[Cell, int]:
    """
    Rooms 0, 2 and 3 are flood fills from their anchors that never cross a passage
    cell. Door slots belong to room 3. Everything else reachable from the start is
    the hallway, room 1.
    """
    passages = {cell for cell in floor if _is_passage(cell, floor)} | doors
    violations, room_of = [], {}
    for room, anchor in sorted(anchors.items()):
        if room == 1:
            continue
        if anchor not in floor or anchor in passages:
            violations.append(f"anchor {anchor} of room {room} is not an inner floor cell")
            continue
        for cell in _flood(anchor, floor - passages):
            if cell in room_of:
                violations.append(f"rooms {room_of[cell]} and {room} overlap at {cell}")
            room_of[cell] = room
    for cell in doors:
        room_of[cell] = 3
    for cell in _flood(start, floor):
        room_of.setdefault(cell, 1)
    if room_of.get(start) != 1:
        violations.append("start is not in the hallway (room 1)")
    if 1 in anchors and room_of.get(anchors[1]) != 1:
        violations.append(f"anchor {anchors[1]} of room 1 is not in the hallway")
    if violations:
        raise ValidationError(violations, "map")
    return room_of


def _check_connections(room_of: dict[Cell, int]) -> list[str]:
    violations = []
    hallway = {cell for cell, room in room_of.items() if room == 1}
    for room in (0, 2):
        doorways = set()
        for cell, r in room_of.items():
            if r == room:
                doorways.update(n for n in _floor_neighbours(cell, hallway) if n in hallway)
        if len(doorways) != 1:
            violations.append(f"room {room} must connect to the hallway through exactly one doorway, found {len(doorways)}")
    if 3 in room_of.values() and not any(
        room_of[cell] == 3 and any(n in hallway for n in _floor_neighbours(cell, hallway)) for cell in room_of
    ):
        violations.append("room 3 is not connected to the hallway")
    return violations


def load_map(text: str) -> GridMap:
    """
    Parse an ASCII map.

    One character per cell: `X` wall, `.` floor, plus the marker characters in
    MARKERS. Keys World reuses the cookie slot marker `o` for its key positions.
    Lines starting with `#room <id> <row>,<col>` anchor the rooms of the four-room
    layout, other `#` lines are comments. Maps without room anchors are a single
    room (the hallway).

    Raises:
        ParseError: On malformed lines.
        ValidationError: If the map violates a layout invariant.
    """
    rows, anchors = [], {}
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.rstrip()
        if not line:
            continue
        if line.startswith("#room"):
            parts = line.split()
            try:
                room = int(parts[1])
                r, c = (int(x) for x in parts[2].split(","))
            except (IndexError, ValueError) as e:
                raise ParseError("malformed room annotation, expected '#room <id> <row>,<col>'", number) from e
            if room not in (0, 1, 2, 3) or room in anchors:
                raise ParseError(f"invalid or duplicate room id {room}", number)
            anchors[room] = (r, c)
            continue
        if line.startswith("#"):
            continue
        unknown = set(line) - set(MARKERS) - {"X", "."}
        if unknown:
            raise ParseError(f"unknown map characters {''.join(sorted(unknown))!r}", number)
        if rows and len(line) != len(rows[0][1]):
            raise ParseError(f"row width {len(line)} differs from {len(rows[0][1])}", number)
        rows.append((number, line))
    if not rows:
        raise ParseError("empty map", 1)

    walls, floor, markers = set(), set(), {}
    for r, (_, line) in enumerate(rows):
        for c, char in enumerate(line):
            if char == "X":
                walls.add((r, c))
                continue
            floor.add((r, c))
            if char in MARKERS:
                markers[(r, c)] = MARKERS[char]
    starts = [cell for cell, m in markers.items() if m == "start"]
    if not starts:
        raise ValidationError(["no start"], "map")
    if len(starts) > 1:
        raise ValidationError([f"{len(starts)} start markers, expected exactly one"], "map")
    start = starts[0]

    if anchors:
        doors = {cell for cell, m in markers.items() if m == "door_slot"}
        room_of = _assign_rooms(floor, start, anchors, doors)
        violations = _check_connections(room_of)
        if len(doors) not in (0, 2):
            violations.append(f"{len(doors)} door slots, expected 0 or 2")
    else:
        room_of = {cell: 1 for cell in _flood(start, floor)}
        violations = []
    unreachable = sorted(floor - set(room_of))
    if unreachable:
        violations.append(f"floor cell {unreachable[0]} is not reachable from the start")
    if violations:
        raise ValidationError(violations, "map")
    return GridMap(
        width=len(rows[0][1]),
        height=len(rows),
        walls=frozenset(walls),
        room_of=room_of,
        markers=markers,
        start=start,
        text=text,
    )


def read_map(path: str | Path) -> GridMap:
    """Read and parse a map file."""
    with open(path, "r", encoding="utf-8") as f:
        return load_map(f.read())
