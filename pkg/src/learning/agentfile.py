import json
from dataclasses import dataclass, field
from pathlib import Path

from src.common.common import ParseError, SchemaVersionError
from src.learning.qrm import TrainConfig
from src.learning.qtable import QTable
from src.rm.rewardmachine import RewardMachine

AGENT_FILE_VERSION = 2
MAGIC = "# rm-agent"


@dataclass
class Agent:
    q: QTable
    rm_name: str
    config: TrainConfig
    meta: dict = field(default_factory=dict)

    @property
    def agent_id(self) -> int:
        return int(self.meta.get("agent_id", self.config.seed))


def save_agent(q: QTable, rm: RewardMachine, config: TrainConfig, path: str | Path, meta: dict | None = None) -> None:
    """
    Write an agent file: header, version, reward machine, config echo, metadata,
    initial values per state,
    then one tab separated line `q <u> <obs_key> <action> <value>` per learned entry
    and a closing `end <count>` line.
    """
    entries = list(q.entries())
    lines = [
        MAGIC,
        f"version\t{AGENT_FILE_VERSION}",
        f"rm\t{rm.name}",
        f"states\t{' '.join(rm.sorted_states())}",
        f"config\t{json.dumps(config.to_dict(), sort_keys=True)}",
        f"meta\t{json.dumps(meta or {}, sort_keys=True)}",
        f"init\t{json.dumps(q.init, sort_keys=True)}",
    ]
    lines += [f"q\t{u}\t{obs_key}\t{action}\t{value!r}" for u, obs_key, action, value in entries]
    lines.append(f"end\t{len(entries)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_agent(path: str | Path) -> Agent:
    """
    Read an agent file written by save_agent.

    Raises:
        SchemaVersionError: If the file has another version.
        ParseError: If the file is malformed or truncated.
    """
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != MAGIC:
        raise ParseError("not an agent file", 1)
    header = {}
    for number, line in enumerate(lines[1:7], start=2):
        key, _, value = line.partition("\t")
        header[key] = (number, value)
    for key in ("version", "rm", "states", "config", "meta", "init"):
        if key not in header:
            raise ParseError(f"missing {key!r} header", len(lines))
    if header["version"][1] != str(AGENT_FILE_VERSION):
        raise SchemaVersionError(f"Agent file version {header['version'][1]!r}, expected {AGENT_FILE_VERSION}.")
    try:
        config = TrainConfig.from_dict(json.loads(header["config"][1]))
        meta = json.loads(header["meta"][1])
    except (ValueError, TypeError) as e:
        raise ParseError(f"malformed config or meta: {e}", header["config"][0]) from e
    states = header["states"][1].split()
    try:
        init = json.loads(header["init"][1])
        q = QTable(states, init={u: init[u] for u in states})
    except (ValueError, TypeError, KeyError) as e:
        raise ParseError(f"malformed initial values: {e}", header["init"][0]) from e

    count = None
    for number, line in enumerate(lines[7:], start=8):
        parts = line.split("\t")
        if parts[0] == "end" and len(parts) == 2:
            count = int(parts[1])
            if number != len(lines):
                raise ParseError("content after end marker", number + 1)
            break
        if parts[0] != "q" or len(parts) != 5:
            raise ParseError("malformed q entry", number)
        _, u, obs_key, action, value = parts
        if u not in q.tables:
            raise ParseError(f"unknown reward machine state {u!r}", number)
        try:
            q.set_value(u, obs_key, int(action), float(value))
        except (ValueError, IndexError) as e:
            raise ParseError(f"malformed q entry: {e}", number) from e
    if count is None:
        raise ParseError("truncated agent file, missing end marker", len(lines))
    if count != sum(1 for _ in q.entries()):
        raise ParseError(f"end marker announces {count} entries", len(lines))
    return Agent(q, header["rm"][1], config, meta)
