from dataclasses import asdict, dataclass, fields


@dataclass(frozen=True)
class EpisodeRecord:
    """Outcome of one evaluation episode."""

    agent_id: int
    episode: int
    success: bool
    steps: int
    reward: float
    tamper_count: int
    episode_length: int
    seed: int
    # "success", "failure" (task ended without reward) or "timeout"
    outcome: str = "timeout"
    desync_steps: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "EpisodeRecord":
        types = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for name, value in data.items():
            if name not in types:
                raise ValueError(f"Unknown episode record field {name!r}.")
            if types[name] is bool:
                value = value.strip().lower() in ("true", "1") if isinstance(value, str) else bool(value)
            else:
                value = types[name](value)
            kwargs[name] = value
        return cls(**kwargs)


RECORD_COLUMNS = [f.name for f in fields(EpisodeRecord)]
