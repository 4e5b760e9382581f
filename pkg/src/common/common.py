import json
from pathlib import Path
from typing import Any

import numpy as np

# Repository root, used to resolve the shipped assets and settings
REPO_ROOT = Path(__file__).resolve().parents[2]


class ParseError(ValueError):
    """Raised when a text artifact (map, reward machine, agent file) cannot be parsed."""

    def __init__(self, message: str, line: int = 0) -> None:
        self.line = line
        if line:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(ValueError):
    """Raised when a parsed object violates its invariants. Carries every violation."""

    def __init__(self, violations: list[str], what: str = "object") -> None:
        self.violations = list(violations)
        super().__init__(f"invalid {what}: " + "; ".join(self.violations))


class ConfigError(ValueError):
    """Raised for invalid run configurations (unknown keys, bad values, missing paths)."""


class SchemaVersionError(ValueError):
    """Raised when a versioned file was written with an unsupported schema version."""


class ModelSizeError(ValueError):
    """Raised when an explicit model would exceed its state budget."""


class EpisodeDoneError(RuntimeError):
    """Raised when stepping an episode that has already ended."""


class TerminalStateError(RuntimeError):
    """Raised when stepping a reward machine that sits in a terminal state."""


def load_settings() -> dict[str, Any]:
    """
    Load the application settings from settings.json in the repository root.

    Returns:
        dict[str, Any]: The settings dictionary.
    """
    with open(Path(REPO_ROOT, "settings.json"), "r", encoding="utf-8") as f:
        return json.load(f)


def asset_path(path: str | Path) -> Path:
    """
    Resolve a path to an asset. Absolute paths and paths existing relative to the
    current working directory are returned unchanged, anything else is taken
    relative to the repository root.

    Args:
        path (str | Path): The path as given in a config or settings file.

    Returns:
        Path: The resolved path.
    """
    path = Path(path)
    if path.is_absolute() or path.exists():
        return path
    return Path(REPO_ROOT, path)


def default_assets(domain: str) -> dict[str, Path]:
    """
    Get the default map and reward machine paths of a benchmark domain.

    Args:
        domain (str): Domain name, e.g. "cookie".

    Returns:
        dict[str, Path]: Dictionary with the keys "map" and "rm".
    """
    domains = load_settings()["domains"]
    if domain not in domains:
        raise ConfigError(f"Unknown domain **{domain}**, expected one of {sorted(domains)}.")
    return {k: asset_path(v) for k, v in domains[domain].items()}


def derive_seed(*entropy: int) -> int:
    """
    Derive a 32 bit seed from a tuple of non-negative integers (e.g. base seed,
    agent id, episode index). The same tuple always gives the same seed.

    Returns:
        int: The derived seed.
    """
    return int(np.random.SeedSequence([int(e) for e in entropy]).generate_state(1)[0])


def make_rng(*entropy: int) -> np.random.Generator:
    """Create an independent random number generator stream for the given entropy tuple."""
    return np.random.default_rng(np.random.SeedSequence([int(e) for e in entropy]))


def natural_key(state_id: str) -> tuple:
    """Sort key putting "u2" before "u10"."""
    head = state_id.rstrip("0123456789")
    tail = state_id[len(head):]
    return (head, int(tail) if tail else -1, state_id)


# General warning/error messages
WARNINGS = {
    "no-agents": "n-agents is 0, nothing to train.",
    "no-successes": "Agent {agent} has no successful episodes and is excluded from the time-to-success average.",
    "no-failures": "Agent {agent} has no failed episodes and is excluded from the failure averages.",
}

ERRORS = {
    "general": "Something went wrong.",
    "workflow": "Something went wrong during workflow execution.",
    "domain-mismatch": "Agent {agent} was trained on reward machine **{trained}**, but the session uses **{used}**.",
}
