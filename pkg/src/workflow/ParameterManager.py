import json
from itertools import product
from pathlib import Path

from src.attacks.blinding import BLINDING_MODES
from src.attacks.selection import RANKINGS
from src.attacks.tamperer import TAMPER_KINDS
from src.attacks.timing import TIMING_KINDS
from src.common.common import REPO_ROOT, ConfigError
from src.evaluation.report import REPORT_FORMATS
from src.gridworlds.domains import DOMAINS

# Run parameters. Values come from default-parameters.json, this list only
# describes what each key accepts.
RUN_SCHEMA = [
    {"key": "domain", "type": "str", "options": sorted(DOMAINS), "help": "Benchmark domain."},
    {"key": "map", "type": "path", "nullable": True, "help": "Map file, the domain's shipped map if null."},
    {"key": "rm", "type": "path", "nullable": True, "help": "Reward machine file, the domain's shipped one if null."},
    {"key": "n-agents", "type": "int", "min": 0, "help": "Number of agents to train."},
    {"key": "base-seed", "type": "int", "min": 0, "help": "Agent i is trained with seed base-seed + i; sessions derive episode seeds from it."},
    {"key": "gamma", "type": "float", "min": 0, "max": 1, "help": "Discount factor."},
    {"key": "epsilon", "type": "float", "min": 0, "max": 1, "help": "Exploration rate."},
    {"key": "learning-rate", "type": "float", "min": 0, "max": 1, "help": "Q-learning step size."},
    {"key": "q-init", "type": "float", "min": 0, "max": 1, "help": "Initial value of unvisited state-action pairs."},
    {"key": "total-steps", "type": "int", "min": 0, "nullable": True, "help": "Training steps per agent, the domain's budget if null."},
    {"key": "use-crm", "type": "bool", "help": "Learn from counterfactual experiences."},
    {"key": "use-ars", "type": "bool", "help": "Shape rewards with the reward machine's value function."},
    {"key": "episode-cap", "type": "int", "min": 1, "help": "Step limit per episode."},
    {"key": "slip", "type": "float", "min": 0, "max": 1, "help": "Probability that a move goes in a random direction."},
    {"key": "episodes", "type": "int", "min": 0, "help": "Evaluation episodes per agent and attack."},
    {"key": "impact-alpha", "type": "float", "min": 0, "help": "Normalization of the impact score."},
    {"key": "agents-dir", "type": "path", "nullable": True, "help": "Directory with agent files, the train workflow's results if null."},
    {"key": "attacks", "type": "list", "help": "Attack configurations of an attack run."},
    {"key": "report-format", "type": "str", "options": list(REPORT_FORMATS), "help": "Format of metric tables."},
    {"key": "workers", "type": "int", "min": 1, "help": "Number of worker processes."},
]

# Keys of one entry in the attacks list. rho and trigger-p also accept a list
# of values, which expands into one attack per value.
ATTACK_SCHEMA = [
    {"key": "name", "type": "str", "value": "", "help": "Attack column value, derived from kind and mode if empty."},
    {"key": "kind", "type": "str", "value": "identity", "options": list(TAMPER_KINDS)},
    {"key": "mode", "type": "str", "value": None, "nullable": True, "options": list(BLINDING_MODES)},
    {"key": "timing", "type": "str", "value": "all_instances", "options": list(TIMING_KINDS)},
    {"key": "trigger-p", "type": "float", "value": 0.5, "min": 0, "max": 1, "sweep": True},
    {"key": "per-occurrence", "type": "bool", "value": False, "help": "Draw the trigger at every target occurrence instead of every stream start."},
    {"key": "rho", "type": "float", "value": 0.0, "min": 0, "max": 1, "sweep": True},
    {"key": "observation-episodes", "type": "int", "value": 100, "min": 1},
    {"key": "observation-budget", "type": "int", "value": None, "min": 1, "nullable": True},
    {"key": "ranking", "type": "str", "value": "lexicographic", "options": list(RANKINGS), "help": "Ranking of observed candidates when no targets are given."},
    {"key": "targets", "type": "list", "value": []},
    {"key": "seed", "type": "int", "value": 0, "min": 0},
]

_TYPES = {
    "str": (str,),
    "path": (str,),
    "int": (int,),
    "float": (int, float),
    "bool": (bool,),
    "list": (list,),
}


def _check_value(entry: dict, value) -> list[str]:
    key = entry["key"]
    if value is None:
        return [] if entry.get("nullable") else [f"{key} must not be null"]
    if entry.get("sweep") and isinstance(value, list):
        if not value:
            return [f"{key} sweep is empty"]
        return [v for item in value for v in _check_value({**entry, "sweep": False}, item)]
    # bool is an int subclass
    if isinstance(value, bool) and entry["type"] != "bool":
        return [f"{key} must be of type {entry['type']}, got {value!r}"]
    if not isinstance(value, _TYPES[entry["type"]]):
        return [f"{key} must be of type {entry['type']}, got {value!r}"]
    if "options" in entry and value not in entry["options"]:
        return [f"{key} must be one of {entry['options']}, got {value!r}"]
    violations = []
    if "min" in entry and value < entry["min"]:
        violations.append(f"{key} must be >= {entry['min']}, got {value!r}")
    if "max" in entry and value > entry["max"]:
        violations.append(f"{key} must be <= {entry['max']}, got {value!r}")
    return violations


def check_parameters(params: dict, schema: list[dict], what: str) -> list[str]:
    """Violations of params against a schema, unknown keys included."""
    known = {entry["key"] for entry in schema}
    violations = [f"unknown {what} key {key!r}" for key in params if key not in known]
    for entry in schema:
        if entry["key"] in params:
            violations += _check_value(entry, params[entry["key"]])
    return violations


class ParameterManager:
    """
    Manages the parameters of a workflow: loading the defaults, merging a user
    configuration file and command line overrides on top of them, checking the
    result against the parameter schema, and saving the effective parameters to
    params.json in the workflow directory.

    Unknown keys are rejected, a silent typo in an attack parameter would
    otherwise corrupt an experiment.

    Attributes:
        params_file (Path): Path to the JSON file where parameters are saved.
        defaults_file (Path): Path to the JSON file with the default values.
    """

    def __init__(self, workflow_dir: Path, defaults_file: Path | None = None):
        self.params_file = Path(workflow_dir, "params.json")
        self.defaults_file = Path(defaults_file or Path(REPO_ROOT, "default-parameters.json"))

    def get_defaults(self) -> dict:
        with open(self.defaults_file, "r", encoding="utf-8") as f:
            return json.load(f)

    def load_parameters(self, config_file: str | Path | None = None, overrides: dict | None = None) -> dict:
        """
        Effective parameters: defaults, then the user configuration, then overrides.

        Args:
            config_file (str | Path | None): A JSON file with parameters to change.
            overrides (dict | None): Values from command line flags; None entries are ignored.

        Returns:
            dict: The checked parameters.

        Raises:
            ConfigError: If the configuration cannot be read or violates the schema.
        """
        params = self.get_defaults()
        if config_file is not None:
            try:
                with open(config_file, "r", encoding="utf-8") as f:
                    user = json.load(f)
            except OSError as e:
                raise ConfigError(f"Cannot read configuration file **{config_file}**: {e}") from e
            except json.JSONDecodeError as e:
                raise ConfigError(f"Invalid JSON in configuration file **{config_file}**: {e}") from e
            if not isinstance(user, dict):
                raise ConfigError(f"Configuration file **{config_file}** must hold a JSON object.")
            unknown = sorted(set(user) - set(params))
            if unknown:
                raise ConfigError(f"Unknown parameter(s) {unknown} in **{config_file}**.")
            params.update(user)
        params.update({k: v for k, v in (overrides or {}).items() if v is not None})
        self.validate_parameters(params)
        return params

    def validate_parameters(self, params: dict) -> None:
        """
        Raises:
            ConfigError: Listing every violation of the run and attack schemas.
        """
        violations = check_parameters(params, RUN_SCHEMA, "parameter")
        missing = [entry["key"] for entry in RUN_SCHEMA if entry["key"] not in params]
        violations += [f"missing parameter {key!r}" for key in missing]
        for i, attack in enumerate(params.get("attacks") or []):
            if not isinstance(attack, dict):
                violations.append(f"attack {i} must be a JSON object")
                continue
            violations += [f"attack {i}: {v}" for v in check_parameters(attack, ATTACK_SCHEMA, "attack")]
        if violations:
            raise ConfigError("Invalid parameters: " + "; ".join(violations))

    def attack_parameters(self, params: dict) -> list[dict]:
        """
        The attacks of a run with defaults filled in and rho / trigger-p sweeps
        expanded, in configuration order.
        """
        defaults = {entry["key"]: entry["value"] for entry in ATTACK_SCHEMA}
        sweeps = [entry["key"] for entry in ATTACK_SCHEMA if entry.get("sweep")]
        attacks = []
        for attack in params.get("attacks") or []:
            attack = defaults | attack
            if attack["mode"] is None:
                attack["mode"] = "edge" if attack["kind"] == "edge_blinding" else "compound"
            values = [attack[k] if isinstance(attack[k], list) else [attack[k]] for k in sweeps]
            for combination in product(*values):
                attacks.append(attack | dict(zip(sweeps, combination)))
        return attacks

    def save_parameters(self, params: dict) -> None:
        """
        Saves the effective parameters to the JSON file of the workflow directory.
        """
        self.params_file.parent.mkdir(parents=True, exist_ok=True)
        with open(self.params_file, "w", encoding="utf-8") as f:
            json.dump(params, f, indent=4)

    def get_parameters_from_json(self) -> dict:
        """
        Loads parameters from the JSON file if it exists and returns them as a dictionary.
        If the file does not exist, it returns an empty dictionary.

        Returns:
            dict: A dictionary containing the loaded parameters.
        """
        if not Path(self.params_file).exists():
            return {}
        try:
            with open(self.params_file, "r", encoding="utf-8") as f:
                return json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"Invalid JSON parameter file **{self.params_file}**: {e}") from e

    def reset_to_default_parameters(self) -> None:
        """
        Resets the parameters to their default values by deleting the saved
        parameters JSON file.
        """
        self.params_file.unlink(missing_ok=True)
