import json
import re
from pathlib import Path

import pandas as pd

from src.attacks.tamperer import AttackConfig
from src.common.common import (
    WARNINGS,
    ConfigError,
    ParseError,
    SchemaVersionError,
    ValidationError,
    asset_path,
    default_assets,
)
from src.evaluation.metrics import compute_metrics, curve_summary
from src.evaluation.report import emit_report, merge_reports, metrics_row
from src.evaluation.session import TAMPER_LOG_COLUMNS, run_session
from src.gridworlds.domains import GridDomain, make_domain
from src.gridworlds.gridmap import read_map
from src.learning.agentfile import Agent, load_agent, save_agent
from src.learning.qrm import DEFAULT_TOTAL_STEPS, LearningCurve, TrainConfig, train
from src.rm.rewardmachine import RewardMachine, load_rm
from src.workflow.WorkflowManager import WorkflowManager


def resolve_assets(params: dict) -> tuple[Path, Path]:
    """
    Map and reward machine files of a run: the configured ones or the domain's
    shipped assets.

    Raises:
        ConfigError: If a referenced file does not exist.
    """
    defaults = default_assets(params["domain"])
    paths = []
    for key in ("map", "rm"):
        path = asset_path(params[key]) if params.get(key) else defaults[key]
        if not path.is_file():
            raise ConfigError(f"The {key} file **{path}** does not exist.")
        paths.append(path)
    return paths[0], paths[1]


def load_domain(params: dict) -> tuple[GridDomain, RewardMachine]:
    """Load and bind the domain of a run."""
    map_path, rm_path = resolve_assets(params)
    rm = load_rm(rm_path)
    domain = make_domain(params["domain"], read_map(map_path), rm, slip=params["slip"], episode_cap=params["episode-cap"])
    return domain, rm


def train_config(params: dict, agent_id: int) -> TrainConfig:
    total_steps = params["total-steps"]
    if total_steps is None:
        total_steps = DEFAULT_TOTAL_STEPS[params["domain"]]
    return TrainConfig(
        gamma=params["gamma"],
        epsilon=params["epsilon"],
        learning_rate=params["learning-rate"],
        q_init=params["q-init"],
        total_steps=total_steps,
        use_crm=params["use-crm"],
        use_ars=params["use-ars"],
        episode_cap=params["episode-cap"],
        seed=params["base-seed"] + agent_id,
    )


def train_agent_job(job: tuple) -> tuple[int, int, int]:
    """Train one agent and write its agent file and learning curve."""
    domain, rm, cfg, agent_id, agent_path, curve_path, meta = job
    q, curve = train(domain, rm, cfg)
    save_agent(q, rm, cfg, agent_path, meta=meta | {"agent_id": agent_id})
    curve.to_csv(curve_path)
    return agent_id, curve.episodes, curve.successes


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "-", text).strip("-").lower()


class TrainWorkflow(WorkflowManager):
    """Trains n-agents agents and writes agent files plus learning curves."""

    def __init__(self, workspace: str | Path, echo: bool = False) -> None:
        super().__init__("Train", workspace, echo)
        self.curve_files: list[str] = []

    def execution(self) -> None:
        params = self.params
        domain, rm = load_domain(params)
        n_agents = params["n-agents"]
        if n_agents == 0:
            self.logger.log("WARNING: " + WARNINGS["no-agents"])
            return
        configs = [train_config(params, i) for i in range(n_agents)]
        names = [f"agent-{i:02d}" for i in range(n_agents)]
        agent_files = self.file_manager.get_files(names, "agent", "agents")
        self.curve_files = self.file_manager.get_files(names, "csv", "curves")
        meta = {"domain": params["domain"], "variant": configs[0].variant}
        self.logger.log(
            f"Training {n_agents} {configs[0].variant} agents on {params['domain']} for {configs[0].total_steps} steps each..."
        )
        jobs = [
            (domain, rm, cfg, i, agent_file, curve_file, meta)
            for i, (cfg, agent_file, curve_file) in enumerate(zip(configs, agent_files, self.curve_files))
        ]
        for agent_id, episodes, successes in self.executor.run_multiple_jobs(train_agent_job, jobs, params["workers"]):
            self.logger.log(f"Agent {agent_id}: {episodes} training episodes, {successes} successful", 2)
        self.logger.log(f"Agent files written to {Path(agent_files[0]).parent}")

    def results(self) -> None:
        if not self.curve_files:
            return
        curves = [LearningCurve.from_csv(path) for path in self.curve_files]
        path = Path(self.file_manager.results_dir, "curve-summary.csv")
        curve_summary(curves).to_csv(path, index=False)
        self.logger.log(f"Learning curve summary written to {path}", 1)


class AttackWorkflow(WorkflowManager):
    """
    Evaluates trained agents under every configured attack and writes episode
    records, tamper logs and one metric table row per attack and agent variant.
    """

    def __init__(self, workspace: str | Path, echo: bool = False) -> None:
        super().__init__("Attack", workspace, echo)
        self.rows: list[dict] = []

    def load_agents(self) -> list[Agent]:
        agents_dir = self.params["agents-dir"]
        if agents_dir is None:
            agents_dir = Path(self.workflow_dir.parent, "train", "results", "agents")
        try:
            files = self.file_manager.find_files(asset_path(agents_dir), "agent")
        except ValueError as e:
            raise ConfigError(f"No agent files in **{agents_dir}**: {e}") from e
        agents = [load_agent(path) for path in files]
        for agent in agents:
            trained_on = agent.meta.get("domain", self.params["domain"])
            if trained_on != self.params["domain"]:
                raise ConfigError(
                    f"Agent {agent.agent_id} was trained on domain **{trained_on}**, but the run uses **{self.params['domain']}**."
                )
        self.logger.log(f"Loaded {len(agents)} agents from {agents_dir}", 1)
        return agents

    def attack_configs(self) -> list[AttackConfig]:
        attacks = self.parameter_manager.attack_parameters(self.params)
        if not attacks:
            self.logger.log("No attacks configured, running the identity baseline.")
            attacks = [{"kind": "identity", "name": "baseline"}]
        return [AttackConfig.from_params(attack) for attack in attacks]

    def execution(self) -> None:
        params = self.params
        domain, rm = load_domain(params)
        configs = self.attack_configs()
        agents = self.load_agents()
        variants = sorted({agent.config.variant for agent in agents})
        targets = {}
        for k, config in enumerate(configs):
            is_noise = config.kind.startswith("random_")
            for variant in variants:
                group = [agent for agent in agents if agent.config.variant == variant]
                self.logger.log(f"Attack {config.label} {config.timing_label} against {len(group)} {variant} agents...")
                session = run_session(
                    group,
                    domain,
                    rm,
                    config,
                    episodes=params["episodes"],
                    cap=params["episode-cap"],
                    base_seed=params["base-seed"],
                    executor=self.executor,
                    workers=params["workers"],
                    logger=self.logger,
                )
                slug = f"{k:02d}-{variant}-{_slug(config.label)}"
                if config.timing_label:
                    slug += f"-{config.timing_label}"
                if is_noise:
                    slug += f"-{round(config.rho * 100)}"
                emit_report(session.records, Path(self.file_manager.results_dir, "records", f"{slug}.jsonl"), "json")
                self._write_tamper_logs(slug, session.tamper_logs)
                if session.targets:
                    targets[slug] = {str(a): list(t) for a, t in session.targets.items()}
                if not session.records:
                    self.logger.log(f"WARNING: Attack {slug} produced no episodes, no metrics.")
                    continue
                metrics = compute_metrics(
                    session.records,
                    alpha=params["impact-alpha"],
                    failure_metrics=params["domain"] == "symbol",
                    nominal_atr=config.rho if is_noise else None,
                    logger=self.logger,
                )
                self.rows.append(
                    metrics_row(
                        metrics,
                        params["domain"],
                        variant,
                        config.label,
                        config.timing_label,
                        config.rho if is_noise else None,
                    )
                )
                self.logger.log(f"ASR {metrics.ASR:.4f}, ATR {metrics.ATR:.4f}, IS {metrics.IS:.4f}", 1)
        if targets:
            with open(Path(self.file_manager.results_dir, "targets.json"), "w", encoding="utf-8") as f:
                json.dump(targets, f, indent=4)

    def _write_tamper_logs(self, slug: str, logs: dict[int, list[tuple]]) -> None:
        directory = Path(self.file_manager.results_dir, "tamper-logs")
        directory.mkdir(parents=True, exist_ok=True)
        for agent_id, rows in sorted(logs.items()):
            pd.DataFrame(rows, columns=TAMPER_LOG_COLUMNS).to_csv(
                Path(directory, f"{slug}-agent-{agent_id:02d}.csv"), index=False
            )

    def results(self) -> None:
        fmt = self.params["report-format"]
        path = emit_report(self.rows, Path(self.file_manager.results_dir, f"metrics.{fmt}"), fmt)
        self.logger.log(f"Metric table with {len(self.rows)} rows written to {path}")


class ReportWorkflow(WorkflowManager):
    """Merges metric tables of several attack runs into one comparison table."""

    def __init__(self, workspace: str | Path, paths: list[str | Path], echo: bool = False) -> None:
        super().__init__("Report", workspace, echo)
        self.paths = [Path(p) for p in paths]

    def execution(self) -> None:
        missing = [str(p) for p in self.paths if not p.is_file()]
        if missing:
            raise ConfigError(f"Metric table(s) not found: {missing}")
        self.merged = merge_reports(self.paths)
        self.logger.log(f"Merged {len(self.paths)} metric tables into {len(self.merged)} rows", 1)

    def results(self) -> None:
        fmt = self.params["report-format"]
        path = emit_report(self.merged, Path(self.file_manager.results_dir, f"report.{fmt}"), fmt)
        self.logger.log(f"Report written to {path}")


class ValidateWorkflow(WorkflowManager):
    """
    Checks the map and reward machine of a run, the configured attacks and, if
    agents-dir is set, the agent files. Every problem found is reported at once.
    """

    def __init__(self, workspace: str | Path, echo: bool = False) -> None:
        super().__init__("Validate", workspace, echo)

    def execution(self) -> None:
        params = self.params
        violations = []
        map_path, rm_path = resolve_assets(params)
        grid_map = rm = None
        try:
            grid_map = read_map(map_path)
            self.logger.log(f"Map {map_path}: {grid_map.width}x{grid_map.height}, rooms {grid_map.rooms()}", 1)
        except (ParseError, ValidationError) as e:
            violations.append(f"map {map_path}: {e}")
        try:
            rm = load_rm(rm_path)
            self.logger.log(f"Reward machine {rm.name}: {len(rm.states | rm.terminals)} states, {len(rm.edges)} edges", 1)
        except (ParseError, ValidationError) as e:
            violations.append(f"reward machine {rm_path}: {e}")
        if grid_map is not None and rm is not None:
            try:
                domain = make_domain(params["domain"], grid_map, rm)
                emittable = set(domain.emittable_labels)
                for label in rm.labels():
                    if label and label not in emittable:
                        self.logger.log(f"WARNING: Label {label} of {rm.name} is never emitted in {params['domain']}.", 2)
            except ValidationError as e:
                violations.append(str(e))
        for i, attack in enumerate(self.parameter_manager.attack_parameters(params)):
            try:
                AttackConfig.from_params(attack)
            except ConfigError as e:
                violations.append(f"attack {i}: {e}")
        if params["agents-dir"] is not None:
            for path in self.file_manager.find_files(asset_path(params["agents-dir"]), "agent"):
                try:
                    agent = load_agent(path)
                except (ParseError, SchemaVersionError) as e:
                    violations.append(f"agent file {path}: {e}")
                    continue
                if rm is not None and agent.rm_name != rm.name:
                    violations.append(f"agent file {path}: trained on {agent.rm_name}, run uses {rm.name}")
        if violations:
            raise ValidationError(violations, "run")
        self.logger.log("Validation passed.")
