import json
import math
import os
import tempfile
import unittest
from pathlib import Path

import numpy as np
import pandas as pd

from src.cli import EXIT_CONFIG_ERROR, EXIT_OK, main
from src.common.common import ConfigError, make_rng
from src.gridworlds.domains import make_domain
from src.learning.qrm import DEFAULT_TOTAL_STEPS, TrainConfig, evaluate_policy, train
from src.workflow.CommandExecutor import CommandExecutor
from src.workflow.FileManager import FileManager
from src.workflow.Logger import Logger
from src.workflow.ParameterManager import ParameterManager

QUICK_TRAINING = {"domain": "simple_cookie", "n-agents": 2, "total-steps": 20000, "episodes": 10}


def write_config(directory: Path, name: str, params: dict) -> str:
    path = Path(directory, name)
    path.write_text(json.dumps(params), encoding="utf-8")
    return str(path)


class TestWorkflowTools(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_logger_levels(self):
        logger = Logger(self.dir)
        logger.log("start")
        logger.log("timing", 1)
        logger.log("detail", 2)
        self.assertEqual(logger.read("minimal.log"), "start\n\n")
        self.assertEqual(logger.read("run-times.log"), "start\n\ntiming\n\n")
        self.assertIn("detail", logger.read("all.log"))

    def test_jobs_keep_submission_order(self):
        executor = CommandExecutor(self.dir, Logger(self.dir))
        self.assertEqual(executor.run_multiple_jobs(abs, [-3, 1, -2]), [3, 1, 2])
        self.assertEqual(executor.run_multiple_jobs(abs, [-3, 1, -2], workers=2), [3, 1, 2])
        self.assertIn("Total time to run 3 jobs", Logger(self.dir).read("run-times.log"))

    def test_file_manager(self):
        files = FileManager(self.dir).get_files(["agent-00", "agent-01"], "agent", "agents")
        self.assertEqual([Path(f).name for f in files], ["agent-00.agent", "agent-01.agent"])
        self.assertTrue(Path(self.dir, "results", "agents").is_dir())
        with self.assertRaises(ValueError):
            FileManager(self.dir).find_files(Path(self.dir, "results", "agents"), "agent")

    def test_parameters(self):
        manager = ParameterManager(self.dir)
        params = manager.load_parameters(overrides={"base-seed": 4, "workers": None})
        self.assertEqual(params["base-seed"], 4)
        self.assertEqual(params["workers"], 1)
        manager.save_parameters(params)
        self.assertEqual(manager.get_parameters_from_json(), params)
        manager.reset_to_default_parameters()
        self.assertEqual(manager.get_parameters_from_json(), {})

    def test_unknown_and_invalid_parameters(self):
        manager = ParameterManager(self.dir)
        with self.assertRaises(ConfigError):
            manager.load_parameters(write_config(self.dir, "typo.json", {"n-agent": 3}))
        with self.assertRaises(ConfigError):
            manager.load_parameters(write_config(self.dir, "type.json", {"n-agents": True}))
        with self.assertRaises(ConfigError):
            manager.load_parameters(write_config(self.dir, "range.json", {"epsilon": 2}))
        with self.assertRaises(ConfigError):
            manager.load_parameters(write_config(self.dir, "attack.json", {"attacks": [{"kind": "identity", "rhoo": 0.1}]}))

    def test_attack_sweeps(self):
        manager = ParameterManager(self.dir)
        params = manager.load_parameters(
            write_config(
                self.dir,
                "sweep.json",
                {
                    "attacks": [
                        {"kind": "random_hallucination", "rho": [0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5]},
                        {"kind": "edge_blinding", "timing": "triggered_stream", "trigger-p": [0.3, 0.4, 0.5]},
                    ]
                },
            )
        )
        attacks = manager.attack_parameters(params)
        self.assertEqual(len(attacks), 10)
        self.assertEqual([a["rho"] for a in attacks[:7]], [0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5])
        self.assertEqual(attacks[7]["mode"], "edge")
        self.assertEqual(attacks[9]["trigger-p"], 0.5)


class TestCommandLine(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.TemporaryDirectory()
        cls.dir = Path(cls.tmp.name)
        cls.out = str(Path(cls.dir, "workspace"))
        cls.train_config = write_config(cls.dir, "train.json", QUICK_TRAINING)
        cls.train_code = main(["train", "--config", cls.train_config, "--out", cls.out, "--quiet"])

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()

    def attack(self, attacks, *flags, name="attack.json"):
        config = write_config(self.dir, name, QUICK_TRAINING | {"attacks": attacks})
        return main(["attack", "--config", config, "--out", self.out, "--quiet", *flags])

    def test_train_outputs(self):
        self.assertEqual(self.train_code, EXIT_OK)
        results = Path(self.out, "train", "results")
        self.assertEqual(sorted(p.name for p in Path(results, "agents").iterdir()), ["agent-00.agent", "agent-01.agent"])
        self.assertEqual(len(list(Path(results, "curves").glob("*.csv"))), 2)
        self.assertTrue(Path(results, "curve-summary.csv").is_file())
        self.assertIn("WORKFLOW FINISHED", Path(self.out, "train", "logs", "minimal.log").read_text(encoding="utf-8"))
        self.assertEqual(json.loads(Path(self.out, "train", "params.json").read_text())["n-agents"], 2)

    def test_no_agents(self):
        config = write_config(self.dir, "none.json", QUICK_TRAINING | {"n-agents": 0})
        out = str(Path(self.dir, "empty"))
        self.assertEqual(main(["train", "--config", config, "--out", out, "--quiet"]), EXIT_OK)
        self.assertIn("WARNING", Path(out, "train", "logs", "minimal.log").read_text(encoding="utf-8"))

    def test_attack_metrics(self):
        attacks = [
            {"kind": "identity", "name": "baseline"},
            {"kind": "event_blinding", "mode": "compound", "targets": ["B"]},
            {"kind": "random_hallucination", "rho": [0.1, 0.2]},
        ]
        self.assertEqual(self.attack(attacks), EXIT_OK)
        results = Path(self.out, "attack", "results")
        metrics = pd.read_csv(Path(results, "metrics.csv"), keep_default_na=False)
        self.assertEqual(len(metrics), 4)
        self.assertEqual(metrics.loc[0, "ASR"], 1.0)
        self.assertEqual(metrics.loc[2, "noise_level"], 0.1)
        self.assertEqual(metrics.loc[2, "ATR"], 0.1)
        self.assertEqual(len(list(Path(results, "records").glob("*.jsonl"))), 4)
        self.assertEqual(len(list(Path(results, "tamper-logs").glob("*.csv"))), 8)

    def test_worker_count_does_not_change_records(self):
        attacks = [{"kind": "random_blinding", "rho": 0.3}, {"kind": "edge_blinding", "observation-episodes": 3}]
        results = Path(self.out, "attack", "results", "records")
        self.assertEqual(self.attack(attacks, "--workers", "1", name="w.json"), EXIT_OK)
        single = {p.name: p.read_bytes() for p in results.glob("*.jsonl")}
        self.assertEqual(self.attack(attacks, "--workers", "2", name="w.json"), EXIT_OK)
        parallel = {p.name: p.read_bytes() for p in results.glob("*.jsonl")}
        self.assertEqual(len(single), 2)
        self.assertEqual(single, parallel)

    def test_attack_on_another_domain(self):
        config = write_config(self.dir, "cookie.json", {"domain": "cookie", "episodes": 1})
        self.assertEqual(main(["attack", "--config", config, "--out", self.out, "--quiet"]), EXIT_CONFIG_ERROR)

    def test_report(self):
        attacks = [{"kind": "identity", "name": "baseline"}]
        self.assertEqual(self.attack(attacks, name="report.json"), EXIT_OK)
        table = str(Path(self.dir, "metrics.csv"))
        os.replace(Path(self.out, "attack", "results", "metrics.csv"), table)
        report_out = str(Path(self.dir, "reports"))
        self.assertEqual(main(["report", table, "--out", report_out, "--quiet"]), EXIT_OK)
        self.assertTrue(Path(report_out, "report", "results", "report.csv").is_file())
        self.assertEqual(main(["report", table, table, "--out", report_out, "--quiet"]), EXIT_CONFIG_ERROR)

    def test_validate(self):
        self.assertEqual(main(["validate", "--out", self.out, "--quiet"]), EXIT_OK)
        agents_dir = str(Path(self.out, "train", "results", "agents"))
        config = write_config(self.dir, "agents.json", QUICK_TRAINING | {"agents-dir": agents_dir})
        self.assertEqual(main(["validate", "--config", config, "--out", self.out, "--quiet"]), EXIT_OK)

    def test_config_errors(self):
        typo = write_config(self.dir, "typo.json", {"n-agent": 3})
        self.assertEqual(main(["validate", "--config", typo, "--out", self.out, "--quiet"]), EXIT_CONFIG_ERROR)
        missing = write_config(self.dir, "missing.json", {"map": str(Path(self.dir, "missing.map"))})
        self.assertEqual(main(["train", "--config", missing, "--out", self.out + "-missing", "--quiet"]), EXIT_CONFIG_ERROR)
        self.assertFalse(Path(self.out + "-missing", "train", "results", "agents").exists())
        bad_rm = Path(self.dir, "bad.rm")
        bad_rm.write_text("rm bad initial=u0\nstate u0 terminal\n", encoding="utf-8")
        config = write_config(self.dir, "bad.json", {"rm": str(bad_rm)})
        self.assertEqual(main(["validate", "--config", config, "--out", self.out, "--quiet"]), EXIT_CONFIG_ERROR)
        self.assertEqual(main(["validate", "--config", str(Path(self.dir, "nowhere.json")), "--out", self.out, "--quiet"]), EXIT_CONFIG_ERROR)


SLOW = unittest.skipUnless(os.environ.get("RUN_SLOW_TESTS") == "1", "set RUN_SLOW_TESTS=1 to train agents to convergence")
NOISE_LEVELS = [0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5]


@SLOW
class TestAcceptance(unittest.TestCase):
    """Agents trained with the shipped budgets; 10 CRM and 5 CRM+ARS agents per domain."""

    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.TemporaryDirectory()
        cls.dir = Path(cls.tmp.name)
        cls.params = {}
        for domain in ("cookie", "keys", "symbol"):
            for use_ars, n_agents in ((False, 10), (True, 5)):
                params = {"domain": domain, "use-ars": use_ars, "n-agents": n_agents, "episodes": 1000}
                key = (domain, "crm+ars" if use_ars else "crm")
                cls.params[key] = params
                config = write_config(cls.dir, f"{domain}-{key[1]}.json", params)
                code = main(["train", "--config", config, "--out", cls.workspace(key), "--quiet", "--workers", "5"])
                assert code == EXIT_OK, f"training {key} failed"

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()

    @classmethod
    def workspace(cls, key) -> str:
        return str(Path(cls.dir, f"{key[0]}-{key[1]}"))

    def attack(self, key, attacks) -> pd.DataFrame:
        config = write_config(self.dir, "attack.json", self.params[key] | {"attacks": attacks})
        out = self.workspace(key)
        self.assertEqual(main(["attack", "--config", config, "--out", out, "--quiet", "--workers", "5"]), EXIT_OK)
        return pd.read_csv(Path(out, "attack", "results", "metrics.csv"), keep_default_na=False)

    def assertNearlyNondecreasing(self, values, tolerance=0.005):
        drops = [a - b for a, b in zip(values, values[1:]) if b < a]
        self.assertLessEqual(len(drops), 1, values)
        self.assertTrue(all(drop <= tolerance for drop in drops), values)

    def test_baselines_converge(self):
        for domain in ("cookie", "keys", "symbol"):
            with self.subTest(domain=domain):
                baseline = [{"kind": "identity", "name": "baseline"}]
                crm = self.attack((domain, "crm"), baseline).loc[0, "ASR"]
                shaped = self.attack((domain, "crm+ars"), baseline).loc[0, "ASR"]
                self.assertGreaterEqual(crm, 0.99)
                self.assertGreaterEqual(shaped, 0.99)
                self.assertLessEqual(abs(crm - shaped), 0.01)

    def test_button_edge_blinding_always_fails(self):
        metrics = self.attack(("cookie", "crm"), [{"kind": "edge_blinding", "mode": "edge", "targets": ["u0:3B"]}])
        self.assertEqual(metrics.loc[0, "AFR"], 1.0)

    def test_symbol_blinding_fails_once_in_nine(self):
        attacks = [{"kind": "edge_blinding", "mode": "edge"}, {"kind": "edge_blinding", "mode": "state"}]
        metrics = self.attack(("symbol", "crm"), attacks)
        for afr in metrics["AFR"]:
            self.assertAlmostEqual(afr, 1 / 9, delta=0.025)

    def test_symbol_random_blinding_is_harmless(self):
        metrics = self.attack(("symbol", "crm"), [{"kind": "random_blinding", "rho": NOISE_LEVELS}])
        self.assertEqual(len(metrics), len(NOISE_LEVELS))
        self.assertTrue(all(afr <= 0.005 for afr in metrics["AFR"]), metrics["AFR"].tolist())

    def test_hallucination_noise_is_monotone(self):
        for domain in ("cookie", "keys"):
            with self.subTest(domain=domain):
                metrics = self.attack((domain, "crm"), [{"kind": "random_hallucination", "rho": NOISE_LEVELS}])
                self.assertEqual(metrics["noise_level"].tolist(), NOISE_LEVELS)
                self.assertNearlyNondecreasing(metrics["AFR"].tolist())


@SLOW
class TestCounterfactualSpeedup(unittest.TestCase):
    def steps_to_solve(self, domain, use_crm: bool, seed: int) -> float:
        solved = []

        def checkpoint(steps, q):
            records = evaluate_policy(q, domain, domain.rm, 100, make_rng(seed, steps))
            if sum(r.success for r in records) >= 95:
                solved.append(steps)
                return True
            return False

        cfg = TrainConfig(total_steps=DEFAULT_TOTAL_STEPS["cookie"], use_crm=use_crm, seed=seed)
        train(domain, domain.rm, cfg, checkpoint=checkpoint)
        return solved[0] if solved else math.inf

    def test_counterfactual_experiences_learn_faster(self):
        domain = make_domain("cookie")
        with_crm = [self.steps_to_solve(domain, True, seed) for seed in range(5)]
        without_crm = [self.steps_to_solve(domain, False, seed) for seed in range(5)]
        self.assertLess(np.median(with_crm), np.median(without_crm))


if __name__ == "__main__":
    unittest.main()
