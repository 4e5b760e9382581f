import json
import tempfile
import unittest
from pathlib import Path

import pandas as pd

from src.attacks.tamperer import AttackConfig
from src.common.common import ConfigError, ValidationError
from src.evaluation.metrics import compute_metrics, curve_summary, impact_score
from src.evaluation.records import RECORD_COLUMNS, EpisodeRecord
from src.evaluation.report import METRIC_COLUMNS, emit_report, load_metrics, load_records, merge_reports, metrics_row
from src.evaluation.session import run_session
from src.gridworlds.domains import make_domain
from src.learning.agentfile import Agent
from src.learning.qrm import LearningCurve, TrainConfig, train
from src.workflow.CommandExecutor import CommandExecutor
from src.workflow.Logger import Logger

# (ATR, AFR, IS) of published edge blinding results
COOKIE_EDGE_BLINDING = [
    (0.7344, 1.0, 0.4051),
    (0.0268, 0.0, 0.0),
    (0.0084, 0.0, 0.0),
    (0.0112, 0.0, 0.0),
    (0.0139, 0.0, 0.0),
]
KEYS_EDGE_BLINDING = [
    (0.6393, 1.0, 0.4389),
    (0.0019, 0.664, 0.8118),
    (0.0013, 0.664, 0.8127),
    (0.0014, 0.664, 0.8126),
    (0.0014, 0.664, 0.8126),
    (0.9569, 1.0, 0.3432),
    (0.0028, 0.664, 0.8103),
    (0.0022, 0.664, 0.8113),
    (0.0022, 0.664, 0.8113),
    (0.0024, 0.664, 0.8110),
]


def record(agent_id, episode, success, steps, reward=0.0, tampered=0):
    return EpisodeRecord(
        agent_id=agent_id,
        episode=episode,
        success=success,
        steps=steps,
        reward=reward,
        tamper_count=tampered,
        episode_length=steps,
        seed=episode,
        outcome="success" if success else "failure",
    )


RECORDS = [
    record(0, 0, True, 10, 1.0),
    record(0, 1, False, 20, -1.0, tampered=2),
    record(1, 0, True, 30, 1.0),
    record(1, 1, True, 40, 1.0),
]


class TestImpactScore(unittest.TestCase):
    def test_published_rows(self):
        for atr, afr, expected in COOKIE_EDGE_BLINDING + KEYS_EDGE_BLINDING:
            self.assertAlmostEqual(impact_score(afr, atr, 0.5), expected, delta=5e-4, msg=f"ATR {atr}, AFR {afr}")

    def test_nominal_noise_level(self):
        self.assertAlmostEqual(impact_score(0.3865, 0.3, 0.5), 0.3886, delta=5e-4)

    def test_monotonicity(self):
        self.assertEqual(impact_score(0.0, 0.2), 0.0)
        self.assertLess(impact_score(0.3, 0.1), impact_score(0.4, 0.1))
        self.assertGreater(impact_score(0.3, 0.1), impact_score(0.3, 0.2))


class TestMetrics(unittest.TestCase):
    def test_hand_computed_session(self):
        metrics = compute_metrics(RECORDS, failure_metrics=True)
        self.assertAlmostEqual(metrics.ASR, 0.75)
        self.assertAlmostEqual(metrics.AFR, 0.25)
        self.assertEqual(metrics.ASR + metrics.AFR, 1.0)
        self.assertAlmostEqual(metrics.ATS, 22.5)
        self.assertAlmostEqual(metrics.ATF, 20.0)
        self.assertAlmostEqual(metrics.ARF, -1.0)
        self.assertAlmostEqual(metrics.ATR, 0.025)
        self.assertAlmostEqual(metrics.IS, 0.5 * 0.5 / 0.525)
        self.assertEqual((metrics.n_agents, metrics.n_episodes), (2, 4))

    def test_failure_metrics_absent_by_default(self):
        metrics = compute_metrics(RECORDS)
        self.assertIsNone(metrics.ATF)
        self.assertIsNone(metrics.ARF)

    def test_nominal_tamper_rate(self):
        metrics = compute_metrics(RECORDS, nominal_atr=0.3)
        self.assertEqual(metrics.ATR, 0.3)
        self.assertAlmostEqual(metrics.ATR_measured, 0.025)
        self.assertAlmostEqual(metrics.IS, impact_score(0.25, 0.3))

    def test_agents_without_successes_are_excluded(self):
        with tempfile.TemporaryDirectory() as tmp:
            logger = Logger(Path(tmp))
            records = RECORDS + [record(2, 0, False, 500), record(2, 1, False, 500)]
            metrics = compute_metrics(records, logger=logger)
            self.assertAlmostEqual(metrics.ATS, 22.5)
            self.assertAlmostEqual(metrics.ASR, 0.5)
            self.assertIn("WARNING", logger.read("all.log"))

    def test_empty_records(self):
        with self.assertRaises(ValueError):
            compute_metrics([])


class TestCurveSummary(unittest.TestCase):
    def test_percentiles(self):
        summary = curve_summary([LearningCurve([0.0]), LearningCurve([10.0]), LearningCurve([20.0])])
        self.assertEqual(summary.loc[0, "median"], 10.0)
        self.assertEqual(summary.loc[0, "p25"], 5.0)
        self.assertEqual(summary.loc[0, "p75"], 15.0)

    def test_single_curve(self):
        summary = curve_summary([LearningCurve([1.0, 3.0])])
        self.assertEqual(summary["median"].tolist(), [1.0, 3.0])
        self.assertEqual(summary["p25"].tolist(), summary["p75"].tolist())

    def test_layout_mismatch(self):
        with self.assertRaises(ValueError):
            curve_summary([LearningCurve([1.0]), LearningCurve([1.0, 2.0])])


class TestReport(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_records_round_trip(self):
        expected = compute_metrics(RECORDS, failure_metrics=True)
        for name, fmt in (("records.csv", "csv"), ("records.jsonl", "json")):
            path = emit_report(RECORDS, Path(self.dir, name), fmt)
            loaded = load_records(path)
            self.assertEqual(loaded, RECORDS)
            self.assertEqual(compute_metrics(loaded, failure_metrics=True), expected)

    def test_empty_records_give_header_only_csv(self):
        path = emit_report([], Path(self.dir, "empty.csv"), "csv")
        self.assertEqual(path.read_text(encoding="utf-8").splitlines(), [",".join(RECORD_COLUMNS)])

    def test_unknown_format(self):
        with self.assertRaises(ValueError):
            emit_report(RECORDS, Path(self.dir, "records.xml"), "xml")

    def write_table(self, name, attacks):
        metrics = compute_metrics(RECORDS)
        rows = [metrics_row(metrics, "cookie", "crm", attack, timing) for attack, timing in attacks]
        return emit_report(rows, Path(self.dir, name), "csv")

    def test_metric_table_layout(self):
        path = self.write_table("a.csv", [("edge_blinding/edge", "all")])
        table = load_metrics(path)
        self.assertEqual(list(table.columns), METRIC_COLUMNS)
        self.assertTrue(pd.isna(table.loc[0, "noise_level"]))
        json_path = emit_report(table, Path(self.dir, "a.json"), "json")
        rows = json.loads(json_path.read_text(encoding="utf-8"))
        self.assertIsNone(rows[0]["noise_level"])
        self.assertEqual(rows[0]["attack"], "edge_blinding/edge")

    def test_merge(self):
        a = self.write_table("a.csv", [("edge_blinding/edge", "all"), ("edge_blinding/edge", "first")])
        b = self.write_table("b.csv", [("edge_blinding/state", "all")])
        merged = merge_reports([a, b])
        self.assertEqual(len(merged), 3)
        self.assertEqual(len(merge_reports([a])), 2)

    def test_merge_duplicate_key(self):
        a = self.write_table("a.csv", [("edge_blinding/edge", "all")])
        b = self.write_table("b.csv", [("edge_blinding/edge", "all")])
        with self.assertRaises(ValidationError) as ctx:
            merge_reports([a, b])
        self.assertIn(str(a), str(ctx.exception))
        self.assertIn(str(b), str(ctx.exception))

    def test_merge_schema_mismatch(self):
        path = Path(self.dir, "bad.csv")
        path.write_text("domain,attack\ncookie,baseline\n", encoding="utf-8")
        with self.assertRaises(ValidationError):
            merge_reports([path])


class TestSession(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.domain = make_domain("simple_cookie")
        cls.rm = cls.domain.rm
        cls.agents = []
        for i in range(2):
            cfg = TrainConfig(total_steps=20_000, seed=i)
            q, _ = train(cls.domain, cls.rm, cfg)
            cls.agents.append(Agent(q, cls.rm.name, cfg, {"agent_id": i}))

    def session(self, config, episodes=20, **kwargs):
        return run_session(self.agents, self.domain, self.rm, config, episodes=episodes, base_seed=5, **kwargs)

    def test_identity_baseline(self):
        session = self.session(AttackConfig(kind="identity"))
        self.assertEqual(len(session.records), 40)
        self.assertEqual([(r.agent_id, r.episode) for r in session.records][:3], [(0, 0), (0, 1), (0, 2)])
        self.assertTrue(all(r.success for r in session.records))
        self.assertEqual(compute_metrics(session.records).ATR, 0.0)

    def test_determinism(self):
        config = AttackConfig(kind="random_hallucination", rho=0.2, seed=1)
        first, second = self.session(config), self.session(config)
        self.assertEqual(first.records, second.records)
        self.assertEqual(first.tamper_logs, second.tamper_logs)

    def test_no_episodes(self):
        self.assertEqual(self.session(AttackConfig(kind="identity"), episodes=0).records, [])

    def test_tamper_logs_match_records(self):
        session = self.session(AttackConfig(kind="random_blinding", rho=0.5))
        for agent_id, rows in session.tamper_logs.items():
            blinded = sum(row[4] for row in rows)
            self.assertEqual(blinded, sum(r.tamper_count for r in session.records if r.agent_id == agent_id))

    def test_automatic_target_selection(self):
        session = self.session(AttackConfig(kind="edge_blinding", mode="edge", observation_episodes=5))
        self.assertEqual(session.targets, {0: ("u0:B",), 1: ("u0:B",)})
        self.assertLess(compute_metrics(session.records).ASR, 0.2)

    def test_state_targets_skip_the_terminal_state(self):
        for ranking in ("lexicographic", "weighted"):
            config = AttackConfig(kind="edge_blinding", mode="state", ranking=ranking, observation_episodes=5)
            session = self.session(config, episodes=5)
            self.assertEqual(session.targets, {0: ("u1",), 1: ("u1",)})

    def test_domain_mismatch(self):
        stranger = Agent(self.agents[0].q, "cookie", self.agents[0].config, {"agent_id": 9})
        with self.assertRaises(ConfigError):
            run_session([stranger], self.domain, self.rm, AttackConfig(kind="identity"), episodes=1)

    def test_worker_count_does_not_change_records(self):
        config = AttackConfig(kind="random_hallucination", rho=0.1)
        with tempfile.TemporaryDirectory() as tmp:
            executor = CommandExecutor(Path(tmp), Logger(Path(tmp)))
            parallel = self.session(config, executor=executor, workers=2)
        self.assertEqual(parallel.records, self.session(config).records)


class TestSymbolStateBlinding(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.domain = make_domain("symbol")
        cls.rm = cls.domain.rm
        cfg = TrainConfig(total_steps=50_000, seed=0)
        q, _ = train(cls.domain, cls.rm, cfg)
        cls.agent = Agent(q, cls.rm.name, cfg, {"agent_id": 0})

    def test_targets_an_instruction_state(self):
        config = AttackConfig(kind="edge_blinding", mode="state", observation_episodes=20)
        session = run_session([self.agent], self.domain, self.rm, config, episodes=5, base_seed=3)
        (target,) = session.targets[0]
        self.assertNotIn(target, self.rm.terminals)
        self.assertIn(target, {f"u{i}" for i in range(1, 10)})
        self.assertEqual(len(session.records), 5)


if __name__ == "__main__":
    unittest.main()
