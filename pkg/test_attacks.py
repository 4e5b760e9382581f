import random
import unittest
from collections import Counter

import numpy as np
from scipy import stats

from src.attacks.blinding import (
    BlindingStrategy,
    edge_blinding_apply,
    event_blinding_apply,
    is_target,
    random_blinding_rule,
    random_hallucination_rule,
    state_edges,
)
from src.attacks.selection import (
    CandidateStats,
    collect_candidates,
    head_target,
    rank_candidates,
    rank_candidates_weighted,
)
from src.attacks.tamperer import AttackConfig, Tamperer, build_tamperer, tamper
from src.attacks.timing import TimingState, should_blind
from src.common.common import ConfigError, default_assets
from src.learning.qrm import TraceStep
from src.rm.labels import EMPTY, LabelString
from src.rm.rewardmachine import load_rm

L = LabelString.parse
COOKIE_LABELS = [L(x) for x in ("1", "0", "0c", "0C", "2", "2c", "2C", "3b", "3B")]


def cookie_rm():
    return load_rm(default_assets("cookie")["rm"])


class TestBlindingStrategy(unittest.TestCase):
    def test_parse_targets(self):
        self.assertEqual(BlindingStrategy.parse("compound", ["B3"]).targets, frozenset({L("3B")}))
        self.assertEqual(BlindingStrategy.parse("edge", ["u0:3B"]).targets, frozenset({("u0", L("3B"))}))
        with self.assertRaises(ValueError):
            BlindingStrategy.parse("atomic", ["kk"])
        with self.assertRaises(ValueError):
            BlindingStrategy.parse("edge", ["3B"])

    def test_edge_pairs(self):
        rm = cookie_rm()
        self.assertEqual(BlindingStrategy.parse("edge", ["u0:3B"]).edge_pairs(rm), frozenset({("u0", "u1")}))
        expected = frozenset({("u0", "u1"), ("u2", "u1"), ("u3", "u1")})
        self.assertEqual(state_edges(rm, "u1"), expected)
        self.assertEqual(BlindingStrategy.parse("state", ["u1"]).edge_pairs(rm), expected)

    def test_targets(self):
        rm = cookie_rm()
        atomic = BlindingStrategy.parse("atomic", ["B"])
        self.assertTrue(is_target(atomic, L("3B")))
        self.assertFalse(is_target(atomic, L("3b")))
        edge = BlindingStrategy.parse("edge", ["u0:3B"])
        self.assertTrue(is_target(edge, L("3B"), "u0", rm))
        self.assertFalse(is_target(edge, L("3B"), "u2", rm))


class TestBlindingRules(unittest.TestCase):
    def test_event_blinding(self):
        self.assertEqual(event_blinding_apply("atomic", {"k"}, L("0*kk")), L("0*"))
        self.assertEqual(event_blinding_apply("compound", {L("0*kk")}, L("0*kk")), EMPTY)

    def test_edge_blinding_keeps_the_room(self):
        rm = cookie_rm()
        pairs = BlindingStrategy.parse("edge", ["u0:3B"]).edge_pairs(rm)
        self.assertEqual(edge_blinding_apply(rm, "u0", pairs, L("3B")), L("3"))

    def test_edge_blinding_is_contained(self):
        rm = cookie_rm()
        pairs = BlindingStrategy.parse("state", ["u2"]).edge_pairs(rm)
        out = edge_blinding_apply(rm, "u1", pairs, L("0c"))
        self.assertEqual(out, L("0"))
        for label in COOKIE_LABELS:
            for u in rm.sorted_states():
                out = edge_blinding_apply(rm, u, pairs, label)
                self.assertTrue(out.is_submultiset_of(label), f"{u} {label}")

    def test_random_blinding_is_contained(self):
        rng = np.random.default_rng(0)
        for label in COOKIE_LABELS + [L("0*kk")]:
            for _ in range(50):
                self.assertTrue(random_blinding_rule(label, 0.5, rng).is_submultiset_of(label))
        self.assertEqual(random_blinding_rule(EMPTY, 1.0, rng), EMPTY)
        self.assertEqual(random_blinding_rule(L("3B"), 0.0, rng), L("3B"))

    def test_random_blinding_is_uniform(self):
        rng = np.random.default_rng(42)
        label = L("3bB")
        draws = Counter(random_blinding_rule(label, 1.0, rng) for _ in range(100_000))
        subsets = label.proper_submultisets()
        self.assertEqual(set(draws), set(subsets))
        p_value = stats.chisquare([draws[s] for s in subsets]).pvalue
        self.assertGreater(p_value, 0.001)

    def test_hallucination_substitutes(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            out = random_hallucination_rule(L("3B"), 1.0, COOKIE_LABELS, rng)
            self.assertNotEqual(out, L("3B"))
            self.assertIn(out, COOKIE_LABELS)
        self.assertEqual(random_hallucination_rule(L("3B"), 1.0, [L("3B")], rng), L("3B"))


class TestTiming(unittest.TestCase):
    def run_timing(self, timing, pattern, rng=None):
        return [should_blind(timing, target, rng)[0] for target in pattern]

    def test_all_instances(self):
        pattern = [False, True, True, False, True]
        self.assertEqual(self.run_timing(TimingState("all_instances"), pattern), pattern)

    def test_first_stream(self):
        timing = TimingState("first_stream")
        blinded = self.run_timing(timing, [False, True, True, False, True])
        self.assertEqual(blinded, [False, True, True, False, False])
        self.assertTrue(timing.done)
        timing.reset()
        self.assertFalse(timing.done)

    def test_triggered_stream_certain_trigger(self):
        timing = TimingState("triggered_stream", trigger_p=1.0)
        blinded = self.run_timing(timing, [True, True, False, True], np.random.default_rng(0))
        self.assertEqual(blinded, [True, True, False, False])

    def test_triggered_stream_draws_per_stream(self):
        rng = np.random.default_rng(7)
        pattern = [True, True, True, False] * 200
        timing = TimingState("triggered_stream", trigger_p=0.3)
        blinded = self.run_timing(timing, pattern, rng)
        # at most one stream is blinded, and always from its first occurrence
        starts = [i for i, b in enumerate(blinded) if b and (i == 0 or not blinded[i - 1])]
        self.assertLessEqual(len(starts), 1)
        self.assertTrue(all(i % 4 == 0 for i in starts))

    def test_triggered_stream_mean_start(self):
        # the blinded stream index is geometric with mean 1 / p
        rng = np.random.default_rng(11)
        indices = []
        for _ in range(5000):
            timing = TimingState("triggered_stream", trigger_p=0.25)
            blinded = self.run_timing(timing, [True, False] * 60, rng)
            indices.append(blinded.index(True) // 2 + 1)
        self.assertAlmostEqual(np.mean(indices), 4.0, delta=0.25)

    def test_invalid_kind(self):
        with self.assertRaises(ValueError):
            TimingState("sometimes")


class TestTamperer(unittest.TestCase):
    def test_identity(self):
        tamperer = Tamperer()
        self.assertEqual(tamperer.tamper(1, L("3B")), (L("3B"), False))
        self.assertEqual((tamperer.tamper_count, tamperer.output_count), (0, 1))

    def test_accounting_matches_history(self):
        config = AttackConfig(kind="random_blinding", rho=0.3)
        tamperer = build_tamperer(config, np.random.default_rng(3))
        tamperer.start_episode()
        rng = random.Random(0)
        for t in range(1, 501):
            tamperer.tamper(t, rng.choice(COOKIE_LABELS))
        recount = sum(a != b for _, a, b in tamperer.history)
        self.assertEqual(tamperer.tamper_count, recount)
        self.assertEqual(tamperer.output_count, 500)
        self.assertTrue(all(b.is_submultiset_of(a) for _, a, b in tamperer.history))

    def test_first_stream_edge_blinding(self):
        rm = cookie_rm()
        config = AttackConfig(kind="edge_blinding", mode="edge", timing="first_stream", targets=("u0:3B",))
        tamperer = build_tamperer(config, np.random.default_rng(0), rm=rm)
        tamperer.start_episode()
        outputs = [tamperer.tamper(t, label, "u0") for t, label in enumerate([L("3B"), L("3b"), L("3B")], start=1)]
        self.assertEqual([o for o, _ in outputs], [L("3"), L("3b"), L("3B")])
        self.assertTrue(outputs[-1][1])

    def test_tamper_function_passes_the_victim_state(self):
        rm = cookie_rm()
        identity = Tamperer()
        self.assertEqual(tamper(1, L("3B"), identity, "u0"), (L("3B"), False))
        event = build_tamperer(AttackConfig(kind="event_blinding", mode="compound", targets=("3B",)), np.random.default_rng(0))
        event.start_episode()
        self.assertEqual(tamper(1, L("3B"), event, "u0"), (EMPTY, False))
        edge = build_tamperer(
            AttackConfig(kind="edge_blinding", mode="edge", targets=("u0:3B",)), np.random.default_rng(0), rm=rm
        )
        edge.start_episode()
        self.assertEqual(tamper(1, L("3B"), edge, "u0")[0], L("3"))
        self.assertEqual(tamper(2, L("3B"), edge, "u1")[0], L("3B"))
        self.assertEqual([(t, a) for t, a, _ in edge.history], [(1, L("3B")), (2, L("3B"))])

    def test_blinding_needs_targets(self):
        with self.assertRaises(ConfigError):
            build_tamperer(AttackConfig(kind="event_blinding"), np.random.default_rng(0))


class TestAttackConfig(unittest.TestCase):
    def test_validation(self):
        with self.assertRaises(ConfigError):
            AttackConfig(kind="poisoning")
        with self.assertRaises(ConfigError):
            AttackConfig(kind="edge_blinding", mode="atomic")
        with self.assertRaises(ConfigError):
            AttackConfig(kind="random_blinding", rho=1.5)
        with self.assertRaises(ConfigError):
            AttackConfig.from_params({"kind": "identity", "strength": 3})
        with self.assertRaises(ConfigError):
            AttackConfig(kind="edge_blinding", mode="edge", ranking="random")
        self.assertEqual(AttackConfig.from_params({"kind": "edge_blinding", "mode": "edge", "ranking": "weighted"}).ranking, "weighted")

    def test_labels(self):
        config = AttackConfig.from_params(
            {"kind": "event_blinding", "mode": "atomic", "timing": "triggered_stream", "trigger-p": 0.3}
        )
        self.assertEqual(config.label, "event_blinding/atomic")
        self.assertEqual(config.timing_label, "trigger_30")
        self.assertEqual(AttackConfig(kind="random_hallucination", rho=0.1).timing_label, "")
        self.assertEqual(AttackConfig(name="baseline").label, "baseline")


def cookie_trace():
    u0, u1 = "u0", "u1"
    return [
        TraceStep(0, 1, L("1"), u0, u0),
        TraceStep(0, 2, L("3b"), u0, u0),
        TraceStep(0, 3, L("3B"), u0, u1),
        TraceStep(1, 1, L("1"), u0, u0),
        TraceStep(1, 2, L("3B"), u0, u1),
    ]


class TestSelection(unittest.TestCase):
    def test_compound_statistics(self):
        stats = collect_candidates(cookie_trace(), "compound")
        self.assertEqual(stats.episodes, 2)
        self.assertEqual(stats.outputs, 5)
        self.assertEqual((stats.h1[L("3B")], stats.h2[L("3B")], stats.h3[L("3B")]), (2, 2, 2))
        self.assertEqual((stats.h1[L("3b")], stats.h2[L("3b")], stats.h3[L("3b")]), (1, 2, 1))
        self.assertEqual(rank_candidates(stats), [L("1"), L("3B"), L("3b")])

    def test_edge_and_state_candidates(self):
        self.assertEqual(head_target(collect_candidates(cookie_trace(), "edge")), "u0:3B")
        self.assertEqual(head_target(collect_candidates(cookie_trace(), "state")), "u1")
        atomic = collect_candidates(cookie_trace(), "atomic")
        self.assertEqual(atomic.h1["3"], 2)
        self.assertEqual(atomic.h3["B"], 2)

    def test_terminal_states_are_not_state_candidates(self):
        trace = [
            TraceStep(0, 1, L("1"), "u0", "u0"),
            TraceStep(0, 2, L("3bn"), "u0", "u5"),
            TraceStep(0, 3, L("0aBc"), "u5", "u10"),
            TraceStep(1, 1, L("3bn"), "u0", "u5"),
            TraceStep(1, 2, L("0aBc"), "u5", "u10"),
        ]
        stats = collect_candidates(trace, "state", terminals={"u10"})
        self.assertEqual(stats.candidates(), ["u5"])
        self.assertEqual(head_target(stats), "u5")
        self.assertIn(("u5", L("0aBc")), collect_candidates(trace, "edge", terminals={"u10"}).candidates())
        with self.assertRaises(ValueError):
            collect_candidates(trace[2:3], "state", terminals={"u10"})

    def test_ranking_choice(self):
        stats = CandidateStats("compound")
        stats.add(L("3B"), 10, True)
        stats.add(L("3B"), 10, True)
        for _ in range(8):
            stats.add(L("3B"), 10, False)
        stats.add(L("0c"), 1, True)
        self.assertEqual(head_target(stats), "3B")
        self.assertEqual(head_target(stats, "weighted"), "0c")
        with self.assertRaises(ValueError):
            head_target(stats, "random")

    def test_observation_budget(self):
        stats = collect_candidates(cookie_trace(), "compound", k=1)
        self.assertEqual(stats.candidates(), [L("1")])
        with self.assertRaises(ValueError):
            collect_candidates(cookie_trace()[:2], "edge")

    def test_ranking_ignores_insertion_order(self):
        a, b = CandidateStats("compound"), CandidateStats("compound")
        entries = [(L("0"), 5, True), (L("2"), 5, True), (L("3b"), 2, True), (L("1"), 1, True)]
        for candidate, t, first in entries:
            a.add(candidate, t, first)
        for candidate, t, first in reversed(entries):
            b.add(candidate, t, first)
        self.assertEqual(rank_candidates(a), rank_candidates(b))
        self.assertEqual(rank_candidates(a), [L("1"), L("3b"), L("0"), L("2")])
        self.assertEqual(rank_candidates_weighted(a), rank_candidates_weighted(b))
        self.assertEqual(sorted(map(str, rank_candidates_weighted(a))), sorted(map(str, rank_candidates(a))))


if __name__ == "__main__":
    unittest.main()
