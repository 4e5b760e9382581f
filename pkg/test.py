import unittest
from collections import Counter

import numpy as np

from src.common.common import EpisodeDoneError, ParseError, TerminalStateError, ValidationError, default_assets
from src.gridworlds.domains import Action, CookiePayload, EnvState, KeysPayload, SymbolPayload, SymbolWorld, make_domain
from src.gridworlds.gridmap import load_map, read_map
from src.gridworlds.model import OraclePolicy, enumerate_model, oracle_value_iteration
from src.rm.crm import crm_batch
from src.rm.labels import EMPTY, LabelString
from src.rm.rewardmachine import load_rm, parse_rm, rm_step, serialize_rm, validate
from src.rm.shaping import ars_potentials, shape_reward

L = LabelString.parse


def shipped_rm(domain: str):
    return load_rm(default_assets(domain)["rm"])


class TestLabels(unittest.TestCase):
    def test_canonical_order(self):
        self.assertEqual(L("Bb3").serialize(), "3bB")
        self.assertEqual(L("cA0b").serialize(), "0Abc")
        self.assertEqual(L("k0*k").serialize(), "0*kk")

    def test_multiset_equality(self):
        self.assertEqual(L("kk0"), L("0kk"))
        self.assertNotEqual(L("0k"), L("0kk"))
        self.assertEqual(len({L("2c"), L("c2")}), 1)

    def test_single_room_digit(self):
        with self.assertRaises(ValueError):
            L("02")

    def test_submultisets(self):
        subsets = L("3bB").submultisets()
        self.assertEqual(len(subsets), 8)
        self.assertIn(EMPTY, subsets)
        self.assertEqual(len(L("3bB").proper_submultisets()), 7)
        self.assertEqual(len(L("0kk").submultisets()), 6)

    def test_without(self):
        self.assertEqual(L("0*kk").without("k"), L("0*"))
        self.assertTrue(L("0*").is_submultiset_of(L("0*kk")))
        self.assertFalse(L("0kk").is_submultiset_of(L("0k")))


class TestRewardMachine(unittest.TestCase):
    def test_cookie_edges(self):
        rm = shipped_rm("cookie")
        self.assertEqual(len(rm.edges), 7)
        expected = [
            ("u0", "3B", "u1", 0.0),
            ("u1", "0c", "u2", 0.0),
            ("u1", "2", "u2", 0.0),
            ("u1", "0", "u3", 0.0),
            ("u1", "2c", "u3", 0.0),
            ("u2", "3B", "u1", 0.0),
            ("u3", "3B", "u1", 0.0),
            ("u3", "2C", "u4", 1.0),
            ("u2", "0C", "u4", 1.0),
        ]
        for u, label, target, reward in expected:
            self.assertEqual(rm_step(rm, u, L(label)), (target, reward), f"{u} on {label}")

    def test_unlisted_label_self_loops(self):
        rm = shipped_rm("cookie")
        self.assertEqual(rm_step(rm, "u0", L("1")), ("u0", 0.0))
        self.assertEqual(rm_step(rm, "u2", L("2C")), ("u2", 0.0))

    def test_terminal_state_raises(self):
        with self.assertRaises(TerminalStateError):
            rm_step(shipped_rm("cookie"), "u4", L("1"))

    def test_keys_edges(self):
        rm = shipped_rm("keys")
        self.assertEqual(len(rm.edges), 10)
        self.assertEqual(rm_step(rm, "u0", L("0k"), ), ("u1", 0.0))
        self.assertEqual(rm_step(rm, "u0", L("2")), ("u2", 0.0))
        self.assertEqual(rm_step(rm, "u2", L("0*k")), ("u5", 0.0))
        self.assertEqual(rm_step(rm, "u6", L("3G")), ("u7", 1.0))

    def test_symbol_edges(self):
        rm = shipped_rm("symbol")
        self.assertEqual(len(rm.edges), 36)
        self.assertEqual(rm_step(rm, "u0", L("3bn")), ("u5", 0.0))
        self.assertEqual(rm_step(rm, "u5", L("0aBc")), ("u10", 1.0))
        self.assertEqual(rm_step(rm, "u5", L("2aBc")), ("u10", -1.0))
        self.assertEqual(rm_step(rm, "u1", L("2Abc")), ("u10", 1.0))
        self.assertEqual(rm_step(rm, "u3", L("0Abc")), ("u10", -1.0))

    def test_shipped_machines_are_valid(self):
        for domain in ("cookie", "keys", "symbol", "simple_cookie"):
            self.assertEqual(validate(shipped_rm(domain)), [], domain)

    def test_parse_errors_carry_line_numbers(self):
        with self.assertRaises(ParseError) as ctx:
            parse_rm("")
        self.assertIn("line 1", str(ctx.exception))
        text = 'rm t initial=u0\nstate u0\nedge u0 "B" u1\n'
        with self.assertRaises(ParseError) as ctx:
            parse_rm(text)
        self.assertEqual(ctx.exception.line, 3)

    def test_nondeterminism_is_invalid(self):
        text = 'rm t initial=u0\nstate u0\nstate u1 terminal\nedge u0 "B" u1 1\nedge u0 "B" u0 0\n'
        with self.assertRaises(ValidationError) as ctx:
            parse_rm(text)
        self.assertTrue(any("nondeterministic" in v for v in ctx.exception.violations))

    def test_initial_terminal_is_invalid(self):
        with self.assertRaises(ValidationError) as ctx:
            parse_rm("rm t initial=u0\nstate u0 terminal\n")
        self.assertIn("initial state is terminal", ctx.exception.violations)

    def test_serialization_is_canonical(self):
        rm = shipped_rm("cookie")
        text = serialize_rm(rm)
        self.assertEqual(parse_rm(text), rm)
        self.assertEqual(serialize_rm(parse_rm(text)), text)


class TestCounterfactualExperience(unittest.TestCase):
    def setUp(self):
        self.rm = shipped_rm("simple_cookie")

    def test_button(self):
        batch = crm_batch(self.rm, "o", 3, "o2", L("B"), False)
        self.assertEqual([e.rm_state for e in batch], ["u0", "u1"])
        self.assertEqual((batch[0].next_rm_state, batch[0].reward, batch[0].terminal), ("u1", 0.0, False))
        self.assertEqual((batch[1].next_rm_state, batch[1].reward, batch[1].terminal), ("u1", 0.0, False))

    def test_cookie(self):
        batch = crm_batch(self.rm, "o", 2, "o2", L("C"), True)
        self.assertEqual((batch[0].next_rm_state, batch[0].reward), ("u0", 0.0))
        self.assertEqual((batch[1].next_rm_state, batch[1].reward), ("u2", 1.0))
        self.assertTrue(all(e.terminal for e in batch))

    def test_step_cost(self):
        batch = crm_batch(self.rm, "o", 0, "o2", EMPTY, False)
        self.assertEqual([e.reward for e in batch], [-0.1, -0.1])


class TestShaping(unittest.TestCase):
    def assertValues(self, potentials, expected):
        for u, value in expected.items():
            self.assertAlmostEqual(potentials[u], value, delta=1e-9, msg=u)

    def test_cookie_potentials(self):
        potentials = ars_potentials(shipped_rm("cookie"), 0.9)
        self.assertValues(potentials, {"u0": 0.81, "u1": 0.9, "u2": 1.0, "u3": 1.0, "u4": 0.0})

    def test_keys_potentials(self):
        potentials = ars_potentials(shipped_rm("keys"), 0.9)
        expected = {"u0": 0.729, "u1": 0.81, "u2": 0.81, "u3": 0.81, "u4": 0.9, "u5": 0.9, "u6": 1.0, "u7": 0.0}
        self.assertValues(potentials, expected)

    def test_potentials_are_a_fixed_point(self):
        for domain in ("cookie", "keys", "symbol"):
            rm = shipped_rm(domain)
            potentials = ars_potentials(rm, 0.9)
            for u in rm.states:
                backups = [0.9 * potentials[u]]
                for (src, _), (target, reward) in rm.transitions.items():
                    if src == u:
                        backups.append(reward + 0.9 * potentials[target])
                self.assertAlmostEqual(potentials[u], max(backups), delta=1e-8, msg=f"{domain} {u}")

    def test_gamma_range(self):
        with self.assertRaises(ValueError):
            ars_potentials(shipped_rm("cookie"), 1.0)

    def test_shaping_on_optimal_edge_is_zero(self):
        self.assertAlmostEqual(shape_reward(0.0, 0.81, 0.9, 0.9), 0.0)
        self.assertAlmostEqual(shape_reward(1.0, 1.0, 0.0, 0.9), 0.0)


class TestGridMap(unittest.TestCase):
    def test_default_map_rooms(self):
        grid_map = read_map(default_assets("cookie")["map"])
        self.assertEqual(grid_map.start, (7, 4))
        self.assertEqual(grid_map.room(grid_map.start), 1)
        self.assertEqual(grid_map.room((3, 4)), 0)
        self.assertEqual(grid_map.room((11, 4)), 2)
        self.assertEqual(grid_map.room((7, 12)), 3)
        self.assertEqual(grid_map.door_slots, [(7, 8), (7, 9)])
        self.assertEqual(grid_map.room((7, 8)), 3)
        self.assertEqual(grid_map.cells_with("cookie_slot"), [(2, 2), (12, 2)])
        self.assertEqual(grid_map.rooms(), [0, 1, 2, 3])

    def test_simple_cookie_map(self):
        grid_map = read_map(default_assets("simple_cookie")["map"])
        self.assertEqual(grid_map.rooms(), [1])
        self.assertEqual(grid_map.start, (1, 3))

    def test_no_start(self):
        with self.assertRaises(ValidationError):
            load_map("XXXX\nX..X\nXXXX\n")

    def test_bad_character(self):
        with self.assertRaises(ParseError) as ctx:
            load_map("XXXX\nX.?X\nXXXX\n")
        self.assertEqual(ctx.exception.line, 2)

    def test_ragged_rows(self):
        with self.assertRaises(ParseError):
            load_map("XXXX\nXS.X\nXXX\n")


class TestDomains(unittest.TestCase):
    def test_cookie_reset(self):
        domain = make_domain("cookie")
        state, obs, label = domain.reset(np.random.default_rng(0))
        self.assertEqual(label, L("1"))
        self.assertEqual(obs.room, 1)
        self.assertEqual(state.rm_state, "u0")

    def test_pressing_the_button(self):
        domain = make_domain("cookie", slip=0.0)
        rng = np.random.default_rng(1)
        state, _, _ = domain.reset(rng)
        # right to the corridor end, down into room 3, right onto the button
        for action in [3] * 6 + [1] * 2 + [3] * 4:
            tr = domain.env_step(state, action, rng)
            state = tr.state
        self.assertEqual(state.agent, (9, 14))
        self.assertEqual(tr.label, L("3B"))
        self.assertEqual(state.rm_state, "u1")
        self.assertIn(state.payload.cookie, (0, 2))

    def test_step_after_done_raises(self):
        domain = make_domain("cookie")
        state, _, _ = domain.reset(np.random.default_rng(0))
        with self.assertRaises(EpisodeDoneError):
            domain.env_step(EnvState(state.agent, state.payload, state.rm_state, 3, True), 0, np.random.default_rng(0))

    def test_symbol_rules(self):
        self.assertTrue(SymbolWorld.satisfies(("b", "n"), "b", 0))
        self.assertFalse(SymbolWorld.satisfies(("b", "n"), "b", 2))
        self.assertTrue(SymbolWorld.satisfies(("a", "x"), "a", 2))
        self.assertFalse(SymbolWorld.satisfies(("a", "s"), "c", 2))

    def test_picking_up_a_key(self):
        domain = make_domain("keys", slip=0.0)
        rng = np.random.default_rng(0)
        state = EnvState((3, 2), KeysPayload(("room0", "room0")), "u2")
        tr = domain.env_step(state, Action.UP, rng)
        self.assertEqual(tr.state.agent, (2, 2))
        self.assertEqual(tr.label, L("0*k"))
        self.assertEqual(tr.state.payload.keys, ("carried", "room0"))
        self.assertEqual(tr.state.rm_state, "u5")
        # the agent carries at most one key
        tr = domain.env_step(domain.env_step(tr.state, Action.DOWN, rng).state, Action.UP, rng)
        self.assertEqual(tr.state.payload.keys, ("carried", "room0"))
        self.assertEqual(tr.label, L("0*k"))

    def test_doors_consume_keys(self):
        domain = make_domain("keys", slip=0.0)
        rng = np.random.default_rng(0)
        state = EnvState((7, 7), KeysPayload(("carried", "room2")), "u4")
        tr = domain.env_step(state, Action.RIGHT, rng)
        self.assertEqual(tr.state.agent, (7, 7))
        self.assertEqual(tr.state.payload, KeysPayload(("consumed", "room2"), (True, False)))
        self.assertEqual(tr.label, L("1"))
        tr = domain.env_step(tr.state, Action.RIGHT, rng)
        self.assertEqual(tr.state.agent, (7, 8))
        tr = domain.env_step(tr.state, Action.RIGHT, rng)
        self.assertEqual(tr.state.agent, (7, 8))
        self.assertEqual(tr.state.payload.doors, (True, False))

    def test_key_count_matches_open_doors(self):
        domain = make_domain("keys")
        rng = np.random.default_rng(4)
        state, _, _ = domain.reset(rng)
        for _ in range(20_000):
            tr = domain.env_step(state, int(rng.integers(4)), rng)
            keys, doors = tr.state.payload.keys, tr.state.payload.doors
            self.assertEqual(len(keys), 2)
            self.assertLessEqual(keys.count("carried"), 1)
            self.assertEqual(doors.count(True), keys.count("consumed"))
            state = domain.reset(rng)[0] if tr.done else tr.state

    def test_keys_reset_distribution(self):
        domain = make_domain("keys")
        rng = np.random.default_rng(0)
        resets = [domain.reset(rng)[0].payload.keys for _ in range(10_000)]
        self.assertAlmostEqual(resets.count(("room0", "room0")) / len(resets), 0.25, delta=0.02)
        self.assertAlmostEqual(resets.count(("room0", "room2")) / len(resets), 0.5, delta=0.02)

    def test_symbol_reset_is_uniform(self):
        domain = make_domain("symbol")
        rng = np.random.default_rng(0)
        counts = Counter(domain.reset(rng)[0].payload.instruction for _ in range(9000))
        self.assertEqual(len(counts), 9)
        for instruction, count in counts.items():
            self.assertAlmostEqual(count / 9000, 1 / 9, delta=0.02, msg=str(instruction))

    def test_symbol_labels(self):
        domain = make_domain("symbol", slip=0.0)
        obs = domain.observe((7, 12), SymbolPayload(("b", "n")))
        self.assertEqual(domain.label_of(None, None, obs), L("3bn"))
        state = EnvState((2, 2), SymbolPayload(("b", "n")), "u5")
        tr = domain.env_step(state, Action.UP, np.random.default_rng(0))
        self.assertEqual(tr.label, L("0Abc"))
        self.assertEqual(tr.reward_event, -1.0)
        self.assertTrue(tr.task_done)
        self.assertEqual(tr.state.rm_state, "u10")

    def test_slip_frequency(self):
        domain = make_domain("cookie")
        rng = np.random.default_rng(0)
        state = EnvState((3, 4), CookiePayload(), "u0")
        slipped = sum(domain.env_step(state, Action.RIGHT, rng).state.agent != (3, 5) for _ in range(100_000))
        self.assertAlmostEqual(slipped / 100_000, 0.075, delta=0.005)

    def test_other_rooms_are_hidden(self):
        cookie = make_domain("cookie")
        self.assertEqual(cookie.observe((7, 4), CookiePayload(0)), cookie.observe((7, 4), CookiePayload(2)))
        self.assertNotEqual(cookie.observe((3, 4), CookiePayload(0)), cookie.observe((3, 4), CookiePayload(2)))
        keys = make_domain("keys")
        self.assertEqual(
            keys.observe((3, 4), KeysPayload(("room0", "room2"))).key,
            keys.observe((3, 4), KeysPayload(("consumed", "room0"), (True, False))).key,
        )

    def test_wrong_map_for_domain(self):
        with self.assertRaises(ValidationError):
            make_domain("keys", read_map(default_assets("simple_cookie")["map"]), shipped_rm("keys"))


class TestModel(unittest.TestCase):
    def test_simple_cookie_state_count(self):
        model = enumerate_model(make_domain("simple_cookie"))
        self.assertEqual(model.n_states, 9)
        self.assertTrue(np.allclose(model.row_sums(), 1.0))

    def test_observable_cookie_model_is_stochastic(self):
        model = enumerate_model(make_domain("cookie"), observable=True)
        self.assertTrue(np.allclose(model.row_sums(), 1.0))
        self.assertTrue(model.terminal.any())

    def test_oracle_solves_simple_cookie(self):
        domain = make_domain("simple_cookie")
        model = enumerate_model(domain)
        values, policy = oracle_value_iteration(model, 0.9)
        self.assertEqual(len(policy), model.n_states)
        results = OraclePolicy(domain, model, policy).rollouts(20, np.random.default_rng(0))
        self.assertTrue(all(success for success, _ in results))


if __name__ == "__main__":
    unittest.main()
