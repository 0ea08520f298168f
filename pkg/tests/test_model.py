import json
import math

import numpy as np
import pytest

import riskdp as rd
from riskdp.model import KERNEL_ROW_SUM_TOL

from .helpers import flip_model, policy_const, random_model, random_policy


def tiny_identity_model():
    # 1 state, 1 action, 1 disturbance, N=1, p=1
    return rd.FiniteModel(
        horizon=1,
        dynamics=np.zeros((1, 1, 1, 1), dtype=np.int64),
        kernel=np.ones((1, 1, 1, 1)),
        stage_cost=np.zeros((1, 1, 1)),
        terminal_cost=np.zeros(1),
    )


class TestValidateModel:
    def test_identity_model_ok(self):
        report = rd.validate_model(tiny_identity_model())
        assert report.ok
        assert str(report) == "ok"

    def test_kernel_row_sum_violation_names_indices(self):
        m = flip_model()
        kernel = m.kernel.copy()
        kernel[0, 0, 0] = [0.89, 0.1]  # sums to 0.99
        bad = rd.FiniteModel(1, m.dynamics, kernel, m.stage_cost, m.terminal_cost)
        report = rd.validate_model(bad)
        assert not report.ok
        assert any("t=0, x=0, u=0" in v and "sums to" in v for v in report.violations)

    def test_dynamics_out_of_range(self):
        m = flip_model()
        dynamics = m.dynamics.copy()
        dynamics[0, 1, 0, 0] = m.n_states  # == |S|, one past the end
        bad = rd.FiniteModel(1, dynamics, m.kernel, m.stage_cost, m.terminal_cost)
        report = rd.validate_model(bad)
        assert any("state index out of range" in v and "t=0, x=1, u=0, w=0" in v for v in report.violations)

    def test_negative_kernel_entry(self):
        m = flip_model()
        kernel = m.kernel.copy()
        kernel[0, 2, 1] = [1.5, -0.5]
        bad = rd.FiniteModel(1, m.dynamics, kernel, m.stage_cost, m.terminal_cost)
        assert any("negative" in v for v in rd.validate_model(bad).violations)

    def test_nonfinite_costs_reported(self):
        m = flip_model()
        stage = m.stage_cost.copy()
        stage[0, 0, 1] = np.inf
        terminal = m.terminal_cost.copy()
        terminal[2] = np.nan
        bad = rd.FiniteModel(1, m.dynamics, m.kernel, stage, terminal)
        report = rd.validate_model(bad)
        assert any("stage cost entry (t=0, x=0, u=1)" in v for v in report.violations)
        assert any("terminal cost entry (x=2)" in v for v in report.violations)

    def test_idempotent_and_pure(self):
        m = flip_model()
        first = rd.validate_model(m)
        second = rd.validate_model(m)
        assert first.ok and second.ok
        assert first.violations == second.violations

    def test_rejects_mismatched_shapes_at_construction(self):
        with pytest.raises(rd.ModelValidationError):
            rd.FiniteModel(
                horizon=2,
                dynamics=np.zeros((1, 1, 1, 1), dtype=np.int64),
                kernel=np.ones((1, 1, 1, 1)),
                stage_cost=np.zeros((1, 1, 1)),
                terminal_cost=np.zeros(1),
            )

    def test_tables_are_read_only(self):
        m = flip_model()
        with pytest.raises(ValueError):
            m.kernel[0, 0, 0, 0] = 0.5


class TestPushforward:
    def test_identity_dynamics_all_mass_stays(self):
        rng = np.random.default_rng(7)
        m = random_model(rng, n_states=3, n_actions=2, n_disturbances=3, horizon=2)
        dynamics = np.empty_like(m.dynamics)
        for x in range(3):
            dynamics[:, x, :, :] = x
        m2 = rd.FiniteModel(2, dynamics, m.kernel, m.stage_cost, m.terminal_cost)
        q = rd.pushforward(m2).q
        for t in range(2):
            for x in range(3):
                for u in range(2):
                    expected = np.zeros(3)
                    expected[x] = math.fsum(m2.kernel[t, x, u].tolist())
                    assert q[t, x, u] == pytest.approx(expected, abs=1e-15)

    def test_two_disturbances_same_target_add(self):
        m = flip_model()
        dynamics = m.dynamics.copy()
        kernel = m.kernel.copy()
        dynamics[0, 0, 0] = [2, 2]
        kernel[0, 0, 0] = [0.3, 0.7]
        m2 = rd.FiniteModel(1, dynamics, kernel, m.stage_cost, m.terminal_cost)
        q = rd.pushforward(m2).q
        assert q[0, 0, 0, 2] == 1.0

    def test_matches_brute_force_double_loop(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            m = random_model(rng, n_states=3, n_actions=2, n_disturbances=4, horizon=3)
            q = rd.pushforward(m).q
            # independent oracle: explicit double loop over (w, x') pairs
            expected = np.zeros_like(q)
            for t in range(m.horizon):
                for x in range(m.n_states):
                    for u in range(m.n_actions):
                        for w in range(m.n_disturbances):
                            expected[t, x, u, m.dynamics[t, x, u, w]] += m.kernel[t, x, u, w]
            assert np.array_equal(q, expected)

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(13)
        m = random_model(rng, n_states=4, n_actions=3, n_disturbances=5, horizon=2)
        q = rd.pushforward(m).q
        sums = q.sum(axis=-1)
        assert np.all(np.abs(sums - 1.0) <= 1e-12)

    def test_rejects_invalid_model(self):
        m = flip_model()
        kernel = m.kernel.copy()
        kernel[0, 0, 0] = [0.5, 0.1]
        bad = rd.FiniteModel(1, m.dynamics, kernel, m.stage_cost, m.terminal_cost)
        with pytest.raises(rd.ModelValidationError):
            rd.pushforward(bad)


class TestTrajectoryCost:
    def test_zero_costs(self):
        m = tiny_identity_model()
        traj = rd.Trajectory((0, 0, 0))
        assert rd.trajectory_cost(m, traj) == 0.0

    def test_two_term_sum(self):
        m = flip_model()
        stage = m.stage_cost.copy()
        stage[0, 0, 0] = 1.5
        terminal = m.terminal_cost.copy()
        terminal[1] = 2.5
        m2 = rd.FiniteModel(1, m.dynamics, m.kernel, stage, terminal)
        assert rd.trajectory_cost(m2, rd.Trajectory((0, 0, 1))) == 4.0

    def test_matches_independent_fold(self):
        rng = np.random.default_rng(17)
        for _ in range(20):
            m = random_model(rng, n_states=3, n_actions=2, n_disturbances=2, horizon=3)
            states = rng.integers(0, 3, size=4)
            actions = rng.integers(0, 2, size=3)
            path = []
            for x, u in zip(states[:-1], actions):
                path += [int(x), int(u)]
            path.append(int(states[-1]))
            traj = rd.Trajectory(tuple(path))
            # independent oracle: forward accumulation over pairs
            expected = 0.0
            for t in range(3):
                expected += float(m.stage_cost[t, states[t], actions[t]])
            expected += float(m.terminal_cost[states[3]])
            assert rd.trajectory_cost(m, traj) == pytest.approx(expected, abs=1e-12)

    def test_inserting_zero_cost_stage_is_neutral(self):
        rng = np.random.default_rng(19)
        m = random_model(rng, n_states=2, n_actions=2, n_disturbances=2, horizon=2)
        traj = rd.Trajectory((0, 1, 1, 0, 1))
        base = rd.trajectory_cost(m, traj)
        # extend to three stages with a zero-cost middle stage
        dynamics = np.concatenate([m.dynamics, m.dynamics[-1:]], axis=0)
        kernel = np.concatenate([m.kernel, m.kernel[-1:]], axis=0)
        stage = np.concatenate([m.stage_cost[:1], np.zeros((1, 2, 2)), m.stage_cost[1:]], axis=0)
        m3 = rd.FiniteModel(3, dynamics, kernel, stage, m.terminal_cost)
        traj3 = rd.Trajectory((0, 1, 1, 0, 1, 0, 1))
        assert rd.trajectory_cost(m3, traj3) == base

    def test_index_out_of_range_raises(self):
        m = tiny_identity_model()
        with pytest.raises(rd.ModelValidationError):
            rd.trajectory_cost(m, rd.Trajectory((0, 0, 5)))
        with pytest.raises(rd.ModelValidationError):
            rd.trajectory_cost(m, rd.Trajectory((0, 3, 0)))


class TestCostToGo:
    def test_terminal_stage(self):
        m = flip_model()
        traj = rd.Trajectory((0, 0, 2))
        assert rd.cost_to_go(m, traj, 1) == 10.0

    def test_stage_zero_equals_total(self):
        rng = np.random.default_rng(23)
        m = random_model(rng, n_states=3, n_actions=2, n_disturbances=2, horizon=3)
        traj = rd.Trajectory((0, 1, 2, 0, 1, 1, 2))
        assert rd.cost_to_go(m, traj, 0) == rd.trajectory_cost(m, traj)

    def test_telescoping_exact(self):
        rng = np.random.default_rng(29)
        for _ in range(20):
            m = random_model(rng, n_states=3, n_actions=2, n_disturbances=2, horizon=4)
            states = rng.integers(0, 3, size=5)
            actions = rng.integers(0, 2, size=4)
            path = []
            for x, u in zip(states[:-1], actions):
                path += [int(x), int(u)]
            path.append(int(states[-1]))
            traj = rd.Trajectory(tuple(path))
            for t in range(4):
                lhs = rd.cost_to_go(m, traj, t) - rd.cost_to_go(m, traj, t + 1)
                assert lhs == float(m.stage_cost[t, states[t], actions[t]])

    def test_stage_out_of_range(self):
        m = tiny_identity_model()
        with pytest.raises(rd.ModelValidationError):
            rd.cost_to_go(m, rd.Trajectory((0, 0, 0)), 2)
        with pytest.raises(rd.ModelValidationError):
            rd.cost_to_go(m, rd.Trajectory((0, 0, 0)), -1)


class TestModelIO:
    def test_round_trip(self, tmp_path):
        m = flip_model()
        path = tmp_path / "flip.json"
        rd.save_model(m, path)
        loaded = rd.load_model(path)
        assert loaded.horizon == m.horizon
        assert loaded.states == m.states
        assert loaded.actions == m.actions
        assert loaded.disturbances == m.disturbances
        assert np.array_equal(loaded.dynamics, m.dynamics)
        assert np.array_equal(loaded.kernel, m.kernel)
        assert np.array_equal(loaded.stage_cost, m.stage_cost)
        assert np.array_equal(loaded.terminal_cost, m.terminal_cost)
        assert rd.validate_model(loaded).ok

    def test_renormalize_repairs_small_drift_only(self, tmp_path):
        m = flip_model()
        data = rd.model_to_dict(m)
        data["kernel"][0][0][0] = [0.9 + 2e-10, 0.1]       # fixable drift
        data["kernel"][0][1][0] = [0.9, 0.2]               # real modeling error
        path = tmp_path / "drift.json"
        path.write_text(json.dumps(data))
        strict = rd.load_model(path)
        assert not rd.validate_model(strict).ok
        repaired = rd.load_model(path, renormalize=True)
        report = rd.validate_model(repaired)
        assert any("t=0, x=1, u=0" in v for v in report.violations)
        assert not any("t=0, x=0, u=0" in v for v in report.violations)
        row = repaired.kernel[0, 0, 0]
        assert abs(math.fsum(row.tolist()) - 1.0) <= KERNEL_ROW_SUM_TOL

    def test_malformed_json_raises(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(rd.ModelValidationError):
            rd.load_model(path)

    def test_missing_field_raises(self, tmp_path):
        path = tmp_path / "missing.json"
        path.write_text(json.dumps({"horizon": 1}))
        with pytest.raises(rd.ModelValidationError):
            rd.load_model(path)


class TestPolicyChecks:
    def test_check_policy_shape(self):
        m = flip_model()
        with pytest.raises(rd.ModelValidationError):
            rd.check_policy(m, rd.MarkovPolicy(np.zeros((2, 4), dtype=np.int64)))

    def test_check_policy_range(self):
        m = flip_model()
        bad = rd.MarkovPolicy(np.full((1, 4), 7, dtype=np.int64))
        with pytest.raises(rd.ModelValidationError):
            rd.check_policy(m, bad)

    def test_policy_equality(self):
        rng = np.random.default_rng(31)
        m = random_model(rng, 3, 2, 2, 2)
        p1 = random_policy(rng, m)
        p2 = rd.MarkovPolicy(p1.mu.copy())
        assert p1 == p2
        assert p1 != policy_const(m, 0) or np.array_equal(p1.mu, policy_const(m, 0).mu)

    def test_state_index_resolution(self):
        m = flip_model()
        assert m.state_index("s2") == 2
        assert m.state_index(1) == 1
        assert m.state_index("3") == 3
        with pytest.raises(rd.ModelValidationError):
            m.state_index("nope")
        with pytest.raises(rd.ModelValidationError):
            m.state_index(9)
