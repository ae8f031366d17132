from __future__ import annotations

import math

import numpy as np
import pytest

from assistdlo.errors import (DegenerateNeighborhood, NoCandidates,
                              VerticalTangent)
from assistdlo.intent import (IntentParams, IntentState, estimate_tangent,
                              grasp_pose, infer_target, select_target)
from oracles import intent_select_oracle, pca_tangent_oracle

P = IntentParams()


def _state(prev=None):
    return IntentState(prev_target=None if prev is None else np.asarray(prev, float))


class TestSelectTarget:
    def test_single_candidate(self):
        cloud = np.array([[0.0, 0.0, 0.0]])
        point, state = select_target(cloud, np.array([5.0, 5, 5]),
                                     np.array([9.0, 9, 9]), _state(), P)
        np.testing.assert_array_equal(point, [0, 0, 0])
        np.testing.assert_array_equal(state.prev_target, [0, 0, 0])

    def test_l1_metric_two_candidates(self):
        # L1 distances: 0.5 vs 1.1 -> first point wins.
        cloud = np.array([[0.0, 0, 0], [1.0, 0, 0]])
        human = np.array([0.2, 0.0, 0.3])
        point, _ = select_target(cloud, human, np.array([9.0, 9, 9]), _state(), P)
        np.testing.assert_array_equal(point, [0, 0, 0])

    def test_hysteresis_blocks_jump(self):
        cloud = np.array([[0.0, 0, 0], [1.0, 0, 0]])
        state = _state([0.0, 0, 0])
        robot = np.array([0.0, 0.0, 0.03])       # within eps_robot of prev
        human = np.array([1.0, 0.0, 0.0])        # jumped to the far point
        point, _ = select_target(cloud, human, robot, state,
                                 IntentParams(step_radius=0.10,
                                              robot_proximity=0.05))
        np.testing.assert_array_equal(point, [0, 0, 0])  # (1,0,0) not in omega

    def test_empty_omega_falls_back_to_global(self):
        cloud = np.array([[1.0, 0, 0], [2.0, 0, 0]])
        state = _state([-5.0, 0, 0])  # nothing within step radius of prev
        robot = np.array([-5.0, 0, 0.01])
        point, _ = select_target(cloud, np.array([1.1, 0, 0]), robot, state, P)
        np.testing.assert_array_equal(point, [1, 0, 0])

    def test_empty_cloud_raises(self):
        with pytest.raises(NoCandidates):
            select_target(np.zeros((0, 3)), np.zeros(3), np.zeros(3), _state(), P)

    def test_membership(self, rng):
        for _ in range(50):
            cloud = rng.normal(size=(20, 3))
            point, _ = select_target(cloud, rng.normal(size=3),
                                     rng.normal(size=3), _state(), P)
            assert any(np.array_equal(point, p) for p in cloud)

    def test_matches_exhaustive_oracle_randomized(self, rng):
        agree = 0
        trials = 300
        for _ in range(trials):
            n = rng.integers(1, 120)
            cloud = rng.uniform(-0.4, 0.4, size=(n, 3))
            human = rng.uniform(-0.5, 0.5, size=3)
            robot = rng.uniform(-0.5, 0.5, size=3)
            prev = cloud[rng.integers(0, n)] + rng.normal(0, 0.02, 3) \
                if rng.random() < 0.7 else None
            params = IntentParams(step_radius=float(rng.uniform(0.02, 0.2)),
                                  robot_proximity=float(rng.uniform(0.02, 0.2)))
            got, _ = select_target(cloud, human, robot, _state(prev), params)
            want = cloud[intent_select_oracle(cloud, human, robot, prev,
                                              params.step_radius,
                                              params.robot_proximity)]
            agree += bool(np.array_equal(got, want))
        assert agree == trials

    def test_kdtree_and_linear_paths_agree(self, rng):
        # > 64 points activates the KD-tree; force both paths on one dataset.
        from assistdlo import intent as intent_mod
        cloud = rng.uniform(-0.3, 0.3, size=(200, 3))
        human = rng.uniform(-0.3, 0.3, size=3)
        prev = cloud[17]
        robot = prev + 0.01
        got_tree, _ = select_target(cloud, human, robot, _state(prev), P)
        old = intent_mod.KDTREE_MIN_POINTS
        try:
            intent_mod.KDTREE_MIN_POINTS = 10**9
            got_lin, _ = select_target(cloud, human, robot, _state(prev), P)
        finally:
            intent_mod.KDTREE_MIN_POINTS = old
        np.testing.assert_array_equal(got_tree, got_lin)

    def test_step_bound_property(self, rng):
        # While the robot stays near the previous target, the selection cannot
        # move more than step_radius per call (or it falls back when empty).
        params = IntentParams(step_radius=0.08, robot_proximity=0.05)
        cloud = rng.uniform(-0.3, 0.3, size=(80, 3))
        state = _state(cloud[0])
        for _ in range(50):
            robot = state.prev_target + rng.normal(0, 0.01, 3)
            if np.linalg.norm(robot - state.prev_target) >= params.robot_proximity:
                continue
            human = rng.uniform(-0.5, 0.5, size=3)
            prev = state.prev_target.copy()
            point, state = select_target(cloud, human, robot, state, params)
            inside = np.linalg.norm(cloud - prev, axis=1) <= params.step_radius
            if inside.any():
                assert np.linalg.norm(point - prev) <= params.step_radius + 1e-12

    def test_release_property(self, rng):
        # Robot far from the previous target: selection is the global L1 argmin.
        params = IntentParams(step_radius=0.08, robot_proximity=0.05)
        for _ in range(50):
            cloud = rng.uniform(-0.3, 0.3, size=(40, 3))
            human = rng.uniform(-0.5, 0.5, size=3)
            prev = cloud[3]
            robot = prev + np.array([1.0, 0, 0])
            point, _ = select_target(cloud, human, robot, _state(prev), params)
            l1 = np.abs(cloud - human).sum(axis=1)
            np.testing.assert_array_equal(point, cloud[int(np.argmin(l1))])


class TestEstimateTangent:
    def test_collinear_x(self):
        cloud = np.column_stack([np.linspace(0, 1, 10), np.zeros(10), np.zeros(10)])
        t = estimate_tangent(cloud[4], cloud, 6)
        np.testing.assert_allclose(t, [1, 0, 0], atol=1e-12)

    def test_collinear_diagonal_sign_rule(self):
        d = np.array([1.0, 1.0, 0.0]) / math.sqrt(2)
        cloud = np.outer(np.linspace(-1, 1, 12), d)
        t = estimate_tangent(cloud[5], cloud, 8)
        np.testing.assert_allclose(t, [math.sqrt(0.5), math.sqrt(0.5), 0],
                                   atol=1e-12)

    def test_noisy_line_matches_eigensolver_oracle(self, rng):
        direction = np.array([0.8, -0.55, 0.24])
        direction /= np.linalg.norm(direction)
        s = rng.uniform(-0.05, 0.05, size=(40, 1))
        cloud = s * direction + rng.normal(0, 0.001, size=(40, 3))
        point = cloud[11]
        t = estimate_tangent(point, cloud, 12)
        oracle = pca_tangent_oracle(point, cloud, 12)
        np.testing.assert_allclose(t, oracle, atol=1e-9)
        angle = math.degrees(math.acos(min(1.0, abs(float(t @ direction)))))
        assert angle < 5.0

    def test_translation_invariance_rotation_equivariance(self, rng):
        cloud = rng.normal(size=(30, 3)) * [0.1, 0.01, 0.01]
        point = cloud[4]
        t0 = estimate_tangent(point, cloud, 10)
        shift = rng.normal(size=3)
        t1 = estimate_tangent(point + shift, cloud + shift, 10)
        np.testing.assert_allclose(np.abs(t0), np.abs(t1), atol=1e-6)
        from assistdlo.geometry import quat_from_yaw
        q = quat_from_yaw(0.9)
        rot = q.to_matrix()
        t2 = estimate_tangent(rot @ point, cloud @ rot.T, 10)
        np.testing.assert_allclose(np.abs(t2), np.abs(rot @ t0), atol=1e-6)

    def test_coincident_points_degenerate(self):
        cloud = np.zeros((10, 3))
        with pytest.raises(DegenerateNeighborhood):
            estimate_tangent(np.zeros(3), cloud, 5)


class TestGraspPose:
    def test_x_tangent_identity_yaw(self):
        g = grasp_pose(np.array([0.1, 0.2, 0.0]), np.array([1.0, 0, 0]))
        assert g.pose.orientation.w == pytest.approx(1.0)
        np.testing.assert_array_equal(g.pose.position, [0.1, 0.2, 0.0])

    def test_y_tangent_quarter_turn(self):
        g = grasp_pose(np.zeros(3), np.array([0.0, 1.0, 0]))
        q = g.pose.orientation
        assert 2 * math.atan2(q.z, q.w) == pytest.approx(math.pi / 2)

    def test_projection_ignores_z(self):
        g = grasp_pose(np.zeros(3), np.array([1.0, 1.0, 0.2]))
        q = g.pose.orientation
        assert 2 * math.atan2(q.z, q.w) == pytest.approx(math.pi / 4)

    def test_zero_roll_pitch_always(self, rng):
        for _ in range(50):
            t = rng.normal(size=3)
            if math.hypot(t[0], t[1]) < 1e-6:
                continue
            g = grasp_pose(rng.normal(size=3), t)
            q = g.pose.orientation
            assert abs(q.x) < 1e-9 and abs(q.y) < 1e-9

    def test_vertical_tangent_raises(self):
        with pytest.raises(VerticalTangent):
            grasp_pose(np.zeros(3), np.array([0.0, 0.0, 1.0]))

    def test_yaw_wrapped_to_half_circle(self):
        g = grasp_pose(np.zeros(3), np.array([-1.0, 0.1, 0.0]))
        q = g.pose.orientation
        yaw = 2 * math.atan2(q.z, q.w)
        assert -math.pi / 2 < yaw <= math.pi / 2


def test_infer_target_smoke(rng):
    cloud = np.column_stack([np.linspace(-0.2, 0.2, 40), np.zeros(40),
                             np.full(40, 0.01)])
    target, state = infer_target(cloud, np.array([0.05, 0.01, 0.1]),
                                 np.array([0.0, 0.0, 0.1]), IntentState(), P)
    assert target is not None
    assert any(np.array_equal(target.source_point, p) for p in cloud)
    assert state.prev_target is not None


def test_infer_target_empty_cloud():
    target, state = infer_target(np.zeros((0, 3)), np.zeros(3), np.zeros(3),
                                 IntentState(), P)
    assert target is None and state.prev_target is None
