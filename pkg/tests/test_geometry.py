from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from assistdlo.geometry import (CameraIntrinsics, Pose, RigidTransform,
                                UnitQuaternion, project_point, quat_from_yaw,
                                slerp, transform_point, vec3)

unit_quats = st.builds(
    UnitQuaternion,
    *(st.floats(-1, 1, allow_nan=False) for _ in range(4)),
).filter(lambda q: True)


def quat_strategy():
    def build(w, x, y, z):
        if abs(w) + abs(x) + abs(y) + abs(z) < 1e-6:
            return UnitQuaternion.identity()
        return UnitQuaternion(w, x, y, z)
    return st.builds(build, *(st.floats(-1, 1, allow_nan=False) for _ in range(4)))


class TestUnitQuaternion:
    def test_normalized_and_hemisphere(self):
        q = UnitQuaternion(-2.0, 0.0, 0.0, 2.0)
        assert q.w == pytest.approx(math.sqrt(0.5))
        assert q.z == pytest.approx(-math.sqrt(0.5))
        norm = math.sqrt(q.w**2 + q.x**2 + q.y**2 + q.z**2)
        assert abs(norm - 1.0) < 1e-9

    def test_zero_rejected(self):
        with pytest.raises(ValueError):
            UnitQuaternion(0.0, 0.0, 0.0, 0.0)

    def test_rotate_matches_matrix(self, rng):
        for _ in range(50):
            q = UnitQuaternion(*rng.normal(size=4))
            v = rng.normal(size=3)
            np.testing.assert_allclose(q.rotate(v), q.to_matrix() @ v, atol=1e-12)


class TestSlerp:
    def test_identity_case(self):
        q = UnitQuaternion.from_axis_angle(np.array([0.3, 0.5, 1.0]), 0.8)
        r = slerp(q, q, 0.7)
        assert q.dot(r) == pytest.approx(1.0, abs=1e-12)

    def test_halfway_symmetry(self):
        a = UnitQuaternion.identity()
        b = quat_from_yaw(math.pi / 2)
        mid = slerp(a, b, 0.5)
        expect = quat_from_yaw(math.pi / 4)
        assert abs(mid.dot(expect)) == pytest.approx(1.0, abs=1e-12)

    def test_shorter_arc_hemisphere_rule(self):
        a = UnitQuaternion.identity()
        b = quat_from_yaw(math.pi / 2)
        b_neg = UnitQuaternion(-b.w, -b.x, -b.y, -b.z)  # same rotation
        mid = slerp(a, b_neg, 0.5)
        expect = quat_from_yaw(math.pi / 4)
        assert abs(mid.dot(expect)) == pytest.approx(1.0, abs=1e-12)

    @given(quat_strategy(), quat_strategy())
    def test_endpoints(self, a, b):
        assert abs(slerp(a, b, 0.0).dot(a)) > 1.0 - 1e-9
        assert abs(slerp(a, b, 1.0).dot(b)) > 1.0 - 1e-9

    @given(quat_strategy(), quat_strategy())
    def test_unit_norm_and_monotone_angle(self, a, b):
        prev = -1.0
        for t in np.linspace(0.0, 1.0, 9):
            q = slerp(a, b, float(t))
            n = math.sqrt(q.w**2 + q.x**2 + q.y**2 + q.z**2)
            assert abs(n - 1.0) < 1e-9
            ang = a.angle_to(q)
            assert ang >= prev - 1e-7
            prev = ang


class TestQuatFromYaw:
    def test_zero_is_identity(self):
        q = quat_from_yaw(0.0)
        assert (q.w, q.x, q.y, q.z) == (1.0, 0.0, 0.0, 0.0)

    def test_half_angle(self):
        q = quat_from_yaw(math.pi / 2)
        assert q.w == pytest.approx(math.sqrt(0.5), abs=1e-12)
        assert q.z == pytest.approx(math.sqrt(0.5), abs=1e-12)
        assert q.x == q.y == 0.0

    def test_pi_sign_convention(self):
        q = quat_from_yaw(math.pi)
        assert q.w == pytest.approx(0.0, abs=1e-12)
        assert abs(q.z) == pytest.approx(1.0, abs=1e-12)
        assert q.w >= 0.0

    @given(st.floats(-10, 10, allow_nan=False))
    def test_rotates_x_axis(self, psi):
        q = quat_from_yaw(psi)
        v = q.rotate(np.array([1.0, 0.0, 0.0]))
        np.testing.assert_allclose(v, [math.cos(psi), math.sin(psi), 0.0],
                                   atol=1e-9)


class TestRigidTransform:
    def test_identity(self):
        t = RigidTransform.identity()
        np.testing.assert_array_equal(transform_point(t, vec3(1, 2, 3)), [1, 2, 3])

    def test_translation(self):
        t = RigidTransform(np.eye(3), vec3(0, 0, 1))
        np.testing.assert_allclose(transform_point(t, vec3(0, 0, 0)), [0, 0, 1])

    def test_rotation_plus_translation(self):
        # 90 deg about z then translate (1,0,0): hand evaluation of R p + t.
        t = RigidTransform.from_quat_translation(quat_from_yaw(math.pi / 2),
                                                 vec3(1, 0, 0))
        np.testing.assert_allclose(transform_point(t, vec3(1, 0, 0)),
                                   [1, 1, 0], atol=1e-12)

    def test_rejects_non_orthonormal(self):
        with pytest.raises(ValueError):
            RigidTransform(np.eye(3) * 1.001, np.zeros(3))

    def test_isometry(self, rng):
        q = UnitQuaternion(*rng.normal(size=4))
        t = RigidTransform.from_quat_translation(q, rng.normal(size=3))
        for _ in range(20):
            a, b = rng.normal(size=3), rng.normal(size=3)
            da = np.linalg.norm(a - b)
            db = np.linalg.norm(transform_point(t, a) - transform_point(t, b))
            assert abs(da - db) < 1e-9

    def test_inverse_compose(self, rng):
        q = UnitQuaternion(*rng.normal(size=4))
        t = RigidTransform.from_quat_translation(q, rng.normal(size=3))
        both = t.compose(t.inverse())
        np.testing.assert_allclose(both.rotation, np.eye(3), atol=1e-12)
        np.testing.assert_allclose(both.translation, 0.0, atol=1e-12)


class TestCameraIntrinsics:
    def test_validation(self):
        with pytest.raises(ValueError):
            CameraIntrinsics(0.0, 500.0, 320, 240, 640, 480)
        with pytest.raises(ValueError):
            CameraIntrinsics(500.0, 500.0, 700, 240, 640, 480)

    def test_projection(self):
        k = CameraIntrinsics(500.0, 500.0, 320.0, 240.0, 640, 480)
        assert project_point(k, vec3(0, 0, 1)) == (320.0, 240.0)
        u, v = project_point(k, vec3(0.4, 0.0, 2.0))
        assert (u, v) == (420.0, 240.0)


def test_pose_validates_position():
    with pytest.raises(ValueError):
        Pose(np.array([np.nan, 0.0, 0.0]), UnitQuaternion.identity())
