from __future__ import annotations

import numpy as np
import pytest

from assistdlo import elastica as el
from assistdlo.errors import OutOfRange


class TestSolveElastica:
    def test_unloaded_rod(self):
        sol = el.solve_elastica(0.0)
        assert sol.projection == 1.0
        assert np.all(sol.theta == 0.0)

    def test_small_k_linear_regime(self):
        # Linearized solution theta'' = -K(1-s): theta = -K(s/2 - s^2/2 + s^3/6),
        # projection ~ 1 - O(K^2); at K = 1e-3 it stays within (0.999, 1).
        sol = el.solve_elastica(1e-3, 256)
        assert 0.999 < sol.projection < 1.0
        s = np.linspace(0, 1, len(sol.theta))
        linear = -(1e-3) * (s / 2 - s**2 / 2 + s**3 / 6)
        np.testing.assert_allclose(sol.theta, linear, atol=1e-9)

    def test_boundary_conditions(self):
        sol = el.solve_elastica(10.0, 512)
        assert sol.theta[0] == pytest.approx(0.0, abs=1e-8)
        # recompute the end slope from the grid: O(h^2) one-sided difference
        h = 1.0 / (len(sol.theta) - 1)
        endslope = (3 * sol.theta[-1] - 4 * sol.theta[-2] + sol.theta[-3]) / (2 * h)
        assert abs(endslope) < 1e-4

    def test_downward_sign_convention(self):
        sol = el.solve_elastica(5.0)
        assert np.all(sol.theta <= 1e-12)
        assert sol.theta[-1] < -0.5  # tip well below horizontal

    def test_matches_collocation_oracle_at_k10(self):
        from scipy.integrate import solve_bvp

        def rhs(s, y):
            return np.vstack([y[1], -10.0 * (1.0 - s) * np.cos(y[0])])

        def bc(ya, yb):
            return np.array([ya[0], yb[1]])

        s = np.linspace(0, 1, 2000)
        guess = np.vstack([0.5 * s, 0.5 * np.ones_like(s)])
        oracle = solve_bvp(rhs, bc, s, guess, tol=1e-10, max_nodes=100000)
        assert oracle.success
        proj_oracle = float(np.trapezoid(np.cos(oracle.sol(s)[0]), s))
        sol = el.solve_elastica(10.0, 1024)
        assert sol.projection == pytest.approx(proj_oracle, abs=1e-4)

    def test_grid_convergence(self):
        for K in (1.0, 10.0, 100.0):
            a = el.solve_elastica(K, 1024).projection
            b = el.solve_elastica(K, 2048).projection
            assert abs(a - b) < 1e-6

    def test_validation(self):
        with pytest.raises(ValueError):
            el.solve_elastica(-1.0)
        with pytest.raises(ValueError):
            el.solve_elastica(1.0, 32)


class TestBuildTable:
    def test_two_point_table(self):
        tab = el.build_table(0.01, 100.0, n=2, n_grid=512)
        assert tab.projections[0] > 0.99
        assert tab.projections[1] < 0.25
        assert tab.projections[0] > tab.projections[1]

    def test_strictly_decreasing_64(self):
        tab = el.build_table(1e-3, 1e3, n=64, n_grid=512)
        assert np.all(np.diff(tab.projections) < 0)
        assert np.all(np.diff(tab.ks) > 0)

    def test_deterministic_rebuild(self):
        a = el.build_table(1e-2, 1e2, n=16, n_grid=256)
        b = el.build_table(1e-2, 1e2, n=16, n_grid=256)
        np.testing.assert_array_equal(a.projections, b.projections)
        np.testing.assert_array_equal(a.ks, b.ks)

    def test_csv_roundtrip(self):
        tab = el.build_table(1e-2, 1e2, n=8, n_grid=256)
        back = el.ProjectionTable.from_csv(tab.to_csv())
        np.testing.assert_array_equal(back.ks, tab.ks)
        np.testing.assert_array_equal(back.projections, tab.projections)


class TestEstimateEi:
    def test_linear_density_reference_rows(self):
        rows = {"blue": (0.140, 3.91, 0.0358), "green": (0.085, 2.21, 0.0385),
                "red": (0.138, 3.76, 0.0367), "orange": (0.115, 2.81, 0.0409)}
        for mass, length, lam in rows.values():
            assert round(mass / length, 4) == lam

    def test_roundtrip_blue(self, projection_table):
        lam, ei0, lfree = 0.0358, 0.0235, 0.30
        bproj = el.forward_projection(ei0, lam, lfree)
        meas = el.RopeMeasurement(3.91, lam * 3.91, lfree, bproj)
        ei, k, lam_out = el.estimate_ei(meas, projection_table)
        assert lam_out == pytest.approx(lam, abs=1e-12)
        assert abs(ei - ei0) / ei0 < 0.01
        assert k == pytest.approx(lam * el.GRAVITY * lfree**3 / ei, rel=1e-12)

    def test_rigid_limit_out_of_range(self, projection_table):
        meas = el.RopeMeasurement(2.0, 0.08, 0.3, 0.3)  # ratio exactly 1
        with pytest.raises(OutOfRange):
            el.estimate_ei(meas, projection_table)

    def test_floppy_limit_out_of_range(self, projection_table):
        meas = el.RopeMeasurement(2.0, 0.08, 0.5, 0.01)
        with pytest.raises(OutOfRange):
            el.estimate_ei(meas, projection_table)

    def test_measurement_validation(self):
        with pytest.raises(ValueError):
            el.RopeMeasurement(1.0, 0.1, 2.0, 0.5)   # free > total
        with pytest.raises(ValueError):
            el.RopeMeasurement(2.0, 0.1, 0.5, 0.6)   # bproj > free
        with pytest.raises(ValueError):
            el.RopeMeasurement(2.0, -0.1, 0.5, 0.3)  # bad mass
