import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coexlab import meanfield as mf


class TestRhs:
    def test_competing_zero_at_attractor(self):
        sys1 = mf.OdeSystem("eq1", dict(beta1=4, beta2=2, delta1=1, delta2=1))
        assert np.allclose(sys1.rhs([0.75, 0.0]), 0.0, atol=1e-14)

    def test_competing_hand_value(self):
        sys1 = mf.OdeSystem("eq1", dict(beta1=4, beta2=2, delta1=1, delta2=1))
        du = sys1.rhs([0.1, 0.2])
        assert du[0] == pytest.approx(4 * 0.1 * 0.7 - 0.1)
        assert du[1] == pytest.approx(2 * 0.2 * 0.7 - 0.2)

    def test_cubic_double_root(self):
        sys6 = mf.OdeSystem("eq6", dict(beta=4.0))
        assert sys6.rhs([0.5])[0] == pytest.approx(0.0, abs=1e-15)

    def test_voter_symmetric_matrix_is_still(self):
        lam = np.array([[0.0, 0.3, 0.1],
                        [0.3, 0.0, 0.7],
                        [0.1, 0.7, 0.0]])
        sysv = mf.OdeSystem("voter", dict(lam=lam))
        u = np.array([0.2, 0.3, 0.5])
        assert np.allclose(sysv.rhs(u), 0.0, atol=1e-15)

    def test_hierarchy_rhs(self):
        sys2 = mf.OdeSystem("eq2", dict(beta1=5, beta2=2, delta1=1, delta2=1))
        u = np.array([0.2, 0.3])
        du = sys2.rhs(u)
        assert du[0] == pytest.approx(5 * 0.2 * 0.5 - 0.2 - 2 * 0.3 * 0.2)
        assert du[1] == pytest.approx(2 * 0.3 * 0.8 - 0.3)

    def test_hawks_doves_empty_limit(self):
        sys11 = mf.OdeSystem("eq11",
                             dict(a=-0.6, b=0.9, c=-0.9, d=0.7, kappa=0.1))
        assert np.allclose(sys11.rhs([0.0, 0.0]), 0.0)

    def test_rejects_bad_shape_and_nonfinite(self):
        sys1 = mf.OdeSystem("eq1", dict(beta1=4, beta2=2, delta1=1, delta2=1))
        with pytest.raises(ValueError):
            sys1.rhs([0.1])
        with pytest.raises(ValueError):
            sys1.rhs([np.nan, 0.1])

    def test_unknown_system(self):
        with pytest.raises(KeyError):
            mf.OdeSystem("eq99", {})

    def test_jacobian_matches_analytic(self):
        b1, b2, d1, d2 = 4.0, 2.0, 1.0, 1.0
        sys1 = mf.OdeSystem("eq1", dict(beta1=b1, beta2=b2,
                                        delta1=d1, delta2=d2))
        u = np.array([0.2, 0.3])
        s = 1 - u.sum()
        J_exact = np.array([
            [b1 * s - b1 * u[0] - d1, -b1 * u[0]],
            [-b2 * u[1], b2 * s - b2 * u[1] - d2],
        ])
        assert np.allclose(sys1.jacobian(u), J_exact, atol=1e-8)


class TestIntegrate:
    def test_zero_horizon(self):
        sys1 = mf.OdeSystem("eq6", dict(beta=4.5))
        traj = mf.integrate(sys1, [0.3], 0.0)
        assert traj.times.tolist() == [0.0]
        assert traj.states[0, 0] == 0.3

    def test_logistic_closed_form(self):
        # beta2=0 collapses the two-type system to a logistic equation
        # with r = beta1 - delta1 and carrying capacity r / beta1
        b1, d1 = 4.0, 1.0
        r, K = b1 - d1, (b1 - d1) / b1
        sys1 = mf.OdeSystem("eq1", dict(beta1=b1, beta2=0.0,
                                        delta1=d1, delta2=1.0))
        u0 = 0.1
        t_eval = np.linspace(0, 5, 26)
        traj = mf.integrate(sys1, [u0, 0.0], 5.0, tol=1e-12, t_eval=t_eval)
        exact = K / (1 + (K / u0 - 1) * np.exp(-r * t_eval))
        assert np.abs(traj.states[:, 0] - exact).max() < 1e-9

    def test_tolerance_validated(self):
        sys1 = mf.OdeSystem("eq6", dict(beta=4.5))
        with pytest.raises(ValueError):
            mf.integrate(sys1, [0.3], 1.0, tol=0.0)

    def test_single_start_reaches_attractor(self):
        sys1 = mf.OdeSystem("eq1", dict(beta1=4, beta2=2, delta1=1, delta2=1))
        traj = mf.integrate(sys1, [0.1, 0.1], 200.0, tol=1e-10)
        assert np.abs(traj.states[-1] - [0.75, 0.0]).max() < 1e-4


class TestFixedPoints:
    def test_classify(self):
        assert mf.classify(np.array([-1.0, -0.5])) == "stable"
        assert mf.classify(np.array([1.0, 0.5])) == "unstable"
        assert mf.classify(np.array([1.0, -0.5])) == "saddle"
        assert mf.classify(np.array([0.0, -0.5])) == "center/marginal"
        assert mf.classify(np.array([1j, -1j])) == "center/marginal"

    def test_no_interior_point_for_parallel_isoclines(self):
        sys1 = mf.OdeSystem("eq1", dict(beta1=4, beta2=2, delta1=1, delta2=1))
        reports = mf.find_fixed_points(sys1)
        pts = [r.point for r in reports]
        assert not any(p[0] > 1e-6 and p[1] > 1e-6 for p in pts)
        by_class = {r.classification for r in reports}
        assert "stable" in by_class and "unstable" in by_class

    def test_colicin_interior_point_is_unstable(self):
        sys9 = mf.OdeSystem("eq9", dict(beta1=3, beta2=4, gamma=2.5))
        reports = mf.find_fixed_points(sys9)
        interior = [r for r in reports
                    if r.point[0] > 1e-6 and r.point[1] > 1e-6]
        assert len(interior) == 1
        assert np.allclose(interior[0].point, [2 / 15, 8 / 15], atol=1e-8)
        # a saddle: unstable in the sense that the flow leaves it
        assert interior[0].classification in ("unstable", "saddle")
        assert np.real(interior[0].eigenvalues).max() > 0

    def test_residuals_reported(self):
        sys6 = mf.OdeSystem("eq6", dict(beta=4.5))
        for r in mf.find_fixed_points(sys6):
            assert r.residual <= 1e-10


class TestInvasion:
    def test_hierarchy_threshold(self):
        ok, margin = mf.invasion_check("gbt", beta1=5, beta2=2)
        assert ok and margin == pytest.approx(0.5)
        ok, margin = mf.invasion_check("gbt", beta1=3.5, beta2=2)
        assert not ok and margin == pytest.approx(-0.25)

    def test_hierarchy_resident_extinct(self):
        with pytest.raises(ValueError, match="resident extinct"):
            mf.invasion_check("gbt", beta1=5, beta2=0.5)

    def test_host_pathogen(self):
        ok, margin = mf.invasion_check("host-pathogen", alpha=4, gamma1=0.5,
                                       gamma2=2, gamma3=1.2)
        assert ok and margin == pytest.approx(0.05)
        with pytest.raises(ValueError, match="resident extinct"):
            mf.invasion_check("host-pathogen", alpha=1.0, gamma1=0.5,
                              gamma2=2, gamma3=1.2)

    def test_colicin_chain(self):
        ok, _ = mf.invasion_check("colicin-interior", beta1=3, beta2=4,
                                  gamma=2.5)
        assert ok  # 1/4 < 1/3 < 3.5/6.5

    def test_unknown_check(self):
        with pytest.raises(KeyError):
            mf.invasion_check("martians")


class TestCyclic:
    def test_printed_equilibrium(self):
        rho, H = mf.cyclic_equilibrium(0.3, 0.7, 1.0)
        assert np.allclose(rho, [0.5, 0.15, 0.35])

    def test_symmetric(self):
        rho, _ = mf.cyclic_equilibrium(1, 1, 1)
        assert np.allclose(rho, 1 / 3)

    @given(st.integers(0, 10 ** 6))
    @settings(max_examples=30)
    def test_equilibrium_is_fixed_point(self, seed):
        b = np.random.default_rng(seed).uniform(0.05, 3.0, 3)
        rho, _ = mf.cyclic_equilibrium(*b)
        sysv = mf.cyclic_system(*b)
        assert np.abs(sysv.rhs(rho)).max() < 1e-14

    def test_invariant_along_trajectory(self):
        rho, H = mf.cyclic_equilibrium(0.3, 0.7, 1.0)
        sysv = mf.cyclic_system(0.3, 0.7, 1.0)
        u0 = np.array([0.4, 0.3, 0.3])
        traj = mf.integrate(sysv, u0, 100.0, tol=1e-10)
        drift = max(abs(H(u) - H(u0)) for u in traj.states)
        assert drift <= 1e-6

    def test_rejects_nonpositive_rates(self):
        with pytest.raises(ValueError):
            mf.cyclic_equilibrium(0.0, 1.0, 1.0)


class TestLyapunov:
    def test_conserved_quantity_with_analytic_gradient(self):
        rho, H = mf.cyclic_equilibrium(0.3, 0.7, 1.0)
        sysv = mf.cyclic_system(0.3, 0.7, 1.0)
        rep = mf.check_lyapunov(lambda u: -H(u), sysv,
                                grad=lambda u: -rho / u)
        assert abs(rep.max_derivative) <= 1e-12

    def test_constant_function(self):
        sysv = mf.cyclic_system(0.3, 0.7, 1.0)
        rep = mf.check_lyapunov(lambda u: 1.0, sysv)
        assert rep.max_derivative == pytest.approx(0.0, abs=1e-12)
        assert rep.convexity_violations == 0

    def test_boundary_drift_detected_without_interior_attractor(self):
        sys1 = mf.OdeSystem("eq1", dict(beta1=4, beta2=2, delta1=1, delta2=1))
        rep = mf.check_lyapunov(lambda u: -np.sum(np.log(u)), sys1)
        assert rep.max_derivative > 0


class TestCsv:
    def test_trajectory_roundtrip_text(self, tmp_path):
        sys6 = mf.OdeSystem("eq6", dict(beta=4.5))
        traj = mf.integrate(sys6, [0.4], 2.0, t_eval=np.linspace(0, 2, 5))
        path = tmp_path / "traj.csv"
        mf.trajectory_to_csv(traj, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "t,u_1"
        assert len(lines) == 6
        assert float(lines[1].split(",")[1]) == 0.4

    def test_fixed_points_csv(self, tmp_path):
        sys6 = mf.OdeSystem("eq6", dict(beta=4.5))
        path = tmp_path / "fp.csv"
        mf.fixed_points_to_csv(mf.find_fixed_points(sys6), path)
        lines = path.read_text().splitlines()
        assert lines[0].startswith("u_1,")
        assert len(lines) == 4
