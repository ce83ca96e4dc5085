import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tps_reliab import heatsim as hs

# Frozen from an independent high-precision (mpmath, 40 digits) evaluation of
# the constant-flux series for the validation case at x=0, t=100 s.
BACK_TEMP_ORACLE_100S = 97.21888577556836
MEAN_TEMP_100S = 115.1619759898658


def validation(t_final=100.0, n_x=100, cfl=0.2):
    return hs.ThermalScenario(t_final=t_final, n_x=n_x, cfl=cfl)


VAL_MAT = hs.MaterialSample(k=0.65, rho_cp=1509.0 * 1050.0)


class TestTypes:
    def test_scenario_rejects_bad_cfl(self):
        with pytest.raises(ValueError):
            hs.ThermalScenario(cfl=0.7)
        with pytest.raises(ValueError):
            hs.ThermalScenario(cfl=0.0)

    def test_scenario_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            hs.ThermalScenario(Q=float("nan"))
        with pytest.raises(ValueError):
            hs.ThermalScenario(L=-1.0)

    def test_material_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            hs.MaterialSample(k=0.0, rho_cp=1.0)
        with pytest.raises(ValueError):
            hs.MaterialSample(k=1.0, rho_cp=-2.0)

    def test_implicit_steps_default_to_node_count(self):
        sc = hs.ThermalScenario(n_x=37)
        assert sc.n_t_implicit == 37

    def test_field_rejects_nonfinite(self):
        bad = np.full((2, 3), np.nan)
        with pytest.raises(ValueError):
            hs.TemperatureField(bad, dx=0.1, dt=0.1)


class TestZeroFlux:
    def test_explicit_identity(self):
        sc = hs.ThermalScenario(Q=0.0, t_final=50.0, n_x=20)
        field = hs.solve_explicit(sc, VAL_MAT)
        assert np.all(field.temps == 25.0)

    def test_implicit_identity(self):
        sc = hs.ThermalScenario(Q=0.0, t_final=50.0, n_x=20)
        field = hs.solve_implicit(sc, VAL_MAT)
        np.testing.assert_allclose(field.temps, 25.0, atol=1e-10)

    def test_series_returns_initial_temperature(self):
        sc = hs.ThermalScenario(Q=0.0)
        assert hs.analytic_reference(sc, VAL_MAT, 0.003, 42.0) == pytest.approx(25.0)


class TestEnergyBalance:
    def test_explicit_mean_temperature(self):
        field = hs.solve_explicit(validation(), VAL_MAT)
        assert field.spatial_mean()[-1] == pytest.approx(MEAN_TEMP_100S, rel=0.01)

    def test_implicit_mean_temperature(self):
        field = hs.solve_implicit(validation(), VAL_MAT)
        assert field.spatial_mean()[-1] == pytest.approx(MEAN_TEMP_100S, rel=0.01)

    def test_mean_trajectory_tracks_energy_input(self):
        sc = validation()
        field = hs.solve_explicit(sc, VAL_MAT)
        expected = 25.0 + sc.Q * field.times / (VAL_MAT.rho_cp * sc.L)
        np.testing.assert_allclose(field.spatial_mean(), expected, rtol=1e-10)

    @settings(max_examples=15, deadline=None)
    @given(
        k=st.floats(0.05, 2.0),
        rho_cp=st.floats(5e5, 3e6),
        q=st.floats(0.0, 5e4),
    )
    def test_energy_balance_property(self, k, rho_cp, q):
        sc = hs.ThermalScenario(Q=q, t_final=60.0, n_x=30)
        mat = hs.MaterialSample(k=k, rho_cp=rho_cp)
        field = hs.solve_implicit(sc, mat)
        expected = 25.0 + q * sc.t_final / (rho_cp * sc.L)
        assert field.spatial_mean()[-1] == pytest.approx(expected, rel=1e-8, abs=1e-8)


class TestOracleAgreement:
    def test_explicit_back_temperature(self):
        field = hs.solve_explicit(validation(), VAL_MAT)
        assert hs.back_temperature(field) == pytest.approx(BACK_TEMP_ORACLE_100S, abs=0.5)

    def test_explicit_whole_trajectory(self):
        field = hs.solve_explicit(validation(), VAL_MAT)
        oracle = hs.analytic_reference(validation(), VAL_MAT, 0.0, field.times, n_terms=200)
        assert np.abs(field.temps[:, 0] - oracle).max() <= 0.5

    def test_implicit_back_temperature(self):
        field = hs.solve_implicit(validation(), VAL_MAT)
        assert hs.back_temperature(field) == pytest.approx(BACK_TEMP_ORACLE_100S, abs=0.5)

    def test_series_direct_value(self):
        value = hs.analytic_reference(validation(), VAL_MAT, 0.0, 100.0, n_terms=50)
        assert value == pytest.approx(BACK_TEMP_ORACLE_100S, abs=1e-9)

    def test_series_spatial_mean_matches_energy_balance(self):
        # Term-wise integration of the cosine series over the slab vanishes.
        sc = validation()
        x = np.linspace(0.0, sc.L, 2001)
        profile = hs.analytic_reference(sc, VAL_MAT, x, 100.0, n_terms=100)
        assert np.trapezoid(profile, x) / sc.L == pytest.approx(MEAN_TEMP_100S, rel=1e-6)

    def test_series_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            hs.analytic_reference(validation(), VAL_MAT, 0.0, 10.0, n_terms=0)
        with pytest.raises(ValueError):
            hs.analytic_reference(validation(), VAL_MAT, 1.0, 10.0)  # outside slab


class TestSchemeAgreement:
    def test_back_temperature_trajectories_within_1C(self):
        sc = validation()
        fe = hs.solve_explicit(sc, VAL_MAT)
        fi = hs.solve_implicit(sc, VAL_MAT)
        exp_at = fe.at_times(fi.times)[:, 0]
        assert np.abs(exp_at - fi.temps[:, 0]).max() <= 1.0

    def test_batch_matches_single_implicit(self):
        sc = validation()
        ks = np.array([0.65, 0.3, 1.1])
        cs = np.array([VAL_MAT.rho_cp, 1.2e6, 2.0e6])
        batch = hs.back_temperature_batch(sc, ks, cs)
        for i in range(3):
            single = hs.back_temperature(hs.solve_implicit(sc, hs.MaterialSample(ks[i], cs[i])))
            assert batch[i] == pytest.approx(single, abs=1e-9)

    def test_batch_rejects_bad_shapes(self):
        with pytest.raises(ValueError):
            hs.back_temperature_batch(validation(), np.array([0.5]), np.array([1e6, 2e6]))
        with pytest.raises(ValueError):
            hs.back_temperature_batch(validation(), np.array([-0.5]), np.array([1e6]))


class TestGridConvergence:
    def test_explicit_order_at_least_1p5(self):
        errs = []
        for n_x in (51, 101):  # dx halves exactly
            sc = validation(n_x=n_x)
            field = hs.solve_explicit(sc, VAL_MAT)
            oracle = hs.analytic_reference(sc, VAL_MAT, 0.0, field.times, n_terms=300)
            errs.append(np.abs(field.temps[:, 0] - oracle)[1:].max())
        order = np.log2(errs[0] / errs[1])
        assert order >= 1.5


class TestMonotoneHeating:
    def test_back_face_non_decreasing(self):
        field = hs.solve_explicit(validation(), VAL_MAT)
        assert np.all(np.diff(field.temps[:, 0]) >= -1e-12)

    def test_longer_exposure_is_hotter(self):
        t100 = hs.back_temperature(hs.solve_explicit(validation(100.0), VAL_MAT))
        t200 = hs.back_temperature(hs.solve_explicit(validation(200.0), VAL_MAT))
        assert t200 > t100

    @settings(max_examples=10, deadline=None)
    @given(k=st.floats(0.1, 1.5), rho_cp=st.floats(8e5, 2.4e6))
    def test_monotone_property_random_materials(self, k, rho_cp):
        sc = hs.ThermalScenario(t_final=80.0, n_x=40)
        field = hs.solve_explicit(sc, hs.MaterialSample(k, rho_cp))
        assert np.all(np.diff(field.temps[:, 0]) >= -1e-12)


class TestFieldAccessors:
    def test_back_temperature_uniform_field(self):
        field = hs.TemperatureField(np.full((4, 5), 25.0), dx=0.1, dt=1.0)
        assert hs.back_temperature(field) == 25.0

    def test_at_times_endpoints(self):
        sc = validation()
        field = hs.solve_implicit(sc, VAL_MAT)
        np.testing.assert_allclose(field.at_times([0.0])[0], field.temps[0])
        np.testing.assert_allclose(field.at_times([sc.t_final])[0], field.temps[-1])

    def test_row_zero_is_initial_condition(self):
        field = hs.solve_explicit(validation(), VAL_MAT)
        assert np.all(field.temps[0] == 25.0)
