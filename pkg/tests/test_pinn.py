import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tps_reliab import autodiff as ad
from tps_reliab import pinn
from tps_reliab.heatsim import MaterialSample, ThermalScenario

SCENARIO = ThermalScenario()  # reference setup, t_final = 300 s
VAL_MAT = np.array([[0.65, 1509.0 * 1050.0]])


def make_model(seed=0, hidden=(6, 6)):
    net = ad.initialize_network((4, *hidden, 1), seed=seed)
    return pinn.SurrogateModel(net, SCENARIO, (0.1, 1.3), (0.8e6, 2.4e6))


def constant_output_model(value: float):
    """Network with zero weights whose output is exactly `value`."""
    net = ad.MlpNetwork(
        (4, 2, 1),
        (np.zeros((2, 4)), np.zeros((1, 2))),
        (np.zeros(2), np.array([value])),
    )
    return pinn.SurrogateModel(net, SCENARIO, (0.1, 1.3), (0.8e6, 2.4e6))


class TestConfigValidation:
    def test_rejects_bad_counts(self):
        with pytest.raises(ValueError):
            pinn.TrainingConfig(n_grid=0)
        with pytest.raises(ValueError):
            pinn.TrainingConfig(learning_rate=0.0)
        with pytest.raises(ValueError):
            pinn.TrainingConfig(k_range=(1.0, 0.5))

    def test_surrogate_requires_4_to_1_net(self):
        net = ad.initialize_network((3, 5, 1), seed=0)
        with pytest.raises(ValueError):
            pinn.SurrogateModel(net, SCENARIO, (0.1, 1.3), (0.8e6, 2.4e6))


class TestPhysicsLoss:
    def test_constant_net_zero_residual(self):
        model = constant_output_model(0.4)
        pts = np.random.default_rng(0).uniform(0, 1, (12, 2))
        mats = np.tile(VAL_MAT, (12, 1))
        assert pinn.physics_loss(model, mats, pts) == 0.0

    def test_pure_time_ramp_residual(self):
        # u = c * t' gives residual exactly c at every collocation point.
        c = 0.7
        net = ad.MlpNetwork((4, 1), (np.array([[0.0, c, 0.0, 0.0]]),), (np.zeros(1),))
        model = pinn.SurrogateModel(net, SCENARIO, (0.1, 1.3), (0.8e6, 2.4e6))
        pts = np.random.default_rng(1).uniform(0, 1, (9, 2))
        mats = np.tile(VAL_MAT, (9, 1))
        assert pinn.physics_loss(model, mats, pts) == pytest.approx(c**2, rel=1e-12)

    def test_matches_hand_assembly(self):
        model = make_model(seed=3)
        rng = np.random.default_rng(5)
        mats = np.column_stack([rng.uniform(0.1, 1.3, 10), rng.uniform(0.8e6, 2.4e6, 10)])
        pts = rng.uniform(0, 1, (10, 2))
        dv = ad.input_derivatives(model.net, pts[:, 0], pts[:, 1], model.scale_materials(mats))
        kappa = (mats[:, 0] / mats[:, 1]) * SCENARIO.t_final / SCENARIO.L**2
        by_hand = float(np.mean((dv.du_dt - kappa * dv.d2u_dx2) ** 2))
        assert pinn.physics_loss(model, mats, pts) == pytest.approx(by_hand, abs=1e-12)


class TestInitialLoss:
    def test_exact_initial_condition(self):
        model = constant_output_model(0.25)  # 25 C with T_norm = 100
        xs = np.linspace(0, 1, 7)
        assert pinn.initial_loss(model, np.tile(VAL_MAT, (7, 1)), xs) == 0.0

    def test_offset_by_10C_gives_0p01(self):
        model = constant_output_model(0.35)
        xs = np.linspace(0, 1, 5)
        loss = pinn.initial_loss(model, np.tile(VAL_MAT, (5, 1)), xs)
        assert loss == pytest.approx(0.01, rel=1e-12)

    def test_matches_hand_assembly(self):
        model = make_model(seed=8)
        rng = np.random.default_rng(6)
        mats = np.column_stack([rng.uniform(0.1, 1.3, 8), rng.uniform(0.8e6, 2.4e6, 8)])
        xs = rng.uniform(0, 1, 8)
        dv = ad.input_derivatives(model.net, xs, np.zeros(8), model.scale_materials(mats))
        by_hand = float(np.mean((dv.u - 0.25) ** 2))
        assert pinn.initial_loss(model, mats, xs) == pytest.approx(by_hand, abs=1e-12)


class TestBoundaryLoss:
    def test_constant_net_flux_term_only(self):
        model = constant_output_model(1.0)
        ts = np.linspace(0, 1, 6)
        mats = np.tile(VAL_MAT, (6, 1))
        g = SCENARIO.Q * SCENARIO.L / (0.65 * SCENARIO.T_norm)
        assert pinn.boundary_loss(model, mats, ts) == pytest.approx(g**2, rel=1e-12)

    def test_constructed_exact_solution_zero_loss(self):
        # u = g * x'^2 / 2 satisfies both boundary conditions exactly.  Built
        # from a linear net squared via... not expressible exactly with
        # softplus, so check the quadratic via a direct linear-in-x net whose
        # d u/dx' is constant g at both faces: instead verify the flux term
        # vanishes when du/dx' == g by using the insulated-face residual alone.
        g = 1.077  # arbitrary
        net = ad.MlpNetwork((4, 1), (np.array([[g, 0.0, 0.0, 0.0]]),), (np.zeros(1),))
        model = pinn.SurrogateModel(net, SCENARIO, (0.1, 1.3), (0.8e6, 2.4e6))
        k_for_g = SCENARIO.Q * SCENARIO.L / (g * SCENARIO.T_norm)
        mats = np.array([[k_for_g, 1.5e6]] * 4)
        ts = np.linspace(0, 1, 4)
        # du/dx' = g everywhere: insulated term g^2, flux term 0.
        assert pinn.boundary_loss(model, mats, ts) == pytest.approx(g**2, rel=1e-12)

    def test_matches_hand_assembly(self):
        model = make_model(seed=12)
        rng = np.random.default_rng(9)
        mats = np.column_stack([rng.uniform(0.1, 1.3, 6), rng.uniform(0.8e6, 2.4e6, 6)])
        ts = rng.uniform(0, 1, 6)
        scaled = model.scale_materials(mats)
        dv0 = ad.input_derivatives(model.net, np.zeros(6), ts, scaled)
        dv1 = ad.input_derivatives(model.net, np.ones(6), ts, scaled)
        g = SCENARIO.Q * SCENARIO.L / (mats[:, 0] * SCENARIO.T_norm)
        by_hand = float(np.mean(dv0.du_dx**2 + (dv1.du_dx - g) ** 2))
        assert pinn.boundary_loss(model, mats, ts) == pytest.approx(by_hand, abs=1e-12)


class TestTotalLoss:
    def _batches(self, n=10, seed=4):
        rng = np.random.default_rng(seed)
        mats = np.column_stack([rng.uniform(0.1, 1.3, n), rng.uniform(0.8e6, 2.4e6, n)])
        pts = rng.uniform(0, 1, (n, 2))
        return {"physics": (mats, pts), "initial": (mats, pts[:, 0]), "boundary": (mats, pts[:, 1])}

    def test_zero_weights(self):
        model = make_model()
        assert pinn.total_loss(model, self._batches(), (0.0, 0.0, 0.0)) == 0.0

    def test_physics_only(self):
        model = make_model()
        b = self._batches()
        assert pinn.total_loss(model, b, (1.0, 0.0, 0.0)) == pytest.approx(
            pinn.physics_loss(model, *b["physics"]), abs=1e-15
        )

    def test_decomposition(self):
        model = make_model(seed=17)
        b = self._batches(seed=2)
        total = pinn.total_loss(model, b, (1.0, 1.0, 1.0))
        parts = (
            pinn.physics_loss(model, *b["physics"])
            + pinn.initial_loss(model, *b["initial"])
            + pinn.boundary_loss(model, *b["boundary"])
        )
        assert total == pytest.approx(parts, abs=1e-12)


class TestAdam:
    def test_first_step_closed_form(self):
        params = [np.array([1.0])]
        opt = pinn.AdamState(params, lr=0.01)
        g = np.array([0.37])
        new = opt.step(params, [g])
        expected = 1.0 - 0.01 * 0.37 / (abs(0.37) + 1e-8)
        assert new[0][0] == pytest.approx(expected, rel=1e-12)
        assert new[0][0] == pytest.approx(1.0 - 0.01 * np.sign(0.37), rel=1e-6)

    def test_zero_gradient_no_move(self):
        params = [np.array([2.0, -1.0])]
        opt = pinn.AdamState(params, lr=0.1)
        new = opt.step(params, [np.zeros(2)])
        np.testing.assert_array_equal(new[0], params[0])


class TestTraining:
    def test_zero_epochs_returns_initial_net(self):
        cfg = pinn.TrainingConfig(epochs=0, seed=42)
        model = pinn.train(cfg, SCENARIO)
        ref = ad.initialize_network((4, 30, 30, 30, 1), seed=42)
        assert all(np.array_equal(a, b) for a, b in zip(model.net.weights, ref.weights))
        assert model.loss_history.shape == (0, 4)

    def test_short_run_decreases_loss(self):
        cfg = pinn.TrainingConfig(epochs=150, seed=3, hidden=(10, 10))
        model = pinn.train(cfg, SCENARIO)
        h = model.loss_history
        assert h.shape == (150, 4)
        assert np.all(np.isfinite(h))
        assert h[-1, 0] < h[0, 0]

    def test_seeded_rerun_identical_history(self):
        cfg = pinn.TrainingConfig(epochs=40, seed=11, hidden=(8,))
        h1 = pinn.train(cfg, SCENARIO).loss_history
        h2 = pinn.train(cfg, SCENARIO).loss_history
        assert np.array_equal(h1, h2)

    def test_resample_each_epoch_changes_history(self):
        base = pinn.TrainingConfig(epochs=40, seed=11, hidden=(8,))
        re = pinn.TrainingConfig(epochs=40, seed=11, hidden=(8,), resample_each_epoch=True)
        h1 = pinn.train(base, SCENARIO).loss_history
        h2 = pinn.train(re, SCENARIO).loss_history
        assert h1[0, 0] == h2[0, 0]  # same first batch
        assert not np.array_equal(h1[1:], h2[1:])


class TestPrediction:
    def test_batch_of_one_vs_large_batch(self):
        model = make_model(seed=23)
        rng = np.random.default_rng(1)
        mats = np.column_stack([rng.uniform(0.1, 1.3, 1000), rng.uniform(0.8e6, 2.4e6, 1000)])
        single = pinn.predict_back_temperature(model, mats[:1]).temps[0]
        big = pinn.predict_back_temperature(model, mats).temps[0]
        assert big == pytest.approx(single, abs=1e-12)

    def test_duplicated_material_identical_outputs(self):
        model = make_model(seed=29)
        mats = np.array([[0.5, 1.0e6], [0.9, 2.0e6], [0.5, 1.0e6]])
        out = pinn.predict_back_temperature(model, mats).temps
        assert out[0] == out[2]

    def test_repeated_calls_bitwise_equal(self):
        model = make_model(seed=31)
        mats = np.array([[0.4, 1.1e6], [0.8, 2.2e6]])
        a = pinn.predict_back_temperature(model, mats).temps
        b = pinn.predict_back_temperature(model, mats).temps
        assert np.array_equal(a, b)

    def test_extrapolation_margin_and_rejection(self):
        model = make_model()
        mats = np.array([
            [0.7, 1.5e6],    # inside
            [1.36, 1.5e6],   # 5% past k_high: warn
            [2.0, 1.5e6],    # far out: rejected
        ])
        with pytest.warns(UserWarning):
            out = pinn.predict_back_temperature(model, mats)
        assert list(out.status) == [0, 1, 2]
        assert np.isfinite(out.temps[0]) and np.isfinite(out.temps[1])
        assert np.isnan(out.temps[2])

    @settings(max_examples=10, deadline=None)
    @given(st.integers(2, 64))
    def test_batch_size_consistency_property(self, n):
        model = make_model(seed=37)
        rng = np.random.default_rng(n)
        mats = np.column_stack([rng.uniform(0.1, 1.3, n), rng.uniform(0.8e6, 2.4e6, n)])
        full = pinn.predict_back_temperature(model, mats).temps
        first = pinn.predict_back_temperature(model, mats[:1]).temps[0]
        assert full[0] == pytest.approx(first, abs=1e-12)

    def test_material_sample_accepted(self):
        model = make_model()
        out = pinn.predict_back_temperature(model, MaterialSample(0.65, 1.58e6))
        assert out.temps.shape == (1,)


class TestPersistence:
    def test_round_trip_bit_exact(self, tmp_path):
        model = pinn.train(pinn.TrainingConfig(epochs=25, seed=5, hidden=(7, 5)), SCENARIO)
        p1, p2 = tmp_path / "w1.txt", tmp_path / "w2.txt"
        pinn.save_weights(model, p1)
        loaded = pinn.load_weights(p1)
        pinn.save_weights(loaded, p2)
        assert p1.read_bytes() == p2.read_bytes()
        for a, b in zip(model.net.weights, loaded.net.weights):
            assert np.array_equal(a, b)
        assert loaded.k_range == model.k_range
        assert loaded.scenario.T_norm == model.scenario.T_norm

    def test_round_trip_predictions_identical(self, tmp_path):
        model = pinn.train(pinn.TrainingConfig(epochs=25, seed=6, hidden=(7,)), SCENARIO)
        path = tmp_path / "w.txt"
        pinn.save_weights(model, path)
        loaded = pinn.load_weights(path)
        rng = np.random.default_rng(2)
        mats = np.column_stack([rng.uniform(0.1, 1.3, 64), rng.uniform(0.8e6, 2.4e6, 64)])
        a = pinn.predict_back_temperature(model, mats).temps
        b = pinn.predict_back_temperature(loaded, mats).temps
        assert np.array_equal(a, b)

    def test_truncated_file_names_missing_section(self, tmp_path):
        model = make_model()
        path = tmp_path / "w.txt"
        pinn.save_weights(model, path)
        lines = path.read_text().splitlines()
        (tmp_path / "trunc.txt").write_text("\n".join(lines[:12]) + "\n")
        with pytest.raises(pinn.WeightsFormatError, match="weights"):
            pinn.load_weights(tmp_path / "trunc.txt")

    def test_header_corruption_detected(self, tmp_path):
        model = make_model()
        path = tmp_path / "w.txt"
        pinn.save_weights(model, path)
        text = path.read_text().replace("version 1", "version 99")
        (tmp_path / "bad.txt").write_text(text)
        with pytest.raises(pinn.WeightsFormatError, match="version"):
            pinn.load_weights(tmp_path / "bad.txt")

    def test_missing_header_key_detected(self, tmp_path):
        model = make_model()
        path = tmp_path / "w.txt"
        pinn.save_weights(model, path)
        lines = [ln for ln in path.read_text().splitlines() if not ln.startswith("T_norm")]
        (tmp_path / "bad.txt").write_text("\n".join(lines) + "\n")
        with pytest.raises(pinn.WeightsFormatError, match="T_norm"):
            pinn.load_weights(tmp_path / "bad.txt")
