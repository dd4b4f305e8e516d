import numpy as np
import pytest

from portslot import forecast, lstm
from portslot.forecast import (ForecastDataset, Hyper, SeriesWindow, build_dataset,
                               build_lookup_window, eval_metrics, ha_baseline,
                               load_model, save_model, seq2seq_forecast,
                               train_forecaster, zero_model)

LOOKUP = (-1, -2, -7, -14, -21)


class TestCellStep:
    def test_all_zero(self):
        p = lstm.zero_lstm(2, 3)
        h, c = lstm.lstm_cell_step(np.ones(2), np.zeros(3), np.zeros(3), p)
        assert not h.any() and not c.any()

    def test_half_forget_of_unit_cell(self):
        # zero parameters: every gate sits at 0.5 and the candidate at 0
        p = lstm.zero_lstm(2, 3)
        h, c = lstm.lstm_cell_step(np.zeros(2), np.zeros(3), np.ones(3), p)
        assert np.allclose(c, 0.5)
        assert np.allclose(h, 0.5 * np.tanh(0.5))
        assert h[0] == pytest.approx(0.2311, abs=1e-4)

    def test_saturated_forget_gate_keeps_cell(self):
        p = lstm.zero_lstm(2, 3)
        p["bf"] += 20.0
        c_prev = np.array([0.3, -0.8, 1.0])
        _, c = lstm.lstm_cell_step(np.zeros(2), np.zeros(3), c_prev, p)
        assert np.abs(c - c_prev).max() < 1e-8
        p["bf"] += 10.0  # bf = 30
        _, c = lstm.lstm_cell_step(np.zeros(2), np.zeros(3), c_prev, p)
        assert np.abs(c - c_prev).max() < 1e-6

    def test_shape_mismatch_rejected(self):
        p = lstm.zero_lstm(2, 3)
        with pytest.raises(ValueError):
            lstm.lstm_cell_step(np.ones(4), np.zeros(3), np.zeros(3), p)

    def test_hidden_state_bounded(self):
        rng = np.random.default_rng(7)
        p = lstm.init_lstm(2, 6, rng, scale=2.0)
        h = np.zeros(6)
        c = np.zeros(6)
        for _ in range(50):
            h, c = lstm.lstm_cell_step(rng.uniform(-5, 5, 2), h, c, p)
            assert (np.abs(h) < 1.0).all()


class TestGradients:
    def test_matches_finite_differences(self):
        h_fd = 1e-4
        for seed in range(5):
            rng = np.random.default_rng(seed)
            hidden = int(rng.integers(2, 6))
            steps = int(rng.integers(3, 7))
            horizon = int(rng.integers(2, 5))
            params = lstm.init_seq2seq(hidden, rng)
            x = rng.uniform(-1, 1, (3, steps, 2))
            y = rng.uniform(0, 3, (3, horizon))
            teach = np.zeros_like(y)
            teach[:, 1:] = y[:, :-1]
            _, grads, _ = lstm.seq2seq_loss_and_grads(params, x, y, teach)
            for name, p in params.items():
                fd = np.zeros_like(p)
                it = np.nditer(p, flags=["multi_index"])
                for _ in it:
                    ix = it.multi_index
                    old = p[ix]
                    p[ix] = old + h_fd
                    lp, _, _ = lstm.seq2seq_loss_and_grads(params, x, y, teach)
                    p[ix] = old - h_fd
                    lm, _, _ = lstm.seq2seq_loss_and_grads(params, x, y, teach)
                    p[ix] = old
                    fd[ix] = (lp - lm) / (2 * h_fd)
                denom = np.linalg.norm(grads[name]) + np.linalg.norm(fd) + 1e-12
                assert np.linalg.norm(grads[name] - fd) / denom < 1e-4, name


class TestForecastOp:
    def test_zero_model_outputs_zeros(self):
        model = zero_model(hidden=8)
        out = seq2seq_forecast(np.zeros((48, 2)), model)
        assert out.shape == (24,)
        assert not out.any()

    def test_outputs_nonnegative_and_deterministic(self):
        rng = np.random.default_rng(2)
        model = forecast.Seq2SeqModel(params=lstm.init_seq2seq(6, rng), hidden=6)
        window = rng.uniform(0, 20, (48, 2))
        a = seq2seq_forecast(window, model)
        b = seq2seq_forecast(window, model)
        assert (a >= 0).all()
        assert np.array_equal(a, b)

    def test_window_validation(self):
        with pytest.raises(ValueError):
            SeriesWindow(x=np.zeros((48, 3)), lookup=LOOKUP)
        with pytest.raises(ValueError):
            SeriesWindow(x=-np.ones((48, 2)), lookup=LOOKUP)
        with pytest.raises(ValueError):
            SeriesWindow(x=np.zeros((48, 2)), lookup=(-1, -2, -3))


class TestLookupWindows:
    def test_templates(self):
        assert build_lookup_window(1) == (-1, -2, -7, -14, -21)
        assert build_lookup_window(2) == (-2, -3, -7, -14, -21)
        assert build_lookup_window(3) == (-3, -4, -7, -14, -21)

    def test_unknown_scenario(self):
        with pytest.raises(ValueError):
            build_lookup_window(0)


class TestHaBaseline:
    def test_identical_days(self):
        history = np.full(30 * 24, 7.0)
        assert np.allclose(ha_baseline(history, LOOKUP, day=25), 7.0)

    def test_two_day_mean(self):
        history = np.zeros(10 * 24)
        history[4 * 24 + 9] = 4.0
        history[6 * 24 + 9] = 6.0
        out = ha_baseline(history, (-4, -2), day=8)
        assert out[9] == pytest.approx(5.0)

    def test_missing_days_rejected(self):
        with pytest.raises(ValueError, match="missing"):
            ha_baseline(np.zeros(5 * 24), LOOKUP, day=3)


class TestMetrics:
    def test_perfect(self):
        m = eval_metrics([1.0, 2.0], [1.0, 2.0])
        assert m.mse == m.rmse == m.mae == 0.0

    def test_hand_example(self):
        m = eval_metrics([0.0, 0.0], [3.0, 4.0])
        assert m.mse == pytest.approx(12.5)
        assert m.rmse == pytest.approx(np.sqrt(12.5))
        assert m.rmse == pytest.approx(3.5355, abs=1e-4)
        assert m.mae == pytest.approx(3.5)

    def test_constant_offset(self):
        obs = np.arange(10.0)
        m = eval_metrics(obs + 2.0, obs)
        assert m.mae == pytest.approx(2.0)
        assert m.rmse == pytest.approx(2.0)

    def test_identities_hold(self):
        rng = np.random.default_rng(3)
        for _ in range(30):
            pred = rng.uniform(0, 10, 24)
            obs = rng.uniform(0, 10, 24)
            m = eval_metrics(pred, obs)
            assert m.rmse ** 2 == pytest.approx(m.mse, rel=1e-12)
            assert m.mae <= m.rmse + 1e-12

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            eval_metrics([1.0], [1.0, 2.0])


def small_dataset(n=20, seed=0, steps=48):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0, 15, (n, steps, 2))
    y = 0.4 * x[:, -24:, 0] + 0.4 * x[:, -24:, 1] + rng.normal(0, 0.3, (n, 24))
    return ForecastDataset(x=x, y=np.maximum(y, 0), days=np.arange(n), lookup=LOOKUP)


class TestTraining:
    def test_identity_fit_constant_series(self):
        x = np.full((20, 48, 2), 10.0)
        y = np.full((20, 24), 10.0)
        ds = ForecastDataset(x=x, y=y, days=np.arange(20), lookup=LOOKUP)
        model, _ = train_forecaster(ds, hyper=Hyper(hidden=8, steps=1200, seed=1))
        pred = seq2seq_forecast(x[0], model)
        assert np.abs(pred - 10.0).max() < 0.5

    def test_single_sample_overfits(self):
        rng = np.random.default_rng(5)
        x = rng.uniform(0, 20, (1, 48, 2))
        y = rng.uniform(0, 15, (1, 24))
        ds = ForecastDataset(x=x, y=y, days=np.array([0]), lookup=LOOKUP)
        model, log = train_forecaster(ds, hyper=Hyper(hidden=16, steps=2500, seed=2,
                                                      dropout=0.0))
        assert log.train_mse[-1] < 1e-2

    def test_gradient_clip_bounds_global_norm(self):
        grads = {"a": np.full((3, 3), 100.0), "b": np.full(4, -50.0)}
        clipped, norm = lstm.clip_gradients(grads, 1.0)
        assert norm > 1.0
        assert lstm.global_norm(clipped) <= 1.0 + 1e-12

    def test_training_is_deterministic(self):
        ds = small_dataset()
        m1, log1 = train_forecaster(ds, hyper=Hyper(hidden=6, steps=60, seed=9))
        m2, log2 = train_forecaster(ds, hyper=Hyper(hidden=6, steps=60, seed=9))
        for k in m1.params:
            assert np.array_equal(m1.params[k], m2.params[k])
        assert log1.train_mse == log2.train_mse

    def test_loss_trend_downward(self):
        ds = small_dataset(n=40, seed=4)
        _, log = train_forecaster(ds, hyper=Hyper(hidden=8, steps=600, seed=3))
        first = np.median(log.train_mse[:3])
        last = np.median(log.train_mse[-3:])
        assert last < first

    def test_nonfinite_loss_aborts_with_diagnostic(self):
        x = np.full((4, 48, 2), 1.0)
        y = np.full((4, 24), 1e200)
        ds = ForecastDataset(x=x, y=y, days=np.arange(4), lookup=LOOKUP)
        with pytest.raises(RuntimeError, match="non-finite"):
            train_forecaster(ds, hyper=Hyper(hidden=4, steps=10, seed=0))

    def test_empty_dataset_rejected(self):
        ds = ForecastDataset(x=np.zeros((0, 48, 2)), y=np.zeros((0, 24)),
                             days=np.zeros(0), lookup=LOOKUP)
        with pytest.raises(ValueError):
            train_forecaster(ds)

    def test_validation_logged_every_20_steps(self):
        ds = small_dataset(n=30, seed=6)
        tr, va, _ = forecast.calendar_split(ds, 0.6, 0.2)
        _, log = train_forecaster(tr, va, hyper=Hyper(hidden=4, steps=100, seed=1))
        assert log.steps == [20, 40, 60, 80, 100]
        assert all(np.isfinite(v) for v in log.val_mse)
        assert "step,train_mse,val_mse" in log.to_csv()


class TestDatasetAssembly:
    def test_lookup_order_oldest_first(self):
        containers = np.arange(40 * 24, dtype=float)
        trucks = np.zeros(40 * 24)
        ds = build_dataset(containers, trucks, LOOKUP)
        first_day = int(ds.days[0])
        assert first_day == 21
        # first block of the sample is day -21, last block day -1
        assert ds.x[0, 0, 0] == containers[(first_day - 21) * 24]
        assert ds.x[0, -24, 0] == containers[(first_day - 1) * 24]

    def test_history_too_short(self):
        with pytest.raises(ValueError):
            build_dataset(np.zeros(10 * 24), np.zeros(10 * 24), LOOKUP)


class TestCheckpoint:
    def test_roundtrip(self):
        rng = np.random.default_rng(12)
        model = forecast.Seq2SeqModel(params=lstm.init_seq2seq(5, rng), hidden=5,
                                      x_mean=np.array([1.0, 2.0]),
                                      x_std=np.array([3.0, 4.0]),
                                      y_mean=5.0, y_std=6.0)
        back = load_model(save_model(model))
        assert back.hidden == 5 and back.y_std == 6.0
        for k in model.params:
            assert np.array_equal(back.params[k], model.params[k])
        window = rng.uniform(0, 5, (48, 2))
        assert np.array_equal(seq2seq_forecast(window, model),
                              seq2seq_forecast(window, back))

    def test_version_checked(self):
        with pytest.raises(ValueError):
            load_model('{"version": "0", "tensors": {}}')
