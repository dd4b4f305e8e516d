import numpy as np
import pytest

from portslot import gate


def mm1_wait(lam, mu):
    # independent closed form for the single-server case
    return lam / (mu * (mu - lam))


class TestAnalyticWait:
    def test_single_server_example(self):
        assert gate.mms_wait_time(0.5, 1.0, 1) == pytest.approx(mm1_wait(0.5, 1.0), rel=1e-12)
        assert gate.mms_wait_time(0.5, 1.0, 1) == pytest.approx(1.0, rel=1e-12)

    def test_vanishing_arrivals(self):
        assert gate.mms_wait_time(0.0, 1.0, 1) == 0.0
        assert gate.mms_wait_time(1e-12, 2.0, 4) < 1e-10

    def test_matches_mm1_closed_form_random(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            mu = rng.uniform(0.5, 10.0)
            lam = rng.uniform(0.01, 0.99) * mu
            got = gate.mms_wait_time(lam, mu, 1)
            want = mm1_wait(lam, mu)
            assert abs(got - want) <= 1e-12 * abs(want)

    def test_agrees_with_des_at_moderate_load(self):
        # averaged over replications: the mean-wait estimator is noisy at
        # utilization 0.75 because waits are strongly autocorrelated
        estimates = []
        for seed in (11, 12, 13):
            arr = gate.poisson_arrivals([3.0] * 40000, 1.0, seed)
            estimates.append(gate.des_simulate(arr, 1.0, 4, seed + 50).mean_wait)
        want = gate.mms_wait_time(3.0, 1.0, 4)
        assert abs(np.mean(estimates) - want) / want < 0.05

    def test_unstable_raises(self):
        with pytest.raises(gate.UnstableQueueError):
            gate.mms_wait_time(2.0, 1.0, 2)
        with pytest.raises(gate.UnstableQueueError):
            gate.mms_wait_time(5.0, 1.0, 4)

    def test_monotone_in_servers_and_rate(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            mu = rng.uniform(0.5, 5.0)
            lam = rng.uniform(0.05, 0.9) * mu
            waits = [gate.mms_wait_time(lam, mu, s) for s in range(1, 6)]
            assert all(a > b for a, b in zip(waits, waits[1:]))
            lam2 = lam + 0.05 * mu
            assert gate.mms_wait_time(lam2, mu, 2) > gate.mms_wait_time(lam, mu, 2)


class TestQueueStats:
    def test_littles_law_single_slot(self):
        st = gate.queue_stats([0.5], 1.0, [1])
        assert st.queue_length[0] == pytest.approx(0.5)

    def test_zero_arrivals(self):
        st = gate.queue_stats(np.zeros(24), 1.0, np.ones(24, dtype=int))
        assert not st.wait_hours.any()
        assert not st.queue_length.any()
        assert not st.departures.any()

    def test_departures_conserve_arrivals(self):
        arr = np.full(24, 3.0)
        st = gate.queue_stats(arr, 1.0, np.full(24, 4, dtype=int))
        assert st.departures.sum() == pytest.approx(arr.sum())

    def test_unstable_slot_reported_with_index(self):
        arr = np.zeros(24)
        arr[13] = 9.0
        with pytest.raises(gate.UnstableQueueError, match="slot 13"):
            gate.queue_stats(arr, 1.0, np.full(24, 4, dtype=int))

    def test_penalty_mode_is_finite(self):
        arr = np.zeros(4)
        arr[2] = 50.0
        st = gate.queue_stats(arr, 1.0, np.full(4, 2, dtype=int), on_unstable="penalty")
        assert st.wait_hours[2] == 24.0
        assert np.isfinite(st.queue_length).all()


class TestWaitingCost:
    def test_examples(self):
        assert gate.waiting_cost(10.0, 38.0) == pytest.approx(380.0)
        assert gate.waiting_cost(0.0, 38.0) == 0.0
        assert gate.waiting_cost(0.5, 38.0) == pytest.approx(19.0)

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            gate.waiting_cost(-1.0, 38.0)
        with pytest.raises(ValueError):
            gate.waiting_cost(1.0, 0.0)


class TestDes:
    def test_single_arrival_no_wait(self):
        res = gate.des_simulate(np.array([1.0]), 2.0, 1, 0)
        assert res.waits[0] == 0.0

    def test_fifo_two_simultaneous(self):
        res = gate.des_simulate(np.array([1.0, 1.0]), 2.0, 1, 0, fixed_service_hours=0.5)
        assert sorted(res.waits) == [0.0, 0.5]

    def test_mm1_mean_wait(self):
        arr = gate.poisson_arrivals([0.5] * 200000, 1.0, 3)
        res = gate.des_simulate(arr, 1.0, 1, 4)
        assert res.arrivals.size > 90000
        assert 0.95 <= res.mean_wait <= 1.05  # closed form gives exactly 1.0

    def test_conservation(self):
        arr = gate.poisson_arrivals([4.0] * 24, 1.0, 8)
        res = gate.des_simulate(arr, 1.0, 2, 8)  # overloaded, queue keeps growing
        assert res.departures.size == res.arrivals.size
        assert (res.departures >= res.arrivals).all()

    def test_deterministic_per_seed(self):
        arr = gate.poisson_arrivals([2.0] * 24, 1.0, 5)
        a = gate.des_simulate(arr, 1.5, 2, 17)
        b = gate.des_simulate(arr, 1.5, 2, 17)
        assert np.array_equal(a.waits, b.waits)
        assert np.array_equal(a.departures, b.departures)

    def test_rejects_unordered_events(self):
        with pytest.raises(ValueError):
            gate.des_simulate(np.array([2.0, 1.0]), 1.0, 1, 0)

    def test_littles_law_empirical(self):
        lam, mu = 0.7, 1.0
        arr = gate.poisson_arrivals([lam] * 150000, 1.0, 21)
        res = gate.des_simulate(arr, mu, 1, 22)
        horizon = res.departures.max()
        n_bar = res.waits.sum() / horizon          # time-average number waiting
        lam_hat = res.arrivals.size / horizon
        t_bar = res.mean_wait
        assert abs(n_bar - lam_hat * t_bar) / n_bar < 0.03


class TestAgreementGrid:
    # smaller companion of the acceptance grid: spot checks at 1e5 customers
    @pytest.mark.parametrize("s", [1, 2, 4, 8])
    def test_relative_error_below_ten_percent(self, s):
        mu = 1.0
        lam = 0.7 * s * mu
        want = gate.mms_wait_time(lam, mu, s)
        arr = gate.poisson_arrivals([lam] * int(100000 / lam + 1), 1.0, 100 + s)
        res = gate.des_simulate(arr[:100000], mu, s, 200 + s)
        assert abs(res.mean_wait - want) / want < 0.10


class TestCalibration:
    @staticmethod
    def _observed_day():
        arr_h = np.zeros(24)
        arr_h[5:10] = [2, 2, 3, 3, 3]
        arr_h[10:14] = [5, 6, 6, 5]
        arr_h[14:18] = [14, 18, 16, 12]
        return np.repeat(arr_h / 4.0, 4)

    def test_self_calibration_recovers_parameters(self):
        arr_q = self._observed_day()
        mu0, s0 = 2.5, 4
        obs = gate.simulate_departure_profile(arr_q, mu0, s0, seed=42, replications=16,
                                              slot_width_hours=0.25)
        fit = gate.calibrate_gate(arr_q, obs, seed=1234)
        assert fit.n_servers == s0
        assert abs(fit.mu - mu0) / mu0 < 0.10
        assert fit.r_squared >= 0.9

    def test_degenerate_observations_rejected(self):
        with pytest.raises(ValueError, match="degenerate"):
            gate.calibrate_gate(np.zeros(96), np.zeros(96))

    def test_empty_bounds_rejected(self):
        arr_q = self._observed_day()
        with pytest.raises(ValueError, match="bounds"):
            gate.calibrate_gate(arr_q, arr_q, s_bounds=(5, 3))
