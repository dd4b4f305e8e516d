import numpy as np
import pytest

from portslot import choice
from portslot.choice import (ALTERNATIVES, ChoiceModelParams, Coefficient,
                             choice_prob, estimate_mnl, planning_cost, utility)
from portslot.domain import TourAttributes


def random_attrs(rng, n, same_day_share=0.3, delay_scale=0.2):
    commodities = list(choice.COMMODITY_LABELS)
    types = list(choice.TYPE_LABELS)
    weights = list(choice.WEIGHT_LABELS)
    lengths = list(choice.LENGTH_LABELS)
    vessels = list(choice.VESSEL_LABELS)
    cm = rng.integers(0, len(commodities), n)
    ty = rng.integers(0, len(types), n)
    le = rng.integers(0, len(lengths), n)
    we = rng.integers(0, len(weights), n)
    sd = rng.random(n) < same_day_share
    vw = rng.integers(0, len(vessels), n)
    dp = rng.uniform(0, delay_scale, n)
    dh = rng.uniform(0, delay_scale, n)
    return [TourAttributes(
        commodity=commodities[cm[i]], container_type=types[ty[i]],
        length=lengths[le[i]], weight_class=weights[we[i]],
        vessel_window=vessels[vw[i]] if sd[i] else None,
        delay_port=float(dp[i]), delay_hint=float(dh[i]),
    ) for i in range(n)]


PLAIN = TourAttributes(commodity="AGR", container_type="TC", length="40ft",
                       weight_class="Light")


class TestUtility:
    def test_zero_params_zero_everywhere(self):
        p = ChoiceModelParams()
        for w in ALTERNATIVES:
            assert utility(PLAIN, w, p) == 0.0

    def test_single_commodity_cell(self):
        p = ChoiceModelParams({Coefficient("Agr", "Morning"): 0.321})
        assert utility(PLAIN, "Morning", p) == pytest.approx(0.321)
        assert utility(PLAIN, "Midday", p) == 0.0
        assert utility(PLAIN, "Night", p) == 0.0

    def test_generic_delay_hits_every_nonbase_window(self):
        attrs = TourAttributes(commodity="AGR", container_type="TC", length="40ft",
                               weight_class="Light", delay_hint=0.1)
        p = ChoiceModelParams({Coefficient("Delay_Hint", "*"): -1.14})
        for w in ("Morning", "Midday", "Afternoon"):
            assert utility(attrs, w, p) == pytest.approx(-0.114)
        assert utility(attrs, "Night", p) == 0.0

    def test_unknown_window_rejected(self):
        with pytest.raises(KeyError):
            utility(PLAIN, "Evening", ChoiceModelParams())


class TestChoiceProb:
    def test_equal_utilities_exactly_uniform(self):
        p = choice_prob(PLAIN, ChoiceModelParams())
        assert list(p) == [0.25, 0.25, 0.25, 0.25]

    def test_single_raised_utility(self):
        params = ChoiceModelParams({Coefficient("ASC", "Morning"): 1.0})
        p = choice_prob(PLAIN, params)
        want = np.e / (np.e + 3.0)  # direct evaluation of the logit share
        assert p[0] == pytest.approx(want, rel=1e-12)
        assert p.sum() == pytest.approx(1.0, abs=1e-12)

    def test_shift_invariance(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            v = rng.normal(size=4)
            c = rng.normal() * 10
            p1 = choice.softmax(v)
            p2 = choice.softmax(v + c)
            assert np.abs(p1 - p2).max() < 1e-12

    def test_argmax_matches_utility_argmax(self):
        rng = np.random.default_rng(8)
        params = choice.default_params()
        for attrs in random_attrs(rng, 40):
            v = choice.utilities(attrs, params)
            p = choice_prob(attrs, params)
            assert int(np.argmax(v)) == int(np.argmax(p))


class TestPlanningCost:
    def test_certain_window_costs_nothing(self):
        c = planning_cost([1.0, 0.0, 0.0, 0.0], eta=100.0)
        assert c[0] == 0.0

    def test_uniform_distribution(self):
        c = planning_cost([0.25] * 4, eta=100.0)
        assert np.allclose(c, 75.0)

    def test_two_alternative_toy(self):
        c = planning_cost([0.7311, 0.2689], eta=1.0)
        assert c == pytest.approx([0.2689, 0.7311])

    def test_preserves_preference_order(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            p = rng.dirichlet(np.ones(4))
            c = planning_cost(p, eta=100.0)
            order_p = np.argsort(-p)
            order_c = np.argsort(c)
            assert np.array_equal(order_p, order_c)


class TestEstimation:
    @staticmethod
    def _observations(n, seed, params=None):
        rng = np.random.default_rng(seed)
        attrs = random_attrs(rng, n)
        params = params or choice.default_params()
        chosen = choice.simulate_choices(params, attrs, seed + 1)
        return list(zip(attrs, chosen))

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(11)
        obs = self._observations(60, 2)
        spec = [Coefficient("ASC", "Morning"), Coefficient("ASC", "Midday"),
                Coefficient("Agr", "Morning"), Coefficient("GP", "Midday"),
                Coefficient("Delay_Hint", "*")]
        x, y = choice._design_tensor(obs, spec)
        beta = rng.normal(scale=0.5, size=len(spec))
        _, grad, _ = choice._loglik_and_grad(beta, x, y)
        h = 1e-6
        for k in range(len(spec)):
            e = np.zeros_like(beta)
            e[k] = h
            lp, _, _ = choice._loglik_and_grad(beta + e, x, y)
            lm, _, _ = choice._loglik_and_grad(beta - e, x, y)
            fd = (lp - lm) / (2 * h)
            assert abs(grad[k] - fd) <= 1e-5 * max(1.0, abs(fd))

    def test_loglik_never_decreases_on_accepted_steps(self):
        obs = self._observations(2000, 5)
        _, report = estimate_mnl(obs)
        path = np.array(report.ll_path)
        assert (np.diff(path) >= -1e-9).all()

    def test_recovery_within_three_standard_errors(self):
        truth = choice.default_params()
        obs = self._observations(20000, 31, params=truth)
        params, report = estimate_mnl(obs)
        assert report.converged
        misses = []
        for est in report.coefficients:
            true_val = truth.values.get(Coefficient(est.name, est.alternative), 0.0)
            if abs(est.estimate - true_val) > 3 * est.std_error:
                misses.append((est.name, est.alternative))
        assert not misses, misses

    def test_constants_only_on_uniform_choices(self):
        rng = np.random.default_rng(17)
        attrs = random_attrs(rng, 8000)
        chosen = [ALTERNATIVES[i] for i in rng.integers(0, 4, size=8000)]
        spec = [Coefficient("ASC", a) for a in ("Morning", "Midday", "Afternoon")]
        params, report = estimate_mnl(list(zip(attrs, chosen)), spec=spec)
        for est in report.coefficients:
            assert abs(est.estimate) < 3 * est.std_error + 0.05
        assert abs(report.rho_squared) < 0.01

    def test_consistency_error_shrinks_with_sample_size(self):
        truth = ChoiceModelParams({
            Coefficient("ASC", "Morning"): 0.4,
            Coefficient("ASC", "Midday"): -0.3,
            Coefficient("ASC", "Afternoon"): 0.2,
            Coefficient("Agr", "Morning"): 0.5,
            Coefficient("Delay_Hint", "*"): -1.0,
        })
        spec = list(truth.values)
        errs = {1000: [], 100000: []}
        for seed in range(10):
            for n in errs:
                rng = np.random.default_rng(1000 + seed)
                attrs = random_attrs(rng, n)
                chosen = choice.simulate_choices(truth, attrs, 2000 + seed)
                params, _ = estimate_mnl(list(zip(attrs, chosen)), spec=spec,
                                         gtol_per_obs=1e-4)
                err = max(abs(params.values[c] - truth.values[c]) for c in spec)
                errs[n].append(err)
        assert np.median(errs[100000]) < np.median(errs[1000])

    def test_missing_alternative_rejected(self):
        obs = self._observations(50, 9)
        obs = [(a, c) for a, c in obs if c != "Night"]
        with pytest.raises(ValueError, match="Night"):
            estimate_mnl(obs)

    def test_empty_observations_rejected(self):
        with pytest.raises(ValueError):
            estimate_mnl([])

    def test_separation_detected(self):
        rng = np.random.default_rng(23)
        attrs = random_attrs(rng, 400)
        chosen = ["Morning" if a.commodity == "AGR" else "Night" for a in attrs]
        others = [i for i, a in enumerate(attrs) if a.commodity != "AGR"]
        chosen[others[0]] = "Midday"   # keep every alternative populated
        chosen[others[1]] = "Afternoon"
        spec = [Coefficient("ASC", a) for a in ("Morning", "Midday", "Afternoon")]
        spec.append(Coefficient("Agr", "Morning"))
        _, report = estimate_mnl(list(zip(attrs, chosen)), spec=spec, max_iter=50)
        assert any("Agr" in w for w in report.warnings)


class TestSerialization:
    def test_params_json_roundtrip(self):
        p = choice.default_params()
        q = ChoiceModelParams.from_json(p.to_json())
        assert p.values == q.values

    def test_observations_csv_roundtrip(self):
        rng = np.random.default_rng(2)
        attrs = random_attrs(rng, 30)
        chosen = choice.simulate_choices(choice.default_params(), attrs, 3)
        obs = list(zip(attrs, chosen))
        back = choice.observations_from_csv(choice.observations_to_csv(obs))
        assert back == obs
