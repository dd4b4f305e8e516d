"""Carrier pickup-window preferences as a multinomial logit model.

Utilities are linear in observable tour attributes; the base alternative is
Night with all of its coefficients fixed at zero.  Road delays toward the
port and toward the hinterland enter as generic coefficients shared by the
three non-base windows.  Estimation is maximum likelihood by gradient
ascent with a backtracking line search; standard errors come from the
inverse observed information at the optimum.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from portslot.domain import TourAttributes

ALTERNATIVES = ("Morning", "Midday", "Afternoon", "Night")
BASE_ALTERNATIVE = "Night"
GENERIC = "*"

# labels used in exported models; attribute values map onto these
COMMODITY_LABELS = {"AGR": "Agr", "Chem": "Chem", "Fert": "Fert", "Food": "Food",
                    "Iron": "Iron", "Miss": "Miss", "Ores": "Ores", "Pet": "Petro",
                    "RawMin": "RawMin", "SolMin": "SolMinFu"}
TYPE_LABELS = {"GP": "GP", "RE": "RE", "CC": "CC", "TC": "TC"}
WEIGHT_LABELS = {"Heavy": "HeavyWeight", "Light": "LightWeight", "Empty": "Empty"}
LENGTH_LABELS = {"20ft": "Length_20ft", "40ft": "Length_40ft"}
VESSEL_LABELS = {"Morning": "Vessel_Mor", "Midday": "Vessel_Mid", "Afternoon": "Vessel_Aft"}


def attribute_features(attrs: TourAttributes) -> dict[str, float]:
    """Label -> value map of the active features of one observation."""
    feats = {
        COMMODITY_LABELS[attrs.commodity]: 1.0,
        TYPE_LABELS[attrs.container_type]: 1.0,
        LENGTH_LABELS[attrs.length]: 1.0,
        WEIGHT_LABELS[attrs.weight_class]: 1.0,
        "Delay_Port": float(attrs.delay_port),
        "Delay_Hint": float(attrs.delay_hint),
    }
    if attrs.vessel_window is not None:
        feats[VESSEL_LABELS[attrs.vessel_window]] = 1.0
    return feats


@dataclass(frozen=True)
class Coefficient:
    """One utility coefficient: a feature label tied to an alternative.

    ``alternative`` is "*" for generic coefficients shared by all non-base
    alternatives (the delay terms).
    """

    name: str
    alternative: str


@dataclass
class ChoiceModelParams:
    """Sparse coefficient table; anything absent is fixed at zero."""

    values: dict[Coefficient, float] = field(default_factory=dict)

    def get(self, name: str, alternative: str) -> float:
        v = self.values.get(Coefficient(name, alternative))
        if v is None and name in ("Delay_Port", "Delay_Hint"):
            v = self.values.get(Coefficient(name, GENERIC))
        return 0.0 if v is None else v

    def to_json(self) -> str:
        doc = {"alternatives": list(ALTERNATIVES), "base": BASE_ALTERNATIVE,
               "coefficients": [
                   {"name": c.name, "alternative": c.alternative, "value": v}
                   for c, v in sorted(self.values.items(),
                                      key=lambda kv: (kv[0].alternative, kv[0].name))]}
        return json.dumps(doc, indent=2)

    @staticmethod
    def from_json(text: str) -> "ChoiceModelParams":
        doc = json.loads(text)
        return ChoiceModelParams(values={
            Coefficient(c["name"], c["alternative"]): float(c["value"])
            for c in doc["coefficients"]})


def utility(attrs: TourAttributes, window: str, params: ChoiceModelParams) -> float:
    """Deterministic utility of a pickup window; zero for the base window."""
    if window not in ALTERNATIVES:
        raise KeyError(f"unknown window {window!r}")
    if window == BASE_ALTERNATIVE:
        return 0.0
    v = params.get("ASC", window)
    for name, value in attribute_features(attrs).items():
        if name in ("Delay_Port", "Delay_Hint"):
            v += params.get(name, GENERIC) * value
        else:
            v += params.get(name, window) * value
    return v


def utilities(attrs: TourAttributes, params: ChoiceModelParams) -> np.ndarray:
    return np.array([utility(attrs, w, params) for w in ALTERNATIVES])


def softmax(v: np.ndarray) -> np.ndarray:
    z = np.exp(v - np.max(v, axis=-1, keepdims=True))
    return z / z.sum(axis=-1, keepdims=True)


def choice_prob(attrs: TourAttributes, params: ChoiceModelParams) -> np.ndarray:
    """Probability of each window in ALTERNATIVES order; sums to one."""
    return softmax(utilities(attrs, params))


def planning_cost(probabilities, eta: float) -> np.ndarray:
    """Scheduling cost per window: eta * (1 - P); low where preference is high."""
    p = np.asarray(probabilities, dtype=np.float64)
    if eta <= 0:
        raise ValueError("eta must be positive")
    return eta * (1.0 - p)


def batch_choice_probs(params: ChoiceModelParams,
                       attrs_list: list[TourAttributes]) -> np.ndarray:
    """(n, 4) window probabilities for many observations at once."""
    spec = sorted(params.values, key=lambda c: (c.alternative, c.name))
    x, _ = _design_tensor([(a, BASE_ALTERNATIVE) for a in attrs_list], spec)
    beta = np.array([params.values[c] for c in spec])
    return softmax(x @ beta)


def simulate_choices(params: ChoiceModelParams, attrs_list: list[TourAttributes],
                     seed: int) -> list[str]:
    """Sample one chosen window per observation from the model."""
    p = batch_choice_probs(params, attrs_list)
    rng = np.random.default_rng(seed)
    draws = (rng.random(len(attrs_list))[:, None] > np.cumsum(p, axis=1)).sum(axis=1)
    return [ALTERNATIVES[i] for i in draws]


# ---------------------------------------------------------------------------
# default specification

# Active cells of the default model.  Within each fully-present categorical
# group one level per group is left out as the reference (type TC, weight
# Light, length 40ft, commodity Miss) so the design has full rank alongside
# the alternative constants.
_MOR = [("Agr", 0.321), ("Chem", -0.101), ("Ores", 0.144), ("RawMin", 0.0891),
        ("SolMinFu", -0.0838), ("GP", -0.292), ("RE", -0.211), ("CC", -0.352),
        ("Vessel_Mor", -0.233), ("Empty", 0.156), ("HeavyWeight", 0.0638),
        ("Length_20ft", -0.0563), ("ASC", -0.251)]
_MID = [("Agr", -0.128), ("Chem", 0.111), ("Fert", 0.295), ("Food", 0.411),
        ("Iron", 0.278), ("Ores", 0.263), ("Petro", 0.197), ("RawMin", 0.0935),
        ("SolMinFu", 0.2), ("GP", 0.312), ("RE", 0.194), ("CC", 0.425),
        ("Vessel_Mor", 0.385), ("Vessel_Mid", 0.425), ("Empty", 0.138),
        ("HeavyWeight", 0.359), ("Length_20ft", 0.425), ("ASC", -0.251)]
_AFT = [("Agr", -0.147), ("Fert", 0.232), ("Food", 0.275), ("Iron", 0.356),
        ("Miss", 0.161), ("Ores", -0.166), ("Petro", 0.089), ("GP", -0.0808),
        ("RE", -0.104), ("Vessel_Mor", 0.53), ("Vessel_Mid", 0.771),
        ("Vessel_Aft", 0.619), ("Empty", 0.0979), ("HeavyWeight", 0.0826),
        ("Length_20ft", 0.0758), ("ASC", 0.0)]
_GEN = [("Delay_Port", -0.483), ("Delay_Hint", -1.14)]


def default_spec() -> list[Coefficient]:
    cells = [Coefficient(n, "Morning") for n, _ in _MOR]
    cells += [Coefficient(n, "Midday") for n, _ in _MID]
    cells += [Coefficient(n, "Afternoon") for n, _ in _AFT]
    cells += [Coefficient(n, GENERIC) for n, _ in _GEN]
    return cells


def default_params() -> ChoiceModelParams:
    """Published-magnitude coefficients; the synthetic world's ground truth."""
    values: dict[Coefficient, float] = {}
    for alt, items in (("Morning", _MOR), ("Midday", _MID), ("Afternoon", _AFT)):
        for n, v in items:
            values[Coefficient(n, alt)] = v
    for n, v in _GEN:
        values[Coefficient(n, GENERIC)] = v
    return ChoiceModelParams(values=values)


# ---------------------------------------------------------------------------
# estimation


@dataclass
class CoefficientEstimate:
    name: str
    alternative: str
    estimate: float
    std_error: float
    t_value: float


@dataclass
class EstimationReport:
    log_likelihood: float
    ll_constants: float
    rho_squared: float
    coefficients: list[CoefficientEstimate]
    sample_size: int
    converged: bool
    iterations: int
    ll_path: list[float]
    warnings: list[str] = field(default_factory=list)


def _design_tensor(observations, spec: list[Coefficient]):
    n = len(observations)
    k = len(spec)
    x = np.zeros((n, 4, k))
    y = np.zeros(n, dtype=np.int64)
    col = {c: i for i, c in enumerate(spec)}
    nonbase = [ALTERNATIVES.index(a) for a in ALTERNATIVES if a != BASE_ALTERNATIVE]
    for i, (attrs, chosen) in enumerate(observations):
        y[i] = ALTERNATIVES.index(chosen)
        feats = attribute_features(attrs)
        feats["ASC"] = 1.0
        for name, value in feats.items():
            generic = Coefficient(name, GENERIC)
            if generic in col:
                for t in nonbase:
                    x[i, t, col[generic]] = value
                continue
            for t in nonbase:
                c = Coefficient(name, ALTERNATIVES[t])
                if c in col:
                    x[i, t, col[c]] = value
    return x, y


def _loglik_and_grad(beta, x, y):
    v = x @ beta                                   # (n, 4)
    vmax = v.max(axis=1, keepdims=True)
    lse = vmax[:, 0] + np.log(np.exp(v - vmax).sum(axis=1))
    ll = float(v[np.arange(len(y)), y].sum() - lse.sum())
    p = softmax(v)
    resid = -p
    resid[np.arange(len(y)), y] += 1.0             # (y_nt - P_nt)
    grad = np.einsum("nt,ntk->k", resid, x)
    return ll, grad, p


def _hessian(beta, x):
    v = x @ beta
    p = softmax(v)
    xbar = np.einsum("nt,ntk->nk", p, x)
    h = -(np.einsum("nt,ntk,ntl->kl", p, x, x) - np.einsum("nk,nl->kl", xbar, xbar))
    return h


def _information_diagonal(beta, x):
    """Diagonal of the observed information; used to precondition ascent."""
    v = x @ beta
    p = softmax(v)
    xbar = np.einsum("nt,ntk->nk", p, x)
    d = np.einsum("nt,ntk->k", p, x ** 2) - np.einsum("nk,nk->k", xbar, xbar)
    return np.maximum(d, 1e-8 * max(1.0, d.max()))


def _constants_only_ll(y: np.ndarray) -> float:
    n = len(y)
    counts = np.bincount(y, minlength=4).astype(np.float64)
    shares = counts / n
    nonzero = counts > 0
    return float((counts[nonzero] * np.log(shares[nonzero])).sum())


def _separation_warnings(x, y, spec):
    warnings = []
    for k, c in enumerate(spec):
        if c.name in ("Delay_Port", "Delay_Hint", "ASC"):
            continue
        alt = ALTERNATIVES.index(c.alternative) if c.alternative != GENERIC else None
        if alt is None:
            continue
        active = x[:, alt, k] != 0
        if not active.any():
            warnings.append(f"{c.name}/{c.alternative}: never active in the sample")
            continue
        chosen = y[active] == alt
        if chosen.all() or not chosen.any():
            warnings.append(f"{c.name}/{c.alternative}: perfectly separates the choice")
    return warnings


def estimate_mnl(observations, spec: list[Coefficient] | None = None,
                 max_iter: int = 500, gtol_per_obs: float = 1e-5
                 ) -> tuple[ChoiceModelParams, EstimationReport]:
    """Maximum-likelihood fit of the window-choice model.

    ``observations`` is a sequence of (TourAttributes, chosen window).
    Ascends the log likelihood with Barzilai-Borwein scaled gradient steps
    safeguarded by a backtracking (Armijo) line search; accepted steps never
    decrease the likelihood.
    """
    obs = list(observations)
    if not obs:
        raise ValueError("no observations")
    spec = list(spec) if spec is not None else default_spec()
    x, y = _design_tensor(obs, spec)
    counts = np.bincount(y, minlength=4)
    if (counts == 0).any():
        missing = [ALTERNATIVES[i] for i in np.nonzero(counts == 0)[0]]
        raise ValueError(f"no observations for alternative(s): {', '.join(missing)}")
    warnings = _separation_warnings(x, y, spec)

    n = len(obs)
    beta = np.zeros(len(spec))
    ll, grad, _ = _loglik_and_grad(beta, x, y)
    ll_path = [ll]
    gtol = gtol_per_obs * n
    precond = _information_diagonal(beta, x)
    step = 1.0
    prev_beta = prev_dir = None
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        if np.abs(grad).max() <= gtol:
            converged = True
            break
        direction = grad / precond
        if prev_beta is not None:
            s = beta - prev_beta
            dg = direction - prev_dir
            denom = float(s @ dg)
            if np.isfinite(denom) and denom < 0:
                step = float(s @ s) / (-denom)
            step = min(max(step, 1e-8), 1e4)
        accepted = False
        slope = float(grad @ direction)
        trial = step
        for _ in range(60):
            cand = beta + trial * direction
            ll_new, grad_new, _ = _loglik_and_grad(cand, x, y)
            if np.isfinite(ll_new) and ll_new >= ll + 1e-4 * trial * slope:
                accepted = True
                break
            trial *= 0.5
        if not accepted:
            break
        prev_beta, prev_dir = beta, direction
        beta, ll, grad = cand, ll_new, grad_new
        ll_path.append(ll)
        if it % 10 == 0:
            precond = _information_diagonal(beta, x)
    if not converged and np.abs(grad).max() <= gtol:
        converged = True

    hess = _hessian(beta, x)
    neg_h = -hess
    singular = False
    try:
        cov = np.linalg.inv(neg_h)
        if not np.all(np.isfinite(cov)) or np.any(np.diag(cov) <= 0):
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        singular = True
        cov = np.linalg.pinv(neg_h)
        warnings.append("observed information is singular; "
                        "standard errors use a pseudo-inverse")
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))

    ll0 = _constants_only_ll(y)
    rho_sq = 1.0 - ll / ll0 if ll0 != 0 else 0.0
    estimates = [
        CoefficientEstimate(c.name, c.alternative, float(b), float(s_),
                            float(b / s_) if s_ > 0 else float("nan"))
        for c, b, s_ in zip(spec, beta, se)]
    params = ChoiceModelParams(values={c: float(b) for c, b in zip(spec, beta)})
    report = EstimationReport(
        log_likelihood=ll, ll_constants=ll0, rho_squared=float(rho_sq),
        coefficients=estimates, sample_size=n, converged=converged and not singular,
        iterations=it, ll_path=ll_path, warnings=warnings)
    return params, report


# ---------------------------------------------------------------------------
# observation CSV

OBSERVATION_CSV_HEADER = ("commodity,container_type,length,weight_class,"
                          "vessel_window,delay_port,delay_hint,chosen_window")


def observations_to_csv(observations) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(OBSERVATION_CSV_HEADER.split(","))
    for attrs, chosen in observations:
        w.writerow([attrs.commodity, attrs.container_type, attrs.length,
                    attrs.weight_class, attrs.vessel_window or "",
                    repr(attrs.delay_port), repr(attrs.delay_hint), chosen])
    return buf.getvalue()


def observations_from_csv(text: str):
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        attrs = TourAttributes(
            commodity=row["commodity"], container_type=row["container_type"],
            length=row["length"], weight_class=row["weight_class"],
            vessel_window=row["vessel_window"] or None,
            delay_port=float(row["delay_port"]), delay_hint=float(row["delay_hint"]))
        out.append((attrs, row["chosen_window"]))
    return out
