"""Terminal gate as an M/M/S queue.

Analytic side: the Erlang-C expected queue wait, evaluated quasi-stationarily
per slot with the slot's arrival rate.  Simulation side: a FIFO multi-server
discrete-event run used as the non-stationary reference, for calibration
against observed departure profiles, and for validating the analytic formula.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from portslot import kernels


class UnstableQueueError(ValueError):
    """Arrival rate at or above total service capacity (a = lambda/mu >= S)."""


def mms_wait_time(lam: float, mu: float, n_servers: int) -> float:
    """Expected time in queue (hours) for an M/M/S system.

    Uses the Erlang-C form  T = C(S, a) / (mu * (S - a))  with
    a = lambda / mu, which at S=1 reduces to lambda / (mu * (mu - lambda)).
    """
    if mu <= 0:
        raise ValueError("service rate must be positive")
    if n_servers < 1 or int(n_servers) != n_servers:
        raise ValueError("server count must be a positive integer")
    if lam < 0:
        raise ValueError("arrival rate must be nonnegative")
    if lam == 0:
        return 0.0
    S = int(n_servers)
    a = lam / mu
    if a >= S:
        raise UnstableQueueError(f"unstable queue: lambda/mu = {a:.4g} >= S = {S}")
    # accumulate a^n/n! iteratively to stay finite for any practical S
    term = 1.0
    total = 1.0
    for n in range(1, S):
        term *= a / n
        total += term
    tail = term * a / (S - a)          # a^S / ((S-1)! (S-a))
    erlang_c = tail / (total + tail)   # probability of waiting
    return erlang_c / (mu * (S - a))


@dataclass
class QueueStats:
    """Per-slot analytic queue statistics."""

    wait_hours: np.ndarray        # T_t
    queue_length: np.ndarray      # N_t = lambda_t * T_t
    departures: np.ndarray        # ETD_t

    def waiting_cost(self, idle_cost: float) -> np.ndarray:
        return waiting_cost(self.queue_length, idle_cost)


def waiting_cost(queue_length, idle_cost: float):
    """Waiting cost per slot in euros: idle cost times mean number waiting."""
    n = np.asarray(queue_length, dtype=np.float64)
    if (n < 0).any():
        raise ValueError("queue length must be nonnegative")
    if idle_cost <= 0:
        raise ValueError("idle cost must be positive")
    return idle_cost * n


def queue_stats(arrivals_per_slot, mu: float, cranes_per_slot, slot_width_hours: float = 1.0,
                on_unstable: str = "raise", penalty_wait_hours: float = 24.0) -> QueueStats:
    """Quasi-stationary per-slot evaluation of the gate queue.

    Each slot is treated as a stationary M/M/S system at that slot's rate.
    Departures equal arrivals within the slot under quasi-stationarity.
    ``on_unstable``: "raise" reports the first saturated slot, "penalty"
    substitutes a large finite wait so search can cross infeasible regions.
    """
    lam = np.asarray(arrivals_per_slot, dtype=np.float64) / slot_width_hours
    cranes = np.asarray(cranes_per_slot)
    if lam.shape != cranes.shape:
        raise ValueError("arrival profile and crane vector must align")
    waits = np.empty_like(lam)
    for t in range(lam.shape[0]):
        try:
            waits[t] = mms_wait_time(lam[t], mu, int(cranes[t]))
        except UnstableQueueError:
            if on_unstable == "penalty":
                waits[t] = penalty_wait_hours
            else:
                raise UnstableQueueError(
                    f"slot {t}: lambda = {lam[t]:.4g}/h saturates {int(cranes[t])} lanes "
                    f"at mu = {mu:.4g}") from None
    n_wait = lam * waits
    etd = np.asarray(arrivals_per_slot, dtype=np.float64).copy()
    return QueueStats(wait_hours=waits, queue_length=n_wait, departures=etd)


# ---------------------------------------------------------------------------
# discrete-event simulation


@dataclass
class DesResult:
    arrivals: np.ndarray
    waits: np.ndarray
    departures: np.ndarray

    @property
    def mean_wait(self) -> float:
        return float(self.waits.mean()) if self.waits.size else 0.0

    def slot_counts(self, n_slots: int, slot_width_hours: float = 1.0,
                    clip: bool = True) -> np.ndarray:
        """Departure counts per slot; events past the horizon fold into the
        last slot when ``clip`` is set."""
        idx = np.floor(self.departures / slot_width_hours).astype(np.int64)
        if clip:
            idx = np.clip(idx, 0, n_slots - 1)
            return np.bincount(idx, minlength=n_slots).astype(np.float64)
        n_ext = max(n_slots, int(idx.max()) + 1 if idx.size else n_slots)
        return np.bincount(idx, minlength=n_ext).astype(np.float64)

    def slot_mean_waits(self, n_slots: int, slot_width_hours: float = 1.0) -> np.ndarray:
        idx = np.clip(np.floor(self.arrivals / slot_width_hours).astype(np.int64), 0, n_slots - 1)
        sums = np.bincount(idx, weights=self.waits, minlength=n_slots)
        counts = np.bincount(idx, minlength=n_slots)
        out = np.zeros(n_slots)
        mask = counts > 0
        out[mask] = sums[mask] / counts[mask]
        return out


def poisson_arrivals(rate_per_slot, slot_width_hours: float, seed: int) -> np.ndarray:
    """Arrival times of a piecewise-stationary Poisson process over the slots."""
    rng = np.random.default_rng(seed)
    rates = np.asarray(rate_per_slot, dtype=np.float64)
    times = []
    for t, lam in enumerate(rates):
        n = rng.poisson(lam * slot_width_hours)
        if n:
            times.append(t * slot_width_hours + rng.random(n) * slot_width_hours)
    if not times:
        return np.zeros(0)
    return np.sort(np.concatenate(times))


def profile_arrivals(counts_per_slot, slot_width_hours: float, seed: int) -> np.ndarray:
    """Exact per-slot arrival counts placed uniformly at random within slots."""
    rng = np.random.default_rng(seed)
    times = []
    for t, c in enumerate(np.asarray(counts_per_slot)):
        c = int(round(float(c)))
        if c > 0:
            times.append(t * slot_width_hours + rng.random(c) * slot_width_hours)
    if not times:
        return np.zeros(0)
    return np.sort(np.concatenate(times))


def des_simulate(arrivals, mu: float, n_servers: int, seed: int,
                 min_service_hours: float = 0.0,
                 fixed_service_hours: float | None = None) -> DesResult:
    """FIFO multi-server simulation over explicit arrival times.

    Service times are exponential with rate ``mu``, optionally truncated
    below at ``min_service_hours`` (gates do not realistically clear a truck
    faster than that).  ``fixed_service_hours`` replaces the draw entirely,
    for deterministic tests.  Every arrival is served to completion.
    """
    t_arr = np.ascontiguousarray(arrivals, dtype=np.float64)
    if t_arr.size and (np.diff(t_arr) < 0).any():
        raise ValueError("arrival events must be time-ordered")
    if fixed_service_hours is not None:
        services = np.full(t_arr.shape, float(fixed_service_hours))
    else:
        if mu <= 0:
            raise ValueError("service rate must be positive")
        rng = np.random.default_rng(seed)
        services = rng.exponential(1.0 / mu, size=t_arr.shape)
        if min_service_hours > 0:
            services = np.maximum(services, min_service_hours)
    waits, departures = kernels.serve_fifo(t_arr, services, int(n_servers))
    return DesResult(arrivals=t_arr, waits=waits, departures=departures)


# ---------------------------------------------------------------------------
# calibration


@dataclass
class GateFit:
    """Calibration result for one terminal gate."""

    mu: float
    n_servers: int
    mse: float
    r_squared: float
    t_stat: float
    p_value: float

    def to_dict(self) -> dict:
        return {"mu": self.mu, "s": self.n_servers, "mse": self.mse,
                "r_squared": self.r_squared, "t_stat": self.t_stat,
                "p_value": self.p_value}


def _golden_min(f, lo: float, hi: float, tol: float = 1e-3, max_iter: int = 60):
    """Golden-section minimum of a unimodal scalar function on [lo, hi]."""
    phi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = float(lo), float(hi)
    c = b - phi * (b - a)
    d = a + phi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if abs(b - a) < tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = f(d)
    x = (a + b) / 2.0
    return x, f(x)


def simulate_departure_profile(arrival_counts, mu: float, n_servers: int, seed: int,
                               replications: int = 3, min_service_hours: float = 1.0 / 3.0,
                               slot_width_hours: float = 1.0) -> np.ndarray:
    """Mean simulated departure counts per slot for a candidate (mu, S)."""
    counts = np.asarray(arrival_counts, dtype=np.float64)
    n_slots = counts.shape[0]
    acc = np.zeros(n_slots)
    for r in range(replications):
        t_arr = profile_arrivals(counts, slot_width_hours, seed + 7919 * r)
        res = des_simulate(t_arr, mu, n_servers, seed + 104729 * r,
                           min_service_hours=min_service_hours)
        acc += res.slot_counts(n_slots, slot_width_hours)
    return acc / replications


def calibrate_gate(observed_arrivals, observed_departures,
                   mu_bounds: tuple[float, float] = (0.5, 3.0),
                   s_bounds: tuple[int, int] = (1, 8),
                   seed: int = 0, replications: int = 16,
                   min_service_hours: float = 1.0 / 3.0,
                   slot_width_hours: float = 0.25) -> GateFit:
    """Least-squares fit of (mu, S) to an observed average day.

    Grid over integer server counts with a golden-section search over the
    service rate for each, minimizing the mean squared difference between
    simulated and observed departure profiles (common random numbers keep
    the objective deterministic).  Quarter-hour profiles are the default:
    hourly departure counts only pin total capacity S*mu, while the
    within-hour departure lag at light load separates mu from S.  The upper
    service-rate bound reflects the minimum handling time floor.
    """
    arr = np.asarray(observed_arrivals, dtype=np.float64)
    dep = np.asarray(observed_departures, dtype=np.float64)
    if arr.shape != dep.shape:
        raise ValueError("arrival and departure profiles must align")
    if not dep.any():
        raise ValueError("degenerate data: observed departures are all zero")
    s_lo, s_hi = int(s_bounds[0]), int(s_bounds[1])
    if s_lo > s_hi or mu_bounds[0] >= mu_bounds[1]:
        raise ValueError("empty calibration bounds")

    def mse_for(mu: float, s: int) -> float:
        sim = simulate_departure_profile(arr, mu, s, seed, replications,
                                         min_service_hours, slot_width_hours)
        return float(np.mean((sim - dep) ** 2))

    best = None
    for s in range(s_lo, s_hi + 1):
        mu_star, val = _golden_min(lambda m: mse_for(m, s), *mu_bounds)
        if best is None or val < best[2]:
            best = (mu_star, s, val)
    mu_star, s_star, mse = best
    sim = simulate_departure_profile(arr, mu_star, s_star, seed, replications,
                                     min_service_hours, slot_width_hours)
    ss_res = float(np.sum((dep - sim) ** 2))
    ss_tot = float(np.sum((dep - dep.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    if np.allclose(sim, dep):
        t_stat, p_value = 0.0, 1.0
    else:
        t_stat, p_value = stats.ttest_rel(sim, dep)
    return GateFit(mu=float(mu_star), n_servers=int(s_star), mse=mse,
                   r_squared=r2, t_stat=float(t_stat), p_value=float(p_value))
