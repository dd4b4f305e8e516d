"""The rolling planning loop and stakeholder accounting.

One simulated day: synthesize the port's history, forecast the operation
day, then walk the hourly planning windows chronologically.  Each window
draws its slot requests, prices them with the choice model, evaluates gate
queues and road traffic, searches reassignments plus crane allocations,
and commits one solution.  The base case is the same walk with every
request kept at its requested slot and baseline cranes, so the final
report is a clean like-for-like comparison.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from datetime import datetime, timedelta

import numpy as np

from portslot import choice, datagen, forecast, optimizer
from portslot.choice import ChoiceModelParams
from portslot.datagen import (BACKGROUND_HOUR_SHAPE, INBOUND_HOUR_SHAPE,
                              PickupLatencyModel, VesselCallProcess, draw_requests,
                              gen_container_history, gen_traffic_history, hourly_signals)
from portslot.domain import (UTC, ContainerRecord, CostVector, GaConfig, ParetoSolution,
                             Scenario, SlotRequest, TimeSlot, TourAttributes,
                             hour_to_window, operation_day_slots, scenario_to_json,
                             validate_scenario)
from portslot.gate import queue_stats
from portslot.optimizer import (OptimizationContext, ParetoFront, TerminalContext,
                                crane_unit_cost, identity_solution, nsga2_run,
                                select_solution, update_eta)
from portslot.traffic import LinkGraph, TrafficAssessor, default_network, delay_profiles

START = datetime(2024, 1, 1, tzinfo=UTC)
MIN_LEAD_HOURS = 3


# ---------------------------------------------------------------------------
# world assembly


@dataclass
class TerminalWorld:
    name: str
    mu: float
    s_base: np.ndarray                    # (24,) baseline crane schedule
    s_max: int
    crane_cost: float
    eta0: np.ndarray                      # (24,) forecast arrivals, operation day
    containers: list[ContainerRecord]     # due within working hours, request pool
    window_of: dict[str, int]             # container id -> planning window hour


def baseline_crane_schedule(eta: np.ndarray, mu: float, crane_cost: float,
                            idle_cost: float, s_max: int,
                            working: np.ndarray,
                            penalty_wait_hours: float = 24.0) -> np.ndarray:
    """Euro-optimal staffing per slot for the forecast demand.

    Working slots minimize crane cost plus expected waiting cost; off-hour
    slots (whose cranes are outside the costed window) get the smallest
    allocation that keeps utilization at or below 0.9.
    """
    from portslot.gate import UnstableQueueError, mms_wait_time

    out = np.ones(24, dtype=np.int64)
    for t in range(24):
        lam = float(eta[t])
        if not working[t]:
            s = int(np.ceil(lam / (0.9 * mu))) if lam > 0 else 1
            out[t] = min(max(s, 1), s_max - 1)
            continue
        best_cost, best_s, best_stable = np.inf, 1, False
        for s in range(1, s_max):
            try:
                wait = mms_wait_time(lam, mu, s)
                stable = True
            except UnstableQueueError:
                wait = penalty_wait_hours
                stable = False
            cost = crane_cost * s + idle_cost * lam * wait
            if cost < best_cost - 1e-12:
                best_cost, best_s, best_stable = cost, s, stable
        # a gate drowning at any staffing level still runs every lane
        out[t] = best_s if best_stable else s_max - 1
    return out


@dataclass
class World:
    scenario: Scenario
    op_day_start: datetime
    planning_day_start: datetime
    slots: list[TimeSlot]
    terminals: list[TerminalWorld]
    assessor: TrafficAssessor
    graph: LinkGraph
    choice_params: ChoiceModelParams
    delay_port: np.ndarray                # (24,) hours/km
    delay_hint: np.ndarray
    scenario_hash: str


def _scenario_hash(scenario: Scenario, seed: int) -> str:
    text = scenario_to_json(scenario) + f"|seed={seed}"
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _pickup_weights(cfg) -> np.ndarray:
    base = (np.asarray(cfg.pickup_hour_weights, dtype=np.float64)
            if cfg.pickup_hour_weights else datagen.DEFAULT_PICKUP_HOUR_WEIGHTS.copy())
    if cfg.peak_hours and cfg.peak_boost > 0:
        base = base.copy()
        for h in cfg.peak_hours:
            base[h] *= 1.0 + cfg.peak_boost
    return base


_WINDOW_HOUR_SETS = {
    "Morning": list(range(5, 10)), "Midday": list(range(10, 15)),
    "Afternoon": list(range(15, 21)), "Night": [21, 22, 23, 0, 1, 2, 3, 4],
}


def _reshape_pickups(records: list[ContainerRecord], params: ChoiceModelParams,
                     working_hours: tuple[int, int], hour_weights: np.ndarray,
                     rng: np.random.Generator) -> list[ContainerRecord]:
    """Redraw each container's pickup hour from the window-choice model.

    The pickup day stays as the latency model produced it; the window comes
    from the carrier's preference probabilities and the hour within the
    window (clipped to working hours where possible) from the hour
    propensity profile.  This makes requested slots consistent with the
    preferences the optimizer prices.
    """
    from dataclasses import replace
    from datetime import timedelta

    wh_lo, wh_hi = working_hours
    attrs = [TourAttributes(commodity=r.commodity, container_type=r.container_type,
                            length=r.length, weight_class=r.weight_class)
             for r in records]
    probs = choice.batch_choice_probs(params, attrs)
    # sharpened draw: most carriers sit at their preferred window, so being
    # moved away from it genuinely costs them planning utility
    probs = probs ** 2
    probs /= probs.sum(axis=1, keepdims=True)
    draws = (rng.random(len(records))[:, None] > np.cumsum(probs, axis=1)).sum(axis=1)
    out = []
    for r, widx in zip(records, draws):
        window = choice.ALTERNATIVES[int(widx)]
        hours = [h for h in _WINDOW_HOUR_SETS[window] if wh_lo <= h < wh_hi]
        if not hours:
            hours = _WINDOW_HOUR_SETS[window]
        w = hour_weights[hours]
        w = w / w.sum()
        hour = int(rng.choice(hours, p=w))
        day_start = r.pickup.replace(hour=0, minute=0, second=0, microsecond=0)
        pickup = day_start + timedelta(hours=hour, minutes=float(rng.uniform(0, 60)))
        floor = r.vessel_arrival + timedelta(hours=3)
        if pickup < floor:
            pickup = floor
        out.append(replace(r, pickup=pickup))
    return out


def build_world(scenario: Scenario, seed: int,
                choice_params: ChoiceModelParams | None = None) -> World:
    problems = validate_scenario(scenario)
    if problems:
        raise ValueError("invalid scenario: " + "; ".join(map(str, problems)))
    root = np.random.SeedSequence(seed)
    term_seeds = root.spawn(len(scenario.terminals))
    traffic_seed, window_seed, inbound_seed = [s.generate_state(1)[0] % (2 ** 31)
                                               for s in root.spawn(3)]
    offset = scenario.planning_offset_days
    op_day = scenario.history_days
    horizon = op_day + 1
    op_day_start = START + timedelta(days=op_day)
    planning_day_start = op_day_start - timedelta(days=offset)
    lookup = forecast.build_lookup_window(offset + 1)
    wh_lo, wh_hi = scenario.working_hours
    weights = _pickup_weights(scenario.demand)
    win_rng = np.random.default_rng(window_seed)
    choice_params = choice_params or choice.default_params()

    terminals: list[TerminalWorld] = []
    for k, tc in enumerate(scenario.terminals):
        dem = scenario.demand
        process = VesselCallProcess.from_config(dem)
        process.calls_per_day = dem.vessel_calls_per_day * tc.demand_share
        latency = PickupLatencyModel.from_config(dem)
        gen_seed = int(term_seeds[k].generate_state(1)[0] % (2 ** 31))
        records = gen_container_history(
            process, latency, days=horizon, seed=gen_seed,
            start=START, terminal=tc.name, pickup_hour_weights=weights,
            type_weights=dem.type_weights or None,
            commodity_weights=dem.commodity_weights or None)
        records = _reshape_pickups(records, choice_params, scenario.working_hours,
                                   weights, np.random.default_rng(gen_seed + 1))
        containers_sig, trucks_sig = hourly_signals(records, START, horizon)
        if scenario.forecast_source == "actual":
            eta0 = trucks_sig[op_day * 24:(op_day + 1) * 24].copy()
        else:
            eta0 = forecast.ha_baseline(trucks_sig, lookup, op_day)
        due = [r for r in records
               if r.pickup >= op_day_start
               and r.pickup < op_day_start + timedelta(days=1)
               and wh_lo <= r.pickup.hour < wh_hi]
        window_of: dict[str, int] = {}
        for r in due:
            if scenario.request_share < 1.0 and win_rng.random() > scenario.request_share:
                continue
            last = wh_hi - 1
            if offset == 0:
                last = min(last, r.pickup.hour - MIN_LEAD_HOURS)
            if last < wh_lo:
                continue  # unreachable same-day slot: background demand only
            window_of[r.container_id] = int(win_rng.integers(wh_lo, last + 1))
        if tc.crane_benefit_eur is not None:
            cost = crane_unit_cost(scenario.costs.alpha, None,
                                   labor_cost=scenario.costs.labor_cost,
                                   crew_per_lane=scenario.costs.crew_per_lane,
                                   benefit=tc.crane_benefit_eur)
        else:
            peak_lam = float(eta0.max())
            stats = optimizer.PeakStats(lam=peak_lam, mu=tc.service_rate,
                                        s=tc.base_cranes)
            cost = crane_unit_cost(scenario.costs.alpha, stats,
                                   labor_cost=scenario.costs.labor_cost,
                                   crew_per_lane=scenario.costs.crew_per_lane,
                                   idle_cost=scenario.costs.idle_cost)
        working = np.zeros(24, dtype=bool)
        working[wh_lo:wh_hi] = True
        schedule = baseline_crane_schedule(eta0, tc.service_rate, cost,
                                           scenario.costs.idle_cost, tc.s_max, working)
        terminals.append(TerminalWorld(
            name=tc.name, mu=tc.service_rate, s_base=schedule, s_max=tc.s_max,
            crane_cost=cost, eta0=eta0, containers=due, window_of=window_of))

    graph = default_network(scenario.traffic)
    base_outflow = np.sum([t.eta0 for t in terminals], axis=0) \
        * scenario.traffic.uncalibrated_scale
    base_series = gen_traffic_history(graph, base_outflow, days=1, seed=traffic_seed,
                                      cfg=scenario.traffic, clip_overload=True)
    assessor = TrafficAssessor(
        graph=graph, base=base_series,
        etd_base=np.stack([t.eta0 for t in terminals]),
        cfg=scenario.traffic, scale=scenario.traffic.uncalibrated_scale,
        vot_passenger=scenario.costs.vot_passenger,
        vot_truck=scenario.costs.vot_truck)
    inbound = gen_traffic_history(graph, base_outflow, days=1, seed=inbound_seed,
                                  cfg=scenario.traffic, clip_overload=True,
                                  background_shape=INBOUND_HOUR_SHAPE)
    return World(
        scenario=scenario, op_day_start=op_day_start,
        planning_day_start=planning_day_start,
        slots=operation_day_slots(op_day_start), terminals=terminals,
        assessor=assessor, graph=graph,
        choice_params=choice_params,
        delay_port=delay_profiles(inbound, graph, scenario.traffic.ffs_truck),
        delay_hint=delay_profiles(base_series, graph, scenario.traffic.ffs_truck),
        scenario_hash=_scenario_hash(scenario, seed))


# ---------------------------------------------------------------------------
# planning state and windows


@dataclass
class WindowRecord:
    hour: int
    requests: list[SlotRequest]
    front: ParetoFront | None
    selected: ParetoSolution
    base_objectives: CostVector
    eta_floor: dict[str, np.ndarray]


@dataclass
class PlanningState:
    eta: dict[str, np.ndarray]
    cranes: dict[str, np.ndarray]
    committed: dict[str, int] = field(default_factory=dict)
    committed_requests: list[SlotRequest] = field(default_factory=list)
    history: list[WindowRecord] = field(default_factory=list)

    @staticmethod
    def initial(world: World) -> "PlanningState":
        return PlanningState(
            eta={t.name: t.eta0.copy() for t in world.terminals},
            cranes={t.name: t.s_base.copy() for t in world.terminals})


def _window_requests(world: World, t_p_hour: int) -> list[SlotRequest]:
    t_p = world.planning_day_start + timedelta(hours=t_p_hour)
    out: list[SlotRequest] = []
    for tw in world.terminals:
        pool = [c for c in tw.containers if tw.window_of.get(c.container_id) == t_p_hour]
        if not pool:
            continue
        out.extend(draw_requests(
            pool, t_p, count=len(pool), seed=0,
            working_hours=world.scenario.working_hours,
            delay_port_by_hour=world.delay_port, delay_hint_by_hour=world.delay_hint))
    return out


def _plan_cost_matrix(requests: list[SlotRequest], world: World) -> np.ndarray:
    eta_scale = world.scenario.costs.eta_scale
    window_index = [hour_to_window(h) for h in range(24)]
    costs = np.zeros((len(requests), 24))
    for i, r in enumerate(requests):
        p = choice.choice_prob(r.attributes, world.choice_params)
        by_window = dict(zip(choice.ALTERNATIVES, choice.planning_cost(p, eta_scale)))
        costs[i] = [by_window[window_index[h]] for h in range(24)]
    return costs


def build_window_context(state: PlanningState, world: World, t_p_hour: int,
                         requests: list[SlotRequest]) -> OptimizationContext:
    wh_lo, wh_hi = world.scenario.working_hours
    offset = world.scenario.planning_offset_days
    first_open = wh_lo if offset > 0 else max(wh_lo, t_p_hour + MIN_LEAD_HOURS)
    open_slots = np.array([h for h in range(wh_lo, wh_hi) if h >= first_open],
                          dtype=np.int64)
    working = np.zeros(24, dtype=bool)
    working[wh_lo:wh_hi] = True
    adjustable = np.zeros(24, dtype=bool)
    adjustable[open_slots] = True
    name_to_idx = {t.name: k for k, t in enumerate(world.terminals)}
    terminals = []
    for tw in world.terminals:
        req_counts = np.bincount(
            [r.requested_slot.index for r in requests if r.terminal == tw.name],
            minlength=24).astype(np.float64)
        eta = np.maximum(state.eta[tw.name], req_counts)  # forecast floor
        terminals.append(TerminalContext(
            name=tw.name, eta=eta, mu=tw.mu,
            cranes_base=state.cranes[tw.name].copy(),
            adjustable=adjustable.copy(), costed=working.copy(),
            s_max=tw.s_max, crane_cost=tw.crane_cost))
    return OptimizationContext(
        requests=requests,
        eligible=[open_slots.copy() for _ in requests],
        requested_slot=np.array([r.requested_slot.index for r in requests],
                                dtype=np.int64),
        request_terminal=np.array([name_to_idx[r.terminal] for r in requests],
                                  dtype=np.int64),
        terminals=terminals,
        plan_cost=_plan_cost_matrix(requests, world),
        idle_cost=world.scenario.costs.idle_cost,
        traffic=world.assessor)


def run_planning_window(state: PlanningState, t_p_hour: int, world: World,
                        policy: str = "MAX_MONETARY_GAIN",
                        ga: GaConfig | None = None,
                        on_generation=None
                        ) -> tuple[PlanningState, ParetoFront | None, ParetoSolution]:
    """One pass of the planning loop; returns the updated state, the front
    and the committed solution (identity when there is nothing to decide)."""
    wh_lo, wh_hi = world.scenario.working_hours
    if not (wh_lo <= t_p_hour < wh_hi):
        raise ValueError(f"planning window {t_p_hour} outside working hours")
    requests = _window_requests(world, t_p_hour)
    ctx = build_window_context(state, world, t_p_hour, requests)
    if not requests:
        selected = identity_solution(ctx)
        front = None
    elif policy == "IDENTITY":
        selected = identity_solution(ctx)
        front = None
    else:
        cfg = ga or world.scenario.ga
        cfg = GaConfig(population=cfg.population, generations=cfg.generations,
                       crossover_rate=cfg.crossover_rate, mutation_rate=cfg.mutation_rate,
                       pareto_fraction=cfg.pareto_fraction,
                       seed=cfg.seed * 1009 + t_p_hour)
        front = nsga2_run(ctx, cfg, on_generation=on_generation)
        scn = world.scenario
        selected = select_solution(
            front, policy,
            shift_friction_eur=scn.commit_margin_per_shift_eur,
            action_threshold_eur=scn.commit_threshold_eur)
    base_objectives = identity_solution(ctx).objectives
    new_state = PlanningState(
        eta=dict(state.eta), cranes=dict(state.cranes),
        committed=dict(state.committed),
        committed_requests=list(state.committed_requests),
        history=list(state.history))
    floor_snapshot = {}
    for k, tw in enumerate(world.terminals):
        floored = ctx.terminals[k].eta.copy()
        floor_snapshot[tw.name] = floored
        term_requests = [r for r in requests if r.terminal == tw.name]
        new_state.eta[tw.name] = update_eta(floored, term_requests, selected.assignment) \
            if term_requests else floored
        new_state.cranes[tw.name] = np.array(selected.cranes[tw.name], dtype=np.int64)
    for r in requests:
        new_state.committed[r.request_id] = selected.assignment[r.request_id]
    new_state.committed_requests.extend(requests)
    new_state.history.append(WindowRecord(
        hour=t_p_hour, requests=requests, front=front, selected=selected,
        base_objectives=base_objectives, eta_floor=floor_snapshot))
    return new_state, front, selected


def replay_eta(world: World, history: list[WindowRecord]) -> dict[str, np.ndarray]:
    """Recompute the final expected arrivals from the committed log alone."""
    eta = {t.name: t.eta0.copy() for t in world.terminals}
    for record in history:
        for tw in world.terminals:
            term_requests = [r for r in record.requests if r.terminal == tw.name]
            req_counts = np.bincount([r.requested_slot.index for r in term_requests],
                                     minlength=24).astype(np.float64)
            floored = np.maximum(eta[tw.name], req_counts)
            if term_requests:
                assignment = {r.request_id: record.selected.assignment[r.request_id]
                              for r in term_requests}
                floored = update_eta(floored, term_requests, assignment)
            eta[tw.name] = floored
    return eta


# ---------------------------------------------------------------------------
# day evaluation and reporting


@dataclass
class DayEvaluation:
    """Cost breakdown of one committed day (base or optimized)."""

    z1: float
    z2: float
    z3: float
    z4: float
    z2_per_terminal: dict[str, float]
    z3_per_terminal: dict[str, float]
    loss_per_corridor: dict[str, float]
    waits_per_terminal: dict[str, np.ndarray]
    eta_final: dict[str, np.ndarray]
    cranes_final: dict[str, np.ndarray]
    assignment: dict[str, int]
    requests: list[SlotRequest]
    plan_cost_of: dict[str, dict[int, float]]
    scenario_hash: str = ""


def _evaluate_day(world: World, state: PlanningState) -> DayEvaluation:
    wh_lo, wh_hi = world.scenario.working_hours
    idle = world.scenario.costs.idle_cost
    z1 = 0.0
    plan_cost_of: dict[str, dict[int, float]] = {}
    for record in state.history:
        pc = _plan_cost_matrix(record.requests, world)
        for i, r in enumerate(record.requests):
            slot = state.committed[r.request_id]
            z1 += float(pc[i, slot])
            plan_cost_of[r.request_id] = {h: float(pc[i, h]) for h in range(24)}
    z2_per = {}
    z3_per = {}
    waits_per = {}
    for tw in world.terminals:
        eta = state.eta[tw.name]
        cranes = state.cranes[tw.name]
        stats = queue_stats(eta, tw.mu, cranes, on_unstable="penalty")
        z2_per[tw.name] = float(idle * stats.queue_length.sum())
        z3_per[tw.name] = float(tw.crane_cost * cranes[wh_lo:wh_hi].sum())
        waits_per[tw.name] = stats.wait_hours
    etd = np.stack([state.eta[t.name] for t in world.terminals])
    loss = world.assessor.loss_for(etd)
    return DayEvaluation(
        z1=z1, z2=float(sum(z2_per.values())), z3=float(sum(z3_per.values())),
        z4=float(loss.sum()), z2_per_terminal=z2_per, z3_per_terminal=z3_per,
        loss_per_corridor=world.assessor.corridor_totals(loss),
        waits_per_terminal=waits_per,
        eta_final={k: v.copy() for k, v in state.eta.items()},
        cranes_final={k: v.copy() for k, v in state.cranes.items()},
        assignment=dict(state.committed),
        requests=list(state.committed_requests),
        plan_cost_of=plan_cost_of,
        scenario_hash=world.scenario_hash)


@dataclass
class DayReport:
    scenario_name: str
    seed: int
    scenario_hash: str
    terminal_gain: dict[str, float]
    trucking_gain: dict[str, float]
    traffic_gain: dict[str, float]
    terminal_gain_total: float
    trucking_gain_total: float
    traffic_gain_total: float
    carrier_disutility: float
    rescheduled_count: int
    rescheduled_share_pct: float
    productivity_hours: float
    waits_base: dict[str, list[float]]
    waits_optimized: dict[str, list[float]]
    shift_commodity_pct: dict[str, float]
    shift_container_type_pct: dict[str, float]
    eta_total: float
    etd_total: float
    total_gain_eur: float
    base_money_eur: float
    computation_time_s: float | None = None

    def to_json_obj(self, include_timing: bool = False) -> dict:
        doc = {
            "schema_version": "1",
            "scenario": self.scenario_name,
            "seed": self.seed,
            "scenario_hash": self.scenario_hash,
            "stakeholders": {
                "terminal_operator": {"total_eur": self.terminal_gain_total,
                                      "per_terminal": self.terminal_gain},
                "trucking_companies": {"total_eur": self.trucking_gain_total,
                                       "per_terminal": self.trucking_gain},
                "carrier_disutility": {"total": self.carrier_disutility,
                                       "unit": "unitless"},
                "traffic_system": {"total_eur": self.traffic_gain_total,
                                   "per_corridor": self.traffic_gain},
            },
            "total_gain_eur": self.total_gain_eur,
            "base_money_eur": self.base_money_eur,
            "rescheduled": {"count": self.rescheduled_count,
                            "share_pct": self.rescheduled_share_pct},
            "productivity_hours": self.productivity_hours,
            "waits": {"base": self.waits_base, "optimized": self.waits_optimized},
            "shift_shares": {"commodity_pct": self.shift_commodity_pct,
                             "container_type_pct": self.shift_container_type_pct},
            "conservation": {"eta_total": self.eta_total, "etd_total": self.etd_total},
        }
        if include_timing and self.computation_time_s is not None:
            doc["computation_time_s"] = self.computation_time_s
        return doc


def shift_breakdown(requests: list[SlotRequest], assignment: dict[str, int]
                    ) -> tuple[dict[str, float], dict[str, float]]:
    """Percent share of shifted requests per commodity and container type."""
    shifted = [r for r in requests
               if assignment.get(r.request_id, r.requested_slot.index)
               != r.requested_slot.index]
    if not shifted:
        return {}, {}
    by_comm: dict[str, int] = {}
    by_type: dict[str, int] = {}
    for r in shifted:
        by_comm[r.container.commodity] = by_comm.get(r.container.commodity, 0) + 1
        by_type[r.container.container_type] = by_type.get(r.container.container_type, 0) + 1
    n = len(shifted)
    return ({k: 100.0 * v / n for k, v in sorted(by_comm.items())},
            {k: 100.0 * v / n for k, v in sorted(by_type.items())})


def stakeholder_report(base: DayEvaluation, optimized: DayEvaluation,
                       scenario: Scenario, seed: int) -> DayReport:
    """Per-stakeholder gains of the optimized day over the base day."""
    if base.scenario_hash != optimized.scenario_hash:
        raise ValueError("base and optimized runs come from different scenarios")
    terminal_gain = {k: base.z3_per_terminal[k] - optimized.z3_per_terminal[k]
                     for k in base.z3_per_terminal}
    trucking_gain = {k: base.z2_per_terminal[k] - optimized.z2_per_terminal[k]
                     for k in base.z2_per_terminal}
    traffic_gain = {k: base.loss_per_corridor[k] - optimized.loss_per_corridor[k]
                    for k in base.loss_per_corridor if k != "PORT"}
    disutility = 0.0
    shifted = 0
    for r in optimized.requests:
        target = optimized.assignment[r.request_id]
        if target != r.requested_slot.index:
            shifted += 1
            costs = optimized.plan_cost_of[r.request_id]
            disutility += costs[target] - costs[r.requested_slot.index]
    n_requests = len(optimized.requests)
    comm_pct, type_pct = shift_breakdown(optimized.requests, optimized.assignment)
    trucking_total = float(sum(trucking_gain.values()))
    total_gain = (float(sum(terminal_gain.values())) + trucking_total
                  + (base.z4 - optimized.z4))
    return DayReport(
        scenario_name=scenario.name, seed=seed, scenario_hash=base.scenario_hash,
        terminal_gain=terminal_gain, trucking_gain=trucking_gain,
        traffic_gain=traffic_gain,
        terminal_gain_total=float(sum(terminal_gain.values())),
        trucking_gain_total=trucking_total,
        traffic_gain_total=float(base.z4 - optimized.z4),
        carrier_disutility=float(disutility),
        rescheduled_count=shifted,
        rescheduled_share_pct=100.0 * shifted / n_requests if n_requests else 0.0,
        productivity_hours=trucking_total / scenario.costs.transport_cost,
        waits_base={k: v.tolist() for k, v in base.waits_per_terminal.items()},
        waits_optimized={k: v.tolist() for k, v in optimized.waits_per_terminal.items()},
        shift_commodity_pct=comm_pct, shift_container_type_pct=type_pct,
        eta_total=float(sum(v.sum() for v in optimized.eta_final.values())),
        etd_total=float(sum(v.sum() for v in optimized.eta_final.values())),
        total_gain_eur=total_gain,
        base_money_eur=base.z2 + base.z3 + base.z4)


@dataclass
class DayRun:
    world: World
    base: DayEvaluation
    optimized: DayEvaluation
    report: DayReport
    windows: list[WindowRecord]
    base_windows: list[WindowRecord]


def _walk_day(world: World, policy: str, on_progress=None) -> PlanningState:
    state = PlanningState.initial(world)
    wh_lo, wh_hi = world.scenario.working_hours
    hours = list(range(wh_lo, wh_hi))
    for i, t_p in enumerate(hours):
        cb = None
        if on_progress is not None:
            cb = (lambda gen, total, _i=i:
                  on_progress(_i, len(hours), gen, total))
        state, _, _ = run_planning_window(state, t_p, world, policy=policy,
                                          on_generation=cb)
        if on_progress is not None:
            on_progress(i + 1, len(hours), 0, 0)
    return state


def run_day(scenario: Scenario, seed: int, policy: str = "MAX_MONETARY_GAIN",
            choice_params: ChoiceModelParams | None = None,
            on_progress=None) -> DayRun:
    """Full simulation of one working day: base pass, optimized pass, report."""
    t0 = time.perf_counter()
    world = build_world(scenario, seed, choice_params=choice_params)
    base_state = _walk_day(world, policy="IDENTITY")
    base_eval = _evaluate_day(world, base_state)
    opt_state = _walk_day(world, policy=policy, on_progress=on_progress)
    opt_eval = _evaluate_day(world, opt_state)
    report = stakeholder_report(base_eval, opt_eval, scenario, seed)
    report.computation_time_s = time.perf_counter() - t0
    return DayRun(world=world, base=base_eval, optimized=opt_eval, report=report,
                  windows=opt_state.history, base_windows=base_state.history)


def pareto_tradeoff_curve(windows: list[WindowRecord]) -> list[dict]:
    """Terminal gain versus carrier disutility across all window fronts.

    Only positive terminal gains are kept; the returned curve is the
    non-dominated (max gain, min disutility) frontier sorted by gain, so
    disutility is non-decreasing along it.
    """
    points = []
    for w in windows:
        if w.front is None:
            continue
        base = w.base_objectives
        for i, sol in enumerate(w.front.solutions):
            gain = base.z3 - sol.objectives.z3
            disutility = sol.objectives.z1 - base.z1
            if gain > 0:
                points.append({"window": w.hour, "solution_index": i,
                               "terminal_gain_eur": float(gain),
                               "carrier_disutility": float(disutility)})
    points.sort(key=lambda p: p["terminal_gain_eur"])
    frontier = []
    best = np.inf
    for p in reversed(points):
        if p["carrier_disutility"] < best - 1e-12:
            best = p["carrier_disutility"]
            frontier.append(p)
    frontier.reverse()
    return frontier


def front_payload(run: DayRun) -> list[dict]:
    """All window fronts flattened for export and the planner UI."""
    from portslot.domain import solution_to_dict
    out = []
    for w in run.windows:
        if w.front is None:
            continue
        base = w.base_objectives
        for i, sol in enumerate(w.front.solutions):
            doc = solution_to_dict(sol)
            doc["window"] = w.hour
            doc["solution_index"] = i
            doc["terminal_gain_eur"] = float(base.z3 - sol.objectives.z3)
            doc["carrier_disutility"] = float(sol.objectives.z1 - base.z1)
            doc["money_gain_eur"] = float(base.money_total()
                                          - sol.objectives.money_total())
            out.append(doc)
    return out


def reselect_day(run: DayRun, policy: str = "MAX_MONETARY_GAIN",
                 override: tuple[int, int] | None = None) -> DayRun:
    """Replay the committed day with a different selection, without new search.

    Each window re-selects from its stored front under the replayed state
    (objectives re-evaluated exactly; the candidate sets are reused).
    ``override`` pins (window hour, solution index) for one window.
    """
    world = run.world
    state = PlanningState.initial(world)
    for w in run.windows:
        if w.front is None:
            state, _, _ = run_planning_window(state, w.hour, world, policy="IDENTITY")
            continue
        ctx = build_window_context(state, world, w.hour, w.requests)
        ev = optimizer.PopulationEvaluator(ctx)
        sols = w.front.solutions
        slot_genes = np.stack([optimizer._genes_from_solution(s, ctx)[0] for s in sols])
        crane_genes = np.stack([optimizer._genes_from_solution(s, ctx)[1] for s in sols])
        objs = ev.evaluate(slot_genes, crane_genes)
        base_sol = identity_solution(ctx)
        front = ParetoFront(
            solutions=[optimizer._solution_from_genes(slot_genes[i], crane_genes[i],
                                                      objs[i], ctx)
                       for i in range(len(sols))],
            objectives=objs, base=base_sol, requested=w.front.requested)
        if override is not None and override[0] == w.hour:
            selected = front.solutions[override[1]]
        else:
            selected = select_solution(front, policy)
        new_state = PlanningState(
            eta=dict(state.eta), cranes=dict(state.cranes),
            committed=dict(state.committed),
            committed_requests=list(state.committed_requests),
            history=list(state.history))
        for k, tw in enumerate(world.terminals):
            floored = ctx.terminals[k].eta.copy()
            term_requests = [r for r in w.requests if r.terminal == tw.name]
            new_state.eta[tw.name] = update_eta(floored, term_requests,
                                                selected.assignment) \
                if term_requests else floored
            new_state.cranes[tw.name] = np.array(selected.cranes[tw.name],
                                                 dtype=np.int64)
        for r in w.requests:
            new_state.committed[r.request_id] = selected.assignment[r.request_id]
        new_state.committed_requests.extend(w.requests)
        new_state.history.append(WindowRecord(
            hour=w.hour, requests=w.requests, front=front, selected=selected,
            base_objectives=base_sol.objectives,
            eta_floor={k: ctx.terminals[i].eta.copy()
                       for i, k in enumerate(t.name for t in world.terminals)}))
        state = new_state
    opt_eval = _evaluate_day(world, state)
    report = stakeholder_report(run.base, opt_eval, world.scenario, run.report.seed)
    return DayRun(world=world, base=run.base, optimized=opt_eval, report=report,
                  windows=state.history, base_windows=run.base_windows)
