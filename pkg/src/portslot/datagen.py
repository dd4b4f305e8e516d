"""Synthetic port-community and road-traffic data.

Replaces the proprietary container, gate and loop-detector feeds with
seeded generators: vessel calls spike the deep-sea container arrival
signal, pickups lag them by a long right-skewed latency, and road states
follow a triangular speed-flow relation under a commuter background plus
the port's truck outflow.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from datetime import datetime, timedelta

import numpy as np

from portslot.domain import (UTC, ContainerRecord, DemandConfig, SlotRequest, TimeSlot,
                             TourAttributes, TrafficConfig, hour_to_window)
from portslot.traffic import LinkGraph, LinkStateSeries, SpeedFlow, spread_truck_outflow

DEFAULT_TYPE_WEIGHTS = {"GP": 0.62, "RE": 0.14, "CC": 0.13, "TC": 0.11}
DEFAULT_COMMODITY_WEIGHTS = {"SolMin": 0.16, "Chem": 0.15, "AGR": 0.14, "Food": 0.11,
                             "Miss": 0.09, "Fert": 0.08, "Pet": 0.08, "RawMin": 0.08,
                             "Ores": 0.07, "Iron": 0.04}
DEFAULT_WEIGHT_WEIGHTS = {"Heavy": 0.40, "Light": 0.40, "Empty": 0.20}
DEFAULT_LENGTH_WEIGHTS = {"20ft": 0.45, "40ft": 0.55}

# hour-of-day pickup propensity: business hours dominate, small night tail
DEFAULT_PICKUP_HOUR_WEIGHTS = np.array(
    [1, 1, 1, 1, 1, 2, 4, 8, 10, 11, 11, 10, 9, 9, 9, 8, 7, 5, 3, 2, 2, 1, 1, 1],
    dtype=np.float64)


@dataclass
class VesselCallProcess:
    """Deep-sea vessel arrivals and the road-bound containers they discharge."""

    calls_per_day: float
    large_share: float = 0.45
    small_size_range: tuple[float, float] = (300.0, 1250.0)
    large_size_range: tuple[float, float] = (1250.0, 3500.0)
    road_share: float = 0.12

    @staticmethod
    def from_config(cfg: DemandConfig) -> "VesselCallProcess":
        return VesselCallProcess(
            calls_per_day=cfg.vessel_calls_per_day, large_share=cfg.large_call_share,
            small_size_range=cfg.small_call_size, large_size_range=cfg.large_call_size,
            road_share=cfg.road_share)


@dataclass
class PickupLatencyModel:
    """Log-normal time from vessel arrival to truck pickup (minutes)."""

    mean_minutes: float = 4488.0
    sigma_log: float = 0.9

    def __post_init__(self):
        if self.sigma_log <= 0:
            raise ValueError("sigma_log must be positive")
        if self.mean_minutes <= 0:
            raise ValueError("mean latency must be positive")

    @property
    def mu_log(self) -> float:
        return float(np.log(self.mean_minutes) - self.sigma_log ** 2 / 2.0)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.lognormal(self.mu_log, self.sigma_log, size=n)

    @staticmethod
    def from_config(cfg: DemandConfig) -> "PickupLatencyModel":
        return PickupLatencyModel(mean_minutes=cfg.latency_mean_minutes,
                                  sigma_log=cfg.latency_sigma_log)


def _weighted_choice(rng, weights: dict[str, float], n: int) -> list[str]:
    keys = list(weights)
    p = np.array([weights[k] for k in keys], dtype=np.float64)
    p = p / p.sum()
    idx = rng.choice(len(keys), size=n, p=p)
    return [keys[i] for i in idx]


def gen_container_history(process: VesselCallProcess, latency: PickupLatencyModel,
                          days: int, seed: int, start: datetime | None = None,
                          terminal: str = "",
                          type_weights: dict[str, float] | None = None,
                          commodity_weights: dict[str, float] | None = None,
                          weight_weights: dict[str, float] | None = None,
                          pickup_hour_weights=None) -> list[ContainerRecord]:
    """Seeded synthetic container history over ``days`` days.

    Pickup timestamps keep the latency model's day but redraw the hour of
    day from the pickup propensity profile, floored so a pickup never
    precedes its vessel by less than a discharge/administration buffer.
    """
    if days < 1:
        raise ValueError("days must be >= 1")
    rng = np.random.default_rng(seed)
    start = start or datetime(2024, 1, 1, tzinfo=UTC)
    hour_w = np.asarray(pickup_hour_weights if pickup_hour_weights is not None
                        else DEFAULT_PICKUP_HOUR_WEIGHTS, dtype=np.float64)
    hour_p = hour_w / hour_w.sum()
    records: list[ContainerRecord] = []
    seq = 0
    for day in range(days):
        for _ in range(rng.poisson(process.calls_per_day)):
            arrival = start + timedelta(hours=day * 24 + float(rng.uniform(0, 24)))
            large = rng.random() < process.large_share
            lo, hi = process.large_size_range if large else process.small_size_range
            call_size = float(rng.uniform(lo, hi))
            n_road = max(1, int(round(call_size * process.road_share
                                      * float(rng.uniform(0.7, 1.3)))))
            lat_min = latency.sample(rng, n_road)
            hours = rng.choice(24, size=n_road, p=hour_p)
            minutes = rng.uniform(0, 60, n_road)
            types = _weighted_choice(rng, type_weights or DEFAULT_TYPE_WEIGHTS, n_road)
            commodities = _weighted_choice(
                rng, commodity_weights or DEFAULT_COMMODITY_WEIGHTS, n_road)
            weights = _weighted_choice(rng, weight_weights or DEFAULT_WEIGHT_WEIGHTS, n_road)
            lengths = _weighted_choice(rng, DEFAULT_LENGTH_WEIGHTS, n_road)
            prefix = f"{terminal}-C" if terminal else "C"
            for i in range(n_road):
                raw = arrival + timedelta(minutes=float(lat_min[i]))
                day_start = raw.replace(hour=0, minute=0, second=0, microsecond=0)
                pickup = day_start + timedelta(hours=int(hours[i]), minutes=float(minutes[i]))
                floor = arrival + timedelta(hours=3)
                if pickup < floor:
                    pickup = floor
                records.append(ContainerRecord(
                    container_id=f"{prefix}{seq:07d}", vessel_arrival=arrival, pickup=pickup,
                    container_type=types[i], length=lengths[i], weight_class=weights[i],
                    commodity=commodities[i],
                    vessel_size="Large" if large else "Small", terminal=terminal))
                seq += 1
    records.sort(key=lambda r: (r.vessel_arrival, r.container_id))
    return records


def hourly_signals(records: list[ContainerRecord], start: datetime,
                   days: int) -> tuple[np.ndarray, np.ndarray]:
    """(container arrivals, truck arrivals) per hour over the horizon.

    The container signal counts road-bound containers at their vessel's
    arrival hour; the truck signal counts pickups.
    """
    n = days * 24
    containers = np.zeros(n)
    trucks = np.zeros(n)
    for r in records:
        ih = int((r.vessel_arrival - start).total_seconds() // 3600)
        if 0 <= ih < n:
            containers[ih] += 1
        ph = int((r.pickup - start).total_seconds() // 3600)
        if 0 <= ph < n:
            trucks[ph] += 1
    return containers, trucks


# ---------------------------------------------------------------------------
# road traffic history

BACKGROUND_HOUR_SHAPE = np.array(
    [0.15, 0.12, 0.10, 0.10, 0.15, 0.30, 0.65, 1.00, 0.95, 0.70, 0.55, 0.55,
     0.55, 0.55, 0.60, 0.75, 0.95, 1.00, 0.80, 0.55, 0.40, 0.30, 0.25, 0.20])

# toward the port the commute peaks in the morning
INBOUND_HOUR_SHAPE = np.array(
    [0.15, 0.12, 0.10, 0.12, 0.20, 0.45, 0.85, 1.00, 1.00, 0.80, 0.60, 0.55,
     0.50, 0.50, 0.55, 0.65, 0.80, 0.85, 0.65, 0.45, 0.35, 0.28, 0.22, 0.18])

CORRIDOR_BACKGROUND_FACTOR = {"A15": 1.0, "A4": 0.70, "A29": 0.60,
                              "A16N": 0.65, "A16S": 0.45, "PORT": 0.30}


def gen_traffic_history(graph: LinkGraph, truck_outflow_per_hour, days: int, seed: int,
                        cfg: TrafficConfig | None = None,
                        clip_overload: bool = False,
                        background_shape: np.ndarray | None = None) -> LinkStateSeries:
    """Synthetic per-link flow/speed series over ``days`` days.

    ``truck_outflow_per_hour`` is either a 24-hour profile reused daily or a
    full (days*24,) series of trucks leaving the port per hour.  Speeds
    follow the triangular speed-flow relation; demand above the jam level
    raises unless ``clip_overload``.
    """
    cfg = cfg or TrafficConfig()
    rng = np.random.default_rng(seed)
    iph = 60 // cfg.interval_minutes
    n_int = days * 24 * iph
    outflow = np.asarray(truck_outflow_per_hour, dtype=np.float64)
    if (outflow < 0).any():
        raise ValueError("truck outflow must be nonnegative")
    if outflow.shape == (24,):
        outflow = np.tile(outflow, days)
    if outflow.shape != (days * 24,):
        raise ValueError("truck outflow must cover 24 hours or the whole horizon")
    outflow_int = np.repeat(outflow / iph, iph)
    q_truck = spread_truck_outflow(graph, outflow_int, cfg.port_weights,
                                   cfg.ffs_truck, cfg.interval_minutes)
    hour_of_interval = (np.arange(n_int) // iph) % 24
    base_shape = (BACKGROUND_HOUR_SHAPE if background_shape is None
                  else np.asarray(background_shape, dtype=np.float64))
    shape = base_shape[hour_of_interval]
    day_of_interval = np.arange(n_int) // (24 * iph)
    day_noise = 1.0 + rng.normal(0.0, 0.03, size=days)[day_of_interval]
    interval_noise = 1.0 + rng.normal(0.0, 0.02, size=n_int)
    q_pass = np.zeros((graph.n_nodes, n_int))
    for i, corridor in enumerate(graph.corridor_of):
        factor = CORRIDOR_BACKGROUND_FACTOR.get(corridor, 0.5)
        q_pass[i] = (cfg.background_peak_veh_h * factor / iph
                     * shape * day_noise * interval_noise)
    sf = SpeedFlow(ffs=cfg.ffs_passenger, critical_speed=cfg.critical_speed,
                   capacity_veh_h=cfg.capacity_veh_h, jam_demand_veh_h=cfg.jam_demand_veh_h)
    demand_veh_h = (q_pass + q_truck) * iph
    v = sf.speed(demand_veh_h, clip=clip_overload,
                 node_ids=[nid for nid in graph.node_ids for _ in range(1)])
    return LinkStateSeries(q_passenger=q_pass, q_truck=q_truck, v=v,
                           interval_minutes=cfg.interval_minutes)


TRAFFIC_CSV_HEADER = "node_id,timestamp,flow_passenger,flow_truck,speed_kmh"


def traffic_to_csv(series: LinkStateSeries, graph: LinkGraph, start: datetime) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRAFFIC_CSV_HEADER.split(","))
    step = timedelta(minutes=series.interval_minutes)
    for i, nid in enumerate(graph.node_ids):
        for t in range(series.q_passenger.shape[1]):
            ts = (start + t * step).isoformat().replace("+00:00", "Z")
            w.writerow([nid, ts, repr(float(series.q_passenger[i, t])),
                        repr(float(series.q_truck[i, t])), repr(float(series.v[i, t]))])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# slot requests


def draw_requests(pool: list[ContainerRecord], t_p: datetime, count: int, seed: int,
                  working_hours: tuple[int, int] | None = None,
                  delay_port_by_hour=None, delay_hint_by_hour=None,
                  min_lead_hours: float = 3.0) -> list[SlotRequest]:
    """Monte Carlo draw of slot requests from the due-container pool.

    Sampling containers uniformly without replacement makes requested slots
    proportional to the observed pickup-time distribution; drawing the whole
    pool therefore reproduces each hour's demand exactly.  Only containers
    whose pickup slot respects the planning lead time (and the working-hour
    window when configured) are eligible.
    """
    if not pool:
        raise ValueError("empty container pool")
    eligible = []
    for c in pool:
        slot_start = c.pickup.replace(minute=0, second=0, microsecond=0)
        lead = (slot_start - t_p).total_seconds() / 3600.0
        if lead < min_lead_hours:
            continue
        if working_hours and not (working_hours[0] <= c.pickup.hour < working_hours[1]):
            continue
        eligible.append((c, slot_start))
    if count > len(eligible):
        raise ValueError(f"requested {count} draws but only {len(eligible)} "
                         f"containers are eligible at {t_p.isoformat()}")
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(eligible), size=count, replace=False)
    requests = []
    for i in sorted(idx):
        c, slot_start = eligible[i]
        hour = slot_start.hour
        same_day = c.vessel_arrival.date() == c.pickup.date()
        vessel_window = hour_to_window(c.vessel_arrival.hour) if same_day else None
        if vessel_window == "Night":
            vessel_window = None  # only daytime vessel windows carry a marker
        attrs = TourAttributes(
            commodity=c.commodity, container_type=c.container_type, length=c.length,
            weight_class=c.weight_class, vessel_window=vessel_window,
            delay_port=float(delay_port_by_hour[hour]) if delay_port_by_hour is not None else 0.0,
            delay_hint=float(delay_hint_by_hour[hour]) if delay_hint_by_hour is not None else 0.0)
        requests.append(SlotRequest(
            request_id=f"R-{c.container_id}", container=c,
            requested_slot=TimeSlot(index=hour, start=slot_start),
            planning_time=t_p, attributes=attrs, terminal=c.terminal))
    return requests
