"""Shared vocabulary: slots, windows, containers, requests, costs, scenarios."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from datetime import datetime, timedelta, timezone

SCHEMA_VERSION = "1"

CONTAINER_TYPES = ("GP", "RE", "CC", "TC")
CONTAINER_LENGTHS = ("20ft", "40ft")
WEIGHT_CLASSES = ("Heavy", "Light", "Empty")
COMMODITIES = ("AGR", "Chem", "Food", "Fert", "Pet", "RawMin", "SolMin", "Ores", "Iron", "Miss")
VESSEL_SIZES = ("Large", "Small")
LARGE_CALL_SIZE = 1250

# kg bounds per weight class
WEIGHT_BOUNDS = {"Heavy": (15000.0, 35000.0), "Light": (2000.0, 15000.0), "Empty": (0.0, 2000.0)}

WINDOW_LABELS = ("Morning", "Midday", "Afternoon", "Night")
# Day-partitioning hour bounds.  The 19:00-21:00 gap between the published
# afternoon and night windows is folded into Afternoon so the four windows
# cover all 24 hours; Night wraps past midnight within the same day.
WINDOW_HOURS = {"Morning": (5, 10), "Midday": (10, 15), "Afternoon": (15, 21), "Night": (21, 5)}

MIN_LEAD_HOURS = 3.0

UTC = timezone.utc


def hour_to_window(hour: int) -> str:
    """Map an hour of day (0-23) to its time window label."""
    h = int(hour) % 24
    if 5 <= h < 10:
        return "Morning"
    if 10 <= h < 15:
        return "Midday"
    if 15 <= h < 21:
        return "Afternoon"
    return "Night"


@dataclass(frozen=True)
class TimeSlot:
    """One pickup time slot in the operation day."""

    index: int
    start: datetime
    width_hours: float = 1.0

    @property
    def hour(self) -> int:
        return self.start.hour

    @property
    def window(self) -> str:
        return hour_to_window(self.start.hour)


def slot_to_window(slot: TimeSlot) -> str:
    return hour_to_window(slot.start.hour)


def operation_day_slots(day_start: datetime) -> list[TimeSlot]:
    """Build the 24 contiguous hourly slots covering one operation day."""
    return [TimeSlot(index=h, start=day_start + timedelta(hours=h)) for h in range(24)]


def slots_cover_day(slots: list[TimeSlot]) -> bool:
    """True if the slots are contiguous, non-overlapping and span 00:00-24:00."""
    if not slots:
        return False
    total = 0.0
    prev_end = None
    for s in sorted(slots, key=lambda s: s.start):
        if s.width_hours <= 0:
            return False
        if prev_end is not None and s.start != prev_end:
            return False
        prev_end = s.start + timedelta(hours=s.width_hours)
        total += s.width_hours
    first = min(slots, key=lambda s: s.start)
    return total == 24.0 and first.start.hour == 0 and first.start.minute == 0


@dataclass(frozen=True)
class ContainerRecord:
    """One road-bound import container observed in the community system."""

    container_id: str
    vessel_arrival: datetime
    pickup: datetime
    container_type: str
    length: str
    weight_class: str
    commodity: str
    vessel_size: str
    terminal: str = ""


@dataclass(frozen=True)
class TourAttributes:
    """Observable tour attributes used by the scheduling-preference model.

    ``vessel_window`` is the arrival window of the deep-sea vessel when the
    pickup happens on the same day as the vessel call, otherwise None.
    Delays are hours per km at the hour of the planned pickup.
    """

    commodity: str
    container_type: str
    length: str
    weight_class: str
    vessel_window: str | None = None
    delay_port: float = 0.0
    delay_hint: float = 0.0


@dataclass(frozen=True)
class SlotRequest:
    """A carrier's request for a pickup slot, placed at ``planning_time``."""

    request_id: str
    container: ContainerRecord
    requested_slot: TimeSlot
    planning_time: datetime
    attributes: TourAttributes
    terminal: str = ""

    def lead_hours(self) -> float:
        return (self.requested_slot.start - self.planning_time).total_seconds() / 3600.0


@dataclass(frozen=True)
class CostVector:
    """Four objective components.  z1 is unitless; z2-z4 are euros.

    There is deliberately no method summing all four: the planning
    disutility must never be added to the monetary components.
    """

    z1: float
    z2: float
    z3: float
    z4: float

    def money_total(self) -> float:
        """Euro components only (waiting + crane service + traffic)."""
        return self.z2 + self.z3 + self.z4

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.z1, self.z2, self.z3, self.z4)


@dataclass
class CostConstants:
    """Monetary constants of the system (euros, per hour unless noted)."""

    idle_cost: float = 38.0          # truck idling in queue
    labor_cost: float = 50.0         # per person
    crew_per_lane: float = 2.5       # persons needed to run one gate lane
    transport_cost: float = 62.0     # container transport, used for productivity hours
    vot_passenger: float = 10.0
    vot_truck: float = 45.0
    alpha: float = 1.0               # crane yard-priority factor
    eta_scale: float = 100.0         # planning-cost scaling factor


@dataclass
class TerminalConfig:
    """Gate configuration of one terminal."""

    name: str
    service_rate: float = 2.5        # trucks per hour per lane
    base_cranes: int = 4
    s_max: int = 8
    crane_benefit_eur: float | None = None   # peak waiting saving of one extra crane
    demand_share: float = 1.0        # fraction of the port's truck demand
    corridor_weights: dict[str, float] = field(default_factory=dict)


@dataclass
class DemandConfig:
    """Synthetic demand generator settings."""

    vessel_calls_per_day: float = 1.2
    fixed_daily_calls: bool = False      # exact call count per day instead of Poisson
    large_call_share: float = 0.45
    small_call_size: tuple[float, float] = (300.0, 1250.0)
    large_call_size: tuple[float, float] = (1250.0, 3500.0)
    road_share: float = 0.12         # fraction of a call leaving by truck
    latency_mean_minutes: float = 4488.0
    latency_sigma_log: float = 0.9
    pickup_hour_weights: tuple[float, ...] = ()   # empty -> built-in profile
    peak_hours: tuple[int, ...] = ()              # extra weight on these hours
    peak_boost: float = 0.0
    type_weights: dict[str, float] = field(default_factory=dict)
    commodity_weights: dict[str, float] = field(default_factory=dict)


@dataclass
class TrafficConfig:
    """Synthetic road network and background traffic settings."""

    corridors: dict[str, float] = field(default_factory=lambda: {
        "A15": 55.0, "A4": 4.8, "A29": 11.4, "A16N": 7.1, "A16S": 20.1,
    })
    node_spacing_km: float = 0.6
    ffs_passenger: float = 100.0
    ffs_truck: float = 80.0
    critical_speed: float = 70.0
    capacity_veh_h: float = 4000.0
    jam_demand_veh_h: float = 8000.0
    background_peak_veh_h: float = 3000.0
    port_weights: dict[str, float] = field(default_factory=lambda: {
        "A15": 0.55, "A16S": 0.20, "A29": 0.12, "A16N": 0.08, "A4": 0.05,
    })
    uncalibrated_scale: float = 1.0  # scaling applied to summed terminal outflows
    propagation_order: int = 2
    interval_minutes: int = 15


@dataclass
class GaConfig:
    """Evolutionary search settings."""

    population: int = 80
    generations: int = 120
    crossover_rate: float = 0.9
    mutation_rate: float | None = None   # None -> 1/genome
    pareto_fraction: float = 0.35
    seed: int = 0


@dataclass
class Scenario:
    """Everything needed to reproduce one simulated planning problem."""

    name: str = "default"
    seed: int = 7
    planning_offset_days: int = 0        # 0 same day, 1 or 2 days ahead
    working_hours: tuple[int, int] = (7, 17)
    history_days: int = 60
    forecast_source: str = "ha"          # "ha" or "actual"
    request_share: float = 1.0           # fraction of due containers routed via requests
    # a committed plan must beat the base case by this much, plus a margin
    # per rescheduled carrier; below that the window keeps the identity plan
    commit_threshold_eur: float = 25.0
    commit_margin_per_shift_eur: float = 38.0
    terminals: list[TerminalConfig] = field(default_factory=lambda: [
        TerminalConfig(name="T1"), TerminalConfig(name="T2"),
    ])
    costs: CostConstants = field(default_factory=CostConstants)
    demand: DemandConfig = field(default_factory=DemandConfig)
    traffic: TrafficConfig = field(default_factory=TrafficConfig)
    ga: GaConfig = field(default_factory=GaConfig)
    schema_version: str = SCHEMA_VERSION


@dataclass(frozen=True)
class Violation:
    path: str
    message: str

    def __str__(self) -> str:  # pragma: no cover - debugging aid
        return f"{self.path}: {self.message}"


def _check_positive(report: list[Violation], path: str, value: float) -> None:
    if not value > 0:
        report.append(Violation(path, f"must be > 0, got {value!r}"))


def validate_scenario(s: Scenario) -> list[Violation]:
    """Collect every invariant violation in the scenario; empty means valid."""
    rep: list[Violation] = []
    c = s.costs
    _check_positive(rep, "costs.idle_cost", c.idle_cost)
    _check_positive(rep, "costs.labor_cost", c.labor_cost)
    _check_positive(rep, "costs.transport_cost", c.transport_cost)
    _check_positive(rep, "costs.vot_passenger", c.vot_passenger)
    _check_positive(rep, "costs.vot_truck", c.vot_truck)
    _check_positive(rep, "costs.eta_scale", c.eta_scale)
    if c.alpha < 0:
        rep.append(Violation("costs.alpha", f"must be >= 0, got {c.alpha!r}"))
    if s.planning_offset_days not in (0, 1, 2):
        rep.append(Violation("planning_offset_days", "must be 0, 1 or 2"))
    if s.forecast_source not in ("ha", "actual"):
        rep.append(Violation("forecast_source", "must be 'ha' or 'actual'"))
    lo, hi = s.working_hours
    if not (0 <= lo < hi <= 24):
        rep.append(Violation("working_hours", f"invalid range {s.working_hours!r}"))
    if not s.terminals:
        rep.append(Violation("terminals", "at least one terminal required"))
    for i, t in enumerate(s.terminals):
        _check_positive(rep, f"terminals[{i}].service_rate", t.service_rate)
        if not (0 < t.base_cranes < t.s_max):
            rep.append(Violation(f"terminals[{i}].base_cranes",
                                 f"need 0 < base_cranes < s_max, got {t.base_cranes}/{t.s_max}"))
    if s.demand.latency_sigma_log <= 0:
        rep.append(Violation("demand.latency_sigma_log", "must be > 0"))
    if s.demand.vessel_calls_per_day < 0:
        rep.append(Violation("demand.vessel_calls_per_day", "must be >= 0"))
    return rep


def validate_request(r: SlotRequest) -> list[Violation]:
    rep: list[Violation] = []
    if r.lead_hours() < MIN_LEAD_HOURS:
        rep.append(Violation(
            f"request[{r.request_id}]",
            f"planning time must precede the slot by at least {MIN_LEAD_HOURS:.0f} hours "
            f"(lead is {r.lead_hours():.2f}h)"))
    if r.container.pickup < r.container.vessel_arrival:
        rep.append(Violation(f"request[{r.request_id}].container", "pickup before vessel arrival"))
    return rep


@dataclass
class ParetoSolution:
    """One candidate plan: slot per request plus cranes per terminal slot."""

    assignment: dict[str, int]
    cranes: dict[str, list[int]]
    objectives: CostVector
    feasible: bool = True

    def shifted(self, requested: dict[str, int]) -> int:
        """Number of requests assigned away from their requested slot."""
        return sum(1 for rid, t in self.assignment.items() if requested.get(rid) != t)


# ---------------------------------------------------------------------------
# serialization


def _iso(ts: datetime) -> str:
    return ts.astimezone(UTC).isoformat().replace("+00:00", "Z")


def _parse_iso(text: str) -> datetime:
    ts = datetime.fromisoformat(text.replace("Z", "+00:00"))
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=UTC)
    return ts.astimezone(UTC)


def scenario_to_json(s: Scenario) -> str:
    doc = asdict(s)
    doc["schema_version"] = SCHEMA_VERSION
    return json.dumps(doc, indent=2, sort_keys=True)


def scenario_from_json(text: str) -> Scenario:
    doc = json.loads(text)
    version = doc.pop("schema_version", None)
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported scenario schema_version {version!r}")
    doc["terminals"] = [TerminalConfig(**t) for t in doc.get("terminals", [])]
    doc["costs"] = CostConstants(**doc.get("costs", {}))
    dem = doc.get("demand", {})
    for key in ("small_call_size", "large_call_size", "pickup_hour_weights", "peak_hours"):
        if key in dem and dem[key] is not None:
            dem[key] = tuple(dem[key])
    doc["demand"] = DemandConfig(**dem)
    doc["traffic"] = TrafficConfig(**doc.get("traffic", {}))
    doc["ga"] = GaConfig(**doc.get("ga", {}))
    doc["working_hours"] = tuple(doc.get("working_hours", (7, 17)))
    return Scenario(**doc)


def solution_to_dict(sol: ParetoSolution) -> dict:
    return {
        "assignment": dict(sorted(sol.assignment.items())),
        "cranes": {k: list(map(int, v)) for k, v in sorted(sol.cranes.items())},
        "objectives": {"z1": sol.objectives.z1, "z2": sol.objectives.z2,
                       "z3": sol.objectives.z3, "z4": sol.objectives.z4},
        "feasible": sol.feasible,
    }


def solution_from_dict(doc: dict) -> ParetoSolution:
    obj = doc["objectives"]
    return ParetoSolution(
        assignment={k: int(v) for k, v in doc["assignment"].items()},
        cranes={k: [int(x) for x in v] for k, v in doc["cranes"].items()},
        objectives=CostVector(obj["z1"], obj["z2"], obj["z3"], obj["z4"]),
        feasible=bool(doc["feasible"]),
    )


CONTAINER_CSV_HEADER = ("container_id,vessel_arrival,pickup,container_type,"
                        "length,weight_class,commodity,vessel_size")


def containers_to_csv(records: list[ContainerRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CONTAINER_CSV_HEADER.split(","))
    for r in records:
        writer.writerow([r.container_id, _iso(r.vessel_arrival), _iso(r.pickup),
                         r.container_type, r.length, r.weight_class, r.commodity,
                         r.vessel_size])
    return buf.getvalue()


def containers_from_csv(text: str) -> list[ContainerRecord]:
    reader = csv.DictReader(io.StringIO(text))
    out = []
    for row in reader:
        out.append(ContainerRecord(
            container_id=row["container_id"],
            vessel_arrival=_parse_iso(row["vessel_arrival"]),
            pickup=_parse_iso(row["pickup"]),
            container_type=row["container_type"],
            length=row["length"],
            weight_class=row["weight_class"],
            commodity=row["commodity"],
            vessel_size=row["vessel_size"],
        ))
    return out
