"""Road network model and the monetary traffic-cost pipeline.

The network is a weighted directed graph of detector nodes on the motorway
corridors around the port.  A linear k-order graph propagator predicts the
next 15-minute state from each node's neighbourhood plus injected centroid
demand.  Monetary losses are vehicle loss hours (travel time above
free-flow) priced per vehicle class.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from portslot.domain import TrafficConfig


class JamCapacityError(ValueError):
    """Demand above the configured jam level on a named link."""


@dataclass
class LinkGraph:
    """Directed detector graph; node i measures a segment of ``lengths_km``."""

    node_ids: list[str]
    edges: list[tuple[int, int]]
    edge_weights: np.ndarray
    lengths_km: np.ndarray
    corridor_of: list[str]
    distance_km: np.ndarray              # along-corridor distance from the port
    centroids: dict[str, dict[int, float]] = field(default_factory=dict)

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    def propagation_matrix(self) -> np.ndarray:
        """Row-normalized receive matrix: row j mixes j's upstream neighbours.

        Rows of source nodes (no incoming edge) are zero.
        """
        n = self.n_nodes
        p = np.zeros((n, n))
        for (i, j), w in zip(self.edges, self.edge_weights):
            p[j, i] += w
        sums = p.sum(axis=1, keepdims=True)
        nonzero = sums[:, 0] > 0
        p[nonzero] /= sums[nonzero]
        return p

    def centroid_matrix(self) -> np.ndarray:
        """(n_nodes, n_centroids) attachment map, columns normalized to 1."""
        names = sorted(self.centroids)
        m = np.zeros((self.n_nodes, len(names)))
        for c, name in enumerate(names):
            attach = self.centroids[name]
            total = sum(attach.values())
            for node, w in attach.items():
                m[node, c] = w / total
        return m

    def to_json(self) -> str:
        return json.dumps({
            "nodes": [{"id": nid, "corridor": cor, "length_km": float(l),
                       "distance_km": float(d)}
                      for nid, cor, l, d in zip(self.node_ids, self.corridor_of,
                                                self.lengths_km, self.distance_km)],
            "edges": [{"from": int(i), "to": int(j), "weight": float(w)}
                      for (i, j), w in zip(self.edges, self.edge_weights)],
            "centroids": {name: {str(k): float(v) for k, v in attach.items()}
                          for name, attach in self.centroids.items()},
        }, indent=2)

    @staticmethod
    def from_json(text: str) -> "LinkGraph":
        doc = json.loads(text)
        nodes = doc["nodes"]
        return LinkGraph(
            node_ids=[n["id"] for n in nodes],
            edges=[(e["from"], e["to"]) for e in doc["edges"]],
            edge_weights=np.array([e["weight"] for e in doc["edges"]]),
            lengths_km=np.array([n["length_km"] for n in nodes]),
            corridor_of=[n["corridor"] for n in nodes],
            distance_km=np.array([n["distance_km"] for n in nodes]),
            centroids={name: {int(k): v for k, v in attach.items()}
                       for name, attach in doc.get("centroids", {}).items()},
        )


def default_network(cfg: TrafficConfig | None = None) -> LinkGraph:
    """Five motorway corridors fanning out from one port hub node.

    Corridor lengths follow the studied network; detector spacing gives
    round(length / spacing) nodes per corridor plus the hub, 166 in total
    with the default configuration.
    """
    cfg = cfg or TrafficConfig()
    node_ids = ["PORT_HUB"]
    corridor_of = ["PORT"]
    distance = [0.0]
    edges: list[tuple[int, int]] = []
    weights: list[float] = []
    centroid_attach = {0: 1.0}
    for name in sorted(cfg.corridors):
        length = cfg.corridors[name]
        n_nodes = int(round(length / cfg.node_spacing_km))
        first = len(node_ids)
        for k in range(n_nodes):
            node_ids.append(f"{name}_{k:03d}")
            corridor_of.append(name)
            distance.append((k + 1) * cfg.node_spacing_km)
        edges.append((0, first))
        weights.append(cfg.port_weights.get(name, 1.0 / len(cfg.corridors)))
        for k in range(n_nodes - 1):
            edges.append((first + k, first + k + 1))
            weights.append(1.0)
    return LinkGraph(
        node_ids=node_ids, edges=edges, edge_weights=np.array(weights),
        lengths_km=np.full(len(node_ids), cfg.node_spacing_km),
        corridor_of=corridor_of, distance_km=np.array(distance),
        centroids={"PORT": centroid_attach},
    )


# ---------------------------------------------------------------------------
# speed-flow relation (triangular, explicit and invertible)


@dataclass
class SpeedFlow:
    """Piecewise-linear speed response to demand on one link class.

    Speed falls linearly from free-flow at zero demand to the critical
    speed at capacity, then linearly down to ``v_min`` at the jam level.
    """

    ffs: float
    critical_speed: float
    capacity_veh_h: float
    jam_demand_veh_h: float
    v_min: float = 5.0

    def speed(self, demand_veh_h, clip: bool = False,
              node_ids: list[str] | None = None) -> np.ndarray:
        d = np.asarray(demand_veh_h, dtype=np.float64)
        if not clip:
            over = d > self.jam_demand_veh_h
            if over.any():
                idx = int(np.argwhere(over)[0][0]) if d.ndim else 0
                name = node_ids[idx] if node_ids else f"link {idx}"
                raise JamCapacityError(
                    f"demand {d[over].max():.1f} veh/h exceeds jam level "
                    f"{self.jam_demand_veh_h:.1f} on {name}")
        v = self.ffs - (self.ffs - self.critical_speed) * d / self.capacity_veh_h
        hot = d > self.capacity_veh_h
        if hot.any():
            frac = (d[hot] - self.capacity_veh_h) \
                / (self.jam_demand_veh_h - self.capacity_veh_h)
            v[hot] = self.critical_speed - (self.critical_speed - self.v_min) * frac
        return np.maximum(v, self.v_min, out=v)


@dataclass
class LinkStateSeries:
    """Per-node, per-interval flows and speeds over one or more days."""

    q_passenger: np.ndarray      # veh per interval (n_nodes, n_intervals)
    q_truck: np.ndarray
    v: np.ndarray                # all-vehicle speed, km/h
    interval_minutes: int = 15

    @property
    def intervals_per_hour(self) -> int:
        return 60 // self.interval_minutes

    def v_truck(self, ffs_truck: float) -> np.ndarray:
        return np.minimum(self.v, ffs_truck)


# ---------------------------------------------------------------------------
# vehicle loss hours and monetary loss


def vlh(q_per_interval, length_km, speed_kmh, ffs_kmh):
    """Hours lost by ``q`` vehicles crossing one segment versus free flow."""
    q = np.asarray(q_per_interval, dtype=np.float64)
    v = np.asarray(speed_kmh, dtype=np.float64)
    if (v <= 0).any():
        raise ValueError("speed must be positive")
    return np.maximum(q * length_km / v - q * length_km / ffs_kmh, 0.0)


def loss_matrix(series: LinkStateSeries, graph: LinkGraph,
                ffs_passenger: float, ffs_truck: float,
                vot_passenger: float = 10.0, vot_truck: float = 45.0) -> np.ndarray:
    """(n_nodes, n_intervals) euros lost to congestion."""
    lengths = graph.lengths_km[:, None]
    vlh_p = vlh(series.q_passenger, lengths, series.v, ffs_passenger)
    vlh_t = vlh(series.q_truck, lengths, series.v_truck(ffs_truck), ffs_truck)
    return monetary_loss(vlh_p, vlh_t, vot_passenger, vot_truck)


def monetary_loss(vlh_passenger, vlh_truck, vot_passenger: float = 10.0,
                  vot_truck: float = 45.0) -> np.ndarray:
    return vot_passenger * np.asarray(vlh_passenger) + vot_truck * np.asarray(vlh_truck)


def traffic_cost(loss: np.ndarray, slot: int, intervals_per_slot: int = 4) -> float:
    """Euros lost across the network during one time slot."""
    lo = slot * intervals_per_slot
    hi = lo + intervals_per_slot
    if loss.ndim != 2 or hi > loss.shape[1]:
        raise ValueError(f"loss matrix does not cover slot {slot}")
    return float(loss[:, lo:hi].sum())


def slot_costs(loss: np.ndarray, intervals_per_slot: int = 4) -> np.ndarray:
    n_slots = loss.shape[1] // intervals_per_slot
    return loss[:, :n_slots * intervals_per_slot].reshape(
        loss.shape[0], n_slots, intervals_per_slot).sum(axis=(0, 2))


def inject_truck_departures(etd_by_terminal, scale: float = 1.0,
                            intervals_per_slot: int = 4) -> np.ndarray:
    """Centroid truck demand per interval from per-terminal hourly departures.

    Terminals are summed, scaled (for the share not covered by calibrated
    gates) and disaggregated uniformly across each slot's intervals, so the
    total truck count is preserved up to the scale factor.
    """
    etd = np.atleast_2d(np.asarray(etd_by_terminal, dtype=np.float64))
    if (etd < 0).any():
        raise ValueError("departure counts must be nonnegative")
    hourly = etd.sum(axis=0) * scale
    return np.repeat(hourly / intervals_per_slot, intervals_per_slot)


def mape(predictions, observations) -> float:
    """Mean absolute percent error; zero-valued observations are excluded."""
    value, _, _ = mape_detail(predictions, observations)
    return value


def mape_detail(predictions, observations) -> tuple[float, int, int]:
    """(percent, cells used, zero cells excluded)."""
    pred = np.asarray(predictions, dtype=np.float64).ravel()
    obs = np.asarray(observations, dtype=np.float64).ravel()
    if pred.shape != obs.shape:
        raise ValueError("prediction and observation shapes differ")
    mask = obs != 0
    n_used = int(mask.sum())
    if n_used == 0:
        raise ValueError("all observations are zero; MAPE undefined")
    value = float(np.mean(np.abs(obs[mask] - pred[mask]) / np.abs(obs[mask])) * 100.0)
    return value, n_used, int(obs.size - n_used)


# ---------------------------------------------------------------------------
# k-order linear propagator


@dataclass
class PropagatorParams:
    """Per-order weights of the linear neighbourhood propagator."""

    order: int
    theta_state: np.ndarray          # (order + 1,)
    theta_centroid: np.ndarray       # (order + 1,)
    bias: np.ndarray | float = 0.0   # scalar or per-node

    def __post_init__(self):
        self.theta_state = np.asarray(self.theta_state, dtype=np.float64)
        self.theta_centroid = np.asarray(self.theta_centroid, dtype=np.float64)
        if self.order < 0 or self.theta_state.shape != (self.order + 1,):
            raise ValueError("theta_state must have order + 1 entries")
        if self.theta_centroid.shape != (self.order + 1,):
            raise ValueError("theta_centroid must have order + 1 entries")


def _neighbourhood_stack(p: np.ndarray, x: np.ndarray, order: int) -> np.ndarray:
    """Stack [x, Px, P^2 x, ...] along the first axis."""
    out = [x]
    for _ in range(order):
        out.append(p @ out[-1])
    return np.stack(out)


def propagate(state: np.ndarray, centroid_demand, params: PropagatorParams,
              graph: LinkGraph, clamp: tuple[float, float] | None = None) -> np.ndarray:
    """One linear step of the network state.

    Each node aggregates its k-order incoming neighbourhood of the current
    state; centroid demand is injected through the attachment map and
    spread the same way, making the demand nodes act as additional
    neighbours of every reachable node.
    """
    x = np.asarray(state, dtype=np.float64)
    if x.shape[0] != graph.n_nodes:
        raise ValueError("state must have one entry per node")
    p = graph.propagation_matrix()
    stack = _neighbourhood_stack(p, x, params.order)
    nxt = np.tensordot(params.theta_state, stack, axes=1) + params.bias
    if graph.centroids:
        c = np.atleast_1d(np.asarray(centroid_demand, dtype=np.float64))
        injected = graph.centroid_matrix() @ c
        cstack = _neighbourhood_stack(p, injected, params.order)
        nxt = nxt + np.tensordot(params.theta_centroid, cstack, axes=1)
    if clamp is not None:
        nxt = np.clip(nxt, clamp[0], clamp[1])
    return nxt


@dataclass
class PropagatorFit:
    params: PropagatorParams
    residual_rms: float
    rank_deficient: bool


def fit_propagator(history: np.ndarray, centroid_series: np.ndarray,
                   graph: LinkGraph, order: int = 2,
                   min_steps: int = 30 * 96) -> PropagatorFit:
    """Least-squares fit of the one-step propagator to a state history.

    ``history`` is (n_steps, n_nodes); ``centroid_series`` is
    (n_steps, n_centroids).  Columns are centered before solving so a
    constant history yields a bias-only model with zero propagation
    weights.  Rank deficiency of the centered design is flagged.
    """
    x = np.asarray(history, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != graph.n_nodes:
        raise ValueError("history must be (n_steps, n_nodes)")
    if x.shape[0] < min_steps:
        raise ValueError(f"insufficient history: {x.shape[0]} steps < {min_steps}")
    c = np.atleast_2d(np.asarray(centroid_series, dtype=np.float64))
    if c.shape[0] != x.shape[0]:
        raise ValueError("centroid series must align with history")
    p = graph.propagation_matrix()
    m = graph.centroid_matrix()
    state_stack = _neighbourhood_stack(p, x[:-1].T, order)      # (k+1, nodes, T-1)
    injected = m @ c[:-1].T                                     # (nodes, T-1)
    cen_stack = _neighbourhood_stack(p, injected, order)
    feats = [state_stack[o].T.ravel() for o in range(order + 1)]
    feats += [cen_stack[o].T.ravel() for o in range(order + 1)]
    design = np.column_stack(feats)
    target = x[1:].ravel()
    mean_x = design.mean(axis=0)
    mean_y = target.mean()
    centered = design - mean_x
    rank = np.linalg.matrix_rank(centered, tol=1e-8 * max(1.0, np.abs(centered).max()))
    coef, _, _, _ = np.linalg.lstsq(centered, target - mean_y, rcond=None)
    bias = mean_y - float(coef @ mean_x)
    params = PropagatorParams(order=order, theta_state=coef[:order + 1],
                              theta_centroid=coef[order + 1:], bias=bias)
    pred = design @ coef + bias
    rms = float(np.sqrt(np.mean((pred - target) ** 2)))
    return PropagatorFit(params=params, residual_rms=rms,
                         rank_deficient=rank < design.shape[1])


# ---------------------------------------------------------------------------
# kinematic spread of the port's truck outflow


def truck_lag_intervals(graph: LinkGraph, ffs_truck: float,
                        interval_minutes: int = 15) -> np.ndarray:
    """Travel lag (whole intervals) from the port to each node."""
    hours = graph.distance_km / ffs_truck
    return np.floor(hours / (interval_minutes / 60.0)).astype(np.int64)


def spread_truck_outflow(graph: LinkGraph, outflow_per_interval: np.ndarray,
                         port_weights: dict[str, float], ffs_truck: float,
                         interval_minutes: int = 15) -> np.ndarray:
    """(n_nodes, n_intervals) truck flow implied by the port outflow series.

    Each corridor carries its configured share of the outflow, delayed by
    the kinematic travel lag to each detector.
    """
    n_int = outflow_per_interval.shape[0]
    lags = truck_lag_intervals(graph, ffs_truck, interval_minutes)
    q = np.zeros((graph.n_nodes, n_int))
    for i, corridor in enumerate(graph.corridor_of):
        share = 1.0 if corridor == "PORT" else port_weights.get(corridor, 0.0)
        lag = int(lags[i])
        if lag == 0:
            q[i] = share * outflow_per_interval
        else:
            q[i, lag:] = share * outflow_per_interval[:-lag]
    return q


# ---------------------------------------------------------------------------
# solution assessment for the slot optimizer


@dataclass
class TrafficAssessor:
    """Prices a candidate departure schedule against the baseline day.

    The baseline states already contain the base truck outflow; a candidate
    only shifts the delta, spread over the corridors with the same kinematic
    lags the synthetic generator uses, after which speeds respond through
    the speed-flow relation and losses are re-priced.
    """

    graph: LinkGraph
    base: LinkStateSeries
    etd_base: np.ndarray            # (n_terminals, 24) departures per hour
    cfg: TrafficConfig
    scale: float = 1.0
    vot_passenger: float = 10.0
    vot_truck: float = 45.0

    def __post_init__(self):
        iph = self.base.intervals_per_hour
        self._sf = SpeedFlow(ffs=self.cfg.ffs_passenger,
                             critical_speed=self.cfg.critical_speed,
                             capacity_veh_h=self.cfg.capacity_veh_h,
                             jam_demand_veh_h=self.cfg.jam_demand_veh_h)
        self._iph = iph
        self._base_hourly = np.asarray(self.etd_base, dtype=np.float64).sum(axis=0)
        self.base_loss = loss_matrix(self.base, self.graph, self.cfg.ffs_passenger,
                                     self.cfg.ffs_truck, self.vot_passenger,
                                     self.vot_truck)
        self.base_cost = float(self.base_loss.sum())

    def loss_for(self, etd_by_terminal) -> np.ndarray:
        """(n_nodes, n_intervals) euro loss under a candidate ETD schedule."""
        return self._loss_chunk(self._delta_interval(etd_by_terminal)[None, :])[0]

    def _delta_interval(self, etd_by_terminal) -> np.ndarray:
        etd = np.atleast_2d(np.asarray(etd_by_terminal, dtype=np.float64))
        delta_hourly = (etd.sum(axis=0) - self._base_hourly) * self.scale
        return np.repeat(delta_hourly / self._iph, self._iph)

    def _loss_chunk(self, deltas: np.ndarray) -> np.ndarray:
        """Loss matrices for a chunk of per-interval delta series (m, T)."""
        m = deltas.shape[0]
        n_int = deltas.shape[1]
        lags = truck_lag_intervals(self.graph, self.cfg.ffs_truck,
                                   self.cfg.interval_minutes)
        shares = np.array([1.0 if c == "PORT" else self.cfg.port_weights.get(c, 0.0)
                           for c in self.graph.corridor_of])
        dq = np.zeros((m, self.graph.n_nodes, n_int))
        for lag in np.unique(lags):
            nodes = np.nonzero(lags == lag)[0]
            if lag == 0:
                shifted = deltas
            else:
                shifted = np.zeros_like(deltas)
                shifted[:, lag:] = deltas[:, :-lag]
            dq[:, nodes, :] = shares[nodes][None, :, None] * shifted[:, None, :]
        q_truck = np.maximum(self.base.q_truck[None] + dq, 0.0)
        demand = (self.base.q_passenger[None] + q_truck) * self._iph
        v = self._sf.speed(demand, clip=True)
        v_t = np.minimum(v, self.cfg.ffs_truck)
        lengths = self.graph.lengths_km[None, :, None]
        vlh_p = np.maximum(self.base.q_passenger[None] * lengths / v
                           - self.base.q_passenger[None] * lengths / self.cfg.ffs_passenger,
                           0.0)
        vlh_t = np.maximum(q_truck * lengths / v_t
                           - q_truck * lengths / self.cfg.ffs_truck, 0.0)
        return self.vot_passenger * vlh_p + self.vot_truck * vlh_t

    def assess_batch(self, etds: np.ndarray, chunk: int = 48) -> np.ndarray:
        """Total euro loss per candidate; ``etds`` is (pop, n_terminals, 24)."""
        pop = etds.shape[0]
        deltas = np.stack([self._delta_interval(etds[i]) for i in range(pop)])
        out = np.empty(pop)
        for lo in range(0, pop, chunk):
            hi = min(lo + chunk, pop)
            out[lo:hi] = self._loss_chunk(deltas[lo:hi]).sum(axis=(1, 2))
        return out

    def corridor_totals(self, loss: np.ndarray) -> dict[str, float]:
        totals: dict[str, float] = {}
        per_node = loss.sum(axis=1)
        for i, corridor in enumerate(self.graph.corridor_of):
            totals[corridor] = totals.get(corridor, 0.0) + float(per_node[i])
        return totals


# ---------------------------------------------------------------------------
# congestion-delay attribute profiles


def delay_profiles(series: LinkStateSeries, graph: LinkGraph,
                   ffs_truck: float) -> np.ndarray:
    """Hourly truck delay in hours/km averaged over the network."""
    v_t = series.v_truck(ffs_truck)
    delay = np.maximum(1.0 / v_t - 1.0 / ffs_truck, 0.0)
    per_interval = delay.mean(axis=0)
    iph = series.intervals_per_hour
    n_hours = per_interval.size // iph
    return per_interval[:n_hours * iph].reshape(n_hours, iph).mean(axis=1)
