"""Four-objective slot-assignment and crane-allocation search.

Candidate plans pair a categorical slot gene per request with an integer
crane gene per adjustable terminal slot.  Objectives: carrier planning
disutility (unitless), gate waiting cost, crane service cost and road
traffic cost (euros).  The search is a controlled elitist genetic
algorithm in the NSGA-II family: fast non-dominated sorting, crowding
distance, constrained-dominance tournaments and (mu + lambda) survival
with a capped share of the population on the first front.  An archive of
every feasible non-dominated candidate encountered forms the returned
front, so no returned point is dominated by anything evaluated.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from portslot import kernels
from portslot.domain import CostVector, GaConfig, ParetoSolution, SlotRequest
from portslot.gate import UnstableQueueError, mms_wait_time
from portslot.traffic import TrafficAssessor

log = logging.getLogger(__name__)

N_SLOTS = 24


@dataclass
class TerminalContext:
    """One terminal's gate state inside an optimization window."""

    name: str
    eta: np.ndarray               # (24,) expected truck arrivals per slot
    mu: float
    cranes_base: np.ndarray       # (24,) int; committed or calibrated cranes
    adjustable: np.ndarray        # (24,) bool; slots the GA may re-crane
    costed: np.ndarray            # (24,) bool; slots included in the crane cost
    s_max: int = 8
    crane_cost: float = 205.0


@dataclass
class OptimizationContext:
    """Everything a candidate plan is scored against; immutable during a run."""

    requests: list[SlotRequest]
    eligible: list[np.ndarray]        # allowed slot indices per request
    requested_slot: np.ndarray        # (R,) int
    request_terminal: np.ndarray      # (R,) int index into terminals
    terminals: list[TerminalContext]
    plan_cost: np.ndarray             # (R, 24) planning cost per request and slot
    idle_cost: float = 38.0
    traffic: TrafficAssessor | None = None
    penalty_wait_hours: float = 24.0

    def validate(self) -> list[str]:
        problems = []
        r = len(self.requests)
        if not (len(self.eligible) == self.requested_slot.shape[0]
                == self.request_terminal.shape[0] == r):
            problems.append("request arrays are inconsistent")
            return problems
        for i, elig in enumerate(self.eligible):
            if len(elig) == 0:
                problems.append(f"request {self.requests[i].request_id} has no eligible slot")
            elif self.requested_slot[i] not in elig:
                problems.append(f"request {self.requests[i].request_id} cannot keep "
                                f"its requested slot")
        for k, term in enumerate(self.terminals):
            counts = np.bincount(self.requested_slot[self.request_terminal == k],
                                 minlength=N_SLOTS)
            over = counts > term.eta + 1e-9
            if over.any():
                t = int(np.nonzero(over)[0][0])
                problems.append(f"terminal {term.name}: requests for slot {t} exceed "
                                f"the expected arrivals ({counts[t]} > {term.eta[t]:.2f})")
        return problems

    @property
    def n_crane_genes(self) -> int:
        return int(sum(int(t.adjustable.sum()) for t in self.terminals))


def crane_unit_cost(alpha: float, peak, labor_cost: float = 50.0,
                    crew_per_lane: float = 2.5, idle_cost: float = 38.0,
                    benefit: float | None = None) -> float:
    """Hourly shadow price of one gate crane.

    Crew wages plus alpha times the peak-hour waiting saving an extra crane
    would buy (the terminal's opportunity cost of keeping the crane on the
    gate side instead of the yard).  ``peak`` carries the calibrated peak
    rates (lam, mu, s); an explicit ``benefit`` overrides the queue model.
    """
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    if benefit is None:
        lam, mu, s = peak.lam, peak.mu, peak.s
        n_now = lam * mms_wait_time(lam, mu, s)          # raises when saturated
        n_plus = lam * mms_wait_time(lam, mu, s + 1)
        benefit = idle_cost * (n_now - n_plus)
    return crew_per_lane * labor_cost + alpha * benefit


@dataclass(frozen=True)
class PeakStats:
    lam: float
    mu: float
    s: int


def update_eta(eta, requests: list[SlotRequest], assignment: dict[str, int],
               n_slots: int = N_SLOTS) -> np.ndarray:
    """Roll the expected-arrivals profile forward over one planning window.

    Slots lose the requests that were moved away and gain the ones moved
    in; totals are conserved.  Negative values (possible when assignments
    outrun the forecast) are clamped to zero with a warning.
    """
    out = np.asarray(eta, dtype=np.float64).copy()
    for r in requests:
        target = assignment[r.request_id]
        if target != r.requested_slot.index:
            out[r.requested_slot.index] -= 1.0
            out[target] += 1.0
    if (out < -1e-9).any():
        log.warning("expected arrivals went negative after reassignment; clamping")
    return np.maximum(out, 0.0)


# ---------------------------------------------------------------------------
# objective evaluation (vectorized across a population)


def _erlang_wait_grid(lam: np.ndarray, mu: float, cranes: np.ndarray, s_max: int,
                      penalty: float) -> np.ndarray:
    """Erlang-C waits elementwise over arrays of rates and server counts.

    Saturated cells get the finite penalty wait so search can traverse
    infeasible load patterns; empty cells wait zero.
    """
    a = lam / mu
    waits = np.full(lam.shape, penalty, dtype=np.float64)
    for s in range(1, s_max + 1):
        mask = (cranes == s) & (a < s)
        if not mask.any():
            continue
        am = a[mask]
        term = np.ones_like(am)
        total = np.ones_like(am)
        for n in range(1, s):
            term = term * am / n
            total = total + term
        tail = term * am / (s - am)
        c = tail / (total + tail)
        waits[mask] = c / (mu * (s - am))
    waits[a <= 0] = 0.0
    return waits


class PopulationEvaluator:
    """Scores whole populations; the single-solution path reuses it."""

    def __init__(self, ctx: OptimizationContext):
        self.ctx = ctx
        self.r = len(ctx.requests)
        self.req_idx = np.arange(self.r)
        self.term_requests = [np.nonzero(ctx.request_terminal == k)[0]
                              for k in range(len(ctx.terminals))]
        self.req_counts = [np.bincount(ctx.requested_slot[idx], minlength=N_SLOTS)
                           .astype(np.float64) for idx in self.term_requests]
        self.crane_slots = []          # (terminal index, slot) per crane gene
        for k, term in enumerate(ctx.terminals):
            for t in np.nonzero(term.adjustable)[0]:
                self.crane_slots.append((k, int(t)))

    def crane_grid(self, crane_genes: np.ndarray) -> np.ndarray:
        """(pop, n_terminals, 24) crane matrix from the gene block."""
        pop = crane_genes.shape[0]
        grid = np.stack([np.tile(term.cranes_base.astype(np.float64), (pop, 1))
                         for term in self.ctx.terminals], axis=1)
        for g, (k, t) in enumerate(self.crane_slots):
            grid[:, k, t] = crane_genes[:, g]
        return grid

    def adjusted_eta(self, slot_genes: np.ndarray) -> np.ndarray:
        """(pop, n_terminals, 24) arrivals after applying the assignments."""
        pop = slot_genes.shape[0]
        eta = np.stack([np.tile(term.eta, (pop, 1)) for term in self.ctx.terminals],
                       axis=1)
        rows = np.repeat(np.arange(pop), self.r)
        for k, idx in enumerate(self.term_requests):
            if idx.size == 0:
                continue
            assigned = np.zeros((pop, N_SLOTS))
            np.add.at(assigned, (np.repeat(np.arange(pop), idx.size),
                                 slot_genes[:, idx].ravel()), 1.0)
            eta[:, k, :] += assigned - self.req_counts[k]
        return np.maximum(eta, 0.0)

    def evaluate(self, slot_genes: np.ndarray, crane_genes: np.ndarray) -> np.ndarray:
        """(pop, 4) objective matrix."""
        ctx = self.ctx
        pop = slot_genes.shape[0]
        z = np.zeros((pop, 4))
        if self.r:
            z[:, 0] = ctx.plan_cost[self.req_idx[None, :], slot_genes].sum(axis=1)
        eta = self.adjusted_eta(slot_genes)
        cranes = self.crane_grid(crane_genes)
        for k, term in enumerate(ctx.terminals):
            waits = _erlang_wait_grid(eta[:, k, :], term.mu, cranes[:, k, :],
                                      term.s_max, ctx.penalty_wait_hours)
            z[:, 1] += ctx.idle_cost * (eta[:, k, :] * waits).sum(axis=1)
            z[:, 2] += term.crane_cost * (cranes[:, k, :] * term.costed).sum(axis=1)
        if ctx.traffic is not None:
            z[:, 3] = ctx.traffic.assess_batch(eta)
        return z


def evaluate_objectives(solution: ParetoSolution, ctx: OptimizationContext) -> CostVector:
    """Pure objective evaluation of one plan (deterministic given inputs)."""
    slot_genes, crane_genes = _genes_from_solution(solution, ctx)
    z = PopulationEvaluator(ctx).evaluate(slot_genes[None, :], crane_genes[None, :])[0]
    return CostVector(z1=float(z[0]), z2=float(z[1]), z3=float(z[2]), z4=float(z[3]))


def _genes_from_solution(solution: ParetoSolution, ctx: OptimizationContext):
    slot_genes = np.array([solution.assignment[r.request_id] for r in ctx.requests],
                          dtype=np.int64)
    crane_genes = []
    for k, term in enumerate(ctx.terminals):
        vec = solution.cranes[term.name]
        for t in np.nonzero(term.adjustable)[0]:
            crane_genes.append(vec[int(t)])
    return slot_genes, np.array(crane_genes, dtype=np.int64)


def _solution_from_genes(slot_genes, crane_genes, objectives, ctx: OptimizationContext,
                         feasible: bool = True) -> ParetoSolution:
    assignment = {r.request_id: int(s) for r, s in zip(ctx.requests, slot_genes)}
    cranes = {}
    g = 0
    for term in ctx.terminals:
        vec = term.cranes_base.astype(int).tolist()
        for t in np.nonzero(term.adjustable)[0]:
            vec[int(t)] = int(crane_genes[g])
            g += 1
        cranes[term.name] = vec
    return ParetoSolution(assignment=assignment, cranes=cranes,
                          objectives=CostVector(*[float(v) for v in objectives]),
                          feasible=feasible)


def identity_solution(ctx: OptimizationContext) -> ParetoSolution:
    slot_genes = ctx.requested_slot.copy()
    crane_genes = np.array([ctx.terminals[k].cranes_base[t]
                            for k, t in PopulationEvaluator(ctx).crane_slots],
                           dtype=np.int64)
    z = PopulationEvaluator(ctx).evaluate(slot_genes[None, :], crane_genes[None, :])[0]
    return _solution_from_genes(slot_genes, crane_genes, z, ctx)


def feasible(solution: ParetoSolution, ctx: OptimizationContext) -> tuple[bool, list[str]]:
    """Constraint check with one named violation per broken rule."""
    violations = list(ctx.validate())
    ids = {r.request_id for r in ctx.requests}
    if set(solution.assignment) != ids:
        violations.append("assignment must cover every request exactly once")
    for i, r in enumerate(ctx.requests):
        t = solution.assignment.get(r.request_id)
        if t is None:
            continue
        if t not in ctx.eligible[i]:
            violations.append(f"request {r.request_id}: slot {t} breaks the "
                              f"lead-time/working-hours rule")
    for term in ctx.terminals:
        vec = solution.cranes.get(term.name)
        if vec is None or len(vec) != N_SLOTS:
            violations.append(f"terminal {term.name}: crane vector missing")
            continue
        arr = np.asarray(vec)
        if (arr <= 0).any() or (arr >= term.s_max).any():
            violations.append(f"terminal {term.name}: crane counts must stay "
                              f"strictly between 0 and {term.s_max}")
        if not np.issubdtype(arr.dtype, np.integer):
            violations.append(f"terminal {term.name}: crane counts must be integers")
    total_assigned = len(solution.assignment)
    if total_assigned != len(ids):
        violations.append("each request maps to exactly one slot")
    return (not violations), violations


# ---------------------------------------------------------------------------
# non-dominated sorting and crowding


def nondominated_sort(objectives: np.ndarray) -> list[np.ndarray]:
    """Fronts (index arrays) for minimization on every objective."""
    objs = np.asarray(objectives, dtype=np.float64)
    if not np.isfinite(objs).all():
        raise ValueError("objectives must be finite")
    ranks = kernels.nondomination_ranks(objs)
    fronts = []
    for r in range(int(ranks.max()) + 1 if ranks.size else 0):
        fronts.append(np.nonzero(ranks == r)[0])
    return fronts


def crowding_distance(front_objectives: np.ndarray) -> np.ndarray:
    """Crowding distance with two guards: zero-range objectives contribute
    nothing, and repeated objective vectors add no diversity, so only the
    first copy carries the distance and the rest score a finite zero."""
    objs = np.asarray(front_objectives, dtype=np.float64)
    n, m = objs.shape
    if n == 0:
        raise ValueError("front must be nonempty")
    uniq, first_idx, inverse = np.unique(objs, axis=0, return_index=True,
                                         return_inverse=True)
    k = uniq.shape[0]
    udist = np.zeros(k)
    for j in range(m):
        order = np.argsort(uniq[:, j], kind="stable")
        col = uniq[order, j]
        span = col[-1] - col[0]
        udist[order[0]] = np.inf
        udist[order[-1]] = np.inf
        if span > 0 and k > 2:
            gaps = (col[2:] - col[:-2]) / span
            udist[order[1:-1]] += gaps
    dist = np.zeros(n)
    representative = first_idx[inverse]
    mine = representative == np.arange(n)
    dist[mine] = udist[inverse[mine]]
    return dist


# ---------------------------------------------------------------------------
# the evolutionary loop


@dataclass
class ParetoFront:
    solutions: list[ParetoSolution]
    objectives: np.ndarray
    base: ParetoSolution
    requested: dict[str, int]
    hypervolume_log: list[tuple[int, float]] = field(default_factory=list)
    n_evaluations: int = 0
    all_feasible: bool = True

    def to_json_obj(self) -> list[dict]:
        from portslot.domain import solution_to_dict
        return [solution_to_dict(s) for s in self.solutions]


def hypervolume_mc(objectives: np.ndarray, reference: np.ndarray,
                   n_samples: int = 20000, seed: int = 0) -> float:
    """Monte Carlo dominated-hypervolume estimate against a reference point."""
    objs = np.asarray(objectives, dtype=np.float64)
    ref = np.asarray(reference, dtype=np.float64)
    keep = (objs <= ref).all(axis=1)
    objs = objs[keep]
    if objs.shape[0] == 0:
        return 0.0
    lo = objs.min(axis=0)
    box = np.prod(ref - lo)
    if box <= 0:
        return 0.0
    rng = np.random.default_rng(seed)
    pts = rng.uniform(lo, ref, size=(n_samples, objs.shape[1]))
    dominated = np.zeros(n_samples, dtype=bool)
    undecided = np.arange(n_samples)
    for row in objs:
        hit = (row <= pts[undecided]).all(axis=1)
        dominated[undecided[hit]] = True
        undecided = undecided[~hit]
        if undecided.size == 0:
            break
    return float(box * dominated.mean())


def _tournament(rng, ranks, crowd, order_feasible, violations):
    i, j = rng.integers(0, ranks.shape[0], size=2)
    if order_feasible[i] != order_feasible[j]:
        return i if order_feasible[i] else j
    if not order_feasible[i]:
        return i if violations[i] <= violations[j] else j
    if ranks[i] != ranks[j]:
        return i if ranks[i] < ranks[j] else j
    return i if crowd[i] >= crowd[j] else j


def _survivors(objs, pop_size, pareto_fraction):
    fronts = nondominated_sort(objs)
    quota_first = max(1, int(np.ceil(pareto_fraction * pop_size)))
    chosen: list[int] = []
    leftovers: list[int] = []
    for fi, front in enumerate(fronts):
        room = pop_size - len(chosen)
        if room <= 0:
            break
        cap = min(quota_first, room) if fi == 0 else room
        if front.size <= cap:
            chosen.extend(front.tolist())
            continue
        crowd = crowding_distance(objs[front])
        order = np.argsort(-crowd, kind="stable")
        chosen.extend(front[order[:cap]].tolist())
        leftovers.extend(front[order[cap:]].tolist())
    if len(chosen) < pop_size:
        chosen.extend(leftovers[:pop_size - len(chosen)])
    return np.array(chosen[:pop_size], dtype=np.int64)


class _Archive:
    """Feasible non-dominated candidates seen so far, deduplicated."""

    def __init__(self, cap: int = 512):
        self.cap = cap
        self.slot_genes: list[np.ndarray] = []
        self.crane_genes: list[np.ndarray] = []
        self.objs: np.ndarray | None = None
        self._seen: set[bytes] = set()

    def update(self, slots, cranes, objs):
        for i in range(objs.shape[0]):
            key = slots[i].tobytes() + cranes[i].tobytes()
            if key in self._seen:
                continue
            self._seen.add(key)
            self.slot_genes.append(slots[i].copy())
            self.crane_genes.append(cranes[i].copy())
            row = objs[i][None, :]
            self.objs = row if self.objs is None else np.vstack([self.objs, row])
        if self.objs is None:
            return
        ranks = kernels.nondomination_ranks(self.objs)
        keep = np.nonzero(ranks == 0)[0]
        if keep.size > self.cap:
            crowd = crowding_distance(self.objs[keep])
            keep = keep[np.argsort(-crowd, kind="stable")[:self.cap]]
            keep.sort()
        self._select(keep)

    def _select(self, keep):
        self.slot_genes = [self.slot_genes[i] for i in keep]
        self.crane_genes = [self.crane_genes[i] for i in keep]
        self.objs = self.objs[keep]
        self._seen = {s.tobytes() + c.tobytes()
                      for s, c in zip(self.slot_genes, self.crane_genes)}


def nsga2_run(ctx: OptimizationContext, config: GaConfig,
              on_generation=None) -> ParetoFront:
    """Evolve assignments and crane allocations; deterministic per seed.

    Returns the archive of feasible non-dominated candidates (the identity
    plan is always evaluated, so the front is never empty).
    ``on_generation(gen, total)`` is called once per generation when given.
    """
    problems = ctx.validate()
    if problems:
        raise ValueError("invalid optimization context: " + "; ".join(problems))
    if config.population < 8 or config.population % 2:
        raise ValueError("population must be even and at least 8")
    rng = np.random.default_rng(config.seed)
    ev = PopulationEvaluator(ctx)
    r = len(ctx.requests)
    n_cranes = len(ev.crane_slots)
    genome_len = max(1, r + n_cranes)
    mut_rate = config.mutation_rate if config.mutation_rate is not None else 1.0 / genome_len

    elig = ctx.eligible
    base_cranes = np.array([ctx.terminals[k].cranes_base[t] for k, t in ev.crane_slots],
                           dtype=np.int64)
    s_max = np.array([ctx.terminals[k].s_max for k, _ in ev.crane_slots], dtype=np.int64)

    def random_individual():
        slots = np.array([elig[i][rng.integers(0, len(elig[i]))] for i in range(r)],
                         dtype=np.int64)
        cranes = np.array([rng.integers(1, s_max[g]) for g in range(n_cranes)],
                          dtype=np.int64)
        return slots, cranes

    pop = config.population
    slot_pop = np.empty((pop, r), dtype=np.int64)
    crane_pop = np.empty((pop, n_cranes), dtype=np.int64)
    slot_pop[0] = ctx.requested_slot
    crane_pop[0] = base_cranes
    for i in range(1, pop):
        slot_pop[i], crane_pop[i] = random_individual()

    objs = ev.evaluate(slot_pop, crane_pop)
    n_evaluations = pop
    base_solution = _solution_from_genes(slot_pop[0], crane_pop[0], objs[0], ctx)
    archive = _Archive()
    archive.update(slot_pop, crane_pop, objs)
    reference = objs.max(axis=0) * 1.05 + 1.0
    hv_samples = 2500   # a log-grade estimate; the harness re-measures precisely
    hv_log = [(0, hypervolume_mc(archive.objs, reference, n_samples=hv_samples,
                                 seed=config.seed))]

    feasible_flags = np.ones(pop, dtype=bool)
    violation_counts = np.zeros(pop)
    for gen in range(1, config.generations + 1):
        fronts = nondominated_sort(objs)
        ranks = np.empty(pop, dtype=np.int64)
        crowd = np.empty(pop)
        for fi, front in enumerate(fronts):
            ranks[front] = fi
            crowd[front] = crowding_distance(objs[front])

        child_slots = np.empty_like(slot_pop)
        child_cranes = np.empty_like(crane_pop)
        for pair in range(pop // 2):
            a = _tournament(rng, ranks, crowd, feasible_flags, violation_counts)
            b = _tournament(rng, ranks, crowd, feasible_flags, violation_counts)
            sa, sb = slot_pop[a].copy(), slot_pop[b].copy()
            ca, cb = crane_pop[a].copy(), crane_pop[b].copy()
            if rng.random() < config.crossover_rate:
                if r:
                    swap = rng.random(r) < 0.5
                    sa[swap], sb[swap] = sb[swap], sa[swap].copy()
                if n_cranes:
                    swap = rng.random(n_cranes) < 0.5
                    ca[swap], cb[swap] = cb[swap], ca[swap].copy()
            for child_s, child_c in ((sa, ca), (sb, cb)):
                for i in range(r):
                    if rng.random() < mut_rate:
                        child_s[i] = elig[i][rng.integers(0, len(elig[i]))]
                for g in range(n_cranes):
                    if rng.random() < mut_rate:
                        # half resets, half unit steps: the steps refine the
                        # crane/wait trade-off around good allocations
                        if rng.random() < 0.5:
                            child_c[g] = rng.integers(1, s_max[g])
                        else:
                            step = 1 if rng.random() < 0.5 else -1
                            child_c[g] = min(max(int(child_c[g]) + step, 1),
                                             int(s_max[g]) - 1)
            child_slots[2 * pair], child_cranes[2 * pair] = sa, ca
            child_slots[2 * pair + 1], child_cranes[2 * pair + 1] = sb, cb

        child_objs = ev.evaluate(child_slots, child_cranes)
        n_evaluations += pop
        archive.update(child_slots, child_cranes, child_objs)

        all_slots = np.vstack([slot_pop, child_slots])
        all_cranes = np.vstack([crane_pop, child_cranes])
        all_objs = np.vstack([objs, child_objs])
        keep = _survivors(all_objs, pop, config.pareto_fraction)
        slot_pop, crane_pop, objs = all_slots[keep], all_cranes[keep], all_objs[keep]
        hv_log.append((gen, hypervolume_mc(archive.objs, reference,
                                           n_samples=hv_samples, seed=config.seed)))
        if on_generation is not None:
            on_generation(gen, config.generations)

    # small genomes get an exhaustive neighbourhood polish to a fixed point;
    # larger ones only a light budgeted sweep (the GA itself carries them)
    small = genome_len <= 24
    n_evaluations += _polish_archive(
        archive, ev, ctx, rng,
        budget=max(4000, 20 * config.population) if small else 3 * config.population,
        rounds=10 if small else 2)
    solutions = [_solution_from_genes(archive.slot_genes[i], archive.crane_genes[i],
                                      archive.objs[i], ctx)
                 for i in range(archive.objs.shape[0])]
    requested = {r_.request_id: int(s) for r_, s in zip(ctx.requests, ctx.requested_slot)}
    return ParetoFront(solutions=solutions, objectives=archive.objs.copy(),
                       base=base_solution, requested=requested,
                       hypervolume_log=hv_log, n_evaluations=n_evaluations)


def _polish_archive(archive: "_Archive", ev: PopulationEvaluator,
                    ctx: OptimizationContext, rng, budget: int,
                    rounds: int = 10) -> int:
    """Evaluate near neighbours of archive members to sharpen the front.

    Near-optimal points often sit one reassignment, one crane step or one
    total-conserving crane transfer away from a dominating plan the main
    loop never sampled; sweeping those neighbours between rounds removes
    such stragglers.  The budget caps evaluations per round; neighbours are
    subsampled when it binds.
    """
    r = len(ctx.requests)
    total = 0
    previous = None
    for _ in range(rounds):
        if archive.objs is not None:
            signature = archive.objs.tobytes()
            if signature == previous:
                break
            previous = signature
        cand_slots, cand_cranes = [], []
        seen = set(archive._seen)

        def propose(s, c):
            key = s.tobytes() + c.tobytes()
            if key not in seen:
                seen.add(key)
                cand_slots.append(s)
                cand_cranes.append(c)

        for i in range(len(archive.slot_genes)):
            s0, c0 = archive.slot_genes[i], archive.crane_genes[i]
            n_genes = c0.shape[0]
            for g in range(n_genes):
                hi = ctx.terminals[ev.crane_slots[g][0]].s_max
                for step in (-1, 1):
                    v = int(c0[g]) + step
                    if 1 <= v < hi:
                        c = c0.copy()
                        c[g] = v
                        propose(s0.copy(), c)
            for g_up in range(n_genes):         # crane transfers keep z3 fixed
                hi_up = ctx.terminals[ev.crane_slots[g_up][0]].s_max
                if c0[g_up] + 1 >= hi_up:
                    continue
                for g_dn in range(n_genes):
                    if g_dn == g_up or c0[g_dn] <= 1:
                        continue
                    c = c0.copy()
                    c[g_up] += 1
                    c[g_dn] -= 1
                    propose(s0.copy(), c)
            gene_of = {(k, t): g for g, (k, t) in enumerate(ev.crane_slots)}
            for q in range(r):
                k = int(ctx.request_terminal[q])
                for alt in ctx.eligible[q]:
                    if alt == s0[q]:
                        continue
                    s = s0.copy()
                    s[q] = alt
                    propose(s, c0.copy())
                    # demand and capacity moved together
                    g_from = gene_of.get((k, int(s0[q])))
                    g_to = gene_of.get((k, int(alt)))
                    if g_from is None or g_to is None:
                        continue
                    hi_to = ctx.terminals[k].s_max
                    if c0[g_from] > 1 and c0[g_to] + 1 < hi_to:
                        c = c0.copy()
                        c[g_from] -= 1
                        c[g_to] += 1
                        propose(s.copy(), c)
        if not cand_slots:
            break
        if len(cand_slots) > budget:
            pick = rng.choice(len(cand_slots), size=budget, replace=False)
            cand_slots = [cand_slots[i] for i in pick]
            cand_cranes = [cand_cranes[i] for i in pick]
        slots = np.stack(cand_slots)
        cranes = np.stack(cand_cranes) if cand_cranes[0].size else \
            np.zeros((len(cand_cranes), 0), dtype=np.int64)
        objs = ev.evaluate(slots, cranes)
        total += objs.shape[0]
        archive.update(slots, cranes, objs)
    return total


# ---------------------------------------------------------------------------
# selection policies

POLICIES = ("MAX_MONETARY_GAIN", "MIN_Z1", "MIN_Z2", "MIN_Z3", "MIN_Z4", "WEIGHTED")


def select_solution(front: ParetoFront, policy: str = "MAX_MONETARY_GAIN",
                    weights: tuple[float, float, float, float] | None = None,
                    shift_friction_eur: float = 0.0,
                    action_threshold_eur: float = 0.0) -> ParetoSolution:
    """Pick one solution off the front.

    MAX_MONETARY_GAIN maximizes the euro saving versus the base plan,
    deliberately ignoring the unitless disutility; euro ties break toward
    lower disutility, then toward fewer reassigned requests.  The optional
    friction terms discount a plan's gain by a margin per rescheduled
    carrier (plus a flat threshold for disturbing anyone at all), so
    noise-level gains never justify reshuffling carriers; with the default
    zeros the selection is the plain arg-max of the euro gain.
    """
    if not front.solutions:
        raise ValueError("empty front")
    objs = front.objectives
    if policy == "MAX_MONETARY_GAIN":
        base_money = front.base.objectives.money_total()
        gains = base_money - objs[:, 1:].sum(axis=1)
        shifts = np.array([s.shifted(front.requested) for s in front.solutions])
        net = gains - shift_friction_eur * shifts \
            - action_threshold_eur * (shifts > 0)
        best = np.max(net)
        if best < 0:
            return front.base  # nothing on the front is worth acting on
        tied = np.nonzero(net >= best - 1e-9)[0]
        if tied.size > 1:
            z1 = objs[tied, 0]
            tied = tied[z1 <= z1.min() + 1e-9]
        if tied.size > 1:
            tied = tied[shifts[tied] == shifts[tied].min()]
        return front.solutions[int(tied[0])]
    if policy in ("MIN_Z1", "MIN_Z2", "MIN_Z3", "MIN_Z4"):
        col = int(policy[-1]) - 1
        return front.solutions[int(np.argmin(objs[:, col]))]
    if policy == "WEIGHTED":
        if weights is None:
            raise ValueError("WEIGHTED policy needs a weight vector")
        w = np.asarray(weights, dtype=np.float64)
        return front.solutions[int(np.argmin(objs @ w))]
    raise ValueError(f"unknown policy {policy!r}")
