"""Failure prediction and on-demand protection-policy control.

The predictor compounds each unit's effective per-step hazard (base rate
times active zone multipliers) over a look-ahead window; the controller
activates protection mechanisms on compute nodes whose predicted failure
probability crosses a threshold, with hysteresis, and accounts for work,
energy, downtime, and administrator notifications.  Three policy modes
are supported: none, always-on, and on-demand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, AbstractSet

import numpy as np

from .reliability import CompositionTree, DomainError
from .simulation import (
    EffectivenessZone,
    TreeIndex,
    ZoneParams,
)
from .topology import LAYER_NODE
from .rng import SIM_CHUNK_STEPS, sim_stream

__all__ = [
    "MODE_NONE",
    "MODE_ALWAYS_ON",
    "MODE_ON_DEMAND",
    "MECH_CHECKPOINT",
    "MECH_REDUNDANCY",
    "MECH_MIGRATION",
    "MECH_ISOLATION",
    "REASON_NO_SURROGATE",
    "REASON_MECH_UNAVAILABLE",
    "ProtectionMechanism",
    "ProtectionPolicy",
    "AdminNotification",
    "RunMetrics",
    "SystemState",
    "PolicyStats",
    "StateError",
    "predict",
    "decide",
    "run_policy",
    "compare_policies",
    "default_policies",
    "DEFAULT_CHECKPOINT",
    "DEFAULT_POLICY_STUDY_ZONES",
    "METRIC_FIELDS",
]

MODE_NONE = "none"
MODE_ALWAYS_ON = "always-on"
MODE_ON_DEMAND = "on-demand"

MECH_CHECKPOINT = "checkpoint-restart"
MECH_REDUNDANCY = "redundancy"
MECH_MIGRATION = "migration"
MECH_ISOLATION = "isolation"
_MECHANISM_KINDS = (MECH_CHECKPOINT, MECH_REDUNDANCY, MECH_MIGRATION, MECH_ISOLATION)

REASON_NO_SURROGATE = "no-surrogate-available"
REASON_MECH_UNAVAILABLE = "mechanism-unavailable"

# Work is accounted in integer ticks so completed + lost == produced holds
# exactly in every run.
WORK_TICKS = 1 << 20

# Isolated nodes are parked: they earn nothing and draw idle power.
ISOLATION_IDLE_ENERGY_FACTOR = 0.2

# Activation thresholds are calibrated to the baseline rates table: a
# node's 10-step window prediction sits near 4e-5 when quiet and rises
# past 1.6e-4 inside an active zone of the policy-study shape below, so
# the hysteresis band [6e-5, 1e-4] switches protection on exactly for
# escalated nodes and back off once zones expire.
DEFAULT_ACTIVATE_THRESHOLD = 1e-4
DEFAULT_DEACTIVATE_THRESHOLD = 6e-5
DEFAULT_PREDICTION_WINDOW = 10
DEFAULT_BASE_ENERGY = 1.0
DEFAULT_SPARES_PER_RACK = 2

# Zone shape used for policy comparisons: long, strong escalation windows
# give the predictor something to react to within a 1e4-step horizon at
# baseline hazard scales.
DEFAULT_POLICY_STUDY_ZONES = ZoneParams(radius=1, window=100, multiplier=4.0)


class StateError(ValueError):
    """A live-state description is inconsistent with the tree."""


@dataclass(frozen=True)
class ProtectionMechanism:
    kind: str
    perf_overhead: float = 0.0  # fraction of work rate consumed while active
    energy_overhead: float = 0.0  # energy per protected unit per step
    activation_latency: int = 0  # steps until the mechanism takes effect

    def __post_init__(self) -> None:
        if self.kind not in _MECHANISM_KINDS:
            raise DomainError(f"unknown mechanism kind {self.kind!r}")
        if not (0.0 <= self.perf_overhead < 1.0):
            raise DomainError("perf_overhead must be in [0, 1)")
        if self.energy_overhead < 0 or not math.isfinite(self.energy_overhead):
            raise DomainError("energy_overhead must be finite and >= 0")
        if self.activation_latency < 0:
            raise DomainError("activation_latency must be >= 0")


DEFAULT_CHECKPOINT = ProtectionMechanism(
    MECH_CHECKPOINT, perf_overhead=0.1, energy_overhead=0.05, activation_latency=0
)


@dataclass(frozen=True)
class ProtectionPolicy:
    mode: str = MODE_ON_DEMAND
    mechanisms: tuple[ProtectionMechanism, ...] = (DEFAULT_CHECKPOINT,)
    activate_threshold: float = DEFAULT_ACTIVATE_THRESHOLD
    deactivate_threshold: float = DEFAULT_DEACTIVATE_THRESHOLD
    prediction_window: int = DEFAULT_PREDICTION_WINDOW
    spare_nodes: int = 4 * DEFAULT_SPARES_PER_RACK

    def __post_init__(self) -> None:
        if self.mode not in (MODE_NONE, MODE_ALWAYS_ON, MODE_ON_DEMAND):
            raise DomainError(f"unknown policy mode {self.mode!r}")
        if not (0.0 <= self.deactivate_threshold <= self.activate_threshold <= 1.0):
            raise DomainError("need 0 <= deactivate <= activate <= 1")
        if self.prediction_window < 1:
            raise DomainError("prediction_window must be >= 1")
        if self.spare_nodes < 0:
            raise DomainError("spare_nodes must be >= 0")

    def has_mechanism(self, kind: str) -> bool:
        return any(m.kind == kind for m in self.mechanisms)


def default_policies(spare_nodes: int = 4 * DEFAULT_SPARES_PER_RACK) -> tuple[
    ProtectionPolicy, ProtectionPolicy, ProtectionPolicy
]:
    """The none / always-on / on-demand triple with default parameters."""
    return (
        ProtectionPolicy(mode=MODE_NONE, spare_nodes=spare_nodes),
        ProtectionPolicy(mode=MODE_ALWAYS_ON, spare_nodes=spare_nodes),
        ProtectionPolicy(mode=MODE_ON_DEMAND, spare_nodes=spare_nodes),
    )


@dataclass(frozen=True)
class AdminNotification:
    time: int
    zone: EffectivenessZone
    predicted_probability: float
    reason: str


@dataclass(frozen=True)
class RunMetrics:
    completed_work: float
    lost_work: float
    energy: float
    downtime: int
    activations: int
    notifications: tuple[AdminNotification, ...]


METRIC_FIELDS = (
    "completed_work",
    "lost_work",
    "energy",
    "downtime",
    "activations",
    "notifications",
)


@dataclass(frozen=True)
class SystemState:
    """Snapshot of the live system: failed leaf/instance ids plus the
    currently active zones (in activation order)."""

    failed: frozenset[str] = frozenset()
    active_zones: tuple[EffectivenessZone, ...] = ()


def _state_alive_mask(index: TreeIndex, state: SystemState) -> np.ndarray:
    alive = np.ones(index.n_instances, dtype=bool)
    for uid in state.failed:
        if uid in index.instance_index:
            alive[index.instance_index[uid]] = False
        elif uid in index.unit_index:
            u = index.unit_index[uid]
            if index.kind[u] != "leaf":
                raise StateError(f"failed unit {uid!r} is an aggregate; mark leaves")
            alive[index.inst_start[u] : index.inst_end[u]] = False
        else:
            raise StateError(f"failed unit {uid!r} does not exist in the tree")
    return alive


def _zone_span_on(index: TreeIndex, zone: EffectivenessZone) -> tuple[int, int]:
    """Escalation span of a zone against this index.

    Zones carry their span when built from the same index; otherwise it is
    re-derived as the union of the non-ancestor members' instance ranges
    (contiguous, since horizontal members are siblings in preorder).
    """
    if zone._index is index:
        return zone._span
    try:
        origin = index.unit_index[zone.origin_unit]
    except KeyError:
        raise StateError(f"zone origin {zone.origin_unit!r} not in tree") from None
    spans = []
    for mid in zone.member_units:
        try:
            m = index.unit_index[mid]
        except KeyError:
            raise StateError(f"zone member {mid!r} not in tree") from None
        if not index.is_ancestor(m, origin):
            spans.append((index.inst_start[m], index.inst_end[m]))
    if not spans:
        u = origin
        return index.inst_start[u], index.inst_end[u]
    return min(s for s, _ in spans), max(e for _, e in spans)


def _zone_multipliers(index: TreeIndex, zones: Iterable[EffectivenessZone]) -> np.ndarray:
    mult = np.ones(index.n_instances, dtype=np.float64)
    for z in zones:
        s, e = _zone_span_on(index, z)
        mult[s:e] *= z.hazard_multiplier
    return mult


def _window_predictions(
    index: TreeIndex, alive: np.ndarray, mult: np.ndarray, window: int
) -> np.ndarray:
    hazard = np.minimum(index.inst_p * mult, 1.0)
    pred = 1.0 - (1.0 - hazard) ** window
    return np.where(alive, pred, 1.0)


def predict(
    tree: CompositionTree | TreeIndex, state: SystemState, window: int
) -> dict[str, float]:
    """Window failure probability per unit.

    Alive leaf instances compound their effective hazard over ``window``
    steps: 1 - (1 - min(1, p * zone multipliers))^W.  Failed units map to
    1.0, and aggregates compose member predictions with the same
    serial/parallel rules as the analytic model.
    """
    if window < 1:
        raise DomainError("prediction window must be >= 1")
    index = tree if isinstance(tree, TreeIndex) else TreeIndex(tree)
    alive = _state_alive_mask(index, state)
    mult = _zone_multipliers(index, state.active_zones)
    pred_inst = _window_predictions(index, alive, mult, window)

    unit_pred = np.empty(index.n_units, dtype=np.float64)
    for u in range(index.n_units - 1, -1, -1):
        kids = index.children[u]
        if index.kind[u] == "leaf":
            unit_pred[u] = float(
                np.prod(pred_inst[index.inst_start[u] : index.inst_end[u]])
            )
        elif index.kind[u] == "serial":
            survive = 1.0
            for c in kids:
                survive *= 1.0 - unit_pred[c]
            unit_pred[u] = 1.0 - survive
        else:
            fail = 1.0
            for c in kids:
                fail *= unit_pred[c]
            unit_pred[u] = fail
    return {index.unit_id[u]: float(unit_pred[u]) for u in range(index.n_units)}


def _notification_zone(unit_id: str, policy: ProtectionPolicy) -> EffectivenessZone:
    return EffectivenessZone(
        origin_unit=unit_id,
        member_units=frozenset({unit_id}),
        window=policy.prediction_window,
        hazard_multiplier=1.0,
    )


def decide(
    predictions: Mapping[str, float],
    policy: ProtectionPolicy,
    active: AbstractSet[str],
    spares_available: int | None = None,
    now: int = 0,
) -> tuple[frozenset[str], tuple[AdminNotification, ...]]:
    """Next activation set plus administrator notifications.

    Mode none protects nothing; always-on protects every predicted unit.
    On-demand activates units whose prediction crosses the activation
    threshold and keeps them active while above the deactivation
    threshold (hysteresis).  A newly activated unit triggers a
    notification when mitigation is impossible: no mechanisms configured,
    or a surrogate-consuming mechanism (redundancy/migration) is selected
    with no spares left.
    """
    if policy.mode == MODE_NONE:
        return frozenset(), ()
    if policy.mode == MODE_ALWAYS_ON:
        return frozenset(predictions), ()
    spares = policy.spare_nodes if spares_available is None else spares_available
    needs_spare = policy.has_mechanism(MECH_REDUNDANCY) or policy.has_mechanism(
        MECH_MIGRATION
    )
    chosen: set[str] = set()
    notes: list[AdminNotification] = []
    for unit, pred in sorted(predictions.items()):
        if unit in active:
            if pred >= policy.deactivate_threshold:
                chosen.add(unit)
            continue
        if pred >= policy.activate_threshold:
            chosen.add(unit)
            if not policy.mechanisms:
                notes.append(
                    AdminNotification(
                        time=now,
                        zone=_notification_zone(unit, policy),
                        predicted_probability=float(pred),
                        reason=REASON_MECH_UNAVAILABLE,
                    )
                )
            elif needs_spare and spares <= 0:
                notes.append(
                    AdminNotification(
                        time=now,
                        zone=_notification_zone(unit, policy),
                        predicted_probability=float(pred),
                        reason=REASON_NO_SURROGATE,
                    )
                )
    return frozenset(chosen), tuple(notes)


def _mech_latency(policy: ProtectionPolicy, kind: str) -> int:
    for m in policy.mechanisms:
        if m.kind == kind:
            return m.activation_latency
    return 0


def _worker_units(index: TreeIndex) -> list[int]:
    """Compute-node units: innermost units labeled "node".

    When single-component nodes collapse to leaves, the innermost
    node-labeled unit is the parallel group itself; its children are then
    the individual workers.  Trees with no node layer at all (fully
    degenerate or generic) treat every leaf as a worker.
    """
    node_units = [u for u in range(index.n_units) if index.label[u] == LAYER_NODE]
    has_below: set[int] = set()
    for v in node_units:
        a = index.parent[v]
        while a >= 0:
            has_below.add(a)
            a = index.parent[a]
    innermost = [v for v in node_units if v not in has_below]
    workers: list[int] = []
    for v in innermost:
        if index.kind[v] == "parallel":
            workers.extend(index.children[v])
        else:
            workers.append(v)
    if not workers:
        workers = [u for u in range(index.n_units) if index.kind[u] == "leaf"]
    return workers


class _WorkerView:
    """Packed per-worker arrays for vectorized predictions and states.

    Fast path requires every worker to be a leaf or a serial group of
    leaves (the fat-tree shape); other shapes raise and callers fall back
    to the general predict() per step.
    """

    def __init__(self, index: TreeIndex, workers: Sequence[int]):
        self.index = index
        self.workers = list(workers)
        self.ids = [index.unit_id[w] for w in workers]
        inst_parts: list[np.ndarray] = []
        leaf_bounds: list[int] = []
        worker_leaf_bounds: list[int] = []
        self.is_serial: list[bool] = []
        cursor = 0
        n_leaves = 0
        for w in workers:
            worker_leaf_bounds.append(n_leaves)
            kids = index.children[w]
            if index.kind[w] == "leaf":
                leaves = [w]
                self.is_serial.append(False)
            elif index.kind[w] == "serial" and all(
                index.kind[c] == "leaf" for c in kids
            ):
                leaves = list(kids)
                self.is_serial.append(True)
            else:
                raise StateError("worker subtree is not a leaf or serial of leaves")
            for leaf in leaves:
                leaf_bounds.append(cursor)
                span = np.arange(index.inst_start[leaf], index.inst_end[leaf])
                inst_parts.append(span)
                cursor += len(span)
                n_leaves += 1
        worker_leaf_bounds.append(n_leaves)
        self.inst_gather = (
            np.concatenate(inst_parts) if inst_parts else np.empty(0, dtype=np.int64)
        )
        self.leaf_bounds = np.asarray(leaf_bounds, dtype=np.int64)
        self.worker_leaf_bounds = np.asarray(worker_leaf_bounds, dtype=np.int64)
        self.n = len(workers)
        # instance index -> worker position (or -1)
        self.inst_worker = np.full(index.n_instances, -1, dtype=np.int64)
        for pos, w in enumerate(workers):
            self.inst_worker[index.inst_start[w] : index.inst_end[w]] = pos

    def predictions(self, pred_inst: np.ndarray) -> np.ndarray:
        packed = pred_inst[self.inst_gather]
        leaf_pred = np.multiply.reduceat(packed, self.leaf_bounds)
        survive = np.multiply.reduceat(1.0 - leaf_pred, self.worker_leaf_bounds[:-1])
        serial_pred = 1.0 - survive
        leaf_only = leaf_pred[self.worker_leaf_bounds[:-1]]
        return np.where(np.asarray(self.is_serial), serial_pred, leaf_only)

    def alive(self, inst_alive: np.ndarray) -> np.ndarray:
        packed = inst_alive[self.inst_gather]
        leaf_alive = np.add.reduceat(packed.astype(np.int64), self.leaf_bounds) > 0
        all_leaves_alive = (
            np.add.reduceat((~leaf_alive).astype(np.int64), self.worker_leaf_bounds[:-1])
            == 0
        )
        return all_leaves_alive


@dataclass
class _RunState:
    spares: int
    completed: int = 0
    lost: int = 0
    produced: int = 0
    energy: float = 0.0
    downtime: int = 0
    activations: int = 0


def run_policy(
    tree: CompositionTree | TreeIndex,
    horizon: int,
    zone_params: ZoneParams | None,
    policy: ProtectionPolicy,
    workload: float = 1.0,
    seed: int = 0,
    *,
    repair_time: int | None = None,
    base_energy_per_step: float = DEFAULT_BASE_ENERGY,
) -> RunMetrics:
    """Simulate ``horizon`` steps under one protection policy.

    Couples the failure injector with per-step decide() calls: failure
    draws use the same uniform stream layout as simulate() and policy
    decisions consume no randomness, so runs with equal seeds share
    failure histories across policies unless a mechanism (isolation)
    changes the dynamics.  Work is committed every step on checkpointed
    nodes, preserved via a spare on redundancy-protected failures, and
    transferred to a spare when migration engages; unprotected failures
    lose the work accumulated since the last commit.
    """
    if horizon < 1:
        raise DomainError("horizon must be >= 1")
    if workload < 0 or not math.isfinite(workload):
        raise DomainError("workload must be finite and >= 0")
    index = tree if isinstance(tree, TreeIndex) else TreeIndex(tree)
    zp = zone_params or ZoneParams()
    workers = _worker_units(index)
    if not workers:
        raise DomainError("tree has no worker units to schedule work on")
    view = _WorkerView(index, workers)
    nw = view.n
    cover_start, cover_end = index.instance_covers(zp.radius)

    w_ticks = round(workload * WORK_TICKS)
    mech_latency = {m: m.activation_latency for m in policy.mechanisms}
    has_ckpt = policy.has_mechanism(MECH_CHECKPOINT)
    has_red = policy.has_mechanism(MECH_REDUNDANCY)
    has_mig = policy.has_mechanism(MECH_MIGRATION)
    has_iso = policy.has_mechanism(MECH_ISOLATION)
    migration = next(
        (m for m in policy.mechanisms if m.kind == MECH_MIGRATION), None
    )

    inst_alive = np.ones(index.n_instances, dtype=bool)
    fail_time = np.full(index.n_instances, -1, dtype=np.int64)
    zone_origin: list[int] = []
    zone_expiry: list[int] = []
    zone_mult = zp.multiplier

    buffer = np.zeros(nw, dtype=np.int64)
    worker_alive = np.ones(nw, dtype=bool)
    worker_avail = np.ones(nw, dtype=bool)
    protect_since = np.full(nw, -1, dtype=np.int64)
    mig_done = np.zeros(nw, dtype=bool)
    active_ids: frozenset[str] = frozenset()
    rs = _RunState(spares=policy.spare_nodes)
    notifications: list[AdminNotification] = []

    id_to_pos = {wid: i for i, wid in enumerate(view.ids)}
    window = policy.prediction_window
    structure_dirty = True
    repair = -1 if repair_time is None else repair_time

    stream = sim_stream(seed)
    chunk: np.ndarray | None = None
    chunk_t0 = 0

    for t in range(horizon):
        if chunk is None or t - chunk_t0 >= chunk.shape[0]:
            chunk_t0 = t
            steps = min(SIM_CHUNK_STEPS, horizon - t)
            chunk = stream.random((steps, index.n_instances))
        u_row = chunk[t - chunk_t0]

        if repair >= 0:
            due = np.nonzero((~inst_alive) & (fail_time + repair == t))[0]
            if due.size:
                inst_alive[due] = True
                fail_time[due] = -1
                structure_dirty = True

        while zone_expiry and zone_expiry[0] < t:
            zone_origin.pop(0)
            zone_expiry.pop(0)

        if structure_dirty:
            failed_units = index.unit_failed_states(inst_alive)
            worker_alive = view.alive(inst_alive)
            for i, w in enumerate(view.workers):
                ok = worker_alive[i]
                a = index.parent[w]
                while ok and a >= 0:
                    if failed_units[a]:
                        ok = False
                    a = index.parent[a]
                worker_avail[i] = ok
            structure_dirty = False

        mult = np.ones(index.n_instances, dtype=np.float64)
        for origin in zone_origin:
            mult[cover_start[origin] : cover_end[origin]] *= zone_mult

        # none ignores predictions and always-on only uses the id set, so
        # the prediction math is skipped unless a consumer needs values
        if policy.mode == MODE_ON_DEMAND or has_mig:
            pred_inst = _window_predictions(index, inst_alive, mult, window)
            worker_pred = view.predictions(pred_inst)
        else:
            worker_pred = np.zeros(nw, dtype=np.float64)
        if policy.mode == MODE_NONE:
            predictions = {}
        else:
            predictions = {
                view.ids[i]: float(worker_pred[i]) for i in range(nw) if worker_alive[i]
            }
        prev_active = active_ids
        active_ids, notes = decide(
            predictions, policy, prev_active, spares_available=rs.spares, now=t
        )
        notifications.extend(notes)
        rising = active_ids - prev_active
        rs.activations += len(rising)
        for wid in rising:
            i = id_to_pos[wid]
            protect_since[i] = t
            mig_done[i] = False

        active_mask = np.zeros(nw, dtype=bool)
        for wid in active_ids:
            active_mask[id_to_pos[wid]] = True

        overhead = np.zeros(nw, dtype=np.float64)
        eff_by_kind: dict[str, np.ndarray] = {}
        for m in policy.mechanisms:
            eff = active_mask & (t >= protect_since + mech_latency[m])
            overhead += m.perf_overhead * eff
            prev = eff_by_kind.get(m.kind)
            eff_by_kind[m.kind] = eff if prev is None else (prev | eff)
        iso_mask = eff_by_kind.get(MECH_ISOLATION, np.zeros(nw, dtype=bool))

        if has_mig and migration is not None:
            eff_mig = eff_by_kind[MECH_MIGRATION]
            for i in np.nonzero(eff_mig & ~mig_done & worker_alive)[0]:
                mig_done[i] = True
                if rs.spares > 0:
                    rs.spares -= 1
                    rs.completed += int(buffer[i])
                    buffer[i] = 0
                elif worker_pred[i] >= policy.activate_threshold:
                    # prediction may have decayed below the activation
                    # threshold during the latency window; notifications
                    # are only sound above it
                    notifications.append(
                        AdminNotification(
                            time=t,
                            zone=_notification_zone(view.ids[i], policy),
                            predicted_probability=float(worker_pred[i]),
                            reason=REASON_NO_SURROGATE,
                        )
                    )

        rate = np.rint(w_ticks * np.maximum(0.0, 1.0 - overhead)).astype(np.int64)
        earning = worker_alive & worker_avail & ~iso_mask
        buffer[earning] += rate[earning]
        rs.produced += int(rate[earning].sum())

        if has_ckpt:
            commit = eff_by_kind[MECH_CHECKPOINT] & worker_alive
            rs.completed += int(buffer[commit].sum())
            buffer[commit] = 0

        alive_not_iso = worker_alive & ~iso_mask
        alive_iso = worker_alive & iso_mask
        rs.energy += base_energy_per_step * int(alive_not_iso.sum())
        rs.energy += (
            ISOLATION_IDLE_ENERGY_FACTOR * base_energy_per_step * int(alive_iso.sum())
        )
        for m in policy.mechanisms:
            eff = active_mask & (t >= protect_since + mech_latency[m]) & worker_alive
            rs.energy += m.energy_overhead * int(eff.sum())

        rs.downtime += nw - int((worker_alive & worker_avail).sum())

        hazard = np.minimum(index.inst_p * mult, 1.0)
        fails = inst_alive & (u_row < hazard)
        if fails.any():
            for i in np.nonzero(fails)[0]:
                i = int(i)
                inst_alive[i] = False
                fail_time[i] = t
                wpos = int(view.inst_worker[i])
                suppressed = wpos >= 0 and has_iso and bool(iso_mask[wpos])
                if not suppressed:
                    zone_origin.append(i)
                    zone_expiry.append(t + zp.window)
            new_worker_alive = view.alive(inst_alive)
            for i in np.nonzero(worker_alive & ~new_worker_alive)[0]:
                i = int(i)
                protected_red = (
                    has_red
                    and bool(active_mask[i])
                    and t >= protect_since[i] + _mech_latency(policy, MECH_REDUNDANCY)
                )
                if protected_red and rs.spares > 0:
                    rs.spares -= 1
                    rs.completed += int(buffer[i])
                else:
                    rs.lost += int(buffer[i])
                buffer[i] = 0
            worker_alive = new_worker_alive
            structure_dirty = True

    rs.completed += int(buffer.sum())
    assert rs.produced == rs.completed + rs.lost

    return RunMetrics(
        completed_work=rs.completed / WORK_TICKS,
        lost_work=rs.lost / WORK_TICKS,
        energy=rs.energy,
        downtime=rs.downtime,
        activations=rs.activations,
        notifications=tuple(notifications),
    )


@dataclass(frozen=True)
class PolicyStats:
    policy: ProtectionPolicy
    means: dict[str, float] = field(compare=False)
    stds: dict[str, float] = field(compare=False)


def compare_policies(
    tree: CompositionTree | TreeIndex,
    horizon: int,
    zone_params: ZoneParams | None,
    policies: Sequence[ProtectionPolicy],
    seeds: Sequence[int],
    workload: float = 1.0,
    *,
    repair_time: int | None = None,
    base_energy_per_step: float = DEFAULT_BASE_ENERGY,
) -> list[PolicyStats]:
    """Run every policy over the same seed list (common random numbers)
    and summarize each RunMetrics field as mean and standard deviation."""
    if not policies:
        raise DomainError("need at least one policy")
    if not seeds:
        raise DomainError("need at least one seed")
    index = tree if isinstance(tree, TreeIndex) else TreeIndex(tree)
    out: list[PolicyStats] = []
    for policy in policies:
        samples: dict[str, list[float]] = {f: [] for f in METRIC_FIELDS}
        for seed in seeds:
            metrics = run_policy(
                index,
                horizon,
                zone_params,
                policy,
                workload,
                int(seed),
                repair_time=repair_time,
                base_energy_per_step=base_energy_per_step,
            )
            samples["completed_work"].append(metrics.completed_work)
            samples["lost_work"].append(metrics.lost_work)
            samples["energy"].append(metrics.energy)
            samples["downtime"].append(float(metrics.downtime))
            samples["activations"].append(float(metrics.activations))
            samples["notifications"].append(float(len(metrics.notifications)))
        means = {f: float(np.mean(samples[f])) for f in METRIC_FIELDS}
        stds = {f: float(np.std(samples[f])) for f in METRIC_FIELDS}
        out.append(PolicyStats(policy=policy, means=means, stds=stds))
    return out
