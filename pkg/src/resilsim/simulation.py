"""Stochastic failure injection: snapshot Monte Carlo and temporal runs.

Two modes share one machinery:

* snapshot Monte Carlo draws every leaf instance once per trial and
  reduces the tree's all-fail/any-fail semantics, validating the analytic
  model;
* the temporal simulator walks discrete timesteps, escalating hazards
  inside effectiveness zones spawned by failures, optionally repairing
  units, and recording an event trace from which failure chains are
  extracted.

Multiplicity-m leaves are expanded into m instance units (ids suffixed
``#k``) so redundancy semantics match the analytic model; for m == 1 the
instance id is the leaf id itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .reliability import (
    CompositionTree,
    DomainError,
    Leaf,
    Serial,
    validate_tree,
)
from .rng import MC_BLOCK_TRIALS, SIM_CHUNK_STEPS, mc_block_generator, sim_stream

__all__ = [
    "ZoneParams",
    "EffectivenessZone",
    "FailureEvent",
    "FailureTrace",
    "FailureChain",
    "TreeIndex",
    "UnknownUnitError",
    "KIND_FAILURE",
    "KIND_REPAIR",
    "KIND_CHAIN_MARKER",
    "CAUSE_BASE_HAZARD",
    "CAUSE_ZONE_ESCALATED",
    "snapshot_monte_carlo",
    "zone_of",
    "simulate",
    "extract_chains",
]

KIND_FAILURE = "component-failure"
KIND_REPAIR = "unit-repair"
KIND_CHAIN_MARKER = "chain-membership-marker"

CAUSE_BASE_HAZARD = "base-hazard"
CAUSE_ZONE_ESCALATED = "zone-escalated"

_KIND_ORDER = {KIND_REPAIR: 0, KIND_FAILURE: 1}


class UnknownUnitError(KeyError):
    """A unit id does not exist in the simulated tree."""


@dataclass(frozen=True)
class ZoneParams:
    """Effectiveness-zone shape: horizontal radius, active window (steps
    after the triggering failure), and hazard multiplier inside the zone."""

    radius: int = 1
    window: int = 10
    multiplier: float = 2.0

    def __post_init__(self) -> None:
        if self.radius < 0:
            raise DomainError("zone radius must be >= 0")
        if self.window < 1:
            raise DomainError("zone window must be >= 1")
        if self.multiplier < 1.0:
            raise DomainError("zone hazard multiplier must be >= 1")


class TreeIndex:
    """Flattened, array-backed view of a composition tree.

    Units are tree nodes in preorder; leaf instances (multiplicity
    expansion) form a parallel array whose subtree ranges are contiguous,
    so every zone's escalation span is a slice.
    """

    def __init__(self, tree: CompositionTree):
        validate_tree(tree)
        self.tree = tree
        self.kind: list[str] = []
        self.label: list[str] = []
        self.parent: list[int] = []
        self.depth: list[int] = []
        self.children: list[tuple[int, ...]] = []
        self.unit_id: list[str] = []
        self.inst_start: list[int] = []
        self.inst_end: list[int] = []
        self.inst_id: list[str] = []
        self.inst_leaf_unit: list[int] = []
        inst_p: list[float] = []

        def walk(node: CompositionTree, parent: int, depth: int, path: str) -> int:
            u = len(self.kind)
            self.parent.append(parent)
            self.depth.append(depth)
            self.inst_start.append(len(self.inst_id))
            self.inst_end.append(0)  # set after the subtree walk
            if isinstance(node, Leaf):
                spec = node.spec
                self.kind.append("leaf")
                self.label.append(spec.component_class)
                self.unit_id.append(spec.id)
                self.children.append(())
                for k in range(spec.multiplicity):
                    iid = spec.id if spec.multiplicity == 1 else f"{spec.id}#{k}"
                    self.inst_id.append(iid)
                    self.inst_leaf_unit.append(u)
                    inst_p.append(spec.p_fail)
            else:
                serial = isinstance(node, Serial)
                self.kind.append("serial" if serial else "parallel")
                self.label.append(node.layer_label)
                base = node.layer_label or ("serial" if serial else "parallel")
                self.unit_id.append(base if parent < 0 else f"{base}@{path}")
                self.children.append(())
                kids = []
                for ci, child in enumerate(node.children):
                    child_path = str(ci) if parent < 0 else f"{path}.{ci}"
                    kids.append(walk(child, u, depth + 1, child_path))
                self.children[u] = tuple(kids)
            self.inst_end[u] = len(self.inst_id)
            return u

        walk(tree, -1, 0, "")

        self.n_units = len(self.kind)
        self.n_instances = len(self.inst_id)
        self.inst_p = np.asarray(inst_p, dtype=np.float64)
        self.unit_index: dict[str, int] = {}
        for u, uid in enumerate(self.unit_id):
            if uid in self.unit_index:
                raise DomainError(f"unit id collision: {uid!r}")
            self.unit_index[uid] = u
        self.instance_index = {iid: i for i, iid in enumerate(self.inst_id)}
        self._cover_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def require_unit(self, unit_id: str) -> int:
        try:
            return self.unit_index[unit_id]
        except KeyError:
            raise UnknownUnitError(unit_id) from None

    def is_ancestor(self, ancestor: int, unit: int) -> bool:
        v = self.parent[unit]
        while v >= 0:
            if v == ancestor:
                return True
            v = self.parent[v]
        return False

    def semantic_ancestors(self, unit: int) -> list[int]:
        """One representative per layer above the unit.

        Consecutive ancestors sharing a layer label (a serial wrapper and
        its parallel group) collapse to the lowest of the run, so the zone
        of a node lists its chassis, rack, and system once each.
        """
        out: list[int] = []
        run_label = self.label[unit]
        v = self.parent[unit]
        while v >= 0:
            if self.label[v] != run_label:
                out.append(v)
                run_label = self.label[v]
            v = self.parent[v]
        return out

    def horizontal_anchor(self, unit: int, radius: int) -> int:
        v = unit
        for _ in range(min(radius, self.depth[unit])):
            v = self.parent[v]
        return v

    def zone_members(self, unit: int, radius: int) -> frozenset[str]:
        members = {self.unit_id[unit]}
        if radius >= 1 and self.depth[unit] >= 1:
            anchor = self.horizontal_anchor(unit, radius)
            for c in self.children[anchor]:
                members.add(self.unit_id[c])
        for a in self.semantic_ancestors(unit):
            members.add(self.unit_id[a])
        return frozenset(members)

    def zone_span(self, unit: int, radius: int) -> tuple[int, int]:
        """Escalation span: instance range under the horizontal anchor."""
        if radius >= 1 and self.depth[unit] >= 1:
            anchor = self.horizontal_anchor(unit, radius)
        else:
            anchor = unit
        return self.inst_start[anchor], self.inst_end[anchor]

    def instance_covers(self, radius: int) -> tuple[np.ndarray, np.ndarray]:
        """Per-instance zone spans (origin instance -> covered slice)."""
        cached = self._cover_cache.get(radius)
        if cached is not None:
            return cached
        start = np.empty(self.n_instances, dtype=np.int64)
        end = np.empty(self.n_instances, dtype=np.int64)
        for i in range(self.n_instances):
            s, e = self.zone_span(self.inst_leaf_unit[i], radius)
            start[i] = s
            end[i] = e
        self._cover_cache[radius] = (start, end)
        return start, end

    def unit_failed_states(self, inst_alive: np.ndarray) -> np.ndarray:
        """Failed flag per unit: leaves fail when all instances are down,
        serial groups when any child failed, parallel groups when all did."""
        failed = np.zeros(self.n_units, dtype=bool)
        for u in range(self.n_units - 1, -1, -1):
            kids = self.children[u]
            if not kids:
                if self.kind[u] == "leaf":
                    failed[u] = not inst_alive[
                        self.inst_start[u] : self.inst_end[u]
                    ].any()
                else:
                    failed[u] = False  # empty serial group never fails
            elif self.kind[u] == "serial":
                failed[u] = any(failed[c] for c in kids)
            else:
                failed[u] = all(failed[c] for c in kids)
        return failed

    def units_with_label(self, label: str) -> list[int]:
        return [u for u in range(self.n_units) if self.label[u] == label]


@dataclass(frozen=True)
class EffectivenessZone:
    """Spatio-temporal region of elevated hazard around a failure.

    ``member_units`` lists the origin, its horizontal siblings (children
    of the ancestor ``radius`` levels up), and one aggregate per layer
    above the origin; descendants are implied, never enumerated.  The
    escalation span (the instances whose hazard the zone multiplies) is
    the subtree of the horizontal anchor.
    """

    origin_unit: str
    member_units: frozenset[str]
    window: int
    hazard_multiplier: float
    _index: TreeIndex | None = field(default=None, compare=False, repr=False)
    _span: tuple[int, int] = field(default=(0, 0), compare=False, repr=False)

    def covers(self, unit_id: str) -> bool:
        """Whether the unit lies inside the escalation span."""
        if self._index is None:
            raise ValueError("zone is not attached to a tree index")
        if unit_id in self._index.instance_index:
            i = self._index.instance_index[unit_id]
            return self._span[0] <= i < self._span[1]
        u = self._index.require_unit(unit_id)
        return (
            self._span[0] <= self._index.inst_start[u]
            and self._index.inst_end[u] <= self._span[1]
        )


@dataclass(frozen=True)
class FailureEvent:
    time: int
    unit_id: str
    kind: str
    cause: str | None = None


@dataclass(frozen=True)
class FailureChain:
    """Failures linked through overlapping effectiveness zones.

    ``linkage[i]`` is the zone of the earlier chain event that admitted
    event i (None for the chain's first event).
    """

    events: tuple[FailureEvent, ...]
    linkage: tuple[EffectivenessZone | None, ...]

    def __len__(self) -> int:
        return len(self.events)


@dataclass(frozen=True)
class FailureTrace:
    seed: int
    horizon: int
    events: tuple[FailureEvent, ...]
    final_system_state: str  # "failed" | "operational"
    zone_params: ZoneParams
    repair_time: int | None
    index: TreeIndex = field(compare=False, repr=False)

    def failures(self) -> tuple[FailureEvent, ...]:
        return tuple(e for e in self.events if e.kind == KIND_FAILURE)


def _postfix_program(index: TreeIndex) -> tuple[np.ndarray, np.ndarray]:
    kinds: list[int] = []
    args: list[int] = []

    def walk(u: int) -> None:
        kids = index.children[u]
        if index.kind[u] == "leaf":
            kinds.append(kernels.OP_LEAF)
            args.append(index.inst_end[u] - index.inst_start[u])
            return
        for c in kids:
            walk(c)
        kinds.append(
            kernels.OP_SERIAL if index.kind[u] == "serial" else kernels.OP_PARALLEL
        )
        args.append(len(kids))

    walk(0)
    return np.asarray(kinds, dtype=np.int8), np.asarray(args, dtype=np.int32)


def snapshot_monte_carlo(
    tree: CompositionTree, trials: int, seed: int
) -> tuple[float, float]:
    """Estimate the one-step system failure probability by sampling.

    Every leaf instance is drawn independently per trial; the estimate is
    failed-trials/trials with the binomial standard error.  Trials are
    consumed in fixed blocks with per-block counter streams, so the result
    is deterministic for a given seed regardless of execution order.
    """
    if trials < 1:
        raise DomainError("trials must be >= 1")
    index = TreeIndex(tree)
    op_kind, op_arg = _postfix_program(index)
    failed = 0
    done = 0
    block = 0
    while done < trials:
        size = min(MC_BLOCK_TRIALS, trials - done)
        u = mc_block_generator(seed, block).random((size, index.n_instances))
        failed += kernels.mc_count_failures(u, index.inst_p, op_kind, op_arg)
        done += size
        block += 1
    estimate = failed / trials
    stderr = math.sqrt(estimate * (1.0 - estimate) / trials)
    return estimate, stderr


def _zone_from_index(
    index: TreeIndex, unit: int, radius: int, window: int, multiplier: float
) -> EffectivenessZone:
    return EffectivenessZone(
        origin_unit=index.unit_id[unit],
        member_units=index.zone_members(unit, radius),
        window=window,
        hazard_multiplier=multiplier,
        _index=index,
        _span=index.zone_span(unit, radius),
    )


def zone_of(
    tree: CompositionTree | TreeIndex,
    unit_id: str,
    radius: int,
    window: int,
    multiplier: float,
) -> EffectivenessZone:
    """Effectiveness zone of a unit.

    Horizontal propagation reaches the siblings sharing the ancestor
    ``radius`` levels up (crossing rack boundaries once the radius climbs
    past the rack layer); bottom-to-top propagation adds every layer
    aggregate above the unit.  Strict descendants of the origin are never
    listed as members.
    """
    index = tree if isinstance(tree, TreeIndex) else TreeIndex(tree)
    unit = index.require_unit(unit_id)
    params = ZoneParams(radius=radius, window=window, multiplier=multiplier)
    return _zone_from_index(index, unit, params.radius, params.window, params.multiplier)


def simulate(
    tree: CompositionTree | TreeIndex,
    horizon: int,
    zone_params: ZoneParams | None = None,
    repair_time: int | None = None,
    seed: int = 0,
) -> FailureTrace:
    """Temporal failure injection over ``horizon`` discrete timesteps.

    Per step every alive leaf instance fails with probability
    min(1, p_fail * product of active zone multipliers covering it); each
    failure activates the failed component's zone for the following
    ``window`` steps.  Failed instances stay down unless ``repair_time``
    is given.  The trace is a deterministic function of
    (tree, parameters, seed).
    """
    if horizon < 1:
        raise DomainError("horizon must be >= 1")
    if repair_time is not None and repair_time < 1:
        raise DomainError("repair_time must be >= 1 when given")
    index = tree if isinstance(tree, TreeIndex) else TreeIndex(tree)
    zp = zone_params or ZoneParams()
    cover_start, cover_end = index.instance_covers(zp.radius)

    stream = sim_stream(seed)
    alive = np.ones(index.n_instances, dtype=np.uint8)
    fail_time = np.full(index.n_instances, -1, dtype=np.int64)
    zone_origin: list[int] = []
    zone_expiry: list[int] = []
    raw: list[tuple[int, int, int, int]] = []

    t0 = 0
    while t0 < horizon:
        steps = min(SIM_CHUNK_STEPS, horizon - t0)
        u = stream.random((steps, index.n_instances))
        et, ei, ek, ec = kernels.sim_chunk(
            u,
            t0,
            index.inst_p,
            cover_start,
            cover_end,
            zp.window,
            zp.multiplier,
            -1 if repair_time is None else repair_time,
            alive,
            fail_time,
            zone_origin,
            zone_expiry,
        )
        raw.extend(zip(et, ei, ek, ec))
        t0 += steps

    events = []
    for t, i, k, c in raw:
        if k == kernels.EV_REPAIR:
            kind, cause = KIND_REPAIR, None
        else:
            kind = KIND_FAILURE
            cause = (
                CAUSE_ZONE_ESCALATED if c == kernels.CAUSE_ESCALATED else CAUSE_BASE_HAZARD
            )
        events.append(FailureEvent(time=t, unit_id=index.inst_id[i], kind=kind, cause=cause))
    events.sort(key=lambda e: (e.time, e.unit_id, _KIND_ORDER[e.kind]))

    failed_units = index.unit_failed_states(alive.view(bool))
    return FailureTrace(
        seed=seed,
        horizon=horizon,
        events=tuple(events),
        final_system_state="failed" if failed_units[0] else "operational",
        zone_params=zp,
        repair_time=repair_time,
        index=index,
    )


def extract_chains(
    trace: FailureTrace, zone_params: ZoneParams | None = None
) -> list[FailureChain]:
    """Cluster a trace's failures into failure chains.

    Greedy chronological pass: each failure joins the earliest-created
    chain in which some earlier event's zone contains it in space and
    time (strictly later than the chain's last event, so chain times are
    strictly increasing); otherwise it starts a new chain.  Chains
    partition all component-failure events.
    """
    zp = zone_params or trace.zone_params
    index = trace.index
    chains: list[dict] = []
    for event in trace.events:
        if event.kind != KIND_FAILURE:
            continue
        inst = index.instance_index[event.unit_id]
        target = None
        admitted_by = None
        for chain in chains:
            if event.time <= chain["events"][-1].time:
                continue
            for prior, span in zip(chain["events"], chain["spans"]):
                if (
                    prior.time < event.time <= prior.time + zp.window
                    and span[0] <= inst < span[1]
                ):
                    target = chain
                    admitted_by = prior
                    break
            if target is not None:
                break
        leaf_unit = index.inst_leaf_unit[inst]
        span = index.zone_span(leaf_unit, zp.radius)
        if target is None:
            chains.append(
                {"events": [event], "spans": [span], "linkage": [None]}
            )
        else:
            target["events"].append(event)
            target["spans"].append(span)
            admit_unit = index.inst_leaf_unit[index.instance_index[admitted_by.unit_id]]
            target["linkage"].append(
                _zone_from_index(index, admit_unit, zp.radius, zp.window, zp.multiplier)
            )
    return [
        FailureChain(events=tuple(c["events"]), linkage=tuple(c["linkage"]))
        for c in chains
    ]
