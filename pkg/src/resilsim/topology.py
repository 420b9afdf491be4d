"""Fat-tree logical topology construction and configuration sweeps.

The machine is modeled as system -> racks -> chassis -> nodes, with the
shared infrastructure of each level (core switch, rack switch, chassis
backplane/PSU) serial to the parallel group below it.  That placement is
what makes shared resources dominate the system failure probability, and
it mirrors how a fat-tree uplink actually sits on the path of every
descendant node.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import mpmath

from .reliability import (
    ComponentSpec,
    CompositionTree,
    DomainError,
    Leaf,
    Parallel,
    Serial,
    evaluate,
    evaluate_exact,
)

__all__ = [
    "RatesTable",
    "FatTreeConfig",
    "SweepRow",
    "SweepResult",
    "BranchingEntry",
    "ConfigurationError",
    "LAYER_SYSTEM",
    "LAYER_RACK",
    "LAYER_CHASSIS",
    "LAYER_NODE",
    "DEFAULT_NODE_INTERNALS",
    "BASELINE_RATES",
    "SWEEP_AXES",
    "DEFAULT_EPSILON",
    "build_fat_tree",
    "sweep_axis",
    "compare_branching",
]

LAYER_SYSTEM = "system"
LAYER_RACK = "rack"
LAYER_CHASSIS = "chassis"
LAYER_NODE = "node"

CLASS_CORE_SWITCH = "core-switch"
CLASS_RACK_SWITCH = "rack-switch"
CLASS_CHASSIS_SHARED = "chassis-shared"

DEFAULT_NODE_INTERNALS = ("cpu", "memory", "io")

# Default per-hour-step failure probabilities.  Implementation defaults
# chosen so node-internal failures are rarer than shared-switch failures;
# not measured data.
BASELINE_RATES: dict[str, float] = {
    "cpu": 1e-6,
    "memory": 1e-6,
    "io": 2e-6,
    CLASS_CHASSIS_SHARED: 5e-5,
    CLASS_RACK_SWITCH: 1e-4,
    CLASS_CORE_SWITCH: 2e-4,
}

SWEEP_AXES = ("nodes_per_chassis", "chassis_per_rack", "racks")

# Relative improvement below this threshold counts as "no significant
# impact" in sweep analyses.  CLI-configurable via --epsilon.
DEFAULT_EPSILON = 0.05

RatesTable = Mapping[str, float]


class ConfigurationError(ValueError):
    """A topology configuration is inconsistent or missing rates."""


@dataclass(frozen=True)
class FatTreeConfig:
    nodes_per_chassis: int = 4
    chassis_per_rack: int = 4
    racks: int = 4
    rates: RatesTable = field(default_factory=lambda: dict(BASELINE_RATES))
    node_internals: tuple[str, ...] = DEFAULT_NODE_INTERNALS

    def required_classes(self) -> tuple[str, ...]:
        return (
            CLASS_CORE_SWITCH,
            CLASS_RACK_SWITCH,
            CLASS_CHASSIS_SHARED,
        ) + tuple(self.node_internals)

    def summary(self) -> str:
        return (
            f"{self.nodes_per_chassis}n/{self.chassis_per_rack}c/{self.racks}r"
        )


def _validate_config(config: FatTreeConfig) -> None:
    if config.nodes_per_chassis < 1:
        raise ConfigurationError("nodes_per_chassis must be >= 1")
    if config.chassis_per_rack < 1:
        raise ConfigurationError("chassis_per_rack must be >= 1")
    if config.racks < 1:
        raise ConfigurationError("racks must be >= 1")
    if not config.node_internals:
        raise ConfigurationError("node_internals must be non-empty")
    for cls in config.required_classes():
        if cls not in config.rates:
            raise ConfigurationError(f"missing failure rate for class {cls!r}")
        p = config.rates[cls]
        if not (0.0 <= p <= 1.0):
            raise ConfigurationError(
                f"rate for class {cls!r} is {p!r}, outside [0, 1]"
            )


def _simplify(node: CompositionTree) -> CompositionTree:
    """Collapse singleton groups and splice serial-in-serial chains.

    Degenerate counts (one rack, one chassis, one node, one internal)
    collapse to plain serial chains; non-degenerate trees are unchanged.
    """
    if isinstance(node, Leaf):
        return node
    children = tuple(_simplify(c) for c in node.children)
    if len(children) == 1:
        return children[0]
    if isinstance(node, Serial):
        spliced: list[CompositionTree] = []
        for child in children:
            if isinstance(child, Serial):
                spliced.extend(child.children)
            else:
                spliced.append(child)
        return Serial(children=tuple(spliced), layer_label=node.layer_label)
    return Parallel(children=children, layer_label=node.layer_label)


def build_fat_tree(config: FatTreeConfig) -> CompositionTree:
    """Composition tree for the configured fat-tree machine.

    Structure: Serial(core switch, Parallel over racks); each rack is
    Serial(rack switch, Parallel over chassis); each chassis is
    Serial(chassis-shared, Parallel over nodes); each node is a Serial of
    its internal components.  Parallel groups carry the layer label of
    their children ("rack", "chassis", "node") so redundancy analyses can
    address them; serial wrappers carry their own layer.
    """
    _validate_config(config)
    rates = config.rates

    def leaf(unit_id: str, cls: str) -> Leaf:
        return Leaf(ComponentSpec(id=unit_id, component_class=cls, p_fail=rates[cls]))

    racks = []
    for r in range(config.racks):
        chassis_group = []
        for c in range(config.chassis_per_rack):
            nodes = []
            for n in range(config.nodes_per_chassis):
                internals = tuple(
                    leaf(f"rack{r}/chassis{c}/node{n}/{cls}", cls)
                    for cls in config.node_internals
                )
                nodes.append(Serial(children=internals, layer_label=LAYER_NODE))
            chassis = Serial(
                children=(
                    leaf(f"rack{r}/chassis{c}/shared", CLASS_CHASSIS_SHARED),
                    Parallel(children=tuple(nodes), layer_label=LAYER_NODE),
                ),
                layer_label=LAYER_CHASSIS,
            )
            chassis_group.append(chassis)
        rack = Serial(
            children=(
                leaf(f"rack{r}/switch", CLASS_RACK_SWITCH),
                Parallel(children=tuple(chassis_group), layer_label=LAYER_CHASSIS),
            ),
            layer_label=LAYER_RACK,
        )
        racks.append(rack)
    system = Serial(
        children=(
            leaf("core-switch", CLASS_CORE_SWITCH),
            Parallel(children=tuple(racks), layer_label=LAYER_RACK),
        ),
        layer_label=LAYER_SYSTEM,
    )
    return _simplify(system)


@dataclass(frozen=True)
class SweepRow:
    label: str
    value: int
    probability: float
    improvement: float | None  # relative to previous row; None for the first


@dataclass(frozen=True)
class SweepResult:
    axis: str
    rows: tuple[SweepRow, ...]

    def improvement_between(self, value_from: int, value_to: int) -> float:
        by_value = {row.value: row for row in self.rows}
        if value_from not in by_value or value_to not in by_value:
            raise KeyError(f"sweep does not contain {value_from} -> {value_to}")
        prev = by_value[value_from].probability
        curr = by_value[value_to].probability
        return (prev - curr) / prev if prev else 0.0


def sweep_axis(
    base: FatTreeConfig, axis: str, values: Sequence[int]
) -> SweepResult:
    """Evaluate the system for each value of one topology axis.

    ``values`` must be non-empty and strictly increasing.  Each row records
    the system failure probability and the relative improvement
    (F_prev - F_curr) / F_prev against the previous row.
    """
    if axis not in SWEEP_AXES:
        raise ConfigurationError(f"unknown sweep axis {axis!r}; want one of {SWEEP_AXES}")
    if not values:
        raise ConfigurationError("sweep values must be non-empty")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ConfigurationError("sweep values must be strictly increasing")

    rows: list[SweepRow] = []
    prev: float | None = None
    for value in values:
        config = replace(base, **{axis: int(value)})
        prob = evaluate(build_fat_tree(config))
        improvement = None
        if prev is not None:
            improvement = (prev - prob) / prev if prev else 0.0
        rows.append(
            SweepRow(
                label=config.summary(),
                value=int(value),
                probability=prob,
                improvement=improvement,
            )
        )
        prev = prob
    return SweepResult(axis=axis, rows=tuple(rows))


@dataclass(frozen=True)
class BranchingEntry:
    chassis_count: int
    nodes_per_chassis: int
    probability: float


def compare_branching(
    total_nodes: int,
    factorizations: Sequence[tuple[int, int]],
    base: FatTreeConfig,
) -> tuple[BranchingEntry, ...]:
    """Rank equal-node-count branchings of one rack by failure probability.

    Each (chassis_count, nodes_per_chassis) pair must multiply to
    ``total_nodes``; rack count and rates come from ``base``.  Entries are
    sorted ascending by system failure probability.  The orderings of
    interest often differ below float64 resolution, so ranking is done at
    extended precision while the reported probabilities are floats.
    """
    if total_nodes < 1:
        raise DomainError("total_nodes must be >= 1")
    exact: list[tuple[mpmath.mpf, BranchingEntry]] = []
    for chassis_count, nodes_per_chassis in factorizations:
        if chassis_count * nodes_per_chassis != total_nodes:
            raise DomainError(
                f"factorization {chassis_count} x {nodes_per_chassis} "
                f"!= total_nodes {total_nodes}"
            )
        config = replace(
            base,
            chassis_per_rack=int(chassis_count),
            nodes_per_chassis=int(nodes_per_chassis),
        )
        tree = build_fat_tree(config)
        value = evaluate_exact(tree)
        exact.append(
            (
                value,
                BranchingEntry(
                    chassis_count=int(chassis_count),
                    nodes_per_chassis=int(nodes_per_chassis),
                    probability=float(value),
                ),
            )
        )
    exact.sort(key=lambda pair: (pair[0], pair[1].chassis_count))
    return tuple(entry for _, entry in exact)
