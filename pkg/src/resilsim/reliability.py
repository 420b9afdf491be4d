"""Serial/parallel failure-probability composition trees.

A system is modeled as a tree whose leaves are hardware components with a
per-timestep failure probability and whose internal nodes combine children
either serially (the group fails if any member fails) or in parallel (the
group fails only if all members fail).  All operations here are pure
functions of immutable inputs and are safe to call concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Union

import mpmath

__all__ = [
    "ComponentSpec",
    "Leaf",
    "Serial",
    "Parallel",
    "CompositionTree",
    "SensitivityEntry",
    "SensitivityReport",
    "DomainError",
    "StructureError",
    "UnknownLayerError",
    "serial_failure_probability",
    "parallel_failure_probability",
    "evaluate",
    "evaluate_exact",
    "sensitivity",
    "marginal_redundancy_benefit",
    "validate_tree",
    "iter_leaves",
]

# Bits of working precision for evaluate_exact().  Differences between two
# system probabilities can sit 40+ decimal orders below the values
# themselves, far under float64 resolution, so near-tie comparisons and
# redundancy deltas are computed at extended precision.
EXACT_PRECISION_BITS = 300


class DomainError(ValueError):
    """A probability or count argument is outside its allowed range."""


class StructureError(ValueError):
    """A composition tree violates a structural invariant."""


class UnknownLayerError(KeyError):
    """A layer label does not name any matching group in the tree."""


@dataclass(frozen=True)
class ComponentSpec:
    """One leaf component, optionally collapsing identical parallel units.

    ``multiplicity`` encodes a super-component: m identical instances in
    parallel, failing only when all m instances fail.
    """

    id: str
    component_class: str
    p_fail: float
    multiplicity: int = 1


@dataclass(frozen=True)
class Leaf:
    spec: ComponentSpec

    @property
    def layer_label(self) -> str:
        return self.spec.component_class


@dataclass(frozen=True)
class Serial:
    """Group failing when ANY child fails: F = 1 - prod(1 - F_i)."""

    children: tuple["CompositionTree", ...]
    layer_label: str = ""


@dataclass(frozen=True)
class Parallel:
    """Redundancy group failing only when ALL children fail: F = prod(F_i)."""

    children: tuple["CompositionTree", ...]
    layer_label: str = ""


CompositionTree = Union[Leaf, Serial, Parallel]


def _check_prob(value: float, where: str) -> None:
    if not (0.0 <= value <= 1.0) or math.isnan(value):
        raise DomainError(f"{where}: probability {value!r} is outside [0, 1]")


def serial_failure_probability(probs: Iterable[float]) -> float:
    """Failure probability of serially connected components.

    Returns 1 - prod(1 - p_i); the empty chain never fails.
    """
    survive = 1.0
    for i, p in enumerate(probs):
        if not (0.0 <= p <= 1.0) or math.isnan(p):
            raise DomainError(f"serial input at index {i}: {p!r} is outside [0, 1]")
        survive *= 1.0 - p
    return 1.0 - survive


def parallel_failure_probability(probs: Iterable[float]) -> float:
    """Failure probability of a redundancy group: prod(p_i).

    An empty group has no defined failure semantics and is rejected.
    """
    probs = list(probs)
    if not probs:
        raise DomainError("parallel group must have at least one member")
    fail = 1.0
    for i, p in enumerate(probs):
        if not (0.0 <= p <= 1.0) or math.isnan(p):
            raise DomainError(f"parallel input at index {i}: {p!r} is outside [0, 1]")
        fail *= p
    return fail


def iter_leaves(tree: CompositionTree) -> Iterable[Leaf]:
    """Yield leaves in depth-first order (stable, matches construction)."""
    stack = [tree]
    out = []
    while stack:
        node = stack.pop()
        if isinstance(node, Leaf):
            out.append(node)
        else:
            stack.extend(reversed(node.children))
    return out


def validate_tree(tree: CompositionTree) -> None:
    """Check structural invariants; raise StructureError/DomainError.

    Empty Serial groups are permitted (they never fail); empty Parallel
    groups are a modeling mistake and rejected.
    """
    seen_ids: set[str] = set()
    stack = [tree]
    while stack:
        node = stack.pop()
        if isinstance(node, Leaf):
            spec = node.spec
            if spec.multiplicity < 1:
                raise StructureError(
                    f"leaf {spec.id!r}: multiplicity {spec.multiplicity} < 1"
                )
            _check_prob(spec.p_fail, f"leaf {spec.id!r}")
            if spec.id in seen_ids:
                raise StructureError(f"duplicate leaf id {spec.id!r}")
            seen_ids.add(spec.id)
        elif isinstance(node, Parallel):
            if not node.children:
                raise StructureError("Parallel group with no children")
            stack.extend(node.children)
        elif isinstance(node, Serial):
            stack.extend(node.children)
        else:
            raise StructureError(f"unexpected tree node {node!r}")


def _eval(node: CompositionTree) -> float:
    if isinstance(node, Leaf):
        return node.spec.p_fail ** node.spec.multiplicity
    child_values = [_eval(c) for c in node.children]
    if isinstance(node, Serial):
        survive = 1.0
        for v in child_values:
            survive *= 1.0 - v
        return 1.0 - survive
    fail = 1.0
    for v in child_values:
        fail *= v
    return fail


def evaluate(tree: CompositionTree) -> float:
    """System failure probability for one timestep, recursively composed."""
    validate_tree(tree)
    return _eval(tree)


def _eval_exact(node: CompositionTree):
    if isinstance(node, Leaf):
        return mpmath.mpf(node.spec.p_fail) ** node.spec.multiplicity
    child_values = [_eval_exact(c) for c in node.children]
    if isinstance(node, Serial):
        survive = mpmath.mpf(1)
        for v in child_values:
            survive *= 1 - v
        return 1 - survive
    fail = mpmath.mpf(1)
    for v in child_values:
        fail *= v
    return fail


def evaluate_exact(tree: CompositionTree, precision_bits: int = EXACT_PRECISION_BITS):
    """evaluate() at extended precision (mpmath mpf result).

    Intended for comparing configurations whose probabilities differ far
    below float64 resolution (redundancy deltas, branching near-ties).
    """
    validate_tree(tree)
    with mpmath.workprec(precision_bits):
        return _eval_exact(tree)


@dataclass(frozen=True)
class SensitivityEntry:
    label: str
    derivative: float
    rank: int


@dataclass(frozen=True)
class SensitivityReport:
    """Partial derivatives of system failure probability.

    ``leaves`` holds one entry per leaf id; ``layers`` aggregates leaf
    derivatives by component class.  Both lists are sorted by descending
    derivative magnitude with 1-based ranks.
    """

    leaves: tuple[SensitivityEntry, ...]
    layers: tuple[SensitivityEntry, ...]

    def rank_of_layer(self, label: str) -> int:
        for entry in self.layers:
            if entry.label == label:
                return entry.rank
        raise UnknownLayerError(label)

    def layer_derivative(self, label: str) -> float:
        for entry in self.layers:
            if entry.label == label:
                return entry.derivative
        raise UnknownLayerError(label)


def _ranked(items: dict[str, float]) -> tuple[SensitivityEntry, ...]:
    ordered = sorted(items.items(), key=lambda kv: (-abs(kv[1]), kv[0]))
    return tuple(
        SensitivityEntry(label=k, derivative=v, rank=i + 1)
        for i, (k, v) in enumerate(ordered)
    )


def sensitivity(tree: CompositionTree) -> SensitivityReport:
    """Analytic d(F_system)/d(p_leaf) for every leaf, via the product rule.

    Derivatives propagate top-down: for a serial group the factor for
    child i is prod_{j!=i}(1 - F_j); for a parallel group it is
    prod_{j!=i} F_j; a multiplicity-m leaf contributes m * p^(m-1).
    """
    validate_tree(tree)
    leaf_derivs: dict[str, float] = {}
    layer_derivs: dict[str, float] = {}

    def walk(node: CompositionTree, upstream: float) -> None:
        if isinstance(node, Leaf):
            spec = node.spec
            m = spec.multiplicity
            local = float(m) * spec.p_fail ** (m - 1) if m > 1 else 1.0
            d = upstream * local
            leaf_derivs[spec.id] = d
            layer_derivs[spec.component_class] = (
                layer_derivs.get(spec.component_class, 0.0) + d
            )
            return
        values = [_eval(c) for c in node.children]
        if isinstance(node, Serial):
            factors = [1.0 - v for v in values]
        else:
            factors = values
        # prod of factors excluding index i, via prefix/suffix products
        n = len(factors)
        prefix = [1.0] * (n + 1)
        for i, f in enumerate(factors):
            prefix[i + 1] = prefix[i] * f
        suffix = [1.0] * (n + 1)
        for i in range(n - 1, -1, -1):
            suffix[i] = suffix[i + 1] * factors[i]
        for i, child in enumerate(node.children):
            walk(child, upstream * prefix[i] * suffix[i + 1])

    walk(tree, 1.0)
    return SensitivityReport(leaves=_ranked(leaf_derivs), layers=_ranked(layer_derivs))


def _rename_leaf_ids(node: CompositionTree, suffix: str) -> CompositionTree:
    if isinstance(node, Leaf):
        return Leaf(spec=replace(node.spec, id=node.spec.id + suffix))
    children = tuple(_rename_leaf_ids(c, suffix) for c in node.children)
    if isinstance(node, Serial):
        return Serial(children=children, layer_label=node.layer_label)
    return Parallel(children=children, layer_label=node.layer_label)


def _add_redundancy(node: CompositionTree, layer_label: str, hits: list[int]) -> CompositionTree:
    if isinstance(node, Leaf):
        return node
    children = tuple(_add_redundancy(c, layer_label, hits) for c in node.children)
    if isinstance(node, Parallel) and node.layer_label == layer_label:
        hits[0] += 1
        spare = _rename_leaf_ids(node.children[0], f"+spare{hits[0]}")
        children = children + (spare,)
    if isinstance(node, Serial):
        return Serial(children=children, layer_label=node.layer_label)
    return Parallel(children=children, layer_label=node.layer_label)


def marginal_redundancy_benefit(tree: CompositionTree, layer_label: str) -> float:
    """Drop in system failure probability from one extra redundant unit.

    Duplicates the first child of every Parallel group labeled
    ``layer_label`` and returns evaluate(tree) - evaluate(tree').  The
    difference is computed at extended precision: for lightly loaded
    layers it can fall dozens of orders of magnitude below the system
    probability itself, where a float64 subtraction would return 0.
    """
    validate_tree(tree)
    hits = [0]
    augmented = _add_redundancy(tree, layer_label, hits)
    if hits[0] == 0:
        raise UnknownLayerError(
            f"no Parallel group labeled {layer_label!r} in the tree"
        )
    with mpmath.workprec(EXACT_PRECISION_BITS):
        delta = _eval_exact(tree) - _eval_exact(augmented)
    return float(delta)
