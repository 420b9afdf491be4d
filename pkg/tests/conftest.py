"""Shared fixtures: baseline trees and reduced instances."""

import pytest

from resilsim.reliability import ComponentSpec, Leaf, Parallel
from resilsim.simulation import TreeIndex
from resilsim.topology import BASELINE_RATES, FatTreeConfig, build_fat_tree


@pytest.fixture(scope="session")
def baseline_config() -> FatTreeConfig:
    return FatTreeConfig()


@pytest.fixture(scope="session")
def baseline_tree(baseline_config):
    return build_fat_tree(baseline_config)


@pytest.fixture(scope="session")
def baseline_index(baseline_tree) -> TreeIndex:
    return TreeIndex(baseline_tree)


@pytest.fixture(scope="session")
def small_fat_tree():
    """2-2-2 instance, cpu-only nodes, every rate 0.1: 15 enumerable leaves."""
    config = FatTreeConfig(
        nodes_per_chassis=2,
        chassis_per_rack=2,
        racks=2,
        rates={k: 0.1 for k in BASELINE_RATES},
        node_internals=("cpu",),
    )
    return build_fat_tree(config)


@pytest.fixture
def two_leaf_parallel():
    return Parallel(
        children=(
            Leaf(ComponentSpec("a", "cpu", 0.5)),
            Leaf(ComponentSpec("b", "cpu", 0.5)),
        ),
        layer_label="pair",
    )
