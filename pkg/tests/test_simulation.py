"""Monte Carlo, effectiveness zones, temporal simulation, failure chains."""

import random

import numpy as np
import pytest

import resilsim.kernels as kernels
import resilsim.kernels.pure as pure_kernels
from oracles import random_tree
from resilsim.reliability import ComponentSpec, Leaf, Parallel, Serial, evaluate
from resilsim.simulation import (
    CAUSE_BASE_HAZARD,
    CAUSE_ZONE_ESCALATED,
    KIND_FAILURE,
    KIND_REPAIR,
    FailureTrace,
    TreeIndex,
    UnknownUnitError,
    ZoneParams,
    extract_chains,
    simulate,
    snapshot_monte_carlo,
    zone_of,
)

try:
    import resilsim.kernels._core as core_kernels
except ImportError:
    core_kernels = None

requires_core = pytest.mark.skipif(
    core_kernels is None, reason="compiled kernel extension not built"
)


def leaf(uid, p, mult=1):
    return Leaf(ComponentSpec(id=uid, component_class="cpu", p_fail=p, multiplicity=mult))


def flat_tree(*probs):
    return Serial(
        children=tuple(leaf(f"u{i}", p) for i, p in enumerate(probs)),
        layer_label="system",
    )


class TestSnapshotMonteCarlo:
    def test_certain_failure(self):
        est, se = snapshot_monte_carlo(flat_tree(1.0, 1.0), trials=1000, seed=0)
        assert est == 1.0
        assert se == 0.0

    def test_never_fails(self):
        est, _ = snapshot_monte_carlo(flat_tree(0.0, 0.0), trials=1000, seed=0)
        assert est == 0.0

    def test_deterministic_for_seed(self, baseline_tree):
        a = snapshot_monte_carlo(baseline_tree, trials=30000, seed=5)
        b = snapshot_monte_carlo(baseline_tree, trials=30000, seed=5)
        assert a == b

    def test_partial_blocks_consistent(self):
        # trials that do not divide the block size still draw from fixed
        # per-block streams
        tree = flat_tree(0.3, 0.2)
        est1, _ = snapshot_monte_carlo(tree, trials=10000, seed=1)
        assert 0.3 < est1 < 0.6

    def test_matches_analytic_on_mixed_tree(self):
        tree = Serial(
            children=(
                leaf("a", 0.05),
                Parallel(children=(leaf("b", 0.4), leaf("c", 0.5), leaf("d", 0.3, mult=2))),
            )
        )
        est, se = snapshot_monte_carlo(tree, trials=200_000, seed=9)
        assert est == pytest.approx(evaluate(tree), abs=4 * max(se, 1e-4))

    def test_trials_validation(self, baseline_tree):
        with pytest.raises(Exception):
            snapshot_monte_carlo(baseline_tree, trials=0, seed=0)


class TestZoneOf:
    def test_radius_zero_is_unit_plus_ancestors(self, baseline_index):
        node_id = next(
            baseline_index.unit_id[u]
            for u in range(baseline_index.n_units)
            if baseline_index.label[u] == "node" and baseline_index.kind[u] == "serial"
        )
        zone = zone_of(baseline_index, node_id, radius=0, window=10, multiplier=2.0)
        labels = sorted(
            baseline_index.label[baseline_index.unit_index[m]] for m in zone.member_units
        )
        assert labels == ["chassis", "node", "rack", "system"]

    def test_node_radius_one_covers_sibling_nodes(self, baseline_index):
        node_id = next(
            baseline_index.unit_id[u]
            for u in range(baseline_index.n_units)
            if baseline_index.label[u] == "node" and baseline_index.kind[u] == "serial"
        )
        zone = zone_of(baseline_index, node_id, radius=1, window=10, multiplier=2.0)
        members = sorted(zone.member_units)
        node_members = [m for m in members if m.startswith("node@")]
        assert len(node_members) == 4
        layer_members = [
            baseline_index.label[baseline_index.unit_index[m]]
            for m in members
            if not m.startswith("node@")
        ]
        assert sorted(layer_members) == ["chassis", "rack", "system"]
        # never strict descendants of the origin
        origin = baseline_index.unit_index[node_id]
        for m in zone.member_units:
            assert not baseline_index.is_ancestor(origin, baseline_index.unit_index[m])

    def test_root_zone_is_only_root(self, baseline_index):
        zone = zone_of(baseline_index, "system", radius=3, window=10, multiplier=2.0)
        assert zone.member_units == frozenset({"system"})

    def test_unknown_unit(self, baseline_index):
        with pytest.raises(UnknownUnitError):
            zone_of(baseline_index, "no-such-unit", radius=1, window=10, multiplier=2.0)

    def test_coverage_is_anchor_subtree(self, baseline_index):
        shared = "rack0/chassis0/shared"
        zone = zone_of(baseline_index, shared, radius=1, window=10, multiplier=2.0)
        assert zone.covers("rack0/chassis0/node0/cpu")
        assert zone.covers("rack0/chassis0/node3/io")
        assert not zone.covers("rack0/chassis1/node0/cpu")
        assert not zone.covers("core-switch")


class TestSimulate:
    def test_no_hazard_no_events(self):
        trace = simulate(flat_tree(0.0, 0.0), horizon=50, seed=1)
        assert trace.events == ()
        assert trace.final_system_state == "operational"

    def test_certain_single_failure_persists(self):
        trace = simulate(flat_tree(1.0), horizon=3, seed=0)
        failures = trace.failures()
        assert len(failures) == 1
        assert failures[0].time == 0
        assert trace.final_system_state == "failed"

    def test_deterministic(self, baseline_index):
        zp = ZoneParams(1, 10, 2.0)
        a = simulate(baseline_index, horizon=5000, zone_params=zp, seed=42)
        b = simulate(baseline_index, horizon=5000, zone_params=zp, seed=42)
        assert a.events == b.events
        assert a.final_system_state == b.final_system_state

    def test_events_sorted_by_time_then_unit(self, baseline_index):
        trace = simulate(
            baseline_index, horizon=20000, zone_params=ZoneParams(2, 10, 2.0), seed=3
        )
        keys = [(e.time, e.unit_id) for e in trace.events]
        assert keys == sorted(keys)

    def test_repair_brings_units_back(self):
        tree = flat_tree(1.0)
        trace = simulate(tree, horizon=10, repair_time=3, seed=0)
        kinds = [(e.time, e.kind) for e in trace.events]
        # fails at 0, repairs at 3, fails again at 3 (p=1), repairs at 6, ...
        assert (0, KIND_FAILURE) in kinds
        assert (3, KIND_REPAIR) in kinds
        assert (3, KIND_FAILURE) in kinds

    def test_zone_escalation_increases_failures(self, baseline_index):
        # coupled runs: common uniforms per (step, instance)
        base = simulate(
            baseline_index,
            horizon=100_000,
            zone_params=ZoneParams(2, 10, 1.0),
            repair_time=100,
            seed=42,
        )
        hot = simulate(
            baseline_index,
            horizon=100_000,
            zone_params=ZoneParams(2, 10, 2.0),
            repair_time=100,
            seed=42,
        )
        n_base = len(base.failures())
        n_hot = len(hot.failures())
        assert n_hot >= n_base
        frac_base = sum(
            1 for e in base.failures() if e.cause == CAUSE_ZONE_ESCALATED
        ) / max(n_base, 1)
        frac_hot = sum(
            1 for e in hot.failures() if e.cause == CAUSE_ZONE_ESCALATED
        ) / max(n_hot, 1)
        assert frac_base == 0.0
        assert frac_hot > frac_base
        # regression values for this seed and parameter set
        assert n_base == 180
        assert n_hot == 181
        assert sum(1 for e in hot.failures() if e.cause == CAUSE_ZONE_ESCALATED) == 5

    def test_zone_soundness(self, baseline_index):
        zp = ZoneParams(2, 10, 2.0)
        trace = simulate(
            baseline_index, horizon=100_000, zone_params=zp, repair_time=100, seed=42
        )
        failures = trace.failures()
        for i, event in enumerate(failures):
            if event.cause != CAUSE_ZONE_ESCALATED:
                continue
            covered = False
            for prior in failures[:i]:
                if prior.time < event.time <= prior.time + zp.window:
                    zone = zone_of(
                        baseline_index,
                        prior.unit_id,
                        zp.radius,
                        zp.window,
                        zp.multiplier,
                    )
                    if zone.covers(event.unit_id):
                        covered = True
                        break
            assert covered, f"escalated event outside every active zone: {event}"

    def test_instance_expansion_for_multiplicity(self):
        tree = leaf("trio", 1.0, mult=3)
        trace = simulate(tree, horizon=2, seed=0)
        ids = sorted(e.unit_id for e in trace.failures())
        assert ids == ["trio#0", "trio#1", "trio#2"]
        assert trace.final_system_state == "failed"

    def test_validation(self, baseline_tree):
        with pytest.raises(Exception):
            simulate(baseline_tree, horizon=0)
        with pytest.raises(Exception):
            simulate(baseline_tree, horizon=10, repair_time=0)


class TestExtractChains:
    def test_empty_trace(self):
        trace = simulate(flat_tree(0.0), horizon=10, seed=0)
        assert extract_chains(trace) == []

    def test_disjoint_failures_are_singletons(self):
        # two certain-failure leaves in separate racks, radius 1: zones
        # never reach across, so two singleton chains
        tree = Serial(
            children=(
                Parallel(
                    children=(
                        Serial(children=(leaf("r0", 1.0),), layer_label="rack"),
                        Serial(children=(leaf("r1", 1.0),), layer_label="rack"),
                    ),
                    layer_label="rack",
                ),
            ),
            layer_label="system",
        )
        trace = simulate(tree, horizon=3, zone_params=ZoneParams(1, 5, 2.0), seed=0)
        chains = extract_chains(trace)
        assert len(trace.failures()) == 2
        assert len(chains) == 2
        assert all(len(c) == 1 for c in chains)

    def test_partition_property(self, baseline_index):
        trace = simulate(
            baseline_index,
            horizon=100_000,
            zone_params=ZoneParams(2, 10, 2.0),
            repair_time=100,
            seed=42,
        )
        chains = extract_chains(trace)
        chained = [e for c in chains for e in c.events]
        assert sorted((e.time, e.unit_id) for e in chained) == sorted(
            (e.time, e.unit_id) for e in trace.failures()
        )
        assert len(chained) == len(trace.failures())

    def test_escalated_run_has_multi_event_chain(self, baseline_index):
        trace = simulate(
            baseline_index,
            horizon=100_000,
            zone_params=ZoneParams(2, 10, 2.0),
            repair_time=100,
            seed=42,
        )
        chains = extract_chains(trace)
        assert len(chains) <= len(trace.failures())
        escalated = any(e.cause == CAUSE_ZONE_ESCALATED for e in trace.failures())
        assert escalated
        assert max(len(c) for c in chains) >= 2

    def test_chain_times_strictly_increase_and_linkage_shape(self, baseline_index):
        trace = simulate(
            baseline_index,
            horizon=100_000,
            zone_params=ZoneParams(2, 10, 2.0),
            repair_time=100,
            seed=42,
        )
        for chain in extract_chains(trace):
            times = [e.time for e in chain.events]
            assert times == sorted(times)
            assert len(set(times)) == len(times)
            assert chain.linkage[0] is None
            assert len(chain.linkage) == len(chain.events)
            for z in chain.linkage[1:]:
                assert z is not None


class TestEscalationMonotonicity:
    # Against the multiplier-1.0 control the coupling argument is exact:
    # the control hazard p never exceeds the escalated hazard at any
    # (step, instance), so every unit failing in the control also fails
    # (no later) in the escalated run.
    @pytest.mark.parametrize("seed", range(5))
    def test_control_failures_nest_in_escalated_runs(self, seed):
        rng = random.Random(seed)
        tree = random_tree(rng, max_instances=12, p_low=0.0, p_high=0.05)
        idx = TreeIndex(tree)
        control = simulate(
            idx, horizon=300, zone_params=ZoneParams(1, 20, 1.0), seed=seed
        )
        control_units = {e.unit_id for e in control.failures()}
        for mult in (1.5, 2.0, 4.0):
            hot = simulate(
                idx, horizon=300, zone_params=ZoneParams(1, 20, mult), seed=seed
            )
            hot_units = {e.unit_id for e in hot.failures()}
            assert control_units <= hot_units
            assert len(hot.failures()) >= len(control.failures())


class TestBackendEquivalence:
    @requires_core
    def test_mc_kernels_agree(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            tree = random_tree(random.Random(int(rng.integers(1 << 30))), max_instances=15)
            idx = TreeIndex(tree)
            from resilsim.simulation import _postfix_program

            op_kind, op_arg = _postfix_program(idx)
            u = rng.random((500, idx.n_instances))
            a = pure_kernels.mc_count_failures(u, idx.inst_p, op_kind, op_arg)
            b = core_kernels.mc_count_failures(u, idx.inst_p, op_kind, op_arg)
            assert a == b

    @requires_core
    def test_sim_kernels_agree(self, baseline_index):
        idx = baseline_index
        cover_start, cover_end = idx.instance_covers(1)
        rng = np.random.default_rng(1)
        u = rng.random((400, idx.n_instances)) * 0.001  # force activity
        state = {}
        for name, impl in (("pure", pure_kernels), ("core", core_kernels)):
            alive = np.ones(idx.n_instances, dtype=np.uint8)
            fail_time = np.full(idx.n_instances, -1, dtype=np.int64)
            zo: list[int] = []
            ze: list[int] = []
            out = impl.sim_chunk(
                u, 0, idx.inst_p, cover_start, cover_end, 10, 3.0, 50,
                alive, fail_time, zo, ze,
            )
            state[name] = (out, alive.copy(), fail_time.copy(), list(zo), list(ze))
        (out_a, alive_a, ft_a, zo_a, ze_a) = state["pure"]
        (out_b, alive_b, ft_b, zo_b, ze_b) = state["core"]
        assert [list(x) for x in out_a] == [list(x) for x in out_b]
        assert np.array_equal(alive_a, alive_b)
        assert np.array_equal(ft_a, ft_b)
        assert zo_a == zo_b and ze_a == ze_b

    def test_selected_backend_reported(self):
        assert kernels.BACKEND in ("cython", "python")
        assert "python" in kernels.available_backends()
