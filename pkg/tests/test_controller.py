"""Failure prediction, protection decisions, and policy accounting."""

import random

import numpy as np
import pytest

from resilsim.controller import (
    DEFAULT_POLICY_STUDY_ZONES,
    MECH_CHECKPOINT,
    MECH_ISOLATION,
    MECH_MIGRATION,
    MECH_REDUNDANCY,
    MODE_ALWAYS_ON,
    MODE_NONE,
    MODE_ON_DEMAND,
    REASON_MECH_UNAVAILABLE,
    REASON_NO_SURROGATE,
    AdminNotification,
    ProtectionMechanism,
    ProtectionPolicy,
    StateError,
    SystemState,
    compare_policies,
    decide,
    default_policies,
    predict,
    run_policy,
)
from resilsim.reliability import ComponentSpec, Leaf, Parallel, Serial
from resilsim.simulation import (
    KIND_FAILURE,
    KIND_REPAIR,
    TreeIndex,
    ZoneParams,
    simulate,
    zone_of,
)
from resilsim.topology import BASELINE_RATES, FatTreeConfig, build_fat_tree


def leaf(uid, p, cls="cpu", mult=1):
    return Leaf(ComponentSpec(id=uid, component_class=cls, p_fail=p, multiplicity=mult))


def zero_rate_tree(n=2, c=2, r=2):
    rates = {k: 0.0 for k in BASELINE_RATES}
    return build_fat_tree(
        FatTreeConfig(nodes_per_chassis=n, chassis_per_rack=c, racks=r, rates=rates)
    )


class TestPredict:
    def test_quiet_window_one_equals_leaf_rates(self, baseline_index):
        preds = predict(baseline_index, SystemState(), window=1)
        assert preds["rack0/chassis0/node0/cpu"] == pytest.approx(1e-6, rel=1e-6)
        assert preds["core-switch"] == pytest.approx(2e-4, rel=1e-9)

    def test_zero_hazard_zero_prediction(self):
        tree = Serial(children=(leaf("a", 0.0),), layer_label="system")
        preds = predict(tree, SystemState(), window=50)
        assert preds["a"] == 0.0

    def test_escalated_closed_form(self):
        tree = Serial(children=(leaf("a", 0.1),), layer_label="system")
        idx = TreeIndex(tree)
        zone = zone_of(idx, "a", radius=0, window=5, multiplier=2.0)
        preds = predict(idx, SystemState(active_zones=(zone,)), window=3)
        assert preds["a"] == pytest.approx(1 - 0.8**3)

    def test_failed_units_map_to_one(self, baseline_index):
        state = SystemState(failed=frozenset({"rack0/chassis0/node0/cpu"}))
        preds = predict(baseline_index, state, window=1)
        assert preds["rack0/chassis0/node0/cpu"] == 1.0
        # the node is serial over its internals: one failed leaf fails it
        node_id = next(
            uid for uid in preds if uid.startswith("node@") and preds[uid] == 1.0
        )
        assert node_id

    def test_aggregates_compose(self, baseline_index):
        preds = predict(baseline_index, SystemState(), window=10)
        # system = serial(core, parallel(racks)): prediction dominated by core
        core = preds["core-switch"]
        assert preds["system"] >= core
        assert preds["system"] == pytest.approx(core, rel=1e-3)

    def test_unknown_failed_unit_rejected(self, baseline_index):
        with pytest.raises(StateError):
            predict(baseline_index, SystemState(failed=frozenset({"ghost"})), window=5)

    def test_zone_from_other_index_is_rederived(self, baseline_tree):
        # zones built against one index apply to a fresh index of the same
        # tree: the escalation span is reconstructed from member ids
        idx_a = TreeIndex(baseline_tree)
        idx_b = TreeIndex(baseline_tree)
        zone = zone_of(idx_a, "rack0/chassis0/shared", 1, 10, 2.0)
        got = predict(idx_b, SystemState(active_zones=(zone,)), window=1)
        want = predict(idx_a, SystemState(active_zones=(zone,)), window=1)
        assert got == want
        assert got["rack0/chassis0/node0/cpu"] == pytest.approx(2e-6, rel=1e-6)
        assert got["rack1/chassis0/node0/cpu"] == pytest.approx(1e-6, rel=1e-6)


class TestDecide:
    def test_threshold_one_activates_nothing(self):
        policy = ProtectionPolicy(
            mode=MODE_ON_DEMAND, activate_threshold=1.0, deactivate_threshold=0.5
        )
        active, notes = decide({"a": 0.99, "b": 0.2}, policy, frozenset())
        assert active == frozenset()
        assert notes == ()

    def test_degenerate_thresholds_equal_always_on(self):
        preds = {"a": 0.0, "b": 0.7}
        od = ProtectionPolicy(
            mode=MODE_ON_DEMAND, activate_threshold=0.0, deactivate_threshold=0.0
        )
        ao = ProtectionPolicy(mode=MODE_ALWAYS_ON)
        assert decide(preds, od, frozenset())[0] == decide(preds, ao, frozenset())[0]

    def test_no_surrogate_notification(self):
        policy = ProtectionPolicy(
            mode=MODE_ON_DEMAND,
            mechanisms=(ProtectionMechanism(MECH_MIGRATION),),
            activate_threshold=0.5,
            deactivate_threshold=0.2,
            spare_nodes=0,
        )
        active, notes = decide({"z": 0.9}, policy, frozenset(), spares_available=0, now=7)
        assert "z" in active
        assert len(notes) == 1
        assert notes[0].reason == REASON_NO_SURROGATE
        assert notes[0].predicted_probability == 0.9
        assert notes[0].time == 7

    def test_mechanism_unavailable_notification(self):
        policy = ProtectionPolicy(
            mode=MODE_ON_DEMAND,
            mechanisms=(),
            activate_threshold=0.5,
            deactivate_threshold=0.2,
        )
        _, notes = decide({"z": 0.8}, policy, frozenset())
        assert notes[0].reason == REASON_MECH_UNAVAILABLE

    def test_mode_none_always_empty(self):
        policy = ProtectionPolicy(mode=MODE_NONE)
        assert decide({"a": 1.0}, policy, frozenset({"a"}))[0] == frozenset()

    def test_hysteresis_state_machine(self):
        policy = ProtectionPolicy(
            mode=MODE_ON_DEMAND, activate_threshold=0.6, deactivate_threshold=0.3
        )
        active = frozenset()
        seen = []
        series = [0.1, 0.5, 0.7, 0.5, 0.4, 0.29, 0.5, 0.61, 0.2]
        for p in series:
            active, _ = decide({"u": p}, policy, active)
            seen.append("u" in active)
        # activates at 0.7, stays through 0.5/0.4, drops below 0.3,
        # does not reactivate at 0.5, reactivates at 0.61, drops at 0.2
        assert seen == [False, False, True, True, True, False, False, True, False]

    @pytest.mark.parametrize("seed", range(20))
    def test_hysteresis_changes_only_on_crossings(self, seed):
        rng = random.Random(seed)
        hi, lo = 0.7, 0.4
        policy = ProtectionPolicy(
            mode=MODE_ON_DEMAND, activate_threshold=hi, deactivate_threshold=lo
        )
        active = frozenset()
        prev = False
        for _ in range(200):
            p = rng.random()
            active, _ = decide({"u": p}, policy, active)
            now = "u" in active
            if now != prev:
                if now:
                    assert p >= hi
                else:
                    assert p < lo
            else:
                if prev:
                    assert p >= lo
                else:
                    assert p < hi
            prev = now

    def test_equal_thresholds_pure_thresholding(self):
        policy = ProtectionPolicy(
            mode=MODE_ON_DEMAND, activate_threshold=0.5, deactivate_threshold=0.5
        )
        active = frozenset()
        for p, expect in [(0.4, False), (0.5, True), (0.49, False), (0.51, True)]:
            active, _ = decide({"u": p}, policy, active)
            assert ("u" in active) == expect


class TestRunPolicyAccounting:
    def test_no_failures_none_mode(self):
        tree = zero_rate_tree()
        m = run_policy(tree, 10, ZoneParams(), ProtectionPolicy(mode=MODE_NONE), seed=0)
        assert m.completed_work == 8 * 10  # 8 nodes x 10 steps x workload 1
        assert m.lost_work == 0.0
        assert m.downtime == 0
        assert m.energy == 8 * 10 * 1.0

    def test_always_on_overhead_discount(self):
        tree = zero_rate_tree()
        m = run_policy(
            tree, 10, ZoneParams(), ProtectionPolicy(mode=MODE_ALWAYS_ON), seed=0
        )
        # work rate quantization: integer ticks of 2^-20
        assert m.completed_work == pytest.approx(0.9 * 80, rel=1e-5)
        base = run_policy(tree, 10, ZoneParams(), ProtectionPolicy(mode=MODE_NONE), seed=0)
        assert m.energy > base.energy
        assert m.energy == pytest.approx(80 * 1.0 + 80 * 0.05, rel=1e-12)
        assert m.activations == 8

    def test_conservation_exact(self):
        rng = random.Random(3)
        for _ in range(25):
            rates = {k: rng.uniform(0, 0.02) for k in BASELINE_RATES}
            tree = build_fat_tree(
                FatTreeConfig(
                    nodes_per_chassis=rng.randint(1, 3),
                    chassis_per_rack=rng.randint(1, 3),
                    racks=rng.randint(1, 2),
                    rates=rates,
                )
            )
            for mode in (MODE_NONE, MODE_ALWAYS_ON, MODE_ON_DEMAND):
                policy = ProtectionPolicy(
                    mode=mode, activate_threshold=0.3, deactivate_threshold=0.1
                )
                m = run_policy(
                    tree,
                    60,
                    ZoneParams(1, 10, 2.0),
                    policy,
                    workload=rng.choice([0.5, 1.0, 2.0]),
                    seed=rng.randint(0, 10_000),
                )
                # internal int-tick assertion guarantees produced ==
                # completed + lost; both metrics are exact multiples of
                # 2^-20 so the float sum is exact too
                assert m.completed_work >= 0 and m.lost_work >= 0

    def test_lost_work_matches_trace_replay(self, baseline_index):
        horizon = 4000
        zp = ZoneParams(1, 100, 4.0)
        seed = 13
        metrics = run_policy(
            baseline_index, horizon, zp, ProtectionPolicy(mode=MODE_NONE), seed=seed
        )
        trace = simulate(baseline_index, horizon, zone_params=zp, seed=seed)
        expected = _replay_none(baseline_index, trace, horizon)
        assert metrics.lost_work == pytest.approx(expected["lost"], abs=1e-9)
        assert metrics.completed_work == pytest.approx(expected["completed"], abs=1e-9)
        assert metrics.downtime == expected["downtime"]

    def test_policy_ordering_structural(self, baseline_index):
        zp = DEFAULT_POLICY_STUDY_ZONES
        for seed in range(3):
            none = run_policy(
                baseline_index, 3000, zp, ProtectionPolicy(mode=MODE_NONE), seed=seed
            )
            ao = run_policy(
                baseline_index, 3000, zp, ProtectionPolicy(mode=MODE_ALWAYS_ON), seed=seed
            )
            assert ao.lost_work <= none.lost_work
            assert ao.energy >= none.energy

    def test_determinism(self, baseline_index):
        policy = ProtectionPolicy(mode=MODE_ON_DEMAND)
        a = run_policy(baseline_index, 2000, DEFAULT_POLICY_STUDY_ZONES, policy, seed=11)
        b = run_policy(baseline_index, 2000, DEFAULT_POLICY_STUDY_ZONES, policy, seed=11)
        assert a == b

    def test_redundancy_preserves_work_and_consumes_spares(self):
        # one certain-failure worker, thresholds force immediate protection
        tree = Serial(
            children=(
                Parallel(
                    children=(
                        Serial(children=(leaf("w0/c", 0.0),), layer_label="node"),
                        Serial(children=(leaf("w1/c", 1.0),), layer_label="node"),
                    ),
                    layer_label="node",
                ),
            ),
            layer_label="system",
        )
        policy = ProtectionPolicy(
            mode=MODE_ON_DEMAND,
            mechanisms=(ProtectionMechanism(MECH_REDUNDANCY),),
            activate_threshold=0.5,
            deactivate_threshold=0.1,
            spare_nodes=1,
        )
        m = run_policy(tree, 5, ZoneParams(), policy, seed=0)
        # w1 earns one step of work, fails the same step; the spare
        # preserves the buffer, so nothing is lost and the step counts
        assert m.lost_work == 0.0
        assert m.completed_work == 5.0 + 1.0
        none = run_policy(tree, 5, ZoneParams(), ProtectionPolicy(mode=MODE_NONE), seed=0)
        assert none.lost_work == 1.0  # same step of work, lost instead

    def test_redundancy_preserves_accumulated_buffer(self):
        # worker fails mid-run: with redundancy the accumulated work
        # survives, without it the buffer is lost
        tree = Serial(
            children=(
                Parallel(
                    children=(
                        Serial(children=(leaf("w0/c", 0.0),), layer_label="node"),
                        Serial(children=(leaf("w1/c", 0.05),), layer_label="node"),
                    ),
                    layer_label="node",
                ),
            ),
            layer_label="system",
        )
        seed = next(
            s
            for s in range(100)
            if any(
                e.time > 2
                for e in simulate(tree, 40, ZoneParams(), seed=s).failures()
            )
            and simulate(tree, 40, ZoneParams(), seed=s).failures()
        )
        none = run_policy(tree, 40, ZoneParams(), ProtectionPolicy(mode=MODE_NONE), seed=seed)
        assert none.lost_work > 0
        policy = ProtectionPolicy(
            mode=MODE_ALWAYS_ON,
            mechanisms=(ProtectionMechanism(MECH_REDUNDANCY),),
            spare_nodes=2,
        )
        protected = run_policy(tree, 40, ZoneParams(), policy, seed=seed)
        assert protected.lost_work == 0.0

    def test_isolation_idles_nodes(self):
        tree = zero_rate_tree()
        policy = ProtectionPolicy(
            mode=MODE_ON_DEMAND,
            mechanisms=(ProtectionMechanism(MECH_ISOLATION),),
            activate_threshold=0.0,
            deactivate_threshold=0.0,
        )
        m = run_policy(tree, 10, ZoneParams(), policy, seed=0)
        assert m.completed_work == 0.0  # everyone isolated, nobody earns
        assert m.energy == pytest.approx(8 * 10 * 0.2)

    def test_migration_transfers_buffer_and_notifies_when_out(self):
        tree = zero_rate_tree()
        policy = ProtectionPolicy(
            mode=MODE_ON_DEMAND,
            mechanisms=(ProtectionMechanism(MECH_MIGRATION, activation_latency=2),),
            activate_threshold=0.0,
            deactivate_threshold=0.0,
            spare_nodes=3,
        )
        m = run_policy(tree, 10, ZoneParams(), policy, seed=0)
        # 8 workers activate at t=0; migration engages at t=2 for all, but
        # only 3 spares exist: 5 workers notify no-surrogate
        surrogate_notes = [
            n for n in m.notifications if n.reason == REASON_NO_SURROGATE
        ]
        assert len(surrogate_notes) == 5
        assert all(n.time == 2 for n in surrogate_notes)

    def test_notification_soundness(self, baseline_index):
        policy = ProtectionPolicy(
            mode=MODE_ON_DEMAND,
            mechanisms=(ProtectionMechanism(MECH_MIGRATION),),
            activate_threshold=1e-4,
            deactivate_threshold=6e-5,
            spare_nodes=0,
        )
        m = run_policy(
            baseline_index, 4000, DEFAULT_POLICY_STUDY_ZONES, policy, seed=2
        )
        for note in m.notifications:
            assert note.predicted_probability >= policy.activate_threshold
            assert note.reason in (REASON_NO_SURROGATE, REASON_MECH_UNAVAILABLE)

    def test_capacity_bound(self, baseline_index):
        m = run_policy(
            baseline_index,
            1000,
            DEFAULT_POLICY_STUDY_ZONES,
            ProtectionPolicy(mode=MODE_ON_DEMAND),
            workload=2.0,
            seed=4,
        )
        assert m.completed_work + m.lost_work <= 64 * 1000 * 2.0 + 1e-9


def _replay_none(index, trace, horizon):
    """Independent accounting replay for mode=none from a simulate trace."""
    events_by_time: dict[int, list] = {}
    for e in trace.events:
        events_by_time.setdefault(e.time, []).append(e)

    # worker units: innermost 'node'-labeled
    node_units = [u for u in range(index.n_units) if index.label[u] == "node"]
    inner = []
    for u in node_units:
        if not any(
            index.is_ancestor(u, v) for v in node_units if v != u
        ):
            inner.append(u)
    alive_inst = np.ones(index.n_instances, dtype=bool)
    buffers = {u: 0.0 for u in inner}
    completed = 0.0
    lost = 0.0
    downtime = 0

    def unit_ok(u):
        return alive_inst[index.inst_start[u] : index.inst_end[u]].all()

    for t in range(horizon):
        for e in events_by_time.get(t, []):
            if e.kind == KIND_REPAIR:
                alive_inst[index.instance_index[e.unit_id]] = True
        failed = index.unit_failed_states(alive_inst)
        for u in inner:
            ok = not failed[u]
            a = index.parent[u]
            while ok and a >= 0:
                if failed[a]:
                    ok = False
                a = index.parent[a]
            if ok:
                buffers[u] += 1.0
            else:
                downtime += 1
        for e in events_by_time.get(t, []):
            if e.kind == KIND_FAILURE:
                alive_inst[index.instance_index[e.unit_id]] = False
        for u in inner:
            if not unit_ok(u) and buffers[u] > 0:
                lost += buffers[u]
                buffers[u] = 0.0
    completed = sum(buffers.values())
    return {"completed": completed, "lost": lost, "downtime": downtime}


class TestComparePolicies:
    def test_single_policy_single_seed_matches_run(self, baseline_index):
        policy = ProtectionPolicy(mode=MODE_NONE)
        stats = compare_policies(
            baseline_index, 1500, DEFAULT_POLICY_STUDY_ZONES, [policy], [9]
        )
        direct = run_policy(
            baseline_index, 1500, DEFAULT_POLICY_STUDY_ZONES, policy, seed=9
        )
        assert stats[0].means["completed_work"] == direct.completed_work
        assert stats[0].means["lost_work"] == direct.lost_work
        assert stats[0].means["energy"] == direct.energy
        assert stats[0].stds["energy"] == 0.0

    def test_identical_policies_identical_rows(self, baseline_index):
        policy = ProtectionPolicy(mode=MODE_ON_DEMAND)
        stats = compare_policies(
            baseline_index, 1000, DEFAULT_POLICY_STUDY_ZONES, [policy, policy], [1, 2]
        )
        assert stats[0].means == stats[1].means
        assert stats[0].stds == stats[1].stds

    def test_bit_reproducible(self, baseline_index):
        policies = default_policies()
        a = compare_policies(
            baseline_index, 800, DEFAULT_POLICY_STUDY_ZONES, policies, [0, 1]
        )
        b = compare_policies(
            baseline_index, 800, DEFAULT_POLICY_STUDY_ZONES, policies, [0, 1]
        )
        assert [(s.means, s.stds) for s in a] == [(s.means, s.stds) for s in b]

    def test_validation(self, baseline_index):
        with pytest.raises(Exception):
            compare_policies(baseline_index, 10, None, [], [1])
        with pytest.raises(Exception):
            compare_policies(
                baseline_index, 10, None, [ProtectionPolicy(mode=MODE_NONE)], []
            )
