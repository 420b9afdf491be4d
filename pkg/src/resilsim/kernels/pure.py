"""Pure numpy implementations of the simulation hot kernels.

Reference semantics for the compiled extension: both backends must produce
bit-identical results for identical inputs (comparisons and multiplications
are IEEE-exact and performed in the same order).
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "python"

OP_LEAF = 0
OP_SERIAL = 1
OP_PARALLEL = 2

EV_FAILURE = 0
EV_REPAIR = 1

CAUSE_BASE = 0
CAUSE_ESCALATED = 1


def _reduce_program(failed: np.ndarray, op_kind, op_arg) -> np.ndarray:
    trials = failed.shape[0]
    stack: list[np.ndarray] = []
    cursor = 0
    for kind, arg in zip(op_kind, op_arg):
        if kind == OP_LEAF:
            if arg == 1:
                col = failed[:, cursor]
            else:
                col = failed[:, cursor : cursor + arg].all(axis=1)
            cursor += arg
            stack.append(col)
        elif kind == OP_SERIAL:
            if arg == 0:
                stack.append(np.zeros(trials, dtype=bool))
            else:
                children = stack[len(stack) - arg :]
                del stack[len(stack) - arg :]
                stack.append(np.logical_or.reduce(children))
        else:
            children = stack[len(stack) - arg :]
            del stack[len(stack) - arg :]
            stack.append(np.logical_and.reduce(children))
    return stack[0]


def mc_count_failures(
    u: np.ndarray,
    p_inst: np.ndarray,
    op_kind: np.ndarray,
    op_arg: np.ndarray,
) -> int:
    """Count trials in which the system fails.

    ``u`` is a [trials, instances] uniform block; instance i of a trial
    fails when u < p_inst[i].  The postfix program (op_kind/op_arg)
    reduces instance states to the root: leaves AND their instances,
    serial groups OR their children, parallel groups AND their children.
    Trials without any failed instance take a precomputed shortcut (the
    overwhelmingly common case at realistic rates).
    """
    failed = u < p_inst[np.newaxis, :]
    hot = failed.any(axis=1)
    n_hot = int(hot.sum())
    healthy_outcome = bool(
        _reduce_program(np.zeros((1, u.shape[1]), dtype=bool), op_kind, op_arg)[0]
    )
    count = 0 if not healthy_outcome else int(u.shape[0] - n_hot)
    if n_hot:
        count += int(_reduce_program(failed[hot], op_kind, op_arg).sum())
    return count


def sim_chunk(
    u: np.ndarray,
    t0: int,
    p: np.ndarray,
    cover_start: np.ndarray,
    cover_end: np.ndarray,
    window: int,
    multiplier: float,
    repair_time: int,
    alive: np.ndarray,
    fail_time: np.ndarray,
    zone_origin: list[int],
    zone_expiry: list[int],
) -> tuple[list[int], list[int], list[int], list[int]]:
    """Advance the failure-injection state machine over one step chunk.

    ``u`` holds uniforms for steps [t0, t0 + len(u)); row s is step t0+s.
    ``alive``/``fail_time`` and the active-zone lists are carried state,
    mutated in place.  A zone created by a failure at step t covers its
    precomputed instance slice for steps t+1 .. t+window.  Returns parallel
    event lists (time, instance index, kind, cause).
    """
    n = p.shape[0]
    steps = u.shape[0]
    ev_time: list[int] = []
    ev_inst: list[int] = []
    ev_kind: list[int] = []
    ev_cause: list[int] = []
    alive_b = alive.view(bool)

    for s in range(steps):
        t = t0 + s
        if repair_time >= 0:
            due = np.nonzero((~alive_b) & (fail_time + repair_time == t))[0]
            for i in due:
                alive[i] = 1
                fail_time[i] = -1
                ev_time.append(t)
                ev_inst.append(int(i))
                ev_kind.append(EV_REPAIR)
                ev_cause.append(CAUSE_BASE)
        # expiries are nondecreasing in creation order (shared window)
        drop = 0
        while drop < len(zone_expiry) and zone_expiry[drop] < t:
            drop += 1
        if drop:
            del zone_origin[:drop]
            del zone_expiry[:drop]

        mult = np.ones(n, dtype=np.float64)
        for origin in zone_origin:
            mult[cover_start[origin] : cover_end[origin]] *= multiplier
        hazard = np.minimum(p * mult, 1.0)
        fails = alive_b & (u[s] < hazard)
        for i in np.nonzero(fails)[0]:
            i = int(i)
            ev_time.append(t)
            ev_inst.append(i)
            ev_kind.append(EV_FAILURE)
            ev_cause.append(CAUSE_ESCALATED if mult[i] != 1.0 else CAUSE_BASE)
            alive[i] = 0
            fail_time[i] = t
            zone_origin.append(i)
            zone_expiry.append(t + window)
    return ev_time, ev_inst, ev_kind, ev_cause
