# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the simulation hot kernels.

Semantics are defined by resilsim.kernels.pure; outputs must be
bit-identical (same comparison and multiplication order).
"""

import numpy as np

BACKEND_NAME = "cython"

OP_LEAF = 0
OP_SERIAL = 1
OP_PARALLEL = 2

EV_FAILURE = 0
EV_REPAIR = 1

CAUSE_BASE = 0
CAUSE_ESCALATED = 1


cdef int _eval_trial(
    const double* u_row,
    double[::1] p_inst,
    signed char[::1] op_kind,
    int[::1] op_arg,
    unsigned char[::1] stack,
) noexcept nogil:
    cdef Py_ssize_t n_ops = op_kind.shape[0]
    cdef Py_ssize_t oi, j
    cdef int cursor = 0, sp = 0, a, st
    cdef signed char k
    for oi in range(n_ops):
        k = op_kind[oi]
        a = op_arg[oi]
        if k == 0:  # leaf: all instances must fail
            st = 1
            for j in range(a):
                if not (u_row[cursor + j] < p_inst[cursor + j]):
                    st = 0
            cursor += a
            stack[sp] = <unsigned char>st
            sp += 1
        elif k == 1:  # serial: any child failed
            st = 0
            for j in range(a):
                sp -= 1
                if stack[sp]:
                    st = 1
            stack[sp] = <unsigned char>st
            sp += 1
        else:  # parallel: all children failed
            st = 1
            for j in range(a):
                sp -= 1
                if not stack[sp]:
                    st = 0
            stack[sp] = <unsigned char>st
            sp += 1
    return stack[0]


def mc_count_failures(
    double[:, ::1] u,
    double[::1] p_inst,
    signed char[::1] op_kind,
    int[::1] op_arg,
):
    """Count failed trials; see pure.mc_count_failures.

    Trials with no failed instance (the common case at realistic rates)
    skip the program walk and contribute the precomputed healthy outcome.
    """
    cdef Py_ssize_t trials = u.shape[0]
    cdef Py_ssize_t n = u.shape[1]
    cdef Py_ssize_t n_ops = op_kind.shape[0]
    cdef Py_ssize_t trial, i
    cdef int anyf
    cdef unsigned char[::1] stack = np.empty(max(n_ops, 1), dtype=np.uint8)
    cdef double[:, ::1] healthy = np.ones((1, max(n, 1)), dtype=np.float64)
    cdef int healthy_outcome = _eval_trial(&healthy[0, 0], p_inst, op_kind, op_arg, stack)
    cdef long long count = 0

    with nogil:
        for trial in range(trials):
            anyf = 0
            for i in range(n):
                if u[trial, i] < p_inst[i]:
                    anyf = 1
                    break
            if not anyf:
                count += healthy_outcome
            elif _eval_trial(&u[trial, 0], p_inst, op_kind, op_arg, stack):
                count += 1
    return int(count)


def sim_chunk(
    double[:, ::1] u,
    long long t0,
    double[::1] p,
    long long[::1] cover_start,
    long long[::1] cover_end,
    long long window,
    double multiplier,
    long long repair_time,
    unsigned char[::1] alive,
    long long[::1] fail_time,
    list zone_origin,
    list zone_expiry,
):
    """Advance the failure-injection state machine; see pure.sim_chunk."""
    cdef Py_ssize_t n = p.shape[0]
    cdef Py_ssize_t steps = u.shape[0]
    cdef Py_ssize_t s, i, zi
    cdef long long t
    cdef int drop
    cdef double h
    cdef int origin
    cdef double[::1] mult = np.empty(n, dtype=np.float64)

    ev_time = []
    ev_inst = []
    ev_kind = []
    ev_cause = []

    for s in range(steps):
        t = t0 + s
        if repair_time >= 0:
            for i in range(n):
                if alive[i] == 0 and fail_time[i] + repair_time == t:
                    alive[i] = 1
                    fail_time[i] = -1
                    ev_time.append(t)
                    ev_inst.append(i)
                    ev_kind.append(EV_REPAIR)
                    ev_cause.append(CAUSE_BASE)
        # expiries are nondecreasing in creation order (shared window)
        drop = 0
        while drop < len(zone_expiry) and <long long>zone_expiry[drop] < t:
            drop += 1
        if drop:
            del zone_origin[:drop]
            del zone_expiry[:drop]

        for i in range(n):
            mult[i] = 1.0
        for zi in range(len(zone_origin)):
            origin = <int>zone_origin[zi]
            for i in range(cover_start[origin], cover_end[origin]):
                mult[i] *= multiplier

        for i in range(n):
            if alive[i]:
                h = p[i] * mult[i]
                if h > 1.0:
                    h = 1.0
                if u[s, i] < h:
                    ev_time.append(t)
                    ev_inst.append(i)
                    ev_kind.append(EV_FAILURE)
                    ev_cause.append(
                        CAUSE_ESCALATED if mult[i] != 1.0 else CAUSE_BASE
                    )
                    alive[i] = 0
                    fail_time[i] = t
                    zone_origin.append(i)
                    zone_expiry.append(t + window)
    return ev_time, ev_inst, ev_kind, ev_cause
