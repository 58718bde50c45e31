"""Event loop of the overwrite-buffer router.

The loop is compiled with numba; ``simulate.py_func`` is the same code run
by the interpreter.  Random inputs are unit-rate exponential draws supplied
by the caller, one array per stochastic role, so the kernel itself is
deterministic.

At most four future events exist: the next arrival of each flow, the end
of the current service and the expiry of the buffered unit (the instant its
lead-time reaches the threshold).  They are compared directly; an expiry
wins ties.
"""

import numpy as np
from numba import njit

# per-flow counter columns
ARRIVED, ON_TIME, LATE, OVERWRITTEN, SKIPPED, CODED, IN_SYSTEM = range(7)
N_COUNTERS = 7

# event kinds in the trace
EV_ARRIVAL1, EV_ARRIVAL2, EV_COMPLETION, EV_EXPIRY = range(4)
# actions in the trace
ACT_SERVE, ACT_BUFFER, ACT_CODE, ACT_OVERWRITE, ACT_DISPATCH, ACT_IDLE, ACT_REMOVE = range(7)
TRACE_COLUMNS = 9  # time, kind, state_before, state_after, action, lead_time, service_start, service_length, buffer_units

STATUS_DONE, STATUS_EXHAUSTED, STATUS_EVENT_LIMIT = range(3)

INF = np.inf


@njit(cache=True)
def _state(busy, buf_kind):
    if not busy:
        return 0
    return 1 + buf_kind  # 1 busy / 2, 3 native type 1, 2 / 4 coded


@njit(cache=True, nogil=True)
def simulate(lam1, lam2, mu, d, theta, coding, ia1, ia2, svc, n_warm, n_target, trace, max_events):
    """Run one replication.

    Returns ``(status, counts[2, 7], state_time[5], seen[5], t_start, t_end, n_events, n_trace)``.
    Arrivals with global index in ``[n_warm, n_warm + n_target)`` are the
    counted ones; the measurement window runs from the first counted arrival
    to the first arrival after them.  After the window closes the loop keeps
    going until every counted packet has left the system.
    """
    counts = np.zeros((2, N_COUNTERS), dtype=np.int64)
    state_time = np.zeros(5)
    seen = np.zeros(5, dtype=np.int64)
    trace_cap = trace.shape[0]
    n_trace = 0

    # server
    busy = False
    t_srv_end = INF
    t_srv_start = 0.0
    srv_len = 0.0
    srv_has = np.zeros(2, dtype=np.bool_)
    srv_dl = np.zeros(2)
    srv_cnt = np.zeros(2, dtype=np.bool_)
    # buffer: kind 0 empty, 1/2 native of flow 1/2, 3 coded
    buf_kind = 0
    buf_has = np.zeros(2, dtype=np.bool_)
    buf_dl = np.zeros(2)
    buf_cnt = np.zeros(2, dtype=np.bool_)
    t_expiry = INF

    rates = (lam1, lam2)
    draws = (ia1, ia2)
    used = np.zeros(2, dtype=np.int64)
    t_arr = np.full(2, INF)
    for k in range(2):
        if rates[k] > 0:
            if draws[k].shape[0] == 0:
                return STATUS_EXHAUSTED, counts, state_time, seen, 0.0, 0.0, 0, 0
            t_arr[k] = draws[k][0] / rates[k]
            used[k] = 1
    n_svc = 0

    n_arrivals = 0
    in_window = False
    closed = False
    t_start = 0.0
    t_end = 0.0
    t_prev = 0.0
    live = 0  # counted natives still in the system
    n_events = 0

    while True:
        if closed and live == 0:
            status = STATUS_DONE
            break
        if max_events > 0 and n_events >= max_events:
            status = STATUS_EVENT_LIMIT
            break

        k_next = 0 if t_arr[0] <= t_arr[1] else 1
        t_next_arr = t_arr[k_next]
        if buf_kind != 0 and t_expiry <= t_srv_end and t_expiry <= t_next_arr:
            kind = EV_EXPIRY
            t = t_expiry
        elif busy and t_srv_end <= t_next_arr:
            kind = EV_COMPLETION
            t = t_srv_end
        else:
            kind = EV_ARRIVAL1 + k_next
            t = t_next_arr
        if t == INF:
            status = STATUS_EXHAUSTED
            break

        before = _state(busy, buf_kind)
        if in_window:
            state_time[before] += t - t_prev
        t_prev = t
        n_events += 1
        lead = np.nan
        action = 0
        started = -1.0
        length = -1.0

        if kind == EV_EXPIRY:
            for f in range(2):
                if buf_has[f] and buf_cnt[f]:
                    counts[f, SKIPPED] += 1
                    live -= 1
                buf_has[f] = False
                buf_cnt[f] = False
            buf_kind = 0
            t_expiry = INF
            action = ACT_REMOVE

        elif kind == EV_COMPLETION:
            started = t_srv_start
            length = srv_len
            for f in range(2):
                if srv_has[f] and srv_cnt[f]:
                    if t <= srv_dl[f]:
                        counts[f, ON_TIME] += 1
                    else:
                        counts[f, LATE] += 1
                    live -= 1
                srv_has[f] = False
                srv_cnt[f] = False
            if buf_kind != 0 and t < t_expiry:
                lead = -INF
                for f in range(2):
                    srv_has[f] = buf_has[f]
                    srv_dl[f] = buf_dl[f]
                    srv_cnt[f] = buf_cnt[f]
                    if buf_has[f] and buf_dl[f] - t > lead:
                        lead = buf_dl[f] - t
                    buf_has[f] = False
                    buf_cnt[f] = False
                buf_kind = 0
                t_expiry = INF
                if n_svc >= svc.shape[0]:
                    status = STATUS_EXHAUSTED
                    break
                srv_len = svc[n_svc] / mu
                n_svc += 1
                t_srv_start = t
                t_srv_end = t + srv_len
                action = ACT_DISPATCH
            else:
                busy = False
                t_srv_end = INF
                action = ACT_IDLE

        else:
            f = kind - EV_ARRIVAL1
            counted = False
            if n_arrivals == n_warm and not closed:
                in_window = True
                t_start = t
            if n_arrivals == n_warm + n_target:
                in_window = False
                closed = True
                t_end = t
            if in_window:
                counted = True
                counts[f, ARRIVED] += 1
                seen[before] += 1
                live += 1
            n_arrivals += 1
            deadline = t + d

            if not busy:
                if n_svc >= svc.shape[0]:
                    status = STATUS_EXHAUSTED
                    break
                busy = True
                srv_has[f] = True
                srv_dl[f] = deadline
                srv_cnt[f] = counted
                srv_len = svc[n_svc] / mu
                n_svc += 1
                t_srv_start = t
                t_srv_end = t + srv_len
                action = ACT_SERVE
            elif buf_kind == 0:
                buf_kind = 1 + f
                buf_has[f] = True
                buf_dl[f] = deadline
                buf_cnt[f] = counted
                action = ACT_BUFFER
            elif coding and buf_kind != 3 and buf_kind != 1 + f:
                buf_kind = 3
                buf_has[f] = True
                buf_dl[f] = deadline
                buf_cnt[f] = counted
                for g in range(2):
                    if buf_cnt[g]:
                        counts[g, CODED] += 1
                action = ACT_CODE
            else:
                for g in range(2):
                    if buf_has[g] and buf_cnt[g]:
                        counts[g, OVERWRITTEN] += 1
                        live -= 1
                    buf_has[g] = False
                    buf_cnt[g] = False
                buf_kind = 1 + f
                buf_has[f] = True
                buf_dl[f] = deadline
                buf_cnt[f] = counted
                action = ACT_OVERWRITE
            if buf_kind != 0 and action != ACT_SERVE:
                # the newest native always carries the latest deadline
                t_expiry = deadline - theta

            # next arrival of this flow
            if used[f] >= draws[f].shape[0]:
                status = STATUS_EXHAUSTED
                break
            t_arr[f] = t + draws[f][used[f]] / rates[f]
            used[f] += 1

        if n_trace < trace_cap:
            row = trace[n_trace]
            row[0] = t
            row[1] = kind
            row[2] = before
            row[3] = _state(busy, buf_kind)
            row[4] = action
            row[5] = lead
            row[6] = started
            row[7] = length
            row[8] = (1 if buf_kind != 0 else 0)
            n_trace += 1

    for f in range(2):
        if buf_has[f] and buf_cnt[f]:
            counts[f, IN_SYSTEM] += 1
        if busy and srv_has[f] and srv_cnt[f]:
            counts[f, IN_SYSTEM] += 1
    if not closed:
        t_end = t_prev
    return status, counts, state_time, seen, t_start, t_end, n_events, n_trace
