"""Compiled simulation of the two base heuristics.

Mirrors ``policies.heuristic_controls`` + ``dynamics.step`` + ``costs`` stage by
stage, including the order of floating-point sums, so a closed-loop heuristic
run and the cost-to-go computed here agree exactly. Used inside rollout where
the reference path is far too slow at fleet scale.
"""

import numpy as np
from numba import njit, types
from numba.typed import Dict

GREEDY = 0
RENEWABLE = 1

# indices into the packed float parameter vector
P_CAP, P_SOC_MIN, P_SOC_MAX, P_WORK_STEP, P_CHARGE_STEP, P_EFF, P_E_W, P_D_THRE, P_A0, P_A1, P_C_R = range(11)

SOC_TOL = 1e-9
DEPLETION_TOL = 1e-12


def pack_params(params, degradation, renewable_price):
    out = np.empty(11)
    out[P_CAP] = params.capacity_kwh
    out[P_SOC_MIN] = params.soc_min
    out[P_SOC_MAX] = params.soc_max
    out[P_WORK_STEP] = params.work_step
    out[P_CHARGE_STEP] = params.charge_step
    out[P_EFF] = params.efficiency
    out[P_E_W] = params.e_work_kwh_per_stage
    out[P_D_THRE] = params.d_thre
    out[P_A0] = degradation.a0
    out[P_A1] = degradation.a1
    out[P_C_R] = renewable_price
    return out


@njit(cache=True, nogil=True)
def simulate(kind, t0, horizon, q0, soc0, fr, f_entry, f_work, grid_price, e_r, p):
    """Run one base heuristic from stage ``t0`` to the end of the day.

    Flights are in FIFO order; ``f_entry`` is the stage each joins the queue.
    Returns (feasible, energy, degradation, terminal, fail_stage).
    """
    n = q0.shape[0]
    q = q0.copy()
    soc = soc0.copy()
    cap = p[P_CAP]
    soc_min = p[P_SOC_MIN]
    soc_max = p[P_SOC_MAX]
    work_step = p[P_WORK_STEP]
    charge_step = p[P_CHARGE_STEP]
    eff = p[P_EFF]
    e_w = p[P_E_W]
    d_thre = p[P_D_THRE]
    a0 = p[P_A0]
    a1 = p[P_A1]
    c_r = p[P_C_R]

    nf = f_entry.shape[0]
    head = 0
    energy_total = 0.0
    wear_total = 0.0
    assigned = np.zeros(n, dtype=np.bool_)
    charging = np.zeros(n, dtype=np.bool_)
    job = np.zeros(n, dtype=np.int64)

    for t in range(t0, horizon):
        arrived = head
        while arrived < nf and f_entry[arrived] <= t:
            arrived += 1
        n_pending = arrived - head

        for i in range(n):
            assigned[i] = False
            charging[i] = False

        # highest SoC first, lower index on ties
        order_desc = np.argsort(-soc, kind="mergesort")
        n_assign = 0
        for r in range(n):
            if n_assign >= n_pending:
                break
            i = order_desc[r]
            if q[i] >= 0 and soc[i] > soc_min + SOC_TOL:
                assigned[i] = True
                job[i] = f_work[head + n_assign]
                n_assign += 1

        order_asc = np.argsort(soc, kind="mergesort")
        if kind == GREEDY:
            for r in range(n):
                i = order_asc[r]
                if q[i] >= 0 and not assigned[i] and soc[i] < soc_max - SOC_TOL:
                    charging[i] = True
        elif e_r[t] > 0.0:
            running = 0.0
            for r in range(n):
                i = order_asc[r]
                if q[i] >= 0 and not assigned[i] and soc[i] < soc_max - SOC_TOL:
                    charging[i] = True
                    room = soc_max - soc[i]
                    inc = room if charge_step >= room - SOC_TOL else charge_step
                    running += inc * cap / eff
                    if running >= e_r[t]:
                        break

        # stage cost, summed in vehicle index order
        draw = 0.0
        wear = 0.0
        for i in range(n):
            if charging[i]:
                room = soc_max - soc[i]
                inc = room if charge_step >= room - SOC_TOL else charge_step
                draw += inc * cap / eff
            elif assigned[i] or q[i] <= -2:
                wear += e_w * (a0 + a1 * (1.0 - soc[i])) / fr[i]
        renewable = min(draw, e_r[t])
        energy_total += c_r * renewable + grid_price[t] * (draw - renewable)
        wear_total += wear

        for i in range(n):
            if assigned[i]:
                q[i] = -job[i]
                soc[i] = soc[i] - work_step
            elif q[i] <= -2:
                q[i] = q[i] + 1
                soc[i] = soc[i] - work_step
            elif q[i] == -1:
                q[i] = 0
            elif charging[i]:
                q[i] = 1
                room = soc_max - soc[i]
                if charge_step >= room - SOC_TOL:
                    soc[i] = soc_max
                else:
                    soc[i] = soc[i] + charge_step
            else:
                q[i] = 0
            if soc[i] < -DEPLETION_TOL:
                return False, energy_total, wear_total, 0.0, t

        head += n_assign
        for j in range(head, arrived):
            if t + 1 - f_entry[j] > d_thre:
                return False, energy_total, wear_total, 0.0, t

    terminal = 0.0
    price = grid_price[horizon]
    for i in range(n):
        short = soc_max - soc[i]
        if short > 0.0:
            terminal += price * cap * short
    return True, energy_total, wear_total, terminal, -1


# -- exact DP oracle ------------------------------------------------------------
#
# Vehicle code (17 bits): base flag (1) | charges since base (5) | discharges
# since base (5) | stages of work left (6). SoC = base + a*charge_step -
# b*work_step with base = soc0 (flag 0) or soc_max (flag 1, set by a clamped
# charge). A state packs the sorted vehicle codes and the count of flights
# served so far (FIFO + known arrivals make that the whole queue).

ORACLE_MAX_LATTICE = 31
ORACLE_MAX_WORK = 63
_VBITS = 17


@njit(cache=True)
def _vcode(flag, a, b, m):
    return ((flag * 32 + a) * 32 + b) * 64 + m


@njit(cache=True)
def _vsoc(code, soc0, soc_max, charge_step, work_step):
    b = (code // 64) % 32
    a = (code // 2048) % 32
    base = soc_max if code // 65536 == 1 else soc0
    return base + a * charge_step - b * work_step


@njit(cache=True)
def _pack(codes, k, served):
    # insertion sort of k vehicle codes, then pack
    tmp = codes[:k].copy()
    for i in range(1, k):
        x = tmp[i]
        j = i - 1
        while j >= 0 and tmp[j] > x:
            tmp[j + 1] = tmp[j]
            j -= 1
        tmp[j + 1] = x
    key = served
    for i in range(k):
        key = (key << _VBITS) | tmp[i]
    return key


@njit(cache=True)
def dp_oracle(n, horizon, soc0, f_stage, f_work, grid_price, e_r, p, fr):
    """Minimum total cost over all feasible control sequences; inf if none."""
    cap = p[P_CAP]
    soc_min = p[P_SOC_MIN]
    soc_max = p[P_SOC_MAX]
    work_step = p[P_WORK_STEP]
    charge_step = p[P_CHARGE_STEP]
    eff = p[P_EFF]
    e_w = p[P_E_W]
    d_thre = p[P_D_THRE]
    a0 = p[P_A0]
    a1 = p[P_A1]
    c_r = p[P_C_R]
    nf = f_stage.shape[0]
    mask_v = (1 << _VBITS) - 1

    layer = Dict.empty(key_type=types.int64, value_type=types.float64)
    start = np.zeros(n, dtype=np.int64)
    layer[_pack(start, n, 0)] = 0.0

    codes = np.zeros(n, dtype=np.int64)
    socs = np.zeros(n)
    nxt_codes = np.zeros(n, dtype=np.int64)
    eligible = np.zeros(n, dtype=np.int64)
    workers = np.zeros(n, dtype=np.int64)
    is_worker = np.zeros(n, dtype=np.bool_)
    others = np.zeros(n, dtype=np.int64)

    for t in range(horizon):
        arrived = 0
        while arrived < nf and f_stage[arrived] <= t:
            arrived += 1
        nxt = Dict.empty(key_type=types.int64, value_type=types.float64)
        for key, so_far in layer.items():
            served = key >> (_VBITS * n)
            for i in range(n):
                codes[n - 1 - i] = (key >> (_VBITS * i)) & mask_v
                socs[n - 1 - i] = _vsoc(codes[n - 1 - i], soc0, soc_max, charge_step, work_step)

            n_el = 0
            for i in range(n):
                if codes[i] % 64 == 0 and socs[i] > soc_min + SOC_TOL:
                    eligible[n_el] = i
                    n_el += 1
            waiting = arrived - served
            n_serve = min(n_el, waiting)
            if waiting - n_serve > 0 and t + 1 - f_stage[served + n_serve] > d_thre:
                continue

            # in-progress jobs are forced
            busy_wear = 0.0
            dead = False
            for i in range(n):
                m = codes[i] % 64
                if m >= 2:
                    if socs[i] - work_step < -DEPLETION_TOL:
                        dead = True
                    busy_wear += e_w * (a0 + a1 * (1.0 - socs[i])) / fr
            if dead:
                continue

            n_choices = 1
            for _ in range(n_serve):
                n_choices *= n_el
            for x in range(n_choices):
                # decode an ordered choice of n_serve distinct eligible vehicles
                y = x
                ok = True
                for i in range(n):
                    is_worker[i] = False
                for s in range(n_serve):
                    v = eligible[y % n_el]
                    y //= n_el
                    if is_worker[v]:
                        ok = False
                        break
                    is_worker[v] = True
                    workers[s] = v
                if not ok:
                    continue
                wear = busy_wear
                for s in range(n_serve):
                    v = workers[s]
                    if socs[v] - work_step < -DEPLETION_TOL:
                        ok = False
                    wear += e_w * (a0 + a1 * (1.0 - socs[v])) / fr
                if not ok:
                    continue
                n_oth = 0
                for i in range(n):
                    if codes[i] % 64 == 0 and not is_worker[i]:
                        others[n_oth] = i
                        n_oth += 1

                for mask in range(1 << n_oth):
                    draw = 0.0
                    skip = False
                    for i in range(n):
                        c = codes[i]
                        flag = c // 65536
                        a = (c // 2048) % 32
                        b = (c // 64) % 32
                        m = c % 64
                        if m >= 2:
                            nxt_codes[i] = _vcode(flag, a, b + 1, m - 1)
                        elif m == 1:
                            nxt_codes[i] = _vcode(flag, a, b, 0)
                        else:
                            nxt_codes[i] = c
                    for s in range(n_serve):
                        v = workers[s]
                        c = codes[v]
                        nxt_codes[v] = _vcode(c // 65536, (c // 2048) % 32, (c // 64) % 32 + 1,
                                              f_work[served + s])
                    for r in range(n_oth):
                        if (mask >> r) & 1:
                            v = others[r]
                            room = soc_max - socs[v]
                            if socs[v] >= soc_max - SOC_TOL:
                                skip = True
                                break
                            if charge_step >= room - SOC_TOL:
                                draw += room * cap / eff
                                nxt_codes[v] = _vcode(1, 0, 0, 0)
                            else:
                                draw += charge_step * cap / eff
                                c = codes[v]
                                nxt_codes[v] = _vcode(c // 65536, (c // 2048) % 32 + 1, (c // 64) % 32, 0)
                    if skip:
                        continue
                    renewable = min(draw, e_r[t])
                    total = so_far + wear + c_r * renewable + grid_price[t] * (draw - renewable)
                    nk = _pack(nxt_codes, n, served + n_serve)
                    if nk in nxt:
                        if total < nxt[nk]:
                            nxt[nk] = total
                    else:
                        nxt[nk] = total
        layer = nxt

    best = np.inf
    price = grid_price[horizon]
    for key, so_far in layer.items():
        term = 0.0
        for i in range(n):
            c = (key >> (_VBITS * i)) & mask_v
            short = soc_max - _vsoc(c, soc0, soc_max, charge_step, work_step)
            if short > 0.0:
                term += price * cap * short
        if so_far + term < best:
            best = so_far + term
    return best
