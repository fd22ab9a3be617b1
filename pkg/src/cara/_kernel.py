"""Compiled slot loop for the simulator.

The kernel only sees flat arrays; all policy/config handling lives in sim.py.
Random inputs arrive as pre-drawn uniforms, one array per (purpose, node),
so the loop itself is deterministic.
"""

import numpy as np
from numba import njit

CARA = 0
ALOHA = 1
LCQ = 2

# columns of the integer accumulator
I_ARRIVALS = 0  # whole run
I_DEPARTURES = 1  # whole run
I_POST_ARRIVALS = 2
I_POST_DEPARTURES = 3
I_POST_OPPORTUNITIES = 4
I_POST_EMPTY = 5
I_POST_GOOD = 6
I_POST_EST_FLIP_G = 7  # good slots estimated bad
I_POST_BAD = 8
I_POST_EST_FLIP_B = 9  # bad slots estimated good
N_INT = 10

# columns of the float accumulator
F_SUM_Q = 0
F_SUM_TQ = 1  # t centred on the post-warmup midpoint
N_FLOAT = 2


@njit(cache=True)
def run_chunk(
    start, n_slots, warmup, post_len, mid,
    policy, dominant,
    p, lam, pi, rho, eps_g, eps_b, q_solo, q_bad, q_good,
    u_arr, u_ch, u_est, u_coin, u_rx, u_tie,
    queue, chan, acc_i, acc_f, batch_opp, n_batches, cap,
    tr_chan, tr_est, tr_tx, tr_ok, tr_q, tr_start, tr_len,
):
    """Advance the system ``n_slots`` slots from global slot ``start``.

    Returns the number of slots executed; fewer than ``n_slots`` means a
    queue crossed ``cap`` and the run stopped.
    """
    n = queue.shape[0]
    est = np.zeros(n, np.bool_)
    tx = np.zeros(n, np.bool_)
    want = np.zeros(n, np.bool_)
    ok = np.zeros(n, np.bool_)
    opp = np.zeros(n, np.bool_)
    t = 0
    b = 0
    for k in range(n_slots):
        slot = start + k
        # true channel: first slot from the stationary law, then the persistence chain
        for i in range(n):
            u = u_ch[i, k]
            if slot == 0:
                chan[i] = u < pi[i]
            elif chan[i]:
                chan[i] = u < rho[i] + (1.0 - rho[i]) * pi[i]
            else:
                chan[i] = u < (1.0 - rho[i]) * pi[i]
            if chan[i]:
                est[i] = not (u_est[i, k] < eps_g[i])
            else:
                est[i] = u_est[i, k] < eps_b[i]

        if policy == LCQ:
            best = -1
            ties = 0
            for i in range(n):
                tx[i] = False
                want[i] = chan[i] and est[i]
                if want[i] and queue[i] > 0:
                    if best < 0 or queue[i] > queue[best]:
                        best = i
                        ties = 1
                    elif queue[i] == queue[best]:
                        ties += 1
            if best >= 0 and ties > 1:
                pick = int(u_tie[k] * ties)
                if pick >= ties:
                    pick = ties - 1
                seen = 0
                for i in range(n):
                    if want[i] and queue[i] > 0 and queue[i] == queue[best]:
                        if seen == pick:
                            best = i
                            break
                        seen += 1
            if best >= 0:
                tx[best] = True
            for i in range(n):
                ok[i] = tx[i] and u_rx[i, k] < q_solo[i]
                if queue[i] > 0:
                    opp[i] = ok[i]
                else:
                    # an empty connected node would be served only if nobody else is
                    opp[i] = want[i] and best < 0 and u_rx[i, k] < q_solo[i]
        else:
            for i in range(n):
                if policy == CARA:
                    want[i] = est[i] and u_coin[i, k] < p[i]
                else:
                    want[i] = u_coin[i, k] < p[i]
                tx[i] = want[i] and (queue[i] > 0 or i == dominant)
            for i in range(n):
                # would node i succeed if it attempted, given the others' attempts
                q = q_solo[i]
                for j in range(n):
                    if j != i and tx[j]:
                        q = q_good[i] if chan[j] else q_bad[i]
                hit = chan[i] and u_rx[i, k] < q
                opp[i] = want[i] and hit
                ok[i] = tx[i] and hit

        post = slot >= warmup
        if post:
            t = slot - warmup
            b = (t * n_batches) // post_len
        for i in range(n):
            if post:
                if queue[i] == 0:
                    acc_i[i, I_POST_EMPTY] += 1
                acc_f[i, F_SUM_Q] += queue[i]
                acc_f[i, F_SUM_TQ] += (t - mid) * queue[i]
                if opp[i]:
                    acc_i[i, I_POST_OPPORTUNITIES] += 1
                    batch_opp[i, b] += 1
                if chan[i]:
                    acc_i[i, I_POST_GOOD] += 1
                    if not est[i]:
                        acc_i[i, I_POST_EST_FLIP_G] += 1
                else:
                    acc_i[i, I_POST_BAD] += 1
                    if est[i]:
                        acc_i[i, I_POST_EST_FLIP_B] += 1
            r = slot - tr_start
            if 0 <= r < tr_len:
                tr_chan[r, i] = chan[i]
                tr_est[r, i] = est[i]
                tr_tx[r, i] = tx[i]
                tr_ok[r, i] = ok[i]
                tr_q[r, i] = queue[i]
            # dummy successes leave an empty queue alone
            if ok[i] and queue[i] > 0:
                queue[i] -= 1
                acc_i[i, I_DEPARTURES] += 1
                if post:
                    acc_i[i, I_POST_DEPARTURES] += 1
            if u_arr[i, k] < lam[i]:
                queue[i] += 1
                acc_i[i, I_ARRIVALS] += 1
                if post:
                    acc_i[i, I_POST_ARRIVALS] += 1
        for i in range(n):
            if queue[i] > cap:
                return k + 1
    return n_slots
