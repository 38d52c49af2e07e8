"""Compiled simulation loops.

Every batch kernel takes a packed spec tuple ``P`` (see ``mapcore.pack``), a
64-bit stream key and per-replica inputs.  Replica ``i`` draws from its own
counter-based stream, so outputs are independent of thread count.

Between events the ordinate is Gaussian with exact increments on substeps no
longer than ``max_step``; running extremes and level crossings inside a
substep are sampled from the Brownian bridge, which makes them exact at any
mesh.  Segments with zero diffusion are linear and handled in closed form.
"""
import math

import numpy as np
from numba import config as _nb_config, njit, prange

if _nb_config.THREADING_LAYER == "default":
    # the bundled TBB is often too old; OpenMP is deterministic enough for us
    _nb_config.THREADING_LAYER = "omp"

_C1 = np.uint64(0xBF58476D1CE4E5B9)
_C2 = np.uint64(0x94D049BB133111EB)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_ONE = np.uint64(1)
_S11 = np.uint64(11)
_S27 = np.uint64(27)
_S30 = np.uint64(30)
_S31 = np.uint64(31)
_INV53 = 1.0 / 9007199254740992.0
_TWO_PI = 2.0 * math.pi
_INF = np.inf

# packed spec layout
Q_, EXIT_, A_, SIG_, LAM_, JK_, JP_, JOFF_, JLEN_, SK_, SP_, SOFF_, SLEN_, KILL_, EMP_ = range(15)

# event kinds
EV_SWITCH, EV_JUMP, EV_KILL = 1, 2, 3


# ---------------------------------------------------------------- randomness

@njit(cache=True, inline="always")
def mix64(z):
    z = (z ^ (z >> _S30)) * _C1
    z = (z ^ (z >> _S27)) * _C2
    return z ^ (z >> _S31)


@njit(cache=True)
def replica_key(key, i):
    return mix64(key ^ mix64(np.uint64(i) + _ONE))


@njit(cache=True)
def new_state(key, i):
    st = np.empty(2, np.uint64)
    st[0] = replica_key(key, i)
    st[1] = np.uint64(0)
    return st


@njit(cache=True, inline="always")
def u01(st):
    st[1] += _ONE
    z = mix64(mix64(st[0] + st[1] * _GOLDEN) ^ st[0])
    return (np.float64(z >> _S11) + 0.5) * _INV53


@njit(cache=True, inline="always")
def normal(st):
    u1 = u01(st)
    u2 = u01(st)
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(_TWO_PI * u2)


@njit(cache=True)
def uniform_block(key, replica, n):
    st = new_state(key, replica)
    out = np.empty(n)
    for k in range(n):
        out[k] = u01(st)
    return out


@njit(cache=True)
def normal_block(key, replica, n):
    st = new_state(key, replica)
    out = np.empty(n)
    for k in range(n):
        out[k] = normal(st)
    return out


# ---------------------------------------------------------------- jump laws
# kinds: 0 none, 1 point mass c, 2 exponential (beta, sign),
#        3 two-sided exponential (beta_up, beta_down, p_up), 4 empirical

@njit(cache=True, inline="always")
def draw_jump(kind, p, emp, off, ln, st):
    if kind == 0:
        return 0.0
    if kind == 1:
        return p[0]
    if kind == 2:
        return p[1] * (-math.log(u01(st))) / p[0]
    if kind == 3:
        if u01(st) < p[2]:
            return -math.log(u01(st)) / p[0]
        return math.log(u01(st)) / p[1]
    idx = int(u01(st) * ln)
    if idx >= ln:
        idx = ln - 1
    return emp[off + idx]


@njit(cache=True)
def jump_tail(kind, p, emp, off, ln, y):
    """P(J > y) for a single jump."""
    if kind == 0:
        return 1.0 if y < 0.0 else 0.0
    if kind == 1:
        return 1.0 if p[0] > y else 0.0
    if kind == 2:
        if p[1] > 0:
            return 1.0 if y < 0.0 else math.exp(-p[0] * y)
        return -math.expm1(p[0] * y) if y < 0.0 else 0.0
    if kind == 3:
        if y >= 0.0:
            return p[2] * math.exp(-p[0] * y)
        return p[2] + (1.0 - p[2]) * (-math.expm1(p[1] * y))
    c = 0
    for k in range(ln):
        if emp[off + k] > y:
            c += 1
    return c / ln


@njit(cache=True)
def draw_jump_above(kind, p, emp, off, ln, u, st):
    """Draw J conditioned on J > u >= 0."""
    if kind == 1:
        return p[0]
    if kind == 2 or kind == 3:
        return u - math.log(u01(st)) / p[0]
    c = 0
    for k in range(ln):
        if emp[off + k] > u:
            c += 1
    pick = int(u01(st) * c)
    if pick >= c:
        pick = c - 1
    for k in range(ln):
        if emp[off + k] > u:
            if pick == 0:
                return emp[off + k]
            pick -= 1
    return u


# ---------------------------------------------------------------- events

@njit(cache=True, inline="always")
def event_rate(P, j):
    return P[EXIT_][j] + P[LAM_][j] + P[KILL_][0]


@njit(cache=True, inline="always")
def next_event(P, j, t, st):
    r = event_rate(P, j)
    if r <= 0.0:
        return _INF
    return t - math.log(u01(st)) / r


@njit(cache=True, inline="always")
def fire_event(P, j, st):
    """Returns (kind, jump size, new state)."""
    q = P[EXIT_][j]
    lam = P[LAM_][j]
    u = u01(st) * (q + lam + P[KILL_][0])
    if u < q:
        v = u01(st) * q
        n = P[Q_].shape[0]
        k = j
        acc = 0.0
        for kk in range(n):
            if kk == j:
                continue
            acc += P[Q_][j, kk]
            k = kk
            if v < acc:
                break
        J = draw_jump(P[SK_][j, k], P[SP_][j, k], P[EMP_], P[SOFF_][j, k], P[SLEN_][j, k], st)
        return EV_SWITCH, J, k
    if u < q + lam:
        J = draw_jump(P[JK_][j], P[JP_][j], P[EMP_], P[JOFF_][j], P[JLEN_][j], st)
        return EV_JUMP, J, j
    return EV_KILL, 0.0, j


@njit(cache=True)
def exit_draw(P, v, u, st):
    """Post-crossing (state, overshoot) given pre-crossing state v and
    undershoot u > 0, from the jump kernel restricted to jumps larger than u."""
    n = P[Q_].shape[0]
    w0 = P[LAM_][v] * jump_tail(P[JK_][v], P[JP_][v], P[EMP_], P[JOFF_][v], P[JLEN_][v], u)
    tot = w0
    for k in range(n):
        if k != v:
            tot += P[Q_][v, k] * jump_tail(P[SK_][v, k], P[SP_][v, k], P[EMP_],
                                          P[SOFF_][v, k], P[SLEN_][v, k], u)
    if tot <= 0.0:
        return -1, 0.0
    x = u01(st) * tot
    if x < w0:
        J = draw_jump_above(P[JK_][v], P[JP_][v], P[EMP_], P[JOFF_][v], P[JLEN_][v], u, st)
        return v, J - u
    acc = w0
    last = v
    for k in range(n):
        if k == v:
            continue
        w = P[Q_][v, k] * jump_tail(P[SK_][v, k], P[SP_][v, k], P[EMP_],
                                    P[SOFF_][v, k], P[SLEN_][v, k], u)
        if w <= 0.0:
            continue
        acc += w
        last = k
        if x < acc:
            break
    J = draw_jump_above(P[SK_][v, last], P[SP_][v, last], P[EMP_],
                        P[SOFF_][v, last], P[SLEN_][v, last], u, st)
    return last, J - u


# ---------------------------------------------------------------- helpers

@njit(cache=True, inline="always")
def bridge_max(x0, x1, s, h, st):
    if s <= 0.0:
        return max(x0, x1)
    d = x1 - x0
    return 0.5 * (x0 + x1 + math.sqrt(d * d - 2.0 * s * s * h * math.log(u01(st))))


@njit(cache=True, inline="always")
def bridge_min(x0, x1, s, h, st):
    if s <= 0.0:
        return min(x0, x1)
    d = x1 - x0
    return 0.5 * (x0 + x1 - math.sqrt(d * d - 2.0 * s * s * h * math.log(u01(st))))


@njit(cache=True, inline="always")
def clock_seg(x0, x1, h, alpha):
    """Integral of exp(alpha*x) over a step of length h with x linear."""
    d = alpha * (x1 - x0)
    e0 = math.exp(alpha * x0)
    if abs(d) < 1e-8:
        return h * e0 * (1.0 + 0.5 * d)
    return h * e0 * math.expm1(d) / d


@njit(cache=True, inline="always")
def n_sub(span, max_step):
    if span <= 0.0:
        return 0
    if max_step >= span:
        return 1
    return int(math.ceil(span / max_step - 1e-9))


@njit(cache=True)
def _grow(a, need):
    b = np.empty(max(2 * a.shape[0], need), a.dtype)
    b[:a.shape[0]] = a
    return b


# ---------------------------------------------------------------- terminal values

@njit(cache=True, parallel=True)
def terminal_batch(P, key, x0, th0, horizon, q, max_step, tchk, extremes):
    """Run each replica to a fixed horizon or to an independent Exp(q) time.

    Returns terminal value/state, running max with its time and state, running
    min, extremes at the checkpoint times ``tchk``, alive flag and horizon."""
    n = x0.shape[0]
    nc = tchk.shape[0]
    xT = np.empty(n)
    jT = np.empty(n, np.int64)
    mx = np.empty(n)
    gm = np.empty(n)
    jm = np.empty(n, np.int64)
    mn = np.empty(n)
    mxc = np.empty((n, nc))
    mnc = np.empty((n, nc))
    alive = np.ones(n, np.bool_)
    hz = np.empty(n)
    for i in prange(n):
        st = new_state(key, i)
        H = horizon
        if q > 0.0:
            H = -math.log(u01(st)) / q
        x = x0[i]
        j = th0[i]
        t = 0.0
        m = x
        g = 0.0
        jmax = j
        lo = x
        c = 0
        while c < nc and tchk[c] <= 0.0:
            mxc[i, c] = m
            mnc[i, c] = lo
            c += 1
        tev = next_event(P, j, 0.0, st)
        while True:
            stop = min(tev, H)
            if c < nc and tchk[c] < stop:
                stop = tchk[c]
            a = P[A_][j]
            s = P[SIG_][j]
            ns = n_sub(stop - t, max_step if s > 0.0 else _INF)
            if ns > 0:
                h = (stop - t) / ns
                sq = math.sqrt(h)
                for k in range(ns):
                    x1 = x + a * h
                    if s > 0.0:
                        x1 += s * sq * normal(st)
                    if extremes:
                        bm = bridge_max(x, x1, s, h, st)
                        if bm > m:
                            m = bm
                            jmax = j
                            if s > 0.0:
                                g = t + (k + 0.5) * h
                            else:
                                g = t + (k + 1) * h
                        bn = bridge_min(x, x1, s, h, st)
                        if bn < lo:
                            lo = bn
                    x = x1
            t = stop
            while c < nc and tchk[c] <= t:
                mxc[i, c] = m
                mnc[i, c] = lo
                c += 1
            if t >= H:
                break
            if t < tev:
                continue
            kind, J, kk = fire_event(P, j, st)
            if kind == EV_KILL:
                alive[i] = False
                break
            x += J
            j = kk
            if x > m:
                m = x
                g = t
                jmax = j
            if x < lo:
                lo = x
            tev = next_event(P, j, t, st)
        while c < nc:
            mxc[i, c] = m
            mnc[i, c] = lo
            c += 1
        xT[i] = x
        jT[i] = j
        mx[i] = m
        gm[i] = g
        jm[i] = jmax
        mn[i] = lo
        hz[i] = H
    return xT, jT, mx, gm, jm, mn, mxc, mnc, alive, hz


# ---------------------------------------------------------------- first passage

@njit(cache=True, parallel=True)
def passage_batch(P, key, x0, th0, levels, t_max, max_step, alpha, bridge):
    """First strict up-crossing of each of the ascending ``levels``.

    Per (replica, level): time, pre value, post value, state before/after,
    crept flag and additive clock int_0^tau exp(alpha*xi).  Uncrossed levels
    keep tau = nan.  Also returns the running max and a killed flag."""
    n = x0.shape[0]
    m = levels.shape[0]
    tau = np.full((n, m), np.nan)
    pre = np.full((n, m), np.nan)
    post = np.full((n, m), np.nan)
    jb = np.full((n, m), -1, np.int64)
    ja = np.full((n, m), -1, np.int64)
    crept = np.zeros((n, m), np.bool_)
    clk = np.full((n, m), np.nan)
    runmax = np.empty(n)
    killed = np.zeros(n, np.bool_)
    for i in prange(n):
        st = new_state(key, i)
        x = x0[i]
        j = th0[i]
        t = 0.0
        A = 0.0
        top = x
        c = 0
        while c < m and x > levels[c]:
            tau[i, c] = 0.0
            pre[i, c] = x
            post[i, c] = x
            jb[i, c] = j
            ja[i, c] = j
            clk[i, c] = 0.0
            c += 1
        tev = next_event(P, j, 0.0, st)
        while c < m and t < t_max:
            stop = min(tev, t_max)
            a = P[A_][j]
            s = P[SIG_][j]
            span = stop - t
            if span == _INF:
                # no events left: only a drift can still cross
                if s > 0.0 or a <= 0.0:
                    break
                stop = t + (levels[m - 1] - x) / a + 1.0
                span = stop - t
            ns = n_sub(span, max_step if s > 0.0 else _INF)
            h = span / ns if ns > 0 else 0.0
            sq = math.sqrt(h)
            for k in range(ns):
                x1 = x + a * h
                if s > 0.0:
                    x1 += s * sq * normal(st)
                    if bridge:
                        bm = bridge_max(x, x1, s, h, st)
                    else:
                        bm = max(x, x1)
                else:
                    bm = max(x, x1)
                if bm > top:
                    top = bm
                if bm > levels[c]:
                    tk = t + k * h
                    while c < m and bm > levels[c]:
                        if s > 0.0:
                            tc = tk + h
                            Ac = A + clock_seg(x, x1, h, alpha)
                        else:
                            dt = (levels[c] - x) / a
                            tc = tk + dt
                            Ac = A + clock_seg(x, levels[c], dt, alpha)
                        tau[i, c] = tc
                        pre[i, c] = levels[c]
                        post[i, c] = levels[c]
                        jb[i, c] = j
                        ja[i, c] = j
                        crept[i, c] = True
                        clk[i, c] = Ac
                        c += 1
                    if c == m:
                        break
                A += clock_seg(x, x1, h, alpha)
                x = x1
            if c == m:
                break
            t = stop
            if t >= t_max or t < tev:
                continue
            kind, J, kk = fire_event(P, j, st)
            if kind == EV_KILL:
                killed[i] = True
                break
            xp = x + J
            while c < m and xp > levels[c]:
                tau[i, c] = t
                pre[i, c] = x
                post[i, c] = xp
                jb[i, c] = j
                ja[i, c] = kk
                clk[i, c] = A
                c += 1
            x = xp
            j = kk
            if x > top:
                top = x
            tev = next_event(P, j, t, st)
        runmax[i] = top
    return tau, pre, post, jb, ja, crept, clk, runmax, killed


# ---------------------------------------------------------------- ladder statistics

@njit(cache=True, parallel=True)
def vigon_batch(P, key, n, t_min, gap_stop, t_cap, max_step, ygrid, zbin, nbins, nchunks):
    """Ascending-ladder jump counts and descending creeping occupation.

    Each replica starts at (0, state 0) and runs until t >= t_min and
    xi - min >= gap_stop, or t_cap.  Returns per replica: creeping gain of the
    running max, number of ladder jumps with overshoot above the previous max
    exceeding y for each y, and the sum over creeping descents of the new-min
    occupation weighted by the jump tail rate at depth + y.  Also returns the
    binned creeping occupation of the running min, summed per chunk of
    replicas (deterministic merge order)."""
    m = ygrid.shape[0]
    creep = np.zeros(n)
    cnt = np.zeros((n, m))
    rhs = np.zeros((n, m))
    hist = np.zeros((nchunks, nbins))
    per = (n + nchunks - 1) // nchunks
    for ch in prange(nchunks):
        for i in range(ch * per, min(n, (ch + 1) * per)):
            st = new_state(key, i)
            x = 0.0
            j = 0
            t = 0.0
            top = 0.0
            lo = 0.0
            tev = next_event(P, j, 0.0, st)
            a = P[A_][j]
            s = P[SIG_][j]
            lam = P[LAM_][j]
            while True:
                stop = min(tev, t_cap)
                ns = n_sub(stop - t, max_step)
                h = (stop - t) / ns if ns > 0 else 0.0
                sq = math.sqrt(h)
                done = False
                for k in range(ns):
                    x1 = x + a * h + s * sq * normal(st)
                    bm = bridge_max(x, x1, s, h, st)
                    if bm > top:
                        creep[i] += bm - top
                        top = bm
                    bn = bridge_min(x, x1, s, h, st)
                    if bn < lo:
                        z0 = -lo
                        z1 = -bn
                        b = int(z0 / zbin)
                        while z0 < z1:
                            edge = (b + 1) * zbin
                            zz = min(edge, z1)
                            piece = zz - z0
                            if b < nbins:
                                hist[ch, b] += piece
                            mid = 0.5 * (z0 + zz)
                            for q in range(m):
                                rhs[i, q] += piece * lam * jump_tail(
                                    P[JK_][j], P[JP_][j], P[EMP_], P[JOFF_][j], P[JLEN_][j],
                                    mid + ygrid[q])
                            z0 = zz
                            b += 1
                        lo = bn
                    x = x1
                    tt = t + (k + 1) * h
                    if tt >= t_min and x - lo >= gap_stop:
                        done = True
                        break
                if done:
                    break
                t = stop
                if t >= t_cap:
                    break
                kind, J, kk = fire_event(P, j, st)
                if kind == EV_KILL:
                    break
                xp = x + J
                if xp > top:
                    over = xp - top
                    for q in range(m):
                        if over > ygrid[q]:
                            cnt[i, q] += 1.0
                    top = xp
                if xp < lo:
                    lo = xp
                x = xp
                tev = next_event(P, j, t, st)
                if t >= t_min and x - lo >= gap_stop:
                    break
    return creep, cnt, rhs, hist


@njit(cache=True, parallel=True)
def skeleton_batch(P, key, x0, th0, y_top, t_cap, max_step, h_skel, mode, win_lo, win_hi):
    """Ladder skeleton of the running maximum up to level ``y_top``.

    mode 0 uses the creeping gain of the max as local time, mode 1 counts
    ladder epochs (one unit each, the start included).  Per replica returns
    the total local time, total height gained, the skeleton histogram (state
    at each creeping passage of a multiple of h_skel, or at each ladder epoch),
    exact local time by state, and local time by state while the max lies in
    each window [win_lo, win_hi)."""
    n = x0.shape[0]
    ns_ = P[Q_].shape[0]
    nw = win_lo.shape[0]
    L = np.zeros(n)
    height = np.zeros(n)
    skel = np.zeros((n, ns_))
    lt = np.zeros((n, ns_))
    win = np.zeros((n, nw, ns_))
    for i in prange(n):
        st = new_state(key, i)
        x = x0[i]
        j = th0[i]
        t = 0.0
        top = x
        if mode == 1:
            L[i] += 1.0
            lt[i, j] += 1.0
            skel[i, j] += 1.0
            for w in range(nw):
                if win_lo[w] <= top - x0[i] < win_hi[w]:
                    win[i, w, j] += 1.0
        tev = next_event(P, j, 0.0, st)
        while top < y_top and t < t_cap:
            stop = min(tev, t_cap)
            a = P[A_][j]
            s = P[SIG_][j]
            span = stop - t
            if span == _INF:
                if s > 0.0 or a <= 0.0:
                    break
                stop = t + (y_top - x) / a + 1.0
                span = stop - t
            ns = n_sub(span, max_step if s > 0.0 else _INF)
            h = span / ns if ns > 0 else 0.0
            sq = math.sqrt(h)
            for k in range(ns):
                x1 = x + a * h
                if s > 0.0:
                    x1 += s * sq * normal(st)
                bm = bridge_max(x, x1, s, h, st)
                if bm > top:
                    if mode == 0:
                        gain = bm - top
                        L[i] += gain
                        lt[i, j] += gain
                        r0 = top - x0[i]
                        r1 = bm - x0[i]
                        skel[i, j] += math.floor(r1 / h_skel) - math.floor(r0 / h_skel)
                        for w in range(nw):
                            lo_ = max(r0, win_lo[w])
                            hi_ = min(r1, win_hi[w])
                            if hi_ > lo_:
                                win[i, w, j] += hi_ - lo_
                    top = bm
                x = x1
                if top >= y_top:
                    break
            if top >= y_top:
                break
            t = stop
            if t >= t_cap or t < tev:
                continue
            kind, J, kk = fire_event(P, j, st)
            if kind == EV_KILL:
                break
            x = x + J
            j = kk
            if x > top:
                top = x
                if mode == 1:
                    L[i] += 1.0
                    lt[i, j] += 1.0
                    skel[i, j] += 1.0
                    r = top - x0[i]
                    for w in range(nw):
                        if win_lo[w] <= r < win_hi[w]:
                            win[i, w, j] += 1.0
            tev = next_event(P, j, t, st)
        height[i] = top - x0[i]
    return L, height, skel, lt, win


# ---------------------------------------------------------------- recorded paths

@njit(cache=True)
def record_path(P, key, replica, x0, th0, T, mesh):
    """One path on the grid k*mesh (k*mesh <= T) plus both sides of every event.

    Ordinates are accumulated relative to x0, so shifting x0 shifts every
    sample without changing the random stream."""
    st = new_state(key, replica)
    K = int(math.floor(T / mesh + 1e-9))
    cap = K + 64
    bt = np.empty(cap)
    bx = np.empty(cap)
    bj = np.empty(cap, np.int64)
    ecap = 16
    et = np.empty(ecap)
    ek = np.empty(ecap, np.int64)
    ex0 = np.empty(ecap)
    ex1 = np.empty(ecap)
    ej0 = np.empty(ecap, np.int64)
    ej1 = np.empty(ecap, np.int64)
    n = 0
    ne = 0
    bt[0] = 0.0
    bx[0] = 0.0
    bj[0] = th0
    n = 1
    x = 0.0
    j = th0
    t = 0.0
    g = 1
    life = _INF
    Tend = K * mesh
    tev = next_event(P, j, 0.0, st)
    while True:
        stop = min(tev, Tend)
        a = P[A_][j]
        s = P[SIG_][j]
        while g <= K and g * mesh <= stop:
            tg = g * mesh
            h = tg - t
            if h > 0.0:
                x = x + a * h
                if s > 0.0:
                    x += s * math.sqrt(h) * normal(st)
            t = tg
            if n >= bt.shape[0]:
                bt = _grow(bt, n + 1)
                bx = _grow(bx, n + 1)
                bj = _grow(bj, n + 1)
            bt[n] = t
            bx[n] = x
            bj[n] = j
            n += 1
            g += 1
        if stop >= Tend:
            break
        h = stop - t
        if h > 0.0:
            x = x + a * h
            if s > 0.0:
                x += s * math.sqrt(h) * normal(st)
        t = stop
        kind, J, kk = fire_event(P, j, st)
        if n + 2 > bt.shape[0]:
            bt = _grow(bt, n + 2)
            bx = _grow(bx, n + 2)
            bj = _grow(bj, n + 2)
        if ne >= et.shape[0]:
            et = _grow(et, ne + 1)
            ek = _grow(ek, ne + 1)
            ex0 = _grow(ex0, ne + 1)
            ex1 = _grow(ex1, ne + 1)
            ej0 = _grow(ej0, ne + 1)
            ej1 = _grow(ej1, ne + 1)
        et[ne] = t
        ek[ne] = kind
        ex0[ne] = x
        ej0[ne] = j
        bt[n] = t
        bx[n] = x
        bj[n] = j
        n += 1
        if kind == EV_KILL:
            ex1[ne] = x
            ej1[ne] = j
            ne += 1
            life = t
            break
        x = x + J
        j = kk
        ex1[ne] = x
        ej1[ne] = j
        ne += 1
        bt[n] = t
        bx[n] = x
        bj[n] = j
        n += 1
        tev = next_event(P, j, t, st)
    bx[:n] += x0
    ex0[:ne] += x0
    ex1[:ne] += x0
    return bt[:n], bx[:n], bj[:n], et[:ne], ek[:ne], ex0[:ne], ex1[:ne], ej0[:ne], ej1[:ne], life


# ---------------------------------------------------------------- conditioned to stay negative

@njit(cache=True)
def neg_attempt(P, st, y0, th0, K, t_check, max_step, t_obs, record, bt, bx, bj):
    """One attempt of the rejection sampler.

    Accepts once the path has stayed <= 0 through t_check and is below -K.
    Records substep endpoints on diffusive stretches and segment endpoints on
    linear ones (both sides of jumps).  Returns (accepted, n, value at t_obs,
    buffers)."""
    x = y0
    j = th0
    t = 0.0
    n = 0
    xo = np.nan
    if record:
        bt[0] = 0.0
        bx[0] = x
        bj[0] = j
        n = 1
    if t_obs <= 0.0:
        xo = x
    tev = next_event(P, j, 0.0, st)
    while True:
        a = P[A_][j]
        s = P[SIG_][j]
        stop = tev
        if t_obs > t and t_obs < stop:
            stop = t_obs
        if t_check > t and t_check < stop:
            stop = t_check
        if s == 0.0 and a < 0.0 and x >= -K:
            th = t + (x + K) / (-a) * (1.0 + 1e-12) + 1e-12
            if th < stop:
                stop = th
        span = stop - t
        if span == _INF:
            if s == 0.0:
                return False, n, xo, bt, bx, bj
            span = 1.0
            stop = t + 1.0
        step = max_step if s > 0.0 else _INF
        if s > 0.0 and step == _INF:
            step = 1.0
        ns = n_sub(span, step)
        h = span / ns if ns > 0 else 0.0
        sq = math.sqrt(h)
        for k in range(ns):
            x1 = x + a * h
            if s > 0.0:
                x1 += s * sq * normal(st)
            if bridge_max(x, x1, s, h, st) > 0.0:
                return False, n, xo, bt, bx, bj
            x = x1
            if record and (s > 0.0 or k == ns - 1):
                if n >= bt.shape[0]:
                    bt = _grow(bt, n + 1)
                    bx = _grow(bx, n + 1)
                    bj = _grow(bj, n + 1)
                bt[n] = t + (k + 1) * h if k < ns - 1 else stop
                bx[n] = x
                bj[n] = j
                n += 1
        t = stop
        if t == t_obs:
            xo = x
        if t >= t_check and x < -K:
            return True, n, xo, bt, bx, bj
        if t < tev:
            continue
        kind, J, kk = fire_event(P, j, st)
        if kind == EV_KILL:
            return False, n, xo, bt, bx, bj
        x = x + J
        j = kk
        if x > 0.0:
            return False, n, xo, bt, bx, bj
        if record:
            if n >= bt.shape[0]:
                bt = _grow(bt, n + 1)
                bx = _grow(bx, n + 1)
                bj = _grow(bj, n + 1)
            bt[n] = t
            bx[n] = x
            bj[n] = j
            n += 1
        if t >= t_check and x < -K:
            return True, n, xo, bt, bx, bj
        tev = next_event(P, j, t, st)


@njit(cache=True)
def neg_path(P, key, replica, y0, th0, K, t_check, max_step, max_attempts):
    st = new_state(key, replica)
    bt = np.empty(256)
    bx = np.empty(256)
    bj = np.empty(256, np.int64)
    for att in range(1, max_attempts + 1):
        ok, n, xo, bt, bx, bj = neg_attempt(P, st, y0, th0, K, t_check, max_step, -1.0, True, bt, bx, bj)
        if ok:
            return bt[:n].copy(), bx[:n].copy(), bj[:n].copy(), att
    return bt[:0].copy(), bx[:0].copy(), bj[:0].copy(), -max_attempts


@njit(cache=True, parallel=True)
def neg_obs_batch(P, key, y0, th0, K, t_check, max_step, t_obs, max_attempts):
    """Value at t_obs of rejection-sampled paths; attempts < 0 flags failure."""
    n = y0.shape[0]
    xo = np.full(n, np.nan)
    att = np.zeros(n, np.int64)
    for i in prange(n):
        st = new_state(key, i)
        bt = np.empty(1)
        bx = np.empty(1)
        bj = np.empty(1, np.int64)
        att[i] = -max_attempts
        for a in range(1, max_attempts + 1):
            ok, _, v, bt, bx, bj = neg_attempt(P, st, y0[i], th0[i], K, t_check, max_step, t_obs,
                                               False, bt, bx, bj)
            if ok:
                xo[i] = v
                att[i] = a
                break
    return xo, att


@njit(cache=True)
def path_clock(bt, bx, n, alpha):
    A = np.empty(n)
    A[0] = 0.0
    for k in range(1, n):
        A[k] = A[k - 1] + clock_seg(bx[k - 1], bx[k], bt[k] - bt[k - 1], alpha)
    return A


@njit(cache=True)
def reversed_exit(bt, bx, bj, A, n, ell, alpha):
    """First passage above ell of the time-reversed path.

    Scans the forward record backwards for the last down-crossing of ell.
    Returns (found, reversed clock time, state before, value before, state
    after, value after); values are ordinates, not relative to ell."""
    zeta = A[n - 1]
    for k in range(n - 2, -1, -1):
        if bx[k + 1] <= ell and bx[k] > ell:
            if bt[k] == bt[k + 1]:
                return True, zeta - A[k], bj[k + 1], bx[k + 1], bj[k], bx[k]
            h = bt[k + 1] - bt[k]
            dt = h * (ell - bx[k]) / (bx[k + 1] - bx[k])
            Ac = A[k] + clock_seg(bx[k], ell, dt, alpha)
            return True, zeta - Ac, bj[k + 1], ell, bj[k + 1], ell
    return False, zeta, bj[0], bx[0], bj[0], bx[0]


@njit(cache=True, parallel=True)
def entrance_batch(Pd, Pp, key, y0, th0, K, t_check, max_step, alpha, log_r, log_d, max_attempts):
    """Entrance-law ensemble by time reversal of conditioned dual paths.

    For each start (y0, th0) drawn from the stationary undershoot law: sample
    the dual conditioned to stay negative until below -K, build the additive
    clock, reverse, and read off
      quad[i] = (state before, log radius before - log_r, state after,
                 log radius after - log_r) at the first exit of radius e^log_r,
      exit1[i] = (state after, overshoot) at the exit of the unit ball,
      tau[i, q] = exit time of radius e^log_d[q],
      life[i], attempts[i], trunc[i] = exp(alpha*xi_end) (discarded-mass scale).
    The post-exit value at the unit ball comes from the jump kernel of the
    primal spec Pp given the undershoot -y0."""
    n = y0.shape[0]
    nd = log_d.shape[0]
    quad = np.full((n, 4), np.nan)
    exit1 = np.full((n, 2), np.nan)
    tau = np.full((n, nd), np.nan)
    life = np.full(n, np.nan)
    att = np.zeros(n, np.int64)
    trunc = np.full(n, np.nan)
    for i in prange(n):
        st = new_state(key, i)
        bt = np.empty(256)
        bx = np.empty(256)
        bj = np.empty(256, np.int64)
        ok = False
        nn = 0
        a_ = 0
        while a_ < max_attempts and not ok:
            a_ += 1
            ok, nn, _, bt, bx, bj = neg_attempt(Pd, st, y0[i], th0[i], K, t_check, max_step, -1.0,
                                                True, bt, bx, bj)
        if not ok:
            att[i] = -a_
            continue
        att[i] = a_
        A = path_clock(bt, bx, nn, alpha)
        life[i] = A[nn - 1]
        trunc[i] = math.exp(alpha * bx[nn - 1])
        v0 = bj[0]
        u = -bx[0]
        if u > 0.0:
            phi, z = exit_draw(Pp, v0, u, st)
        else:
            phi, z = v0, 0.0
        exit1[i, 0] = phi
        exit1[i, 1] = z
        found, tr, jb_, xb, ja_, xa = reversed_exit(bt, bx, bj, A, nn, log_r, alpha)
        if found:
            quad[i, 0] = jb_
            quad[i, 1] = xb - log_r
            quad[i, 2] = ja_
            quad[i, 3] = xa - log_r
        else:
            quad[i, 0] = v0
            quad[i, 1] = bx[0] - log_r
            quad[i, 2] = phi
            quad[i, 3] = z - log_r
        for q in range(nd):
            f, tr, _, _, _, _ = reversed_exit(bt, bx, bj, A, nn, log_d[q], alpha)
            tau[i, q] = tr
    return quad, exit1, tau, life, att, trunc


# ---------------------------------------------------------------- Brownian h-transform

@njit(cache=True, inline="always")
def _htrans_drift(y, m, s):
    kap = 2.0 * abs(m) / (s * s)
    e = math.exp(kap * y)
    return m - s * s * kap * e / (-math.expm1(kap * y))


@njit(cache=True)
def _htrans_step(y, m, s, dt, st):
    d2 = y * y / (25.0 * s * s)
    h = min(dt, d2)
    while True:
        for _ in range(64):
            y1 = y + _htrans_drift(y, m, s) * h + s * math.sqrt(h) * normal(st)
            if y1 < 0.0:
                return y1, h
        h *= 0.5


@njit(cache=True, parallel=True)
def htrans_obs_batch(key, m, s, y0, dt, t_obs):
    n = y0.shape[0]
    out = np.empty(n)
    for i in prange(n):
        st = new_state(key, i)
        y = y0[i]
        t = 0.0
        while t < t_obs:
            y, h = _htrans_step(y, m, s, min(dt, t_obs - t), st)
            t += h
            if t_obs - t < 1e-13:
                break
        out[i] = y
    return out


@njit(cache=True)
def htrans_path(key, replica, m, s, y0, dt, T, y_stop):
    """Conditioned path to time T or until below y_stop."""
    st = new_state(key, replica)
    cap = int(min(T / dt, 1e5)) + 64
    bt = np.empty(cap)
    bx = np.empty(cap)
    bt[0] = 0.0
    bx[0] = y0
    n = 1
    y = y0
    t = 0.0
    while t < T and y >= y_stop:
        y, h = _htrans_step(y, m, s, min(dt, T - t), st)
        t += h
        if n >= bt.shape[0]:
            bt = _grow(bt, n + 1)
            bx = _grow(bx, n + 1)
        bt[n] = t
        bx[n] = y
        n += 1
        if T - t < 1e-13:
            break
    return bt[:n], bx[:n]


# ---------------------------------------------------------------- planar wedge

@njit(cache=True, inline="always")
def _angle(x, y):
    th = math.atan2(y, x)
    if th < 0.0:
        th += _TWO_PI
    return th


@njit(cache=True, inline="always")
def _wedge_dist(x, y, th0):
    r = math.hypot(x, y)
    th = _angle(x, y)
    d1 = r * math.sin(th) if th < 0.5 * math.pi else r
    e = th0 - th
    d2 = r * math.sin(e) if e < 0.5 * math.pi else r
    return min(d1, d2)


@njit(cache=True, inline="always")
def _ray_cross_prob(xa, ya, xb, yb, phi, s2h):
    ux = math.cos(phi)
    uy = math.sin(phi)
    if xa * ux + ya * uy <= 0.0 or xb * ux + yb * uy <= 0.0:
        return 0.0
    da = abs(-uy * xa + ux * ya)
    db = abs(-uy * xb + ux * yb)
    return math.exp(-2.0 * da * db / s2h)


@njit(cache=True, parallel=True)
def wedge_bm_martingale(key, th0, p, sigma2, x0, y0, dt, T, n):
    """M(B at T or exit) for unconditioned planar BM, bridge-corrected exit."""
    k = math.pi / th0
    out = np.empty(n)
    nst = int(math.ceil(T / dt - 1e-9))
    h = T / nst
    s = math.sqrt(sigma2 * h)
    for i in prange(n):
        st = new_state(key, i)
        x = x0
        y = y0
        alive = True
        for _ in range(nst):
            x1 = x + s * normal(st)
            y1 = y + s * normal(st)
            th = _angle(x1, y1)
            if th <= 0.0 or th >= th0:
                alive = False
                break
            pc = _ray_cross_prob(x, y, x1, y1, 0.0, sigma2 * h)
            pc2 = _ray_cross_prob(x, y, x1, y1, th0, sigma2 * h)
            if pc > 0.0 or pc2 > 0.0:
                if u01(st) < 1.0 - (1.0 - pc) * (1.0 - pc2):
                    alive = False
                    break
            x = x1
            y = y1
        if alive:
            r = math.hypot(x, y)
            out[i] = r ** p * math.sin(k * _angle(x, y))
        else:
            out[i] = 0.0
    return out


@njit(cache=True, inline="always")
def _cond_drift(x, y, th0, p, sigma2):
    k = math.pi / th0
    r2 = x * x + y * y
    r = math.sqrt(r2)
    th = _angle(x, y)
    c = k / math.tan(k * th)
    # sigma2 * grad log M = sigma2 * (p x / r^2 + c * e_theta / r)
    return sigma2 * (p * x / r2 - c * y / r2), sigma2 * (p * y / r2 + c * x / r2), r, th


@njit(cache=True)
def _cond_step(x, y, th0, p, sigma2, dt, st):
    """One Euler step that never leaves the wedge; returns (x, y, h, ok)."""
    d = _wedge_dist(x, y, th0)
    h = min(dt, d * d / (25.0 * sigma2))
    bx, by, r, th = _cond_drift(x, y, th0, p, sigma2)
    while h > 1e-300:
        sd = math.sqrt(sigma2 * h)
        for _ in range(64):
            x1 = x + bx * h + sd * normal(st)
            y1 = y + by * h + sd * normal(st)
            th1 = _angle(x1, y1)
            if 0.0 < th1 < th0 and abs(th1 - th) < 0.5 * math.pi:
                return x1, y1, h, True
        h *= 0.5
    return x, y, 0.0, False


@njit(cache=True, parallel=True)
def wedge_cond_batch(key, th0, p, sigma2, r0, phi0, dt, R, t_cap, n):
    """Conditioned BM from radius r0 at angle phi0 until radius R.

    Returns exit angle, inverse-Lamperti clock int dt/|B|^2, final log radius,
    elapsed time and an ok flag (False on step underflow or time cap)."""
    ang = np.empty(n)
    clk = np.empty(n)
    lr = np.empty(n)
    el = np.empty(n)
    ok = np.ones(n, np.bool_)
    for i in prange(n):
        st = new_state(key, i)
        x = r0 * math.cos(phi0)
        y = r0 * math.sin(phi0)
        t = 0.0
        c = 0.0
        r = r0
        while r < R:
            x1, y1, h, good = _cond_step(x, y, th0, p, sigma2, min(dt, max(t_cap - t, 1e-300)), st)
            if not good or t >= t_cap:
                ok[i] = False
                break
            r1 = math.hypot(x1, y1)
            c += h / (r * r1)
            t += h
            x = x1
            y = y1
            r = r1
        ang[i] = _angle(x, y)
        clk[i] = c
        lr[i] = math.log(r)
        el[i] = t
    return ang, clk, lr, el, ok


@njit(cache=True)
def wedge_cond_path(key, replica, th0, p, sigma2, x0, y0, dt, T, R):
    st = new_state(key, replica)
    cap = int(min(T / dt, 1e5)) + 64
    bt = np.empty(cap)
    bx = np.empty(cap)
    by = np.empty(cap)
    bt[0] = 0.0
    bx[0] = x0
    by[0] = y0
    n = 1
    x = x0
    y = y0
    t = 0.0
    good = True
    while t < T and math.hypot(x, y) < R:
        x, y, h, good = _cond_step(x, y, th0, p, sigma2, min(dt, T - t), st)
        if not good:
            break
        t += h
        if n >= bt.shape[0]:
            bt = _grow(bt, n + 1)
            bx = _grow(bx, n + 1)
            by = _grow(by, n + 1)
        bt[n] = t
        bx[n] = x
        by[n] = y
        n += 1
        if T - t < 1e-13:
            break
    return bt[:n], bx[:n], by[:n], good


@njit(cache=True)
def _angle_cdf(phi, s, th_start, th0, kappa, nt):
    """CDF and density of the conditioned angle after MAP time s."""
    k = math.pi / th0
    F = 0.0
    f = 0.0
    for nn in range(1, nt + 1):
        w = math.exp(-kappa * (nn * nn - 1) * k * k * s)
        if nn > 1 and w < 1e-17:
            break
        cn = (2.0 / th0) * w * math.sin(nn * k * th_start)
        if nn == 1:
            I = 0.5 * (phi - math.sin(2.0 * k * phi) / (2.0 * k))
        else:
            I = 0.5 * (math.sin((nn - 1) * k * phi) / ((nn - 1) * k)
                       - math.sin((nn + 1) * k * phi) / ((nn + 1) * k))
        F += cn * I
        f += cn * math.sin(nn * k * phi) * math.sin(k * phi)
    m1 = math.sin(k * th_start)
    return F / m1, f / m1


@njit(cache=True, parallel=True)
def wedge_angle_batch(key, s, th_start, th0, kappa, nt):
    """Exact draw of the conditioned angle at MAP times s (inverse CDF)."""
    n = s.shape[0]
    out = np.empty(n)
    for i in prange(n):
        st = new_state(key, i)
        u = u01(st)
        lo = 0.0
        hi = th0
        z = th_start
        for it in range(100):
            F, f = _angle_cdf(z, s[i], th_start, th0, kappa, nt)
            if F < u:
                lo = z
            else:
                hi = z
            if f > 0.0:
                zn = z - (F - u) / f
            else:
                zn = 0.5 * (lo + hi)
            if not (lo < zn < hi):
                zn = 0.5 * (lo + hi)
            if abs(zn - z) < 1e-13 or hi - lo < 1e-13:
                z = zn
                break
            z = zn
        out[i] = z
    return out
