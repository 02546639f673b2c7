"""Pure-Python inner loops.

These mirror ``_kernels.pyx`` operation for operation (same accumulation order,
same sampling rule), so both backends produce bitwise identical results.
"""
import numpy as np

RATE_CONSTANT = 0
RATE_HARMONIC = 1
RATE_PER_VISIT = 2


def _rate(kind, a, b, p, t, k):
    if kind == RATE_CONSTANT:
        return a
    if kind == RATE_HARMONIC:
        return a / (b + float(t) ** p)
    return a / (b + float(k) ** p)


def _sample(row, u):
    last = 0
    c = 0.0
    for j in range(len(row)):
        if row[j] > 0.0:
            last = j
    for j in range(len(row)):
        c += row[j]
        if u < c:
            return j
    return last


def _bellman_component(P, R, adm, gamma, i, read):
    best = 0.0
    found = False
    Pi = P[i]
    for a in range(len(Pi)):
        if not adm[i][a]:
            continue
        row = Pi[a]
        acc = 0.0
        for j in range(len(row)):
            if row[j] != 0.0:
                acc += row[j] * read(j)
        q = R[i][a] + gamma * acc
        if not found or q > best:
            best = q
            found = True
    return best


def async_bellman(P, R, adm, gamma, x0, updates, delays, tol, record_states):
    """Asynchronous Bellman iteration with stale reads from a ring buffer.

    Returns ``(x, steps, states, ev_t, ev_i, ev_v, ev_r, residuals, converged)``.
    """
    P = P.tolist()
    R = R.tolist()
    adm = adm.tolist()
    upd = updates.tolist()
    dly = delays
    horizon, n = updates.shape
    depth = int(delays.max(initial=0)) + 1
    ring = [[0.0] * n for _ in range(depth)]
    x = [float(v) for v in x0]
    ring[0] = list(x)
    n_events = int(updates.sum())
    ev_t = np.zeros(n_events, dtype=np.int64)
    ev_i = np.zeros(n_events, dtype=np.int64)
    ev_v = np.zeros(n_events)
    ev_r = np.zeros(n_events)
    residuals = np.zeros(horizon + 1)
    states = np.zeros((horizon + 1, n)) if record_states else np.zeros((1, n))
    states[0] = x

    def residual(cur):
        worst = 0.0
        for i in range(n):
            d = abs(_bellman_component(P, R, adm, gamma, i, cur.__getitem__) - cur[i])
            if d > worst:
                worst = d
        return worst

    r = residual(x)
    residuals[0] = r
    if r <= tol:
        return np.array(x), 0, states[:1], ev_t[:0], ev_i[:0], ev_v[:0], ev_r[:0], residuals[:1], True
    k = 0
    steps = 0
    converged = False
    for t in range(horizon):
        new = list(x)
        row_u = upd[t]
        touched = []
        for i in range(n):
            if not row_u[i]:
                continue
            di = dly[t, i].tolist()

            def read(j, t=t, di=di):
                tau = t - di[j]
                if tau < 0:
                    tau = 0
                return ring[tau % depth][j]

            new[i] = _bellman_component(P, R, adm, gamma, i, read)
            touched.append(i)
        x = new
        ring[(t + 1) % depth] = list(x)
        r = residual(x)
        steps = t + 1
        residuals[steps] = r
        if record_states:
            states[steps] = x
        for i in touched:
            ev_t[k] = t
            ev_i[k] = i
            ev_v[k] = x[i]
            ev_r[k] = r
            k += 1
        if r <= tol:
            converged = True
            break
    if record_states:
        states = states[:steps + 1]
    return (np.array(x), steps, states, ev_t[:k], ev_i[:k], ev_v[:k], ev_r[:k],
            residuals[:steps + 1], converged)


def _restart(nonabs, u):
    return nonabs[int(u * len(nonabs))]


def q_learning(P, R, adm, gamma, behavior, s0, steps, rate_kind, ra, rb, rp,
               u_act, u_next, u_restart, absorbing, Q0):
    """Tabular Q-learning along one sampled trajectory.

    Returns ``(Q, visits, ev_s, ev_a, ev_v)``.
    """
    P = P.tolist()
    R = R.tolist()
    adm = adm.tolist()
    beh = behavior.tolist()
    absb = absorbing.tolist()
    nonabs = [s for s in range(len(absb)) if not absb[s]]
    Q = Q0.tolist()
    n, m = len(Q), len(Q[0])
    visits = [[0] * m for _ in range(n)]
    ev_s = np.zeros(steps, dtype=np.int64)
    ev_a = np.zeros(steps, dtype=np.int64)
    ev_v = np.zeros(steps)
    ua = u_act.tolist()
    un = u_next.tolist()
    ur = u_restart.tolist()
    s = int(s0)
    for t in range(steps):
        a = _sample(beh[s], ua[t])
        s2 = _sample(P[s][a], un[t])
        k = visits[s][a]
        alpha = _rate(rate_kind, ra, rb, rp, t + 1, k)
        visits[s][a] = k + 1
        best = 0.0
        found = False
        for b in range(m):
            if adm[s2][b] and (not found or Q[s2][b] > best):
                best = Q[s2][b]
                found = True
        target = R[s][a] + gamma * best
        Q[s][a] = (1.0 - alpha) * Q[s][a] + alpha * target
        ev_s[t] = s
        ev_a[t] = a
        ev_v[t] = Q[s][a]
        if absb[s] and nonabs:
            s = _restart(nonabs, ur[t])
        else:
            s = s2
    return np.array(Q), np.array(visits, dtype=np.int64), ev_s, ev_a, ev_v


def td0(P, R, policy, gamma, s0, steps, rate_kind, ra, rb, rp,
        u_act, u_next, u_restart, absorbing, V0):
    """Tabular TD(0) under ``policy``.  Returns ``(V, visits, ev_s, ev_v)``."""
    P = P.tolist()
    R = R.tolist()
    pol = policy.tolist()
    absb = absorbing.tolist()
    nonabs = [s for s in range(len(absb)) if not absb[s]]
    V = V0.tolist()
    visits = [0] * len(V)
    ev_s = np.zeros(steps, dtype=np.int64)
    ev_v = np.zeros(steps)
    ua = u_act.tolist()
    un = u_next.tolist()
    ur = u_restart.tolist()
    s = int(s0)
    for t in range(steps):
        a = _sample(pol[s], ua[t])
        s2 = _sample(P[s][a], un[t])
        k = visits[s]
        alpha = _rate(rate_kind, ra, rb, rp, t + 1, k)
        visits[s] = k + 1
        delta = R[s][a] + gamma * V[s2] - V[s]
        V[s] = V[s] + alpha * delta
        ev_s[t] = s
        ev_v[t] = V[s]
        if absb[s] and nonabs:
            s = _restart(nonabs, ur[t])
        else:
            s = s2
    return np.array(V), np.array(visits, dtype=np.int64), ev_s, ev_v


def td0_linear(P, R, policy, gamma, Phi, s0, steps, rate_kind, ra, rb, rp,
               u_act, u_next, u_restart, absorbing, theta0):
    """Linear TD(0) on features ``Phi[s]``.  Returns ``(theta, visits)``."""
    P = P.tolist()
    R = R.tolist()
    pol = policy.tolist()
    F = Phi.tolist()
    absb = absorbing.tolist()
    nonabs = [s for s in range(len(absb)) if not absb[s]]
    theta = theta0.tolist()
    d = len(theta)
    visits = [0] * len(F)
    ua = u_act.tolist()
    un = u_next.tolist()
    ur = u_restart.tolist()
    s = int(s0)
    for t in range(steps):
        a = _sample(pol[s], ua[t])
        s2 = _sample(P[s][a], un[t])
        k = visits[s]
        alpha = _rate(rate_kind, ra, rb, rp, t + 1, k)
        visits[s] = k + 1
        v_next = 0.0
        v_cur = 0.0
        for j in range(d):
            v_next += F[s2][j] * theta[j]
        for j in range(d):
            v_cur += F[s][j] * theta[j]
        delta = R[s][a] + gamma * v_next - v_cur
        for j in range(d):
            theta[j] = theta[j] + alpha * delta * F[s][j]
        if absb[s] and nonabs:
            s = _restart(nonabs, ur[t])
        else:
            s = s2
    return np.array(theta), np.array(visits, dtype=np.int64)
