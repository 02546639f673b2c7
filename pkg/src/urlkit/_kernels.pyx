# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops; see ``_kernels_py.py`` for the reference semantics."""
import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, pow

cnp.import_array()

cdef int RATE_CONSTANT = 0
cdef int RATE_HARMONIC = 1
cdef int RATE_PER_VISIT = 2


cdef inline double _rate(int kind, double a, double b, double p, long t, long k) nogil:
    if kind == RATE_CONSTANT:
        return a
    if kind == RATE_HARMONIC:
        return a / (b + pow(<double>t, p))
    return a / (b + pow(<double>k, p))


cdef inline Py_ssize_t _sample(const double[:] row, double u) nogil:
    cdef Py_ssize_t j, last = 0
    cdef double c = 0.0
    for j in range(row.shape[0]):
        if row[j] > 0.0:
            last = j
    for j in range(row.shape[0]):
        c += row[j]
        if u < c:
            return j
    return last


cdef double _component_stale(const double[:, :, :] P, const double[:, :] R, const unsigned char[:, :] adm,
                             double gamma, Py_ssize_t i, double[:, :] ring, long t,
                             const unsigned char[:] di, Py_ssize_t depth) nogil:
    cdef Py_ssize_t a, j
    cdef long tau
    cdef double acc, q, best = 0.0
    cdef bint found = False
    for a in range(P.shape[1]):
        if not adm[i, a]:
            continue
        acc = 0.0
        for j in range(P.shape[2]):
            if P[i, a, j] != 0.0:
                tau = t - di[j]
                if tau < 0:
                    tau = 0
                acc += P[i, a, j] * ring[tau % depth, j]
        q = R[i, a] + gamma * acc
        if not found or q > best:
            best = q
            found = True
    return best


cdef double _component_fresh(const double[:, :, :] P, const double[:, :] R, const unsigned char[:, :] adm,
                             double gamma, Py_ssize_t i, double[:] x) nogil:
    cdef Py_ssize_t a, j
    cdef double acc, q, best = 0.0
    cdef bint found = False
    for a in range(P.shape[1]):
        if not adm[i, a]:
            continue
        acc = 0.0
        for j in range(P.shape[2]):
            if P[i, a, j] != 0.0:
                acc += P[i, a, j] * x[j]
        q = R[i, a] + gamma * acc
        if not found or q > best:
            best = q
            found = True
    return best


cdef double _residual(const double[:, :, :] P, const double[:, :] R, const unsigned char[:, :] adm,
                      double gamma, double[:] x) nogil:
    cdef Py_ssize_t i
    cdef double d, worst = 0.0
    for i in range(x.shape[0]):
        d = fabs(_component_fresh(P, R, adm, gamma, i, x) - x[i])
        if d > worst:
            worst = d
    return worst


def async_bellman(P, R, adm, double gamma, x0, updates, delays, double tol, bint record_states):
    cdef const double[:, :, :] Pv = np.ascontiguousarray(P, dtype=np.float64)
    cdef const double[:, :] Rv = np.ascontiguousarray(R, dtype=np.float64)
    cdef const unsigned char[:, :] Av = np.ascontiguousarray(adm, dtype=np.uint8)
    cdef const unsigned char[:, :] Uv = np.ascontiguousarray(updates, dtype=np.uint8)
    cdef const unsigned char[:, :, :] Dv = np.ascontiguousarray(delays, dtype=np.uint8)
    cdef Py_ssize_t horizon = Uv.shape[0], n = Uv.shape[1]
    cdef Py_ssize_t depth = int(np.asarray(delays).max(initial=0)) + 1
    ring_arr = np.zeros((depth, n))
    cdef double[:, :] ring = ring_arr
    x_arr = np.array(x0, dtype=np.float64)
    new_arr = x_arr.copy()
    cdef double[:] x = x_arr
    cdef double[:] new = new_arr
    cdef Py_ssize_t n_events = int(np.asarray(updates, dtype=np.int64).sum())
    ev_t_arr = np.zeros(n_events, dtype=np.int64)
    ev_i_arr = np.zeros(n_events, dtype=np.int64)
    ev_v_arr = np.zeros(n_events)
    ev_r_arr = np.zeros(n_events)
    res_arr = np.zeros(horizon + 1)
    states_arr = np.zeros((horizon + 1 if record_states else 1, n))
    cdef long long[:] ev_t = ev_t_arr
    cdef long long[:] ev_i = ev_i_arr
    cdef double[:] ev_v = ev_v_arr
    cdef double[:] ev_r = ev_r_arr
    cdef double[:] res = res_arr
    cdef double[:, :] states = states_arr
    cdef Py_ssize_t i, j, k = 0, first
    cdef long t, steps = 0
    cdef double r
    cdef bint converged = False
    for j in range(n):
        ring[0, j] = x[j]
        states[0, j] = x[j]
    r = _residual(Pv, Rv, Av, gamma, x)
    res[0] = r
    if r <= tol:
        return x_arr, 0, states_arr[:1], ev_t_arr[:0], ev_i_arr[:0], ev_v_arr[:0], ev_r_arr[:0], res_arr[:1], True
    with nogil:
        for t in range(horizon):
            for i in range(n):
                new[i] = x[i]
            for i in range(n):
                if Uv[t, i]:
                    new[i] = _component_stale(Pv, Rv, Av, gamma, i, ring, t, Dv[t, i], depth)
            for i in range(n):
                x[i] = new[i]
                ring[(t + 1) % depth, i] = new[i]
            r = _residual(Pv, Rv, Av, gamma, x)
            steps = t + 1
            res[steps] = r
            if record_states:
                for i in range(n):
                    states[steps, i] = x[i]
            for i in range(n):
                if Uv[t, i]:
                    ev_t[k] = t
                    ev_i[k] = i
                    ev_v[k] = x[i]
                    ev_r[k] = r
                    k += 1
            if r <= tol:
                converged = True
                break
    if record_states:
        states_arr = states_arr[:steps + 1]
    return (x_arr, steps, states_arr, ev_t_arr[:k], ev_i_arr[:k], ev_v_arr[:k], ev_r_arr[:k],
            res_arr[:steps + 1], converged)


cdef inline Py_ssize_t _restart(const long long[:] nonabs, double u) nogil:
    return nonabs[<Py_ssize_t>(u * nonabs.shape[0])]


def q_learning(P, R, adm, double gamma, behavior, long s0, long steps, int rate_kind,
               double ra, double rb, double rp, u_act, u_next, u_restart, absorbing, Q0):
    cdef const double[:, :, :] Pv = np.ascontiguousarray(P, dtype=np.float64)
    cdef const double[:, :] Rv = np.ascontiguousarray(R, dtype=np.float64)
    cdef const unsigned char[:, :] Av = np.ascontiguousarray(adm, dtype=np.uint8)
    cdef const double[:, :] Bv = np.ascontiguousarray(behavior, dtype=np.float64)
    cdef const double[:] ua = np.ascontiguousarray(u_act, dtype=np.float64)
    cdef const double[:] un = np.ascontiguousarray(u_next, dtype=np.float64)
    cdef const double[:] ur = np.ascontiguousarray(u_restart, dtype=np.float64)
    absb_arr = np.ascontiguousarray(absorbing, dtype=np.uint8)
    cdef const unsigned char[:] absb = absb_arr
    cdef const long long[:] nonabs = np.flatnonzero(absb_arr == 0).astype(np.int64)
    Q_arr = np.array(Q0, dtype=np.float64)
    cdef double[:, :] Q = Q_arr
    cdef Py_ssize_t m = Q.shape[1]
    visits_arr = np.zeros(Q_arr.shape, dtype=np.int64)
    cdef long long[:, :] visits = visits_arr
    ev_s_arr = np.zeros(steps, dtype=np.int64)
    ev_a_arr = np.zeros(steps, dtype=np.int64)
    ev_v_arr = np.zeros(steps)
    cdef long long[:] ev_s = ev_s_arr
    cdef long long[:] ev_a = ev_a_arr
    cdef double[:] ev_v = ev_v_arr
    cdef Py_ssize_t s = s0, a, s2, b
    cdef long t
    cdef long long k
    cdef double alpha, best, target
    cdef bint found
    with nogil:
        for t in range(steps):
            a = _sample(Bv[s], ua[t])
            s2 = _sample(Pv[s, a], un[t])
            k = visits[s, a]
            alpha = _rate(rate_kind, ra, rb, rp, t + 1, k)
            visits[s, a] = k + 1
            best = 0.0
            found = False
            for b in range(m):
                if Av[s2, b] and (not found or Q[s2, b] > best):
                    best = Q[s2, b]
                    found = True
            target = Rv[s, a] + gamma * best
            Q[s, a] = (1.0 - alpha) * Q[s, a] + alpha * target
            ev_s[t] = s
            ev_a[t] = a
            ev_v[t] = Q[s, a]
            if absb[s] and nonabs.shape[0] > 0:
                s = _restart(nonabs, ur[t])
            else:
                s = s2
    return Q_arr, visits_arr, ev_s_arr, ev_a_arr, ev_v_arr


def td0(P, R, policy, double gamma, long s0, long steps, int rate_kind, double ra, double rb, double rp,
        u_act, u_next, u_restart, absorbing, V0):
    cdef const double[:, :, :] Pv = np.ascontiguousarray(P, dtype=np.float64)
    cdef const double[:, :] Rv = np.ascontiguousarray(R, dtype=np.float64)
    cdef const double[:, :] pol = np.ascontiguousarray(policy, dtype=np.float64)
    cdef const double[:] ua = np.ascontiguousarray(u_act, dtype=np.float64)
    cdef const double[:] un = np.ascontiguousarray(u_next, dtype=np.float64)
    cdef const double[:] ur = np.ascontiguousarray(u_restart, dtype=np.float64)
    absb_arr = np.ascontiguousarray(absorbing, dtype=np.uint8)
    cdef const unsigned char[:] absb = absb_arr
    cdef const long long[:] nonabs = np.flatnonzero(absb_arr == 0).astype(np.int64)
    V_arr = np.array(V0, dtype=np.float64)
    cdef double[:] V = V_arr
    visits_arr = np.zeros(V_arr.shape[0], dtype=np.int64)
    cdef long long[:] visits = visits_arr
    ev_s_arr = np.zeros(steps, dtype=np.int64)
    ev_v_arr = np.zeros(steps)
    cdef long long[:] ev_s = ev_s_arr
    cdef double[:] ev_v = ev_v_arr
    cdef Py_ssize_t s = s0, a, s2
    cdef long t
    cdef long long k
    cdef double alpha, delta
    with nogil:
        for t in range(steps):
            a = _sample(pol[s], ua[t])
            s2 = _sample(Pv[s, a], un[t])
            k = visits[s]
            alpha = _rate(rate_kind, ra, rb, rp, t + 1, k)
            visits[s] = k + 1
            delta = Rv[s, a] + gamma * V[s2] - V[s]
            V[s] = V[s] + alpha * delta
            ev_s[t] = s
            ev_v[t] = V[s]
            if absb[s] and nonabs.shape[0] > 0:
                s = _restart(nonabs, ur[t])
            else:
                s = s2
    return V_arr, visits_arr, ev_s_arr, ev_v_arr


def td0_linear(P, R, policy, double gamma, Phi, long s0, long steps, int rate_kind,
               double ra, double rb, double rp, u_act, u_next, u_restart, absorbing, theta0):
    cdef const double[:, :, :] Pv = np.ascontiguousarray(P, dtype=np.float64)
    cdef const double[:, :] Rv = np.ascontiguousarray(R, dtype=np.float64)
    cdef const double[:, :] pol = np.ascontiguousarray(policy, dtype=np.float64)
    cdef const double[:, :] F = np.ascontiguousarray(Phi, dtype=np.float64)
    cdef const double[:] ua = np.ascontiguousarray(u_act, dtype=np.float64)
    cdef const double[:] un = np.ascontiguousarray(u_next, dtype=np.float64)
    cdef const double[:] ur = np.ascontiguousarray(u_restart, dtype=np.float64)
    absb_arr = np.ascontiguousarray(absorbing, dtype=np.uint8)
    cdef const unsigned char[:] absb = absb_arr
    cdef const long long[:] nonabs = np.flatnonzero(absb_arr == 0).astype(np.int64)
    theta_arr = np.array(theta0, dtype=np.float64)
    cdef double[:] theta = theta_arr
    cdef Py_ssize_t d = theta.shape[0]
    visits_arr = np.zeros(F.shape[0], dtype=np.int64)
    cdef long long[:] visits = visits_arr
    cdef Py_ssize_t s = s0, a, s2, j
    cdef long t
    cdef long long k
    cdef double alpha, delta, v_next, v_cur
    with nogil:
        for t in range(steps):
            a = _sample(pol[s], ua[t])
            s2 = _sample(Pv[s, a], un[t])
            k = visits[s]
            alpha = _rate(rate_kind, ra, rb, rp, t + 1, k)
            visits[s] = k + 1
            v_next = 0.0
            v_cur = 0.0
            for j in range(d):
                v_next += F[s2, j] * theta[j]
            for j in range(d):
                v_cur += F[s, j] * theta[j]
            delta = Rv[s, a] + gamma * v_next - v_cur
            for j in range(d):
                theta[j] = theta[j] + alpha * delta * F[s, j]
            if absb[s] and nonabs.shape[0] > 0:
                s = _restart(nonabs, ur[t])
            else:
                s = s2
    return theta_arr, visits_arr
