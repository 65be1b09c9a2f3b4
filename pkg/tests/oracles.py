"""Independent reference computations used by the tests.

None of these call into the code paths they check: the LP oracle enumerates
vertices, the thermal oracles integrate the ODE numerically or sum edge flows
node by node, and the trajectory oracle iterates the plant one step at a time.
"""

from itertools import combinations, product

import numpy as np


def lp_vertex_enumeration(c, G, h, lo, hi, tol=1e-9):
    """Minimum of c @ x over {G x <= h, lo <= x <= hi} by enumerating every basis.

    Returns (value, x). Assumes the optimum is attained at a vertex, i.e. the
    feasible set is pointed and the LP is bounded.
    """
    c, G, h = np.asarray(c, float), np.asarray(G, float), np.asarray(h, float)
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    n = c.size
    rows, rhs = [G], [h]
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        if np.isfinite(hi[i]):
            rows.append(e[None]), rhs.append([hi[i]])
        if np.isfinite(lo[i]):
            rows.append(-e[None]), rhs.append([-lo[i]])
    M = np.vstack(rows)
    b = np.concatenate([np.ravel(r) for r in rhs])
    subsets = np.array(list(combinations(range(M.shape[0]), n)))
    K = M[subsets]
    rhs_k = b[subsets]
    det = np.linalg.det(K)
    ok = np.abs(det) > 1e-10
    K, rhs_k = K[ok], rhs_k[ok]
    X = np.linalg.solve(K, rhs_k[..., None])[..., 0]
    feas = (X @ M.T <= b + tol * (1 + np.abs(b))).all(axis=1)
    X = X[feas]
    if X.shape[0] == 0:
        return np.inf, None
    vals = X @ c
    k = int(np.argmin(vals))
    return float(vals[k]), X[k]


def rk4_zoh(A_c, B_c, E_c, dt, step=1e-5):
    """ZOH matrices by integrating X' = A_c X, Y' = A_c Y + [B_c E_c] with classic RK4."""
    n = A_c.shape[0]
    F = np.hstack([np.zeros((n, n)), B_c, E_c])
    Z = np.hstack([np.eye(n), np.zeros((n, B_c.shape[1] + E_c.shape[1]))])
    steps = int(round(dt / step))
    h = dt / steps

    def f(Z):
        return A_c @ Z + F

    for _ in range(steps):
        k1 = f(Z)
        k2 = f(Z + 0.5 * h * k1)
        k3 = f(Z + 0.5 * h * k2)
        k4 = f(Z + h * k3)
        Z = Z + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    j = B_c.shape[1]
    return Z[:, :n], Z[:, n : n + j], Z[:, n + j :]


def node_derivative(network, T, T_amb, flow, heat):
    """dT/dt for every node by summing edge flows node by node (no matrices).

    ``flow`` per room (kg/s), ``heat`` per node (kW); the supply-air term is the
    full bilinear ``m c_p (T_s - T_r)``.
    """
    ids = network.node_ids
    temp = dict(zip(ids, T))
    temp[network.ambient_node] = T_amb
    q = dict(zip(ids, heat))
    for e in network.unique_edges():
        g = (temp[e.b] - temp[e.a]) / e.resistance
        if e.a in q:
            q[e.a] += g
        if e.b in q:
            q[e.b] -= g
    for k, room in enumerate(network.rooms):
        q[room.id] += flow[k] * network.specific_heat * (network.supply_temperature[k] - temp[room.id])
    return np.array([q[nid] / node.capacitance for nid, node in zip(ids, network.nodes)])


def euler_simulate(network, T0, T_amb, flow, heat, horizon, step=1e-4):
    T = np.array(T0, dtype=float)
    for _ in range(int(round(horizon / step))):
        T = T + step * node_derivative(network, T, T_amb, flow, heat)
    return T


def iterate_plant(A, B, E, x0, u_seq, d_seq, Br=None, r_seq=None):
    """States x_0..x_N by stepping x+ = A x + B u + E d (+ B_r r)."""
    xs = [np.asarray(x0, dtype=float)]
    for t in range(len(u_seq)):
        x = A @ xs[-1] + B @ u_seq[t] + E @ d_seq[t]
        if Br is not None:
            x = x + Br @ r_seq[t]
        xs.append(x)
    return np.array(xs)


def box_vertex_max(rows, sigma):
    """max over w in {-sigma, +sigma}^m of rows @ w, per row, by enumeration."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    sigma = np.asarray(sigma, dtype=float)
    best = np.full(rows.shape[0], -np.inf)
    for signs in product((-1.0, 1.0), repeat=sigma.size):
        best = np.maximum(best, rows @ (np.array(signs) * sigma))
    return best


def random_feasible_lp(rng, n, m_total, bound_fraction=0.3, degenerate=0.2):
    """Random bounded, feasible LP with ``n`` variables and ``m_total`` constraints.

    All constraints pass through or near a random point ``x0``; some of them
    are one-sided variable bounds (at most one per variable, so the ``m_total
    >= n`` constraint normals span R^n and the feasible set has a vertex). The
    cost is ``-M' y`` for a random ``y >= 0``, which makes the dual feasible and
    the LP bounded. Returns (c, G, h, lo, hi).
    """
    rows, rhs = [], []
    x0 = rng.normal(0, 2, n)
    lo, hi = np.full(n, -np.inf), np.full(n, np.inf)
    n_bounds = min(int(round(bound_fraction * m_total)), n)
    for i in rng.permutation(n)[:n_bounds]:
        gap = 0.0 if rng.random() < degenerate else rng.uniform(0.1, 2)
        if rng.random() < 0.5:
            lo[i] = x0[i] - gap
        else:
            hi[i] = x0[i] + gap
    for _ in range(m_total - n_bounds):
        a = rng.normal(size=n)
        gap = 0.0 if rng.random() < degenerate else rng.uniform(0.1, 2)
        rows.append(a)
        rhs.append(a @ x0 + gap)
    G = np.array(rows).reshape(-1, n)
    h = np.array(rhs)
    # dual weights on rows and on finite bounds
    y = rng.uniform(0, 1, G.shape[0]) * (rng.random(G.shape[0]) < 0.7)
    c = -G.T @ y
    c -= np.where(np.isfinite(hi), rng.uniform(0, 1, n), 0.0)
    c += np.where(np.isfinite(lo), rng.uniform(0, 1, n), 0.0)
    return c, G, h, lo, hi


def klee_minty(n):
    """max sum 2^(n-j) x_j  s.t.  sum_{j<i} 2^(i-j+1) x_j + x_i <= 5^i, x >= 0 (as a min problem)."""
    G = np.zeros((n, n))
    for i in range(n):
        for j in range(i):
            G[i, j] = 2.0 ** (i - j + 1)
        G[i, i] = 1.0
    h = 5.0 ** np.arange(1, n + 1)
    c = -(2.0 ** np.arange(n - 1, -1, -1))
    return c, G, h


def beale_cycling():
    """Beale's classic instance on which textbook Dantzig pivoting cycles; optimum -1.25."""
    c = np.array([-0.75, 20.0, -0.5, 6.0])
    G = np.array([[0.25, -8.0, -1.0, 9.0], [0.5, -12.0, -0.5, 3.0], [0.0, 0.0, 1.0, 0.0]])
    h = np.array([0.0, 0.0, 1.0])
    return c, G, h


def rmpc_grid_search(dss, x0, d_hat, sigma, lower, upper, u_max, energy, reserve, ppp, kappa, base, rho,
                     resolution=1e-3, chunk=256):
    """Brute-force optimum of the one-room, two-step robust program over a (u, r) grid.

    Every pair with ``0 <= r <= u <= u_max`` on the grid is tried for both
    steps. Room temperatures come from direct plant iteration, robust margins
    from box-vertex enumeration, and the slack and peak terms are set to their
    smallest feasible values for each candidate. Returns (value, (u0, r0, u1, r1)).
    """
    A, B, E = dss.A, dss.B[:, 0], dss.E
    dt = dss.dt
    room = A.shape[0] - 1
    g = np.arange(int(round(u_max / resolution)) + 1) * resolution
    U, R = np.meshgrid(g, g, indexing="ij")
    keep = R <= U
    U, R = U[keep], R[keep]
    free1 = A @ x0 + E @ d_hat[0]
    free2 = A @ free1 + E @ d_hat[1]
    b1, b2 = B[room], (A @ B)[room]
    nd = E.shape[1]
    rows = np.zeros((2, 2 * nd))
    rows[0, :nd] = E[room]
    rows[1, :nd], rows[1, nd:] = (A @ E)[room], E[room]
    off = box_vertex_max(rows, np.ravel(sigma))

    def slack(T, t):
        return np.maximum(np.maximum(T + off[t] - upper[t], lower[t] - T + off[t]), 0.0)

    # per-candidate terms of step 1, shape (1, pairs)
    P1 = kappa * U + base
    cost1 = (dt * energy[1] * P1 - dt * reserve[1] * kappa * R)[None, :]
    best, arg = np.inf, None
    for s in range(0, U.size, chunk):
        u0, r0 = U[s : s + chunk, None], R[s : s + chunk, None]
        nc1, c1 = free1[room] + b1 * u0, free1[room] + b1 * (u0 - r0)
        nc2 = free2[room] + b2 * u0 + b1 * U[None, :]
        c2 = free2[room] + b2 * (u0 - r0) + b1 * (U - R)[None, :]
        eps = np.maximum(slack(nc1, 0), slack(c1, 0)) + np.maximum(slack(nc2, 1), slack(c2, 1))
        beta = np.maximum(np.maximum(ppp[0] * (kappa * u0 + base), ppp[1] * P1[None, :]), 0.0)
        obj = dt * energy[0] * (kappa * u0 + base) - dt * reserve[0] * kappa * r0 + cost1 + rho * eps + beta
        k = np.unravel_index(np.argmin(obj), obj.shape)
        if obj[k] < best:
            best = float(obj[k])
            arg = tuple(round(float(v), 9) for v in (U[s + k[0]], R[s + k[0]], U[k[1]], R[k[1]]))
    return best, arg
