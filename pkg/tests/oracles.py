"""Slow reference implementations written straight from the definitions.

Nothing here imports the package's internals beyond plain data access, so
agreement with the fast code is meaningful.
"""

from __future__ import annotations

import math
from itertools import combinations


def inv(perm):
    out = [0] * len(perm)
    for i, pos in enumerate(perm):
        out[int(pos)] = i
    return out


def sorted_entry(M, row_perm, col_perm, a, b):
    """Entry at sorted position ``(a, b)``."""
    return M[inv(row_perm)[a]][inv(col_perm)[b]]


def naive_lph(M, true_rows, true_cols, est_rows, est_cols, p, h):
    n, d = len(M), len(M[0])
    ti, tj, ei, ej = inv(true_rows), inv(true_cols), inv(est_rows), inv(est_cols)
    count = 0
    for a in range(n):
        for b in range(d):
            x = M[ti[a]][tj[b]]
            y = M[ei[a]][ej[b]]
            if x <= p - h and y >= p + h:
                count += 1
            if x >= p + h and y <= p - h:
                count += 1
    return count


def naive_l01na(truth_cells, est_cells):
    count = 0
    for row_t, row_e in zip(truth_cells, est_cells):
        for t, e in zip(row_t, row_e):
            if t in (0, 1) and e != t:
                count += 1
    return count


def naive_kendall(pi1, pi2):
    n = len(pi1)
    return sum(1 for i in range(n) for j in range(n)
               if pi2[i] < pi2[j] and pi1[i] > pi1[j])


def naive_level(x, p, h):
    if x >= p + h:
        return 1
    if x <= p - h:
        return 0
    return -1


def q_star(M, E, p, h):
    """Columns where rows of ``E`` fall on both sides of the tolerance band."""
    d = len(M[0])
    return [j for j in range(d)
            if max(M[i][j] for i in E) >= p + h and min(M[i][j] for i in E) <= p - h]


# --------------------------------------------------------- ranking routine


def naive_envelope(s, part, act, Y, p, h, rho, lam):
    d = len(Y[0])
    lower = [t for t in range(s) if act[t]]
    upper = [t for t in range(s + 1, len(part)) if act[t]]
    keep = list(range(d))
    if lower:
        E = part[lower[-1]]
        thr = lam * (p + h) - rho * math.sqrt(lam / len(E))
        keep = [j for j in keep if sum(Y[i][j] for i in E) / len(E) >= thr]
    if upper:
        E = part[upper[0]]
        thr = lam * (p - h) + rho * math.sqrt(lam / len(E))
        keep = [j for j in keep if sum(Y[i][j] for i in E) / len(E) <= thr]
    return keep


def naive_update(G, E, Qp, Yb, rho, gamma, lam):
    if len(Qp) <= gamma:
        return
    tau = 2.0 * rho * math.sqrt(lam / len(Qp))
    mean = {i: sum(Yb[i][j] for j in Qp) / len(Qp) for i in E}
    new = [(i, k) for i in E for k in E if mean[i] - mean[k] > tau]
    for i, k in new:
        if not G[k][i]:
            G[i][k] = True


def naive_scan(Ya, Yb, E, Q, G, rho, gamma, lam):
    m = {j: sum(Ya[i][j] for i in E) / len(E) for j in Q}
    w = 2.0 * rho * math.sqrt(lam / len(E))
    cmax = math.ceil(math.sqrt(lam * len(E)) / (2.0 * rho) + 1)
    for j in Q:
        naive_update(G, E, [k for k in Q if abs(m[j] - m[k]) <= w], Yb, rho, gamma, lam)
        for c in range(2, cmax + 1):
            cw = 2.0 * c * rho * math.sqrt(lam / len(E))
            naive_update(G, E, [k for k in Q if w <= m[k] - m[j] <= cw], Yb, rho, gamma, lam)
            naive_update(G, E, [k for k in Q if w <= m[j] - m[k] <= cw], Yb, rho, gamma, lam)


def naive_trisect(E, G):
    half = len(E) / 2
    O = [i for i in E if sum(G[i][k] for k in E) > half]
    I = [i for i in E if sum(G[k][i] for k in E) > half]
    P = [i for i in E if i not in O and i not in I]
    return O, P, I


def naive_rank(Ys, pairs, rho, gamma, lam):
    """Loop-by-loop ranking routine; returns ``(final partition, rounds, G)``."""
    n = len(Ys[0])
    hmax = max(h for _, h in pairs)
    bound = lambda h: 4.0 * rho**2 / h**2  # noqa: E731
    G = [[False] * n for _ in range(n)]
    part, act = [list(range(n))], [lam * n > bound(hmax)]
    cap = (math.ceil(math.log2(n)) if n > 1 else 0) + 1
    k = 0
    while any(act) and k < cap and 3 * (k + 1) <= len(Ys):
        k += 1
        Y1, Y2, Y3 = Ys[3 * k - 3], Ys[3 * k - 2], Ys[3 * k - 1]
        new_part, new_act = [], []
        for t, E in enumerate(part):
            if not act[t]:
                new_part.append(E)
                new_act.append(False)
                continue
            used = False
            for p, h in pairs:
                Q = naive_envelope(t, part, act, Y1, p, h, rho, lam)
                if lam * len(Q) > bound(h):
                    used = True
                    naive_scan(Y2, Y3, E, Q, G, rho, gamma, lam)
            if not used:
                new_part.append(E)
                new_act.append(False)
                continue
            O, P, I = naive_trisect(E, G)
            for S, a in ((O, lam * len(O) > bound(hmax)), (P, False), (I, lam * len(I) > bound(hmax))):
                if S:
                    new_part.append(S)
                    new_act.append(a)
        part, act = new_part, new_act
    return part, k, G


def pairs_in_order(perm):
    """All pairs ``(i, j)`` with ``perm[i] < perm[j]``."""
    return [(i, j) if perm[i] < perm[j] else (j, i) for i, j in combinations(range(len(perm)), 2)]
