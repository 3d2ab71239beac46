"""Exhaustive reference solver for tiny mini-slot instances.

Enumerates every packet RB-count vector and every donor puncture vector
directly from the model equations, so it shares no allocation logic with
the production solvers it cross-checks.  Capped at 4 packets, 4 eMBB
users and 5 RBs per user.
"""

import numpy as np

from .channel import PhaseConfig
from .urllc_alloc import UrllcDecision

ENUM_LIMITS = {"packets": 4, "users": 4, "rbs_per_user": 5}


def brute_force_allocate(state, batch, weights, gains, config, caps, *,
                         embb_powers, phi=None) -> UrllcDecision:
    """Exact lexicographic optimum: maximize admitted packets, then
    minimize the weighted punctured-RB count."""
    caps = np.asarray(caps, np.int64)
    beta = np.asarray(weights.beta, float)
    powers = np.asarray(embb_powers, float)
    L = len(batch)
    E = caps.shape[0]
    if L > ENUM_LIMITS["packets"] or E > ENUM_LIMITS["users"] or \
            (caps.size and caps.max() > ENUM_LIMITS["rbs_per_user"]) or \
            config.b > ENUM_LIMITS["rbs_per_user"]:
        raise ValueError("instance exceeds the enumeration bounds")
    phi_used = phi if phi is not None else PhaseConfig(np.zeros(0))

    def decision(k, I_L, I_E, p_L):
        assignment = np.zeros((E, L), np.int64)
        stock = I_E.copy()
        donor_order = np.lexsort((np.arange(E), beta))
        di = 0
        for l in range(L):
            need = int(I_L[l])
            while need > 0:
                e = donor_order[di]
                grab = min(int(stock[e]), need)
                assignment[e, l] += grab
                need -= grab
                stock[e] -= grab
                if stock[e] == 0:
                    di += 1
        return UrllcDecision(k=k, I_L=I_L, I_E=I_E, assignment=assignment,
                             p_L=p_L, embb_loss=float((beta * I_E).sum()),
                             phi_used=phi_used)

    empty = (np.zeros(L, np.int64), np.zeros(L, np.int64),
             np.zeros(E, np.int64), np.zeros(L, float))
    if L == 0 or E == 0:
        return decision(*empty)
    r_max = int(caps.sum())
    if r_max == 0:
        return decision(*empty)

    alphas = np.asarray(gains, float) / (config.sigma2 * config.gamma_urllc)
    c_th = batch.c_th

    # energy of serving packet l on i RBs straight from the rate equation
    i_axis = np.arange(r_max + 1, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        per_rb_power = (2.0 ** (c_th / (np.maximum(i_axis, 1e-300) * config.W)) - 1.0)
        energy = i_axis[None, :] * per_rb_power[None, :] / alphas[:, None]
    energy[:, 0] = 0.0                      # an unserved packet costs nothing

    # all packet count vectors
    grids = np.meshgrid(*[np.arange(r_max + 1)] * L, indexing="ij")
    I_all = np.stack([g.ravel() for g in grids], axis=1)        # (combos, L)
    totals = I_all.sum(axis=1)
    keep = totals <= r_max
    I_all, totals = I_all[keep], totals[keep]
    demand = energy[np.arange(L)[None, :], I_all].sum(axis=1)
    counts = (I_all > 0).sum(axis=1)

    # all donor vectors, grouped by their total
    dgrids = np.meshgrid(*[np.arange(int(c) + 1) for c in caps], indexing="ij")
    D_all = np.stack([g.ravel() for g in dgrids], axis=1)       # (dcombos, E)
    d_tot = D_all.sum(axis=1)
    d_supply = D_all @ powers
    d_cost = D_all @ beta
    max_supply = np.full(r_max + 1, -np.inf)
    np.maximum.at(max_supply, d_tot, d_supply)

    tol = 1e-9 * (1.0 + np.abs(d_supply).max())
    feasible = demand <= max_supply[totals] + tol
    if not np.any(feasible):
        return decision(*empty)
    best_count = int(counts[feasible].max())
    if best_count == 0:
        return decision(*empty)

    best = None
    for row in np.flatnonzero(feasible & (counts == best_count)):
        r = int(totals[row])
        mask = (d_tot == r) & (d_supply + tol >= demand[row])
        if not np.any(mask):
            continue
        cost = float(d_cost[mask].min())
        if best is None or cost < best[0] - 1e-15:
            didx = int(np.flatnonzero(mask)[np.argmin(d_cost[mask])])
            best = (cost, row, didx)
    cost, row, didx = best
    I_L = I_all[row].astype(np.int64)
    I_E = D_all[didx].astype(np.int64)
    k = (I_L > 0).astype(np.int64)
    p_L = np.zeros(L)
    served = I_L > 0
    p_L[served] = (2.0 ** (c_th / (I_L[served] * config.W)) - 1.0) / alphas[served]
    return decision(k, I_L, I_E, p_L)
