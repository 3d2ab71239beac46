"""Hot numeric kernels for the mini-slot URLLC allocators.

Every kernel exists twice: the plain Python/numpy body (``*_py``) and a
numba-compiled variant.  The compiled path is used when numba imports
cleanly and the environment variable ``RISMUX_DISABLE_NUMBA`` is unset
(or "0"); otherwise the interpreter falls back to the same body, so both
paths are bit-identical by construction.  ``benchmarks/bench_kernels.py``
times them against each other.
"""

import math
import os

import numpy as np

_flag = os.environ.get("RISMUX_DISABLE_NUMBA", "").strip().lower()
_DISABLED = _flag not in ("", "0", "false")

try:
    if _DISABLED:
        raise ImportError("numba disabled by RISMUX_DISABLE_NUMBA")
    from numba import njit

    USING_NUMBA = True
except ImportError:
    USING_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def deco(func):
            return func

        return deco


def energy_table(alphas, max_rbs: int, c_th: float, w: float) -> np.ndarray:
    """Transmit energy (power * RB count) needed to carry one packet.

    Entry [l, i] is the minimum total power over i RBs that meets the
    packet rate c_th for normalized gain alphas[l]; column 0 is +inf
    (a packet cannot be served on zero RBs).
    """
    alphas = np.asarray(alphas, float)
    tab = np.full((alphas.shape[0], max_rbs + 1), np.inf)
    if max_rbs >= 1:
        i = np.arange(1, max_rbs + 1, dtype=float)
        with np.errstate(over="ignore", divide="ignore"):
            tab[:, 1:] = i[None, :] * (2.0 ** (c_th / (i[None, :] * w)) - 1.0) / alphas[:, None]
    return tab


def heuristic_fill_py(alpha, p, caps, c_th, w):
    """Greedy packet-by-packet fill over weight-ordered donors.

    alpha: (L,) normalized packet gains, already sorted best-first.
    p:     (E,) donor per-RB powers, already sorted cheapest-weight-first.
    caps:  (E,) puncturable RBs left per donor.
    Returns (assign (L, E) RB counts, admitted (L,) flags).
    """
    L = alpha.shape[0]
    E = p.shape[0]
    assign = np.zeros((L, E), np.int64)
    admitted = np.zeros(L, np.bool_)
    remaining = caps.copy()
    for l in range(L):
        c_tmp = 0.0
        done = False
        for e in range(E):
            cap_e = remaining[e]
            if cap_e <= 0:
                continue
            rate = w * math.log2(1.0 + alpha[l] * p[e])
            if rate <= 0.0:
                continue
            need = int(math.ceil((c_th - c_tmp) / rate))
            if need <= cap_e:
                assign[l, e] = need
                done = True
                break
            assign[l, e] = cap_e
            c_tmp += cap_e * rate
        if done:
            admitted[l] = True
            for e in range(E):
                remaining[e] -= assign[l, e]
        else:
            for e in range(E):
                assign[l, e] = 0
    return assign, admitted


def greedy_demand_py(etab, r_max):
    """Minimum total energy for serving all packets with exactly R RBs.

    etab is the per-packet energy table ((j, r_max+1), convex decreasing
    in the RB count), so marginal-saving greedy is exact.  Returns
    (demands (r_max+1,), trace (r_max+1,)); demands[R] is +inf for R < j,
    trace[t] names the packet that received the t-th RB.
    """
    j = etab.shape[0]
    demands = np.full(r_max + 1, np.inf)
    trace = np.full(r_max + 1, -1, np.int64)
    if j == 0 or j > r_max:
        if j == 0 and r_max >= 0:
            demands[0] = 0.0
        return demands, trace
    counts = np.ones(j, np.int64)
    total = 0.0
    for l in range(j):
        total += etab[l, 1]
    demands[j] = total
    for t in range(j + 1, r_max + 1):
        best_l = -1
        best_sav = -np.inf
        for l in range(j):
            if counts[l] + 1 <= r_max:
                sav = etab[l, counts[l]] - etab[l, counts[l] + 1]
                if sav > best_sav:
                    best_sav = sav
                    best_l = l
        if best_l < 0:
            break
        counts[best_l] += 1
        total -= best_sav
        demands[t] = total
        trace[t] = best_l
    return demands, trace


def replay_counts_py(trace, j, r):
    """RB counts per packet after the first r greedy placements."""
    counts = np.ones(j, np.int64)
    for t in range(j + 1, r + 1):
        counts[trace[t]] += 1
    return counts


if USING_NUMBA:
    heuristic_fill = njit(cache=True)(heuristic_fill_py)
    greedy_demand = njit(cache=True)(greedy_demand_py)
    replay_counts = njit(cache=True)(replay_counts_py)
else:
    heuristic_fill = heuristic_fill_py
    greedy_demand = greedy_demand_py
    replay_counts = replay_counts_py
