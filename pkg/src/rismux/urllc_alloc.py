"""Per-mini-slot URLLC admission and resource-block puncturing.

All solvers here work for a fixed RIS configuration.  The optimization
path (admission then loss-minimizing allocation) follows the two-stage
decomposition: maximize the number of admitted packets first, then
minimize the weighted eMBB rate loss for the chosen set.  The heuristic
path fills packets greedily against weight-ordered donors.  Both return
decisions that satisfy the same machine-checkable invariants.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import PhaseConfig, SystemConfig
from .kernels import energy_table, greedy_demand, heuristic_fill, replay_counts


@dataclass
class UrllcPacket:
    id: int
    user: int
    bits: float


@dataclass
class UrllcBatch:
    """Packets arriving in one mini-slot; all share the required rate
    c_th = packet_bits / tau."""

    packets: list
    c_th: float

    def __post_init__(self):
        sizes = {p.bits for p in self.packets}
        if len(sizes) > 1:
            raise ValueError("all packets in a batch must have the same size")

    def __len__(self):
        return len(self.packets)


@dataclass
class MiniSlotState:
    """Rolling per-slot bookkeeping for the admitted eMBB users.

    cum_rate[e] is the sum of achieved mini-slot rates before mini-slot
    ``m``; baseline_rate[e] the un-punctured per-RB rate under the
    slot-start configuration; r_prime[e] the residual rate each user must
    still reach this mini-slot for the slot-average QoS to survive with
    no future arrivals.
    """

    m: int
    cum_rate: np.ndarray
    baseline_rate: np.ndarray
    r_prime: np.ndarray
    punctured_so_far: np.ndarray   # (m-1, E_f) RB counts

    def __post_init__(self):
        self.cum_rate = np.asarray(self.cum_rate, float)
        self.baseline_rate = np.asarray(self.baseline_rate, float)
        self.r_prime = np.asarray(self.r_prime, float)
        e_f = self.cum_rate.shape[0]
        hist = np.asarray(self.punctured_so_far, np.int64)
        self.punctured_so_far = hist.reshape(-1, e_f) if e_f else hist.reshape(0, 0)

    @property
    def n_users(self) -> int:
        return self.cum_rate.shape[0]


@dataclass
class StrategyWeights:
    strategy: str
    beta: np.ndarray


@dataclass
class UrllcDecision:
    """Outcome of one mini-slot allocation under one RIS configuration."""

    k: np.ndarray            # (L,) admission flags
    I_L: np.ndarray          # (L,) RBs per packet
    I_E: np.ndarray          # (E_f,) RBs punctured per eMBB user
    assignment: np.ndarray   # (E_f, L) per-pair RB counts
    p_L: np.ndarray          # (L,) per-RB power per packet [W]
    embb_loss: float         # weighted punctured-RB count (f2)
    phi_used: PhaseConfig


def residual_threshold(state: MiniSlotState, config: SystemConfig) -> np.ndarray:
    """Residual per-mini-slot rate floor:
    M*r_th/b - (past achieved + (M-m)*baseline).  Negative values mean
    the user's slot QoS is already safe."""
    m = state.m
    return (config.M * config.r_th / config.b
            - (state.cum_rate + (config.M - m) * state.baseline_rate))


def puncture_caps(rates: np.ndarray, r_prime: np.ndarray, b: int) -> np.ndarray:
    """Vectorized maximum puncturable RBs: min(floor(b*(1 - r'/r)), b),
    clamped below at zero.  A zero-rate user can only absorb punctures
    when its residual is already non-positive."""
    rates = np.asarray(rates, float)
    r_prime = np.asarray(r_prime, float)
    caps = np.full(rates.shape, 0, np.int64)
    pos = rates > 0.0
    with np.errstate(invalid="ignore"):
        raw = np.floor(b * (1.0 - r_prime[pos] / rates[pos]))
    caps[pos] = np.clip(raw, 0, b).astype(np.int64)
    caps[(~pos) & (r_prime <= 0.0)] = b
    return caps


def max_puncturable(state: MiniSlotState, e: int, config: SystemConfig) -> int:
    """RBs that can be punctured from user ``e`` this mini-slot without
    breaking its residual rate floor."""
    return int(puncture_caps(state.baseline_rate[e:e + 1],
                             state.r_prime[e:e + 1], config.b)[0])


def strategy_weights(strategy: str, state: MiniSlotState) -> StrategyWeights:
    """Puncturing weights from the maximum allowed rate loss
    R_hat = baseline - r'.  MeRL weights users proportionally to R_hat
    (protecting low-rate users); PF is its complement."""
    name = strategy.lower()
    if name not in ("merl", "pf"):
        raise ValueError(f"unknown strategy {strategy!r}")
    rhat = np.maximum(state.baseline_rate - state.r_prime, 0.0)
    total = float(rhat.sum())
    if total <= 0.0:
        merl = np.full(state.n_users, 1.0 / max(state.n_users, 1))
    else:
        merl = rhat / total
    beta = merl if name == "merl" else 1.0 - merl
    return StrategyWeights(strategy=strategy, beta=beta)


def power_for_rbs(i_l: int, c_th: float, alpha: float, config: SystemConfig) -> float:
    """Exact per-RB power so that i_l RBs carry c_th bits/s:
    p = (2**(c_th/(i_l*W)) - 1) / alpha."""
    if c_th <= 0.0:
        return 0.0
    if i_l < 1 or alpha <= 0.0:
        return math.inf
    return (2.0 ** (c_th / (i_l * config.W)) - 1.0) / alpha


def _alphas(gains, config: SystemConfig) -> np.ndarray:
    return np.asarray(gains, float) / (config.sigma2 * config.gamma_urllc)


def _packet_order(batch: UrllcBatch, gains) -> np.ndarray:
    ids = np.array([p.id for p in batch.packets], np.int64)
    return np.lexsort((ids, -np.asarray(gains, float)))


def _balance_tol(supply: float) -> float:
    return 1e-9 * (1.0 + abs(supply))


def _resolve_caps(state, config, embb_rates):
    rates = state.baseline_rate if embb_rates is None else np.asarray(embb_rates, float)
    return rates, puncture_caps(rates, state.r_prime, config.b)


def solve_admission(state, batch, weights, gains, config, *,
                    embb_powers, embb_rates=None):
    """Maximize the number of admitted packets (first stage).

    Serving R RBs in total can draw at most the energy of the R most
    powerful donor RBs, while the packet side needs a convex-separable
    minimum energy; both sides are monotone in R, so feasibility of a
    candidate set reduces to one comparison at the full puncture budget.
    Greedy marginal allocation is exact for the packet side, so the
    admitted count never exceeds the enumeration optimum.
    """
    L = len(batch)
    E_f = state.n_users
    k = np.zeros(L, np.int64)
    I_L = np.zeros(L, np.int64)
    I_E = np.zeros(E_f, np.int64)
    if L == 0 or E_f == 0:
        return k, I_L, I_E
    embb_powers = np.asarray(embb_powers, float)
    _, caps = _resolve_caps(state, config, embb_rates)
    r_max = int(caps.sum())
    if r_max == 0:
        return k, I_L, I_E
    supply_total = float((caps * embb_powers).sum())
    tol = _balance_tol(supply_total)

    alphas = _alphas(gains, config)
    order = _packet_order(batch, gains)
    a_sorted = alphas[order]
    etab = energy_table(a_sorted, r_max, batch.c_th, config.W)

    def feasible(j):
        if j == 0:
            return True
        demands, _ = greedy_demand(etab[:j], r_max)
        return demands[r_max] <= supply_total + tol

    lo, hi = 0, min(L, r_max)
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if feasible(mid):
            lo = mid
        else:
            hi = mid - 1
    j = lo
    if j == 0:
        return k, I_L, I_E

    demands, trace = greedy_demand(etab[:j], r_max)
    # provisional feasible counts: smallest R covered by the most
    # powerful donor RBs
    donor_order = np.lexsort((np.arange(E_f), -embb_powers))
    rb_powers = np.repeat(embb_powers[donor_order], caps[donor_order])
    csupply = np.concatenate([[0.0], np.cumsum(rb_powers)])
    r_star = r_max
    for r in range(j, r_max + 1):
        if np.isfinite(demands[r]) and demands[r] <= csupply[r] + tol:
            r_star = r
            break
    counts = replay_counts(trace, j, r_star)
    k[order[:j]] = 1
    I_L[order[:j]] = counts
    take = r_star
    for e in donor_order:
        grab = min(int(caps[e]), take)
        I_E[e] = grab
        take -= grab
        if take == 0:
            break
    return k, I_L, I_E


def _donor_min_cost(beta, powers, caps, r, demand, tol):
    """Cheapest donor RB multiset of size r supplying at least ``demand``.

    Scans the orderings induced by beta - lambda*p over all pairwise
    exchange rates lambda (plus the pure-cost and pure-power extremes)
    and greedily fills each; exact for the relaxation's vertex set.
    """
    E = beta.shape[0]
    if r > int(caps.sum()):
        return None
    idx = np.arange(E)
    scores = [beta.astype(float), -powers.astype(float)]
    for i in range(E):
        for jj in range(E):
            dp = powers[jj] - powers[i]
            if dp > 0:
                lam = (beta[jj] - beta[i]) / dp
                if lam > 0:
                    scores.append(beta - lam * powers)
    best = None
    for score in scores:
        order = np.lexsort((idx, score))
        fill = np.zeros(E, np.int64)
        left = r
        for e in order:
            grab = min(int(caps[e]), left)
            fill[e] = grab
            left -= grab
            if left == 0:
                break
        if left > 0:
            continue
        energy = float((fill * powers).sum())
        if energy + tol >= demand:
            cost = float((fill * beta).sum())
            if best is None or cost < best[0] - 1e-15:
                best = (cost, fill)
    return best


def solve_allocation(state, admitted, weights, gains, config, *,
                     embb_powers, embb_rates=None):
    """Minimize the weighted eMBB rate loss for an admitted set (second
    stage).  Scans the total punctured-RB count, pricing each donor RB at
    its user's weight, then distributes packets over donors in ascending
    weight order."""
    admitted = np.asarray(admitted, np.int64)
    E_f = state.n_users
    L = len(gains)
    I_L = np.zeros(L, np.int64)
    I_E = np.zeros(E_f, np.int64)
    assignment = np.zeros((E_f, L), np.int64)
    p_L = np.zeros(L, float)
    if admitted.size == 0:
        return I_E, I_L, assignment, p_L
    embb_powers = np.asarray(embb_powers, float)
    _, caps = _resolve_caps(state, config, embb_rates)
    r_max = int(caps.sum())
    supply_total = float((caps * embb_powers).sum())
    tol = _balance_tol(supply_total)

    alphas = _alphas(gains, config)
    sub_gains = np.asarray(gains, float)[admitted]
    sub_ids = np.array([admitted[i] for i in range(admitted.size)], np.int64)
    order = np.lexsort((sub_ids, -sub_gains))
    sorted_pos = admitted[order]
    a_sorted = alphas[sorted_pos]
    j = admitted.size
    etab = energy_table(a_sorted, r_max, config.c_th, config.W)
    demands, trace = greedy_demand(etab, r_max)

    beta = np.asarray(weights.beta, float)
    best = None
    for r in range(j, r_max + 1):
        if not np.isfinite(demands[r]):
            continue
        got = _donor_min_cost(beta, embb_powers, caps, r, demands[r], tol)
        if got is None:
            continue
        cost, fill = got
        if best is None or (cost, r) < (best[0], best[1]):
            best = (cost, r, fill)
    if best is None:
        raise RuntimeError("allocation infeasible for an admitted set the "
                           "admission stage certified")
    _, r_star, fill = best
    counts = replay_counts(trace, j, r_star)
    I_L[sorted_pos] = counts
    I_E[:] = fill

    # sequential fill: donors cheapest-weight first against best-gain packets
    donor_order = np.lexsort((np.arange(E_f), beta))
    donor_stock = [(e, int(I_E[e])) for e in donor_order if I_E[e] > 0]
    di = 0
    for pos in sorted_pos:
        need = int(I_L[pos])
        while need > 0:
            e, stock = donor_stock[di]
            grab = min(stock, need)
            assignment[e, pos] += grab
            need -= grab
            stock -= grab
            if stock == 0:
                di += 1
            else:
                donor_stock[di] = (e, stock)
    for pos in sorted_pos:
        p_L[pos] = power_for_rbs(int(I_L[pos]), config.c_th, float(alphas[pos]), config)
    return I_E, I_L, assignment, p_L


def optimization_allocate(state, batch, weights, gains, config, *,
                          embb_powers, embb_rates=None, phi=None) -> UrllcDecision:
    """Two-stage optimization path: admission, then loss-minimizing
    allocation, then exact per-packet powers."""
    k, _, _ = solve_admission(state, batch, weights, gains, config,
                              embb_powers=embb_powers, embb_rates=embb_rates)
    admitted = np.flatnonzero(k)
    I_E, I_L, assignment, p_L = solve_allocation(
        state, admitted, weights, gains, config,
        embb_powers=embb_powers, embb_rates=embb_rates)
    loss = float((np.asarray(weights.beta, float) * I_E).sum())
    return UrllcDecision(k=k, I_L=I_L, I_E=I_E, assignment=assignment,
                         p_L=p_L, embb_loss=loss,
                         phi_used=phi if phi is not None else PhaseConfig(np.zeros(0)))


def heuristic_allocate(state, batch, weights, gains, config, *,
                       embb_powers, embb_rates=None, phi=None) -> UrllcDecision:
    """Greedy fill: packets best-gain first, donors cheapest-weight
    first, donor-power averaging for each admitted packet."""
    L = len(batch)
    E_f = state.n_users
    k = np.zeros(L, np.int64)
    I_L = np.zeros(L, np.int64)
    I_E = np.zeros(E_f, np.int64)
    assignment = np.zeros((E_f, L), np.int64)
    p_L = np.zeros(L, float)
    beta = np.asarray(weights.beta, float)
    phi_used = phi if phi is not None else PhaseConfig(np.zeros(0))
    if L == 0 or E_f == 0:
        return UrllcDecision(k=k, I_L=I_L, I_E=I_E, assignment=assignment,
                             p_L=p_L, embb_loss=0.0, phi_used=phi_used)
    embb_powers = np.asarray(embb_powers, float)
    _, caps = _resolve_caps(state, config, embb_rates)

    alphas = _alphas(gains, config)
    order_l = _packet_order(batch, gains)
    order_e = np.lexsort((np.arange(E_f), beta))
    assign_s, admitted_s = heuristic_fill(
        np.ascontiguousarray(alphas[order_l]),
        np.ascontiguousarray(embb_powers[order_e]),
        np.ascontiguousarray(caps[order_e].astype(np.int64)),
        float(batch.c_th), float(config.W))

    assignment[np.ix_(order_e, order_l)] = assign_s.T
    k[order_l] = admitted_s.astype(np.int64)
    I_L[:] = assignment.sum(axis=0)
    I_E[:] = assignment.sum(axis=1)
    served = I_L > 0
    with np.errstate(invalid="ignore"):
        p_L[served] = (embb_powers @ assignment)[served] / I_L[served]
    loss = float((beta * I_E).sum())
    return UrllcDecision(k=k, I_L=I_L, I_E=I_E, assignment=assignment,
                         p_L=p_L, embb_loss=loss, phi_used=phi_used)


def check_decision_invariants(decision: UrllcDecision, caps, embb_powers,
                              gains, c_th, config) -> list:
    """Return human-readable violations of the decision contract
    (empty list when clean)."""
    errs = []
    I_L, I_E, asg = decision.I_L, decision.I_E, decision.assignment
    if not np.array_equal(asg.sum(axis=1), I_E):
        errs.append("assignment row sums disagree with punctured counts")
    if not np.array_equal(asg.sum(axis=0), I_L):
        errs.append("assignment column sums disagree with packet counts")
    if np.any(I_E > np.asarray(caps, np.int64)):
        errs.append("punctured counts exceed per-user caps")
    if np.any((decision.k == 1) != (I_L > 0)):
        errs.append("admission flags inconsistent with packet RB counts")
    supply = float((np.asarray(I_E, float) * np.asarray(embb_powers, float)).sum())
    spend = float((np.asarray(I_L, float) * decision.p_L).sum())
    if spend > supply + _balance_tol(supply):
        errs.append(f"power balance violated: spend {spend} > supply {supply}")
    alphas = _alphas(gains, config)
    for l in np.flatnonzero(decision.k):
        rate = I_L[l] * config.W * math.log2(1.0 + alphas[l] * decision.p_L[l])
        if rate < c_th * (1.0 - 1e-9):
            errs.append(f"packet {l} rate {rate} below threshold {c_th}")
    return errs
