"""Slot-level eMBB allocation.

Alternates a closed-form KKT power allocation with the phase-shift
relaxation until the sum rate stalls, pruning users when the rate floors
cannot all be met.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .channel import ChannelRealization, PhaseConfig, SystemConfig, rate_per_rb
from .phase_opt import SumRateObjective, gaussian_randomize, lift, solve_sumrate_sdp


class InfeasibleAllocation(Exception):
    """Raised when the per-user rate floors exceed the power budget."""


@dataclass
class EmbbPlan:
    """Admitted users with their per-RB powers, baseline per-RB rates and
    the slot-start RIS configuration."""

    admitted: list
    powers: np.ndarray
    rates: np.ndarray
    phi_e: PhaseConfig
    b: int


def min_power_for_rate(gain: float, config: SystemConfig) -> float:
    """Smallest per-RB power meeting the eMBB floor
    (1-delta)*b*rate >= r_th; infinite when the gain cannot carry it."""
    if config.r_th <= 0.0:
        return 0.0
    if config.delta >= 1.0 or gain <= 0.0:
        return math.inf
    r_floor = config.r_th / ((1.0 - config.delta) * config.b)
    try:
        return (2.0 ** (r_floor / config.W) - 1.0) * config.gamma_embb * config.sigma2 / gain
    except OverflowError:
        return math.inf


def allocate_power(gains, config: SystemConfig) -> np.ndarray:
    """Water-filling with per-user lower bounds (the KKT solution).

    p_e = max(p_min_e, mu - gamma*sigma2/gain_e) with the level mu set so
    the whole budget is spent.  Raises InfeasibleAllocation when the
    floors alone exceed the budget.
    """
    gains = np.asarray(gains, float)
    if gains.size == 0:
        raise InfeasibleAllocation("no users to allocate")
    budget = config.p_bs / config.b
    p_min = np.array([min_power_for_rate(g, config) for g in gains])
    if not np.all(np.isfinite(p_min)) or p_min.sum() > budget * (1.0 + 1e-12):
        raise InfeasibleAllocation("rate floors exceed the power budget")

    with np.errstate(divide="ignore"):
        inv = np.where(gains > 0.0, config.gamma_embb * config.sigma2 / gains, np.inf)
    thresh = p_min + inv                      # user e floats once mu > thresh_e
    order = np.argsort(thresh, kind="stable")
    n_finite = int(np.isfinite(thresh).sum())

    p = p_min.copy()
    pin_sum = p_min.sum()
    float_inv = 0.0
    for k in range(1, n_finite + 1):
        e = order[k - 1]
        pin_sum -= p_min[e]
        float_inv += inv[e]
        mu = (budget - pin_sum + float_inv) / k
        upper = thresh[order[k]] if k < gains.size else math.inf
        if thresh[e] <= mu <= upper:
            idx = order[:k]
            p = p_min.copy()
            p[idx] = np.maximum(p_min[idx], mu - inv[idx])
            break
    return p


def _sum_rate(gains, powers, config) -> float:
    snr = np.asarray(powers) * np.asarray(gains) / (config.gamma_embb * config.sigma2)
    return float(config.b * config.W * np.sum(np.log2(1.0 + snr)))


def _rates(gains, powers, config) -> np.ndarray:
    return np.array([rate_per_rb(g, p, config.W, config.gamma_embb, config.sigma2)
                     for g, p in zip(gains, powers)])


def _ao(channels: ChannelRealization, config: SystemConfig, admitted, rng):
    """One alternating-optimization run over a fixed admitted set.

    Raises InfeasibleAllocation if the floors fail at the all-zero phase
    initialization; mid-run infeasibility keeps the previous iterate.
    """
    lifted = [lift(channels.h_ris_e[e], channels.f_bs_ris, channels.h_bs_e[e])
              for e in admitted]
    A = np.stack([lc.q for lc in lifted], axis=1)

    def gains_at(phi: PhaseConfig) -> np.ndarray:
        vbar = np.concatenate([np.exp(-1j * phi.phases), [1.0 + 0.0j]])
        return np.abs(A.conj().T @ vbar) ** 2

    phi = PhaseConfig(np.zeros(config.N))
    gains = gains_at(phi)
    powers = allocate_power(gains, config)    # admission infeasibility surfaces here
    obj = _sum_rate(gains, powers, config)
    history = [obj]

    if config.N > 0:
        for _ in range(20):
            sol = solve_sumrate_sdp(lifted, powers, config, warm_phases=phi)
            if sol.status == "infeasible":
                break
            cand = gaussian_randomize(sol, SumRateObjective(lifted, powers, config),
                                      trials=1000, rng=rng)
            cand_gains = gains_at(cand)
            try:
                cand_powers = allocate_power(cand_gains, config)
            except InfeasibleAllocation:
                break                          # keep the previous iterate
            cand_obj = _sum_rate(cand_gains, cand_powers, config)
            if cand_obj < obj:
                break                          # never accept a decrease
            phi, gains, powers = cand, cand_gains, cand_powers
            improvement = cand_obj - obj
            obj = cand_obj
            history.append(obj)
            if improvement < 1e-4 * abs(obj):
                break

    plan = EmbbPlan(admitted=list(admitted), powers=powers,
                    rates=_rates(gains, powers, config), phi_e=phi, b=config.b)
    return plan, history


def alternating_optimize(channels: ChannelRealization, config: SystemConfig,
                         rng=None, return_history: bool = False):
    """Solve the slot-level eMBB problem with admission pruning.

    When the floors are infeasible for the current set, the same problem
    is re-solved with a zero floor and the user contributing least to the
    sum rate (smallest b*r_e, ties to the lowest index) is dropped.
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    admitted = list(range(config.E))
    while admitted:
        try:
            plan, history = _ao(channels, config, admitted, rng)
            return (plan, history) if return_history else plan
        except InfeasibleAllocation:
            relaxed = replace(config, r_th=0.0)
            plan0, _ = _ao(channels, relaxed, admitted, rng)
            drop = admitted[int(np.argmin(plan0.rates))]
            admitted.remove(drop)
    empty = EmbbPlan(admitted=[], powers=np.zeros(0), rates=np.zeros(0),
                     phi_e=PhaseConfig(np.zeros(config.N)), b=config.b)
    return (empty, []) if return_history else empty


def check_plan_invariants(plan: EmbbPlan, config: SystemConfig) -> list:
    """Budget and rate-floor violations, empty when the plan is clean."""
    errs = []
    spent = float(config.b * plan.powers.sum())
    if spent > config.p_bs * (1.0 + 1e-9):
        errs.append(f"power budget exceeded: {spent} > {config.p_bs}")
    if np.any(plan.powers < 0):
        errs.append("negative power")
    floor = config.r_th * (1.0 - 1e-9)
    for e, r in zip(plan.admitted, plan.rates):
        if (1.0 - config.delta) * plan.b * r < floor:
            errs.append(f"user {e} misses the rate floor")
    return errs
