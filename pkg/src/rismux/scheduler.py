"""One-slot orchestration: proactive RIS configurations at slot start,
per-mini-slot candidate selection, and QoS state advancement."""

import time
from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization, PhaseConfig, SystemConfig, effective_gains, rate_per_rb
from .embb_alloc import EmbbPlan, alternating_optimize
from .phase_opt import MinGainObjective, gaussian_randomize, lift, solve_minmax_sdp
from .urllc_alloc import (MiniSlotState, UrllcBatch, UrllcDecision, heuristic_allocate,
                          optimization_allocate, puncture_caps, residual_threshold,
                          strategy_weights)

CONFIG_KEYS = ("phi_e", "phi_u", "phi_eu")

SCHEME_CANDIDATES = {
    "scheme1": ("phi_e",),
    "scheme2": ("phi_u",),
    "scheme3": ("phi_eu",),
    "selected": CONFIG_KEYS,
}


@dataclass
class SlotPlan:
    """Slot-start products: the eMBB plan plus the two URLLC-oriented RIS
    configurations, with every user's gain precomputed per configuration."""

    embb: EmbbPlan
    phi_u: PhaseConfig
    phi_eu: PhaseConfig
    per_phi_gains: dict      # key -> {"embb": (E_f,), "urllc": (U,)}
    embb_rates: dict         # key -> (E_f,) per-RB rates of admitted users

    def phases_of(self, key: str) -> PhaseConfig:
        return {"phi_e": self.embb.phi_e, "phi_u": self.phi_u, "phi_eu": self.phi_eu}[key]

    def key_of(self, phi: PhaseConfig) -> str:
        for key in CONFIG_KEYS:
            cand = self.phases_of(key)
            if cand is phi or np.array_equal(cand.phases, phi.phases):
                return key
        raise ValueError("phase configuration not part of this plan")


def begin_slot(channels: ChannelRealization, config: SystemConfig, rng=None) -> SlotPlan:
    """Solve the slot-start problems: eMBB sum rate (with admission),
    max-min URLLC gain, and max-min joint gain, then cache per-user gains
    under each resulting configuration."""
    if rng is None:
        rng = np.random.default_rng(config.seed)
    embb = alternating_optimize(channels, config, rng=rng)

    if config.N == 0:
        phi_u = phi_eu = embb.phi_e
    else:
        lifted_u = [lift(channels.g_ris_u[u], channels.f_bs_ris, channels.g_bs_u[u])
                    for u in range(config.U)]
        lifted_e = [lift(channels.h_ris_e[e], channels.f_bs_ris, channels.h_bs_e[e])
                    for e in embb.admitted]
        if lifted_u:
            sol_u = solve_minmax_sdp(lifted_u)
            phi_u = gaussian_randomize(sol_u, MinGainObjective(lifted_u),
                                       trials=1000, rng=rng)
        else:
            phi_u = embb.phi_e
        joint = lifted_e + lifted_u
        if joint:
            sol_eu = solve_minmax_sdp(joint)
            phi_eu = gaussian_randomize(sol_eu, MinGainObjective(joint),
                                        trials=1000, rng=rng)
        else:
            phi_eu = embb.phi_e

    per_phi_gains = {}
    embb_rates = {}
    plan = SlotPlan(embb=embb, phi_u=phi_u, phi_eu=phi_eu,
                    per_phi_gains=per_phi_gains, embb_rates=embb_rates)
    for key in CONFIG_KEYS:
        ge, gu = effective_gains(channels, plan.phases_of(key))
        ge = ge[embb.admitted] if embb.admitted else np.zeros(0)
        per_phi_gains[key] = {"embb": ge, "urllc": gu}
        if key == "phi_e":
            embb_rates[key] = embb.rates
        else:
            embb_rates[key] = np.array(
                [rate_per_rb(g, p, config.W, config.gamma_embb, config.sigma2)
                 for g, p in zip(ge, embb.powers)])
    return plan


def initial_state(plan: SlotPlan, config: SystemConfig) -> MiniSlotState:
    e_f = len(plan.embb.admitted)
    base = plan.embb.rates
    state = MiniSlotState(m=1, cum_rate=np.zeros(e_f), baseline_rate=base,
                          r_prime=np.zeros(e_f), punctured_so_far=np.zeros((0, e_f)))
    state.r_prime = residual_threshold(state, config)
    return state


def _zero_decision(plan: SlotPlan, n_packets: int, e_f: int) -> UrllcDecision:
    return UrllcDecision(
        k=np.zeros(n_packets, np.int64), I_L=np.zeros(n_packets, np.int64),
        I_E=np.zeros(e_f, np.int64), assignment=np.zeros((e_f, n_packets), np.int64),
        p_L=np.zeros(n_packets), embb_loss=0.0, phi_used=plan.embb.phi_e)


def allocate_mini_slot(plan: SlotPlan, state: MiniSlotState, batch: UrllcBatch,
                       strategy: str, config: SystemConfig, *,
                       scheme: str = "selected", allocator: str = "heuristic",
                       timings=None) -> UrllcDecision:
    """Run the mini-slot allocator under every candidate configuration and
    keep the one admitting the most packets (ties: smaller eMBB loss, then
    the slot-start configuration).

    A candidate whose eMBB rates fall below the residual floors even with
    zero puncturing cannot yield a valid decision and is skipped; the
    slot-start configuration always qualifies.
    """
    e_f = state.n_users
    if len(batch) == 0:
        return _zero_decision(plan, 0, e_f)
    if scheme not in SCHEME_CANDIDATES:
        raise ValueError(f"unknown scheme {scheme!r}")
    if allocator == "heuristic":
        allocate = heuristic_allocate
    elif allocator == "optimization":
        allocate = optimization_allocate
    else:
        raise ValueError(f"unknown allocator {allocator!r}")

    weights = strategy_weights(strategy, state)
    users = np.array([p.user for p in batch.packets], np.int64)
    best = None
    for key in SCHEME_CANDIDATES[scheme]:
        rates_c = plan.embb_rates[key]
        slack = rates_c - state.r_prime
        if e_f and np.min(slack) < -1e-9 * (1.0 + np.abs(state.r_prime).max()):
            continue
        gains_pkt = plan.per_phi_gains[key]["urllc"][users]
        t0 = time.perf_counter()
        decision = allocate(state, batch, weights, gains_pkt, config,
                            embb_powers=plan.embb.powers, embb_rates=rates_c,
                            phi=plan.phases_of(key))
        if timings is not None:
            timings.append(time.perf_counter() - t0)
        score = (int(decision.k.sum()), -decision.embb_loss)
        if best is None or score > best[0]:
            best = (score, decision)
    if best is None:
        return _zero_decision(plan, len(batch), e_f)
    return best[1]


def advance_state(state: MiniSlotState, decision: UrllcDecision, plan: SlotPlan,
                  config: SystemConfig) -> MiniSlotState:
    """Accrue the punctured mini-slot rates and recompute the residual
    floors for the next mini-slot."""
    if state.m > config.M:
        raise RuntimeError("slot already complete")
    key = plan.key_of(decision.phi_used)
    rates_used = plan.embb_rates[key]
    frac = decision.I_E / config.b if state.n_users else decision.I_E
    cum = state.cum_rate + (1.0 - frac) * rates_used
    punct = np.vstack([state.punctured_so_far, decision.I_E[None, :]]) \
        if state.n_users else state.punctured_so_far
    nxt = MiniSlotState(m=state.m + 1, cum_rate=cum,
                        baseline_rate=state.baseline_rate,
                        r_prime=np.zeros(state.n_users),
                        punctured_so_far=punct)
    nxt.r_prime = (config.M * config.r_th / config.b
                   - (cum + max(config.M - nxt.m, 0) * state.baseline_rate))
    return nxt


def candidate_caps(plan: SlotPlan, state: MiniSlotState, key: str,
                   config: SystemConfig) -> np.ndarray:
    """Puncture capacities under one candidate configuration."""
    return puncture_caps(plan.embb_rates[key], state.r_prime, config.b)
