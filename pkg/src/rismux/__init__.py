"""RIS-aided eMBB/URLLC downlink multiplexing simulator."""

from .channel import (ChannelRealization, PhaseConfig, SystemConfig,
                      effective_gain, effective_gains, rate_per_rb,
                      sample_channels, snr_gap)
from .embb_alloc import (EmbbPlan, InfeasibleAllocation, allocate_power,
                         alternating_optimize, check_plan_invariants,
                         min_power_for_rate)
from .exhaustive import brute_force_allocate
from .phase_opt import (LiftedChannel, MinGainObjective, SdpSolution,
                        SumRateObjective, gaussian_randomize, lift,
                        solve_minmax_sdp, solve_sumrate_sdp)
from .scheduler import (SlotPlan, advance_state, allocate_mini_slot, begin_slot,
                        initial_state)
from .sim import (Metrics, Scenario, ScenarioError, parse_scenario, run_sweep,
                  run_trial, sample_arrivals, validate_scenario, write_csv)
from .urllc_alloc import (MiniSlotState, StrategyWeights, UrllcBatch,
                          UrllcDecision, UrllcPacket, check_decision_invariants,
                          heuristic_allocate, max_puncturable,
                          optimization_allocate, power_for_rbs, puncture_caps,
                          residual_threshold, solve_admission, solve_allocation,
                          strategy_weights)

__version__ = "0.1.0"
