import numpy as np
import pytest

from rismux import SystemConfig
from rismux.urllc_alloc import MiniSlotState, StrategyWeights, UrllcBatch, UrllcPacket, puncture_caps


@pytest.fixture
def full_scale_config():
    """Production-scale default parameters."""
    return SystemConfig()


@pytest.fixture
def small_config():
    return SystemConfig(E=2, U=3, N=4, B=8, M=3)


def make_mini_slot_instance(rng, *, max_users=3, max_packets=3, max_b=4,
                            alpha_lo=30.0, alpha_hi=8000.0, r_th=0.0):
    """Random tiny mini-slot instance with a state consistent with its caps."""
    E = int(rng.integers(1, max_users + 1))
    L = int(rng.integers(0, max_packets + 1))
    b = int(rng.integers(1, max_b + 1))
    config = SystemConfig(E=E, U=max(L, 1), N=0, B=b * E, M=2, r_th=r_th)
    caps = rng.integers(0, b + 1, E)
    rates = rng.uniform(0.5e6, 3e6, E)
    r_prime = rates * (1.0 - caps / b) - rng.uniform(0.0, 0.2, E) * rates / b
    state = MiniSlotState(m=1, cum_rate=np.zeros(E), baseline_rate=rates,
                          r_prime=r_prime, punctured_so_far=np.zeros((0, E)))
    caps = puncture_caps(rates, r_prime, b)
    p_embb = rng.uniform(0.001, 0.05, E)
    beta = rng.uniform(0.0, 1.0, E)
    weights = StrategyWeights("PF", beta)
    gains = rng.uniform(alpha_lo, alpha_hi, L) * config.sigma2 * config.gamma_urllc
    batch = UrllcBatch([UrllcPacket(i, i % max(L, 1), config.packet_bits)
                        for i in range(L)], c_th=config.c_th)
    return config, state, batch, weights, gains, caps, p_embb
