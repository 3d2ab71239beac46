import numpy as np

from rismux import kernels


def random_fill_args(rng):
    L = int(rng.integers(0, 8))
    E = int(rng.integers(1, 6))
    alpha = np.sort(10 ** rng.uniform(1, 4, L))[::-1].copy()
    p = rng.uniform(1e-3, 5e-2, E)
    caps = rng.integers(0, 6, E)
    return alpha, p, caps, 1.79e6, 180e3


def test_heuristic_fill_matches_python_fallback():
    rng = np.random.default_rng(0)
    for _ in range(50):
        alpha, p, caps, c_th, w = random_fill_args(rng)
        a1, k1 = kernels.heuristic_fill(alpha, p, caps, c_th, w)
        a2, k2 = kernels.heuristic_fill_py(alpha, p, caps, c_th, w)
        assert np.array_equal(a1, a2)
        assert np.array_equal(k1, k2)


def test_greedy_demand_matches_python_fallback():
    rng = np.random.default_rng(1)
    for _ in range(50):
        j = int(rng.integers(1, 6))
        r_max = int(rng.integers(j, 20))
        etab = kernels.energy_table(10 ** rng.uniform(1, 4, j), r_max, 1.79e6, 180e3)
        d1, t1 = kernels.greedy_demand(etab, r_max)
        d2, t2 = kernels.greedy_demand_py(etab, r_max)
        assert np.array_equal(t1, t2)
        assert np.allclose(d1, d2, equal_nan=True)
        c1 = kernels.replay_counts(t1, j, r_max)
        c2 = kernels.replay_counts_py(t2, j, r_max)
        assert np.array_equal(c1, c2)


def test_energy_table_shape_and_convexity():
    tab = kernels.energy_table(np.array([100.0, 4000.0]), 10, 1.79e6, 180e3)
    assert np.all(np.isinf(tab[:, 0]))
    diffs = np.diff(tab[:, 1:], axis=1)
    assert np.all(diffs < 0)                      # more RBs always cost less energy
    savings = -diffs
    assert np.all(np.diff(savings, axis=1) <= 1e-12)   # with shrinking returns


def test_greedy_demand_monotone_in_rbs():
    etab = kernels.energy_table(np.array([200.0, 90.0, 3000.0]), 15, 1.79e6, 180e3)
    demands, _ = kernels.greedy_demand(etab, 15)
    finite = demands[np.isfinite(demands)]
    assert np.all(np.diff(finite) <= 1e-9)


def test_greedy_demand_empty():
    demands, _ = kernels.greedy_demand(np.zeros((0, 5)), 4)
    assert demands[0] == 0.0
    assert np.all(np.isinf(demands[1:]))
