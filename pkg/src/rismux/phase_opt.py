"""RIS phase-shift design via semidefinite relaxation.

Three problems share one engine: the sum-rate design for the eMBB slot
plan, and two max-min channel-gain designs (URLLC-only and joint
eMBB+URLLC).  Each lifts the unit-modulus phase vector to a PSD matrix S
with unit diagonal; we maximize over the factorization S = V V^H with
row-normalized V (rows on complex spheres), which keeps S exactly
feasible at every iterate and scales to the matrix sizes that matter
here (N+1 <= 81).  Feasible phase vectors are recovered afterwards by
Gaussian randomization.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import PhaseConfig, TWO_PI

_LN2 = math.log(2.0)


@dataclass
class LiftedChannel:
    """Lifted quadratic form of one user's effective channel.

    ``Q`` is the (N+1)x(N+1) Hermitian coupling matrix, ``direct_power``
    the squared magnitude of the direct link.  ``q`` stacks the cascade
    vector and the direct coefficient; for any unit-modulus lifted vector
    v the effective gain is |v^H q|^2.
    """

    Q: np.ndarray
    direct_power: float
    q: np.ndarray

    @property
    def n(self) -> int:
        return self.q.shape[0]


@dataclass
class SdpSolution:
    """Relaxation solution: PSD matrix with unit diagonal plus its value."""

    S: np.ndarray
    objective: float
    status: str                 # optimal | infeasible | max-iter
    factor: np.ndarray | None = field(default=None, repr=False)


def lift(h_ris, f, h_bs: complex) -> LiftedChannel:
    """Build the lifted coupling matrix for one user.

    The cascade vector is conj(h_ris) * f; the bottom-right entry of Q is
    zero and its top-left block is the rank-one cascade outer product.
    """
    h_ris = np.asarray(h_ris, dtype=np.complex128)
    f = np.asarray(f, dtype=np.complex128)
    if h_ris.shape != f.shape:
        raise ValueError("h_ris and f must have equal length")
    theta = np.conj(h_ris) * f
    q = np.concatenate([theta, [complex(h_bs)]])
    n = q.shape[0]
    Q = np.outer(q, np.conj(q))
    Q[n - 1, n - 1] = 0.0
    return LiftedChannel(Q=Q, direct_power=float(abs(h_bs)) ** 2, q=q)


def phases_from_lifted(vbar: np.ndarray) -> PhaseConfig:
    """Extract physical phases from a unit-modulus lifted vector.

    De-rotates by the auxiliary last entry, then takes the argument of
    the conjugated vector so that the effective gain of the returned
    phases equals |vbar^H q|^2 for every lifted channel.
    """
    v = vbar * np.conj(vbar[-1])
    ph = np.mod(-np.angle(v[:-1]), TWO_PI)
    ph[ph >= TWO_PI] -= TWO_PI
    return PhaseConfig(ph)


def _lifted_from_phases(phases: np.ndarray) -> np.ndarray:
    """Inverse of the extraction map: unit-modulus lifted vector."""
    return np.concatenate([np.exp(-1j * np.asarray(phases, float)), [1.0 + 0.0j]])


class SumRateObjective:
    """Sum of per-user log2(1 + SNR) under a phase configuration.

    SNR_e = a_e * |q_e^H v|^2 with a_e = p_e / (gamma * sigma2); the same
    quantity the relaxation maximizes, so randomized candidates compare
    directly against the SDP bound.
    """

    def __init__(self, lifted, powers, config):
        self.A = np.stack([lc.q for lc in lifted], axis=1)
        self.a = np.asarray(powers, float) / (config.gamma_embb * config.sigma2)

    def gains(self, phases) -> np.ndarray:
        v = _lifted_from_phases(phases)
        return np.abs(self.A.conj().T @ v) ** 2

    def __call__(self, phi: PhaseConfig) -> float:
        return float(np.sum(np.log2(1.0 + self.a * self.gains(phi.phases))))

    def batch(self, phases: np.ndarray) -> np.ndarray:
        """Objectives for a (N, T) matrix of candidate phase columns."""
        V = np.concatenate([np.exp(-1j * phases), np.ones((1, phases.shape[1]))], axis=0)
        g = np.abs(self.A.conj().T @ V) ** 2
        return np.sum(np.log2(1.0 + self.a[:, None] * g), axis=0)


class MinGainObjective:
    """Minimum effective channel gain over a set of lifted users."""

    def __init__(self, lifted):
        self.A = np.stack([lc.q for lc in lifted], axis=1)

    def gains(self, phases) -> np.ndarray:
        v = _lifted_from_phases(phases)
        return np.abs(self.A.conj().T @ v) ** 2

    def __call__(self, phi: PhaseConfig) -> float:
        return float(np.min(self.gains(phi.phases)))

    def batch(self, phases: np.ndarray) -> np.ndarray:
        V = np.concatenate([np.exp(-1j * phases), np.ones((1, phases.shape[1]))], axis=0)
        g = np.abs(self.A.conj().T @ V) ** 2
        return np.min(g, axis=0)


def _row_normalize(V: np.ndarray) -> np.ndarray:
    norms = np.sqrt(np.sum(np.abs(V) ** 2, axis=1, keepdims=True))
    norms[norms == 0.0] = 1.0
    return V / norms


def _vals(A, a, V):
    Y = A.conj().T @ V
    return a * np.sum(np.abs(Y) ** 2, axis=1), Y


def _ascend(A, a, V, f_and_w, max_iters, tol=1e-11, patience=5):
    """Monotone Riemannian ascent on the product of row spheres.

    ``f_and_w(vals)`` returns the scalar objective and the per-user
    derivative weights df/dvals.  Returns (V, objective, converged).
    """
    vals, Y = _vals(A, a, V)
    F, w = f_and_w(vals)
    step = 1.0
    stall = 0
    for _ in range(max_iters):
        G = A @ ((w * a)[:, None] * Y)
        inner = np.sum(np.real(np.conj(V) * G), axis=1, keepdims=True)
        G = G - inner * V
        gnorm = np.linalg.norm(G)
        if gnorm <= 1e-15 * max(1.0, np.linalg.norm(V)):
            return V, F, True
        direction = G / gnorm
        improved = False
        for _ in range(40):
            V_try = _row_normalize(V + step * direction)
            vals_try, Y_try = _vals(A, a, V_try)
            F_try, w_try = f_and_w(vals_try)
            if F_try > F:
                improved = True
                break
            step *= 0.5
        if not improved:
            return V, F, True
        gain = F_try - F
        V, Y, F, w = V_try, Y_try, F_try, w_try
        step = min(step * 1.5, 1e3)
        if gain <= tol * max(1.0, abs(F)):
            stall += 1
            if stall >= patience:
                return V, F, True
        else:
            stall = 0
    return V, F, False


def _pick_rank(n: int, n_users: int) -> int:
    if n <= 3:
        return n
    return min(n, int(math.ceil(math.sqrt(2.0 * (n + n_users)))) + 2)


def _starts(A, n, r, warm_vbar=None, extra=2, seed=12345):
    """Deterministic initial factors: warm/aligned rank-one points with a
    small jitter (pure rank-one factors are stationary submanifolds), plus
    random draws."""
    rng = np.random.default_rng(seed)
    out = []

    def rank1(vbar):
        V0 = np.zeros((n, r), dtype=np.complex128)
        V0[:, 0] = vbar
        jitter = 0.02 * (rng.standard_normal((n, r)) + 1j * rng.standard_normal((n, r)))
        return _row_normalize(V0 + jitter)

    if warm_vbar is not None:
        out.append(rank1(warm_vbar))
    # phase-align to the weakest direct user: a cheap, often good rank-one seed
    weakest = int(np.argmin(np.abs(A[-1, :])))
    qa = A[:, weakest]
    safe = np.where(np.abs(qa) > 0, qa, 1.0)
    out.append(rank1(safe / np.abs(safe)))
    for _ in range(extra):
        out.append(_row_normalize(rng.standard_normal((n, r)) + 1j * rng.standard_normal((n, r))))
    return out


def _softmin_weights(vals, mu):
    z = (np.min(vals) - vals) / mu
    w = np.exp(z)
    return w / np.sum(w)


def _maximize_min(A, shifts, V0, max_iters):
    """Anneal a softmin of (vals - shifts) down to (near) the exact min."""
    best_V, best_t = V0, -np.inf
    V = V0
    converged = True
    for frac in (1e-1, 1e-2, 1e-4):
        vals, _ = _vals(A, np.ones(A.shape[1]), V)
        scale = max(float(np.max(vals - shifts) - np.min(vals - shifts)),
                    1e-12 * (1.0 + abs(float(np.max(vals)))))
        mu = frac * scale

        def f_and_w(v, mu=mu):
            shifted = v - shifts
            m = float(np.min(shifted))
            w = _softmin_weights(shifted, mu)
            return m - mu * math.log(max(np.sum(np.exp((m - shifted) / mu)), 1e-300)), w

        V, _, ok = _ascend(A, np.ones(A.shape[1]), V, f_and_w, max_iters)
        converged = converged and ok
        t = float(np.min(_vals(A, np.ones(A.shape[1]), V)[0] - shifts))
        if t > best_t:
            best_t, best_V = t, V
    return best_V, best_t, converged


def solve_minmax_sdp(lifted, *, max_iters=2000, n_starts=None) -> SdpSolution:
    """Maximize the minimum effective gain over the given lifted users.

    Always feasible (the identity matrix is); returns t equal to the
    smallest gain attained by the solution matrix.
    """
    if len(lifted) == 0:
        raise ValueError("need at least one lifted channel")
    A = np.stack([lc.q for lc in lifted], axis=1)
    n, K = A.shape
    if n == 1:
        S = np.ones((1, 1), dtype=np.complex128)
        t = float(np.min(np.abs(A[0, :]) ** 2))
        return SdpSolution(S=S, objective=t, status="optimal", factor=np.ones((1, 1), complex))
    r = _pick_rank(n, K)
    if n_starts is None:
        n_starts = 3 if n <= 20 else 1
    shifts = np.zeros(K)
    best = None
    for V0 in _starts(A, n, r, extra=n_starts):
        V, t, ok = _maximize_min(A, shifts, V0, max_iters)
        if best is None or t > best[1]:
            best = (V, t, ok)
    V, t, ok = best
    S = V @ V.conj().T
    S = 0.5 * (S + S.conj().T)
    return SdpSolution(S=S, objective=t, status="optimal" if ok else "max-iter", factor=V)


def solve_sumrate_sdp(lifted, powers, config, *, warm_phases=None,
                      max_iters=2000, n_starts=None) -> SdpSolution:
    """Maximize the sum of log2(1 + SNR_e) subject to per-user rate floors.

    The floor (1-delta)*b*W*log2(1+SNR_e) >= r_th is affine in the lifted
    matrix: SNR_e >= 2**(r_th/((1-delta)*b*W)) - 1.  Enforced by an
    escalating quadratic penalty with a dedicated feasibility phase; if
    even the max-min of the floor slack is negative the problem is
    reported infeasible.
    """
    if len(lifted) == 0:
        raise ValueError("need at least one lifted channel")
    powers = np.asarray(powers, float)
    if powers.shape[0] != len(lifted):
        raise ValueError("one power per lifted channel required")
    A = np.stack([lc.q for lc in lifted], axis=1)
    a = powers / (config.gamma_embb * config.sigma2)
    n, K = A.shape

    if config.r_th > 0 and config.delta < 1.0:
        r_floor = config.r_th / ((1.0 - config.delta) * config.b)
        s_min = 2.0 ** (r_floor / config.W) - 1.0
    else:
        s_min = 0.0
    s_vec = np.full(K, s_min)

    def objective_of(vals):
        return float(np.sum(np.log2(1.0 + vals)))

    if n == 1:
        S = np.ones((1, 1), dtype=np.complex128)
        vals = a * np.abs(A[0, :]) ** 2
        status = "optimal" if np.all(vals >= s_vec * (1.0 - 1e-9)) else "infeasible"
        return SdpSolution(S=S, objective=objective_of(vals), status=status,
                           factor=np.ones((1, 1), complex))

    r = _pick_rank(n, K)
    if n_starts is None:
        n_starts = 3 if n <= 20 else 1
    warm_vbar = _lifted_from_phases(warm_phases.phases) if warm_phases is not None else None

    feas_tol = 1e-7 * (1.0 + s_min)

    def solve_from(V0):
        V = V0
        vals, _ = _vals(A, a, V)
        if s_min > 0 and np.min(vals - s_vec) < -feas_tol:
            # feasibility phase: max-min of the floor slack, in gain units
            V, _, _ = _maximize_min(A, s_vec / np.maximum(a, 1e-300), V0, max_iters)
            vals, _ = _vals(A, a, V)
            if np.min(vals - s_vec) < -feas_tol:
                return V, -np.inf, False, False
        rho = 10.0
        ok = True
        for _ in range(3):
            def f_and_w(v, rho=rho):
                viol = np.maximum(0.0, s_vec - v)
                F = np.sum(np.log2(1.0 + v)) - rho * np.sum(viol ** 2)
                w = 1.0 / ((1.0 + v) * _LN2) + 2.0 * rho * viol
                return float(F), w

            V, _, ok = _ascend(A, a, V, f_and_w, max_iters)
            vals, _ = _vals(A, a, V)
            if np.min(vals - s_vec) >= -feas_tol:
                return V, objective_of(vals), True, ok
            rho *= 100.0
        return V, objective_of(vals), False, ok

    best = None
    for V0 in _starts(A, n, r, warm_vbar=warm_vbar, extra=n_starts):
        V, F, feas, ok = solve_from(V0)
        if best is None or (feas, F) > (best[2], best[1]):
            best = (V, F, feas, ok)
    V, F, feas, ok = best
    S = V @ V.conj().T
    S = 0.5 * (S + S.conj().T)
    if not feas:
        vals, _ = _vals(A, a, V)
        return SdpSolution(S=S, objective=objective_of(vals), status="infeasible", factor=V)
    return SdpSolution(S=S, objective=F, status="optimal" if ok else "max-iter", factor=V)


def gaussian_randomize(sol: SdpSolution, objective, trials: int = 1000,
                       rng: np.random.Generator | None = None) -> PhaseConfig:
    """Recover a feasible phase vector from a relaxation solution.

    Draws candidates from CN(0, S), projects entries to unit modulus,
    de-rotates by the auxiliary entry and keeps the best under
    ``objective``.  The leading eigenvector of S is always evaluated, so
    a rank-one S is recovered exactly.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    n = sol.S.shape[0]
    if n == 1:
        return PhaseConfig(np.zeros(0))
    if rng is None:
        rng = np.random.default_rng(0)

    evals, evecs = np.linalg.eigh(sol.S)
    lead = evecs[:, -1] * math.sqrt(max(float(evals[-1]), 0.0))
    safe_lead = np.where(np.abs(lead) > 0, lead, 1.0)
    lead_vbar = safe_lead / np.abs(safe_lead)

    ratio = float(evals[-2] / evals[-1]) if evals[-1] > 0 else 0.0
    if ratio < 1e-3:
        return phases_from_lifted(lead_vbar)

    if sol.factor is not None:
        factor = sol.factor
    else:
        lam = np.clip(evals, 0.0, None)
        factor = evecs * np.sqrt(lam)[None, :]
    r = factor.shape[1]
    draws = (rng.standard_normal((trials, r)) + 1j * rng.standard_normal((trials, r))) / math.sqrt(2.0)
    Z = factor @ draws.T                      # (n, trials), columns ~ CN(0, S)
    Z = np.concatenate([lead_vbar[:, None], Z], axis=1)
    Z = np.where(np.abs(Z) > 0, Z, 1.0)
    Vbar = Z / np.abs(Z)
    Vbar = Vbar * np.conj(Vbar[-1, :])[None, :]
    phis = np.mod(-np.angle(Vbar[:-1, :]), TWO_PI)
    phis[phis >= TWO_PI] -= TWO_PI

    if hasattr(objective, "batch"):
        scores = np.asarray(objective.batch(phis), float)
    else:
        scores = np.array([objective(PhaseConfig(phis[:, t])) for t in range(phis.shape[1])])
    best = int(np.argmax(scores))
    return PhaseConfig(phis[:, best])
