"""Channel synthesis and per-RB rate model for the RIS-aided downlink.

Geometry: single BS at the origin, one RIS a fixed distance away, users
dropped uniformly at random over the BS coverage disk.  Direct BS-user
links are Rayleigh, the BS-RIS link is Rician, RIS-user links are
Rayleigh.  All small-scale terms are unit-power circularly-symmetric
complex Gaussians (CN(0,1)).
"""

import math
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class SystemConfig:
    """Static parameters of one simulated cell.

    Powers are watts, bandwidths Hz, durations seconds, rates bits/s.
    ``arrival_rate`` is the mean number of URLLC packets per user per
    mini-slot.
    """

    E: int = 8                      # eMBB users
    U: int = 65                     # URLLC users
    N: int = 40                     # RIS elements
    M: int = 7                      # mini-slots per slot
    B: int = 96                     # total resource blocks
    W: float = 180e3                # RB bandwidth [Hz]
    tau: float = 0.143e-3           # mini-slot duration [s]
    packet_bits: float = 256.0      # URLLC packet size [bits]
    p_bs: float = 1.9953            # BS power budget [W] (33 dBm)
    sigma2: float = 1.7783e-13      # noise power [W] (-97.5 dBm)
    eps_embb: float = 1e-1
    eps_urllc: float = 1e-6
    delta: float = 0.1              # eMBB over-provisioning margin
    r_th: float = 1e6               # eMBB minimum rate [bits/s]
    arrival_rate: float = 0.1001    # URLLC packets per user per mini-slot
    coverage_radius: float = 110.0  # [m]
    bs_ris_distance: float = 20.0   # [m]
    alpha0: float = 1e-3            # direct-link reference loss (-30 dB)
    alpha1: float = 1e-4            # cascaded-link reference loss (-40 dB)
    rho0: float = 3.5
    rho1: float = 2.2
    rho2: float = 2.8
    kappa: float = 10.0             # Rician factor of the BS-RIS link
    seed: int = 0

    def __post_init__(self):
        if self.E < 1:
            raise ValueError("need at least one eMBB user")
        if self.B % self.E != 0:
            raise ValueError(f"B={self.B} must be divisible by E={self.E}")
        for name in ("W", "tau", "packet_bits", "p_bs", "sigma2", "r_th"):
            if getattr(self, name) < 0 or (name not in ("r_th",) and getattr(self, name) == 0):
                raise ValueError(f"{name} must be strictly positive")
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError("delta must lie in [0, 1]")
        for name in ("eps_embb", "eps_urllc"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ValueError(f"{name} must lie in (0, 1)")
        if self.U < 0 or self.N < 0 or self.M < 1 or self.B < 1:
            raise ValueError("counts must be nonnegative (M, B at least 1)")
        if self.arrival_rate < 0:
            raise ValueError("arrival_rate must be nonnegative")
        if self.coverage_radius <= 0 or self.bs_ris_distance <= 0:
            raise ValueError("distances must be strictly positive")
        if self.kappa < 0:
            raise ValueError("kappa must be nonnegative")

    @property
    def b(self) -> int:
        """RBs per eMBB user."""
        return self.B // self.E

    @property
    def c_th(self) -> float:
        """URLLC per-packet rate requirement [bits/s]."""
        return self.packet_bits / self.tau

    @property
    def gamma_embb(self) -> float:
        return snr_gap(self.eps_embb, "embb")

    @property
    def gamma_urllc(self) -> float:
        return snr_gap(self.eps_urllc, "urllc")


@dataclass
class ChannelRealization:
    """All complex channel coefficients for one user drop."""

    h_bs_e: np.ndarray    # (E,)   BS -> eMBB user
    h_ris_e: np.ndarray   # (E, N) RIS -> eMBB user
    g_bs_u: np.ndarray    # (U,)   BS -> URLLC user
    g_ris_u: np.ndarray   # (U, N) RIS -> URLLC user
    f_bs_ris: np.ndarray  # (N,)   BS -> RIS

    def __post_init__(self):
        for name in ("h_bs_e", "h_ris_e", "g_bs_u", "g_ris_u", "f_bs_ris"):
            arr = np.asarray(getattr(self, name), dtype=np.complex128)
            if not np.all(np.isfinite(arr.view(np.float64))):
                raise ValueError(f"{name} contains non-finite entries")
            object.__setattr__(self, name, arr)
        n = self.f_bs_ris.shape[0]
        if self.h_ris_e.shape[1:] != (n,) or self.g_ris_u.shape[1:] != (n,):
            raise ValueError("RIS-side vectors disagree on element count")


@dataclass
class PhaseConfig:
    """Per-element RIS phase shifts, each in [0, 2*pi)."""

    phases: np.ndarray

    def __post_init__(self):
        p = np.atleast_1d(np.asarray(self.phases, dtype=np.float64))
        if p.ndim != 1:
            raise ValueError("phases must be one-dimensional")
        if p.size and (p.min() < 0.0 or p.max() >= TWO_PI):
            raise ValueError("phases must lie in [0, 2*pi)")
        self.phases = p

    @property
    def n(self) -> int:
        return self.phases.size

    def reflection(self) -> np.ndarray:
        """Unit-modulus reflection coefficients exp(j*phi)."""
        return np.exp(1j * self.phases)


def snr_gap(eps: float, service: str) -> float:
    """SNR gap to capacity for a target block error rate.

    embb:  -ln(5 eps) / 0.45
    urllc: -ln(5 eps) / 1.25
    Valid for eps in (0, 0.2); at 0.2 the gap collapses to zero.
    """
    if not 0.0 < eps < 0.2:
        raise ValueError(f"target BLER {eps} outside (0, 0.2)")
    kind = service.lower()
    if kind == "embb":
        return -math.log(5.0 * eps) / 0.45
    if kind == "urllc":
        return -math.log(5.0 * eps) / 1.25
    raise ValueError(f"unknown service class {service!r}")


def _cn(rng: np.random.Generator, shape) -> np.ndarray:
    """Unit-power complex Gaussian samples, CN(0, 1)."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def ris_los_response(n: int) -> np.ndarray:
    """Deterministic LoS component of the BS-RIS link.

    Uniform linear array with half-wavelength spacing mounted at a fixed
    30-degree tilt from the BS direction: element n sees phase
    pi * n * sin(30 deg).  Seed-independent by construction.
    """
    idx = np.arange(n)
    return np.exp(1j * math.pi * idx * 0.5)


def sample_channels(config: SystemConfig, rng: np.random.Generator) -> ChannelRealization:
    """Draw one independent channel realization.

    Large-scale model: direct links alpha0 * d^-rho0; cascaded links
    alpha1 * d_bs_ris^-rho1 * d_ris_user^-rho2, split so that the BS-RIS
    vector carries sqrt(alpha1 * d_bs_ris^-rho1) and each RIS-user vector
    carries sqrt(d_ris_user^-rho2).
    """
    if config.coverage_radius <= 0 or config.bs_ris_distance <= 0:
        raise ValueError("distances must be strictly positive")
    n, e, u = config.N, config.E, config.U

    ris_pos = np.array([config.bs_ris_distance, 0.0])

    def drop(count):
        # uniform over the coverage disk, BS at the origin
        r = config.coverage_radius * np.sqrt(rng.uniform(size=count))
        ang = rng.uniform(0.0, TWO_PI, size=count)
        return np.stack([r * np.cos(ang), r * np.sin(ang)], axis=1)

    pos_e = drop(e)
    pos_u = drop(u)
    d_bs_e = np.linalg.norm(pos_e, axis=1)
    d_bs_u = np.linalg.norm(pos_u, axis=1)
    d_ris_e = np.linalg.norm(pos_e - ris_pos, axis=1)
    d_ris_u = np.linalg.norm(pos_u - ris_pos, axis=1)

    h_bs_e = np.sqrt(config.alpha0 * d_bs_e ** -config.rho0) * _cn(rng, e)
    g_bs_u = np.sqrt(config.alpha0 * d_bs_u ** -config.rho0) * _cn(rng, u)

    h_ris_e = np.sqrt(d_ris_e ** -config.rho2)[:, None] * _cn(rng, (e, n))
    g_ris_u = np.sqrt(d_ris_u ** -config.rho2)[:, None] * _cn(rng, (u, n))

    los = ris_los_response(n)
    if math.isinf(config.kappa):
        small = los
    else:
        k = config.kappa
        small = math.sqrt(k / (1.0 + k)) * los + math.sqrt(1.0 / (1.0 + k)) * _cn(rng, n)
    f_bs_ris = math.sqrt(config.alpha1 * config.bs_ris_distance ** -config.rho1) * small

    return ChannelRealization(h_bs_e, h_ris_e, g_bs_u, g_ris_u, f_bs_ris)


def cascade_vector(ris_vec: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Per-element cascade conj(ris_vec) * f, so that the reflected field
    is the plain inner product of exp(j*phi) with this vector."""
    return np.conj(ris_vec) * f


def effective_gain(direct: complex, cascade, f, phi: PhaseConfig) -> float:
    """Squared magnitude of direct-plus-reflected field:
    ``|direct + sum_n conj(cascade_n) * exp(j phi_n) * f_n|**2``."""
    cascade = np.asarray(cascade, dtype=np.complex128)
    f = np.asarray(f, dtype=np.complex128)
    phases = phi.phases if isinstance(phi, PhaseConfig) else np.asarray(phi, float)
    if cascade.shape != f.shape or cascade.shape != phases.shape:
        raise ValueError("cascade, f and phases must have equal length")
    field = direct + np.sum(np.conj(cascade) * np.exp(1j * phases) * f)
    return float(np.abs(field) ** 2)


def effective_gains(channels: ChannelRealization, phi: PhaseConfig):
    """Gains of every eMBB and URLLC user under one phase configuration.

    Returns (gains_embb (E,), gains_urllc (U,)).
    """
    refl = phi.reflection()
    field_e = channels.h_bs_e + (np.conj(channels.h_ris_e) * refl) @ channels.f_bs_ris
    field_u = channels.g_bs_u + (np.conj(channels.g_ris_u) * refl) @ channels.f_bs_ris
    return np.abs(field_e) ** 2, np.abs(field_u) ** 2


def rate_per_rb(gain: float, p: float, w_rb: float, gamma: float, sigma2: float) -> float:
    """Achievable rate on one RB [bits/s]: W * log2(1 + p*gain/(gamma*sigma2))."""
    if w_rb <= 0 or gamma <= 0 or sigma2 <= 0:
        raise ValueError("w_rb, gamma and sigma2 must be strictly positive")
    if p < 0 or gain < 0:
        raise ValueError("power and gain must be nonnegative")
    return w_rb * math.log2(1.0 + p * gain / (gamma * sigma2))
