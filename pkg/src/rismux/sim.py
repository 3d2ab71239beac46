"""Monte Carlo experiment runner: traffic generation, per-trial slot
simulation, sweep orchestration and CSV output.

Scenario files are flat ``key = value`` text with dotted keys; see
``parse_scenario``.  Trials are seeded from (master seed, sweep index,
trial index), so schemes share channel draws and results are independent
of execution order and thread count.
"""

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields, replace

import numpy as np

from .channel import SystemConfig, sample_channels
from .scheduler import advance_state, allocate_mini_slot, begin_slot, initial_state
from .urllc_alloc import UrllcBatch, UrllcPacket

SWEEP_VARS = ("ris_elements", "bs_power", "delta", "bs_ris_distance", "urllc_users")
SCHEMES = ("no_ris", "scheme1", "scheme2", "scheme3", "selected")
STRATEGIES = ("MeRL", "PF")
ALLOCATORS = ("optimization", "heuristic")

CSV_COLUMNS = ("sweep_var", "sweep_value", "scheme", "strategy", "allocator",
               "eta", "eta_se", "sum_rate_bps", "sum_rate_se", "embb_admission",
               "runtime_ms_mean", "runtime_ms_p95", "trials", "seed")


class ScenarioError(Exception):
    """Scenario file failed schema validation."""


@dataclass
class Scenario:
    base: SystemConfig
    sweep_var: str
    sweep_values: list
    trials: int = 200
    schemes: tuple = ("no_ris", "selected")
    strategy: str = "PF"
    allocator: str = "heuristic"
    seed: int = 1234

    def __post_init__(self):
        if self.trials < 1:
            raise ScenarioError("trials must be at least 1")
        if self.sweep_var not in SWEEP_VARS:
            raise ScenarioError(f"unknown sweep variable {self.sweep_var!r}")
        if not self.sweep_values:
            raise ScenarioError("sweep needs at least one value")
        if self.sweep_var != "delta" and any(v < 0 for v in self.sweep_values):
            raise ScenarioError("sweep values must be nonnegative")
        for s in self.schemes:
            if s not in SCHEMES:
                raise ScenarioError(f"unknown scheme {s!r}")
        if self.strategy not in STRATEGIES:
            raise ScenarioError(f"unknown strategy {self.strategy!r}")
        if self.allocator not in ALLOCATORS:
            raise ScenarioError(f"unknown allocator {self.allocator!r}")


@dataclass
class Metrics:
    eta: float
    eta_se: float
    embb_sum_rate: float
    sum_rate_se: float
    embb_admission: float
    runtime_ms_mean: float
    runtime_ms_p95: float
    eta_defined: bool = True


@dataclass
class TrialResult:
    served: int
    arrived: int
    sum_rate: float
    embb_admitted: int
    embb_total: int
    alloc_times: list


def sample_arrivals(config: SystemConfig, U: int, rng) -> UrllcBatch:
    """One mini-slot of Poisson arrivals: each of the U users contributes
    Poisson(arrival_rate) packets of the configured size."""
    if config.arrival_rate < 0:
        raise ValueError("arrival rate must be nonnegative")
    counts = rng.poisson(config.arrival_rate, U) if U > 0 else np.zeros(0, np.int64)
    packets = []
    pid = 0
    for u in range(U):
        for _ in range(int(counts[u])):
            packets.append(UrllcPacket(id=pid, user=u, bits=config.packet_bits))
            pid += 1
    return UrllcBatch(packets=packets, c_th=config.c_th)


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) / 1000.0


def apply_sweep(base: SystemConfig, var: str, value) -> SystemConfig:
    if var == "ris_elements":
        return replace(base, N=int(value))
    if var == "bs_power":
        return replace(base, p_bs=dbm_to_watt(float(value)))
    if var == "delta":
        return replace(base, delta=float(value))
    if var == "bs_ris_distance":
        return replace(base, bs_ris_distance=float(value))
    if var == "urllc_users":
        return replace(base, U=int(value))
    raise ScenarioError(f"unknown sweep variable {var!r}")


def run_trial(config: SystemConfig, scheme: str, strategy: str, allocator: str,
              seed_seq) -> TrialResult:
    """Simulate one full slot: channel drop, slot-start optimization, then
    M mini-slots of arrivals, allocation and state advancement.

    Channels, the slot-start optimizer and the arrival process draw from
    independent child streams, so trials with the same seed are paired
    across schemes and sweep values.
    """
    if scheme == "no_ris":
        config = replace(config, N=0)
        scheme = "scheme1"
    if not isinstance(seed_seq, np.random.SeedSequence):
        seed_seq = np.random.SeedSequence(seed_seq)
    ch_seed, plan_seed, arr_seed = seed_seq.spawn(3)
    channels = sample_channels(config, np.random.default_rng(ch_seed))
    plan = begin_slot(channels, config, rng=np.random.default_rng(plan_seed))
    rng = np.random.default_rng(arr_seed)
    state = initial_state(plan, config)
    served = arrived = 0
    times = []
    for _ in range(config.M):
        batch = sample_arrivals(config, config.U, rng)
        arrived += len(batch)
        decision = allocate_mini_slot(plan, state, batch, strategy, config,
                                      scheme=scheme, allocator=allocator,
                                      timings=times)
        served += int(decision.k.sum())
        state = advance_state(state, decision, plan, config)
    sum_rate = float(config.b * state.cum_rate.sum() / config.M)
    return TrialResult(served=served, arrived=arrived, sum_rate=sum_rate,
                       embb_admitted=len(plan.embb.admitted), embb_total=config.E,
                       alloc_times=times)


def _aggregate(results) -> Metrics:
    arrived = sum(r.arrived for r in results)
    served = sum(r.served for r in results)
    eta_defined = arrived > 0
    eta = served / arrived if eta_defined else 1.0
    per_trial_eta = [r.served / r.arrived for r in results if r.arrived > 0]
    eta_se = float(np.std(per_trial_eta, ddof=1) / math.sqrt(len(per_trial_eta))) \
        if len(per_trial_eta) > 1 else 0.0
    rates = [r.sum_rate for r in results]
    rate_se = float(np.std(rates, ddof=1) / math.sqrt(len(rates))) if len(rates) > 1 else 0.0
    admission = float(np.mean([r.embb_admitted / r.embb_total for r in results]))
    times = np.array([t for r in results for t in r.alloc_times])
    t_mean = float(times.mean() * 1e3) if times.size else 0.0
    t_p95 = float(np.percentile(times, 95) * 1e3) if times.size else 0.0
    return Metrics(eta=eta, eta_se=eta_se, embb_sum_rate=float(np.mean(rates)),
                   sum_rate_se=rate_se, embb_admission=admission,
                   runtime_ms_mean=t_mean, runtime_ms_p95=t_p95,
                   eta_defined=eta_defined)


def run_sweep(scenario: Scenario, threads: int = 1):
    """Run every (sweep value, scheme) cell and return CSV rows, sorted by
    sweep value ascending.  Bit-identical for a fixed scenario and seed."""
    rows = []
    values = sorted(scenario.sweep_values)
    for si, value in enumerate(values):
        config = apply_sweep(scenario.base, scenario.sweep_var, value)
        for scheme in scenario.schemes:
            seeds = [np.random.SeedSequence([scenario.seed, si, t])
                     for t in range(scenario.trials)]
            if threads > 1:
                with ThreadPoolExecutor(max_workers=threads) as pool:
                    results = list(pool.map(
                        lambda s: run_trial(config, scheme, scenario.strategy,
                                            scenario.allocator, s), seeds))
            else:
                results = [run_trial(config, scheme, scenario.strategy,
                                     scenario.allocator, s) for s in seeds]
            m = _aggregate(results)
            rows.append({
                "sweep_var": scenario.sweep_var, "sweep_value": repr(value),
                "scheme": scheme, "strategy": scenario.strategy,
                "allocator": scenario.allocator,
                "eta": repr(m.eta), "eta_se": repr(m.eta_se),
                "sum_rate_bps": repr(m.embb_sum_rate),
                "sum_rate_se": repr(m.sum_rate_se),
                "embb_admission": repr(m.embb_admission),
                "runtime_ms_mean": repr(m.runtime_ms_mean),
                "runtime_ms_p95": repr(m.runtime_ms_p95),
                "trials": str(scenario.trials), "seed": str(scenario.seed),
            })
    return rows


def write_csv(rows, path_or_buf):
    if isinstance(path_or_buf, (str, bytes)):
        with open(path_or_buf, "w", newline="") as fh:
            _write_csv(rows, fh)
    else:
        _write_csv(rows, path_or_buf)


def _write_csv(rows, fh):
    writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
    writer.writeheader()
    for row in rows:
        writer.writerow(row)


def csv_text(rows) -> str:
    buf = io.StringIO()
    _write_csv(rows, buf)
    return buf.getvalue()


_BASE_FIELDS = {f.name: f.type for f in fields(SystemConfig)}
_INT_FIELDS = {"E", "U", "N", "M", "B", "seed"}


def _parse_value(text: str):
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def parse_scenario(path_or_text: str) -> Scenario:
    """Parse the flat dotted-key scenario format.

    Recognized keys: ``base.<field>`` for any SystemConfig field (plus
    ``base.p_bs_dbm`` / ``base.sigma2_dbm`` conveniences), exactly one
    ``sweep.<var>`` with a comma list, and the scalars ``trials``,
    ``seed``, ``strategy``, ``allocator`` and comma-list ``schemes``.
    """
    if "\n" in path_or_text or "=" in path_or_text:
        text = path_or_text
    else:
        try:
            with open(path_or_text) as fh:
                text = fh.read()
        except OSError as exc:
            raise ScenarioError(f"cannot read scenario: {exc}") from exc

    base_kwargs = {}
    sweep = None
    extras = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioError(f"line {ln}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key.startswith("base."):
            name = key[5:]
            if name == "p_bs_dbm":
                base_kwargs["p_bs"] = dbm_to_watt(float(value))
            elif name == "sigma2_dbm":
                base_kwargs["sigma2"] = dbm_to_watt(float(value))
            elif name in _BASE_FIELDS:
                base_kwargs[name] = int(value) if name in _INT_FIELDS else float(value)
            else:
                raise ScenarioError(f"line {ln}: unknown config field {name!r}")
        elif key.startswith("sweep."):
            if sweep is not None:
                raise ScenarioError(f"line {ln}: only one sweep allowed")
            var = key[6:]
            if var not in SWEEP_VARS:
                raise ScenarioError(f"line {ln}: unknown sweep variable {var!r}")
            sweep = (var, [_parse_value(v) for v in value.split(",") if v.strip()])
        elif key in ("trials", "seed"):
            extras[key] = int(value)
        elif key == "schemes":
            extras["schemes"] = tuple(v.strip() for v in value.split(",") if v.strip())
        elif key in ("strategy", "allocator"):
            extras[key] = value
        else:
            raise ScenarioError(f"line {ln}: unknown key {key!r}")
    if sweep is None:
        raise ScenarioError("scenario needs exactly one sweep.<var> entry")
    try:
        base = SystemConfig(**base_kwargs)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"bad base config: {exc}") from exc
    return Scenario(base=base, sweep_var=sweep[0], sweep_values=sweep[1], **extras)


def validate_scenario(path_or_text: str) -> Scenario:
    """Full schema check: parse, then construct every swept config."""
    scenario = parse_scenario(path_or_text)
    for value in scenario.sweep_values:
        apply_sweep(scenario.base, scenario.sweep_var, value)
    return scenario
