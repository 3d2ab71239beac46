"""Command line front end.

``rismux simulate`` runs a scenario sweep to CSV, ``rismux validate``
schema-checks a scenario file, ``rismux oracle`` solves a tiny instance
file exhaustively (for authoring expected values in tests).

Exit codes: 0 success, 2 scenario/instance validation error,
3 infeasible configuration.
"""

import argparse
import sys
from dataclasses import replace

import numpy as np

from .channel import SystemConfig
from .exhaustive import brute_force_allocate
from .sim import (ScenarioError, parse_scenario, run_sweep, validate_scenario,
                  write_csv)
from .urllc_alloc import MiniSlotState, StrategyWeights, UrllcBatch, UrllcPacket


def _build_parser():
    parser = argparse.ArgumentParser(prog="rismux")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a scenario sweep and write CSV")
    sim.add_argument("--scenario", required=True)
    sim.add_argument("--out", required=True)
    sim.add_argument("--trials", type=int, default=None)
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--threads", type=int, default=1)

    val = sub.add_parser("validate", help="schema-check a scenario file")
    val.add_argument("--scenario", required=True)

    orc = sub.add_parser("oracle", help="exhaustively solve a tiny instance file")
    orc.add_argument("--instance", required=True)
    return parser


def _parse_instance(path: str):
    """Tiny-instance format: scalar keys b, W, c_th and comma lists caps,
    p_embb, beta, alpha (one normalized gain per packet)."""
    values = {}
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ScenarioError(f"cannot read instance: {exc}") from exc
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioError(f"line {ln}: expected 'key = value'")
        key, val = (p.strip() for p in line.split("=", 1))
        values[key] = val
    try:
        b = int(values["b"])
        w = float(values.get("W", 180e3))
        c_th = float(values["c_th"])
        caps = np.array([int(v) for v in values["caps"].split(",")], np.int64)
        p_embb = np.array([float(v) for v in values["p_embb"].split(",")])
        beta = np.array([float(v) for v in values["beta"].split(",")])
        alpha = np.array([float(v) for v in values["alpha"].split(",")])
    except KeyError as exc:
        raise ScenarioError(f"missing instance key {exc}") from exc
    except ValueError as exc:
        raise ScenarioError(f"bad instance value: {exc}") from exc
    if not (len(caps) == len(p_embb) == len(beta)):
        raise ScenarioError("caps, p_embb and beta must have equal length")
    if np.any(caps > b):
        raise ScenarioError("caps may not exceed b")
    return b, w, c_th, caps, p_embb, beta, alpha


def _run_oracle(path: str) -> int:
    b, w, c_th, caps, p_embb, beta, alpha = _parse_instance(path)
    E, L = len(caps), len(alpha)
    config = SystemConfig(E=E, U=max(L, 1), N=0, B=b * E, W=w,
                          packet_bits=c_th * 0.143e-3, tau=0.143e-3, r_th=0.0)
    gains = alpha * config.sigma2 * config.gamma_urllc
    batch = UrllcBatch(packets=[UrllcPacket(id=i, user=i, bits=config.packet_bits)
                                for i in range(L)], c_th=c_th)
    state = MiniSlotState(m=1, cum_rate=np.zeros(E), baseline_rate=np.zeros(E),
                          r_prime=np.zeros(E), punctured_so_far=np.zeros((0, E)))
    weights = StrategyWeights(strategy="PF", beta=beta)
    try:
        decision = brute_force_allocate(state, batch, weights, gains, config,
                                        caps, embb_powers=p_embb)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"admitted = {int(decision.k.sum())}")
    print(f"f2 = {decision.embb_loss!r}")
    print(f"k = {decision.k.tolist()}")
    print(f"I_L = {decision.I_L.tolist()}")
    print(f"I_E = {decision.I_E.tolist()}")
    print(f"p_L = {[float(p) for p in decision.p_L]}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "validate":
        try:
            validate_scenario(args.scenario)
        except ScenarioError as exc:
            print(f"invalid scenario: {exc}", file=sys.stderr)
            return 2
        except ValueError as exc:
            print(f"infeasible configuration: {exc}", file=sys.stderr)
            return 3
        print("scenario ok")
        return 0
    if args.command == "simulate":
        try:
            scenario = parse_scenario(args.scenario)
            if args.trials is not None:
                scenario = replace(scenario, trials=args.trials)
            if args.seed is not None:
                scenario = replace(scenario, seed=args.seed)
            rows = run_sweep(scenario, threads=max(args.threads, 1))
        except ScenarioError as exc:
            print(f"invalid scenario: {exc}", file=sys.stderr)
            return 2
        except ValueError as exc:
            print(f"infeasible configuration: {exc}", file=sys.stderr)
            return 3
        write_csv(rows, args.out)
        return 0
    if args.command == "oracle":
        try:
            return _run_oracle(args.instance)
        except ScenarioError as exc:
            print(f"invalid instance: {exc}", file=sys.stderr)
            return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
