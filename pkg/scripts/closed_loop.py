"""Simulator, backtester and calibration on synthetic tapes.

Compares the simulator's mean P&L with the backtester replaying tapes drawn
from the same model, for the optimal, asymptotic and naive quoting rules,
then recalibrates the model from one long tape.
"""

import argparse
import json
import math

import numpy as np

from mmladder import ModelParams, asymptotic_quotes, build_matrix, value_ladder
from mmladder.backtest import BacktestConfig, calibrate, naive_baseline, run_backtest
from mmladder.simulator import OptimalPolicy, asymptotic_policy, generate_tape, simulate


def mean_se(x):
    x = np.asarray(x)
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--tapes", type=int, default=100)
    ap.add_argument("--paths", type=int, default=2000)
    ap.add_argument("--requote-dt", type=float, default=1.0)
    ap.add_argument("--rounding", action="store_true", help="round quotes to the tick grid")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    p = ModelParams(sigma=0.3, A=0.9, k=0.3, gamma=0.01, T=600.0, Q=30)
    ladder = value_ladder(build_matrix(p))
    optimal = OptimalPolicy(ladder)
    asym = asymptotic_policy(asymptotic_quotes(ladder.matrix, ladder.decomposition))

    sim = simulate(p, optimal, args.paths, 0.01, seed=args.seed).summary
    cfg = BacktestConfig(p, requote_dt=args.requote_dt, tick_rounding=args.rounding)
    pnl = {"optimal": [], "asymptotic": [], "naive": []}
    for i in range(args.tapes):
        tape = generate_tape(p, p.T, seed=args.seed * 100_000 + i)
        pnl["optimal"].append(run_backtest(tape, cfg, optimal).final_pnl)
        pnl["asymptotic"].append(run_backtest(tape, cfg, asym).final_pnl)
        pnl["naive"].append(naive_baseline(tape, cfg).final_pnl)

    report = {"simulator": {"mean": sim.mean_wealth, "se": sim.stderr_wealth}}
    report.update({k: dict(zip(("mean", "se"), mean_se(v))) for k, v in pnl.items()})

    tape = generate_tape(p, 1e5 / (2 * p.A), seed=args.seed + 1)
    cal = calibrate(tape)
    report["calibration"] = {"sigma": cal.sigma, "A": cal.A, "k": cal.k, "n_trades": cal.n_trades}
    print(json.dumps(report, indent=2))


if __name__ == "__main__":
    main()
