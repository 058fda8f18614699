"""Command-line entry point ``morphgame``.

Exit codes: 0 success, 1 other library error, 2 solver failure,
3 diverged trajectory, 4 bad config or unreadable input file.

Simulation logs are CSV with the columns
t, V, alpha, theta, q, h, delta_e, delta_t, delta_e_cmd, delta_t_cmd,
xi_cmd, xi_plant, j_u, j_a, iterations, res_u, res_a, wall_time.
"""

import argparse
import csv
import dataclasses
import sys

import numpy as np

from . import pipeline, store
from .config import load_config
from .errors import MorphGameError
from .game import GameWeights
from .sim import metrics, relative_cost_saving, run_closed_loop
from .vehicle import INPUT_NAMES, STATE_NAMES, linearize, trim_residual

# reference matrices at the reference trim
REFERENCE_A = np.array([
    [-0.0353, 3.91, -9.8, 0.0, 7.54e-5],
    [-0.0127, -1.43, 2.14e-4, 0.95, 2.9e-5],
    [0.0, 0.0, 0.0, 1.0, 0.0],
    [-0.0614, -8.42, 0.0, -1.72, 1.32e-4],
    [-8.73e-4, -40.0, 40.0, 0.0, 0.0],
])
REFERENCE_B = np.array([
    [0.0, 0.0169],
    [-0.0822, -5.4e-5],
    [0.0, 0.0],
    [-4.2074, 0.0],
    [0.0, 0.0],
])


def _fmt(M):
    return "\n".join("  " + " ".join(f"{v:11.4f}" for v in row) for row in np.atleast_2d(M))


def cmd_trim(args, cfg):
    trim = cfg.trim
    print("configured trim")
    print("  x_e =", np.array2string(trim.x_e, precision=4), " u_e =", np.array2string(trim.u_e, precision=4),
          " xi_e =", trim.xi_e)
    print("  residual =", np.array2string(trim_residual(trim, cfg.vehicle), precision=5))
    ref = pipeline.operating_trim(cfg)
    print("refined trim")
    print("  x_e =", np.array2string(ref.x_e, precision=6), " u_e =", np.array2string(ref.u_e, precision=6))
    print("  residual norm = %.3e" % np.linalg.norm(trim_residual(ref, cfg.vehicle)))


def cmd_linearize(args, cfg):
    A, B = linearize(cfg.trim, cfg.vehicle, include_trim_input=args.with_trim_input)
    print("A =\n" + _fmt(A))
    print("B =\n" + _fmt(B))
    print("deviation vs reference (entry, computed, reference, rel. error)")
    for name, M, R in (("A", A, REFERENCE_A), ("B", B, REFERENCE_B)):
        for i, j in zip(*np.nonzero(R)):
            rel = abs(M[i, j] - R[i, j]) / abs(R[i, j])
            print(f"  {name}[{STATE_NAMES[i]},{(STATE_NAMES if name == 'A' else INPUT_NAMES)[j]}] "
                  f"{M[i, j]:10.4f} {R[i, j]:10.4f} {rel:8.2%}")


def cmd_collect(args, cfg):
    cfg.collect = dataclasses.replace(cfg.collect, seconds_per_condition=args.seconds_per_condition,
                                      seed=args.seed)
    data = pipeline.collect(cfg, pipeline.operating_trim(cfg))
    store.write_dataset(data, args.out)
    print(f"wrote {len(data)} records to {args.out}")


def cmd_train_phi(args, cfg):
    data = store.read_dataset(args.data)
    log = print if args.verbose else None
    phi, disc, coeffs, _, report = pipeline.fit_phi(data, cfg, log)
    store.save_phi(phi, args.out, cfg.daiml, coeffs, disc)
    print(f"validation MSE {report['val_mse']:.4g} (zero predictor {report['zero_mse']:.4g}); wrote {args.out}")


def cmd_train_classifier(args, cfg):
    data = store.read_dataset(args.data)
    phi, coeffs = store.load_phi(args.phi) if args.phi else (None, None)
    if not cfg.classifier.use_noisy_labels and phi is None:
        raise MorphGameError("--phi is required when use_noisy_labels is false")
    net, report = pipeline.fit_classifier(data, cfg, phi, coeffs, print if args.verbose else None)
    store.save_classifier(net, args.out, cfg.classifier)
    print(", ".join(f"{k} {v:.4f}" for k, v in report.items()) + f"; wrote {args.out}")


def cmd_simulate(args, cfg):
    if args.seed is not None:
        cfg.scenario = dataclasses.replace(cfg.scenario, seed=args.seed)
    trim = pipeline.operating_trim(cfg)
    if args.controller == "lqr":
        controller = pipeline.lqr_controller(cfg, trim)
    else:
        if not (args.phi and args.classifier):
            raise MorphGameError("the game controller needs --phi and --classifier")
        phi, coeffs = store.load_phi(args.phi)
        controller = pipeline.game_controller(cfg, trim, phi, coeffs, store.load_classifier(args.classifier))
    log = run_closed_loop(controller, trim, cfg.scenario, GameWeights.from_config(cfg.game), cfg.vehicle)
    log.to_csv(args.out)
    m = metrics(log, cfg.game.Q_u, cfg.scenario.settle_fraction)
    print(f"cost {m.cost:.4g}  settling time {m.settling_time:.2f} s  final error "
          + np.array2string(m.final_error, precision=4) + f"; wrote {args.out}")


def cmd_compare(args, cfg):
    trim = pipeline.operating_trim(cfg)
    la, lb = store.read_log(args.a, trim.x_e), store.read_log(args.b, trim.x_e)
    Q = cfg.game.Q_u
    for name, log in (("a", la), ("b", lb)):
        m = metrics(log, Q, cfg.scenario.settle_fraction)
        print(f"{name}: cost {m.cost:.6g}  settling {m.settling_time:.2f} s  overshoot "
              + np.array2string(m.overshoot, precision=4) + "  final " + np.array2string(m.final_error, precision=4))
    print(f"a saves {relative_cost_saving(la, lb, Q):.2f}% of b's cumulative cost")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"a_{n}" for n in STATE_NAMES] + [f"b_{n}" for n in STATE_NAMES]
                       + ["a_xi_cmd", "b_xi_cmd", "a_j_u", "b_j_u"])
            for i in range(len(la.t)):
                w.writerow([la.t[i], *la.x_n[i], *lb.x_n[i], la.xi_cmd[i], lb.xi_cmd[i], la.j_u[i], lb.j_u[i]])
        print(f"wrote {args.out}")


def build_parser():
    p = argparse.ArgumentParser(prog="morphgame", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--config", help="INI config file")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("trim", help="show configured and refined trim")
    s.set_defaults(func=cmd_trim)

    s = sub.add_parser("linearize", help="Jacobians at the configured trim vs the reference matrices")
    s.add_argument("--with-trim-input", action="store_true",
                   help="differentiate f + g u_e instead of the drift alone")
    s.set_defaults(func=cmd_linearize)

    s = sub.add_parser("collect", help="simulate the six morph conditions into a dataset CSV")
    s.add_argument("--out", required=True)
    s.add_argument("--seconds-per-condition", type=float, default=50.0)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_collect)

    s = sub.add_parser("train-phi", help="adversarial meta-learning of the feature net")
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--verbose", action="store_true")
    s.set_defaults(func=cmd_train_phi)

    s = sub.add_parser("train-classifier", help="train the morph-condition classifier")
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--phi", help="feature weights; needed only without noisy labels")
    s.add_argument("--verbose", action="store_true")
    s.set_defaults(func=cmd_train_classifier)

    s = sub.add_parser("simulate", help="run the default scenario")
    s.add_argument("--controller", choices=("game", "lqr"), default="game")
    s.add_argument("--phi")
    s.add_argument("--classifier")
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("compare", help="metrics of two logs and a plot-ready merged CSV")
    s.add_argument("--a", required=True)
    s.add_argument("--b", required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_compare)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        args.func(args, cfg)
    except MorphGameError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
