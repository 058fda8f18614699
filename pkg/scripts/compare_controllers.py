"""Game controller versus LQR over several noise seeds, from saved weights.

Usage: python3 scripts/compare_controllers.py --phi results/phi.json --classifier results/classifier.json
           [--config run.ini] [--seeds 5] [--sdc zero|nominal]
"""

import argparse
import dataclasses

import numpy as np

from morphgame import pipeline, store
from morphgame.config import load_config
from morphgame.errors import MorphGameError
from morphgame.game import GameWeights
from morphgame.sim import metrics, run_closed_loop


def main():
    p = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    p.add_argument("--config")
    p.add_argument("--phi", required=True)
    p.add_argument("--classifier", required=True)
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--sdc", choices=("zero", "nominal"))
    args = p.parse_args()
    cfg = load_config(args.config)
    if args.sdc:
        cfg.game = dataclasses.replace(cfg.game, sdc=args.sdc)
    trim = pipeline.operating_trim(cfg)
    phi, coeffs = store.load_phi(args.phi)
    clf = store.load_classifier(args.classifier)
    w = GameWeights.from_config(cfg.game)

    print("seed  game cost   LQR cost   saving  game settle  LQR settle  mean iters")
    for seed in range(args.seeds):
        sc = dataclasses.replace(cfg.scenario, seed=seed)
        lqr = metrics(run_closed_loop(pipeline.lqr_controller(cfg, trim), trim, sc, w, cfg.vehicle), cfg.game.Q_u)
        try:
            log = run_closed_loop(pipeline.game_controller(cfg, trim, phi, coeffs, clf), trim, sc, w, cfg.vehicle)
        except MorphGameError as exc:
            print(f"{seed:4d}  game run failed: {type(exc).__name__}: {exc}")
            continue
        game = metrics(log, cfg.game.Q_u)
        saving = 100.0 * (lqr.cost - game.cost) / lqr.cost
        print(f"{seed:4d} {game.cost:10.4g} {lqr.cost:10.4g} {saving:7.2f}% {game.settling_time:11.2f} "
              f"{lqr.settling_time:11.2f} {np.mean(log.iterations):11.2f}")


if __name__ == "__main__":
    main()
