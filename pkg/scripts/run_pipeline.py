"""Collect data, train both networks, fly the default scenario with both controllers.

Usage: python3 scripts/run_pipeline.py [--config run.ini] [--out results/]
"""

import argparse
import pathlib
import time

from morphgame import pipeline, store
from morphgame.config import load_config
from morphgame.game import GameWeights
from morphgame.sim import metrics, relative_cost_saving, run_closed_loop


def main():
    p = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    p.add_argument("--config")
    p.add_argument("--out", default="results")
    args = p.parse_args()
    cfg = load_config(args.config)
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    t0 = time.perf_counter()
    trim = pipeline.operating_trim(cfg)
    data = pipeline.collect(cfg, trim)
    store.write_dataset(data, out / "data.csv")
    print(f"[{time.perf_counter() - t0:6.1f} s] collected {len(data)} records")

    phi, disc, coeffs, _, report = pipeline.fit_phi(data, cfg)
    store.save_phi(phi, out / "phi.json", cfg.daiml, coeffs, disc)
    print(f"[{time.perf_counter() - t0:6.1f} s] feature net: validation MSE {report['val_mse']:.4g}, "
          f"zero predictor {report['zero_mse']:.4g}")

    clf, creport = pipeline.fit_classifier(data, cfg, phi, coeffs)
    store.save_classifier(clf, out / "classifier.json", cfg.classifier)
    print(f"[{time.perf_counter() - t0:6.1f} s] classifier: held-out accuracy {creport['val_accuracy']:.4f}, "
          f"xi MAE {creport['val_xi_mae']:.4f}")

    w = GameWeights.from_config(cfg.game)
    logs = {}
    for name, ctrl in (("game", pipeline.game_controller(cfg, trim, phi, coeffs, clf)),
                       ("lqr", pipeline.lqr_controller(cfg, trim))):
        logs[name] = run_closed_loop(ctrl, trim, cfg.scenario, w, cfg.vehicle)
        logs[name].to_csv(out / f"{name}.csv")
        m = metrics(logs[name], cfg.game.Q_u, cfg.scenario.settle_fraction)
        print(f"[{time.perf_counter() - t0:6.1f} s] {name}: cost {m.cost:.5g}, settling {m.settling_time:.2f} s")
    print(f"game saves {relative_cost_saving(logs['game'], logs['lqr'], cfg.game.Q_u):.2f}% of the LQR cost")


if __name__ == "__main__":
    main()
