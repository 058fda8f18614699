"""Glue shared by the CLI, the scripts and the acceptance tests."""

import numpy as np

from .classifier import build_features, train_classifier
from .data import collect_data, train_val_split
from .game import GameContext, GameController, GameWeights
from .meta import condition_coefficients, evaluate_prediction, predict, train_daiml
from .sim import LQR_Q, LQR_R, LqrController, lqr_gain
from .vehicle import linearize, solve_trim, trim_residual

# index of the scenario trim's condition in the morph grid
TRIM_CONDITION = 1


def operating_trim(cfg):
    """Configured trim, refined by a root solve so the model is exactly at rest.

    The stored trim values are rounded and leave a residual of a few
    1e-2; simulations start from the refined point at the same V, h, xi.
    """
    trim = cfg.trim
    if np.linalg.norm(trim_residual(trim, cfg.vehicle)) < 1e-9:
        return trim
    return solve_trim(trim.x_e[0], trim.x_e[4], trim.xi_e, guess=trim, params=cfg.vehicle)


def lqr_controller(cfg, trim):
    """Baseline LQR on the trim Jacobian with the drift-only convention."""
    A, B = linearize(trim, cfg.vehicle, include_trim_input=False)
    return LqrController(lqr_gain(A, B, LQR_Q, LQR_R), trim.xi_e)


def collect(cfg, trim):
    return collect_data(trim, cfg.collect, cfg.scenario.T, cfg.vehicle)


def fit_phi(data, cfg, log=None):
    """Train the feature net on a split of `data`.

    Returns ``(phi, disc, coeffs, history, report)`` where `coeffs` are the
    per-condition capped least-squares coefficients on the training split
    and `report` holds validation and zero-predictor MSE.
    """
    train, val = train_val_split(data, cfg.classifier.val_fraction, cfg.daiml.seed)
    phi, disc, history = train_daiml(train.X, train.Y, train.k, cfg.daiml, log)
    gamma = cfg.daiml.gamma
    coeffs = condition_coefficients(phi, train.X, train.Y, train.k, cfg.daiml.ridge, gamma)
    mse, zero = evaluate_prediction(phi, train.X, train.Y, train.k, val.X, val.Y, val.k, cfg.daiml.ridge, gamma)
    return phi, disc, coeffs, history, {"val_mse": mse, "zero_mse": zero}


def classifier_inputs(data, phi=None, coeffs=None, noisy=True):
    """``chi = [f; x]`` with f the noisy label or the fitted ``Phi(x) a_k``."""
    if noisy:
        return build_features(data.Y, data.X)
    F = np.empty_like(data.Y)
    for k in np.unique(data.k):
        sel = data.k == k
        F[sel] = predict(phi, coeffs[k], data.X[sel])
    return build_features(F, data.X)


def fit_classifier(data, cfg, phi=None, coeffs=None, log=None):
    chi = classifier_inputs(data, phi, coeffs, cfg.classifier.use_noisy_labels)
    return train_classifier(chi, data.k, cfg.classifier, log)


def game_controller(cfg, trim, phi, coeffs, clf):
    weights = GameWeights.from_config(cfg.game)
    a_nom = None if coeffs is None else coeffs[TRIM_CONDITION]
    ctx = GameContext(phi, clf, trim, weights, cfg.vehicle, cfg.game.sdc, a_nom)
    return GameController(ctx, cfg.game)
