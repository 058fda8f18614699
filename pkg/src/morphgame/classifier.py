"""Morph-condition classifier on ``chi = [f; x]`` and the expected morph ratio."""

from dataclasses import dataclass, field

import numpy as np

from .config import ClassifierConfig
from .errors import InsufficientData, NotSimplex
from .meta import N_CONDITIONS
from .nets import Mlp, cross_entropy, softmax, softmax_ce_grad
from .vehicle import XI_GRID


@dataclass
class ClassifierNet:
    """MLP 10 -> hidden -> 6 with inputs z-scored by stored mean/std."""
    mlp: Mlp
    mean: np.ndarray = field(default_factory=lambda: np.zeros(10))
    std: np.ndarray = field(default_factory=lambda: np.ones(10))

    @classmethod
    def init(cls, rng, hidden=(200, 200, 128), mean=None, std=None):
        mlp = Mlp.init((10, *hidden, N_CONDITIONS), rng, name="classifier")
        return cls(mlp, np.zeros(10) if mean is None else mean, np.ones(10) if std is None else std)

    def logits(self, chi):
        return self.mlp((np.atleast_2d(chi) - self.mean) / self.std)

    def classify(self, chi):
        """Probability vector over the six conditions; a batch gives (N, 6)."""
        chi = np.asarray(chi, dtype=float)
        P = softmax(self.logits(chi))
        return P[0] if chi.ndim == 1 else P


def classify(net, chi):
    return net.classify(chi)


def estimate_xi(rho, grid=XI_GRID, tol=1e-6):
    """Expected morph ratio ``sum_k xi_k rho_k``."""
    rho = np.asarray(rho, dtype=float)
    if rho.shape[-1] != len(grid) or np.any(rho < -tol) or np.any(np.abs(rho.sum(axis=-1) - 1.0) > tol):
        raise NotSimplex("rho must be a probability vector over the morph grid")
    return rho @ np.asarray(grid, dtype=float)


def build_features(F, X):
    """Stack predicted drift and error state into ``chi = [f; x]``."""
    return np.hstack([np.atleast_2d(F), np.atleast_2d(X)])


def train_classifier(chi, k, config=ClassifierConfig(), log=None):
    """Supervised training with mini-batch SGD on mean cross-entropy.

    Returns the trained net and a report with train / held-out accuracy
    and the held-out mean absolute error of the expected morph ratio.
    """
    chi = np.asarray(chi, dtype=float)
    k = np.asarray(k, dtype=int)
    counts = np.bincount(k, minlength=N_CONDITIONS)
    if len(counts) > N_CONDITIONS or np.any(counts < 2):
        raise InsufficientData(f"need at least 2 samples per condition, got {counts.tolist()}")
    rng = np.random.default_rng(config.seed)
    order = rng.permutation(len(chi))
    n_val = int(round(config.val_fraction * len(chi)))
    val, train = order[:n_val], order[n_val:]
    mean = chi[train].mean(axis=0)
    std = np.maximum(chi[train].std(axis=0), 1e-8)
    net = ClassifierNet.init(rng, config.hidden, mean, std)
    Z = (chi - mean) / std
    for epoch in range(config.epochs):
        perm = rng.permutation(train)
        losses = []
        for s in range(0, len(perm), config.batch):
            b = perm[s:s + config.batch]
            out, acts = net.mlp.forward(Z[b])
            P = softmax(out)
            losses.append(cross_entropy(P, k[b]))
            dWs, dbs, _ = net.mlp.backward(acts, softmax_ce_grad(P, k[b]))
            net.mlp.sgd(dWs, dbs, config.lr)
        if log is not None:
            log(f"epoch {epoch}: loss {np.mean(losses):.4f}")
    report = {"train_accuracy": accuracy(net, chi[train], k[train])}
    if n_val:
        P = net.classify(chi[val])
        report["val_accuracy"] = float(np.mean(P.argmax(axis=1) == k[val]))
        report["val_xi_mae"] = float(np.mean(np.abs(P @ XI_GRID - XI_GRID[k[val]])))
    return net, report


def accuracy(net, chi, k):
    return float(np.mean(net.classify(np.atleast_2d(chi)).argmax(axis=1) == np.asarray(k)))
