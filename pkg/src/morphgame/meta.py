"""Shared dynamics representation learned by adversarial meta-learning.

The drift is modelled as ``f(x, xi) ~ Phi(x) a(xi)`` with
``Phi(x) = I_5 kron phi(x)^T`` and ``a = vec(W)`` the stacked columns of
the last-layer weight ``W`` (m x 5). Training alternates a per-condition
least-squares fit of ``a`` with an SGD step on ``phi`` that also tries to
fool a discriminator predicting the condition index from ``phi(x)``.
"""

from dataclasses import dataclass, field

import numpy as np

from .config import DaimlConfig
from .errors import InsufficientData, SingularGram
from .nets import Mlp, cross_entropy, softmax, softmax_ce_grad
from .solvers import spectral_normalize

N_CONDITIONS = 6


@dataclass
class PhiNet:
    """Inner-layer feature network ``phi: R^5 -> R^m``.

    Inputs are divided by the fixed `x_scale` before the first layer.
    """
    mlp: Mlp
    x_scale: np.ndarray = field(default_factory=lambda: np.ones(5))

    @classmethod
    def init(cls, rng, hidden=(64, 64, 32), m=5, x_scale=None):
        mlp = Mlp.init((5, *hidden, m), rng, name="phi")
        return cls(mlp, np.ones(5) if x_scale is None else np.asarray(x_scale, dtype=float))

    @property
    def m(self):
        return self.mlp.sizes[-1]

    @property
    def h(self):
        return 5 * self.m

    def copy(self):
        return PhiNet(self.mlp.copy(), self.x_scale.copy())

    def features(self, X):
        return self.mlp(np.atleast_2d(X) / self.x_scale)

    def forward(self, X):
        return self.mlp.forward(np.atleast_2d(X) / self.x_scale)

    def input_jacobian(self, x):
        """d phi / d x at a single state, shape (m, 5)."""
        F, acts = self.forward(x)
        J = np.zeros((self.m, 5))
        for j in range(self.m):
            d_out = np.zeros((1, self.m))
            d_out[0, j] = 1.0
            J[j] = self.mlp.backward(acts, d_out)[2][0] / self.x_scale
        return J


@dataclass
class FeatureMap:
    phi_features: np.ndarray
    Phi: np.ndarray


def kron_features(phi):
    """``I_5 kron phi^T``; rows of a batch give a (N, 5, 5m) stack."""
    phi = np.asarray(phi, dtype=float)
    if phi.ndim == 1:
        return np.kron(np.eye(5), phi[None, :])
    return np.einsum("ij,nk->nijk", np.eye(5), phi).reshape(phi.shape[0], 5, -1)


def mlp_forward(phi_net, x):
    feats = phi_net.features(np.asarray(x, dtype=float).reshape(1, 5))[0]
    return FeatureMap(feats, kron_features(feats))


def coeff_matrix(a, m):
    """Last-layer weight W (m x 5) from ``a = vec(W)``."""
    return np.asarray(a, dtype=float).reshape(5, m).T


def predict(phi_net, a, X):
    """``Phi(x) a`` for each row of `X`."""
    return phi_net.features(X) @ coeff_matrix(a, phi_net.m)


def default_ridge(Phi_stack):
    return 1e-6 * np.trace(Phi_stack.T @ Phi_stack) / Phi_stack.shape[1]


def ls_adapt(Phi_stack, y_stack, lam=-1.0, gamma=np.inf):
    """Ridge least squares ``(Phi^T Phi + lam I)^-1 Phi^T y``, norm-capped at `gamma`.

    A negative `lam` selects the default ridge ``1e-6 trace(Phi^T Phi)/h``.
    """
    Phi_stack = np.asarray(Phi_stack, dtype=float)
    y_stack = np.asarray(y_stack, dtype=float).reshape(-1)
    h = Phi_stack.shape[1]
    if lam < 0:
        lam = default_ridge(Phi_stack)
    G = Phi_stack.T @ Phi_stack + lam * np.eye(h)
    if lam == 0 and np.linalg.matrix_rank(G) < h:
        raise SingularGram(f"Gram matrix has rank {np.linalg.matrix_rank(G)} < {h}")
    if np.linalg.cond(G) > 1e15:
        raise SingularGram("Gram matrix is numerically singular")
    a = np.linalg.solve(G, Phi_stack.T @ y_stack)
    norm = np.linalg.norm(a)
    if norm > gamma:
        a = gamma * a / norm
    return a


def adapt(phi_net, X, Y, lam=-1.0, gamma=np.inf):
    """Least-squares coefficient for one condition from raw samples."""
    Phi_stack = kron_features(phi_net.features(X)).reshape(-1, phi_net.h)
    return ls_adapt(Phi_stack, np.asarray(Y).reshape(-1), lam, gamma)


def init_discriminator(rng, m=5, hidden=128):
    return Mlp.init((m, hidden, N_CONDITIONS), rng, name="disc")


def discriminator_forward(disc, phi_features):
    return softmax(disc(np.atleast_2d(phi_features)))


def phi_loss_and_grad(phi_net, disc, a, X, Y, k, alpha):
    """Batch-mean loss ``||y - Phi a||^2 - alpha CE(disc(phi), k)`` and its gradient.

    `a` is held fixed. Returns ``(loss, reg, ce, dWs, dbs)``.
    """
    F, acts = phi_net.forward(X)
    W = coeff_matrix(a, phi_net.m)
    resid = F @ W - Y
    n = X.shape[0]
    reg = float(np.sum(resid**2) / n)
    dF = 2.0 * resid @ W.T / n
    labels = np.full(n, k)
    logits, dacts = disc.forward(F)
    P = softmax(logits)
    ce = cross_entropy(P, labels)
    if alpha != 0.0:
        _, _, dF_ce = disc.backward(dacts, softmax_ce_grad(P, labels))
        dF = dF - alpha * dF_ce
    dWs, dbs, _ = phi_net.mlp.backward(acts, dF)
    return reg - alpha * ce, reg, ce, dWs, dbs


def disc_loss_and_grad(disc, F, k):
    labels = np.full(F.shape[0], k) if np.isscalar(k) else np.asarray(k)
    logits, acts = disc.forward(F)
    P = softmax(logits)
    dWs, dbs, _ = disc.backward(acts, softmax_ce_grad(P, labels))
    acc = float(np.mean(P.argmax(axis=1) == labels))
    return cross_entropy(P, labels), acc, dWs, dbs


def daiml_step(phi_net, disc, batch_a, batch_xi, k, config, rng):
    """One adaptation + representation update on a single condition `k`.

    `batch_a` and `batch_xi` are disjoint ``(X, Y)`` pairs drawn from
    condition k. Parameters are updated in place and also returned.
    """
    Xa, Ya = batch_a
    Xb, Yb = batch_xi
    a = adapt(phi_net, Xa, Ya, config.ridge, config.gamma)
    _, reg, ce, dWs, dbs = phi_loss_and_grad(phi_net, disc, a, Xb, Yb, k, config.alpha)
    phi_net.mlp.sgd(dWs, dbs, config.lr_phi)
    for i, W in enumerate(phi_net.mlp.weights):
        phi_net.mlp.weights[i] = spectral_normalize(W, config.spectral_bound)
    disc_updated = False
    acc = float("nan")
    if rng.random() < config.eta:
        F = phi_net.features(Xb)
        _, acc, dWs_h, dbs_h = disc_loss_and_grad(disc, F, k)
        disc.sgd(dWs_h, dbs_h, config.lr_h)
        disc_updated = True
    return phi_net, disc, {"a": a, "reg": reg, "ce": ce, "disc_acc": acc, "disc_updated": disc_updated}


def _split_conditions(k, min_count):
    idx = [np.flatnonzero(k == c) for c in range(N_CONDITIONS)]
    for c, ix in enumerate(idx):
        if len(ix) < min_count:
            raise InsufficientData(f"condition {c} has {len(ix)} records, need {min_count}")
    return idx


def input_scale(X):
    return np.maximum(np.std(X, axis=0), 1e-3)


def train_daiml(X, Y, k, config=DaimlConfig(), log=None):
    """Run DAIML over a labelled dataset.

    Parameters
    ----------
    X, Y : (N, 5) arrays
        Error-coordinate states and noisy drift labels.
    k : (N,) int array
        Condition index 0..5 (order of the canonical morph grid).

    Returns
    -------
    phi_net, disc, history
        `history` holds per-epoch mean regression loss, adversarial loss
        and discriminator batch accuracy.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    k = np.asarray(k, dtype=int)
    idx = _split_conditions(k, config.K + config.B)
    rng = np.random.default_rng(config.seed)
    phi_net = PhiNet.init(rng, config.hidden, config.m, input_scale(X))
    for i, W in enumerate(phi_net.mlp.weights):
        phi_net.mlp.weights[i] = spectral_normalize(W, config.spectral_bound)
    disc = init_discriminator(rng, config.m, config.disc_hidden)
    steps = max(1, len(X) // (config.K + config.B))
    history = {"reg": [], "adv": [], "disc_acc": []}
    for epoch in range(config.epochs):
        regs, ces, accs = [], [], []
        for _ in range(steps):
            c = int(rng.integers(N_CONDITIONS))
            pick = rng.choice(idx[c], size=config.K + config.B, replace=False)
            ia, ib = pick[:config.K], pick[config.K:]
            _, _, info = daiml_step(phi_net, disc, (X[ia], Y[ia]), (X[ib], Y[ib]), c, config, rng)
            regs.append(info["reg"])
            ces.append(info["ce"])
            if info["disc_updated"]:
                accs.append(info["disc_acc"])
        history["reg"].append(float(np.mean(regs)))
        history["adv"].append(float(np.mean(ces)))
        history["disc_acc"].append(float(np.mean(accs)) if accs else float("nan"))
        if log is not None:
            log(f"epoch {epoch}: reg {history['reg'][-1]:.4g} adv {history['adv'][-1]:.4g} "
                f"disc acc {history['disc_acc'][-1]:.3f}")
    return phi_net, disc, history


def condition_coefficients(phi_net, X, Y, k, lam=-1.0, gamma=np.inf):
    """Least-squares coefficient per condition, shape (6, h)."""
    idx = _split_conditions(np.asarray(k, dtype=int), 1)
    return np.array([adapt(phi_net, X[ix], Y[ix], lam, gamma) for ix in idx])


def evaluate_prediction(phi_net, X_adapt, Y_adapt, k_adapt, X_val, Y_val, k_val, lam=-1.0, gamma=np.inf):
    """Validation MSE of ``Phi a*`` with a* fitted per condition on the adapt split.

    Returns ``(mse, zero_predictor_mse)``.
    """
    coeffs = condition_coefficients(phi_net, X_adapt, Y_adapt, k_adapt, lam, gamma)
    pred = np.empty_like(Y_val)
    for c in range(N_CONDITIONS):
        sel = k_val == c
        if np.any(sel):
            pred[sel] = predict(phi_net, coeffs[c], X_val[sel])
    return float(np.mean((pred - Y_val) ** 2)), float(np.mean(Y_val**2))


def train_discriminator(phi_net, X, k, config=DaimlConfig(), epochs=20, seed=0):
    """Fresh discriminator on frozen features; probes how much condition info phi keeps."""
    rng = np.random.default_rng(seed)
    disc = init_discriminator(rng, phi_net.m, config.disc_hidden)
    F = phi_net.features(X)
    k = np.asarray(k, dtype=int)
    for _ in range(epochs):
        order = rng.permutation(len(F))
        for s in range(0, len(F), 64):
            b = order[s:s + 64]
            _, _, dWs, dbs = disc_loss_and_grad(disc, F[b], k[b])
            disc.sgd(dWs, dbs, 0.05)
    return disc


def discriminator_accuracy(disc, phi_net, X, k):
    P = discriminator_forward(disc, phi_net.features(X))
    return float(np.mean(P.argmax(axis=1) == np.asarray(k)))
