"""Dense tanh networks with hand-written backprop.

Weights are stored as (out, in) matrices and inputs are batched row-wise,
so a layer computes ``Z = X @ W.T + b``.
"""

from dataclasses import dataclass

import numpy as np


@dataclass
class Mlp:
    weights: list
    biases: list
    # tanh on hidden layers; the last layer is linear
    name: str = "mlp"

    @classmethod
    def init(cls, sizes, rng, name="mlp", scale=1.0):
        """Xavier-uniform init for layer widths `sizes`, zero biases."""
        weights, biases = [], []
        for n_in, n_out in zip(sizes[:-1], sizes[1:]):
            lim = scale * np.sqrt(6.0 / (n_in + n_out))
            weights.append(rng.uniform(-lim, lim, size=(n_out, n_in)))
            biases.append(np.zeros(n_out))
        return cls(weights, biases, name)

    @classmethod
    def zeros(cls, sizes, name="mlp"):
        return cls([np.zeros((o, i)) for i, o in zip(sizes[:-1], sizes[1:])],
                   [np.zeros(o) for o in sizes[1:]], name)

    @property
    def sizes(self):
        return [self.weights[0].shape[1]] + [W.shape[0] for W in self.weights]

    def copy(self):
        return Mlp([W.copy() for W in self.weights], [b.copy() for b in self.biases], self.name)

    def forward(self, X):
        """Return output and the list of layer activations needed by `backward`."""
        X = np.atleast_2d(X)
        acts = [X]
        H = X
        last = len(self.weights) - 1
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            Z = H @ W.T + b
            H = Z if i == last else np.tanh(Z)
            acts.append(H)
        return H, acts

    def __call__(self, X):
        return self.forward(X)[0]

    def backward(self, acts, d_out):
        """Gradients of a scalar loss given dL/d(output) `d_out`.

        Returns ``(dWs, dbs, dX)``.
        """
        dWs = [None] * len(self.weights)
        dbs = [None] * len(self.weights)
        D = d_out
        last = len(self.weights) - 1
        for i in range(last, -1, -1):
            if i != last:
                D = D * (1.0 - acts[i + 1] ** 2)
            dWs[i] = D.T @ acts[i]
            dbs[i] = D.sum(axis=0)
            D = D @ self.weights[i]
        return dWs, dbs, D

    def sgd(self, dWs, dbs, lr):
        for W, b, dW, db in zip(self.weights, self.biases, dWs, dbs):
            W -= lr * dW
            b -= lr * db

    def flat(self):
        return np.concatenate([p.ravel() for pair in zip(self.weights, self.biases) for p in pair])

    def set_flat(self, theta):
        i = 0
        for W, b in zip(self.weights, self.biases):
            for p in (W, b):
                p[...] = theta[i:i + p.size].reshape(p.shape)
                i += p.size

    def to_dict(self):
        layers = []
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            layers.append({
                "name": f"{self.name}.layer{k}",
                "weight_shape": list(W.shape),
                "weight": W.ravel(order="C").tolist(),
                "bias": b.tolist(),
            })
        return {"name": self.name, "sizes": self.sizes, "hidden_activation": "tanh",
                "output_activation": "linear", "layers": layers}

    @classmethod
    def from_dict(cls, d):
        weights = [np.asarray(L["weight"], dtype=float).reshape(L["weight_shape"]) for L in d["layers"]]
        biases = [np.asarray(L["bias"], dtype=float) for L in d["layers"]]
        return cls(weights, biases, d.get("name", "mlp"))


def softmax(Z):
    Z = np.atleast_2d(Z)
    E = np.exp(Z - Z.max(axis=1, keepdims=True))
    return E / E.sum(axis=1, keepdims=True)


def cross_entropy(P, labels):
    """Mean negative log-likelihood of integer `labels` under rows of `P`."""
    P = np.atleast_2d(P)
    labels = np.asarray(labels).reshape(-1)
    return float(-np.mean(np.log(np.clip(P[np.arange(len(labels)), labels], 1e-300, None))))


def softmax_ce_grad(P, labels):
    """d(mean CE)/d(logits) for softmax outputs `P`."""
    G = np.array(P, copy=True)
    G[np.arange(len(labels)), labels] -= 1.0
    return G / len(labels)
