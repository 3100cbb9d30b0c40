"""Minimal dense-network engine: explicit backprop and adaptive-moment steps.

Two output heads cover both networks: "identity" (Critic Q-values) and
"actor", which splits the final layer into a sigmoid block of continuous
parameters and a softmax block of discrete-action probabilities.  Gradients
are exact reverse-mode; with both moment decay rates at zero the optimizer
is literal gradient descent.
"""
from __future__ import annotations

import numpy as np


def relu(x):
    return np.maximum(x, 0.0)


def sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


class Mlp:
    """Fully-connected net: ReLU hidden layers, identity or actor head.

    For head="actor" the last layer width must be 2*n_discrete: the first
    half squashes to [0, 1] continuous parameters, the second half is a
    probability head.
    """

    def __init__(self, layer_dims, rng: np.random.Generator, head="identity",
                 n_discrete: int | None = None):
        if head not in ("identity", "actor"):
            raise ValueError(f"unknown head: {head}")
        if head == "actor":
            if n_discrete is None or layer_dims[-1] != 2 * n_discrete:
                raise ValueError("actor head needs layer_dims[-1] == 2*n_discrete")
        self.layer_dims = list(layer_dims)
        self.head = head
        self.n_discrete = n_discrete
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
            scale = np.sqrt(2.0 / fan_in)
            self.weights.append(rng.normal(0.0, scale, (fan_out, fan_in)))
            self.biases.append(np.zeros(fan_out))

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def parameters(self):
        """Flat list [W0, b0, W1, b1, ...]; shared references, not copies."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out

    def forward(self, x):
        """Returns (output, cache).  Identity head: output is the last
        pre-activation; actor head: output is (params, probs)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.layer_dims[0]:
            raise ValueError(f"input width {x.shape[1]} != {self.layer_dims[0]}")
        acts = [x]
        pre = None
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            pre = acts[-1] @ w.T + b
            if i < self.n_layers - 1:
                acts.append(relu(pre))
        if self.head == "identity":
            out = pre
            cache = (acts, pre, None)
        else:
            nd = self.n_discrete
            params = sigmoid(pre[:, :nd])
            probs = softmax(pre[:, nd:])
            out = (params, probs)
            cache = (acts, pre, (params, probs))
        return out, cache

    def backward(self, cache, grad_out):
        """Exact gradients of the forward map.

        grad_out: identity head — array like the output; actor head — tuple
        (grad_params, grad_probs).  Returns (param_grads in parameters()
        order, grad_input).
        """
        acts, pre, head_vals = cache
        if self.head == "identity":
            delta = np.atleast_2d(np.asarray(grad_out, dtype=float))
        else:
            grad_params, grad_probs = grad_out
            params, probs = head_vals
            nd = self.n_discrete
            delta = np.empty_like(pre)
            delta[:, :nd] = np.atleast_2d(grad_params) * params * (1.0 - params)
            gp = np.atleast_2d(grad_probs)
            # softmax Jacobian: p * (g - <g, p>)
            delta[:, nd:] = probs * (gp - (gp * probs).sum(axis=1, keepdims=True))
        grads = []
        for i in range(self.n_layers - 1, -1, -1):
            grads.append(delta.sum(axis=0))          # db
            grads.append(delta.T @ acts[i])          # dW
            if i > 0:
                delta = (delta @ self.weights[i]) * (acts[i] > 0.0)
        grad_input = delta @ self.weights[0]
        grads.reverse()
        return grads, grad_input

    def copy(self) -> "Mlp":
        twin = Mlp.__new__(Mlp)
        twin.layer_dims = list(self.layer_dims)
        twin.head = self.head
        twin.n_discrete = self.n_discrete
        twin.weights = [w.copy() for w in self.weights]
        twin.biases = [b.copy() for b in self.biases]
        return twin

    # -- portable text blob ------------------------------------------------

    def to_blob(self) -> dict:
        return {
            "layer_dims": self.layer_dims,
            "head": self.head,
            "n_discrete": self.n_discrete,
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_blob(cls, blob: dict) -> "Mlp":
        net = cls.__new__(cls)
        net.layer_dims = list(blob["layer_dims"])
        net.head = blob["head"]
        net.n_discrete = blob["n_discrete"]
        net.weights = [np.array(w, dtype=float) for w in blob["weights"]]
        net.biases = [np.array(b, dtype=float) for b in blob["biases"]]
        return net


class OptimizerState:
    """Adaptive-moment updates with bias correction.

    Decay rates (0, 0) bypass the moment machinery entirely and apply the
    literal rule p -= lr * g.
    """

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        if lr <= 0:
            raise ValueError("learning rate must be positive")
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = None
        self.v = None

    def to_blob(self) -> dict:
        return {
            "lr": self.lr, "beta1": self.beta1, "beta2": self.beta2,
            "eps": self.eps, "step_count": self.step_count,
            "m": None if self.m is None else [a.tolist() for a in self.m],
            "v": None if self.v is None else [a.tolist() for a in self.v],
        }

    @classmethod
    def from_blob(cls, blob: dict) -> "OptimizerState":
        opt = cls(blob["lr"], blob["beta1"], blob["beta2"], blob["eps"])
        opt.step_count = blob["step_count"]
        if blob["m"] is not None:
            opt.m = [np.array(a, dtype=float) for a in blob["m"]]
            opt.v = [np.array(a, dtype=float) for a in blob["v"]]
        return opt


def optimizer_step(params, grads, opt: OptimizerState):
    """One in-place update of every parameter array."""
    if len(params) != len(grads):
        raise ValueError("params/grads length mismatch")
    opt.step_count += 1
    if opt.beta1 == 0.0 and opt.beta2 == 0.0:
        for p, g in zip(params, grads):
            p -= opt.lr * g
        return
    if opt.m is None:
        opt.m = [np.zeros_like(p) for p in params]
        opt.v = [np.zeros_like(p) for p in params]
    t = opt.step_count
    for p, g, m, v in zip(params, grads, opt.m, opt.v):
        m *= opt.beta1
        m += (1.0 - opt.beta1) * g
        v *= opt.beta2
        v += (1.0 - opt.beta2) * g * g
        m_hat = m / (1.0 - opt.beta1 ** t)
        v_hat = v / (1.0 - opt.beta2 ** t)
        p -= opt.lr * m_hat / (np.sqrt(v_hat) + opt.eps)


def clip_global_norm(grads, max_norm: float):
    """Rescale the whole gradient list when its global L2 norm exceeds max_norm."""
    total = np.sqrt(sum(float(np.sum(g * g)) for g in grads))
    if total > max_norm > 0:
        scale = max_norm / total
        grads = [g * scale for g in grads]
    return grads
