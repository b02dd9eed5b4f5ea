"""Tiny feed-forward network with exact backprop, used by both RL agents.

Dense tanh layers with a linear or softmax head, an adaptive-moment
optimizer, categorical sampling, soft target updates, and a binary
checkpoint format. No autodiff graph: gradients are hand-derived and
pinned by finite-difference tests.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"GLNN"


class Mlp:
    """sizes = (in, hidden..., out); head is 'linear' or 'softmax'."""

    def __init__(self, sizes, head: str = "linear",
                 rng: np.random.Generator | None = None):
        if head not in ("linear", "softmax"):
            raise ValueError(f"unknown head {head!r}")
        self.sizes = tuple(int(s) for s in sizes)
        self.head = head
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        rng = rng or np.random.default_rng()
        for fan_in, fan_out in zip(self.sizes, self.sizes[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            self.weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))

    @property
    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def copy(self) -> "Mlp":
        clone = Mlp.__new__(Mlp)
        clone.sizes = self.sizes
        clone.head = self.head
        clone.weights = [w.copy() for w in self.weights]
        clone.biases = [b.copy() for b in self.biases]
        return clone

    def forward(self, x: np.ndarray):
        """Returns (output, cache). Accepts a single vector or a batch."""
        x = np.asarray(x, dtype=float)
        squeeze = x.ndim == 1
        a = x.reshape(1, -1) if squeeze else x
        cache = [a]
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w + b
            a = z if i == last else np.tanh(z)
            cache.append(a)
        if self.head == "softmax":
            z = a - a.max(axis=1, keepdims=True)
            ez = np.exp(z)
            a = ez / ez.sum(axis=1, keepdims=True)
        out = a[0] if squeeze else a
        return out, cache

    def backward(self, cache, grad_out: np.ndarray):
        """Exact gradients for every parameter plus the input gradient.

        For a linear head grad_out is dL/d(output); for a softmax head it is
        dL/d(logits) (callers differentiate through the softmax themselves,
        which is the natural form for log-probability losses).
        """
        g = np.asarray(grad_out, dtype=float)
        if g.ndim == 1:
            g = g.reshape(1, -1)
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.weights)
        for i in range(len(self.weights) - 1, -1, -1):
            a_prev = cache[i]
            if i < len(self.weights) - 1:
                g = g * (1.0 - cache[i + 1] ** 2)  # through tanh
            grads_w[i] = a_prev.T @ g
            grads_b[i] = g.sum(axis=0)
            g = g @ self.weights[i].T
        grads = []
        for gw, gb in zip(grads_w, grads_b):
            grads.extend((gw, gb))
        return grads, g


@dataclass
class Adam:
    """Adaptive-moment optimizer with the customary defaults."""

    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def __post_init__(self):
        if self.lr < 0:
            raise ValueError("learning rate must be nonnegative")

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        if not self.m:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.step_count += 1
        b1c = 1.0 - self.beta1 ** self.step_count
        b2c = 1.0 - self.beta2 ** self.step_count
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)


def soft_update(target: Mlp, main: Mlp, rho: float) -> None:
    """Polyak blend toward the main parameters: t' = rho*m + (1-rho)*t'."""
    for t, m in zip(target.params, main.params):
        t *= 1.0 - rho
        t += rho * m


def categorical_sample(probs: np.ndarray, rng: np.random.Generator) -> int:
    """Draw an index from a probability vector."""
    cdf = np.cumsum(probs)
    u = rng.random() * cdf[-1]
    return int(min(np.searchsorted(cdf, u, side="right"), len(probs) - 1))


def log_prob(probs: np.ndarray, index: int) -> float:
    return float(np.log(max(probs[index], 1e-300)))


# -- checkpoints --------------------------------------------------------------
# layout: b"GLNN" | head byte (0 linear, 1 softmax) | uint32 layer count |
# uint32 sizes... | float64 little-endian W1, b1, W2, b2, ...

def save_checkpoint(path: str, mlp: Mlp) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<BI", 1 if mlp.head == "softmax" else 0, len(mlp.sizes)))
        fh.write(struct.pack(f"<{len(mlp.sizes)}I", *mlp.sizes))
        for p in mlp.params:
            fh.write(p.astype("<f8").tobytes())


def load_checkpoint(path: str) -> Mlp:
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise ValueError(f"{path} is not a network checkpoint")
        head_code, n_sizes = struct.unpack("<BI", fh.read(5))
        sizes = struct.unpack(f"<{n_sizes}I", fh.read(4 * n_sizes))
        mlp = Mlp(sizes, head="softmax" if head_code else "linear",
                  rng=np.random.default_rng(0))
        for p in mlp.params:
            raw = fh.read(8 * p.size)
            p[...] = np.frombuffer(raw, dtype="<f8").reshape(p.shape)
    return mlp
