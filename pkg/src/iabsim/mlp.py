"""Fully connected network with hand-rolled backprop (numpy only).

Hidden layers are rectified-linear. The output either stays linear or goes
through a structured activation used by the allocation actor: the output is
reshaped to (2L+1) x M, the first 1+L rows get a column-wise softmax (one
winner per subchannel) and the last L rows an elementwise sigmoid (toggle
probabilities). Keeping the gradient path explicit lets every consumer check
it against finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class OutputHead:
    kind: str = "linear"  # "linear" | "structured"
    n_iab: int = 0
    n_chan: int = 0

    def out_size(self) -> int | None:
        if self.kind == "structured":
            return (2 * self.n_iab + 1) * self.n_chan
        return None


LINEAR = OutputHead("linear")


def structured_head(n_iab: int, n_chan: int) -> OutputHead:
    return OutputHead("structured", n_iab, n_chan)


@dataclass
class MlpParams:
    layer_sizes: list[int]
    weights: list[np.ndarray]  # weights[i]: (layer_sizes[i], layer_sizes[i+1])
    biases: list[np.ndarray]
    head: OutputHead = LINEAR

    def copy(self) -> "MlpParams":
        return MlpParams(
            layer_sizes=list(self.layer_sizes),
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            head=self.head,
        )


@dataclass
class MlpGrads:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def flat_norm(self) -> float:
        total = 0.0
        for g in self.weights + self.biases:
            total += float((g**2).sum())
        return float(np.sqrt(total))


@dataclass
class ForwardCache:
    activations: list[np.ndarray]  # activations[0] = input, 2-D
    pre_acts: list[np.ndarray]
    output: np.ndarray
    squeezed: bool


def init(
    layer_sizes: list[int],
    head: OutputHead = LINEAR,
    rng: np.random.Generator | None = None,
) -> MlpParams:
    """Fan-in-scaled uniform weights (U(-sqrt(3/fan_in), sqrt(3/fan_in))),
    zero biases."""
    if len(layer_sizes) < 2 or any(s < 1 for s in layer_sizes):
        raise ValueError(f"bad layer sizes {layer_sizes}")
    want = head.out_size()
    if want is not None and layer_sizes[-1] != want:
        raise ValueError(
            f"structured head needs output size {want}, got {layer_sizes[-1]}"
        )
    rng = rng if rng is not None else np.random.default_rng()
    weights, biases = [], []
    for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        bound = np.sqrt(3.0 / n_in)
        weights.append(rng.uniform(-bound, bound, size=(n_in, n_out)))
        biases.append(np.zeros(n_out))
    return MlpParams(list(layer_sizes), weights, biases, head)


def _apply_head(z: np.ndarray, head: OutputHead) -> np.ndarray:
    if head.kind == "linear":
        return z
    n, m = head.n_iab, head.n_chan
    out = z.reshape(z.shape[0], 2 * n + 1, m)
    xb = out[:, : 1 + n, :]
    xb = np.exp(xb - xb.max(axis=1, keepdims=True))
    xb = xb / xb.sum(axis=1, keepdims=True)
    zb = 1.0 / (1.0 + np.exp(-out[:, 1 + n :, :]))
    return np.concatenate([xb, zb], axis=1).reshape(z.shape[0], -1)


def _head_backward(grad_out: np.ndarray, output: np.ndarray, head: OutputHead) -> np.ndarray:
    """Gradient w.r.t. the last pre-activation given the gradient w.r.t. the
    head output."""
    if head.kind == "linear":
        return grad_out
    n, m = head.n_iab, head.n_chan
    g = grad_out.reshape(grad_out.shape[0], 2 * n + 1, m)
    out = output.reshape(output.shape[0], 2 * n + 1, m)
    s = out[:, : 1 + n, :]
    gx = g[:, : 1 + n, :]
    inner = (gx * s).sum(axis=1, keepdims=True)
    dzx = s * (gx - inner)                      # softmax Jacobian-vector product
    sig = out[:, 1 + n :, :]
    dzz = g[:, 1 + n :, :] * sig * (1.0 - sig)
    return np.concatenate([dzx, dzz], axis=1).reshape(grad_out.shape[0], -1)


def forward(params: MlpParams, x) -> tuple[np.ndarray, ForwardCache]:
    """Returns (output, cache). Accepts a single input vector or a batch of
    rows; the output matches the input's arrangement."""
    a = np.asarray(x, dtype=float)
    squeezed = a.ndim == 1
    if squeezed:
        a = a[None, :]
    if a.shape[1] != params.layer_sizes[0]:
        raise ValueError(f"input width {a.shape[1]} != {params.layer_sizes[0]}")
    activations = [a]
    pre_acts = []
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = a @ w + b
        pre_acts.append(z)
        a = np.maximum(z, 0.0) if i < last else _apply_head(z, params.head)
        activations.append(a)
    out = a[0] if squeezed else a
    return out, ForwardCache(activations, pre_acts, a, squeezed)


def backward(
    params: MlpParams,
    cache: ForwardCache,
    output_gradient,
) -> tuple[MlpGrads, np.ndarray]:
    """Exact gradients for all weights/biases plus the gradient w.r.t. the
    input vector. ``output_gradient`` is dLoss/dOutput, shaped like the
    forward output; batched rows accumulate."""
    g = np.asarray(output_gradient, dtype=float)
    if cache.squeezed:
        g = g[None, :]
    if g.shape != cache.output.shape:
        raise ValueError(f"output gradient shape {g.shape} != {cache.output.shape}")
    dz = _head_backward(g, cache.output, params.head)
    grad_w = [None] * len(params.weights)
    grad_b = [None] * len(params.biases)
    for i in range(len(params.weights) - 1, -1, -1):
        grad_w[i] = cache.activations[i].T @ dz
        grad_b[i] = dz.sum(axis=0)
        da = dz @ params.weights[i].T
        if i > 0:
            dz = da * (cache.pre_acts[i - 1] > 0)
    input_grad = da[0] if cache.squeezed else da
    return MlpGrads(grad_w, grad_b), input_grad


def clip_grads(grads: MlpGrads, max_norm: float) -> MlpGrads:
    """Scale gradients so their global norm is at most ``max_norm``
    (no-op when max_norm <= 0)."""
    if max_norm <= 0:
        return grads
    norm = grads.flat_norm()
    if norm > max_norm:
        scale = max_norm / norm
        for g in grads.weights + grads.biases:
            g *= scale
    return grads


def sgd_step(params: MlpParams, grads: MlpGrads, lr: float) -> MlpParams:
    """In-place p <- p - lr * g."""
    for w, gw in zip(params.weights, grads.weights):
        w -= lr * gw
    for b, gb in zip(params.biases, grads.biases):
        b -= lr * gb
    return params


class AdamState:
    """Adam moment accumulators for one parameter set (optional optimizer;
    plain SGD is the default everywhere)."""

    def __init__(self, params: MlpParams, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m_w = [np.zeros_like(w) for w in params.weights]
        self.v_w = [np.zeros_like(w) for w in params.weights]
        self.m_b = [np.zeros_like(b) for b in params.biases]
        self.v_b = [np.zeros_like(b) for b in params.biases]

    def step(self, params: MlpParams, grads: MlpGrads, lr: float) -> MlpParams:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        corr1 = 1.0 - b1**self.t
        corr2 = 1.0 - b2**self.t
        for w, g, m, v in zip(params.weights, grads.weights, self.m_w, self.v_w):
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g**2
            w -= lr * (m / corr1) / (np.sqrt(v / corr2) + self.eps)
        for b, g, m, v in zip(params.biases, grads.biases, self.m_b, self.v_b):
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g**2
            b -= lr * (m / corr1) / (np.sqrt(v / corr2) + self.eps)
        return params


def soft_update(target: MlpParams, train: MlpParams, tau: float) -> MlpParams:
    """In-place convex blend: target <- tau * train + (1 - tau) * target."""
    if target.layer_sizes != train.layer_sizes:
        raise ValueError("parameter shapes differ")
    for tw, w in zip(target.weights, train.weights):
        tw *= 1.0 - tau
        tw += tau * w
    for tb, b in zip(target.biases, train.biases):
        tb *= 1.0 - tau
        tb += tau * b
    return target


BLOB_VERSION = 1


def save_params(params: MlpParams, path) -> None:
    """Versioned checkpoint blob (npz: layer sizes, head, per-layer arrays)."""
    arrays = {
        "version": np.array(BLOB_VERSION),
        "layer_sizes": np.array(params.layer_sizes, dtype=np.int64),
        "head_kind": np.array(params.head.kind),
        "head_shape": np.array([params.head.n_iab, params.head.n_chan], dtype=np.int64),
    }
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        arrays[f"w{i}"] = w
        arrays[f"b{i}"] = b
    np.savez(path, **arrays)


def load_params(path) -> MlpParams:
    with np.load(path, allow_pickle=False) as blob:
        version = int(blob["version"])
        if version != BLOB_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        sizes = [int(s) for s in blob["layer_sizes"]]
        kind = str(blob["head_kind"])
        hn, hm = (int(v) for v in blob["head_shape"])
        head = OutputHead(kind, hn, hm)
        weights = [blob[f"w{i}"] for i in range(len(sizes) - 1)]
        biases = [blob[f"b{i}"] for i in range(len(sizes) - 1)]
    return MlpParams(sizes, weights, biases, head)
