"""Minimal neural toolkit: MLPs with hand-rolled backprop, three
optimizers, orthogonal initialization, and a flat binary checkpoint.

Just enough machinery for the desk-scale agents; no autodiff, no
convolutions.  Everything is numpy and deterministic under its seed.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("identity", "tanh", "relu")


@dataclass
class Mlp:
    sizes: list[int]
    activations: list[str]  # one per layer transition
    weights: list[np.ndarray] = field(default_factory=list)  # (out, in)
    biases: list[np.ndarray] = field(default_factory=list)

    @property
    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out


def orthogonal_init(rows: int, cols: int, gain: float, seed: int) -> np.ndarray:
    """Gaussian draw orthonormalized by (twice-applied) Gram-Schmidt over
    the smaller dimension, then scaled by `gain`."""
    rng = np.random.default_rng(seed)
    mat = rng.standard_normal((rows, cols))
    transposed = rows > cols
    if transposed:
        mat = mat.T
    basis = np.empty_like(mat)
    for i in range(mat.shape[0]):
        v = mat[i].copy()
        for _ in range(2):  # re-orthogonalize for numerical headroom
            for j in range(i):
                v -= (basis[j] @ v) * basis[j]
        v /= np.linalg.norm(v)
        basis[i] = v
    if transposed:
        basis = basis.T
    return gain * basis


def init_mlp(
    sizes: list[int],
    activations: list[str] | str = "tanh",
    seed: int = 0,
    scheme: str = "gauss",
    gains: list[float] | None = None,
) -> Mlp:
    """Build a network.  `scheme` is "gauss" (N(0, 1/sqrt(fan_in))) or
    "orthogonal" (per-layer gains, default sqrt(2))."""
    n_layers = len(sizes) - 1
    if isinstance(activations, str):
        activations = [activations] * (n_layers - 1) + ["identity"]
    if len(activations) != n_layers:
        raise ValueError("one activation per layer transition required")
    for act in activations:
        if act not in ACTIVATIONS:
            raise ValueError(f"unknown activation {act!r}")
    net = Mlp(sizes=list(sizes), activations=list(activations))
    rng = np.random.default_rng(seed)
    for i in range(n_layers):
        fan_in, fan_out = sizes[i], sizes[i + 1]
        if scheme == "orthogonal":
            gain = gains[i] if gains else np.sqrt(2.0)
            w = orthogonal_init(fan_out, fan_in, gain, seed=int(rng.integers(2**31)))
        elif scheme == "gauss":
            w = rng.standard_normal((fan_out, fan_in)) / np.sqrt(fan_in)
        else:
            raise ValueError(f"unknown init scheme {scheme!r}")
        net.weights.append(w)
        net.biases.append(np.zeros(fan_out))
    return net


def _apply(act: str, z: np.ndarray) -> np.ndarray:
    if act == "tanh":
        return np.tanh(z)
    if act == "relu":
        return np.maximum(z, 0.0)
    return z


def _derivative(act: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    if act == "tanh":
        return 1.0 - a * a
    if act == "relu":
        return (z > 0.0).astype(z.dtype)
    return np.ones_like(z)


def forward(net: Mlp, x: np.ndarray) -> tuple[np.ndarray, dict]:
    """Run the network; returns (output, cache for backward).

    Accepts a single vector or a (batch, dim) matrix."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    a = x[None, :] if single else x
    if a.shape[1] != net.sizes[0]:
        raise ValueError(f"input dim {a.shape[1]} != layer size {net.sizes[0]}")
    inputs = [a]
    preacts = []
    for w, b, act in zip(net.weights, net.biases, net.activations):
        z = a @ w.T + b
        a = _apply(act, z)
        preacts.append(z)
        inputs.append(a)
    cache = {"inputs": inputs, "preacts": preacts, "single": single}
    return (a[0] if single else a), cache


def backward(
    net: Mlp, cache: dict, output_gradient: np.ndarray
) -> tuple[list[tuple[np.ndarray, np.ndarray]], np.ndarray]:
    """Backpropagate a loss gradient through the cached forward pass.

    Returns (per-layer (dW, db) list, gradient w.r.t. the input)."""
    dy = np.asarray(output_gradient, dtype=np.float64)
    if cache["single"]:
        dy = dy[None, :]
    inputs, preacts = cache["inputs"], cache["preacts"]
    if dy.shape != inputs[-1].shape:
        raise ValueError("output_gradient shape does not match forward output")
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(net.weights)
    delta = dy
    for layer in range(len(net.weights) - 1, -1, -1):
        dz = delta * _derivative(net.activations[layer], preacts[layer], inputs[layer + 1])
        grads[layer] = (dz.T @ inputs[layer], dz.sum(axis=0))
        delta = dz @ net.weights[layer]
    dx = delta[0] if cache["single"] else delta
    return grads, dx


def flat_grads(grads: list[tuple[np.ndarray, np.ndarray]]) -> list[np.ndarray]:
    """Flatten backward() output to match Mlp.params ordering."""
    out = []
    for dw, db in grads:
        out.append(dw)
        out.append(db)
    return out


@dataclass
class OptimizerState:
    kind: str  # sgd | rmsprop | adam
    lr: float
    eps: float = 1e-8
    beta1: float = 0.9
    beta2: float = 0.999
    rho: float = 0.99  # rmsprop decay
    step: int = 0
    m: list[np.ndarray] | None = None  # first moments (adam)
    v: list[np.ndarray] | None = None  # second moments (adam, rmsprop)


def make_optimizer(kind: str, lr: float, params: list[np.ndarray], **kwargs) -> OptimizerState:
    if kind not in ("sgd", "rmsprop", "adam"):
        raise ValueError(f"unknown optimizer {kind!r}")
    opt = OptimizerState(kind=kind, lr=lr, **kwargs)
    if kind in ("rmsprop", "adam"):
        opt.v = [np.zeros_like(p) for p in params]
    if kind == "adam":
        opt.m = [np.zeros_like(p) for p in params]
    return opt


def optimizer_step(
    params: list[np.ndarray],
    grads: list[np.ndarray],
    opt: OptimizerState,
) -> tuple[list[np.ndarray], OptimizerState]:
    """Apply one update in place; returns the same lists for convenience."""
    if len(params) != len(grads):
        raise ValueError("params/grads length mismatch")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise ValueError(f"shape mismatch {p.shape} vs {g.shape}")
    opt.step += 1
    if opt.kind == "sgd":
        for p, g in zip(params, grads):
            p -= opt.lr * g
    elif opt.kind == "rmsprop":
        for p, g, v in zip(params, grads, opt.v):
            v *= opt.rho
            v += (1.0 - opt.rho) * g * g
            p -= opt.lr * g / (np.sqrt(v) + opt.eps)
    else:  # adam
        b1c = 1.0 - opt.beta1**opt.step
        b2c = 1.0 - opt.beta2**opt.step
        for p, g, m, v in zip(params, grads, opt.m, opt.v):
            m *= opt.beta1
            m += (1.0 - opt.beta1) * g
            v *= opt.beta2
            v += (1.0 - opt.beta2) * g * g
            p -= opt.lr * (m / b1c) / (np.sqrt(v / b2c) + opt.eps)
    return params, opt


# --- checkpoint format -------------------------------------------------------
#
# magic "MLP1", uint32 layer count N, N+1 uint32 sizes, N uint8 activation
# codes, then per layer: weight matrix row-major then bias, little-endian
# float32.

_MAGIC = b"MLP1"
_ACT_CODE = {"identity": 0, "tanh": 1, "relu": 2}
_CODE_ACT = {v: k for k, v in _ACT_CODE.items()}


def save_mlp(net: Mlp, path: str):
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(net.weights)))
        fh.write(struct.pack(f"<{len(net.sizes)}I", *net.sizes))
        fh.write(bytes(_ACT_CODE[a] for a in net.activations))
        for w, b in zip(net.weights, net.biases):
            fh.write(w.astype("<f4").tobytes())
            fh.write(b.astype("<f4").tobytes())


def load_mlp(path: str) -> Mlp:
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError("not an MLP checkpoint")
        (n_layers,) = struct.unpack("<I", fh.read(4))
        sizes = list(struct.unpack(f"<{n_layers + 1}I", fh.read(4 * (n_layers + 1))))
        activations = [_CODE_ACT[c] for c in fh.read(n_layers)]
        net = Mlp(sizes=sizes, activations=activations)
        for i in range(n_layers):
            fan_in, fan_out = sizes[i], sizes[i + 1]
            w = np.frombuffer(fh.read(4 * fan_in * fan_out), dtype="<f4")
            net.weights.append(w.reshape(fan_out, fan_in).astype(np.float64))
            b = np.frombuffer(fh.read(4 * fan_out), dtype="<f4")
            net.biases.append(b.astype(np.float64))
    return net
