"""Minimal dense-network substrate: flat parameter vectors, MLP forward and
reverse passes, Adam, and a finite-difference gradient oracle for tests."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

ACTIVATIONS = ("relu", "tanh", "identity")


def _act(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    return z


def _act_deriv(name: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    # derivative w.r.t. the pre-activation z; a is act(z)
    if name == "relu":
        return (z > 0.0).astype(z.dtype)
    if name == "tanh":
        return 1.0 - a * a
    return np.ones_like(z)


@dataclass(frozen=True)
class MlpSpec:
    """Layer shapes plus the hidden activation and an init seed.

    layer_sizes runs (input, hidden..., output); the activation applies to
    hidden layers only, the output layer is always linear.
    """

    layer_sizes: tuple[int, ...]
    activation: str = "relu"
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "layer_sizes", tuple(int(n) for n in self.layer_sizes))
        if len(self.layer_sizes) < 2:
            raise ValueError("layer_sizes needs at least input and output entries")
        if any(n < 1 for n in self.layer_sizes):
            raise ValueError(f"layer sizes must be >= 1, got {self.layer_sizes}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def in_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def out_dim(self) -> int:
        return self.layer_sizes[-1]

    @property
    def n_layers(self) -> int:
        return len(self.layer_sizes) - 1

    def param_count(self) -> int:
        sizes = self.layer_sizes
        return sum(sizes[i] * sizes[i + 1] + sizes[i + 1] for i in range(self.n_layers))


@dataclass(frozen=True)
class LayerSlot:
    """Offsets of one dense layer inside a flat parameter vector."""

    n_in: int
    n_out: int
    w_off: int
    b_off: int

    @property
    def end(self) -> int:
        return self.b_off + self.n_out


def build_layout(layer_dims: Sequence[tuple[int, int]], offset: int = 0) -> tuple[LayerSlot, ...]:
    slots = []
    off = offset
    for n_in, n_out in layer_dims:
        w_off = off
        b_off = w_off + n_in * n_out
        slots.append(LayerSlot(n_in, n_out, w_off, b_off))
        off = b_off + n_out
    return tuple(slots)


def spec_layout(spec: MlpSpec, offset: int = 0) -> tuple[LayerSlot, ...]:
    sizes = spec.layer_sizes
    return build_layout([(sizes[i], sizes[i + 1]) for i in range(spec.n_layers)], offset)


@dataclass
class ParamVector:
    """Flat float64 parameter storage with a (layer -> slice) offset map."""

    values: np.ndarray
    layout: tuple[LayerSlot, ...]

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64).ravel()
        expected = self.layout[-1].end if self.layout else 0
        if self.values.size != expected:
            raise ValueError(
                f"parameter vector has {self.values.size} entries, layout implies {expected}"
            )

    def __len__(self) -> int:
        return int(self.values.size)

    def weight(self, layer: int) -> np.ndarray:
        s = self.layout[layer]
        return self.values[s.w_off : s.b_off].reshape(s.n_in, s.n_out)

    def bias(self, layer: int) -> np.ndarray:
        s = self.layout[layer]
        return self.values[s.b_off : s.end]

    def copy(self) -> "ParamVector":
        return ParamVector(self.values.copy(), self.layout)


def unflatten(params: ParamVector) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split the flat vector into per-layer (W, b) copies."""
    return [(params.weight(i).copy(), params.bias(i).copy()) for i in range(len(params.layout))]


def flatten(arrays: Sequence[tuple[np.ndarray, np.ndarray]], layout: tuple[LayerSlot, ...]) -> ParamVector:
    """Inverse of unflatten; round-trip is the identity."""
    values = np.empty(layout[-1].end, dtype=np.float64)
    for slot, (w, b) in zip(layout, arrays):
        if w.shape != (slot.n_in, slot.n_out) or b.shape != (slot.n_out,):
            raise ValueError(f"array shapes {w.shape}/{b.shape} do not match layout slot {slot}")
        values[slot.w_off : slot.b_off] = w.ravel()
        values[slot.b_off : slot.end] = b
    return ParamVector(values, layout)


def init_params(spec: MlpSpec) -> ParamVector:
    """Uniform fan-in-scaled weights, zero biases, deterministic per seed."""
    rng = np.random.default_rng(spec.seed)
    layout = spec_layout(spec)
    values = np.zeros(spec.param_count(), dtype=np.float64)
    for slot in layout:
        bound = 1.0 / np.sqrt(slot.n_in)
        values[slot.w_off : slot.b_off] = rng.uniform(-bound, bound, size=slot.n_in * slot.n_out)
    return ParamVector(values, layout)


def zeros_params(spec: MlpSpec) -> ParamVector:
    return ParamVector(np.zeros(spec.param_count(), dtype=np.float64), spec_layout(spec))


def mlp_forward_batch(spec: MlpSpec, params: ParamVector, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != spec.in_dim:
        raise ValueError(f"expected input of shape (N, {spec.in_dim}), got {x.shape}")
    a = x
    last = spec.n_layers - 1
    for i in range(spec.n_layers):
        z = a @ params.weight(i) + params.bias(i)
        a = z if i == last else _act(spec.activation, z)
    return a


def mlp_forward(spec: MlpSpec, params: ParamVector, x: np.ndarray) -> np.ndarray:
    """Single-input forward pass; pure and deterministic."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != spec.in_dim:
        raise ValueError(f"expected input of length {spec.in_dim}, got shape {x.shape}")
    return mlp_forward_batch(spec, params, x[None, :])[0]


def mlp_forward_cached(
    spec: MlpSpec, params: ParamVector, x: np.ndarray
) -> tuple[np.ndarray, list[tuple[np.ndarray, np.ndarray]]]:
    """Batch forward keeping (input, pre-activation) pairs per layer for backprop."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2 or a.shape[1] != spec.in_dim:
        raise ValueError(f"expected input of shape (N, {spec.in_dim}), got {a.shape}")
    cache = []
    last = spec.n_layers - 1
    for i in range(spec.n_layers):
        z = a @ params.weight(i) + params.bias(i)
        cache.append((a, z))
        a = z if i == last else _act(spec.activation, z)
    return a, cache


def mlp_backward(
    spec: MlpSpec,
    params: ParamVector,
    cache: list[tuple[np.ndarray, np.ndarray]],
    grad_out: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Backprop grad_out (N, out_dim) through the cached forward pass.

    Returns (flat parameter gradient, gradient w.r.t. the input batch).
    """
    grad = np.zeros(len(params), dtype=np.float64)
    delta = np.asarray(grad_out, dtype=np.float64)
    last = spec.n_layers - 1
    for i in range(last, -1, -1):
        a_in, z = cache[i]
        if i != last:
            act = _act(spec.activation, z)
            delta = delta * _act_deriv(spec.activation, z, act)
        slot = params.layout[i]
        grad[slot.w_off : slot.b_off] = (a_in.T @ delta).ravel()
        grad[slot.b_off : slot.end] = delta.sum(axis=0)
        delta = delta @ params.weight(i).T
    return grad, delta


@dataclass
class AdamState:
    """Standard Adam moments; step counter t increments once per adam_step."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def init_adam(n_params: int, lr: float) -> AdamState:
    return AdamState(
        m=np.zeros(n_params, dtype=np.float64),
        v=np.zeros(n_params, dtype=np.float64),
        lr=float(lr),
    )


def adam_step(state: AdamState, params: ParamVector, grads: np.ndarray) -> tuple[ParamVector, AdamState]:
    """One bias-corrected Adam update; returns new params and state."""
    grads = np.asarray(grads, dtype=np.float64).ravel()
    if grads.size != len(params):
        raise ValueError(f"gradient length {grads.size} != parameter length {len(params)}")
    finite = np.isfinite(grads)
    if not finite.all():
        idx = int(np.argmin(finite))
        raise ValueError(f"non-finite gradient entry at index {idx}: {grads[idx]}")
    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    v = state.beta2 * state.v + (1.0 - state.beta2) * grads * grads
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    values = params.values - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    new_state = replace(state, m=m, v=v, t=t)
    return ParamVector(values, params.layout), new_state


def apply_weight_decay(params: ParamVector, rate: float) -> ParamVector:
    """Decoupled weight decay: shrink all parameters by the given rate."""
    return ParamVector(params.values * (1.0 - rate), params.layout)


def finite_diff_grad(
    loss: Callable[[ParamVector], float], params: ParamVector, h: float = 1e-5
) -> np.ndarray:
    """Central-difference gradient estimate, one coordinate at a time."""
    if h <= 0.0:
        raise ValueError("step size h must be positive")
    base = params.values
    grad = np.empty(base.size, dtype=np.float64)
    work = base.copy()
    for i in range(base.size):
        work[i] = base[i] + h
        up = float(loss(ParamVector(work, params.layout)))
        work[i] = base[i] - h
        down = float(loss(ParamVector(work, params.layout)))
        work[i] = base[i]
        if not (np.isfinite(up) and np.isfinite(down)):
            raise ValueError(f"non-finite loss evaluation while perturbing coordinate {i}")
        grad[i] = (up - down) / (2.0 * h)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Max per-coordinate relative difference, guarded against tiny denominators."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom))
