"""Fully connected tanh network mapping (x, y, t) to a predicted field sample.

Default architecture: 5 layers, hidden width 200, tanh on all but the last
layer, He-initialized weights and zero biases.  Coordinates are fed in
physical units (meters, seconds); no input normalization is applied, so the
derivative chain rules in :mod:`sdpinn.jets` need no rescaling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MlpConfig:
    """Architecture description; activation is tanh everywhere but the end.

    ``input_shift``/``input_scale`` standardize the raw physical coordinates
    before the first layer (the tanh stack is badly conditioned on the
    positive-quadrant physical box).  They are fixed constants of the
    architecture, not trained; derivatives reported by the jet engine are
    always w.r.t. the raw physical inputs via the fixed chain rule.
    """

    layer_count: int = 5
    hidden_width: int = 200
    input_dim: int = 3
    output_dim: int = 1
    input_shift: tuple[float, float, float] = (0.0, 0.0, 0.0)
    input_scale: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if self.layer_count < 2:
            raise ValueError("layer_count must be >= 2")
        if self.hidden_width < 1:
            raise ValueError("hidden_width must be >= 1")
        if any(s <= 0 for s in self.input_scale):
            raise ValueError("input_scale entries must be positive")

    def standardized(self, lo, hi) -> "MlpConfig":
        """Config mapping the coordinate box [lo, hi] onto [-1, 1]^3."""
        lo = np.asarray(lo, dtype=np.float64)
        hi = np.asarray(hi, dtype=np.float64)
        scale = np.maximum((hi - lo) / 2.0, 1e-12)
        shift = (lo + hi) / 2.0
        return MlpConfig(
            self.layer_count,
            self.hidden_width,
            self.input_dim,
            self.output_dim,
            tuple(float(c) for c in shift),
            tuple(float(s) for s in scale),
        )

    def layer_shapes(self) -> list[tuple[int, int]]:
        """(out, in) weight shapes, first to last layer."""
        dims = (
            [self.input_dim]
            + [self.hidden_width] * (self.layer_count - 1)
            + [self.output_dim]
        )
        return [(dims[i + 1], dims[i]) for i in range(self.layer_count)]

    def param_count(self) -> int:
        return sum(o * i + o for o, i in self.layer_shapes())


#: small preset used throughout the test-suite
TOY_CONFIG = MlpConfig(layer_count=3, hidden_width=16)


@dataclass
class MlpParams:
    """Per-layer weights (out, in) and biases (out,), plus the fixed input
    standardization constants inherited from the config."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    input_shift: np.ndarray = None
    input_scale: np.ndarray = None

    def __post_init__(self):
        in_dim = self.weights[0].shape[1]
        if self.input_shift is None:
            self.input_shift = np.zeros(in_dim)
        if self.input_scale is None:
            self.input_scale = np.ones(in_dim)
        self.input_shift = np.asarray(self.input_shift, dtype=np.float64)
        self.input_scale = np.asarray(self.input_scale, dtype=np.float64)

    @property
    def layer_count(self) -> int:
        return len(self.weights)

    def standardize(self, x: np.ndarray) -> np.ndarray:
        return (x - self.input_shift) / self.input_scale

    def copy(self) -> "MlpParams":
        return MlpParams(
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.input_shift.copy(),
            self.input_scale.copy(),
        )

    def check_config(self, config: MlpConfig) -> None:
        shapes = [w.shape for w in self.weights]
        if shapes != config.layer_shapes():
            raise ValueError(
                f"parameter shapes {shapes} do not match config {config.layer_shapes()}"
            )
        for w, b in zip(self.weights, self.biases):
            if b.shape != (w.shape[0],):
                raise ValueError("bias shape mismatch")
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise ValueError("non-finite parameter entries")


def init_params(config: MlpConfig, seed: int) -> MlpParams:
    """He-initialized weights (std sqrt(2/fan_in)), zero biases."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for out_dim, in_dim in config.layer_shapes():
        std = np.sqrt(2.0 / in_dim)
        weights.append(rng.normal(0.0, std, size=(out_dim, in_dim)))
        biases.append(np.zeros(out_dim))
    return MlpParams(
        weights,
        biases,
        np.asarray(config.input_shift, dtype=np.float64),
        np.asarray(config.input_scale, dtype=np.float64),
    )


def forward_batch(params: MlpParams, inputs: np.ndarray) -> np.ndarray:
    """Evaluate the network on inputs of shape (n, input_dim); returns (n,)."""
    a = params.standardize(np.asarray(inputs, dtype=np.float64))
    last = params.layer_count - 1
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = a @ w.T + b
        a = np.tanh(z) if l < last else z
    return a[:, 0]


def forward(params: MlpParams, xyz) -> float:
    return float(forward_batch(params, np.asarray(xyz, dtype=np.float64)[None, :])[0])


# -- flat parameter vector --------------------------------------------------
# Ordering contract: layer 1 weights row-major, layer 1 biases, layer 2
# weights, ... (shared by gradients, the Adam state and the checkpoint file).

def flatten(arrays_w: list[np.ndarray], arrays_b: list[np.ndarray]) -> np.ndarray:
    parts = []
    for w, b in zip(arrays_w, arrays_b):
        parts.append(w.ravel())
        parts.append(b.ravel())
    return np.concatenate(parts)


def flatten_params(params: MlpParams) -> np.ndarray:
    return flatten(params.weights, params.biases)


def unflatten_params(config: MlpConfig, vec: np.ndarray) -> MlpParams:
    if vec.shape != (config.param_count(),):
        raise ValueError(
            f"expected flat vector of length {config.param_count()}, got {vec.shape}"
        )
    weights, biases, pos = [], [], 0
    for out_dim, in_dim in config.layer_shapes():
        n = out_dim * in_dim
        weights.append(vec[pos : pos + n].reshape(out_dim, in_dim).copy())
        pos += n
        biases.append(vec[pos : pos + out_dim].copy())
        pos += out_dim
    return MlpParams(weights, biases)
