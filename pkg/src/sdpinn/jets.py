"""Exact input derivatives of the network and parameter gradients of losses.

Forward pass: a second-order jet (value, d/dx_i, d2/dx_i2 for the three
inputs x, y, t) is propagated through every layer.  Mixed input derivatives
are never formed; no loss needs them.  Backward pass: the per-layer arrays
cached during the forward sweep act as a recorded trace, and cotangents
supplied for any jet component are accumulated into gradients w.r.t. every
weight and bias -- including the third-order chains d/dtheta d2u/dx2.

All arithmetic is float64; third-order chains amplify rounding too much for
anything narrower.  Functions here are pure: concurrent evaluation over
disjoint batches is safe, and gradient accumulation across batch partitions
is a plain sum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .network import MlpParams, flatten
from .tape import Var, backward, grad_or_zeros


@dataclass
class Jet2:
    """Network output with first and pure second input derivatives.

    d1 = (u_x, u_y, u_t); d2 = (u_xx, u_yy, u_tt).
    """

    value: float
    d1: np.ndarray
    d2: np.ndarray


class JetTrace:
    """Arrays cached by the forward jet sweep, consumed by jet_backward."""

    __slots__ = ("params", "linear_inputs", "act_cache", "n")

    def __init__(self, params, linear_inputs, act_cache, n):
        self.params = params
        self.linear_inputs = linear_inputs  # per layer: (a, a1, a2)
        self.act_cache = act_cache          # per tanh layer: (s, p, z1, z2)
        self.n = n


def _as_batch(inputs: np.ndarray) -> np.ndarray:
    x = np.ascontiguousarray(inputs, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != 3:
        raise ValueError(f"expected inputs of shape (n, 3), got {x.shape}")
    return x


def jet_forward(
    params: MlpParams, inputs: np.ndarray, need_trace: bool = False
):
    """Batched jets. Returns (value (n,), d1 (n,3), d2 (n,3), trace|None)."""
    x = _as_batch(inputs)
    n = x.shape[0]
    if params.weights[0].shape[1] != 3:
        raise ValueError("jet propagation expects a 3-input network")

    # derivative seeds encode the fixed input standardization chain rule, so
    # everything downstream is w.r.t. raw physical coordinates
    a = params.standardize(x)
    a1 = np.broadcast_to(np.diag(1.0 / params.input_scale), (n, 3, 3)).copy()
    a2 = np.zeros((n, 3, 3))

    last = params.layer_count - 1
    linear_inputs, act_cache = [], []
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        if need_trace:
            linear_inputs.append((a, a1, a2))
        in_dim, out_dim = w.shape[1], w.shape[0]
        z = a @ w.T + b
        z1 = (a1.reshape(-1, in_dim) @ w.T).reshape(n, 3, out_dim)
        z2 = (a2.reshape(-1, in_dim) @ w.T).reshape(n, 3, out_dim)
        if l < last:
            s = np.tanh(z)
            p = 1.0 - s * s
            s1, s2 = _kernels.tanh_jet_fwd(s, p, z1, z2)
            if need_trace:
                act_cache.append((s, p, z1, z2))
            a, a1, a2 = s, s1, s2
        else:
            value = z[:, 0].copy()
            d1 = z1[:, :, 0].copy()
            d2 = z2[:, :, 0].copy()

    trace = JetTrace(params, linear_inputs, act_cache, n) if need_trace else None
    return value, d1, d2, trace


def jet_backward(
    trace: JetTrace,
    bar_value: np.ndarray | None,
    bar_d1: np.ndarray | None,
    bar_d2: np.ndarray | None,
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Accumulate d(loss)/d(weights, biases) from jet-output cotangents.

    Any cotangent may be None (treated as zero).  Returns per-layer
    (grad_w, grad_b) lists matching the parameter layout.
    """
    params = trace.params
    n = trace.n
    bz = np.zeros((n, 1)) if bar_value is None else bar_value.reshape(n, 1)
    bz1 = np.zeros((n, 3, 1)) if bar_d1 is None else bar_d1.reshape(n, 3, 1)
    bz2 = np.zeros((n, 3, 1)) if bar_d2 is None else bar_d2.reshape(n, 3, 1)

    grads_w = [None] * params.layer_count
    grads_b = [None] * params.layer_count
    for l in reversed(range(params.layer_count)):
        w = params.weights[l]
        out_dim, in_dim = w.shape
        a, a1, a2 = trace.linear_inputs[l]
        grads_w[l] = (
            bz.T @ a
            + bz1.reshape(-1, out_dim).T @ a1.reshape(-1, in_dim)
            + bz2.reshape(-1, out_dim).T @ a2.reshape(-1, in_dim)
        )
        grads_b[l] = bz.sum(axis=0)
        if l == 0:
            break
        ba = bz @ w
        ba1 = (bz1.reshape(-1, out_dim) @ w).reshape(n, 3, in_dim)
        ba2 = (bz2.reshape(-1, out_dim) @ w).reshape(n, 3, in_dim)
        s, p, z1, z2 = trace.act_cache[l - 1]
        bz, bz1, bz2 = _kernels.tanh_jet_bwd(s, p, z1, z2, ba, ba1, ba2)
    return grads_w, grads_b


# -- value-only path (data-fit loss needs no input derivatives) ---------------

class ValueTrace:
    __slots__ = ("params", "linear_inputs", "act_s", "n")

    def __init__(self, params, linear_inputs, act_s, n):
        self.params = params
        self.linear_inputs = linear_inputs
        self.act_s = act_s
        self.n = n


def value_forward(params: MlpParams, inputs: np.ndarray, need_trace: bool = False):
    x = np.asarray(inputs, dtype=np.float64)
    n = x.shape[0]
    a = params.standardize(x)
    last = params.layer_count - 1
    linear_inputs, act_s = [], []
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        if need_trace:
            linear_inputs.append(a)
        z = a @ w.T + b
        if l < last:
            a = np.tanh(z)
            if need_trace:
                act_s.append(a)
        else:
            out = z[:, 0].copy()
    trace = ValueTrace(params, linear_inputs, act_s, n) if need_trace else None
    return out, trace


def value_backward(trace: ValueTrace, bar_out: np.ndarray):
    """d(loss)/d(params) given cotangents on the scalar outputs."""
    params = trace.params
    bz = bar_out.reshape(trace.n, 1)
    grads_w = [None] * params.layer_count
    grads_b = [None] * params.layer_count
    for l in reversed(range(params.layer_count)):
        a = trace.linear_inputs[l]
        grads_w[l] = bz.T @ a
        grads_b[l] = bz.sum(axis=0)
        if l == 0:
            break
        ba = bz @ params.weights[l]
        s = trace.act_s[l - 1]
        bz = (1.0 - s * s) * ba
    return grads_w, grads_b


# -- public single-point / loss-graph API -------------------------------------

def eval_jet(params: MlpParams, xyz) -> Jet2:
    """Exact value and input derivatives of the network at one point."""
    value, d1, d2, _ = jet_forward(params, np.asarray(xyz, dtype=np.float64)[None, :])
    return Jet2(float(value[0]), d1[0], d2[0])


@dataclass
class JetVars:
    """Tape leaves exposing a batch of jets to a loss expression.

    value: (n,), d1/d2: (n, 3) with derivative order (x, y, t).
    """

    value: Var
    d1: Var
    d2: Var


def loss_param_gradient(params: MlpParams, inputs: np.ndarray, loss_fn):
    """Gradient w.r.t. all network parameters of a scalar loss expression.

    ``loss_fn`` receives a :class:`JetVars` over the batch and must build a
    scalar :class:`~sdpinn.tape.Var` from it (losses over values, first or
    second input derivatives all work).  Returns (flat gradient in layer
    order, loss value).
    """
    value, d1, d2, trace = jet_forward(params, inputs, need_trace=True)
    jv = JetVars(Var(value), Var(d1), Var(d2))
    loss = loss_fn(jv)
    if not isinstance(loss, Var):
        raise TypeError("loss_fn must return a tape Var")
    if loss.value.size != 1:
        raise ValueError("loss expression must be scalar")
    backward(loss)
    grads_w, grads_b = jet_backward(
        trace,
        grad_or_zeros(jv.value),
        grad_or_zeros(jv.d1),
        grad_or_zeros(jv.d2),
    )
    return flatten(grads_w, grads_b), float(loss.value)
