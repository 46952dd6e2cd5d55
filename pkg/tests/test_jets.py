"""Finite-difference oracles for the jet engine and the parameter gradients.

The input-derivative oracle uses 5-point central stencils (h=1e-3), whose
truncation error ~h^4 and roundoff ~eps/h^2 both sit far below the 1e-5
relative tolerance being verified.  Parameter-space gradients use 3-point
central differences per coordinate.
"""

import numpy as np
import pytest

from sdpinn import network
from sdpinn.jets import eval_jet, jet_forward, loss_param_gradient
from sdpinn.network import MlpConfig, MlpParams, flatten_params, unflatten_params


def fd_input_derivs(params, x, h=1e-3):
    d1 = np.zeros(3)
    d2 = np.zeros(3)
    f0 = network.forward(params, x)
    for i in range(3):
        e = np.zeros(3)
        e[i] = 1.0
        f = lambda s: network.forward(params, x + s * e)
        d1[i] = (f(-2 * h) - 8 * f(-h) + 8 * f(h) - f(2 * h)) / (12 * h)
        d2[i] = (-f(-2 * h) + 16 * f(-h) - 30 * f0 + 16 * f(h) - f(2 * h)) / (12 * h * h)
    return d1, d2


def test_affine_single_layer():
    params = MlpParams([np.array([[2.0, 0.0, 3.0]])], [np.zeros(1)])
    jet = eval_jet(params, [1.0, 0.0, 1.0])
    assert jet.value == 5.0
    assert np.array_equal(jet.d1, [2.0, 0.0, 3.0])
    assert np.array_equal(jet.d2, [0.0, 0.0, 0.0])


def test_constant_net_zero_derivatives():
    cfg = network.TOY_CONFIG
    params = MlpParams(
        [np.zeros(s) for s in cfg.layer_shapes()],
        [np.zeros(s[0]) for s in cfg.layer_shapes()],
    )
    params.biases[-1][0] = 4.0
    jet = eval_jet(params, [0.3, 0.7, 0.1])
    assert jet.value == 4.0
    assert np.all(jet.d1 == 0.0) and np.all(jet.d2 == 0.0)


def test_single_tanh_neuron_at_origin():
    params = MlpParams(
        [np.array([[1.0, 0.0, 0.0]]), np.array([[1.0]])],
        [np.zeros(1), np.zeros(1)],
    )
    jet = eval_jet(params, [0.0, 0.0, 0.0])
    assert jet.value == 0.0
    assert jet.d1[0] == pytest.approx(1.0, abs=1e-15)  # tanh'(0) = 1
    assert jet.d2[0] == pytest.approx(0.0, abs=1e-15)  # tanh''(0) = 0


def _agree(a, b, rtol, atol=1e-8):
    return np.all(np.abs(a - b) <= atol + rtol * np.abs(b))


@pytest.mark.parametrize(
    "layer_count,width,cases",
    [(2, 4, 30), (3, 8, 30), (3, 16, 25), (5, 12, 25), (5, 200, 5)],
)
def test_jet_derivatives_match_finite_differences(layer_count, width, cases):
    rng = np.random.default_rng(layer_count * 100 + width)
    cfg = MlpConfig(layer_count=layer_count, hidden_width=width)
    for c in range(cases):
        params = network.init_params(cfg, seed=c)
        x = rng.uniform(-1.5, 1.5, size=3)
        jet = eval_jet(params, x)
        d1, d2 = fd_input_derivs(params, x)
        assert _agree(jet.d1, d1, 1e-5)
        assert _agree(jet.d2, d2, 1e-5)


def test_jets_with_input_standardization():
    rng = np.random.default_rng(17)
    cfg = MlpConfig(layer_count=3, hidden_width=10).standardized(
        (0.0, 0.0, 0.0), (2.9, 2.9, 1.97)
    )
    for c in range(10):
        params = network.init_params(cfg, seed=c)
        x = rng.uniform(0.0, 2.0, size=3)
        jet = eval_jet(params, x)
        d1, d2 = fd_input_derivs(params, x)
        assert _agree(jet.d1, d1, 1e-5)
        assert _agree(jet.d2, d2, 1e-5)


def test_jet_of_summed_nets_is_sum_of_jets():
    # realize f+g exactly as one block-diagonal net
    cfg = MlpConfig(layer_count=3, hidden_width=6)
    pf = network.init_params(cfg, 1)
    pg = network.init_params(cfg, 2)
    w1 = np.vstack([pf.weights[0], pg.weights[0]])
    w2 = np.block(
        [
            [pf.weights[1], np.zeros((6, 6))],
            [np.zeros((6, 6)), pg.weights[1]],
        ]
    )
    w3 = np.hstack([pf.weights[2], pg.weights[2]])
    psum = MlpParams(
        [w1, w2, w3],
        [
            np.concatenate([pf.biases[0], pg.biases[0]]),
            np.concatenate([pf.biases[1], pg.biases[1]]),
            pf.biases[2] + pg.biases[2],
        ],
    )
    x = np.array([0.4, -0.2, 0.9])
    jf, jg, js = eval_jet(pf, x), eval_jet(pg, x), eval_jet(psum, x)
    assert js.value == pytest.approx(jf.value + jg.value, rel=1e-12)
    assert np.allclose(js.d1, jf.d1 + jg.d1, rtol=1e-12, atol=1e-14)
    assert np.allclose(js.d2, jf.d2 + jg.d2, rtol=1e-12, atol=1e-14)


def test_output_bias_shifts_value_only():
    params = network.init_params(MlpConfig(layer_count=3, hidden_width=5), 3)
    x = np.array([0.2, 0.1, -0.4])
    before = eval_jet(params, x)
    params.biases[-1][0] += 2.5
    after = eval_jet(params, x)
    assert after.value == pytest.approx(before.value + 2.5, rel=1e-14)
    assert np.array_equal(after.d1, before.d1)
    assert np.array_equal(after.d2, before.d2)


# -- parameter gradients -------------------------------------------------

def fd_param_grad(cfg, params, inputs, loss_arrays, h=1e-4):
    flat = flatten_params(params)
    grad = np.zeros_like(flat)

    def loss_at(vec):
        p = unflatten_params(cfg, vec)
        p.input_shift = params.input_shift
        p.input_scale = params.input_scale
        value, d1, d2, _ = jet_forward(p, inputs)
        return loss_arrays(value, d1, d2)

    for i in range(flat.size):
        vp = flat.copy()
        vp[i] += h
        vm = flat.copy()
        vm[i] -= h
        grad[i] = (loss_at(vp) - loss_at(vm)) / (2 * h)
    return grad


LOSS_FAMILIES = {
    "value": (
        lambda jv: (jv.value**2).sum(),
        lambda value, d1, d2: (value**2).sum(),
    ),
    "first_time_derivative": (
        lambda jv: (jv.d1[:, 2] ** 2).sum(),
        lambda value, d1, d2: (d1[:, 2] ** 2).sum(),
    ),
    "second_space_derivative": (
        lambda jv: (jv.d2[:, 0] ** 2).sum(),
        lambda value, d1, d2: (d2[:, 0] ** 2).sum(),
    ),
    "mixed_total": (
        lambda jv: ((jv.d2[:, 2] - 2.0 * (jv.d2[:, 0] + jv.d2[:, 1])) ** 2).sum()
        + (jv.value**2).sum(),
        lambda value, d1, d2: ((d2[:, 2] - 2.0 * (d2[:, 0] + d2[:, 1])) ** 2).sum()
        + (value**2).sum(),
    ),
}


@pytest.mark.parametrize("family", sorted(LOSS_FAMILIES))
def test_loss_param_gradient_matches_finite_differences(family):
    expr, arrays = LOSS_FAMILIES[family]
    rng = np.random.default_rng(hash(family) % 2**32)
    cfg = MlpConfig(layer_count=3, hidden_width=4)
    for case in range(4):
        params = network.init_params(cfg, seed=case + 10)
        inputs = rng.uniform(-1.0, 1.0, size=(4, 3))
        grad, _ = loss_param_gradient(params, inputs, expr)
        fd = fd_param_grad(cfg, params, inputs, arrays)
        assert np.allclose(grad, fd, rtol=1e-4, atol=1e-8), family


def test_zero_net_squared_loss_has_zero_gradient():
    cfg = MlpConfig(layer_count=3, hidden_width=4)
    params = MlpParams(
        [np.zeros(s) for s in cfg.layer_shapes()],
        [np.zeros(s[0]) for s in cfg.layer_shapes()],
    )
    grad, loss = loss_param_gradient(
        params, np.array([[0.1, 0.2, 0.3]]), lambda jv: (jv.value**2).sum()
    )
    assert loss == 0.0
    assert np.all(grad == 0.0)


def test_loss_fn_must_return_scalar_var():
    params = network.init_params(network.TOY_CONFIG, 0)
    with pytest.raises(TypeError):
        loss_param_gradient(params, np.zeros((2, 3)), lambda jv: 3.0)
    with pytest.raises(ValueError):
        loss_param_gradient(params, np.zeros((2, 3)), lambda jv: jv.value * 1.0)


def test_batch_shape_validation():
    params = network.init_params(network.TOY_CONFIG, 0)
    with pytest.raises(ValueError):
        jet_forward(params, np.zeros((4, 2)))
