"""Joint Adam optimization of the network and all coefficient factor pairs.

One "epoch" is one optimizer step over one sampled batch: a random subset of
measurement samples feeds the data loss and a random subset of time frames
feeds the equation-residual loss (every location is always swept).  A single
learning rate drives the network weights and the factor entries together.

All randomness flows from the config seed, so a rerun with identical
configuration reproduces the result bit for bit in a fixed-thread run.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .jets import jet_backward, jet_forward, value_backward, value_forward
from .losses import (
    CollocationSet,
    LossWeights,
    equation_residual_sq,
    given_mismatch_sq,
    loss_f,
    loss_si,
    loss_u,
    measurement_residual_sq,
    sign_penalty,
    stored_given_targets,
    total_loss,
)
from .lowrank import (
    CoefficientSet,
    CoefficientTerm,
    FactorPair,
    GivenCoefficients,
    TermDef,
    compose,
    init_factors,
)
from .network import MlpConfig, MlpParams, flatten, init_params
from .tape import Var, backward, grad_or_zeros
from .wavesim import SIGN_VALUES, CoefficientField, Mask, WaveField

LABEL_UNITS = {"c2": "m^2/s^2", "alpha": "1/s"}


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 4000
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weights: LossWeights = field(default_factory=LossWeights)
    network: MlpConfig = field(default_factory=MlpConfig)
    frames_per_step: int | None = 8
    data_batch: int | None = 4096
    residual_warmup: int = 0
    standardize_inputs: bool = True
    history_interval: int = 100
    divergence_factor: float = 1e6
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("betas must be in [0, 1)")


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0


def adam_step(
    values: np.ndarray,
    grads: np.ndarray,
    state: AdamState,
    learning_rate: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """Standard bias-corrected Adam update, in place on ``values``."""
    if not np.isfinite(grads).all():
        raise ValueError("non-finite gradient")
    state.step += 1
    _kernels.adam_update(
        values, grads, state.m, state.v, state.step, learning_rate, beta1, beta2, eps
    )


@dataclass
class TrainingData:
    """A measurement cube plus everything known about the coefficients."""

    field: WaveField
    meas_mask: Mask
    given: GivenCoefficients
    terms: tuple[TermDef, ...]

    def __post_init__(self):
        if len(self.meas_mask) == 0:
            raise ValueError("no measurement locations")
        if len(self.given.mask) == 0:
            raise ValueError(
                "given coefficients are required to pin the absolute scale"
            )
        for term in self.terms:
            if term.label not in self.given.values:
                raise ValueError(f"no given values for term {term.label!r}")


@dataclass
class TrainState:
    params: MlpParams
    coeffs: CoefficientSet
    adam: AdamState
    epoch: int
    history: list[tuple]          # per-epoch batch sums (epoch, u, f, g, si, total)
    full_history: list[tuple]     # periodic full-dataset evaluations, same columns
    flat: np.ndarray


HISTORY_COLUMNS = ("epoch", "loss_u", "loss_f", "loss_g", "loss_si", "total")


def effective_network(data: TrainingData, config: TrainConfig) -> MlpConfig:
    """Network config with input standardization fitted to the data box."""
    net = config.network
    untouched = all(s == 1.0 for s in net.input_scale) and all(
        c == 0.0 for c in net.input_shift
    )
    if not (config.standardize_inputs and untouched):
        return net
    grid = data.field.grid
    hi = ((grid.M1 - 1) * grid.dx, (grid.M2 - 1) * grid.dy, (grid.T - 1) * grid.dt)
    return net.standardized((0.0, 0.0, 0.0), hi)


def _build_views(flat: np.ndarray, config: MlpConfig, term_ranks, shape):
    """Slice the master vector into live parameter views (no copies)."""
    weights, biases, pos = [], [], 0
    for out_dim, in_dim in config.layer_shapes():
        weights.append(flat[pos : pos + out_dim * in_dim].reshape(out_dim, in_dim))
        pos += out_dim * in_dim
        biases.append(flat[pos : pos + out_dim])
        pos += out_dim
    params = MlpParams(
        weights,
        biases,
        np.asarray(config.input_shift, dtype=np.float64),
        np.asarray(config.input_scale, dtype=np.float64),
    )
    pairs = []
    m1, m2 = shape
    for r in term_ranks:
        u = flat[pos : pos + m1 * r].reshape(m1, r)
        pos += m1 * r
        v = flat[pos : pos + m2 * r].reshape(m2, r)
        pos += m2 * r
        pairs.append(FactorPair(u, v))
    assert pos == flat.size
    return params, pairs


def initial_flat(data: TrainingData, config: TrainConfig, net_config: MlpConfig | None = None) -> np.ndarray:
    """Freshly initialized master vector: network weights then factor pairs."""
    ss = np.random.SeedSequence(config.seed)
    seeds = ss.spawn(1 + len(data.terms))
    params = init_params(net_config or effective_network(data, config), seeds[0])
    parts = [np.asarray(flatten(params.weights, params.biases))]
    for term, s in zip(data.terms, seeds[1:]):
        pair = init_factors(data.field.grid, term.rank, s)
        parts.append(pair.u.ravel())
        parts.append(pair.v.ravel())
    return np.concatenate(parts)


def _step_gradient(
    params,
    coeff_pairs,
    terms,
    batch_coords,
    batch_values,
    jet_coords,
    frame_count,
    colloc,
    given_targets,
    weights: LossWeights,
    with_residual: bool = True,
):
    """One fused forward/backward pass; returns (flat gradient, loss parts).

    During the residual warmup phase ``with_residual`` is off and the jet
    sweep is skipped entirely (loss_f recorded as 0).
    """
    pred, trace_u = value_forward(params, batch_coords, need_trace=True)
    pred_var = Var(pred)

    u_vars = [Var(p.u) for p in coeff_pairs]
    v_vars = [Var(p.v) for p in coeff_pairs]
    lam_mats = [uv @ vv.T for uv, vv in zip(u_vars, v_vars)]

    e_u = measurement_residual_sq(pred_var, batch_values)
    e_g = given_mismatch_sq(lam_mats, given_targets)
    e_si = sign_penalty(lam_mats, [t.sign for t in terms])
    total = e_u + weights.w_g * e_g + weights.w_si * e_si

    if with_residual:
        value, d1, d2, trace_f = jet_forward(params, jet_coords, need_trace=True)
        m = colloc.location_count
        utt = Var(d2[:, 2].reshape(frame_count, m))
        ut = Var(d1[:, 2].reshape(frame_count, m))
        lap = Var((d2[:, 0] + d2[:, 1]).reshape(frame_count, m))
        lam_flat = [lm[colloc.location_rows, colloc.location_cols] for lm in lam_mats]
        e_f = equation_residual_sq(
            utt, ut, lap, [(t.kind, lf) for t, lf in zip(terms, lam_flat)]
        )
        total = total + weights.w_f * e_f
    backward(total)

    gw, gb = value_backward(trace_u, grad_or_zeros(pred_var))
    if with_residual:
        n_jet = jet_coords.shape[0]
        bar_d1 = np.zeros((n_jet, 3))
        bar_d1[:, 2] = grad_or_zeros(ut).ravel()
        bar_d2 = np.empty((n_jet, 3))
        bar_d2[:, 0] = bar_d2[:, 1] = grad_or_zeros(lap).ravel()
        bar_d2[:, 2] = grad_or_zeros(utt).ravel()
        gw2, gb2 = jet_backward(trace_f, None, bar_d1, bar_d2)
        gw = [a + b for a, b in zip(gw, gw2)]
        gb = [a + b for a, b in zip(gb, gb2)]

    parts = [np.asarray(flatten(gw, gb))]
    for uv, vv in zip(u_vars, v_vars):
        parts.append(grad_or_zeros(uv).ravel())
        parts.append(grad_or_zeros(vv).ravel())
    lf = float(e_f.value) if with_residual else 0.0
    loss_parts = (float(e_u.value), lf, float(e_g.value), float(e_si.value))
    return np.concatenate(parts), loss_parts


def _full_losses(params, coeffs, data, pool_coords, pool_values, given, weights, grid):
    lu = loss_u(params, np.column_stack([pool_coords, pool_values]))
    lf = loss_f(params, coeffs, CollocationSet.full(grid), grid)
    lg = float(
        given_mismatch_sq(
            [compose(t.factors).values for t in coeffs],
            stored_given_targets(coeffs, given),
        )
    )
    lsi = loss_si(coeffs)
    return lu, lf, lg, lsi, total_loss((lu, lf, lg, lsi), weights)


def recovered_fields(coeffs: CoefficientSet) -> dict[str, CoefficientField]:
    """Dense physical-orientation estimates (attenuation reported positive)."""
    out = {}
    for term in coeffs:
        stored = compose(term.factors).values
        physical = SIGN_VALUES[term.spec.sign] * stored
        out[term.spec.label] = CoefficientField(
            physical, units=LABEL_UNITS.get(term.spec.label, "")
        )
    return out


def train(
    data: TrainingData,
    config: TrainConfig,
    monitor=None,
    monitor_interval: int = 0,
) -> tuple[TrainState, dict[str, CoefficientField]]:
    """Run the epoch loop; returns the final state and recovered fields.

    ``monitor(state)`` is called every ``monitor_interval`` epochs when both
    are set (diagnostics only; it must not mutate the state).
    """
    grid = data.field.grid
    net_config = effective_network(data, config)
    flat = initial_flat(data, config, net_config)
    params, pairs = _build_views(flat, net_config, [t.rank for t in data.terms], (grid.M1, grid.M2))
    coeffs = CoefficientSet([CoefficientTerm(t, p) for t, p in zip(data.terms, pairs)])

    # measurement pool: every (masked location, time step) pair
    n_loc = len(data.meas_mask)
    xy = np.column_stack(
        [data.meas_mask.rows * grid.dx, data.meas_mask.cols * grid.dy]
    )
    pool_coords = np.empty((n_loc * grid.T, 3))
    pool_coords[:, :2] = np.tile(xy, (grid.T, 1))
    pool_coords[:, 2] = np.repeat(grid.times(), n_loc)
    pool_values = (
        data.field.data[data.meas_mask.rows, data.meas_mask.cols, :].T.ravel()
    )

    colloc = CollocationSet.full(grid, config.frames_per_step)
    given_targets = stored_given_targets(coeffs, data.given)

    adam = AdamState(np.zeros_like(flat), np.zeros_like(flat))
    state = TrainState(params, coeffs, adam, 0, [], [], flat)
    rng = np.random.default_rng(np.random.SeedSequence((config.seed, 0x5D)))

    pool_n = pool_coords.shape[0]
    batch = min(config.data_batch or pool_n, pool_n)
    frames_per_step = min(config.frames_per_step or grid.T, grid.T)
    initial_total = None

    for epoch in range(1, config.epochs + 1):
        if batch < pool_n:
            take = rng.choice(pool_n, size=batch, replace=False)
            bc, bv = pool_coords[take], pool_values[take]
        else:
            bc, bv = pool_coords, pool_values
        if frames_per_step < grid.T:
            frames = np.sort(rng.choice(grid.T, size=frames_per_step, replace=False))
        else:
            frames = colloc.time_indices
        jet_coords = colloc.coords(grid, frames)

        grad, parts = _step_gradient(
            params, pairs, data.terms, bc, bv, jet_coords,
            frames.size, colloc, given_targets, config.weights,
            with_residual=epoch > config.residual_warmup,
        )
        total = total_loss(parts, config.weights)
        if not np.isfinite(total):
            bad = [n for n, p in zip(("loss_u", "loss_f", "loss_g", "loss_si"), parts) if not np.isfinite(p)]
            raise TrainingDiverged(f"non-finite loss in {', '.join(bad) or 'total'} at epoch {epoch}")
        if not np.isfinite(grad).all():
            raise TrainingDiverged(f"non-finite gradient at epoch {epoch}")
        if initial_total is None:
            initial_total = max(total, 1e-30)
        elif total > config.divergence_factor * initial_total:
            raise TrainingDiverged(
                f"total loss {total:.3g} exceeded {config.divergence_factor:.0e} x "
                f"initial {initial_total:.3g} at epoch {epoch}"
            )

        adam_step(flat, grad, adam, config.learning_rate, config.beta1, config.beta2, config.eps)
        state.epoch = epoch
        state.history.append((epoch, *parts, total))
        if config.history_interval and epoch % config.history_interval == 0:
            state.full_history.append(
                (epoch, *_full_losses(params, coeffs, data, pool_coords, pool_values,
                                      data.given, config.weights, grid))
            )
        if monitor is not None and monitor_interval and epoch % monitor_interval == 0:
            monitor(state)

    return state, recovered_fields(coeffs)
