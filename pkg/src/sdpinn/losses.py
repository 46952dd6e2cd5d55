"""The four training losses and their weighted combination.

All losses are sums, not means; the default weights (w_f=0.1, w_g=w_si=1) are
calibrated to that convention.  The expression builders below are polymorphic:
handed tape ``Var`` leaves they produce a differentiable graph, handed plain
arrays they just evaluate.  Public ``loss_*`` functions are the plain-number
entry points.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .jets import jet_forward
from .lowrank import (
    KIND_LAPLACIAN,
    KIND_TIME,
    CoefficientSet,
    GivenCoefficients,
    compose,
)
from .network import MlpParams, forward_batch
from .tape import relu
from .wavesim import SIGN_VALUES, GridSpec


@dataclass(frozen=True)
class LossWeights:
    w_f: float = 0.1
    w_g: float = 1.0
    w_si: float = 1.0

    def __post_init__(self):
        if min(self.w_f, self.w_g, self.w_si) < 0:
            raise ValueError("loss weights must be non-negative")


@dataclass
class CollocationSet:
    """Which (location, time) grid points the residual loss sweeps.

    Defaults cover every location and every time step; ``frames_per_step``
    limits each optimizer step to a random subset of time indices (the
    expectation matches the full sum up to scale).
    """

    location_rows: np.ndarray
    location_cols: np.ndarray
    time_indices: np.ndarray
    frames_per_step: int | None = None

    @staticmethod
    def full(grid: GridSpec, frames_per_step: int | None = None) -> "CollocationSet":
        rows, cols = np.meshgrid(np.arange(grid.M1), np.arange(grid.M2), indexing="ij")
        return CollocationSet(
            rows.ravel().astype(np.int64),
            cols.ravel().astype(np.int64),
            np.arange(grid.T, dtype=np.int64),
            frames_per_step,
        )

    def __post_init__(self):
        if self.location_rows.size == 0 or self.time_indices.size == 0:
            raise ValueError("collocation set must be non-empty")
        if self.location_rows.size != self.location_cols.size:
            raise ValueError("row/col index arrays must align")

    @property
    def location_count(self) -> int:
        return int(self.location_rows.size)

    def coords(self, grid: GridSpec, time_indices: np.ndarray) -> np.ndarray:
        """(|frames|*|locations|, 3) physical (x, y, t), frame-major."""
        if (time_indices < 0).any() or (time_indices >= grid.T).any():
            raise ValueError("collocation time index out of range")
        if (self.location_rows >= grid.M1).any() or (self.location_cols >= grid.M2).any():
            raise ValueError("collocation location out of grid")
        m = self.location_count
        f = time_indices.size
        xy = np.column_stack(
            [self.location_rows * grid.dx, self.location_cols * grid.dy]
        )
        out = np.empty((f * m, 3))
        out[:, :2] = np.tile(xy, (f, 1))
        out[:, 2] = np.repeat(time_indices * grid.dt, m)
        return out


# ---------------------------------------------------------------------------
# expression builders (Var or ndarray)
# ---------------------------------------------------------------------------

def measurement_residual_sq(pred, targets):
    """Sum of squared prediction errors over a batch."""
    return ((pred - targets) ** 2).sum()


def equation_residual_sq(utt, ut, lap, term_values: list[tuple[str, object]]):
    """Squared residual of u_tt = sum_k coeff_k * term_k over all points.

    utt/ut/lap are (frames, locations); each coefficient is a flat
    (locations,) vector broadcast over frames.
    """
    rhs = None
    for kind, lam in term_values:
        deriv = ut if kind == KIND_TIME else lap
        part = lam * deriv
        rhs = part if rhs is None else rhs + part
    residual = utt - rhs
    return (residual**2).sum()


def given_mismatch_sq(lam_mats: list, targets: list[tuple[np.ndarray, np.ndarray, np.ndarray]]):
    """Sum over terms of squared error at the given-coefficient locations."""
    total = None
    for lam, (rows, cols, values) in zip(lam_mats, targets):
        part = ((lam[rows, cols] - values) ** 2).sum()
        total = part if total is None else total + part
    return total


def sign_penalty(lam_mats: list, signs: list[str]):
    """ReLU penalty on entries violating each term's sign tag."""
    total = None
    for lam, sign in zip(lam_mats, signs):
        part = relu(lam * (-SIGN_VALUES[sign])).sum()
        total = part if total is None else total + part
    return total


# ---------------------------------------------------------------------------
# plain-number entry points
# ---------------------------------------------------------------------------

def loss_u(params: MlpParams, samples: np.ndarray) -> float:
    """Data-fit loss over samples of (x, y, t, u)."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.size == 0:
        raise ValueError("empty measurement batch")
    pred = forward_batch(params, samples[:, :3])
    return float(measurement_residual_sq(pred, samples[:, 3]))


def stored_given_targets(
    coeffs: CoefficientSet, given: GivenCoefficients
) -> list[tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Per-term (rows, cols, target) with physical values mapped onto the
    stored sign convention (attenuation enters negated)."""
    out = []
    for term in coeffs:
        phys = given.values[term.spec.label]
        out.append((given.mask.rows, given.mask.cols, SIGN_VALUES[term.spec.sign] * phys))
    return out


def loss_f(
    params: MlpParams,
    coeffs: CoefficientSet,
    colloc: CollocationSet,
    grid: GridSpec,
) -> float:
    """Equation-residual loss over the full collocation set."""
    coords = colloc.coords(grid, colloc.time_indices)
    _, d1, d2, _ = jet_forward(params, coords)
    f, m = colloc.time_indices.size, colloc.location_count
    utt = d2[:, 2].reshape(f, m)
    ut = d1[:, 2].reshape(f, m)
    lap = (d2[:, 0] + d2[:, 1]).reshape(f, m)
    term_values = [
        (
            term.spec.kind,
            (term.factors.u @ term.factors.v.T)[colloc.location_rows, colloc.location_cols],
        )
        for term in coeffs
    ]
    return float(equation_residual_sq(utt, ut, lap, term_values))


def loss_g(coeffs: CoefficientSet, given: GivenCoefficients) -> float:
    lam_mats = [compose(term.factors).values for term in coeffs]
    return float(given_mismatch_sq(lam_mats, stored_given_targets(coeffs, given)))


def loss_si(coeffs: CoefficientSet) -> float:
    lam_mats = [compose(term.factors).values for term in coeffs]
    return float(sign_penalty(lam_mats, [term.spec.sign for term in coeffs]))


def total_loss(parts, weights: LossWeights) -> float:
    """loss_u + w_f*loss_f + w_g*loss_g + w_si*loss_si."""
    lu, lf, lg, lsi = parts
    return lu + weights.w_f * lf + weights.w_g * lg + weights.w_si * lsi
