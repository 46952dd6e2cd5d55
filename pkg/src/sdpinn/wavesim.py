"""Ground-truth data generation: low-rank coefficient fields, a damped 2-D
wave solver, measurement noise and spatial sampling masks.

The solver integrates  U_tt + alpha*U_t - c^2 * (U_xx + U_yy) = 0  with an
explicit leapfrog scheme, centered damping and mirror (zero-Neumann)
boundaries.  The damping term is centered too, so the update stays second
order and the recovered frames satisfy the plain centered-difference form of
the equation at interior points to machine precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

NON_NEGATIVE = "non_negative"
NON_POSITIVE = "non_positive"

SIGN_VALUES = {NON_NEGATIVE: 1.0, NON_POSITIVE: -1.0}


@dataclass(frozen=True)
class GridSpec:
    """Grid sizes and physical spacings of a measurement cube."""

    M1: int
    M2: int
    T: int
    dx: float = 0.1
    dy: float = 0.1
    dt: float = 0.01

    def __post_init__(self):
        if min(self.M1, self.M2, self.T) <= 0:
            raise ValueError("grid dimensions must be positive")
        if min(self.dx, self.dy, self.dt) <= 0:
            raise ValueError("grid spacings must be positive")

    @property
    def locations(self) -> int:
        return self.M1 * self.M2

    def location_coords(self) -> np.ndarray:
        """(M1*M2, 2) physical (x, y) for every location, row-major."""
        rows, cols = np.meshgrid(
            np.arange(self.M1), np.arange(self.M2), indexing="ij"
        )
        return np.column_stack([rows.ravel() * self.dx, cols.ravel() * self.dy])

    def times(self) -> np.ndarray:
        return np.arange(self.T) * self.dt


@dataclass
class CoefficientField:
    """One spatially varying coefficient over the region of interest."""

    values: np.ndarray
    sign: str | None = None
    units: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("coefficient field must be 2-D")
        if self.sign is not None and self.sign not in SIGN_VALUES:
            raise ValueError(f"unknown sign tag {self.sign!r}")

    @property
    def shape(self):
        return self.values.shape


@dataclass
class WaveField:
    """Measurement cube (M1, M2, T) with its grid metadata."""

    data: np.ndarray
    grid: GridSpec

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        expected = (self.grid.M1, self.grid.M2, self.grid.T)
        if self.data.shape != expected:
            raise ValueError(f"data shape {self.data.shape} != grid {expected}")


@dataclass(frozen=True)
class Mask:
    """Sorted set of (row, col) spatial indices on an M1 x M2 grid."""

    shape: tuple[int, int]
    rows: np.ndarray = field(repr=False)
    cols: np.ndarray = field(repr=False)

    @staticmethod
    def from_indices(shape, rows, cols) -> "Mask":
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        if rows.size and (
            rows.min() < 0 or rows.max() >= shape[0] or cols.min() < 0 or cols.max() >= shape[1]
        ):
            raise ValueError("mask index out of bounds")
        flat = np.unique(rows * shape[1] + cols)
        return Mask(tuple(shape), flat // shape[1], flat % shape[1])

    @staticmethod
    def full(shape) -> "Mask":
        rows, cols = np.meshgrid(np.arange(shape[0]), np.arange(shape[1]), indexing="ij")
        return Mask(tuple(shape), rows.ravel().astype(np.int64), cols.ravel().astype(np.int64))

    def __len__(self) -> int:
        return int(self.rows.size)

    def bool_matrix(self) -> np.ndarray:
        m = np.zeros(self.shape, dtype=bool)
        m[self.rows, self.cols] = True
        return m

    def complement(self) -> "Mask":
        m = ~self.bool_matrix()
        rows, cols = np.nonzero(m)
        return Mask(self.shape, rows.astype(np.int64), cols.astype(np.int64))

    def union(self, other: "Mask") -> "Mask":
        if self.shape != other.shape:
            raise ValueError("mask shape mismatch")
        return Mask.from_indices(
            self.shape,
            np.concatenate([self.rows, other.rows]),
            np.concatenate([self.cols, other.cols]),
        )

    def intersect(self, other: "Mask") -> "Mask":
        if self.shape != other.shape:
            raise ValueError("mask shape mismatch")
        m = self.bool_matrix() & other.bool_matrix()
        rows, cols = np.nonzero(m)
        return Mask(self.shape, rows.astype(np.int64), cols.astype(np.int64))


# ---------------------------------------------------------------------------
# low-rank coefficient fields
# ---------------------------------------------------------------------------

def _smooth_vector(n: int, rng: np.random.Generator) -> np.ndarray:
    """Low-frequency sinusoid mix plus constant; smooth along the axis."""
    t = np.linspace(0.0, 1.0, n)
    v = rng.uniform(-0.4, 0.4) * np.ones(n)
    for _ in range(2):
        freq = rng.uniform(0.5, 2.0)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        v += rng.uniform(0.4, 1.0) * np.sin(2.0 * np.pi * freq * t + phase)
    return v


def matrix_rank_exact(values: np.ndarray, rank: int) -> bool:
    """SVD criterion: sigma_rank/sigma_1 > 1e-6 and sigma_{rank+1}/sigma_1 < 1e-10."""
    s = np.linalg.svd(values, compute_uv=False)
    if s[0] == 0.0:
        return rank == 0
    if s[rank - 1] / s[0] <= 1e-6:
        return False
    if rank < len(s) and s[rank] / s[0] >= 1e-10:
        return False
    return True


def make_lowrank_field(
    grid: GridSpec,
    rank: int,
    value_range: tuple[float, float],
    sign: str,
    seed: int,
) -> CoefficientField:
    """Random smooth field of exact rank ``rank`` mapped onto [lo, hi].

    Built as a sum of outer products of smooth vectors.  The first left
    factor is the all-ones vector, so the affine range mapping (which adds a
    constant) folds into an existing rank-1 term instead of raising the rank.
    """
    lo, hi = float(value_range[0]), float(value_range[1])
    if lo > hi:
        raise ValueError("empty value range")
    if sign == NON_NEGATIVE and lo < 0:
        raise ValueError("non-negative field cannot reach below zero")
    if sign == NON_POSITIVE and hi > 0:
        raise ValueError("non-positive field cannot reach above zero")
    if not 1 <= rank <= min(grid.M1, grid.M2):
        raise ValueError("rank out of range")

    if lo == hi:
        if rank != 1:
            raise ValueError("a constant field has rank 1")
        return CoefficientField(np.full((grid.M1, grid.M2), lo), sign)

    rng = np.random.default_rng(seed)
    for _ in range(50):
        left = [np.ones(grid.M1)] + [_smooth_vector(grid.M1, rng) for _ in range(rank - 1)]
        right = [_smooth_vector(grid.M2, rng) for _ in range(rank)]
        raw = sum(np.outer(u, v) for u, v in zip(left, right))
        span = raw.max() - raw.min()
        if span < 1e-9:
            continue
        scaled = lo + (hi - lo) * (raw - raw.min()) / span
        if matrix_rank_exact(scaled, rank):
            return CoefficientField(scaled, sign)
    raise RuntimeError(f"failed to draw an exact rank-{rank} field (seed {seed})")


# ---------------------------------------------------------------------------
# forward solver
# ---------------------------------------------------------------------------

def _mirror_laplacian(u: np.ndarray, dx: float, dy: float) -> np.ndarray:
    """5-point Laplacian with mirror (zero normal derivative) boundaries."""
    p = np.pad(u, 1, mode="reflect")
    return (p[2:, 1:-1] - 2.0 * u + p[:-2, 1:-1]) / dx**2 + (
        p[1:-1, 2:] - 2.0 * u + p[1:-1, :-2]
    ) / dy**2


def max_stable_dt(c2_max: float, dx: float, dy: float) -> float:
    return 1.0 / (np.sqrt(c2_max) * np.sqrt(1.0 / dx**2 + 1.0 / dy**2))


def _gaussian_pulses(grid: GridSpec, rng: np.random.Generator) -> np.ndarray:
    # Pulse widths are kept a decent fraction of the domain: much narrower and
    # the excited temporal frequencies defeat the coordinate network's
    # spectral bias, much wider and the interior dynamics get dull.
    x = np.arange(grid.M1)[:, None] * grid.dx
    y = np.arange(grid.M2)[None, :] * grid.dy
    lx, ly = (grid.M1 - 1) * grid.dx, (grid.M2 - 1) * grid.dy
    u0 = np.zeros((grid.M1, grid.M2))
    for _ in range(int(rng.integers(2, 4))):
        cx = rng.uniform(0.2, 0.8) * lx
        cy = rng.uniform(0.2, 0.8) * ly
        width = rng.uniform(0.14, 0.28) * min(lx, ly)
        amp = rng.uniform(0.5, 1.0) * rng.choice([-1.0, 1.0])
        u0 += amp * np.exp(-(((x - cx) ** 2 + (y - cy) ** 2) / (2.0 * width**2)))
    return u0


def simulate(
    alpha: CoefficientField,
    c2: CoefficientField,
    grid: GridSpec,
    initial: str = "gaussian_pulse",
    seed: int = 0,
) -> WaveField:
    """Leapfrog integration of the damped wave equation; returns T frames.

    Initial velocity is zero; the first two bootstrap frames are discarded
    and the returned frames are relabeled to start at t = 0 (the equation is
    time invariant).  Raises on CFL violation or negative attenuation.
    """
    a = np.asarray(alpha.values, dtype=np.float64)
    c = np.asarray(c2.values, dtype=np.float64)
    if a.shape != (grid.M1, grid.M2) or c.shape != (grid.M1, grid.M2):
        raise ValueError("coefficient shape does not match grid")
    if (a < 0).any():
        raise ValueError("attenuation must be non-negative everywhere")
    cfl = np.sqrt(c.max()) * grid.dt * np.sqrt(1.0 / grid.dx**2 + 1.0 / grid.dy**2)
    if cfl > 1.0:
        raise ValueError(
            f"CFL violation: dt={grid.dt} exceeds max stable "
            f"dt={max_stable_dt(c.max(), grid.dx, grid.dy):.6g}"
        )

    rng = np.random.default_rng(seed)
    if initial == "gaussian_pulse":
        u_prev = _gaussian_pulses(grid, rng)
    elif initial == "zero":
        u_prev = np.zeros((grid.M1, grid.M2))
    else:
        raise ValueError(f"unknown initial condition {initial!r}")

    dt = grid.dt
    # zero initial velocity: half-step Taylor bootstrap
    u_cur = u_prev + 0.5 * dt**2 * c * _mirror_laplacian(u_prev, grid.dx, grid.dy)

    denom = 1.0 / dt**2 + a / (2.0 * dt)
    frames = np.empty((grid.M1, grid.M2, grid.T + 2))
    frames[:, :, 0] = u_prev
    frames[:, :, 1] = u_cur
    for k in range(2, grid.T + 2):
        lap = _mirror_laplacian(u_cur, grid.dx, grid.dy)
        u_next = (
            (2.0 * u_cur - u_prev) / dt**2 + a * u_prev / (2.0 * dt) + c * lap
        ) / denom
        frames[:, :, k] = u_next
        u_prev, u_cur = u_cur, u_next
    data = frames[:, :, 2:]
    if not np.isfinite(data).all():
        raise RuntimeError("simulation produced non-finite values")
    return WaveField(data.copy(), grid)


def add_noise(wave: WaveField, percent: float, seed: int) -> WaveField:
    """Additive Gaussian noise with std = percent/100 of the field std."""
    if percent < 0:
        raise ValueError("noise percent must be >= 0")
    if percent == 0:
        return WaveField(wave.data.copy(), wave.grid)
    rng = np.random.default_rng(seed)
    sigma = (percent / 100.0) * wave.data.std()
    return WaveField(wave.data + rng.normal(0.0, sigma, size=wave.data.shape), wave.grid)


# ---------------------------------------------------------------------------
# spatial masks
# ---------------------------------------------------------------------------

def _even_grid_factors(count: int) -> tuple[int, int]:
    a = int(np.floor(np.sqrt(count)))
    while count % a:
        a -= 1
    return a, count // a


def sample_mask(grid: GridSpec, kind: str, size=None, seed: int = 0) -> Mask:
    """Spatial sampling patterns for given coefficients and measurements.

    kind: full | random_fraction | diagonal | even_grid | rbd | boundary.
    ``size`` is a fraction (float <= 1) or a count for random_fraction, and a
    count for even_grid; the other kinds ignore it.
    """
    shape = (grid.M1, grid.M2)
    if kind == "full":
        return Mask.full(shape)
    if kind == "diagonal":
        n = min(grid.M1, grid.M2)
        idx = np.arange(n)
        return Mask.from_indices(shape, idx, idx)
    if kind == "rbd":
        rows = np.concatenate(
            [
                np.arange(grid.M1),                          # last column
                np.full(grid.M2, grid.M1 - 1),               # last row
                np.arange(min(grid.M1, grid.M2)),            # main diagonal
            ]
        )
        cols = np.concatenate(
            [
                np.full(grid.M1, grid.M2 - 1),
                np.arange(grid.M2),
                np.arange(min(grid.M1, grid.M2)),
            ]
        )
        return Mask.from_indices(shape, rows, cols)
    if kind == "boundary":
        m = np.zeros(shape, dtype=bool)
        m[0, :] = m[-1, :] = True
        m[:, 0] = m[:, -1] = True
        rows, cols = np.nonzero(m)
        return Mask.from_indices(shape, rows, cols)
    if kind == "random_fraction":
        if size is None:
            raise ValueError("random_fraction needs a fraction or count")
        count = (
            int(round(float(size) * grid.locations))
            if isinstance(size, float) and size <= 1.0
            else int(size)
        )
        if count > grid.locations:
            raise ValueError("requested more locations than the grid holds")
        rng = np.random.default_rng(seed)
        flat = rng.choice(grid.locations, size=count, replace=False)
        return Mask.from_indices(shape, flat // grid.M2, flat % grid.M2)
    if kind == "even_grid":
        if size is None:
            raise ValueError("even_grid needs a count")
        count = int(size)
        if count > grid.locations:
            raise ValueError("requested more locations than the grid holds")
        a, b = _even_grid_factors(count)
        rows = np.unique(np.round(np.linspace(0, grid.M1 - 1, a)).astype(np.int64))
        cols = np.unique(np.round(np.linspace(0, grid.M2 - 1, b)).astype(np.int64))
        rr, cc = np.meshgrid(rows, cols, indexing="ij")
        return Mask.from_indices(shape, rr.ravel(), cc.ravel())
    raise ValueError(f"unknown mask kind {kind!r}")


def sample_submask(base: Mask, fraction: float, seed: int) -> Mask:
    """Uniform without-replacement subset covering ``fraction`` of ``base``."""
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("fraction must be in [0, 1]")
    rng = np.random.default_rng(seed)
    count = int(round(fraction * len(base)))
    pick = np.sort(rng.choice(len(base), size=count, replace=False))
    return Mask(base.shape, base.rows[pick], base.cols[pick])
