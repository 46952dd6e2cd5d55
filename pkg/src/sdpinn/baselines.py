"""Classical comparison methods.

Baseline 1: fill missing measurements per frame with row/column spline
interpolation, then recover coefficients at every interior location by
central finite differences plus ordinary least squares.

Baseline 2: run the same FD+OLS recovery only where the 5-point measurement
stencil is complete, merge with the given coefficient entries, and complete
each coefficient matrix by iterative singular-value thresholding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import Akima1DInterpolator, CubicHermiteSpline

from .lowrank import GivenCoefficients
from .wavesim import CoefficientField, Mask, WaveField


@dataclass
class FdStencilOutput:
    """Centered-difference derivative tracks at one interior location.

    First and last time samples are dropped, so every vector has length T-2.
    """

    u_x: np.ndarray
    u_xx: np.ndarray
    u_y: np.ndarray
    u_yy: np.ndarray
    u_t: np.ndarray
    u_tt: np.ndarray


def fd_derivatives(field: WaveField, i: int, j: int, meas: Mask | None = None) -> FdStencilOutput:
    """Centered first/second differences at interior location (i, j).

    With ``meas`` given, requires measurements at (i, j) and its four axis
    neighbors.
    """
    g = field.grid
    if not (1 <= i <= g.M1 - 2 and 1 <= j <= g.M2 - 2):
        raise ValueError(f"({i}, {j}) is not an interior location")
    if meas is not None:
        have = meas.bool_matrix()
        for a, b in ((i, j), (i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)):
            if not have[a, b]:
                raise ValueError(f"missing neighbor measurement at ({a}, {b})")
    u = field.data
    sl = slice(1, g.T - 1)
    u_x = (u[i + 1, j, sl] - u[i - 1, j, sl]) / (2 * g.dx)
    u_xx = (u[i + 1, j, sl] - 2 * u[i, j, sl] + u[i - 1, j, sl]) / g.dx**2
    u_y = (u[i, j + 1, sl] - u[i, j - 1, sl]) / (2 * g.dy)
    u_yy = (u[i, j + 1, sl] - 2 * u[i, j, sl] + u[i, j - 1, sl]) / g.dy**2
    u_t = (u[i, j, 2:] - u[i, j, : g.T - 2]) / (2 * g.dt)
    u_tt = (u[i, j, 2:] - 2 * u[i, j, sl] + u[i, j, : g.T - 2]) / g.dt**2
    return FdStencilOutput(u_x, u_xx, u_y, u_yy, u_t, u_tt)


@dataclass
class OlsResult:
    alpha_hat: float
    c2_hat: float
    ok: bool


#: relative singular-value floor below which the regressor matrix is flagged
_RANK_TOL = 1e-10


def ols_recover(stencil: FdStencilOutput) -> OlsResult:
    """Least-squares coefficients from one location's derivative tracks.

    Solves u_tt ~ [-u_t, u_xx + u_yy] @ [alpha, c2]; a rank-deficient
    regressor flags the location for exclusion from completion seeding.
    """
    phi = np.column_stack([-stencil.u_t, stencil.u_xx + stencil.u_yy])
    s = np.linalg.svd(phi, compute_uv=False)
    if s[0] == 0.0 or s[-1] / s[0] < _RANK_TOL:
        return OlsResult(np.nan, np.nan, False)
    coef, *_ = np.linalg.lstsq(phi, stencil.u_tt, rcond=None)
    return OlsResult(float(coef[0]), float(coef[1]), True)


# ---------------------------------------------------------------------------
# frame interpolation (baseline 1)
# ---------------------------------------------------------------------------

def _interp_line(pos: np.ndarray, known_pos: np.ndarray, known_val: np.ndarray) -> np.ndarray:
    """1-D reconstruction of a partially observed line.

    Akima needs five points to form its local slopes; shorter lines fall
    back to a cubic Hermite with central secant slopes (linear for 2 points),
    and a single point extends as a constant.
    """
    n = known_pos.size
    if n == 0:
        return np.full(pos.size, np.nan)
    if n == 1:
        return np.full(pos.size, known_val[0])
    if n >= 5:
        f = Akima1DInterpolator(known_pos, known_val, extrapolate=True)
    else:
        slopes = np.gradient(known_val, known_pos)
        f = CubicHermiteSpline(known_pos, known_val, slopes, extrapolate=True)
    return f(pos)


def akima_interpolate_frame(frame: np.ndarray, mask: Mask) -> np.ndarray:
    """Row-pass and column-pass spline reconstructions, averaged.

    Available entries are reproduced exactly by both passes.  Raises on a
    frame without any available entry.
    """
    if len(mask) == 0:
        raise ValueError("cannot interpolate a fully empty frame")
    have = mask.bool_matrix()
    m1, m2 = frame.shape

    by_row = np.full((m1, m2), np.nan)
    cols = np.arange(m2, dtype=np.float64)
    for r in range(m1):
        k = np.nonzero(have[r])[0]
        if k.size:
            by_row[r] = _interp_line(cols, cols[k], frame[r, k])

    by_col = np.full((m1, m2), np.nan)
    rows = np.arange(m1, dtype=np.float64)
    for c in range(m2):
        k = np.nonzero(have[:, c])[0]
        if k.size:
            by_col[:, c] = _interp_line(rows, rows[k], frame[k, c])

    stacked = np.stack([by_row, by_col])
    with np.errstate(invalid="ignore"):
        out = np.nanmean(stacked, axis=0)
    if np.isnan(out).any():
        # rows and columns that were both empty: nearest available entry
        bad = np.argwhere(np.isnan(out))
        for r, c in bad:
            d = (mask.rows - r) ** 2 + (mask.cols - c) ** 2
            k = int(np.argmin(d))
            out[r, c] = frame[mask.rows[k], mask.cols[k]]
    out[have] = frame[have]
    return out


# ---------------------------------------------------------------------------
# singular value thresholding (baseline 2)
# ---------------------------------------------------------------------------

@dataclass
class SvtConfig:
    tau: float
    delta: float | None = None  # default 1.2 * M1*M2 / |known|
    max_iters: int = 500
    tol: float = 1e-4

    def __post_init__(self):
        if self.tau < 0:
            raise ValueError("tau must be >= 0")
        if self.delta is not None and self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.max_iters < 1 or self.tol <= 0:
            raise ValueError("bad iteration limits")


def shrink_singular_values(mat: np.ndarray, tau: float) -> tuple[np.ndarray, np.ndarray]:
    """Soft-threshold the singular values by tau; returns (matrix, values)."""
    u, s, vt = np.linalg.svd(mat, full_matrices=False)
    s = np.maximum(s - tau, 0.0)
    return (u * s) @ vt, s


def svt_complete(
    known: list[tuple[int, int, float]] | tuple[np.ndarray, np.ndarray, np.ndarray],
    dims: tuple[int, int],
    config: SvtConfig,
) -> CoefficientField:
    """Iterative nuclear-norm completion from the known entries.

    Runs X = shrink(Y); Y += delta * P_Omega(target - X) from Y = 0 until
    the relative residual on the known set drops below ``tol``.
    """
    if isinstance(known, tuple) and len(known) == 3:
        rows, cols, vals = (np.asarray(a) for a in known)
    else:
        if not known:
            raise ValueError("no known entries to complete from")
        arr = np.asarray(known, dtype=np.float64)
        rows, cols, vals = arr[:, 0].astype(np.int64), arr[:, 1].astype(np.int64), arr[:, 2]
    if rows.size == 0:
        raise ValueError("no known entries to complete from")

    delta = config.delta if config.delta is not None else 1.2 * dims[0] * dims[1] / rows.size
    norm_known = np.linalg.norm(vals)
    if norm_known == 0.0:
        norm_known = 1.0
    y = np.zeros(dims)
    x = np.zeros(dims)
    initial = None
    for _ in range(config.max_iters):
        x, _ = shrink_singular_values(y, config.tau)
        resid = vals - x[rows, cols]
        rel = np.linalg.norm(resid) / norm_known
        if initial is None:
            initial = max(rel, 1e-30)
        if rel <= config.tol:
            break
        if rel > 10.0 * initial and rel > 1.0:
            raise RuntimeError(
                f"thresholding iteration diverged (delta={delta:.3g}); reduce the step"
            )
        upd = np.zeros(dims)
        upd[rows, cols] = resid
        y += delta * upd
    return CoefficientField(x)


def effective_rank(values: np.ndarray, rel_tol: float = 1e-6) -> int:
    s = np.linalg.svd(values, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int((s / s[0] > rel_tol).sum())


def svt_complete_rank_targeted(
    known,
    dims: tuple[int, int],
    target_rank: int,
    taus: np.ndarray | None = None,
    max_iters: int = 500,
    tol: float = 1e-4,
) -> tuple[CoefficientField, float]:
    """Sweep a geometric tau grid, keep the completion whose rank lands
    closest to the target (larger tau wins ties).  Returns (field, tau)."""
    if isinstance(known, tuple):
        vals = np.asarray(known[2])
    else:
        vals = np.asarray([v for _, _, v in known])
    if taus is None:
        scale = max(float(np.abs(vals).max()), 1e-12)
        taus = scale * np.geomspace(0.3, 100.0, 12)
    best = None
    for tau in sorted(taus, reverse=True):
        field = svt_complete(known, dims, SvtConfig(tau=float(tau), max_iters=max_iters, tol=tol))
        r = effective_rank(field.values)
        score = abs(r - target_rank)
        if best is None or score < best[0]:
            best = (score, field, float(tau))
        if score == 0:
            break
    return best[1], best[2]


# ---------------------------------------------------------------------------
# pipelines
# ---------------------------------------------------------------------------

@dataclass
class BaselineResult:
    """Recovered coefficient arrays (NaN where a method gives no estimate)."""

    alpha: CoefficientField
    c2: CoefficientField
    recovered_mask: Mask       # locations with direct FD+OLS estimates
    rows: list[tuple]          # per-location (i, j, alpha_hat, c2_hat, flag)


def _interior_coords(m1: int, m2: int):
    rows, cols = np.meshgrid(np.arange(1, m1 - 1), np.arange(1, m2 - 1), indexing="ij")
    return rows.ravel(), cols.ravel()


def baseline1_pipeline(field: WaveField, meas: Mask) -> BaselineResult:
    """Interpolate every frame to full coverage, then FD+OLS everywhere
    interior.  Boundary locations are never estimated."""
    g = field.grid
    filled = np.empty_like(field.data)
    for k in range(g.T):
        filled[:, :, k] = akima_interpolate_frame(field.data[:, :, k], meas)
    dense = WaveField(filled, g)

    alpha = np.full((g.M1, g.M2), np.nan)
    c2 = np.full((g.M1, g.M2), np.nan)
    rows_out, ok_rows, ok_cols = [], [], []
    for i, j in zip(*_interior_coords(g.M1, g.M2)):
        res = ols_recover(fd_derivatives(dense, int(i), int(j)))
        rows_out.append((int(i), int(j), res.alpha_hat, res.c2_hat, "ok" if res.ok else "rank_deficient"))
        if res.ok:
            alpha[i, j] = res.alpha_hat
            c2[i, j] = res.c2_hat
            ok_rows.append(i)
            ok_cols.append(j)
    rec = Mask.from_indices((g.M1, g.M2), np.array(ok_rows, dtype=np.int64), np.array(ok_cols, dtype=np.int64)) if ok_rows else Mask((g.M1, g.M2), np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64))
    return BaselineResult(CoefficientField(alpha), CoefficientField(c2), rec, rows_out)


def eligible_locations(meas: Mask) -> Mask:
    """Interior locations whose full 5-point cross is measured."""
    have = meas.bool_matrix()
    ok = (
        have[1:-1, 1:-1]
        & have[:-2, 1:-1]
        & have[2:, 1:-1]
        & have[1:-1, :-2]
        & have[1:-1, 2:]
    )
    rows, cols = np.nonzero(ok)
    return Mask.from_indices(meas.shape, rows + 1, cols + 1)


def baseline2_pipeline(
    field: WaveField,
    meas: Mask,
    given: GivenCoefficients,
    target_ranks: dict[str, int] | None = None,
    taus: np.ndarray | None = None,
) -> BaselineResult:
    """FD+OLS at every eligible location, merge with given entries, then
    complete each coefficient matrix by singular-value thresholding."""
    g = field.grid
    elig = eligible_locations(meas)
    known_alpha: dict[tuple[int, int], float] = {}
    known_c2: dict[tuple[int, int], float] = {}
    rows_out = []
    ok_rows, ok_cols = [], []
    for i, j in zip(elig.rows, elig.cols):
        res = ols_recover(fd_derivatives(field, int(i), int(j), meas))
        rows_out.append((int(i), int(j), res.alpha_hat, res.c2_hat, "ok" if res.ok else "rank_deficient"))
        if res.ok:
            known_alpha[(int(i), int(j))] = res.alpha_hat
            known_c2[(int(i), int(j))] = res.c2_hat
            ok_rows.append(int(i))
            ok_cols.append(int(j))
    # given entries win where both exist
    for k, (r, c) in enumerate(zip(given.mask.rows, given.mask.cols)):
        if "alpha" in given.values:
            known_alpha[(int(r), int(c))] = float(given.values["alpha"][k])
        if "c2" in given.values:
            known_c2[(int(r), int(c))] = float(given.values["c2"][k])

    if not known_c2 and not known_alpha:
        raise ValueError("nothing to complete: no eligible locations and no given entries")

    target_ranks = target_ranks or {}

    def complete(entries: dict, label: str) -> CoefficientField:
        rows = np.array([k[0] for k in entries], dtype=np.int64)
        cols = np.array([k[1] for k in entries], dtype=np.int64)
        vals = np.array(list(entries.values()))
        field_, _ = svt_complete_rank_targeted(
            (rows, cols, vals), (g.M1, g.M2), target_ranks.get(label, 3), taus=taus
        )
        return field_

    alpha_field = complete(known_alpha, "alpha") if known_alpha else CoefficientField(np.full((g.M1, g.M2), np.nan))
    c2_field = complete(known_c2, "c2") if known_c2 else CoefficientField(np.full((g.M1, g.M2), np.nan))
    rec = (
        Mask.from_indices((g.M1, g.M2), np.array(ok_rows, dtype=np.int64), np.array(ok_cols, dtype=np.int64))
        if ok_rows
        else Mask((g.M1, g.M2), np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64))
    )
    return BaselineResult(alpha_field, c2_field, rec, rows_out)
