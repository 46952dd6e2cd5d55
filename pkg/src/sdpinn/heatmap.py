"""Binary PPM (P6) heatmaps with a blue-white-red linear color map.

No image codec dependency: the output is a portable pixmap that any viewer
or ``convert x.ppm x.png`` handles.  Pixel (row i, col j) shows matrix entry
(i, j), so the image is M2 wide and M1 tall.  Masked-out locations render
black.
"""

from __future__ import annotations

import numpy as np

from .wavesim import Mask


def _colorize(values: np.ndarray, vmin: float, vmax: float) -> np.ndarray:
    """Map values linearly onto blue (low) -> white (mid) -> red (high)."""
    span = vmax - vmin
    t = np.clip((values - vmin) / span, 0.0, 1.0) if span > 0 else np.full_like(values, 0.5)
    rgb = np.empty(values.shape + (3,), dtype=np.uint8)
    lower = t <= 0.5
    s = np.where(lower, 2.0 * t, 2.0 * (t - 0.5))
    rgb[..., 0] = np.where(lower, np.round(255 * s), 255).astype(np.uint8)
    rgb[..., 1] = np.where(lower, np.round(255 * s), np.round(255 * (1 - s))).astype(np.uint8)
    rgb[..., 2] = np.where(lower, 255, np.round(255 * (1 - s))).astype(np.uint8)
    return rgb


def render_heatmap(
    values: np.ndarray,
    path,
    vmin: float | None = None,
    vmax: float | None = None,
    mask: Mask | None = None,
) -> None:
    """Write one matrix as a P6 pixmap.

    ``mask`` marks the locations that have data; everything else is black.
    Pass explicit vmin/vmax to share a color scale across panels.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 2:
        raise ValueError("expected a 2-D array")
    shown = v if mask is None else v[mask.rows, mask.cols]
    finite = shown[np.isfinite(shown)]
    if finite.size == 0:
        raise ValueError("no finite values to render")
    lo = float(finite.min()) if vmin is None else float(vmin)
    hi = float(finite.max()) if vmax is None else float(vmax)
    rgb = _colorize(np.nan_to_num(v, nan=lo), lo, hi)
    if mask is not None:
        keep = mask.bool_matrix()
        rgb[~keep] = 0
    rgb[~np.isfinite(v)] = 0
    with open(path, "wb") as f:
        f.write(f"P6\n{v.shape[1]} {v.shape[0]}\n255\n".encode("ascii"))
        f.write(rgb.tobytes())
