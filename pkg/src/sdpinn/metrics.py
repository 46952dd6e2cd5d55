"""Recovery quality metrics and the experiment summary table."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .wavesim import CoefficientField, Mask

SUMMARY_COLUMNS = (
    "preset",
    "noise_pct",
    "meas_frac",
    "r1",
    "r2",
    "epoch",
    "rmse_alpha",
    "rmse_c2",
)


def rmse(estimate: CoefficientField, truth: CoefficientField, region: Mask) -> float:
    """Root mean square entry-wise error over the evaluation region."""
    if estimate.shape != truth.shape or estimate.shape != region.shape:
        raise ValueError("field/region shapes disagree")
    if len(region) == 0:
        raise ValueError("empty evaluation region")
    d = estimate.values[region.rows, region.cols] - truth.values[region.rows, region.cols]
    if not np.isfinite(d).all():
        raise ValueError("non-finite estimate in evaluation region")
    return float(np.sqrt(np.mean(d * d)))


def finite_region(estimate: CoefficientField, region: Mask) -> Mask:
    """Sub-region where the estimate is defined (baselines leave NaN holes)."""
    ok = np.isfinite(estimate.values[region.rows, region.cols])
    return Mask(region.shape, region.rows[ok], region.cols[ok])


@dataclass
class RmseReport:
    preset: str
    epoch: int
    region_size: int
    values: dict[str, float]  # coefficient label -> rmse

    def summary_row(self, noise_pct: float, meas_frac: float, r1, r2) -> list:
        return [
            self.preset,
            noise_pct,
            meas_frac,
            r1 if r1 is not None else "",
            r2 if r2 is not None else "",
            self.epoch,
            f"{self.values['alpha']:.6g}" if "alpha" in self.values else "",
            f"{self.values['c2']:.6g}" if "c2" in self.values else "",
        ]


def write_summary_csv(path, rows: list[list]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(SUMMARY_COLUMNS)
        w.writerows(rows)
