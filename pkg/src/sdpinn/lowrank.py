"""Factorized coefficient estimates and mask bookkeeping.

Each recovered coefficient matrix is parameterized as the product of two
thin factors (M1 x r) @ (r x M2); the dense product is never stored during
training -- it is recomputed on demand so that gradients flow to the factor
entries only.  Rank budgets may exceed the true rank; redundancy helps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .wavesim import CoefficientField, GridSpec, Mask

#: derivative selector of a right-hand-side term
KIND_TIME = "u_t"
KIND_LAPLACIAN = "laplacian"
TERM_KINDS = (KIND_TIME, KIND_LAPLACIAN)


@dataclass
class FactorPair:
    """Thin factors whose product is one coefficient estimate."""

    u: np.ndarray  # (M1, r)
    v: np.ndarray  # (M2, r)

    def __post_init__(self):
        if self.u.ndim != 2 or self.v.ndim != 2 or self.u.shape[1] != self.v.shape[1]:
            raise ValueError("factor column counts must agree")

    @property
    def rank_budget(self) -> int:
        return self.u.shape[1]

    def copy(self) -> "FactorPair":
        return FactorPair(self.u.copy(), self.v.copy())


@dataclass(frozen=True)
class TermDef:
    """Static description of one recovered right-hand-side term.

    ``label`` names the physical quantity ("alpha", "c2"); ``sign`` is the
    sign tag of the stored coefficient.  The attenuation term stores the
    negated physical value (the equation moves it to the right-hand side), so
    its label is reported negated.
    """

    label: str
    kind: str
    sign: str
    rank: int

    def __post_init__(self):
        if self.kind not in TERM_KINDS:
            raise ValueError(f"unknown term kind {self.kind!r}")
        if self.rank < 1:
            raise ValueError("rank budget must be >= 1")


@dataclass
class CoefficientTerm:
    spec: TermDef
    factors: FactorPair


@dataclass
class CoefficientSet:
    """All recovered terms of the equation's right-hand side."""

    terms: list[CoefficientTerm]

    def __post_init__(self):
        if not self.terms:
            raise ValueError("at least one term is required")

    def __iter__(self):
        return iter(self.terms)

    def __len__(self):
        return len(self.terms)


def compose(pair: FactorPair) -> CoefficientField:
    """Dense coefficient matrix u @ v.T (rank bounded by the budget)."""
    return CoefficientField(pair.u @ pair.v.T)


def init_factors(grid: GridSpec, rank: int, seed: int) -> FactorPair:
    """I.i.d. zero-mean Gaussian entries with standard deviation 0.1."""
    if rank < 1:
        raise ValueError("rank budget must be >= 1")
    rng = np.random.default_rng(seed)
    return FactorPair(
        rng.normal(0.0, 0.1, size=(grid.M1, rank)),
        rng.normal(0.0, 0.1, size=(grid.M2, rank)),
    )


def coverage_stats(mask: Mask) -> tuple[int, int, int]:
    """(distinct rows, distinct columns, entry count) covered by the mask."""
    return (
        int(np.unique(mask.rows).size),
        int(np.unique(mask.cols).size),
        len(mask),
    )


def project(mask: Mask, field: CoefficientField) -> list[tuple[int, int, float]]:
    """Entries of the field at masked locations (zero implied elsewhere)."""
    if mask.shape != field.shape:
        raise ValueError("mask does not match field shape")
    vals = field.values[mask.rows, mask.cols]
    return [(int(r), int(c), float(v)) for r, c, v in zip(mask.rows, mask.cols, vals)]


@dataclass
class GivenCoefficients:
    """True coefficient values known on a sub-region of the grid.

    ``values`` maps term labels to arrays aligned with the mask entries and
    holds the *physical* quantities (attenuation is non-negative here; the
    trainer converts to the stored sign convention term by term).
    """

    mask: Mask
    values: dict[str, np.ndarray]

    def __post_init__(self):
        for label, v in self.values.items():
            v = np.asarray(v, dtype=np.float64)
            if v.shape != (len(self.mask),):
                raise ValueError(f"given values for {label!r} do not match the mask")
            self.values[label] = v

    @staticmethod
    def from_fields(mask: Mask, fields: dict[str, CoefficientField]) -> "GivenCoefficients":
        return GivenCoefficients(
            mask, {k: f.values[mask.rows, mask.cols] for k, f in fields.items()}
        )
