"""Spatially dependent PDE coefficient recovery for 2-D wave fields.

A single coordinate network plus per-term low-rank factor pairs are trained
jointly against measurements, an equation residual, a handful of given
coefficient values and a sign penalty.  Classical baselines (interpolate +
finite differences + least squares, and singular-value-threshold matrix
completion) are included for comparison.

The package is intentionally light to import; pull submodules directly:

    from sdpinn import wavesim, training, presets
"""

__version__ = "0.1.0"

_SUBMODULES = (
    "tape",
    "network",
    "jets",
    "wavesim",
    "lowrank",
    "losses",
    "training",
    "baselines",
    "fileio",
    "metrics",
    "heatmap",
    "presets",
    "cli",
)


def __getattr__(name):
    if name in _SUBMODULES:
        import importlib

        return importlib.import_module(f".{name}", __name__)
    raise AttributeError(f"module 'sdpinn' has no attribute {name!r}")
