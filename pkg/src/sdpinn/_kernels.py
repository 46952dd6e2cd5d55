"""Hot inner kernels with numba-compiled and pure-numpy implementations.

The jet propagation spends most of its non-BLAS time in the fused tanh
derivative chains below; numba collapses their ~10 numpy temporaries into a
single pass.  Selection happens once at import:

* ``SDPINN_NO_NUMBA=1`` (or numba missing) -> pure numpy,
* otherwise -> ``@njit(cache=True)`` versions.

``SDPINN_THREADS`` caps the numba thread pool.  Both implementations of every
kernel are kept importable (``numpy_impl`` / ``numba_impl``) so the benchmark
in ``benchmarks/bench_kernels.py`` can time them side by side.
"""

from __future__ import annotations

import math
import os

import numpy as np

_flag = os.environ.get("SDPINN_NO_NUMBA", "").strip()
_want_numba = _flag in ("", "0")

try:  # pragma: no cover - exercised indirectly via both CI paths
    if not _want_numba:
        raise ImportError("numba disabled via SDPINN_NO_NUMBA")
    from numba import njit, set_num_threads

    _threads = os.environ.get("SDPINN_THREADS", "").strip()
    if _threads:
        set_num_threads(max(1, int(_threads)))
    NUMBA_ENABLED = True
except ImportError:
    njit = None
    NUMBA_ENABLED = False


# ---------------------------------------------------------------------------
# pure numpy implementations
# ---------------------------------------------------------------------------

def _np_tanh_jet_fwd(s, p, z1, z2):
    """Push first / pure-second input derivatives through tanh.

    s = tanh(z) and p = 1 - s**2 are computed by the caller (keeps the value
    channel bit-identical with the plain forward pass); z1, z2 are (n, 3, w)
    derivatives of the pre-activations w.r.t. the three network inputs.
    """
    pe = p[:, None, :]
    spe = (s * p)[:, None, :]
    s1 = pe * z1
    s2 = pe * z2 - 2.0 * spe * z1 * z1
    return s1, s2


def _np_tanh_jet_bwd(s, p, z1, z2, bs, bs1, bs2):
    """Adjoint of ``_np_tanh_jet_fwd`` w.r.t. (z, z1, z2).

    Needs the cached forward quantities; q = d(s*p)/dz drives the
    third-order chain that parameter gradients of second derivatives
    flow through.
    """
    sp = s * p
    q = p * p - 2.0 * s * sp
    spe = sp[:, None, :]
    bz = p * bs - 2.0 * np.sum(
        spe * (z1 * bs1 + z2 * bs2) + (q[:, None, :] * z1 * z1) * bs2, axis=1
    )
    bz1 = p[:, None, :] * bs1 - 4.0 * spe * z1 * bs2
    bz2 = p[:, None, :] * bs2
    return bz, bz1, bz2


def _np_adam_update(x, g, m, v, step, lr, beta1, beta2, eps):
    """One in-place Adam update with bias correction on flat arrays."""
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * g * g
    mhat = m / (1.0 - beta1**step)
    vhat = v / (1.0 - beta2**step)
    x -= lr * mhat / (np.sqrt(vhat) + eps)


# ---------------------------------------------------------------------------
# numba implementations (explicit loops; same math, no temporaries)
# ---------------------------------------------------------------------------

def _nb_tanh_jet_fwd(s, p, z1, z2):
    n, w = s.shape
    s1 = np.empty_like(z1)
    s2 = np.empty_like(z2)
    for a in range(n):
        for j in range(w):
            pv = p[a, j]
            c = 2.0 * s[a, j] * pv
            for i in range(3):
                z1v = z1[a, i, j]
                s1[a, i, j] = pv * z1v
                s2[a, i, j] = pv * z2[a, i, j] - c * z1v * z1v
    return s1, s2


def _nb_tanh_jet_bwd(s, p, z1, z2, bs, bs1, bs2):
    n, w = s.shape
    bz = np.empty_like(s)
    bz1 = np.empty_like(z1)
    bz2 = np.empty_like(z2)
    for a in range(n):
        for j in range(w):
            sv = s[a, j]
            pv = p[a, j]
            spv = sv * pv
            qv = pv * pv - 2.0 * sv * spv
            acc = pv * bs[a, j]
            for i in range(3):
                z1v = z1[a, i, j]
                b2v = bs2[a, i, j]
                acc -= 2.0 * (
                    spv * (z1v * bs1[a, i, j] + z2[a, i, j] * b2v)
                    + qv * z1v * z1v * b2v
                )
                bz1[a, i, j] = pv * bs1[a, i, j] - 4.0 * spv * z1v * b2v
                bz2[a, i, j] = pv * b2v
            bz[a, j] = acc
    return bz, bz1, bz2


def _nb_adam_update(x, g, m, v, step, lr, beta1, beta2, eps):
    c1 = 1.0 - beta1**step
    c2 = 1.0 - beta2**step
    for i in range(x.shape[0]):
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i]
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i]
        x[i] -= lr * (m[i] / c1) / (math.sqrt(v[i] / c2) + eps)


numpy_impl = {
    "tanh_jet_fwd": _np_tanh_jet_fwd,
    "tanh_jet_bwd": _np_tanh_jet_bwd,
    "adam_update": _np_adam_update,
}

if NUMBA_ENABLED:
    numba_impl = {
        "tanh_jet_fwd": njit(cache=True)(_nb_tanh_jet_fwd),
        "tanh_jet_bwd": njit(cache=True)(_nb_tanh_jet_bwd),
        "adam_update": njit(cache=True)(_nb_adam_update),
    }
    _active = numba_impl
else:
    numba_impl = None
    _active = numpy_impl

tanh_jet_fwd = _active["tanh_jet_fwd"]
tanh_jet_bwd = _active["tanh_jet_bwd"]
adam_update = _active["adam_update"]
