"""Binary file formats and CSV helpers.

All multi-byte values are little endian.

* ``SDPW`` wave field: magic, version u32, M1 u32, M2 u32, T u32, dx f64,
  dy f64, dt f64, then M1*M2*T f64 samples in (row, col, time) order.
* ``SDPC`` coefficient field: magic, version u32, M1 u32, M2 u32, sign byte
  (0x00 untagged, 0x01 non-negative, 0x02 non-positive), then f64 entries
  row-major.
* ``SDPM`` mask: magic, version u32, M1 u32, M2 u32, then M1*M2 bytes of
  0/1 row-major.
* ``SDPT`` checkpoint: magic, version u32, layer_count u32, hidden_width
  u32, input_dim u32, output_dim u32, input shift f64[3], input scale
  f64[3], network parameters as f64 in flat order (layer 1 weights
  row-major, layer 1 biases, layer 2 weights, ...), term count K u32, M1
  u32, M2 u32, then per term: rank u32, sign byte, label (u16 length +
  utf-8), factor U then V entries f64 row-major.
"""

from __future__ import annotations

import csv
import struct

import numpy as np

from .lowrank import CoefficientSet, CoefficientTerm, FactorPair, TermDef
from .network import MlpConfig, MlpParams, flatten_params, unflatten_params
from .wavesim import NON_NEGATIVE, NON_POSITIVE, CoefficientField, GridSpec, Mask, WaveField

FORMAT_VERSION = 1

_SIGN_BYTE = {None: 0, NON_NEGATIVE: 1, NON_POSITIVE: 2}
_BYTE_SIGN = {0: None, 1: NON_NEGATIVE, 2: NON_POSITIVE}


class FormatError(ValueError):
    pass


def _expect_magic(f, magic: bytes, path):
    got = f.read(4)
    if got != magic:
        raise FormatError(f"{path}: bad magic {got!r}, expected {magic!r}")
    (version,) = struct.unpack("<I", f.read(4))
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported format version {version}")


def save_wavefield(path, field: WaveField) -> None:
    g = field.grid
    with open(path, "wb") as f:
        f.write(b"SDPW")
        f.write(struct.pack("<IIII", FORMAT_VERSION, g.M1, g.M2, g.T))
        f.write(struct.pack("<ddd", g.dx, g.dy, g.dt))
        f.write(np.ascontiguousarray(field.data, dtype="<f8").tobytes())


def load_wavefield(path) -> WaveField:
    with open(path, "rb") as f:
        _expect_magic(f, b"SDPW", path)
        m1, m2, t = struct.unpack("<III", f.read(12))
        dx, dy, dt = struct.unpack("<ddd", f.read(24))
        data = np.frombuffer(f.read(8 * m1 * m2 * t), dtype="<f8").reshape(m1, m2, t)
    return WaveField(data.astype(np.float64), GridSpec(m1, m2, t, dx, dy, dt))


def save_coefficient_field(path, field: CoefficientField) -> None:
    m1, m2 = field.shape
    with open(path, "wb") as f:
        f.write(b"SDPC")
        f.write(struct.pack("<III", FORMAT_VERSION, m1, m2))
        f.write(struct.pack("<B", _SIGN_BYTE[field.sign]))
        f.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())


def load_coefficient_field(path) -> CoefficientField:
    with open(path, "rb") as f:
        _expect_magic(f, b"SDPC", path)
        m1, m2 = struct.unpack("<II", f.read(8))
        (sign_byte,) = struct.unpack("<B", f.read(1))
        values = np.frombuffer(f.read(8 * m1 * m2), dtype="<f8").reshape(m1, m2)
    return CoefficientField(values.astype(np.float64), _BYTE_SIGN[sign_byte])


def save_mask(path, mask: Mask) -> None:
    with open(path, "wb") as f:
        f.write(b"SDPM")
        f.write(struct.pack("<III", FORMAT_VERSION, mask.shape[0], mask.shape[1]))
        f.write(mask.bool_matrix().astype(np.uint8).tobytes())


def load_mask(path) -> Mask:
    with open(path, "rb") as f:
        _expect_magic(f, b"SDPM", path)
        m1, m2 = struct.unpack("<II", f.read(8))
        flags = np.frombuffer(f.read(m1 * m2), dtype=np.uint8).reshape(m1, m2)
    rows, cols = np.nonzero(flags)
    return Mask.from_indices((m1, m2), rows, cols)


def save_checkpoint(path, config: MlpConfig, params: MlpParams, coeffs: CoefficientSet | None = None) -> None:
    with open(path, "wb") as f:
        f.write(b"SDPT")
        f.write(
            struct.pack(
                "<IIIII",
                FORMAT_VERSION,
                config.layer_count,
                config.hidden_width,
                config.input_dim,
                config.output_dim,
            )
        )
        f.write(np.asarray(params.input_shift, dtype="<f8").tobytes())
        f.write(np.asarray(params.input_scale, dtype="<f8").tobytes())
        f.write(np.ascontiguousarray(flatten_params(params), dtype="<f8").tobytes())
        terms = list(coeffs) if coeffs is not None else []
        if terms:
            m1 = terms[0].factors.u.shape[0]
            m2 = terms[0].factors.v.shape[0]
        else:
            m1 = m2 = 0
        f.write(struct.pack("<III", len(terms), m1, m2))
        for term in terms:
            label = term.spec.label.encode("utf-8")
            f.write(struct.pack("<IBH", term.factors.rank_budget, _SIGN_BYTE[term.spec.sign], len(label)))
            f.write(label)
            f.write(np.ascontiguousarray(term.factors.u, dtype="<f8").tobytes())
            f.write(np.ascontiguousarray(term.factors.v, dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[MlpConfig, MlpParams, CoefficientSet | None]:
    with open(path, "rb") as f:
        _expect_magic(f, b"SDPT", path)
        layer_count, width, input_dim, output_dim = struct.unpack("<IIII", f.read(16))
        shift = np.frombuffer(f.read(8 * input_dim), dtype="<f8")
        scale = np.frombuffer(f.read(8 * input_dim), dtype="<f8")
        config = MlpConfig(
            layer_count, width, input_dim, output_dim,
            tuple(float(x) for x in shift), tuple(float(x) for x in scale),
        )
        n = config.param_count()
        params = unflatten_params(config, np.frombuffer(f.read(8 * n), dtype="<f8").astype(np.float64))
        params.input_shift = shift.astype(np.float64)
        params.input_scale = scale.astype(np.float64)
        k, m1, m2 = struct.unpack("<III", f.read(12))
        terms = []
        for _ in range(k):
            rank, sign_byte, label_len = struct.unpack("<IBH", f.read(7))
            label = f.read(label_len).decode("utf-8")
            u = np.frombuffer(f.read(8 * m1 * rank), dtype="<f8").reshape(m1, rank)
            v = np.frombuffer(f.read(8 * m2 * rank), dtype="<f8").reshape(m2, rank)
            sign = _BYTE_SIGN[sign_byte]
            kind = "laplacian" if label == "c2" else "u_t"
            terms.append(
                CoefficientTerm(
                    TermDef(label, kind, sign or NON_NEGATIVE, rank),
                    FactorPair(u.astype(np.float64), v.astype(np.float64)),
                )
            )
    return config, params, (CoefficientSet(terms) if terms else None)


def write_matrix_csv(path, values: np.ndarray) -> None:
    """Plain CSV dump of a 2-D array (plotting convenience)."""
    np.savetxt(path, np.asarray(values), delimiter=",", fmt="%.17g")


def write_history_csv(path, rows, columns) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(columns)
        w.writerows(rows)
