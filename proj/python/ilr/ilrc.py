"""ILRC1 classifier weight files: magic, class count, feature count, f64 weights, f64 bias (little endian)."""

import struct

import numpy as np

MAGIC = b"ILRC1"


def read_ilrc(path):
    """Returns (weights[k, n], bias[k])."""
    with open(path, "rb") as f:
        data = f.read()
    if data[:5] != MAGIC:
        raise ValueError("not an ILRC1 file")
    k, n = struct.unpack_from("<II", data, 5)
    expected = 13 + 8 * (k * n + k)
    if len(data) != expected:
        raise ValueError(f"ILRC1 size {len(data)}, expected {expected}")
    values = np.frombuffer(data, dtype="<f8", offset=13)
    return values[: k * n].reshape(k, n).copy(), values[k * n :].copy()


def write_ilrc(path, weights, bias):
    weights = np.asarray(weights, dtype="<f8")
    bias = np.asarray(bias, dtype="<f8")
    k, n = weights.shape
    if bias.shape != (k,):
        raise ValueError("bias length must match the class count")
    with open(path, "wb") as f:
        f.write(MAGIC + struct.pack("<II", k, n))
        f.write(weights.tobytes())
        f.write(bias.tobytes())
