"""JSON container for TT vectors and operators.

Layout: a header with dimension, mode sizes and rank chain, plus the cores
as flat scalar arrays in the canonical (r_left, mode, r_right) row-major
order.  Python's json module serializes doubles with shortest round-trip
repr, so finite values survive a save/load cycle bit-exactly.
"""

from __future__ import annotations

import json

import numpy as np

from .dense import InputError
from .tt import TtMatrix, TtVector

FORMAT_VECTOR = "tt-vector"
FORMAT_MATRIX = "tt-matrix"
CONTAINER_VERSION = 1


def vector_to_dict(x: TtVector) -> dict:
    return {
        "format": FORMAT_VECTOR,
        "version": CONTAINER_VERSION,
        "ndim": x.ndim,
        "mode_sizes": list(x.mode_sizes),
        "ranks": list(x.ranks),
        "cores": [c.reshape(-1).tolist() for c in x.cores],
    }


def vector_from_dict(doc: dict) -> TtVector:
    if doc.get("format") != FORMAT_VECTOR:
        raise InputError(f"not a TT vector container: {doc.get('format')!r}")
    ranks = doc["ranks"]
    modes = doc["mode_sizes"]
    cores = tuple(
        np.asarray(flat, dtype=float).reshape(ranks[k], modes[k], ranks[k + 1])
        for k, flat in enumerate(doc["cores"])
    )
    return TtVector(cores=cores)


def matrix_to_dict(A: TtMatrix) -> dict:
    return {
        "format": FORMAT_MATRIX,
        "version": CONTAINER_VERSION,
        "ndim": A.ndim,
        "row_mode_sizes": list(A.row_mode_sizes),
        "col_mode_sizes": list(A.col_mode_sizes),
        "ranks": list(A.ranks),
        "cores": [c.reshape(-1).tolist() for c in A.cores],
    }


def matrix_from_dict(doc: dict) -> TtMatrix:
    if doc.get("format") != FORMAT_MATRIX:
        raise InputError(f"not a TT matrix container: {doc.get('format')!r}")
    ranks = doc["ranks"]
    rows = doc["row_mode_sizes"]
    cols = doc["col_mode_sizes"]
    cores = tuple(
        np.asarray(flat, dtype=float).reshape(ranks[k], rows[k], cols[k], ranks[k + 1])
        for k, flat in enumerate(doc["cores"])
    )
    return TtMatrix(cores=cores)


def save(obj, path):
    """Write a TtVector or TtMatrix to a JSON file."""
    if isinstance(obj, TtVector):
        doc = vector_to_dict(obj)
    elif isinstance(obj, TtMatrix):
        doc = matrix_to_dict(obj)
    else:
        raise InputError(f"cannot serialize {type(obj).__name__}")
    with open(path, "w") as f:
        json.dump(doc, f)


def load(path):
    """Read a TtVector or TtMatrix back from a JSON file."""
    with open(path) as f:
        doc = json.load(f)
    fmt = doc.get("format")
    if fmt == FORMAT_VECTOR:
        return vector_from_dict(doc)
    if fmt == FORMAT_MATRIX:
        return matrix_from_dict(doc)
    raise InputError(f"unknown container format {fmt!r}")
