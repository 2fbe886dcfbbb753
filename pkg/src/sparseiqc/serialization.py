"""JSON documents for instances, generator configs and certificates.

Every document carries ``schema_version`` and ``kind``. Matrices are stored
as ``{"shape": [r, c], "data": nested rows}`` so empty blocks keep their
shape; the interconnection is stored as coordinate triplets. Infinite
frequencies are written as the string ``"inf"``.
"""

from __future__ import annotations

import json
import math
import os

import numpy as np
import scipy.sparse as sp

from .lti import StateSpaceSystem
from .model import (
    InterconnectedSystem,
    InterconnectionMatrix,
    IqcMultiplierSpec,
    Subsystem,
)

__all__ = [
    "SCHEMA_VERSION",
    "system_to_dict",
    "system_from_dict",
    "save_json",
    "load_json",
    "save_system",
    "load_system",
    "encode_float",
    "decode_float",
]

SCHEMA_VERSION = 1


def encode_float(x):
    if x is None:
        return None
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return x


def decode_float(x) -> float:
    return float(x)


def _matrix_to_dict(a) -> dict:
    a = np.asarray(a, dtype=float)
    return {"shape": list(a.shape), "data": a.tolist()}


def _matrix_from_dict(d) -> np.ndarray:
    shape = tuple(d["shape"])
    a = np.asarray(d["data"], dtype=float)
    return a.reshape(shape)


def _ss_to_dict(sys: StateSpaceSystem) -> dict:
    return {k: _matrix_to_dict(getattr(sys, k)) for k in "ABCD"}


def _ss_from_dict(d) -> StateSpaceSystem:
    return StateSpaceSystem(*(_matrix_from_dict(d[k]) for k in "ABCD"))


def system_to_dict(sys: InterconnectedSystem, **extra) -> dict:
    g = sys.interconnection
    coo = g.matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    doc = {
        "schema_version": SCHEMA_VERSION,
        "kind": "interconnected_system",
        "subsystems": [
            {
                **{name: _ss_to_dict(block) for name, block in sub.blocks().items()},
                "uncertainty": {"kind": sub.uncertainty.kind.value, "dim": sub.uncertainty.dim},
            }
            for sub in sys.subsystems
        ],
        "interconnection": {
            "in_sizes": list(g.in_sizes),
            "out_sizes": list(g.out_sizes),
            "binary": g.binary,
            "rows": coo.row[order].tolist(),
            "cols": coo.col[order].tolist(),
            "values": coo.data[order].tolist(),
        },
        "adjacency": None,
    }
    if sys.adjacency is not None:
        A = np.asarray(sys.adjacency)
        i, j = np.nonzero(np.triu(A))
        doc["adjacency"] = {"N": int(A.shape[0]), "edges": [[int(a), int(b)] for a, b in zip(i, j)]}
    doc.update(extra)
    return doc


def _check_header(doc, kind):
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema_version {version!r}")
    if doc.get("kind") != kind:
        raise ValueError(f"expected a {kind!r} document, got {doc.get('kind')!r}")


def system_from_dict(doc: dict) -> InterconnectedSystem:
    _check_header(doc, "interconnected_system")
    subs = []
    for s in doc["subsystems"]:
        u = s.get("uncertainty") or {}
        blocks = {name: _ss_from_dict(s[name]) for name in ("pq", "pw", "zq", "zw")}
        spec = IqcMultiplierSpec(int(u["dim"]), u.get("kind", "parametric_scalar")) if u else None
        subs.append(Subsystem(uncertainty=spec, **blocks))
    g = doc["interconnection"]
    ins, outs = g["in_sizes"], g["out_sizes"]
    mat = sp.csr_matrix(
        (np.asarray(g["values"], dtype=float), (np.asarray(g["rows"], dtype=int), np.asarray(g["cols"], dtype=int))),
        shape=(sum(ins), sum(outs)),
    )
    gamma = InterconnectionMatrix(mat, ins, outs, binary=bool(g.get("binary", True)))
    adjacency = None
    if doc.get("adjacency"):
        a = doc["adjacency"]
        adjacency = np.zeros((a["N"], a["N"]), dtype=np.int8)
        for i, j in a["edges"]:
            adjacency[i, j] = adjacency[j, i] = 1
    return InterconnectedSystem(tuple(subs), gamma, adjacency)


def save_json(doc: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True, allow_nan=False)
        fh.write("\n")


def load_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def save_system(sys: InterconnectedSystem, path, **extra) -> None:
    save_json(system_to_dict(sys, **extra), path)


def load_system(path) -> InterconnectedSystem:
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    return system_from_dict(load_json(path))
