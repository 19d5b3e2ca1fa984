"""JSON persistence for trained maps and trace solutions.

Matrices are stored row-major as nested lists together with their
dimensions, under a versioned envelope, so map files written by the CLI can
be validated and reloaded exactly (floats survive the JSON round trip
bit-for-bit via shortest-repr encoding).
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .train import AffineMap, TraceSolution

FORMAT_VERSION = 1


def _encode_matrix(m: np.ndarray) -> dict:
    m = np.asarray(m, dtype=np.float64)
    return {"rows": int(m.shape[0]), "cols": int(m.shape[1]), "data": m.tolist()}


def _decode_matrix(obj: dict, name: str) -> np.ndarray:
    m = np.asarray(obj["data"], dtype=np.float64)
    if m.size == 0:
        m = m.reshape(obj["rows"], obj["cols"])
    if m.shape != (obj["rows"], obj["cols"]):
        raise ValueError(
            f"{name}: data shape {m.shape} does not match declared "
            f"({obj['rows']}, {obj['cols']})"
        )
    return m


def _check_envelope(obj: dict, kind: str) -> None:
    if obj.get("format_version") != FORMAT_VERSION:
        raise ValueError(
            f"unsupported format_version {obj.get('format_version')!r}, "
            f"expected {FORMAT_VERSION}"
        )
    if obj.get("kind") != kind:
        raise ValueError(f"expected kind {kind!r}, got {obj.get('kind')!r}")


def map_to_dict(m: AffineMap) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "kind": "affine_map",
        "source_dim": m.source_dim,
        "target_dim": m.target_dim,
        "a": _encode_matrix(m.a),
        "b": [float(v) for v in m.b],
    }


def map_from_dict(obj: dict) -> AffineMap:
    _check_envelope(obj, "affine_map")
    a = _decode_matrix(obj["a"], "a")
    b = np.asarray(obj["b"], dtype=np.float64)
    return AffineMap(
        a=a, b=b, source_dim=int(obj["source_dim"]), target_dim=int(obj["target_dim"])
    )


def trace_solution_to_dict(sol: TraceSolution) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "kind": "trace_solution",
        "a": _encode_matrix(sol.a),
        "b": _encode_matrix(sol.b),
        "d1_opt": _encode_matrix(sol.d1_opt),
        "d2_opt": _encode_matrix(sol.d2_opt),
        "r_minus": sol.r_minus,
        "achieved_trace": sol.achieved_trace,
    }


def trace_solution_from_dict(obj: dict) -> TraceSolution:
    _check_envelope(obj, "trace_solution")
    return TraceSolution(
        a=_decode_matrix(obj["a"], "a"),
        b=_decode_matrix(obj["b"], "b"),
        d1_opt=_decode_matrix(obj["d1_opt"], "d1_opt"),
        d2_opt=_decode_matrix(obj["d2_opt"], "d2_opt"),
        r_minus=int(obj["r_minus"]),
        achieved_trace=float(obj["achieved_trace"]),
    )


def save_maps(path, maps: dict[str, AffineMap], metadata: dict | None = None) -> None:
    """Write a named collection of affine maps plus free-form metadata."""
    doc = {
        "format_version": FORMAT_VERSION,
        "kind": "cgmca_map_file",
        "metadata": metadata or {},
        "maps": {name: map_to_dict(m) for name, m in maps.items()},
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_maps(path) -> tuple[dict[str, AffineMap], dict]:
    doc = json.loads(Path(path).read_text())
    _check_envelope(doc, "cgmca_map_file")
    maps = {name: map_from_dict(obj) for name, obj in doc["maps"].items()}
    return maps, doc.get("metadata", {})
