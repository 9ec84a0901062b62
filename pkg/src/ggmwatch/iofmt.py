"""File formats: matrix files, flat config files, run manifests, result files.

Matrix file: first line ``p <dim>``, then p rows of p space-separated floats
printed with 17 significant digits (round-trip exact for binary64).

Config file: flat ``key=value`` lines; blank lines and ``#`` comments ignored.

All writers are byte-deterministic for identical inputs (no timestamps).
"""

from __future__ import annotations

import hashlib
import json
import os

import numpy as np

__all__ = [
    "format_float",
    "write_matrix",
    "read_matrix",
    "load_config",
    "sha256_file",
    "write_manifest",
    "manifest_dict",
    "write_result_csv",
    "write_result_ndjson",
]


def format_float(x: float) -> str:
    return f"{float(x):.17g}"


def write_matrix(path: str, m: np.ndarray) -> None:
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    with open(path, "w") as fh:
        fh.write(f"p {a.shape[0]}\n")
        for row in a:
            fh.write(" ".join(format_float(v) for v in row) + "\n")


def read_matrix(path: str) -> np.ndarray:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2 or header[0] != "p":
            raise ValueError(f"{path}: expected header 'p <dim>', got {header!r}")
        p = int(header[1])
        rows = []
        for line in fh:
            line = line.strip()
            if line:
                rows.append([float(tok) for tok in line.split()])
    a = np.array(rows, dtype=np.float64)
    if a.shape != (p, p):
        raise ValueError(f"{path}: expected {p}x{p} body, got shape {a.shape}")
    return a


def load_config(path: str) -> dict[str, str]:
    out: dict[str, str] = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, value = line.partition("=")
            out[key.strip()] = value.strip()
    return out


def sha256_file(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            digest.update(block)
    return digest.hexdigest()


def manifest_dict(
    command: list[str],
    config_path: str | None,
    master_seed: int | None,
    input_paths: list[str],
    tool_version: str,
) -> dict:
    return {
        "command": command,
        "config": config_path,
        "master_seed": master_seed,
        "inputs": {os.path.basename(p): sha256_file(p) for p in sorted(input_paths)},
        "tool_version": tool_version,
    }


def write_manifest(path: str, manifest: dict) -> None:
    with open(path, "w") as fh:
        fh.write(json.dumps(manifest, sort_keys=True) + "\n")


def _cell_params_str(cell: dict) -> str:
    parts = []
    for key in sorted(cell):
        v = cell[key]
        parts.append(f"{key}={format_float(v) if isinstance(v, float) else v}")
    return ";".join(parts)


def write_result_csv(result, path: str) -> None:
    """One row per cell per metric: experiment,cell,params,metric,value,se,n."""
    with open(path, "w") as fh:
        fh.write("experiment,cell,params,metric,value,se,n\n")
        for idx, cell in enumerate(result.cells):
            params = _cell_params_str(cell.cell)
            for name in sorted(cell.metrics):
                m = cell.metrics[name]
                se = "" if m.se is None else format_float(m.se)
                fh.write(
                    f"{result.kind},{idx},{params},{name},"
                    f"{format_float(m.value)},{se},{cell.n}\n"
                )


def write_result_ndjson(result, path: str) -> None:
    """One JSON object per cell, plus a leading provenance object."""
    with open(path, "w") as fh:
        fh.write(
            json.dumps(
                {"type": "provenance", "experiment": result.kind, **result.provenance},
                sort_keys=True,
            )
            + "\n"
        )
        for idx, cell in enumerate(result.cells):
            obj = {
                "type": "cell",
                "experiment": result.kind,
                "index": idx,
                "cell": cell.cell,
                "n": cell.n,
                "metrics": {
                    k: {"value": v.value, "se": v.se} for k, v in sorted(cell.metrics.items())
                },
            }
            if cell.series is not None:
                obj["series"] = cell.series
            fh.write(json.dumps(obj, sort_keys=True) + "\n")
