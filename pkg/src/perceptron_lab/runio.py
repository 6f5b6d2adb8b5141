"""Deterministic run artifacts: results.csv and manifest.json.

CSV numbers are pinned to 9 significant digits with \\n line endings and no
locale dependence, so identical configs produce byte-identical files. All
writes go through a temp file and os.replace.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile

import numpy as np

__all__ = ["format_cell", "write_results", "write_json", "write_manifest", "sha256_file"]


def format_cell(value) -> str:
    """Locale-independent cell: ints verbatim, floats %.9g, None empty."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        x = float(value)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return "%.9g" % x
    return str(value)


def _atomic_write_text(path: str, text: str) -> None:
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=False)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_results(directory: str, header: list[str], rows) -> str:
    """results.csv with a mandatory header row; returns the path."""
    os.makedirs(directory, exist_ok=True)
    lines = [",".join(header)]
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f"row width {len(row)} != header width {len(header)}")
        lines.append(",".join(format_cell(v) for v in row))
    path = os.path.join(directory, "results.csv")
    _atomic_write_text(path, "\n".join(lines) + "\n")
    return path


def write_json(path: str, obj) -> str:
    """Deterministic JSON artifact (sorted keys, two-space indent)."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    _atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return path


def sha256_file(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(
    directory: str,
    config_echo: dict,
    version: str,
    started: float,
    ended: float,
    subtask_seconds: dict,
    output_paths: list[str],
    extras: dict | None = None,
) -> str:
    """manifest.json: resolved config, version, timing, output checksums."""
    manifest = {
        "config": config_echo,
        "version": version,
        "started_unix": started,
        "ended_unix": ended,
        "wall_seconds": ended - started,
        "subtask_seconds": subtask_seconds,
        "outputs": {os.path.basename(p): "sha256:" + sha256_file(p) for p in output_paths},
    }
    if extras:
        manifest["extras"] = extras
    path = os.path.join(directory, "manifest.json")
    _atomic_write_text(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path
