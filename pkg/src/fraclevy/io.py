"""CSV writers and the run manifest.

CSV files are comma-separated with a header row, ``.`` decimals and LF line
endings; floats use the shortest round-trip representation so identical
results give identical bytes.
"""

from __future__ import annotations

import csv
import hashlib
import json
import platform
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, List, Sequence

import numpy as np
import scipy

MANIFEST = "manifest.json"


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    return path


def read_csv(path) -> tuple:
    """``(header, rows)`` with every cell as a string."""
    with open(path, newline="") as fh:
        r = list(csv.reader(fh))
    return r[0], r[1:]


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return path


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def versions() -> dict:
    from . import __version__
    from ._kernels import BACKEND

    return {
        "fraclevy": __version__,
        "kernels": BACKEND,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }


def write_manifest(run_dir, cfg: dict, cfg_hash: str, seed: int, files: List[str], extra=None) -> Path:
    """List every output file with its sha256 next to the config hash, seed and versions."""
    run_dir = Path(run_dir)
    doc = {
        "config": cfg,
        "config_sha256": cfg_hash,
        "seed": int(seed),
        "versions": versions(),
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "files": {f: sha256_file(run_dir / f) for f in sorted(files)},
    }
    if extra:
        doc.update(extra)
    return write_json(run_dir / MANIFEST, doc)


def read_manifest(run_dir) -> dict:
    path = Path(run_dir) / MANIFEST
    if not path.is_file():
        raise FileNotFoundError(f"missing manifest: {path}")
    return json.loads(path.read_text())


def add_to_manifest(run_dir, files: List[str]) -> dict:
    run_dir = Path(run_dir)
    doc = read_manifest(run_dir)
    for f in files:
        doc["files"][f] = sha256_file(run_dir / f)
    doc["files"] = dict(sorted(doc["files"].items()))
    write_json(run_dir / MANIFEST, doc)
    return doc


def check_manifest(run_dir) -> List[str]:
    """Files whose content no longer matches the manifest (or that are missing)."""
    run_dir = Path(run_dir)
    doc = read_manifest(run_dir)
    bad = []
    for f, digest in doc["files"].items():
        p = run_dir / f
        if not p.is_file() or sha256_file(p) != digest:
            bad.append(f)
    return bad
