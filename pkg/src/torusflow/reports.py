"""Plot-ready CSV and JSON emission.

Every file carries the same two provenance facts: the tool version and a
sha256 digest of the canonical (sorted, separator-free) JSON encoding of the
run configuration.  CSVs put them in leading `#` comments, JSON in a `meta`
object.  Floats are printed with %.17g so a reader recovers the exact
double, which is what makes byte-identical reruns a meaningful promise.
Writes go to a temp file in the destination directory and are renamed into
place, so a crashed run never leaves a half-written report.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

from . import __version__
from .flow import DiffeoMap
from .spectral import VectorField

__all__ = [
    "config_digest",
    "write_csv",
    "write_json",
    "write_field_csv",
    "write_trajectory_csv",
    "write_diffeo_csv",
    "write_curvature_csv",
]

FLOAT_FORMAT = "%.17g"


def config_digest(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _format_cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int,)):
        return str(value)
    if isinstance(value, float):
        return FLOAT_FORMAT % value
    return str(value)


def _atomic_write_text(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence], digest: str) -> None:
    lines = [
        f"# tool: torusflow {__version__}",
        f"# config_sha256: {digest}",
        ",".join(header),
    ]
    for row in rows:
        lines.append(",".join(_format_cell(v) for v in row))
    _atomic_write_text(Path(path), "\n".join(lines) + "\n")


def write_json(path, payload: dict, digest: str) -> None:
    body = dict(payload)
    body["meta"] = {"tool": f"torusflow {__version__}", "config_sha256": digest}
    _atomic_write_text(Path(path), json.dumps(body, indent=2, sort_keys=True) + "\n")


def write_field_csv(path, u: VectorField, digest: str) -> None:
    """Velocity snapshot as x,y,u1,u2 rows over the grid, row-major."""
    grid = u.grid
    pts = grid.points
    rows = zip(pts[:, 0], pts[:, 1], u.u1.values.ravel(), u.u2.values.ravel())
    write_csv(path, ("x", "y", "u1", "u2"), rows, digest)


def write_trajectory_csv(path, report, digest: str) -> None:
    """Conservation time series as t,hamiltonian,h1_energy,sup_u rows."""
    rows = zip(report.times, report.hamiltonian, report.h1_energy, report.sup_u)
    write_csv(path, ("t", "hamiltonian", "h1_energy", "sup_u"), rows, digest)


def write_diffeo_csv(path, phi: DiffeoMap, digest: str) -> None:
    """Deformation snapshot as x,y,d1,d2 rows over the grid, row-major."""
    d = phi.displacement
    pts = d.grid.points
    rows = zip(pts[:, 0], pts[:, 1], d.u1.values.ravel(), d.u2.values.ravel())
    write_csv(path, ("x", "y", "d1", "d2"), rows, digest)


def write_curvature_csv(path, rows: Iterable[dict], digest: str) -> None:
    """Curvature sweep rows keyed by wavenumber pair and basis index."""
    header = ("k1", "k2", "i", "S_formula", "S_direct", "S_closed_form",
              "gamma_terms", "r_term")
    write_csv(path, header, ([row[k] for k in header] for row in rows), digest)
