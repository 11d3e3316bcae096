"""Deterministic CSV / JSON emission.

Floats are written with ``repr`` so that a replayed run reproduces files
byte for byte; NaN becomes ``null`` in JSON and ``nan`` in CSV.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .spectral import ReciprocalFrame, mode_table, spectrum_report


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return None if not math.isfinite(x) else x
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(dumps(obj))
    return path


def _cell(x) -> str:
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return "nan" if math.isnan(x) else repr(x)
    if isinstance(x, np.integer):
        return str(int(x))
    return str(x)


def write_csv(path, rows: Iterable, columns: Sequence[str]) -> Path:
    """Rows may be dicts keyed by column or plain sequences."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            values = [row[c] for c in columns] if isinstance(row, dict) else list(row)
            writer.writerow([_cell(v) for v in values])
    return path


def write_grid(path, grid) -> Path:
    """A 2-D array as a headerless CSV grid."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for row in np.atleast_2d(grid):
            writer.writerow([_cell(float(v)) for v in row])
    return path


MODE_COLUMNS = ("i", "lambda", "a0", "b0", "x0", "y0", "E_saddle")


@dataclass
class SpectralReport:
    """Collected analysis results for one model; each section is optional."""

    spectrum: dict
    modes: list[dict]
    sections: dict = field(default_factory=dict)

    @classmethod
    def from_frame(cls, frame: ReciprocalFrame, bins: int = 50, law=None) -> "SpectralReport":
        return cls(spectrum_report(frame, law, bins=bins), mode_table(frame))

    def add(self, name: str, payload) -> "SpectralReport":
        self.sections[name] = payload
        return self

    def as_dict(self) -> dict:
        out = {"spectrum": self.spectrum, "modes": self.modes}
        out.update(self.sections)
        return out

    def write(self, out_dir, stem: str = "spectrum") -> list[Path]:
        out_dir = Path(out_dir)
        return [write_json(out_dir / f"{stem}.json", self.as_dict()),
                write_csv(out_dir / f"{stem}_modes.csv", self.modes, MODE_COLUMNS)]


def load_json(path) -> Optional[dict]:
    return json.loads(Path(path).read_text())
