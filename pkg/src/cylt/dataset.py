"""Cylindrical datasets and their CSV representation."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import CyltError

__all__ = [
    "Dataset", "ParseError", "EmptyDatasetError", "read_csv", "parse_csv", "write_csv",
    "example_dataset",
]

TWO_PI = 2.0 * math.pi


class ParseError(CyltError, ValueError):
    """Malformed dataset input; ``line`` is the 1-based offending line."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class EmptyDatasetError(ParseError):
    pass


def wrap_angles(theta) -> np.ndarray:
    out = np.mod(np.asarray(theta, dtype=float), TWO_PI)
    # mod can round up to exactly 2 pi for tiny negative inputs
    out[out >= TWO_PI] = 0.0
    return out


@dataclass(frozen=True)
class Dataset:
    """Paired observations ``(x_i, theta_i)`` with angles in ``[0, 2 pi)`` radians.

    Angles are wrapped on construction; values must be finite.
    """

    x: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        x = np.array(self.x, dtype=float).reshape(-1)
        theta = np.array(self.theta, dtype=float).reshape(-1)
        if x.shape != theta.shape:
            raise ValueError(f"x and theta lengths differ: {x.size} vs {theta.size}")
        if x.size == 0:
            raise EmptyDatasetError("dataset has no observations")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(theta))):
            raise ValueError("dataset values must be finite")
        theta = wrap_angles(theta)
        x.setflags(write=False)
        theta.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "theta", theta)

    @property
    def n(self) -> int:
        return int(self.x.size)

    def __len__(self) -> int:
        return self.n

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return np.array_equal(self.x, other.x) and np.array_equal(self.theta, other.theta)

    __hash__ = None

    def shifted(self, c: float) -> "Dataset":
        return Dataset(self.x + c, self.theta)

    def rotated(self, delta: float) -> "Dataset":
        return Dataset(self.x, self.theta + delta)


def parse_csv(text: str, angle_unit: str = "radians") -> Dataset:
    """Parse two-column ``x,theta`` text.

    A first data line that does not parse as numbers (e.g. ``x,theta``) is
    taken as a header; blank lines and lines starting with ``#`` are skipped.
    ``angle_unit="degrees"`` converts theta to radians before wrapping.
    """
    if angle_unit not in ("radians", "degrees"):
        raise ValueError(f"angle_unit must be 'radians' or 'degrees', got {angle_unit!r}")
    xs, ts = [], []
    seen_content = False
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
            continue
        cells = [c.strip() for c in row]
        if len(cells) != 2:
            raise ParseError(f"expected 2 columns, found {len(cells)}", lineno)
        try:
            x, t = float(cells[0]), float(cells[1])
        except ValueError:
            if not seen_content:
                seen_content = True
                continue
            raise ParseError(f"non-numeric value in {cells!r}", lineno) from None
        seen_content = True
        if not (math.isfinite(x) and math.isfinite(t)):
            raise ParseError(f"non-finite value in {cells!r}", lineno)
        xs.append(x)
        ts.append(t)
    if not xs:
        raise EmptyDatasetError("dataset has no observations")
    theta = np.asarray(ts)
    if angle_unit == "degrees":
        theta = np.deg2rad(theta)
    return Dataset(np.asarray(xs), theta)


def read_csv(path: str | Path, angle_unit: str = "radians") -> Dataset:
    return parse_csv(Path(path).read_text(encoding="utf-8"), angle_unit)


def write_csv(data: Dataset, path: str | Path | None = None) -> str:
    """Write ``x,theta`` rows (header included, radians, ``repr`` precision).

    Returns the text; writes it to ``path`` when given.
    """
    lines = ["x,theta"]
    lines += [f"{x!r},{t!r}" for x, t in zip(data.x.tolist(), data.theta.tolist())]
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def example_dataset() -> Dataset:
    """The bundled 19-observation synthetic wind-direction/ozone stand-in.

    The rows are model draws, not real measurements; see the file header.
    """
    from importlib.resources import files

    return parse_csv(files("cylt").joinpath("data/ozone_wind_synthetic.csv").read_text("utf-8"))
