"""Spatial densities on the periodic box, shared by all solvers."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidInputError


@dataclass
class MacroField:
    """Cell-centred values of a density on ``[0, L)^dim``."""

    values: np.ndarray
    L: float
    label: str = "density"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim not in (1, 2):
            raise InvalidInputError("MacroField supports 1-D and 2-D grids only")
        if not np.all(np.isfinite(self.values)):
            raise InvalidInputError("MacroField values must be finite")
        if not self.L > 0:
            raise InvalidInputError("box length L must be > 0")

    @property
    def dim(self) -> int:
        return self.values.ndim

    @property
    def Nx(self) -> int:
        return self.values.shape[0]

    @property
    def dx(self) -> float:
        return self.L / self.Nx

    @property
    def cell_volume(self) -> float:
        return self.dx ** self.dim

    def centers(self) -> np.ndarray:
        return (np.arange(self.Nx) + 0.5) * self.dx

    def integral(self) -> float:
        return float(self.values.sum() * self.cell_volume)

    def mean(self) -> float:
        return float(self.values.mean())

    def l1_distance(self, other: "MacroField") -> float:
        self._check_compatible(other)
        return float(np.abs(self.values - other.values).sum() * self.cell_volume)

    def l2_distance(self, other: "MacroField") -> float:
        self._check_compatible(other)
        return float(np.sqrt(((self.values - other.values) ** 2).sum() * self.cell_volume))

    def _check_compatible(self, other):
        if self.values.shape != other.values.shape or not np.isclose(self.L, other.L):
            raise InvalidInputError(
                f"incompatible fields: shape {self.values.shape} vs {other.values.shape}, L {self.L} vs {other.L}"
            )

    @classmethod
    def from_function(cls, f, L: float, Nx: int, dim: int = 1, label: str = "density") -> "MacroField":
        x = (np.arange(Nx) + 0.5) * L / Nx
        if dim == 1:
            return cls(f(x), L, label)
        X, Y = np.meshgrid(x, x, indexing="ij")
        return cls(f(X, Y), L, label)

    # -- CSV ---------------------------------------------------------------
    def to_csv(self, path=None) -> str:
        """Two-column ``x,value`` CSV (1-D) or ``x1,x2,value`` (2-D)."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        x = self.centers()
        if self.dim == 1:
            w.writerow(["x", "value"])
            for xi, v in zip(x, self.values):
                w.writerow([repr(float(xi)), repr(float(v))])
        else:
            w.writerow(["x1", "x2", "value"])
            for i, xi in enumerate(x):
                for j, xj in enumerate(x):
                    w.writerow([repr(float(xi)), repr(float(xj)), repr(float(self.values[i, j]))])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, path, L: float | None = None, label: str = "density") -> "MacroField":
        rows = list(csv.reader(Path(path).read_text().splitlines()))
        header, body = rows[0], rows[1:]
        if len(header) == 2:
            x = np.array([float(r[0]) for r in body])
            vals = np.array([float(r[1]) for r in body])
            if L is None:
                L = float(2 * x[0] * len(x))
            return cls(vals, L, label)
        n = int(round(np.sqrt(len(body))))
        vals = np.array([float(r[2]) for r in body]).reshape(n, n)
        if L is None:
            L = float(2 * float(body[0][0]) * n)
        return cls(vals, L, label)
