"""Planar checkerboard model.

Board frame B: origin at corner 0, x along columns, y along rows, z out of
the plane. Corner i = r * cols + c sits at (c * spacing, r * spacing, 0).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mchec.errors import ValidationError


@dataclass(frozen=True)
class BoardModel:
    rows: int
    cols: int
    spacing: float  # meters

    def __post_init__(self) -> None:
        if self.rows < 2 or self.cols < 2:
            raise ValidationError(f"board needs at least 2x2 inner corners, got {self.rows}x{self.cols}")
        if not self.spacing > 0:
            raise ValidationError(f"board spacing must be positive, got {self.spacing}")

    @property
    def corner_count(self) -> int:
        return self.rows * self.cols

    def corner_points(self) -> np.ndarray:
        return corner_points(self)

    def center(self) -> np.ndarray:
        return np.array([(self.cols - 1) * self.spacing / 2.0, (self.rows - 1) * self.spacing / 2.0, 0.0])


def corner_points(b: BoardModel) -> np.ndarray:
    """(L, 3) control points P_i^B in row-major order."""
    r, c = np.divmod(np.arange(b.corner_count), b.cols)
    return np.column_stack([c * b.spacing, r * b.spacing, np.zeros(b.corner_count)])
