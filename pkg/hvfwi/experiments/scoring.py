import sys
from dataclasses import dataclass
from typing import Union

import numpy as np

from hvfwi.physics.helmholtz import VelocityModel2D
from hvfwi.utils.errors import MismatchedGeometry

Grid = Union[VelocityModel2D, np.ndarray]


@dataclass
class QualityScore:
    rmse: float  # m/s
    psnr: float  # dB, peak is the range of the reference
    degenerate_reference: bool = False

    def to_dict(self) -> dict:
        return dict(rmse=self.rmse, psnr=self.psnr, degenerate_reference=self.degenerate_reference)


def _velocity(grid: Grid) -> np.ndarray:
    return np.asarray(grid.c if isinstance(grid, VelocityModel2D) else grid, dtype=np.float64)


def score(model: Grid, reference: Grid) -> QualityScore:
    c, c_ref = _velocity(model), _velocity(reference)
    if c.shape != c_ref.shape:
        raise MismatchedGeometry("Cannot score a {} model against a {} reference".format(c.shape, c_ref.shape))
    rmse = float(np.sqrt(np.mean((c - c_ref) ** 2)))
    peak = float(np.max(c_ref) - np.min(c_ref))
    if peak == 0:
        print("[hvfwi] Warning: constant reference, PSNR reported as inf", file=sys.stderr)
        return QualityScore(rmse=rmse, psnr=float("inf"), degenerate_reference=True)
    psnr = float("inf") if rmse == 0 else float(20 * np.log10(peak / rmse))
    return QualityScore(rmse=rmse, psnr=psnr)
