"""Least-squares power-law fits on log-log data."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class ExponentFit:
    samples: tuple  # (log x, log y) pairs
    slope: float
    intercept: float
    residual: float  # max |log y - fit|

    @property
    def decades(self) -> float:
        lx = np.array([s[0] for s in self.samples])
        return float((lx.max() - lx.min()) / np.log(10.0))

    def as_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "residual": self.residual,
            "n_samples": len(self.samples),
            "decades": self.decades,
        }


def fit_power_law(x, y, min_samples: int = 4, min_decades: float = 0.0) -> ExponentFit:
    """Fit log y = slope * log x + intercept.

    Nonpositive entries are rejected rather than silently dropped.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise FitError("x and y differ in shape")
    if x.size < min_samples:
        raise FitError(f"need at least {min_samples} samples, got {x.size}")
    if np.any(x <= 0) or np.any(y <= 0):
        raise FitError("power-law fit needs positive data")
    lx, ly = np.log(x), np.log(y)
    span = (lx.max() - lx.min()) / np.log(10.0)
    if span <= 0 or span < min_decades:
        raise FitError(f"samples span {span:.3g} decades, need {min_decades}")
    slope, intercept = np.polyfit(lx, ly, 1)
    residual = float(np.max(np.abs(ly - (slope * lx + intercept))))
    return ExponentFit(tuple(zip(lx.tolist(), ly.tolist())), float(slope), float(intercept), residual)
