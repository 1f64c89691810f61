"""Calibrated detection on top of one-class outputs.

The health indicator is the residual |1 - Y|. Calibration fixes a threshold
gamma · percentile_p(validation residuals); the decision rule labels a point
abnormal when its residual exceeds the threshold, and the magnification
coefficient (residual / threshold) grades how far past the boundary it lies.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .data import as_vector


@dataclass(frozen=True)
class DetectorConfig:
    gamma: float
    p: float = 99.5
    threshold: float = 0.0   # > 0 once calibrated

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("gamma must be > 0")
        if not 0.0 < self.p <= 100.0:
            raise ValueError("p must lie in (0, 100]")


@dataclass(frozen=True)
class Detection:
    score: float           # |1 - Y|
    label: int             # +1 healthy, -1 abnormal
    magnification: float   # score / threshold


def residuals(Y) -> np.ndarray:
    return np.abs(1.0 - as_vector(Y, "Y"))


def calibrate(Y_val, gamma: float, p: float = 99.5) -> DetectorConfig:
    """Threshold = gamma · p-th percentile of validation residuals
    (linear interpolation between order statistics)."""
    r = residuals(Y_val)
    if r.size < 2:
        raise ValueError("validation vector must have length >= 2")
    thr = gamma * float(np.percentile(r, p))
    return DetectorConfig(gamma=gamma, p=p, threshold=thr)


def decide(Y_test, config: DetectorConfig) -> list[Detection]:
    """Per-point score, label, magnification. Boundary points (score equal to
    the threshold) count healthy: the sign convention takes sgn(0) = +1."""
    if config.threshold <= 0:
        raise ValueError("uncalibrated detector (threshold <= 0)")
    out = []
    for s in residuals(Y_test):
        label = 1 if s <= config.threshold else -1
        out.append(Detection(score=float(s), label=label,
                             magnification=float(s / config.threshold)))
    return out


def labels_of(detections: list[Detection]) -> np.ndarray:
    return np.array([d.label for d in detections], dtype=np.int64)


def write_detections_csv(path, detections: list[Detection]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "score", "label", "magnification"])
        for i, d in enumerate(detections):
            w.writerow([i, repr(d.score), d.label, repr(d.magnification)])
