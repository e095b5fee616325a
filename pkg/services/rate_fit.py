# -*- coding: utf-8 -*-
"""Least-squares slopes on log-log ladders"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

import config


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    residual: float
    rungs: int
    exact: bool = False


def fit_loglog_slope(x, y, rungs: int | None = None, floor: float | None = None, noise=None) -> SlopeFit:
    """
    Fit log y = slope * log x + c over the last `rungs` points of the ladder.
    Ladders where every value sits below `floor` are reported as exact.
    `noise` (scalar or one value per point) drops points at or below their
    roundoff level before the fit; fewer than two survivors count as exact.
    """
    floor = config.EXACT_FLOOR if floor is None else floor
    xs = np.asarray(x, dtype=float)
    ys = np.asarray(y, dtype=float)
    if xs.shape != ys.shape or xs.size < 2:
        raise ValueError("need at least two (x, y) pairs of equal length")
    level = np.zeros_like(ys) if noise is None else np.broadcast_to(np.asarray(noise, dtype=float), ys.shape)
    if rungs is not None:
        xs, ys, level = xs[-rungs:], ys[-rungs:], level[-rungs:]

    if np.all(ys <= floor):
        return SlopeFit(float("nan"), float("nan"), 0.0, int(xs.size), exact=True)

    keep = (ys > 0) & (ys > level)
    if keep.sum() < 2:
        return SlopeFit(float("nan"), float("nan"), 0.0, int(keep.sum()), exact=True)

    lx, ly = np.log(xs[keep]), np.log(ys[keep])
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = float(np.sqrt(np.mean((ly - (slope * lx + intercept)) ** 2)))
    return SlopeFit(float(slope), float(intercept), resid, int(keep.sum()))
