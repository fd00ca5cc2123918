"""Time parameterizations: angular schedules and derived concentrations.

The angle grows monotonically toward pi/2 over T steps; the matching
concentration is kappa_t = cot(theta_t), so the process moves from
near-deterministic (kappa huge) to uniform (kappa near 0). The terminal
angle is clipped just below pi/2 to keep cot positive and finite.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import expit

from .errors import InvalidLength

THETA_CLIP = 1e-6
THETA_MAX = np.pi / 2 - THETA_CLIP


class ScheduleShape(str, Enum):
    LINEAR = "linear"
    COSINE = "cosine"


@dataclass(frozen=True)
class AngularSchedule:
    """Strictly increasing angles theta_1..theta_T in (0, pi/2)."""

    thetas: np.ndarray
    shape: ScheduleShape

    def __post_init__(self):
        thetas = np.asarray(self.thetas, dtype=float)
        object.__setattr__(self, "thetas", thetas)
        if thetas.ndim != 1 or thetas.size < 1:
            raise InvalidLength("schedule needs at least 1 step")
        if thetas[0] <= 0 or thetas[-1] > THETA_MAX + 1e-15:
            raise ValueError("angles must lie in (0, pi/2 - clip]")
        if np.any(np.diff(thetas) <= 0):
            raise ValueError("angles must be strictly increasing")

    @property
    def num_steps(self):
        return int(self.thetas.size)

    def theta_at(self, t):
        """theta_t for a 1-indexed step t."""
        if not 1 <= t <= self.num_steps:
            raise IndexError(f"step {t} outside 1..{self.num_steps}")
        return float(self.thetas[t - 1])


def make_schedule(num_steps, shape=ScheduleShape.LINEAR):
    """Build a T-step schedule of the given shape.

    linear: theta_t = (t/T) * theta_max
    cosine: theta_t = theta_max * (1 - cos(pi t / (2T)))
    """
    if num_steps < 2:
        raise InvalidLength("schedule needs at least 2 steps")
    shape = ScheduleShape(shape)
    t = np.arange(1, num_steps + 1, dtype=float)
    if shape is ScheduleShape.LINEAR:
        thetas = (t / num_steps) * THETA_MAX
    else:
        thetas = THETA_MAX * (1.0 - np.cos(np.pi * t / (2.0 * num_steps)))
    return AngularSchedule(thetas, shape)


def kappa_at(schedule, t):
    """kappa_t = cot(theta_t); decreasing in t, positive throughout."""
    return float(1.0 / np.tan(schedule.theta_at(t)))


@dataclass(frozen=True)
class AdaptiveKappaConfig:
    """Sigmoid gate kappa_max * sigma(beta (theta_y - angle))."""

    kappa_max: float
    beta: float

    def __post_init__(self):
        if self.kappa_max <= 0 or self.beta <= 0:
            raise ValueError("kappa_max and beta must be positive")


def adaptive_kappa(angle, theta_y, cfg):
    """State-dependent concentration, saturating near kappa_max inside
    the cone and vanishing outside; equals kappa_max/2 on the boundary."""
    angle = np.asarray(angle, dtype=float)
    out = cfg.kappa_max * expit(cfg.beta * (theta_y - angle))
    return float(out) if out.ndim == 0 else out
