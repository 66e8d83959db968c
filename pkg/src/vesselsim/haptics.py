"""Haptic force rendering: wall repulsion, path guidance, authority-weighted mix.

All functions are pure and operate on 2-vectors (numpy arrays, newtons).
The repulsive field diverges as wall distance goes to zero, so every rendered
force is capped at ``f_cap`` preserving direction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    AlphaOutOfRangeError,
    EmptyPathError,
    NonPositiveDistanceError,
    NonUnitNormalError,
)
from .planner import Path

ALPHA_MAX = 0.9


@dataclass(frozen=True)
class HapticParams:
    d0_mm: float = 2.0  # influence threshold
    k_rep: float = 1.0  # repulsive gain, N*mm^3 (force = k * (1/d - 1/d0) / d^2)
    k_guide: float = 0.5  # guidance stiffness, N/mm
    f_cap_n: float = 3.3  # device force ceiling

    def __post_init__(self) -> None:
        if min(self.d0_mm, self.k_rep, self.k_guide, self.f_cap_n) <= 0:
            raise ValueError("all haptic parameters must be positive")


def cap_force(force: np.ndarray, f_cap: float) -> np.ndarray:
    """Scale the vector down to magnitude f_cap if it exceeds it (direction kept)."""
    mag = float(np.hypot(force[0], force[1]))
    if mag > f_cap:
        return force * (f_cap / mag)
    return force


def repulsive_force(d: float, n_hat: np.ndarray, params: HapticParams) -> np.ndarray:
    """Wall-repulsion force at distance d along unit normal n_hat.

    Zero at and beyond the influence threshold, diverging toward the wall,
    capped at the device ceiling.
    """
    if d <= 0:
        raise NonPositiveDistanceError(f"wall distance must be > 0, got {d}")
    n = np.asarray(n_hat, dtype=float)
    if abs(float(np.hypot(n[0], n[1])) - 1.0) > 1e-9:
        raise NonUnitNormalError(f"normal {n} is not unit length")
    if d > params.d0_mm:
        return np.zeros(2)
    mag = params.k_rep * (1.0 / d - 1.0 / params.d0_mm) / (d * d)
    return cap_force(mag * n, params.f_cap_n)


def guidance_force(e_path: np.ndarray, k_guide: float) -> np.ndarray:
    """Spring pull toward the reference path; e_path points from the current
    position to the nearest path point."""
    e = np.asarray(e_path, dtype=float)
    if not np.isfinite(e).all():
        raise ValueError(f"non-finite deviation {e}")
    return k_guide * e


def combined_haptic(
    f_rep: np.ndarray, f_guide: np.ndarray, alpha: float, f_cap: float
) -> np.ndarray:
    """Rendered force: repulsion plus guidance faded by (1 - alpha), capped.

    Guidance vanishes as the autonomous side takes authority; repulsion is
    always rendered in full (safety cue).
    """
    if not 0.0 <= alpha <= ALPHA_MAX:
        raise AlphaOutOfRangeError(f"alpha {alpha} outside [0, {ALPHA_MAX}]")
    return cap_force(np.asarray(f_rep, float) + (1.0 - alpha) * np.asarray(f_guide, float), f_cap)


def nearest_path_deviation(path: Path, position: np.ndarray) -> np.ndarray:
    """Vector from ``position`` to the closest point on the path polyline.

    Projects onto every segment (not vertex-snapped); exact ties resolve to the
    earliest arc length.
    """
    if len(path) == 0:
        raise EmptyPathError("path has no waypoints")
    pos = np.asarray(position, dtype=float)
    wp = path.waypoints
    if len(wp) == 1:
        return wp[0] - pos
    a = wp[:-1]
    d = wp[1:] - a
    seg2 = np.einsum("ij,ij->i", d, d)
    seg2 = np.where(seg2 < 1e-18, 1.0, seg2)
    t = np.clip(((pos - a) * d).sum(axis=1) / seg2, 0.0, 1.0)
    proj = a + t[:, None] * d
    dist2 = ((proj - pos) ** 2).sum(axis=1)
    k = int(np.argmin(dist2))  # np.argmin returns the first minimum: earliest arc
    return proj[k] - pos
