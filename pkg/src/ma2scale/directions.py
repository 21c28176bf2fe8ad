"""Finite families of orthonormal direction pairs in the plane."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument


@dataclass(frozen=True)
class DirectionSet:
    """Orthonormal pairs ``(v, v_perp)`` with ``v`` in a quarter circle.

    ``D`` counts the angles ``k*pi/(2(D-1))`` for ``k = 0..D-1``.  The last
    angle, ``pi/2``, reproduces the first pair rotated, so only the first
    ``D - 1`` pairs are stored; ``P = 4(D-1)`` stencil points per node.
    """

    D: int
    theta: float  # angular spacing between consecutive pairs
    covering_radius: float
    angles: np.ndarray
    v: np.ndarray  # (D-1, 2)
    v_perp: np.ndarray  # (D-1, 2)

    @property
    def P(self):
        return 4 * (self.D - 1)

    @property
    def n_pairs(self):
        return len(self.angles)

    @property
    def pairs(self):
        return list(zip(self.v, self.v_perp))


def build_direction_set(D=None, theta=None):
    """Build a direction set from either a pair count ``D`` or a resolution ``theta``."""
    if (D is None) == (theta is None):
        raise InvalidArgument("give exactly one of D or theta")
    if theta is not None:
        if not 0 < theta <= math.pi / 2:
            raise InvalidArgument(f"theta must lie in (0, pi/2], got {theta!r}")
        D = math.ceil((math.pi / 2) / theta) + 1
    if int(D) != D or D < 2:
        raise InvalidArgument(f"need D >= 2, got {D!r}")
    D = int(D)
    step = math.pi / (2 * (D - 1))
    angles = step * np.arange(D - 1)
    v = np.column_stack([np.cos(angles), np.sin(angles)])
    v_perp = np.column_stack([-v[:, 1], v[:, 0]])
    # worst unit vector sits halfway between neighbouring angles
    covering = 2 * math.sin(step / 4)
    return DirectionSet(D, step, covering, angles, v, v_perp)


def _quarter_gap(a, b):
    d = np.mod(a - b, math.pi / 2)
    return np.minimum(d, math.pi / 2 - d)


def nearest_pair(dirs, v):
    """Index of the pair closest to the unit vector ``v`` (up to sign and rotation)."""
    phi = math.atan2(v[1], v[0])
    return int(np.argmin(_quarter_gap(phi, dirs.angles)))


def covering_distance(dirs, w):
    """Distance from unit vectors ``w`` (k, 2) to the set, with +-v and v_perp allowed."""
    w = np.atleast_2d(w)
    members = np.vstack([dirs.v, -dirs.v, dirs.v_perp, -dirs.v_perp])
    return np.linalg.norm(w[:, None, :] - members[None], axis=2).min(axis=1)
