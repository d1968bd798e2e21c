"""Placement of the mathematical table (four leg tips) and the real table.

Conventions.  The diagonal has length 2, so every vertex is at distance 1
from the center M.  A pose is (azimuth gamma, diagonal parameter t, tilt
theta):

* A = (t cos g, t sin g, g(A)) and C = (-t cos g, -t sin g, g(C)); M is their
  midpoint and lies on the z-axis.
* u = (A - C) / 2 points along the diagonal, w = (-sin g, cos g, 0) is the
  horizontal perpendicular and v = u x w.
* e2(theta) = -sin(theta) v + cos(theta) w, so theta = -pi/2 stands the
  table up with B above AC.
* B = M + cos(beta) u + sin(beta) e2, D = 2M - B, with beta = 2 arctan(r).

A, B, C, D run counterclockwise seen from n = u x e2, and n_z >= 0 for
|theta| <= pi/2.  AB is the short side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SEAT_TOL = 1e-9


@dataclass(frozen=True)
class TableSpec:
    """Rectangle side ratio (short / long) and leg length; diagonal is 2."""

    ratio: float
    leg_length: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.ratio <= 1.0):
            raise ValueError(f"ratio must lie in (0, 1], got {self.ratio}")
        if not self.leg_length >= 0.0:
            raise ValueError(f"leg length must be nonnegative, got {self.leg_length}")

    @property
    def half_angle(self) -> float:
        """Angle at the center between MA and MB."""
        return 2.0 * math.atan(self.ratio)

    @property
    def short_side(self) -> float:
        return 2.0 * math.sin(self.half_angle / 2)

    @property
    def long_side(self) -> float:
        return 2.0 * math.cos(self.half_angle / 2)

    def with_legs(self, leg_length: float) -> "TableSpec":
        return TableSpec(self.ratio, leg_length)


@dataclass(frozen=True)
class Pose:
    azimuth: float
    diag_param: float
    tilt: float


@dataclass(frozen=True, eq=False)
class PlacedTable:
    """Vertex coordinates plus the orthonormal frame (u, e2, n)."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    u: np.ndarray
    e2: np.ndarray
    n: np.ndarray

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.A + self.C)

    @property
    def vertices(self) -> np.ndarray:
        return np.array([self.A, self.B, self.C, self.D])

    @classmethod
    def from_frame(cls, center, u, e2, beta: float) -> "PlacedTable":
        center = np.asarray(center, dtype=float)
        u = np.asarray(u, dtype=float)
        e2 = np.asarray(e2, dtype=float)
        b = math.cos(beta) * u + math.sin(beta) * e2
        return cls(center + u, center + b, center - u, center - b, u, e2, np.cross(u, e2))


def place_batch(beta, gamma, t, theta, zA, zC):
    """Vectorized placement.  All inputs broadcast; returns (A, B, C, D, u, e2, n)
    as arrays of shape (..., 3)."""
    gamma, t, theta, zA, zC = np.broadcast_arrays(
        *(np.asarray(a, dtype=float) for a in (gamma, t, theta, zA, zC)))
    cg, sg = np.cos(gamma), np.sin(gamma)
    zero = np.zeros_like(cg)
    A = np.stack([t * cg, t * sg, zA], axis=-1)
    C = np.stack([-t * cg, -t * sg, zC], axis=-1)
    M = 0.5 * (A + C)
    u = 0.5 * (A - C)
    w = np.stack([-sg, cg, zero], axis=-1)
    v = np.cross(u, w)
    e2 = -np.sin(theta)[..., None] * v + np.cos(theta)[..., None] * w
    b = math.cos(beta) * u + math.sin(beta) * e2
    return A, M + b, C, M - b, u, e2, np.cross(u, e2)


def diagonal_length_error(t: float, zA: float, zC: float) -> float:
    return 4 * t * t + (zA - zC) ** 2 - 4.0


def place_vertices(spec: TableSpec, pose: Pose, ground) -> PlacedTable:
    """Place the table at ``pose`` with A and C on the ground."""
    gamma, t = pose.azimuth, pose.diag_param
    zA = ground(t * math.cos(gamma), t * math.sin(gamma))
    zC = ground(-t * math.cos(gamma), -t * math.sin(gamma))
    err = diagonal_length_error(t, zA, zC)
    if abs(err) > SEAT_TOL:
        raise ValueError(f"pose does not seat the diagonal: 4t^2 + dz^2 - 4 = {err:.3e}")
    A, B, C, D, u, e2, n = place_batch(spec.half_angle, gamma, t, pose.tilt, zA, zC)
    return PlacedTable(A, B, C, D, u, e2, n)


def incline(A, C) -> float:
    """Angle of the diagonal AC against the horizontal (positive when A is higher)."""
    A = np.asarray(A, dtype=float)
    C = np.asarray(C, dtype=float)
    length = float(np.linalg.norm(A - C))
    if abs(length - 2.0) > SEAT_TOL:
        raise ValueError(f"diagonal must have length 2, got {length!r}")
    return math.asin(max(-1.0, min(1.0, (A[2] - C[2]) / 2.0)))


def slope(vec) -> np.ndarray:
    """|dz| / horizontal length; inf for vertical vectors. Works on (..., 3)."""
    vec = np.asarray(vec, dtype=float)
    horiz = np.hypot(vec[..., 0], vec[..., 1])
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(horiz > 0, np.abs(vec[..., 2]) / np.where(horiz > 0, horiz, 1.0), np.inf)


def segment_slope(P, Q) -> float:
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    if np.array_equal(P, Q):
        raise ValueError("slope of a degenerate segment")
    return float(slope(P - Q))


def top_corners(table: PlacedTable, spec: TableSpec):
    """Table-top corners A', B', C', D' at distance L along the upward normal."""
    n = spec.leg_length * up_normal(table)
    return table.A + n, table.B + n, table.C + n, table.D + n


def up_normal(table: PlacedTable) -> np.ndarray:
    n = np.asarray(table.n, dtype=float)
    n = n / np.linalg.norm(n)
    if abs(n[2]) <= 1e-12:
        raise ValueError("table plane is vertical; the top is undefined")
    return n if n[2] > 0 else -n
