"""Does a balanced real table stay above the ground?

A real table is the mathematical table plus four legs of length L, normal to
the table plane, and a solid rectangular top through the far leg ends.  Two
kinds of check are provided:

* sampled clearance of legs and top against a concrete ground;
* a ground-independent certificate: a point lying inside the inverted solid
  cone of slope 1/sqrt(2) at some leg tip cannot be below any ground of
  Lipschitz constant <= 1/sqrt(2) through that leg tip.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import PlacedTable, TableSpec, top_corners, up_normal
from .ground import ConeEnvelope
from .solver import K_CRIT, SOLVED, BalanceReport, vertical_distance

CLEARANCE_TOL = 1e-9
CERT_TOL = 1e-12
BOUNDARY_SAMPLES = 4096
LEG_SAMPLES = 64
TOP_GRID = 65  # odd, so the center of the top is sampled


@dataclass
class ClearanceReport:
    min_leg_clearance: float
    min_top_clearance: float
    certificate_pass: bool
    worst_point: np.ndarray
    samples: int

    @property
    def passed(self) -> bool:
        return min(self.min_leg_clearance, self.min_top_clearance) >= -CLEARANCE_TOL


def min_leg_length(r: float) -> float:
    """Shortest legs that keep a balanced table of side ratio r off the ground."""
    if not 0 < r <= 1:
        raise ValueError(f"ratio must lie in (0, 1], got {r}")
    return 1 / math.sqrt(1 + r * r)


def leg_points(table: PlacedTable, spec: TableSpec, n: int = LEG_SAMPLES) -> np.ndarray:
    s = np.linspace(0.0, 1.0, n)[:, None]
    offset = spec.leg_length * up_normal(table)
    return np.concatenate([V + s * offset for V in table.vertices])


def top_points(table: PlacedTable, spec: TableSpec, grid: int = TOP_GRID) -> np.ndarray:
    A2, B2, C2, D2 = top_corners(table, spec)
    s, t = np.meshgrid(np.linspace(0, 1, grid), np.linspace(0, 1, grid), indexing="ij")
    s, t = s.reshape(-1, 1), t.reshape(-1, 1)
    return A2 + s * (B2 - A2) + t * (D2 - A2)


def top_boundary(table: PlacedTable, spec: TableSpec, m: int = BOUNDARY_SAMPLES) -> np.ndarray:
    """``m`` points spaced evenly by arc length around A'B'C'D'."""
    corners = np.array(top_corners(table, spec))
    edges = np.roll(corners, -1, axis=0) - corners
    lengths = np.linalg.norm(edges, axis=1)
    cum = np.concatenate([[0.0], np.cumsum(lengths)])
    s = np.arange(m) * cum[-1] / m
    k = np.minimum(np.searchsorted(cum, s, side="right") - 1, 3)
    frac = (s - cum[k]) / lengths[k]
    return corners[k] + frac[:, None] * edges[k]


def leg_clearance(table: PlacedTable, spec: TableSpec, ground, n: int = LEG_SAMPLES) -> float:
    return float(np.min(vertical_distance(leg_points(table, spec, n), ground)))


def top_clearance(table: PlacedTable, spec: TableSpec, ground, grid: int = TOP_GRID) -> float:
    return float(np.min(vertical_distance(top_points(table, spec, grid), ground)))


def _in_cones(points, vertices, slope: float = K_CRIT) -> np.ndarray:
    points = np.atleast_2d(points)
    d = np.hypot(points[:, None, 0] - vertices[None, :, 0], points[:, None, 1] - vertices[None, :, 1])
    rise = points[:, None, 2] - vertices[None, :, 2]
    return np.any(rise >= slope * d - CERT_TOL, axis=1)


def cone_certificate(p, table: PlacedTable) -> bool:
    """True if p lies in the inverted cone of slope 1/sqrt(2) at some leg tip."""
    return bool(_in_cones(np.asarray(p, dtype=float), table.vertices)[0])


def certify_top(table: PlacedTable, spec: TableSpec, m: int = BOUNDARY_SAMPLES) -> bool:
    """Certificate that the whole top clears every admissible ground.

    The boundary of the top is sampled at ``m`` points.  The union of the four
    cone sections only covers the interior automatically when it is simply
    connected, which short legs break (the sections then leave a hole around
    the middle), so an interior lattice of about ``m`` points is checked too.
    """
    V = table.vertices
    if not _in_cones(top_boundary(table, spec, m), V).all():
        return False
    side = max(3, int(math.isqrt(m)) | 1)
    return bool(_in_cones(top_points(table, spec, side), V).all())


def check_real_table(ground, spec: TableSpec, report: BalanceReport, leg_samples: int = LEG_SAMPLES,
                     grid: int = TOP_GRID, m: int = BOUNDARY_SAMPLES) -> ClearanceReport:
    if not report.solved or report.table is None:
        raise ValueError(f"cannot check a table that is not balanced (status {report.status})")
    table = report.table
    legs = leg_points(table, spec, leg_samples)
    top = top_points(table, spec, grid)
    leg_d = vertical_distance(legs, ground)
    top_d = vertical_distance(top, ground)
    pts = np.concatenate([legs, top])
    dist = np.concatenate([leg_d, top_d])
    worst = pts[int(np.argmin(dist))]
    return ClearanceReport(float(leg_d.min()), float(top_d.min()), certify_top(table, spec, m),
                           worst, len(pts))


def critical_witness(r: float, slope: float = K_CRIT):
    """Worst-case ground for legs of length ``min_leg_length(r)``.

    The table is centered at the origin with its long side horizontal and its
    short side at slope ``slope``.  The ground is the highest surface of that
    Lipschitz constant through the four leg tips, so the top grazes it exactly
    when L = 1/sqrt(1 + r^2) and digs in for any shorter legs.  Returns
    ``(ground, report)`` where ``report`` describes the balanced pose.
    """
    spec = TableSpec(r)
    psi = math.atan(slope)
    along_long = np.array([1.0, 0.0, 0.0])
    along_short = np.array([0.0, math.cos(psi), math.sin(psi)])
    A = -0.5 * (spec.short_side * along_short + spec.long_side * along_long)
    B = A + spec.short_side * along_short
    C = B + spec.long_side * along_long
    D = A + spec.long_side * along_long
    u = 0.5 * (A - C)
    beta = spec.half_angle
    e2 = (B - math.cos(beta) * u) / math.sin(beta)
    table = PlacedTable(A, B, C, D, u, e2, np.cross(u, e2))
    ground = ConeEnvelope(table.vertices, slope)
    res = tuple(float(x) for x in vertical_distance(table.vertices, ground))
    report = BalanceReport(SOLVED, residuals=res, center_z=0.0, table=table,
                           message="critical tilt witness")
    return ground, report
