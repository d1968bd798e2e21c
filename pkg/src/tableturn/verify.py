"""Numerical checks of the quantitative claims behind the turning method.

Each ``suite_*`` function returns a list of :class:`Check` records; the CLI
prints them one per line.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.spatial.transform import Rotation

from .collision import check_real_table, critical_witness, min_leg_length
from .geometry import TableSpec, place_batch, slope
from .ground import Bumps, Cone, Flat, Plane, Radial, parse_ground
from .roots import bisect
from .solver import K_CRIT, _imbalance, _seated, balance_by_turning, diagonal_gap

ORTHO_TOL = 1e-12
COPLANAR_TOL = 1e-9


@dataclass(frozen=True)
class FrameAngles:
    """Angles of three mutually orthogonal unit vectors with the xy-plane."""

    beta1: float
    beta2: float
    beta3: float

    @property
    def sin_squares(self) -> float:
        return sum(math.sin(b) ** 2 for b in (self.beta1, self.beta2, self.beta3))


def frame_slopes(frame) -> tuple[FrameAngles, tuple]:
    """Elevation angles and slopes of an orthonormal triple (given as rows)."""
    F = np.asarray(frame, dtype=float)
    if F.shape != (3, 3) or np.abs(F @ F.T - np.eye(3)).max() > ORTHO_TOL:
        raise ValueError("frame is not orthonormal")
    betas = np.arcsin(np.clip(np.abs(F[:, 2]), 0.0, 1.0))
    return FrameAngles(*(float(b) for b in betas)), tuple(float(s) for s in slope(F))


def frame_identity_residuals(frames) -> np.ndarray:
    """|sum_i sin^2(beta_i) - 1| for a stack of frames (rows are the vectors)."""
    F = np.asarray(frames, dtype=float)
    s = np.abs(F[..., 2])
    return np.abs((s * s).sum(axis=-1) - 1.0)


def random_frames(n: int, seed: int = 0) -> np.ndarray:
    return np.swapaxes(Rotation.random(n, random_state=seed).as_matrix(), -1, -2)


def tripod_frame() -> np.ndarray:
    """Three cube edges meeting at a corner, cube turned so its diagonal is vertical."""
    diag = np.ones(3) / math.sqrt(3)
    rot, _ = Rotation.align_vectors([[0.0, 0.0, 1.0]], [diag])
    return rot.apply(np.eye(3))


# ----------------------------------------------------------- critical constant

def critical_slopes(r: float, phi, theta):
    """Slopes of AB, BC and the tangent to B's circle about AC, for a table
    whose diagonal AC has incline ``phi`` and tilt ``theta`` (center at 0)."""
    beta = 2 * math.atan(r)
    phi = np.asarray(phi, dtype=float)
    A, B, C, _, u, _, _ = place_batch(beta, 0.0, np.cos(phi), theta, np.sin(phi), -np.sin(phi))
    tangent = np.cross(u, B)
    return slope(B - A), slope(C - B), slope(tangent)


def _worst_slope(r, phi, theta):
    return np.maximum.reduce(critical_slopes(r, phi, theta))


class CriticalResult(NamedTuple):
    k: float
    phi: float
    theta: float
    slopes: tuple
    grid_min: float  # minimum over the initial grid, before refinement


def critical_constant(r: float, grid: int = 256, rounds: int = 60) -> CriticalResult:
    """min over (phi, theta) of the largest of the three slopes.

    A grid search is followed by repeated local grids that shrink around the
    incumbent; every direction is sampled, so the kinks where two slopes cross
    do not stall the refinement.
    """
    if not 0 < r <= 1:
        raise ValueError(f"ratio must lie in (0, 1], got {r}")
    if grid < 64:
        raise ValueError("grid must be at least 64")
    lo = np.array([-np.pi / 4, -np.pi / 2])
    hi = -lo
    P, T = np.meshgrid(np.linspace(lo[0], hi[0], grid), np.linspace(lo[1], hi[1], grid),
                       indexing="ij")
    F = _worst_slope(r, P, T)
    i, j = np.unravel_index(np.argmin(F), F.shape)
    best = np.array([P[i, j], T[i, j]])
    fbest = grid_min = float(F[i, j])
    half = 2 * (hi - lo) / (grid - 1)
    for _ in range(rounds):
        a = np.linspace(max(lo[0], best[0] - half[0]), min(hi[0], best[0] + half[0]), 21)
        b = np.linspace(max(lo[1], best[1] - half[1]), min(hi[1], best[1] + half[1]), 21)
        P, T = np.meshgrid(a, b, indexing="ij")
        F = _worst_slope(r, P, T)
        i, j = np.unravel_index(np.argmin(F), F.shape)
        if F[i, j] <= fbest:
            best, fbest = np.array([P[i, j], T[i, j]]), float(F[i, j])
        half = half / 4
        if half.max() < 1e-15:
            break
    slopes = tuple(float(s) for s in critical_slopes(r, best[0], best[1]))
    return CriticalResult(fbest, float(best[0]), float(best[1]), slopes, grid_min)


# ---------------------------------------------------------------- uniqueness

def imbalance_scan(ground, spec: TableSpec, gamma: float, n: int = 10_000) -> np.ndarray:
    seat = _seated(ground, np.array([float(gamma)]))
    theta = np.linspace(-np.pi / 2, np.pi / 2, n)
    return _imbalance(ground, spec.half_angle, seat, theta)


def sign_changes(values) -> int:
    s = np.sign(np.asarray(values, dtype=float))
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


def uniqueness_scan(ground, spec: TableSpec, gamma: float, n: int = 10_000) -> int:
    """Number of sign changes of vert(B) - vert(D) over an n-point tilt grid."""
    return sign_changes(imbalance_scan(ground, spec, gamma, n))


def d_monotone_check(ground, gamma: float, n: int = 1000) -> bool:
    t = np.linspace(0.0, 1.0, n)
    return bool(np.all(np.diff(diagonal_gap(t, gamma, ground)) > 0))


# ---------------------------------------------------------- coplanar rotation

def coplanar_residual(ground, spec: TableSpec, alpha):
    """Triple product of the ground points above the leg points rotated by alpha."""
    alpha = np.asarray(alpha, dtype=float)
    beta = spec.half_angle
    angles = np.stack([alpha, alpha + beta, alpha + np.pi, alpha + beta + np.pi], axis=-1)
    x, y = np.cos(angles), np.sin(angles)
    P = np.stack([x, y, ground(x, y)], axis=-1)
    e1 = P[..., 1, :] - P[..., 0, :]
    e2 = P[..., 2, :] - P[..., 0, :]
    e3 = P[..., 3, :] - P[..., 0, :]
    return np.einsum("...i,...i->...", e1, np.cross(e2, e3))


class CoplanarResult(NamedTuple):
    alpha: float
    residual: float
    found: bool


def coplanar_interval(spec: TableSpec) -> float:
    # a quarter turn maps a square onto itself and flips the residual's sign
    return np.pi / 2 if spec.ratio == 1.0 else 2 * np.pi


def coplanar_rotation(ground, spec: TableSpec, samples: int = 1024) -> CoplanarResult:
    """Rotation of the table about its center that makes the lifted leg points coplanar."""
    span = coplanar_interval(spec)
    alphas = np.linspace(0.0, span, samples + 1)
    res = coplanar_residual(ground, spec, alphas)
    if np.all(np.abs(res) <= 1e-12):
        return CoplanarResult(0.0, float(res[0]), True)
    f = lambda x: float(coplanar_residual(ground, spec, x))
    for i in range(samples):
        a, b = res[i], res[i + 1]
        if a == 0 or a * b < 0:
            alpha, value, _ = bisect(f, alphas[i], alphas[i + 1], a, b)
            # on a discontinuous ground the bracket may close on a jump instead
            if abs(value) <= COPLANAR_TOL:
                return CoplanarResult(float(alpha) % (2 * np.pi), float(value), True)
    j = int(np.argmin(np.abs(res)))
    return CoplanarResult(float(alphas[j]), float(res[j]), False)


# -------------------------------------------------------------------- suites

@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}" + (f"  [{self.detail}]" if self.detail else "")


def suite_frames(n: int = 100_000, seed: int = 0) -> list[Check]:
    worst = float(frame_identity_residuals(random_frames(n, seed)).max())
    angles, slopes = frame_slopes(tripod_frame())
    sines = [math.sin(b) for b in (angles.beta1, angles.beta2, angles.beta3)]
    std, _ = frame_slopes(np.eye(3))
    return [
        Check(f"frame identity on {n} random frames", worst <= 1e-12, f"max error {worst:.2e}"),
        Check("standard basis elevations (0, 0, pi/2)",
              abs(std.beta3 - math.pi / 2) < 1e-12 and std.beta1 == std.beta2 == 0.0),
        Check("tripod slopes all 1/sqrt(2)", max(abs(s - K_CRIT) for s in slopes) < 1e-12,
              ", ".join(f"{s:.10f}" for s in slopes)),
        Check("tripod sin(beta) all 1/sqrt(3)", max(abs(s - 1 / math.sqrt(3)) for s in sines) < 1e-12),
    ]


def suite_critical_k(ratios=(0.25, 0.5, 0.75, 1.0), grid: int = 256) -> list[Check]:
    checks = []
    for r in ratios:
        start = time.perf_counter()
        res = critical_constant(r, grid)
        elapsed = time.perf_counter() - start
        checks.append(Check(f"critical k for r={r}", abs(res.k - K_CRIT) <= 1e-4,
                            f"k*={res.k:.10f}, 1/sqrt(2)={K_CRIT:.10f}, "
                            f"{math.degrees(math.atan(res.k)):.2f} deg, {elapsed:.2f}s"))
        checks.append(Check(f"tripod configuration for r={r}",
                            max(abs(s - K_CRIT) for s in res.slopes) <= 1e-3
                            and abs(res.phi) <= math.pi / 4,
                            f"slopes {', '.join(f'{s:.6f}' for s in res.slopes)}, phi={res.phi:.4f}"))
        checks.append(Check(f"grid never beats 1/sqrt(2) for r={r}", res.grid_min >= K_CRIT - 1e-9,
                            f"grid min {res.grid_min:.10f}"))
        checks.append(Check(f"runtime for r={r} under 10 s", elapsed < 10, f"{elapsed:.2f}s"))
    return checks


def bumps_cases(count: int, seed: int = 0, target: float = 0.7, first_seed: int = 1000):
    """Deterministic (ground, spec, gamma) triples on grounds with k <= target."""
    rng = np.random.Generator(np.random.PCG64(seed))
    for i in range(count):
        ground = Bumps(seed=first_seed + i, target=target)
        spec = TableSpec(0.5 if i % 2 else 1.0)
        yield ground, spec, float(rng.random() * np.pi)


def suite_uniqueness(count: int = 100, n: int = 10_000) -> list[Check]:
    counts = [uniqueness_scan(g, s, gamma, n) for g, s, gamma in bumps_cases(count)]
    good = sum(c == 1 for c in counts)
    checks = [Check(f"one equal hovering tilt in {count} cases with k <= 0.7", good == count,
                    f"{good}/{count}")]
    flat = uniqueness_scan(Flat(), TableSpec(1.0), 0.3, n)
    checks.append(Check("flat ground has one sign change", flat == 1, str(flat)))
    return checks


def monotone_grounds():
    return [Flat(), Plane(0.5, 0.0), Plane(1.0, 0.0), Cone(), Radial(), Bumps(seed=1, target=0.7),
            parse_ground("sum(plane:sx=0.3,sy=0.2;radial:a=0.05,w=2)")]


def suite_d_monotone(n: int = 1000) -> list[Check]:
    checks = []
    for g in monotone_grounds():
        ok = all(d_monotone_check(g, gamma, n) for gamma in np.linspace(0, np.pi, 7))
        checks.append(Check(f"D(t) strictly increasing on {g.descriptor()}", ok))
    return checks


def suite_coplanar(count: int = 20, dense: int = 10_000) -> list[Check]:
    spec = TableSpec(1.0)
    worst, cross = 0.0, True
    for i in range(count):
        g = Bumps(seed=2000 + i, target=0.7)
        res = coplanar_rotation(g, spec)
        worst = max(worst, abs(res.residual)) if res.found else math.inf
        cross = cross and dense_scan_agrees(g, spec, res.alpha, dense)
    checks = [Check(f"coplanar rotation on {count} grounds", worst <= 1e-9, f"max |residual| {worst:.2e}"),
              Check(f"roots confirmed by {dense}-point scans", cross)]
    plane = coplanar_rotation(Plane(0.5, 0.0), spec)
    checks.append(Check("plane ground is coplanar at every rotation",
                        plane.alpha == 0.0 and abs(plane.residual) <= 1e-12))
    return checks


def dense_scan_agrees(ground, spec: TableSpec, alpha: float, n: int = 10_000) -> bool:
    """True if alpha lies within one dense-grid step of a sign change of the residual."""
    span = coplanar_interval(spec)
    grid = np.linspace(0.0, span, n + 1)
    res = coplanar_residual(ground, spec, grid)
    change = np.nonzero((res[:-1] * res[1:] <= 0))[0]
    step = span / n
    a = alpha % span if span < 2 * np.pi else alpha
    return bool(np.any(np.abs(grid[change] - a) <= 2 * step))


def suite_sharpness(ratios=(0.5, 0.75, 1.0)) -> list[Check]:
    checks = []
    cone = Cone(1 / math.sqrt(2), 1.0)
    square = TableSpec(1.0)
    report = balance_by_turning(cone, square)
    L = min_leg_length(1.0)
    ok = check_real_table(cone, square.with_legs(L), report)
    short = check_real_table(cone, square.with_legs(L - 0.01), report)
    checks.append(Check("cone ground, square, L = 1/sqrt(2) passes",
                        ok.passed and abs(ok.min_top_clearance) <= 1e-6,
                        f"top clearance {ok.min_top_clearance:.3e}"))
    checks.append(Check("cone ground, square, L = 1/sqrt(2) - 0.01 fails",
                        not short.passed and abs(short.min_top_clearance + 0.01) <= 1e-6,
                        f"top clearance {short.min_top_clearance:.6f}"))
    for r in ratios:
        ground, rep = critical_witness(r)
        L = min_leg_length(r)
        at = check_real_table(ground, TableSpec(r, L), rep)
        below = check_real_table(ground, TableSpec(r, L - 0.01), rep)
        checks.append(Check(f"critical tilt, r={r}, L = 1/sqrt(1+r^2) passes", at.passed,
                            f"clearance {min(at.min_leg_clearance, at.min_top_clearance):.3e}"))
        checks.append(Check(f"critical tilt, r={r}, L - 0.01 fails", not below.passed,
                            f"top clearance {below.min_top_clearance:.6f}"))
    return checks


SUITES = {
    "frames": suite_frames,
    "critical-k": suite_critical_k,
    "uniqueness": suite_uniqueness,
    "d-monotone": suite_d_monotone,
    "coplanar": suite_coplanar,
    "sharpness": suite_sharpness,
}


def run_suite(name: str) -> list[Check]:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    return SUITES[name]()
