"""Balancing a table by turning it on the spot.

For each azimuth gamma the table is put into its *equal hovering position*:
A and C on the ground (diagonal seated by bisection on t), then tilted about
AC until B and D sit at the same vertical distance h from the ground
(bisection on theta).  h(gamma) is continuous and has period pi, and it takes
both signs over a half-turn, so a sweep followed by bisection on gamma finds
a balancing position.  Both inner problems have unique solutions when the
ground's Lipschitz constant is at most 1/sqrt(2).
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .geometry import PlacedTable, Pose, TableSpec, incline, place_batch
from .roots import BracketError, bisect, bisect_batch

K_CRIT = 1 / math.sqrt(2)
# Descriptors carry 7-digit constants such as 0.7071068; treat those as critical.
K_CRIT_SLACK = 1e-7

HOVER_TOL = 1e-10
BALANCE_TOL = 1e-9
EVERYWHERE_TOL = 1e-11
DEFAULT_SAMPLES = 256
THETA_SCAN = 64
CHUNK = 64

SOLVED = "solved"
EVERYWHERE = "balanced_everywhere"
NO_SIGN_CHANGE = "no_sign_change"
PRECONDITION_FAILED = "precondition_failed"


class PreconditionError(ValueError):
    """The ground violates a hypothesis the operation depends on."""


class HoverError(RuntimeError):
    """No equal hovering position found (the tilt bracket has no sign change)."""


class UniquenessWarning(UserWarning):
    """The ground's Lipschitz bound no longer guarantees unique roots."""


def within_critical(ground) -> bool:
    k = ground.lipschitz_bound
    return k is not None and k <= K_CRIT + K_CRIT_SLACK


def vertical_distance(p, ground):
    """Signed height of p above the ground: z - g(x, y)."""
    p = np.asarray(p, dtype=float)
    d = p[..., 2] - ground(p[..., 0], p[..., 1])
    return float(d) if np.ndim(d) == 0 else d


def diagonal_gap(t, gamma, ground):
    """Squared length of the chord joining the ground points above +-t(cos g, sin g)."""
    t = np.asarray(t, dtype=float)
    c, s = np.cos(gamma), np.sin(gamma)
    dz = ground(t * c, t * s) - ground(-t * c, -t * s)
    out = 4 * t * t + dz * dz
    return float(out) if np.ndim(out) == 0 else out


def _seat(ground, gammas: np.ndarray) -> np.ndarray:
    # D(0) - 4 = -4 and D(1) - 4 = dz^2 >= 0, so [0, 1] always brackets.
    c, s = np.cos(gammas), np.sin(gammas)

    def f(t):
        dz = ground(t * c, t * s) - ground(-t * c, -t * s)
        return 4 * t * t + dz * dz - 4.0

    lo = np.zeros_like(gammas)
    hi = np.ones_like(gammas)
    # Run to machine precision: D' is up to ~10, so xtol = 1e-12 in t would
    # leave |D - 4| near 1e-11.  64 halvings of [0, 1] exhaust the doubles.
    t, _ = bisect_batch(f, lo, hi, np.full_like(gammas, -4.0), f(hi), xtol=0.0)
    return t


def place_diagonal(ground, gamma: float) -> float:
    """Diagonal parameter t* in (0, 1] with A and C on the ground."""
    if not ground.continuous:
        raise PreconditionError(f"{ground.descriptor()} is discontinuous")
    t = float(_seat(ground, np.array([float(gamma)]))[0])
    if not math.isfinite(t) or abs(diagonal_gap(t, gamma, ground) - 4.0) > 1e-12:
        raise BracketError(f"diagonal bisection failed at gamma={gamma}: t={t}")
    return t


class _Seated:
    """Seated diagonals for an array of azimuths, with the tilt-independent
    parts of the frame precomputed componentwise."""

    def __init__(self, ground, gammas):
        self.gamma = np.asarray(gammas, dtype=float)
        self.t = t = _seat(ground, self.gamma)
        c, s = np.cos(self.gamma), np.sin(self.gamma)
        self.zA = ground(t * c, t * s)
        self.zC = ground(-t * c, -t * s)
        self.mz = 0.5 * (self.zA + self.zC)
        uz = 0.5 * (self.zA - self.zC)
        self.u = (t * c, t * s, uz)
        self.w = (-s, c)
        # v = u x w with w = (-s, c, 0)
        self.v = (-uz * c, -uz * s, t * c * c + t * s * s)

    def column(self):
        out = object.__new__(_Seated)
        for name in ("gamma", "t", "zA", "zC", "mz"):
            setattr(out, name, getattr(self, name)[:, None])
        for name in ("u", "v", "w"):
            setattr(out, name, tuple(a[:, None] for a in getattr(self, name)))
        return out


def _seated(ground, gammas) -> _Seated:
    return _Seated(ground, gammas)


def _imbalance(ground, beta, seat: _Seated, theta):
    cb, sb = math.cos(beta), math.sin(beta)
    st, ct = np.sin(theta), np.cos(theta)
    (ux, uy, uz), (vx, vy, vz), (wx, wy) = seat.u, seat.v, seat.w
    bx = cb * ux + sb * (-st * vx + ct * wx)
    by = cb * uy + sb * (-st * vy + ct * wy)
    bz = cb * uz + sb * (-st * vz)
    # B = M + b, D = M - b with M on the z-axis
    return 2 * bz - ground(bx, by) + ground(-bx, -by)


def hover_imbalance(theta: float, gamma: float, spec: TableSpec, ground) -> float:
    """vert(B) - vert(D) at tilt theta with the diagonal seated at azimuth gamma."""
    seat = _seated(ground, np.array([float(gamma)]))
    return float(_imbalance(ground, spec.half_angle, seat, np.array([float(theta)]))[0])


class _Hover(NamedTuple):
    gamma: np.ndarray
    t: np.ndarray
    theta: np.ndarray
    hover: np.ndarray
    center_z: np.ndarray
    phi: np.ndarray
    imbalance: np.ndarray
    roots: np.ndarray  # sign changes seen in the theta pre-scan (0 when not scanned)
    zA: np.ndarray
    zC: np.ndarray


def _hover_batch(ground, spec: TableSpec, gammas, scan: Optional[bool] = None) -> _Hover:
    beta = spec.half_angle
    seat = _seated(ground, gammas)
    n = seat.gamma.shape[0]
    if scan is None:
        scan = not within_critical(ground)
    half = np.pi / 2
    roots = np.zeros(n, dtype=int)
    if scan:
        grid = np.linspace(-half, half, THETA_SCAN + 1)
        vals = _imbalance(ground, beta, seat.column(), grid[None, :])
        sgn = np.sign(vals)
        change = (sgn[:, :-1] * sgn[:, 1:] < 0) | (sgn[:, :-1] == 0)
        roots = change.sum(axis=1)
        first = np.where(change.any(axis=1), change.argmax(axis=1), 0)
        rows = np.arange(n)
        lo, hi = grid[first], grid[first + 1]
        flo, fhi = vals[rows, first], vals[rows, first + 1]
        flo = np.where(change.any(axis=1), flo, np.nan)
    else:
        lo = np.full(n, -half)
        hi = np.full(n, half)
        flo = _imbalance(ground, beta, seat, lo)
        fhi = _imbalance(ground, beta, seat, hi)
    theta, imb = bisect_batch(lambda th: _imbalance(ground, beta, seat, th), lo, hi, flo, fhi)
    ok = np.isfinite(theta)
    safe = np.where(ok, theta, 0.0)
    _, B, *_ = place_batch(beta, seat.gamma, seat.t, safe, seat.zA, seat.zC)
    hover = np.where(ok, vertical_distance(B, ground), np.nan)
    center_z = 0.5 * (seat.zA + seat.zC)
    phi = np.arcsin(np.clip((seat.zA - seat.zC) / 2, -1, 1))
    return _Hover(seat.gamma, seat.t, theta, hover, center_z, phi, imb, roots, seat.zA, seat.zC)


@dataclass(frozen=True, eq=False)
class HoverState:
    pose: Pose
    table: PlacedTable
    hover: float
    center_z: float
    imbalance: float


def _state(ground, spec: TableSpec, gamma: float, hv: Optional[_Hover] = None) -> HoverState:
    if hv is None:
        hv = _hover_batch(ground, spec, np.array([float(gamma)]))
    t, theta = float(hv.t[0]), float(hv.theta[0])
    if not math.isfinite(theta):
        raise HoverError(f"no equal hovering position at gamma={gamma}")
    table = PlacedTable(*place_batch(spec.half_angle, gamma, t, theta, hv.zA[0], hv.zC[0]))
    return HoverState(Pose(float(gamma), t, theta), table, float(hv.hover[0]),
                      float(hv.center_z[0]), float(hv.imbalance[0]))


def equal_hover(ground, spec: TableSpec, gamma: float) -> HoverState:
    """Seat A and C at azimuth gamma, then tilt until B and D hover equally."""
    if not ground.continuous:
        raise PreconditionError(f"{ground.descriptor()} is discontinuous")
    hv = _hover_batch(ground, spec, np.array([float(gamma)]))
    if hv.roots[0] > 1:
        warnings.warn(f"{hv.roots[0]} equal hovering positions at gamma={gamma}; "
                      "returning the first", UniquenessWarning, stacklevel=2)
    return _state(ground, spec, gamma, hv)


def hover_gap(gamma: float, ground, spec: TableSpec) -> float:
    return equal_hover(ground, spec, gamma).hover


class SweepRow(NamedTuple):
    gamma: float
    t: float
    phi: float
    theta: float
    hover: float
    center_z: float

    @property
    def ok(self) -> bool:
        return math.isfinite(self.hover)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("TABLETURN_THREADS", "1")))
    except ValueError:
        return 1


def _sweep_arrays(ground, spec: TableSpec, gammas: np.ndarray) -> _Hover:
    # Fixed-size chunks so results do not depend on the thread count.
    chunks = [gammas[i:i + CHUNK] for i in range(0, len(gammas), CHUNK)]
    scan = not within_critical(ground)
    work = lambda g: _hover_batch(ground, spec, g, scan=scan)
    workers = min(_threads(), len(chunks))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(work, chunks))
    else:
        parts = [work(c) for c in chunks]
    return _Hover(*(np.concatenate(cols) for cols in zip(*parts)))


def sweep_gammas(n: int) -> np.ndarray:
    return np.arange(n) * np.pi / n


def sweep(ground, spec: TableSpec, n: int = DEFAULT_SAMPLES) -> list[SweepRow]:
    """Equal hovering positions at gamma_i = i*pi/n.  Failed rows carry NaNs."""
    if not ground.continuous:
        raise PreconditionError(f"{ground.descriptor()} is discontinuous")
    hv = _sweep_arrays(ground, spec, sweep_gammas(n))
    return [SweepRow(*(float(a[i]) for a in (hv.gamma, hv.t, hv.phi, hv.theta, hv.hover,
                                             hv.center_z)))
            for i in range(n)]


@dataclass
class BalanceReport:
    status: str
    pose: Optional[Pose] = None
    residuals: tuple = ()
    center_z: float = math.nan
    sweep_samples: int = 0
    bisection_iters: int = 0
    table: Optional[PlacedTable] = None
    min_abs_hover: float = math.nan
    argmin_gamma: float = math.nan
    message: str = ""
    warnings: list = field(default_factory=list)

    @property
    def solved(self) -> bool:
        return self.status in (SOLVED, EVERYWHERE)

    @property
    def incline(self) -> float:
        return incline(self.table.A, self.table.C) if self.table is not None else math.nan

    @property
    def max_residual(self) -> float:
        return max(abs(r) for r in self.residuals) if self.residuals else math.nan


def _scalar_hover(ground, spec, scan):
    def h(gamma):
        hv = _hover_batch(ground, spec, np.array([gamma]), scan=scan)
        return float(hv.hover[0])
    return h


def _report(ground, spec, gamma, status, samples, iters, notes, message="") -> BalanceReport:
    state = _state(ground, spec, gamma)
    res = tuple(float(r) for r in vertical_distance(state.table.vertices, ground))
    if status == SOLVED and max(abs(r) for r in res) > BALANCE_TOL:
        status, message = NO_SIGN_CHANGE, "bisection stalled above the residual tolerance"
    return BalanceReport(status, state.pose, res, state.center_z, samples, iters, state.table,
                         message=message, warnings=notes)


def _brackets(gammas, h):
    """Indices i where h vanishes at gamma_i or changes sign on [gamma_i, gamma_i+1].

    h has period pi, so the last interval closes at pi with the value h(0).
    """
    n = len(h)
    out = []
    for i in range(n):
        a, b = h[i], h[(i + 1) % n]
        if not math.isfinite(a):
            continue
        if abs(a) <= BALANCE_TOL:
            out.append((i, True))
        elif math.isfinite(b) and a * b < 0:
            out.append((i, False))
    return out


def _solve_bracket(ground, spec, gammas, h, i, at_sample, scan):
    n = len(gammas)
    if at_sample:
        return float(gammas[i]), 0
    lo = float(gammas[i])
    hi = float(gammas[i + 1]) if i + 1 < n else math.pi
    gamma, _, iters = bisect(_scalar_hover(ground, spec, scan), lo, hi, h[i], h[(i + 1) % n],
                             ftol=1e-13)
    if gamma >= math.pi:
        gamma -= math.pi
    return gamma, iters


def _check_ground(ground) -> list:
    notes = []
    k = ground.lipschitz_bound
    if k is None:
        notes.append("Lipschitz bound unknown; balancing is best effort")
    elif k > 1:
        notes.append(f"Lipschitz bound {k:.6g} > 1; balancing is best effort")
    elif k > K_CRIT + K_CRIT_SLACK:
        notes.append(f"Lipschitz bound {k:.6g} > 1/sqrt(2); roots may not be unique, "
                     "taking the first")
    for note in notes:
        warnings.warn(note, UniquenessWarning, stacklevel=3)
    return notes


def balance_by_turning(ground, spec: TableSpec, samples: int = DEFAULT_SAMPLES) -> BalanceReport:
    """Turn the table through a half-turn and return the first balancing azimuth."""
    if not ground.continuous:
        return BalanceReport(PRECONDITION_FAILED, message=f"{ground.descriptor()} is discontinuous")
    notes = _check_ground(ground)
    scan = not within_critical(ground)
    gammas = sweep_gammas(samples)
    h = _sweep_arrays(ground, spec, gammas).hover
    finite = np.isfinite(h)
    if finite.all() and np.all(np.abs(h) <= EVERYWHERE_TOL):
        return _report(ground, spec, 0.0, EVERYWHERE, samples, 0, notes,
                       "hover gap vanishes at every sample")
    brackets = _brackets(gammas, h)
    if brackets:
        i, at_sample = brackets[0]
        gamma, iters = _solve_bracket(ground, spec, gammas, h, i, at_sample, scan)
        return _report(ground, spec, gamma, SOLVED, samples, iters, notes)
    return _no_crossing(ground, spec, gammas, h, scan, notes)


def _no_crossing(ground, spec, gammas, h, scan, notes) -> BalanceReport:
    absh = np.where(np.isfinite(h), np.abs(h), np.inf)
    if not np.isfinite(absh).any():
        return BalanceReport(NO_SIGN_CHANGE, sweep_samples=len(h), warnings=notes,
                             message="no equal hovering position at any sample")
    j = int(np.argmin(absh))
    # h may touch zero between samples without crossing; polish the minimum of |h|.
    step = math.pi / len(gammas)
    hfun = _scalar_hover(ground, spec, scan)
    res = minimize_scalar(lambda g: abs(hfun(g)), bounds=(gammas[j] - step, gammas[j] + step),
                          method="bounded", options={"xatol": 1e-12})
    if res.success and math.isfinite(res.fun) and res.fun <= BALANCE_TOL:
        gamma = float(res.x) % math.pi
        return _report(ground, spec, gamma, SOLVED, len(h), int(res.nfev), notes)
    return BalanceReport(NO_SIGN_CHANGE, sweep_samples=len(h), min_abs_hover=float(absh[j]),
                         argmin_gamma=float(gammas[j]), warnings=notes,
                         message="hover gap never changes sign over the half-turn")


def all_balances(ground, spec: TableSpec, samples: int = 1024) -> list[BalanceReport]:
    """Every balancing position bracketed by the azimuth grid, in order of gamma."""
    if not ground.continuous:
        raise PreconditionError(f"{ground.descriptor()} is discontinuous")
    scan = not within_critical(ground)
    gammas = sweep_gammas(samples)
    h = _sweep_arrays(ground, spec, gammas).hover
    out = []
    for i, at_sample in _brackets(gammas, h):
        gamma, iters = _solve_bracket(ground, spec, gammas, h, i, at_sample, scan)
        out.append(_report(ground, spec, gamma, SOLVED, samples, iters, []))
    return out


# ------------------------------------------------------------------ brute force

@dataclass
class BruteForceResult:
    azimuth: float
    incline: float
    tilt: float
    center_z: float
    objective: float
    residuals: np.ndarray
    table: PlacedTable
    evaluations: int


def _orientation(beta, gamma, phi, theta):
    gamma, phi, theta = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (gamma, phi, theta)))
    cp = np.cos(phi)
    u = np.stack([cp * np.cos(gamma), cp * np.sin(gamma), np.sin(phi)], axis=-1)
    w = np.stack([-np.sin(gamma), np.cos(gamma), np.zeros_like(gamma)], axis=-1)
    v = np.cross(u, w)
    e2 = -np.sin(theta)[..., None] * v + np.cos(theta)[..., None] * w
    return u, e2, math.cos(beta) * u + math.sin(beta) * e2


def _offset_residuals(ground, beta, gamma, phi, theta):
    """Vertical distances after shifting the centered table to zero their mean."""
    u, _, b = _orientation(beta, gamma, phi, theta)
    verts = np.stack([u, b, -u, -b], axis=-2)
    vert = verts[..., 2] - ground(verts[..., 0], verts[..., 1])
    mean = vert.mean(axis=-1)
    return vert - mean[..., None], -mean


def brute_force_balance(ground, spec: TableSpec, budget: int = 200_000,
                        candidates: int = 4) -> BruteForceResult:
    """Grid search over (azimuth, incline, tilt) plus Nelder-Mead polishing.

    The center stays on the z-axis at the height that zeroes the mean vertical
    distance; the objective is the largest remaining |vertical distance|.  About
    90% of ``budget`` goes to the grid and the rest to refinement.
    """
    beta = spec.half_angle
    m = max(3, int(round((0.9 * budget) ** (1 / 3))))
    m_odd = m if m % 2 else m + 1
    gam = np.arange(m) * np.pi / m
    phi = np.linspace(-np.pi / 4, np.pi / 4, m_odd)
    th = np.linspace(-np.pi / 2, np.pi / 2, m_odd)
    P, T = np.meshgrid(phi, th, indexing="ij")
    best = np.empty((m, m_odd, m_odd))
    for i, g in enumerate(gam):
        res, _ = _offset_residuals(ground, beta, g, P, T)
        best[i] = np.abs(res).max(axis=-1)
    evals = best.size
    order = np.argsort(best, axis=None, kind="stable")
    seeds = []
    for flat in order:
        idx = np.unravel_index(flat, best.shape)
        if all(max(abs(idx[0] - s[0]) % (m - 1), abs(idx[1] - s[1]), abs(idx[2] - s[2])) > 2
               for s in seeds):
            seeds.append(idx)
        if len(seeds) == candidates:
            break

    def objective(x):
        res, _ = _offset_residuals(ground, beta, x[0], x[1], x[2])
        return float(np.abs(res).max())

    def smooth(x):
        res, _ = _offset_residuals(ground, beta, x[0], x[1], x[2])
        return float(np.dot(res, res))

    top = min(seeds, key=lambda s: best[s])
    x_best = np.array([gam[top[0]], phi[top[1]], th[top[2]]])
    f_best = float(best[top])
    maxfev = max(0, (budget - evals) // max(1, len(seeds)))
    if f_best > 0 and maxfev > 0:
        for s in seeds:
            x0 = np.array([gam[s[0]], phi[s[1]], th[s[2]]])
            opt = minimize(smooth, x0, method="Nelder-Mead",
                           options={"xatol": 1e-13, "fatol": 1e-30, "maxfev": maxfev,
                                    "initial_simplex": x0 + np.vstack([np.zeros(3), np.eye(3) * 0.02])})
            evals += opt.nfev
            f = objective(opt.x)
            if f < f_best:
                x_best, f_best = opt.x, f
    gamma, ph, theta = (float(v) for v in x_best)
    res, shift = _offset_residuals(ground, beta, gamma, ph, theta)
    u, e2, _ = _orientation(beta, gamma, ph, theta)
    table = PlacedTable.from_frame([0.0, 0.0, float(shift)], u, e2, beta)
    return BruteForceResult(gamma, ph, theta, float(shift), f_best, res, table, int(evals))
