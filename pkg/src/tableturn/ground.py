"""Ground height fields g: R^2 -> R.

Every ground is an immutable callable evaluating ``g(x, y)`` elementwise on
scalars or numpy arrays.  Each carries a Lipschitz bound (``None`` when no
bound is known) and a continuity flag.

Grounds are normally built from a short descriptor string::

    flat
    plane:sx=0.5,sy=0
    cone:height=0.7071068,radius=1
    bumps:seed=3,target=0.7
    sum(plane:sx=0.2;radial:a=0.1,w=3)
    grid:path=terrain.txt
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import ClassVar, Optional

import numpy as np

# Maximum slope of a unit-amplitude Gaussian bump exp(-r^2 / 2 sigma^2) is e^(-1/2) / sigma.
GAUSS_SLOPE = math.exp(-0.5)


class GroundSpecError(ValueError):
    """Malformed ground descriptor or grid file."""

    def __init__(self, message: str, position: Optional[int] = None):
        self.position = position
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)


def _fmt(value: float) -> str:
    if float(value).is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(float(value))


class Ground:
    """Base class. Subclasses implement ``_eval`` on broadcast float arrays."""

    kind: ClassVar[str] = ""
    continuous: ClassVar[bool] = True
    # True when lipschitz_bound is the optimal constant, not just an upper bound.
    exact: ClassVar[bool] = True

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        z = self._eval(*np.broadcast_arrays(x, y))
        if z.ndim == 0:
            return float(z)
        return z

    def height(self, x, y):
        return self(x, y)

    def _eval(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @property
    def lipschitz_bound(self) -> Optional[float]:
        raise NotImplementedError

    def params(self) -> dict:
        return {}

    def descriptor(self) -> str:
        params = self.params()
        if not params:
            return self.kind
        body = ",".join(f"{k}={_fmt(v) if not isinstance(v, str) else v}" for k, v in params.items())
        return f"{self.kind}:{body}"

    def __str__(self) -> str:
        return self.descriptor()


@dataclass(frozen=True)
class Flat(Ground):
    kind: ClassVar[str] = "flat"

    def _eval(self, x, y):
        return np.zeros_like(x)

    @property
    def lipschitz_bound(self):
        return 0.0


@dataclass(frozen=True)
class Plane(Ground):
    """g = sx*x + sy*y."""

    sx: float = 0.0
    sy: float = 0.0
    kind: ClassVar[str] = "plane"

    def _eval(self, x, y):
        return self.sx * x + self.sy * y

    @property
    def lipschitz_bound(self):
        return math.hypot(self.sx, self.sy)

    def params(self):
        return {"sx": self.sx, "sy": self.sy}


@dataclass(frozen=True)
class Cone(Ground):
    """Cone of the given height over a disc, flat (z = 0) outside it."""

    height: float = 1 / math.sqrt(2)
    radius: float = 1.0
    kind: ClassVar[str] = "cone"

    def __post_init__(self):
        if not self.radius > 0:
            raise GroundSpecError(f"cone radius must be positive, got {self.radius}")

    def _eval(self, x, y):
        rho = np.hypot(x, y)
        return self.height * np.maximum(0.0, 1.0 - rho / self.radius)

    @property
    def lipschitz_bound(self):
        return abs(self.height) / self.radius

    def params(self):
        return {"height": self.height, "radius": self.radius}


@dataclass(frozen=True)
class Ridge(Ground):
    """Two half-planes meeting in a crest along the x-axis: g = -s*|y|."""

    s: float = 0.9
    kind: ClassVar[str] = "ridge"

    def _eval(self, x, y):
        return -self.s * np.abs(y)

    @property
    def lipschitz_bound(self):
        return abs(self.s)

    def params(self):
        return {"s": self.s}


@dataclass(frozen=True)
class Cliff(Ground):
    """Four quadrants, the first and third at height 2, the others at height 1."""

    kind: ClassVar[str] = "cliff"
    continuous: ClassVar[bool] = False
    exact: ClassVar[bool] = False

    def _eval(self, x, y):
        angle = np.mod(np.arctan2(y, x), 2 * np.pi)
        high = (angle < np.pi / 2) | ((angle >= np.pi) & (angle < 3 * np.pi / 2))
        return np.where(high, 2.0, 1.0)

    @property
    def lipschitz_bound(self):
        return None


@dataclass(frozen=True)
class Radial(Ground):
    """Rotationally symmetric ripple g = a*cos(2*pi*rho/w)."""

    a: float = 0.2
    w: float = 3.0
    kind: ClassVar[str] = "radial"

    def __post_init__(self):
        if not self.w > 0:
            raise GroundSpecError(f"radial wavelength w must be positive, got {self.w}")

    def _eval(self, x, y):
        return self.a * np.cos(2 * np.pi * np.hypot(x, y) / self.w)

    @property
    def lipschitz_bound(self):
        return 2 * math.pi * abs(self.a) / self.w

    def params(self):
        return {"a": self.a, "w": self.w}


@dataclass(frozen=True)
class Bumps(Ground):
    """Sum of ``n`` Gaussian bumps of equal magnitude and random sign.

    Centers lie in [-1.5, 1.5]^2. Draws come from numpy's PCG64 bit generator
    seeded with ``seed``; ``Generator.random`` output is stable across
    platforms.  When ``target`` is given the common amplitude is rescaled so
    that the derived bound ``n * amp * e^(-1/2) / sigma`` equals it.
    """

    seed: int = 0
    n: int = 4
    amp: float = 0.1
    sigma: float = 0.4
    target: Optional[float] = None
    centers: np.ndarray = field(init=False, repr=False, compare=False)
    amplitudes: np.ndarray = field(init=False, repr=False, compare=False)
    kind: ClassVar[str] = "bumps"
    exact: ClassVar[bool] = False

    def __post_init__(self):
        if self.n < 1:
            raise GroundSpecError(f"bumps n must be at least 1, got {self.n}")
        if not self.sigma > 0:
            raise GroundSpecError(f"bumps sigma must be positive, got {self.sigma}")
        if self.target is not None and not self.target > 0:
            raise GroundSpecError(f"bumps target must be positive, got {self.target}")
        rng = np.random.Generator(np.random.PCG64(self.seed))
        draws = rng.random((self.n, 3))
        centers = 3.0 * draws[:, :2] - 1.5
        signs = np.where(draws[:, 2] < 0.5, -1.0, 1.0)
        amp = self.amp
        if self.target is not None:
            amp = self.target * self.sigma / (self.n * GAUSS_SLOPE)
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "amplitudes", signs * amp)

    def _eval(self, x, y):
        dx = x[..., None] - self.centers[:, 0]
        dy = y[..., None] - self.centers[:, 1]
        terms = self.amplitudes * np.exp(-(dx * dx + dy * dy) / (2 * self.sigma**2))
        return terms.sum(axis=-1)

    @property
    def lipschitz_bound(self):
        if self.target is not None:
            return float(self.target)
        return self.n * abs(self.amp) * GAUSS_SLOPE / self.sigma

    def params(self):
        p = {"seed": self.seed, "n": self.n, "sigma": self.sigma}
        if self.target is None:
            p["amp"] = self.amp
        else:
            p["target"] = self.target
        return p


@dataclass(frozen=True)
class SumGround(Ground):
    parts: tuple = ()
    kind: ClassVar[str] = "sum"
    exact: ClassVar[bool] = False

    @property
    def continuous(self):  # type: ignore[override]
        return all(p.continuous for p in self.parts)

    def _eval(self, x, y):
        total = np.zeros_like(x)
        for part in self.parts:
            total = total + part._eval(x, y)
        return total

    @property
    def lipschitz_bound(self):
        bounds = [p.lipschitz_bound for p in self.parts]
        if any(b is None for b in bounds):
            return None
        return float(sum(bounds))

    def descriptor(self):
        return "sum(" + ";".join(p.descriptor() for p in self.parts) + ")"


class GridGround(Ground):
    """Bilinear interpolation of a regular height grid.

    ``heights[i, j]`` is the height at ``(x0 + i*dx, y0 + j*dy)``.  Queries
    outside the grid are clamped to the nearest boundary point, which keeps
    the extension continuous and does not raise the Lipschitz constant.
    """

    kind: ClassVar[str] = "grid"

    def __init__(self, origin, spacing, heights, path: Optional[str] = None):
        heights = np.array(heights, dtype=float)
        if heights.ndim != 2 or heights.shape[0] < 2 or heights.shape[1] < 2:
            raise GroundSpecError(f"grid needs at least 2x2 heights, got shape {heights.shape}")
        if not np.all(np.isfinite(heights)):
            raise GroundSpecError("grid heights must be finite")
        dx, dy = (float(s) for s in spacing)
        if not (dx > 0 and dy > 0):
            raise GroundSpecError(f"grid spacing must be positive, got {(dx, dy)}")
        heights.setflags(write=False)
        self.origin = (float(origin[0]), float(origin[1]))
        self.spacing = (dx, dy)
        self.heights = heights
        self.path = path
        self._lip = self._corner_gradient_max()

    @property
    def dims(self) -> tuple:
        return self.heights.shape

    def _corner_gradient_max(self) -> float:
        h = self.heights
        dx, dy = self.spacing
        gx = np.diff(h, axis=0) / dx  # (nx-1, ny)
        gy = np.diff(h, axis=1) / dy  # (nx, ny-1)
        # On cell (i, j) the x-derivative is linear in y and the y-derivative
        # linear in x, so |grad|^2 is convex and peaks at a corner.
        best = 0.0
        for sx in (0, 1):
            for sy in (0, 1):
                cx = gx[:, sy:sy + h.shape[1] - 1]
                cy = gy[sx:sx + h.shape[0] - 1, :]
                best = max(best, float(np.max(np.hypot(cx, cy))))
        return best

    @property
    def lipschitz_bound(self):
        return self._lip

    def cell_height(self, i, j, fx, fy):
        """Bilinear value inside cell (i, j) at fractional offsets (fx, fy)."""
        h = self.heights
        return ((1 - fx) * (1 - fy) * h[i, j] + fx * (1 - fy) * h[i + 1, j]
                + (1 - fx) * fy * h[i, j + 1] + fx * fy * h[i + 1, j + 1])

    def _eval(self, x, y):
        nx, ny = self.heights.shape
        gx = np.clip((x - self.origin[0]) / self.spacing[0], 0.0, nx - 1)
        gy = np.clip((y - self.origin[1]) / self.spacing[1], 0.0, ny - 1)
        i = np.minimum(np.floor(gx).astype(int), nx - 2)
        j = np.minimum(np.floor(gy).astype(int), ny - 2)
        return self.cell_height(i, j, gx - i, gy - j)

    def descriptor(self):
        if self.path is None:
            nx, ny = self.dims
            return f"grid:nx={nx},ny={ny}"
        return f"grid:path={self.path}"


class ConeEnvelope(Ground):
    """Largest ground of Lipschitz constant ``slope`` through the given points.

    g(p) = min_i (z_i + slope * |p - p_i|).  Built programmatically (no
    descriptor syntax); used as the worst-case ground for leg-length checks.
    """

    kind: ClassVar[str] = "envelope"

    def __init__(self, points, slope: float):
        self.points = np.array(points, dtype=float).reshape(-1, 3)
        self.slope = float(slope)

    def _eval(self, x, y):
        d = np.hypot(x[..., None] - self.points[:, 0], y[..., None] - self.points[:, 1])
        return np.min(self.points[:, 2] + self.slope * d, axis=-1)

    @property
    def lipschitz_bound(self):
        return self.slope

    def descriptor(self):
        return f"envelope:slope={_fmt(self.slope)},points={len(self.points)}"


def height(ground: Ground, x, y):
    return ground(x, y)


def lipschitz_bound(ground: Ground) -> Optional[float]:
    """Declared Lipschitz bound, or None when unknown (e.g. the cliff)."""
    return ground.lipschitz_bound


def estimate_lipschitz(ground: Ground, region=((-2.0, 2.0), (-2.0, 2.0)), n: int = 10_000,
                       seed: int = 0) -> float:
    """Empirical lower bound on the Lipschitz constant over ``region``.

    Sample ``i`` contributes two difference quotients: a uniformly random pair
    of points, and a short pair starting at the first point and pointing along
    a central-difference gradient estimate.  Row ``i`` of the random draws
    depends only on ``i``, so the estimate is nondecreasing in ``n``.
    """
    if n < 2:
        raise ValueError("need at least 2 samples")
    (x0, x1), (y0, y1) = region
    if not (x1 > x0 and y1 > y0):
        raise ValueError(f"degenerate region {region}")
    lo = np.array([x0, y0])
    size = np.array([x1 - x0, y1 - y0])
    diam = float(np.hypot(*size))
    u = np.random.Generator(np.random.PCG64(seed)).random((n, 6))

    P = lo + u[:, 0:2] * size
    Q = lo + u[:, 2:4] * size
    gP = ground(P[:, 0], P[:, 1])
    best = _max_quotient(gP, ground(Q[:, 0], Q[:, 1]), P, Q)

    step = diam * 10.0 ** (-2.0 - 3.0 * u[:, 4])
    gx = (ground(P[:, 0] + step, P[:, 1]) - ground(P[:, 0] - step, P[:, 1])) / (2 * step)
    gy = (ground(P[:, 0], P[:, 1] + step) - ground(P[:, 0], P[:, 1] - step)) / (2 * step)
    norm = np.hypot(gx, gy)
    angle = 2 * np.pi * u[:, 5]
    safe = np.where(norm > 0, norm, 1.0)
    dirx = np.where(norm > 0, gx / safe, np.cos(angle))
    diry = np.where(norm > 0, gy / safe, np.sin(angle))
    R = np.column_stack([np.clip(P[:, 0] + step * dirx, x0, x1),
                         np.clip(P[:, 1] + step * diry, y0, y1)])
    best = max(best, _max_quotient(gP, ground(R[:, 0], R[:, 1]), P, R))
    return best


def _max_quotient(gP, gQ, P, Q) -> float:
    dist = np.hypot(*(P - Q).T)
    ok = dist > 0
    if not np.any(ok):
        return 0.0
    return float(np.max(np.abs(gP[ok] - gQ[ok]) / dist[ok]))


# ---------------------------------------------------------------- parsing

_KINDS = {
    "flat": (Flat, {}),
    "plane": (Plane, {"sx": float, "sy": float}),
    "cone": (Cone, {"height": float, "radius": float}),
    "ridge": (Ridge, {"s": float}),
    "cliff": (Cliff, {}),
    "radial": (Radial, {"a": float, "w": float}),
    "bumps": (Bumps, {"seed": int, "n": int, "amp": float, "sigma": float, "target": float}),
}

_NUMBER = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, message):
        raise GroundSpecError(message, self.pos)

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, char):
        if self.peek() != char:
            self.error(f"expected {char!r}, found {self.peek() or 'end of input'!r}")
        self.pos += 1

    def name(self) -> str:
        m = _NAME.match(self.text, self.pos)
        if not m:
            self.error("expected a name")
        self.pos = m.end()
        return m.group()

    def ground(self) -> Ground:
        start = self.pos
        kind = self.name()
        if kind == "sum":
            self.expect("(")
            parts = [self.ground()]
            while self.peek() == ";":
                self.pos += 1
                parts.append(self.ground())
            self.expect(")")
            return SumGround(tuple(parts))
        if kind == "grid":
            return self.grid()
        if kind not in _KINDS:
            self.pos = start
            self.error(f"unknown ground kind {kind!r}")
        cls, schema = _KINDS[kind]
        kwargs = {}
        if self.peek() == ":":
            self.pos += 1
            while True:
                key_pos = self.pos
                key = self.name()
                if key not in schema:
                    self.pos = key_pos
                    self.error(f"unknown parameter {key!r} for {kind}")
                if key in kwargs:
                    self.pos = key_pos
                    self.error(f"duplicate parameter {key!r}")
                self.expect("=")
                kwargs[key] = self.number(schema[key])
                if self.peek() != ",":
                    break
                self.pos += 1
        try:
            return cls(**kwargs)
        except GroundSpecError as exc:
            raise GroundSpecError(str(exc), start) from None

    def number(self, typ):
        m = _NUMBER.match(self.text, self.pos)
        if not m:
            self.error("expected a number")
        value = float(m.group())
        if not math.isfinite(value):
            self.error("number out of range")
        if typ is int:
            if not value.is_integer():
                self.error(f"expected an integer, got {m.group()}")
            value = int(value)
        self.pos = m.end()
        return value

    def grid(self) -> Ground:
        self.expect(":")
        key = self.name()
        if key != "path":
            self.error("grid takes a single parameter 'path'")
        self.expect("=")
        end = self.pos
        while end < len(self.text) and self.text[end] not in ";)":
            end += 1
        path = self.text[self.pos:end]
        if not path:
            self.error("empty grid path")
        self.pos = end
        return load_grid(path)


def parse_ground(spec: str) -> Ground:
    """Parse a ground descriptor; see the module docstring for the grammar."""
    parser = _Parser(spec.strip())
    ground = parser.ground()
    if parser.pos != len(parser.text):
        parser.error(f"unexpected trailing input {parser.text[parser.pos:]!r}")
    return ground


def load_grid(path) -> GridGround:
    """Read a grid file: header ``x0 y0 dx dy nx ny`` then ny rows of nx heights."""
    raw = Path(path).read_bytes().decode("utf-8")
    lines = [ln for ln in raw.replace("\r\n", "\n").split("\n") if ln.strip()]
    if not lines:
        raise GroundSpecError(f"{path}: empty grid file")
    header = lines[0].split()
    if len(header) != 6:
        raise GroundSpecError(f"{path}: header must be 'x0 y0 dx dy nx ny'")
    try:
        x0, y0, dx, dy = (float(v) for v in header[:4])
        nx, ny = int(header[4]), int(header[5])
    except ValueError:
        raise GroundSpecError(f"{path}: malformed header {lines[0]!r}") from None
    if nx < 2 or ny < 2:
        raise GroundSpecError(f"{path}: dims must be at least 2x2, got {nx}x{ny}")
    rows = lines[1:]
    if len(rows) != ny:
        raise GroundSpecError(f"{path}: expected {ny} height rows, found {len(rows)}")
    heights = np.empty((nx, ny))
    for j, row in enumerate(rows):
        values = row.split()
        if len(values) != nx:
            raise GroundSpecError(f"{path}: row {j + 1} has {len(values)} values, expected {nx}")
        try:
            heights[:, j] = [float(v) for v in values]
        except ValueError:
            raise GroundSpecError(f"{path}: row {j + 1} is not numeric") from None
    if not np.all(np.isfinite(heights)):
        raise GroundSpecError(f"{path}: non-finite height")
    return GridGround((x0, y0), (dx, dy), heights, path=str(path))
