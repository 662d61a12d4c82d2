"""Points, segments, tubes, lattices and separated-net bookkeeping."""
from dataclasses import dataclass, field
from fractions import Fraction
import itertools
import math

import numpy as np
from scipy.spatial import cKDTree

from .errors import BilipError

TOL = 1e-9


def as_points(P, dim=None) -> np.ndarray:
    """Coerce to a float (n, d) array, checking finiteness and dimension."""
    arr = np.asarray(P, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise BilipError(f"expected an (n, d) array of points, got shape {arr.shape}")
    if dim is not None and arr.shape[1] != dim:
        raise BilipError(f"dimension mismatch: expected {dim}, got {arr.shape[1]}")
    if not np.all(np.isfinite(arr)):
        raise BilipError("non-finite coordinate")
    return arr


def _same_dim(*pts):
    dims = {len(p) for p in pts}
    if len(dims) != 1:
        raise BilipError(f"dimension mismatch: {sorted(dims)}")


def dist_to_segment(p, a, b) -> float:
    """Euclidean distance from ``p`` to the closed segment ``[a, b]``."""
    p, a, b = (np.asarray(v, dtype=float) for v in (p, a, b))
    _same_dim(p, a, b)
    return float(dist_to_segment_many(p[None, :], a, b)[0])


def dist_to_segment_many(P, a, b) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    a = np.asarray(a, dtype=float)
    ab = np.asarray(b, dtype=float) - a
    L2 = float(ab @ ab)
    if L2 == 0.0:
        return np.linalg.norm(P - a, axis=1)
    t = np.clip((P - a) @ ab / L2, 0.0, 1.0)
    return np.linalg.norm(P - (a + t[:, None] * ab), axis=1)


@dataclass(frozen=True, eq=False)
class Tube:
    """Open ``r``-neighbourhood of the closed segment ``[a, b]``."""

    a: np.ndarray
    b: np.ndarray
    r: float

    def __post_init__(self):
        object.__setattr__(self, "a", np.asarray(self.a, dtype=float))
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float))
        _same_dim(self.a, self.b)
        if not self.r > 0:
            raise BilipError(f"tube radius must be positive, got {self.r}")

    def contains(self, P, closed=False, tol=TOL):
        dist = dist_to_segment_many(as_points(P), self.a, self.b)
        return dist <= self.r + tol if closed else dist < self.r

    def bbox(self):
        lo = np.minimum(self.a, self.b) - self.r
        hi = np.maximum(self.a, self.b) + self.r
        return lo, hi


@dataclass(frozen=True)
class LatticeSpec:
    """The scaled and shifted lattice ``offset + scale * Z^dim``."""

    dim: int
    scale: Fraction = Fraction(1)
    offset: tuple = None

    def __post_init__(self):
        scale = Fraction(self.scale)
        if isinstance(self.scale, float):
            scale = scale.limit_denominator(1 << 30)
        if scale <= 0 or scale.numerator != 1:
            raise BilipError(f"lattice scale must be 1/N with N >= 1, got {scale}")
        object.__setattr__(self, "scale", scale)
        off = tuple(float(v) for v in self.offset) if self.offset is not None else (0.0,) * self.dim
        if len(off) != self.dim:
            raise BilipError("lattice offset has the wrong dimension")
        object.__setattr__(self, "offset", off)

    @property
    def N(self) -> int:
        return self.scale.denominator

    @classmethod
    def unit(cls, dim):
        return cls(dim)


def nearest_lattice_point(p, spec: LatticeSpec = None) -> np.ndarray:
    """Closest lattice point, rounding each coordinate half up."""
    p = np.asarray(p, dtype=float)
    spec = spec or LatticeSpec.unit(p.shape[-1])
    if p.shape[-1] != spec.dim:
        raise BilipError("dimension mismatch between point and lattice")
    off = np.asarray(spec.offset)
    h = float(spec.scale)
    return off + h * np.floor((p - off) / h + 0.5)


def nearest_lattice_index(p, N=1) -> np.ndarray:
    """Integer numerators ``k`` of the nearest point ``k/N`` of (1/N)Z^d."""
    return np.floor(np.asarray(p, dtype=float) * N + 0.5).astype(np.int64)


def lattice_points_in_ball(center, t, spec: LatticeSpec = None) -> np.ndarray:
    """All lattice points in the closed ball of radius ``t`` (exact enumeration)."""
    center = np.asarray(center, dtype=float)
    d = center.shape[0]
    spec = spec or LatticeSpec.unit(d)
    if t < 0:
        raise BilipError("radius must be nonnegative")
    h = float(spec.scale)
    off = np.asarray(spec.offset)
    c = (center - off) / h
    rad = t / h
    lo = np.ceil(c - rad - TOL).astype(int)
    hi = np.floor(c + rad + TOL).astype(int)
    axes = [np.arange(lo[k], hi[k] + 1) for k in range(d)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    keep = np.linalg.norm(grid - c, axis=1) <= rad + TOL / h
    return off + h * grid[keep]


def ball_count_bounds(t, d):
    """Lower and upper bounds for ``|B(0,t) ∩ Z^d|`` valid when ``t >= sqrt(d)``."""
    return 2 ** d * (t / math.sqrt(d) - 1) ** d, 2 ** d * (t + 1) ** d


def min_pairwise_distance(P) -> float:
    P = as_points(P)
    if P.shape[0] < 2:
        return math.inf
    dist, _ = cKDTree(P).query(P, k=2)
    return float(dist[:, 1].min())


def _window_grid(lo, hi, step):
    axes = []
    for a, b in zip(lo, hi):
        n = max(1, int(math.floor((b - a) / step + 1e-9)))
        ax = a + step * np.arange(n + 1)
        ax = ax[ax <= b + 1e-12]
        if ax[-1] < b - 1e-12:
            ax = np.append(ax, b)
        axes.append(ax)
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(lo))


def net_constants(points, window, grid_step):
    """Exact separation and a sampled covering radius over ``window``.

    ``window`` is ``(lo, hi)``. The covering value is the largest distance from
    a grid sample of the window to the nearest point, so it underestimates the
    true covering radius.
    """
    P = as_points(points)
    if P.shape[0] < 2:
        raise BilipError("need at least two points")
    lo, hi = (np.asarray(w, dtype=float) for w in window)
    if lo.shape != (P.shape[1],) or hi.shape != lo.shape:
        raise BilipError("window dimension mismatch")
    if np.any(hi <= lo):
        raise BilipError("empty window")
    if not grid_step > 0:
        raise BilipError("grid_step must be positive")
    sep = min_pairwise_distance(P)
    samples = _window_grid(lo, hi, grid_step)
    cover, _ = cKDTree(P).query(samples, k=1)
    return sep, float(cover.max())


@dataclass(frozen=True, eq=False)
class SeparatedNet:
    """Finite point set with separation ``sep`` and covering radius ``cover`` on ``window``."""

    points: np.ndarray
    sep: float
    cover: float
    window: tuple
    cover_sampled: bool = field(default=True)

    def __post_init__(self):
        pts = as_points(self.points)
        object.__setattr__(self, "points", pts)
        lo, hi = (np.asarray(w, dtype=float) for w in self.window)
        object.__setattr__(self, "window", (lo, hi))
        if lo.shape != (self.dim,) or hi.shape != (self.dim,):
            raise BilipError("window dimension mismatch")
        if not self.sep > 0:
            raise BilipError("separation must be positive")
        if len(pts) >= 2 and min_pairwise_distance(pts) < self.sep - TOL:
            raise BilipError(f"points closer than the declared separation {self.sep}")

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return self.points.shape[0]

    def to_dict(self):
        return {"dim": self.dim, "points": self.points.tolist(), "sep": self.sep, "cover": self.cover,
                "window": [self.window[0].tolist(), self.window[1].tolist()],
                "cover_sampled": self.cover_sampled}

    @classmethod
    def from_dict(cls, obj):
        pts = np.asarray(obj["points"], dtype=float).reshape(-1, obj["dim"])
        return cls(pts, obj["sep"], obj["cover"], tuple(obj["window"]), obj.get("cover_sampled", True))


def poisson_disk_net(dim, sep, window, seed=0, attempts=30) -> SeparatedNet:
    """Bridson-style dart throwing in ``dim`` dimensions.

    Produces a ``sep``-separated set that is (up to sampling) a ``2*sep``-net of
    the window.
    """
    rng = np.random.default_rng(seed)
    lo, hi = (np.asarray(w, dtype=float) for w in window)
    if np.any(hi <= lo):
        raise BilipError("empty window")
    cell = sep / math.sqrt(dim)
    shape = tuple(int(math.ceil((b - a) / cell)) + 1 for a, b in zip(lo, hi))
    grid = -np.ones(shape, dtype=np.int64)
    pts = []

    def cell_of(p):
        return tuple(int(v) for v in np.floor((p - lo) / cell))

    def fits(p):
        c = cell_of(p)
        reach = int(math.ceil(math.sqrt(dim))) + 1
        ranges = [range(max(0, c[k] - reach), min(shape[k], c[k] + reach + 1)) for k in range(dim)]
        for idx in itertools.product(*ranges):
            j = grid[idx]
            if j >= 0 and np.linalg.norm(pts[j] - p) < sep:
                return False
        return True

    first = lo + rng.random(dim) * (hi - lo)
    pts.append(first)
    grid[cell_of(first)] = 0
    active = [0]
    while active:
        k = int(rng.integers(len(active)))
        base = pts[active[k]]
        placed = False
        for _ in range(attempts):
            direction = rng.normal(size=dim)
            direction /= np.linalg.norm(direction)
            cand = base + direction * sep * (1.0 + rng.random())
            if np.any(cand < lo) or np.any(cand > hi):
                continue
            if fits(cand):
                pts.append(cand)
                grid[cell_of(cand)] = len(pts) - 1
                active.append(len(pts) - 1)
                placed = True
                break
        if not placed:
            active.pop(k)
    P = np.array(pts)
    step = sep / 4
    if len(P) >= 2:
        _, cover = net_constants(P, (lo, hi), step)
    else:
        cover = float(np.linalg.norm(hi - lo))
    return SeparatedNet(P, sep=float(sep), cover=cover, window=(lo, hi))
