"""Open regions used as gluing domains."""
import math

import numpy as np

from .errors import BilipError
from .geom import TOL, as_points, dist_to_segment_many
from .kernels import segment_distances


class Region:
    kind = "region"
    dim: int

    def contains(self, P, closed=False, tol=TOL) -> np.ndarray:
        raise NotImplementedError

    def on_boundary(self, P, tol=TOL) -> np.ndarray:
        return self.contains(P, closed=True, tol=tol) & ~self.contains(P, closed=True, tol=-tol)

    def bbox(self):
        """Axis-aligned bounding box; unbounded directions use +-inf."""
        raise NotImplementedError

    def box_inside(self, lo, hi, tol=TOL) -> bool:
        """Whether the open box ``(lo, hi)`` lies in the closure of the region."""
        return False

    def sample_interior(self, rng, n, focus):
        raise NotImplementedError

    def sample_boundary(self, rng, n, focus):
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


def _clip_focus(lo, hi, focus):
    flo, fhi = focus
    lo = np.where(np.isfinite(lo), lo, flo)
    hi = np.where(np.isfinite(hi), hi, fhi)
    return lo, hi


class AxisBoxRegion(Region):
    """Open product of intervals, some possibly unbounded."""

    def __init__(self, lo, hi):
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        self.dim = self.lo.shape[0]
        if np.any(self.hi <= self.lo):
            raise BilipError(f"empty {self.kind} region")

    def contains(self, P, closed=False, tol=TOL):
        P = as_points(P, self.dim)
        if closed:
            return np.all((P >= self.lo - tol) & (P <= self.hi + tol), axis=1)
        return np.all((P > self.lo) & (P < self.hi), axis=1)

    def bbox(self):
        return self.lo.copy(), self.hi.copy()

    def box_inside(self, lo, hi, tol=TOL):
        return bool(np.all(lo >= self.lo - tol) and np.all(hi <= self.hi + tol))

    def sample_interior(self, rng, n, focus):
        lo, hi = _clip_focus(self.lo, self.hi, focus)
        lo, hi = np.maximum(lo, self.lo), np.minimum(hi, self.hi)
        return lo + rng.random((n, self.dim)) * (hi - lo)

    def sample_boundary(self, rng, n, focus):
        faces = [(k, side) for k in range(self.dim) for side, v in ((0, self.lo[k]), (1, self.hi[k]))
                 if math.isfinite(v)]
        if not faces:
            return np.zeros((0, self.dim))
        P = self.sample_interior(rng, n, focus)
        pick = rng.integers(len(faces), size=n)
        for i, f in enumerate(pick):
            k, side = faces[f]
            P[i, k] = self.hi[k] if side else self.lo[k]
        return P


class Box(AxisBoxRegion):
    kind = "box"

    def to_dict(self):
        return {"kind": self.kind, "lo": self.lo.tolist(), "hi": self.hi.tolist()}


class AxisSlab(AxisBoxRegion):
    """``{x : lo < x[axis] < hi}``."""

    kind = "axis-slab"

    def __init__(self, dim, axis, lo, hi):
        self.axis = int(axis)
        self.a, self.b = float(lo), float(hi)
        blo = np.full(dim, -np.inf)
        bhi = np.full(dim, np.inf)
        blo[self.axis], bhi[self.axis] = self.a, self.b
        super().__init__(blo, bhi)

    def to_dict(self):
        return {"kind": self.kind, "dim": self.dim, "axis": self.axis, "lo": self.a, "hi": self.b}


class TileColumn(AxisBoxRegion):
    """Open box in the horizontal coordinates times the whole vertical axis."""

    kind = "tile-column"

    def __init__(self, lo, hi):
        self.hlo = np.asarray(lo, dtype=float)
        self.hhi = np.asarray(hi, dtype=float)
        super().__init__(np.append(self.hlo, -np.inf), np.append(self.hhi, np.inf))

    def to_dict(self):
        return {"kind": self.kind, "lo": self.hlo.tolist(), "hi": self.hhi.tolist()}


class HalfSpace(Region):
    """``{x : normal . x < offset}``."""

    kind = "half-space"

    def __init__(self, normal, offset):
        n = np.asarray(normal, dtype=float)
        norm = np.linalg.norm(n)
        if norm == 0:
            raise BilipError("half-space normal must be nonzero")
        self.normal = n / norm
        self.offset = float(offset) / norm
        self.dim = n.shape[0]

    def contains(self, P, closed=False, tol=TOL):
        s = as_points(P, self.dim) @ self.normal
        return s <= self.offset + tol if closed else s < self.offset

    def bbox(self):
        lo = np.full(self.dim, -np.inf)
        hi = np.full(self.dim, np.inf)
        axis = np.flatnonzero(np.abs(self.normal) > 1 - 1e-15)
        if axis.size == 1:
            k = axis[0]
            if self.normal[k] > 0:
                hi[k] = self.offset
            else:
                lo[k] = -self.offset
        return lo, hi

    def box_inside(self, lo, hi, tol=TOL):
        corner = np.where(self.normal > 0, hi, lo)
        return bool(corner @ self.normal <= self.offset + tol)

    def sample_interior(self, rng, n, focus):
        lo, hi = focus
        P = lo + rng.random((n, self.dim)) * (hi - lo)
        s = P @ self.normal - self.offset
        shift = np.where(s >= 0, s + rng.random(n) * (1 + np.abs(s)), 0.0)
        return P - shift[:, None] * self.normal

    def sample_boundary(self, rng, n, focus):
        lo, hi = focus
        P = lo + rng.random((n, self.dim)) * (hi - lo)
        return P - (P @ self.normal - self.offset)[:, None] * self.normal

    def to_dict(self):
        return {"kind": self.kind, "normal": self.normal.tolist(), "offset": self.offset}


class TubeRegion(Region):
    kind = "tube"

    def __init__(self, a, b, r):
        self.a = np.asarray(a, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.r = float(r)
        self.dim = self.a.shape[0]
        if not self.r > 0:
            raise BilipError("tube radius must be positive")

    def contains(self, P, closed=False, tol=TOL):
        dist = dist_to_segment_many(as_points(P, self.dim), self.a, self.b)
        return dist <= self.r + tol if closed else dist < self.r

    def bbox(self):
        return np.minimum(self.a, self.b) - self.r, np.maximum(self.a, self.b) + self.r

    def same_tube(self, a, b, r, tol=TOL) -> bool:
        direct = np.allclose(self.a, a, atol=tol) and np.allclose(self.b, b, atol=tol)
        flipped = np.allclose(self.a, b, atol=tol) and np.allclose(self.b, a, atol=tol)
        return (direct or flipped) and r <= self.r + tol

    def _random_offsets(self, rng, n, radius):
        g = rng.normal(size=(n, self.dim))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        return g * radius[:, None]

    def sample_interior(self, rng, n, focus=None):
        t = rng.random(n)[:, None]
        base = self.a + t * (self.b - self.a)
        rad = self.r * rng.random(n) ** (1.0 / self.dim) * (1 - 1e-12)
        return base + self._random_offsets(rng, n, rad)

    def sample_boundary(self, rng, n, focus=None):
        # Points of the sphere-swept surface: push random directions out to distance r.
        P = self.sample_interior(rng, n)
        out = np.empty_like(P)
        ab = self.b - self.a
        L2 = float(ab @ ab)
        for i, p in enumerate(P):
            t = 0.0 if L2 == 0 else min(max(float((p - self.a) @ ab) / L2, 0.0), 1.0)
            foot = self.a + t * ab
            v = p - foot
            nv = np.linalg.norm(v)
            if nv == 0:
                v = rng.normal(size=self.dim)
                if L2 > 0:
                    v -= (v @ ab) / L2 * ab
                nv = np.linalg.norm(v)
            out[i] = foot + v / nv * self.r
        return out

    def to_dict(self):
        return {"kind": self.kind, "a": self.a.tolist(), "b": self.b.tolist(), "r": self.r}


def region_from_dict(obj) -> Region:
    kind = obj["kind"]
    if kind == "box":
        return Box(obj["lo"], obj["hi"])
    if kind == "axis-slab":
        return AxisSlab(obj["dim"], obj["axis"], obj["lo"], obj["hi"])
    if kind == "tile-column":
        return TileColumn(obj["lo"], obj["hi"])
    if kind == "half-space":
        return HalfSpace(obj["normal"], obj["offset"])
    if kind == "tube":
        return TubeRegion(obj["a"], obj["b"], obj["r"])
    raise BilipError(f"unknown region kind {kind!r}")


def _boxes_disjoint(alo, ahi, blo, bhi, tol=TOL) -> bool:
    return bool(np.any(ahi <= blo + tol) or np.any(bhi <= alo + tol))


def regions_disjoint(A: Region, B: Region, rng=None, samples=256) -> bool:
    """Decide whether two open regions are disjoint.

    Exact for axis boxes and tube pairs; other combinations fall back to
    bounding boxes and then to sampling.
    """
    alo, ahi = A.bbox()
    blo, bhi = B.bbox()
    if _boxes_disjoint(alo, ahi, blo, bhi):
        return True
    if isinstance(A, AxisBoxRegion) and isinstance(B, AxisBoxRegion):
        return False
    if isinstance(A, TubeRegion) and isinstance(B, TubeRegion):
        gap = segment_distances(A.a, A.b, B.a, B.b)[0]
        return gap >= A.r + B.r - TOL
    if isinstance(A, TubeRegion) and isinstance(B, AxisBoxRegion):
        A, B = B, A
    if isinstance(B, TubeRegion) and isinstance(A, (AxisBoxRegion, HalfSpace)):
        # The tube meets a convex region iff the region comes within r of the segment.
        return _tube_vs_convex_disjoint(B, A)
    rng = rng or np.random.default_rng(0)
    lo = np.maximum(alo, blo)
    hi = np.minimum(ahi, bhi)
    lo = np.where(np.isfinite(lo), lo, -1e3)
    hi = np.where(np.isfinite(hi), hi, 1e3)
    P = lo + rng.random((samples, len(lo))) * (hi - lo)
    return not np.any(A.contains(P) & B.contains(P))


def _tube_vs_convex_disjoint(tube: TubeRegion, region: Region) -> bool:
    if isinstance(region, HalfSpace):
        s = min(tube.a @ region.normal, tube.b @ region.normal)
        return s - tube.r >= region.offset - TOL
    # Distance from a segment to an axis box is a convex function of the segment parameter.
    def gap(t):
        p = tube.a + t * (tube.b - tube.a)
        q = np.clip(p, region.lo, region.hi)
        return float(np.linalg.norm(p - q))
    lo, hi = 0.0, 1.0
    for _ in range(100):
        m1 = lo + (hi - lo) / 3
        m2 = hi - (hi - lo) / 3
        if gap(m1) <= gap(m2):
            hi = m2
        else:
            lo = m1
    best = min(gap(0.0), gap(1.0), gap((lo + hi) / 2))
    return best >= tube.r - TOL
