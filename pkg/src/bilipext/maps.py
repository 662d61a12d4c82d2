"""Invertible bilipschitz maps of R^d as immutable expression trees.

Every node knows how to push an ``(n, d)`` array of points forward and
backward, and carries two certified constants in log2 scale: ``lip`` bounds
``Lip(f)`` and ``colip`` bounds ``Lip(f^{-1})``. Tracking the two directions
separately keeps conjugations such as ``A^{-1} M A`` sharp.
"""
from functools import cached_property
import math

import numpy as np

from .errors import (BilipError, BoundaryMismatchError, RegionOverlapError,
                     RegionPreservationError)
from .geom import TOL, as_points
from .kernels import SwapPack, swap_chain
from .regions import (AxisBoxRegion, HalfSpace, Region, TubeRegion, region_from_dict,
                      regions_disjoint)


def _empty_box(d):
    return np.full(d, np.inf), np.full(d, -np.inf)


def _is_empty(box):
    return box is not None and bool(np.any(box[0] > box[1]))


def _union(a, b):
    if a is None or b is None:
        return None
    return np.minimum(a[0], b[0]), np.maximum(a[1], b[1])


class MapExpr:
    kind = "abstract"
    dim: int
    lip: float = 0.0
    colip: float = 0.0

    @property
    def log2_bound(self) -> float:
        """log2 of the certified bilipschitz constant (never negative)."""
        return max(0.0, self.lip, self.colip)

    @property
    def bound(self) -> float:
        return 2.0 ** self.log2_bound

    def forward(self, P) -> np.ndarray:
        raise NotImplementedError

    def backward(self, P) -> np.ndarray:
        raise NotImplementedError

    def inverse(self) -> "MapExpr":
        raise NotImplementedError

    def support(self):
        """Open box outside of which the map is the identity, or None if unknown."""
        return None

    def swap_pack(self):
        """A flat swap chain equivalent to this node, or None."""
        return None

    def to_dict(self) -> dict:
        raise NotImplementedError

    def _header(self):
        return {"kind": self.kind, "dim": self.dim, "lip": self.lip, "colip": self.colip,
                "log2_bound": self.log2_bound}

    def __call__(self, p):
        return evaluate(self, p)

    def node_count(self) -> int:
        return 1


def evaluate(m: MapExpr, p) -> np.ndarray:
    """Image of a point (shape ``(d,)``) or of each row of an ``(n, d)`` array."""
    arr = np.asarray(p, dtype=float)
    out = m.forward(as_points(arr, m.dim))
    return out[0] if arr.ndim == 1 else out


def evaluate_inverse(m: MapExpr, p) -> np.ndarray:
    arr = np.asarray(p, dtype=float)
    out = m.backward(as_points(arr, m.dim))
    return out[0] if arr.ndim == 1 else out


# ------------------------------------------------------------------ identity

class Identity(MapExpr):
    kind = "identity"

    def __init__(self, dim):
        self.dim = int(dim)

    def forward(self, P):
        return np.array(P, dtype=float, copy=True)

    backward = forward

    def inverse(self):
        return self

    def support(self):
        return _empty_box(self.dim)

    def swap_pack(self):
        return SwapPack.concat([], self.dim)

    def to_dict(self):
        return self._header()


# -------------------------------------------------------------------- affine

AFFINE_KINDS = ("translation", "uniform-scale", "diagonal-scale", "orthogonal-frame")


class Affine(MapExpr):
    """``x -> A x + b`` for one of four restricted matrix shapes."""

    kind = "affine"

    def __init__(self, subkind, param, offset):
        if subkind not in AFFINE_KINDS:
            raise BilipError(f"unknown affine kind {subkind!r}")
        self.subkind = subkind
        self.offset = np.asarray(offset, dtype=float)
        self.dim = self.offset.shape[0]
        d = self.dim
        if subkind == "translation":
            self.param = None
            self.matrix = np.eye(d)
            self.lip = self.colip = 0.0
        elif subkind == "uniform-scale":
            s = float(param)
            if s == 0 or not math.isfinite(s):
                raise BilipError("scale factor must be finite and nonzero")
            self.param = s
            self.matrix = s * np.eye(d)
            self.lip, self.colip = math.log2(abs(s)), -math.log2(abs(s))
        elif subkind == "diagonal-scale":
            diag = np.asarray(param, dtype=float)
            if diag.shape != (d,) or np.any(diag == 0) or not np.all(np.isfinite(diag)):
                raise BilipError("diagonal entries must be finite and nonzero")
            self.param = diag
            self.matrix = np.diag(diag)
            self.lip = math.log2(float(np.abs(diag).max()))
            self.colip = -math.log2(float(np.abs(diag).min()))
        else:
            Q = np.asarray(param, dtype=float)
            if Q.shape != (d, d) or not np.allclose(Q.T @ Q, np.eye(d), atol=1e-12):
                raise BilipError("orthogonal frame must have orthonormal columns")
            self.param = Q
            self.matrix = Q
            self.lip = self.colip = 0.0

    def forward(self, P):
        P = np.asarray(P, dtype=float)
        if self.subkind == "translation":
            return P + self.offset
        if self.subkind == "uniform-scale":
            return self.param * P + self.offset
        if self.subkind == "diagonal-scale":
            return P * self.param + self.offset
        return P @ self.matrix.T + self.offset

    def backward(self, P):
        P = np.asarray(P, dtype=float) - self.offset
        if self.subkind == "translation":
            return P
        if self.subkind == "uniform-scale":
            return P / self.param
        if self.subkind == "diagonal-scale":
            return P / self.param
        return P @ self.matrix

    def inverse(self):
        if self.subkind == "translation":
            return Affine("translation", None, -self.offset)
        if self.subkind == "uniform-scale":
            return Affine("uniform-scale", 1.0 / self.param, -self.offset / self.param)
        if self.subkind == "diagonal-scale":
            return Affine("diagonal-scale", 1.0 / self.param, -self.offset / self.param)
        return Affine("orthogonal-frame", self.matrix.T, -(self.matrix.T @ self.offset))

    def image_box(self, box):
        """Bounding box of the image of a box."""
        if box is None or _is_empty(box):
            return box
        lo, hi = box
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            return None
        if self.subkind == "orthogonal-frame":
            center = self.forward(((lo + hi) / 2)[None])[0]
            half = np.abs(self.matrix) @ ((hi - lo) / 2)
            return center - half, center + half
        a = self.forward(lo[None])[0]
        b = self.forward(hi[None])[0]
        return np.minimum(a, b), np.maximum(a, b)

    def is_inverse_of(self, other, tol=1e-12) -> bool:
        if not isinstance(other, Affine) or other.dim != self.dim:
            return False
        prod = self.matrix @ other.matrix
        return bool(np.allclose(prod, np.eye(self.dim), atol=tol)
                    and np.allclose(self.matrix @ other.offset + self.offset, 0.0,
                                    atol=tol * (1 + np.abs(self.offset).max())))

    def to_dict(self):
        out = self._header()
        out["affine"] = self.subkind
        out["offset"] = self.offset.tolist()
        if self.subkind == "uniform-scale":
            out["param"] = self.param
        elif self.subkind == "diagonal-scale":
            out["param"] = self.param.tolist()
        elif self.subkind == "orthogonal-frame":
            out["param"] = self.matrix.tolist()
        return out


def translation(offset) -> Affine:
    return Affine("translation", None, offset)


def uniform_scale(s, dim, offset=None) -> Affine:
    return Affine("uniform-scale", s, np.zeros(dim) if offset is None else offset)


def diagonal_scale(diag, offset=None) -> Affine:
    diag = np.asarray(diag, dtype=float)
    return Affine("diagonal-scale", diag, np.zeros(diag.shape[0]) if offset is None else offset)


def orthogonal_frame(Q, offset=None) -> Affine:
    Q = np.asarray(Q, dtype=float)
    return Affine("orthogonal-frame", Q, np.zeros(Q.shape[0]) if offset is None else offset)


# ---------------------------------------------------------------------- spin

class Spin(MapExpr):
    """Rotation in the plane span(u, v) by an angle depending on the distance to ``center``."""

    kind = "spin"

    def __init__(self, center, u, v, ts, vals, t0):
        self.center = np.asarray(center, dtype=float)
        self.dim = self.center.shape[0]
        self.u = np.asarray(u, dtype=float)
        self.v = np.asarray(v, dtype=float)
        self.ts = np.asarray(ts, dtype=float)
        self.vals = np.asarray(vals, dtype=float)
        self.t0 = float(t0)
        if self.dim < 2:
            raise BilipError("spin maps need dimension at least 2")
        if not (np.isclose(self.u @ self.u, 1, atol=1e-12) and np.isclose(self.v @ self.v, 1, atol=1e-12)
                and abs(self.u @ self.v) < 1e-12):
            raise BilipError("spin plane vectors must be orthonormal")
        if self.ts.ndim != 1 or self.ts.shape != self.vals.shape or self.ts.size < 1:
            raise BilipError("profile needs matching breakpoint and value lists")
        if self.ts[0] != 0 or np.any(np.diff(self.ts) <= 0):
            raise BilipError("profile breakpoints must start at 0 and increase")
        if not self.t0 > 0:
            raise BilipError("t0 must be positive")
        tail = self.vals[self.ts >= self.t0]
        if self.vals[-1] != 0 or np.any(tail != 0) or self.profile(np.array([self.t0]))[0] != 0:
            raise BilipError("profile does not vanish beyond t0")
        slopes = np.abs(np.diff(self.vals) / np.diff(self.ts)) if self.ts.size > 1 else np.zeros(1)
        self.profile_lip = float(slopes.max()) if slopes.size else 0.0
        self.lip = self.colip = math.log2(self.profile_lip * self.t0 + 1.0)

    def profile(self, t):
        return np.interp(t, self.ts, self.vals, right=self.vals[-1])

    def _rotate(self, P, sign):
        P = np.asarray(P, dtype=float)
        rel = P - self.center
        t = np.linalg.norm(rel, axis=1)
        theta = sign * self.profile(t)
        a = rel @ self.u
        b = rel @ self.v
        cs, sn = np.cos(theta), np.sin(theta)
        a2 = cs * a - sn * b
        b2 = sn * a + cs * b
        out = P + (a2 - a)[:, None] * self.u + (b2 - b)[:, None] * self.v
        return np.where((theta == 0)[:, None], P, out)

    def forward(self, P):
        return self._rotate(P, 1.0)

    def backward(self, P):
        return self._rotate(P, -1.0)

    def inverse(self):
        return Spin(self.center, self.u, self.v, self.ts, -self.vals, self.t0)

    def support(self):
        return self.center - self.t0, self.center + self.t0

    def to_dict(self):
        out = self._header()
        out.update(center=self.center.tolist(), u=self.u.tolist(), v=self.v.tolist(),
                   ts=self.ts.tolist(), vals=self.vals.tolist(), t0=self.t0)
        return out


def spin_map(center, u, v, ts, vals, t0) -> Spin:
    """Spin map fixing the complement of the ball ``B(center, t0)``."""
    return Spin(center, u, v, ts, vals, t0)


def swap_profile(eta):
    """Breakpoints of the angle profile used by the tube swap with ratio ``eta``."""
    return np.array([0.0, 1.0, 1.0 + 2.0 * eta]), np.array([math.pi, math.pi, 0.0])


# ---------------------------------------------------------------------- swap

def householder_frame(u) -> np.ndarray:
    """Orthogonal matrix whose first column is the unit vector ``u``.

    The second column is the image of the last basis vector under the
    Householder reflection taking ``e_1`` to ``u``; the rest follow in order.
    """
    u = np.asarray(u, dtype=float)
    d = u.shape[0]
    w = -u.copy()
    w[0] += 1.0
    ww = float(w @ w)
    H = np.eye(d) if ww < 1e-30 else np.eye(d) - 2.0 * np.outer(w, w) / ww
    if d == 1:
        return H
    order = [0, d - 1] + list(range(1, d - 1))
    return H[:, order]


class Swap(MapExpr):
    """Bilipschitz map exchanging ``x`` and ``y`` and fixing everything outside ``B([x,y], r)``.

    ``sign = -1`` denotes the inverse map.
    """

    kind = "swap"

    def __init__(self, x, y, r, sign=1):
        self.x = np.asarray(x, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.r = float(r)
        self.sign = 1 if sign >= 0 else -1
        self.dim = self.x.shape[0]
        if self.dim < 2:
            raise BilipError("swaps need dimension at least 2")
        self.D = float(np.linalg.norm(self.x - self.y))
        if self.D == 0:
            raise BilipError("degenerate swap; use Identity")
        self.eta = self.r / self.D
        if not (0 < self.eta <= 0.5 + 1e-12):
            raise BilipError(f"swap radius {self.r} exceeds half the endpoint distance {self.D}")
        self.center = (self.x + self.y) / 2
        F = householder_frame((self.x - self.y) / self.D)
        self.frame = F
        self.u = F[:, 0]
        self.v = F[:, 1]
        self.lip = self.colip = math.log2(4.0 / self.eta ** 2)

    def support(self):
        # Moving set: ellipsoid with semi-axis (1/2 + eta) D along u and eta D across.
        long_ax = (0.5 + self.eta) * self.D
        short_ax = self.eta * self.D
        half = np.sqrt((long_ax * self.u) ** 2 + short_ax ** 2 * (1 - self.u ** 2))
        half = half * (1 + 1e-12) + 1e-12 * (1 + np.abs(self.center))
        return self.center - half, self.center + half

    @cached_property
    def _pack(self):
        lo, hi = self.support()
        return SwapPack(self.center[None], self.u[None], self.v[None], np.array([self.D]),
                        np.array([self.eta]), np.array([float(self.sign)]), lo[None], hi[None])

    def swap_pack(self):
        return self._pack

    def forward(self, P):
        return swap_chain(P, self._pack)

    def backward(self, P):
        return swap_chain(P, self._pack.reversed_inverse())

    def inverse(self):
        return Swap(self.x, self.y, self.r, -self.sign)

    def as_conjugated_spin(self) -> "Compose":
        """The same map written as ``T^{-1} o spin o T`` with an explicit normalising T."""
        d = self.dim
        k = 2.0 + 1.0 / self.eta
        rot = orthogonal_frame(self.frame.T, -(self.frame.T @ self.center))
        stretch = diagonal_scale(np.array([2.0] + [k] * (d - 1)) / self.D)
        ts, vals = swap_profile(self.eta)
        e1, e2 = np.eye(d)[0], np.eye(d)[1]
        spin = Spin(np.zeros(d), e1, e2, ts, self.sign * vals, 1.0 + 2.0 * self.eta)
        return Compose([rot, stretch, spin, stretch.inverse(), rot.inverse()])

    def to_dict(self):
        out = self._header()
        out.update(x=self.x.tolist(), y=self.y.tolist(), r=self.r, inverted=self.sign < 0)
        return out


# ------------------------------------------------------------------- compose

class Compose(MapExpr):
    """Apply ``children`` left to right: ``Compose([A, B])(p) = B(A(p))``."""

    kind = "compose"

    def __init__(self, children):
        self.children = tuple(children)
        if not self.children:
            raise BilipError("Compose needs at least one child; use compose()")
        dims = {c.dim for c in self.children}
        if len(dims) != 1:
            raise BilipError(f"dimension mismatch in composition: {sorted(dims)}")
        self.dim = dims.pop()
        self.lip = float(sum(c.lip for c in self.children))
        self.colip = float(sum(c.colip for c in self.children))

    def node_count(self):
        return 1 + sum(c.node_count() for c in self.children)

    @cached_property
    def _plan(self):
        steps, run = [], []
        for ch in self.children:
            pk = ch.swap_pack()
            if pk is not None:
                run.append(pk)
                continue
            if run:
                steps.append(SwapPack.concat(run, self.dim))
                run = []
            steps.append(ch)
        if run:
            steps.append(SwapPack.concat(run, self.dim))
        return steps

    @cached_property
    def _inverse_plan(self):
        return [s.reversed_inverse() if isinstance(s, SwapPack) else s for s in reversed(self._plan)]

    @cached_property
    def _support(self):
        box = _empty_box(self.dim)
        for ch in self.children:
            box = _union(box, ch.support())
            if box is None:
                break
        if box is not None:
            return box
        first, last = self.children[0], self.children[-1]
        if len(self.children) >= 3 and isinstance(first, Affine) and first.is_inverse_of(last):
            middle = Compose(self.children[1:-1]).support()
            return last.image_box(middle)
        return None

    def support(self):
        return self._support

    def swap_pack(self):
        if len(self._plan) == 1 and isinstance(self._plan[0], SwapPack):
            return self._plan[0]
        return None

    def _run(self, P, plan):
        P = np.array(P, dtype=float, copy=True)
        box = self._support
        if box is not None:
            if _is_empty(box):
                return P
            idx = np.flatnonzero(np.all((P > box[0]) & (P < box[1]), axis=1))
            if idx.size == 0:
                return P
            Q = P[idx]
        else:
            idx, Q = None, P
        for step in plan:
            Q = swap_chain(Q, step) if isinstance(step, SwapPack) else step.forward(Q)
        if idx is None:
            return Q
        P[idx] = Q
        return P

    def forward(self, P):
        return self._run(P, self._plan)

    def backward(self, P):
        P = np.array(P, dtype=float, copy=True)
        box = self._support
        if box is not None and _is_empty(box):
            return P
        if box is not None:
            idx = np.flatnonzero(np.all((P > box[0]) & (P < box[1]), axis=1))
            Q = P[idx]
        else:
            idx, Q = None, P
        for step in self._inverse_plan:
            Q = swap_chain(Q, step) if isinstance(step, SwapPack) else step.backward(Q)
        if idx is None:
            return Q
        P[idx] = Q
        return P

    def inverse(self):
        return Compose([c.inverse() for c in reversed(self.children)])

    def to_dict(self):
        out = self._header()
        out["children"] = [c.to_dict() for c in self.children]
        return out


def compose(maps, dim=None) -> MapExpr:
    """Sequential application; nested compositions are flattened."""
    flat = []
    for m in maps:
        if isinstance(m, Compose):
            flat.extend(m.children)
        elif not isinstance(m, Identity):
            flat.append(m)
        elif dim is None:
            dim = m.dim
    if not flat:
        if dim is None:
            raise BilipError("cannot infer dimension of an empty composition")
        return Identity(dim)
    if len(flat) == 1:
        return flat[0]
    return Compose(flat)


# --------------------------------------------------------------------- glued

class Glued(MapExpr):
    """Piecewise map: entry ``i`` acts on the closure of region ``i``, identity elsewhere.

    Constructed through :func:`glue`, which validates the entries.
    """

    kind = "glued"

    def __init__(self, entries, dim):
        self.entries = tuple(entries)
        self.dim = int(dim)
        for region, sub in self.entries:
            if region.dim != self.dim or sub.dim != self.dim:
                raise BilipError("dimension mismatch in glued entry")
        self.lip = max([0.0] + [s.lip for _, s in self.entries])
        self.colip = max([0.0] + [s.colip for _, s in self.entries])

    def node_count(self):
        return 1 + sum(s.node_count() for _, s in self.entries)

    @cached_property
    def _pack(self):
        packs = []
        for _, sub in self.entries:
            pk = sub.swap_pack()
            if pk is None:
                return None
            packs.append(pk)
        return SwapPack.concat(packs, self.dim)

    def swap_pack(self):
        return self._pack

    @cached_property
    def _support(self):
        box = _empty_box(self.dim)
        for region, sub in self.entries:
            s = sub.support()
            if s is None:
                lo, hi = region.bbox()
                s = (lo, hi) if np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)) else None
            box = _union(box, s)
            if box is None:
                return None
        return box

    def support(self):
        return self._support

    def _run(self, P, inverse):
        P = np.asarray(P, dtype=float)
        if self._pack is not None:
            pk = self._pack.reversed_inverse() if inverse else self._pack
            return swap_chain(P, pk)
        out = P.copy()
        free = np.ones(P.shape[0], dtype=bool)
        for region, sub in self.entries:
            hit = free & region.contains(P, closed=True)
            if np.any(hit):
                out[hit] = sub.backward(P[hit]) if inverse else sub.forward(P[hit])
                free &= ~hit
        return out

    def forward(self, P):
        return self._run(P, False)

    def backward(self, P):
        return self._run(P, True)

    def inverse(self):
        return Glued([(r, s.inverse()) for r, s in self.entries], self.dim)

    def to_dict(self):
        out = self._header()
        out["entries"] = [{"region": r.to_dict(), "map": s.to_dict()} for r, s in self.entries]
        return out


def _support_inside(region: Region, sub: MapExpr) -> bool:
    """Exact sufficient condition for region preservation and boundary agreement."""
    if isinstance(sub, Identity):
        return True
    if isinstance(region, TubeRegion) and isinstance(sub, Swap):
        return region.same_tube(sub.x, sub.y, sub.r)
    box = sub.support()
    if box is None:
        return False
    if _is_empty(box):
        return True
    if isinstance(region, (AxisBoxRegion, HalfSpace)):
        return region.box_inside(box[0], box[1])
    return False


def _candidate_pairs(boxes):
    """Index pairs whose boxes may intersect, found with a uniform grid hash."""
    n = len(boxes)
    if n < 2:
        return []
    finite = [np.all(np.isfinite(b[0])) and np.all(np.isfinite(b[1])) for b in boxes]
    if n <= 48 or not all(finite):
        return [(i, j) for i in range(n) for j in range(i + 1, n)]
    lo = np.array([b[0] for b in boxes])
    hi = np.array([b[1] for b in boxes])
    cell = float(np.median((hi - lo).max(axis=1))) or 1.0
    buckets = {}
    for i in range(n):
        a = np.floor(lo[i] / cell).astype(np.int64)
        b = np.floor(hi[i] / cell).astype(np.int64)
        for key in np.ndindex(*(b - a + 1)):
            buckets.setdefault(tuple(a + np.array(key)), []).append(i)
    pairs = set()
    for members in buckets.values():
        for x in range(len(members)):
            for y in range(x + 1, len(members)):
                pairs.add((members[x], members[y]))
    return sorted(pairs)


def _focus_box(region, sub):
    box = sub.support()
    rlo, rhi = region.bbox()
    if box is not None and not _is_empty(box):
        lo, hi = box
        pad = 0.5 * (hi - lo) + 1e-3
        lo, hi = lo - pad, hi + pad
    else:
        lo = np.where(np.isfinite(rlo), rlo, -4.0)
        hi = np.where(np.isfinite(rhi), rhi, 4.0)
    lo = np.maximum(lo, np.where(np.isfinite(rlo), rlo - 1.0, -np.inf))
    hi = np.minimum(hi, np.where(np.isfinite(rhi), rhi + 1.0, np.inf))
    return lo, hi


def glue(entries, dim=None, samples=64, seed=0) -> MapExpr:
    """Glue region-preserving maps into a single homeomorphism, identity elsewhere.

    Checks that regions are pairwise disjoint, that each submap agrees with the
    identity on the region boundary and maps the closed region onto itself.
    The last two checks are exact when the submap's support provably sits
    inside the region, and sampled otherwise.
    """
    entries = [(r, s) for r, s in entries]
    if dim is None:
        if not entries:
            raise BilipError("cannot infer dimension of an empty gluing")
        dim = entries[0][0].dim
    if not entries:
        return Identity(dim)
    for r, s in entries:
        if r.dim != dim or s.dim != dim:
            raise BilipError("dimension mismatch in glued entry")
    rng = np.random.default_rng(seed)
    boxes = [r.bbox() for r, _ in entries]
    for i, j in _candidate_pairs(boxes):
        if not regions_disjoint(entries[i][0], entries[j][0], rng):
            raise RegionOverlapError(f"regions {i} and {j} overlap")
    for i, (region, sub) in enumerate(entries):
        if _support_inside(region, sub):
            continue
        focus = _focus_box(region, sub)
        B = region.sample_boundary(rng, samples, focus)
        if B.shape[0]:
            for direction, img in (("forward", sub.forward(B)), ("inverse", sub.backward(B))):
                err = np.linalg.norm(img - B, axis=1).max()
                if err > TOL:
                    raise BoundaryMismatchError(
                        f"entry {i}: {direction} map moves boundary points by {err:.3e}")
        inner = region.sample_interior(rng, samples, focus)
        for direction, img in (("forward", sub.forward(inner)), ("inverse", sub.backward(inner))):
            if not np.all(region.contains(img, closed=True)):
                raise RegionPreservationError(f"entry {i}: {direction} map leaves its region")
    return Glued(entries, dim)


# ------------------------------------------------------------- serialization

def map_to_dict(m: MapExpr) -> dict:
    return m.to_dict()


def map_from_dict(obj) -> MapExpr:
    """Rebuild a tree; stored per-node constants are checked against recomputed ones."""
    kind = obj["kind"]
    if kind == "identity":
        m = Identity(obj["dim"])
    elif kind == "affine":
        m = Affine(obj["affine"], obj.get("param"), obj["offset"])
    elif kind == "spin":
        m = Spin(obj["center"], obj["u"], obj["v"], obj["ts"], obj["vals"], obj["t0"])
    elif kind == "swap":
        m = Swap(obj["x"], obj["y"], obj["r"], -1 if obj["inverted"] else 1)
    elif kind == "compose":
        m = Compose([map_from_dict(c) for c in obj["children"]])
    elif kind == "glued":
        m = Glued([(region_from_dict(e["region"]), map_from_dict(e["map"])) for e in obj["entries"]],
                  obj["dim"])
    else:
        raise BilipError(f"unknown map kind {kind!r}")
    if m.dim != obj["dim"]:
        raise BilipError(f"{kind} node: stored dimension {obj['dim']} does not match payload")
    for key in ("lip", "colip"):
        if abs(getattr(m, key) - obj[key]) > 1e-9 * (1 + abs(obj[key])):
            raise BilipError(f"{kind} node: stored {key} {obj[key]} disagrees with payload")
    if abs(m.log2_bound - obj["log2_bound"]) > 1e-9 * (1 + abs(obj["log2_bound"])):
        raise BilipError(f"{kind} node: stored log2_bound {obj['log2_bound']} disagrees with payload")
    return m
