"""Rounding separated nets into Z^d, extending maps to lattice windows, and the reduction pipeline."""
from dataclasses import dataclass
import math

import numpy as np
from scipy.spatial import cKDTree

from . import constants
from .errors import BilipError, PreconditionError
from .geom import TOL, SeparatedNet, as_points, dist_to_segment_many, nearest_lattice_point, net_constants
from .kernels import ratio_extremes
from .maps import Identity, MapExpr, Swap, compose, uniform_scale
from .swaps import SwapFamily, SwapSpec, simultaneous_swaps


class PointMap:
    """Finite bijection between point lists with a declared bilipschitz constant."""

    def __init__(self, sources, images, declared_L=1.0, check=True):
        self.sources = as_points(sources)
        self.images = as_points(images, self.sources.shape[1])
        if self.sources.shape != self.images.shape:
            raise BilipError("sources and images must pair up")
        self.declared_L = float(declared_L)
        if not self.declared_L >= 1:
            raise BilipError("declared_L must be at least 1")
        if check:
            self.validate()

    @property
    def dim(self):
        return self.sources.shape[1]

    def __len__(self):
        return self.sources.shape[0]

    def pairs(self):
        return list(zip(self.sources, self.images))

    def audit(self):
        """Exact (Lip, Lip of inverse) over all pairs."""
        return ratio_extremes(self.sources, self.images)

    def validate(self):
        if len(self) < 2:
            return
        if len(np.unique(self.sources, axis=0)) != len(self):
            raise BilipError("sources are not distinct")
        if len(np.unique(self.images, axis=0)) != len(self):
            raise BilipError("images are not distinct")
        lip, colip = self.audit()
        worst = max(lip, colip)
        if worst > self.declared_L * (1 + 1e-9):
            raise BilipError(f"pair ratio {worst:.6g} exceeds declared_L {self.declared_L:.6g}")

    def to_dict(self):
        return {"dim": self.dim, "declared_L": self.declared_L,
                "pairs": [[s.tolist(), t.tolist()] for s, t in zip(self.sources, self.images)]}

    @classmethod
    def from_dict(cls, obj):
        pairs = obj["pairs"]
        d = obj["dim"]
        src = np.array([p[0] for p in pairs], dtype=float).reshape(-1, d)
        img = np.array([p[1] for p in pairs], dtype=float).reshape(-1, d)
        return cls(src, img, obj["declared_L"])


@dataclass(frozen=True, eq=False)
class ReductionCert:
    K: float
    scale_used: float
    swap_family: SwapFamily

    def to_dict(self):
        return {"K": self.K, "scale_used": self.scale_used, "swap_family": self.swap_family.to_dict()}


def round_net_to_lattice(net: SeparatedNet):
    """Bilipschitz Φ with Φ(net) ⊆ Z^d.

    Returns ``(Φ, PointMap net -> lattice images, ReductionCert)``.
    """
    d = net.dim
    r = net.sep
    if d < 2:
        raise PreconditionError("rounding needs dimension at least 2")
    scale = 1.0 if r >= 3 * d else 3 * d / r
    scaler = Identity(d) if scale == 1.0 else uniform_scale(scale, d)
    X = net.points * scale
    Y = nearest_lattice_point(X)
    dist = np.linalg.norm(Y - X, axis=1)
    specs = [SwapSpec(x, y, dx / 2 if dx > 0 else math.sqrt(d)) for x, y, dx in zip(X, Y, dist)]
    family = SwapFamily(specs, d)
    Phi = compose([scaler, simultaneous_swaps(family)], dim=d)
    got = Phi.forward(net.points)
    err = np.linalg.norm(got - Y, axis=1).max() if len(Y) else 0.0
    assert err <= TOL, f"rounding missed the lattice by {err}"
    assert len(np.unique(Y, axis=0)) == len(Y), "distinct net points collided"
    K = constants.rounding_K(d, r)
    assert Phi.log2_bound <= math.log2(K) + 1e-9
    images = PointMap(net.points, Y, declared_L=K, check=False)
    return Phi, images, ReductionCert(K, scale, family)


def _integral(P, what):
    R = np.rint(P)
    if np.abs(P - R).max(initial=0.0) > TOL:
        raise PreconditionError(f"{what} must be lattice points")
    return R.astype(np.int64)


def window_lattice_points(window) -> np.ndarray:
    """Integer points of the closed box ``window = (lo, hi)`` in lexicographic order."""
    lo, hi = (np.asarray(w, dtype=float) for w in window)
    a = np.ceil(lo - TOL).astype(np.int64)
    b = np.floor(hi + TOL).astype(np.int64)
    if np.any(b < a):
        return np.zeros((0, lo.shape[0]), dtype=np.int64)
    axes = [np.arange(x, y + 1) for x, y in zip(a, b)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, lo.shape[0])


def spot_offsets(radius, d) -> np.ndarray:
    """Nonzero integer vectors of norm <= radius, by norm then lexicographically."""
    k = int(math.floor(radius + TOL))
    axes = [np.arange(-k, k + 1)] * d
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    n2 = (grid ** 2).sum(axis=1)
    keep = (n2 > 0) & (np.sqrt(n2) <= radius + TOL)
    grid, n2 = grid[keep], n2[keep]
    order = np.lexsort(tuple(grid[:, j] for j in reversed(range(d))) + (n2,))
    return grid[order]


def extend_to_lattice(f: PointMap, lam: float, window, _greedy_exclusion=True) -> PointMap:
    """Extend ``f`` (given on lattice points) to every lattice point of ``window``.

    A point ``p`` outside the domain is sent to a free spot of
    ``f(a) + (1/N) Z^d`` inside the closed ball of radius ``1/(4L)`` around
    ``f(a)``, where ``a`` is its nearest domain point.
    """
    d = f.dim
    L = f.declared_L
    if lam < 1:
        raise PreconditionError("lambda must be at least 1")
    Y = _integral(f.sources, "domain points")
    W = window_lattice_points(window)
    known = {tuple(y): i for i, y in enumerate(Y)}
    todo = [tuple(p) for p in W if tuple(p) not in known]
    N = constants.extension_N(lam, d, L)
    offsets = spot_offsets(N / (4 * L), d)
    tree = cKDTree(Y)
    alphas = []
    if todo:
        T = np.array(todo, dtype=float)
        dmin, _ = tree.query(T, k=1)
        far = np.flatnonzero(dmin > lam + TOL)
        if far.size:
            p = todo[far[0]]
            raise PreconditionError(
                f"window point {p} is {dmin[far[0]]:.6g} > lambda = {lam} from the domain")
        for p, dm in zip(T, dmin):
            near = tree.query_ball_point(p, dm + TOL)
            alphas.append(min(near, key=lambda i: tuple(Y[i])))
    used = {}
    new_images = []
    for p, a in zip(todo, alphas):
        k = used.get(a, 0)
        if k >= len(offsets):
            raise AssertionError(f"spot exhaustion around domain point {tuple(Y[a])}")
        new_images.append(f.images[a] + offsets[k] / N)
        if _greedy_exclusion:
            used[a] = k + 1
    src = np.vstack([f.sources] + ([np.array(todo, dtype=float)] if todo else []))
    img = np.vstack([f.images] + ([np.array(new_images)] if todo else []))
    lip_bound, colip_bound = constants.extension_bounds(lam, d, L)
    out = PointMap(src, img, declared_L=max(lip_bound, colip_bound), check=False)
    # Cluster structure, used by transport oracles: anchor pair index and spot rank.
    nY = len(Y)
    out.anchor = np.concatenate([np.arange(nY), np.array(alphas, dtype=np.int64)]).astype(np.int64)
    ranks = []
    seen = {}
    for a in alphas:
        seen[a] = seen.get(a, 0) + 1
        ranks.append(seen[a])
    out.rank = np.concatenate([np.zeros(nY, dtype=np.int64), np.array(ranks, dtype=np.int64)])
    if _greedy_exclusion:
        lip, colip = out.audit()
        assert lip <= lip_bound * (1 + 1e-9), f"Lip {lip} exceeds {lip_bound}"
        assert colip <= colip_bound * (1 + 1e-9), f"inverse Lip {colip} exceeds {colip_bound}"
    return out


# ------------------------------------------------------------- swap transport

def _clearance(a, b, obstacles):
    if obstacles.shape[0] == 0:
        return math.inf
    return float(dist_to_segment_many(obstacles, a, b).min())


def swap_transport_oracle(data: PointMap, kappa=1e-4, attempts=400, seed=0) -> MapExpr:
    """Interpolate a finite bijection by a chain of single tube swaps.

    Each source travels along a polyline whose legs keep every other tracked
    point at distance at least ``kappa`` times the leg length, so every tube
    can be chosen with a moderate radius and points already placed stay put.

    When ``data`` comes from :func:`extend_to_lattice` it carries the anchor
    of every spot; clusters are then filled from the inside out and each spot
    is entered radially from outside its cluster.
    """
    d = data.dim
    rng = np.random.default_rng(seed)
    cur = data.sources.copy()
    tgt = data.images
    n = len(data)
    anchor = getattr(data, "anchor", None)
    rank = getattr(data, "rank", None)
    if anchor is None:
        anchor = np.arange(n)
        rank = np.zeros(n, dtype=np.int64)
    order = sorted(range(n), key=lambda i: (rank[i], tuple(data.sources[i])))
    cluster_radius = np.zeros(n)
    for i in range(n):
        a = anchor[i]
        cluster_radius[a] = max(cluster_radius[a], float(np.linalg.norm(tgt[i] - tgt[a])))
    chain = []

    def others(a, b):
        keep = (np.linalg.norm(cur - a, axis=1) > 1e-12) & (np.linalg.norm(cur - b, axis=1) > 1e-12)
        return cur[keep]

    def clear(a, b):
        D = float(np.linalg.norm(b - a))
        return D > 0 and _clearance(a, b, others(a, b)) >= kappa * D

    def do_swap(a, b):
        D = float(np.linalg.norm(b - a))
        r = min(D / 2, 0.5 * _clearance(a, b, others(a, b)))
        chain.append(Swap(a, b, r))
        at_a = np.linalg.norm(cur - a, axis=1) <= 1e-12
        at_b = np.linalg.norm(cur - b, axis=1) <= 1e-12
        cur[at_a] = b
        cur[at_b] = a

    def vacant(w):
        return np.linalg.norm(cur - w, axis=1).min() > 1e-9

    def candidate_paths(a, b, i):
        c = tgt[anchor[i]]
        rad = cluster_radius[anchor[i]]
        if anchor[i] == i or rad == 0:
            yield [a, b]
        if anchor[i] != i and rad > 0:
            u = (b - c) / np.linalg.norm(b - c)
            # Radial stairway into the cluster: each leg starts well outside the filled core.
            radii = [2.0 * rad]
            far = 0.05 * float(np.linalg.norm(a - c))
            while radii[-1] < far:
                radii.append(radii[-1] * 4.0)
            tail = [c + r * u for r in reversed(radii)] + [b]
            for j in range(len(tail) - 1, -1, -1):
                yield [a] + tail[j:]
            for _ in range(attempts):
                D = float(np.linalg.norm(tail[0] - a))
                yield [a, (a + tail[0]) / 2 + rng.normal(size=d) * D / 2] + tail
        else:
            D = float(np.linalg.norm(b - a))
            for _ in range(attempts):
                yield [a, (a + b) / 2 + rng.normal(size=d) * D / 2, b]

    for i in order:
        a, b = cur[i].copy(), tgt[i].copy()
        if np.linalg.norm(b - a) <= 1e-12:
            continue
        for path in candidate_paths(a, b, i):
            inner = path[1:-1]
            if not all(vacant(w) for w in inner):
                continue
            if all(clear(p, q) for p, q in zip(path, path[1:])):
                for p, q in zip(path, path[1:]):
                    do_swap(p, q)
                break
        else:
            raise BilipError(f"no clear path for source {tuple(data.sources[i])}")
    out = compose(chain, dim=d)
    err = np.linalg.norm(out.forward(data.sources) - tgt, axis=1).max(initial=0.0)
    assert err <= TOL, f"transport missed a target by {err}"
    return out


# ------------------------------------------------------------------ pipeline

@dataclass(eq=False)
class Reduction:
    F: MapExpr
    Phi: MapExpr
    G: MapExpr
    cert: ReductionCert
    extension_input: PointMap
    lam: float
    cover: float
    log2_chain_bound: float


def reduce_general_net(f: PointMap, oracle, net: SeparatedNet = None, details=False):
    """Extend ``f`` from a separated net by first rounding the net into Z^d.

    ``oracle`` receives a PointMap between lattice points and must return a
    MapExpr interpolating it; the result is ``F = G o Φ``.
    """
    d = f.dim
    if net is None:
        lo, hi = f.sources.min(axis=0), f.sources.max(axis=0)
        hi = np.where(hi > lo, hi, lo + 1.0)
        sep, cover = net_constants(f.sources, (lo, hi), max(1e-3, min(hi - lo) / 64))
        net = SeparatedNet(f.sources, sep, cover, (lo, hi))
    elif net.points.shape != f.sources.shape or np.abs(net.points - f.sources).max() > 0:
        raise PreconditionError("net points must coincide with the sources of f")
    Phi, rounded, cert = round_net_to_lattice(net)
    K = cert.K
    g = PointMap(rounded.images, f.images, declared_L=K * f.declared_L, check=False)
    lam = max(1.0, net.cover * K)
    lo, hi = net.window
    window = (lo * cert.scale_used, hi * cert.scale_used)
    ext = extend_to_lattice(g, lam, window)
    expected = constants.reduction_extension_L(d, net.cover, K, f.declared_L) if lam > 1 else None
    if expected is not None:
        assert abs(ext.declared_L - expected) <= 1e-9 * expected
    G = oracle(ext)
    miss = np.linalg.norm(G.forward(ext.sources) - ext.images, axis=1).max(initial=0.0)
    if miss > TOL:
        raise BilipError(f"oracle output misses its data by {miss:.3e}")
    F = compose([Phi, G], dim=d)
    err = np.linalg.norm(F.forward(f.sources) - f.images, axis=1).max(initial=0.0)
    assert err <= TOL, f"reduction misses the data by {err}"
    if not details:
        return F
    return Reduction(F, Phi, G, cert, ext, lam, net.cover, math.log2(K) + G.log2_bound)
