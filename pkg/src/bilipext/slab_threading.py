"""Threading grid layers through a slab, and gluing threaded slabs."""
from dataclasses import dataclass, field
import itertools
import math

import numpy as np

from . import constants
from .errors import BilipError, ContainmentError, PreconditionError
from .geom import TOL, as_points, min_pairwise_distance
from .kernels import ratio_extremes
from .maps import Identity, MapExpr, compose, evaluate, evaluate_inverse, glue, translation
from .regions import AxisSlab
from .routing import LatticePerm, build_upsilon
from .swaps import SwapFamily, SwapSpec, simultaneous_swaps

EXACT_TOL = 1e-9


def _int_tuple(x):
    return tuple(int(v) for v in x)


class LayeredPointMap:
    """Images of the grid layers Z^(d-1) x {1..H} inside the slab between heights 1/2 and H + 1/2.

    ``layers[m]`` lists ``(source, image)`` with integer ``source`` in
    Z^(d-1) and ``image`` in R^d. Unlisted sources, and every source outside
    the horizontal ``window`` (inclusive integer box), map to themselves; the
    boundary hyperplanes are fixed.
    """

    def __init__(self, dim, H, L, layers, window, check=True):
        self.dim = int(dim)
        self.H = int(H)
        self.L = float(L)
        if self.dim < 2 or self.H < 1:
            raise BilipError("need dim >= 2 and at least one layer")
        if not self.L >= 1:
            raise BilipError("declared L must be at least 1")
        lo, hi = window
        self.window = (_int_tuple(lo), _int_tuple(hi))
        if len(self.window[0]) != self.dim - 1 or len(self.window[1]) != self.dim - 1:
            raise BilipError("window must be a box in the horizontal coordinates")
        self.layers = {}
        for m, pairs in dict(layers).items():
            m = int(m)
            if not 1 <= m <= self.H:
                raise BilipError(f"layer {m} outside 1..{self.H}")
            clean = {}
            for src, img in pairs:
                src = _int_tuple(src)
                img = np.asarray(img, dtype=float)
                if len(src) != self.dim - 1 or img.shape != (self.dim,):
                    raise BilipError(f"layer {m}: malformed pair {src}")
                if not all(a <= v <= b for v, a, b in zip(src, *self.window)):
                    raise BilipError(f"layer {m}: source {src} outside the window")
                if src in clean:
                    raise BilipError(f"layer {m}: source {src} listed twice")
                clean[src] = img
            self.layers[m] = clean
        if check:
            self.validate()

    def image(self, src, m):
        img = self.layers.get(m, {}).get(_int_tuple(src))
        return np.array(list(src) + [m], dtype=float) if img is None else img

    def active(self):
        """``(m, source, image)`` for every source that does not map to itself."""
        out = []
        for m in sorted(self.layers):
            for src, img in sorted(self.layers[m].items()):
                if np.any(img != np.array(list(src) + [m], dtype=float)):
                    out.append((m, src, img))
        return out

    def audit_set(self, margin=2):
        """All grid sources of the window grown by ``margin``, with their images."""
        lo = [a - margin for a in self.window[0]]
        hi = [b + margin for b in self.window[1]]
        src, img = [], []
        for m in range(1, self.H + 1):
            for x in itertools.product(*[range(a, b + 1) for a, b in zip(lo, hi)]):
                src.append(list(x) + [m])
                img.append(self.image(x, m))
        return np.array(src, dtype=float), np.array(img, dtype=float)

    def validate(self):
        S, F = self.audit_set()
        if len(np.unique(F, axis=0)) != len(F):
            raise BilipError("images are not distinct")
        lip, colip = ratio_extremes(S, F)
        if max(lip, colip) > self.L * (1 + 1e-9):
            raise BilipError(f"pair ratio {max(lip, colip):.6g} exceeds declared L {self.L:.6g}")
        # Against the fixed boundary hyperplanes: distances shrink or grow by at most L.
        for h in (0.5, self.H + 0.5):
            ds = np.abs(S[:, -1] - h)
            df = np.abs(F[:, -1] - h)
            if np.any(df < ds / self.L * (1 - 1e-9)) or np.any(np.linalg.norm(F - np.c_[S[:, :-1], np.full(len(S), h)], axis=1) > self.L * ds * (1 + 1e-9)):
                raise BilipError(f"images violate the L-bilipschitz condition against height {h}")
        if np.any(F[:, -1] < 0.5) or np.any(F[:, -1] > self.H + 0.5):
            raise BilipError("images leave the slab")

    def to_dict(self):
        return {"dim": self.dim, "H": self.H, "L": self.L,
                "layers": {str(m): [[list(src), img.tolist()] for src, img in sorted(pairs.items())]
                           for m, pairs in sorted(self.layers.items())},
                "window": [list(self.window[0]), list(self.window[1])]}

    @classmethod
    def from_dict(cls, obj, check=True):
        return cls(obj["dim"], obj["H"], obj["L"], {int(m): v for m, v in obj["layers"].items()},
                   obj["window"], check=check)


@dataclass
class InjectiveRounding:
    """Result of the injective rounding step: the map and the exact parking spots."""

    map: MapExpr
    N: int
    s: float
    spots: list  # per layer (1..H): list of numerator tuples, aligned with the input points
    horizontal: MapExpr = None
    vertical: MapExpr = None


def _nearest_spot(p, N, cell_lo, cell_hi, used):
    """Nearest point of (1/N)Z^l minus Z^l in the half-open cell, not yet used."""
    l = len(p)
    base = np.floor(np.asarray(p) * N).astype(np.int64)
    R = 2
    while True:
        rng = [range(int(b) - R, int(b) + R + 2) for b in base]
        cands = []
        for q in itertools.product(*rng):
            if all(v % N == 0 for v in q) or q in used:
                continue
            val = np.array(q, dtype=float) / N
            if np.all(val >= cell_lo) and np.all(val < cell_hi):
                cands.append((float(np.sum((val - p) ** 2)), q))
        if cands:
            best = min(cands)
            # anything outside the searched box is at least R/N away
            if math.sqrt(best[0]) <= (R - 1) / N:
                return best[1]
        R *= 2
        if R > 4 * N + 8:
            if cands:
                return min(cands)[1]
            raise AssertionError("no free spot in cell")


def inj_round(layers, s, N, H) -> InjectiveRounding:
    """Move every point of layer m onto ((1/N)Z^l minus Z^l) x {m} by two rounds of swaps.

    The horizontal round parks each point on the nearest free non-integer spot
    of its cell (side s^2/sqrt(d-1)); the vertical round slides it to height m.
    """
    H = int(H)
    N = int(N)
    s = float(s)
    pts = [as_points(X) if len(X) else None for X in layers]
    if len(pts) != H:
        raise PreconditionError(f"expected {H} layers, got {len(pts)}")
    dims = {P.shape[1] for P in pts if P is not None}
    if len(dims) != 1:
        raise PreconditionError("layers must be nonempty point sets of one dimension")
    d = dims.pop()
    l = d - 1
    if not 0 < s <= 0.25:
        raise PreconditionError(f"s = {s} must satisfy 0 < s <= 1/4")
    n_min = constants.inj_round_N_min(d, s, H)
    if N < n_min:
        raise PreconditionError(f"N = {N} is below the required {n_min:.6g}")
    supply, demand = constants.inj_round_capacity(d, s, N, H)
    assert supply >= demand, f"cell capacity {supply:.6g} below demand {demand:.6g}"
    allp = np.vstack([P for P in pts if P is not None])
    if len(np.unique(allp, axis=0)) != len(allp):
        raise PreconditionError("layers are not pairwise disjoint")
    if len(allp) > 1 and min_pairwise_distance(allp) < s * (1 - 1e-12):
        raise PreconditionError(f"points are not {s}-separated (min distance {min_pairwise_distance(allp):.6g})")
    lo_h, hi_h = 0.5 + s, H + 0.5 - s
    if np.any(allp[:, -1] < lo_h - TOL) or np.any(allp[:, -1] > hi_h + TOL):
        raise PreconditionError(f"heights must lie in [{lo_h}, {hi_h}]")

    cell = s * s / math.sqrt(max(l, 1))
    used = set()
    spots = []
    horiz, vert = [], []
    for m, P in enumerate(pts, start=1):
        layer_spots = []
        if P is None:
            spots.append(layer_spots)
            continue
        for p in P:
            z = np.floor(p[:-1] / cell)
            q = _nearest_spot(p[:-1], N, z * cell, (z + 1) * cell, used)
            used.add(q)
            layer_spots.append(q)
            y = np.append(np.array(q, dtype=float) / N, p[-1])
            D = float(np.linalg.norm(y - p))
            if D > 0:
                horiz.append(SwapSpec(p, y, D / 2))
            top = np.append(y[:-1], float(m))
            Dv = abs(m - p[-1])
            if Dv > 0:
                vert.append(SwapSpec(y, top, min(0.5 / N, Dv / 2)))
        spots.append(layer_spots)
    xi = simultaneous_swaps(SwapFamily(horiz, d)) if horiz else Identity(d)
    omega = simultaneous_swaps(SwapFamily(vert, d)) if vert else Identity(d)
    psi = compose([xi, omega], dim=d)
    assert psi.log2_bound <= constants.inj_round_log2_bound(N, H) + 1e-9
    out = evaluate(psi, allp)
    target = np.array([list(np.array(q, dtype=float) / N) + [m] for m, ls in enumerate(spots, start=1) for q in ls])
    assert np.max(np.abs(out - target)) <= EXACT_TOL, "rounding missed a target spot"
    assert np.all(np.linalg.norm(out[:, :-1] - allp[:, :-1], axis=1) <= s * s + EXACT_TOL)
    return InjectiveRounding(psi, N, s, spots, xi, omega)


def involution_from_spots(N, pairs) -> LatticePerm:
    """Involution of (1/N)Z^l swapping each integer source with its non-integer spot."""
    moved = {}
    for src, spot in pairs:
        a = tuple(N * v for v in src)
        if a in moved or spot in moved:
            raise BilipError("spots are not injective")
        moved[a] = spot
        moved[spot] = a
    return LatticePerm(len(pairs[0][1]) if pairs else 1, N, moved)


def thread(data: LayeredPointMap, details=False):
    """Bilipschitz map of R^d extending the layered data and fixing both boundary hyperplanes."""
    d, H, L = data.dim, data.H, data.L
    s = 1.0 / (4.0 * L)
    act = data.active()
    if not act:
        return Identity(d)
    N = constants.thread_N(d, L, H)
    T = constants.thread_T(L, N, H)
    # Consequences of the bilipschitz hypothesis that the rounding step needs.
    S, F = data.audit_set()
    assert min_pairwise_distance(F) >= 4 * s * (1 - 1e-9)
    assert np.all(F[:, -1] >= 0.5 + 2 * s - 1e-9) and np.all(F[:, -1] <= H + 0.5 - 2 * s + 1e-9)
    layers = [np.array([img for mm, _, img in act if mm == m]).reshape(-1, d) for m in range(1, H + 1)]
    rounding = inj_round(layers, s, N, H)
    psi = rounding.map
    # Fixed grid points stay put under the rounding map.
    fixed = S[np.all(np.abs(S - F) == 0, axis=1)]
    if len(fixed):
        assert np.max(np.abs(evaluate(psi, fixed) - fixed)) <= EXACT_TOL
    entries = []
    sigmas = {}
    for m in range(1, H + 1):
        srcs = [src for mm, src, _ in act if mm == m]
        if not srcs:
            continue
        sigma = involution_from_spots(N, list(zip(srcs, rounding.spots[m - 1])))
        assert sigma.displacement_sq <= (N * T) ** 2, "displacement exceeds the threading bound"
        sigmas[m] = sigma
        ups = build_upsilon(sigma, N, T, float(m))
        entries.append((AxisSlab(d, d - 1, m - 0.5, m + 0.5), ups))
    upsilon = glue(entries, dim=d)
    out = compose([upsilon.inverse(), psi.inverse()], dim=d)
    got = evaluate(out, np.array([list(src) + [m] for m, src, _ in act], dtype=float))
    want = np.array([img for _, _, img in act])
    assert np.max(np.abs(got - want)) <= EXACT_TOL, "threaded map misses a designated image"
    assert out.log2_bound <= constants.thread_log2_bound(d, L, H) + 1e-9
    if details:
        return out, {"N": N, "T": T, "s": s, "rounding": rounding, "sigmas": sigmas, "upsilon": upsilon}
    return out


@dataclass
class SlabSystem:
    """Designated images of Z^d under a map of the form G o (slab-wise threading).

    ``points`` maps slab index k to a list of ``(grid point in Z^d, image)``
    whose heights lie in ``(k-1)T + 1 .. kT``; ``window`` bounds the
    horizontal coordinates of every listed point.
    """

    dim: int
    T: int
    G: MapExpr
    points: dict
    window: tuple
    M1: float = 1.0
    M2: float = 1.0

    def slab_bounds(self, k):
        return (k - 1) * self.T + 0.5, k * self.T + 0.5

    def check_containment(self):
        for k, pairs in sorted(self.points.items()):
            lo, hi = self.slab_bounds(k)
            for src, img in pairs:
                if not lo < src[-1] < hi:
                    raise ContainmentError(k, f"grid point {tuple(src)} is not an interior layer")
                back = evaluate_inverse(self.G, np.asarray(img, dtype=float))
                if not lo - TOL <= back[-1] <= hi + TOL:
                    raise ContainmentError(k, f"image of {tuple(src)} lies outside G of the slab")

    def layered(self, k) -> LayeredPointMap:
        """Slab k data pulled back through G and shifted to heights 1..T."""
        shift = (k - 1) * self.T
        layers = {}
        for src, img in self.points[k]:
            back = evaluate_inverse(self.G, np.asarray(img, dtype=float))
            back[-1] -= shift
            layers.setdefault(int(src[-1]) - shift, []).append((src[:-1], back))
        return LayeredPointMap(self.dim, self.T, self.M1 * self.M2, layers, self.window)

    def to_dict(self):
        from .maps import map_to_dict
        return {"dim": self.dim, "T": self.T, "M1": self.M1, "M2": self.M2, "G": map_to_dict(self.G),
                "window": [list(self.window[0]), list(self.window[1])],
                "slabs": {str(k): [[list(src), list(map(float, img))] for src, img in pairs]
                          for k, pairs in sorted(self.points.items())}}

    @classmethod
    def from_dict(cls, obj):
        from .maps import map_from_dict
        pts = {int(k): [(_int_tuple(a), np.asarray(b, dtype=float)) for a, b in v] for k, v in obj["slabs"].items()}
        return cls(obj["dim"], obj["T"], map_from_dict(obj["G"]), pts, tuple(obj["window"]), obj["M1"], obj["M2"])


def glue_slabs(system: SlabSystem) -> MapExpr:
    """Thread every nontrivial slab, glue the slab maps and post-compose with G."""
    d, T = system.dim, system.T
    system.check_containment()
    entries = []
    for k in sorted(system.points):
        data = system.layered(k)
        Fk = thread(data)
        if isinstance(Fk, Identity):
            continue
        up = translation([0.0] * (d - 1) + [float((k - 1) * T)])
        lo, hi = system.slab_bounds(k)
        entries.append((AxisSlab(d, d - 1, lo, hi), compose([up.inverse(), Fk, up], dim=d)))
    phi = glue(entries, dim=d) if entries else Identity(d)
    out = compose([phi, system.G], dim=d)
    assert out.log2_bound <= constants.slab_glue_log2_bound(d, system.M1, system.M2, T) + 1e-9
    for k, pairs in system.points.items():
        src = np.array([list(a) for a, _ in pairs], dtype=float)
        img = np.array([b for _, b in pairs], dtype=float)
        assert np.max(np.abs(evaluate(out, src) - img)) <= EXACT_TOL, f"slab {k}: designated image missed"
    return out
