"""Lattice permutations, grid routing, tile decompositions and their bilipschitz realisations."""
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
import itertools
import math

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from . import constants
from .errors import BilipError, PreconditionError
from .kernels import odd_even_swaps
from .maps import Identity, MapExpr, compose, diagonal_scale, glue
from .regions import TileColumn
from .swaps import SwapFamily, SwapSpec, simultaneous_swaps


def _key(x):
    return tuple(int(v) for v in x)


class LatticePerm:
    """Finite-support permutation of (1/N)Z^l stored as integer numerators.

    ``moved`` maps numerator tuples to numerator tuples; every other lattice
    point is fixed. Fixed pairs passed in are dropped.
    """

    def __init__(self, dim, scale_N, moved):
        self.dim = int(dim)
        self.scale_N = int(scale_N)
        if self.scale_N < 1:
            raise BilipError("scale_N must be a positive integer")
        clean = {}
        for a, b in dict(moved).items():
            a, b = _key(a), _key(b)
            if len(a) != self.dim or len(b) != self.dim:
                raise BilipError("lattice point of the wrong dimension")
            if a != b:
                clean[a] = b
        if set(clean) != set(clean.values()):
            raise BilipError("moved pairs do not form a permutation of their support")
        self.moved = clean

    def __call__(self, x):
        x = _key(x)
        return self.moved.get(x, x)

    def __len__(self):
        return len(self.moved)

    @property
    def support(self):
        return set(self.moved)

    @property
    def displacement_sq(self) -> int:
        """Squared largest displacement, in numerator units (exact)."""
        return max((sum((p - q) ** 2 for p, q in zip(a, b)) for a, b in self.moved.items()), default=0)

    @property
    def displacement(self) -> float:
        return math.sqrt(self.displacement_sq) / self.scale_N

    def inverse(self):
        return LatticePerm(self.dim, self.scale_N, {b: a for a, b in self.moved.items()})

    def then(self, other: "LatticePerm") -> "LatticePerm":
        """Apply ``self`` first, then ``other``."""
        if other.scale_N != self.scale_N or other.dim != self.dim:
            raise BilipError("lattice mismatch in composition")
        pts = self.support | other.support
        return LatticePerm(self.dim, self.scale_N, {x: other(self(x)) for x in pts})

    def is_identity(self):
        return not self.moved

    def to_dict(self):
        return {"dim": self.dim, "scale_N": self.scale_N,
                "pairs": [[list(a), list(b)] for a, b in sorted(self.moved.items())]}

    @classmethod
    def from_dict(cls, obj):
        return cls(obj["dim"], obj["scale_N"], {tuple(a): tuple(b) for a, b in obj["pairs"]})

    @classmethod
    def from_transpositions(cls, dim, scale_N, pairs):
        moved = {}
        for a, b in pairs:
            a, b = _key(a), _key(b)
            if a in moved or b in moved:
                raise BilipError("transpositions overlap")
            if a != b:
                moved[a], moved[b] = b, a
        return cls(dim, scale_N, moved)


# ------------------------------------------------------------------ schedules

@dataclass
class RoutingSchedule:
    """Rounds of disjoint transpositions between grid-adjacent lattice points."""

    rounds: list = field(default_factory=list)

    def __len__(self):
        return len(self.rounds)

    @property
    def swap_count(self) -> int:
        return sum(len(r) for r in self.rounds)

    def to_dict(self):
        return {"rounds": [[[list(a), list(b)] for a, b in rnd] for rnd in self.rounds]}

    @classmethod
    def from_dict(cls, obj):
        return cls([[(tuple(a), tuple(b)) for a, b in rnd] for rnd in obj["rounds"]])

    def final_positions(self, pebbles):
        """Run the rounds on pebbles ``{position: label}``; returns the new arrangement."""
        where = dict(pebbles)
        for rnd in self.rounds:
            for a, b in rnd:
                pa, pb = where.pop(a, None), where.pop(b, None)
                if pa is not None:
                    where[b] = pa
                if pb is not None:
                    where[a] = pb
        return where


def _check_bijection(dest, n):
    dest = np.asarray(dest, dtype=np.int64)
    if dest.shape != (n,) or not np.array_equal(np.sort(dest), np.arange(n)):
        raise BilipError("not a bijection")
    return dest


def _path_rounds(dest):
    """Odd-even rounds on one path; returns exactly len(dest) rounds of left positions."""
    S = len(dest)
    rounds = [[] for _ in range(S)]
    r, p = odd_even_swaps(dest)
    for ri, pi in zip(r.tolist(), p.tolist()):
        rounds[ri].append(pi)
    return rounds


def route_path(perm) -> RoutingSchedule:
    """Route a permutation of the path 0..S-1 (pebble at ``i`` must reach ``perm[i]``).

    Odd-even transposition sorting by destination; exactly S rounds.
    """
    dest = _check_bijection(perm, len(perm))
    return RoutingSchedule([[((j,), (j + 1,)) for j in rnd] for rnd in _path_rounds(dest)])


def edge_color_regular_bipartite(edges, n, k):
    """Split a k-regular bipartite multigraph on n + n vertices into k perfect matchings.

    ``edges`` is a list of (left, right) pairs. Returns k lists of edge indices.
    """
    edges = [(int(u), int(v)) for u, v in edges]
    left = np.bincount([u for u, _ in edges], minlength=n) if edges else np.zeros(n, int)
    right = np.bincount([v for _, v in edges], minlength=n) if edges else np.zeros(n, int)
    if len(left) != n or len(right) != n or np.any(left != k) or np.any(right != k):
        raise BilipError(f"multigraph is not {k}-regular on {n} + {n} vertices")
    buckets = defaultdict(list)
    for idx, e in enumerate(edges):
        buckets[e].append(idx)
    classes = []
    for _ in range(k):
        keys = [e for e, lst in buckets.items() if lst]
        rows = np.array([u for u, _ in keys])
        cols = np.array([v for _, v in keys])
        graph = csr_matrix((np.ones(len(keys)), (rows, cols)), shape=(n, n))
        match = maximum_bipartite_matching(graph, perm_type="column")
        if np.any(match < 0):
            raise AssertionError("regular bipartite multigraph without a perfect matching")
        classes.append([buckets[(u, int(match[u]))].pop() for u in range(n)])
    return classes


def _merge(into, rounds):
    for i, rnd in enumerate(rounds):
        while len(into) <= i:
            into.append([])
        into[i].extend(rnd)


def _route_box(shape, dest):
    """Rounds of flat-index pairs routing ``dest`` (flat -> flat) on a box grid."""
    if len(shape) == 1:
        return [[(j, j + 1) for j in rnd] for rnd in _path_rounds(dest)]
    S = shape[-1]
    inner = shape[:-1]
    P = int(np.prod(inner))
    dest_line = dest // S
    dest_pos = dest % S
    # Phase 1: inside every line along the last axis, spread pebbles so that each
    # slice receives exactly one pebble bound for each line.
    edges = [(h, int(dest_line[h * S + g])) for h in range(P) for g in range(S)]
    color = np.empty(P * S, dtype=np.int64)
    for c, cls in enumerate(edge_color_regular_bipartite(edges, P, S)):
        color[cls] = c
    phase1 = []
    for h in range(P):
        rounds = _path_rounds(color[h * S:(h + 1) * S])
        _merge(phase1, [[(h * S + j, h * S + j + 1) for j in rnd] for rnd in rounds])
    # After phase 1 the pebble from (h, g) sits at (h, color).
    at = np.empty(P * S, dtype=np.int64)
    at[np.arange(P)[:, None] * S + color.reshape(P, S)] = np.arange(P * S).reshape(P, S)
    # Phase 2: inside each slice, move pebbles to their destination line.
    phase2 = []
    for c in range(S):
        sub = dest_line[at[np.arange(P) * S + c]]
        rounds = _route_box(inner, sub)
        _merge(phase2, [[(a * S + c, b * S + c) for a, b in rnd] for rnd in rounds])
    # Phase 3: inside each line, move pebbles to their final position.
    phase3 = []
    arrangement = at.copy()  # arrangement[position] = pebble
    for rnd in phase2:
        for a, b in rnd:
            arrangement[a], arrangement[b] = arrangement[b], arrangement[a]
    for h in range(P):
        keys = dest_pos[arrangement[h * S:(h + 1) * S]]
        rounds = _path_rounds(keys)
        _merge(phase3, [[(h * S + j, h * S + j + 1) for j in rnd] for rnd in rounds])
    R_inner = _box_round_count(inner)
    while len(phase2) < R_inner:
        phase2.append([])
    return phase1 + phase2 + phase3


def _box_round_count(shape):
    if len(shape) == 1:
        return shape[0]
    return 2 * shape[-1] + _box_round_count(shape[:-1])


def route_grid(perm, shape=None) -> RoutingSchedule:
    """Route a permutation of a box grid using (2l-1)S rounds on the cube [S]^l.

    ``perm`` is a dict from coordinate tuples to coordinate tuples (missing
    cells are fixed) together with ``shape``, or an integer array of shape
    ``shape + (l,)`` holding each cell's destination.
    """
    if isinstance(perm, dict):
        if shape is None:
            raise BilipError("shape is required when the permutation is a dict")
        shape = tuple(int(s) for s in shape)
        n = int(np.prod(shape))
        dest = np.arange(n)
        for a, b in perm.items():
            dest[np.ravel_multi_index(a, shape)] = np.ravel_multi_index(b, shape)
    else:
        arr = np.asarray(perm, dtype=np.int64)
        shape = arr.shape[:-1]
        n = int(np.prod(shape))
        dest = np.ravel_multi_index(tuple(arr.reshape(n, -1).T), shape)
    dest = _check_bijection(dest, n)
    rounds = _route_box(shape, dest)
    conv = lambda f: tuple(int(v) for v in np.unravel_index(f, shape))
    return RoutingSchedule([[(conv(a), conv(b)) for a, b in rnd] for rnd in rounds])


# ---------------------------------------------------------- tile decomposition

def tile_offsets(l):
    """All p in {-1, 0, 1}^l, in lexicographic order."""
    return list(itertools.product((-1, 0, 1), repeat=l))


def _floor_div(a, b):
    return a // b


def half_tile_index(h, T):
    """Tile z with h/2 in (-1/4, ..., -1/4) + T z + [0, T]^l, for half-lattice numerators h."""
    return tuple(_floor_div(2 * v + 1, 4 * T) for v in h)


def padded_tile_index(h, T, p):
    """Index w with h/2 in (-1/4, ...) + T(3w + p) + [-T, 2T]^l."""
    return tuple(_floor_div(2 * v + 1 - 4 * T * (q - 1), 12 * T) for v, q in zip(h, p))


_OFFSET_CACHE = {}


def _offsets_by_norm(l, R):
    key = (l, R)
    if key not in _OFFSET_CACHE:
        grid = list(itertools.product(range(-R, R + 1), repeat=l))
        grid.sort(key=lambda v: (sum(c * c for c in v), v))
        _OFFSET_CACHE[key] = grid
    return _OFFSET_CACHE[key]


@dataclass
class TileDecomposition:
    dim: int
    T: int
    offsets: list
    pieces: list  # LatticePerm on (1/2)Z^l, numerators
    parking: dict  # integer point -> half-lattice numerator spot
    tau: LatticePerm
    demand: dict  # tile -> number of parked points

    @property
    def padded_tile(self):
        return (-0.25 - self.T, 2 * self.T - 0.25)

    def apply(self, h):
        for piece in self.pieces:
            h = piece(h)
        return h

    def to_dict(self):
        return {"dim": self.dim, "T": self.T,
                "pieces": [{"offset": list(p), **piece.to_dict()} for p, piece in zip(self.offsets, self.pieces)]}


def tile_decompose(phi: LatticePerm, T: int) -> TileDecomposition:
    """Write ``phi`` (on Z^l) as a product of 3^l tile-local permutations of (1/2)Z^l.

    Points whose image lies in another tile are first parked on a free
    half-integer spot of the image tile, nearest to the image (ties broken
    lexicographically); a final tile-local fix-up moves everything home.
    """
    if phi.scale_N != 1:
        raise BilipError("tile decomposition expects a permutation of Z^l")
    T = int(T)
    if T < 1:
        raise BilipError("tile size must be a positive integer")
    if phi.displacement_sq > T * T:
        raise PreconditionError(f"displacement {phi.displacement:.6g} exceeds T = {T}")
    l = phi.dim
    offsets = tile_offsets(l)
    index_of = {p: i for i, p in enumerate(offsets)}
    parking = {}
    used = set()
    demand = defaultdict(int)
    per_piece = [[] for _ in offsets]
    for x in sorted(phi.support):
        y = phi(x)
        hx = tuple(2 * v for v in x)
        hy = tuple(2 * v for v in y)
        z = half_tile_index(hy, T)
        if half_tile_index(hx, T) == z:
            continue
        demand[z] += 1
        p = tuple((c + 1) % 3 - 1 for c in z)
        spot = None
        R = 1
        while spot is None:
            for off in _offsets_by_norm(l, R):
                cand = tuple(a + b for a, b in zip(hy, off))
                if all(c % 2 == 0 for c in cand) or cand in used:
                    continue
                if half_tile_index(cand, T) == z:
                    spot = cand
                    break
            R *= 2
            if R > 8 * T + 8:
                raise AssertionError(f"no free parking spot in tile {z}")
        used.add(spot)
        parking[x] = spot
        per_piece[index_of[p]].append((hx, spot))
    # Capacity of every touched tile: half-lattice minus integer points versus preimages.
    for z, count in demand.items():
        spots = (2 * T) ** l - T ** l
        assert spots >= T ** l >= count, f"tile {z} lacks parking capacity"
    parked = [LatticePerm.from_transpositions(l, 2, pairs) for pairs in per_piece]
    # tau on A = parked positions of supp(phi): tau(parked(2x)) = 2 phi(x).
    tau = {}
    for x in phi.support:
        start = parking.get(x, tuple(2 * v for v in x))
        tau[start] = tuple(2 * v for v in phi(x))
    dom = set(tau)
    for s in [a for a in dom if a not in set(tau.values())]:
        e = s
        while e in dom:
            e = tau[e]
        tau[e] = s
    tau = LatticePerm(l, 2, tau)
    pieces = parked[:-1] + [parked[-1].then(tau)]
    dec = TileDecomposition(l, T, offsets, pieces, parking, tau, dict(demand))
    _verify_decomposition(phi, dec)
    return dec


def _verify_decomposition(phi, dec):
    for x in phi.support:
        h = tuple(2 * v for v in x)
        assert dec.apply(h) == tuple(2 * v for v in phi(x)), f"decomposition misroutes {x}"
    for p, piece in zip(dec.offsets, dec.pieces):
        for a, b in piece.moved.items():
            assert padded_tile_index(a, dec.T, p) == padded_tile_index(b, dec.T, p), \
                f"piece with offset {p} leaves its tile at {a}"
    for piece in dec.pieces[:-1]:
        assert all(piece(piece(a)) == a for a in piece.moved), "parking piece is not an involution"


# ------------------------------------------------------------- realisations

def tile_index(x, S):
    """Tile z with x in (-1/2, ..., -1/2) + S z + [0, S]^l."""
    return tuple(_floor_div(2 * v + 1, 2 * S) for v in x)


def _clusters(sigma, pts):
    """Group cycles of ``sigma`` (restricted to ``pts``) into boxes that do not overlap."""
    seen = set()
    boxes = []
    for x in sorted(pts):
        if x in seen:
            continue
        cyc = [x]
        seen.add(x)
        y = sigma(x)
        while y != x:
            cyc.append(y)
            seen.add(y)
            y = sigma(y)
        arr = np.array(cyc)
        boxes.append([arr.min(axis=0), arr.max(axis=0)])
    merged = True
    while merged:
        merged = False
        for i in range(len(boxes)):
            for j in range(i + 1, len(boxes)):
                a, b = boxes[i], boxes[j]
                if np.all(a[0] <= b[1]) and np.all(b[0] <= a[1]):
                    boxes[i] = [np.minimum(a[0], b[0]), np.maximum(a[1], b[1])]
                    del boxes[j]
                    merged = True
                    break
            if merged:
                break
    return [(tuple(int(v) for v in lo), tuple(int(v) for v in hi)) for lo, hi in boxes]


def tile_schedules(sigma: LatticePerm, S: int):
    """Per-tile routing schedules (global integer coordinates) for a tile-local permutation."""
    if sigma.scale_N != 1:
        raise BilipError("expected a permutation of Z^l")
    by_tile = defaultdict(set)
    for x, y in sigma.moved.items():
        z = tile_index(x, S)
        if tile_index(y, S) != z:
            raise PreconditionError(f"{x} -> {y} leaves tile {z} of size {S}")
        by_tile[z].add(x)
    out = {}
    for z, pts in sorted(by_tile.items()):
        rounds = []
        for lo, hi in _clusters(sigma, pts):
            shape = tuple(b - a + 1 for a, b in zip(lo, hi))
            n = int(np.prod(shape))
            dest = np.arange(n)
            for x in pts:
                if all(a <= v <= b for v, a, b in zip(x, lo, hi)):
                    src = np.ravel_multi_index(tuple(v - a for v, a in zip(x, lo)), shape)
                    dest[src] = np.ravel_multi_index(tuple(v - a for v, a in zip(sigma(x), lo)), shape)
            flat = _route_box(shape, dest)
            conv = lambda f: tuple(int(v) + a for v, a in zip(np.unravel_index(f, shape), lo))
            _merge(rounds, [[(conv(a), conv(b)) for a, b in rnd] for rnd in flat])
        out[z] = RoutingSchedule(rounds)
    return out


def _frame_coord(v, frame):
    scale, offset = frame
    return [float(Fraction(int(c)) * scale + off) for c, off in zip(v, offset)]


def realize_tile_perm(sigma: LatticePerm, S: int, frame=None) -> MapExpr:
    """Bilipschitz map of R^(l+1) realising a tile-local permutation at height 0.

    Inside each tile column the schedule's rounds become simultaneous swaps of
    radius 1/2; the map is the identity outside the horizontal slab |h| < 1/2.
    ``frame = (scale, offset)`` (exact rationals) places the integer lattice at
    ``scale * x + offset`` and the height at ``scale * h``.
    """
    l = sigma.dim
    d = l + 1
    if frame is None:
        frame = (Fraction(1), tuple(Fraction(0) for _ in range(l)))
    scale = Fraction(frame[0])
    offset = tuple(Fraction(o) for o in frame[1])
    frame = (scale, offset)
    K = constants.tile_rounds(d, S)
    entries = []
    for z, sched in tile_schedules(sigma, S).items():
        assert len(sched) <= K, f"tile {z}: {len(sched)} rounds exceed {K}"
        layers = []
        for rnd in sched.rounds:
            if not rnd:
                continue
            specs = [SwapSpec(_frame_coord(a, frame) + [0.0], _frame_coord(b, frame) + [0.0], float(scale) / 2)
                     for a, b in rnd]
            layers.append(simultaneous_swaps(SwapFamily(specs, d)))
        if not layers:
            continue
        lo = _frame_coord([S * c for c in z], frame)
        hi = _frame_coord([S * (c + 1) for c in z], frame)
        half = float(scale) / 2
        column = TileColumn([a - half for a in lo], [b - half for b in hi])
        entries.append((column, compose(layers, dim=d)))
    out = glue(entries, dim=d) if entries else Identity(d)
    assert out.log2_bound <= 4 * K + 1e-9
    return out


def build_upsilon(sigma: LatticePerm, N: int, T: int, m: float) -> MapExpr:
    """Map fixing both boundary hyperplanes of the slab around height ``m`` and
    sending ``(x, m)`` to ``(sigma(x), m)`` for every x in (1/N)Z^(d-1).
    """
    N, T = int(N), int(T)
    if sigma.scale_N != N:
        raise BilipError(f"permutation lives on (1/{sigma.scale_N})Z, expected (1/{N})Z")
    if sigma.displacement_sq > (N * T) ** 2:
        raise PreconditionError(f"displacement {sigma.displacement:.6g} exceeds T = {T}")
    l = sigma.dim
    d = l + 1
    big = N * T
    phi = LatticePerm(l, 1, sigma.moved)
    dec = tile_decompose(phi, big)
    layers = []
    for p, piece in zip(dec.offsets, dec.pieces):
        if piece.is_identity():
            continue
        shift = tuple(2 * big * (q - 1) for q in p)
        tilde = LatticePerm(l, 1, {tuple(a - s for a, s in zip(x, shift)): tuple(b - s for b, s in zip(y, shift))
                                   for x, y in piece.moved.items()})
        frame = (Fraction(1, 2), tuple(Fraction(s, 2) for s in shift))
        layers.append(realize_tile_perm(tilde, 6 * big, frame))
    inner = compose(layers, dim=d)
    if isinstance(inner, Identity):
        return inner
    rho = diagonal_scale([float(N)] * l + [1.0], [0.0] * l + [-float(m)])
    out = compose([rho, inner, rho.inverse()], dim=d)
    assert out.log2_bound <= constants.upsilon_log2_bound(N, T, d) + 1e-9
    return out


@dataclass(frozen=True)
class BetaWitness:
    """Explicit growth function exp(8 d t) (in base 2), with the 2 floor(t) - 1 sanity floor."""

    d: int

    def log2(self, t) -> float:
        return constants.log2_beta(self.d, t)

    def lower(self, t) -> int:
        return constants.beta_lower(t)

    def check(self, ts) -> bool:
        vals = [self.log2(t) for t in ts]
        mono = all(a <= b for a, b in zip(vals, vals[1:]))
        floor_ok = all(math.log2(self.lower(t)) <= self.log2(t) for t in ts if self.lower(t) >= 1)
        return mono and floor_ok
