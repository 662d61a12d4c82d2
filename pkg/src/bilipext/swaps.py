"""Tube swaps and simultaneous families of disjoint swaps."""
from dataclasses import dataclass
import math

import numpy as np

from .errors import BilipError, TubeOverlapError
from .geom import TOL
from .kernels import segment_distances
from .maps import Glued, Identity, MapExpr, Swap, _candidate_pairs
from .regions import TubeRegion


@dataclass(frozen=True, eq=False)
class SwapSpec:
    x: np.ndarray
    y: np.ndarray
    r: float

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float))
        object.__setattr__(self, "r", float(self.r))
        if self.x.shape != self.y.shape or self.x.ndim != 1:
            raise BilipError("swap endpoints must be points of equal dimension")
        if not self.r > 0:
            raise BilipError("swap radius must be positive")

    @property
    def dim(self):
        return self.x.shape[0]

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.y - self.x))

    @property
    def degenerate(self) -> bool:
        return self.length == 0.0

    @property
    def eta(self) -> float:
        return math.inf if self.degenerate else self.r / self.length

    @property
    def log2_bound(self) -> float:
        """log2 of 4 |y - x|^2 / r^2, or 0 for the identity swap."""
        if self.degenerate:
            return 0.0
        return math.log2(4.0) + 2.0 * math.log2(self.length / self.r)

    def to_dict(self):
        return {"x": self.x.tolist(), "y": self.y.tolist(), "r": self.r}


def swap_map(spec: SwapSpec) -> MapExpr:
    """Map exchanging ``spec.x`` and ``spec.y`` and fixing the complement of their tube."""
    if spec.dim < 2:
        raise BilipError("swaps need dimension at least 2")
    if spec.degenerate:
        return Identity(spec.dim)
    if spec.r > spec.length / 2 * (1 + 1e-12):
        raise BilipError(f"radius {spec.r} exceeds half the distance {spec.length / 2}")
    return Swap(spec.x, spec.y, spec.r)


class SwapFamily:
    """Finite list of swaps whose tubes are pairwise disjoint (validated)."""

    def __init__(self, specs, dim=None):
        self.specs = list(specs)
        if dim is None:
            if not self.specs:
                raise BilipError("cannot infer dimension of an empty family")
            dim = self.specs[0].dim
        self.dim = int(dim)
        for s in self.specs:
            if s.dim != self.dim:
                raise BilipError("dimension mismatch inside swap family")
            if not s.degenerate and s.r > s.length / 2 * (1 + 1e-12):
                raise BilipError(f"radius {s.r} exceeds half the distance {s.length / 2}")
        self._check_disjoint()

    def __len__(self):
        return len(self.specs)

    def tube_boxes(self):
        return [(np.minimum(s.x, s.y) - s.r, np.maximum(s.x, s.y) + s.r) for s in self.specs]

    def _check_disjoint(self):
        pairs = _candidate_pairs(self.tube_boxes())
        if not pairs:
            return
        I = np.array([p[0] for p in pairs])
        J = np.array([p[1] for p in pairs])
        X = np.array([s.x for s in self.specs])
        Y = np.array([s.y for s in self.specs])
        R = np.array([s.r for s in self.specs])
        gap = segment_distances(X[I], Y[I], X[J], Y[J]) - R[I] - R[J]
        bad = np.flatnonzero(gap < -TOL)
        if bad.size:
            k = bad[0]
            raise TubeOverlapError(int(I[k]), int(J[k]), float(gap[k]))

    @property
    def log2_bound(self) -> float:
        return max([0.0] + [s.log2_bound for s in self.specs])

    def to_dict(self):
        return {"dim": self.dim, "swaps": [s.to_dict() for s in self.specs]}

    @classmethod
    def from_dict(cls, obj):
        return cls([SwapSpec(s["x"], s["y"], s["r"]) for s in obj["swaps"]], obj["dim"])


def simultaneous_swaps(family: SwapFamily) -> MapExpr:
    """Perform every swap of the family at once; identity off the union of tubes."""
    entries = [(TubeRegion(s.x, s.y, s.r), Swap(s.x, s.y, s.r))
               for s in family.specs if not s.degenerate]
    if not entries:
        return Identity(family.dim)
    # The family constructor already proved disjointness, and each swap sits in its own tube.
    return Glued(entries, family.dim)


def swaps_from_pairs(pairs, radius, dim=None) -> MapExpr:
    """Convenience: simultaneous swaps of point pairs, all with the same radius."""
    specs = [SwapSpec(a, b, radius) for a, b in pairs]
    return simultaneous_swaps(SwapFamily(specs, dim))
