"""Sampled distortion audits, designated-point checks and schedule oracles."""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
import json
import math
import os

import numpy as np

from .errors import BilipError
from .geom import as_points
from .maps import MapExpr, evaluate

DESIGNATED_TOL = 1e-9
BOUND_SLACK = 1e-6


def _workers():
    try:
        return max(1, int(os.environ.get("BILIP_THREADS", "1")))
    except ValueError:
        return 1


def _eval_parallel(m, P, chunk=4096):
    n = len(P)
    workers = _workers()
    if workers == 1 or n <= chunk:
        return evaluate(m, P)
    parts = [P[i:i + chunk] for i in range(0, n, chunk)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return np.vstack(list(pool.map(lambda A: evaluate(m, A), parts)))


def sample_pairs(region, n_pairs, seed=0, designated=None):
    """Seeded pairs: a third uniform, a third short-range, a third tied to designated points."""
    lo, hi = (np.asarray(v, dtype=float) for v in region)
    if lo.shape != hi.shape or not np.all(np.isfinite(lo)) or not np.all(hi > lo):
        raise BilipError("degenerate sampling region")
    if n_pairs < 1:
        raise BilipError("need at least one pair")
    d = lo.shape[0]
    rng = np.random.default_rng(seed)
    diam = float(np.linalg.norm(hi - lo))
    box = lambda k: lo + rng.random((k, d)) * (hi - lo)
    have_des = designated is not None and len(designated) > 0
    n_short = n_pairs // 3
    n_des = n_pairs // 3 if have_des else 0
    n_uni = n_pairs - n_short - n_des
    A = [box(n_uni)]
    B = [box(n_uni)]
    base = box(n_short)
    step = rng.normal(size=(n_short, d))
    step *= (1e-3 * diam * rng.random(n_short) / np.linalg.norm(step, axis=1))[:, None]
    A.append(base)
    B.append(base + step)
    if n_des:
        D = as_points(designated, d)
        i = rng.integers(len(D), size=n_des)
        j = rng.integers(len(D), size=n_des)
        other = np.where((i != j)[:, None], D[j], box(n_des))
        A.append(D[i])
        B.append(other)
    A, B = np.vstack(A), np.vstack(B)
    keep = np.any(A != B, axis=1)
    return A[keep], B[keep]


def sampled_bilip(m: MapExpr, region, n_pairs=10_000, seed=0, designated=None):
    """Largest sampled log2 stretch and log2 inverse stretch over seeded pairs.

    These are lower estimates of the true constants; only the certified bound
    is an upper bound.
    """
    A, B = sample_pairs(region, n_pairs, seed, designated)
    FA = _eval_parallel(m, A)
    FB = _eval_parallel(m, B)
    ds = np.linalg.norm(A - B, axis=1)
    df = np.linalg.norm(FA - FB, axis=1)
    with np.errstate(divide="ignore"):
        up = np.log2(df) - np.log2(ds)
    return {"pairs": int(len(A)), "log2_expansion": float(np.max(up)),
            "log2_contraction": float(np.max(-up))}


def check_designated(m: MapExpr, sources, images=None) -> np.ndarray:
    """Residuals |m(source) - image| for designated pairs.

    ``sources`` may be a PointMap-like object with ``sources`` and ``images``.
    """
    if images is None:
        sources, images = sources.sources, sources.images
    S = as_points(sources, m.dim)
    I = as_points(images, m.dim)
    return np.linalg.norm(evaluate(m, S) - I, axis=1)


def check_fixed(m: MapExpr, points) -> np.ndarray:
    P = as_points(points, m.dim)
    return np.linalg.norm(evaluate(m, P) - P, axis=1)


@dataclass
class AuditReport:
    map_id: str
    certified_log2_bound: float
    sampled_log2_expansion: float = 0.0
    sampled_log2_contraction: float = 0.0
    pairs: int = 0
    seed: int = 0
    designated_max_residual: float = 0.0
    support_violations: int = 0
    checks: dict = field(default_factory=dict)
    note: str = "sampled values are lower estimates of the true constants; the certified bound is an upper bound"

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_dict(self):
        out = asdict(self)
        out["passed"] = self.passed
        return out

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def audit(m: MapExpr, region, n_pairs=10_000, seed=0, sources=None, images=None,
          fixed=None, map_id="map", tol=DESIGNATED_TOL) -> AuditReport:
    """Full audit: sampled distortion versus certified bound, designated residuals, fixed points."""
    rep = AuditReport(map_id=map_id, certified_log2_bound=m.log2_bound, seed=seed)
    des = None if sources is None else as_points(sources, m.dim)
    s = sampled_bilip(m, region, n_pairs, seed, des)
    rep.pairs = s["pairs"]
    rep.sampled_log2_expansion = s["log2_expansion"]
    rep.sampled_log2_contraction = s["log2_contraction"]
    worst = max(rep.sampled_log2_expansion, rep.sampled_log2_contraction)
    rep.checks["distortion"] = bool(worst <= rep.certified_log2_bound + math.log2(1 + BOUND_SLACK))
    if sources is not None and images is not None:
        res = check_designated(m, sources, images)
        rep.designated_max_residual = float(res.max()) if len(res) else 0.0
        rep.checks["designated"] = bool(rep.designated_max_residual <= tol)
    if fixed is not None:
        res = check_fixed(m, fixed)
        rep.support_violations = int(np.sum(res > tol))
        rep.checks["support"] = rep.support_violations == 0
    return rep


@dataclass
class Verdict:
    ok: bool
    reason: str = ""

    def __bool__(self):
        return self.ok


def schedule_oracle(perm, sched) -> Verdict:
    """Replay ``sched`` on the identity arrangement and compare with ``perm``.

    ``perm`` is a LatticePerm on Z^l, a dict of coordinate tuples, or a
    sequence (a permutation of a path).
    """
    if hasattr(perm, "moved"):
        target = dict(perm.moved)
    elif isinstance(perm, dict):
        target = {tuple(a): tuple(b) for a, b in perm.items()}
    else:
        target = {(i,): (int(v),) for i, v in enumerate(perm)}
    where = {}  # position -> label (label = starting position)
    for k, rnd in enumerate(sched.rounds):
        seen = set()
        for a, b in rnd:
            a, b = tuple(a), tuple(b)
            if a in seen or b in seen:
                return Verdict(False, f"round {k}: position reused by ({a}, {b})")
            seen.update((a, b))
            if len(a) != len(b) or sum(abs(x - y) for x, y in zip(a, b)) != 1:
                return Verdict(False, f"round {k}: {a} and {b} are not grid neighbours")
            pa, pb = where.pop(a, a), where.pop(b, b)
            if pb != a:
                where[a] = pb
            if pa != b:
                where[b] = pa
    final = {label: pos for pos, label in where.items()}
    for a in set(target) | set(final):
        want = target.get(a, a)
        got = final.get(a, a)
        if want != got:
            return Verdict(False, f"pebble from {a} ends at {got}, expected {want}")
    return Verdict(True)
