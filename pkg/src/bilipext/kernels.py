"""Hot loops with a numba flavour and a pure-numpy twin.

Each public function takes ``impl`` in {None, "numba", "numpy"}; ``None``
follows the process-wide default from :mod:`bilipext._accel`.
"""
from typing import NamedTuple

import numpy as np

from ._accel import NUMBA_AVAILABLE, USE_NUMBA, njit


def _pick(impl):
    if impl is None:
        return "numba" if USE_NUMBA else "numpy"
    if impl == "numba" and not NUMBA_AVAILABLE:
        raise RuntimeError("numba is not installed")
    if impl not in ("numba", "numpy"):
        raise ValueError(f"unknown kernel implementation {impl!r}")
    return impl


class SwapPack(NamedTuple):
    """Flat arrays describing an ordered chain of tube swaps.

    Row ``j`` holds the midpoint ``C``, the unit axis ``U`` (from y towards x),
    the in-plane companion ``V``, the endpoint distance ``D``, the ratio
    ``ETA`` = radius / distance, the rotation sign ``SGN`` (+1 forward, -1
    inverse) and an open bounding box ``LO``/``HI`` of the moving set.
    """

    C: np.ndarray
    U: np.ndarray
    V: np.ndarray
    D: np.ndarray
    ETA: np.ndarray
    SGN: np.ndarray
    LO: np.ndarray
    HI: np.ndarray

    def __len__(self):
        return self.C.shape[0]

    def reversed_inverse(self) -> "SwapPack":
        return SwapPack(*(a[::-1].copy() for a in (self.C, self.U, self.V, self.D, self.ETA)),
                        -self.SGN[::-1].copy(), self.LO[::-1].copy(), self.HI[::-1].copy())

    @staticmethod
    def concat(packs, dim):
        packs = [p for p in packs if len(p)]
        if not packs:
            z2 = np.zeros((0, dim))
            z1 = np.zeros(0)
            return SwapPack(z2, z2, z2, z1, z1, z1, z2, z2)
        return SwapPack(*(np.ascontiguousarray(np.concatenate(cols)) for cols in zip(*packs)))


# ---------------------------------------------------------------- swap chains

@njit
def _swap_chain_loop(P, C, U, V, D, ETA, SGN, LO, HI):
    n, d = P.shape
    m = C.shape[0]
    out = P.copy()
    rel = np.empty(d)
    for i in range(n):
        for j in range(m):
            inside = True
            for k in range(d):
                x = out[i, k]
                if x <= LO[j, k] or x >= HI[j, k]:
                    inside = False
                    break
            if not inside:
                continue
            dj = D[j]
            along = 0.0
            across = 0.0
            for k in range(d):
                rel[k] = out[i, k] - C[j, k]
                along += rel[k] * U[j, k]
                across += rel[k] * V[j, k]
            perp2 = 0.0
            for k in range(d):
                q = rel[k] - along * U[j, k]
                perp2 += q * q
            a = along / dj
            b = across / dj
            eta = ETA[j]
            kk = 2.0 + 1.0 / eta
            t = np.sqrt(4.0 * a * a + kk * kk * perp2 / (dj * dj))
            t0 = 1.0 + 2.0 * eta
            if t >= t0:
                continue
            if t <= 1.0:
                theta = np.pi
            else:
                theta = (t0 - t) * np.pi / (2.0 * eta)
            theta *= SGN[j]
            cs = np.cos(theta)
            sn = np.sin(theta)
            w1 = 2.0 * a
            w2 = kk * b
            a2 = 0.5 * (cs * w1 - sn * w2)
            b2 = (sn * w1 + cs * w2) / kk
            da = dj * (a2 - a)
            db = dj * (b2 - b)
            for k in range(d):
                out[i, k] += da * U[j, k] + db * V[j, k]
    return out


def _apply_one_numpy(Q, c, u, v, dj, eta, sgn):
    rel = Q - c
    along = rel @ u
    a = along / dj
    b = (rel @ v) / dj
    perp = rel - along[:, None] * u
    perp2 = np.einsum("ij,ij->i", perp, perp) / (dj * dj)
    kk = 2.0 + 1.0 / eta
    t = np.sqrt(4.0 * a * a + kk * kk * perp2)
    t0 = 1.0 + 2.0 * eta
    theta = np.where(t <= 1.0, np.pi, (t0 - t) * np.pi / (2.0 * eta))
    theta = np.where(t >= t0, 0.0, theta) * sgn
    cs, sn = np.cos(theta), np.sin(theta)
    w1, w2 = 2.0 * a, kk * b
    a2 = 0.5 * (cs * w1 - sn * w2)
    b2 = (sn * w1 + cs * w2) / kk
    moved = Q + dj * ((a2 - a)[:, None] * u + (b2 - b)[:, None] * v)
    return np.where((t >= t0)[:, None], Q, moved)


def _swap_chain_numpy(P, C, U, V, D, ETA, SGN, LO, HI):
    out = P.copy()
    for j in range(C.shape[0]):
        mask = np.all((out > LO[j]) & (out < HI[j]), axis=1)
        idx = np.flatnonzero(mask)
        if idx.size:
            out[idx] = _apply_one_numpy(out[idx], C[j], U[j], V[j], D[j], ETA[j], SGN[j])
    return out


def swap_chain(P, pack: SwapPack, impl=None) -> np.ndarray:
    """Push every row of ``P`` through the swaps of ``pack`` in order."""
    P = np.ascontiguousarray(P, dtype=float)
    if len(pack) == 0 or P.shape[0] == 0:
        return P.copy()
    fn = _swap_chain_loop if _pick(impl) == "numba" else _swap_chain_numpy
    return fn(P, *pack)


# ------------------------------------------------------------ pairwise ratios

@njit
def _ratio_extremes_loop(S, F):
    n, d = S.shape
    best = 0.0
    best_inv = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            ds = 0.0
            df = 0.0
            for k in range(d):
                a = S[i, k] - S[j, k]
                ds += a * a
            for k in range(F.shape[1]):
                b = F[i, k] - F[j, k]
                df += b * b
            if ds == 0.0 or df == 0.0:
                return np.inf, np.inf
            r = np.sqrt(df / ds)
            if r > best:
                best = r
            if 1.0 / r > best_inv:
                best_inv = 1.0 / r
    return best, best_inv


def _ratio_extremes_numpy(S, F, chunk=512):
    n = S.shape[0]
    best = 0.0
    best_inv = 0.0
    for lo in range(0, n, chunk):
        hi = min(n, lo + chunk)
        ds = np.sqrt(((S[lo:hi, None, :] - S[None, :, :]) ** 2).sum(-1))
        df = np.sqrt(((F[lo:hi, None, :] - F[None, :, :]) ** 2).sum(-1))
        rows = np.arange(lo, hi)[:, None]
        upper = np.arange(n)[None, :] > rows
        if np.any(upper & ((ds == 0.0) | (df == 0.0))):
            return np.inf, np.inf
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(upper, df / np.where(upper, ds, 1.0), np.nan)
        if np.any(upper):
            best = max(best, float(np.nanmax(r)))
            best_inv = max(best_inv, float(np.nanmax(1.0 / r)))
    return best, best_inv


def ratio_extremes(S, F, impl=None):
    """Exhaustive (max ratio, max inverse ratio) over all index pairs.

    Coincident sources or images make the map non-injective; both values are
    then ``inf``.
    """
    S = np.ascontiguousarray(S, dtype=float)
    F = np.ascontiguousarray(F, dtype=float)
    if S.shape[0] < 2:
        return 1.0, 1.0
    fn = _ratio_extremes_loop if _pick(impl) == "numba" else _ratio_extremes_numpy
    a, b = fn(S, F)
    return float(a), float(b)


# ---------------------------------------------------------- segment distances

@njit
def _segment_distances_loop(P1, Q1, P2, Q2):
    m, d = P1.shape
    out = np.empty(m)
    eps = 1e-300
    for i in range(m):
        a = 0.0
        e = 0.0
        f = 0.0
        c = 0.0
        b = 0.0
        for k in range(d):
            d1 = Q1[i, k] - P1[i, k]
            d2 = Q2[i, k] - P2[i, k]
            r = P1[i, k] - P2[i, k]
            a += d1 * d1
            e += d2 * d2
            f += d2 * r
            c += d1 * r
            b += d1 * d2
        if a <= eps and e <= eps:
            s = 0.0
            t = 0.0
        elif a <= eps:
            s = 0.0
            t = min(max(f / e, 0.0), 1.0)
        elif e <= eps:
            t = 0.0
            s = min(max(-c / a, 0.0), 1.0)
        else:
            denom = a * e - b * b
            s = min(max((b * f - c * e) / denom, 0.0), 1.0) if denom > 0.0 else 0.0
            t = (b * s + f) / e
            if t < 0.0:
                t = 0.0
                s = min(max(-c / a, 0.0), 1.0)
            elif t > 1.0:
                t = 1.0
                s = min(max((b - c) / a, 0.0), 1.0)
        acc = 0.0
        for k in range(d):
            g = P1[i, k] + (Q1[i, k] - P1[i, k]) * s - P2[i, k] - (Q2[i, k] - P2[i, k]) * t
            acc += g * g
        out[i] = np.sqrt(acc)
    return out


def _segment_distances_numpy(P1, Q1, P2, Q2):
    eps = 1e-300
    d1 = Q1 - P1
    d2 = Q2 - P2
    r = P1 - P2
    a = np.einsum("ij,ij->i", d1, d1)
    e = np.einsum("ij,ij->i", d2, d2)
    f = np.einsum("ij,ij->i", d2, r)
    c = np.einsum("ij,ij->i", d1, r)
    b = np.einsum("ij,ij->i", d1, d2)
    safe_a = np.where(a > eps, a, 1.0)
    safe_e = np.where(e > eps, e, 1.0)
    denom = a * e - b * b
    s = np.where(denom > 0, np.clip((b * f - c * e) / np.where(denom > 0, denom, 1.0), 0, 1), 0.0)
    t = (b * s + f) / safe_e
    low = t < 0
    high = t > 1
    s = np.where(low, np.clip(-c / safe_a, 0, 1), np.where(high, np.clip((b - c) / safe_a, 0, 1), s))
    t = np.clip(t, 0, 1)
    # degenerate segments
    only_second = (a <= eps) & (e > eps)
    only_first = (a > eps) & (e <= eps)
    both = (a <= eps) & (e <= eps)
    s = np.where(only_second | both, 0.0, s)
    t = np.where(only_second, np.clip(f / safe_e, 0, 1), t)
    s = np.where(only_first, np.clip(-c / safe_a, 0, 1), s)
    t = np.where(only_first | both, 0.0, t)
    g = P1 + d1 * s[:, None] - P2 - d2 * t[:, None]
    return np.sqrt(np.einsum("ij,ij->i", g, g))


def segment_distances(P1, Q1, P2, Q2, impl=None) -> np.ndarray:
    """Row-wise distance between closed segments [P1,Q1] and [P2,Q2]."""
    arrs = [np.ascontiguousarray(np.atleast_2d(a), dtype=float) for a in (P1, Q1, P2, Q2)]
    if arrs[0].shape[0] == 0:
        return np.zeros(0)
    fn = _segment_distances_loop if _pick(impl) == "numba" else _segment_distances_numpy
    return fn(*arrs)


# ------------------------------------------------- odd-even transposition sort

@njit
def _odd_even_loop(keys):
    S = keys.shape[0]
    work = keys.copy()
    count = 0
    for rnd in range(S):
        j = rnd % 2
        while j + 1 < S:
            if work[j] > work[j + 1]:
                tmp = work[j]
                work[j] = work[j + 1]
                work[j + 1] = tmp
                count += 1
            j += 2
    rounds = np.empty(count, dtype=np.int64)
    pos = np.empty(count, dtype=np.int64)
    work = keys.copy()
    idx = 0
    for rnd in range(S):
        j = rnd % 2
        while j + 1 < S:
            if work[j] > work[j + 1]:
                tmp = work[j]
                work[j] = work[j + 1]
                work[j + 1] = tmp
                rounds[idx] = rnd
                pos[idx] = j
                idx += 1
            j += 2
    return rounds, pos


def _odd_even_numpy(keys):
    S = keys.shape[0]
    work = keys.copy()
    rounds, pos = [], []
    for rnd in range(S):
        left = np.arange(rnd % 2, S - 1, 2)
        hit = left[work[left] > work[left + 1]]
        if hit.size:
            work[hit], work[hit + 1] = work[hit + 1].copy(), work[hit].copy()
            rounds.append(np.full(hit.size, rnd, dtype=np.int64))
            pos.append(hit.astype(np.int64))
    if not rounds:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    return np.concatenate(rounds), np.concatenate(pos)


def odd_even_swaps(keys, impl=None):
    """Odd-even transposition sort of ``keys`` over exactly ``len(keys)`` rounds.

    Returns ``(round_index, left_position)`` arrays, one entry per exchange of
    positions ``left_position`` and ``left_position + 1``.
    """
    keys = np.ascontiguousarray(keys, dtype=np.int64)
    if keys.shape[0] < 2:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    fn = _odd_even_loop if _pick(impl) == "numba" else _odd_even_numpy
    r, p = fn(keys)
    return np.asarray(r), np.asarray(p)
