"""Closed-form constants attached to each construction.

Everything that can overflow a double is returned in log2 scale.
"""
import math


def rounding_K(d, r) -> float:
    """Bilipschitz constant of the net-to-lattice rounding map."""
    return 16.0 * max(3.0 * d / r, 1.0)


def extension_N(lam, d, L) -> float:
    """Denominator of the spot lattice used when extending to a lattice window."""
    return 12.0 * lam * math.sqrt(d) * L


def extension_bounds(lam, d, L):
    """(Lip F, Lip F^{-1}) bounds for the lattice extension."""
    return 4.0 * lam * L, 24.0 * lam ** 2 * L * math.sqrt(d)


def reduction_extension_L(d, R, K, L) -> float:
    """Bilipschitz constant of the lattice data handed to the extension oracle."""
    return 24.0 * math.sqrt(d) * R ** 2 * K ** 3 * L


def routing_rounds(l, S) -> int:
    """Round budget for routing a permutation of the grid [S]^l."""
    return (2 * l - 1) * S


def tile_rounds(d, S) -> int:
    """Rounds used per tile column when realising a tile-local permutation in R^d."""
    return (2 * d - 3) * S


def log2_beta(d, t) -> float:
    """log2 of the explicit witness exp(8dt), where exp(x) means 2^x."""
    return 8.0 * d * t


def beta_lower(t) -> int:
    return 2 * math.floor(t) - 1


def upsilon_log2_bound(N, T, d) -> float:
    """log2 of N * beta(6NT)^(3^(d-1))."""
    return math.log2(N) + 3 ** (d - 1) * log2_beta(d, 6 * N * T)


def inj_round_N_min(d, s, H) -> float:
    return (2.0 * math.sqrt(d) / s) ** 3 * H ** (1.0 / (d - 1))


def inj_round_log2_bound(N, H) -> float:
    """log2 of 2^8 N^2 H^2."""
    return 8.0 + 2.0 * math.log2(N) + 2.0 * math.log2(H)


def inj_round_capacity(d, s, N, H):
    """(free spots per cell, worst-case demand per cell) for the horizontal parking step."""
    supply = 0.5 * (N * s ** 2 / (2.0 * math.sqrt(d))) ** (d - 1)
    demand = 2 ** (d - 1) * math.sqrt(d ** d) * H / s
    return supply, demand


def thread_N(d, L, H) -> int:
    return int(math.floor(2.0 * (2.0 * math.sqrt(d) * 4.0 * L) ** 3 * H ** (1.0 / (d - 1))))


def thread_T(L, N, H) -> int:
    return int(math.floor(2 ** 9 * L * N * N * H ** 3))


def thread_log2_bound(d, L, H) -> float:
    """log2 of 2^38 d^(9/2) L^9 H^(2+3/(d-1)) * beta(2^42 d^(9/2) L^10 H^(3+3/(d-1)))^(3^(d-1))."""
    e = 3.0 / (d - 1)
    front = 38 + 4.5 * math.log2(d) + 9 * math.log2(L) + (2 + e) * math.log2(H)
    arg = 2.0 ** 42 * d ** 4.5 * L ** 10 * H ** (3 + e)
    return front + 3 ** (d - 1) * log2_beta(d, arg)


def slab_glue_log2_bound(d, M1, M2, T) -> float:
    """log2 of beta(2^42 d^(9/2) (M1 M2)^10 T^(3+3/(d-1)))^(3^(d-1)+1)."""
    arg = 2.0 ** 42 * d ** 4.5 * (M1 * M2) ** 10 * T ** (3 + 3.0 / (d - 1))
    return (3 ** (d - 1) + 1) * log2_beta(d, arg)


def reduction_log2_bound(K, log2_Cd) -> float:
    """log2 of K * C_d where C_d is the oracle's constant at the extension input."""
    return math.log2(K) + log2_Cd
