import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bilipext import BetaWitness, BilipError, Identity, LatticePerm, PreconditionError, RoutingSchedule, \
    build_upsilon, edge_color_regular_bipartite, evaluate, realize_tile_perm, route_grid, route_path, tile_decompose
from bilipext import constants
from bilipext.verify import check_fixed, sampled_bilip, schedule_oracle


def replay(sched, cells):
    """Independent pebble simulation: returns {start: end} over ``cells``."""
    pos = {c: c for c in cells}   # pebble -> position
    at = {c: c for c in cells}    # position -> pebble
    for rnd in sched.rounds:
        touched = [p for pair in rnd for p in pair]
        assert len(touched) == len(set(touched))
        for a, b in rnd:
            assert sum(abs(x - y) for x, y in zip(a, b)) == 1
            pa, pb = at[a], at[b]
            at[a], at[b] = pb, pa
            pos[pa], pos[pb] = b, a
    return pos


def random_grid_perm(rng, shape):
    cells = list(itertools.product(*[range(s) for s in shape]))
    img = rng.permutation(len(cells))
    return {c: cells[i] for c, i in zip(cells, img)}, cells


# ---------------------------------------------------------------- paths

def test_route_path_identity():
    s = route_path(list(range(5)))
    assert len(s) == 5 and s.swap_count == 0
    assert schedule_oracle(list(range(5)), s)


def test_route_path_reversal():
    s = route_path([2, 1, 0])
    assert len(s) <= 3
    assert replay(s, [(0,), (1,), (2,)]) == {(0,): (2,), (1,): (1,), (2,): (0,)}


def test_route_path_all_of_four():
    for perm in itertools.permutations(range(4)):
        s = route_path(perm)
        assert len(s) <= 4
        assert schedule_oracle(perm, s)
        assert replay(s, [(i,) for i in range(4)]) == {(i,): (perm[i],) for i in range(4)}


def test_route_path_rejects_non_bijection():
    with pytest.raises(BilipError):
        route_path([0, 0, 1])


# ---------------------------------------------------------- edge colouring

def _check_colouring(edges, n, k, classes):
    assert len(classes) == k
    assert sorted(i for c in classes for i in c) == list(range(len(edges)))
    for c in classes:
        assert sorted(edges[i][0] for i in c) == list(range(n))
        assert sorted(edges[i][1] for i in c) == list(range(n))


def test_edge_colouring_single_matching():
    edges = [(0, 2), (1, 0), (2, 1)]
    classes = edge_color_regular_bipartite(edges, 3, 1)
    assert [sorted(c) for c in classes] == [[0, 1, 2]]


def test_edge_colouring_double_edge():
    classes = edge_color_regular_bipartite([(0, 0), (0, 0)], 1, 2)
    assert sorted(map(tuple, classes)) == [(0,), (1,)]


def test_edge_colouring_random_regular(rng):
    for _ in range(20):
        edges = [(u, int(v)) for _ in range(3) for u, v in enumerate(rng.permutation(5))]
        order = rng.permutation(len(edges))
        edges = [edges[i] for i in order]
        _check_colouring(edges, 5, 3, edge_color_regular_bipartite(edges, 5, 3))


def test_edge_colouring_rejects_irregular():
    with pytest.raises(BilipError):
        edge_color_regular_bipartite([(0, 0), (0, 1), (1, 1)], 2, 2)


# ------------------------------------------------------------------ grids

def test_route_grid_line_matches_path():
    perm = [3, 0, 2, 1]
    a = route_grid(np.array(perm)[:, None])
    assert a.rounds == route_path(perm).rounds


def test_route_grid_adjacent_transposition():
    s = route_grid({(0, 0): (0, 1), (0, 1): (0, 0)}, (2, 2))
    assert len(s) <= 6
    assert schedule_oracle({(0, 0): (0, 1), (0, 1): (0, 0)}, s)


@pytest.mark.parametrize("shape,count,bound", [((3, 3), 200, 9), ((2, 2, 2), 50, 10), ((4, 4, 4), 10, 20),
                                               ((3, 5), 30, 13)])
def test_route_grid_random(rng, shape, count, bound):
    for _ in range(count):
        perm, cells = random_grid_perm(rng, shape)
        s = route_grid(perm, shape)
        assert len(s) <= bound
        assert replay(s, cells) == perm
        assert schedule_oracle(perm, s)


def test_cube_round_budget():
    for l in (1, 2, 3):
        for S in (2, 3, 4):
            perm, _ = random_grid_perm(np.random.default_rng(l * 10 + S), (S,) * l)
            assert len(route_grid(perm, (S,) * l)) == constants.routing_rounds(l, S)


def test_route_grid_rejects_non_bijection():
    with pytest.raises(BilipError):
        route_grid({(0, 0): (1, 1)}, (2, 2))


# ------------------------------------------------------------ schedule oracle

def test_oracle_empty_schedule():
    assert schedule_oracle({}, RoutingSchedule([]))


def test_oracle_overlapping_round():
    v = schedule_oracle({(0,): (2,), (2,): (0,)}, RoutingSchedule([[((0,), (1,)), ((1,), (2,))]]))
    assert not v and "reused" in v.reason


def test_oracle_non_adjacent_and_wrong_result():
    assert not schedule_oracle({(0,): (2,), (2,): (0,)}, RoutingSchedule([[((0,), (2,))]]))
    v = schedule_oracle({(0,): (1,), (1,): (0,)}, RoutingSchedule([]))
    assert not v and "expected" in v.reason


# ------------------------------------------------------------ lattice perms

def test_lattice_perm_basics():
    p = LatticePerm(1, 1, {(0,): (1,), (1,): (2,), (2,): (0,)})
    assert p((5,)) == (5,)
    assert p.then(p.inverse()).is_identity()
    assert p.then(p)((0,)) == (2,)
    assert p.displacement_sq == 4
    assert LatticePerm.from_dict(p.to_dict()).moved == p.moved
    with pytest.raises(BilipError):
        LatticePerm(1, 1, {(0,): (1,)})


# ------------------------------------------------------- tile decomposition

def padded_box(p, w, T):
    lo = np.array([-0.25 + T * (3 * wi + pi) - T for wi, pi in zip(w, p)])
    return lo, lo + 3 * T


def in_padded_tile(h, p, T):
    """Brute force: is there a w with h/2 in the padded tile for offset p?"""
    x = np.array(h) / 2
    w = tuple(int(math.floor((xi + 0.25 - T * pi + T) / (3 * T))) for xi, pi in zip(x, p))
    lo, hi = padded_box(p, w, T)
    assert np.all(lo <= x) and np.all(x < hi)
    return w


def random_bounded_perm(rng, l, T, clusters=4):
    """Random permutations of disjoint boxes of diameter <= T, plus unit transpositions."""
    side = int(math.floor(T / math.sqrt(l) + 1e-12))
    moved = {}
    for k in range(clusters):
        corner = tuple(int(v) for v in rng.integers(-3, 4, size=l))
        corner = (corner[0] + (10 + 2 * T) * k,) + corner[1:]
        if side >= 1:
            box = list(itertools.product(*[range(c, c + side + 1) for c in corner]))
        else:
            box = [corner, (corner[0] + 1,) + corner[1:]]
        img = rng.permutation(len(box))
        moved.update({a: box[i] for a, i in zip(box, img)})
    return LatticePerm(l, 1, moved)


def test_tile_decompose_identity():
    dec = tile_decompose(LatticePerm(2, 1, {}), 2)
    assert len(dec.pieces) == 9 and all(p.is_identity() for p in dec.pieces)


def test_tile_decompose_line_swap():
    phi = LatticePerm(1, 1, {(0,): (1,), (1,): (0,)})
    dec = tile_decompose(phi, 1)
    assert len(dec.pieces) == 3
    for x in (0, 1, 2, -1, 7):
        assert dec.apply((2 * x,)) == tuple(2 * v for v in phi((x,)))
    for p, piece in zip(dec.offsets, dec.pieces):
        for a, b in piece.moved.items():
            assert in_padded_tile(a, p, 1) == in_padded_tile(b, p, 1)
    spots = set(dec.parking.values())
    assert all(s[0] % 2 == 1 for s in spots)


def test_tile_decompose_rejects_long_moves():
    with pytest.raises(PreconditionError):
        tile_decompose(LatticePerm(1, 1, {(0,): (3,), (3,): (0,)}), 2)


@given(st.integers(0, 2 ** 31 - 1), st.integers(1, 2), st.integers(1, 3))
def test_tile_decompose_property(seed, l, T):
    rng = np.random.default_rng(seed)
    phi = random_bounded_perm(rng, l, T)
    dec = tile_decompose(phi, T)
    pts = set(phi.support) | {tuple(v + 1 for v in x) for x in phi.support}
    for x in pts:
        assert dec.apply(tuple(2 * v for v in x)) == tuple(2 * v for v in phi(x))
    for p, piece in zip(dec.offsets, dec.pieces):
        for a, b in piece.moved.items():
            assert in_padded_tile(a, p, T) == in_padded_tile(b, p, T)
    for piece in dec.pieces[:-1]:
        assert all(piece(piece(a)) == a for a in piece.moved)
    assert all(c <= T ** l <= (2 * T) ** l - T ** l for c in dec.demand.values())


# ------------------------------------------------------------ realisations

def test_realize_identity():
    m = realize_tile_perm(LatticePerm(2, 1, {}), 3)
    assert isinstance(m, Identity) and m.bound == 1


def test_realize_single_transposition():
    m = realize_tile_perm(LatticePerm(1, 1, {(0,): (1,), (1,): (0,)}), 2)
    assert m.bound <= 16 + 1e-9
    assert np.allclose(evaluate(m, [(0, 0), (1, 0)]), [(1, 0), (0, 0)], atol=1e-12)


def test_realize_random_tile_in_three_dimensions(rng):
    cells = [(i, j) for i in range(3) for j in range(3)]
    for _ in range(5):
        img = rng.permutation(9)
        sigma = LatticePerm(2, 1, {c: cells[k] for c, k in zip(cells, img)})
        m = realize_tile_perm(sigma, 3)
        src = np.array([c + (0,) for c in cells], dtype=float)
        want = np.array([sigma(c) + (0,) for c in cells], dtype=float)
        assert np.max(np.abs(evaluate(m, src) - want)) <= 1e-9
        assert m.log2_bound <= 3 * 8 * 3 and m.log2_bound <= 4 * constants.tile_rounds(3, 3) + 1e-9
        B = np.c_[rng.uniform(-3, 6, size=(10_000, 2)), rng.choice([-0.5, 0.5], size=10_000)]
        assert np.max(check_fixed(m, B)) <= 1e-12
        s = sampled_bilip(m, ((-1, -1, -1), (3, 3, 1)), n_pairs=5000, seed=int(img[0]))
        assert max(s["log2_expansion"], s["log2_contraction"]) <= m.log2_bound + 1e-6


def test_realize_rejects_non_local():
    with pytest.raises(PreconditionError):
        realize_tile_perm(LatticePerm(1, 1, {(2,): (3,), (3,): (2,)}), 3)


def test_upsilon_identity():
    assert isinstance(build_upsilon(LatticePerm(1, 1, {}), 1, 1, 0.0), Identity)


def test_upsilon_adjacent_swap(rng):
    ups = build_upsilon(LatticePerm(1, 1, {(0,): (1,), (1,): (0,)}), 1, 1, 0.0)
    assert np.allclose(evaluate(ups, [(0, 0), (1, 0)]), [(1, 0), (0, 0)], atol=1e-9)
    B = np.c_[rng.uniform(-20, 20, 10_000), rng.choice([-0.5, 0.5], 10_000)]
    assert np.max(check_fixed(ups, B)) <= 1e-12
    assert ups.log2_bound <= constants.upsilon_log2_bound(1, 1, 2)


def test_upsilon_bound_formula():
    assert constants.upsilon_log2_bound(1, 1, 2) == 288


def test_upsilon_scaled_lattice_at_height(rng):
    sigma = LatticePerm(1, 2, {(0,): (1,), (1,): (3,), (3,): (0,)})
    ups = build_upsilon(sigma, 2, 2, 3.0)
    src = np.array([(x / 2, 3.0) for x in (0, 1, 3, 5)])
    want = np.array([(sigma((x,))[0] / 2, 3.0) for x in (0, 1, 3, 5)])
    assert np.max(np.abs(evaluate(ups, src) - want)) <= 1e-9
    B = np.c_[rng.uniform(-10, 10, 4000), rng.choice([2.5, 3.5], 4000)]
    assert np.max(check_fixed(ups, B)) <= 1e-12


def test_beta_witness():
    beta = BetaWitness(3)
    ts = np.linspace(1, 100, 1000)
    assert beta.check(ts)
    assert all(math.log2(max(constants.beta_lower(t), 1)) <= beta.log2(t) for t in ts)
    assert beta.log2(6) == 8 * 3 * 6
