import math

import numpy as np
import pytest

from bilipext import BilipError, ContainmentError, Identity, LayeredPointMap, PreconditionError, SlabSystem, \
    evaluate, evaluate_inverse, glue_slabs, inj_round, thread, translation
from bilipext import constants
from bilipext.verify import check_designated, check_fixed, sampled_bilip


from conftest import MOVES, layered_moves


def test_thread_N_formula():
    assert constants.thread_N(2, 1, 1) == math.floor(2 * (8 * math.sqrt(2)) ** 3) == 2896


def test_inj_round_single_point():
    N = constants.thread_N(2, 1, 1)
    r = inj_round([np.array([(0.3, 1.0)])], 0.25, N, 1)
    out = evaluate(r.map, (0.3, 1.0))
    q = out[0]
    assert out[1] == pytest.approx(1.0, abs=1e-12)
    assert abs(q * N - round(q * N)) <= 1e-6 and abs(q - round(q)) > 1e-9
    assert abs(q - 0.3) <= 1 / 16 + 1e-12
    assert np.array_equal(evaluate(r.map, (0.3, 0.4)), [0.3, 0.4])
    assert r.map.log2_bound <= constants.inj_round_log2_bound(N, 1) + 1e-9


def test_inj_round_preconditions():
    N = constants.thread_N(2, 1, 1)
    with pytest.raises(PreconditionError):
        inj_round([np.array([(0.3, 1.0)])], 0.25, 100, 1)
    with pytest.raises(PreconditionError):
        inj_round([np.array([(0.3, 0.6)])], 0.25, N, 1)
    with pytest.raises(PreconditionError):
        inj_round([np.array([(0.3, 1.0), (0.4, 1.0)])], 0.25, N, 1)


def test_inj_round_random_instances(rng):
    for trial in range(10):
        H = int(rng.integers(1, 3))
        s = 0.25
        N = int(math.ceil(constants.inj_round_N_min(2, s, H)))
        layers = []
        for m in range(1, H + 1):
            xs = np.sort(rng.choice(np.arange(-20, 20), size=int(rng.integers(1, 8)), replace=False)) * 0.4
            hs = m + rng.uniform(-0.2, 0.2, size=len(xs))
            layers.append(np.c_[xs + rng.uniform(-0.05, 0.05, len(xs)), hs])
        r = inj_round(layers, s, N, H)
        allp = np.vstack(layers)
        out = evaluate(r.map, allp)
        heights = np.concatenate([[m] * len(P) for m, P in enumerate(layers, start=1)])
        assert np.allclose(out[:, 1], heights, atol=1e-9)
        num = out[:, 0] * N
        assert np.all(np.abs(num - np.rint(num)) <= 1e-6)
        assert np.all(np.rint(num) % N != 0)
        assert np.all(np.abs(out[:, 0] - allp[:, 0]) <= s * s + 1e-9)
        B = np.c_[rng.uniform(-10, 10, 2000), rng.choice([0.5, H + 0.5], 2000)]
        assert np.max(check_fixed(r.map, B)) <= 1e-12


def test_layered_validation():
    with pytest.raises(BilipError):
        LayeredPointMap(2, 1, 2.0, {1: [((0,), (0.0, 1.6))]}, ((0,), (0,)))
    with pytest.raises(BilipError):
        LayeredPointMap(2, 1, 1.5, {1: [((0,), (1.0, 1.0)), ((1,), (0.0, 1.0))]}, ((0,), (1,)))
    with pytest.raises(BilipError):
        LayeredPointMap(2, 1, 2.0, {2: [((0,), (0.0, 1.0))]}, ((0,), (0,)))


def test_layered_round_trip():
    data = layered_moves()
    back = LayeredPointMap.from_dict(data.to_dict())
    assert back.to_dict() == data.to_dict()


def test_thread_identity_data():
    data = LayeredPointMap(2, 1, 1.0, {1: [((0,), (0.0, 1.0))]}, ((0,), (0,)))
    F = thread(data)
    assert isinstance(F, Identity)


def test_thread_designated_and_boundary(threaded_moves, rng):
    data, F, _ = threaded_moves
    S, img = data.audit_set()
    assert np.max(check_designated(F, S, img)) <= 1e-9
    B = np.c_[rng.uniform(-50, 50, 10_000), rng.choice([0.5, 1.5], 10_000)]
    assert np.max(check_fixed(F, B)) <= 1e-9
    back = evaluate_inverse(F, img)
    assert np.max(np.abs(back - S)) <= 1e-9


def test_thread_certified_bound(threaded_moves):
    data, F, _ = threaded_moves
    assert F.log2_bound <= constants.thread_log2_bound(2, data.L, data.H) + 1e-9
    s = sampled_bilip(F, ((-2, 0.5), (5, 1.5)), n_pairs=10_000, seed=3, designated=data.audit_set()[0])
    assert max(s["log2_expansion"], s["log2_contraction"]) <= F.log2_bound


def test_thread_internal_pieces(threaded_moves):
    data, F, info = threaded_moves
    N = info["N"]
    assert N == constants.thread_N(2, data.L, data.H)
    for m, sigma in info["sigmas"].items():
        assert all(sigma(sigma(x)) == x for x in sigma.moved)
        spots = info["rounding"].spots[m - 1]
        srcs = [src for mm, src, _ in data.active() if mm == m]
        for src, spot in zip(srcs, spots):
            assert sigma(tuple(N * v for v in src)) == spot
            assert any(c % N for c in spot)
    act = data.active()
    imgs = np.array([img for _, _, img in act])
    rounded = evaluate(info["rounding"].map, imgs)
    assert np.max(np.abs(rounded[:, 0] - imgs[:, 0])) <= info["s"] ** 2 + 1e-9


@pytest.mark.xfail(strict=False, reason="float64 round-off is amplified by the local distortion of the "
                                        "realiser near moved points; see the decisions ledger")
def test_thread_sampled_round_trip(threaded_moves, rng):
    _, F, _ = threaded_moves
    P = np.c_[rng.uniform(-2, 5, 10_000), rng.uniform(0.5, 1.5, 10_000)]
    back = evaluate_inverse(F, evaluate(F, P))
    assert np.all(np.linalg.norm(back - P, axis=1) <= 1e-9 * (1 + np.linalg.norm(P, axis=1)))


def test_thread_small_perturbation():
    data = LayeredPointMap(2, 1, 1.25, {1: [((0,), (0.05, 1.02)), ((1,), (1.0, 0.97)), ((2,), (2.03, 1.0))]},
                           ((0,), (2,)))
    F = thread(data)
    S, img = data.audit_set()
    assert np.max(check_designated(F, S, img)) <= 1e-9


# ---------------------------------------------------------------- slab gluing

def test_glue_single_slab_matches_thread(threaded_moves, rng):
    data, F, _ = threaded_moves
    pts = {1: [((a[0], 1), b) for a, b in MOVES]}
    system = SlabSystem(2, 1, Identity(2), pts, ((0,), (3,)), M1=1.0, M2=2.0)
    G = glue_slabs(system)
    P = np.c_[rng.uniform(-2, 5, 2000), rng.uniform(0.5, 1.5, 2000)]
    assert np.allclose(evaluate(G, P), evaluate(F, P), atol=1e-9)


def two_slab_system(shift_second=0.0):
    pts = {1: [((0, 1), (0.4, 1.0)), ((1, 1), (1.3, 1.1))],
           2: [((0, 3), (0.3, 3.0 + shift_second)), ((1, 3), (1.2, 2.8))]}
    return SlabSystem(2, 2, Identity(2), pts, ((0,), (1,)), M1=1.0, M2=2.0)


def test_glue_two_slabs():
    system = two_slab_system()
    F = glue_slabs(system)
    for k, pairs in system.points.items():
        src = np.array([a for a, _ in pairs], dtype=float)
        img = np.array([b for _, b in pairs])
        assert np.max(check_designated(F, src, img)) <= 1e-9
    assert F.log2_bound <= constants.slab_glue_log2_bound(2, 1.0, 2.0, 2) + 1e-9
    s = sampled_bilip(F, ((-2, 0.5), (4, 4.5)), n_pairs=4000, seed=1)
    assert math.isfinite(s["log2_expansion"]) and s["log2_expansion"] <= F.log2_bound


def test_glue_rejects_containment_violation():
    with pytest.raises(ContainmentError) as info:
        glue_slabs(two_slab_system(shift_second=2.0))
    assert info.value.slab == 2


def test_glue_without_data_is_G(rng):
    G = translation((0.25, 0.0))
    F = glue_slabs(SlabSystem(2, 1, G, {}, ((0,), (0,))))
    P = rng.normal(size=(100, 2))
    assert np.array_equal(evaluate(F, P), evaluate(G, P))


def test_slab_system_round_trip():
    system = two_slab_system()
    back = SlabSystem.from_dict(system.to_dict())
    assert back.to_dict() == system.to_dict()
