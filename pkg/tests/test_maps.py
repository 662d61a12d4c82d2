import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bilipext import AxisSlab, BilipError, Box, Compose, Identity, Swap, TubeRegion, compose, diagonal_scale, \
    evaluate, evaluate_inverse, glue, map_from_dict, orthogonal_frame, spin_map, translation, uniform_scale
from bilipext.errors import BoundaryMismatchError, RegionOverlapError, RegionPreservationError
from bilipext.maps import householder_frame
from bilipext.verify import sampled_bilip

from conftest import points_outside, random_swap_spec


def _spin(vals=(1.0, 0.5, 0.0)):
    return spin_map((0.0, 0.0, 0.0), (1, 0, 0), (0, 1, 0), (0.0, 1.0, 2.0), vals, 2.0)


def test_identity(rng):
    P = rng.normal(size=(50, 3))
    m = Identity(3)
    assert np.array_equal(evaluate(m, P), P)
    assert m.bound == 1.0


def test_compose_with_inverse_is_identity(rng):
    A = compose([uniform_scale(3.0, 2, (1, -2)), Swap((0, 0), (1, 1), 0.3), orthogonal_frame(householder_frame(
        np.array([0.6, 0.8])))])
    P = rng.normal(size=(500, 2)) * 3
    assert np.allclose(evaluate(compose([A, A.inverse()]), P), P, atol=1e-9)


def test_compose_order_is_left_to_right():
    m = compose([translation((1.0, 0.0)), uniform_scale(2.0, 2)])
    assert evaluate(m, (0.0, 0.0)).tolist() == [2.0, 0.0]


def test_empty_and_singleton_composition():
    with pytest.raises(BilipError):
        compose([])
    assert isinstance(compose([], dim=3), Identity)
    s = Swap((0, 0), (1, 0), 0.25)
    assert compose([s]) is s


def test_spin_zero_profile_is_identity(rng):
    m = _spin((0.0, 0.0, 0.0))
    P = rng.normal(size=(100, 3))
    assert np.array_equal(evaluate(m, P), P)
    assert m.bound == 1.0


def test_spin_fixes_far_points_and_inverts(rng):
    m = _spin()
    far = rng.normal(size=(200, 3))
    far *= (2.0 + 3 * rng.random(200))[:, None] / np.linalg.norm(far, axis=1)[:, None]
    assert np.array_equal(evaluate(m, far), far)
    P = rng.normal(size=(300, 3))
    assert np.allclose(evaluate(compose([m, m.inverse()]), P), P, atol=1e-12)


def test_spin_validation():
    with pytest.raises(BilipError):
        spin_map((0, 0), (1, 0), (1, 0), (0.0, 1.0), (1.0, 0.0), 1.0)
    with pytest.raises(BilipError):
        spin_map((0, 0), (1, 0), (0, 1), (0.0, 1.0), (1.0, 0.5), 1.0)


def test_composed_bounds_multiply():
    a = Swap((0.5, 0), (-0.5, 0), 0.5)
    b = Swap((3.5, 0), (2.5, 0), 0.5)
    assert a.bound == pytest.approx(16)
    assert compose([a, b]).bound == pytest.approx(256)


def test_affine_constants():
    assert uniform_scale(4.0, 3).log2_bound == pytest.approx(2.0)
    assert diagonal_scale([2.0, 0.25]).log2_bound == pytest.approx(2.0)
    assert translation((1, 2)).log2_bound == 0.0
    with pytest.raises(BilipError):
        diagonal_scale([1.0, 0.0])
    with pytest.raises(BilipError):
        orthogonal_frame([[1, 1], [0, 1]])


def test_glue_empty_is_identity():
    m = glue([], dim=2)
    assert isinstance(m, Identity) and m.bound == 1.0


def test_glue_two_tubes_takes_max_bound(rng):
    a = Swap((0.5, 0), (-0.5, 0), 0.5)          # bound 16
    b = Swap((10, 0), (12, 0), 0.5)             # bound 64
    g = glue([(TubeRegion(a.x, a.y, a.r), a), (TubeRegion(b.x, b.y, b.r), b)])
    assert g.bound == pytest.approx(64)
    P = np.array([a.x, a.y, b.x, b.y])
    assert np.allclose(evaluate(g, P), [a.y, a.x, b.y, b.x], atol=1e-12)


def test_glue_slab_partition_bound_is_max():
    inner = Swap((0.0, 1.0), (1.0, 1.0), 0.25)
    other = Swap((0.0, 3.0), (1.0, 3.0), 0.5)
    g = glue([(AxisSlab(2, 1, 0.5, 1.5), inner), (AxisSlab(2, 1, 2.5, 3.5), other)])
    assert g.log2_bound == pytest.approx(max(inner.log2_bound, other.log2_bound))


def test_glue_mutations_are_rejected():
    s = Swap((0.0, 1.0), (1.0, 1.0), 0.5)
    # Region boundary cuts through the moving set.
    with pytest.raises(BoundaryMismatchError):
        glue([(AxisSlab(2, 1, 0.9, 1.5), s)])
    with pytest.raises(RegionOverlapError):
        glue([(AxisSlab(2, 1, 0.0, 2.0), s), (AxisSlab(2, 1, 1.5, 3.0), Identity(2))])
    # A translation sends the box off itself.
    with pytest.raises((BoundaryMismatchError, RegionPreservationError)):
        glue([(Box((0, 0), (1, 1)), translation((0.3, 0.0)))])


def test_glued_evaluates_identity_outside(rng):
    s = Swap((0.0, 1.0), (1.0, 1.0), 0.5)
    g = glue([(AxisSlab(2, 1, 0.0, 2.0), s)])
    P = rng.uniform(-5, 5, size=(2000, 2))
    P = P[(P[:, 1] < 0) | (P[:, 1] > 2)]
    assert np.array_equal(evaluate(g, P), P)


@st.composite
def random_chains(draw):
    seed = draw(st.integers(0, 2 ** 31 - 1))
    d = draw(st.integers(2, 4))
    depth = draw(st.integers(1, 5))
    rng = np.random.default_rng(seed)
    parts = []
    for _ in range(depth):
        kind = rng.integers(4)
        if kind == 0:
            s = random_swap_spec(rng, d)
            parts.append(Swap(s.x, s.y, s.r))
        elif kind == 1:
            parts.append(uniform_scale(float(rng.uniform(0.3, 3.0)), d, rng.normal(size=d)))
        elif kind == 2:
            parts.append(diagonal_scale(rng.uniform(0.5, 2.0, size=d)))
        else:
            parts.append(orthogonal_frame(householder_frame(_unit(rng, d)), rng.normal(size=d)))
    return compose(parts, dim=d), seed


def _unit(rng, d):
    v = rng.normal(size=d)
    return v / np.linalg.norm(v)


def _box3(m):
    box = m.support()
    lo, hi = box if box is not None else (np.full(m.dim, -1.0), np.full(m.dim, 1.0))
    lo, hi = np.where(np.isfinite(lo), lo, -3), np.where(np.isfinite(hi), hi, 3)
    c, h = (lo + hi) / 2, np.maximum((hi - lo) / 2, 0.5)
    return c - 3 * h, c + 3 * h


@given(random_chains())
def test_round_trip_property(chain):
    m, seed = chain
    rng = np.random.default_rng(seed)
    lo, hi = _box3(m)
    P = lo + rng.random((10_000, m.dim)) * (hi - lo)
    back = evaluate_inverse(m, evaluate(m, P))
    assert np.all(np.linalg.norm(back - P, axis=1) <= 1e-9 * (1 + np.linalg.norm(P, axis=1)))


@given(random_chains())
def test_sampled_distortion_within_certified_bound(chain):
    m, seed = chain
    s = sampled_bilip(m, _box3(m), n_pairs=10_000, seed=seed)
    slack = math.log2(1 + 1e-6)
    assert s["log2_expansion"] <= m.log2_bound + slack
    assert s["log2_contraction"] <= m.log2_bound + slack


@given(st.integers(0, 2 ** 31 - 1), st.integers(2, 4))
def test_swap_support_property(seed, d):
    rng = np.random.default_rng(seed)
    spec = random_swap_spec(rng, d)
    m = Swap(spec.x, spec.y, spec.r)
    tube = TubeRegion(spec.x, spec.y, spec.r)
    lo, hi = tube.bbox()
    P = points_outside(rng, 10_000, lo - 1, hi + 1, lambda Q: tube.contains(Q, closed=True))
    assert np.max(np.abs(evaluate(m, P) - P)) <= 1e-12


def test_serialization_round_trip(rng):
    m = compose([uniform_scale(2.0, 2), glue([(TubeRegion((0, 0), (1, 0), 0.25), Swap((0, 0), (1, 0), 0.25))]),
                 _as_spin2(), diagonal_scale([1.0, 3.0], [1, 1])])
    back = map_from_dict(m.to_dict())
    P = rng.normal(size=(500, 2))
    assert np.array_equal(evaluate(back, P), evaluate(m, P))
    assert back.log2_bound == m.log2_bound


def _as_spin2():
    return spin_map((5.0, 5.0), (1, 0), (0, 1), (0.0, 1.0), (0.7, 0.0), 1.0)


def test_deserialization_rejects_tampered_bound():
    obj = Swap((0, 0), (1, 0), 0.25).to_dict()
    obj["log2_bound"] = 1.0
    with pytest.raises(BilipError):
        map_from_dict(obj)


def test_swap_as_conjugated_spin_agrees(rng):
    s = Swap((0.2, -1.0, 0.5), (1.0, 0.3, -0.4), 0.4)
    P = s.center + rng.normal(size=(2000, 3))
    assert np.allclose(evaluate(s, P), evaluate(s.as_conjugated_spin(), P), atol=1e-9)
    assert isinstance(s.as_conjugated_spin(), Compose)
