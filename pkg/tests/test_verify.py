import json
import math

import numpy as np
import pytest

from bilipext import BilipError, Identity, Swap, SwapFamily, SwapSpec, audit, check_designated, compose, \
    sampled_bilip, simultaneous_swaps, translation, uniform_scale
from bilipext.verify import sample_pairs


def test_identity_has_no_distortion():
    s = sampled_bilip(Identity(3), ((0, 0, 0), (1, 1, 1)), n_pairs=3000, seed=1)
    assert abs(s["log2_expansion"]) <= 1e-9 and abs(s["log2_contraction"]) <= 1e-9


def test_uniform_scale_two():
    s = sampled_bilip(uniform_scale(2.0, 2), ((0, 0), (1, 1)), n_pairs=3000, seed=1)
    assert s["log2_expansion"] == pytest.approx(1.0, abs=1e-12)
    # Largest log2 of |p - q| / |f(p) - f(q)|: every pair is stretched, so this is -1.
    assert s["log2_contraction"] == pytest.approx(-1.0, abs=1e-12)


def test_unit_swap_sampled_bound():
    m = Swap((0.5, 0), (-0.5, 0), 0.5)
    s = sampled_bilip(m, ((-2, -1), (2, 1)), n_pairs=10_000, seed=2)
    assert max(s["log2_expansion"], s["log2_contraction"]) <= 4 + math.log2(1 + 1e-6)


def _family():
    specs = [SwapSpec((3 * i, 0), (3 * i + 1, 0.5), 0.3) for i in range(5)]
    return specs, simultaneous_swaps(SwapFamily(specs))


def test_designated_residuals():
    specs, m = _family()
    X = np.array([s.x for s in specs])
    Y = np.array([s.y for s in specs])
    assert np.max(check_designated(m, X, Y)) <= 1e-9
    corrupted = translation((1e-6, 0.0))
    assert np.max(check_designated(compose([m, corrupted]), X, Y)) > 1e-9


def test_audit_report_is_deterministic_and_serialisable():
    specs, m = _family()
    X = np.array([s.x for s in specs])
    Y = np.array([s.y for s in specs])
    region = ((-1, -1), (14, 2))
    a = audit(m, region, n_pairs=3000, seed=7, sources=X, images=Y, fixed=[(50.0, 50.0)], map_id="family")
    b = audit(m, region, n_pairs=3000, seed=7, sources=X, images=Y, fixed=[(50.0, 50.0)], map_id="family")
    assert a.to_json() == b.to_json()
    assert a.passed
    assert set(a.checks) == {"distortion", "designated", "support"}
    back = json.loads(a.to_json())
    assert back["certified_log2_bound"] == m.log2_bound and back["passed"]


def test_audit_flags_understated_bound():
    m = Swap((0.5, 0), (-0.5, 0), 0.1)
    m.lip = m.colip = 1.0
    rep = audit(m, ((-1, -1), (1, 1)), n_pairs=5000, seed=1)
    assert not rep.passed and not rep.checks["distortion"]


def test_audit_flags_moved_fixed_points():
    rep = audit(translation((0.1, 0.0)), ((0, 0), (1, 1)), n_pairs=100, fixed=[(0.0, 0.0)])
    assert rep.support_violations == 1 and not rep.passed


def test_sample_pairs_validation():
    with pytest.raises(BilipError):
        sample_pairs(((0, 0), (0, 1)), 10)
    with pytest.raises(BilipError):
        sample_pairs(((0, 0), (1, 1)), 0)
    A, B = sample_pairs(((0, 0), (1, 1)), 999, seed=3, designated=[(0.5, 0.5), (0.2, 0.1)])
    assert len(A) == len(B) and len(A) >= 990
    assert np.all(np.any(A != B, axis=1))


def test_thread_count_does_not_change_results(monkeypatch):
    specs, m = _family()
    region = ((-1, -1), (14, 2))
    base = sampled_bilip(m, region, n_pairs=20_000, seed=5)
    monkeypatch.setenv("BILIP_THREADS", "4")
    assert sampled_bilip(m, region, n_pairs=20_000, seed=5) == base
