import math
import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _util import random_channel, random_source
from srcrr import kernels
from srcrr.probability import Alphabet, DistortionMeasure, JointPmf
from srcrr.region import (
    RateCorner,
    SourceSpec,
    binary_region,
    binary_spec,
    eval_qb_candidate,
    eval_star_candidate,
    eval_triple_candidate,
)
from srcrr.search import (
    QBEvaluator,
    SearchConfig,
    StarEvaluator,
    component_tables,
    optimize_star_region,
    qb_region,
    simplex_grid,
)

try:
    kernels.get_backend("cython")
    BACKENDS = ["python", "cython"]
except ImportError:
    BACKENDS = ["python"]
FAST = SearchConfig(grid=0.1, restarts=4, polish=False)


def test_compiled_backend_is_built():
    assert "cython" in BACKENDS
    forced = os.environ.get("SRCRR_PURE_PYTHON", "") in ("1", "true", "yes")
    assert kernels.BACKEND == ("python" if forced else "cython")


@pytest.mark.parametrize("backend", BACKENDS)
@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), nS=st.integers(1, 3), k=st.integers(1, 4))
def test_star_kernel_matches_general_path(backend, seed, nS, k):
    rng = np.random.default_rng(seed)
    src = random_source(rng, (nS, 2, 3), sparsity=0.4)
    ev = StarEvaluator(src, backend)
    Q = np.stack([random_channel(rng, nS, k, 0.4) for _ in range(5)])
    a, b, d = ev(Q)
    for i, q in enumerate(Q):
        c = eval_star_candidate(src, q)
        assert a[i] == pytest.approx(c.corner.a, abs=1e-10)
        assert b[i] == pytest.approx(c.corner.b, abs=1e-10)
        assert d[i] == pytest.approx(c.achieved_distortion, abs=1e-12)


@pytest.mark.parametrize("backend", BACKENDS)
@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_qb_kernel_matches_general_path(backend, seed):
    rng = np.random.default_rng(seed)
    src = random_source(rng, (3, 2, 2), sparsity=0.3)
    ev = QBEvaluator(src, backend)
    Q = np.stack([random_channel(rng, 3, 3, 0.3) for _ in range(5)])
    a, b, d = ev(Q)
    for i, q in enumerate(Q):
        corner, dist = eval_qb_candidate(src, q)
        assert a[i] == pytest.approx(corner.a, abs=1e-10)
        assert b[i] == pytest.approx(corner.b, abs=1e-10)
        assert d[i] == pytest.approx(dist, abs=1e-12)


def test_backends_agree_on_a_large_batch():
    if len(BACKENDS) < 2:
        pytest.skip("compiled backend not built")
    rng = np.random.default_rng(1)
    src = random_source(rng, (3, 3, 3), sparsity=0.5)
    Q = np.stack([random_channel(rng, 3, 4, 0.3) for _ in range(2000)])
    out = [StarEvaluator(src, be)(Q) for be in BACKENDS]
    for x, y in zip(*out):
        np.testing.assert_allclose(x, y, atol=1e-12)


def test_component_tables_full_support():
    src = binary_spec(0.1, 0.2, 0.1)
    W, ncomp = component_tables(src)
    assert list(ncomp) == [0, 1, 1, 1]
    np.testing.assert_allclose(W[3, :, 0], [0.5, 0.5])


def test_simplex_grid():
    g = simplex_grid(3, 4)
    assert len(g) == math.comb(6, 2)
    np.testing.assert_allclose(g.sum(axis=1), 1.0)
    assert len({tuple(r) for r in g}) == len(g)


def test_large_distortion_gives_origin():
    src = binary_spec(0.1, 0.3, 1.0)
    fr = optimize_star_region(src, 2, FAST)
    assert [(c.a, c.b) for c in fr.corners] == [(0.0, 0.0)]
    fr = qb_region(src.with_D(0.6), FAST)
    assert [(c.a, c.b) for c in fr.corners] == [(0.0, 0.0)]


def test_receivers_know_source():
    S = Alphabet.range("S", 2)
    m = np.zeros((2, 2, 2))
    m[0, 0, 0] = m[1, 1, 1] = 0.5
    p = JointPmf([S, Alphabet.range("U", 2), Alphabet.range("V", 2)], m)
    src = SourceSpec(p, DistortionMeasure.hamming(S), 0.0)
    fr = optimize_star_region(src, None, FAST)
    assert [(c.a, c.b) for c in fr.corners] == [(0.0, 0.0)]


def test_infeasible_marker():
    S = Alphabet.range("S", 2)
    d = DistortionMeasure(S, Alphabet.range("Shat", 1), [[0.5], [1.0]])
    p = JointPmf([S, Alphabet.range("U", 1), Alphabet.range("V", 1)], np.full((2, 1, 1), 0.5))
    src = SourceSpec(p, d, 0.5)
    fr = optimize_star_region(src, 2, FAST)
    assert fr.infeasible and fr.corners == ()
    assert fr.underline_D == pytest.approx(0.75)
    assert not qb_region(src.with_D(0.75), FAST).infeasible


def test_binary_star_matches_closed_form():
    for D in (0.1, 0.2):
        fr = optimize_star_region(binary_spec(0.05, 0.2, D))
        (want,) = binary_region(0.05, 0.2, D).corners
        assert any(abs(c.a - want.a) < 5e-3 and abs(c.b - want.b) < 5e-3 for c in fr.corners)
        assert all(c.a >= want.a - 1e-9 or c.b >= want.b - 1e-9 for c in fr.corners)


def test_seed_determinism_random_restarts():
    rng = np.random.default_rng(5)
    src = random_source(rng, (3, 2, 2), D=0.4)
    cfg = SearchConfig(restarts=3, seed=7, max_steps=40)
    a = optimize_star_region(src, 3, cfg)
    b = optimize_star_region(src, 3, cfg)
    assert a.corners == b.corners
    assert len(a.corners) >= 1


def test_monotone_in_distortion():
    rng = np.random.default_rng(8)
    src = random_source(rng, (2, 2, 2))
    fronts = [optimize_star_region(src.with_D(D), 3, FAST) for D in (0.1, 0.2, 0.3, 0.5)]
    for lo, hi in zip(fronts, fronts[1:]):
        for c in lo.corners:
            assert any(h.dominates(c, 1e-12) for h in hi.corners)


def test_smaller_aux_never_improves():
    rng = np.random.default_rng(9)
    src = random_source(rng, (2, 2, 2), D=0.25)
    cfg = SearchConfig(grid=0.1, polish=False)
    fronts = {k: optimize_star_region(src, k, cfg) for k in (1, 2, 3, 4)}
    for k in (1, 2, 3):
        for c in fronts[k].corners:
            assert any(h.dominates(c, 1e-12) for h in fronts[k + 1].corners)


def test_qb_candidates_are_star_candidates():
    rng = np.random.default_rng(10)
    for _ in range(40):
        src = random_source(rng, (2, 2, 2), D=0.25)
        q = random_channel(rng, 2, 2, 0.3)
        corner, dist = eval_qb_candidate(src, q)
        if dist > src.D:
            continue
        star = eval_star_candidate(src, q)
        assert star.achieved_distortion <= src.D + 1e-12
        assert star.corner.a == pytest.approx(corner.a, abs=1e-12)
        assert star.corner.b == pytest.approx(corner.b, abs=1e-12)


def lift(k, nS):
    q = np.zeros((k, nS, k))
    for a in range(k):
        q[a, :, a] = 1.0
    return q


def test_case_a_triples_do_not_beat_star_frontier():
    """On a full-support source, feasible outer-bound corners stay above the searched frontier."""
    rng = np.random.default_rng(12)
    src = random_source(rng, (2, 2, 2), D=0.2)
    fr = optimize_star_region(src, 4, SearchConfig(grid=0.05))
    tol = 5e-3
    checked = 0
    for _ in range(300):
        ka = int(rng.integers(1, 4))
        qa = random_channel(rng, 2, ka, 0.3)
        if rng.random() < 0.5:
            qb, qc = lift(ka, 2), lift(ka, 2)
            mix = rng.random() * 0.2
            qb = (1 - mix) * qb + mix * random_channel(rng, 2 * ka, ka).reshape(ka, 2, ka)
        else:
            qb = random_channel(rng, 2 * ka, 2, 0.3).reshape(ka, 2, 2)
            qc = random_channel(rng, 2 * ka, 2, 0.3).reshape(ka, 2, 2)
        res = eval_triple_candidate(src, qa, qb, qc)
        if not res.feasible:
            continue
        checked += 1
        c = res.corner_ddag
        assert fr.covers(RateCorner(c.a + tol, c.b + tol))
    assert checked > 20
