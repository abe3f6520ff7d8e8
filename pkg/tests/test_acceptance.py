"""One test per acceptance criterion, each at its stated tolerance."""

import itertools
import json
import math
import time
from importlib import resources

import numpy as np
import pytest

from _util import (
    h2,
    lightest_event,
    random_agreement_instance,
    random_channel,
    random_five_tuple,
    random_source,
)
from srcrr import cli
from srcrr.gacs_korner import gk_partition
from srcrr.probability import load_pmf
from srcrr.pruning import agreement_point, prune_a, prune_b
from srcrr.region import (
    RateCorner,
    SourceSpec,
    aux_alphabet_bounds,
    binary_region,
    binary_spec,
    discontinuity_demo,
    eval_star_candidate,
    eval_triple_candidate,
    time_share,
)
from srcrr.probability import DistortionMeasure
from srcrr.search import SearchConfig, optimize_star_region, qb_region

SLACK = 1e-9


def builtin(name):
    return load_pmf(resources.files("srcrr").joinpath("data", name))


@pytest.mark.criterion(1, "GK golden test on the two-figure example pmfs")
def test_criterion_01_gk_golden(tmp_path):
    t0 = time.perf_counter()
    docs = []
    for name in ("gk-example-p", "gk-example-q"):
        out = tmp_path / f"{name}.json"
        assert cli.main(["gk", "--input", f"builtin:{name}", "--out", str(out)]) == 0
        docs.append(json.loads(out.read_text()))
    elapsed = time.perf_counter() - t0
    p, q = docs
    assert p["classes"] == 3
    assert sorted(p["class_masses"]) == pytest.approx([0.30, 0.35, 0.35], abs=1e-12)
    assert p["choices"] == 16
    assert sorted(q["class_masses"]) == pytest.approx(sorted(p["class_masses"]), abs=1e-12)
    # library route agrees with the command
    part = gk_partition(builtin("gk_example_p.json"), "X", "Y")
    assert list(part.class_mass) == pytest.approx(p["class_masses"], abs=1e-12)
    assert elapsed < 1.0


@pytest.mark.criterion(2, "binary corner at D=0 equals (0.2864, 0.7780)")
def test_criterion_02_binary_corner():
    (c,) = binary_region(0.05, 0.2, 0.0).corners
    assert abs(c.a - 0.2864) <= 5e-4 and abs(c.b - 0.7780) <= 5e-4
    fr = qb_region(binary_spec(0.05, 0.2, 0.0), SearchConfig(grid=0.02))
    assert any(abs(x.a - 0.2864) <= 5e-4 and abs(x.b - 0.7780) <= 5e-4 for x in fr.corners)


@pytest.mark.criterion(3, "quantize-and-bin optimizer reproduces the closed form at four D")
@pytest.mark.parametrize("D", [0.05, 0.1, 0.2, 0.3])
def test_criterion_03_closed_form_vs_optimizer(D):
    cfg = SearchConfig(grid=0.02, restarts=64, seed=42)
    t0 = time.perf_counter()
    fr = qb_region(binary_spec(0.05, 0.2, D), cfg)
    elapsed = time.perf_counter() - t0
    (want,) = binary_region(0.05, 0.2, D).corners
    assert any(abs(c.a - want.a) <= 5e-3 and abs(c.b - want.b) <= 5e-3 for c in fr.corners)
    # the closed form is the whole region, so no searched corner may beat it
    assert all(c.a >= want.a - SLACK and c.b >= want.b - SLACK for c in fr.corners)
    assert elapsed < 60


def _agree(f1, f2, tol):
    return all(f2.covers(c, tol) for c in f1.corners) and all(f1.covers(c, tol) for c in f2.corners)


@pytest.mark.criterion(4, "constructed source and p^{0.2,0.2} share quantize-and-bin frontiers")
@pytest.mark.parametrize("D", [0.0, 0.1, 0.2])
def test_criterion_04_equivalent_sources(D):
    q = builtin("equivalent_qsuv.json")
    a = SourceSpec(q, DistortionMeasure.hamming(q.alphabet("S")), D)
    b = binary_spec(0.2, 0.2, D)
    cfg = SearchConfig(grid=0.02)
    fa, fb = qb_region(a, cfg), qb_region(b, cfg)
    assert fa.corners and fb.corners
    assert _agree(fa, fb, 5e-3)


@pytest.mark.criterion(5, "discontinuity of the binary region as delta tends to 0")
def test_criterion_05_discontinuity():
    rep = discontinuity_demo(0.05, 0.1, [1e-2, 1e-3, 1e-4])
    lim = h2(0.05 * 0.9 + 0.1 * 0.95) - h2(0.1)
    assert lim > 0.05
    assert all(abs(c.a - lim) <= 1e-9 for c in rep.corners)
    assert abs(rep.limit_corner.a - lim) <= 1e-12
    assert rep.boundary_corner == RateCorner(0.0, 0.0)
    assert rep.gap > 0 and all(g > 0 for g in rep.gaps_r_uv + rep.gaps_sum_rate)
    # stable r_uv gap, sum-rate gap shrinking monotonically towards the same limit
    assert max(rep.gaps_r_uv) - min(rep.gaps_r_uv) <= 1e-12
    assert all(x >= y for x, y in zip(rep.gaps_sum_rate, rep.gaps_sum_rate[1:]))
    assert abs(rep.gaps_sum_rate[-1] - lim) < 1e-3


# -- pruning: every achieved quantity recomputed here from raw arrays ---------------


def _h(m):
    m = m[m > 0]
    return float(-(m * np.log2(m)).sum())


def _hcond(mass, keep, given):
    """H(keep | given) in bits from a dense array; axes are integer tuples."""
    def marg(axes):
        drop = tuple(i for i in range(mass.ndim) if i not in axes)
        return mass.sum(axis=drop)
    return _h(marg(tuple(sorted(keep + given)))) - _h(marg(given))


def _cmi(mass, x, y, z):
    return _hcond(mass, x, z) - _hcond(mass, x, y + z)


def _theory(kind, t, r, delta, eta):
    """Return (achieved, bound) pairs for every property of the chosen method."""
    p, q = t.mass, r.mass
    nS = p.shape[2]
    pS = p.sum(axis=(0, 1, 3, 4))
    mS = pS[pS > 0].min()
    l1 = np.abs(p - q).sum()
    live = q > 0
    kl = float((q[live] * np.log(q[live] / p[live])).sum())
    theta = (2 * eta) ** 0.25
    coef = 2 if kind == "a" else 2 * nS
    hb = theta * math.log2(nS**2 / theta) + coef * (math.exp(eta) - 1) * math.log2(nS)
    d1 = abs(_hcond(q, (2,), (0, 3)) - _hcond(p, (2,), (0, 3)))
    d2 = abs(_hcond(q, (2,), (0, 1, 3, 4)) - _hcond(p, (2,), (0, 1, 3, 4)))
    out = {
        "a": (l1, (2 * delta / (mS - delta)) * (nS if kind == "b" else 1)),
        "a_eta": (l1, 2 * (math.exp(eta) - 1) * (nS if kind == "b" else 1)),
        "c": (kl, eta),
        "d": (d1, hb),
        "e": (d2, hb),
    }
    pab = p.sum(axis=2)
    qab = q.sum(axis=2)
    pa = pab.sum(axis=(2, 3))
    qa = qab.sum(axis=(2, 3))
    if kind == "a":
        worst = 0.0
        E = q.sum(axis=(2, 3, 4)) > 0
        for a1, a2 in itertools.product(*map(range, pa.shape)):
            if not E[a1, a2] or pa[a1, a2] <= 0:
                continue
            for b in itertools.product(*map(range, pab.shape[2:])):
                orig = pab[(a1, a2) + b] / pa[a1, a2]
                now = qab[(a1, a2) + b] / qa[a1, a2]
                worst = max(worst, math.inf if orig == 0 and now > 0 else (now / orig if orig else 0))
        out["b"] = (worst, math.exp(eta))
    else:
        ch = p.sum(axis=(0, 1)) / pS[:, None, None]
        m_b = ch[ch > 1e-15].min()
        bad = 0
        for a1, a2 in itertools.product(*map(range, pa.shape)):
            if pa[a1, a2] <= 1e-15:
                continue
            for b in itertools.product(*map(range, pab.shape[2:])):
                if pab[(a1, a2) + b] / pa[a1, a2] <= delta * m_b:
                    bad += qab[(a1, a2) + b] != 0.0
        out["b"] = (float(bad), 0.0)
        psb_err = np.abs(p.sum(axis=(0, 1)) - q.sum(axis=(0, 1))).max()
        markov = _cmi(q, (0, 1), (3, 4), (2,))
        out["f"] = (max(psb_err, markov), 1e-9)
    return out


@pytest.mark.criterion(6, "pruning bounds on 200 random admissible instances per method")
def test_criterion_06_pruning_suite():
    rng = np.random.default_rng(20240606)
    t0 = time.perf_counter()
    zero_checks = 0
    for kind in ("a", "b"):
        for _ in range(200):
            t = random_five_tuple(rng, max_size=3)
            pS = t.mass.sum(axis=(0, 1, 3, 4))
            if kind == "a":
                eta = float(rng.uniform(0.01, math.log(2) - 0.01))
                E = lightest_event(t, pS.min() * (1 - math.exp(-eta)))
                r, rep = prune_a(t, E, eta)
            else:
                eta = float(rng.uniform(0.01, 0.99))
                r, rep = prune_b(t, pS.min() * (1 - math.exp(-eta)), eta)
                zero_checks += rep.extra["zeroing_checked"]
            assert rep.all_hold, (kind, rep.slack())
            for name, (achieved, bound) in _theory(kind, t, r, rep.delta, eta).items():
                assert achieved <= bound + SLACK, (kind, name, achieved, bound)
    assert zero_checks > 0
    assert time.perf_counter() - t0 < 30


@pytest.mark.criterion(7, "agreement point bound on 500 random instances")
def test_criterion_07_agreement_suite():
    rng = np.random.default_rng(7)
    for _ in range(500):
        px, py, f, g, _ = random_agreement_instance(rng)
        delta = sum(px[i] * py[j] for i in range(len(px)) for j in range(len(py)) if f[i] != g[j])
        assert delta < 1 / 25
        z, _bound = agreement_point(px, py, f, g)
        bound = (1 + math.sqrt(1 - delta - math.sqrt(delta))) / 2
        pf = sum(px[i] for i in range(len(px)) if f[i] == z)
        pg = sum(py[j] for j in range(len(py)) if g[j] == z)
        assert pf >= bound - 1e-12 and pg >= bound - 1e-12


def _lift(k, nS):
    q = np.zeros((k, nS, k))
    for a in range(k):
        q[a, :, a] = 1.0
    return q


@pytest.mark.criterion(8, "structural inclusions between the three regions")
def test_criterion_08_inclusions():
    rng = np.random.default_rng(8)
    for _ in range(100):
        src = random_source(rng, (2, 2, 2))
        k = int(rng.integers(1, 4))
        qa = random_channel(rng, 2, k, 0.2)
        star = eval_star_candidate(src, qa)
        res = eval_triple_candidate(src, qa, _lift(k, 2), _lift(k, 2))
        assert abs(res.corner_ddag.a - star.corner.a) <= 1e-9
        assert abs(res.corner_ddag.b - star.corner.b) <= 1e-9
    for _ in range(100):
        src = random_source(rng, (2, 2, 2))
        ka, kb, kc = (int(x) for x in rng.integers(1, 4, size=3))
        qa = random_channel(rng, 2, ka, 0.2)
        qb = random_channel(rng, 2 * ka, kb, 0.2).reshape(ka, 2, kb)
        qc = random_channel(rng, 2 * ka, kc, 0.2).reshape(ka, 2, kc)
        res = eval_triple_candidate(src, qa, qb, qc)
        assert res.dag_admissible
        assert res.corner_ddag.b <= res.corner_dag.b + 1e-9


@pytest.mark.criterion(9, "time sharing mixes corners and distortions linearly")
def test_criterion_09_time_sharing():
    rng = np.random.default_rng(9)
    for _ in range(100):
        src = random_source(rng, (2, 2, 2), D=1.0)
        c1 = eval_star_candidate(src, random_channel(rng, 2, int(rng.integers(1, 4)), 0.2))
        c2 = eval_star_candidate(src, random_channel(rng, 2, int(rng.integers(1, 4)), 0.2))
        for lam in (0.0, 0.25, 0.5, 1.0):
            t = time_share(c1, c2, lam)
            mix = lambda x, y: lam * x + (1 - lam) * y
            assert abs(t.corner.a - mix(c1.corner.a, c2.corner.a)) <= 1e-9
            assert abs(t.corner.b - mix(c1.corner.b, c2.corner.b)) <= 1e-9
            assert abs(t.achieved_distortion - mix(c1.achieved_distortion, c2.achieved_distortion)) <= 1e-9
            assert t.feasible


@pytest.mark.criterion(10, "scoped out: full outer bound at its cardinality bound, exact equality, block coding")
def test_criterion_10_scope_statement():
    """The outer bound needs auxiliaries of size 68 for a binary source; a grid over
    that is out of reach, so the claim is covered by criteria 6-9 plus a one-sided
    check: on a full-support source no feasible outer-bound corner from small random
    triples beats the searched single-auxiliary frontier by more than 5e-3."""
    kstar, kddag, kdag = aux_alphabet_bounds(2, 2, 2)
    assert (kstar, kddag, kdag) == (4, 68, 49)
    assert math.comb(20 + kddag - 1, kddag - 1) ** 2 > 1e30

    rng = np.random.default_rng(10)
    src = random_source(rng, (2, 2, 2), D=0.2)
    fr = optimize_star_region(src, kstar, SearchConfig(grid=0.05))
    tol = 5e-3
    seen = 0
    for _ in range(300):
        ka = int(rng.integers(1, 4))
        qa = random_channel(rng, 2, ka, 0.3)
        if rng.random() < 0.5:
            mix = rng.random() * 0.2
            qb = (1 - mix) * _lift(ka, 2) + mix * random_channel(rng, 2 * ka, ka).reshape(ka, 2, ka)
            qc = _lift(ka, 2)
        else:
            qb = random_channel(rng, 2 * ka, 2, 0.3).reshape(ka, 2, 2)
            qc = random_channel(rng, 2 * ka, 2, 0.3).reshape(ka, 2, 2)
        res = eval_triple_candidate(src, qa, qb, qc)
        if res.feasible:
            seen += 1
            c = res.corner_ddag
            assert c.b >= fr.envelope(c.a + tol) - tol
    assert seen > 20
