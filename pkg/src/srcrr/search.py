"""Frontier search over single-auxiliary channels.

Candidates are channels q(a|s). Small problems are enumerated on a simplex
grid; larger ones use seeded random restarts. Both are followed by a
scalarized coordinate descent on lam*a + (1-lam)*b. The frontier is the
Pareto reduction of every feasible corner visited, so it does not depend
on the order in which candidates are evaluated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from . import kernels
from .gacs_korner import UnionFind
from .probability import POSITIVE, entropy, marginalize
from .region import (
    FEASIBILITY_TOL,
    RegionFrontier,
    SourceSpec,
    pareto_reduce,
    underline_distortion,
)

_CHUNK = 1 << 15
MAX_SOURCE_SYMBOLS = 16


def _default_lambdas() -> tuple[float, ...]:
    return tuple(round(0.05 * i, 10) for i in range(21))


@dataclass(frozen=True)
class SearchConfig:
    grid: float = 0.05
    restarts: int = 64
    seed: int = 42
    lambdas: tuple[float, ...] = field(default_factory=_default_lambdas)
    polish: bool = True
    dedupe_tol: float = 1e-6
    max_grid_cells: int = 8
    max_grid_points: int = 4_000_000
    max_steps: int = 400
    min_step: float = 1e-5
    backend: str | None = None

    def __post_init__(self):
        if not 0 < self.grid <= 1:
            raise ValueError(f"grid step must lie in (0, 1], got {self.grid!r}")
        if self.restarts < 0:
            raise ValueError("restarts must be non-negative")


# -- kernel tables ---------------------------------------------------------------


class _Tables:
    def __init__(self, src: SourceSpec):
        p = src.pmf
        self.pS = np.ascontiguousarray(marginalize(p, "S").mass)
        self.pSU = np.ascontiguousarray(marginalize(p, ("S", "U")).mass)
        self.pSV = np.ascontiguousarray(marginalize(p, ("S", "V")).mass)
        self.hU = entropy(p, "U")
        self.hV = entropy(p, "V")
        self.dmat = np.ascontiguousarray(src.distortion.values, dtype=float)


def component_tables(src: SourceSpec) -> tuple[np.ndarray, np.ndarray]:
    """Per support pattern of an auxiliary column, the GK weights of its classes.

    For a column a whose live source symbols form ``mask``, the classes of
    (A,U) vs (A,V) restricted to a are the components of the (U,V) support
    graph of those symbols. ``W[mask, s, c]`` is p(s, U in class c).
    """
    mass = src.pmf.mass
    nS, nU, nV = mass.shape
    if nS > MAX_SOURCE_SYMBOLS:
        raise ValueError(f"batch search supports at most {MAX_SOURCE_SYMBOLS} source symbols")
    pSU = mass.sum(axis=2)
    comps = []
    for mask in range(1 << nS):
        sel = [s for s in range(nS) if mask >> s & 1]
        edges = mass[sel].sum(axis=0) > POSITIVE if sel else np.zeros((nU, nV), bool)
        uf = UnionFind(nU + nV)
        for u, v in zip(*np.nonzero(edges)):
            uf.union(int(u), nU + int(v))
        label: dict[int, int] = {}
        members: list[list[int]] = []
        for u in range(nU):
            if edges[u].any():
                r = uf.find(u)
                if r not in label:
                    label[r] = len(members)
                    members.append([])
                members[label[r]].append(u)
        comps.append(members)
    C = max(1, max(len(m) for m in comps))
    W = np.zeros((1 << nS, nS, C))
    ncomp = np.zeros(1 << nS, dtype=np.int_)
    for mask, members in enumerate(comps):
        ncomp[mask] = len(members)
        for c, us in enumerate(members):
            W[mask, :, c] = pSU[:, us].sum(axis=1)
    return W, ncomp


class StarEvaluator:
    """Batch evaluator of (I(S;A|U), I(S;A|V), GK-Bayes distortion)."""

    def __init__(self, src: SourceSpec, backend: str | None = None):
        self.t = _Tables(src)
        self.W, self.ncomp = component_tables(src)
        self.impl = kernels.get_backend(backend)

    def __call__(self, Q: np.ndarray):
        t = self.t
        Q = np.ascontiguousarray(Q, dtype=float)
        return self.impl.star_batch(Q, t.pS, t.pSU, t.pSV, t.hU, t.hV, t.dmat, self.W, self.ncomp)


class QBEvaluator:
    """Batch evaluator when the auxiliary is the reconstruction itself."""

    def __init__(self, src: SourceSpec, backend: str | None = None):
        self.t = _Tables(src)
        self.impl = kernels.get_backend(backend)

    def __call__(self, Q: np.ndarray):
        t = self.t
        Q = np.ascontiguousarray(Q, dtype=float)
        return self.impl.qb_batch(Q, t.pS, t.pSU, t.pSV, t.hU, t.hV, t.dmat)


# -- search ----------------------------------------------------------------------


def simplex_grid(k: int, n: int) -> np.ndarray:
    """All probability vectors of length k with entries in multiples of 1/n."""
    rows = []
    for bars in combinations(range(n + k - 1), k - 1):
        edges = (-1,) + bars + (n + k - 1,)
        rows.append([edges[i + 1] - edges[i] - 1 for i in range(k)])
    return np.array(rows, dtype=float) / n


class _Collector:
    """Running Pareto front of feasible corners and the best channel per lambda."""

    def __init__(self, D: float, lambdas):
        self.D = D
        self.lambdas = np.asarray(lambdas, dtype=float)
        self.front = np.empty((0, 2))
        self.best_score = np.full(len(self.lambdas), np.inf)
        self.best_q: list[np.ndarray | None] = [None] * len(self.lambdas)

    def add(self, Q, a, b, d):
        ok = d <= self.D + FEASIBILITY_TOL
        if not ok.any():
            return
        a, b, Qf = a[ok], b[ok], Q[ok]
        pts = np.concatenate([self.front, np.column_stack([a, b])])
        self.front = _pareto_exact(pts)
        scores = self.lambdas[:, None] * a[None, :] + (1 - self.lambdas)[:, None] * b[None, :]
        idx = scores.argmin(axis=1)
        for j, i in enumerate(idx):
            if scores[j, i] < self.best_score[j]:
                self.best_score[j] = scores[j, i]
                self.best_q[j] = Qf[i].copy()


def _pareto_exact(pts: np.ndarray) -> np.ndarray:
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]
    prev = np.concatenate([[np.inf], np.minimum.accumulate(pts[:, 1])[:-1]])
    return pts[pts[:, 1] < prev]


def _grid_batches(nS: int, k: int, step: float):
    rows = simplex_grid(k, int(round(1.0 / step)))
    m = len(rows)
    total = m**nS
    for start in range(0, total, _CHUNK):
        flat = np.arange(start, min(start + _CHUNK, total))
        idx = np.unravel_index(flat, (m,) * nS)
        yield np.stack([rows[i] for i in idx], axis=1)


def _grid_size(nS: int, k: int, step: float) -> int:
    return math.comb(int(round(1.0 / step)) + k - 1, k - 1) ** nS


def _moves(q: np.ndarray, step: float) -> np.ndarray:
    """Neighbours of q that shift up to ``step`` of a row's mass between two entries."""
    nS, k = q.shape
    out = []
    for s in range(nS):
        for i in range(k):
            t = min(step, q[s, i])
            if t <= 0:
                continue
            for j in range(k):
                if j == i:
                    continue
                r = q.copy()
                r[s, i] -= t
                r[s, j] += t
                out.append(r)
    return np.array(out) if out else np.empty((0, nS, k))


def _descend(ev, q, lam, D, penalty, cfg: SearchConfig, coll: _Collector, step: float):
    def score(a, b, d):
        return lam * a + (1 - lam) * b + penalty * np.maximum(d - D, 0.0)

    a, b, d = ev(q[None])
    cur = score(a, b, d)[0]
    for _ in range(cfg.max_steps):
        if step < cfg.min_step:
            break
        M = _moves(q, step)
        if len(M) == 0:
            break
        a, b, d = ev(M)
        coll.add(M, a, b, d)
        sc = score(a, b, d)
        i = int(np.argmin(sc))
        if sc[i] < cur - 1e-13:
            q, cur = M[i], sc[i]
        else:
            step /= 2
    return q


def _search(ev, nS: int, k: int, src: SourceSpec, cfg: SearchConfig, anchors) -> RegionFrontier:
    D = src.D
    dlow = underline_distortion(src)
    if D < dlow - FEASIBILITY_TOL:
        return RegionFrontier((), D=D, infeasible=True, underline_D=dlow)
    coll = _Collector(D, cfg.lambdas)
    A = np.array(anchors)
    coll.add(A, *ev(A))
    penalty = 100.0 / src.dbar

    if nS * k <= cfg.max_grid_cells and _grid_size(nS, k, cfg.grid) <= cfg.max_grid_points:
        for Q in _grid_batches(nS, k, cfg.grid):
            coll.add(Q, *ev(Q))
        if cfg.polish:
            for j, lam in enumerate(coll.lambdas):
                if coll.best_q[j] is not None:
                    _descend(ev, coll.best_q[j], lam, D, penalty, cfg, coll, cfg.grid / 2)
    else:
        for r in range(cfg.restarts):
            rng = np.random.default_rng([cfg.seed, r])
            q = rng.dirichlet(np.ones(k), size=nS)
            for lam in coll.lambdas:
                q = _descend(ev, q, lam, D, penalty, cfg, coll, 0.25)
        if cfg.polish:
            for j, lam in enumerate(coll.lambdas):
                if coll.best_q[j] is not None:
                    _descend(ev, coll.best_q[j], lam, D, penalty, cfg, coll, 0.05)

    return RegionFrontier.from_points(coll.front, tol=cfg.dedupe_tol, D=D, underline_D=dlow)


def _bayes_map(src: SourceSpec) -> np.ndarray:
    return src.distortion.values.argmin(axis=1)


def star_anchors(src: SourceSpec, k: int) -> list[np.ndarray]:
    nS = src.sizes[0]
    out = []
    const = np.zeros((nS, k))
    const[:, 0] = 1.0
    out.append(const)
    if k >= nS:
        ident = np.zeros((nS, k))
        ident[np.arange(nS), np.arange(nS)] = 1.0
        out.append(ident)
    phi = _bayes_map(src)
    if phi.max() < k:
        det = np.zeros((nS, k))
        det[np.arange(nS), phi] = 1.0
        out.append(det)
    return out


def qb_anchors(src: SourceSpec) -> list[np.ndarray]:
    nS, nH = src.distortion.values.shape
    out = []
    det = np.zeros((nS, nH))
    det[np.arange(nS), _bayes_map(src)] = 1.0
    out.append(det)
    for h in range(nH):
        c = np.zeros((nS, nH))
        c[:, h] = 1.0
        out.append(c)
    return out


def optimize_star_region(src: SourceSpec, k: int | None = None, cfg: SearchConfig | None = None) -> RegionFrontier:
    """Inner approximation of the single-auxiliary region with |A| = k."""
    cfg = cfg or SearchConfig()
    nS = src.sizes[0]
    k = nS + 2 if k is None else int(k)
    if k < 1:
        raise ValueError("auxiliary alphabet size must be at least 1")
    ev = StarEvaluator(src, cfg.backend)
    return _search(ev, nS, k, src, cfg, star_anchors(src, k))


def qb_region(src: SourceSpec, cfg: SearchConfig | None = None) -> RegionFrontier:
    """Inner approximation of the quantize-and-bin region."""
    cfg = cfg or SearchConfig()
    nS, nH = src.distortion.values.shape
    ev = QBEvaluator(src, cfg.backend)
    return _search(ev, nS, nH, src, cfg, qb_anchors(src))


def sweep(fn, src: SourceSpec, Ds, *args, **kw) -> list[RegionFrontier]:
    return [fn(src.with_D(D), *args, **kw) for D in Ds]


__all__ = [
    "SearchConfig",
    "StarEvaluator",
    "QBEvaluator",
    "component_tables",
    "simplex_grid",
    "optimize_star_region",
    "qb_region",
    "star_anchors",
    "qb_anchors",
    "sweep",
    "pareto_reduce",
]
