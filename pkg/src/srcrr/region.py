"""Rate regions for successive refinement with common receiver reconstructions.

A source is a pmf over (S, U, V): the encoder observes S, the receiver with
only the common message observes U, and the receiver with both messages
observes V. A rate corner (a, b) stands for the quadrant
``{r_uv >= a, r_uv + r_v >= b}``; regions are unions of such quadrants.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import DegenerateInputError, PmfParseError, PreconditionError
from .gacs_korner import SINK, GKPartition, gk_partition
from .probability import (
    INFO_TOL,
    POSITIVE,
    Alphabet,
    Channel,
    DistortionMeasure,
    JointPmf,
    binary_convolution,
    binary_entropy,
    check_markov,
    compose,
    conditional_entropy,
    conditional_mutual_information,
    entropy,
    marginalize,
    support_product_check,
)

FEASIBILITY_TOL = 1e-12
SOURCE_VARS = ("S", "U", "V")


@dataclass(frozen=True)
class SourceSpec:
    pmf: JointPmf
    distortion: DistortionMeasure
    D: float

    def __post_init__(self):
        if set(self.pmf.names) != set(SOURCE_VARS) or len(self.pmf.names) != 3:
            raise PmfParseError(f"source pmf must be over exactly {SOURCE_VARS}, got {self.pmf.names}")
        if self.pmf.names != SOURCE_VARS:
            object.__setattr__(self, "pmf", marginalize(self.pmf, SOURCE_VARS))
        if self.distortion.source.symbols != self.pmf.alphabet("S").symbols:
            raise PmfParseError("distortion measure source alphabet does not match S")
        if not (math.isfinite(self.D) and self.D >= 0):
            raise PreconditionError(f"target distortion must be a finite non-negative number, got {self.D!r}")

    @property
    def sizes(self) -> tuple[int, int, int]:
        return self.pmf.shape

    @property
    def dbar(self) -> float:
        return self.distortion.dbar

    def with_D(self, D: float) -> "SourceSpec":
        return replace(self, D=float(D))


def binary_source(rho: float, delta: float) -> JointPmf:
    """Uniform binary S, U = S through BSC(rho), V = U through BSC(delta)."""
    for x in (rho, delta):
        if not 0.0 <= x <= 1.0:
            raise PreconditionError(f"crossover {x!r} outside [0, 1]")
    bsc = lambda e: np.array([[1 - e, e], [e, 1 - e]])
    mass = 0.5 * np.einsum("su,uv->suv", bsc(rho), bsc(delta))
    bits = ("0", "1")
    return JointPmf([Alphabet(n, bits) for n in SOURCE_VARS], mass)


def binary_spec(rho: float, delta: float, D: float) -> SourceSpec:
    pmf = binary_source(rho, delta)
    return SourceSpec(pmf, DistortionMeasure.hamming(pmf.alphabet("S")), D)


def underline_distortion(src: SourceSpec) -> float:
    """Smallest distortion reachable by a deterministic map of S alone."""
    pS = marginalize(src.pmf, "S").mass
    return float(pS @ src.distortion.values.min(axis=1))


# -- corners and frontiers -------------------------------------------------------


@dataclass(frozen=True, order=True)
class RateCorner:
    """Lower bounds ``a`` on r_uv and ``b`` on r_uv + r_v, in bits per symbol."""

    a: float
    b: float

    def dominates(self, other: "RateCorner", tol: float = 0.0) -> bool:
        return self.a <= other.a + tol and self.b <= other.b + tol


def pareto_reduce(points, tol: float = 1e-6) -> list[tuple[float, float]]:
    """Minimal (a, b) pairs sorted by ``a``; points within ``tol`` are merged."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        return []
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]
    front: list[tuple[float, float]] = []
    best_b = math.inf
    for a, b in pts:
        if b < best_b:
            front.append((float(a), float(b)))
            best_b = b
    if tol <= 0:
        return front
    merged: list[tuple[float, float]] = []
    for a, b in front:
        if merged and b >= merged[-1][1] - tol:
            continue
        while merged and a <= merged[-1][0] + tol:
            merged.pop()
        merged.append((a, b))
    return merged


@dataclass(frozen=True)
class RegionFrontier:
    """Pareto corners of a union-of-quadrants rate region."""

    corners: tuple[RateCorner, ...]
    D: float | None = None
    infeasible: bool = False
    underline_D: float | None = None

    @classmethod
    def from_points(cls, points, *, tol: float = 1e-6, **kw) -> "RegionFrontier":
        return cls(tuple(RateCorner(a, b) for a, b in pareto_reduce(points, tol)), **kw)

    def __len__(self):
        return len(self.corners)

    def envelope(self, x: float) -> float:
        """Smallest sum-rate bound reachable with r_uv bound <= x under time sharing."""
        if not self.corners:
            return math.inf
        pts = sorted((c.a, c.b) for c in self.corners)
        if x < pts[0][0]:
            return math.inf
        hull: list[tuple[float, float]] = []
        for p in pts:
            while len(hull) >= 2:
                (x1, y1), (x2, y2) = hull[-2], hull[-1]
                if (x2 - x1) * (p[1] - y1) - (y2 - y1) * (p[0] - x1) <= 0:
                    hull.pop()
                else:
                    break
            hull.append(p)
        best = math.inf
        for (x1, y1), (x2, y2) in zip(hull, hull[1:] + [hull[-1]]):
            if x1 <= x <= x2 and x2 > x1:
                best = min(best, y1 + (y2 - y1) * (x - x1) / (x2 - x1))
            if x1 <= x:
                best = min(best, y1)
        return best

    def covers(self, corner: RateCorner, tol: float = 0.0) -> bool:
        """True iff ``corner``'s quadrant lies in the convex hull of the region (within tol)."""
        return corner.b >= self.envelope(corner.a + tol) - tol

    def best(self) -> RateCorner | None:
        """Corner with the smallest r_uv bound (ties: smallest sum-rate bound)."""
        return self.corners[0] if self.corners else None


def write_frontier_csv(path, frontiers: Sequence[RegionFrontier]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["D", "corner_index", "r_uv_min", "sum_rate_min"])
        for fr in frontiers:
            for i, c in enumerate(fr.corners):
                w.writerow([format(fr.D, ".9g"), i, format(c.a, ".9g"), format(c.b, ".9g")])


# -- candidate evaluation --------------------------------------------------------


@dataclass(frozen=True)
class AuxCandidate:
    """A feasible-or-not auxiliary choice with its Bayes reconstruction.

    ``recon`` gives the reconstruction index for every flat symbol of the
    right group of ``partition`` (e.g. (a, v) pairs); it is constant on
    each GK class, so it is a function of the common randomness.
    """

    src: SourceSpec = field(repr=False)
    channels: tuple[np.ndarray, ...]
    joint: JointPmf = field(repr=False)
    partition: GKPartition = field(repr=False)
    recon: np.ndarray
    achieved_distortion: float
    corner: RateCorner

    @property
    def feasible(self) -> bool:
        return self.achieved_distortion <= self.src.D + FEASIBILITY_TOL

    def recon_by_class(self) -> dict[int, int]:
        out = {}
        for c in self.partition.class_ids:
            symbols = np.flatnonzero(self.partition.class_of_right == c)
            out[c] = int(self.recon[symbols[0]])
        return out


def _aux_alphabet(name: str, k: int) -> Alphabet:
    return Alphabet.range(name, k)


def _rows(ch, shape_prefix: tuple[int, ...], what: str) -> np.ndarray:
    rows = ch.rows if isinstance(ch, Channel) else np.asarray(ch, dtype=float)
    if rows.shape[:-1] != shape_prefix:
        raise PmfParseError(f"{what} has shape {rows.shape}, expected {shape_prefix} + (k,)")
    return rows


def _right_flat(joint: JointPmf, part: GKPartition) -> np.ndarray:
    idx = np.indices(joint.shape)
    return np.ravel_multi_index(tuple(idx[joint.axis(n)] for n in part.right_vars), part.right_shape)


def _s_index(joint: JointPmf) -> np.ndarray:
    return np.indices(joint.shape)[joint.axis("S")]


def _expected_distortion(joint: JointPmf, part: GKPartition, recon: np.ndarray, dmat) -> float:
    shat = recon[_right_flat(joint, part)]
    return float((joint.mass * dmat[_s_index(joint), shat]).sum())


def bayes_recon(joint: JointPmf, part: GKPartition, dmat: np.ndarray) -> np.ndarray:
    """Per-class minimum expected distortion reconstruction over right symbols.

    Ties go to the smallest reconstruction index. Right symbols outside the
    support get the reconstruction that is best for S unconditionally.
    """
    labels = part.class_of_right[_right_flat(joint, part)]
    s_axis = joint.axis("S")
    other = tuple(i for i in range(len(joint.shape)) if i != s_axis)
    pS = joint.mass.sum(axis=other)
    fallback = int(np.argmin(pS @ dmat))
    by_class = {}
    for c in part.class_ids:
        w = np.where(labels == c, joint.mass, 0.0).sum(axis=other)
        by_class[c] = int(np.argmin(w @ dmat))
    recon = np.array(
        [fallback if c == SINK else by_class[int(c)] for c in part.class_of_right], dtype=np.int64
    )
    return recon


def _compose_aux(src: SourceSpec, qAS) -> tuple[JointPmf, np.ndarray]:
    nS = src.sizes[0]
    rows = _rows(qAS, (nS,), "q(a|s)")
    ch = Channel((src.pmf.alphabet("S"),), _aux_alphabet("A", rows.shape[-1]), rows)
    return compose(src.pmf, ch, "S"), rows


def eval_star_candidate(src: SourceSpec, qAS) -> AuxCandidate:
    """Evaluate one auxiliary channel q(a|s) on the general (tensor) path.

    Builds q_ASUV, partitions it between (A,U) and (A,V), picks the Bayes
    reconstruction per GK class and returns the corner (I(S;A|U), I(S;A|V)).
    """
    joint, rows = _compose_aux(src, qAS)
    part = gk_partition(joint, ("A", "U"), ("A", "V"))
    dmat = src.distortion.values
    recon = bayes_recon(joint, part, dmat)
    corner = RateCorner(
        conditional_mutual_information(joint, "S", "A", "U"),
        conditional_mutual_information(joint, "S", "A", "V"),
    )
    return AuxCandidate(
        src, (rows,), joint, part, recon, _expected_distortion(joint, part, recon, dmat), corner
    )


def eval_qb_candidate(src: SourceSpec, qShatS) -> tuple[RateCorner, float]:
    """Quantize-and-bin corner (I(S;Shat|U), I(S;Shat|V)) and E d(S, Shat)."""
    nS = src.sizes[0]
    rows = _rows(qShatS, (nS,), "q(shat|s)")
    if rows.shape[-1] != len(src.distortion.recon):
        raise PmfParseError("quantize-and-bin channel must output the reconstruction alphabet")
    recon = src.distortion.recon.renamed("Shat")
    joint = compose(src.pmf, Channel((src.pmf.alphabet("S"),), recon, rows), "S")
    corner = RateCorner(
        conditional_mutual_information(joint, "S", "Shat", "U"),
        conditional_mutual_information(joint, "S", "Shat", "V"),
    )
    pS = marginalize(src.pmf, "S").mass
    dist = float(np.einsum("s,sa,sa->", pS, rows, src.distortion.values))
    return corner, dist


@dataclass(frozen=True)
class TripleResult:
    corner_ddag: RateCorner
    corner_dag: RateCorner
    candidate: AuxCandidate
    dag_admissible: bool

    @property
    def feasible(self) -> bool:
        return self.candidate.feasible


def eval_triple_candidate(src: SourceSpec, qAS, qBAS, qCAS) -> TripleResult:
    """Evaluate a triple (q(a|s), q(b|a,s), q(c|a,s)).

    ``corner_ddag`` uses the outer-bound rates, ``corner_dag`` the inner-bound
    rates; ``dag_admissible`` reports whether B - (A,S) - C holds.
    """
    nS = src.sizes[0]
    joint, rows_a = _compose_aux(src, qAS)
    ka = rows_a.shape[-1]
    rows_b = _rows(qBAS, (ka, nS), "q(b|a,s)")
    rows_c = _rows(qCAS, (ka, nS), "q(c|a,s)")
    ins = (joint.alphabet("A"), joint.alphabet("S"))
    joint = compose(joint, Channel(ins, _aux_alphabet("B", rows_b.shape[-1]), rows_b), ("A", "S"))
    joint = compose(joint, Channel(ins, _aux_alphabet("C", rows_c.shape[-1]), rows_c), ("A", "S"))
    joint = marginalize(joint, ("A", "B", "C", "S", "U", "V"))

    cmi = lambda y, z: conditional_mutual_information(joint, "S", y, z)
    r_uv = cmi(("A", "B"), "U")
    ddag = RateCorner(r_uv, cmi("B", ("A", "C", "U", "V")) + cmi(("A", "C"), "V"))
    dag = RateCorner(
        r_uv,
        max(cmi("A", "U"), cmi("A", "V")) + cmi("B", ("A", "U")) + cmi("C", ("A", "V")),
    )
    part = gk_partition(joint, ("A", "B", "U"), ("A", "C", "V"))
    dmat = src.distortion.values
    recon = bayes_recon(joint, part, dmat)
    cand = AuxCandidate(
        src,
        (rows_a, rows_b, rows_c),
        joint,
        part,
        recon,
        _expected_distortion(joint, part, recon, dmat),
        ddag,
    )
    admissible = check_markov(joint, "B", ("A", "S"), "C")
    return TripleResult(ddag, dag, cand, admissible)


def _same_source(a: SourceSpec, b: SourceSpec) -> bool:
    return (
        a.pmf.variables == b.pmf.variables
        and np.array_equal(a.pmf.mass, b.pmf.mass)
        and np.array_equal(a.distortion.values, b.distortion.values)
        and a.D == b.D
    )


def time_share(c1: AuxCandidate, c2: AuxCandidate, lam: float) -> AuxCandidate:
    """Mix two single-auxiliary candidates on the disjoint union of their alphabets.

    With probability ``lam`` the auxiliary is drawn from ``c1``'s channel,
    otherwise from ``c2``'s; each half keeps its own reconstruction map.
    """
    if not 0.0 <= lam <= 1.0:
        raise PreconditionError(f"time-sharing weight {lam!r} outside [0, 1]")
    if len(c1.channels) != 1 or len(c2.channels) != 1:
        raise PreconditionError("time sharing is defined for single-auxiliary candidates")
    if not _same_source(c1.src, c2.src):
        raise PreconditionError("candidates are over different sources")
    src = c1.src
    q1, q2 = c1.channels[0], c2.channels[0]
    k1 = q1.shape[1]
    qt = np.concatenate([lam * q1, (1.0 - lam) * q2], axis=1)
    joint, _ = _compose_aux(src, qt)
    part = gk_partition(joint, ("A", "U"), ("A", "V"))
    nv = src.sizes[2]
    recon = np.concatenate([c1.recon[: k1 * nv], c2.recon[: q2.shape[1] * nv]])
    dmat = src.distortion.values
    corner = RateCorner(
        conditional_mutual_information(joint, "S", "A", "U"),
        conditional_mutual_information(joint, "S", "A", "V"),
    )
    return AuxCandidate(
        src, (qt,), joint, part, recon, _expected_distortion(joint, part, recon, dmat), corner
    )


# -- classification --------------------------------------------------------------


@dataclass(frozen=True)
class CaseReport:
    cases: dict[str, bool]
    measures: dict[str, float | bool]

    def to_dict(self) -> dict:
        return {"cases": dict(self.cases), "measures": dict(self.measures)}


def classify_source(src: SourceSpec | JointPmf, tol: float = INFO_TOL) -> CaseReport:
    """Which of the solved source classes a pmf over (S, U, V) falls into.

    Keys A..F are the six classes where the single-auxiliary region is tight;
    A', B', C' are the classes where quantize-and-bin is optimal.
    """
    p = src.pmf if isinstance(src, SourceSpec) else SourceSpec(
        src, DistortionMeasure.hamming(src.alphabet("S")), 0.0
    ).pmf
    i_su_v = conditional_mutual_information(p, "S", "U", "V")
    i_sv_u = conditional_mutual_information(p, "S", "V", "U")
    h_s_u = conditional_entropy(p, "S", "U")
    h_s_v = conditional_entropy(p, "S", "V")
    h_u_v = conditional_entropy(p, "U", "V")
    h_u_s = conditional_entropy(p, "U", "S")
    h_v_s = conditional_entropy(p, "V", "S")
    prod_s_uv = support_product_check(p, "S", ("U", "V"))
    prod_s_u = support_product_check(p, "S", "U")
    prod_u_v = support_product_check(p, "U", "V")
    gk_uv = gk_partition(p, "U", "V")
    h_gk = max(entropy_of_masses(gk_uv.class_mass), 0.0)

    markov_svu = i_su_v <= tol
    markov_suv = i_sv_u <= tol
    cases = {
        "A": prod_s_uv,
        "B": markov_svu,
        "C": markov_suv and prod_s_u,
        "D": h_s_u <= tol,
        "E": markov_suv and prod_u_v,
        "F": min(h_u_s, h_v_s) <= tol,
        "A_prime": prod_s_uv and h_gk <= tol,
        "B_prime": markov_suv and prod_u_v,
        "C_prime": min(h_u_s, h_v_s) <= tol,
        "H_S_given_V_zero": h_s_v <= tol,
        "H_U_given_V_zero": h_u_v <= tol,
    }
    measures = {
        "I(S;U|V)": i_su_v,
        "I(S;V|U)": i_sv_u,
        "H(S|U)": h_s_u,
        "H(S|V)": h_s_v,
        "H(U|V)": h_u_v,
        "H(U|S)": h_u_s,
        "H(V|S)": h_v_s,
        "H(GK_UV)": h_gk,
        "supp_SUV_is_S_x_UV": prod_s_uv,
        "supp_SU_is_S_x_U": prod_s_u,
        "supp_UV_is_U_x_V": prod_u_v,
    }
    return CaseReport(cases, measures)


def entropy_of_masses(masses) -> float:
    m = np.asarray(masses, dtype=float)
    m = m[m > 0]
    return float(-(m * np.log2(m)).sum())


# -- closed form for the binary family ------------------------------------------


def binary_region(rho: float, delta: float, D: float) -> RegionFrontier:
    """Closed-form region of the binary family under Hamming distortion."""
    if not 0.0 < rho < 1.0:
        raise PreconditionError(f"rho must lie in (0, 1), got {rho!r}")
    if delta in (0.0, 1.0):
        raise PreconditionError(
            "closed form not applicable for delta in {0, 1}; the side informations coincide up to relabelling"
        )
    if not 0.0 < delta < 1.0:
        raise PreconditionError(f"delta must lie in (0, 1), got {delta!r}")
    if D < 0:
        raise PreconditionError(f"distortion must be non-negative, got {D!r}")
    if D >= 0.5:
        corner = RateCorner(0.0, 0.0)
    else:
        hD = binary_entropy(D)
        corner = RateCorner(
            binary_entropy(binary_convolution(rho, D)) - hD,
            binary_entropy(binary_convolution(binary_convolution(rho, delta), D)) - hD,
        )
    return RegionFrontier((corner,), D=D, underline_D=0.0)


@dataclass(frozen=True)
class DemoReport:
    rho: float
    D: float
    side: str
    deltas: tuple[float, ...]
    corners: tuple[RateCorner, ...]
    limit_corner: RateCorner
    boundary_corner: RateCorner
    boundary_distortion: float
    gaps_r_uv: tuple[float, ...]
    gaps_sum_rate: tuple[float, ...]
    gap: float

    @property
    def discontinuous(self) -> bool:
        return self.gap > 0

    def to_dict(self) -> dict:
        return {
            "rho": self.rho,
            "D": self.D,
            "side": self.side,
            "deltas": list(self.deltas),
            "corners": [[c.a, c.b] for c in self.corners],
            "limit_corner": [self.limit_corner.a, self.limit_corner.b],
            "boundary_corner": [self.boundary_corner.a, self.boundary_corner.b],
            "boundary_distortion": self.boundary_distortion,
            "gaps_r_uv": list(self.gaps_r_uv),
            "gaps_sum_rate": list(self.gaps_sum_rate),
            "gap": self.gap,
            "discontinuous": self.discontinuous,
        }


def discontinuity_demo(rho: float, D: float, deltas: Sequence[float], side: str = "zero") -> DemoReport:
    """Contrast the binary region as delta approaches 0 (or 1) with the region at the endpoint.

    At the endpoint the receivers share U up to relabelling, so the constant
    auxiliary with the GK-Bayes reconstruction (which reproduces U) already
    meets distortion rho < D at zero rate.
    """
    if not 0.0 < rho < D < 0.5:
        raise PreconditionError(f"need 0 < rho < D < 1/2, got rho={rho!r}, D={D!r}")
    if side not in ("zero", "one"):
        raise PreconditionError(f"side must be 'zero' or 'one', got {side!r}")
    deltas = tuple(float(d) for d in deltas)
    corners = tuple(binary_region(rho, d, D).best() for d in deltas)
    lim = binary_entropy(binary_convolution(rho, D)) - binary_entropy(D)
    limit_corner = RateCorner(lim, lim)

    endpoint = 0.0 if side == "zero" else 1.0
    spec = binary_spec(rho, endpoint, D)
    constant = eval_star_candidate(spec, np.ones((2, 1)))
    if not constant.feasible:
        raise DegenerateInputError("constant auxiliary unexpectedly infeasible at the endpoint")
    boundary = constant.corner
    return DemoReport(
        rho=rho,
        D=D,
        side=side,
        deltas=deltas,
        corners=corners,
        limit_corner=limit_corner,
        boundary_corner=boundary,
        boundary_distortion=constant.achieved_distortion,
        gaps_r_uv=tuple(c.a - boundary.a for c in corners),
        gaps_sum_rate=tuple(c.b - boundary.b for c in corners),
        gap=limit_corner.a - boundary.a,
    )


def aux_alphabet_bounds(size_s: int, size_shat: int, size_u: int) -> tuple[int, int, int]:
    """Auxiliary alphabet sizes beyond which the three regions stop growing."""
    if min(size_s, size_shat, size_u) < 1:
        raise PreconditionError("alphabet sizes must be positive")
    tail = size_shat**size_u
    return (
        size_s + 2,
        size_s * (size_s + 6) * tail + 4,
        size_s * (size_s + 4) * tail + 1,
    )
