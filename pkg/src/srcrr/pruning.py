"""Pruning of low-probability auxiliary configurations.

A five-tuple (A1, A2, S, B1, B2) with (A1,A2) - S - (B1,B2) is pruned by
removing part of the (A1, A2, S) support and renormalizing per source
symbol, leaving p(b1, b2 | s) untouched. Method A removes whole pairs
(a1, a2) outside a caller-supplied event; method B removes the triples
whose posterior p(s | a1, a2) is at most delta. Each run reports the
perturbation actually achieved next to the guaranteed bounds.

Divergences against eta are in nats (eta enters through e^eta); entropy
differences and their bounds are both in bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Hashable, Mapping, Sequence

import numpy as np

from .errors import DegenerateInputError, PmfParseError, PreconditionError
from .probability import (
    INFO_TOL,
    POSITIVE,
    Alphabet,
    JointPmf,
    _derived,
    conditional_entropy,
    conditional_mutual_information,
    marginalize,
    min_positive_mass,
)

FIVE = ("A1", "A2", "S", "B1", "B2")
BOUND_SLACK = 1e-9


class MarkovFiveTuple:
    """Joint pmf over (A1, A2, S, B1, B2) with (A1,A2) - S - (B1,B2) and full supp(S)."""

    __slots__ = ("joint",)

    def __init__(self, joint: JointPmf, tol: float = INFO_TOL):
        if sorted(joint.names) != sorted(FIVE):
            raise PmfParseError(f"five-tuple needs variables {FIVE}, got {joint.names}")
        if joint.names != FIVE:
            joint = marginalize(joint, FIVE)
        mi = conditional_mutual_information(joint, ("A1", "A2"), ("B1", "B2"), "S")
        if mi > tol:
            raise PreconditionError(f"(A1,A2) - S - (B1,B2) violated: I = {mi:.3g}")
        if (marginalize(joint, "S").mass <= POSITIVE).any():
            raise PreconditionError("every source symbol must have positive probability")
        self.joint = joint

    @classmethod
    def from_parts(cls, p_a1a2s, p_b1b2_given_s, names=None) -> "MarkovFiveTuple":
        """Build from an (A1,A2,S) array and a channel array indexed (s, b1, b2)."""
        p_a1a2s = np.asarray(p_a1a2s, dtype=float)
        ch = np.asarray(p_b1b2_given_s, dtype=float)
        if ch.shape[0] != p_a1a2s.shape[2]:
            raise PmfParseError("channel rows must be indexed by S")
        mass = np.einsum("xys,suv->xysuv", p_a1a2s, ch)
        shape = mass.shape
        names = names or FIVE
        return cls(JointPmf([Alphabet.range(n, k) for n, k in zip(names, shape)], mass))

    @property
    def mass(self) -> np.ndarray:
        return self.joint.mass

    @property
    def p_a1a2s(self) -> np.ndarray:
        return self.joint.mass.sum(axis=(3, 4))

    @property
    def channel(self) -> np.ndarray:
        """p(b1, b2 | s), indexed (s, b1, b2)."""
        psb = self.joint.mass.sum(axis=(0, 1))
        ps = psb.sum(axis=(1, 2))
        ch = psb / ps[:, None, None]
        ch[ch <= POSITIVE] = 0.0
        return ch

    @property
    def m_S(self) -> float:
        return min_positive_mass(self.joint, "S")

    def __repr__(self):
        return f"MarkovFiveTuple(shape={self.joint.shape})"


def _rebuild(t: MarkovFiveTuple, p_a1a2s: np.ndarray) -> MarkovFiveTuple:
    mass = np.einsum("xys,suv->xysuv", p_a1a2s, t.channel)
    return MarkovFiveTuple(_derived(t.joint.variables, mass))


def _l1(p: np.ndarray, q: np.ndarray) -> float:
    return float(np.abs(p - q).sum())


def _kl_nats(p: np.ndarray, q: np.ndarray) -> float:
    live = p > 0
    if (q[live] <= 0).any():
        return math.inf
    return float((p[live] * np.log(p[live] / q[live])).sum())


def _entropy_bound(eta: float, size_s: int, coef: float) -> float:
    theta = (2 * eta) ** 0.25
    return theta * math.log2(size_s**2 / theta) + coef * (math.exp(eta) - 1) * math.log2(size_s)


def xi(x: float, size_s: int, m_suv: float) -> float:
    """Standalone evaluator of |S|x/(m-|S|x) * log2(|S|^2 (m-|S|x)/x) on [0, m/|S|)."""
    if not 0 <= x < m_suv / size_s:
        raise PreconditionError(f"x must lie in [0, {m_suv / size_s:.6g}), got {x!r}")
    if x == 0:
        return 0.0
    r = m_suv - size_s * x
    return size_s * x / r * math.log2(size_s**2 * r / x)


@dataclass
class PruneReport:
    method: str
    delta: float
    eta: float
    m_S: float
    l1: float
    kl_nats: float
    dH_pairs: tuple[float, float]
    bounds: dict[str, float]
    achieved: dict[str, float]
    holds: dict[str, bool] = field(default_factory=dict)
    extra: dict[str, float | int | bool | None] = field(default_factory=dict)

    @property
    def kl_bits(self) -> float:
        return self.kl_nats / math.log(2)

    def recompute_holds(self) -> dict[str, bool]:
        self.holds.update(
            {k: bool(self.achieved[k] <= self.bounds[k] + BOUND_SLACK) for k in self.bounds}
        )
        return self.holds

    @property
    def all_hold(self) -> bool:
        return all(self.holds.values())

    def slack(self) -> dict[str, float]:
        return {k: self.bounds[k] - self.achieved[k] for k in self.bounds}

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "delta": self.delta,
            "eta": self.eta,
            "m_S": self.m_S,
            "l1": self.l1,
            "kl_nats": self.kl_nats,
            "kl_bits": self.kl_bits,
            "dH_pairs": list(self.dH_pairs),
            "bounds": dict(self.bounds),
            "achieved": dict(self.achieved),
            "holds": dict(self.holds),
            "units": {"kl": "nats", "entropy": "bits", "entropy_bound_log": "base 2"},
            "extra": dict(self.extra),
        }


def _entropy_deltas(t: MarkovFiveTuple, r: MarkovFiveTuple) -> tuple[float, float]:
    d1 = abs(conditional_entropy(r.joint, "S", ("A1", "B1")) - conditional_entropy(t.joint, "S", ("A1", "B1")))
    given = ("A1", "A2", "B1", "B2")
    d2 = abs(conditional_entropy(r.joint, "S", given) - conditional_entropy(t.joint, "S", given))
    return d1, d2


def _common_checks(t: MarkovFiveTuple, r: MarkovFiveTuple) -> dict:
    p_sb = t.mass.sum(axis=(0, 1))
    q_sb = r.mass.sum(axis=(0, 1))
    return {
        "markov_cmi": conditional_mutual_information(r.joint, ("A1", "A2"), ("B1", "B2"), "S"),
        "channel_error": float(np.abs(r.channel - t.channel).max()),
        "p_SB1B2_error": float(np.abs(p_sb - q_sb).max()),
        "p_S_error": float(np.abs(p_sb.sum(axis=(1, 2)) - q_sb.sum(axis=(1, 2))).max()),
    }


def _conditional_b_given_a(mass: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    pab = mass.sum(axis=2)  # (a1, a2, b1, b2)
    pa = pab.sum(axis=(2, 3))
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = np.where(pa[..., None, None] > 0, pab / pa[..., None, None], 0.0)
    return cond, pa


def prune_a(t: MarkovFiveTuple, E, eta: float, delta: float | None = None):
    """Keep only pairs (a1, a2) in ``E`` and renormalize per source symbol.

    ``E`` is a boolean array over A1 x A2. ``delta`` defaults to 1 - Pr[E];
    a larger caller value is accepted as long as Pr[E] >= 1 - delta.
    """
    E = np.asarray(E, dtype=bool)
    pa = t.p_a1a2s
    if E.shape != pa.shape[:2]:
        raise PmfParseError(f"event shape {E.shape} does not match A1 x A2 {pa.shape[:2]}")
    if not 0 < eta < math.log(2):
        raise PreconditionError(f"eta must lie in (0, ln 2), got {eta!r}")
    pE = float(pa[E].sum())
    if delta is None:
        delta = max(0.0, 1.0 - pE)
    elif pE < 1.0 - delta - 1e-12:
        raise PreconditionError(f"Pr[E] = {pE:.6g} is below 1 - delta")
    m_S = t.m_S
    if delta > m_S * (1 - math.exp(-eta)) + 1e-15:
        raise PreconditionError(
            f"delta = {delta:.6g} exceeds m_S(1 - e^-eta) = {m_S * (1 - math.exp(-eta)):.6g}"
        )
    pS = pa.sum(axis=(0, 1))
    norm = pa[E].sum(axis=0) / pS  # Pr[E | S = s]
    if (norm <= 0).any():
        raise DegenerateInputError("event has zero probability given some source symbol")
    new = np.where(E[..., None], pa / norm, 0.0)
    r = _rebuild(t, new)

    l1 = _l1(r.mass, t.mass)
    kl = _kl_nats(r.mass, t.mass)
    d1, d2 = _entropy_deltas(t, r)
    size_s = t.joint.shape[2]

    cond_t, pa_t = _conditional_b_given_a(t.mass)
    cond_r, pa_r = _conditional_b_given_a(r.mass)
    rows = E & (pa_t > POSITIVE)
    infl = 1.0
    for a1, a2 in zip(*np.nonzero(rows)):
        orig, now = cond_t[a1, a2], cond_r[a1, a2]
        if (now[orig <= 0] > 0).any():
            infl = math.inf
            break
        live = orig > 0
        if live.any():
            infl = max(infl, float((now[live] / orig[live]).max()))

    live = (t.mass > 0) & E[..., None, None, None]
    ratio = r.mass[live] / t.mass[live]
    entry_lo = float(ratio.min()) if ratio.size else 1.0
    entry_hi = float(ratio.max()) if ratio.size else 1.0
    outside = float(r.mass[~E].sum())

    common = _common_checks(t, r)
    bounds = {
        "a_l1": 2 * delta / (m_S - delta),
        "a_l1_eta": 2 * (math.exp(eta) - 1),
        "b_inflation": math.exp(eta),
        "c_kl": eta,
        "d_entropy": _entropy_bound(eta, size_s, 2.0),
        "e_entropy": _entropy_bound(eta, size_s, 2.0),
        "markov": INFO_TOL,
        "entry_inflation": m_S / (m_S - delta),
        "entry_floor": 0.0,
        "support_in_E": 0.0,
    }
    achieved = {
        "a_l1": l1,
        "a_l1_eta": l1,
        "b_inflation": infl,
        "c_kl": kl,
        "d_entropy": d1,
        "e_entropy": d2,
        "markov": common["markov_cmi"],
        "entry_inflation": entry_hi,
        "entry_floor": 1.0 - entry_lo,
        "support_in_E": outside,
    }
    report = PruneReport("A", delta, eta, m_S, l1, kl, (d1, d2), bounds, achieved)
    report.extra.update(common)
    report.extra["pr_E"] = pE
    report.recompute_holds()
    return r, report


def prune_b(t: MarkovFiveTuple, delta: float, eta: float):
    """Drop triples with p(s | a1, a2) <= delta and renormalize per source symbol."""
    if not 0 < eta < 1:
        raise PreconditionError(f"eta must lie in (0, 1), got {eta!r}")
    if not 0 < delta < 1:
        raise PreconditionError(f"delta must lie in (0, 1), got {delta!r}")
    m_S = t.m_S
    if delta > m_S * (1 - math.exp(-eta)) + 1e-15:
        raise PreconditionError(
            f"delta = {delta:.6g} exceeds m_S(1 - e^-eta) = {m_S * (1 - math.exp(-eta)):.6g}"
        )
    pa = t.p_a1a2s
    pA = pa.sum(axis=2)
    with np.errstate(divide="ignore", invalid="ignore"):
        post = np.where(pA[..., None] > 0, pa / pA[..., None], 0.0)
    E = (pa > POSITIVE) & (post > delta)
    pS = pa.sum(axis=(0, 1))
    norm = np.where(E, pa, 0.0).sum(axis=(0, 1)) / pS
    if (norm <= 0).any():
        raise DegenerateInputError("pruning removes every configuration for some source symbol")
    new = np.where(E, pa / norm, 0.0)
    r = _rebuild(t, new)

    l1 = _l1(r.mass, t.mass)
    kl = _kl_nats(r.mass, t.mass)
    d1, d2 = _entropy_deltas(t, r)
    size_s = t.joint.shape[2]

    # zeroing on singleton events {(b1, b2)}
    ch = t.channel
    m_b = float(ch[ch > 0].min())
    cond_t, pa_t = _conditional_b_given_a(t.mass)
    cond_r, pa_r = _conditional_b_given_a(r.mass)
    checked = violations = 0
    for a1, a2 in zip(*np.nonzero(pa_t > POSITIVE)):
        small = cond_t[a1, a2] <= delta * m_b
        checked += int(small.sum())
        violations += int((cond_r[a1, a2][small] != 0.0).sum())

    common = _common_checks(t, r)
    bounds = {
        "a_l1": 2 * delta * size_s / (m_S - delta),
        "a_l1_eta": 2 * size_s * (math.exp(eta) - 1),
        "b_zeroing": 0.0,
        "c_kl": math.log(m_S / (m_S - delta)),
        "c_kl_eta": eta,
        "d_entropy": _entropy_bound(eta, size_s, 2.0 * size_s),
        "e_entropy": _entropy_bound(eta, size_s, 2.0 * size_s),
        "f_markov": INFO_TOL,
        "f_p_SB1B2": 1e-12,
    }
    achieved = {
        "a_l1": l1,
        "a_l1_eta": l1,
        "b_zeroing": float(violations),
        "c_kl": kl,
        "c_kl_eta": kl,
        "d_entropy": d1,
        "e_entropy": d2,
        "f_markov": common["markov_cmi"],
        "f_p_SB1B2": common["p_SB1B2_error"],
    }
    report = PruneReport("B", delta, eta, m_S, l1, kl, (d1, d2), bounds, achieved)
    report.extra.update(common)
    report.extra.update({"zeroing_checked": checked, "m_B1B2_given_S": m_b, "kept_triples": int(E.sum())})
    m_sbb = float(t.mass.sum(axis=(0, 1))[t.mass.sum(axis=(0, 1)) > POSITIVE].min())
    report.extra["xi_delta"] = xi(delta, size_s, m_sbb) if delta < m_sbb / size_s else None
    report.recompute_holds()
    return r, report


def mismatch_event(
    t: MarkovFiveTuple,
    predicate: Callable[[int, int, int, int], bool],
    threshold: float,
) -> np.ndarray:
    """Pairs (a1, a2) whose conditional probability of ``predicate`` is at most ``threshold``.

    ``predicate(a1, a2, b1, b2)`` flags a mismatch, e.g. two reconstructions
    disagreeing. Pairs with zero probability are left out.
    """
    cond, pa = _conditional_b_given_a(t.mass)
    n1, n2, m1, m2 = cond.shape
    bad = np.zeros(cond.shape, dtype=bool)
    for idx in np.ndindex(cond.shape):
        bad[idx] = bool(predicate(*idx))
    p_bad = np.where(bad, cond, 0.0).sum(axis=(2, 3))
    return (pa > POSITIVE) & (p_bad <= threshold)


# -- agreement of functions of independent variables ------------------------------


AGREEMENT_LIMIT = 1.0 / 25.0


def _pmf_vector(p) -> np.ndarray:
    if isinstance(p, JointPmf):
        if len(p.names) != 1:
            raise PmfParseError("expected a pmf over a single variable")
        return p.mass
    v = np.asarray(p, dtype=float)
    if v.ndim != 1 or (v < 0).any() or abs(v.sum() - 1) > 1e-12:
        raise PmfParseError("expected a probability vector")
    return v


def _image(pv: np.ndarray, f: Sequence[Hashable] | Mapping[int, Hashable]) -> dict:
    out: dict = {}
    for x, px in enumerate(pv):
        z = f[x]
        out[z] = out.get(z, 0.0) + float(px)
    return out


def mismatch_probability(pX, pY, f, g) -> float:
    """Pr[f(X) != g(Y)] for independent X and Y."""
    px, py = _pmf_vector(pX), _pmf_vector(pY)
    agree = 0.0
    imf, img = _image(px, f), _image(py, g)
    for z, pz in imf.items():
        agree += pz * img.get(z, 0.0)
    return max(0.0, 1.0 - agree)


def agreement_bound(delta: float) -> float:
    return (1 + math.sqrt(1 - delta - math.sqrt(delta))) / 2


def agreement_point(pX, pY, f, g):
    """Most likely value z* of f(X) and the guaranteed lower bound on Pr[f(X)=z*], Pr[g(Y)=z*].

    Requires Pr[f(X) != g(Y)] < 1/25 for independent X and Y.
    """
    px = _pmf_vector(pX)
    delta = mismatch_probability(pX, pY, f, g)
    if delta >= AGREEMENT_LIMIT:
        raise PreconditionError(
            f"mismatch probability {delta:.6g} is not below 1/25; the agreement guarantee does not apply"
        )
    imf = _image(px, f)
    zstar = max(imf, key=lambda z: imf[z])
    return zstar, agreement_bound(delta)
