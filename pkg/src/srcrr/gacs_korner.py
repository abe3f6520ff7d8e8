"""Gacs-Korner common randomness of grouped finite random variables.

The common part of (X, Y) is the label of the connected component of the
bipartite support graph with left nodes ``X`` and right nodes ``Y``. Groups
of variables are flattened to product symbols first, and the two groups may
share variables: a shared variable constrains an edge to join symbols that
agree on it, which is what GK^{AU,AV}-style partitions need.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, PreconditionError
from .probability import (
    INFO_TOL,
    POSITIVE,
    Alphabet,
    JointPmf,
    VarSpec,
    _derived,
    _names,
    conditional_entropy,
    marginalize,
    product,
)

SINK = -1


class UnionFind:
    """Array-backed disjoint sets with path halving and union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, a: int) -> int:
        parent = self.parent
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(self, a: int, b: int) -> int:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return ra


@dataclass(frozen=True)
class GKPartition:
    """Component labeling of the support graph between two variable groups.

    Class ids are flat right-symbol indices: each component is named after
    its smallest right symbol. Symbols outside the support map to ``SINK``.
    """

    left_vars: tuple[str, ...]
    right_vars: tuple[str, ...]
    left_shape: tuple[int, ...]
    right_shape: tuple[int, ...]
    class_of_left: np.ndarray
    class_of_right: np.ndarray
    class_ids: tuple[int, ...]
    class_mass: tuple[float, ...]
    right_labels: tuple[str, ...]

    @property
    def n_classes(self) -> int:
        return len(self.class_ids)

    def masses(self) -> dict[int, float]:
        return dict(zip(self.class_ids, self.class_mass))

    def component_sizes(self, side: str = "right") -> dict[int, int]:
        labels = self.class_of_right if side == "right" else self.class_of_left
        return {c: int(np.count_nonzero(labels == c)) for c in self.class_ids}

    def mapping_choices(self, side: str = "left") -> int:
        """Number of ways to pick one representative symbol per component."""
        out = 1
        for n in self.component_sizes(side).values():
            out *= n
        return out


def _flat_labels(alphabets: tuple[Alphabet, ...]) -> tuple[str, ...]:
    grids = np.indices(tuple(len(a) for a in alphabets)).reshape(len(alphabets), -1).T
    return tuple(",".join(a.symbols[i] for a, i in zip(alphabets, row)) for row in grids)


def gk_partition(p: JointPmf, left: VarSpec, right: VarSpec) -> GKPartition:
    """Partition of the grouped support graph of ``p`` into connected components.

    Variables outside ``left`` and ``right`` are marginalized out.
    """
    left, right = _names(left), _names(right)
    if not left or not right:
        raise PreconditionError("both variable groups must be non-empty")
    union = tuple(dict.fromkeys(left + right))
    joint = marginalize(p, union)
    pos = np.argwhere(joint.mass > POSITIVE)
    if len(pos) == 0:
        raise DegenerateInputError("empty support")
    lshape = tuple(len(p.alphabet(n)) for n in left)
    rshape = tuple(len(p.alphabet(n)) for n in right)
    lidx = np.ravel_multi_index(tuple(pos[:, union.index(n)] for n in left), lshape)
    ridx = np.ravel_multi_index(tuple(pos[:, union.index(n)] for n in right), rshape)
    nl, nr = int(np.prod(lshape)), int(np.prod(rshape))

    uf = UnionFind(nl + nr)
    for a, b in zip(lidx.tolist(), ridx.tolist()):
        uf.union(a, nl + b)

    lmass = marginalize(p, left).mass.reshape(-1)
    rmass = marginalize(p, right).mass.reshape(-1)
    # canonical id per root: smallest supported right index in the component
    root_id: dict[int, int] = {}
    for r in range(nr):
        if rmass[r] > POSITIVE:
            root_id.setdefault(uf.find(nl + r), r)
    class_of_right = np.full(nr, SINK, dtype=np.int64)
    for r in range(nr):
        if rmass[r] > POSITIVE:
            class_of_right[r] = root_id[uf.find(nl + r)]
    class_of_left = np.full(nl, SINK, dtype=np.int64)
    for a in range(nl):
        if lmass[a] > POSITIVE:
            class_of_left[a] = root_id[uf.find(a)]

    ids = tuple(sorted(set(root_id.values())))
    masses = tuple(float(rmass[class_of_right == c].sum()) for c in ids)
    labels = _flat_labels(tuple(p.alphabet(n) for n in right))
    return GKPartition(
        left_vars=left,
        right_vars=right,
        left_shape=lshape,
        right_shape=rshape,
        class_of_left=class_of_left,
        class_of_right=class_of_right,
        class_ids=ids,
        class_mass=masses,
        right_labels=labels,
    )


def gk_variable(part: GKPartition, name: str = "GK") -> JointPmf:
    """Pmf of the class label, over symbols named after each class's right symbol."""
    alphabet = Alphabet(name, tuple(part.right_labels[c] for c in part.class_ids))
    return _derived((alphabet,), np.array(part.class_mass))


def with_gk(p: JointPmf, part: GKPartition, name: str = "GK") -> JointPmf:
    """Extend ``p`` by the GK label computed as a function of the right group."""
    if name in p.names:
        raise PreconditionError(f"variable {name!r} already present")
    cls_index = {c: i for i, c in enumerate(part.class_ids)}
    n = len(part.class_ids)
    axes = [p.axis(v) for v in part.right_vars]
    idx = np.indices(p.shape)
    flat_right = np.ravel_multi_index(tuple(idx[a] for a in axes), part.right_shape)
    labels = part.class_of_right[flat_right]
    mass = np.zeros(p.shape + (n,))
    for c, i in cls_index.items():
        mass[..., i] = np.where(labels == c, p.mass, 0.0)
    alphabet = Alphabet(name, tuple(part.right_labels[c] for c in part.class_ids))
    return _derived(p.variables + (alphabet,), mass)


def rv_equivalent(p: JointPmf, x: VarSpec, y: VarSpec, tol: float = INFO_TOL) -> bool:
    """True iff H(X|Y) <= tol and H(Y|X) <= tol."""
    x, y = _names(x), _names(y)
    return conditional_entropy(p, x, y) <= tol and conditional_entropy(p, y, x) <= tol


def _gk_of_pair(p: JointPmf, left, right, name) -> JointPmf:
    return with_gk(p, gk_partition(p, left, right), name)


def verify_lemma1(q_a1a2: JointPmf, q_uv: JointPmf) -> bool:
    """Check GK^{A1U,A2V} is equivalent to (GK^{A1,A2}, GK^{U,V}) on the product joint."""
    a1, a2 = q_a1a2.names
    u, v = q_uv.names
    joint = product(q_a1a2, q_uv)
    joint = _gk_of_pair(joint, (a1, u), (a2, v), "_GK_all")
    joint = _gk_of_pair(joint, a1, a2, "_GK_a")
    joint = _gk_of_pair(joint, u, v, "_GK_uv")
    return rv_equivalent(joint, "_GK_all", ("_GK_a", "_GK_uv"))


def verify_lemma2(q_xy: JointPmf, q_z: JointPmf) -> bool:
    """Check GK^{X,YZ} is equivalent to GK^{X,Y} on the product joint."""
    x, y = q_xy.names
    (z,) = q_z.names
    joint = product(q_xy, q_z)
    joint = _gk_of_pair(joint, x, (y, z), "_GK_yz")
    joint = _gk_of_pair(joint, x, y, "_GK_y")
    return rv_equivalent(joint, "_GK_yz", "_GK_y")
