"""Finite-alphabet probability engine.

Joint pmfs are dense numpy tensors with one axis per named variable. All
information measures are in bits, with the convention 0 log 0 = 0. Masses
at or below ``POSITIVE`` are treated as outside the support.
"""

from __future__ import annotations

import json
import math
import string
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateInputError, PmfParseError, PreconditionError

POSITIVE = 1e-15
MASS_TOL = 1e-12
INFO_TOL = 1e-9

VarSpec = str | Sequence[str]


def _names(vars: VarSpec | None) -> tuple[str, ...]:
    if vars is None:
        return ()
    if isinstance(vars, str):
        return (vars,)
    return tuple(vars)


@dataclass(frozen=True)
class Alphabet:
    name: str
    symbols: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(str(s) for s in self.symbols))
        if not self.name:
            raise PmfParseError("alphabet name must be non-empty")
        if not self.symbols:
            raise PmfParseError(f"alphabet {self.name!r} has no symbols")
        if len(set(self.symbols)) != len(self.symbols):
            raise PmfParseError(f"alphabet {self.name!r} has repeated symbols")

    @classmethod
    def range(cls, name: str, n: int) -> "Alphabet":
        return cls(name, tuple(str(i) for i in range(n)))

    def __len__(self):
        return len(self.symbols)

    def index(self, symbol) -> int:
        try:
            return self.symbols.index(str(symbol))
        except ValueError:
            raise PmfParseError(f"symbol {symbol!r} not in alphabet {self.name!r}") from None

    def renamed(self, name: str) -> "Alphabet":
        return Alphabet(name, self.symbols)


class JointPmf:
    """Dense joint pmf over an ordered list of named finite alphabets.

    The mass tensor is copied and frozen on construction.
    """

    __slots__ = ("variables", "mass")

    def __init__(self, variables: Iterable[Alphabet], mass, *, validate: bool = True):
        variables = tuple(variables)
        mass = np.array(mass, dtype=float)
        names = [v.name for v in variables]
        if len(set(names)) != len(names):
            raise PmfParseError(f"duplicate variable names in {names}")
        shape = tuple(len(v) for v in variables)
        if mass.shape != shape:
            raise PmfParseError(f"mass shape {mass.shape} does not match alphabets {shape}")
        if validate:
            if not np.all(np.isfinite(mass)) or np.any(mass < 0):
                raise PmfParseError("pmf masses must be finite and non-negative")
            total = float(mass.sum())
            if abs(total - 1.0) > MASS_TOL:
                raise PmfParseError(f"pmf masses sum to {total!r}, not 1")
        mass.setflags(write=False)
        self.variables = variables
        self.mass = mass

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.mass.shape

    def axis(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise PmfParseError(f"unknown variable {name!r}; have {self.names}") from None

    def alphabet(self, name: str) -> Alphabet:
        return self.variables[self.axis(name)]

    def support(self) -> np.ndarray:
        return self.mass > POSITIVE

    def __repr__(self):
        return f"JointPmf({', '.join(f'{v.name}[{len(v)}]' for v in self.variables)})"


def _derived(variables, mass) -> JointPmf:
    return JointPmf(variables, mass, validate=False)


@dataclass(frozen=True)
class Channel:
    """Conditional pmf of ``output`` given the product of ``inputs``.

    ``rows`` has shape ``(*input sizes, output size)``. Rows of unreachable
    inputs may be all zero; every other row must sum to one.
    """

    inputs: tuple[Alphabet, ...]
    output: Alphabet
    rows: np.ndarray

    def __post_init__(self):
        inputs = (self.inputs,) if isinstance(self.inputs, Alphabet) else tuple(self.inputs)
        rows = np.array(self.rows, dtype=float)
        shape = tuple(len(a) for a in inputs) + (len(self.output),)
        if rows.shape != shape:
            raise PmfParseError(f"channel rows have shape {rows.shape}, expected {shape}")
        if np.any(rows < 0) or not np.all(np.isfinite(rows)):
            raise PmfParseError("channel entries must be finite and non-negative")
        sums = rows.sum(axis=-1)
        bad = (np.abs(sums - 1.0) > MASS_TOL) & (sums > 0)
        if np.any(bad):
            raise PmfParseError("channel rows must sum to 1")
        rows.setflags(write=False)
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "rows", rows)

    @property
    def input_names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.inputs)

    @classmethod
    def identity(cls, source: Alphabet, name: str) -> "Channel":
        return cls((source,), source.renamed(name), np.eye(len(source)))

    @classmethod
    def constant(cls, source: Alphabet, output: Alphabet, symbol_index: int = 0) -> "Channel":
        rows = np.zeros((len(source), len(output)))
        rows[:, symbol_index] = 1.0
        return cls((source,), output, rows)

    @classmethod
    def bsc(cls, source: Alphabet, output: Alphabet, crossover: float) -> "Channel":
        if len(source) != 2 or len(output) != 2:
            raise PreconditionError("a binary symmetric channel needs binary alphabets")
        e = crossover
        return cls((source,), output, np.array([[1 - e, e], [e, 1 - e]]))


@dataclass(frozen=True)
class DistortionMeasure:
    source: Alphabet
    recon: Alphabet
    values: np.ndarray
    dbar: float | None = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (len(self.source), len(self.recon)):
            raise PmfParseError("distortion matrix shape does not match alphabets")
        dbar = float(values.max()) if self.dbar is None else float(self.dbar)
        if not math.isfinite(dbar) or dbar <= 0:
            raise PmfParseError("distortion bound Dbar must be finite and positive")
        if np.any(values < 0) or np.any(values > dbar):
            raise PmfParseError("distortion values must lie in [0, Dbar]")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "dbar", dbar)

    @classmethod
    def hamming(cls, source: Alphabet, recon: Alphabet | None = None) -> "DistortionMeasure":
        recon = recon or source.renamed("Shat")
        values = np.array(
            [[0.0 if s == r else 1.0 for r in recon.symbols] for s in source.symbols]
        )
        return cls(source, recon, values, 1.0)


# -- marginals and conditioning ------------------------------------------------


def marginalize(p: JointPmf, keep: VarSpec) -> JointPmf:
    keep = _names(keep)
    if len(set(keep)) != len(keep):
        raise PreconditionError(f"repeated variables in {keep}")
    axes = [p.axis(n) for n in keep]
    drop = tuple(i for i in range(len(p.variables)) if i not in axes)
    m = p.mass.sum(axis=drop) if drop else p.mass
    # remaining axes are in original order; permute to the requested order
    remaining = sorted(axes)
    m = np.transpose(m, [remaining.index(a) for a in axes]) if keep else np.asarray(m)
    return _derived([p.variables[a] for a in axes], m)


def condition(p: JointPmf, on: dict[str, str]) -> JointPmf:
    """Conditional pmf of the remaining variables given ``var=symbol`` pairs."""
    index = [slice(None)] * len(p.variables)
    for name, sym in on.items():
        index[p.axis(name)] = p.alphabet(name).index(sym)
    sub = p.mass[tuple(index)]
    total = float(sub.sum())
    if total <= POSITIVE:
        raise DegenerateInputError(f"conditioning event {on} has zero probability")
    rest = [v for v in p.variables if v.name not in on]
    return _derived(rest, sub / total)


def _einsum_letters(n: int) -> str:
    return string.ascii_letters[:n]


def compose(p: JointPmf, ch: Channel, markov_through: VarSpec | None = None) -> JointPmf:
    """Append ``ch.output`` to ``p``, drawn through ``ch`` from its inputs.

    The new variable is conditionally independent of every other variable of
    ``p`` given the channel inputs.
    """
    through = _names(markov_through) if markov_through is not None else ch.input_names
    if through != ch.input_names:
        raise PreconditionError(
            f"channel conditions on {ch.input_names}, not on {through}"
        )
    if ch.output.name in p.names:
        raise PreconditionError(f"variable {ch.output.name!r} already present")
    for a in ch.inputs:
        if p.alphabet(a.name) != a:
            raise PmfParseError(f"alphabet mismatch for channel input {a.name!r}")
    reach = marginalize(p, through).mass > POSITIVE
    sums = ch.rows.sum(axis=-1)
    if np.any(reach & (np.abs(sums - 1.0) > MASS_TOL)):
        raise PreconditionError("channel has no valid row for a reachable input")
    letters = _einsum_letters(len(p.variables) + 1)
    src = letters[:-1]
    out = letters[-1]
    ins = "".join(src[p.axis(n)] for n in through)
    mass = np.einsum(f"{src},{ins}{out}->{src}{out}", p.mass, ch.rows)
    return _derived(p.variables + (ch.output,), mass)


# -- information measures --------------------------------------------------------


def _plogp_sum(m: np.ndarray) -> float:
    m = m[m > 0]
    return float(-(m * np.log2(m)).sum())


def entropy(p: JointPmf, vars: VarSpec | None = None) -> float:
    names = p.names if vars is None else _names(vars)
    if not names:
        return 0.0
    return max(_plogp_sum(marginalize(p, names).mass), 0.0)


def _clamp(x: float, what: str) -> float:
    if x < -INFO_TOL:
        raise ArithmeticError(f"{what} evaluated to {x!r} < 0")
    return max(x, 0.0)


def _disjoint(*groups: tuple[str, ...]):
    seen: set[str] = set()
    for g in groups:
        if seen & set(g) or len(set(g)) != len(g):
            raise PreconditionError(f"variable groups overlap: {groups}")
        seen |= set(g)


def conditional_entropy(p: JointPmf, x: VarSpec, given: VarSpec = ()) -> float:
    x, z = _names(x), _names(given)
    _disjoint(x, z)
    return _clamp(entropy(p, x + z) - entropy(p, z), "conditional entropy")


def conditional_mutual_information(
    p: JointPmf, x: VarSpec, y: VarSpec, z: VarSpec = ()
) -> float:
    x, y, z = _names(x), _names(y), _names(z)
    _disjoint(x, y, z)
    for n in x + y + z:
        p.axis(n)
    val = entropy(p, x + z) + entropy(p, y + z) - entropy(p, x + y + z) - entropy(p, z)
    return _clamp(val, "conditional mutual information")


def mutual_information(p: JointPmf, x: VarSpec, y: VarSpec) -> float:
    return conditional_mutual_information(p, x, y, ())


def check_markov(p: JointPmf, x: VarSpec, y: VarSpec, z: VarSpec, tol: float = INFO_TOL) -> bool:
    """True iff X - Y - Z is a Markov chain, i.e. I(X;Z|Y) <= tol."""
    return conditional_mutual_information(p, x, z, y) <= tol


def min_positive_mass(p: JointPmf, vars: VarSpec | None = None, given: VarSpec = ()) -> float:
    """Smallest positive mass of p(vars), or of p(vars | given) over supp(vars, given)."""
    names = p.names if vars is None else _names(vars)
    given = _names(given)
    _disjoint(names, given)
    joint = marginalize(p, names + given).mass
    pos = joint > POSITIVE
    if not np.any(pos):
        raise DegenerateInputError("empty support")
    if not given:
        return float(joint[pos].min())
    cond = marginalize(p, given).mass
    cond = np.broadcast_to(cond.reshape((1,) * len(names) + cond.shape), joint.shape)
    return float((joint[pos] / cond[pos]).min())


def _same_layout(p: JointPmf, q: JointPmf):
    if p.variables != q.variables:
        raise PreconditionError("pmfs must share variables and alphabets")


def variational_distance(p: JointPmf, q: JointPmf) -> float:
    """L1 distance, in [0, 2]."""
    _same_layout(p, q)
    return float(np.abs(p.mass - q.mass).sum())


def kl_divergence(p: JointPmf, q: JointPmf, base: float = 2.0) -> float:
    _same_layout(p, q)
    sp = p.mass > POSITIVE
    if np.any(sp & ~(q.mass > POSITIVE)):
        raise PreconditionError("KL divergence undefined: support(p) not inside support(q)")
    a, b = p.mass[sp], q.mass[sp]
    val = float((a * np.log(a / b)).sum()) / math.log(base)
    return _clamp(val, "KL divergence")


def support_product_check(p: JointPmf, left: VarSpec, right: VarSpec) -> bool:
    """True iff supp(left, right) = supp(left) x supp(right)."""
    left, right = _names(left), _names(right)
    _disjoint(left, right)
    joint = marginalize(p, left + right).mass
    nl = int(np.prod(joint.shape[: len(left)], dtype=int))
    flat = joint.reshape(nl, -1) > POSITIVE
    sl = flat.any(axis=1)
    sr = flat.any(axis=0)
    return bool(np.array_equal(flat, np.outer(sl, sr)))


def binary_entropy(x: float) -> float:
    if not 0.0 <= x <= 1.0:
        raise PreconditionError(f"binary entropy argument {x!r} outside [0, 1]")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1 - x) * math.log2(1 - x)


def binary_convolution(x: float, y: float) -> float:
    """Crossover of two cascaded BSCs: x(1-y) + y(1-x)."""
    for v in (x, y):
        if not 0.0 <= v <= 1.0:
            raise PreconditionError(f"binary convolution argument {v!r} outside [0, 1]")
    return x * (1 - y) + y * (1 - x)


# -- JSON pmf documents ----------------------------------------------------------


def _parse_mass(value) -> float:
    try:
        if isinstance(value, str):
            frac = Fraction(value.strip())
        elif isinstance(value, (int, float)) and not isinstance(value, bool):
            frac = Fraction(value)
        else:
            raise TypeError
    except (ValueError, TypeError, ZeroDivisionError):
        raise PmfParseError(f"cannot parse probability mass {value!r}") from None
    if frac < 0:
        raise PmfParseError(f"negative probability mass {value!r}")
    return float(frac)


def pmf_from_dict(doc: dict) -> JointPmf:
    """Build a pmf from the ``{"variables": [...], "mass": [...]}`` document."""
    try:
        variables = tuple(
            Alphabet(str(v["name"]), tuple(v["symbols"])) for v in doc["variables"]
        )
        cells = doc["mass"]
    except (KeyError, TypeError) as exc:
        raise PmfParseError(f"malformed pmf document: {exc}") from None
    if not variables:
        raise PmfParseError("pmf document declares no variables")
    mass = np.zeros(tuple(len(v) for v in variables))
    seen = set()
    for cell in cells:
        try:
            index = tuple(cell["index"])
            value = cell["p"]
        except (KeyError, TypeError):
            raise PmfParseError(f"malformed mass cell {cell!r}") from None
        if len(index) != len(variables):
            raise PmfParseError(f"cell index {index} has wrong arity")
        pos = tuple(v.index(s) for v, s in zip(variables, index))
        if pos in seen:
            raise PmfParseError(f"duplicate mass cell {index}")
        seen.add(pos)
        mass[pos] = _parse_mass(value)
    if not np.any(mass > 0):
        raise DegenerateInputError("pmf document has empty support")
    return JointPmf(variables, mass)


def pmf_to_dict(p: JointPmf) -> dict:
    cells = []
    for pos in zip(*np.nonzero(p.mass > POSITIVE)):
        cells.append(
            {
                "index": [v.symbols[i] for v, i in zip(p.variables, pos)],
                "p": format(float(p.mass[pos]), ".17g"),
            }
        )
    return {
        "variables": [{"name": v.name, "symbols": list(v.symbols)} for v in p.variables],
        "mass": cells,
    }


def load_pmf(path) -> JointPmf:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise PmfParseError(f"cannot read pmf document {path}: {exc}") from None
    return pmf_from_dict(doc)


def product(*pmfs: JointPmf) -> JointPmf:
    """Independent product joint; variable names must be distinct."""
    mass = np.ones(())
    variables: tuple[Alphabet, ...] = ()
    for q in pmfs:
        mass = np.multiply.outer(mass, q.mass)
        variables += q.variables
    return _derived(variables, mass)
