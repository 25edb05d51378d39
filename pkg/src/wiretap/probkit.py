"""Finite-alphabet probability calculus.

Distributions carry named axes and every operation addresses variables by
name.  All information measures are in nats.
"""
from __future__ import annotations

import graphlib
from collections.abc import Hashable, Iterable, Sequence
from dataclasses import dataclass
from math import prod

import numpy as np

from .errors import ValidationError

NORM_TOL = 1e-12


@dataclass(frozen=True)
class Alphabet:
    """Ordered, duplicate-free tuple of symbol labels."""

    labels: tuple

    def __post_init__(self):
        labels = tuple(self.labels)
        if not labels:
            raise ValidationError("alphabet must have at least one symbol")
        if len(set(labels)) != len(labels):
            raise ValidationError(f"alphabet labels are not distinct: {labels!r}")
        object.__setattr__(self, "labels", labels)

    @property
    def size(self) -> int:
        return len(self.labels)

    def __len__(self) -> int:
        return len(self.labels)

    def index(self, label: Hashable) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise ValidationError(f"symbol {label!r} not in alphabet {self.labels!r}") from None

    @classmethod
    def of(cls, spec) -> "Alphabet":
        """Coerce an int (size), a label sequence, or an Alphabet."""
        if isinstance(spec, Alphabet):
            return spec
        if isinstance(spec, (int, np.integer)):
            if spec < 1:
                raise ValidationError(f"alphabet size must be >= 1, got {spec}")
            return cls(tuple(range(int(spec))))
        return cls(tuple(spec))

    @classmethod
    def product(cls, *alphabets: "Alphabet") -> "Alphabet":
        """Cartesian product alphabet with tuple labels in lexicographic order."""
        import itertools

        return cls(tuple(itertools.product(*(a.labels for a in alphabets))))


def _axes(axes) -> tuple[tuple[str, Alphabet], ...]:
    out = tuple((str(name), Alphabet.of(alpha)) for name, alpha in axes)
    names = [n for n, _ in out]
    if len(set(names)) != len(names):
        raise ValidationError(f"axis names are not distinct: {names}")
    return out


def _names(spec) -> tuple[str, ...]:
    if spec is None:
        return ()
    if isinstance(spec, str):
        return (spec,)
    return tuple(spec)


class Dist:
    """Probability table over the product of named finite alphabets.

    ``weights`` has one array axis per variable, in ``axes`` order.  A flat
    weight list is accepted and read row-major.  Instances are immutable.
    """

    __slots__ = ("axes", "weights")

    def __init__(self, axes, weights, *, atol: float = NORM_TOL):
        axes = _axes(axes)
        shape = tuple(a.size for _, a in axes)
        w = np.array(weights, dtype=float)
        if w.size != prod(shape):
            raise ValidationError(f"weights have {w.size} entries, axes need {prod(shape)}")
        w = w.reshape(shape)
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValidationError("weights must be finite and nonnegative")
        total = w.sum()
        if abs(total - 1.0) > atol:
            raise ValidationError(f"weights sum to {total!r}, not 1 within {atol}")
        w.setflags(write=False)
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "weights", w)

    def __setattr__(self, key, value):
        raise AttributeError("Dist is immutable")

    @classmethod
    def from_array(cls, weights, names: Sequence[str], labels=None, **kw) -> "Dist":
        w = np.asarray(weights, dtype=float)
        if labels is None:
            labels = w.shape
        return cls(list(zip(names, labels)), w, **kw)

    @classmethod
    def uniform(cls, name: str, alphabet) -> "Dist":
        a = Alphabet.of(alphabet)
        return cls([(name, a)], np.full(a.size, 1.0 / a.size))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.weights.shape

    def alphabet(self, name: str) -> Alphabet:
        return self.axes[self.axis(name)][1]

    def axis(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ValidationError(f"unknown variable {name!r}; have {self.names}") from None

    def array(self, order: Sequence[str]) -> np.ndarray:
        """Weights with axes permuted to ``order`` (which must name every axis)."""
        order = _names(order)
        if sorted(order) != sorted(self.names):
            raise ValidationError(f"order {order} must be a permutation of {self.names}")
        return np.transpose(self.weights, [self.axis(n) for n in order])

    def prob(self, **assignment) -> float:
        idx = tuple(self.alphabet(n).index(assignment[n]) for n in self.names)
        return float(self.weights[idx])

    def entropy_table(self) -> "DistEntropies":
        return DistEntropies(self)

    def __repr__(self) -> str:
        return f"Dist({', '.join(f'{n}:{a.size}' for n, a in self.axes)})"


class Channel:
    """Conditional distribution P(outputs | inputs) over named axes.

    ``kernel`` has the input axes first, then the output axes.
    """

    __slots__ = ("input_axes", "output_axes", "kernel")

    def __init__(self, input_axes, output_axes, kernel, *, atol: float = NORM_TOL):
        ins, outs = _axes(input_axes), _axes(output_axes)
        _axes(ins + outs)
        in_shape = tuple(a.size for _, a in ins)
        out_shape = tuple(a.size for _, a in outs)
        k = np.array(kernel, dtype=float)
        if k.size != prod(in_shape) * prod(out_shape):
            raise ValidationError(
                f"kernel has {k.size} entries, axes need {prod(in_shape) * prod(out_shape)}")
        k = k.reshape(in_shape + out_shape)
        if not np.all(np.isfinite(k)) or np.any(k < 0):
            raise ValidationError("kernel entries must be finite and nonnegative")
        rows = k.reshape(prod(in_shape), -1).sum(axis=1)
        bad = np.abs(rows - 1.0) > atol
        if np.any(bad):
            raise ValidationError(
                f"kernel row {int(np.argmax(bad))} sums to {rows[bad][0]!r}, not 1 within {atol}")
        k.setflags(write=False)
        object.__setattr__(self, "input_axes", ins)
        object.__setattr__(self, "output_axes", outs)
        object.__setattr__(self, "kernel", k)

    def __setattr__(self, key, value):
        raise AttributeError("Channel is immutable")

    @classmethod
    def from_array(cls, kernel, inputs: Sequence[str], outputs: Sequence[str], **kw) -> "Channel":
        k = np.asarray(kernel, dtype=float)
        ni = len(inputs)
        return cls(list(zip(inputs, k.shape[:ni])), list(zip(outputs, k.shape[ni:])), k, **kw)

    @property
    def input_names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.input_axes)

    @property
    def output_names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.output_axes)

    def row(self, *symbols) -> Dist:
        idx = tuple(a.index(s) for (_, a), s in zip(self.input_axes, symbols))
        return Dist(self.output_axes, self.kernel[idx])

    def output_marginal(self, keep: Sequence[str]) -> "Channel":
        """Channel to a subset of the outputs (others summed out)."""
        keep = _names(keep)
        ni = len(self.input_axes)
        names = self.output_names
        for n in keep:
            if n not in names:
                raise ValidationError(f"unknown output {n!r}")
        drop = tuple(ni + i for i, n in enumerate(names) if n not in keep)
        k = self.kernel.sum(axis=drop)
        kept_axes = [ax for ax in self.output_axes if ax[0] in keep]
        order = [ [a[0] for a in kept_axes].index(n) for n in keep]
        k = np.transpose(k, list(range(ni)) + [ni + i for i in order])
        return Channel(self.input_axes, [kept_axes[i] for i in order], k)

    def __repr__(self) -> str:
        ins = ", ".join(f"{n}:{a.size}" for n, a in self.input_axes)
        outs = ", ".join(f"{n}:{a.size}" for n, a in self.output_axes)
        return f"Channel({outs} | {ins})"


def joint_from_factors(factors: Sequence[Dist | Channel], wiring: dict | None = None) -> Dist:
    """Multiply root distributions and channels into one joint distribution.

    Each ``Dist`` introduces its axes as root variables; each ``Channel``
    introduces its outputs with its inputs as parents.  ``wiring`` optionally
    declares ``{variable: parents}`` and is checked against the factors.
    """
    defined: dict[str, Alphabet] = {}
    owner: dict[str, int] = {}
    parents_of: dict[int, tuple[str, ...]] = {}
    for i, f in enumerate(factors):
        if isinstance(f, Dist):
            new, parents = f.axes, ()
        elif isinstance(f, Channel):
            new, parents = f.output_axes, f.input_names
        else:
            raise ValidationError(f"factor {i} is neither Dist nor Channel")
        for name, alpha in new:
            if name in defined:
                raise ValidationError(f"variable {name!r} defined by two factors")
            defined[name] = alpha
            owner[name] = i
        parents_of[i] = parents

    if wiring is not None:
        for child, parents in wiring.items():
            if child not in owner:
                raise ValidationError(f"wiring names unknown variable {child!r}")
            if set(_names(parents)) != set(parents_of[owner[child]]):
                raise ValidationError(
                    f"wiring for {child!r} declares parents {tuple(_names(parents))}, "
                    f"factor has {parents_of[owner[child]]}")

    graph = graphlib.TopologicalSorter()
    for i, parents in parents_of.items():
        deps = []
        for p in parents:
            if p not in owner:
                raise ValidationError(f"parent {p!r} is not produced by any factor")
            deps.append(owner[p])
        graph.add(i, *deps)
    try:
        order = list(graph.static_order())
    except graphlib.CycleError as exc:
        raise ValidationError(f"cyclic wiring among factors {exc.args[1]}") from None

    for i, f in enumerate(factors):
        if isinstance(f, Channel):
            for name, alpha in f.input_axes:
                if defined[name] != alpha:
                    raise ValidationError(
                        f"factor {i} expects {name!r} over {alpha.labels}, "
                        f"but it is defined over {defined[name].labels}")

    var_order = [name for i in order for name, _ in
                 (factors[i].axes if isinstance(factors[i], Dist) else factors[i].output_axes)]
    index = {name: k for k, name in enumerate(var_order)}
    operands = []
    for f in factors:
        if isinstance(f, Dist):
            operands += [f.weights, [index[n] for n in f.names]]
        else:
            operands += [f.kernel, [index[n] for n in f.input_names + f.output_names]]
    w = np.einsum(*operands, list(range(len(var_order))), optimize=True)
    return Dist([(n, defined[n]) for n in var_order], w)


def marginal(d: Dist, keep) -> Dist:
    """Sum out every axis not in ``keep``; kept axes stay in ``d``'s order."""
    keep = set(_names(keep))
    for n in keep:
        d.axis(n)
    drop = tuple(i for i, n in enumerate(d.names) if n not in keep)
    return Dist([ax for ax in d.axes if ax[0] in keep], d.weights.sum(axis=drop))


def _entropy_of_weights(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


def entropy(d: Dist) -> float:
    return _entropy_of_weights(d.weights.ravel())


class EntropyTable:
    """Memoized joint entropies of variable subsets of one fixed state.

    Subclasses implement :meth:`_joint` for a frozenset of names.  Every
    composite measure below is a signed sum of joint entropies.
    """

    def __init__(self, names: Iterable[str]):
        self.names = tuple(names)
        self._cache: dict[frozenset, float] = {frozenset(): 0.0}

    def _joint(self, names: frozenset) -> float:  # pragma: no cover - abstract
        raise NotImplementedError

    def _check(self, names) -> frozenset:
        names = frozenset(names)
        unknown = names.difference(self.names)
        if unknown:
            raise ValidationError(f"unknown variables {sorted(unknown)}; have {self.names}")
        return names

    def h(self, *groups) -> float:
        names = self._check(n for g in groups for n in _names(g))
        if names not in self._cache:
            self._cache[names] = self._joint(names)
        return self._cache[names]

    def cond(self, a, given=()) -> float:
        return self.h(a, given) - self.h(given)

    def mi(self, a, b, given=()) -> float:
        a, b, c = _names(a), _names(b), _names(given)
        if set(a) & set(b) or set(a) & set(c) or set(b) & set(c):
            raise ValidationError(f"variable groups overlap: {a}, {b}, {c}")
        return self.h(a, c) + self.h(b, c) - self.h(a, b, c) - self.h(c)


class DistEntropies(EntropyTable):
    def __init__(self, d: Dist):
        super().__init__(d.names)
        self.dist = d

    def _joint(self, names):
        return entropy(marginal(self.dist, names))


def as_entropy_table(state) -> EntropyTable:
    """Wrap a Dist, DensityMatrix, or existing table for subset-entropy queries."""
    if isinstance(state, EntropyTable):
        return state
    if hasattr(state, "entropy_table"):
        return state.entropy_table()
    raise ValidationError(f"cannot evaluate entropies of {type(state).__name__}")


def conditional_entropy(d: Dist, a, b=()) -> float:
    return DistEntropies(d).cond(a, b)


def mutual_information(d: Dist, a, b) -> float:
    return DistEntropies(d).mi(a, b)


def conditional_mutual_information(d: Dist, a, b, c=()) -> float:
    return DistEntropies(d).mi(a, b, c)


@dataclass(frozen=True)
class PType:
    """Empirical type: symbol counts of a length-``n`` sequence over ``base``."""

    base: Alphabet
    counts: tuple[int, ...]
    n: int

    def __post_init__(self):
        if len(self.counts) != self.base.size:
            raise ValidationError("counts length must match the alphabet size")
        if any(c < 0 for c in self.counts) or sum(self.counts) != self.n:
            raise ValidationError("counts must be nonnegative and sum to n")
        if self.n < 1:
            raise ValidationError("a type needs n >= 1")

    @property
    def frequencies(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=float) / self.n

    def as_dist(self, name: str = "x") -> Dist:
        return Dist([(name, self.base)], self.frequencies)


def ptype_of(sequence: Sequence, base) -> PType:
    base = Alphabet.of(base)
    if len(sequence) == 0:
        raise ValidationError("cannot take the type of an empty sequence")
    counts = [0] * base.size
    lookup = {label: i for i, label in enumerate(base.labels)}
    for sym in sequence:
        key = tuple(sym) if isinstance(sym, list) else sym
        if key not in lookup:
            raise ValidationError(f"symbol {sym!r} not in alphabet")
        counts[lookup[key]] += 1
    return PType(base, tuple(counts), len(sequence))


def _block_check(ys, zs):
    ys, zs = _names(ys), _names(zs)
    if len(ys) != len(zs):
        raise ValidationError(f"block lengths differ: {len(ys)} y's vs {len(zs)} z's")
    return ys, zs


def sigma_lt(state, ys, zs, lam=()) -> float:
    """Sum over j of I(y_j : z_{>j} | y_{<j}, lam)."""
    ys, zs = _block_check(ys, zs)
    tab = as_entropy_table(state)
    lam = _names(lam)
    n = len(ys)
    return sum(tab.mi(ys[j], zs[j + 1:], ys[:j] + lam) for j in range(n))


def sigma_gt(state, ys, zs, lam=()) -> float:
    """Sum over j of I(z_j : y_{<j} | z_{>j}, lam)."""
    ys, zs = _block_check(ys, zs)
    tab = as_entropy_table(state)
    lam = _names(lam)
    n = len(ys)
    return sum(tab.mi(zs[j], ys[:j], zs[j + 1:] + lam) for j in range(n))


def random_dist(rng: np.random.Generator, names: Sequence[str], sizes: Sequence[int],
                alpha: float = 1.0) -> Dist:
    """Dirichlet-random joint distribution (test and sampling helper)."""
    w = rng.dirichlet(np.full(prod(sizes), alpha))
    return Dist(list(zip(names, sizes)), w)
