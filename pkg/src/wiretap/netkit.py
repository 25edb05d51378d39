"""Classical and quantum Bayesian nets evaluated by dense tensor contraction.

A node's table has its parents' axes first (in ``parents`` order) and its own
axis last.  Classical nodes hold P(node | parents); amplitude nodes hold
A(node | parents) with sum over the node of |A|^2 equal to 1 for every
parent assignment.

Quantum evaluation: the ket over (outputs, reservoirs) is the coherent sum,
over every other node, of the product of all amplitudes; the reservoirs are
then traced out.  Nodes are taken in declared order, never reordered.
"""
from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field, replace
from math import prod

import numpy as np

from .errors import CapExceededError, ValidationError
from .probkit import Alphabet, Dist, _names
from .quantkit import DensityMatrix

CLASSICAL = "classical"
AMPLITUDE = "amplitude"
NORM_TOL = 1e-10
DEFAULT_MAX_DIM = 4096


@dataclass(frozen=True, eq=False)
class Node:
    name: str
    alphabet: Alphabet
    parents: tuple[str, ...]
    kind: str
    table: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "alphabet", Alphabet.of(self.alphabet))
        object.__setattr__(self, "parents", tuple(self.parents))
        if self.kind not in (CLASSICAL, AMPLITUDE):
            raise ValidationError(f"node {self.name!r}: unknown kind {self.kind!r}")
        dtype = float if self.kind == CLASSICAL else complex
        t = np.array(self.table, dtype=dtype)
        if t.ndim != len(self.parents) + 1 or t.shape[-1] != self.alphabet.size:
            raise ValidationError(
                f"node {self.name!r}: table shape {t.shape} does not fit "
                f"{len(self.parents)} parents and alphabet size {self.alphabet.size}")
        if self.kind == CLASSICAL:
            if np.any(t < 0):
                raise ValidationError(f"node {self.name!r}: negative probability")
            norm = t.sum(axis=-1)
        else:
            norm = (np.abs(t) ** 2).sum(axis=-1)
        err = np.max(np.abs(norm - 1.0), initial=0.0)
        if err > NORM_TOL:
            raise ValidationError(f"node {self.name!r}: table not normalized (max deviation {err:.3g})")
        t.setflags(write=False)
        object.__setattr__(self, "table", t)

    @classmethod
    def classical(cls, name, alphabet, table, parents=()) -> "Node":
        return cls(name, alphabet, parents, CLASSICAL, table)

    @classmethod
    def amplitude(cls, name, alphabet, table, parents=()) -> "Node":
        return cls(name, alphabet, parents, AMPLITUDE, table)

    @property
    def size(self) -> int:
        return self.alphabet.size


def delta_node(name: str, parent: Node, shape: Sequence[int], component: int,
               kind: str = AMPLITUDE) -> Node:
    """Marginalizer node copying one component of a product-alphabet parent.

    ``shape`` gives the component sizes of ``parent``'s alphabet (row-major).
    """
    shape = tuple(shape)
    if prod(shape) != parent.size:
        raise ValidationError(f"shape {shape} does not factor parent size {parent.size}")
    size = shape[component]
    table = np.zeros((parent.size, size))
    for k, idx in enumerate(np.ndindex(*shape)):
        table[k, idx[component]] = 1.0
    return Node(name, size, (parent.name,), kind, table)


@dataclass(frozen=True, eq=False)
class NetSpec:
    """Ordered node list plus the traced reservoirs and the kept output nodes."""

    nodes: tuple[Node, ...]
    reservoirs: tuple[str, ...] = ()
    outputs: tuple[str, ...] = ()
    max_dim: int = DEFAULT_MAX_DIM
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        nodes = tuple(self.nodes)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "reservoirs", _names(self.reservoirs))
        object.__setattr__(self, "outputs", _names(self.outputs))
        index = {}
        for node in nodes:
            if node.name in index:
                raise ValidationError(f"duplicate node name {node.name!r}")
            for p in node.parents:
                if p not in index:
                    raise ValidationError(
                        f"node {node.name!r}: parent {p!r} must be declared before it")
                expected = nodes[index[p]].size
                got = node.table.shape[node.parents.index(p)]
                if expected != got:
                    raise ValidationError(
                        f"node {node.name!r}: parent {p!r} has {expected} symbols, table expects {got}")
            index[node.name] = len(index)
        object.__setattr__(self, "_index", index)
        for r in self.reservoirs:
            if r not in index:
                raise ValidationError(f"unknown reservoir {r!r}")
            if r in self.outputs:
                raise ValidationError(f"reservoir {r!r} cannot also be an output")
            if not (self.is_sink(r) or self.is_source(r)):
                raise ValidationError(f"reservoir {r!r} must be a sink or a source node")
        for o in self.outputs:
            if o not in index:
                raise ValidationError(f"unknown output {o!r}")
        if len(set(self.outputs)) != len(self.outputs):
            raise ValidationError("repeated output names")

    @property
    def marginalizers(self) -> tuple[str, ...]:
        """Nodes kept in the evaluated state (alias of ``outputs``)."""
        return self.outputs

    def node(self, name: str) -> Node:
        try:
            return self.nodes[self._index[name]]
        except KeyError:
            raise ValidationError(f"unknown node {name!r}") from None

    def children(self, name: str) -> list[str]:
        return [n.name for n in self.nodes if name in n.parents]

    def is_sink(self, name: str) -> bool:
        return not self.children(name)

    def is_source(self, name: str) -> bool:
        return not self.node(name).parents

    def _operands(self):
        ids = {n.name: k for k, n in enumerate(self.nodes)}
        ops = []
        for n in self.nodes:
            ops += [n.table, [ids[p] for p in n.parents] + [ids[n.name]]]
        return ops, ids


def _dim(net: NetSpec, names) -> int:
    return prod(net.node(n).size for n in names)


def evaluate_classical(net: NetSpec) -> Dist:
    """Joint distribution over the outputs (all other nodes summed out)."""
    for n in net.nodes:
        if n.kind != CLASSICAL:
            raise ValidationError(f"node {n.name!r} is an amplitude node; use evaluate_quantum")
    outputs = net.outputs or tuple(n.name for n in net.nodes if n.name not in net.reservoirs)
    ops, ids = net._operands()
    w = np.einsum(*ops, [ids[o] for o in outputs], optimize=True)
    return Dist([(o, net.node(o).alphabet) for o in outputs], w)


def ket(net: NetSpec) -> np.ndarray:
    """Amplitude tensor over outputs then reservoirs (other nodes summed coherently)."""
    for n in net.nodes:
        if n.kind != AMPLITUDE:
            raise ValidationError(f"node {n.name!r} is classical; quantum nets need amplitude nodes")
    if not net.outputs:
        raise ValidationError("a quantum net needs at least one output node")
    dim = _dim(net, net.outputs)
    if dim > net.max_dim:
        raise CapExceededError(
            f"output state dimension {dim} exceeds the cap {net.max_dim}; shrink alphabets or raise max_dim")
    if dim * _dim(net, net.reservoirs) > net.max_dim ** 2:
        raise CapExceededError(f"reservoir dimension too large for cap {net.max_dim}")
    ops, ids = net._operands()
    out = [ids[o] for o in net.outputs] + [ids[r] for r in net.reservoirs]
    return np.einsum(*ops, out, optimize=True)


def evaluate_quantum(net: NetSpec) -> DensityMatrix:
    psi = ket(net)
    dim = _dim(net, net.outputs)
    psi = psi.reshape(dim, -1)
    rho = psi @ psi.conj().T
    tr = float(np.real(np.trace(rho)))
    if abs(tr - 1.0) > NORM_TOL:
        raise ValidationError(
            f"evaluated state has trace {tr:.6g}; internal nodes must be fanned out by delta nodes")
    return DensityMatrix([(o, net.node(o).alphabet) for o in net.outputs], (rho + rho.conj().T) / 2)


def _reparent(node: Node, old: Sequence[str], new_name: str, new_shape: tuple[int, ...]) -> Node:
    """Replace parents ``old`` (a subset of node.parents) by one product parent."""
    present = [p for p in old if p in node.parents]
    if not present:
        return node
    others = [p for p in node.parents if p not in old]
    t = node.table
    # axes: others..., old components in `old` order (broadcast if absent), self
    src = list(node.parents)
    perm = [src.index(p) for p in others] + [src.index(p) for p in present] + [len(src)]
    t = np.transpose(t, perm)
    n_other = len(others)
    shape = list(t.shape[:n_other])
    full = []
    k = n_other
    for comp, size in zip(old, new_shape):
        if comp in present:
            full.append(t.shape[k])
            k += 1
        else:
            full.append(1)
    t = t.reshape(shape + full + [node.size])
    t = np.broadcast_to(t, tuple(shape) + new_shape + (node.size,))
    t = t.reshape(tuple(shape) + (prod(new_shape), node.size))
    insert_at = min(node.parents.index(p) for p in present)
    parents = list(others)
    pos = sum(1 for p in node.parents[:insert_at] if p not in old)
    parents.insert(pos, new_name)
    t = np.moveaxis(t, n_other, pos)
    return Node(node.name, node.alphabet, tuple(parents), node.kind, np.array(t))


def merge_reservoirs(net: NetSpec, r1: str, r2: str, name: str | None = None) -> NetSpec:
    """Fuse two traced reservoirs into one over the product alphabet."""
    for r in (r1, r2):
        if r not in net.reservoirs:
            raise ValidationError(f"{r!r} is not a reservoir")
    if r1 == r2:
        raise ValidationError("cannot merge a reservoir with itself")
    name = name or f"{r1}*{r2}"
    a, b = net.node(r1), net.node(r2)
    alphabet = Alphabet.product(a.alphabet, b.alphabet)
    sinks = net.is_sink(r1) and net.is_sink(r2)
    sources = net.is_source(r1) and net.is_source(r2)
    if sinks and not sources:
        parents = list(a.parents) + [p for p in b.parents if p not in a.parents]
        sizes = [net.node(p).size for p in parents]
        ta = np.broadcast_to(_expand(a.table, a.parents, parents), tuple(sizes) + (a.size,))
        tb = np.broadcast_to(_expand(b.table, b.parents, parents), tuple(sizes) + (b.size,))
        table = (ta[..., :, None] * tb[..., None, :]).reshape(tuple(sizes) + (alphabet.size,))
        merged = Node(name, alphabet, tuple(parents), a.kind, table)
        last = max(net._index[r1], net._index[r2])
        nodes = []
        for k, n in enumerate(net.nodes):
            if n.name in (r1, r2):
                if k == last:
                    nodes.append(merged)
                continue
            nodes.append(n)
    elif sources:
        table = (a.table[:, None] * b.table[None, :]).reshape(alphabet.size)
        merged = Node(name, alphabet, (), a.kind, table)
        first = min(net._index[r1], net._index[r2])
        nodes = []
        for k, n in enumerate(net.nodes):
            if k == first:
                nodes.append(merged)
            if n.name in (r1, r2):
                continue
            nodes.append(_reparent(n, (r1, r2), name, (a.size, b.size)))
    else:
        raise ValidationError("can only merge two sink reservoirs or two source reservoirs")
    res = tuple(r for r in net.reservoirs if r not in (r1, r2)) + (name,)
    return replace(net, nodes=tuple(nodes), reservoirs=res)


def _expand(table: np.ndarray, own: Sequence[str], parents: Sequence[str]) -> np.ndarray:
    """Reshape a node table so its parent axes align with ``parents`` (size-1 if absent)."""
    t = np.transpose(table, [list(own).index(p) for p in parents if p in own] + [len(own)])
    shape = []
    k = 0
    for p in parents:
        if p in own:
            shape.append(t.shape[k])
            k += 1
        else:
            shape.append(1)
    return t.reshape(shape + [table.shape[-1]])


def trade_reservoir_direction(net: NetSpec, r: str, atol: float = 1e-12) -> NetSpec:
    """Turn a sink reservoir into a source one, or vice versa.

    Sink case: ``r`` has one parent ``x`` that is a root.  The joint amplitude
    J(x, r) = A(r|x)A(x) is refactored as A(x|r)A(r).  The source case is the
    mirror image (``r`` a root whose only child ``x`` has ``r`` as sole parent).
    The evaluated state is unchanged.
    """
    if r not in net.reservoirs:
        raise ValidationError(f"{r!r} is not a reservoir")
    node = net.node(r)
    if node.kind != AMPLITUDE:
        raise ValidationError("direction trading applies to amplitude nets")
    if net.is_sink(r) and len(node.parents) == 1:
        x = net.node(node.parents[0])
        if x.parents:
            raise ValidationError(f"parent {x.name!r} of sink reservoir must be a root to trade")
        joint = x.table[:, None] * node.table  # J[x, r]
        marg = np.sqrt((np.abs(joint) ** 2).sum(axis=0))  # over x
        cond = _conditional_columns(joint, marg, atol)  # A(x|r) as [x, r]
        new_r = Node(node.name, node.alphabet, (), AMPLITUDE, marg)
        new_x = Node(x.name, x.alphabet, (r,), AMPLITUDE, cond.T)
        order = [n for n in net.nodes if n.name not in (r, x.name)]
        pos = min(net._index[x.name], net._index[r])
        nodes = list(order)
        nodes.insert(pos, new_x)
        nodes.insert(pos, new_r)
    elif net.is_source(r):
        kids = net.children(r)
        if len(kids) != 1 or net.node(kids[0]).parents != (r,):
            raise ValidationError("source reservoir must have one child whose only parent it is")
        x = net.node(kids[0])
        joint = node.table[:, None] * x.table  # J[r, x]
        marg = np.sqrt((np.abs(joint) ** 2).sum(axis=0))  # over r
        cond = _conditional_columns(joint, marg, atol)  # A(r|x) as [r, x]
        new_x = Node(x.name, x.alphabet, (), AMPLITUDE, marg)
        new_r = Node(node.name, node.alphabet, (x.name,), AMPLITUDE, cond.T)
        nodes = []
        for n in net.nodes:
            if n.name == r:
                continue
            if n.name == x.name:
                nodes += [new_x, new_r]
            else:
                nodes.append(n)
    else:
        raise ValidationError(f"reservoir {r!r} must be a single-parent sink or a source")
    return replace(net, nodes=tuple(nodes))


def _conditional_columns(joint: np.ndarray, marg: np.ndarray, atol: float) -> np.ndarray:
    """Divide each column of ``joint`` by ``marg``; fill empty columns with a basis vector."""
    cond = np.zeros_like(joint, dtype=complex)
    for k, m in enumerate(marg):
        col = joint[:, k]
        if m > atol:
            cond[:, k] = col / m
        elif np.max(np.abs(col)) > atol:
            raise ValidationError("zero marginal amplitude where the joint amplitude is nonzero")
        else:
            cond[0, k] = 1.0
    return cond
