"""Density-matrix calculus over named tensor factors.

Index convention for eigenvalues
--------------------------------
A joint spectrum ``lambda_{x,y}`` needs each eigenvalue attached to one joint
basis index.  :func:`eigensystem` fixes that attachment deterministically:

1. eigenvalues are processed in descending order, grouped into degenerate
   blocks (gap <= ``DEGENERACY_TOL``);
2. inside a block, the free joint index with the largest weight on the
   block's projector wins (ties go to the lexicographically smallest index);
   the block vector assigned to it is the projector applied to that basis
   vector, after which the projector is deflated.

For a diagonal matrix this places every eigenvalue on its own basis index,
so marginal eigenvalues coincide with the spectra of reduced matrices.
Values computed by :func:`marginal_eigenvalues` and the bridge functions
depend on this rule.
"""
from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from math import prod

import numpy as np

from .errors import ValidationError
from .probkit import Dist, EntropyTable, PType, _axes, _names

HERMITIAN_TOL = 1e-10
PSD_TOL = 1e-10
TRACE_TOL = 1e-10
DEGENERACY_TOL = 1e-10


class DensityMatrix:
    """Hermitian, PSD, unit-trace operator on a tensor product of named factors.

    Basis order is lexicographic over ``factors`` (first factor slowest).
    """

    __slots__ = ("factors", "matrix")

    def __init__(self, factors, matrix):
        factors = _axes(factors)
        dim = prod(a.size for _, a in factors)
        m = np.array(matrix, dtype=complex)
        if m.shape != (dim, dim):
            raise ValidationError(f"matrix shape {m.shape} does not match dimension {dim}")
        herm = np.max(np.abs(m - m.conj().T)) if dim else 0.0
        if herm > HERMITIAN_TOL:
            raise ValidationError(f"matrix is not Hermitian (max deviation {herm:.3g})")
        tr = np.trace(m).real
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValidationError(f"trace is {tr!r}, not 1 within {TRACE_TOL}")
        low = np.linalg.eigvalsh(m).min()
        if low < -PSD_TOL:
            raise ValidationError(f"matrix has negative eigenvalue {low:.3g}")
        m.setflags(write=False)
        object.__setattr__(self, "factors", factors)
        object.__setattr__(self, "matrix", m)

    def __setattr__(self, key, value):
        raise AttributeError("DensityMatrix is immutable")

    @classmethod
    def from_array(cls, matrix, names: Sequence[str], dims: Sequence[int]) -> "DensityMatrix":
        return cls(list(zip(names, dims)), matrix)

    @classmethod
    def diagonal(cls, d: Dist) -> "DensityMatrix":
        """Classical state embedded as a diagonal matrix."""
        return cls(d.axes, np.diag(d.weights.ravel()).astype(complex))

    @classmethod
    def pure(cls, factors, amplitudes) -> "DensityMatrix":
        psi = np.asarray(amplitudes, dtype=complex).ravel()
        return cls(factors, np.outer(psi, psi.conj()))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.factors)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(a.size for _, a in self.factors)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def spectrum(self) -> np.ndarray:
        """Eigenvalues in ascending order, tiny negatives clipped to 0."""
        return np.clip(np.linalg.eigvalsh(self.matrix), 0.0, None)

    def is_diagonal(self, atol: float = 1e-12) -> bool:
        off = self.matrix - np.diag(np.diag(self.matrix))
        return bool(np.max(np.abs(off), initial=0.0) <= atol)

    def is_classical_in(self, name: str, atol: float = 1e-10) -> bool:
        """True if the state is block diagonal in the computational basis of ``name``."""
        k = self.names.index(name)
        t = self.matrix.reshape(self.dims + self.dims)
        n = len(self.dims)
        t = np.moveaxis(t, [k, n + k], [0, 1])
        d = self.dims[k]
        off = [np.max(np.abs(t[i, j])) for i in range(d) for j in range(d) if i != j]
        return max(off, default=0.0) <= atol

    def entropy_table(self) -> "QuantumEntropies":
        return QuantumEntropies(self)

    def __repr__(self) -> str:
        return f"DensityMatrix({', '.join(f'{n}:{a.size}' for n, a in self.factors)})"


@dataclass(frozen=True)
class Isometry:
    """Amplitude matrix A(out|in) with orthonormal columns.

    ``entries`` has shape (prod out sizes, prod in sizes).
    """

    input_axes: tuple
    output_axes: tuple
    entries: np.ndarray

    def __post_init__(self):
        ins, outs = _axes(self.input_axes), _axes(self.output_axes)
        a = np.asarray(self.entries, dtype=complex)
        shape = (prod(x.size for _, x in outs), prod(x.size for _, x in ins))
        if a.shape != shape:
            a = a.reshape(shape)
        err = np.max(np.abs(a.conj().T @ a - np.eye(shape[1])))
        if err > 1e-9:
            raise ValidationError(f"amplitudes are not an isometry (max deviation {err:.3g})")
        object.__setattr__(self, "input_axes", ins)
        object.__setattr__(self, "output_axes", outs)
        object.__setattr__(self, "entries", a)


def _check_keep(rho: DensityMatrix, keep) -> tuple[str, ...]:
    keep = _names(keep)
    for n in keep:
        if n not in rho.names:
            raise ValidationError(f"unknown factor {n!r}; have {rho.names}")
    if len(set(keep)) != len(keep):
        raise ValidationError(f"repeated factor names in {keep}")
    return keep


def partial_trace(rho: DensityMatrix, keep) -> DensityMatrix:
    """Reduced state on ``keep``; kept factors stay in ``rho``'s order."""
    keep = set(_check_keep(rho, keep))
    n = len(rho.dims)
    t = rho.matrix.reshape(rho.dims + rho.dims)
    row = list(range(n))
    col = [i + n if rho.names[i] in keep else i for i in range(n)]
    kept = [i for i in range(n) if rho.names[i] in keep]
    out = kept + [i + n for i in kept]
    red = np.einsum(t, row + col, out)
    d = prod(rho.dims[i] for i in kept)
    return DensityMatrix([rho.factors[i] for i in kept], red.reshape(d, d))


def _plogp(vals: np.ndarray) -> float:
    v = vals[vals > 0]
    return float(-np.sum(v * np.log(v)))


def von_neumann_entropy(rho: DensityMatrix) -> float:
    return _plogp(rho.spectrum())


def conditional_entropy(rho: DensityMatrix, a, b=()) -> float:
    """S(a|b) = S(a,b) - S(b); may be negative."""
    return QuantumEntropies(rho).cond(a, b)


def quantum_mutual_information(rho: DensityMatrix, a, b, c=()) -> float:
    return QuantumEntropies(rho).mi(a, b, c)


class QuantumEntropies(EntropyTable):
    def __init__(self, rho: DensityMatrix):
        super().__init__(rho.names)
        self.rho = rho

    def _joint(self, names):
        return von_neumann_entropy(partial_trace(self.rho, [n for n in self.rho.names if n in names]))


@dataclass(frozen=True)
class Purification:
    """Reservoir-as-past-history decomposition rho = sum_r A(x|r)A(r) (...)^dagger."""

    amp_x_given_r: np.ndarray  # shape (dim, rank); columns are eigenvectors
    amp_r: np.ndarray  # shape (rank,); square roots of the nonzero eigenvalues

    def reassemble(self) -> np.ndarray:
        cols = self.amp_x_given_r * self.amp_r[None, :]
        return cols @ cols.conj().T


def purify(rho: DensityMatrix, cutoff: float = 1e-12) -> Purification:
    vals, vecs = np.linalg.eigh(rho.matrix)
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    keep = vals > cutoff
    return Purification(vecs[:, keep], np.sqrt(vals[keep]))


@dataclass(frozen=True)
class EigenSystem:
    """Spectrum of a state with every eigenvalue attached to a joint index.

    ``values`` has one axis per factor; ``vectors[:, k]`` is the eigenvector
    attached to flattened joint index ``k``.
    """

    factors: tuple
    values: np.ndarray
    vectors: np.ndarray

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.factors)

    def marginal(self, keep) -> np.ndarray:
        """Marginal eigenvalues: sum of ``values`` over factors not in ``keep``."""
        keep = _names(keep)
        for n in keep:
            if n not in self.names:
                raise ValidationError(f"unknown factor {n!r}")
        drop = tuple(i for i, n in enumerate(self.names) if n not in keep)
        return self.values.sum(axis=drop)

    def as_dist(self) -> Dist:
        """Eigenvalues viewed as a classical distribution over the joint index."""
        return Dist(self.factors, np.clip(self.values, 0, None) / np.clip(self.values, 0, None).sum())


def eigensystem(rho: DensityMatrix) -> EigenSystem:
    """Eigen-decomposition with the deterministic index convention (module doc)."""
    vals, vecs = np.linalg.eigh(rho.matrix)
    vals = np.clip(vals, 0.0, None)
    order = np.argsort(-vals, kind="stable")
    vals, vecs = vals[order], vecs[:, order]
    dim = rho.dim
    free = np.ones(dim, dtype=bool)
    out_vals = np.zeros(dim)
    out_vecs = np.zeros((dim, dim), dtype=complex)
    start = 0
    while start < dim:
        stop = start + 1
        while stop < dim and vals[start] - vals[stop] <= DEGENERACY_TOL:
            stop += 1
        block = vecs[:, start:stop]
        proj = block @ block.conj().T
        for _ in range(stop - start):
            weights = np.where(free, np.real(np.diag(proj)), -np.inf)
            best = int(np.argmax(weights))
            cand = np.flatnonzero(free & (weights >= weights[best] - 1e-12))
            best = int(cand[0])
            v = proj[:, best].copy()
            norm = np.linalg.norm(v)
            if norm < 1e-9:
                # projector has no weight on free indices; take any block vector
                q, _ = np.linalg.qr(proj)
                v = q[:, 0]
                norm = np.linalg.norm(v)
            v = v / norm
            proj = proj - np.outer(v, v.conj())
            out_vals[best] = vals[start] if stop - start == 1 else max(
                float(np.real(v.conj() @ rho.matrix @ v)), 0.0)
            out_vecs[:, best] = v
            free[best] = False
        start = stop
    return EigenSystem(rho.factors, out_vals.reshape(rho.dims), out_vecs)


def marginal_eigenvalues(rho: DensityMatrix, sum_out) -> np.ndarray:
    """Joint eigenvalues of ``rho`` summed over the factors in ``sum_out``.

    Generally differs from the spectrum of the reduced matrix; equal when
    ``rho`` is diagonal.
    """
    sum_out = set(_check_keep(rho, sum_out))
    es = eigensystem(rho)
    return es.marginal([n for n in rho.names if n not in sum_out])


def _ln_phi(r: np.ndarray) -> np.ndarray:
    # ln(r^r) = r ln r, with the removable singularity at 0 set to 0
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    pos = r > 0
    out[pos] = r[pos] * np.log(r[pos])
    return out


def _type_weights(ptype, shape) -> np.ndarray:
    if isinstance(ptype, PType):
        w = ptype.frequencies
    elif isinstance(ptype, Dist):
        w = ptype.weights
    else:
        w = np.asarray(ptype, dtype=float)
    if w.size != prod(shape):
        raise ValidationError(f"type has {w.size} cells, joint alphabet has {prod(shape)}")
    return w.reshape(shape)


def _bridge_lambdas(rho: DensityMatrix, groups: Sequence[tuple[str, ...]], eigenvalues: str):
    """Eigenvalue tables for each variable group, axes in group order."""
    out = []
    if eigenvalues == "marginal":
        es = eigensystem(rho)
    for g in groups:
        if eigenvalues == "marginal":
            lam = es.marginal(g)
            present = [n for n in rho.names if n in g]
        elif eigenvalues == "reduced":
            red = partial_trace(rho, g)
            lam = eigensystem(red).values
            present = list(red.names)
        else:
            raise ValidationError(f"eigenvalues must be 'marginal' or 'reduced', not {eigenvalues!r}")
        out.append(np.transpose(lam, [present.index(n) for n in g]) if g else np.asarray(lam))
    return out


def _bridge(rho, prob, ptype, x, y, e, eigenvalues):
    x, y, e = _names(x), _names(y), _names(e)
    names = x + y + e
    for n in names:
        if n not in rho.names:
            raise ValidationError(f"unknown factor {n!r}")
    if len(set(names)) != len(names):
        raise ValidationError("x, y, e must be disjoint")
    if not isinstance(prob, Dist):
        raise ValidationError("prob must be a Dist over the same factors")
    if set(prob.names) != set(names):
        raise ValidationError(f"prob must be over exactly {names}, got {prob.names}")
    p = np.transpose(prob.weights, [prob.axis(n) for n in names])
    shape = p.shape
    w = _type_weights(ptype, shape)

    nx, ny = len(x), len(y)
    ax_x = tuple(range(nx))
    ax_y = tuple(range(nx, nx + ny))
    groups = [names, x + e, y + e, e] if e else [names, x, y]
    lams = _bridge_lambdas(rho, groups, eigenvalues)

    def expand(arr, keep_axes):
        full = [1] * len(shape)
        for k, ax in enumerate(keep_axes):
            full[ax] = shape[ax]
        return np.asarray(arr).reshape(full)

    ne = len(e)
    ax_e = tuple(range(nx + ny, nx + ny + ne))
    if e:
        specs = [(+1, tuple(range(len(shape)))), (-1, ax_x + ax_e), (-1, ax_y + ax_e), (+1, ax_e)]
    else:
        specs = [(+1, tuple(range(len(shape)))), (-1, ax_x), (-1, ax_y)]

    total = np.zeros(shape)
    support = w > 0
    for (sign, axes), lam in zip(specs, lams):
        drop = tuple(a for a in range(len(shape)) if a not in axes)
        pm = expand(p.sum(axis=drop) if drop else p, axes)
        lam_b = np.broadcast_to(expand(lam, axes), shape)
        pm_b = np.broadcast_to(pm, shape)
        if np.any(support & (pm_b <= 0)):
            bad = np.argwhere(support & (pm_b <= 0))[0]
            raise ValidationError(f"zero probability at joint index {tuple(bad)} with nonzero type weight")
        term = np.zeros(shape)
        term[support] = _ln_phi(lam_b[support]) / pm_b[support]
        total += sign * term
    return float(np.sum(w[support] * total[support]))


def bridge_cmi(rho: DensityMatrix, prob: Dist, ptype, x, y, e, *, eigenvalues: str = "marginal") -> float:
    """Bridge replacement for (1/n) ln P(x^n : y^n | e^n).

    Sum over joint symbols of type weight times
    ``ln phi(lam_xye)/P_xye + ln phi(lam_e)/P_e - ln phi(lam_xe)/P_xe - ln phi(lam_ye)/P_ye``
    with ``phi(r) = r**r``.  ``eigenvalues="marginal"`` takes every lambda as a
    marginal of the joint spectrum of ``rho`` (provenance kept);
    ``"reduced"`` uses spectra of the reduced matrices instead.
    """
    if not _names(e):
        raise ValidationError("bridge_cmi needs a nonempty conditioning group; use bridge_mi")
    return _bridge(rho, prob, ptype, x, y, e, eigenvalues)


def bridge_mi(rho: DensityMatrix, prob: Dist, ptype, x, y, *, eigenvalues: str = "marginal") -> float:
    """Bridge replacement for (1/n) ln P(x^n : y^n); see :func:`bridge_cmi`."""
    return _bridge(rho, prob, ptype, x, y, (), eigenvalues)


def random_density_matrix(rng: np.random.Generator, names: Sequence[str], dims: Sequence[int],
                          rank: int | None = None) -> DensityMatrix:
    """Ginibre-random mixed state of the given rank (full rank by default)."""
    d = prod(dims)
    rank = d if rank is None else rank
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    m = g @ g.conj().T
    m = (m + m.conj().T) / 2
    return DensityMatrix(list(zip(names, dims)), m / np.trace(m).real)


def random_unitary(rng: np.random.Generator, d: int) -> np.ndarray:
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph[None, :]
