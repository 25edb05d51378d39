"""Wiretap rate regions R(P), their convex hulls, and capacity optimizers.

A wiretap channel is a kernel P(y, z | x) stored as an array of shape
(N_x, N_y, N_z) or as a :class:`Channel` with one input and outputs (y, z).
A classical auxiliary model is P(u), P(v|u), P(x|v); the quantum one has
amplitudes A(u), A(v|u), A(x|v,u).  All rates are in nats per channel use.
"""
from __future__ import annotations

import itertools
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.spatial import ConvexHull

from .errors import ValidationError
from .netkit import NetSpec, Node, delta_node, evaluate_quantum
from .probkit import Channel, Dist, DistEntropies
from .quantkit import DensityMatrix, Isometry, QuantumEntropies

MEMBERSHIP_TOL = 1e-12
_TINY = 1e-300


# ---------------------------------------------------------------- channels

def bsc(p: float) -> np.ndarray:
    """Binary symmetric kernel W[x, y]."""
    if not 0.0 <= p <= 1.0:
        raise ValidationError("crossover probability must lie in [0, 1]")
    return np.array([[1 - p, p], [p, 1 - p]])


def product_channel(main, eve) -> np.ndarray:
    """Wiretap kernel P(y,z|x) = P(y|x) P(z|x)."""
    main, eve = np.asarray(main, float), np.asarray(eve, float)
    if main.shape[0] != eve.shape[0]:
        raise ValidationError("main and eavesdropper kernels need the same input alphabet")
    return main[:, :, None] * eve[:, None, :]


def bsc_wiretap(p_main: float, p_eve: float) -> np.ndarray:
    """BSC(p_main) to the receiver and BSC(p_eve) to the eavesdropper."""
    return product_channel(bsc(p_main), bsc(p_eve))


def wiretap_kernel(channel) -> np.ndarray:
    """Normalize a wiretap channel to a row-stochastic array of shape (N_x, N_y, N_z)."""
    if isinstance(channel, Channel):
        if len(channel.input_axes) != 1 or len(channel.output_axes) != 2:
            raise ValidationError("a wiretap channel has one input and two outputs (y, z)")
        names = channel.output_names
        k = channel.kernel
        if set(names) == {"y", "z"} and names != ("y", "z"):
            k = np.transpose(k, (0, 2, 1))
        return np.array(k)
    k = np.asarray(channel, dtype=float)
    if k.ndim != 3:
        raise ValidationError(f"wiretap kernel must have shape (N_x, N_y, N_z), got {k.shape}")
    if np.any(k < 0) or np.max(np.abs(k.sum(axis=(1, 2)) - 1)) > 1e-10:
        raise ValidationError("wiretap kernel rows must be probability distributions")
    return k


def as_channel(kernel) -> Channel:
    k = wiretap_kernel(kernel)
    return Channel.from_array(k, ["x"], ["y", "z"])


# ------------------------------------------------------------- data types

@dataclass(frozen=True)
class RatePoint:
    r_e: float
    r_s: float
    r_t: float

    def is_valid(self, tol: float = MEMBERSHIP_TOL) -> bool:
        return self.r_s >= -tol and self.r_t >= -tol and -tol <= self.r_e <= self.r_s + tol

    def as_array(self) -> np.ndarray:
        return np.array([self.r_e, self.r_s, self.r_t])

    @classmethod
    def of(cls, r) -> "RatePoint":
        return r if isinstance(r, RatePoint) else cls(*map(float, r))


@dataclass(frozen=True)
class RegionConstraints:
    """The four one-letter informations that fix R(P)."""

    i_diff: float
    i_v: float
    i_yu: float
    i_zu: float
    source: str = "classical"

    @property
    def ell(self) -> float:
        return min(self.i_yu, self.i_zu)

    @property
    def empty(self) -> bool:
        return self.i_diff < -MEMBERSHIP_TOL

    def as_dict(self) -> dict:
        return {"i_diff": self.i_diff, "i_v": self.i_v, "i_yu": self.i_yu,
                "i_zu": self.i_zu, "ell": self.ell, "source": self.source}


def _stochastic(a, name, rows: int | None = None) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if np.any(a < 0) or np.max(np.abs(a.sum(axis=-1) - 1.0)) > 1e-10:
        raise ValidationError(f"{name} must be nonnegative with rows summing to 1")
    if rows is not None and a.shape[0] != rows:
        raise ValidationError(f"{name} has {a.shape[0]} rows, expected {rows}")
    return a


@dataclass(frozen=True, eq=False)
class AuxiliaryModel:
    """Classical channel prefix P(u), P(v|u) (N_u, N_v), P(x|v) (N_v, N_x)."""

    p_u: np.ndarray
    p_v_given_u: np.ndarray
    p_x_given_v: np.ndarray

    def __post_init__(self):
        pu = _stochastic(self.p_u, "p_u")
        pvu = _stochastic(self.p_v_given_u, "p_v_given_u", rows=pu.size)
        pxv = _stochastic(self.p_x_given_v, "p_x_given_v", rows=pvu.shape[1])
        if pu.ndim != 1 or pvu.ndim != 2 or pxv.ndim != 2:
            raise ValidationError("auxiliary tables must be a vector and two matrices")
        for a in (pu, pvu, pxv):
            a.setflags(write=False)
        object.__setattr__(self, "p_u", pu)
        object.__setattr__(self, "p_v_given_u", pvu)
        object.__setattr__(self, "p_x_given_v", pxv)

    @property
    def n_u(self) -> int:
        return self.p_u.size

    @property
    def n_v(self) -> int:
        return self.p_v_given_u.shape[1]

    @property
    def n_x(self) -> int:
        return self.p_x_given_v.shape[1]

    def joint(self, channel) -> Dist:
        """P(y, z, v, u) for the given wiretap channel."""
        k = wiretap_kernel(channel)
        if k.shape[0] != self.n_x:
            raise ValidationError(f"channel input size {k.shape[0]} != auxiliary x size {self.n_x}")
        w = np.einsum("u,uv,vx,xyz->yzvu", self.p_u, self.p_v_given_u, self.p_x_given_v, k)
        return Dist.from_array(w, ["y", "z", "v", "u"])

    def to_dict(self) -> dict:
        return {"p_u": self.p_u.tolist(), "p_v_given_u": self.p_v_given_u.tolist(),
                "p_x_given_v": self.p_x_given_v.tolist()}

    @classmethod
    def trivial(cls, p_x) -> "AuxiliaryModel":
        """U constant and V = X with input distribution ``p_x``."""
        p_x = np.asarray(p_x, float)
        return cls(np.ones(1), p_x[None, :], np.eye(p_x.size))


@dataclass(frozen=True, eq=False)
class QuantumAuxiliaryModel:
    """Amplitudes A(u) (N_u), A(v|u) (N_u, N_v), A(x|v,u) (N_v, N_u, N_x)."""

    amp_u: np.ndarray
    amp_v_given_u: np.ndarray
    amp_x_given_vu: np.ndarray

    def __post_init__(self):
        au = np.asarray(self.amp_u, complex)
        avu = np.asarray(self.amp_v_given_u, complex)
        axvu = np.asarray(self.amp_x_given_vu, complex)
        if au.ndim != 1 or avu.shape[0] != au.size or axvu.shape[:2] != (avu.shape[1], au.size):
            raise ValidationError("amplitude shapes must be (N_u,), (N_u, N_v), (N_v, N_u, N_x)")
        object.__setattr__(self, "amp_u", au)
        object.__setattr__(self, "amp_v_given_u", avu)
        object.__setattr__(self, "amp_x_given_vu", axvu)

    @classmethod
    def from_classical(cls, aux: AuxiliaryModel) -> "QuantumAuxiliaryModel":
        """Square-root amplitudes of a classical model (x ignores u)."""
        axv = np.sqrt(aux.p_x_given_v)
        return cls(np.sqrt(aux.p_u), np.sqrt(aux.p_v_given_u),
                   np.broadcast_to(axv[:, None, :], (aux.n_v, aux.n_u, aux.n_x)).copy())


# ------------------------------------------------------------ constraints

def constraints_from_joint(joint: Dist, source: str = "classical") -> RegionConstraints:
    """Region fields from a joint over y, z, v, u (Dist or DensityMatrix)."""
    tab = QuantumEntropies(joint) if isinstance(joint, DensityMatrix) else DistEntropies(joint)
    i_v = tab.mi("y", "v", "u")
    i_zv = tab.mi("z", "v", "u")
    return RegionConstraints(i_v - i_zv, _nonneg(i_v), _nonneg(tab.mi("y", "u")),
                             _nonneg(tab.mi("z", "u")), source)


def _nonneg(x: float, tol: float = 1e-10) -> float:
    """Clear roundoff below zero on quantities that are nonnegative in exact arithmetic."""
    return 0.0 if -tol < x < 0 else x


def constraints_classical(channel, aux: AuxiliaryModel) -> RegionConstraints:
    return constraints_from_joint(aux.joint(channel))


def factorize(joint: Dist) -> Dist:
    """Replace P(y,z|v,u) by P(y|v,u) P(z|v,u), keeping P(v,u)."""
    p = joint.array(["y", "z", "v", "u"])
    pvu = p.sum(axis=(0, 1))
    with np.errstate(invalid="ignore", divide="ignore"):
        py = np.where(pvu > 0, p.sum(axis=1) / pvu, 0.0)
        pz = np.where(pvu > 0, p.sum(axis=0) / pvu, 0.0)
    w = py[:, None] * pz[None, :] * pvu
    return Dist([(n, joint.alphabet(n)) for n in ("y", "z", "v", "u")], w)


def embed_classical_channel(channel) -> Isometry:
    """Isometry A(y,z|x) = sign * sqrt(P(y,z|x)) with signs making columns orthogonal.

    Signs are searched exhaustively per column; fails if no pattern works.
    """
    k = wiretap_kernel(channel)
    nx, ny, nz = k.shape
    cols = np.sqrt(k.reshape(nx, ny * nz))
    chosen = [cols[0]]
    for x in range(1, nx):
        support = np.flatnonzero(cols[x] > 0)
        for signs in itertools.product((1.0, -1.0), repeat=support.size):
            c = cols[x].copy()
            c[support] *= signs
            if all(abs(c @ prev) < 1e-12 for prev in chosen):
                chosen.append(c)
                break
        else:
            raise ValidationError(f"no sign pattern makes column {x} orthogonal; channel has no real embedding")
    a = np.array(chosen).T
    return Isometry([("x", nx)], [("y", ny), ("z", nz)], a)


RESERVOIR_PRESETS = {"u": ("u",), "full": ("x", "yz", "v", "u"), "none": ()}


def wiretap_net(channel: Isometry, aux: QuantumAuxiliaryModel, reservoir="u") -> NetSpec:
    """QB net for (y, z, v, u): u -> v -> x <- u, x -> (y,z) split by delta nodes.

    ``reservoir`` names the nodes dephased by one traced sink reservoir that
    copies them ("u" default, "full" for x, yz, v, u, "none", or a tuple).
    """
    if not isinstance(channel, Isometry):
        raise ValidationError("the quantum wiretap channel must be an Isometry A(y,z|x)")
    if len(channel.input_axes) != 1 or len(channel.output_axes) != 2:
        raise ValidationError("channel isometry needs one input x and outputs (y, z)")
    ny, nz = channel.output_axes[0][1].size, channel.output_axes[1][1].size
    nx = channel.input_axes[0][1].size
    nu, nv = aux.amp_u.size, aux.amp_v_given_u.shape[1]
    if aux.amp_x_given_vu.shape[2] != nx:
        raise ValidationError("auxiliary x size does not match the channel input")
    u = Node.amplitude("u", nu, aux.amp_u)
    v = Node.amplitude("v", nv, aux.amp_v_given_u, ("u",))
    x = Node.amplitude("x", nx, aux.amp_x_given_vu, ("v", "u"))
    yz = Node.amplitude("yz", ny * nz, channel.entries.T, ("x",))
    nodes = [u, v, x, yz, delta_node("y", yz, (ny, nz), 0), delta_node("z", yz, (ny, nz), 1)]
    copied = RESERVOIR_PRESETS.get(reservoir, reservoir) if isinstance(reservoir, str) else tuple(reservoir)
    reservoirs = ()
    if copied:
        sizes = {"u": nu, "v": nv, "x": nx, "yz": ny * nz}
        unknown = set(copied) - set(sizes)
        if unknown:
            raise ValidationError(f"cannot dephase {sorted(unknown)}; choose from {sorted(sizes)}")
        shape = tuple(sizes[c] for c in copied)
        dim = int(np.prod(shape))
        table = np.eye(dim).reshape(shape + (dim,))
        nodes.append(Node.amplitude("r", dim, table, copied))
        reservoirs = ("r",)
    return NetSpec(nodes, reservoirs, ("y", "z", "v", "u"))


def constraints_quantum(channel: Isometry, aux: QuantumAuxiliaryModel, reservoir="u") -> RegionConstraints:
    rho = evaluate_quantum(wiretap_net(channel, aux, reservoir))
    return constraints_from_joint(rho, source="quantum")


# ------------------------------------------------------ membership, hulls

def _halfspaces(c: RegionConstraints) -> tuple[np.ndarray, np.ndarray]:
    """A r <= b describing R(P) for r = (r_e, r_s, r_t)."""
    a = np.array([
        [-1, 0, 0], [1, -1, 0], [0, -1, 0], [0, 0, -1],
        [1, 0, 0], [0, 1, 1], [0, 0, 1]], dtype=float)
    b = np.array([0, 0, 0, 0, c.i_diff, c.i_v + c.ell, c.ell])
    return a, b


def slack(c: RegionConstraints, r) -> float:
    """Smallest constraint slack of ``r`` in R(P); negative means outside."""
    a, b = _halfspaces(c)
    return float(np.min(b - a @ RatePoint.of(r).as_array()))


def contains(c: RegionConstraints, r, tol: float = MEMBERSHIP_TOL) -> bool:
    """Closed-region membership of a rate point."""
    return slack(c, r) >= -tol


def vertices(c: RegionConstraints) -> np.ndarray:
    """Vertices of the polytope R(P), shape (k, 3); empty when i_diff < 0."""
    a, b = _halfspaces(c)
    if c.empty:
        return np.zeros((0, 3))
    pts = []
    for idx in itertools.combinations(range(len(b)), 3):
        m = a[list(idx)]
        if abs(np.linalg.det(m)) < 1e-12:
            continue
        p = np.linalg.solve(m, b[list(idx)])
        if np.all(a @ p <= b + 1e-10):
            pts.append(p)
    return _unique_rows(np.array(pts).reshape(-1, 3)) + 0.0


def _unique_rows(p: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    out = []
    for row in p:
        if not any(np.max(np.abs(row - q)) <= tol for q in out):
            out.append(row)
    return np.array(out).reshape(-1, 3)


@dataclass
class RegionHull:
    """Convex hull of a point cloud in rate space, handling flat (low-rank) sets."""

    points: np.ndarray
    vertex_index: np.ndarray
    origin: np.ndarray
    basis: np.ndarray  # (k, 3) orthonormal rows spanning the affine hull
    equations: np.ndarray | None = None  # in basis coordinates, for k >= 2

    @property
    def vertices(self) -> np.ndarray:
        return self.points[self.vertex_index]

    @property
    def dimension(self) -> int:
        return self.basis.shape[0]

    def contains(self, r, tol: float = 1e-9) -> bool:
        p = np.asarray(RatePoint.of(r).as_array() if not isinstance(r, np.ndarray) else r, float) - self.origin
        coords = self.basis @ p
        if np.linalg.norm(p - self.basis.T @ coords) > tol:
            return False
        if self.dimension == 0:
            return True
        if self.dimension == 1:
            proj = (self.points - self.origin) @ self.basis[0]
            return proj.min() - tol <= coords[0] <= proj.max() + tol
        return bool(np.all(self.equations[:, :-1] @ coords + self.equations[:, -1] <= tol))


def convex_hull(points: np.ndarray) -> RegionHull:
    pts = np.asarray(points, float).reshape(-1, 3)
    if len(pts) == 0:
        raise ValidationError("cannot take the hull of an empty point set")
    origin = pts.mean(axis=0)
    centered = pts - origin
    _, sv, vt = np.linalg.svd(centered, full_matrices=False)
    k = int(np.sum(sv > 1e-10 * max(1.0, sv[0] if sv.size else 0.0)))
    basis = vt[:k]
    if k == 0:
        return RegionHull(pts, np.array([0]), origin, basis)
    coords = centered @ basis.T
    if k == 1:
        idx = np.unique([np.argmin(coords[:, 0]), np.argmax(coords[:, 0])])
        return RegionHull(pts, idx, origin, basis)
    hull = ConvexHull(coords)
    return RegionHull(pts, np.sort(hull.vertices), origin, basis, hull.equations)


def region_hull(constraints: Sequence[RegionConstraints]) -> RegionHull:
    """Hull of the union of R(P) over the given constraint sets."""
    pts = [vertices(c) for c in constraints]
    pts = [p for p in pts if len(p)]
    if not pts:
        raise ValidationError("every region is empty (i_diff < 0 throughout)")
    return convex_hull(np.vstack(pts))


def time_share(models: Sequence[AuxiliaryModel], weights: Sequence[float]) -> AuxiliaryModel:
    """Mixture model with the time-sharing index absorbed into U and V.

    U' = (b, u) and V' = (b, v) with P(b) = weights; P(x | v') = P_b(x | v).
    """
    w = np.asarray(weights, float)
    if len(models) != w.size or len(models) == 0:
        raise ValidationError("need one weight per model")
    if np.any(w < 0) or abs(w.sum() - 1) > 1e-12:
        raise ValidationError("time-sharing weights must be a probability vector")
    nx = {m.n_x for m in models}
    if len(nx) != 1:
        raise ValidationError("mixed models must share the channel input alphabet")
    nu = sum(m.n_u for m in models)
    nv = sum(m.n_v for m in models)
    p_u = np.zeros(nu)
    p_vu = np.zeros((nu, nv))
    p_xv = np.zeros((nv, nx.pop()))
    ou = ov = 0
    for wb, m in zip(w, models):
        p_u[ou:ou + m.n_u] = wb * m.p_u
        p_vu[ou:ou + m.n_u, ov:ov + m.n_v] = m.p_v_given_u
        p_xv[ov:ov + m.n_v] = m.p_x_given_v
        ou += m.n_u
        ov += m.n_v
    return AuxiliaryModel(p_u, p_vu, p_xv)


# --------------------------------------------------------------- sampling

def default_cardinalities(n_x: int) -> tuple[int, int]:
    """Configurable defaults (N_u, N_v); not proven sufficient."""
    return n_x + 3, n_x * (n_x + 4) + 3


@dataclass(frozen=True)
class SamplerConfig:
    """Dirichlet concentrations for P(u), each row of P(v|u), each row of P(x|v)."""

    samples: int = 100
    alpha_u: float = 1.0
    alpha_v: float = 1.0
    alpha_x: float = 1.0

    def __post_init__(self):
        if self.samples < 1:
            raise ValidationError("sampler needs at least one sample")
        if min(self.alpha_u, self.alpha_v, self.alpha_x) <= 0:
            raise ValidationError("Dirichlet concentrations must be positive")


def random_auxiliary(rng: np.random.Generator, n_u: int, n_v: int, n_x: int,
                     config: SamplerConfig = SamplerConfig()) -> AuxiliaryModel:
    def rows(k, m, alpha):
        r = rng.dirichlet(np.full(m, alpha), size=k)
        # tiny concentrations can underflow to an all-zero row
        bad = ~np.isfinite(r).all(axis=1) | (r.sum(axis=1) == 0)
        r[bad] = np.eye(m)[rng.integers(m, size=bad.sum())]
        return r / r.sum(axis=1, keepdims=True)

    return AuxiliaryModel(rows(1, n_u, config.alpha_u)[0], rows(n_u, n_v, config.alpha_v),
                          rows(n_v, n_x, config.alpha_x))


@dataclass
class RegionSample:
    models: list[AuxiliaryModel]
    constraints: list[RegionConstraints]
    hull: RegionHull | None

    def best(self) -> tuple[RegionConstraints, AuxiliaryModel]:
        k = int(np.argmax([c.i_diff for c in self.constraints]))
        return self.constraints[k], self.models[k]


def sample_region(channel, n_u: int | None = None, n_v: int | None = None,
                  config: SamplerConfig = SamplerConfig(), seed: int = 0) -> RegionSample:
    """Sample auxiliaries, evaluate R(P) for each and hull their union."""
    k = wiretap_kernel(channel)
    du, dv = default_cardinalities(k.shape[0])
    n_u, n_v = n_u or du, n_v or dv
    if n_u < 1 or n_v < 1:
        raise ValidationError("alphabet bounds must be at least 1")
    rng = np.random.default_rng(seed)
    models = [random_auxiliary(rng, n_u, n_v, k.shape[0], config) for _ in range(config.samples)]
    cons = [constraints_classical(k, m) for m in models]
    nonempty = [c for c in cons if not c.empty]
    hull = region_hull(nonempty) if nonempty else None
    return RegionSample(models, cons, hull)


# ------------------------------------------------------------- capacities

def _h_rows(p: np.ndarray) -> np.ndarray:
    return -np.sum(np.where(p > 0, p * np.log(np.maximum(p, _TINY)), 0.0), axis=-1)


def secrecy_objective(kernel: np.ndarray, p_u, p_vu, p_xv) -> float:
    """Fast i_diff = I(Y:V|U) - I(Z:V|U) for a classical auxiliary."""
    wy, wz = kernel.sum(axis=2), kernel.sum(axis=1)
    py_v, pz_v = p_xv @ wy, p_xv @ wz  # (N_v, N_y), (N_v, N_z)
    hy_v, hz_v = _h_rows(py_v), _h_rows(pz_v)
    py_u, pz_u = p_vu @ py_v, p_vu @ pz_v  # (N_u, N_y)
    per_u = (_h_rows(py_u) - p_vu @ hy_v) - (_h_rows(pz_u) - p_vu @ hz_v)
    return float(p_u @ per_u)


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass(frozen=True)
class OptimizerConfig:
    restarts: int = 64
    seed: int = 0
    maxiter: int = 500
    scale: float = 2.0  # std of the initial logits
    workers: int = 1


@dataclass
class CapacityResult:
    value: float
    model: AuxiliaryModel
    restart_values: list[float] = field(default_factory=list)

    @property
    def spread(self) -> float:
        return float(max(self.restart_values) - min(self.restart_values)) if self.restart_values else 0.0


def _snap(p: np.ndarray, tol: float = 1e-3) -> np.ndarray:
    q = p.copy()
    near = q.max(axis=-1) > 1 - tol
    q[near] = np.eye(q.shape[-1])[np.argmax(q[near], axis=-1)]
    return q


def secrecy_capacity(channel, n_u: int | None = None, n_v: int | None = None,
                     config: OptimizerConfig = OptimizerConfig()) -> CapacityResult:
    """Multi-start maximization of I(Y:V|U) - I(Z:V|U) over auxiliaries.

    Simplex parameters are softmaxes of unconstrained logits; each restart is
    an L-BFGS run with finite-difference gradients, followed by a snap of
    nearly deterministic rows when that does not lower the value.
    """
    k = wiretap_kernel(channel)
    nx = k.shape[0]
    du, dv = default_cardinalities(nx)
    n_u, n_v = n_u or du, n_v or dv
    if n_u < 1 or n_v < 1:
        raise ValidationError("N_u and N_v must be at least 1")
    sizes = [(n_u,), (n_u, n_v), (n_v, nx)]
    splits = np.cumsum([int(np.prod(s)) for s in sizes])[:-1]

    def unpack(theta):
        parts = np.split(theta, splits)
        return [_softmax(p.reshape(s)) for p, s in zip(parts, sizes)]

    def neg(theta):
        return -secrecy_objective(k, *unpack(theta))

    seeds = np.random.SeedSequence(config.seed).spawn(config.restarts)

    def run(ss):
        rng = np.random.default_rng(ss)
        theta0 = rng.normal(scale=config.scale, size=int(sum(np.prod(s) for s in sizes)))
        res = minimize(neg, theta0, method="L-BFGS-B", options={"maxiter": config.maxiter})
        parts = unpack(res.x)
        val = secrecy_objective(k, *parts)
        snapped = [parts[0], _snap(parts[1]), _snap(parts[2])]
        sval = secrecy_objective(k, *snapped)
        if sval >= val:
            parts, val = snapped, sval
        return val, parts

    if config.workers > 1:
        with ThreadPoolExecutor(config.workers) as pool:
            results = list(pool.map(run, seeds))
    else:
        results = [run(s) for s in seeds]
    values = [r[0] for r in results]
    best = int(np.argmax(values))
    # the trivial auxiliary (V constant) gives 0, so C_s >= 0
    value, parts = results[best]
    model = AuxiliaryModel(*parts)
    if value < 0:
        value, model = 0.0, AuxiliaryModel(np.ones(1), np.ones((1, 1)), np.eye(nx)[:1])
    return CapacityResult(float(value), model, [float(v) for v in values])


def channel_coding_capacity(channel, tol: float = 1e-12, max_iter: int = 100000) -> float:
    """Blahut-Arimoto capacity of a kernel W[x, y] in nats."""
    if isinstance(channel, Channel):
        w = channel.kernel.reshape(int(np.prod(channel.kernel.shape[:len(channel.input_axes)])), -1)
    else:
        w = np.asarray(channel, float)
        w = w.reshape(w.shape[0], -1)
    w = _stochastic(w, "channel")
    p = np.full(w.shape[0], 1.0 / w.shape[0])
    logw = np.log(np.maximum(w, _TINY))
    for _ in range(max_iter):
        q = p @ w
        # D(W(.|x) || q) per input
        d = np.sum(np.where(w > 0, w * (logw - np.log(np.maximum(q, _TINY))), 0.0), axis=1)
        lower, upper = float(p @ d), float(d.max())
        if upper - lower < tol:
            break
        p = p * np.exp(d - d.max())
        p /= p.sum()
    return max(lower, 0.0)
