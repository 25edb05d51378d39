"""Residual checks of the chain-rule identities behind the wiretap converse.

Every check evaluates both sides from one :class:`EntropyTable`, so the same
code runs on a classical joint (Shannon H) or a density matrix (von Neumann
S).  Block convention inside a model: ``alpha_j = (y_{<j}, z_{>j})``.
"""
from __future__ import annotations

import json
from collections.abc import Iterable, Iterator, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import CapExceededError, ValidationError
from .probkit import Dist, EntropyTable, _names, as_entropy_table, sigma_gt, sigma_lt
from .quantkit import DensityMatrix, random_density_matrix

EQ_TOL = 1e-10
INEQ_TOL = 1e-9
FAMILY_TOL = 1e-9  # multiplied by n
MAX_CLASSICAL_SIZE = 1 << 20
MAX_QUANTUM_DIM = 1024


@dataclass
class IdentityReport:
    """Outcome of one identity or inequality check (all values in nats).

    For inequalities ``lhs`` holds the slack expression, ``rhs`` is 0 and
    ``residual`` is the violation ``max(-slack, 0)``.
    """

    name: str
    lhs: float
    rhs: float
    residual: float
    passed: bool
    tolerance: float
    kind: str = "equality"
    seed: int | None = None
    backend: str = "H"
    note: str = ""

    @property
    def slack(self) -> float | None:
        return self.lhs - self.rhs if self.kind == "inequality" else None

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def _backend(state) -> str:
    return "S" if isinstance(state, DensityMatrix) else "H"


def _equality(name, lhs, rhs, tol, state, seed=None, note="") -> IdentityReport:
    res = abs(lhs - rhs)
    return IdentityReport(name, float(lhs), float(rhs), float(res), bool(res <= tol), tol,
                          "equality", seed, _backend(state), note)


def _inequality(name, slack, tol, state, seed=None, note="") -> IdentityReport:
    return IdentityReport(name, float(slack), 0.0, float(max(-slack, 0.0)), bool(slack >= -tol), tol,
                          "inequality", seed, _backend(state), note)


def _require(tab: EntropyTable, *groups):
    for g in groups:
        missing = set(_names(g)) - set(tab.names)
        if missing:
            raise ValidationError(f"state has no block {sorted(missing)}")


def _classical_factor(state, names, what):
    if isinstance(state, DensityMatrix):
        for n in _names(names):
            if not state.is_classical_in(n):
                raise ValidationError(f"{what} {n!r} must be classical (block diagonal) in the quantum case")


def check_two_parents(state, a="a", x="x", y="y", *, seed=None) -> IdentityReport:
    """0 <= S(a|x) + S(a|y)."""
    tab = as_entropy_table(state)
    _require(tab, a, x, y)
    slack = tab.cond(a, x) + tab.cond(a, y)
    return _inequality("two_parents", slack, INEQ_TOL, state, seed)


def check_swap_zero_one(state, x="x", a="a", b="b", *, seed=None) -> IdentityReport:
    """I(x:b) - I(x:a) = I(x:b|a) - I(x:a|b)."""
    tab = as_entropy_table(state)
    _require(tab, x, a, b)
    lhs = tab.mi(x, b) - tab.mi(x, a)
    rhs = tab.mi(x, b, a) - tab.mi(x, a, b)
    return _equality("swap_zero_one", lhs, rhs, EQ_TOL, state, seed)


def check_cmi_leq_mi(state, a="a", beta="beta", j="j", *, seed=None) -> IdentityReport:
    """I(a:b|j) <= I(a:b) with b = (beta, j) and j classical."""
    tab = as_entropy_table(state)
    _require(tab, a, beta, j)
    _classical_factor(state, j, "conditioning variable")
    b = _names(beta) + _names(j)
    slack = tab.mi(a, b) - tab.mi(a, beta, j)
    return _inequality("cmi_leq_mi", slack, INEQ_TOL, state, seed)


def check_markov_diff(state, a="a", e="e", b="b", *, seed=None, markov_tol=EQ_TOL) -> IdentityReport:
    """I(a:e|b) = I(a:e) - I(a:b) for a chain a <- e <- b.

    The precondition I(a:b|e) = 0 is measured first; when it fails the report
    is marked as not passed and the note says why.
    """
    tab = as_entropy_table(state)
    _require(tab, a, e, b)
    _classical_factor(state, e, "middle variable")
    lhs = tab.mi(a, e, b)
    rhs = tab.mi(a, e) - tab.mi(a, b)
    pre = tab.mi(a, b, e)
    rep = _equality("markov_diff", lhs, rhs, EQ_TOL, state, seed)
    if abs(pre) > markov_tol:
        rep.passed = False
        rep.note = f"precondition failed: I(a:b|e) = {pre:.3g}, not a Markov chain"
    return rep


@dataclass
class WiretapModel:
    """A state over messages s, t and blocks y^n, z^n (optionally x^n)."""

    state: Dist | DensityMatrix
    n: int
    s: tuple[str, ...] = ("s",)
    t: tuple[str, ...] = ("t",)
    ys: tuple[str, ...] = ()
    zs: tuple[str, ...] = ()
    xs: tuple[str, ...] | None = None
    seed: int | None = None
    _tab: EntropyTable = field(init=False, repr=False)

    def __post_init__(self):
        self.s, self.t = _names(self.s), _names(self.t)
        self.ys = _names(self.ys) or tuple(f"y{j + 1}" for j in range(self.n))
        self.zs = _names(self.zs) or tuple(f"z{j + 1}" for j in range(self.n))
        if self.xs is not None:
            self.xs = _names(self.xs)
        if self.n < 1:
            raise ValidationError("n must be at least 1")
        if len(self.ys) != self.n or len(self.zs) != self.n or (self.xs is not None and len(self.xs) != self.n):
            raise ValidationError(f"every block must have n = {self.n} variables")
        blocks = [self.s, self.t, self.ys, self.zs] + ([self.xs] if self.xs else [])
        flat = [v for b in blocks for v in b]
        if len(set(flat)) != len(flat):
            raise ValidationError("model blocks must be disjoint")
        if isinstance(self.state, DensityMatrix):
            if self.state.dim > MAX_QUANTUM_DIM:
                raise CapExceededError(f"state dimension {self.state.dim} exceeds {MAX_QUANTUM_DIM}")
        elif self.state.weights.size > MAX_CLASSICAL_SIZE:
            raise CapExceededError(f"joint size {self.state.weights.size} exceeds {MAX_CLASSICAL_SIZE}")
        self._tab = as_entropy_table(self.state)
        _require(self._tab, *blocks)

    @property
    def table(self) -> EntropyTable:
        return self._tab

    def alpha(self, j: int) -> tuple[str, ...]:
        return self.ys[:j] + self.zs[j + 1:]

    def deltas(self) -> dict[str, float]:
        """n times each delta: H(s,t|y^n), H(t|y^n), H(t|z^n)."""
        tab = self._tab
        return {"y": tab.cond(self.s + self.t, self.ys),
                "ty": tab.cond(self.t, self.ys),
                "tz": tab.cond(self.t, self.zs)}


def _tol(model):
    return FAMILY_TOL * model.n


def _sums(model: WiretapModel) -> dict[str, float]:
    tab, s, t, ys, zs, n = model.table, model.s, model.t, model.ys, model.zs, model.n
    return {
        "y_alpha_t": sum(tab.mi(ys[j], model.alpha(j) + t) for j in range(n)),
        "z_alpha_t": sum(tab.mi(zs[j], model.alpha(j) + t) for j in range(n)),
        "y_prev": sum(tab.mi(ys[j], ys[:j]) for j in range(n) if j > 0),
        "z_next": sum(tab.mi(zs[j], zs[j + 1:]) for j in range(n) if j < n - 1),
        "y_s": sum(tab.mi(ys[j], s, model.alpha(j) + t) for j in range(n)),
        "z_s": sum(tab.mi(zs[j], s, model.alpha(j) + t) for j in range(n)),
        "lt_t": sigma_lt(tab, ys, zs, t),
        "gt_t": sigma_gt(tab, ys, zs, t),
        "lt_st": sigma_lt(tab, ys, zs, s + t),
        "gt_st": sigma_gt(tab, ys, zs, s + t),
    }


def check_sigma_equality(model: WiretapModel, lam=None) -> IdentityReport:
    """Sigma_< = Sigma_> for the conditioning block ``lam`` (default t)."""
    lam = model.t if lam is None else _names(lam)
    lhs = sigma_lt(model.table, model.ys, model.zs, lam)
    rhs = sigma_gt(model.table, model.ys, model.zs, lam)
    return _equality("sigma_equality", lhs, rhs, EQ_TOL, model.state, model.seed)


def check_yn_colon_t(model: WiretapModel) -> list[IdentityReport]:
    tab, m = model.table, _sums(model)
    tol, st, seed = _tol(model), model.state, model.seed
    return [
        _equality("yn_colon_t.y", tab.mi(model.ys, model.t),
                  m["y_alpha_t"] - m["y_prev"] - m["lt_t"], tol, st, seed),
        _equality("yn_colon_t.z", tab.mi(model.zs, model.t),
                  m["z_alpha_t"] - m["z_next"] - m["gt_t"], tol, st, seed),
    ]


def check_two_parts_ck(model: WiretapModel) -> list[IdentityReport]:
    tab, m = model.table, _sums(model)
    tol, st, seed = _tol(model), model.state, model.seed
    return [
        _equality("two_parts_ck.y", tab.mi(model.ys, model.s, model.t),
                  m["y_s"] + m["lt_t"] - m["lt_st"], tol, st, seed),
        _equality("two_parts_ck.z", tab.mi(model.zs, model.s, model.t),
                  m["z_s"] + m["gt_t"] - m["gt_st"], tol, st, seed),
    ]


def check_ck(model: WiretapModel) -> list[IdentityReport]:
    """Csiszar-Korner identity: the y and z block differences agree letter by letter."""
    tab, m = model.table, _sums(model)
    lhs = tab.mi(model.ys, model.s, model.t) - tab.mi(model.zs, model.s, model.t)
    return [_equality("ck", lhs, m["y_s"] - m["z_s"], _tol(model), model.state, model.seed)]


def check_enter_deltas(model: WiretapModel) -> list[IdentityReport]:
    tab, d = model.table, model.deltas()
    s, t, ys, zs = model.s, model.t, model.ys, model.zs
    tol, st, seed = _tol(model), model.state, model.seed
    return [
        _equality("enter_deltas.re", tab.cond(s, zs),
                  tab.mi(ys, s, t) - tab.mi(zs, s, t) - tab.cond(t, zs + s) + d["tz"] + d["y"] - d["ty"],
                  tol, st, seed),
        _equality("enter_deltas.rs", tab.cond(s, t), tab.mi(ys, s, t) + d["y"] - d["ty"], tol, st, seed),
        _equality("enter_deltas.rty", tab.h(t), tab.mi(ys, t) + d["ty"], tol, st, seed),
        _equality("enter_deltas.rtz", tab.h(t), tab.mi(zs, t) + d["tz"], tol, st, seed),
    ]


def check_opt_identity(model: WiretapModel) -> list[IdentityReport]:
    """The four single-letter expansions of H(s|z^n), H(s|t) and H(t)."""
    tab, d, m = model.table, model.deltas(), _sums(model)
    s, t, zs = model.s, model.t, model.zs
    tol, st, seed = _tol(model), model.state, model.seed
    return [
        _equality("opt_identity.re", tab.cond(s, zs),
                  m["y_s"] - m["z_s"] - tab.cond(t, zs + s) + d["tz"] + d["y"] - d["ty"], tol, st, seed),
        _equality("opt_identity.rs", tab.cond(s, t),
                  m["y_s"] + m["lt_t"] - m["lt_st"] + d["y"] - d["ty"], tol, st, seed),
        _equality("opt_identity.rty", tab.h(t),
                  m["y_alpha_t"] - m["y_prev"] - m["lt_t"] + d["ty"], tol, st, seed),
        # Sigma_< here; it equals Sigma_> for the same conditioning block
        _equality("opt_identity.rtz", tab.h(t),
                  m["z_alpha_t"] - m["z_next"] - m["lt_t"] + d["tz"], tol, st, seed),
    ]


def check_model(model: WiretapModel) -> list[IdentityReport]:
    """Every identity family on one model."""
    out = [check_sigma_equality(model), check_sigma_equality(model, model.s + model.t)]
    for fn in (check_yn_colon_t, check_two_parts_ck, check_ck, check_enter_deltas, check_opt_identity):
        out += fn(model)
    return out


def random_classical_model(rng: np.random.Generator, n: int = 2, *, n_s: int = 2, n_t: int = 2,
                           n_x: int = 2, n_y: int = 2, n_z: int = 2, deterministic: bool = False,
                           alpha: float = 1.0, seed: int | None = None,
                           keep_x: bool = False) -> WiretapModel:
    """Random wiretap net: uniform s, t; encoder P(x^n|s,t); memoryless channel P(y,z|x)."""
    xshape = (n_x,) * n
    if deterministic:
        enc = np.zeros((n_s, n_t) + xshape)
        for si in range(n_s):
            for ti in range(n_t):
                enc[(si, ti) + tuple(rng.integers(n_x, size=n))] = 1.0
    else:
        enc = rng.dirichlet(np.full(n_x ** n, alpha), size=(n_s, n_t)).reshape((n_s, n_t) + xshape)
    chan = rng.dirichlet(np.full(n_y * n_z, alpha), size=n_x).reshape(n_x, n_y, n_z)
    return classical_model(enc, chan, seed=seed, keep_x=keep_x)


def classical_model(encoder: np.ndarray, channel: np.ndarray, *, p_s=None, p_t=None,
                    seed: int | None = None, keep_x: bool = False) -> WiretapModel:
    """Joint of s, t, (x^n), y^n, z^n from an encoder P(x^n|s,t) and channel P(y,z|x)."""
    encoder, channel = np.asarray(encoder, float), np.asarray(channel, float)
    n_s, n_t = encoder.shape[:2]
    n = encoder.ndim - 2
    p_s = np.full(n_s, 1 / n_s) if p_s is None else np.asarray(p_s, float)
    p_t = np.full(n_t, 1 / n_t) if p_t is None else np.asarray(p_t, float)
    # einsum labels: 0=s, 1=t, 2..=x_j, then (y_j, z_j) pairs
    xs = list(range(2, 2 + n))
    ys = list(range(2 + n, 2 + 2 * n))
    zs = list(range(2 + 2 * n, 2 + 3 * n))
    ops = [p_s, [0], p_t, [1], encoder, [0, 1] + xs]
    for j in range(n):
        ops += [channel, [xs[j], ys[j], zs[j]]]
    out = [0, 1] + (xs if keep_x else []) + ys + zs
    w = np.einsum(*ops, out, optimize=True)
    names = (["s", "t"] + ([f"x{j + 1}" for j in range(n)] if keep_x else [])
             + [f"y{j + 1}" for j in range(n)] + [f"z{j + 1}" for j in range(n)])
    d = Dist(list(zip(names, w.shape)), w)
    return WiretapModel(d, n, xs=tuple(f"x{j + 1}" for j in range(n)) if keep_x else None, seed=seed)


def random_quantum_model(rng: np.random.Generator, n: int = 2, *, dims: Sequence[int] | None = None,
                         rank: int | None = None, seed: int | None = None) -> WiretapModel:
    """Random mixed state on (s, t, y^n, z^n); qubits by default (n = 2 gives dimension 64)."""
    names = ["s", "t"] + [f"y{j + 1}" for j in range(n)] + [f"z{j + 1}" for j in range(n)]
    dims = [2] * len(names) if dims is None else list(dims)
    return WiretapModel(random_density_matrix(rng, names, dims, rank), n, seed=seed)


def as_diagonal(model: WiretapModel) -> WiretapModel:
    """Classical model re-encoded as a diagonal density matrix."""
    if isinstance(model.state, DensityMatrix):
        raise ValidationError("model is already quantum")
    return WiretapModel(DensityMatrix.diagonal(model.state), model.n, model.s, model.t,
                        model.ys, model.zs, model.xs, model.seed)


def _case(seed: int, backend: str) -> list[IdentityReport]:
    rng = np.random.default_rng(seed)
    out = []
    if backend in ("classical", "both"):
        n = int(rng.integers(1, 4))
        sizes = rng.integers(2, 4, size=5) if n < 3 else np.full(5, 2)
        model = random_classical_model(rng, n, n_s=int(sizes[0]), n_t=int(sizes[1]), n_x=int(sizes[2]),
                                       n_y=int(sizes[3]), n_z=int(sizes[4]),
                                       deterministic=bool(rng.integers(2)), seed=seed)
        out += check_model(model)
        d = model.state
        out.append(check_swap_zero_one(d, "s", model.ys, model.zs, seed=seed))
        out.append(check_two_parents(d, "s", model.ys, model.zs, seed=seed))
    if backend in ("quantum", "both"):
        n = int(rng.integers(1, 3))
        model = random_quantum_model(rng, n, seed=seed)
        out += check_model(model)
        rho = model.state
        out.append(check_swap_zero_one(rho, "s", model.ys, model.zs, seed=seed))
        out.append(check_two_parents(rho, "s", model.ys, model.zs, seed=seed))
    return out


def run_suite(seed: int = 0, cases: int = 20, backend: str = "both",
              workers: int = 1) -> list[IdentityReport]:
    """Run the identity families on ``cases`` random models.

    Case seeds are spawned from ``seed``; each report records the integer
    seed of its case so a single failure can be reproduced.
    """
    if backend not in ("classical", "quantum", "both"):
        raise ValidationError(f"unknown backend {backend!r}")
    if cases < 1:
        raise ValidationError("cases must be positive")
    seeds = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(cases)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            chunks = list(pool.map(lambda s: _case(s, backend), seeds))
    else:
        chunks = [_case(s, backend) for s in seeds]
    return [r for chunk in chunks for r in chunk]


def to_jsonl(reports: Iterable[IdentityReport]) -> Iterator[str]:
    for r in reports:
        yield r.to_json()
