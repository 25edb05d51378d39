"""Random-coding experiments for the three-tier classical wiretap code.

Codebook: u^n(t) ~ P(u), v^n(s,t) ~ P(v|u), x^n(s,t) ~ P(x|v), letter by
letter.  Row ``m = s * N_t + t`` indexes the (s, t) words.

Decoder.  For a candidate (s^, t^, t^) and a competitor hypothesis, the five
scores are differences of normalized log information densities

    d1y(t)   = (1/n) sum_j ln P(y_j : u_j(t))
    d2y(s,t) = (1/n) sum_j ln P(y_j : v_j(s,t) | u_j(t))

(and the z versions).  With F_1 = d2y - d2z, F_2 = d2y + d1y, F_3 = d2y + d1z,
F_4 = d1y, F_5 = d1z, the test for row mu is F_mu(candidate) - F_mu(competitor)
> R_mu against every competitor.  Competitors range over (s, t_y, t_z) for
mu = 1, over (s, t) for mu = 2, 3 (with t_y = t_z = t), and over t for mu = 4, 5.

Infinite densities (a zero numerator probability at an observed letter) are
kept as extended reals: a candidate whose score is -inf fails, a competitor
whose score is -inf is beaten, and +inf against +inf fails.  No NaN is formed.
"""
from __future__ import annotations

import json
import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import binomtest

from .errors import CapExceededError, ValidationError
from .region import AuxiliaryModel, RatePoint, wiretap_kernel

EQUIVOCATION_CAP = 10 ** 7
NEG, POS = -np.inf, np.inf


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _draw(rng: np.random.Generator, cdf: np.ndarray, rows: np.ndarray | None, shape) -> np.ndarray:
    """Inverse-CDF draws; ``cdf`` is (k,) or (rows, k) with ``rows`` selecting per draw."""
    r = rng.random(shape)
    k = cdf.shape[-1]
    if rows is None:
        return np.minimum(np.searchsorted(cdf, r, side="right"), k - 1)
    # count the CDF steps at or below each uniform; alphabets are small
    out = np.zeros(shape, dtype=np.int64)
    for j in range(k - 1):
        out += r >= cdf[:, j][rows]
    return out


def _cdf(p: np.ndarray) -> np.ndarray:
    c = np.cumsum(p, axis=-1)
    c[..., -1] = 1.0
    return c


@dataclass(frozen=True, eq=False)
class Codebook:
    n: int
    n_s: int
    n_t: int
    u_words: np.ndarray  # (N_t, n)
    v_words: np.ndarray  # (N_s * N_t, n)
    x_words: np.ndarray  # (N_s * N_t, n)
    aux: AuxiliaryModel
    seed: object = None

    def __post_init__(self):
        m = self.n_s * self.n_t
        if self.u_words.shape != (self.n_t, self.n) or self.v_words.shape != (m, self.n) \
                or self.x_words.shape != (m, self.n):
            raise ValidationError("codebook arrays do not match (N_t, n) and (N_s N_t, n)")

    def row(self, s: int, t: int) -> int:
        if not (0 <= s < self.n_s and 0 <= t < self.n_t):
            raise ValidationError(f"message ({s}, {t}) out of range {self.n_s} x {self.n_t}")
        return s * self.n_t + t


def build_codebook(aux: AuxiliaryModel, n: int, n_s: int, n_t: int, seed=0) -> Codebook:
    if n < 1 or n_s < 1 or n_t < 1:
        raise ValidationError("n, N_s and N_t must be at least 1")
    rng = _rng(seed)
    u = _draw(rng, _cdf(aux.p_u), None, (n_t, n))
    u_rep = np.repeat(u[None], n_s, axis=0).reshape(n_s * n_t, n)  # row s*N_t + t -> u(t)
    v = _draw(rng, _cdf(aux.p_v_given_u), u_rep, (n_s * n_t, n))
    x = _draw(rng, _cdf(aux.p_x_given_v), v, (n_s * n_t, n))
    return Codebook(n, n_s, n_t, u, v, x, aux, seed if not isinstance(seed, np.random.Generator) else None)


def transmit(cb: Codebook, s: int, t: int, channel, seed=None) -> tuple[np.ndarray, np.ndarray]:
    """Memoryless pass of x^n(s,t) through P(y,z|x)."""
    k = wiretap_kernel(channel)
    x = cb.x_words[cb.row(s, t)]
    ny, nz = k.shape[1:]
    flat = _cdf(k.reshape(k.shape[0], -1))
    yz = _draw(_rng(seed), flat, x, x.shape)
    return yz // nz, yz % nz


@dataclass(frozen=True)
class LetterLaws:
    """Single-letter log densities ln P(y:u), ln P(y:v|u) and z versions."""

    ld1y: np.ndarray  # [y, u]
    ld2y: np.ndarray  # [y, v, u]
    ld1z: np.ndarray
    ld2z: np.ndarray
    p_y: np.ndarray
    p_z: np.ndarray


def _log_ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    out = np.full(np.broadcast(num, den).shape, NEG)
    num, den = np.broadcast_to(num, out.shape), np.broadcast_to(den, out.shape)
    ok = (num > 0) & (den > 0)
    out[ok] = np.log(num[ok]) - np.log(den[ok])
    return out


def letter_laws(aux: AuxiliaryModel, channel) -> LetterLaws:
    k = wiretap_kernel(channel)
    out = []
    marg = []
    for w in (k.sum(axis=2), k.sum(axis=1)):  # P(y|x), P(z|x)
        p_o_v = aux.p_x_given_v @ w  # [v, o]
        p_o_u = aux.p_v_given_u @ p_o_v  # [u, o]
        p_o = aux.p_u @ p_o_u
        ld1 = _log_ratio(p_o_u.T, p_o[:, None])  # [o, u]
        ld2 = _log_ratio(p_o_v.T[:, :, None], p_o_u.T[:, None, :])  # [o, v, u]
        out += [ld1, ld2]
        marg.append(p_o)
    return LetterLaws(out[0], out[1], out[2], out[3], marg[0], marg[1])


def _densities(obs: np.ndarray, cb: Codebook, ld1: np.ndarray, ld2: np.ndarray):
    """Normalized log densities d1(t) (N_t,) and d2(s,t) (N_s, N_t)."""
    u_rep = np.broadcast_to(cb.u_words[None], (cb.n_s, cb.n_t, cb.n)).reshape(-1, cb.n)
    d1 = ld1[obs[None, :], cb.u_words].sum(axis=1) / cb.n
    d2 = ld2[obs[None, :], cb.v_words, u_rep].sum(axis=1) / cb.n
    return d1, d2.reshape(cb.n_s, cb.n_t)


def _check_observed(obs, p, which):
    bad = np.flatnonzero(p[obs] <= 0)
    if bad.size:
        raise ValidationError(f"{which}-symbol {int(obs[bad[0]])} at position {int(bad[0])} "
                              "has zero probability under the generator law")


def _xsub(a, b):
    """a - b on extended reals with -inf - (anything) = -inf."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    with np.errstate(invalid="ignore"):
        out = a - b
    return np.where(a == NEG, NEG, np.where(np.isnan(out), NEG, out))


def _xadd(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    with np.errstate(invalid="ignore"):
        out = a + b
    return np.where(np.isnan(out), NEG, out)


def _gamma(cand, comp):
    """Score difference with the documented infinity rules."""
    cand, comp = np.asarray(cand, float), np.asarray(comp, float)
    with np.errstate(invalid="ignore"):
        g = cand - comp
    g = np.where(comp == NEG, POS, g)
    g = np.where(cand == NEG, NEG, g)
    return np.where(np.isnan(g), NEG, g)


def gamma_scores(y, z, cb: Codebook, candidate, truth, laws: LetterLaws | None = None,
                 channel=None) -> np.ndarray:
    """The five Gamma_mu for candidate (s^, t^_y, t^_z) against hypothesis (s, t_y, t_z)."""
    if laws is None:
        if channel is None:
            raise ValidationError("gamma_scores needs the channel or precomputed letter laws")
        laws = letter_laws(cb.aux, channel)
    y, z = np.asarray(y), np.asarray(z)
    _check_observed(y, laws.p_y, "y")
    _check_observed(z, laws.p_z, "z")
    d1y, d2y = _densities(y, cb, laws.ld1y, laws.ld2y)
    d1z, d2z = _densities(z, cb, laws.ld1z, laws.ld2z)
    (cs, cty, ctz), (s, ty, tz) = candidate, truth
    for a, b in ((cs, cty), (cs, ctz), (s, ty), (s, tz)):
        cb.row(a, b)
    g2y = _gamma(d2y[cs, cty], d2y[s, ty])
    g2z = _gamma(d2z[cs, ctz], d2z[s, tz])
    g1y = _gamma(d1y[cty], d1y[ty])
    g1z = _gamma(d1z[ctz], d1z[tz])
    return np.array([_xsub(g2y, g2z), _xadd(g2y, g1y), _xadd(g2y, g1z), g1y, g1z], dtype=float)


def rate_thresholds(rate: RatePoint) -> np.ndarray:
    r = RatePoint.of(rate)
    return np.array([r.r_e, r.r_s + r.r_t, r.r_s + r.r_t, r.r_t, r.r_t])


def _top2(a: np.ndarray):
    """Largest value, its index and the second largest of a flat array."""
    if a.size == 1:
        return a[0], 0, NEG
    idx = np.argpartition(-a, 1)[:2]
    i, j = (idx[0], idx[1]) if a[idx[0]] >= a[idx[1]] else (idx[1], idx[0])
    return a[i], int(i), a[j]


def _excl_max(values: np.ndarray) -> np.ndarray:
    """For each position, the max over all other positions."""
    flat = values.ravel()
    top, arg, second = _top2(flat)
    out = np.full(flat.shape, top)
    out[arg] = second
    return out.reshape(values.shape)


def _excl_max_rows(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row maxima and, per entry, the row max excluding that entry."""
    if a.shape[1] == 1:
        return a[:, 0], np.full(a.shape, NEG)
    order = np.argsort(-a, axis=1, kind="stable")
    top = np.take_along_axis(a, order[:, :1], axis=1)[:, 0]
    second = np.take_along_axis(a, order[:, 1:2], axis=1)[:, 0]
    excl = np.repeat(top[:, None], a.shape[1], axis=1)
    rows = np.arange(a.shape[0])
    excl[rows, order[:, 0]] = second
    return top, excl


def _margin(cand: np.ndarray, best_other: np.ndarray) -> np.ndarray:
    """min over competitors of Gamma, i.e. Gamma against the strongest competitor."""
    return _gamma(cand, best_other)


def _mu1_best_other(d2y: np.ndarray, d2z: np.ndarray) -> np.ndarray:
    """Max of d2y(s,ty) - d2z(s,tz) over triples other than (s^, t^, t^), per (s^, t^)."""
    a_all, a_excl = _excl_max_rows(d2y)
    nb_all, nb_excl = _excl_max_rows(-d2z)  # max of -d2z = -min d2z
    per_s = _xsub(a_all, -nb_all)  # best triple with s fixed
    other_s = _excl_max(per_s) if per_s.size > 1 else np.array([NEG])
    same_s = np.maximum(_xsub(a_excl, -nb_all[:, None]), _xsub(a_all[:, None], -nb_excl))
    return np.maximum(same_s, other_s[:, None])


@dataclass
class DecodeOutcome:
    verdict: str  # "decoded" or "error"
    message: tuple[int, int, int] | None = None
    kind: str | None = None  # "none" or "ambiguous" on error
    scores: np.ndarray | None = None  # Gamma_mu against the strongest competitors
    accepted: int = 0

    @property
    def decoded(self) -> bool:
        return self.verdict == "decoded"


def all_margins(y, z, cb: Codebook, laws: LetterLaws) -> np.ndarray:
    """Gamma_mu of every candidate against its strongest competitor, shape (N_s, N_t, 5)."""
    y, z = np.asarray(y), np.asarray(z)
    _check_observed(y, laws.p_y, "y")
    _check_observed(z, laws.p_z, "z")
    d1y, d2y = _densities(y, cb, laws.ld1y, laws.ld2y)
    d1z, d2z = _densities(z, cb, laws.ld1z, laws.ld2z)
    f1 = _xsub(d2y, d2z)
    f2 = _xadd(d2y, d1y[None, :])
    f3 = _xadd(d2y, d1z[None, :])
    shape = (cb.n_s, cb.n_t)
    g = np.empty(shape + (5,))
    g[..., 0] = _margin(f1, _mu1_best_other(d2y, d2z))
    g[..., 1] = _margin(f2, _excl_max(f2))
    g[..., 2] = _margin(f3, _excl_max(f3))
    g[..., 3] = np.broadcast_to(_margin(d1y, _excl_max(d1y)), shape)
    g[..., 4] = np.broadcast_to(_margin(d1z, _excl_max(d1z)), shape)
    return g


def decode(y, z, cb: Codebook, rate, laws: LetterLaws | None = None, channel=None,
           include_equivocation: bool = True) -> DecodeOutcome:
    """Threshold decoder; accepts a candidate iff R_mu < Gamma_mu against every competitor."""
    if laws is None:
        if channel is None:
            raise ValidationError("decode needs the channel or precomputed letter laws")
        laws = letter_laws(cb.aux, channel)
    r = rate_thresholds(rate)
    if not np.all(np.isfinite(r)):
        raise ValidationError("rates must be finite")
    g = all_margins(y, z, cb, laws)
    passed = g > r
    # tests against an empty competitor set are vacuous
    if cb.n_s * cb.n_t == 1:
        passed[..., :3] = True
    if cb.n_t == 1:
        passed[..., 3:] = True
    cols = slice(None) if include_equivocation else slice(1, None)
    ok = passed[..., cols].all(axis=-1)
    hits = np.argwhere(ok)
    if len(hits) == 1:
        s, t = map(int, hits[0])
        return DecodeOutcome("decoded", (s, t, t), None, g[s, t], 1)
    slack = (g - r)[..., cols].min(axis=-1)
    s, t = np.unravel_index(int(np.argmax(slack)), slack.shape)
    kind = "none" if len(hits) == 0 else "ambiguous"
    return DecodeOutcome("error", None, kind, g[s, t], len(hits))


def message_counts(rate, n: int) -> tuple[int, int]:
    r = RatePoint.of(rate)
    return max(1, round(math.exp(n * r.r_s))), max(1, round(math.exp(n * r.r_t)))


@dataclass
class ErrorEstimate:
    n: int
    trials: int
    errors: int
    p_err: float
    ci_lo: float
    ci_hi: float
    n_s: int
    n_t: int
    kinds: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrialRecord:
    trial: int
    s: int
    t: int
    verdict: str
    kind: str | None
    decoded: list | None

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def trial_seeds(seed: int, trials: int) -> list[np.random.SeedSequence]:
    """Per-trial seed sequences; trial i always uses child i of SeedSequence(seed)."""
    return np.random.SeedSequence(seed).spawn(trials)


def estimate_error(channel, aux: AuxiliaryModel, rate, n: int, trials: int, seed: int = 0, *,
                   n_s: int | None = None, n_t: int | None = None, fixed_codebook: bool = False,
                   include_equivocation: bool = True, workers: int = 1,
                   records: list | None = None, max_words: int = 10 ** 6) -> ErrorEstimate:
    """Monte Carlo block error rate with a 95% Wilson interval.

    Message counts default to round(e^{n R_s}) and round(e^{n R_t}).  Each
    trial draws a fresh codebook unless ``fixed_codebook``; serial and threaded
    runs give identical results.
    """
    if trials < 1:
        raise ValidationError("need at least one trial")
    k = wiretap_kernel(channel)
    rate = RatePoint.of(rate)
    ds, dt = message_counts(rate, n)
    n_s, n_t = n_s or ds, n_t or dt
    if n_s * n_t > max_words:
        raise CapExceededError(f"{n_s * n_t} codewords exceed the cap {max_words}; lower n or the rates")
    laws = letter_laws(aux, k)
    children = trial_seeds(seed, trials + 1)
    shared = build_codebook(aux, n, n_s, n_t, children[-1]) if fixed_codebook else None

    def one(i):
        rng = np.random.default_rng(children[i])
        cb = shared or build_codebook(aux, n, n_s, n_t, rng)
        s, t = int(rng.integers(n_s)), int(rng.integers(n_t))
        y, z = transmit(cb, s, t, k, rng)
        out = decode(y, z, cb, rate, laws, include_equivocation=include_equivocation)
        ok = out.decoded and out.message == (s, t, t)
        kind = None if ok else (out.kind or "wrong")
        return TrialRecord(i, s, t, out.verdict, kind, list(out.message) if out.message else None)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            recs = list(pool.map(one, range(trials)))
    else:
        recs = [one(i) for i in range(trials)]
    if records is not None:
        records.extend(recs)
    kinds: dict[str, int] = {}
    for r in recs:
        if r.kind:
            kinds[r.kind] = kinds.get(r.kind, 0) + 1
    errors = sum(kinds.values())
    ci = binomtest(errors, trials).proportion_ci(0.95, method="wilson")
    return ErrorEstimate(n, trials, errors, errors / trials, float(ci.low), float(ci.high), n_s, n_t, kinds)


def exact_equivocation(cb: Codebook, channel, cap: int = EQUIVOCATION_CAP) -> float:
    """H(S | Z^n) / n for a fixed codebook and uniform messages, by enumeration."""
    k = wiretap_kernel(channel)
    pz_x = k.sum(axis=1)  # [x, z]
    m = cb.n_s * cb.n_t
    nz = pz_x.shape[1]
    if m * nz ** cb.n > cap:
        raise CapExceededError(f"enumeration needs {m * nz ** cb.n} states, cap is {cap}")
    like = np.ones((m, 1))
    for j in range(cb.n):
        like = (like[:, :, None] * pz_x[cb.x_words[:, j]][:, None, :]).reshape(m, -1)
    joint = like / m  # P(s, t, z^n), rows s*N_t + t
    p_sz = joint.reshape(cb.n_s, cb.n_t, -1).sum(axis=1)
    p_z = p_sz.sum(axis=0)

    def h(p):
        p = p[p > 0]
        return float(-np.sum(p * np.log(p)))

    value = (h(p_sz.ravel()) - h(p_z)) / cb.n
    # 0 <= H(S|Z^n) <= ln N_s holds exactly; clear roundoff just outside
    top = math.log(cb.n_s) / cb.n
    if -1e-12 < value < 0:
        value = 0.0
    elif top < value < top + 1e-12:
        value = top
    return value


def scan_error(channel, aux: AuxiliaryModel, rate, ns: Sequence[int], trials: int, seed: int = 0,
               **kw) -> list[ErrorEstimate]:
    """estimate_error over several block lengths with the same master seed."""
    return [estimate_error(channel, aux, rate, n, trials, seed, **kw) for n in ns]
