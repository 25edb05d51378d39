import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wiretap.errors import ValidationError
from wiretap.quantkit import Isometry, random_unitary
from wiretap.region import (
    AuxiliaryModel, OptimizerConfig, QuantumAuxiliaryModel, RatePoint, RegionConstraints, SamplerConfig,
    bsc, bsc_wiretap, channel_coding_capacity, constraints_classical, constraints_from_joint,
    constraints_quantum, contains, convex_hull, embed_classical_channel, factorize, product_channel,
    random_auxiliary, region_hull, sample_region, secrecy_capacity, secrecy_objective, slack,
    time_share, vertices, wiretap_kernel,
)


def h2(p):
    return -p * math.log(p) - (1 - p) * math.log(1 - p)


# h(0.2) - h(0.1) in nats, from the closed-form binary entropy
BSC_PAIR_IDIFF = h2(0.2) - h2(0.1)
BSC01_CAP = math.log(2) - h2(0.1)


@pytest.fixture
def pair():
    return bsc_wiretap(0.1, 0.2)


def uniform_trivial(n=2):
    return AuxiliaryModel.trivial(np.full(n, 1 / n))


def test_oracle_constants():
    assert BSC_PAIR_IDIFF == pytest.approx(0.175319, abs=1e-6)
    assert BSC01_CAP == pytest.approx(0.368064, abs=1e-6)


def test_eavesdropper_blind():
    k = product_channel(np.eye(2), np.ones((2, 1)))
    c = constraints_classical(k, uniform_trivial())
    assert c.i_diff == pytest.approx(math.log(2), abs=1e-14)
    assert c.i_v == pytest.approx(math.log(2), abs=1e-14)
    assert c.ell == 0.0


def test_fully_tapped_has_zero_idiff():
    rng = np.random.default_rng(0)
    w = rng.dirichlet(np.ones(3), size=2)
    k = np.einsum("xy,yz->xyz", w, np.eye(3))
    for _ in range(5):
        aux = random_auxiliary(rng, 2, 3, 2)
        assert constraints_classical(k, aux).i_diff == pytest.approx(0.0, abs=1e-12)


def test_bsc_pair_constraints(pair):
    c = constraints_classical(pair, uniform_trivial())
    assert c.i_diff == pytest.approx(BSC_PAIR_IDIFF, abs=1e-12)
    assert c.i_v == pytest.approx(BSC01_CAP, abs=1e-12)
    assert c.i_yu == c.i_zu == 0.0


def test_contains_examples(pair):
    c = constraints_classical(pair, uniform_trivial())
    assert contains(c, (0, 0, 0))
    assert contains(c, (c.i_diff, c.i_diff, 0))
    assert contains(c, (0.175319, 0.175319, 0))
    assert not contains(c, (0.18, 0.18, 0))
    assert not contains(c, (0, 0, c.ell + 0.01))
    assert not contains(c, (0.1, 0.05, 0))  # r_e > r_s


def test_contains_with_common_part():
    c = RegionConstraints(0.2, 0.5, 0.3, 0.1)
    assert c.ell == 0.1
    assert contains(c, (0.2, 0.5, 0.1))
    assert not contains(c, (0.2, 0.51, 0.1))
    assert slack(c, (0, 0, 0)) == 0.0


def test_vertices_bsc(pair):
    c = constraints_classical(pair, uniform_trivial())
    v = vertices(c)
    expected = {(0, 0, 0), (0, BSC01_CAP, 0), (BSC_PAIR_IDIFF, BSC_PAIR_IDIFF, 0), (BSC_PAIR_IDIFF, BSC01_CAP, 0)}
    assert len(v) == 4
    for row in v:
        assert min(max(abs(a - b) for a, b in zip(row, e)) for e in expected) < 1e-12
    assert vertices(RegionConstraints(-0.1, 0.5, 0, 0)).shape == (0, 3)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), lam=st.floats(0, 1))
def test_contains_convex(seed, lam):
    rng = np.random.default_rng(seed)
    c = RegionConstraints(*rng.uniform(0, 1, 4))
    v = vertices(c)
    a, b = v[rng.integers(len(v))], v[rng.integers(len(v))]
    assert contains(c, lam * a + (1 - lam) * b, tol=1e-12)


def test_factorize_invariance():
    rng = np.random.default_rng(1)
    k = rng.dirichlet(np.ones(6), size=3).reshape(3, 2, 3)
    aux = random_auxiliary(rng, 2, 3, 3)
    joint = aux.joint(k)
    a, b = constraints_from_joint(joint).as_dict(), constraints_from_joint(factorize(joint)).as_dict()
    for f in ("i_diff", "i_v", "i_yu", "i_zu"):
        assert a[f] == pytest.approx(b[f], abs=1e-10)


def test_time_share_dominates_mixture(pair):
    rng = np.random.default_rng(2)
    m1, m2 = random_auxiliary(rng, 2, 2, 2), random_auxiliary(rng, 2, 3, 2)
    c1, c2 = constraints_classical(pair, m1), constraints_classical(pair, m2)
    w = 0.3
    mix = constraints_classical(pair, time_share([m1, m2], [w, 1 - w]))
    assert mix.i_diff == pytest.approx(w * c1.i_diff + (1 - w) * c2.i_diff, abs=1e-12)
    for p1 in vertices(c1):
        for p2 in vertices(c2):
            assert slack(mix, w * p1 + (1 - w) * p2) >= -1e-9


def test_time_share_validation():
    with pytest.raises(ValidationError):
        time_share([uniform_trivial()], [0.5])
    with pytest.raises(ValidationError):
        time_share([uniform_trivial(2), uniform_trivial(3)], [0.5, 0.5])


def test_single_sample_hull_is_region(pair):
    c = constraints_classical(pair, uniform_trivial())
    hull = region_hull([c])
    assert len(hull.vertices) == 4
    assert hull.contains(np.array([0.1, 0.2, 0.0]))
    assert not hull.contains(np.array([0.18, 0.18, 0.0]))
    assert not hull.contains(np.array([0.0, 0.0, 0.01]))


def test_hull_contains_every_region(pair):
    s = sample_region(pair, 2, 2, SamplerConfig(30), seed=3)
    for c in s.constraints:
        for v in vertices(c):
            assert s.hull.contains(v)


def test_hull_degenerate_sets():
    assert convex_hull(np.zeros((3, 3))).dimension == 0
    line = convex_hull(np.array([[0, 0, 0], [1, 1, 0], [0.5, 0.5, 0]]))
    assert line.dimension == 1 and line.contains(np.array([0.2, 0.2, 0]))
    assert not line.contains(np.array([0.2, 0.3, 0]))
    with pytest.raises(ValidationError):
        convex_hull(np.zeros((0, 3)))


def test_sampled_idiff_below_capacity(pair):
    cap = secrecy_capacity(pair, 2, 2, OptimizerConfig(restarts=8)).value
    s = sample_region(pair, 2, 2, SamplerConfig(100), seed=4)
    assert max(c.i_diff for c in s.constraints) <= cap + 1e-9


def test_sparse_sampler_reaches_capacity(pair):
    cap = secrecy_capacity(pair, 2, 2).value
    best, _ = sample_region(pair, 2, 2, SamplerConfig(500, 1.0, 20.0, 0.01), seed=0).best()
    assert abs(best.i_diff - cap) < 1e-3


def test_secrecy_objective_matches_entropies(pair):
    aux = random_auxiliary(np.random.default_rng(5), 3, 4, 2)
    fast = secrecy_objective(pair, aux.p_u, aux.p_v_given_u, aux.p_x_given_v)
    assert fast == pytest.approx(constraints_classical(pair, aux).i_diff, abs=1e-12)


def test_capacity_trivial_cases():
    blind = product_channel(np.eye(3), np.ones((3, 1)))
    assert secrecy_capacity(blind, 2, 3, OptimizerConfig(restarts=16)).value == pytest.approx(math.log(3), abs=1e-6)
    tapped = np.einsum("xy,yz->xyz", bsc(0.1), np.eye(2))
    assert secrecy_capacity(tapped, 2, 2, OptimizerConfig(restarts=8)).value == pytest.approx(0.0, abs=1e-9)


def test_capacity_bsc_pair(pair):
    res = secrecy_capacity(pair, 2, 2)
    assert res.value == pytest.approx(BSC_PAIR_IDIFF, abs=1e-6)
    assert len(res.restart_values) == 64
    assert constraints_classical(pair, res.model).i_diff == pytest.approx(res.value, abs=1e-12)


def test_channel_coding_capacity():
    assert channel_coding_capacity(np.eye(2)) == pytest.approx(math.log(2), abs=1e-12)
    assert channel_coding_capacity(np.full((3, 2), 0.5)) == pytest.approx(0.0, abs=1e-12)
    assert channel_coding_capacity(bsc(0.1)) == pytest.approx(BSC01_CAP, abs=1e-9)
    # Z channel: closed form ln(1 + (1-p) p^(p/(1-p))) with p the 1->0 flip
    p = 0.3
    zc = np.array([[1, 0], [p, 1 - p]])
    assert channel_coding_capacity(zc) == pytest.approx(math.log(1 + (1 - p) * p ** (p / (1 - p))), abs=1e-9)


def test_wiretap_kernel_validation():
    with pytest.raises(ValidationError):
        wiretap_kernel(np.ones((2, 2)))
    with pytest.raises(ValidationError):
        wiretap_kernel(np.ones((2, 2, 2)))
    with pytest.raises(ValidationError):
        bsc(1.5)


def test_aux_validation():
    with pytest.raises(ValidationError):
        AuxiliaryModel(np.array([0.5, 0.6]), np.eye(2), np.eye(2))
    with pytest.raises(ValidationError):
        AuxiliaryModel(np.ones(1), np.eye(2), np.eye(2))
    with pytest.raises(ValidationError):
        constraints_classical(bsc_wiretap(0.1, 0.2), AuxiliaryModel.trivial(np.full(3, 1 / 3)))


def test_rate_point():
    assert RatePoint(0.1, 0.2, 0).is_valid()
    assert not RatePoint(0.3, 0.2, 0).is_valid()
    assert not RatePoint(0, 0, -1).is_valid()
    assert RatePoint.of([1, 2, 3]) == RatePoint(1.0, 2.0, 3.0)


# ---------------------------------------------------------------- quantum

def test_quantum_full_dephasing_matches_classical(pair):
    iso = embed_classical_channel(pair)
    rng = np.random.default_rng(6)
    for _ in range(3):
        aux = random_auxiliary(rng, 2, 2, 2)
        cq = constraints_quantum(iso, QuantumAuxiliaryModel.from_classical(aux), "full")
        cc = constraints_classical(pair, aux)
        assert cq.source == "quantum"
        for f in ("i_diff", "i_v", "i_yu", "i_zu"):
            assert getattr(cq, f) == pytest.approx(getattr(cc, f), abs=1e-9)


def test_quantum_trivial_u_pointer_v():
    iso = Isometry([("x", 2)], [("y", 2), ("z", 2)], random_unitary(np.random.default_rng(7), 4)[:, :2])
    aux = QuantumAuxiliaryModel(np.ones(1), np.array([[1, 0]]), np.eye(2)[:, None, :])
    c = constraints_quantum(iso, aux)
    assert c.i_yu == 0.0 and c.i_zu == 0.0 and c.ell == 0.0


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_quantum_random_invariants(seed):
    rng = np.random.default_rng(seed)
    a = random_unitary(rng, 4)[:, :2]
    iso = Isometry([("x", 2)], [("y", 2), ("z", 2)], a)

    def amp(*shape):
        z = rng.normal(size=shape) + 1j * rng.normal(size=shape)
        return z / np.linalg.norm(z, axis=-1, keepdims=True)

    aux = QuantumAuxiliaryModel(amp(2), amp(2, 2), amp(2, 2, 2))
    c = constraints_quantum(iso, aux)
    vals = [c.i_diff, c.i_v, c.i_yu, c.i_zu]
    assert all(math.isfinite(v) for v in vals)
    assert c.i_v >= -1e-9 and c.i_yu >= -1e-9 and c.i_zu >= -1e-9


def test_quantum_reservoir_errors(pair):
    iso = embed_classical_channel(pair)
    aux = QuantumAuxiliaryModel.from_classical(uniform_trivial())
    with pytest.raises(ValidationError):
        constraints_quantum(iso, aux, ("w",))
    with pytest.raises(ValidationError):
        constraints_quantum(pair, aux)
