import math

import numpy as np
import pytest

from wiretap.errors import CapExceededError, ValidationError
from wiretap.netkit import (
    NetSpec, Node, delta_node, evaluate_classical, evaluate_quantum, merge_reservoirs,
    trade_reservoir_direction,
)
from wiretap.probkit import Channel, Dist, joint_from_factors, marginal


def amp(rng, *shape):
    a = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    return a / np.sqrt((np.abs(a) ** 2).sum(axis=-1, keepdims=True))


def stoch(rng, *shape):
    return rng.dirichlet(np.ones(shape[-1]), size=shape[:-1]) if len(shape) > 1 else rng.dirichlet(np.ones(shape[0]))


def test_uniform_root():
    d = evaluate_classical(NetSpec([Node.classical("x", 3, np.full(3, 1 / 3))], outputs=("x",)))
    assert np.allclose(d.weights, 1 / 3)


def test_copy_chain_correlated():
    net = NetSpec([Node.classical("x", 2, [0.5, 0.5]), Node.classical("y", 2, np.eye(2), ("x",))],
                  outputs=("x", "y"))
    assert np.allclose(evaluate_classical(net).array(["x", "y"]), np.eye(2) / 2)


def test_classical_matches_probkit_pipeline():
    # u -> v -> x -> (y, z) topology with random kernels
    rng = np.random.default_rng(0)
    pu, pvu, pxv, pyzx = stoch(rng, 2), stoch(rng, 2, 3), stoch(rng, 3, 2), stoch(rng, 2, 4)
    net = NetSpec([
        Node.classical("u", 2, pu), Node.classical("v", 3, pvu, ("u",)),
        Node.classical("x", 2, pxv, ("v",)), Node.classical("yz", 4, pyzx, ("x",)),
    ], outputs=("yz", "v", "u"))
    d = evaluate_classical(net)
    ref = joint_from_factors([
        Dist([("u", 2)], pu), Channel.from_array(pvu, ["u"], ["v"]),
        Channel.from_array(pxv, ["v"], ["x"]), Channel.from_array(pyzx, ["x"], ["yz"]),
    ])
    ref = marginal(ref, ["yz", "v", "u"])
    assert np.allclose(d.array(["yz", "v", "u"]), ref.array(["yz", "v", "u"]), atol=1e-14)


def test_classical_rejects_amplitude_nodes():
    net = NetSpec([Node.amplitude("x", 2, [1, 0])], outputs=("x",))
    with pytest.raises(ValidationError):
        evaluate_classical(net)


def test_normalization_checked():
    with pytest.raises(ValidationError):
        Node.amplitude("x", 2, [1, 1])
    with pytest.raises(ValidationError):
        Node.classical("x", 2, [0.7, 0.7])


def test_parents_must_precede():
    with pytest.raises(ValidationError, match="declared before"):
        NetSpec([Node.classical("y", 2, np.eye(2), ("x",)), Node.classical("x", 2, [0.5, 0.5])])


def test_parent_size_mismatch():
    with pytest.raises(ValidationError):
        NetSpec([Node.classical("x", 3, np.full(3, 1 / 3)), Node.classical("y", 2, np.eye(2), ("x",))])


def test_reservoir_must_be_sink_or_source():
    nodes = [Node.classical("a", 2, [0.5, 0.5]), Node.classical("b", 2, np.eye(2), ("a",)),
             Node.classical("c", 2, np.eye(2), ("b",))]
    with pytest.raises(ValidationError):
        NetSpec(nodes, reservoirs=("b",), outputs=("a",))


def test_pure_superposition():
    net = NetSpec([Node.amplitude("x", 2, np.full(2, 1 / math.sqrt(2)))], outputs=("x",))
    assert np.allclose(evaluate_quantum(net).matrix, np.full((2, 2), 0.5))


def test_correlated_reservoir_decoheres():
    net = NetSpec([Node.amplitude("x", 2, np.full(2, 1 / math.sqrt(2))),
                   Node.amplitude("r", 2, np.eye(2), ("x",))], reservoirs=("r",), outputs=("x",))
    assert np.allclose(evaluate_quantum(net).matrix, np.eye(2) / 2)


def test_delta_fanout_matches_pair_state():
    rng = np.random.default_rng(1)
    yz = Node.amplitude("yz", 6, amp(rng, 6))
    net = NetSpec([yz, delta_node("y", yz, (2, 3), 0), delta_node("z", yz, (2, 3), 1)], outputs=("y", "z"))
    rho = evaluate_quantum(net)
    assert rho.dims == (2, 3)
    assert np.allclose(rho.matrix, np.outer(yz.table, yz.table.conj()), atol=1e-14)


def test_undelta_internal_node_rejected():
    rng = np.random.default_rng(2)
    a = Node.amplitude("a", 2, amp(rng, 2))
    b = Node.amplitude("b", 2, amp(rng, 2, 2), ("a",))
    with pytest.raises(ValidationError, match="trace"):
        evaluate_quantum(NetSpec([a, b], outputs=("b",)))


def test_dimension_cap():
    net = NetSpec([Node.amplitude("x", 8, np.full(8, 1 / math.sqrt(8)))], outputs=("x",), max_dim=4)
    with pytest.raises(CapExceededError):
        evaluate_quantum(net)


def test_classical_square_root_with_cloning_reservoirs():
    # amplitudes sqrt(P) with every node copied into a reservoir reproduce the classical joint
    rng = np.random.default_rng(3)
    pa, pba = stoch(rng, 3), stoch(rng, 3, 2)
    nodes = [Node.amplitude("a", 3, np.sqrt(pa)), Node.amplitude("b", 2, np.sqrt(pba), ("a",)),
             Node.amplitude("ra", 3, np.eye(3), ("a",)), Node.amplitude("rb", 2, np.eye(2), ("b",))]
    rho = evaluate_quantum(NetSpec(nodes, ("ra", "rb"), ("a", "b")))
    assert np.allclose(rho.matrix, np.diag((pa[:, None] * pba).ravel()), atol=1e-10)


def two_sink_net(rng):
    """a; b|a; c|b; r1|a,c; r2|c with r1, r2 traced."""
    return NetSpec([
        Node.amplitude("a", 2, amp(rng, 2)),
        Node.amplitude("b", 2, amp(rng, 2, 2), ("a",)),
        Node.amplitude("c", 2, amp(rng, 2, 2), ("b",)),
        Node.amplitude("r1", 3, amp(rng, 2, 2, 3), ("a", "c")),
        Node.amplitude("r2", 2, amp(rng, 2, 2), ("c",)),
    ], reservoirs=("r1", "r2"), outputs=("a", "b", "c"))


def test_merge_two_sinks_chain_example():
    net = two_sink_net(np.random.default_rng(4))
    merged = merge_reservoirs(net, "r1", "r2")
    assert len(merged.reservoirs) == 1
    node = merged.node(merged.reservoirs[0])
    assert set(node.parents) == {"a", "c"} and node.size == 6
    assert np.max(np.abs(evaluate_quantum(merged).matrix - evaluate_quantum(net).matrix)) < 1e-10


def test_merge_trivial_reservoirs():
    rng = np.random.default_rng(5)
    net = NetSpec([Node.amplitude("x", 2, amp(rng, 2)), Node.amplitude("r1", 1, np.ones((2, 1)), ("x",)),
                   Node.amplitude("r2", 1, np.ones((2, 1)), ("x",))], ("r1", "r2"), ("x",))
    merged = merge_reservoirs(net, "r1", "r2")
    assert np.allclose(evaluate_quantum(merged).matrix, evaluate_quantum(net).matrix, atol=1e-14)


def test_merge_two_sources():
    rng = np.random.default_rng(6)
    net = NetSpec([Node.amplitude("r1", 2, amp(rng, 2)), Node.amplitude("r2", 3, amp(rng, 3)),
                   Node.amplitude("a", 2, amp(rng, 3, 2, 2), ("r2", "r1")),
                   Node.amplitude("b", 2, amp(rng, 2, 2), ("r1",))], ("r1", "r2"), ("a", "b"))
    merged = merge_reservoirs(net, "r1", "r2")
    assert np.max(np.abs(evaluate_quantum(merged).matrix - evaluate_quantum(net).matrix)) < 1e-10


def test_merge_sink_with_source_rejected():
    rng = np.random.default_rng(7)
    net = NetSpec([Node.amplitude("r1", 2, amp(rng, 2)), Node.amplitude("a", 2, amp(rng, 2, 2), ("r1",)),
                   Node.amplitude("r2", 2, amp(rng, 2, 2), ("a",))], ("r1", "r2"), ("a",))
    with pytest.raises(ValidationError):
        merge_reservoirs(net, "r1", "r2")


def test_trade_uniform_unitary():
    u = np.linalg.qr(np.random.default_rng(8).normal(size=(3, 3)))[0]
    net = NetSpec([Node.amplitude("r", 3, np.full(3, 1 / math.sqrt(3))), Node.amplitude("x", 3, u.T, ("r",))],
                  ("r",), ("x",))
    traded = trade_reservoir_direction(net, "r")
    assert traded.node("r").parents == ("x",)
    assert np.allclose(evaluate_quantum(traded).matrix, evaluate_quantum(net).matrix, atol=1e-12)
    # A(x|r)A(r) = A(r|x)A(x) entrywise
    lhs = net.node("x").table * net.node("r").table[:, None]  # [r, x]
    rhs = traded.node("r").table.T * traded.node("x").table[None, :]
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_trade_eigendecomposition_round_trip():
    # A(x|r) = <x|lambda_r>, A(r) = sqrt(lambda_r): a source reservoir built from rho's eigensystem
    rng = np.random.default_rng(9)
    g = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    rho = g @ g.conj().T
    rho /= np.trace(rho).real
    lam, vec = np.linalg.eigh(rho)
    net = NetSpec([Node.amplitude("r", 3, np.sqrt(lam)), Node.amplitude("x", 3, vec.T, ("r",))], ("r",), ("x",))
    assert np.allclose(evaluate_quantum(net).matrix, rho, atol=1e-12)
    sink = trade_reservoir_direction(net, "r")
    back = trade_reservoir_direction(sink, "r")
    for n in (sink, back):
        assert np.max(np.abs(evaluate_quantum(n).matrix - rho)) < 1e-10


def test_trade_requires_root_parent():
    net = two_sink_net(np.random.default_rng(10))
    with pytest.raises(ValidationError):
        trade_reservoir_direction(net, "r2")


def test_trade_inconsistent_zero_marginal():
    # column r=1 has zero marginal amplitude but cannot be written as A(x|r)A(r) otherwise
    net = NetSpec([Node.amplitude("x", 2, [1, 0]), Node.amplitude("r", 2, [[1, 0], [0, 1]], ("x",))],
                  ("r",), ("x",))
    traded = trade_reservoir_direction(net, "r")
    assert np.allclose(evaluate_quantum(traded).matrix, evaluate_quantum(net).matrix)


def test_random_rank2_trade():
    rng = np.random.default_rng(11)
    net = NetSpec([Node.amplitude("x", 3, amp(rng, 3)), Node.amplitude("r", 2, amp(rng, 3, 2), ("x",))],
                  ("r",), ("x",))
    traded = trade_reservoir_direction(net, "r")
    rho = evaluate_quantum(net)
    assert np.linalg.matrix_rank(rho.matrix, tol=1e-10) == 2
    assert np.max(np.abs(evaluate_quantum(traded).matrix - rho.matrix)) < 1e-10
