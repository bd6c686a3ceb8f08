import json

import numpy as np
import pytest

from conftest import induced_pi_norm_oracle, perron_oracle
from pushopt import network as nw
from pushopt.errors import FailedConnectivityError, ValidationError


def test_single_vertex_graph():
    g = nw.generate_digraph(1, 0.5, seed=3)
    assert g.n == 1 and g.edges == frozenset()
    assert nw.is_strongly_connected(g)


def test_full_probability_gives_complete_digraph():
    g = nw.generate_digraph(3, 1.0, seed=0)
    assert len(g.edges) == 6


def test_standard_instance_connected_and_plausible_density():
    g = nw.generate_digraph(20, 0.7, seed=42)
    assert nw.is_strongly_connected(g)
    # binomial(380, 0.7): mean 266, sd ~8.9; allow four sigma
    assert abs(len(g.edges) - 266) < 36


def test_generation_deterministic():
    a = nw.generate_digraph(20, 0.7, seed=42)
    b = nw.generate_digraph(20, 0.7, seed=42)
    assert a.edges == b.edges
    Wa = nw.build_mixing_matrix(a).W
    Wb = nw.build_mixing_matrix(b).W
    assert np.array_equal(Wa, Wb)


def test_generation_matches_documented_stream():
    # re-derive the edge set straight from the documented contract: one
    # uniform matrix per attempt from generator seed + attempt, pair (i, j)
    # kept when its entry falls below p
    g = nw.generate_digraph(20, 0.7, seed=42)
    u = np.random.default_rng(42).random((20, 20))
    expected = {(i + 1, j + 1) for i in range(20) for j in range(20)
                if i != j and u[i, j] < 0.7}
    assert g.edges == frozenset(expected)


def test_generation_rejects_disconnected_regimes():
    with pytest.raises(FailedConnectivityError):
        nw.generate_digraph(30, 0.001, seed=1, max_attempts=20)


def test_parameter_validation():
    with pytest.raises(ValidationError):
        nw.generate_digraph(0, 0.5, seed=1)
    with pytest.raises(ValidationError):
        nw.generate_digraph(5, 0.0, seed=1)
    with pytest.raises(ValidationError):
        nw.make_digraph(3, [(1, 1)])
    with pytest.raises(ValidationError):
        nw.make_digraph(3, [(1, 4)])


def test_single_agent_network(single_agent):
    assert single_agent.W == np.ones((1, 1))
    assert single_agent.pi == np.ones(1)
    assert single_agent.rho == 0.0


def test_complete_digraph_doubly_stochastic(complete4):
    assert np.allclose(complete4.W, 0.25)
    assert np.allclose(complete4.pi, 0.25)
    # W equals its own mixing limit, so the mixing norm vanishes
    assert complete4.rho <= 1e-12


def test_mixing_invariants(net20):
    n = net20.n
    assert np.max(np.abs(net20.W.sum(axis=0) - 1.0)) <= 1e-12
    assert np.max(np.abs(net20.W @ net20.pi - net20.pi)) <= 1e-12
    assert np.all(net20.pi > 0) and abs(net20.pi.sum() - 1.0) <= 1e-12
    assert np.allclose(net20.w_inf, np.outer(net20.pi, np.ones(n)), atol=1e-15)
    assert 0.0 <= net20.rho < 1.0
    nw.validate_network(net20)


def test_perron_matches_dense_eigensolver(net20):
    oracle = perron_oracle(net20.W)
    assert np.max(np.abs(net20.pi - oracle)) <= 1e-10


def test_perron_uniform_for_doubly_stochastic():
    rng = np.random.default_rng(0)
    # random doubly stochastic by symmetrizing a mixing matrix
    for n in (2, 5, 9):
        pi = nw.compute_perron(np.full((n, n), 1.0 / n))
        assert np.allclose(pi, 1.0 / n, atol=1e-12)
    assert nw.compute_perron(np.ones((1, 1)))[0] == 1.0


def test_rho_matches_dense_svd(net20):
    oracle = induced_pi_norm_oracle(net20.W - net20.w_inf, net20.pi)
    assert abs(nw.compute_rho(net20) - oracle) <= 1e-10


def test_serialization_round_trip(net20, tmp_path):
    payload = nw.network_to_dict(net20)
    text = json.dumps(payload)
    loaded = nw.network_from_dict(json.loads(text))
    assert np.array_equal(loaded.W, net20.W)
    assert loaded.graph.edges == net20.graph.edges
    assert abs(loaded.rho - net20.rho) <= 1e-12


def test_serialization_rejects_tampering(net20):
    payload = nw.network_to_dict(net20)
    bad = dict(payload)
    bad["rho"] = payload["rho"] + 0.1
    with pytest.raises(ValidationError):
        nw.network_from_dict(bad)
    bad = dict(payload)
    W = np.asarray(payload["W"]).reshape(20, 20).copy()
    W[0, 0] += 0.05
    bad["W"] = list(W.ravel())
    with pytest.raises(ValidationError):
        nw.network_from_dict(bad)
