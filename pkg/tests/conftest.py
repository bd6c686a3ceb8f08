import numpy as np
import pytest

from pushopt import costs as co
from pushopt import network as nw


@pytest.fixture(scope="session")
def net20():
    """The standard experiment network: 20 agents, arc probability 0.7."""
    return nw.build_mixing_matrix(nw.generate_digraph(20, 0.7, 42))


@pytest.fixture(scope="session")
def ens_case1():
    """Regularized least squares at the standard settings d=3, m=4, delta=2."""
    return co.make_case1_ensemble(20, 3, 4, 2.0, 7)


@pytest.fixture(scope="session")
def ens_case2():
    """Rank-deficient quadratics at the standard settings d=10, m_rank=4."""
    return co.make_case2_ensemble(20, 10, 4, 7)


@pytest.fixture(scope="session")
def complete4():
    """Complete digraph on 4 agents: doubly stochastic uniform mixing."""
    edges = [(i, j) for i in range(1, 5) for j in range(1, 5) if i != j]
    return nw.build_mixing_matrix(nw.make_digraph(4, edges))


@pytest.fixture(scope="session")
def single_agent():
    return nw.build_mixing_matrix(nw.make_digraph(1, []))


def perron_oracle(W):
    """Dense eigendecomposition: eigenvector at the eigenvalue closest to 1."""
    vals, vecs = np.linalg.eig(W)
    k = np.argmin(np.abs(vals - 1.0))
    v = np.real(vecs[:, k])
    return v / v.sum()


def svd_norm_oracle(M):
    return float(np.linalg.svd(np.asarray(M, dtype=float), compute_uv=False)[0])


def induced_pi_norm_oracle(M, pi):
    s = np.sqrt(pi)
    return svd_norm_oracle(M * (s[None, :] / s[:, None]))
