from __future__ import annotations

import numpy as np
import pytest

from qgraph.bimodule import (Bimodule, adjacency_from_bimodule, bimodule_from_adjacency, bimodule_from_projection,
                             kms_gram_schmidt, kms_module_inner, kraus_degree, power, projection_from_bimodule,
                             psi_inverse, random_bimodule, star)
from qgraph.choi import AdjacencyMap, classify, degree, flip, map_from_choi
from qgraph.qspace import AlgebraElement, QuantumSpace, SpaceError, TwoSidedElement
from qgraph.sampling import random_element, random_space, random_unitary

RHO = np.diag([2.0, 0.5])
K3 = np.ones((3, 3)) - np.eye(3)


def _e(n, m, i, j):
    x = np.zeros((n, m))
    x[i, j] = 1
    return x


def _classical_bimodule(M):
    sp = QuantumSpace.classical(M.shape[0])
    raw = {(j, i): [np.ones((1, 1))] for i in range(M.shape[0]) for j in range(M.shape[0]) if M[i, j]}
    return Bimodule.from_spanning(sp, raw)


def test_psi_inverse():
    sp = QuantumSpace.matrix(RHO)
    assert (psi_inverse(sp, sp.unit()) - sp.unit()).norm() < 1e-12
    assert (psi_inverse(sp, sp.matrix_unit("a", 0, 0)) - 0.2 * sp.unit()).norm() < 1e-12
    rng = np.random.default_rng(0)
    for _ in range(10):
        sp = random_space(rng)
        T = random_element(sp, rng)
        a = AlgebraElement({b.label: rng.normal() * np.eye(b.dim) for b in sp.blocks})
        c = AlgebraElement({b.label: rng.normal() * np.eye(b.dim) for b in sp.blocks})
        assert (psi_inverse(sp, a @ T @ c) - a @ psi_inverse(sp, T) @ c).norm() < 1e-9
        E = psi_inverse(sp, T)
        assert (psi_inverse(sp, E) - E).norm() < 1e-9


def test_gram_schmidt():
    sp = QuantumSpace.matrix(RHO)
    e11 = _e(2, 2, 0, 0)
    assert len(kms_gram_schmidt(sp, "a", "a", [e11, e11])) == 1
    sp3 = QuantumSpace.classical(3)
    (X,) = kms_gram_schmidt(sp3, 0, 1, [np.ones((1, 1))])
    assert abs(X[0, 0] - 1) < 1e-12
    # <e12, e12> = Tr(e21 rho^{-1/2} e12 rho^{-1/2}) / Tr(rho^{-1}) = 1 / 2.5
    assert abs(kms_module_inner(sp, "a", "a", _e(2, 2, 0, 1), _e(2, 2, 0, 1)) - 0.4) < 1e-12
    (Y,) = kms_gram_schmidt(sp, "a", "a", [_e(2, 2, 0, 1)])
    assert np.abs(Y - np.sqrt(2.5) * _e(2, 2, 0, 1)).max() < 1e-12
    assert kms_gram_schmidt(sp, "a", "a", [np.zeros((2, 2))]) == []


def test_projection_examples():
    V = _classical_bimodule(K3)
    P = projection_from_bimodule(V)
    for (b, a), m in P.blocks.items():
        assert abs(m[0, 0] - K3[b, a]) < 1e-12
    sp = QuantumSpace.from_rhos({"a": RHO, "b": np.diag([1.0, 3.0, 0.2])})
    full = Bimodule.from_spanning(sp, {("a", "b"): [_e(3, 2, i, j) for i in range(3) for j in range(2)]})
    P = projection_from_bimodule(full)
    assert np.abs(P[("b", "a")] - np.eye(6)).max() < 1e-12


def test_projection_basis_independent_and_idempotent():
    rng = np.random.default_rng(1)
    for _ in range(20):
        sp = random_space(rng, max_dim=3)
        V = random_bimodule(sp, rng)
        P = projection_from_bimodule(V)
        assert (P @ P - P).norm() < 1e-9 and (P - P.H).norm() < 1e-9
        mixed = {}
        for key, basis in V.parts.items():
            U = random_unitary(len(basis), rng)
            mixed[key] = [sum(U[i, j] * basis[j] for j in range(len(basis))) for i in range(len(basis))]
        assert (projection_from_bimodule(Bimodule(sp, mixed)) - P).norm() < 1e-9


def test_bimodule_from_projection_examples():
    V = bimodule_from_adjacency(AdjacencyMap.classical(K3))
    assert sorted(V.dims()) == sorted((j, i) for i in range(3) for j in range(3) if i != j)
    sp = QuantumSpace.matrix(RHO)
    V = bimodule_from_adjacency(AdjacencyMap.complete(sp))
    assert V.dims() == {("a", "a"): 4}
    with pytest.raises(SpaceError):
        bimodule_from_projection(sp, TwoSidedElement({("a", "a"): 0.5 * np.eye(4)}))


def test_round_trips():
    rng = np.random.default_rng(2)
    for _ in range(50):
        sp = random_space(rng, max_dim=3)
        V = random_bimodule(sp, rng)
        P = projection_from_bimodule(V)
        assert bimodule_from_projection(sp, P).same_as(V)
        A = adjacency_from_bimodule(V)
        assert A.allclose(map_from_choi(sp, P), 1e-9)


def test_adjacency_examples():
    A = adjacency_from_bimodule(_classical_bimodule(K3))
    assert np.abs(A.to_matrix() - K3).max() < 1e-12
    sp = QuantumSpace.matrix(RHO)
    V = Bimodule.from_spanning(sp, {("a", "a"): [_e(2, 2, i, j) for i in range(2) for j in range(2)]})
    assert adjacency_from_bimodule(V).allclose(AdjacencyMap.complete(sp), 1e-12)


def test_power_and_star():
    V2 = power(_classical_bimodule(K3), 2)
    assert len(V2.dims()) == 9
    rng = np.random.default_rng(3)
    for _ in range(20):
        sp = random_space(rng, max_dim=3)
        V = random_bimodule(sp, rng)
        assert star(star(V)).same_as(V)
        assert (flip(projection_from_bimodule(V), sp) - projection_from_bimodule(star(V))).norm() < 1e-9


def test_power_lemma():
    rng = np.random.default_rng(4)
    for _ in range(20):
        sp = random_space(rng, max_blocks=2, max_dim=3)
        V = random_bimodule(sp, rng)
        A = adjacency_from_bimodule(V)
        support = bimodule_from_projection(sp, A.compose(A).choi, support=True)
        dist = (projection_from_bimodule(support) - projection_from_bimodule(power(V, 2))).fro_norm()
        assert dist < 1e-8


def test_kraus_degree():
    rng = np.random.default_rng(5)
    for _ in range(20):
        sp = random_space(rng, max_dim=3)
        V = random_bimodule(sp, rng, real_structure=True)
        A = adjacency_from_bimodule(V)
        assert (kraus_degree(V) - degree(A)).norm() < 1e-9
        assert classify(A).is_quantum_graph
