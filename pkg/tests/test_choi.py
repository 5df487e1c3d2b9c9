from __future__ import annotations

import itertools

import numpy as np

from qgraph.choi import (AdjacencyMap, choi_from_map, classify, conjugate_map, degree, flip, is_bounded_degree,
                         kms_adjoint, map_from_choi, schur_product)
from qgraph.qspace import AlgebraElement, QuantumSpace, TwoSidedElement, kms_inner, modular, weight
from qgraph.sampling import random_element, random_maps, random_space

RHO = np.diag([2.0, 0.5])


def _classical_choi(P, n):
    return np.array([[P.get((i, j), 1)[0, 0] for j in range(n)] for i in range(n)])


def test_classical_choi_examples():
    J = np.ones((3, 3))
    I = np.eye(3)
    for M in (I, J - I, J):
        P = AdjacencyMap.classical(M).choi
        assert np.abs(_classical_choi(P, 3) - M).max() < 1e-12


def test_map_from_choi_complete():
    rng = np.random.default_rng(0)
    sp = QuantumSpace.matrix(RHO)
    P = TwoSidedElement({("a", "a"): np.eye(4)})
    A = map_from_choi(sp, P)
    for _ in range(5):
        x = random_element(sp, rng)
        assert (A(x) - weight(sp, x) * sp.unit()).norm() < 1e-12
    M = np.ones((3, 3)) - np.eye(3)
    P = AdjacencyMap.classical(M).choi
    A = map_from_choi(QuantumSpace.classical(3), P)
    assert np.abs(A.to_matrix() - M).max() < 1e-12


def test_round_trip():
    rng = np.random.default_rng(1)
    for _ in range(50):
        sp = random_space(rng, max_dim=3)
        P = TwoSidedElement({(b.label, a.label): rng.normal(size=(b.dim * a.dim,) * 2)
                             + 1j * rng.normal(size=(b.dim * a.dim,) * 2)
                             for a in sp.blocks for b in sp.blocks})
        assert (choi_from_map(sp, map_from_choi(sp, P).maps) - P).norm() < 1e-9
        A = AdjacencyMap.from_maps(sp, random_maps(sp, rng))
        assert map_from_choi(sp, A.choi).allclose(A, 1e-9)


def test_schur_product():
    K3 = np.ones((3, 3)) - np.eye(3)
    A = AdjacencyMap.classical(K3)
    assert np.abs(schur_product(A, A).to_matrix() - K3).max() < 1e-12
    M1 = np.arange(9.0).reshape(3, 3)
    M2 = np.arange(9.0).reshape(3, 3).T + 1
    S = schur_product(AdjacencyMap.classical(M1), AdjacencyMap.classical(M2))
    assert np.abs(S.to_matrix() - M1 * M2).max() < 1e-12
    C = AdjacencyMap.complete(QuantumSpace.matrix(RHO))
    assert schur_product(C, C).allclose(C, 1e-12)


def test_schur_product_is_choi_product():
    rng = np.random.default_rng(2)
    for _ in range(50):
        sp = random_space(rng, max_dim=3)
        A = AdjacencyMap.from_maps(sp, random_maps(sp, rng))
        B = AdjacencyMap.from_maps(sp, random_maps(sp, rng))
        lhs = schur_product(A, B).choi
        rhs = A.choi @ B.choi
        assert (lhs - rhs).norm() < 1e-9 * max(1.0, rhs.norm())


def test_classify_examples():
    c = classify(AdjacencyMap.classical(np.array([[0, 1, 1], [1, 0, 0], [1, 0, 0]])))
    assert all(c.as_dict()[f] for f in c.FLAGS)
    c = classify(AdjacencyMap.complete(QuantumSpace.matrix(RHO)))
    assert c.schur_idempotent and c.completely_positive and c.kms_symmetric and c.gns_symmetric
    assert not c.loop_free


def test_classify_oblique_idempotent():
    u = np.array([1.0, 0, 0, 0])
    v = np.array([1.0, 1.0, 0, 0])
    K = np.outer(u, v)
    assert np.abs(K @ K - K).max() < 1e-15
    assert np.allclose(sorted(np.linalg.eigvals(K).real), [0, 0, 0, 1])
    A = AdjacencyMap.from_choi(QuantumSpace.matrix(np.eye(2)), TwoSidedElement({("a", "a"): K}))
    c = classify(A)
    assert c.schur_idempotent and not c.completely_positive and not c.real


def test_kms_adjoint():
    M = np.array([[0, 2.0, 1], [3, 0, 0], [0, 5, 1]])
    A = AdjacencyMap.classical(M)
    assert np.abs(kms_adjoint(A).to_matrix() - M.T).max() < 1e-12
    rng = np.random.default_rng(3)
    for _ in range(50):
        sp = random_space(rng, max_dim=3)
        A = AdjacencyMap.from_maps(sp, random_maps(sp, rng))
        x, y = random_element(sp, rng), random_element(sp, rng)
        As = kms_adjoint(A)
        lhs = kms_inner(sp, A(x), y)
        assert abs(lhs - kms_inner(sp, x, As(y))) < 1e-9 * max(1.0, abs(lhs))
        assert kms_adjoint(As).allclose(A, 1e-9)


def test_flip_is_conjugated_kms_adjoint():
    rng = np.random.default_rng(4)
    for _ in range(20):
        sp = random_space(rng, max_dim=3)
        A = AdjacencyMap.from_maps(sp, random_maps(sp, rng))
        target = conjugate_map(kms_adjoint(A)).choi
        assert (flip(A.choi, sp) - target).norm() < 1e-9 * max(1.0, target.norm())
        Ab = conjugate_map(A)
        R = AdjacencyMap.from_maps(sp, {k: (m + Ab.maps[k]) / 2 for k, m in A.maps.items()})
        assert (flip(R.choi, sp) - kms_adjoint(R).choi).norm() < 1e-9 * max(1.0, R.choi.norm())


def test_p_tilde_relation():
    # P~ = (A (x) id) m^*(1) = (1/c) sum_ij A(e_ij rho^{-1}) (x) e_ji.  The opposite modular group is
    # sigma^op_z(y^op) = sigma_{-z}(y)^op, so applying sigma^op_{i/2} to the second leg means sigma_{-i/2}.
    rng = np.random.default_rng(5)
    for _ in range(10):
        sp = random_space(rng, max_dim=3)
        A = AdjacencyMap.from_maps(sp, random_maps(sp, rng))
        out = {}
        for b in sp.blocks:
            n = b.dim
            for i, j in itertools.product(range(n), repeat=2):
                e = np.zeros((n, n))
                e[i, j] = 1
                first = A(AlgebraElement({b.label: e @ b.power(-1)}))
                second = modular(sp, -0.5j, AlgebraElement({b.label: e.T}))[b.label]
                for beta, m in first.blocks.items():
                    out[(beta, b.label)] = out.get((beta, b.label), 0) + np.kron(m, second.T) / b.coef
        P = TwoSidedElement(out)
        assert (P - A.choi).norm() < 1e-9 * max(1.0, A.choi.norm())


def test_degree():
    C6 = np.roll(np.eye(6), 1, axis=0) + np.roll(np.eye(6), -1, axis=0)
    d = degree(AdjacencyMap.classical(C6))
    assert all(abs(d[i][0, 0] - 2) < 1e-12 for i in range(6))
    sp = QuantumSpace.classical(4)
    P = AdjacencyMap.classical(np.ones((4, 4))).choi
    v = is_bounded_degree(sp, P, [[0, 1], [0, 1, 2, 3], [0, 1, 2, 3], [0, 1, 2, 3]])
    assert v.verdict == "bounded" and abs(v.bound - 4) < 1e-12 and v.locally_finite


def test_classical_quantum_adjacency_small():
    for bits in itertools.product([0, 1], repeat=4):
        A = AdjacencyMap.classical(np.array(bits, dtype=float).reshape(2, 2))
        assert classify(A).is_quantum_adjacency
    A = AdjacencyMap.classical(np.array([[0, 0.5], [1, 0]]))
    assert not classify(A).is_quantum_adjacency


def test_scalar_block_shortcuts_match_general_formulas():
    # 1x1 blocks take closed-form paths; compare them with the matrix-unit formulas
    from qgraph.bimodule import bimodule_from_projection, projection_from_bimodule
    from qgraph.choi import loop_map_norm
    from qgraph.qspace import Block
    sp = QuantumSpace([Block("x", 1, np.array([[2.5]]), 0.3), Block("y", 1, np.array([[0.7]]), 1.7)])
    rng = np.random.default_rng(12)
    A = AdjacencyMap.from_maps(sp, random_maps(sp, rng))
    for (beta, alpha), m in A.maps.items():
        a = sp[alpha]
        q = a.power(-0.25)[0, 0]
        assert abs(A.choi[(beta, alpha)][0, 0] - m[0, 0] * q ** 4 / a.coef) < 1e-12
    loops = max(abs(A.maps[(b.label, b.label)][0, 0] / b.rho[0, 0] / b.coef) for b in sp.blocks)
    assert abs(loop_map_norm(A) - loops) < 1e-12
    c = classify(A)
    assert not c.schur_idempotent and not schur_product(A, A).allclose(A, 1e-9)
    # an indicator Choi element is a projection and survives the bimodule round trip
    P = TwoSidedElement({("x", "y"): [[1.0]], ("y", "y"): [[1.0]]})
    B = AdjacencyMap.from_choi(sp, P)
    c = classify(B)
    assert c.is_quantum_adjacency and schur_product(B, B).allclose(B, 1e-9)
    assert (projection_from_bimodule(bimodule_from_projection(sp, P)) - P).norm() < 1e-12
