from __future__ import annotations

import itertools

import numpy as np
import pytest

from qgraph.choi import classify, schur_product
from qgraph.fusion import FiniteGroup, GroupDual, NoProviderError, SUq2Dual, UFPlusDual, dual_of_cyclic
from qgraph.qgfourier import (FiniteDualPair, antipode_S, classify_convolution, convolution_map, convolve,
                              convolve_fourier, h_L, h_R, indicator, plancherel_deviation, schur_of_convolutions,
                              symmetry_report, unitary_antipode_R)
from qgraph.qspace import AlgebraElement


def rand_el(dual, labels, rng):
    return AlgebraElement({a: rng.normal(size=(dual.dim(a),) * 2) + 1j * rng.normal(size=(dual.dim(a),) * 2)
                           for a in labels})


def pairs():
    return [FiniteDualPair.symmetric3(), FiniteDualPair.cyclic(4), FiniteDualPair.dihedral4(),
            FiniteDualPair(GroupDual(FiniteGroup.symmetric(3)))]


def test_z2_character_table():
    pair = FiniteDualPair.cyclic(2)
    table = np.array([pair.fourier(indicator(pair.dual, [a])) for a in pair.labels])
    assert np.abs(table - np.array([[1, 1], [1, -1]])).max() < 1e-12
    gpair = FiniteDualPair(GroupDual(FiniteGroup.cyclic(2)))
    f = gpair.fourier(AlgebraElement({1: np.ones((1, 1))}))
    # lambda(g) for the generator of Z_2 is the swap, with eigenvalues equal to the characters
    assert np.abs(f - np.array([[0, 1], [1, 0]])).max() < 1e-12


def test_round_trip_and_orthogonality():
    rng = np.random.default_rng(0)
    for pair in pairs():
        assert pair.orthogonality_deviation() < 1e-12
        assert sum(pair.dual.dim(a) ** 2 for a in pair.labels) == pair.group.order
        for _ in range(5):
            x = rand_el(pair.dual, pair.labels, rng)
            assert (pair.inverse_fourier(pair.fourier(x)) - x).norm() < 1e-9


def test_plancherel_z5_against_dft():
    pair = FiniteDualPair.cyclic(5)
    rng = np.random.default_rng(1)
    for _ in range(50):
        c = rng.normal(size=5) + 1j * rng.normal(size=5)
        x = AlgebraElement({a: [[c[k]]] for k, a in enumerate(pair.labels)})
        f = pair.fourier(x)
        # chi_k(g) = exp(2 pi i k g / 5) or its conjugate, depending on the stored representation
        oracle = [5 * np.fft.ifft(c), np.fft.fft(c)]
        assert min(np.abs(f - o).max() for o in oracle) < 1e-9
        assert abs(np.linalg.norm(c) - np.sqrt(np.mean(np.abs(f) ** 2))) < 1e-9
        assert plancherel_deviation(pair, x) < 1e-9


def test_convolution_theorem_and_paths():
    rng = np.random.default_rng(2)
    for pair in pairs():
        d = pair.dual
        for _ in range(5):
            P, x, y = (rand_el(d, pair.labels, rng) for _ in range(3))
            px = convolve(d, P, x)
            assert np.abs(pair.fourier(px) - pair.multiply(pair.fourier(x), pair.fourier(P))).max() < 1e-9
            assert (px - convolve_fourier(pair, P, x)).norm() < 1e-9
            assert (convolve(d, P, convolve(d, y, x)) - convolve(d, convolve(d, P, y), x)).norm() < 1e-9
            assert (px.H - convolve(d, P.H, x.H)).norm() < 1e-9


def test_classical_convolution():
    g = FiniteGroup.symmetric(3)
    d = GroupDual(g)
    rng = np.random.default_rng(3)
    p, xv = rng.normal(size=6), rng.normal(size=6)
    P = AlgebraElement({k: [[p[k]]] for k in range(6)})
    x = AlgebraElement({k: [[xv[k]]] for k in range(6)})
    oracle = np.zeros(6)
    for a, c in itertools.product(range(6), repeat=2):
        oracle[g.mul(a, c)] += xv[a] * p[c]
    out = convolve(d, P, x)
    assert max(abs(out.get(k, 1)[0, 0] - oracle[k]) for k in range(6)) < 1e-12


def test_unit_of_convolution():
    rng = np.random.default_rng(4)
    for d, labels in ((SUq2Dual(0.5), range(4)), (FiniteDualPair.symmetric3().dual, ["triv", "sgn", "std"])):
        x = rand_el(d, labels, rng)
        assert (convolve(d, indicator(d, [d.trivial]), x) - x).norm() < 1e-12


def test_su2_fundamental_convolution_dimension_count():
    d = SUq2Dual(1.0)
    out = convolve(d, indicator(d, [1]), AlgebraElement({0: [[1.0]]}))
    assert set(out.support()) == {1}
    assert np.linalg.matrix_rank(out[1]) == 2 and abs(np.trace(out[1]) - 2) < 1e-12
    # sum_b dim_q(b) / (dim_q(a) dim_q(c)) Tr((1_c * x)_b) = Tr(x) n_c
    for a in range(1, 5):
        x = AlgebraElement({a: np.eye(a + 1)[:, [0]] @ np.eye(a + 1)[[0], :]})
        out = convolve(d, indicator(d, [1]), x)
        assert set(out.support()) == {a - 1, a + 1}
        total = sum((b + 1) / ((a + 1) * 2) * np.trace(m) for b, m in out.blocks.items())
        assert abs(total - 2) < 1e-12


def test_suq2_convolution_properties():
    d = SUq2Dual(0.5)
    rng = np.random.default_rng(5)
    P, x, y = (rand_el(d, range(3), rng) for _ in range(3))
    assert (convolve(d, P, convolve(d, y, x)) - convolve(d, convolve(d, P, y), x)).norm() < 1e-8
    assert (convolve(d, P, x).H - convolve(d, P.H, x.H)).norm() < 1e-9


def test_schur_of_convolutions():
    rng = np.random.default_rng(6)
    pair = FiniteDualPair.symmetric3()
    d = pair.dual
    P1, P2 = rand_el(d, pair.labels, rng), rand_el(d, pair.labels, rng)
    lhs = schur_product(convolution_map(d, P1, pair.labels), convolution_map(d, P2, pair.labels))
    assert lhs.allclose(convolution_map(d, schur_of_convolutions(P1, P2), pair.labels), 1e-9)
    d = SUq2Dual(0.5)
    P1, P2 = rand_el(d, [1, 2], rng), rand_el(d, [1, 2], rng)
    W = range(7)
    lhs = schur_product(convolution_map(d, P1, W), convolution_map(d, P2, W))
    assert lhs.allclose(convolution_map(d, schur_of_convolutions(P1, P2), W), 1e-9)
    g = GroupDual(FiniteGroup.cyclic(4))
    a, b = indicator(g, [1, 2]), indicator(g, [2, 3])
    assert schur_of_convolutions(a, b).support() == {2}


def test_uf_plus_orthogonal_generators():
    u = UFPlusDual(2)
    pu, pU = indicator(u, ["u"]), indicator(u, ["U"])
    assert schur_of_convolutions(pu, pU).norm() == 0
    W = ["", "u", "U", "uu", "uU", "Uu", "UU"]
    S = schur_product(convolution_map(u, pu, W), convolution_map(u, pU, W))
    assert max((np.abs(m).max() for m in S.maps.values()), default=0.0) < 1e-12
    with pytest.raises(NoProviderError):
        convolve(u, AlgebraElement({"u": [[1, 0], [0, 0]]}), indicator(u, ["u"]))


def test_projection_iff_completely_positive():
    pair = FiniteDualPair.symmetric3()
    d = pair.dual
    v, w = np.array([1.0, 0.0]), np.array([1.0, 1.0])
    oblique = np.outer(v, w) / (w @ v)
    A = classify_convolution(pair, AlgebraElement({"std": oblique}))
    assert A.schur_idempotent and not A.completely_positive
    A = classify_convolution(pair, AlgebraElement({"std": np.outer(v, v), "sgn": [[1]]}))
    assert A.schur_idempotent and A.completely_positive
    A = classify_convolution(pair, indicator(d, ["std"]))
    assert A.is_quantum_adjacency


def test_antipodes():
    g = FiniteGroup.symmetric(3)
    d = GroupDual(g)
    for k in range(6):
        s = antipode_S(d, AlgebraElement({k: [[1.0]]}))
        assert s.support() == {g.inv(k)}
    s = SUq2Dual(0.5)
    for n in range(4):
        one = indicator(s, [n])
        assert (unitary_antipode_R(s, one) - one).norm() == 0
        assert (antipode_S(s, one) - unitary_antipode_R(s, one)).norm() < 1e-12
        assert abs(h_R(s, unitary_antipode_R(s, one)) - h_L(s, one)) < 1e-9
    with pytest.raises(NoProviderError):
        unitary_antipode_R(s, AlgebraElement({1: [[1, 0], [0, 0]]}))


def test_antipode_on_pairs():
    rng = np.random.default_rng(7)
    for pair in pairs():
        d = pair.dual
        x, y = rand_el(d, pair.labels, rng), rand_el(d, pair.labels, rng)
        R = lambda z: unitary_antipode_R(pair, z)  # noqa: E731
        assert (R(R(x)) - x).norm() < 1e-9
        assert (R(x @ y) - R(y) @ R(x)).norm() < 1e-9
        assert (R(x.H) - R(x).H).norm() < 1e-9
        assert abs(h_R(d, R(x)) - h_L(d, x)) < 1e-9
        # conj(F(x)) = F(S(x^*)), computed through two independent paths
        f = pair.fourier(x)
        lhs = f.conj() if pair.kind == "dual" else f.conj().T
        assert np.abs(lhs - pair.fourier(antipode_S(pair, x.H))).max() < 1e-9


def test_symmetry_report_examples():
    g = GroupDual(FiniteGroup.cyclic(5))
    rep = symmetry_report(g, indicator(g, [1, 4]))
    assert rep.gns and rep.kms
    s = SUq2Dual(0.5)
    assert symmetry_report(s, indicator(s, [1, 2])).kms
    pair = FiniteDualPair.cyclic(3)
    for S, expect in ((["chi1"], False), (["chi1", "chi2"], True)):
        rep = symmetry_report(pair, indicator(pair.dual, S))
        cls = classify_convolution(pair, indicator(pair.dual, S))
        assert rep.kms == rep.gns == cls.kms_symmetric == cls.gns_symmetric == expect


def test_symmetry_matches_classifier_on_random_projections():
    rng = np.random.default_rng(8)
    pair = FiniteDualPair.symmetric3()
    for real in (True, False, True, False):
        v = rng.normal(size=2) + (0 if real else 1j * rng.normal(size=2))
        v /= np.linalg.norm(v)
        P = AlgebraElement({"std": np.outer(v, v.conj())})
        rep = symmetry_report(pair, P)
        cls = classify_convolution(pair, P)
        assert rep.kms == cls.kms_symmetric and rep.gns == cls.gns_symmetric
        assert rep.kms == real


def test_convolution_map_matches_convolve():
    rng = np.random.default_rng(9)
    d = dual_of_cyclic(4)
    labels = d.all_labels()
    P, x = rand_el(d, labels, rng), rand_el(d, labels, rng)
    A = convolution_map(d, P, labels)
    assert (A(x) - convolve(d, P, x)).norm() < 1e-12
    assert classify(convolution_map(d, indicator(d, labels[1:]), labels)).is_quantum_adjacency
