"""Bimodules over the commutant in the standard representation.

In ``H = (+)_a C^{n_a}`` the commutant of ``B`` is its center, so a bimodule
is a family of subspaces ``V_{ab}`` of ``B(C^{n_a}, C^{n_b})`` (matrices of
shape ``n_b x n_a``).  Each part is stored through a basis that is orthonormal
for the KMS inner product

    <X, Y> = Tr(X^* rho_b^{-1/2} Y rho_a^{-1/2}) / sqrt(c_a c_b).

The whitening ``w(X) = rho_b^{-1/4} X rho_a^{-1/4} / (c_a c_b)^{1/4}`` turns that
inner product into the Hilbert-Schmidt one, and the Choi block of the bimodule
is the orthogonal projection ``P_{ba} = sum_i vec(w(X_i)) vec(w(X_i))^*``.
"""
from __future__ import annotations

from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .choi import AdjacencyMap, classify, conj_kron
from .qspace import DEFAULT_TOL, AlgebraElement, Label, QuantumSpace, SpaceError, TwoSidedElement

RANK_TOL = 1e-10

Key = Tuple[Label, Label]


class TruncationOverflow(RuntimeError):
    """Products of bimodule parts left the truncation window."""


def kms_module_inner(space: QuantumSpace, alpha: Label, beta: Label, X: np.ndarray, Y: np.ndarray) -> complex:
    """KMS inner product on ``B(C^{n_alpha}, C^{n_beta})``."""
    a, b = space[alpha], space[beta]
    val = np.trace(np.asarray(X).conj().T @ b.power(-0.5) @ np.asarray(Y) @ a.power(-0.5))
    return complex(val / np.sqrt(a.coef * b.coef))


def _whiten(space: QuantumSpace, alpha: Label, beta: Label, X: np.ndarray) -> np.ndarray:
    a, b = space[alpha], space[beta]
    return b.power(-0.25) @ X @ a.power(-0.25) / (a.coef * b.coef) ** 0.25


def _unwhiten(space: QuantumSpace, alpha: Label, beta: Label, W: np.ndarray) -> np.ndarray:
    a, b = space[alpha], space[beta]
    return (a.coef * b.coef) ** 0.25 * (b.power(0.25) @ W @ a.power(0.25))


def kms_gram_schmidt(space: QuantumSpace, alpha: Label, beta: Label,
                     raw: Iterable[np.ndarray], rel_tol: float = RANK_TOL) -> List[np.ndarray]:
    """Modified Gram-Schmidt with pivoting in the KMS inner product.

    At each step the remaining vector with the largest residual is taken.
    A vector is dropped once its residual falls below ``rel_tol`` times its
    original norm.
    """
    nb, na = space[beta].dim, space[alpha].dim
    vecs = []
    for X in raw:
        X = np.asarray(X, dtype=complex)
        if X.shape != (nb, na):
            raise SpaceError(f"part {(alpha, beta)!r}: expected shape {(nb, na)}, got {X.shape}")
        vecs.append(_whiten(space, alpha, beta, X).reshape(-1))
    if not vecs:
        return []
    resid = np.array(vecs)
    orig = np.linalg.norm(resid, axis=1)
    alive = orig > 0
    basis: List[np.ndarray] = []
    while True:
        norms = np.linalg.norm(resid, axis=1)
        ok = alive & (norms > rel_tol * orig)
        if not ok.any():
            break
        k = int(np.argmax(np.where(ok, norms, -1.0)))
        q = resid[k] / norms[k]
        basis.append(q)
        alive[k] = False
        resid = resid - np.outer(resid @ q.conj(), q)
    return [_unwhiten(space, alpha, beta, q.reshape(nb, na)) for q in basis]


class Bimodule:
    """A family of KMS-orthonormal bases ``parts[(alpha, beta)]``."""

    def __init__(self, space: QuantumSpace, parts: Mapping[Key, Sequence[np.ndarray]],
                 tol: float = DEFAULT_TOL, check: bool = True):
        self.space = space
        data: Dict[Key, Tuple[np.ndarray, ...]] = {}
        for (alpha, beta), basis in parts.items():
            mats = []
            for X in basis:
                X = np.array(X, dtype=complex)
                X.setflags(write=False)
                mats.append(X)
            if mats:
                data[(alpha, beta)] = tuple(mats)
        self.parts = data
        if check:
            dev = self.orthonormality_deviation()
            if dev > tol:
                raise SpaceError(f"bimodule basis is not KMS-orthonormal (deviation {dev:.3g})")

    @classmethod
    def from_spanning(cls, space: QuantumSpace, raw: Mapping[Key, Iterable[np.ndarray]]) -> "Bimodule":
        """Orthonormalise arbitrary spanning sets part by part."""
        return cls(space, {k: kms_gram_schmidt(space, k[0], k[1], v) for k, v in raw.items()})

    def __repr__(self) -> str:
        dims = {k: len(v) for k, v in self.parts.items()}
        return f"Bimodule({dims})"

    def dims(self) -> Dict[Key, int]:
        return {k: len(v) for k, v in self.parts.items()}

    def gram(self, key: Key) -> np.ndarray:
        alpha, beta = key
        basis = self.parts.get(key, ())
        if not basis:
            return np.zeros((0, 0), dtype=complex)
        # whitening turns the KMS inner product into the Hilbert-Schmidt one
        w = np.array([_whiten(self.space, alpha, beta, X).reshape(-1) for X in basis])
        return w.conj() @ w.T

    def orthonormality_deviation(self) -> float:
        worst = 0.0
        for key, basis in self.parts.items():
            g = self.gram(key)
            worst = max(worst, float(np.abs(g - np.eye(len(basis))).max(initial=0.0)))
        return worst

    def same_as(self, other: "Bimodule", tol: float = 1e-8) -> bool:
        """Equality of subspaces, compared through their projections."""
        return (projection_from_bimodule(self) - projection_from_bimodule(other)).norm() <= tol


# ---------------------------------------------------------------------------
# conditional expectation
# ---------------------------------------------------------------------------

def psi_inverse(space: QuantumSpace, T) -> AlgebraElement:
    """``sum_a Tr(rho_a^{-1} T_aa) / Tr(rho_a^{-1}) 1_a``.

    ``T`` is an :class:`AlgebraElement` (its blocks are the diagonal blocks of
    an operator on ``H``) or a mapping ``(b, a) -> n_b x n_a`` matrix of which
    only the diagonal blocks are used.
    """
    if isinstance(T, AlgebraElement):
        diag = T.blocks
    else:
        diag = {k[0]: m for k, m in T.items() if k[0] == k[1]}
    out = {}
    for label, m in diag.items():
        b = space[label]
        val = np.trace(b.power(-1) @ np.asarray(m)) / b.tr_rho_inv
        out[label] = val * np.eye(b.dim)
    return AlgebraElement(out)


# ---------------------------------------------------------------------------
# projections and adjacency maps
# ---------------------------------------------------------------------------

def projection_from_bimodule(V: Bimodule) -> TwoSidedElement:
    """Choi projection of a bimodule; key ``(beta, alpha)`` for part ``(alpha, beta)``."""
    space = V.space
    out = {}
    for (alpha, beta), basis in V.parts.items():
        vs = np.array([_whiten(space, alpha, beta, X).reshape(-1) for X in basis])
        out[(beta, alpha)] = vs.T @ vs.conj()
    return TwoSidedElement(out)


def bimodule_from_projection(space: QuantumSpace, P: TwoSidedElement, support: bool = False,
                             tol: float = DEFAULT_TOL) -> Bimodule:
    """Bimodule whose projection is ``P``.

    With ``support=True`` any positive semidefinite ``P`` is accepted and the
    bimodule of its range projection is returned; otherwise ``P`` must be an
    orthogonal projection.
    """
    parts = {}
    for (beta, alpha), k in P.blocks.items():
        nb, na = space[beta].dim, space[alpha].dim
        if nb == na == 1:
            # scalar block: the projection test and the eigenvector are explicit
            v = complex(k[0, 0])
            if not support and (abs(v.imag) > tol or abs(v * v - v) > tol):
                raise SpaceError(f"Choi block {(beta, alpha)!r} is not an orthogonal projection")
            if v.real > (0.0 if support else 0.5):
                parts[(alpha, beta)] = [_unwhiten(space, alpha, beta, np.ones((1, 1)))]
            continue
        herm = (k + k.conj().T) / 2
        if not support:
            if np.abs(k - k.conj().T).max(initial=0.0) > tol or np.abs(k @ k - k).max(initial=0.0) > tol:
                raise SpaceError(f"Choi block {(beta, alpha)!r} is not an orthogonal projection")
        w, U = np.linalg.eigh(herm)
        top = max(float(np.abs(w).max(initial=0.0)), 1e-300)
        keep = w > RANK_TOL * top if support else w > 0.5
        # orthonormal eigenvectors unwhiten to a KMS-orthonormal basis
        basis = [_unwhiten(space, alpha, beta, U[:, i].reshape(nb, na)) for i in np.nonzero(keep)[0]]
        if basis:
            parts[(alpha, beta)] = basis
    return Bimodule(space, parts, check=False)


def bimodule_from_adjacency(A: AdjacencyMap, tol: float = DEFAULT_TOL) -> Bimodule:
    cls_ = classify(A, tol)
    if not (cls_.schur_idempotent and cls_.completely_positive):
        raise SpaceError("map is not a quantum adjacency matrix (Choi element is not a projection)")
    return bimodule_from_projection(A.space, A.choi, tol=max(tol, 1e-8))


def kraus_operators(V: Bimodule) -> Dict[Key, List[np.ndarray]]:
    """Kraus operators ``(c_a/c_b)^{1/4} rho_b^{-1/4} X rho_a^{1/4}`` of the adjacency map."""
    space = V.space
    out = {}
    for (alpha, beta), basis in V.parts.items():
        a, b = space[alpha], space[beta]
        f = (a.coef / b.coef) ** 0.25
        out[(alpha, beta)] = [f * (b.power(-0.25) @ X @ a.power(0.25)) for X in basis]
    return out


def adjacency_from_bimodule(V: Bimodule) -> AdjacencyMap:
    """``A(e_kl) = sum_b sqrt(c_a/c_b) sum_i rho_b^{-1/4} X_i rho_a^{1/4} e_kl rho_a^{1/4} X_i^* rho_b^{-1/4}``."""
    maps: Dict[Tuple[Label, Label], np.ndarray] = {}
    for (alpha, beta), ks in kraus_operators(V).items():
        m = sum(conj_kron(K, K.conj().T) for K in ks)
        maps[(beta, alpha)] = m
    return AdjacencyMap.from_maps(V.space, maps)


def kraus_degree(V: Bimodule) -> AlgebraElement:
    """``D = sum_i K_i K_i^*`` over all Kraus operators ending in each block."""
    out: Dict[Label, np.ndarray] = {}
    for (alpha, beta), ks in kraus_operators(V).items():
        d = sum(K @ K.conj().T for K in ks)
        out[beta] = out[beta] + d if beta in out else d
    return AlgebraElement(out)


# ---------------------------------------------------------------------------
# powers and adjoints
# ---------------------------------------------------------------------------

def star(V: Bimodule) -> Bimodule:
    """``star(V)_{ba} = {X^* : X in V_{ab}}``; KMS-orthonormality is preserved."""
    return Bimodule(V.space, {(beta, alpha): [X.conj().T for X in basis]
                              for (alpha, beta), basis in V.parts.items()})


def product(V: Bimodule, W: Bimodule, window: Optional[Iterable[Label]] = None) -> Bimodule:
    """Span of products ``Y X`` with ``X in V_{ag}`` and ``Y in W_{gb}``."""
    allowed = None if window is None else set(window)
    raw: Dict[Key, List[np.ndarray]] = {}
    by_source: Dict[Label, List[Tuple[Label, Tuple[np.ndarray, ...]]]] = {}
    for (gamma, beta), basis in W.parts.items():
        by_source.setdefault(gamma, []).append((beta, basis))
    for (alpha, gamma), xs in V.parts.items():
        for beta, ys in by_source.get(gamma, []):
            if allowed is not None and beta not in allowed:
                raise TruncationOverflow(f"product lands in block {beta!r} outside the window")
            raw.setdefault((alpha, beta), []).extend(Y @ X for X in xs for Y in ys)
    return Bimodule.from_spanning(V.space, raw)


def power(V: Bimodule, k: int, window: Optional[Iterable[Label]] = None) -> Bimodule:
    """``V^k``: span of all composable ``k``-fold products."""
    if k < 1:
        raise ValueError("power needs k >= 1")
    out = V
    for _ in range(k - 1):
        out = product(out, V, window)
    return out


def random_bimodule(space: QuantumSpace, rng: np.random.Generator, fill: float = 0.6,
                    real_structure: bool = False) -> Bimodule:
    """Random bimodule: each part is the span of a random number of random matrices.

    With ``real_structure=True`` the result is closed under ``X -> X^*``, which
    makes its adjacency map KMS-symmetric.
    """
    raw: Dict[Key, List[np.ndarray]] = {}
    for a in space.blocks:
        for b in space.blocks:
            if rng.random() > fill:
                continue
            full = a.dim * b.dim
            r = int(rng.integers(1, full + 1))
            mats = [rng.normal(size=(b.dim, a.dim)) + 1j * rng.normal(size=(b.dim, a.dim)) for _ in range(r)]
            raw.setdefault((a.label, b.label), []).extend(mats)
            if real_structure:
                raw.setdefault((b.label, a.label), []).extend(X.conj().T for X in mats)
    return Bimodule.from_spanning(space, raw)
