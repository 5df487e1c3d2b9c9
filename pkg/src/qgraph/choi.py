"""Quantum adjacency matrices and their Choi projections.

A linear map ``A: B -> B`` is stored as block matrices ``A_{beta alpha}`` of
shape ``(n_beta**2, n_alpha**2)`` acting on row-major vectorisations.  Its
Choi element ``P in B (x) B^op`` is

    P_{beta alpha} = (1/c_alpha) sum_ij A(q e_ij q) (x) (q e_ji q)^op,
    q = rho_alpha^{-1/4},

stored with the op-transpose convention of :mod:`qgraph.qspace`.  The inverse
is the right-slice formula

    A(x) = (Id (x) psi)(P # (1 (x) rho^{-1/2} x rho^{1/2})).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .qspace import (
    DEFAULT_TOL,
    AlgebraElement,
    Label,
    QuantumSpace,
    SpaceError,
    TwoSidedElement,
    split4,
)

BlockMaps = Dict[Tuple[Label, Label], np.ndarray]


@lru_cache(maxsize=64)
def _classical_space(labels: Tuple[Label, ...]) -> QuantumSpace:
    # spaces are immutable, so classical ones are shared between maps with the same labels
    from .qspace import Block
    return QuantumSpace(Block(l, 1, np.ones((1, 1))) for l in labels)


def _vec(m: np.ndarray) -> np.ndarray:
    return np.asarray(m).reshape(-1)


def _unvec(v: np.ndarray, n: int) -> np.ndarray:
    return np.asarray(v).reshape(n, n)


def conj_kron(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Matrix of ``y -> left @ y @ right`` on row-major vectors."""
    left = np.asarray(left)
    rt = np.asarray(right).T
    (p, q), (r, s) = left.shape, rt.shape
    return (left[:, None, :, None] * rt[None, :, None, :]).reshape(p * r, q * s)


class AdjacencyMap:
    """A linear map on a (truncated) quantum space, with its Choi element.

    Construct via :meth:`from_maps`, :meth:`from_choi`, :meth:`from_function`
    or :meth:`classical`.  The block maps and the Choi element are both stored
    and checked against each other at construction.
    """

    def __init__(self, space: QuantumSpace, maps: Mapping[Tuple[Label, Label], np.ndarray],
                 choi: TwoSidedElement, tol: float = DEFAULT_TOL, check: bool = True):
        self.space = space
        data = {}
        for (beta, alpha), m in maps.items():
            nb, na = space[beta].dim, space[alpha].dim
            m = np.array(m, dtype=complex)
            if m.shape != (nb * nb, na * na):
                raise SpaceError(f"map block {(beta, alpha)!r} has shape {m.shape}, expected {(nb * nb, na * na)}")
            m.setflags(write=False)
            data[(beta, alpha)] = m
        self.maps: BlockMaps = data
        self.choi = choi
        if check:
            dev = _choi_deviation(space, self.maps, choi)
            scale = max(1.0, choi.norm())
            if dev > tol * scale * 1e3:
                raise SpaceError(f"block maps and Choi element disagree (deviation {dev:.3g})")

    # -- constructors -------------------------------------------------------

    @classmethod
    def from_maps(cls, space: QuantumSpace, maps: Mapping[Tuple[Label, Label], np.ndarray]) -> "AdjacencyMap":
        return cls(space, maps, choi_from_map(space, maps), check=False)

    @classmethod
    def from_choi(cls, space: QuantumSpace, P: TwoSidedElement) -> "AdjacencyMap":
        return map_from_choi(space, P)

    @classmethod
    def from_function(cls, space: QuantumSpace, f: Callable[[AlgebraElement], AlgebraElement],
                      tol: float = 0.0) -> "AdjacencyMap":
        """Tabulate ``f`` on the matrix units of ``space``."""
        maps: Dict[Tuple[Label, Label], np.ndarray] = {}
        for a in space.blocks:
            na = a.dim
            cols = {}
            for i in range(na):
                for j in range(na):
                    y = f(space.matrix_unit(a.label, i, j))
                    for beta, m in y.blocks.items():
                        nb = space[beta].dim
                        col = cols.setdefault(beta, np.zeros((nb * nb, na * na), dtype=complex))
                        col[:, i * na + j] = _vec(m)
            for beta, col in cols.items():
                if np.abs(col).max(initial=0.0) > tol:
                    maps[(beta, a.label)] = col
        return cls.from_maps(space, maps)

    @classmethod
    def classical(cls, matrix, labels: Optional[Sequence[Label]] = None) -> "AdjacencyMap":
        """Classical adjacency matrix on ``C^n``; ``A(e_j) = sum_i A_ij e_i``."""
        matrix = np.asarray(matrix)
        n = matrix.shape[0]
        labels = list(range(n)) if labels is None else list(labels)
        space = _classical_space(tuple(labels))
        maps = {(labels[i], labels[j]): np.array([[matrix[i, j]]]) for i in range(n) for j in range(n)
                if matrix[i, j] != 0}
        return cls.from_maps(space, maps)

    @classmethod
    def complete(cls, space: QuantumSpace) -> "AdjacencyMap":
        """The complete quantum graph ``x -> psi(x) 1``."""
        maps = {}
        for b in space.blocks:
            for a in space.blocks:
                row = _vec(np.eye(b.dim))[:, None]
                col = (a.coef * _vec(a.rho.T))[None, :]
                maps[(b.label, a.label)] = row @ col
        return cls.from_maps(space, maps)

    @classmethod
    def identity(cls, space: QuantumSpace) -> "AdjacencyMap":
        return cls.from_maps(space, {(b.label, b.label): np.eye(b.dim ** 2) for b in space.blocks})

    # -- evaluation ---------------------------------------------------------

    def __repr__(self) -> str:
        return f"AdjacencyMap({self.space!r}, blocks={len(self.maps)})"

    def __call__(self, x: AlgebraElement) -> AlgebraElement:
        out: Dict[Label, np.ndarray] = {}
        for (beta, alpha), m in self.maps.items():
            if alpha not in x.blocks:
                continue
            nb = self.space[beta].dim
            y = _unvec(m @ _vec(x.blocks[alpha]), nb)
            out[beta] = out[beta] + y if beta in out else y
        return AlgebraElement(out, x.finite_support)

    def block(self, beta: Label, alpha: Label) -> np.ndarray:
        nb, na = self.space[beta].dim, self.space[alpha].dim
        m = self.maps.get((beta, alpha))
        return np.zeros((nb * nb, na * na), dtype=complex) if m is None else m

    def compose(self, other: "AdjacencyMap") -> "AdjacencyMap":
        """Operator composition ``self o other``."""
        maps: Dict[Tuple[Label, Label], np.ndarray] = {}
        for (gamma, alpha), m2 in other.maps.items():
            for (beta, g2), m1 in self.maps.items():
                if g2 != gamma:
                    continue
                prod = m1 @ m2
                key = (beta, alpha)
                maps[key] = maps[key] + prod if key in maps else prod
        return AdjacencyMap.from_maps(self.space, maps)

    def __add__(self, other: "AdjacencyMap") -> "AdjacencyMap":
        maps = dict(self.maps)
        for k, m in other.maps.items():
            maps[k] = maps[k] + m if k in maps else m
        return AdjacencyMap.from_maps(self.space, maps)

    def __mul__(self, scalar: complex) -> "AdjacencyMap":
        return AdjacencyMap.from_maps(self.space, {k: scalar * m for k, m in self.maps.items()})

    __rmul__ = __mul__

    def allclose(self, other: "AdjacencyMap", tol: float = DEFAULT_TOL) -> bool:
        keys = set(self.maps) | set(other.maps)
        return all(np.abs(self.block(*k) - other.block(*k)).max(initial=0.0) <= tol for k in keys)

    def to_matrix(self) -> np.ndarray:
        """Dense matrix on the full (truncated) space, blocks in space order."""
        offsets, n = {}, 0
        for b in self.space.blocks:
            offsets[b.label] = n
            n += b.dim ** 2
        out = np.zeros((n, n), dtype=complex)
        for (beta, alpha), m in self.maps.items():
            ob, oa = offsets[beta], offsets[alpha]
            out[ob:ob + m.shape[0], oa:oa + m.shape[1]] = m
        return out


# ---------------------------------------------------------------------------
# Choi correspondence
# ---------------------------------------------------------------------------

def _choi_block(space: QuantumSpace, beta: Label, alpha: Label, m: np.ndarray) -> np.ndarray:
    a = space[alpha]
    nb, na = space[beta].dim, a.dim
    if nb == na == 1:
        return np.asarray(m) / (a.evals[0] * a.coef)
    q = a.power(-0.25)
    # images of q e_ij q, indexed [b1, b2, i, j]
    t = (m @ conj_kron(q, q)).reshape(nb, nb, na, na)
    qt = q.T
    k4 = np.einsum("abij,ki,jl->akbl", t, qt, qt) / a.coef
    return k4.reshape(nb * na, nb * na)


def choi_from_map(space: QuantumSpace, maps: Mapping[Tuple[Label, Label], np.ndarray]) -> TwoSidedElement:
    """Choi element of the map given by ``maps``."""
    out = {}
    for (beta, alpha), m in maps.items():
        nb, na = space[beta].dim, space[alpha].dim
        m = np.asarray(m)
        if m.shape != (nb * nb, na * na):
            raise SpaceError(f"map block {(beta, alpha)!r} has shape {m.shape}, expected {(nb * nb, na * na)}")
        out[(beta, alpha)] = _choi_block(space, beta, alpha, m)
    return TwoSidedElement(out)


def _slice_block(space: QuantumSpace, beta: Label, alpha: Label, k: np.ndarray) -> np.ndarray:
    a = space[alpha]
    nb, na = space[beta].dim, a.dim
    k4 = split4(np.asarray(k), nb, na)
    h = a.power(0.5)
    # x -> rho y with y = sigma_{i/2}(x) = rho^{-1/2} x rho^{1/2}, i.e. rho^{1/2} x rho^{1/2}
    twist = conj_kron(h, h).reshape(na, na, na * na)
    return a.coef * np.einsum("ikjl,klx->ijx", k4, twist).reshape(nb * nb, na * na)


def map_from_choi(space: QuantumSpace, P: TwoSidedElement, tol: float = DEFAULT_TOL) -> AdjacencyMap:
    """Recover the map from its Choi element with the right-slice formula."""
    if not P.opposite:
        raise SpaceError("Choi elements live in B (x) B^op")
    maps = {}
    for (beta, alpha), k in P.blocks.items():
        nb, na = space[beta].dim, space[alpha].dim
        if k.shape != (nb * na, nb * na):
            raise SpaceError(f"Choi block {(beta, alpha)!r} has shape {k.shape}, expected {(nb * na, nb * na)}")
        if not np.all(np.isfinite(k)):
            raise SpaceError(f"Choi block {(beta, alpha)!r} has non-finite entries")
        maps[(beta, alpha)] = _slice_block(space, beta, alpha, k)
    return AdjacencyMap(space, maps, P, tol=tol)


def _choi_deviation(space: QuantumSpace, maps: BlockMaps, P: TwoSidedElement) -> float:
    rebuilt = choi_from_map(space, maps)
    return (rebuilt - P).norm()


def flip(P: TwoSidedElement, space: QuantumSpace) -> TwoSidedElement:
    """Tensor flip ``a (x) b^op -> b (x) a^op`` in the op-transpose storage."""
    out = {}
    for (beta, alpha), k in P.blocks.items():
        nb, na = space[beta].dim, space[alpha].dim
        k4 = split4(k, nb, na).transpose(3, 2, 1, 0)
        out[(alpha, beta)] = k4.reshape(na * nb, na * nb)
    return TwoSidedElement(out)


# ---------------------------------------------------------------------------
# Schur product, adjoints and classification
# ---------------------------------------------------------------------------

def _images(A: AdjacencyMap, beta: Label, alpha: Label) -> np.ndarray:
    """Images ``A(e_pq)`` in block beta, indexed ``[p, q, :, :]``."""
    nb, na = A.space[beta].dim, A.space[alpha].dim
    return A.block(beta, alpha).T.reshape(na, na, nb, nb)


def schur_product(A: AdjacencyMap, B: AdjacencyMap) -> AdjacencyMap:
    """``m (A (x) B) m^*``, blockwise ``(1/c) sum_j A(e_pj rho^{-1}) B(e_jq)``."""
    if A.space is not B.space and A.space.labels != B.space.labels:
        raise SpaceError("schur_product needs maps on the same space")
    space = A.space
    keys = set(A.maps) & set(B.maps)
    maps = {}
    for beta, alpha in keys:
        a = space[alpha]
        ia = _images(A, beta, alpha)
        ib = _images(B, beta, alpha)
        # A(e_pj rho^{-1}) = sum_m rho^{-1}[j, m] A(e_pm)
        ia_twisted = np.einsum("jm,pmxy->pjxy", a.power(-1), ia)
        img = np.einsum("pjxy,jqyz->pqxz", ia_twisted, ib) / a.coef
        nb = space[beta].dim
        maps[(beta, alpha)] = img.reshape(a.dim * a.dim, nb * nb).T
    return AdjacencyMap.from_maps(space, maps)


def _kms_frame(space: QuantumSpace, label: Label) -> Tuple[np.ndarray, np.ndarray]:
    """Matrices of ``y -> sqrt(c) rho^{1/4} y rho^{1/4}`` and its inverse."""
    b = space[label]
    q, qi = b.power(0.25), b.power(-0.25)
    s = np.sqrt(b.coef)
    return s * conj_kron(q, q), conj_kron(qi, qi) / s


def kms_adjoint(A: AdjacencyMap) -> AdjacencyMap:
    """Adjoint of ``A`` for the KMS inner product."""
    space = A.space
    frames = {b.label: _kms_frame(space, b.label) for b in space.blocks}
    maps = {}
    for (beta, alpha), m in A.maps.items():
        jb, jb_inv = frames[beta]
        ja, ja_inv = frames[alpha]
        unitary_form = jb @ m @ ja_inv
        maps[(alpha, beta)] = ja_inv @ unitary_form.conj().T @ jb
    return AdjacencyMap.from_maps(space, maps)


def conjugate_map(A: AdjacencyMap) -> AdjacencyMap:
    """``A_bar(x) = A(x^*)^*``."""
    space = A.space
    maps = {}
    for (beta, alpha), m in A.maps.items():
        nb, na = space[beta].dim, space[alpha].dim
        # star on row-major vec: conj + transpose permutation
        perm_a = np.eye(na * na)[np.arange(na * na).reshape(na, na).T.reshape(-1)]
        perm_b = np.eye(nb * nb)[np.arange(nb * nb).reshape(nb, nb).T.reshape(-1)]
        maps[(beta, alpha)] = perm_b @ m.conj() @ perm_a
    return AdjacencyMap.from_maps(space, maps)


def degree(A: AdjacencyMap) -> AlgebraElement:
    """``D = A(1)``."""
    return A(A.space.unit())


def degree_from_choi(space: QuantumSpace, P: TwoSidedElement) -> AlgebraElement:
    """``(Id (x) psi^op)(P)`` computed by slicing the second leg."""
    out: Dict[Label, np.ndarray] = {}
    for (beta, alpha), k in P.blocks.items():
        a = space[alpha]
        nb = space[beta].dim
        k4 = split4(k, nb, a.dim)
        d = a.coef * np.einsum("ikjl,kl->ij", k4, a.rho)
        out[beta] = out[beta] + d if beta in out else d
    return AlgebraElement(out)


@dataclass
class Classification:
    schur_idempotent: bool
    real: bool
    completely_positive: bool
    kms_symmetric: bool
    gns_symmetric: bool
    loop_free: bool
    deviations: Dict[str, float] = field(default_factory=dict)

    FLAGS = ("schur_idempotent", "real", "completely_positive", "kms_symmetric", "gns_symmetric", "loop_free")

    @property
    def is_quantum_adjacency(self) -> bool:
        """Schur idempotent and completely positive."""
        return self.schur_idempotent and self.completely_positive

    @property
    def is_quantum_graph(self) -> bool:
        """Quantum adjacency matrix that is also KMS-symmetric and real."""
        return self.is_quantum_adjacency and self.kms_symmetric and self.real

    def as_dict(self) -> dict:
        d = {f: bool(getattr(self, f)) for f in self.FLAGS}
        d["deviations"] = dict(self.deviations)
        return d


def _fro(P: TwoSidedElement) -> float:
    return P.fro_norm()


def _modular_commutes(A: AdjacencyMap, t: float) -> float:
    space = A.space
    worst = 0.0
    for (beta, alpha), m in A.maps.items():
        a, b = space[alpha], space[beta]
        if a.is_scalar and b.is_scalar:
            continue
        sa = conj_kron(a.power(1j * t), a.power(-1j * t))
        sb = conj_kron(b.power(1j * t), b.power(-1j * t))
        worst = max(worst, float(np.abs(m @ sa - sb @ m).max(initial=0.0)))
    return worst


def loop_map_norm(A: AdjacencyMap) -> float:
    """Largest entry of ``m (A (x) Id) m^*`` on matrix units."""
    space = A.space
    worst = 0.0
    for b in space.blocks:
        if (b.label, b.label) not in A.maps:
            continue
        if b.dim == 1:
            worst = max(worst, abs(A.maps[(b.label, b.label)][0, 0]) / (b.evals[0] * b.coef))
            continue
        img = _images(A, b.label, b.label)
        twisted = np.einsum("jm,pmxy->pjxy", b.power(-1), img)
        # (1/c) sum_j A(e_pj rho^{-1}) e_jq : column q of the result is A(e_pj rho^{-1})[:, j] summed
        res = np.einsum("pjxj->px", twisted) / b.coef
        worst = max(worst, float(np.abs(res).max(initial=0.0)))
    return worst


def classify(A: AdjacencyMap, tol: float = DEFAULT_TOL) -> Classification:
    """Classify ``A`` through matrix properties of its Choi element."""
    space = A.space
    P = A.choi
    # one pass over the blocks; the flip pairs block (beta, alpha) with (alpha, beta)
    sq = {"norm": 0.0, "idem": 0.0, "herm": 0.0, "flip": 0.0}
    min_eig = 0.0
    for (beta, alpha), k in P.blocks.items():
        if k.shape == (1, 1):
            v = complex(k[0, 0])
            partner = P.blocks.get((alpha, beta))
            f = 0.0 if partner is None else complex(partner[0, 0])
            sq["norm"] += abs(v) ** 2
            sq["idem"] += abs(v * v - v) ** 2
            sq["herm"] += 4.0 * v.imag ** 2
            sq["flip"] += abs(v - f) ** 2
            min_eig = min(min_eig, v.real)
            continue
        sq["norm"] += float(np.vdot(k, k).real)
        d = k @ k - k
        sq["idem"] += float(np.vdot(d, d).real)
        d = k - k.conj().T
        sq["herm"] += float(np.vdot(d, d).real)
        min_eig = min(min_eig, float(np.linalg.eigvalsh((k + k.conj().T) / 2)[0]))
        nb, na = space[beta].dim, space[alpha].dim
        partner = P.blocks.get((alpha, beta))
        fk = 0.0 if partner is None else split4(partner, na, nb).transpose(3, 2, 1, 0).reshape(nb * na, nb * na)
        d = k - fk
        sq["flip"] += float(np.vdot(d, d).real)
    for (beta, alpha), k in P.blocks.items():
        if (alpha, beta) not in P.blocks:
            # flipped blocks with no partner in P
            sq["flip"] += float(np.vdot(k, k).real)
    norm, idem_dev, herm_dev, flip_dev = (float(np.sqrt(sq[f])) for f in ("norm", "idem", "herm", "flip"))
    scale = max(norm, 1e-300)
    schur = idem_dev <= tol * scale if norm > 0 else True
    real = herm_dev <= tol * scale if norm > 0 else True
    cp = real and min_eig >= -tol * max(norm, 1.0)
    kms = flip_dev <= tol * scale if norm > 0 else True
    a_norm = A_norm(A)
    if all(b.is_scalar for b in space.blocks):
        comm = 0.0
    else:
        comm = max(_modular_commutes(A, 1.0), _modular_commutes(A, np.sqrt(2.0)))
    gns = kms and comm <= tol * max(1.0, a_norm)
    loop = loop_map_norm(A)
    loop_free = loop <= tol * max(1.0, a_norm)
    devs = {"schur_idempotent": idem_dev, "real": herm_dev, "completely_positive": max(0.0, -min_eig),
            "kms_symmetric": flip_dev, "gns_symmetric": max(flip_dev, comm), "loop_free": loop}
    return Classification(schur, real, cp, kms, gns, loop_free, devs)


def A_norm(A: AdjacencyMap) -> float:
    return max((float(np.abs(m).max(initial=0.0)) for m in A.maps.values()), default=0.0)


# ---------------------------------------------------------------------------
# bounded degree at truncation
# ---------------------------------------------------------------------------

@dataclass
class DegreeVerdict:
    verdict: str  # "bounded" or "unknown"
    bound: float
    increments: List[float]
    locally_finite: bool

    def as_dict(self) -> dict:
        return {"verdict": self.verdict, "bound": self.bound, "increments": list(self.increments),
                "locally_finite": self.locally_finite}


def is_bounded_degree(space: QuantumSpace, P: TwoSidedElement, windows: Sequence[Iterable[Label]],
                      w: int = 2, tol: float = DEFAULT_TOL) -> DegreeVerdict:
    """Watch partial degree sums stabilise over nested truncation windows.

    ``windows`` is an increasing sequence of label sets.  For each window the
    degree is summed over columns ``alpha`` inside the window and evaluated on
    the rows ``beta`` of the first window.  The verdict is ``"bounded"`` when
    the sup-norm increments of the last ``w`` windows are below ``tol``.
    """
    windows = [list(win) for win in windows]
    if not windows:
        return DegreeVerdict("unknown", float("nan"), [], True)
    rows = set(windows[0])
    partials = []
    for win in windows:
        cols = set(win)
        sub = TwoSidedElement({k: m for k, m in P.blocks.items() if k[1] in cols and k[0] in rows})
        partials.append(degree_from_choi(space, sub))
    incs = [(b - a).norm() for a, b in zip(partials, partials[1:])]
    bound = partials[-1].norm()
    stable = len(incs) >= w and all(i <= tol for i in incs[-w:])
    # a stored P has finitely many rows per column, so local finiteness holds at any truncation
    return DegreeVerdict("bounded" if stable else "unknown", bound, incs, True)
