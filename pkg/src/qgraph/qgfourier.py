"""Fourier transform, convolution and antipodes on discrete quantum groups.

Two families of duals are handled at matrix level through an explicit
Fourier transform (a *finite dual pair*):

* a finite group ``Gamma`` seen as a discrete quantum group (labels are group
  elements, every block is 1x1); its Fourier transform lands in the group
  algebra, represented by left-regular matrices ``sum_g x(g) lambda(g)``;
* the dual of a finite group ``G`` (labels are irreducible representations);
  its Fourier transform lands in functions on ``G``:
  ``F(x)(g) = sum_a n_a Tr(x_a pi_a(g))``.

For every dual with numerical intertwiners, convolution is also available
through the fusion formula

    (P * x)_b = sum_{a, c, l} dim_q(a) dim_q(c) / dim_q(b) V_l^* (x_a (x) P_c) V_l

with ``V_l: H_b -> H_a (x) H_c`` isometric intertwiners.  With this
convention ``F(P * x) = F(x) F(P)``, convolution by a projection is Schur
idempotent for the weight ``h_R``, and ``P * 1 = h_L(P) 1``; the last value
equals ``h_R(P)`` whenever ``P`` is central or the dual is of Kac type.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable, Optional, Union

import numpy as np

from .choi import AdjacencyMap, DEFAULT_TOL, classify
from .fusion import (FiniteGroup, FiniteGroupDual, FusionDual, GroupDual, Label, NoProviderError,
                     dual_of_cyclic, dual_of_dihedral4, dual_of_symmetric3)
from .qspace import AlgebraElement, QuantumSpace, modular

FiniteDual = Union[GroupDual, FiniteGroupDual]


# ---------------------------------------------------------------------------
# Haar weights
# ---------------------------------------------------------------------------

def h_R(dual: FusionDual, x: AlgebraElement) -> complex:
    """Right Haar weight ``sum_a dim_q(a) Tr(rho_a x_a)``."""
    return complex(sum(dual.dim_q(a) * np.sum(dual.rho(a) * np.diag(m)) for a, m in x.blocks.items()))


def h_L(dual: FusionDual, x: AlgebraElement) -> complex:
    """Left Haar weight, pinned as ``h_R(rho^{-2} x)``."""
    return complex(sum(dual.dim_q(a) * np.sum(dual.rho(a) ** -1 * np.diag(m)) for a, m in x.blocks.items()))


def indicator(dual: FusionDual, labels: Iterable[Label], weights: Optional[Dict[Label, complex]] = None) -> AlgebraElement:
    """Central element ``sum_a w_a 1_a`` (``w_a = 1`` by default)."""
    out = {}
    for a in labels:
        w = 1.0 if weights is None else weights[a]
        out[a] = w * np.eye(dual.dim(a))
    return AlgebraElement(out)


# ---------------------------------------------------------------------------
# finite dual pairs
# ---------------------------------------------------------------------------

class FiniteDualPair:
    """A finite group together with the discrete quantum group built on it.

    Parameters
    ----------
    dual : GroupDual or FiniteGroupDual
        ``GroupDual`` for the group itself (Fourier lands in the group
        algebra), ``FiniteGroupDual`` for its representation dual (Fourier
        lands in functions on the group).
    """

    def __init__(self, dual: FiniteDual):
        if not isinstance(dual, (GroupDual, FiniteGroupDual)):
            raise NoProviderError(f"{type(dual).__name__} is not a finite dual pair")
        self.dual = dual
        self.group: FiniteGroup = dual.group
        self.kind = "group" if isinstance(dual, GroupDual) else "dual"
        self.labels = dual.all_labels()
        n = self.group.order
        if self.kind == "group":
            lam = np.zeros((n, n, n))
            for g in range(n):
                for h in range(n):
                    lam[g, self.group.mul(g, h), h] = 1.0
            self._lambda = lam
        else:
            total = sum(dual.dim(a) ** 2 for a in self.labels)
            if total != n:
                raise NoProviderError("representation list is incomplete")

    @classmethod
    def symmetric3(cls) -> "FiniteDualPair":
        return cls(dual_of_symmetric3())

    @classmethod
    def cyclic(cls, n: int) -> "FiniteDualPair":
        return cls(dual_of_cyclic(n))

    @classmethod
    def dihedral4(cls) -> "FiniteDualPair":
        return cls(dual_of_dihedral4())

    def space(self) -> QuantumSpace:
        return self.dual.space(self.labels)

    def orthogonality_deviation(self) -> float:
        """Worst violation of the Schur orthogonality relations."""
        if self.kind == "group":
            return 0.0
        G = self.group.order
        worst = 0.0
        for a in self.labels:
            for b in self.labels:
                Ra = np.stack(self.dual.reps[a])  # (G, na, na)
                Rb = np.stack(self.dual.reps[b])
                gram = np.einsum("gij,gkl->ijkl", Ra, Rb.conj()) / G
                na = self.dual.dim(a)
                target = np.zeros_like(gram)
                if a == b:
                    target = np.einsum("ik,jl->ijkl", np.eye(na), np.eye(na)) / na
                worst = max(worst, float(np.abs(gram - target).max()))
        return worst

    # -- transforms -----------------------------------------------------------

    def fourier(self, x: AlgebraElement) -> np.ndarray:
        n = self.group.order
        if self.kind == "group":
            out = np.zeros((n, n), dtype=complex)
            for g, m in x.blocks.items():
                out += m[0, 0] * self._lambda[g]
            return out
        f = np.zeros(n, dtype=complex)
        for a, m in x.blocks.items():
            R = np.stack(self.dual.reps[a])
            f += self.dual.dim(a) * np.einsum("ij,gji->g", m, R)
        return f

    def inverse_fourier(self, f: np.ndarray) -> AlgebraElement:
        n = self.group.order
        f = np.asarray(f, dtype=complex)
        if self.kind == "group":
            if f.shape != (n, n):
                raise ValueError(f"expected an {n}x{n} group-algebra matrix")
            # coefficient of lambda(g) is the (g, e) entry
            return AlgebraElement({g: np.array([[f[g, 0]]]) for g in range(n)})
        if f.shape != (n,):
            raise ValueError(f"expected a function on {n} points")
        out = {}
        for a in self.labels:
            R = np.stack(self.dual.reps[a])
            out[a] = np.einsum("g,gji->ij", f, R.conj()) / n
        return AlgebraElement(out)

    def haar(self, f: np.ndarray) -> complex:
        """Haar state on the compact side."""
        f = np.asarray(f)
        if self.kind == "group":
            return complex(np.trace(f) / self.group.order)
        return complex(np.mean(f))

    def l2_norm_compact(self, f: np.ndarray) -> float:
        f = np.asarray(f)
        if self.kind == "group":
            return float(np.sqrt(self.haar(f.conj().T @ f).real))
        return float(np.sqrt(self.haar(np.abs(f) ** 2).real))

    def l2_norm_discrete(self, x: AlgebraElement) -> float:
        return float(np.sqrt(h_R(self.dual, x.H @ x).real))

    def multiply(self, f1: np.ndarray, f2: np.ndarray) -> np.ndarray:
        return f1 @ f2 if self.kind == "group" else f1 * f2

    def invert(self, f: np.ndarray) -> np.ndarray:
        """The antipode of the compact side: ``f(g) -> f(g^{-1})``."""
        if self.kind == "group":
            return np.asarray(f).T.copy()
        return np.asarray(f)[self.group.inverse]


def _pair(dual) -> FiniteDualPair:
    return dual if isinstance(dual, FiniteDualPair) else FiniteDualPair(dual)


def fourier(pair: FiniteDualPair, x: AlgebraElement) -> np.ndarray:
    return _pair(pair).fourier(x)


def inverse_fourier(pair: FiniteDualPair, f: np.ndarray) -> AlgebraElement:
    return _pair(pair).inverse_fourier(f)


def plancherel_deviation(pair: FiniteDualPair, x: AlgebraElement) -> float:
    pair = _pair(pair)
    return abs(pair.l2_norm_discrete(x) - pair.l2_norm_compact(pair.fourier(x)))


# ---------------------------------------------------------------------------
# convolution
# ---------------------------------------------------------------------------

def _block_conv(V: np.ndarray, X: np.ndarray, P: np.ndarray, na: int, nc: int, nb: int) -> np.ndarray:
    V3 = V.reshape(na, nc, nb)
    return np.einsum("acb,ae,cd,edf->bf", V3.conj(), X, P, V3)


def convolve(dual: FusionDual, P: AlgebraElement, x: AlgebraElement,
             window: Optional[Iterable[Label]] = None) -> AlgebraElement:
    """``P * x``, restricted to the labels in ``window`` when given.

    Uses intertwiners when the dual provides them; otherwise both arguments
    must be central and the multiplicity formula is used.
    """
    keep = None if window is None else set(window)
    P = _prune(P)
    x = _prune(x)
    out: Dict[Label, np.ndarray] = {}
    if dual.has_intertwiners:
        for a, X in x.blocks.items():
            for c, Pc in P.blocks.items():
                for b in dual.fuse(a, c):
                    if keep is not None and b not in keep:
                        continue
                    coef = dual.dim_q(a) * dual.dim_q(c) / dual.dim_q(b)
                    nb = dual.dim(b)
                    acc = out.setdefault(b, np.zeros((nb, nb), dtype=complex))
                    for V in dual.intertwiners(a, c, b):
                        acc += coef * _block_conv(V, X, Pc, dual.dim(a), dual.dim(c), nb)
        return AlgebraElement(out)
    if not (P.is_central() and x.is_central()):
        raise NoProviderError(f"{dual.name} has no intertwiners; only central convolution is available")
    for a, X in x.blocks.items():
        xa = np.trace(X) / X.shape[0]
        for c, Pc in P.blocks.items():
            pc = np.trace(Pc) / Pc.shape[0]
            for b, m in dual.fuse(a, c).items():
                if keep is not None and b not in keep:
                    continue
                w = m * dual.dim_q(a) * dual.dim_q(c) / dual.dim_q(b) * xa * pc
                nb = dual.dim(b)
                out[b] = out.get(b, np.zeros((nb, nb), dtype=complex)) + w * np.eye(nb)
    return AlgebraElement(out)


def convolve_fourier(pair: FiniteDualPair, P: AlgebraElement, x: AlgebraElement) -> AlgebraElement:
    """``P * x`` through the convolution theorem ``F(P * x) = F(x) F(P)``."""
    pair = _pair(pair)
    return pair.inverse_fourier(pair.multiply(pair.fourier(x), pair.fourier(P)))


def convolution_power(dual: FusionDual, P: AlgebraElement, n: int,
                      window: Optional[Iterable[Label]] = None) -> AlgebraElement:
    """``P^{*n}``; ``P^{*0}`` is the unit of convolution ``1_e``."""
    out = AlgebraElement({dual.trivial: np.eye(dual.dim(dual.trivial))})
    for _ in range(n):
        out = convolve(dual, P, out, window)
    return out


def _prune(x: AlgebraElement, tol: float = 0.0) -> AlgebraElement:
    return AlgebraElement({a: m for a, m in x.blocks.items() if np.abs(m).max(initial=0.0) > tol},
                          x.finite_support)


def convolution_map(dual: FusionDual, P: AlgebraElement, window: Iterable[Label]) -> AdjacencyMap:
    """The map ``x -> P * x`` truncated to ``window`` (inputs and outputs)."""
    window = list(window)
    keep = set(window)
    space = dual.space(window)
    P = _prune(P)
    maps: Dict = {}
    for a in window:
        na = dual.dim(a)
        for c, Pc in P.blocks.items():
            nc = dual.dim(c)
            if dual.has_intertwiners:
                for b in dual.fuse(a, c):
                    if b not in keep:
                        continue
                    nb = dual.dim(b)
                    coef = dual.dim_q(a) * dual.dim_q(c) / dual.dim_q(b)
                    for V in dual.intertwiners(a, c, b):
                        V3 = V.reshape(na, nc, nb)
                        M = coef * np.einsum("acb,cd,edf->bfae", V3.conj(), Pc, V3).reshape(nb * nb, na * na)
                        key = (b, a)
                        maps[key] = maps[key] + M if key in maps else M
            else:
                if not P.is_central():
                    raise NoProviderError(f"{dual.name} has no intertwiners; only central P is supported")
                pc = np.trace(Pc) / nc
                for b, m in dual.fuse(a, c).items():
                    if b not in keep:
                        continue
                    nb = dual.dim(b)
                    # central input only: X -> Tr(X)/n_a * 1_b
                    M = (m * dual.dim_q(a) * dual.dim_q(c) / dual.dim_q(b) * pc / na
                         * np.outer(np.eye(nb).ravel(), np.eye(na).ravel()))
                    key = (b, a)
                    maps[key] = maps[key] + M if key in maps else M
    return AdjacencyMap.from_maps(space, maps)


def schur_of_convolutions(P1: AlgebraElement, P2: AlgebraElement) -> AlgebraElement:
    """The symbol of the Schur product of two convolution maps: ``P1 P2``."""
    return P1 @ P2


# ---------------------------------------------------------------------------
# antipodes
# ---------------------------------------------------------------------------

def _is_pair(dual) -> bool:
    return isinstance(dual, (FiniteDualPair, GroupDual, FiniteGroupDual))


def unitary_antipode_R(dual, x: AlgebraElement) -> AlgebraElement:
    """Unitary antipode.

    Matrix level on finite dual pairs (equal to ``S`` there, all of them being
    of Kac type); central level ``R(1_a) = 1_{conj(a)}`` on any dual.
    """
    if _is_pair(dual):
        pair = _pair(dual)
        return pair.inverse_fourier(pair.invert(pair.fourier(x)))
    if not x.is_central():
        raise NoProviderError("unitary antipode on this dual is only available on central elements")
    return AlgebraElement({dual.conj(a): m for a, m in x.blocks.items()}, x.finite_support)


def scaling(dual: FusionDual, t: float, x: AlgebraElement) -> AlgebraElement:
    """Scaling group ``tau_t = sigma_{-t}`` (conjugation by ``rho^{-it}``)."""
    if isinstance(dual, FiniteDualPair):
        dual = dual.dual
    space = dual.space(x.blocks)
    return modular(space, -t, x)


def antipode_S(dual, x: AlgebraElement) -> AlgebraElement:
    """Antipode ``S = tau_{-i/2} R``."""
    if _is_pair(dual):
        pair = _pair(dual)
        return pair.inverse_fourier(pair.invert(pair.fourier(x)))
    r = unitary_antipode_R(dual, x)
    return scaling(dual, -0.5j, r)


@dataclass
class SymmetryReport:
    gns: bool
    kms: bool
    deviation_S: float
    deviation_R: float
    level: str

    def as_dict(self) -> dict:
        return {"gns": self.gns, "kms": self.kms, "deviation_S": self.deviation_S,
                "deviation_R": self.deviation_R, "level": self.level}


def symmetry_report(dual, P: AlgebraElement, tol: float = DEFAULT_TOL) -> SymmetryReport:
    """GNS symmetry is ``S(P) = P``; KMS symmetry is ``R(P) = P``."""
    level = "matrix" if _is_pair(dual) else "central"
    S = antipode_S(dual, P)
    R = unitary_antipode_R(dual, P)
    dS = (S - P).norm()
    dR = (R - P).norm()
    return SymmetryReport(dS <= tol, dR <= tol, dS, dR, level)


def classify_convolution(pair, P: AlgebraElement, tol: float = DEFAULT_TOL):
    """Classify the convolution map of ``P`` on the full finite dual."""
    pair = _pair(pair)
    return classify(convolution_map(pair.dual, P, pair.labels), tol)
