"""Quantum spaces: direct sums of matrix blocks with a (possibly non-tracial) weight.

A quantum space is a list of blocks ``M_{n_a}``, each carrying a positive
definite density ``rho_a``.  The weight is

    psi(x) = sum_a c_a Tr(rho_a x_a),    c_a = scale_a * Tr(rho_a^{-1}),

and with ``scale_a = 1`` (the default) it satisfies ``m m^* = Id``.

Elements of ``B (x) B^op`` are stored blockwise as Kronecker matrices with the
second leg transposed, i.e. ``a (x) b^op`` is kept as ``np.kron(a, b.T)``.  With
that convention the product in ``B (x) B^op`` is the plain matrix product and
the involution is the conjugate transpose.  Kronecker indices are
``(i * n_second + k, j * n_second + l)``, left factor outer.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Hashable, Iterable, Iterator, Mapping, Sequence, Tuple

import numpy as np

DEFAULT_TOL = 1e-9
COND_MAX = 1e12

Label = Hashable


class SpaceError(ValueError):
    """Raised for malformed quantum spaces or mismatched elements."""


def _hermitian_power(evals: np.ndarray, evecs: np.ndarray, z: complex) -> np.ndarray:
    return (evecs * np.exp(z * np.log(evals))) @ evecs.conj().T


@dataclass(frozen=True, eq=False)
class Block:
    """A single matrix block ``M_n`` with its density ``rho``."""

    label: Label
    dim: int
    rho: np.ndarray
    scale: float = 1.0
    evals: np.ndarray = field(init=False, repr=False, compare=False)
    evecs: np.ndarray = field(init=False, repr=False, compare=False)
    _powers: Dict[complex, np.ndarray] = field(init=False, repr=False, compare=False)
    _tr_rho_inv: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        rho = np.array(self.rho, dtype=complex)
        if rho.ndim == 1:
            rho = np.diag(rho)
        if rho.shape != (self.dim, self.dim):
            raise SpaceError(f"block {self.label!r}: rho has shape {rho.shape}, expected {(self.dim, self.dim)}")
        if not np.allclose(rho, rho.conj().T, atol=1e-12 * max(1.0, np.abs(rho).max())):
            raise SpaceError(f"block {self.label!r}: rho is not hermitian")
        rho = (rho + rho.conj().T) / 2
        evals, evecs = np.linalg.eigh(rho)
        if evals[-1] <= 0 or evals[0] <= 1e-12 * evals[-1]:
            raise SpaceError(f"block {self.label!r}: rho is not positive definite")
        if evals[-1] / evals[0] > COND_MAX:
            raise SpaceError(f"block {self.label!r}: rho condition number exceeds {COND_MAX:g}")
        if not self.scale > 0:
            raise SpaceError(f"block {self.label!r}: scale must be positive")
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "evals", evals)
        object.__setattr__(self, "evecs", evecs)
        object.__setattr__(self, "_powers", {})
        object.__setattr__(self, "_tr_rho_inv", float(np.sum(1.0 / evals)))

    @property
    def is_scalar(self) -> bool:
        """True when ``rho`` is a multiple of the identity, so the modular group is trivial."""
        return bool(self.evals[-1] - self.evals[0] <= 1e-14 * self.evals[-1])

    def power(self, z: complex) -> np.ndarray:
        """``rho ** z`` computed in the eigenbasis of ``rho``; real powers are cached."""
        z = complex(z)
        cached = self._powers.get(z)
        if cached is not None:
            return cached
        m = _hermitian_power(self.evals, self.evecs, z)
        if z.imag == 0 and len(self._powers) < 32:
            m.setflags(write=False)
            self._powers[z] = m
        return m

    @property
    def tr_rho_inv(self) -> float:
        return self._tr_rho_inv

    @property
    def coef(self) -> float:
        """Coefficient ``c`` in ``psi = c Tr(rho .)`` on this block."""
        return self.scale * self._tr_rho_inv


class QuantumSpace:
    """An ordered collection of :class:`Block` objects with unique labels."""

    def __init__(self, blocks: Iterable[Block]):
        self.blocks: Tuple[Block, ...] = tuple(blocks)
        self._index = {}
        for b in self.blocks:
            if b.label in self._index:
                raise SpaceError(f"duplicate block label {b.label!r}")
            self._index[b.label] = b

    @classmethod
    def from_rhos(cls, rhos: Mapping[Label, np.ndarray] | Sequence[Tuple[Label, np.ndarray]],
                  scales: Mapping[Label, float] | None = None) -> "QuantumSpace":
        items = rhos.items() if isinstance(rhos, Mapping) else rhos
        scales = scales or {}
        blocks = []
        for label, rho in items:
            rho = np.asarray(rho)
            dim = rho.shape[0]
            blocks.append(Block(label, dim, rho, scales.get(label, 1.0)))
        return cls(blocks)

    @classmethod
    def classical(cls, n: int) -> "QuantumSpace":
        """The space ``C^n`` with counting measure; labels are ``0..n-1``."""
        return cls(Block(i, 1, np.ones((1, 1))) for i in range(n))

    @classmethod
    def matrix(cls, rho, label: Label = "a") -> "QuantumSpace":
        rho = np.asarray(rho)
        if rho.ndim == 1:
            rho = np.diag(rho)
        return cls([Block(label, rho.shape[0], rho)])

    def __getitem__(self, label: Label) -> Block:
        try:
            return self._index[label]
        except KeyError:
            raise SpaceError(f"label {label!r} not in space") from None

    def __contains__(self, label: Label) -> bool:
        return label in self._index

    def __iter__(self) -> Iterator[Block]:
        return iter(self.blocks)

    def __len__(self) -> int:
        return len(self.blocks)

    def __repr__(self) -> str:
        dims = ", ".join(f"{b.label!r}:{b.dim}" for b in self.blocks)
        return f"QuantumSpace({dims})"

    @property
    def labels(self) -> Tuple[Label, ...]:
        return tuple(b.label for b in self.blocks)

    @property
    def is_tracial(self) -> bool:
        return all(np.allclose(b.evals, b.evals[0]) for b in self.blocks)

    def dim(self, label: Label) -> int:
        return self[label].dim

    def total_dim(self) -> int:
        """Dimension of B as a vector space."""
        return sum(b.dim ** 2 for b in self.blocks)

    def subspace(self, labels: Iterable[Label]) -> "QuantumSpace":
        return QuantumSpace(self[l] for l in labels)

    def unit(self) -> "AlgebraElement":
        return AlgebraElement({b.label: np.eye(b.dim) for b in self.blocks})

    def zero(self) -> "AlgebraElement":
        return AlgebraElement({})

    def matrix_unit(self, label: Label, i: int, j: int) -> "AlgebraElement":
        n = self.dim(label)
        e = np.zeros((n, n), dtype=complex)
        e[i, j] = 1.0
        return AlgebraElement({label: e})

    def matrix_units(self) -> Iterator[Tuple[Label, int, int, "AlgebraElement"]]:
        for b in self.blocks:
            for i in range(b.dim):
                for j in range(b.dim):
                    yield b.label, i, j, self.matrix_unit(b.label, i, j)


class AlgebraElement:
    """Sparse block-indexed element ``label -> n x n`` matrix.

    Missing labels are zero blocks.  ``finite_support`` distinguishes elements
    of ``c_00(B)`` from truncations of bounded elements.
    """

    __slots__ = ("blocks", "finite_support")

    def __init__(self, blocks: Mapping[Label, np.ndarray] | None = None, finite_support: bool = True):
        data = {}
        for label, m in (blocks or {}).items():
            arr = np.array(m, dtype=complex)
            if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
                raise SpaceError(f"block {label!r} is not a square matrix")
            arr.setflags(write=False)
            data[label] = arr
        self.blocks: Dict[Label, np.ndarray] = data
        self.finite_support = finite_support

    def __repr__(self) -> str:
        return f"AlgebraElement(labels={list(self.blocks)})"

    def __getitem__(self, label: Label) -> np.ndarray:
        return self.blocks[label]

    def get(self, label: Label, dim: int) -> np.ndarray:
        m = self.blocks.get(label)
        return np.zeros((dim, dim), dtype=complex) if m is None else m

    def __contains__(self, label: Label) -> bool:
        return label in self.blocks

    @property
    def labels(self):
        return tuple(self.blocks)

    def support(self, tol: float = 0.0) -> frozenset:
        return frozenset(l for l, m in self.blocks.items() if np.abs(m).max(initial=0.0) > tol)

    def _combine(self, other: "AlgebraElement", op) -> "AlgebraElement":
        out = dict(self.blocks)
        for l, m in other.blocks.items():
            out[l] = op(out[l], m) if l in out else op(np.zeros_like(m), m)
        return AlgebraElement(out, self.finite_support and other.finite_support)

    def __add__(self, other: "AlgebraElement") -> "AlgebraElement":
        return self._combine(other, np.add)

    def __sub__(self, other: "AlgebraElement") -> "AlgebraElement":
        return self._combine(other, np.subtract)

    def __neg__(self) -> "AlgebraElement":
        return AlgebraElement({l: -m for l, m in self.blocks.items()}, self.finite_support)

    def __mul__(self, scalar: complex) -> "AlgebraElement":
        return AlgebraElement({l: scalar * m for l, m in self.blocks.items()}, self.finite_support)

    __rmul__ = __mul__

    def __matmul__(self, other: "AlgebraElement") -> "AlgebraElement":
        common = [l for l in self.blocks if l in other.blocks]
        return AlgebraElement({l: self.blocks[l] @ other.blocks[l] for l in common},
                              self.finite_support or other.finite_support)

    @property
    def H(self) -> "AlgebraElement":
        """The adjoint ``x^*``."""
        return AlgebraElement({l: m.conj().T for l, m in self.blocks.items()}, self.finite_support)

    def map_blocks(self, f) -> "AlgebraElement":
        return AlgebraElement({l: f(l, m) for l, m in self.blocks.items()}, self.finite_support)

    def norm(self) -> float:
        """Largest entry modulus; the comparison norm used throughout."""
        return max((float(np.abs(m).max(initial=0.0)) for m in self.blocks.values()), default=0.0)

    def allclose(self, other: "AlgebraElement", tol: float = DEFAULT_TOL) -> bool:
        return (self - other).norm() <= tol

    def is_central(self, tol: float = DEFAULT_TOL) -> bool:
        return all(np.abs(m - np.trace(m) / m.shape[0] * np.eye(m.shape[0])).max(initial=0.0) <= tol
                   for m in self.blocks.values())

    def is_projection(self, tol: float = DEFAULT_TOL) -> bool:
        return all(np.abs(m @ m - m).max(initial=0.0) <= tol and np.abs(m - m.conj().T).max(initial=0.0) <= tol
                   for m in self.blocks.values())


class TwoSidedElement:
    """Sparse ``(beta, alpha) -> Kronecker matrix`` element of ``B (x) B^op``.

    The first leg lives in block ``beta`` and the second in block ``alpha``.
    With ``opposite=True`` (the default) the second leg is stored transposed so
    that multiplication in ``B (x) B^op`` is matrix multiplication.  With
    ``opposite=False`` the element is a plain element of ``B (x) B``.
    """

    __slots__ = ("blocks", "opposite")

    def __init__(self, blocks: Mapping[Tuple[Label, Label], np.ndarray] | None = None, opposite: bool = True):
        data = {}
        for key, m in (blocks or {}).items():
            arr = np.array(m, dtype=complex)
            arr.setflags(write=False)
            data[tuple(key)] = arr
        self.blocks: Dict[Tuple[Label, Label], np.ndarray] = data
        self.opposite = opposite

    def __repr__(self) -> str:
        return f"TwoSidedElement(keys={list(self.blocks)}, opposite={self.opposite})"

    def __getitem__(self, key):
        return self.blocks[key]

    def get(self, key, size: int) -> np.ndarray:
        m = self.blocks.get(key)
        return np.zeros((size, size), dtype=complex) if m is None else m

    def _check(self, other):
        if self.opposite != other.opposite:
            raise SpaceError("cannot combine elements of B(x)B and B(x)B^op")

    def __add__(self, other: "TwoSidedElement") -> "TwoSidedElement":
        self._check(other)
        out = dict(self.blocks)
        for k, m in other.blocks.items():
            out[k] = out[k] + m if k in out else m
        return TwoSidedElement(out, self.opposite)

    def __sub__(self, other: "TwoSidedElement") -> "TwoSidedElement":
        return self + other * (-1)

    def __mul__(self, scalar: complex) -> "TwoSidedElement":
        return TwoSidedElement({k: scalar * m for k, m in self.blocks.items()}, self.opposite)

    __rmul__ = __mul__

    def __matmul__(self, other: "TwoSidedElement") -> "TwoSidedElement":
        self._check(other)
        if not self.opposite:
            raise SpaceError("products are defined only in B (x) B^op storage")
        common = [k for k in self.blocks if k in other.blocks]
        return TwoSidedElement({k: self.blocks[k] @ other.blocks[k] for k in common})

    @property
    def H(self) -> "TwoSidedElement":
        if not self.opposite:
            raise SpaceError("adjoint is implemented for B (x) B^op storage only")
        return TwoSidedElement({k: m.conj().T for k, m in self.blocks.items()})

    def norm(self) -> float:
        return max((float(np.abs(m).max(initial=0.0)) for m in self.blocks.values()), default=0.0)

    def fro_norm(self) -> float:
        return float(np.sqrt(sum(np.linalg.norm(m) ** 2 for m in self.blocks.values())))

    def allclose(self, other: "TwoSidedElement", tol: float = DEFAULT_TOL) -> bool:
        return (self - other).norm() <= tol

    def pruned(self, tol: float = 0.0) -> "TwoSidedElement":
        return TwoSidedElement({k: m for k, m in self.blocks.items() if np.abs(m).max(initial=0.0) > tol},
                               self.opposite)


def kron_op(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Storage of ``a (x) b^op``."""
    return np.kron(a, np.asarray(b).T)


def split4(k: np.ndarray, n_first: int, n_second: int) -> np.ndarray:
    """View a Kronecker matrix as ``K[i, k, j, l]`` with ``(i, j)`` on the first leg."""
    return k.reshape(n_first, n_second, n_first, n_second)


def _check_labels(space: QuantumSpace, x: AlgebraElement):
    for label, m in x.blocks.items():
        n = space[label].dim
        if m.shape != (n, n):
            raise SpaceError(f"block {label!r} has shape {m.shape}, expected {(n, n)}")


# ---------------------------------------------------------------------------
# weight and modular calculus
# ---------------------------------------------------------------------------

def weight(space: QuantumSpace, x: AlgebraElement) -> complex:
    """``psi(x) = sum_a c_a Tr(rho_a x_a)``."""
    _check_labels(space, x)
    total = 0j
    for label, m in x.blocks.items():
        b = space[label]
        total += b.coef * np.trace(b.rho @ m)
    return complex(total)


def modular(space: QuantumSpace, z: complex, x: AlgebraElement) -> AlgebraElement:
    """``sigma_z(x) = rho^{iz} x rho^{-iz}`` blockwise."""
    _check_labels(space, x)

    def f(label, m):
        b = space[label]
        return b.power(1j * z) @ m @ b.power(-1j * z)

    return x.map_blocks(f)


def gns_inner(space: QuantumSpace, x: AlgebraElement, y: AlgebraElement) -> complex:
    """``<x, y> = psi(x^* y)``."""
    return weight(space, x.H @ y)


def kms_inner(space: QuantumSpace, x: AlgebraElement, y: AlgebraElement) -> complex:
    """``<x, y>_KMS = psi(x^* sigma_{-i/2}(y))``."""
    return weight(space, x.H @ modular(space, -0.5j, y))


def kms_coordinates(block: Block, m: np.ndarray) -> np.ndarray:
    """Coordinates of ``m`` in the KMS-orthonormal basis of one block.

    The map ``m -> sqrt(c) rho^{1/4} m rho^{1/4}`` is a unitary from the block
    with its KMS inner product onto ``C^{n x n}`` with the Hilbert-Schmidt one.
    """
    q = block.power(0.25)
    return np.sqrt(block.coef) * (q @ m @ q)


def from_kms_coordinates(block: Block, m: np.ndarray) -> np.ndarray:
    q = block.power(-0.25)
    return (q @ m @ q) / np.sqrt(block.coef)


# ---------------------------------------------------------------------------
# multiplication and its adjoint
# ---------------------------------------------------------------------------

def mult(space: QuantumSpace, t) -> AlgebraElement:
    """Multiplication ``m``.

    ``t`` is either a pair ``(a, b)`` of elements, giving ``ab``, or an element
    of ``B (x) B`` stored as a :class:`TwoSidedElement` with ``opposite=False``.
    """
    if isinstance(t, tuple):
        a, b = t
        return a @ b
    if t.opposite:
        raise SpaceError("mult expects an element of B (x) B (opposite=False)")
    out: Dict[Label, np.ndarray] = {}
    for (beta, alpha), k in t.blocks.items():
        if beta != alpha:
            continue
        n = space[alpha].dim
        prod = np.einsum("ijjl->il", split4(k, n, n))
        out[alpha] = out[alpha] + prod if alpha in out else prod
    return AlgebraElement(out)


def m_star(space: QuantumSpace, x: AlgebraElement) -> TwoSidedElement:
    """Adjoint of multiplication for the GNS inner products.

    Uses ``m^*(x) = (1/c) sum_ij x e_ij rho^{-1} (x) e_ji`` on each block.
    """
    _check_labels(space, x)
    out = {}
    for label, m in x.blocks.items():
        b = space[label]
        n = b.dim
        k = np.einsum("pl,kq->pkql", m, b.power(-1)) / b.coef
        out[(label, label)] = k.reshape(n * n, n * n)
    return TwoSidedElement(out, opposite=False)


@dataclass
class DeltaFormReport:
    passed: bool
    deviation: float
    delta_sq: Dict[Label, float]

    def as_dict(self) -> dict:
        return {"passed": self.passed, "deviation": self.deviation,
                "delta_sq": {str(k): v for k, v in self.delta_sq.items()}}


def check_delta_form(space: QuantumSpace, tol: float = DEFAULT_TOL) -> DeltaFormReport:
    """Check ``m m^* = Id`` on every matrix unit; report ``delta^2`` per block."""
    worst = 0.0
    delta_sq = {}
    for b in space.blocks:
        ratios = []
        for i in range(b.dim):
            for j in range(b.dim):
                e = space.matrix_unit(b.label, i, j)
                y = mult(space, m_star(space, e))[b.label]
                worst = max(worst, float(np.abs(y - e[b.label]).max()))
                ratios.append(y[i, j].real)
        delta_sq[b.label] = float(np.mean(ratios))
    return DeltaFormReport(worst <= tol, worst, delta_sq)
