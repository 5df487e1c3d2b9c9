"""Fusion data of discrete (quantum) groups.

A :class:`FusionDual` describes the dual of a compact quantum group at the
level needed here: irreducible labels, conjugation, fusion multiplicities,
block dimensions ``n_a``, the diagonal densities ``rho_a`` (so that
``Tr(rho_a) = Tr(rho_a^{-1}) = dim_q(a)``) and, where available, numerical
intertwiners ``V: H_beta -> H_alpha (x) H_gamma``.

Kronecker convention for intertwiners: row index ``a * n_gamma + c`` for the
basis vector ``e_a (x) e_c``.
"""
from __future__ import annotations

import itertools
import threading
from collections import deque
from typing import Dict, FrozenSet, Hashable, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import null_space

from .qspace import Block, QuantumSpace

Label = Hashable
SupportSet = FrozenSet[Label]

DEFAULT_HORIZON = 64
HARD_HORIZON = 4096


class NoProviderError(NotImplementedError):
    """The dual has no numerical intertwiners (support-level data only)."""


class HorizonOverflow(RuntimeError):
    """An enumeration exceeded the configured horizon."""


class FusionError(ValueError):
    """Invalid parameters or labels for a dual."""


def q_integer(n: int, q: float) -> float:
    """``[n]_q = (q^{-n} - q^n) / (q^{-1} - q)``, equal to ``n`` at ``q = 1``."""
    if abs(q - 1.0) < 1e-15:
        return float(n)
    return (q ** (-n) - q ** n) / (q ** (-1) - q)


def _reciprocal_rho(n: int, dq: float) -> np.ndarray:
    """Diagonal density of size ``n`` with ``Tr = Tr^{-1} = dq``.

    Eigenvalues come in reciprocal pairs ``(t, 1/t)`` plus a single ``1`` for
    odd ``n``; ``t`` is fixed by the trace.  Requires ``dq >= n``.
    """
    if dq < n - 1e-9:
        raise FusionError(f"quantum dimension {dq} is smaller than the classical dimension {n}")
    pairs, odd = divmod(n, 2)
    if pairs == 0:
        return np.ones(1)
    s = (dq - odd) / pairs  # t + 1/t
    s = max(s, 2.0)
    t = (s + np.sqrt(s * s - 4.0)) / 2.0
    vals = [t, 1.0 / t] * pairs + [1.0] * odd
    return np.array(sorted(vals, reverse=True))


class FusionDual:
    """Base class; subclasses fill in the fusion data.

    Results of :meth:`fuse` and :meth:`intertwiners` are memoised in caches
    guarded by a lock, so instances can be shared between threads.
    """

    name = "dual"
    is_finite = False
    kac = True
    trivial: Label = None
    cache_fusion = True

    def __init__(self):
        self._lock = threading.Lock()
        self._fuse_cache: Dict[Tuple[Label, Label], Dict[Label, int]] = {}
        self._int_cache: Dict[Tuple[Label, Label, Label], Tuple[np.ndarray, ...]] = {}

    # -- data to override -----------------------------------------------------

    def conj(self, a: Label) -> Label:
        raise NotImplementedError

    def _fuse(self, a: Label, b: Label) -> Dict[Label, int]:
        raise NotImplementedError

    def dim(self, a: Label) -> int:
        return 1

    def rho(self, a: Label) -> np.ndarray:
        return np.ones(self.dim(a))

    def generators(self) -> Tuple[Label, ...]:
        """A canonical conjugation-closed generating set."""
        raise NotImplementedError

    def all_labels(self) -> Tuple[Label, ...]:
        """Every label (finite duals only)."""
        raise HorizonOverflow(f"{self.name} has infinitely many irreducibles")

    def _intertwiners(self, alpha: Label, gamma: Label, beta: Label) -> List[np.ndarray]:
        raise NoProviderError(f"{self.name} has no intertwiner provider")

    def check_label(self, a: Label) -> Label:
        return a

    def parse_label(self, text: str) -> Label:
        return text

    def format_label(self, a: Label) -> str:
        return str(a)

    def descriptor(self) -> dict:
        return {"kind": self.name}

    # -- derived --------------------------------------------------------------

    @property
    def has_intertwiners(self) -> bool:
        return False

    def fuse(self, a: Label, b: Label) -> Dict[Label, int]:
        """Multiplicities ``N_{ab}^c`` as a dict ``c -> N``."""
        if not self.cache_fusion:
            return self._fuse(a, b)
        key = (a, b)
        with self._lock:
            hit = self._fuse_cache.get(key)
        if hit is not None:
            return hit
        res = {c: m for c, m in self._fuse(a, b).items() if m}
        with self._lock:
            self._fuse_cache[key] = res
        return res

    def multiplicity(self, beta: Label, alpha: Label, gamma: Label) -> int:
        """``m(beta, alpha (x) gamma)``."""
        return self.fuse(alpha, gamma).get(beta, 0)

    def dim_q(self, a: Label) -> float:
        return float(np.sum(self.rho(a)))

    def block(self, a: Label) -> Block:
        return Block(a, self.dim(a), np.diag(self.rho(a)))

    def space(self, labels: Iterable[Label]) -> QuantumSpace:
        return QuantumSpace(self.block(a) for a in labels)

    def intertwiners(self, alpha: Label, gamma: Label, beta: Label) -> Tuple[np.ndarray, ...]:
        """Isometries ``V_l: H_beta -> H_alpha (x) H_gamma`` with orthogonal ranges."""
        key = (alpha, gamma, beta)
        with self._lock:
            hit = self._int_cache.get(key)
        if hit is not None:
            return hit
        if self.multiplicity(beta, alpha, gamma) == 0:
            res: Tuple[np.ndarray, ...] = ()
        else:
            res = tuple(self._intertwiners(alpha, gamma, beta))
            for v in res:
                v.setflags(write=False)
        with self._lock:
            self._int_cache[key] = res
        return res

    def labels(self, horizon: int = DEFAULT_HORIZON) -> Tuple[Label, ...]:
        """All labels for finite duals; the ball of radius ``horizon`` otherwise."""
        if self.is_finite:
            return self.all_labels()
        return tuple(sorted_labels(ball(self, self.generators(), horizon)))

    def __repr__(self) -> str:
        return f"<{self.name} {self.descriptor()}>"


def sorted_labels(labels: Iterable[Label]) -> List[Label]:
    """Deterministic order: by string length, then string form."""
    return sorted(labels, key=lambda a: (len(str(a)), str(a)))


# ---------------------------------------------------------------------------
# support-level operations
# ---------------------------------------------------------------------------

def fuse_support(dual: FusionDual, S1: Iterable[Label], S2: Iterable[Label]) -> SupportSet:
    out = set()
    S2 = list(S2)
    for a in S1:
        for b in S2:
            out.update(dual.fuse(a, b))
    return frozenset(out)


def ball(dual: FusionDual, S: Iterable[Label], n: int) -> SupportSet:
    """Union of the fusion powers ``S^k`` for ``0 <= k <= n`` (``S^0`` is the unit)."""
    if n > HARD_HORIZON:
        raise HorizonOverflow(f"horizon {n} exceeds the hard cap {HARD_HORIZON}")
    S = frozenset(S) | {dual.trivial}
    seen = {dual.trivial}
    frontier = {dual.trivial}
    for _ in range(n):
        new = set(fuse_support(dual, frontier, S)) - seen
        if not new:
            break
        seen |= new
        frontier = new
    return frozenset(seen)


def power_support(dual: FusionDual, S: Iterable[Label], k: int) -> SupportSet:
    """``S^k`` (exactly ``k`` factors)."""
    S = frozenset(S)
    cur: SupportSet = frozenset([dual.trivial])
    for _ in range(k):
        cur = fuse_support(dual, cur, S)
    return cur


def spheres(dual: FusionDual, S: Iterable[Label], horizon: int) -> Iterator[Tuple[int, FrozenSet[Label]]]:
    """Yield ``(n, B_n minus B_{n-1})`` for the unit-adjoined balls of ``S``.

    ``S`` must be conjugation-closed.  Then by Frobenius reciprocity every
    fusion product of a label at distance ``n`` with a generator lies at
    distance ``n-1``, ``n`` or ``n+1``, so only three spheres are kept.
    """
    S = frozenset(S) - {dual.trivial}
    prev: FrozenSet[Label] = frozenset()
    cur: FrozenSet[Label] = frozenset([dual.trivial])
    yield 0, cur
    for n in range(1, horizon + 1):
        nxt = set()
        for a in cur:
            for s in S:
                for c in dual.fuse(a, s):
                    if c not in cur and c not in prev:
                        nxt.add(c)
        prev, cur = cur, frozenset(nxt)
        yield n, cur


def is_conjugate_closed(dual: FusionDual, S: Iterable[Label]) -> bool:
    S = set(S)
    return all(dual.conj(a) in S for a in S)


# ---------------------------------------------------------------------------
# numeric helpers
# ---------------------------------------------------------------------------

def _intertwiner_basis(gens_a: Sequence[np.ndarray], gens_b: Sequence[np.ndarray], n_b: int) -> List[np.ndarray]:
    """Orthonormal isometries ``V`` with ``A_g V = V B_g`` for all generators."""
    n_a = gens_a[0].shape[0]
    rows = [np.kron(A, np.eye(n_b)) - np.kron(np.eye(n_a), B.T) for A, B in zip(gens_a, gens_b)]
    M = np.vstack(rows)
    # absolute cutoff: M may vanish identically (e.g. one-dimensional reps)
    _, sv, vh = np.linalg.svd(M)
    scale = max(1.0, max(float(np.abs(A).max()) for A in gens_a))
    sv = np.concatenate([sv, np.zeros(vh.shape[0] - sv.size)])
    ns = vh[sv <= 1e-9 * scale].conj().T
    mats = [ns[:, k].reshape(n_a, n_b) for k in range(ns.shape[1])]
    basis: List[np.ndarray] = []
    for V in mats:
        for W in basis:
            V = V - W * (np.trace(W.conj().T @ V) / n_b)
        nrm = np.sqrt(np.real(np.trace(V.conj().T @ V)) / n_b)
        if nrm > 1e-10:
            basis.append(V / nrm)
    return basis


# ---------------------------------------------------------------------------
# classical groups
# ---------------------------------------------------------------------------

class FiniteGroup:
    """Finite group from a multiplication table; element ``0`` is the identity."""

    def __init__(self, table, names: Optional[Sequence[str]] = None, name: str = "G",
                 words: Optional[Sequence[Tuple[int, ...]]] = None, n_generators: int = 0):
        table = np.asarray(table, dtype=int)
        n = table.shape[0]
        if table.shape != (n, n):
            raise FusionError("multiplication table must be square")
        for row in table:
            if sorted(row) != list(range(n)):
                raise FusionError("multiplication table rows must be permutations")
        if not (np.all(table[0] == np.arange(n)) and np.all(table[:, 0] == np.arange(n))):
            raise FusionError("element 0 must be the identity")
        for a, b, c in itertools.product(range(n), repeat=3) if n <= 24 else []:
            if table[table[a, b], c] != table[a, table[b, c]]:
                raise FusionError("multiplication table is not associative")
        self.table = table
        self.order = n
        self.names = list(names) if names is not None else [str(i) for i in range(n)]
        self.name = name
        self.inverse = np.array([int(np.nonzero(table[a] == 0)[0][0]) for a in range(n)])
        self.words = list(words) if words is not None else None
        self.n_generators = n_generators

    def mul(self, a: int, b: int) -> int:
        return int(self.table[a, b])

    def inv(self, a: int) -> int:
        return int(self.inverse[a])

    @classmethod
    def from_permutations(cls, gens: Sequence[Sequence[int]], name: str = "G") -> "FiniteGroup":
        gens = [tuple(g) for g in gens]
        deg = len(gens[0])
        ident = tuple(range(deg))

        def compose(p, r):  # apply r then p
            return tuple(p[r[i]] for i in range(deg))

        elems = [ident]
        words = [()]
        index = {ident: 0}
        queue = deque([0])
        while queue:
            i = queue.popleft()
            for k, g in enumerate(gens):
                e = compose(elems[i], g)
                if e not in index:
                    index[e] = len(elems)
                    elems.append(e)
                    words.append(words[i] + (k,))
                    queue.append(index[e])
        n = len(elems)
        table = np.array([[index[compose(elems[a], elems[b])] for b in range(n)] for a in range(n)])
        names = ["".join(map(str, e)) for e in elems]
        return cls(table, names, name, words, len(gens))

    @classmethod
    def cyclic(cls, n: int) -> "FiniteGroup":
        table = np.add.outer(np.arange(n), np.arange(n)) % n
        return cls(table, [str(i) for i in range(n)], f"Z{n}", [(0,) * i for i in range(n)], 1)

    @classmethod
    def symmetric(cls, n: int) -> "FiniteGroup":
        gens = [tuple([1, 0] + list(range(2, n))), tuple(list(range(1, n)) + [0])]
        return cls.from_permutations(gens, f"S{n}")

    @classmethod
    def dihedral(cls, n: int) -> "FiniteGroup":
        """Symmetries of the regular ``n``-gon (order ``2n``); generators rotation, reflection."""
        r = tuple((i + 1) % n for i in range(n))
        s = tuple((-i) % n for i in range(n))
        return cls.from_permutations([r, s], f"D{n}")

    def generated_by(self, S: Iterable[int]) -> FrozenSet[int]:
        seen = {0}
        frontier = [0]
        S = list(S)
        while frontier:
            nxt = []
            for a in frontier:
                for s in S:
                    c = self.mul(a, s)
                    if c not in seen:
                        seen.add(c)
                        nxt.append(c)
            frontier = nxt
        return frozenset(seen)

    def generating_set(self) -> Tuple[int, ...]:
        """Small conjugation-closed generating set (generators and inverses)."""
        if self.words is None or self.n_generators == 0:
            S = set(range(1, self.order))
        else:
            S = set()
            for k in range(self.n_generators):
                idx = next(i for i, w in enumerate(self.words) if w == (k,))
                S.add(idx)
                S.add(self.inv(idx))
            S.discard(0)
        return tuple(sorted(S))


class GroupDual(FusionDual):
    """A finite discrete group ``Gamma`` as a discrete quantum group: labels are elements."""

    is_finite = True
    kac = True

    cache_fusion = False

    def __init__(self, group: FiniteGroup):
        super().__init__()
        self.group = group
        self.name = "group"
        self.trivial = 0

    def conj(self, a):
        return self.group.inv(a)

    def _fuse(self, a, b):
        return {self.group.mul(a, b): 1}

    def all_labels(self):
        return tuple(range(self.group.order))

    def generators(self):
        return self.group.generating_set()

    @property
    def has_intertwiners(self) -> bool:
        return True

    def _intertwiners(self, alpha, gamma, beta):
        return [np.ones((1, 1))]

    def parse_label(self, text: str):
        text = text.strip()
        if text in self.group.names:
            return self.group.names.index(text)
        return int(text)

    def format_label(self, a) -> str:
        return self.group.names[a]

    def descriptor(self) -> dict:
        return {"kind": "group", "group": self.group.name}


class ZdDual(FusionDual):
    """The free abelian group ``Z^d``; labels are integer tuples."""

    cache_fusion = False

    def __init__(self, d: int = 1):
        super().__init__()
        if d < 1:
            raise FusionError("Z^d needs d >= 1")
        self.d = d
        self.name = "zd"
        self.trivial = (0,) * d

    def conj(self, a):
        return tuple(-x for x in a)

    def _fuse(self, a, b):
        return {tuple(x + y for x, y in zip(a, b)): 1}

    def generators(self):
        out = []
        for i in range(self.d):
            for s in (1, -1):
                e = [0] * self.d
                e[i] = s
                out.append(tuple(e))
        return tuple(out)

    @property
    def has_intertwiners(self) -> bool:
        return True

    def _intertwiners(self, alpha, gamma, beta):
        return [np.ones((1, 1))]

    def parse_label(self, text: str):
        parts = [p for p in str(text).replace("(", "").replace(")", "").split(",") if p.strip()]
        vals = tuple(int(p) for p in parts)
        if len(vals) != self.d:
            raise FusionError(f"label {text!r} is not in Z^{self.d}")
        return vals

    def format_label(self, a) -> str:
        return ",".join(map(str, a))

    def descriptor(self) -> dict:
        return {"kind": "zd", "d": self.d}


def _free_reduce(word: str) -> str:
    out: List[str] = []
    for ch in word:
        if out and out[-1] == ch.swapcase():
            out.pop()
        else:
            out.append(ch)
    return "".join(out)


class FreeGroupDual(FusionDual):
    """Free group on ``k`` letters ``a, b, ...``; capitals are inverses; labels are reduced words."""

    cache_fusion = False

    def __init__(self, k: int = 2):
        super().__init__()
        if not 1 <= k <= 26:
            raise FusionError("free group rank must be between 1 and 26")
        self.k = k
        self.letters = "abcdefghijklmnopqrstuvwxyz"[:k]
        self.name = "free"
        self.trivial = ""

    def conj(self, a):
        return a[::-1].swapcase()

    def _fuse(self, a, b):
        return {_free_reduce(a + b): 1}

    def generators(self):
        return tuple(self.letters) + tuple(self.letters.upper())

    @property
    def has_intertwiners(self) -> bool:
        return True

    def _intertwiners(self, alpha, gamma, beta):
        return [np.ones((1, 1))]

    def parse_label(self, text: str):
        text = str(text).strip()
        if text in ("e", "1"):
            return ""
        if any(c.lower() not in self.letters for c in text):
            raise FusionError(f"label {text!r} is not a word over {self.letters}")
        return _free_reduce(text)

    def format_label(self, a) -> str:
        return a or "e"

    def descriptor(self) -> dict:
        return {"kind": "free", "k": self.k}

    def sphere_counts(self, S: Iterable[Label], horizon: int) -> Optional[List[int]]:
        """Sphere sizes for the standard generators, by cone types.

        A reduced word ending in letter ``x`` extends by every letter except
        ``x^{-1}``, so counts per last letter follow a linear recursion.
        Returns ``None`` unless ``S`` (trivial label ignored) is the full
        symmetric generating set.
        """
        if frozenset(S) - {""} != frozenset(self.generators()):
            return None
        letters = self.generators()
        by_last = {x: 1 for x in letters}
        counts = [1]
        for _ in range(horizon):
            counts.append(sum(by_last.values()))
            by_last = {x: sum(c for y, c in by_last.items() if y != x.swapcase()) for x in letters}
        return counts

    def radial_walk(self, S: Iterable[Label], horizon: int) -> Optional[np.ndarray]:
        """Symmetrised radial quotient of the walk on the ball of radius ``horizon``.

        Only available when ``S`` is the full symmetric generating set.  The
        Perron eigenvector of the ball adjacency is radial, so the quotient on
        spheres has the same spectral radius.
        """
        if frozenset(S) != frozenset(self.generators()):
            return None
        deg = 2 * self.k
        m = np.zeros((horizon + 1, horizon + 1))
        for r in range(horizon):
            out = deg if r == 0 else deg - 1
            m[r, r + 1] = m[r + 1, r] = np.sqrt(out * 1.0)
        return m


class FiniteGroupDual(FusionDual):
    """Dual of a finite group ``G``: labels are irreducible representations."""

    is_finite = True
    kac = True

    def __init__(self, group: FiniteGroup, reps: Mapping[str, Sequence[np.ndarray]], trivial: str):
        super().__init__()
        self.group = group
        self.name = "dual"
        self.reps = {name: [np.asarray(m, dtype=complex) for m in mats] for name, mats in reps.items()}
        self.trivial = trivial
        self._labels = tuple(self.reps)
        n = group.order
        for name, mats in self.reps.items():
            if len(mats) != n:
                raise FusionError(f"rep {name!r} needs one matrix per group element")
            for a in range(n):
                for b in range(n):
                    if not np.allclose(mats[a] @ mats[b], mats[group.mul(a, b)], atol=1e-9):
                        raise FusionError(f"rep {name!r} is not a homomorphism")
                if not np.allclose(mats[a] @ mats[a].conj().T, np.eye(mats[a].shape[0]), atol=1e-9):
                    raise FusionError(f"rep {name!r} is not unitary")
        self.chars = {name: np.array([np.trace(m) for m in mats]) for name, mats in self.reps.items()}
        if abs(sum(self.dim(a) ** 2 for a in self._labels) - n) > 0:
            raise FusionError("irreducible representations are incomplete (sum of n^2 != |G|)")
        self._conj = {}
        for a in self._labels:
            target = self.chars[a].conj()
            self._conj[a] = next(b for b in self._labels if np.allclose(self.chars[b], target, atol=1e-9))
        gens = group.generating_set() if group.words is not None else tuple(range(1, n))
        self._gen_elems = tuple(gens) if gens else (0,)

    def conj(self, a):
        return self._conj[a]

    def dim(self, a):
        return self.reps[a][0].shape[0]

    def _fuse(self, a, b):
        n = self.group.order
        prod = self.chars[a] * self.chars[b]
        out = {}
        for c in self._labels:
            m = np.vdot(self.chars[c], prod).real / n
            k = int(round(m))
            if k:
                out[c] = k
        return out

    def all_labels(self):
        return self._labels

    def generators(self):
        nontriv = [a for a in self._labels if a != self.trivial]
        return tuple(nontriv)

    def rep(self, a, g: int) -> np.ndarray:
        return self.reps[a][g]

    @property
    def has_intertwiners(self) -> bool:
        return True

    def _intertwiners(self, alpha, gamma, beta):
        gens_a = [np.kron(self.reps[alpha][g], self.reps[gamma][g]) for g in self._gen_elems]
        gens_b = [self.reps[beta][g] for g in self._gen_elems]
        return _intertwiner_basis(gens_a, gens_b, self.dim(beta))

    def descriptor(self) -> dict:
        return {"kind": "dual", "group": self.group.name}


def _reps_from_generators(group: FiniteGroup, images: Sequence[np.ndarray]) -> List[np.ndarray]:
    mats = []
    for w in group.words:
        m = np.eye(images[0].shape[0], dtype=complex)
        for k in w:
            m = m @ images[k]
        mats.append(m)
    return mats


def _standard_images(group_gens: Sequence[Sequence[int]]) -> List[np.ndarray]:
    """Standard representation of ``S_n`` on the sum-zero subspace."""
    n = len(group_gens[0])
    basis = null_space(np.ones((1, n)))
    out = []
    for p in group_gens:
        perm = np.zeros((n, n))
        for i, j in enumerate(p):
            perm[j, i] = 1.0
        out.append(basis.T @ perm @ basis)
    return out


def dual_of_symmetric3() -> FiniteGroupDual:
    gens = [(1, 0, 2), (1, 2, 0)]
    G = FiniteGroup.symmetric(3)
    sgn = [np.array([[-1.0]]), np.array([[1.0]])]
    std = _standard_images(gens)
    reps = {
        "triv": _reps_from_generators(G, [np.eye(1), np.eye(1)]),
        "sgn": _reps_from_generators(G, sgn),
        "std": _reps_from_generators(G, std),
    }
    return FiniteGroupDual(G, reps, "triv")


def dual_of_cyclic(n: int) -> FiniteGroupDual:
    G = FiniteGroup.cyclic(n)
    reps = {}
    for k in range(n):
        w = np.exp(2j * np.pi * k / n)
        reps[f"chi{k}"] = [np.array([[w ** j]]) for j in range(n)]
    return FiniteGroupDual(G, reps, "chi0")


def dual_of_dihedral4() -> FiniteGroupDual:
    G = FiniteGroup.dihedral(4)
    reps = {}
    for sr, ss in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
        name = "triv" if (sr, ss) == (1, 1) else f"chi{'+' if sr > 0 else '-'}{'+' if ss > 0 else '-'}"
        reps[name] = _reps_from_generators(G, [np.array([[sr]]), np.array([[ss]])])
    r = np.array([[0.0, -1.0], [1.0, 0.0]])
    s = np.array([[1.0, 0.0], [0.0, -1.0]])
    reps["std"] = _reps_from_generators(G, [r, s])
    return FiniteGroupDual(G, reps, "triv")


# ---------------------------------------------------------------------------
# SU_q(2) and friends
# ---------------------------------------------------------------------------

def _su2_fuse(a: int, b: int) -> Dict[int, int]:
    return {k: 1 for k in range(abs(a - b), a + b + 1, 2)}


class SUq2Dual(FusionDual):
    """Dual of ``SU_q(2)``, ``0 < q <= 1``; label ``n`` is twice the spin.

    ``rho_n = diag(q^{-n}, q^{-n+2}, ..., q^n)`` and ``dim_q(n) = [n+1]_q``.
    Intertwiners come from the spin representations of ``U_q(su_2)`` in the
    weight basis ``v_{-j}, ..., v_j`` with ``K^{1/2} v_m = q^m v_m``,
    ``E v_m = sqrt([j-m]_q [j+m+1]_q) v_{m+1}``, ``F = E^*`` and the coproduct
    ``Delta(E) = E (x) K^{1/2} + K^{-1/2} (x) E``, so ``rho = K``.  This
    orientation is the one for which convolution operators of projections
    are Schur idempotent with respect to ``h_R``.
    """

    def __init__(self, q: float = 1.0):
        super().__init__()
        q = float(q)
        if not 0.0 < q <= 1.0:
            raise FusionError("SU_q(2) needs 0 < q <= 1")
        self.q = q
        self.kac = q == 1.0
        self.name = "su_q2"
        self.trivial = 0
        self._gen_cache: Dict[int, Tuple[np.ndarray, np.ndarray, np.ndarray]] = {}

    def check_label(self, a):
        if not isinstance(a, (int, np.integer)) or a < 0:
            raise FusionError(f"SU_q(2) labels are non-negative integers, got {a!r}")
        return int(a)

    def conj(self, a):
        return a

    def _fuse(self, a, b):
        return _su2_fuse(a, b)

    def dim(self, a):
        return a + 1

    def rho(self, a):
        return np.array([self.q ** (-a + 2 * k) for k in range(a + 1)])

    def dim_q(self, a):
        return q_integer(a + 1, self.q)

    def generators(self):
        return (1,)

    @property
    def has_intertwiners(self) -> bool:
        return True

    def ladder(self, n: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(E, F, K^{1/2})`` on the spin ``n/2`` representation."""
        hit = self._gen_cache.get(n)
        if hit is not None:
            return hit
        q = self.q
        j = n / 2.0
        ms = [-j + k for k in range(n + 1)]
        E = np.zeros((n + 1, n + 1))
        for k, m in enumerate(ms[:-1]):
            E[k + 1, k] = np.sqrt(self._qnum(j - m) * self._qnum(j + m + 1))
        Kh = np.diag([q ** m for m in ms])
        res = (E, E.T.copy(), Kh)
        self._gen_cache[n] = res
        return res

    def _qnum(self, x: float) -> float:
        q = self.q
        if abs(q - 1.0) < 1e-15:
            return x
        return (q ** (-x) - q ** x) / (q ** (-1) - q)

    def _coproduct(self, a: int, b: int) -> List[np.ndarray]:
        Ea, Fa, Ka = self.ladder(a)
        Eb, Fb, Kb = self.ladder(b)
        Kai = np.diag(1.0 / np.diag(Ka))
        dE = np.kron(Ea, Kb) + np.kron(Kai, Eb)
        dF = np.kron(Fa, Kb) + np.kron(Kai, Fb)
        dK = np.kron(Ka, Kb)
        return [dE, dF, dK]

    def _intertwiners(self, alpha, gamma, beta):
        gens_a = self._coproduct(alpha, gamma)
        gens_b = list(self.ladder(beta))
        basis = _intertwiner_basis(gens_a, gens_b, self.dim(beta))
        # fix the overall phase so that the largest entry is positive
        out = []
        for V in basis:
            k = np.argmax(np.abs(V))
            out.append(V * (abs(V.flat[k]) / V.flat[k]))
        return out

    def parse_label(self, text: str):
        return self.check_label(int(text))

    def descriptor(self) -> dict:
        return {"kind": "su_q2", "q": self.q}


class OFPlusDual(FusionDual):
    """Dual of ``O_F^+`` at support level: ``SU(2)`` fusion rules.

    ``N`` is the size of ``F`` (classical dimension of the fundamental) and
    ``d >= N`` its quantum dimension.  Dimensions follow
    ``x_{k+1} = x_1 x_k - x_{k-1}``.  ``rho`` is a diagonal surrogate with the
    right size and trace; only traces enter support-level computations.
    """

    def __init__(self, N: int = 2, d: Optional[float] = None):
        super().__init__()
        if N < 2:
            raise FusionError("O_F^+ needs N >= 2")
        d = float(N) if d is None else float(d)
        if d < N:
            raise FusionError("O_F^+ needs quantum dimension d >= N")
        self.N, self.d = N, d
        self.kac = d == N
        self.name = "o_plus"
        self.trivial = 0
        self._dims = [1, N]
        self._qdims = [1.0, d]

    def _extend(self, k):
        while len(self._dims) <= k:
            self._dims.append(self.N * self._dims[-1] - self._dims[-2])
            self._qdims.append(self.d * self._qdims[-1] - self._qdims[-2])

    def conj(self, a):
        return a

    def _fuse(self, a, b):
        return _su2_fuse(a, b)

    def dim(self, a):
        self._extend(a)
        return self._dims[a]

    def dim_q(self, a):
        self._extend(a)
        return self._qdims[a]

    def rho(self, a):
        return _reciprocal_rho(self.dim(a), self.dim_q(a))

    def generators(self):
        return (1,)

    def parse_label(self, text: str):
        return int(text)

    def descriptor(self) -> dict:
        return {"kind": "o_plus", "N": self.N, "d": self.d}


def _uf_conj(w: str) -> str:
    return w[::-1].swapcase()


class UFPlusDual(FusionDual):
    """Dual of ``U_F^+`` at support level.

    Labels are words over ``u`` and ``U`` (``U`` stands for the conjugate of
    ``u``), with free fusion ``x (x) y = sum over x = v z, y = conj(z) w of v w``.
    ``N`` and ``d >= N`` are the classical and quantum dimensions of ``u``.
    """

    def __init__(self, N: int = 2, d: Optional[float] = None):
        super().__init__()
        if N < 2:
            raise FusionError("U_F^+ needs N >= 2")
        d = float(N) if d is None else float(d)
        if d < N:
            raise FusionError("U_F^+ needs quantum dimension d >= N")
        self.N, self.d = N, d
        self.kac = d == N
        self.name = "u_plus"
        self.trivial = ""
        self._dim_cache: Dict[str, Tuple[int, float]] = {"": (1, 1.0)}

    def conj(self, a):
        return _uf_conj(a)

    def _fuse(self, x, y):
        out: Dict[str, int] = {}
        for k in range(0, min(len(x), len(y)) + 1):
            z = x[len(x) - k:]
            if y[:k] == _uf_conj(z):
                w = x[:len(x) - k] + y[k:]
                out[w] = out.get(w, 0) + 1
            else:
                break
        return out

    def _dims(self, w: str) -> Tuple[int, float]:
        hit = self._dim_cache.get(w)
        if hit is not None:
            return hit
        # w = x c with last letter c: x (x) c = w + (x minus its last letter, if that letter is conj(c))
        x, c = w[:-1], w[-1]
        nx, dx = self._dims(x)
        if x and x[-1] == c.swapcase():
            nv, dv = self._dims(x[:-1])
        else:
            nv, dv = 0, 0.0
        res = (nx * self.N - nv, dx * self.d - dv)
        self._dim_cache[w] = res
        return res

    def check_label(self, a):
        if not isinstance(a, str) or any(c not in "uU" for c in a):
            raise FusionError(f"U_F^+ labels are words over 'u', 'U'; got {a!r}")
        return a

    def dim(self, a):
        return self._dims(a)[0]

    def dim_q(self, a):
        return self._dims(a)[1]

    def rho(self, a):
        return _reciprocal_rho(self.dim(a), self.dim_q(a))

    def generators(self):
        return ("u", "U")

    def parse_label(self, text: str):
        text = str(text).strip()
        return "" if text in ("e", "1") else self.check_label(text)

    def format_label(self, a) -> str:
        return a or "e"

    def descriptor(self) -> dict:
        return {"kind": "u_plus", "N": self.N, "d": self.d}


class TableDual(FusionDual):
    """Finite dual given by explicit fusion tables (support-level)."""

    is_finite = True

    def __init__(self, labels: Sequence[str], fusion: Mapping[Tuple[str, str], Mapping[str, int]],
                 rho: Mapping[str, Sequence[float]], conj: Optional[Mapping[str, str]] = None,
                 trivial: Optional[str] = None):
        super().__init__()
        self.name = "table"
        self._labels = tuple(labels)
        self.trivial = trivial if trivial is not None else self._labels[0]
        self._fusion = {k: dict(v) for k, v in fusion.items()}
        self._rho = {a: np.asarray(rho[a], dtype=float) for a in self._labels}
        self._conj = dict(conj) if conj else {a: a for a in self._labels}
        self.kac = all(np.allclose(r, 1.0) for r in self._rho.values())
        for a in self._labels:
            if self._fusion.get((self.trivial, a), {a: 1}) != {a: 1}:
                raise FusionError("trivial label must be a fusion unit")

    def conj(self, a):
        return self._conj[a]

    def _fuse(self, a, b):
        if a == self.trivial:
            return {b: 1}
        if b == self.trivial:
            return {a: 1}
        return self._fusion.get((a, b), {})

    def dim(self, a):
        return len(self._rho[a])

    def rho(self, a):
        return self._rho[a]

    def all_labels(self):
        return self._labels

    def generators(self):
        return tuple(a for a in self._labels if a != self.trivial)

    def descriptor(self) -> dict:
        return {"kind": "table"}


# ---------------------------------------------------------------------------
# factory
# ---------------------------------------------------------------------------

def builtin(name: str, **params) -> FusionDual:
    """Construct a built-in dual by name.

    ``su_q2`` (``q``), ``su2``, ``o_plus`` (``N``, ``d``), ``u_plus`` (``N``,
    ``d``), ``zd`` (``d``), ``z``, ``free`` (``k``), ``group`` (``group`` in
    ``S3``, ``Z<n>``, ``D4``), ``dual`` (same choices).
    """
    key = name.lower().replace("-", "_")
    if key in ("su_q2", "suq2"):
        return SUq2Dual(params.get("q", 1.0))
    if key == "su2":
        return SUq2Dual(1.0)
    if key in ("o_plus", "of_plus", "o_f_plus"):
        return OFPlusDual(int(params.get("N", 2)), params.get("d"))
    if key in ("u_plus", "uf_plus", "u_f_plus"):
        return UFPlusDual(int(params.get("N", 2)), params.get("d"))
    if key == "zd":
        return ZdDual(int(params.get("d", 1)))
    if key == "z":
        return ZdDual(1)
    if key == "z2":
        return ZdDual(2)
    if key in ("free", "free_group", "f2"):
        return FreeGroupDual(int(params.get("k", 2)))
    if key in ("group", "dual"):
        g = str(params.get("group", "S3")).upper()
        if key == "group":
            if g == "S3":
                return GroupDual(FiniteGroup.symmetric(3))
            if g == "D4":
                return GroupDual(FiniteGroup.dihedral(4))
            if g.startswith("Z"):
                return GroupDual(FiniteGroup.cyclic(int(g[1:])))
        else:
            if g == "S3":
                return dual_of_symmetric3()
            if g == "D4":
                return dual_of_dihedral4()
            if g.startswith("Z"):
                return dual_of_cyclic(int(g[1:]))
        raise FusionError(f"unknown finite group {g!r}")
    raise FusionError(f"unknown dual {name!r}")


def dual_from_descriptor(desc: Mapping) -> FusionDual:
    """Build a dual from a JSON descriptor such as ``{"kind": "su_q2", "q": 0.5}``."""
    if "labels" in desc and "fusion" in desc:
        fusion = {}
        for key, val in desc["fusion"].items():
            a, b = key.split(",")
            fusion[(a.strip(), b.strip())] = {str(c): int(m) for c, m in val.items()}
        return TableDual(desc["labels"], fusion, desc["rho"], desc.get("conj"), desc.get("trivial"))
    desc = dict(desc)
    kind = desc.pop("kind", None)
    if kind is None:
        raise FusionError("dual descriptor needs a 'kind'")
    return builtin(kind, **desc)
