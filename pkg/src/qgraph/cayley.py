"""Quantum Cayley graphs of discrete quantum groups.

A generating projection ``P`` (finitely supported, ``R(P) = P``,
``eps(P) = 0``) defines the convolution graph ``A x = P * x``.  This module
validates generators, decides generation up to a horizon, computes balls
and growth series, and runs the amenability heuristics (Folner sets,
spectral radius of the central random walk).

Central generators are handled at support level through fusion rules: for
``P = 1_S`` the range projection of ``P^{*n}`` is the indicator of the
fusion power ``S^n``.  Non-central generators need a dual with numerical
intertwiners and go through explicit convolution powers.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Tuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .bimodule import Bimodule
from .choi import AdjacencyMap, DEFAULT_TOL
from .fusion import (FreeGroupDual, FusionDual, HorizonOverflow, Label, NoProviderError, ball,
                     fuse_support, is_conjugate_closed, sorted_labels)
from .qgfourier import (_is_pair, convolve, convolution_map, h_L, h_R, indicator,
                        unitary_antipode_R)
from .qspace import AlgebraElement

RANGE_TOL = 1e-10
DENSE_WALK_LIMIT = 3000
SPARSE_WALK_LIMIT = 200_000


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _as_element(dual: FusionDual, P) -> AlgebraElement:
    """Accept an element or an iterable of labels (read as ``1_S``)."""
    if isinstance(P, AlgebraElement):
        return AlgebraElement({a: m for a, m in P.blocks.items() if np.abs(m).max(initial=0.0) > 0})
    return indicator(dual, P)


def support(P: AlgebraElement, tol: float = DEFAULT_TOL) -> FrozenSet[Label]:
    return P.support(tol)


def range_projection(x: AlgebraElement, rel_tol: float = RANGE_TOL) -> AlgebraElement:
    """Blockwise range projection of a hermitian element.

    Eigenvalues below ``rel_tol`` times the largest eigenvalue modulus (over
    all blocks) are treated as zero.
    """
    eigs = {}
    top = 0.0
    for a, m in x.blocks.items():
        w, v = np.linalg.eigh((m + m.conj().T) / 2)
        eigs[a] = (w, v)
        top = max(top, float(np.abs(w).max(initial=0.0)))
    out = {}
    for a, (w, v) in eigs.items():
        keep = np.abs(w) > rel_tol * top
        if keep.any():
            vk = v[:, keep]
            out[a] = vk @ vk.conj().T
    return AlgebraElement(out)


def join(x: AlgebraElement, y: AlgebraElement) -> AlgebraElement:
    """Supremum of two projections (range of their sum)."""
    return range_projection(x + y)


def dominated(P: AlgebraElement, Q: AlgebraElement, tol: float = 1e-8) -> bool:
    """``P <= Q`` for projections: ``P - Q P`` vanishes."""
    for a, m in P.blocks.items():
        q = Q.blocks.get(a)
        if q is None:
            if np.abs(m).max(initial=0.0) > tol:
                return False
            continue
        if np.abs(m - q @ m).max(initial=0.0) > tol:
            return False
    return True


def _rank(m: np.ndarray) -> int:
    return int(round(np.real(np.trace(m))))


# ---------------------------------------------------------------------------
# generator validation
# ---------------------------------------------------------------------------

@dataclass
class GeneratorReport:
    projection: bool
    r_invariant: Optional[bool]
    counit_zero: bool
    degree: float
    degree_left: float
    central: bool
    violations: List[str] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.violations

    def as_dict(self) -> dict:
        return {"valid": self.valid, "projection": self.projection, "r_invariant": self.r_invariant,
                "counit_zero": self.counit_zero, "degree": self.degree, "degree_left": self.degree_left,
                "central": self.central, "violations": list(self.violations)}


def validate_generator(dual: FusionDual, P, tol: float = DEFAULT_TOL) -> GeneratorReport:
    """Check that ``P`` can generate a quantum Cayley graph.

    The degree reported is ``h_R(P)``.  For non-central ``P`` on a non-Kac
    dual the convolution map has degree ``h_L(P)``, reported separately.
    """
    P = _as_element(dual, P)
    violations = []
    proj = P.is_projection(tol)
    if not proj:
        violations.append("not a projection")
    central = P.is_central(tol)
    if central:
        coeffs = {a: np.trace(m).real / m.shape[0] for a, m in P.blocks.items()}
        r_inv = all(abs(coeffs.get(dual.conj(a), 0.0) - c) <= tol for a, c in coeffs.items())
    elif _is_pair(dual):
        r_inv = (unitary_antipode_R(dual, P) - P).norm() <= tol
    else:
        r_inv = None
    if r_inv is False:
        violations.append("not invariant under the unitary antipode")
    triv = P.blocks.get(dual.trivial)
    counit_zero = triv is None or np.abs(triv).max(initial=0.0) <= tol
    if not counit_zero:
        violations.append("loops: the trivial block of P is nonzero")
    if not P.support(tol):
        violations.append("empty generator")
    return GeneratorReport(proj, r_inv, counit_zero, float(h_R(dual, P).real), float(h_L(dual, P).real),
                           central, violations)


# ---------------------------------------------------------------------------
# generation
# ---------------------------------------------------------------------------

@dataclass
class GenerationResult:
    status: str  # "generating" or "unknown"
    witness: Optional[int]
    horizon: int
    profile: List[Dict[str, int]] = field(default_factory=list)

    @property
    def generating(self) -> bool:
        return self.status == "generating"

    def as_dict(self) -> dict:
        return {"status": self.status, "witness": self.witness, "horizon": self.horizon}


def _targets(dual: FusionDual) -> Tuple[Label, ...]:
    return dual.all_labels() if dual.is_finite else tuple(dual.generators())


def is_generating(dual: FusionDual, P, horizon: int) -> GenerationResult:
    """Semi-decide ``sup_n [P^{*n}] = 1`` up to ``horizon`` convolution powers.

    Finite duals: the witness is the least ``n`` such that ``[P^{*1}], ...,
    [P^{*n}]`` together with the unit cover every block (the diameter for
    classical groups).  Infinite duals: ``generating`` once the join of the
    first ``n`` powers dominates the units of the canonical generating labels;
    convolution powers of that join then exhaust every label.  Otherwise the
    answer is ``unknown``, never a negative verdict.
    """
    P = _as_element(dual, P)
    targets = _targets(dual)
    if P.is_central():
        S = P.support()
        if dual.is_finite:
            everything = frozenset(targets)
            for n in range(0, horizon + 1):
                if ball(dual, S, n) >= everything:
                    return GenerationResult("generating", n, horizon)
            return GenerationResult("unknown", None, horizon)
        seen: set = set()
        cur = frozenset([dual.trivial])
        for n in range(1, horizon + 1):
            cur = fuse_support(dual, cur, S)
            seen |= cur
            if set(targets) <= seen:
                return GenerationResult("generating", n, horizon)
        return GenerationResult("unknown", None, horizon)

    if not dual.has_intertwiners:
        raise NoProviderError(f"{dual.name}: matrix-level generation needs intertwiners")
    acc = AlgebraElement({})
    cur = AlgebraElement({dual.trivial: np.eye(dual.dim(dual.trivial))})
    profile = []
    unit = {dual.trivial: np.eye(dual.dim(dual.trivial))} if dual.is_finite else {}
    for n in range(1, horizon + 1):
        cur = range_projection(convolve(dual, P, cur))
        acc = join(acc, cur)
        profile.append({dual.format_label(a): _rank(m) for a, m in acc.blocks.items()})
        cover = join(acc, AlgebraElement(unit)) if unit else acc
        if all(a in cover.blocks and _rank(cover.blocks[a]) == dual.dim(a) for a in targets):
            return GenerationResult("generating", n, horizon, profile)
    return GenerationResult("unknown", None, horizon, profile)


def power_range(dual: FusionDual, P, n: int) -> AlgebraElement:
    """Range projection ``[P^{*n}]`` computed from convolution powers."""
    P = _as_element(dual, P)
    cur = AlgebraElement({dual.trivial: np.eye(dual.dim(dual.trivial))})
    for _ in range(n):
        cur = range_projection(convolve(dual, P, cur))
    return cur


# ---------------------------------------------------------------------------
# growth
# ---------------------------------------------------------------------------

@dataclass
class GrowthSeries:
    n: List[int]
    ball_size: List[int]
    a: List[float]
    classical: List[float]
    balls: List[FrozenSet[Label]] = field(default_factory=list, repr=False)

    def root(self) -> List[float]:
        """``a_n^{1/n}`` (``nan`` at ``n = 0``)."""
        return [float("nan") if k == 0 else float(v) ** (1.0 / k) for k, v in zip(self.n, self.a)]

    def rows(self) -> List[Tuple[int, int, float, float]]:
        return list(zip(self.n, self.ball_size, self.a, self.root()))


def _sphere_counts(dual: FusionDual, S, horizon: int) -> Optional[List[int]]:
    """Closed-form sphere sizes when the dual offers them (one-dimensional labels only)."""
    hook = getattr(dual, "sphere_counts", None)
    return None if hook is None else hook(S, horizon)


def growth(dual: FusionDual, P, horizon: int, keep_balls: bool = False) -> GrowthSeries:
    """``a_n = h_R([(P + 1_e)^{*n}])`` for ``0 <= n <= horizon``.

    The unit is adjoined automatically, so ``a_n`` measures balls.  Also
    records the classical-dimension series ``sum n_a^2`` over the same balls.
    """
    P = _as_element(dual, P)
    ns, sizes, a, cl, balls = [], [], [], [], []
    if P.is_central():
        S = P.support() | {dual.trivial}
        counts = None if keep_balls else _sphere_counts(dual, S, horizon)
        if counts is not None:
            total = 0
            for n in range(horizon + 1):
                total += counts[n]
                ns.append(n)
                sizes.append(total)
                a.append(float(total))
                cl.append(float(total))
            return GrowthSeries(ns, sizes, a, cl, balls)
        seen = {dual.trivial}
        frontier = {dual.trivial}
        total = dual.dim_q(dual.trivial) ** 2
        ctotal = float(dual.dim(dual.trivial) ** 2)
        for n in range(horizon + 1):
            if n > 0:
                new = set(fuse_support(dual, frontier, S)) - seen
                seen |= new
                frontier = new
                total += sum(dual.dim_q(x) ** 2 for x in new)
                ctotal += sum(dual.dim(x) ** 2 for x in new)
            ns.append(n)
            sizes.append(len(seen))
            a.append(float(total))
            cl.append(float(ctotal))
            if keep_balls:
                balls.append(frozenset(seen))
        return GrowthSeries(ns, sizes, a, cl, balls)

    if not dual.has_intertwiners:
        raise NoProviderError(f"{dual.name}: matrix-level growth needs intertwiners")
    e = dual.trivial
    Pu = P + AlgebraElement({e: np.eye(dual.dim(e))})
    Pu = range_projection(Pu)
    cur = AlgebraElement({e: np.eye(dual.dim(e))})
    for n in range(horizon + 1):
        if n > 0:
            cur = range_projection(convolve(dual, Pu, cur))
        ns.append(n)
        sizes.append(len(cur.blocks))
        a.append(float(h_R(dual, cur).real))
        cl.append(float(sum(np.trace(m).real * dual.dim(x) for x, m in cur.blocks.items())))
        if keep_balls:
            balls.append(frozenset(cur.blocks))
    return GrowthSeries(ns, sizes, a, cl, balls)


@dataclass
class GrowthVerdict:
    verdict: str
    slope: float
    r2: float
    window: Tuple[int, int]

    def as_dict(self) -> dict:
        return {"verdict": self.verdict, "slope": self.slope, "r2": self.r2, "window": list(self.window)}


def growth_verdict(series: GrowthSeries, sub_slope: float = 0.01, exp_slope: float = 0.1,
                   min_r2: float = 0.99) -> GrowthVerdict:
    """Classify growth from the last half of the series.

    Fits ``log a_n = c + s n + p log(n + 1) + b / (n + 1)`` by least squares.
    The last two terms absorb power-law growth and its leading correction,
    so ``s`` estimates ``lim log a_n / n`` already on short windows.
    ``s < sub_slope`` gives ``subexponential``; ``s > exp_slope`` with
    ``R^2 > min_r2`` gives ``exponential``; anything else is ``inconclusive``.
    """
    n = np.asarray(series.n, dtype=float)
    a = np.asarray(series.a, dtype=float)
    lo = int(n[-1]) // 2
    mask = (n >= max(lo, 1))
    if mask.sum() < 5:
        return GrowthVerdict("inconclusive", float("nan"), float("nan"), (lo, int(n[-1])))
    x, y = n[mask], np.log(a[mask])
    X = np.column_stack([np.ones_like(x), x, np.log(x + 1.0), 1.0 / (x + 1.0)])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    fit = X @ coef
    ss_res = float(np.sum((y - fit) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    s = float(coef[1])
    if s < sub_slope:
        v = "subexponential"
    elif s > exp_slope and r2 > min_r2:
        v = "exponential"
    else:
        v = "inconclusive"
    return GrowthVerdict(v, s, r2, (int(x[0]), int(x[-1])))


# ---------------------------------------------------------------------------
# Folner sets
# ---------------------------------------------------------------------------

@dataclass
class FolnerResult:
    found: bool
    radius: Optional[int]
    size: Optional[int]
    lhs: Optional[float]
    rhs: Optional[float]
    horizon: int

    def as_dict(self) -> dict:
        return {"found": self.found, "radius": self.radius, "size": self.size, "lhs": self.lhs,
                "rhs": self.rhs, "horizon": self.horizon}


def folner_check(dual: FusionDual, mu, eps: float, horizon: int) -> FolnerResult:
    """Search the balls of ``supp(mu)`` for a Folner set.

    ``F = B_r`` passes when ``sum_{supp(mu * 1_F)} n_a^2 <= (1 + eps) sum_F n_a^2``.
    Since ``supp(mu)`` contains the trivial label, ``supp(mu * 1_F) = B_{r+1}``.
    The first passing radius ``1 <= r <= horizon`` is returned.
    """
    S = mu.support() if isinstance(mu, AlgebraElement) else frozenset(mu)
    if dual.trivial not in S:
        raise ValueError("the support of mu must contain the trivial label")
    if not is_conjugate_closed(dual, S):
        raise ValueError("mu must be symmetric (conjugation-closed support)")
    series = growth(dual, S - {dual.trivial}, horizon + 1)
    c = series.classical
    for r in range(1, horizon + 1):
        if c[r + 1] <= (1.0 + eps) * c[r]:
            return FolnerResult(True, r, series.ball_size[r], c[r + 1], (1.0 + eps) * c[r], horizon)
    return FolnerResult(False, None, None, None, None, horizon)


# ---------------------------------------------------------------------------
# bi-Lipschitz constants and filtrations
# ---------------------------------------------------------------------------

@dataclass
class BilipschitzResult:
    M: Optional[int]
    horizon: int

    @property
    def known(self) -> bool:
        return self.M is not None

    def as_dict(self) -> dict:
        return {"M": self.M, "horizon": self.horizon}


def _powers_union(dual: FusionDual, S: FrozenSet[Label], M: int) -> List[FrozenSet[Label]]:
    """``U_m = S^1 u ... u S^m`` for ``m = 1..M``."""
    out = []
    acc: set = set()
    cur = frozenset([dual.trivial])
    for _ in range(M):
        cur = fuse_support(dual, cur, S)
        acc |= cur
        out.append(frozenset(acc))
    return out


def bilipschitz_constant(dual: FusionDual, P1, P2, horizon: int) -> BilipschitzResult:
    """Least ``M <= horizon`` with ``P1 <= sup_{i<=M} [P2^{*i}]`` and vice versa."""
    P1 = _as_element(dual, P1)
    P2 = _as_element(dual, P2)
    if P1.is_central() and P2.is_central():
        S1, S2 = P1.support(), P2.support()
        U1 = _powers_union(dual, S1, horizon)
        U2 = _powers_union(dual, S2, horizon)
        for M in range(1, horizon + 1):
            if S1 <= U2[M - 1] and S2 <= U1[M - 1]:
                return BilipschitzResult(M, horizon)
        return BilipschitzResult(None, horizon)
    if not dual.has_intertwiners:
        raise NoProviderError(f"{dual.name}: matrix-level comparison needs intertwiners")
    R1, R2 = range_projection(P1), range_projection(P2)
    j1 = AlgebraElement({})
    j2 = AlgebraElement({})
    c1 = AlgebraElement({dual.trivial: np.eye(dual.dim(dual.trivial))})
    c2 = c1
    for M in range(1, horizon + 1):
        c1 = range_projection(convolve(dual, P1, c1))
        c2 = range_projection(convolve(dual, P2, c2))
        j1, j2 = join(j1, c1), join(j2, c2)
        if dominated(R1, j2) and dominated(R2, j1):
            return BilipschitzResult(M, horizon)
    return BilipschitzResult(None, horizon)


def filtration_inclusions(dual: FusionDual, S1: Iterable[Label], S2: Iterable[Label], M: int,
                          t_max: int = 12) -> Dict[str, bool]:
    """Check ``B_t(S1) <= B_{Mt}(S2)`` and ``B_t(S2) <= B_{Mt}(S1)`` for ``t <= t_max``."""
    S1, S2 = frozenset(S1), frozenset(S2)
    balls1 = [ball(dual, S1, k) for k in range(M * t_max + 1)]
    balls2 = [ball(dual, S2, k) for k in range(M * t_max + 1)]
    fwd = all(balls1[t] <= balls2[M * t] for t in range(t_max + 1))
    bwd = all(balls2[t] <= balls1[M * t] for t in range(t_max + 1))
    return {"forward": fwd, "backward": bwd}


# ---------------------------------------------------------------------------
# central random walk
# ---------------------------------------------------------------------------

@dataclass
class WalkResult:
    labels: Optional[List[Label]]
    matrix: Optional[np.ndarray]
    spectral_radius: float
    degree: float
    method: str

    @property
    def ratio(self) -> float:
        return self.spectral_radius / self.degree

    def as_dict(self) -> dict:
        return {"spectral_radius": self.spectral_radius, "degree": self.degree, "ratio": self.ratio,
                "method": self.method, "size": None if self.labels is None else len(self.labels)}


def central_walk_operator(dual: FusionDual, P, horizon: int) -> WalkResult:
    """Convolution by central ``P`` on central elements of the ball of radius ``horizon``.

    In the basis ``1_a`` the operator has matrix
    ``W[b, a] = sum_s p_s dim_q(s) dim_q(b) m(b, a (x) s) / dim_q(a)``, whose
    columns sum to ``h_R(P)`` away from the truncation boundary.  It is
    diagonally similar to the symmetric matrix
    ``sum_s p_s dim_q(s) m(b, a (x) s)``, used for the eigensolve.  When the
    ball is too large and the dual offers a radial quotient (free groups) the
    quotient is used instead; it has the same spectral radius.
    """
    P = _as_element(dual, P)
    if not P.is_central():
        raise ValueError("central_walk_operator needs a central P")
    coeffs = {s: float(np.trace(m).real / m.shape[0]) for s, m in P.blocks.items()}
    S = frozenset(coeffs)
    degree = float(h_R(dual, P).real)
    if isinstance(dual, FreeGroupDual):
        radial = dual.radial_walk(S, horizon)
        size_est = 1 + sum(2 * dual.k * (2 * dual.k - 1) ** (r - 1) for r in range(1, horizon + 1))
        if radial is not None and size_est > SPARSE_WALK_LIMIT:
            rho = float(np.linalg.eigvalsh(radial)[-1])
            return WalkResult(None, radial, rho, degree, "radial")
    labels = sorted_labels(ball(dual, S, horizon))
    if len(labels) > SPARSE_WALK_LIMIT:
        raise HorizonOverflow(f"{len(labels)} labels exceed the walk limit {SPARSE_WALK_LIMIT}")
    index = {a: i for i, a in enumerate(labels)}
    rows, cols, vals = [], [], []
    for a in labels:
        for s, p in coeffs.items():
            w = p * dual.dim_q(s)
            for b, m in dual.fuse(a, s).items():
                j = index.get(b)
                if j is not None:
                    rows.append(j)
                    cols.append(index[a])
                    vals.append(w * m)
    n = len(labels)
    sym = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    sym = (sym + sym.T) / 2
    if n <= DENSE_WALK_LIMIT:
        dense = sym.toarray()
        rho = float(np.abs(np.linalg.eigvalsh(dense)).max())
        method = "dense"
    else:
        dense = None
        rho = float(abs(spla.eigsh(sym, k=1, which="LM", return_eigenvectors=False)[0]))
        method = "sparse"
    dq = np.array([dual.dim_q(a) for a in labels])
    W = None
    if dense is not None:
        W = dense * dq[:, None] / dq[None, :]
    return WalkResult(list(labels), W, rho, degree, method)


# ---------------------------------------------------------------------------
# Cayley adjacency and bimodule
# ---------------------------------------------------------------------------

def cayley_adjacency(dual: FusionDual, P, window: Iterable[Label]) -> AdjacencyMap:
    """Convolution map ``x -> P * x`` truncated to ``window``."""
    return convolution_map(dual, _as_element(dual, P), window)


def cayley_bimodule(dual: FusionDual, S: Iterable[Label], window: Iterable[Label]) -> Bimodule:
    """Edge bimodule ``V_ab = span{V^*(. (x) v) : V in Mor(b, a (x) s), v in H_s}``."""
    if not dual.has_intertwiners:
        raise NoProviderError(f"{dual.name} has no intertwiners")
    window = list(window)
    keep = set(window)
    raw: Dict[Tuple[Label, Label], List[np.ndarray]] = {}
    for a in window:
        na = dual.dim(a)
        for s in S:
            ns = dual.dim(s)
            for b in dual.fuse(a, s):
                if b not in keep:
                    continue
                nb = dual.dim(b)
                for V in dual.intertwiners(a, s, b):
                    V3 = V.reshape(na, ns, nb)
                    for k in range(ns):
                        raw.setdefault((a, b), []).append(V3[:, k, :].conj().T)
    return Bimodule.from_spanning(dual.space(window), raw)


def regularity_deviation(A: AdjacencyMap, value: float, interior: Iterable[Label]) -> float:
    """``max |A(1)_a - value 1|`` over labels in ``interior``."""
    one = A.space.unit()
    d = A(one)
    worst = 0.0
    for a in interior:
        n = A.space[a].dim
        worst = max(worst, float(np.abs(d.get(a, n) - value * np.eye(n)).max()))
    return worst


class CayleyGraph:
    """Convenience wrapper bundling a dual, a generator and a horizon."""

    def __init__(self, dual: FusionDual, generator, horizon: int = 12):
        self.dual = dual
        self.generator = _as_element(dual, generator)
        self.horizon = horizon
        self.report = validate_generator(dual, self.generator)

    @property
    def degree(self) -> float:
        return self.report.degree

    def generation(self) -> GenerationResult:
        return is_generating(self.dual, self.generator, self.horizon)

    def growth(self) -> GrowthSeries:
        return growth(self.dual, self.generator, self.horizon)

    def walk(self) -> WalkResult:
        return central_walk_operator(self.dual, self.generator, self.horizon)

    def adjacency(self, window: Iterable[Label]) -> AdjacencyMap:
        return cayley_adjacency(self.dual, self.generator, window)


__all__ = [
    "BilipschitzResult", "CayleyGraph", "FolnerResult", "GenerationResult", "GeneratorReport",
    "GrowthSeries", "GrowthVerdict", "WalkResult", "bilipschitz_constant", "cayley_adjacency",
    "cayley_bimodule", "central_walk_operator", "dominated", "filtration_inclusions", "folner_check",
    "growth", "growth_verdict", "is_generating", "join", "power_range", "range_projection",
    "regularity_deviation", "validate_generator",
]
