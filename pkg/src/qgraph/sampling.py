"""Random spaces, elements, projections and maps for randomised checks.

All functions take an explicit :class:`numpy.random.Generator` so that runs
are reproducible from a seed.
"""
from __future__ import annotations

from typing import Dict, Tuple

import numpy as np

from .qspace import AlgebraElement, Block, Label, QuantumSpace


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_rho(n: int, rng: np.random.Generator, cond: float = 20.0) -> np.ndarray:
    """Random positive definite density with eigenvalues in ``[1, cond]``."""
    u = random_unitary(n, rng)
    ev = np.exp(rng.uniform(0.0, np.log(cond), size=n))
    return (u * ev) @ u.conj().T


def random_space(rng: np.random.Generator, max_blocks: int = 3, max_dim: int = 4,
                 tracial: bool = False) -> QuantumSpace:
    k = int(rng.integers(1, max_blocks + 1))
    blocks = []
    for i in range(k):
        n = int(rng.integers(1, max_dim + 1))
        rho = np.eye(n) if tracial or n == 1 else random_rho(n, rng)
        blocks.append(Block(f"b{i}", n, rho))
    return QuantumSpace(blocks)


def random_element(space: QuantumSpace, rng: np.random.Generator, hermitian: bool = False) -> AlgebraElement:
    out = {}
    for b in space.blocks:
        m = rng.normal(size=(b.dim, b.dim)) + 1j * rng.normal(size=(b.dim, b.dim))
        out[b.label] = (m + m.conj().T) / 2 if hermitian else m
    return AlgebraElement(out)


def random_projection(space: QuantumSpace, rng: np.random.Generator) -> AlgebraElement:
    """Nonzero projection: spectral projection of a random hermitian element onto its positive part."""
    while True:
        h = random_element(space, rng, hermitian=True)
        out = {}
        for label, m in h.blocks.items():
            w, v = np.linalg.eigh(m)
            keep = v[:, w > 0]
            if keep.shape[1]:
                out[label] = keep @ keep.conj().T
        if out:
            return AlgebraElement(out)


def random_maps(space: QuantumSpace, rng: np.random.Generator,
                real: bool = False) -> Dict[Tuple[Label, Label], np.ndarray]:
    """Random block maps ``(beta, alpha) -> n_b^2 x n_a^2`` on row-major vectorisations."""
    maps = {}
    for a in space.blocks:
        for b in space.blocks:
            shape = (b.dim ** 2, a.dim ** 2)
            m = rng.normal(size=shape)
            if not real:
                m = m + 1j * rng.normal(size=shape)
            maps[(b.label, a.label)] = m
    return maps
