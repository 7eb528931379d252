"""Hilbert-space bookkeeping and elementary operators.

Every model in the package lives on a :class:`HilbertSpace` made of labelled
tensor factors.  Factor order fixes the Kronecker order, with the leftmost
factor varying slowest, so basis index ``(i0, i1, ...)`` maps to the flat
index ``np.ravel_multi_index((i0, i1, ...), dims)``.

Matrices are dense ``complex128`` arrays.  Rates and frequencies carry the
units of whatever base frequency the caller picked.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import prod
from typing import Iterable, Sequence

import numpy as np

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
POSITIVITY_TOL = 1e-8


@dataclass(frozen=True)
class HilbertSpace:
    """Ordered tensor product of labelled factors."""

    factors: tuple[tuple[str, int], ...]

    def __post_init__(self):
        labels = [label for label, _ in self.factors]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate factor label in {labels}")
        for label, dim in self.factors:
            if int(dim) != dim or dim < 1:
                raise ValueError(f"factor {label!r} has invalid dimension {dim}")

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(dim for _, dim in self.factors)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.factors)

    @property
    def total_dim(self) -> int:
        return prod(self.dims)

    def index_of(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"unknown factor label {label!r}") from None

    def dim_of(self, label: str) -> int:
        return self.dims[self.index_of(label)]

    def basis_index(self, **indices: int) -> int:
        """Flat index of a product basis state, e.g. ``basis_index(atom=1, phonon=0)``."""
        multi = tuple(indices.get(label, 0) for label in self.labels)
        return int(np.ravel_multi_index(multi, self.dims))


def make_space(factors: Iterable[tuple[str, int]]) -> HilbertSpace:
    factors = tuple((str(label), int(dim)) for label, dim in factors)
    if not factors:
        raise ValueError("a Hilbert space needs at least one factor")
    return HilbertSpace(factors)


@dataclass(frozen=True, eq=False)
class Operator:
    """Dense operator on a :class:`HilbertSpace`."""

    space: HilbertSpace
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        n = self.space.total_dim
        if m.shape != (n, n):
            raise ValueError(f"operator shape {m.shape} does not match space dimension {n}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def dag(self) -> "Operator":
        return Operator(self.space, self.matrix.conj().T)

    def is_hermitian(self, tol: float = HERMITIAN_TOL) -> bool:
        return bool(np.max(np.abs(self.matrix - self.matrix.conj().T), initial=0.0) <= tol)

    def _check(self, other: "Operator"):
        if other.space != self.space:
            raise ValueError("operators live on different spaces")

    def __matmul__(self, other: "Operator") -> "Operator":
        self._check(other)
        return Operator(self.space, self.matrix @ other.matrix)

    def __add__(self, other: "Operator") -> "Operator":
        self._check(other)
        return Operator(self.space, self.matrix + other.matrix)

    def __sub__(self, other: "Operator") -> "Operator":
        self._check(other)
        return Operator(self.space, self.matrix - other.matrix)

    def __mul__(self, scalar: complex) -> "Operator":
        return Operator(self.space, scalar * self.matrix)

    __rmul__ = __mul__

    def __neg__(self) -> "Operator":
        return Operator(self.space, -self.matrix)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """A validated quantum state (Hermitian, unit trace, positive semidefinite)."""

    space: HilbertSpace
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        n = self.space.total_dim
        if m.shape != (n, n):
            raise ValueError(f"state shape {m.shape} does not match space dimension {n}")
        herm = np.max(np.abs(m - m.conj().T), initial=0.0)
        if herm > HERMITIAN_TOL:
            raise ValueError(f"state is not Hermitian (deviation {herm:.3e})")
        tr = np.trace(m)
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValueError(f"state trace {tr.real:.12g} differs from 1")
        lo = np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0]
        if lo < -POSITIVITY_TOL:
            raise ValueError(f"state has negative eigenvalue {lo:.3e}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)


def identity(space: HilbertSpace) -> Operator:
    return Operator(space, np.eye(space.total_dim, dtype=complex))


def annihilation_operator(cutoff: int, label: str = "phonon") -> Operator:
    """Truncated bosonic lowering operator on Fock states ``|0>..|cutoff>``.

    The result lives on a one-factor space named ``label`` so that it can be
    passed straight to :func:`embed`.
    """
    if int(cutoff) != cutoff or cutoff < 1:
        raise ValueError("Fock cutoff must be a positive integer")
    m = np.diag(np.sqrt(np.arange(1, cutoff + 1, dtype=float)), k=1)
    return Operator(make_space([(label, cutoff + 1)]), m)


def sigma_x() -> np.ndarray:
    """``|e><g| + |g><e|`` in the ``(g, e)`` basis."""
    return np.array([[0, 1], [1, 0]], dtype=complex)


def sigma_y() -> np.ndarray:
    """``i(|g><e| - |e><g|)`` in the ``(g, e)`` basis."""
    return np.array([[0, 1j], [-1j, 0]], dtype=complex)


def sigma_z() -> np.ndarray:
    """``|e><e| - |g><g|`` in the ``(g, e)`` basis."""
    return np.array([[-1, 0], [0, 1]], dtype=complex)


def embed(op: np.ndarray | Operator, space: HilbertSpace, factor: str | None = None) -> Operator:
    """Place a single-factor operator on ``space`` with identities elsewhere.

    ``factor`` defaults to the label of ``op``'s own space when ``op`` is an
    :class:`Operator` on a one-factor space.
    """
    if factor is None:
        if not (isinstance(op, Operator) and len(op.space.factors) == 1):
            raise ValueError("factor label required for bare matrices")
        factor = op.space.labels[0]
    m = op.matrix if isinstance(op, Operator) else np.asarray(op, dtype=complex)
    k = space.index_of(factor)
    d = space.dims[k]
    if m.shape != (d, d):
        raise ValueError(f"operator shape {m.shape} does not fit factor {factor!r} of dim {d}")
    out = np.ones((1, 1), dtype=complex)
    for i, dim in enumerate(space.dims):
        out = np.kron(out, m if i == k else np.eye(dim, dtype=complex))
    return Operator(space, out)


def tensor(space: HilbertSpace, ops: dict[str, np.ndarray | Operator]) -> Operator:
    """Kronecker product of per-factor operators; missing factors get identities."""
    unknown = set(ops) - set(space.labels)
    if unknown:
        raise KeyError(f"unknown factor labels {sorted(unknown)}")
    out = np.ones((1, 1), dtype=complex)
    for label, dim in space.factors:
        m = ops.get(label, np.eye(dim))
        m = np.asarray(m.matrix if isinstance(m, Operator) else m, dtype=complex)
        if m.shape != (dim, dim):
            raise ValueError(f"operator for {label!r} has shape {m.shape}, expected {(dim, dim)}")
        out = np.kron(out, m)
    return Operator(space, out)


def transition_operator(space: HilbertSpace, from_state: int, to_state: int, factor: str) -> Operator:
    """``|to><from|`` on ``factor``, identity on the other factors."""
    d = space.dim_of(factor)
    for idx in (from_state, to_state):
        if not 0 <= idx < d:
            raise IndexError(f"basis index {idx} out of range for factor {factor!r} (dim {d})")
    m = np.zeros((d, d), dtype=complex)
    m[to_state, from_state] = 1.0
    return embed(m, space, factor)


def projector(space: HilbertSpace, **indices: int) -> Operator:
    """Projector on one product basis state."""
    k = space.basis_index(**indices)
    m = np.zeros((space.total_dim, space.total_dim), dtype=complex)
    m[k, k] = 1.0
    return Operator(space, m)


def pure_state(space: HilbertSpace, amplitudes: Sequence[complex]) -> DensityMatrix:
    psi = np.asarray(amplitudes, dtype=complex)
    if psi.shape != (space.total_dim,):
        raise ValueError("amplitude vector has the wrong length")
    psi = psi / np.linalg.norm(psi)
    return DensityMatrix(space, np.outer(psi, psi.conj()))


def basis_state(space: HilbertSpace, **indices: int) -> DensityMatrix:
    return DensityMatrix(space, projector(space, **indices).matrix)


def maximally_mixed(space: HilbertSpace) -> DensityMatrix:
    n = space.total_dim
    return DensityMatrix(space, np.eye(n, dtype=complex) / n)


def random_density_matrix(space: HilbertSpace, rng: np.random.Generator,
                          support: Sequence[int] | None = None) -> DensityMatrix:
    """Full-rank random state from a Ginibre matrix, optionally restricted to ``support``."""
    n = space.total_dim
    idx = np.arange(n) if support is None else np.asarray(support)
    k = len(idx)
    g = rng.normal(size=(k, k)) + 1j * rng.normal(size=(k, k))
    block = g @ g.conj().T
    block /= np.trace(block).real
    m = np.zeros((n, n), dtype=complex)
    m[np.ix_(idx, idx)] = block
    m = 0.5 * (m + m.conj().T)
    return DensityMatrix(space, m)


def thermal_occupations(nbar: float, cutoff: int) -> np.ndarray:
    """Bose-Einstein populations on ``|0>..|cutoff>``, renormalised after truncation."""
    if nbar < 0:
        raise ValueError("mean occupation must be nonnegative")
    n = np.arange(cutoff + 1)
    if nbar == 0:
        p = (n == 0).astype(float)
    else:
        p = (nbar / (nbar + 1.0)) ** n / (nbar + 1.0)
    return p / p.sum()


def expectation(rho: DensityMatrix | np.ndarray, op: Operator | np.ndarray) -> complex:
    """``Tr[rho op]``."""
    if isinstance(rho, DensityMatrix) and isinstance(op, Operator) and rho.space != op.space:
        raise ValueError("state and operator live on different spaces")
    r = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
    o = op.matrix if isinstance(op, Operator) else np.asarray(op)
    if r.shape != o.shape:
        raise ValueError(f"shape mismatch {r.shape} vs {o.shape}")
    # Tr[r o] without forming the product
    return complex(np.sum(r * o.T))
