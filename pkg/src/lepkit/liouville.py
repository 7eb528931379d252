"""Lindblad generators, their superoperator matrices and spectral analysis.

Density matrices are vectorised by row stacking, ``vec(rho) = rho.ravel()``,
so that ``vec(A rho B) = kron(A, B.T) @ vec(rho)``.  For the driven
three-level model this reproduces the textbook 9x9 matrix with basis order
``(aa, ab, ac, ba, bb, bc, ca, cb, cc)``.

Left modes are stored in the bilinear convention: ``Tr[L_i L(X)] =
lambda_i Tr[L_i X]`` for every X, so that ``Tr[L_i R_j] = delta_ij`` and the
decomposition coefficients are ``a_i = Tr[L_i rho]``.  Equivalently
``L_i^dagger`` is an eigenmatrix of the adjoint generator with eigenvalue
``conj(lambda_i)``.  For Hermitian left modes the two readings coincide.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cmp_to_key
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from .errors import (
    DefectiveSpectrumError,
    DegenerateStationaryError,
    DimensionError,
    EPAmbiguityError,
    SpectrumError,
)
from .qops import HERMITIAN_TOL, DensityMatrix, HilbertSpace, Operator, make_space
from .trajectory import Trajectory

MAX_SUPEROPERATOR_DIM = 1024
ZERO_TOL = 1e-9
DEFECT_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class LindbladModel:
    """Hamiltonian plus jump operators; each jump already carries its sqrt(rate)."""

    space: HilbertSpace
    hamiltonian: Operator
    jumps: tuple[Operator, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "jumps", tuple(self.jumps))
        for op in (self.hamiltonian, *self.jumps):
            if op.space != self.space:
                raise ValueError("all operators must live on the model space")
        if not self.hamiltonian.is_hermitian(HERMITIAN_TOL):
            raise ValueError("Hamiltonian is not Hermitian")

    @property
    def dim(self) -> int:
        return self.space.total_dim

    def without_dissipation(self) -> "LindbladModel":
        return LindbladModel(self.space, self.hamiltonian, ())


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1)


def unvec(v: np.ndarray, dim: int | None = None) -> np.ndarray:
    v = np.asarray(v)
    if dim is None:
        dim = int(round(np.sqrt(v.size)))
    return v.reshape(dim, dim)


def lindblad_action(model: LindbladModel, rho: np.ndarray | DensityMatrix) -> np.ndarray:
    """``-i[H, rho] + sum_J (J rho J^+ - {J^+ J, rho}/2)``."""
    r = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    if r.shape != (model.dim, model.dim):
        raise ValueError(f"state shape {r.shape} does not match model dimension {model.dim}")
    h = model.hamiltonian.matrix
    out = -1j * (h @ r - r @ h)
    for jump in model.jumps:
        j = jump.matrix
        jd = j.conj().T
        jdj = jd @ j
        out += j @ r @ jd - 0.5 * (jdj @ r + r @ jdj)
    return out


@dataclass(frozen=True, eq=False)
class Superoperator:
    model: LindbladModel
    matrix: np.ndarray = field(repr=False)
    vectorization: str = "row-stacking"

    @property
    def dim(self) -> int:
        """Hilbert-space dimension D (the matrix is D^2 x D^2)."""
        return self.model.dim

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return unvec(self.matrix @ vec(rho), self.dim)


def superoperator_matrix(hamiltonian: np.ndarray, jumps: Sequence[np.ndarray]) -> np.ndarray:
    h = np.asarray(hamiltonian, dtype=complex)
    n = h.shape[0]
    eye = np.eye(n, dtype=complex)
    out = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for j in jumps:
        j = np.asarray(j, dtype=complex)
        jdj = j.conj().T @ j
        out += np.kron(j, j.conj()) - 0.5 * (np.kron(jdj, eye) + np.kron(eye, jdj.T))
    return out


def build_superoperator(model: LindbladModel) -> Superoperator:
    m = superoperator_matrix(model.hamiltonian.matrix, [j.matrix for j in model.jumps])
    m.setflags(write=False)
    return Superoperator(model, m)


# ---------------------------------------------------------------------------
# spectra

@dataclass(frozen=True, eq=False)
class Spectrum:
    """Sorted eigen-decomposition of a Liouvillian.

    ``right_modes[i]`` and ``left_modes[i]`` are D x D matrices with
    ``Tr[L_i R_j] = delta_ij`` wherever the spectrum is diagonalizable.
    ``biorth_condition[i]`` is the overlap measured before normalisation
    (smallest singular value of the overlap block of the eigenvalue's
    cluster); values near zero signal an exceptional point.
    """

    eigenvalues: np.ndarray
    right_modes: np.ndarray = field(repr=False)
    left_modes: np.ndarray = field(repr=False)
    biorth_condition: np.ndarray
    clusters: tuple[tuple[int, ...], ...]
    degenerate: tuple[bool, ...]
    defective: tuple[bool, ...]
    space: HilbertSpace | None = None

    def __len__(self) -> int:
        return len(self.eigenvalues)

    @property
    def dim(self) -> int:
        return self.right_modes.shape[1]

    def cluster_of(self, index: int) -> int:
        for k, members in enumerate(self.clusters):
            if index in members:
                return k
        raise IndexError(index)

    @property
    def is_defective(self) -> bool:
        return any(self.defective)


def _cluster(values: np.ndarray, radius: float) -> list[list[int]]:
    """Single-linkage grouping of complex numbers closer than ``radius``."""
    n = len(values)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(values[i] - values[j]) <= radius:
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return sorted(groups.values(), key=lambda g: g[0])


def sort_order(eigenvalues: np.ndarray, tie_tol: float = ZERO_TOL) -> np.ndarray:
    """Indices ordering eigenvalues by decreasing real part.

    Real parts within ``tie_tol`` count as equal; ties go to the smaller
    ``|Im|`` and then to positive imaginary part first.
    """
    ev = np.asarray(eigenvalues)
    first = np.argsort(-ev.real, kind="stable")
    order: list[int] = []
    i = 0
    while i < len(first):
        j = i + 1
        while j < len(first) and ev.real[first[j - 1]] - ev.real[first[j]] <= tie_tol:
            j += 1
        block = [int(k) for k in first[i:j]]

        def cmp(p, q):
            ap, aq = abs(ev.imag[p]), abs(ev.imag[q])
            if abs(ap - aq) > tie_tol:
                return -1 if ap < aq else 1
            return int(np.sign(ev.imag[q]) - np.sign(ev.imag[p])) if max(ap, aq) > tie_tol else 0

        order.extend(sorted(block, key=cmp_to_key(cmp)))
        i = j
    return np.asarray(order, dtype=int)


def spectrum(superop: Superoperator | np.ndarray, max_dim: int = MAX_SUPEROPERATOR_DIM,
             cluster_tol: float = 1e-5, defect_tol: float = DEFECT_TOL) -> Spectrum:
    """Full biorthogonal eigen-decomposition of a Liouvillian.

    Eigenvalues closer than ``cluster_tol * max(1, ||L||)`` are grouped; the
    left/right eigenvectors of each group are biorthogonalised as a block.
    A group whose overlap block is nearly singular (smallest singular value
    below ``defect_tol``) sits at an exceptional point: its eigenvalues are
    replaced by their mean, which is far better conditioned than the
    individual perturbed roots.
    """
    a = superop.matrix if isinstance(superop, Superoperator) else np.asarray(superop, dtype=complex)
    space = superop.model.space if isinstance(superop, Superoperator) else None
    n2 = a.shape[0]
    if n2 > max_dim:
        raise DimensionError(f"superoperator dimension {n2} exceeds maximum {max_dim}")
    d = int(round(np.sqrt(n2)))
    try:
        w, vl, vr = sla.eig(a, left=True, right=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SpectrumError(f"eigensolver failed: {exc}") from exc
    norm_a = max(np.linalg.norm(a, 2), 1.0)
    vr = vr / np.linalg.norm(vr, axis=0)
    vl = vl / np.linalg.norm(vl, axis=0)
    resid = np.linalg.norm(a @ vr - vr * w, axis=0)
    if np.max(resid, initial=0.0) > 1e-8 * norm_a:
        raise SpectrumError(f"eigenvector residual {np.max(resid):.3e} exceeds tolerance")

    w = w.copy()
    groups = _cluster(w, cluster_tol * norm_a)
    cond = np.empty(n2)
    defective_of = np.zeros(n2, dtype=bool)
    for g in groups:
        m = vl[:, g].conj().T @ vr[:, g]
        smin = np.linalg.svd(m, compute_uv=False).min()
        cond[g] = smin
        if smin < defect_tol:
            defective_of[g] = True
            w[g] = np.mean(w[g])
            # pairwise scaling only; the block is (nearly) singular
            diag = np.diag(m)
            for k, idx in enumerate(g):
                if abs(diag[k]) > 0:
                    vl[:, idx] = vl[:, idx] / np.conj(diag[k])
        else:
            vl[:, g] = vl[:, g] @ np.linalg.inv(m).conj().T

    # phase convention: largest-modulus entry of each right mode real positive
    for i in range(n2):
        k = np.argmax(np.abs(vr[:, i]) - 1e-12 * np.arange(n2))
        phase = vr[k, i] / abs(vr[k, i])
        vr[:, i] = vr[:, i] / phase
        vl[:, i] = vl[:, i] / phase

    order = sort_order(w, tie_tol=ZERO_TOL * norm_a)
    w, vl, vr, cond, defective_of = w[order], vl[:, order], vr[:, order], cond[order], defective_of[order]

    # stationary mode at unit trace, its left partner becomes the identity
    tr0 = np.trace(unvec(vr[:, 0], d))
    if abs(w[0]) <= 1e3 * ZERO_TOL * norm_a and abs(tr0) > 1e-12:
        vr[:, 0] = vr[:, 0] / tr0
        vl[:, 0] = vl[:, 0] * np.conj(tr0)

    inverse = np.argsort(order)
    clusters = tuple(tuple(sorted(int(inverse[i]) for i in g)) for g in groups)
    clusters = tuple(sorted(clusters, key=lambda c: c[0]))
    return Spectrum(
        eigenvalues=w,
        right_modes=np.stack([unvec(vr[:, i], d) for i in range(n2)]),
        left_modes=np.stack([unvec(vl[:, i].conj(), d).T for i in range(n2)]),
        biorth_condition=cond,
        clusters=clusters,
        degenerate=tuple(len(c) > 1 for c in clusters),
        defective=tuple(bool(defective_of[c[0]]) for c in clusters),
        space=space,
    )


def eigenvalues(superop: Superoperator | np.ndarray, max_dim: int = MAX_SUPEROPERATOR_DIM) -> np.ndarray:
    """Eigenvalues only, in the frozen sort order (no EP polishing)."""
    a = superop.matrix if isinstance(superop, Superoperator) else np.asarray(superop)
    if a.shape[0] > max_dim:
        raise DimensionError(f"superoperator dimension {a.shape[0]} exceeds maximum {max_dim}")
    w = sla.eigvals(a)
    return w[sort_order(w)]


def spectral_gap(eigvals: Sequence[complex]) -> float:
    """``|Re|`` of the slowest decaying eigenvalue, skipping the one closest to zero."""
    w = np.asarray(eigvals)
    if len(w) < 2:
        raise ValueError("need at least two eigenvalues")
    rest = np.delete(w, np.argmin(np.abs(w)))
    return float(max(0.0, -np.max(rest.real)))


def liouvillian_gap(spec: Spectrum) -> float:
    """``|Re lambda_1|``, the asymptotic relaxation rate."""
    return float(abs(spec.eigenvalues[1].real))


def _zero_count(spec: Spectrum) -> int:
    return int(np.sum(np.abs(spec.eigenvalues) <= ZERO_TOL))


def stationary_state(spec: Spectrum) -> DensityMatrix:
    count = _zero_count(spec)
    if count != 1:
        raise DegenerateStationaryError(
            f"expected exactly one zero eigenvalue, found {count}")
    r = spec.right_modes[0]
    r = r / np.trace(r)
    r = 0.5 * (r + r.conj().T)
    space = spec.space or make_space([("system", spec.dim)])
    return DensityMatrix(space, r)


def steady_state(superop: Superoperator) -> DensityMatrix:
    """Stationary state from a linear solve, without a full eigendecomposition.

    One row of ``L vec(rho) = 0`` is replaced by the trace condition.  Raises
    when the null space is not one-dimensional.
    """
    a = np.array(superop.matrix)
    d = superop.dim
    sv = np.linalg.svd(a, compute_uv=False)
    scale = max(sv[0], 1.0)
    if sv[-2] <= 1e-11 * scale:
        raise DegenerateStationaryError("Liouvillian null space is not one-dimensional")
    # the rho_00 equation is a combination of the other population equations
    a[0] = vec(np.eye(d))
    b = np.zeros(d * d, dtype=complex)
    b[0] = 1.0
    rho = unvec(np.linalg.solve(a, b), d)
    rho = 0.5 * (rho + rho.conj().T)
    return DensityMatrix(superop.model.space, rho / np.trace(rho).real)


# ---------------------------------------------------------------------------
# mode decomposition and spectral evolution

@dataclass(frozen=True, eq=False)
class ModeDecomposition:
    stationary: DensityMatrix
    coefficients: np.ndarray  # a_1, a_2, ... in spectrum order

    def reconstruct(self, spec: Spectrum) -> np.ndarray:
        return self.stationary.matrix + np.tensordot(self.coefficients, spec.right_modes[1:], axes=1)


def _require_diagonalizable(spec: Spectrum):
    bad = [k for k, flag in enumerate(spec.defective) if flag]
    if bad:
        k = bad[0]
        centre = np.mean(spec.eigenvalues[list(spec.clusters[k])])
        raise DefectiveSpectrumError(
            f"spectrum is defective at eigenvalue {centre:.6g} "
            f"(cluster {spec.clusters[k]}); mode decomposition undefined at an exceptional point")


def mode_decomposition(spec: Spectrum, rho_in: DensityMatrix | np.ndarray) -> ModeDecomposition:
    """Coefficients ``a_i = Tr[L_i rho_in]`` of the initial state on the decay modes."""
    _require_diagonalizable(spec)
    r = rho_in.matrix if isinstance(rho_in, DensityMatrix) else np.asarray(rho_in)
    coeffs = np.einsum("kij,ji->k", spec.left_modes, r)
    return ModeDecomposition(stationary_state(spec), coeffs[1:])


def evolve_spectral(decomp: ModeDecomposition, spec: Spectrum, times: Sequence[float]) -> Trajectory:
    """``rho(t) = rho_ss + sum_i a_i exp(lambda_i t) R_i``."""
    _require_diagonalizable(spec)
    t = np.asarray(times, dtype=float)
    phases = np.exp(np.outer(t, spec.eigenvalues[1:])) * decomp.coefficients
    states = decomp.stationary.matrix[None] + np.tensordot(phases, spec.right_modes[1:], axes=1)
    traj = Trajectory(t, states, space=spec.space)
    diag = traj.diagnostics()
    if diag["hermiticity"] > 1e-8 or diag["trace"] > 1e-8:
        raise SpectrumError(f"spectral reconstruction lost Hermiticity/trace: {diag}")
    return traj


def split_mode(r: np.ndarray, lam: complex, tol: float = 1e-8):
    """Write a decay mode through Hermitian pieces.

    Real eigenvalue: return ``(R_plus, R_minus)``, both positive
    semidefinite, with ``R ~ R_plus - R_minus``; when ``R_plus`` has nonzero
    trace both parts are divided by it so they are proper density matrices.
    Complex eigenvalue: return the Hermitian pair ``R + R^+`` and
    ``i(R - R^+)``.
    """
    r = np.asarray(r, dtype=complex)
    if abs(np.imag(lam)) > ZERO_TOL:
        return r + r.conj().T, 1j * (r - r.conj().T)
    nrm = np.linalg.norm(r)
    if nrm == 0:
        raise ValueError("zero matrix has no decomposition")
    # R = e^{i theta} X with X Hermitian  =>  <R^+, R> = e^{2 i theta} ||R||^2
    c = np.vdot(r.conj().T, r) / nrm**2
    x = r * np.exp(-0.5j * np.angle(c))
    if np.linalg.norm(x - x.conj().T) > tol * nrm:
        raise ValueError("mode is not Hermitian up to a phase")
    x = 0.5 * (x + x.conj().T)
    p, psi = np.linalg.eigh(x)
    pos = p >= 0
    r_plus = (psi[:, pos] * p[pos]) @ psi[:, pos].conj().T
    r_minus = (psi[:, ~pos] * -p[~pos]) @ psi[:, ~pos].conj().T
    scale = np.trace(r_plus).real
    if scale > 0:
        r_plus, r_minus = r_plus / scale, r_minus / scale
    return r_plus, r_minus


# ---------------------------------------------------------------------------
# exceptional points

@dataclass(frozen=True)
class EPCluster:
    center: complex
    algebraic: int
    geometric: int
    blocks: tuple[int, ...]

    @property
    def order(self) -> int:
        return max(self.blocks)

    @property
    def is_exceptional(self) -> bool:
        return self.order > 1


@dataclass(frozen=True)
class EPReport:
    clusters: tuple[EPCluster, ...]

    @property
    def ep_orders(self) -> tuple[int, ...]:
        return tuple(c.order for c in self.clusters)

    def exceptional(self) -> tuple[EPCluster, ...]:
        return tuple(c for c in self.clusters if c.is_exceptional)

    def near(self, value: complex, tol: float = 1e-6) -> EPCluster:
        best = min(self.clusters, key=lambda c: abs(c.center - value))
        if abs(best.center - value) > tol:
            raise KeyError(f"no cluster within {tol} of {value}")
        return best


def _rank(m: np.ndarray, threshold: float) -> int:
    return int(np.sum(np.linalg.svd(m, compute_uv=False) > threshold))


def detect_ep(superop: Superoperator | np.ndarray, tolerance: float = 1e-7,
              cluster_tol: float = 1e-4, max_dim: int = MAX_SUPEROPERATOR_DIM) -> EPReport:
    """Jordan structure of every eigenvalue cluster.

    Eigenvalues closer than ``cluster_tol * max(1, ||L||)`` form a cluster.
    At the cluster mean ``c`` the ranks ``r_k`` of ``(L - c)^k`` are counted
    with singular-value threshold ``tolerance * max(1, ||L - c||)^k``; the
    number of Jordan blocks of size >= k is ``r_{k-1} - r_k``.
    """
    a = superop.matrix if isinstance(superop, Superoperator) else np.asarray(superop, dtype=complex)
    n = a.shape[0]
    if n > max_dim:
        raise DimensionError(f"superoperator dimension {n} exceeds maximum {max_dim}")
    w = sla.eigvals(a)
    norm_a = max(np.linalg.norm(a, 2), 1.0)
    radius = cluster_tol * norm_a
    groups = _cluster(w, radius)
    centers = [np.mean(w[g]) for g in groups]
    for i in range(len(groups)):
        for j in range(i + 1, len(groups)):
            gap = np.min(np.abs(w[groups[i]][:, None] - w[groups[j]][None, :]))
            if gap <= 2 * radius:
                raise EPAmbiguityError(
                    f"clusters at {centers[i]:.6g} and {centers[j]:.6g} are only {gap:.3e} apart; "
                    f"cluster radius {radius:.3e} cannot separate them")
    eye = np.eye(n, dtype=complex)
    out = []
    for g, c in zip(groups, centers):
        alg = len(g)
        b = a - c * eye
        nb = max(np.linalg.norm(b, 2), 1.0)
        ranks = [n]
        power = eye
        for k in range(1, alg + 2):
            power = power @ b
            ranks.append(_rank(power, tolerance * nb**k))
            if ranks[-1] == ranks[-2] or n - ranks[-1] >= alg:
                break
        at_least = [ranks[k - 1] - ranks[k] for k in range(1, len(ranks))] + [0]
        blocks: list[int] = []
        for k in range(1, len(at_least)):
            blocks.extend([k] * (at_least[k - 1] - at_least[k]))
        blocks.sort(reverse=True)
        if sum(blocks) != alg:
            raise EPAmbiguityError(
                f"cluster at {c:.6g} spans more than the rank tolerance resolves "
                f"(blocks {blocks} vs multiplicity {alg}); lower cluster_tol or raise tolerance")
        out.append(EPCluster(complex(c), alg, n - ranks[1], tuple(blocks)))
    order = sort_order(np.array([cl.center for cl in out]), tie_tol=radius)
    return EPReport(tuple(out[i] for i in order))


# ---------------------------------------------------------------------------
# driven, decaying three-level system  |a>, |b>, |c>

A, B, C = 0, 1, 2


def three_level_space() -> HilbertSpace:
    return make_space([("atom", 3)])


def three_level_model(gamma: float, omega: float) -> LindbladModel:
    """``H = (omega/2)(|b><c| + |c><b|)``, single jump ``sqrt(gamma)|a><c|``."""
    space = three_level_space()
    h = np.zeros((3, 3), dtype=complex)
    h[B, C] = h[C, B] = omega / 2
    j = np.zeros((3, 3), dtype=complex)
    j[A, C] = np.sqrt(gamma)
    return LindbladModel(space, Operator(space, h), (Operator(space, j),))


@dataclass(frozen=True, eq=False)
class ThreeLevelReference:
    """Closed-form eigensystem of the three-level Liouvillian.

    ``eigenvalues`` follow the textbook labelling ``lambda_0 .. lambda_8``,
    not the numerical sort order.  ``right_modes``/``left_modes`` are the
    unnormalised closed forms; the ``*_normalized`` copies have unit-norm
    right modes and left modes scaled to ``Tr[L_i R_i] = 1`` (left as printed
    where that trace vanishes, i.e. at the exceptional point).
    """

    kappa: complex
    eigenvalues: np.ndarray
    right_modes: np.ndarray = field(repr=False)
    left_modes: np.ndarray = field(repr=False)
    right_normalized: np.ndarray = field(repr=False)
    left_normalized: np.ndarray = field(repr=False)


def three_level_reference(gamma: float, omega: float) -> ThreeLevelReference:
    if omega <= 0 or gamma < 0:
        raise ValueError("need gamma >= 0 and omega > 0")
    g, o = complex(gamma), complex(omega)
    k = np.sqrt(g * g - 4 * o * o)
    lam = np.array([0, -(g - k) / 4, -(g - k) / 4, -(g + k) / 4, -(g + k) / 4,
                    -(g - k) / 2, -(g + k) / 2, -g / 2, -g / 2], dtype=complex)
    ap, am = (g + k) / (2 * o), (g - k) / (2 * o)
    i = 1j

    def m(rows):
        return np.array(rows, dtype=complex)

    with np.errstate(divide="ignore", invalid="ignore"):
        r5a = -2 * g / (g - k) if g != k else np.inf
        r6a = -2 * g / (g + k) if g != -k else np.inf
    right = [
        m([[1, 0, 0], [0, 0, 0], [0, 0, 0]]),
        m([[0, -i * ap, 1], [i * ap, 0, 0], [1, 0, 0]]),
        m([[0, ap, i], [ap, 0, 0], [-i, 0, 0]]),
        m([[0, -i * am, 1], [i * am, 0, 0], [1, 0, 0]]),
        m([[0, am, i], [am, 0, 0], [-i, 0, 0]]),
        m([[r5a, 0, 0], [0, -r5a - 1, i * ap], [0, -i * ap, 1]]),
        m([[r6a, 0, 0], [0, -r6a - 1, i * am], [0, -i * am, 1]]),
        m([[-2, 0, 0], [0, 1, i * g / (2 * o)], [0, -i * g / (2 * o), 1]]),
        m([[0, 0, 0], [0, 0, 1], [0, 1, 0]]),
    ]
    left = [
        np.eye(3, dtype=complex),
        m([[0, i * ap, 1], [-i * ap, 0, 0], [1, 0, 0]]),
        m([[0, ap, -i], [ap, 0, 0], [i, 0, 0]]),
        m([[0, i * am, 1], [-i * am, 0, 0], [1, 0, 0]]),
        m([[0, am, -i], [am, 0, 0], [i, 0, 0]]),
        m([[0, 0, 0], [0, -r5a - 1, -i * ap], [0, i * ap, 1]]),
        m([[0, 0, 0], [0, -r6a - 1, -i * am], [0, i * am, 1]]),
        m([[0, 0, 0], [0, 1, -i * g / (2 * o)], [0, i * g / (2 * o), 1]]),
        m([[0, 0, 0], [0, 0, 1], [0, 1, 0]]),
    ]
    right, left = np.stack(right), np.stack(left)
    rn, ln = right.copy(), left.copy()
    for idx in range(9):
        if np.all(np.isfinite(rn[idx])):
            rn[idx] /= np.linalg.norm(rn[idx]) if idx else np.trace(rn[idx])
        pair = np.trace(ln[idx] @ rn[idx])
        if np.isfinite(pair) and abs(pair) > 1e-12:
            ln[idx] /= pair
    return ThreeLevelReference(k, lam, right, left, rn, ln)
