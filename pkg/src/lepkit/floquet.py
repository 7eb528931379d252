"""Piecewise-constant periodic dissipation.

Within each period ``T = 2 pi / omega`` the dissipation is switched off for
``0 <= t < tau`` and on for ``tau <= t < T``.  The one-period propagator
(monodromy) is therefore ``P = exp(L_on (T - tau)) exp(L_off tau)``.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla

from .errors import LepkitError, SpectrumError
from .liouville import LindbladModel, build_superoperator, spectral_gap, three_level_model, unvec, vec
from .liouville import eigenvalues as sorted_eigenvalues
from .qops import DensityMatrix
from .trajectory import Trajectory

STATIONARY_TOL = 1e-9
DISTINCT_TOL = 1e-7
CLUSTER_TOL = 1e-4


@dataclass(frozen=True)
class FloquetProtocol:
    omega: float
    tau: float
    gamma_on: float

    def __post_init__(self):
        if self.omega <= 0:
            raise ValueError("modulation frequency must be positive")
        if not 0 <= self.tau < self.period:
            raise ValueError(f"need 0 <= tau < T (tau={self.tau}, T={self.period})")
        if self.gamma_on < 0:
            raise ValueError("dissipation rate must be nonnegative")

    @property
    def period(self) -> float:
        return 2 * math.pi / self.omega

    @classmethod
    def from_fraction(cls, omega: float, fraction: float, gamma_on: float) -> "FloquetProtocol":
        """Protocol with ``tau = fraction * T``."""
        if not 0 <= fraction < 1:
            raise ValueError("fraction must lie in [0, 1)")
        return cls(omega, fraction * 2 * math.pi / omega, gamma_on)


@dataclass(frozen=True, eq=False)
class Monodromy:
    matrix: np.ndarray = field(repr=False)
    period: float

    @property
    def eigenvalues(self) -> np.ndarray:
        return sla.eigvals(self.matrix)

    def unit_eigenvalue_count(self, tol: float = STATIONARY_TOL) -> int:
        return int(np.sum(np.abs(self.eigenvalues - 1) <= tol))

    def spectral_radius(self) -> float:
        return float(np.max(np.abs(self.eigenvalues)))


def monodromy(model_on: LindbladModel, model_off: LindbladModel, protocol: FloquetProtocol) -> Monodromy:
    """One-period propagator, off phase first."""
    t = protocol.period
    if protocol.tau >= t:
        raise ValueError("off-duty interval must be shorter than the period")
    if model_on.space != model_off.space:
        raise ValueError("on and off models must share a space")
    l_on = build_superoperator(model_on).matrix
    l_off = build_superoperator(model_off).matrix
    p = sla.expm(l_on * (t - protocol.tau))
    if protocol.tau > 0:
        p = p @ sla.expm(l_off * protocol.tau)
    return Monodromy(p, t)


def three_level_monodromy(omega_rabi: float, protocol: FloquetProtocol) -> Monodromy:
    on = three_level_model(protocol.gamma_on, omega_rabi)
    return monodromy(on, on.without_dissipation(), protocol)


def evolve_piecewise(model_on: LindbladModel, model_off: LindbladModel, protocol: FloquetProtocol,
                     rho0: DensityMatrix | np.ndarray, times: Sequence[float]) -> Trajectory:
    """Exact evolution under the switched generator, sampled at ``times``.

    The state is carried from period boundary to period boundary with the
    monodromy and finished with the partial-period propagator, so no
    switching instant is ever stepped over.
    """
    t = np.asarray(times, dtype=float)
    if np.any(np.diff(t) <= 0) or np.any(t < 0):
        raise ValueError("times must be nonnegative and strictly increasing")
    l_on = build_superoperator(model_on).matrix
    l_off = build_superoperator(model_off).matrix
    period, tau = protocol.period, protocol.tau
    p = monodromy(model_on, model_off, protocol).matrix
    exp_off_tau = sla.expm(l_off * tau)
    r0 = rho0.matrix if isinstance(rho0, DensityMatrix) else np.asarray(rho0, dtype=complex)
    d = r0.shape[0]
    v_boundary, k_boundary = vec(r0).astype(complex), 0
    out = np.empty((len(t), d, d), dtype=complex)
    for i, ti in enumerate(t):
        k = int(ti // period)
        while k_boundary < k:
            v_boundary = p @ v_boundary
            k_boundary += 1
        s = ti - k * period
        if s < tau:
            u = sla.expm(l_off * s)
        else:
            u = sla.expm(l_on * (s - tau)) @ exp_off_tau
        out[i] = unvec(u @ v_boundary, d)
    return Trajectory(t, out, space=model_on.space)


def _nonstationary(ev: np.ndarray) -> np.ndarray:
    """Drop the one eigenvalue closest to 1; it must lie within tolerance."""
    k = int(np.argmin(np.abs(ev - 1)))
    if abs(ev[k] - 1) > STATIONARY_TOL:
        raise SpectrumError(f"no stationary eigenvalue: closest is {ev[k]:.6g}")
    return np.delete(ev, k)


def _leading_modulus(rest: np.ndarray, cluster_tol: float) -> float:
    """Modulus of the leading eigenvalue, averaged over its near-degenerate cluster.

    At an exceptional point the roots of a Jordan block of size k scatter by
    about eps**(1/k); their mean is accurate to eps.
    """
    k = int(np.argmax(np.abs(rest)))
    radius = cluster_tol * max(abs(rest[k]), 1e-300)
    members = {k}
    grew = True
    while grew:
        grew = False
        for i, v in enumerate(rest):
            if i not in members and min(abs(v - rest[j]) for j in members) <= radius:
                members.add(i)
                grew = True
    return float(abs(np.mean(rest[sorted(members)])))


def floquet_gap(mono: Monodromy, cluster_tol: float = CLUSTER_TOL) -> float:
    """``-ln(r*) / T`` with ``r*`` the largest non-stationary eigenvalue modulus.

    ``r*`` is taken from the mean of the leading eigenvalue's cluster (members
    within ``cluster_tol * r*``), which stays accurate at exceptional points.
    """
    rest = _nonstationary(mono.eigenvalues)
    if not len(rest):
        raise SpectrumError("monodromy has no non-stationary eigenvalue")
    r = _leading_modulus(rest, cluster_tol)
    if r >= 1.0:
        return 0.0
    if r == 0.0:
        return math.inf
    return -math.log(r) / mono.period


def _distinct(values: np.ndarray, tol: float) -> list[complex]:
    """Representatives of ``values`` after merging entries closer than ``tol``."""
    reps: list[complex] = []
    for v in values:
        if all(abs(v - r) > tol for r in reps):
            reps.append(complex(v))
    return reps


def mu_parameter(mono: Monodromy, distinct_tol: float = DISTINCT_TOL) -> float:
    """Modulus splitting ``(|l+| - |l-|) / (|l+| + |l-|)`` of the leading eigenvalue pair.

    Degenerate copies are merged first (relative tolerance ``distinct_tol``),
    then the two largest-modulus distinct non-stationary eigenvalues form the
    pair.  A complex-conjugate pair has equal moduli and gives 0.
    """
    rest = _nonstationary(mono.eigenvalues)
    rest = rest[np.argsort(-np.abs(rest), kind="stable")]
    scale = max(float(np.abs(rest[0])), 1e-300) if len(rest) else 1.0
    reps = _distinct(rest, distinct_tol * scale)
    if len(reps) < 2:
        raise LepkitError("fewer than two distinct non-stationary eigenvalues")
    a, b = abs(reps[0]), abs(reps[1])
    if a + b == 0:
        return 0.0
    return float(max(0.0, (a - b) / (a + b)))


def floquet_generator(mono: Monodromy) -> np.ndarray:
    """Principal ``log(P) / T``; refuses when an eigenvalue sits on the negative real axis."""
    ev = mono.eigenvalues
    bad = (np.abs(ev.imag) <= 1e-12) & (ev.real < 0)
    if np.any(bad):
        raise LepkitError(
            f"monodromy eigenvalue {ev[bad][0]:.6g} on the negative real axis; principal log undefined")
    log_p = sla.logm(mono.matrix)
    return np.asarray(log_p) / mono.period


def static_gap(model: LindbladModel) -> float:
    return spectral_gap(sorted_eigenvalues(build_superoperator(model)))


# ---------------------------------------------------------------------------
# phase diagram over (omega, gamma)

@dataclass(frozen=True, eq=False)
class PhaseDiagram:
    omegas: np.ndarray
    gammas: np.ndarray
    mu: np.ndarray  # shape (len(omegas), len(gammas)), row-major in omega
    gap: np.ndarray


def _phase_point(args):
    omega_rabi, omega_mod, gamma, fraction = args
    mono = three_level_monodromy(omega_rabi, FloquetProtocol.from_fraction(omega_mod, fraction, gamma))
    return mu_parameter(mono), floquet_gap(mono)


def phase_diagram(omegas: Sequence[float], gammas: Sequence[float], fraction: float = 1 / 2.5,
                  omega_rabi: float = 1.0, workers: int = 1,
                  point: Callable | None = None) -> PhaseDiagram:
    """``(mu, g_F)`` on the grid ``omegas x gammas`` for the three-level model.

    ``point`` may replace the per-point evaluation (it receives
    ``(omega_rabi, omega_mod, gamma, fraction)``); results are assembled by
    grid index whatever the completion order.
    """
    if not 0 < fraction < 1:
        raise ValueError("fraction must lie in (0, 1)")
    om, ga = np.asarray(omegas, float), np.asarray(gammas, float)
    if not (np.all(np.isfinite(om)) and np.all(np.isfinite(ga))):
        raise ValueError("grid must be finite")
    fn = point or _phase_point
    tasks = [(omega_rabi, w, g, fraction) for w in om for g in ga]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        results = [fn(t) for t in tasks]
    arr = np.asarray(results, dtype=float).reshape(len(om), len(ga), 2)
    return PhaseDiagram(om, ga, arr[..., 0], arr[..., 1])
