"""Sideband and EIT ground-state cooling of a trapped ion.

The sideband model lives on ``atom (g, e) x phonon (|0>..|n_cut>)`` with

    H = nu a^+a + Delta |e><e| - (Omega_g / 2) sigma_x + (eta Omega_g / 2)(a^+ + a) sigma_y

and a single decay channel ``sqrt(gamma) |g><e|``.  ``Omega = eta Omega_g``
is the red-sideband coupling.  Frequencies are in units of the trap
frequency unless the caller chooses otherwise.

The four-level subsystem ``{|g,1>, |g,0>, |e,1>, |e,0>}`` has closed-form
Liouvillian eigenvalues; :func:`effective_subsystem_model` builds the
carrier-dressed four-level Lindbladian they belong to, which serves as an
independent numerical check.
"""

from __future__ import annotations

import cmath
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np
import scipy.linalg as sla

from .errors import ConvergenceError
from .liouville import (LindbladModel, build_superoperator, eigenvalues, spectral_gap,
                        steady_state)
from .qops import (DensityMatrix, HilbertSpace, Operator, annihilation_operator, embed,
                   expectation, make_space, sigma_x, sigma_y, tensor, thermal_occupations)
from .trajectory import Trajectory

G, E = 0, 1
ETA_MAX = 0.3
TRUNCATION_TOL = 1e-6
CONVERGENCE_RTOL = 0.01


class TruncationWarning(UserWarning):
    """Population reached the highest retained Fock state."""


@dataclass(frozen=True)
class SidebandParams:
    nu: float
    delta_detuning: float
    omega_g: float
    eta: float
    gamma: float
    n_cut: int = 5

    def __post_init__(self):
        if not 0 < self.eta <= ETA_MAX:
            raise ValueError(f"Lamb-Dicke parameter must lie in (0, {ETA_MAX}], got {self.eta}")
        if int(self.n_cut) != self.n_cut or self.n_cut < 2:
            raise ValueError("n_cut must be an integer >= 2")
        if self.nu <= 0:
            raise ValueError("trap frequency must be positive")
        if self.gamma < 0 or self.omega_g < 0:
            raise ValueError("gamma and omega_g must be nonnegative")
        for name in ("nu", "delta_detuning", "omega_g", "eta", "gamma"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @property
    def omega(self) -> float:
        """Red-sideband coupling ``eta * omega_g``."""
        return self.eta * self.omega_g

    @classmethod
    def from_ratios(cls, omega_over_gamma: float, delta_over_nu: float, gamma: float = 0.032,
                    eta: float = 0.1, nu: float = 1.0, n_cut: int = 5) -> "SidebandParams":
        """Parameters from the ``(Omega/gamma, Delta/nu)`` plane."""
        return cls(nu, delta_over_nu * nu, omega_over_gamma * gamma / eta, eta, gamma, n_cut)

    def with_cutoff(self, n_cut: int) -> "SidebandParams":
        return replace(self, n_cut=n_cut)


# (Omega/gamma, Delta/nu) of the four reference points on the gap map
REFERENCE_POINTS = {
    "A": (0.5, 0.987),
    "B": (1.0, 0.945),
    "C": (1.0, 0.987),
    "D": (0.2, 1.0),
}


def reference_point(name: str, n_cut: int = 5, gamma: float = 0.032, eta: float = 0.1,
                    nu: float = 1.0) -> SidebandParams:
    w, d = REFERENCE_POINTS[name]
    return SidebandParams.from_ratios(w, d, gamma=gamma, eta=eta, nu=nu, n_cut=n_cut)


def ac_stark_shift(params: SidebandParams) -> float:
    """Carrier-induced shift ``(sqrt(Omega_g^2 + Delta^2) - Delta) / 2``."""
    return 0.5 * (math.hypot(params.omega_g, params.delta_detuning) - params.delta_detuning)


def sideband_detuning(params: SidebandParams) -> float:
    """``beta = 2 delta + Delta - nu``; zero puts the red sideband on dressed resonance."""
    return 2 * ac_stark_shift(params) + params.delta_detuning - params.nu


# ---------------------------------------------------------------------------
# models

def sideband_space(n_cut: int) -> HilbertSpace:
    return make_space([("atom", 2), ("phonon", n_cut + 1)])


def number_operator(space: HilbertSpace) -> Operator:
    a = annihilation_operator(space.dim_of("phonon") - 1)
    return embed(a.dag() @ a, space)


def build_sideband_model(params: SidebandParams) -> LindbladModel:
    space = sideband_space(params.n_cut)
    a = annihilation_operator(params.n_cut).matrix
    proj_e = np.diag([0.0, 1.0]).astype(complex)
    h = (params.nu * tensor(space, {"phonon": a.conj().T @ a}).matrix
         + params.delta_detuning * tensor(space, {"atom": proj_e}).matrix
         - 0.5 * params.omega_g * tensor(space, {"atom": sigma_x()}).matrix
         + 0.5 * params.omega * tensor(space, {"atom": sigma_y(), "phonon": a + a.conj().T}).matrix)
    lower = np.zeros((2, 2), dtype=complex)
    lower[G, E] = 1.0
    jump = math.sqrt(params.gamma) * tensor(space, {"atom": lower}).matrix
    return LindbladModel(space, Operator(space, h), (Operator(space, jump),))


def four_level_model(gamma: float, omega: float, alpha: float, beta: float) -> LindbladModel:
    """Dressed four-level model on ``{g, e} x {|0>, |1>}``.

    Level energies relative to ``|g,0>``: ``|g,1>`` at ``(alpha - beta)/2``
    (the trap frequency), ``|e,0>`` at ``(alpha + beta)/2`` (the dressed
    atomic splitting) and ``|e,1>`` at ``alpha``.  Only the red sideband
    ``|e,0> <-> |g,1>`` is driven, with strength ``omega / 2``; the decay is
    ``sqrt(gamma) |g><e|``.
    """
    space = sideband_space(1)
    nu, split = 0.5 * (alpha - beta), 0.5 * (alpha + beta)
    h = np.zeros((4, 4), dtype=complex)
    for atom, energy in ((G, 0.0), (E, split)):
        for n in (0, 1):
            k = space.basis_index(atom=atom, phonon=n)
            h[k, k] = energy + nu * n
    e0, g1 = space.basis_index(atom=E, phonon=0), space.basis_index(atom=G, phonon=1)
    h[e0, g1] = h[g1, e0] = 0.5 * omega
    lower = np.zeros((2, 2), dtype=complex)
    lower[G, E] = 1.0
    jump = math.sqrt(gamma) * tensor(space, {"atom": lower}).matrix
    return LindbladModel(space, Operator(space, h), (Operator(space, jump),))


def effective_subsystem_model(params: SidebandParams) -> LindbladModel:
    """Carrier-dressed four-level model for ``params``.

    ``|g>`` is shifted by ``-delta`` and ``|e>`` by ``+delta``, so the red
    sideband is detuned by ``beta``.  Its Liouvillian spectrum is exactly the
    one returned by :func:`subsystem_spectrum`.
    """
    return four_level_model(params.gamma, params.omega, _alpha(params), sideband_detuning(params))


def _alpha(params: SidebandParams) -> float:
    return params.delta_detuning + 2 * ac_stark_shift(params) + params.nu


# ---------------------------------------------------------------------------
# closed-form four-level spectrum

@dataclass(frozen=True, eq=False)
class SubsystemSpectrum:
    eigenvalues: np.ndarray = field(repr=False)
    kappa_prime: complex
    alpha: float
    beta: float
    epsilon: complex
    epsilon_prime: complex
    gamma: float

    @property
    def gap(self) -> float:
        return float((0.25 * (self.gamma - self.kappa_prime)).real)


def _kappa_prime(gamma: float, omega: float, beta: float) -> complex:
    return cmath.sqrt((gamma - 2j * beta) ** 2 - 4 * omega * omega)


def _epsilons(g: float, w: float, beta: float) -> tuple[complex, complex]:
    """``epsilon, epsilon' = sqrt(2A -/+ 2R)`` without cancellation.

    ``A = g^2 - 4 beta^2 - 4 w^2`` and ``R^2 = (4(beta^2 + w^2) + g^2)^2 - 16 g^2 w^2``,
    expanded as a sum of nonnegative terms.  The larger-magnitude square is
    formed directly and the other from ``epsilon^2 epsilon'^2 = -64 g^2 beta^2``.
    """
    a = g * g - 4 * beta * beta - 4 * w * w
    r = math.sqrt((4 * w * w - g * g) ** 2 + 8 * beta * beta * (4 * w * w + g * g) + 16 * beta**4)
    product = -64 * g * g * beta * beta
    if a >= 0:
        big = 2 * a + 2 * r
        small = product / big if big else 0.0
        return cmath.sqrt(small), cmath.sqrt(big)
    big = 2 * a - 2 * r
    small = product / big
    return cmath.sqrt(big), cmath.sqrt(small)


def subsystem_closed_form(gamma: float, omega: float, alpha: float, beta: float) -> SubsystemSpectrum:
    """The sixteen closed-form eigenvalues ``lambda_0 .. lambda_15`` of the subsystem.

    ``kappa' = sqrt((gamma - 2 i beta)^2 - 4 Omega^2)`` with the principal
    branch.  This sign of ``beta`` is the one the dressed four-level
    Lindbladian actually produces; the conjugate choice gives the same gap
    but the wrong imaginary parts for ``beta != 0``.
    """
    g, w = gamma, omega
    kp = _kappa_prime(g, w, beta)
    eps, eps_p = _epsilons(g, w, beta)
    l1 = -(g - kp) / 4 + 0.5j * alpha
    l3 = -(g + kp) / 4 + 0.5j * alpha
    l5 = -g / 2 + 1j * alpha
    l11 = -(3 * g - kp) / 4 - 0.5j * alpha
    l13 = -(3 * g + kp) / 4 - 0.5j * alpha
    ev = np.array([
        0.0,
        l1, np.conj(l1),
        l3, np.conj(l3),
        l5, np.conj(l5),
        -(2 * g - eps) / 4, -(2 * g + eps) / 4,
        -(2 * g - eps_p) / 4, -(2 * g + eps_p) / 4,
        l11, np.conj(l11),
        l13, np.conj(l13),
        -g,
    ], dtype=complex)
    return SubsystemSpectrum(ev, kp, alpha, beta, eps, eps_p, g)


def subsystem_spectrum(params: SidebandParams) -> SubsystemSpectrum:
    """Closed-form subsystem spectrum at ``Omega = eta Omega_g`` and the carrier-shifted ``beta``."""
    return subsystem_closed_form(params.gamma, params.omega, _alpha(params), sideband_detuning(params))


def subsystem_gap(params: SidebandParams) -> float:
    """``Re[(gamma - kappa') / 4]``."""
    return float((0.25 * (params.gamma - _kappa_prime(params.gamma, params.omega,
                                                       sideband_detuning(params)))).real)


class LEPCondition(NamedTuple):
    residual: float
    omega_g_star: float
    solvable: bool
    message: str = ""


def lep_condition(params: SidebandParams) -> LEPCondition:
    """Distance from the dressed red-sideband resonance ``Omega_g^2 + Delta^2 = nu^2``.

    ``omega_g_star = sqrt(nu^2 - Delta^2)`` is the carrier Rabi frequency that
    puts the current detuning on resonance.  For ``Delta > nu`` there is no
    real solution and ``omega_g_star`` is nan.
    """
    nu, d = params.nu, params.delta_detuning
    residual = params.omega_g**2 + d**2 - nu**2
    if d > nu:
        return LEPCondition(residual, math.nan, False,
                            f"detuning {d:g} exceeds trap frequency {nu:g}: no real carrier Rabi frequency")
    if d < 0:
        return LEPCondition(residual, math.sqrt(nu * nu - d * d), True,
                            "negative detuning: resonance only reachable at large carrier drive")
    return LEPCondition(residual, math.sqrt(nu * nu - d * d), True)


# ---------------------------------------------------------------------------
# full-model observables

def full_gap(params: SidebandParams) -> float:
    """Spectral gap of the truncated sideband Liouvillian."""
    return spectral_gap(eigenvalues(build_superoperator(build_sideband_model(params))))


def thermal_initial_state(params: SidebandParams, nbar: float = 1.0) -> DensityMatrix:
    """``|g><g|`` times a thermal phonon state truncated at ``n_cut``."""
    space = sideband_space(params.n_cut)
    atom = np.diag([1.0, 0.0]).astype(complex)
    phonon = np.diag(thermal_occupations(nbar, params.n_cut)).astype(complex)
    return DensityMatrix(space, tensor(space, {"atom": atom, "phonon": phonon}).matrix)


def _top_fock_population(states: np.ndarray, space: HilbertSpace) -> np.ndarray:
    top = space.dim_of("phonon") - 1
    idx = [space.basis_index(atom=a, phonon=top) for a in (G, E)]
    return np.sum(states[:, idx, idx].real, axis=1)


def mean_phonon_trajectory(params: SidebandParams, rho0: DensityMatrix | np.ndarray | None = None,
                           t_final: float = 1000.0, dt: float = 1.0,
                           keep_states: bool = True) -> Trajectory:
    """``<a^+a>(t)`` under the full model, sampled every ``dt``.

    Propagation is exact: one ``exp(L dt)`` is applied repeatedly, so ``dt``
    only sets the sampling resolution.  The default initial state is
    :func:`thermal_initial_state` with unit mean occupation.  A
    :class:`TruncationWarning` is issued when the top Fock level holds more
    than ``1e-6`` of the population at any sample.
    """
    if dt <= 0 or t_final <= 0:
        raise ValueError("dt and t_final must be positive")
    model = build_sideband_model(params)
    sup = build_superoperator(model)
    rho = thermal_initial_state(params) if rho0 is None else rho0
    r = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    if r.shape != (model.dim, model.dim):
        raise ValueError("initial state does not match the model space")
    n_steps = max(1, math.ceil(t_final / dt - 1e-9))
    h = t_final / n_steps
    step = sla.expm(sup.matrix * h)
    d = model.dim
    states = np.empty((n_steps + 1, d, d), dtype=complex)
    v = r.ravel().astype(complex)
    states[0] = r
    for k in range(1, n_steps + 1):
        v = step @ v
        states[k] = v.reshape(d, d)
    n_op = number_operator(model.space).matrix
    n_t = np.einsum("kij,ji->k", states, n_op).real
    top = _top_fock_population(states, model.space)
    if np.max(top) > TRUNCATION_TOL:
        warnings.warn(f"top Fock level population reached {np.max(top):.2e}; increase n_cut",
                      TruncationWarning, stacklevel=2)
    times = np.arange(n_steps + 1) * h
    return Trajectory(times, states if keep_states else None, {"n": n_t}, space=model.space)


def stationary_phonon_number(params: SidebandParams) -> float:
    sup = build_superoperator(build_sideband_model(params))
    rho = steady_state(sup)
    return float(expectation(rho, number_operator(sup.model.space)).real)


def cooling_limit(params: SidebandParams, check_convergence: bool = True) -> float:
    """Stationary ``<a^+a>`` of the full model.

    With ``check_convergence`` the value is recomputed at twice the cutoff
    and :class:`ConvergenceError` is raised when the two differ by more than
    1 %; the result at the requested cutoff is returned.
    """
    n = stationary_phonon_number(params)
    if check_convergence:
        n2 = stationary_phonon_number(params.with_cutoff(2 * params.n_cut))
        if abs(n2 - n) > CONVERGENCE_RTOL * max(abs(n2), 1e-300):
            raise ConvergenceError(
                f"<n>_ss changed from {n:.6g} to {n2:.6g} when doubling n_cut={params.n_cut}")
    return n


# ---------------------------------------------------------------------------
# maps

@dataclass(frozen=True, eq=False)
class GapMap:
    omega_ratios: np.ndarray
    delta_ratios: np.ndarray
    gap: np.ndarray  # shape (len(omega_ratios), len(delta_ratios))


def _gap_point(args):
    w, d, gamma, eta, nu, n_cut = args
    return full_gap(SidebandParams.from_ratios(w, d, gamma=gamma, eta=eta, nu=nu, n_cut=n_cut))


def gap_map(omega_ratios: Sequence[float], delta_ratios: Sequence[float], gamma: float = 0.032,
            eta: float = 0.1, nu: float = 1.0, n_cut: int = 5, workers: int = 1) -> GapMap:
    """Full-model gap on the ``(Omega/gamma, Delta/nu)`` grid, rows indexed by ``Omega/gamma``."""
    wr, dr = np.asarray(omega_ratios, float), np.asarray(delta_ratios, float)
    if not (np.all(np.isfinite(wr)) and np.all(np.isfinite(dr))):
        raise ValueError("grid must be finite")
    tasks = [(w, d, gamma, eta, nu, n_cut) for w in wr for d in dr]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(_gap_point, tasks))
    else:
        values = [_gap_point(t) for t in tasks]
    return GapMap(wr, dr, np.asarray(values, float).reshape(len(wr), len(dr)))


# ---------------------------------------------------------------------------
# EIT cooling through the dressed-state reduction

@dataclass(frozen=True)
class EITParams:
    gamma_e: float
    omega_r: float
    delta_r: float
    omega_g: float
    delta_g: float
    eta: float
    nu: float

    def __post_init__(self):
        if self.delta_r <= 0:
            raise ValueError("coupling detuning must be positive (blue of the |r>-|e> line)")
        if self.gamma_e < 0 or self.omega_r < 0 or self.omega_g < 0:
            raise ValueError("rates and Rabi frequencies must be nonnegative")
        if not 0 < self.eta <= ETA_MAX:
            raise ValueError(f"Lamb-Dicke parameter must lie in (0, {ETA_MAX}]")
        if self.nu <= 0:
            raise ValueError("trap frequency must be positive")


class EITDressing(NamedTuple):
    delta_r: float  # ac Stark shift from the coupling beam
    sin_phi: float
    gamma_plus: float
    omega_plus: float
    omega_minus: float


def eit_dressing(eit: EITParams) -> EITDressing:
    root = math.hypot(eit.omega_r, eit.delta_r)
    shift = 0.5 * (root - abs(eit.delta_r))
    sin2 = 0.5 * (1 - eit.delta_r / root)
    return EITDressing(shift, math.sqrt(sin2), eit.gamma_e * sin2, eit.delta_r + shift, -shift)


def eit_reduce(eit: EITParams, n_cut: int = 5) -> SidebandParams:
    """Sideband parameters of the ``|+>`` dressed state replacing ``|e>``.

    ``gamma -> gamma_e sin^2 phi``, ``Omega_g -> sin(phi) Omega_g`` (so the
    sideband coupling becomes ``eta sin(phi) Omega_g``) and
    ``Delta -> omega_+ - Delta_g``.
    """
    d = eit_dressing(eit)
    return SidebandParams(nu=eit.nu, delta_detuning=d.omega_plus - eit.delta_g,
                          omega_g=d.sin_phi * eit.omega_g, eta=eit.eta,
                          gamma=d.gamma_plus, n_cut=n_cut)


def eit_optimal_detuning(eit: EITParams) -> float:
    """Leading-order resonance ``Delta_g* = delta_r + Delta_r - nu``."""
    d = eit_dressing(eit)
    return d.delta_r + eit.delta_r - eit.nu


def eit_resonant_detuning_exact(eit: EITParams) -> float:
    """Probe detuning that makes the reduced model's ``beta`` vanish exactly."""
    d = eit_dressing(eit)
    w_eff = d.sin_phi * eit.omega_g
    if w_eff > eit.nu:
        raise ValueError("effective carrier drive exceeds the trap frequency; no resonance")
    return d.omega_plus - math.sqrt(eit.nu**2 - w_eff**2)
