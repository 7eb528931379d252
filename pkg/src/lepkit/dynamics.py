"""Time evolution, distance diagnostics and the closed-form three-level trajectory."""

from __future__ import annotations

import math
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg as sla

from .errors import DimensionError, IntegrationError
from .liouville import MAX_SUPEROPERATOR_DIM, LindbladModel, Superoperator, unvec, vec
from .qops import DensityMatrix, Operator
from .trajectory import Trajectory

TRACE_DRIFT_TOL = 1e-10
POSITIVITY_FAIL = -1e-6

__all__ = [
    "Trajectory",
    "integrate",
    "evolve_expm",
    "propagator",
    "hs_distance",
    "fit_asymptotic_rate",
    "analytic_three_level",
    "reduced_three_vector_generator",
    "max_stable_dt",
    "three_level_xyz",
]


def _matrix(x) -> np.ndarray:
    return x.matrix if isinstance(x, (DensityMatrix, Operator)) else np.asarray(x, dtype=complex)


def max_stable_dt(model: LindbladModel) -> float:
    """Largest step accepted by :func:`integrate`: ``0.1 / max(||H||, sum ||J^+ J||)``."""
    scale = np.linalg.norm(model.hamiltonian.matrix, 2)
    diss = sum(np.linalg.norm(j.matrix.conj().T @ j.matrix, 2) for j in model.jumps)
    scale = max(scale, diss)
    return math.inf if scale == 0 else 0.1 / scale


def _observe(states: np.ndarray, observables: Mapping[str, Operator | np.ndarray] | None):
    out = {}
    for name, op in (observables or {}).items():
        o = _matrix(op)
        out[name] = np.einsum("kij,ji->k", states, o)
    return out


def integrate(model: LindbladModel, rho0: DensityMatrix | np.ndarray, t_final: float, dt: float,
              sample_every: int = 1,
              observables: Mapping[str, Operator | np.ndarray] | None = None) -> Trajectory:
    """Fixed-step classical RK4 on the matrix master equation.

    The number of steps is ``ceil(t_final / dt)`` with the step shrunk so the
    last one lands exactly on ``t_final``.  Samples are taken every
    ``sample_every`` steps and always at ``t_final``.  The trace is checked,
    never renormalised.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if t_final < 0:
        raise ValueError("t_final must be nonnegative")
    limit = max_stable_dt(model)
    if dt > limit:
        raise IntegrationError(f"step {dt:g} too large for this model; use dt <= {limit:.4g}")
    r = _matrix(rho0).copy()
    if r.shape != (model.dim, model.dim):
        raise ValueError("initial state does not match the model dimension")

    n_steps = max(1, math.ceil(t_final / dt - 1e-9)) if t_final > 0 else 0
    h = dt if n_steps == 0 else t_final / n_steps
    jumps = [j.matrix for j in model.jumps]
    jumps_dag = [j.conj().T for j in jumps]
    h_eff = model.hamiltonian.matrix - 0.5j * sum((jd @ j for j, jd in zip(jumps, jumps_dag)),
                                                  np.zeros_like(r))
    h_eff_dag = h_eff.conj().T

    def rhs(x):
        out = -1j * (h_eff @ x - x @ h_eff_dag)
        for j, jd in zip(jumps, jumps_dag):
            out += j @ x @ jd
        return out

    times, states = [0.0], [r.copy()]
    for step in range(1, n_steps + 1):
        k1 = rhs(r)
        k2 = rhs(r + 0.5 * h * k1)
        k3 = rhs(r + 0.5 * h * k2)
        k4 = rhs(r + h * k3)
        r = r + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if step % sample_every == 0 or step == n_steps:
            times.append(step * h)
            states.append(r.copy())
    states = np.asarray(states)
    traj = Trajectory(np.asarray(times), states, _observe(states, observables), space=model.space)
    diag = traj.diagnostics()
    tr0 = abs(np.trace(states[0]) - 1.0)
    if diag["trace"] > tr0 + TRACE_DRIFT_TOL:
        raise IntegrationError(f"trace drifted by {diag['trace']:.3e}")
    if diag["min_eigenvalue"] < POSITIVITY_FAIL:
        raise IntegrationError(
            f"state lost positivity (min eigenvalue {diag['min_eigenvalue']:.3e}); reduce dt")
    return traj


def propagator(superop: Superoperator | np.ndarray, t: float) -> np.ndarray:
    """``exp(L t)`` by scaling and squaring with a Pade approximant."""
    a = superop.matrix if isinstance(superop, Superoperator) else np.asarray(superop)
    if a.shape[0] > MAX_SUPEROPERATOR_DIM:
        raise DimensionError(f"superoperator dimension {a.shape[0]} exceeds maximum")
    return sla.expm(a * t)


def evolve_expm(superop: Superoperator, rho0: DensityMatrix | np.ndarray, times: Sequence[float],
                observables: Mapping[str, Operator | np.ndarray] | None = None) -> Trajectory:
    """Exact propagation ``vec rho(t) = exp(L t) vec rho0`` at the requested times.

    Uniformly spaced grids reuse one step propagator; other grids get one
    exponential per interval between consecutive times.
    """
    t = np.asarray(times, dtype=float)
    a = superop.matrix
    if a.shape[0] > MAX_SUPEROPERATOR_DIM:
        raise DimensionError(f"superoperator dimension {a.shape[0]} exceeds maximum")
    v = vec(_matrix(rho0)).astype(complex)
    d = superop.dim
    out = np.empty((len(t), d, d), dtype=complex)
    steps = np.diff(np.concatenate([[0.0], t]))
    uniform = len(t) > 2 and np.allclose(steps[1:], steps[1], rtol=1e-12, atol=0)
    step_prop = sla.expm(a * steps[1]) if uniform else None
    for k, s in enumerate(steps):
        if s != 0:
            v = (step_prop if uniform and k > 0 else sla.expm(a * s)) @ v
        out[k] = unvec(v, d)
    return Trajectory(t, out, _observe(out, observables), space=superop.model.space)


def hs_distance(rho_a, rho_b) -> float:
    """Hilbert-Schmidt distance ``sqrt(Tr[(A-B)(A-B)^+])``."""
    if isinstance(rho_a, DensityMatrix) and isinstance(rho_b, DensityMatrix) and rho_a.space != rho_b.space:
        raise ValueError("states live on different spaces")
    a, b = _matrix(rho_a), _matrix(rho_b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.linalg.norm(a - b))


def fit_asymptotic_rate(distances: Sequence[float], times: Sequence[float],
                        window_fraction: float = 0.4, floor: float = 1e-13) -> float:
    """Decay rate from a least-squares fit of ``ln(distance)`` over the late window.

    The window is the last ``window_fraction`` of the time span; samples at
    or below ``floor`` are dropped.
    """
    if not 0 < window_fraction < 1:
        raise ValueError("window_fraction must lie in (0, 1)")
    d = np.asarray(distances, dtype=float)
    t = np.asarray(times, dtype=float)
    start = t[0] + (1 - window_fraction) * (t[-1] - t[0])
    keep = (t >= start) & (d > floor)
    if keep.sum() < 4:
        raise ValueError(f"only {int(keep.sum())} usable points in the fit window")
    slope, _ = np.polyfit(t[keep], np.log(d[keep]), 1)
    return float(-slope)


# ---------------------------------------------------------------------------
# three-level closed forms, rho(0) = |b><b|

def _series(z: np.ndarray, coeffs: Sequence[float]) -> np.ndarray:
    return sum(c * z**k for k, c in enumerate(coeffs))


def _cosh_sqrt(s):
    """cosh(sqrt(s)), entire in s."""
    return np.cosh(np.sqrt(s + 0j))


def _sinhc_sqrt(s):
    """sinh(sqrt(s)) / sqrt(s), entire in s."""
    r = np.sqrt(s + 0j)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.sinh(r) / r
    return np.where(np.abs(s) < 1e-30, 1.0 + 0j, out)


def _coshm1_sqrt(s):
    """(cosh(sqrt(s)) - 1) / s, entire in s."""
    r = np.sqrt(s + 0j)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = 2.0 * np.sinh(r / 2) ** 2 / s
    return np.where(np.abs(s) < 1e-30, 0.5 + 0j, out)


def analytic_three_level(gamma: float, omega: float, times: Sequence[float], taylor_tol: float = 1e-6):
    """Closed-form ``x = rho_bb``, ``y = rho_cc``, ``z = -i(rho_bc - rho_cb)`` from ``|b><b|``.

    The printed expressions divide by ``kappa^2 = gamma^2 - 4 omega^2`` and
    are 0/0 at the exceptional point.  Written in the entire functions
    ``cosh(u)``, ``sinh(u)/kappa`` and ``(cosh(u)-1)/kappa^2`` they are
    regular; when ``|kappa| < taylor_tol * gamma`` those functions are
    replaced by their Taylor polynomials through ``kappa^4``.
    """
    if gamma <= 0 or omega <= 0:
        raise ValueError("need gamma > 0 and omega > 0")
    t = np.asarray(times, dtype=float)
    k2 = complex(gamma * gamma - 4 * omega * omega)
    damp = np.exp(-0.5 * gamma * t)
    if math.sqrt(abs(k2)) < taylor_tol * gamma:
        # u = kappa t / 2, v = kappa t / 4;  series in kappa^2 through kappa^4
        su, sv = k2 * t**2 / 4, k2 * t**2 / 16
        cosh_u = _series(su, [1, 1 / 2, 1 / 24])
        sinh_u_over_k = (t / 2) * _series(su, [1, 1 / 6, 1 / 120])
        coshm1_over_k2 = (t**2 / 4) * _series(su, [1 / 2, 1 / 24, 1 / 720])
        sinh_v_over_k_sq = (t / 4) ** 2 * _series(sv, [1, 1 / 3, 2 / 45])
    else:
        su, sv = k2 * t**2 / 4, k2 * t**2 / 16
        cosh_u = _cosh_sqrt(su)
        sinh_u_over_k = (t / 2) * _sinhc_sqrt(su)
        coshm1_over_k2 = (t**2 / 4) * _coshm1_sqrt(su)
        sinh_v_over_k_sq = ((t / 4) * _sinhc_sqrt(sv)) ** 2
    w2 = omega * omega
    x = damp * (cosh_u + 2 * w2 * coshm1_over_k2 + gamma * sinh_u_over_k)
    y = damp * 4 * w2 * sinh_v_over_k_sq
    z = omega * damp * (4 * gamma * sinh_v_over_k_sq + 2 * sinh_u_over_k)
    for name, arr in (("x", x), ("y", y), ("z", z)):
        if np.max(np.abs(arr.imag), initial=0.0) > 1e-10:
            raise ArithmeticError(f"{name}(t) picked up an imaginary part")
    return x.real, y.real, z.real


def reduced_three_vector_generator(gamma: float, omega: float) -> np.ndarray:
    """Generator of ``d/dt (x, y, z)`` for the driven pair ``{|b>, |c>}``."""
    if gamma < 0 or omega < 0:
        raise ValueError("need gamma, omega >= 0")
    return np.array([
        [0.0, 0.0, -omega / 2],
        [0.0, -gamma, omega / 2],
        [omega, -omega, -gamma / 2],
    ])


def three_level_xyz(states: np.ndarray):
    """``(x, y, z)`` series read off stacked three-level states."""
    s = np.asarray(states)
    x = s[:, 1, 1].real
    y = s[:, 2, 2].real
    z = (-1j * (s[:, 1, 2] - s[:, 2, 1])).real
    return x, y, z
