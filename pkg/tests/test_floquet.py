import math

import numpy as np
import pytest
import scipy.linalg as sla

from conftest import basis3
from lepkit.dynamics import integrate
from lepkit.errors import LepkitError
from lepkit.floquet import (FloquetProtocol, Monodromy, evolve_piecewise, floquet_gap, floquet_generator, monodromy,
                            mu_parameter, phase_diagram, static_gap, three_level_monodromy)
from lepkit.liouville import LindbladModel, build_superoperator, three_level_model, three_level_space
from lepkit.qops import Operator, make_space, random_density_matrix


def mono(gamma, omega_mod=1.0, fraction=0.4, rabi=1.0):
    return three_level_monodromy(rabi, FloquetProtocol.from_fraction(omega_mod, fraction, gamma))


class TestProtocol:
    def test_period(self):
        p = FloquetProtocol.from_fraction(2.0, 0.4, 1.0)
        assert p.period == pytest.approx(math.pi)
        assert p.tau == pytest.approx(0.4 * math.pi)

    @pytest.mark.parametrize("args", [(1.0, 2 * math.pi, 1.0), (1.0, -0.1, 1.0), (0.0, 0.0, 1.0), (1.0, 0.1, -1)])
    def test_invalid(self, args):
        with pytest.raises(ValueError):
            FloquetProtocol(*args)

    def test_invalid_fraction(self):
        with pytest.raises(ValueError):
            FloquetProtocol.from_fraction(1.0, 1.0, 1.0)


class TestMonodromy:
    def test_zero_tau_is_static(self):
        g = 1.7
        p = FloquetProtocol(1.0, 0.0, g)
        m = three_level_monodromy(1.0, p)
        ref = sla.expm(build_superoperator(three_level_model(g, 1.0)).matrix * p.period)
        np.testing.assert_allclose(m.matrix, ref, atol=1e-10)

    def test_unitary_without_dissipation(self):
        np.testing.assert_allclose(np.abs(mono(0.0).eigenvalues), 1, atol=1e-10)

    def test_trace_preserving(self):
        m = mono(2.0)
        ident = np.eye(3).reshape(-1)
        np.testing.assert_allclose(ident @ m.matrix, ident, atol=1e-12)
        assert m.spectral_radius() == pytest.approx(1.0, abs=1e-9)
        assert m.unit_eigenvalue_count() == 1

    @pytest.mark.parametrize("g", [0.3, 2.0, 5.0])
    def test_radius_bound(self, g):
        for w in (0.3, 1.0, 2.5):
            m = mono(g, omega_mod=w)
            assert m.spectral_radius() <= 1 + 1e-9
            assert m.unit_eigenvalue_count() == 1

    def test_off_phase_first(self):
        g, p = 2.0, FloquetProtocol.from_fraction(1.0, 0.4, 2.0)
        on = build_superoperator(three_level_model(g, 1.0)).matrix
        off = build_superoperator(three_level_model(g, 1.0).without_dissipation()).matrix
        expected = sla.expm(on * (p.period - p.tau)) @ sla.expm(off * p.tau)
        np.testing.assert_allclose(mono(g).matrix, expected, atol=1e-14)

    def test_space_mismatch(self):
        other = make_space([("q", 3)])
        model = LindbladModel(other, Operator(other, np.zeros((3, 3))))
        with pytest.raises(ValueError):
            monodromy(three_level_model(1, 1), model, FloquetProtocol(1.0, 0.5, 1.0))

    def test_stroboscopic_against_integration(self, rng):
        g = 2.0
        p = FloquetProtocol.from_fraction(1.0, 0.4, g)
        on, off = three_level_model(g, 1.0), three_level_model(g, 1.0).without_dissipation()
        rho = random_density_matrix(three_level_space(), rng).matrix
        r = rho
        for _ in range(3):
            r = integrate(off, r, p.tau, 1e-3).states[-1]
            r = integrate(on, r, p.period - p.tau, 1e-3).states[-1]
        strobe = np.linalg.matrix_power(monodromy(on, off, p).matrix, 3) @ rho.reshape(-1)
        np.testing.assert_allclose(strobe.reshape(3, 3), r, atol=1e-8)

    def test_piecewise_matches_powers(self, rng):
        g = 3.0
        p = FloquetProtocol.from_fraction(1.0, 0.4, g)
        on, off = three_level_model(g, 1.0), three_level_model(g, 1.0).without_dissipation()
        rho = random_density_matrix(three_level_space(), rng).matrix
        times = np.array([0.0, p.tau, p.period, 2.5 * p.period, 4 * p.period])
        traj = evolve_piecewise(on, off, p, rho, times)
        pm = monodromy(on, off, p).matrix
        np.testing.assert_allclose(traj.states[0], rho)
        off_prop = sla.expm(build_superoperator(off).matrix * p.tau)
        np.testing.assert_allclose(traj.states[1].reshape(-1), off_prop @ rho.reshape(-1), atol=1e-12)
        np.testing.assert_allclose(traj.states[2].reshape(-1), pm @ rho.reshape(-1), atol=1e-12)
        np.testing.assert_allclose(traj.states[4].reshape(-1), np.linalg.matrix_power(pm, 4) @ rho.reshape(-1),
                                   atol=1e-12)
        diag = traj.diagnostics()
        assert diag["trace"] <= 1e-10 and diag["hermiticity"] <= 1e-10

    def test_piecewise_off_phase_is_unitary(self):
        g = 3.0
        p = FloquetProtocol.from_fraction(1.0, 0.4, g)
        on, off = three_level_model(g, 1.0), three_level_model(g, 1.0).without_dissipation()
        traj = evolve_piecewise(on, off, p, basis3(2), [0.0, 0.5 * p.tau])
        # no decay yet: ground population untouched
        assert traj.states[1, 0, 0].real == pytest.approx(0.0, abs=1e-14)


class TestGap:
    def test_static_limit_at_ep(self):
        m = three_level_monodromy(1.0, FloquetProtocol(1.0, 0.0, 2.0))
        assert floquet_gap(m) == pytest.approx(0.5, abs=1e-8)

    def test_no_dissipation(self):
        assert floquet_gap(mono(0.0)) == 0.0

    def test_tiny_tau_tracks_static(self):
        for g in (0.1, 1.0, 2.0, 4.0, 6.0):
            m = three_level_monodromy(1.0, FloquetProtocol.from_fraction(1.0, 1e-6, g))
            assert floquet_gap(m) == pytest.approx(static_gap(three_level_model(g, 1.0)), abs=1e-5)

    def test_exceeds_static_max(self):
        gaps = [floquet_gap(mono(g)) for g in np.linspace(0.1, 6, 60)]
        assert max(gaps) > 0.5

    def test_no_stationary(self):
        with pytest.raises(LepkitError):
            floquet_gap(Monodromy(0.5 * np.eye(4), 1.0))


class TestMu:
    def test_static_underdamped(self):
        assert mu_parameter(three_level_monodromy(1.0, FloquetProtocol(1.0, 0.0, 0.4))) == pytest.approx(0, abs=1e-9)

    def test_static_overdamped(self):
        assert mu_parameter(three_level_monodromy(1.0, FloquetProtocol(1.0, 0.0, 3.0))) > 0.01

    def test_no_dissipation(self):
        assert mu_parameter(mono(0.0)) == pytest.approx(0, abs=1e-10)

    def test_range(self):
        for g in (0.5, 1.5, 2.5, 5.0):
            assert 0 <= mu_parameter(mono(g)) <= 1

    def test_needs_two_distinct(self):
        with pytest.raises(LepkitError):
            mu_parameter(Monodromy(np.diag([1.0, 0.5, 0.5]), 1.0))

    def test_degenerate_copies_merged(self):
        m = Monodromy(np.diag([1.0, 0.5, 0.5, 0.2]), 1.0)
        assert mu_parameter(m) == pytest.approx(0.3 / 0.7)


class TestGenerator:
    def test_static_recovered(self):
        g = 1.3
        m = three_level_monodromy(0.7, FloquetProtocol(1.0, 0.0, g))
        np.testing.assert_allclose(floquet_generator(m), build_superoperator(three_level_model(g, 0.7)).matrix,
                                   atol=1e-8)

    def test_roundtrip_and_spectral_mapping(self):
        m = mono(1.0, omega_mod=1.3)
        lf = floquet_generator(m)
        np.testing.assert_allclose(sla.expm(lf * m.period), m.matrix, atol=1e-8)
        mod = np.sort(np.abs(m.eigenvalues))
        np.testing.assert_allclose(np.sort(np.exp(m.period * np.linalg.eigvals(lf).real)), mod, atol=1e-8)

    def test_negative_axis_rejected(self):
        with pytest.raises(LepkitError, match="negative real axis"):
            floquet_generator(Monodromy(np.diag([1.0, -0.5]), 1.0))


class TestPhaseDiagram:
    def test_shape_and_order(self):
        om, ga = [0.5, 1.0, 2.0], [0.2, 1.0]
        pd = phase_diagram(om, ga, fraction=0.4)
        assert pd.mu.shape == (3, 2)
        assert pd.gap[2, 1] == pytest.approx(floquet_gap(mono(1.0, omega_mod=2.0)))

    def test_invalid(self):
        with pytest.raises(ValueError):
            phase_diagram([1.0], [1.0], fraction=0.0)
        with pytest.raises(ValueError):
            phase_diagram([np.inf], [1.0])

    def test_custom_point_and_workers(self):
        seen = phase_diagram([1.0, 2.0], [3.0], point=lambda a: (a[1], a[2]))
        np.testing.assert_array_equal(seen.mu, [[1.0], [2.0]])
        a = phase_diagram([0.5, 1.5], [0.5, 2.5], workers=1)
        b = phase_diagram([0.5, 1.5], [0.5, 2.5], workers=2)
        np.testing.assert_array_equal(a.mu, b.mu)
        np.testing.assert_array_equal(a.gap, b.gap)

    def test_fast_modulation_averages(self):
        # T -> 0: the effective generator is the duty-cycle average, i.e. rate (1 - f) gamma
        f, g = 0.4, 6.0
        pd = phase_diagram([5.0, 50.0, 400.0], [g], fraction=f)
        target = static_gap(three_level_model((1 - f) * g, 1.0))
        errors = np.abs(pd.gap[:, 0] - target)
        assert errors[0] > errors[1] > errors[2]
        assert errors[2] < 1e-5

    def test_small_fraction_static_boundary(self):
        pd = phase_diagram([1.0], [1.8, 2.2], fraction=1e-6)
        assert pd.mu[0, 0] == pytest.approx(0, abs=1e-6)
        assert pd.mu[0, 1] > 1e-3

    def test_topology(self):
        om = np.linspace(0.05, 3.0, 12)
        ga = np.linspace(0.05, 6.0, 24)
        pd = phase_diagram(om, ga, fraction=0.4)
        assert np.all(pd.mu[:, 0] < 1e-9)
        below = ga < 2
        assert np.any(pd.mu[:, below] > 1e-6)
