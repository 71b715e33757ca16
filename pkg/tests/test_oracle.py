import numpy as np
import pytest

from conftest import single_dof
from model import MechModel, PolyNonlinearity, build_oscillator_chain, uniform_sine_forcing
from modal import compute_modes
from collocation import assemble_convolution, build_grid
from solvers import ModalForce, PeriodicSolution, SolverConfig, check_contraction, solve_steady_state
from oracle import OracleError, SteadyOrbit, compare_orbit, integrate_to_steady_state


def harmonic_orbit(model, omega, force_amp, t):
    """Exact steady response of a linear model to force_amp * sin(omega t) on every DOF."""
    X = np.linalg.solve(model.K - omega ** 2 * model.M + 1j * omega * model.C,
                        -1j * force_amp * np.ones(model.n))
    return np.real(np.exp(1j * omega * np.asarray(t))[:, None] * X[None, :])


def as_solution(eta, omega):
    eta = np.asarray(eta, dtype=float)
    return PeriodicSolution(zeta_nodal=np.zeros_like(eta), eta_nodal=eta, omega=omega, converged=True)


def synthetic_orbit(omega=1.0, samples=2048):
    phases = np.arange(samples) * (2 * np.pi / omega / samples)
    return SteadyOrbit(np.sin(omega * phases)[:, None], omega, periods_integrated=1, settle_residual=0.0)


@pytest.fixture(scope="module")
def linear_sdof():
    return MechModel(1, [[1.0]], [[0.4]], [[4.0]], PolyNonlinearity(1))


class TestIntegration:
    def test_linear_orbit_matches_closed_form(self, linear_sdof):
        orbit = integrate_to_steady_state(linear_sdof, uniform_sine_forcing(1, 1.0), 1.0, steps_per_period=1024)
        assert orbit.settled
        assert orbit.samples.shape == (1024, 1)
        assert orbit.settle_residual <= 1e-8
        expected = harmonic_orbit(linear_sdof, 1.0, 1.0, orbit.phases)
        np.testing.assert_allclose(orbit.samples, expected, atol=1e-6)

    def test_samples_are_read_only(self, linear_sdof):
        orbit = integrate_to_steady_state(linear_sdof, uniform_sine_forcing(1, 1.0), 1.0, steps_per_period=128)
        with pytest.raises(ValueError):
            orbit.samples[0, 0] = 1.0

    def test_fourth_order_in_step(self, linear_sdof):
        errors = []
        for steps in (64, 128):
            orbit = integrate_to_steady_state(linear_sdof, uniform_sine_forcing(1, 1.0), 1.0,
                                              settle_tol=1e-12, steps_per_period=steps)
            expected = harmonic_orbit(linear_sdof, 1.0, 1.0, orbit.phases)
            errors.append(np.max(np.abs(orbit.samples - expected)))
        assert 12.0 <= errors[0] / errors[1] <= 20.0

    def test_undamped_model_is_rejected(self):
        with pytest.raises(OracleError, match="strictly positive damping"):
            integrate_to_steady_state(single_dof(1.0, 0.0), uniform_sine_forcing(1, 0.01), 0.5)

    def test_non_positive_frequency(self, linear_sdof):
        with pytest.raises(OracleError):
            integrate_to_steady_state(linear_sdof, uniform_sine_forcing(1, 1.0), 0.0)

    def test_unsettled_orbit_reports_decay(self):
        with pytest.raises(OracleError, match="decay factor"):
            integrate_to_steady_state(single_dof(1.0, 0.01), uniform_sine_forcing(1, 0.01), 0.5,
                                      max_periods=2, steps_per_period=64)


class TestCompareOrbit:
    def test_self_comparison(self):
        orbit = synthetic_orbit()
        basis = compute_modes(single_dof(1.0, 0.1))
        result = compare_orbit(as_solution(orbit.samples[::8], 1.0), basis, orbit)
        assert result.sup_error < 1e-15
        assert result.phase_shift == 0.0
        assert result.node_spacing == pytest.approx(2 * np.pi / 256)

    def test_recovers_phase_shift(self):
        orbit = synthetic_orbit()
        basis = compute_modes(single_dof(1.0, 0.1))
        shift = 2 * np.pi / 32
        nodes = build_grid(256, 2 * np.pi).nodes
        result = compare_orbit(as_solution(np.sin(nodes + shift)[:, None], 1.0), basis, orbit)
        assert result.phase_shift == pytest.approx(shift, rel=1e-12)
        assert result.sup_error < 1e-12

    def test_frequency_mismatch(self):
        basis = compute_modes(single_dof(1.0, 0.1))
        with pytest.raises(OracleError, match="mismatch"):
            compare_orbit(as_solution(np.zeros((16, 1)), 1.1), basis, synthetic_orbit())

    def test_unsettled_orbit(self):
        basis = compute_modes(single_dof(1.0, 0.1))
        orbit = SteadyOrbit(np.zeros((64, 1)), 1.0, 2, 1.0, settled=False)
        with pytest.raises(OracleError):
            compare_orbit(as_solution(np.zeros((16, 1)), 1.0), basis, orbit)


class TestAgainstCollocation:
    def test_linear_chain(self):
        model = build_oscillator_chain(2, kappa=0.0)
        basis = compute_modes(model)
        forcing = uniform_sine_forcing(2, 0.01)
        solution = solve_steady_state(model, basis, build_grid(64, 1.0), forcing, 0.8)
        orbit = integrate_to_steady_state(model, forcing, 0.8, steps_per_period=512)
        result = compare_orbit(solution, basis, orbit)
        assert result.sup_error < 1e-6
        assert result.per_dof.shape == (2,)

    def test_duffing(self, duffing):
        model, basis = duffing
        forcing = uniform_sine_forcing(1, 0.01)
        solution = solve_steady_state(model, basis, build_grid(256, 1.0), forcing, 0.5, cfg=SolverConfig(tol=1e-12))
        assert solution.converged
        result = compare_orbit(solution, basis, integrate_to_steady_state(model, forcing, 0.5))
        assert result.sup_error < 1e-6
        assert abs(result.phase_shift) < 1e-12

    @pytest.mark.parametrize("omega", [0.5, 2.5, 3.0])
    def test_chain2_off_resonance(self, chain2, omega):
        model, basis = chain2
        forcing = uniform_sine_forcing(2, 0.01)
        cfg = SolverConfig()
        solution = solve_steady_state(model, basis, build_grid(256, 1.0), forcing, omega, cfg=cfg)
        assert solution.converged
        A = assemble_convolution(basis, build_grid(256, solution.period))
        report = check_contraction(basis, A, model, ModalForce(model, basis)(solution.eta_lin), None, cfg,
                                   solution.eta_lin)
        assert report.predicted_convergent
        orbit = integrate_to_steady_state(model, forcing, omega, steps_per_period=512)
        assert compare_orbit(solution, basis, orbit).sup_error < 1e-4
