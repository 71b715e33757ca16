from dataclasses import replace

import numpy as np
import pytest

from modal import ModalBasis, eigen_constants
from green import GreenKernel, ResonanceError, gamma_bound, green_value
from collocation import (
    DENSE,
    FFT,
    CollocationError,
    apply_convolution,
    assemble_convolution,
    assembly_count,
    build_grid,
    coupled_operator_bound,
    hat_basis,
    interpolate,
    operator_inf_norm,
    reset_assembly_count,
    sup_norm,
)


def modal_basis(omega0, zeta):
    """Basis of independent modes (identity U) with the given frequencies and damping ratios."""
    omega0 = np.atleast_1d(np.asarray(omega0, dtype=float))
    zeta = np.atleast_1d(np.asarray(zeta, dtype=float))
    m = len(omega0)
    return ModalBasis(m, m, np.eye(m), omega0, zeta,
                      tuple(eigen_constants(w, z) for w, z in zip(omega0, zeta)), tuple(range(1, m + 1)))


class TestGrid:
    def test_four_nodes(self):
        grid = build_grid(4, 2 * np.pi)
        np.testing.assert_allclose(grid.nodes, [0.0, np.pi / 2, np.pi, 3 * np.pi / 2])
        np.testing.assert_allclose(grid.weights, np.full(4, np.pi / 2))
        assert grid.spacing == pytest.approx(np.pi / 2)

    def test_weights_sum_to_period(self):
        grid = build_grid(128, 1.0)
        assert grid.nodes[64] == 0.5
        assert grid.weights.sum() == pytest.approx(1.0, rel=1e-14)

    @pytest.mark.parametrize("N, T", [(3, 1.0), (0, 1.0), (16.5, 1.0), (16, 0.0), (16, -1.0)])
    def test_invalid(self, N, T):
        with pytest.raises(CollocationError):
            build_grid(N, T)


class TestAssembly:
    def test_entries_are_weighted_kernel_values(self):
        basis = modal_basis(1.0, 0.1)
        grid = build_grid(4, 2 * np.pi)
        A = assemble_convolution(basis, grid)
        kernel = GreenKernel(basis.modes[0], grid.T)
        for p in range(4):
            for q in range(4):
                expected = grid.weights[q] * green_value(kernel, grid.nodes[p] - grid.nodes[q])
                assert A.dense[0, p, q] == pytest.approx(expected, rel=1e-9, abs=1e-14)

    def test_circulant_structure(self):
        A = assemble_convolution(modal_basis([1.0, 2.3], [0.05, 1.5]), build_grid(16, 3.0))
        assert A.dense.shape == (2, 16, 16)
        for j in range(2):
            np.testing.assert_array_equal(A.dense[j, :, 0], A.generators[j])
            np.testing.assert_array_equal(A.dense[j, 1:, 1:], A.dense[j, :-1, :-1])
            assert A.dense[j, 1, 0] == A.dense[j, 2, 1]

    def test_row_sums_approach_static_gain(self):
        """sum_q w_q L(t_p - t_q) -> 1 / omega0^2 with second-order error."""
        basis = modal_basis(1.0, 0.1)
        errors = []
        for N in (64, 128, 256):
            A = assemble_convolution(basis, build_grid(N, 2 * np.pi / 1.3))
            errors.append(np.max(np.abs(A.dense[0].sum(axis=1) - 1.0)))
        assert errors[0] / errors[1] == pytest.approx(4.0, abs=0.5)
        assert errors[1] / errors[2] == pytest.approx(4.0, abs=0.5)

    def test_resonant_grid(self):
        with pytest.raises(ResonanceError):
            assemble_convolution(modal_basis(1.0, 0.0), build_grid(16, 2 * np.pi))

    def test_counter(self):
        reset_assembly_count()
        basis = modal_basis(1.0, 0.2)
        for N in (8, 16, 32):
            assemble_convolution(basis, build_grid(N, 1.0))
        assert assembly_count() == 3
        reset_assembly_count()
        assert assembly_count() == 0


class TestApply:
    def test_zero_input(self):
        A = assemble_convolution(modal_basis([1.0, 1.7], [0.1, 0.3]), build_grid(32, 4.0))
        np.testing.assert_array_equal(apply_convolution(A, np.zeros((32, 2))), np.zeros((32, 2)))

    def test_constant_input(self):
        A = assemble_convolution(modal_basis(1.0, 0.1), build_grid(256, 2 * np.pi / 1.3))
        np.testing.assert_allclose(apply_convolution(A, np.ones((256, 1))), 1.0, rtol=1e-3)

    def test_fft_matches_dense(self, rng):
        A = assemble_convolution(modal_basis([0.7, 1.0, 3.0], [0.02, 1.0, 4.0]), build_grid(64, 5.0))
        z = rng.normal(size=(64, 3))
        dense = apply_convolution(A, z, method=DENSE)
        fft = apply_convolution(A, z, method=FFT)
        np.testing.assert_allclose(fft, dense, rtol=0, atol=1e-12 * np.max(np.abs(dense)))

    def test_linearity(self, rng):
        A = assemble_convolution(modal_basis([0.7, 1.3], [0.05, 0.5]), build_grid(32, 2.0))
        x, y = rng.normal(size=(2, 32, 2))
        np.testing.assert_allclose(apply_convolution(A, 2.0 * x - 3.0 * y),
                                   2.0 * apply_convolution(A, x) - 3.0 * apply_convolution(A, y),
                                   atol=1e-12)

    def test_shape_mismatch(self):
        A = assemble_convolution(modal_basis(1.0, 0.1), build_grid(16, 2.0))
        with pytest.raises(CollocationError):
            apply_convolution(A, np.zeros((16, 2)))
        with pytest.raises(CollocationError):
            apply_convolution(A, np.zeros((16, 1)), method="sparse")


class TestOperatorNorms:
    def test_zero_operator(self):
        A = assemble_convolution(modal_basis(1.0, 0.1), build_grid(16, 2.0))
        zero = replace(A, generators=np.zeros_like(A.generators))
        assert operator_inf_norm(zero) == 0.0
        assert coupled_operator_bound(zero) == 0.0

    def test_norm_is_max_row_sum(self):
        A = assemble_convolution(modal_basis([1.0, 2.0], [0.1, 0.1]), build_grid(32, 2.0))
        expected = max(np.max(np.sum(np.abs(A.dense[j]), axis=1)) for j in range(2))
        assert operator_inf_norm(A) == pytest.approx(expected, rel=1e-14)

    def test_coupled_bound_dominates_single_modes(self):
        A = assemble_convolution(modal_basis([1.0, 2.0, 0.5], [0.1, 0.7, 2.0]), build_grid(32, 2.0))
        assert coupled_operator_bound(A) >= operator_inf_norm(A)

    def test_converges_under_refinement(self):
        basis = modal_basis(1.5, 0.2)
        T = 2 * np.pi / 0.9
        coarse = operator_inf_norm(assemble_convolution(basis, build_grid(256, T)))
        fine = operator_inf_norm(assemble_convolution(basis, build_grid(512, T)))
        assert abs(coarse - fine) < 5e-3 * fine

    def test_bounded_by_gamma(self, rng):
        """||A_N||_inf <= Gamma(T) for damped modes with omega0 >= 1."""
        for _ in range(50):
            if rng.uniform() < 0.5:
                omega0, zeta = rng.uniform(1.2, 4.0), rng.uniform(0.01, 0.5)
            else:
                omega0, zeta = rng.uniform(1.0, 4.0), rng.uniform(1.5, 5.0)
            T = rng.uniform(0.5, 10.0)
            basis = modal_basis(omega0, zeta)
            A = assemble_convolution(basis, build_grid(512, T))
            assert operator_inf_norm(A) <= gamma_bound(basis, T) * (1 + 1e-6)


class TestInterpolation:
    def test_hat_basis_partition_of_unity(self, rng):
        grid = build_grid(16, 3.0)
        t = rng.uniform(-5.0, 10.0, 100)
        values = hat_basis(grid, t)
        assert values.shape == (100, 16)
        assert np.all(values >= 0.0)
        np.testing.assert_allclose(values.sum(axis=1), 1.0, rtol=1e-14)

    def test_hat_basis_at_nodes(self):
        grid = build_grid(8, 2.0)
        np.testing.assert_allclose(hat_basis(grid, grid.nodes), np.eye(8), atol=1e-14)

    def test_interpolant_at_nodes_and_midpoints(self, rng):
        grid = build_grid(16, 2.0)
        values = rng.normal(size=16)
        np.testing.assert_allclose(interpolate(grid, values, grid.nodes), values, rtol=1e-14)
        midpoints = grid.nodes + 0.5 * grid.spacing
        expected = 0.5 * (values + np.roll(values, -1))
        np.testing.assert_allclose(interpolate(grid, values, midpoints), expected, rtol=1e-12, atol=1e-14)

    def test_matches_hat_basis(self, rng):
        grid = build_grid(12, 1.5)
        values = rng.normal(size=(12, 2))
        t = rng.uniform(0.0, 1.5, 30)
        np.testing.assert_allclose(interpolate(grid, values, t), hat_basis(grid, t) @ values, atol=1e-13)

    def test_sine_refinement(self):
        errors = []
        fine_t = np.linspace(0.0, 2 * np.pi, 4001)
        for N in (16, 32, 64):
            grid = build_grid(N, 2 * np.pi)
            errors.append(np.max(np.abs(interpolate(grid, np.sin(grid.nodes), fine_t) - np.sin(fine_t))))
        assert errors[0] / errors[1] == pytest.approx(4.0, abs=0.5)
        assert errors[1] / errors[2] == pytest.approx(4.0, abs=0.5)

    def test_wrong_length(self):
        with pytest.raises(CollocationError):
            interpolate(build_grid(8, 1.0), np.zeros(7), 0.3)


class TestSupNorm:
    def test_euclidean_per_node(self):
        assert sup_norm(np.array([[3.0, 4.0], [1.0, 0.0]])) == 5.0

    def test_vector_and_empty(self):
        assert sup_norm(np.array([1.0, -7.0, 2.0])) == 7.0
        assert sup_norm(np.zeros((0, 3))) == 0.0
