import json
import os

import numpy as np
import pytest

from conftest import CONFIG_DIR
from model import (
    ForcingSpec,
    Harmonic,
    MechModel,
    ModelError,
    ModelParseError,
    ModelValidationError,
    PolyNonlinearity,
    build_oscillator_chain,
    eval_forcing,
    eval_nonlinearity,
    eval_nonlinearity_jacobian,
    lipschitz_on_ball,
    load_model,
    uniform_sine_forcing,
)


def spring_forces(x, kappa):
    """Cubic spring forces of a wall-to-wall chain, computed spring by spring."""
    padded = np.concatenate([[0.0], x, [0.0]])
    stretch = np.diff(padded)
    return kappa * (stretch[:-1] ** 3 - stretch[1:] ** 3)


def write_model(tmp_path, data, name="model.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data) if not isinstance(data, str) else data)
    return str(path)


def chain2_data(**overrides):
    with open(os.path.join(CONFIG_DIR, "chain2.json")) as handle:
        data = json.load(handle)
    data.update(overrides)
    return data


class TestOscillatorChain:
    def test_single_mass_is_duffing(self):
        model = build_oscillator_chain(1)
        assert model.M.tolist() == [[1.0]]
        assert model.K.tolist() == [[2.0]]
        assert model.C.tolist() == [[2.0]]
        assert eval_nonlinearity(model, [1.3]) == pytest.approx([1.3 ** 3], rel=1e-14)

    def test_twenty_dof_matrices(self):
        model = build_oscillator_chain(20, mass=2.0, k=1.5, c=0.1)
        assert model.n == 20
        np.testing.assert_array_equal(model.M, 2.0 * np.eye(20))
        assert model.K[0, 0] == 3.0
        assert model.K[0, 1] == -1.5
        assert model.K[0, 2] == 0.0
        assert model.C[19, 19] == pytest.approx(0.2)

    def test_zero_kappa_is_linear(self):
        model = build_oscillator_chain(2, kappa=0.0)
        assert model.is_linear
        np.testing.assert_array_equal(eval_nonlinearity(model, [0.3, -2.0]), [0.0, 0.0])

    def test_matches_spring_by_spring_forces(self, rng):
        model = build_oscillator_chain(5, kappa=0.3)
        for _ in range(20):
            x = rng.uniform(-1.0, 1.0, 5)
            np.testing.assert_allclose(eval_nonlinearity(model, x), spring_forces(x, 0.3), rtol=0, atol=1e-12)

    @pytest.mark.parametrize("kwargs", [
        {"n": 0}, {"n": 2.5}, {"n": 2, "mass": 0.0}, {"n": 2, "k": -1.0}, {"n": 2, "c": -0.1},
    ])
    def test_invalid_parameters(self, kwargs):
        with pytest.raises(ModelValidationError):
            build_oscillator_chain(**kwargs)


class TestNonlinearity:
    def test_two_dof_chain_values(self):
        model = build_oscillator_chain(2)
        np.testing.assert_allclose(eval_nonlinearity(model, [1.0, 0.0]), [1.0, -0.5], atol=1e-15)
        np.testing.assert_array_equal(eval_nonlinearity(model, [0.0, 0.0]), [0.0, 0.0])
        a = 0.7
        np.testing.assert_allclose(eval_nonlinearity(model, [a, a]), [0.5 * a ** 3, 0.5 * a ** 3], atol=1e-15)

    def test_stacked_states(self, rng):
        model = build_oscillator_chain(3)
        x = rng.normal(size=(4, 7, 3))
        stacked = eval_nonlinearity(model, x)
        assert stacked.shape == (4, 7, 3)
        np.testing.assert_allclose(stacked[2, 5], eval_nonlinearity(model, x[2, 5]), rtol=1e-14)

    def test_dimension_mismatch(self):
        model = build_oscillator_chain(2)
        with pytest.raises(ModelError):
            eval_nonlinearity(model, [1.0, 2.0, 3.0])

    def test_quadratic_terms(self):
        nl = PolyNonlinearity(2, quadratic_terms=((0, (1, 0), 2.0), (1, (1, 1), -1.0)))
        model = MechModel(2, np.eye(2), np.eye(2), np.eye(2), nl)
        np.testing.assert_allclose(eval_nonlinearity(model, [3.0, 2.0]), [12.0, -4.0])
        np.testing.assert_allclose(eval_nonlinearity_jacobian(model, [3.0, 2.0]), [[4.0, 6.0], [0.0, -4.0]])

    def test_duplicate_term_rejected(self):
        with pytest.raises(ModelValidationError, match="pre-summed"):
            PolyNonlinearity(2, cubic_terms=((0, (0, 1, 1), 1.0), (0, (1, 0, 1), 2.0)))

    def test_index_out_of_range(self):
        with pytest.raises(ModelValidationError):
            PolyNonlinearity(2, cubic_terms=((0, (0, 1, 2), 1.0),))


class TestJacobian:
    def test_zero_state(self):
        model = build_oscillator_chain(4)
        np.testing.assert_array_equal(eval_nonlinearity_jacobian(model, np.zeros(4)), np.zeros((4, 4)))

    def test_duffing_slope(self):
        model = build_oscillator_chain(1)
        assert eval_nonlinearity_jacobian(model, [2.0])[0, 0] == pytest.approx(12.0)

    def test_matches_central_differences(self, rng):
        """Central differences on random states of a 3-DOF chain."""
        model = build_oscillator_chain(3, kappa=0.4)
        h = 1e-6
        for _ in range(100):
            x = rng.uniform(-1.0, 1.0, 3)
            J = eval_nonlinearity_jacobian(model, x)
            fd = np.column_stack([
                (eval_nonlinearity(model, x + h * e) - eval_nonlinearity(model, x - h * e)) / (2 * h)
                for e in np.eye(3)])
            np.testing.assert_allclose(J, fd, rtol=1e-6, atol=1e-8)

    def test_stacked_shape(self, rng):
        model = build_oscillator_chain(2)
        assert eval_nonlinearity_jacobian(model, rng.normal(size=(5, 2))).shape == (5, 2, 2)


class TestLipschitz:
    def test_linear_model(self):
        assert lipschitz_on_ball(build_oscillator_chain(3, kappa=0.0), 10.0) == 0.0

    def test_duffing_bound(self):
        # sup |3 x^2| on |x| <= 1
        assert lipschitz_on_ball(build_oscillator_chain(1), 1.0) >= 3.0

    def test_dominates_sampled_jacobians(self, rng):
        model = build_oscillator_chain(2)
        radius = 0.5
        bound = lipschitz_on_ball(model, radius)
        directions = rng.normal(size=(100000, 2))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        x = directions * radius * np.sqrt(rng.uniform(size=(100000, 1)))
        norms = np.linalg.norm(eval_nonlinearity_jacobian(model, x), ord=2, axis=(1, 2))
        assert norms.max() <= bound

    def test_lipschitz_inequality(self, rng):
        model = build_oscillator_chain(3)
        radius = 0.8
        bound = lipschitz_on_ball(model, radius)
        for _ in range(200):
            x, y = (v / max(np.linalg.norm(v) / radius, 1.0) for v in rng.normal(size=(2, 3)))
            lhs = np.linalg.norm(eval_nonlinearity(model, x) - eval_nonlinearity(model, y))
            assert lhs <= bound * np.linalg.norm(x - y) * (1 + 1e-12)


class TestForcing:
    def test_sine_values(self):
        forcing = uniform_sine_forcing(3, 0.02)
        np.testing.assert_array_equal(eval_forcing(forcing, 0.0, 1.3), np.zeros(3))
        np.testing.assert_allclose(eval_forcing(forcing, np.pi / 2, 1.0), np.full(3, 0.02), rtol=1e-15)

    def test_two_harmonics(self, rng):
        forcing = ForcingSpec(2, (Harmonic(1, [1.0, 0.0], [0.0, 2.0]), Harmonic(3, [0.5, 0.5], [0.0, -1.0])))
        omega = 0.8
        t = rng.uniform(0.0, 20.0, 100)
        expected = np.column_stack([
            np.cos(omega * t) + 0.5 * np.cos(3 * omega * t),
            2.0 * np.sin(omega * t) + 0.5 * np.cos(3 * omega * t) - np.sin(3 * omega * t),
        ])
        np.testing.assert_allclose(eval_forcing(forcing, t, omega), expected, atol=1e-14)

    def test_scaled(self):
        scaled = uniform_sine_forcing(2, 1.0).scaled(0.04)
        np.testing.assert_array_equal(scaled.harmonics[0].sin, [0.04, 0.04])

    @pytest.mark.parametrize("k", [0, -1, 1.5])
    def test_bad_harmonic_index(self, k):
        with pytest.raises(ModelValidationError):
            ForcingSpec(1, (Harmonic(k, [0.0], [1.0]),))

    def test_wrong_length(self):
        with pytest.raises(ModelValidationError):
            ForcingSpec(2, (Harmonic(1, [0.0], [1.0]),))


class TestLoadModel:
    def test_chain2_file_matches_builtin_chain(self, rng):
        model, forcing = load_model(os.path.join(CONFIG_DIR, "chain2.json"))
        builtin = build_oscillator_chain(2)
        for name in ("M", "C", "K"):
            np.testing.assert_array_equal(getattr(model, name), getattr(builtin, name))
        for _ in range(10):
            x = rng.normal(size=2)
            np.testing.assert_allclose(eval_nonlinearity(model, x), eval_nonlinearity(builtin, x),
                                       rtol=1e-13, atol=1e-14)
        np.testing.assert_array_equal(forcing.harmonics[0].sin, [0.01, 0.01])

    def test_duffing_file(self):
        model, forcing = load_model(os.path.join(CONFIG_DIR, "duffing1.json"))
        assert eval_nonlinearity(model, [2.0]) == pytest.approx([8.0])
        np.testing.assert_array_equal(forcing.harmonics[0].cos, [0.0])

    def test_empty_nonlinearity_is_linear(self, tmp_path):
        path = write_model(tmp_path, chain2_data(nonlinearity={"quadratic": [], "cubic": []}))
        model, _ = load_model(path)
        assert model.is_linear

    def test_duplicate_entry(self, tmp_path):
        data = chain2_data()
        data["nonlinearity"]["cubic"].append([1, 2, 1, 1, 0.25])
        with pytest.raises(ModelValidationError, match="pre-summed"):
            load_model(write_model(tmp_path, data))

    def test_broken_json_reports_position(self, tmp_path):
        path = write_model(tmp_path, '{\n  "n": 2,\n  "M": [[1, 0], [0, 1]\n}')
        with pytest.raises(ModelParseError, match=r"model\.json:\d+:\d+:"):
            load_model(path)

    def test_missing_field(self, tmp_path):
        data = chain2_data()
        del data["K"]
        with pytest.raises(ModelParseError, match="'K'"):
            load_model(write_model(tmp_path, data))

    def test_asymmetric_mass(self, tmp_path):
        path = write_model(tmp_path, chain2_data(M=[[1.0, 0.1], [0.0, 1.0]]))
        with pytest.raises(ModelValidationError, match="symmetric"):
            load_model(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ModelParseError):
            load_model(str(tmp_path / "nope.json"))
