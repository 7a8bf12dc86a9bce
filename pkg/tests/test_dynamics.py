import numpy as np
import pytest
import scipy.linalg as sla

from conftest import random_rho
from steadylearn.dynamics import (
    evolve,
    local_distance_series,
    mean_local_trace_distance,
    trace_distance,
    write_series_csv,
)
from steadylearn.model import (
    pack,
    random_nn_jump_model,
    random_nn_model,
    single_site_loss_model,
    superoperator,
    unpack,
    unvec,
    vec,
)
from steadylearn.pauli import DensityMatrix, DimensionError, expectation, LocalOperator, partial_trace
from steadylearn.steady_state import find_steady_state


def test_zero_model_is_static(rng):
    basis = random_nn_model(3, 0.5, 0).basis
    rho0 = random_rho(3, rng)
    traj = evolve(unpack(basis, np.zeros(basis.n_params)), rho0, [0.0, 0.5, 3.0])
    for s in traj.states:
        np.testing.assert_allclose(s.data, rho0.data, atol=1e-14)


@pytest.mark.parametrize("method", ["expm", "rk"])
def test_amplitude_damping(method):
    gamma = 0.7
    times = np.linspace(0, 5, 11)
    traj = evolve(single_site_loss_model(1, gamma), DensityMatrix.basis_state("0"), times, method=method)
    z = np.array([expectation(s, LocalOperator.from_pauli("Z")).real for s in traj.states])
    np.testing.assert_allclose(z, 2 * np.exp(-gamma * times) - 1, atol=1e-9)


def test_matches_dense_exponential(rng):
    model = random_nn_jump_model(2, 0.9, 3)
    rho0 = random_rho(2, rng)
    want = unvec(sla.expm(1.3 * superoperator(model, dense=True)) @ vec(rho0.data))
    got = evolve(model, rho0, [1.3]).states[0].data
    np.testing.assert_allclose(got, want, atol=1e-10)


def test_semigroup(rng):
    model = random_nn_model(3, 0.8, 5)
    rho0 = random_rho(3, rng)
    mid = evolve(model, rho0, [0.4]).states[0]
    two_step = evolve(model, mid, [0.9]).states[0]
    one_step = evolve(model, rho0, [1.3]).states[0]
    assert trace_distance(two_step, one_step) < 1e-10


def test_methods_agree(rng):
    model = random_nn_model(3, 0.8, 6)
    rho0 = random_rho(3, rng)
    a = evolve(model, rho0, [0.0, 0.2, 2.0], method="expm")
    b = evolve(model, rho0, [0.0, 0.2, 2.0], method="rk", tol=1e-12)
    for x, y in zip(a.states, b.states):
        assert trace_distance(x, y) < 1e-9


def test_long_time_reaches_steady_state():
    model = random_nn_model(3, 1 / np.sqrt(2), 2)
    rho_s = find_steady_state(model).rho
    traj = evolve(model, DensityMatrix.basis_state("000"), [200.0])
    assert trace_distance(traj.states[0], rho_s) < 1e-6


def test_trace_and_hermiticity_preserved(rng):
    traj = evolve(random_nn_jump_model(3, 1.0, 1), random_rho(3, rng), np.linspace(0, 3, 7))
    for s in traj.states:
        s.check(tol_psd=1e-8)


def test_bad_times(rng):
    model = random_nn_model(2, 0.5, 0)
    with pytest.raises(ValueError):
        evolve(model, random_rho(2, rng), [1.0, 0.5])
    with pytest.raises(DimensionError):
        evolve(model, random_rho(3, rng), [1.0])
    with pytest.raises(ValueError):
        evolve(model, random_rho(2, rng), [1.0], method="euler")


class TestLocalDistance:
    def test_identical(self, rng):
        rho = random_rho(3, rng)
        assert mean_local_trace_distance(rho, rho) == pytest.approx(0, abs=1e-14)

    def test_orthogonal_products(self):
        up, down = DensityMatrix.basis_state("0000"), DensityMatrix.basis_state("1111")
        assert mean_local_trace_distance(up, down) == pytest.approx(1.0)

    def test_random_pair_oracle(self, rng):
        a, b = random_rho(4, rng), random_rho(4, rng)
        want = []
        for i in range(3):
            d = partial_trace(a, [i, i + 1]).data - partial_trace(b, [i, i + 1]).data
            want.append(0.5 * np.sum(np.abs(np.linalg.eigvalsh(d))))
        assert mean_local_trace_distance(a, b) == pytest.approx(np.mean(want), rel=1e-12)

    def test_dimension_mismatch(self, rng):
        with pytest.raises(DimensionError):
            mean_local_trace_distance(random_rho(2, rng), random_rho(3, rng))

    def test_series_and_csv(self, tmp_path):
        model = random_nn_model(3, 0.7, 1)
        other = unpack(model.basis, pack(model) * (1 + 1e-3))
        times = [0.0, 0.1, 1.0]
        series = local_distance_series(model, other, DensityMatrix.basis_state("000"), times)
        assert series["D_loc_recovered"][0] == 0
        assert series["D_loc_fully_mixed"][0] == pytest.approx(0.75)
        write_series_csv(tmp_path / "s.csv", series)
        lines = (tmp_path / "s.csv").read_text().splitlines()
        assert lines[0] == "t,D_loc_recovered,D_loc_fully_mixed"
        assert len(lines) == 4
