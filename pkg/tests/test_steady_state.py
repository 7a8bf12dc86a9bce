import numpy as np
import pytest

from conftest import random_rho
from steadylearn.dynamics import trace_distance
from steadylearn.model import (
    apply,
    loss_dephasing_model,
    random_nn_jump_model,
    random_nn_model,
    single_site_loss_model,
    superoperator,
    unvec,
    vec,
)
from steadylearn.pauli import DensityMatrix
from steadylearn.steady_state import (
    DegenerateSteadyState,
    find_steady_state,
    load_state,
    save_state,
    verify_steady_state,
)


def test_single_site_loss_is_down():
    res = find_steady_state(single_site_loss_model(1))
    np.testing.assert_allclose(res.rho.data, [[0, 0], [0, 1]], atol=1e-12)
    assert res.residual <= 1e-10


def test_dephasing_only_is_degenerate():
    model = loss_dephasing_model(2, 0.0, 0)
    model = model.with_coefficients(c_h=np.zeros(model.basis.n_hamiltonian))
    with pytest.raises(DegenerateSteadyState):
        find_steady_state(model)
    res = find_steady_state(model, allow_degenerate=True)
    assert res.degenerate
    assert verify_steady_state(model, DensityMatrix.fully_mixed(2)) < 1e-14


def test_four_site_residual_and_gap():
    model = random_nn_model(4, 1 / np.sqrt(2), 3)
    res = find_steady_state(model)
    assert res.method == "dense"
    assert res.residual <= 1e-10
    assert res.gap_ratio > 1e3
    res.rho.check()
    # Oracle: second-smallest |eigenvalue| from an independent dense eig.
    w = np.sort(np.abs(np.linalg.eigvals(superoperator(model, dense=True))))
    assert res.gap_report[1] == pytest.approx(w[1], rel=1e-8)


@pytest.mark.parametrize("method", ["pauli-lu", "krylov"])
def test_methods_agree(method):
    model = random_nn_jump_model(4, 0.8, 5)
    dense = find_steady_state(model, method="dense")
    other = find_steady_state(model, method=method)
    assert other.residual <= 1e-10
    assert trace_distance(dense.rho, other.rho) < 1e-9
    assert other.gap_report[1] == pytest.approx(dense.gap_report[1], rel=1e-6)


def test_five_sites_uses_pauli_lu():
    res = find_steady_state(random_nn_model(5, 0.7, 1))
    assert res.method == "pauli-lu"
    assert res.residual <= 1e-10
    assert res.gap_ratio > 1e3


def test_residual_is_superoperator_norm(rng):
    model = random_nn_model(3, 0.6, 2)
    rho = random_rho(3, rng)
    want = np.linalg.norm(superoperator(model, dense=True) @ vec(rho.data))
    assert verify_steady_state(model, rho) == pytest.approx(want, rel=1e-12)


def test_loss_norm_on_fully_mixed():
    rho = DensityMatrix.fully_mixed(3)
    assert verify_steady_state(loss_dephasing_model(3, 1.0, 0), rho) > 0


def test_approach_to_fully_mixed_as_loss_vanishes():
    dists = []
    for a in (0.3, 0.1, 0.03):
        rho = find_steady_state(loss_dephasing_model(4, a, 6)).rho
        dists.append(trace_distance(rho, DensityMatrix.fully_mixed(4)))
    assert dists[0] > dists[1] > dists[2]
    assert dists[2] < 1e-2


def test_unknown_method():
    with pytest.raises(ValueError):
        find_steady_state(single_site_loss_model(1), method="magic")


def test_state_file_round_trip(tmp_path, rng):
    rho = random_rho(3, rng)
    save_state(tmp_path / "s.bin", rho)
    np.testing.assert_array_equal(load_state(tmp_path / "s.bin").data, rho.data)
    (tmp_path / "bad.bin").write_bytes(b"nonsense" * 4)
    with pytest.raises(ValueError):
        load_state(tmp_path / "bad.bin")


def test_steady_state_is_fixed_by_generator():
    model = random_nn_jump_model(3, 1.2, 9)
    rho = find_steady_state(model).rho
    np.testing.assert_allclose(apply(model, rho), 0, atol=1e-10)
    np.testing.assert_allclose(unvec(superoperator(model) @ vec(rho.data)), 0, atol=1e-10)
