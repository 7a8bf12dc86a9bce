import numpy as np
import pytest

from conftest import random_rho
from steadylearn.constraints import (
    ConstraintMatrix,
    MeasurementRecord,
    MissingObservable,
    KTemplate,
    build_K,
    build_known_dissipation_system,
    build_prior_system,
    canonical_observable,
    constraint_set,
    entry_operator,
    single_site_constraints,
)
from steadylearn.model import (
    apply,
    classical_ising_loss_model,
    loss_dephasing_model,
    pack,
    random_nn_jump_model,
    random_nn_model,
    unpack,
)
from steadylearn.pauli import DensityMatrix, LocalOperator, PauliString, all_pauli_strings
from steadylearn.steady_state import find_steady_state


@pytest.fixture(scope="module")
def six_site():
    model = random_nn_model(6, 1 / np.sqrt(2), 21)
    rho = find_steady_state(model).rho
    return model, rho, KTemplate(constraint_set(6, 3), model.basis)


class TestConstraintSet:
    def test_counts(self):
        assert len(constraint_set(6, 1)) == 18
        assert len(constraint_set(6, 3)) == 207
        assert len(constraint_set(2, 2)) == 15

    def test_count_against_enumeration(self):
        want = {p for p in all_pauli_strings(6) if 1 <= p.span() <= 3}
        got = constraint_set(6, 3).strings
        assert len(got) == len(set(got))
        assert set(got) == want

    def test_window(self):
        # 12 one-site + 27 two-site + 72 three-site strings (the middle site may be I)
        cs = constraint_set(8, 3, window=(2, 5))
        assert len(cs) == 12 + 27 + 72
        assert all(2 <= s <= 5 for p in cs.strings for s in p.support)

    def test_ordering(self):
        a, b = constraint_set(6, 3, 0), constraint_set(6, 3, 1)
        assert a.strings[:63] == b.strings[:63]
        assert [p.span() for p in a.strings[:63]] == sorted(p.span() for p in a.strings[:63])
        assert a.strings[63:] != b.strings[63:]
        assert set(a.strings) == set(b.strings)
        assert constraint_set(6, 3, 1).strings == b.strings

    def test_single_site(self):
        cs = single_site_constraints(6, "YZ")
        assert len(cs) == 12
        assert cs.labels()[:2] == ["YIIIII", "ZIIIII"]

    def test_bad_k_max(self):
        with pytest.raises(ValueError):
            constraint_set(3, 4)


class TestEntries:
    def test_against_generator_oracle(self, rng):
        # K[A, m] = Tr(A L_m(rho)) with L_m the generator of the m-th unit vector.
        model = random_nn_jump_model(3, 0.8, 4)
        basis = model.basis
        rho = random_rho(3, rng)
        cs = constraint_set(3, 2)
        k = build_K(cs, basis, MeasurementRecord.from_state(rho)).data
        want = np.zeros_like(k)
        for m in range(basis.n_params):
            e = np.zeros(basis.n_params)
            e[m] = 1.0
            lm = apply(unpack(basis, e), rho)
            for i, a in enumerate(cs.strings):
                want[i, m] = np.trace(a.dense() @ lm).real
        np.testing.assert_allclose(k, want, atol=1e-13)

    def test_kernel_contains_truth(self, six_site):
        model, rho, tmpl = six_site
        k = tmpl.evaluate(MeasurementRecord.from_state(rho))
        assert k.shape == (207, 117)
        assert np.linalg.norm(k.data @ pack(model)) < 1e-8

    def test_disjoint_support_zero(self):
        basis = random_nn_model(4, 0.5, 0).basis
        a = PauliString.from_letters("IIIX")
        assert entry_operator(a, basis, basis.columns[0]).is_zero  # h = XIII

    def test_fully_mixed_hamiltonian_columns_vanish(self):
        model = random_nn_model(4, 0.7, 2)
        k = build_K(constraint_set(4, 3), model.basis, MeasurementRecord.from_state(DensityMatrix.fully_mixed(4)))
        np.testing.assert_allclose(k.data[:, : model.basis.n_hamiltonian], 0, atol=1e-15)

    def test_fully_mixed_hermitian_jumps(self):
        model = loss_dephasing_model(4, 0.0, 3)
        k = build_K(constraint_set(4, 3), model.basis, MeasurementRecord.from_state(DensityMatrix.fully_mixed(4)))
        assert np.abs(k.data @ pack(model)).max() < 1e-14

    def test_entries_are_hermitian(self):
        basis = random_nn_jump_model(3, 0.5, 0).basis
        for a in constraint_set(3, 2).strings[:10]:
            for col in basis.columns:
                op = entry_operator(a, basis, col)
                assert op.allclose(op.dagger())


class TestNoise:
    def test_canonical_observable(self):
        op = LocalOperator(2, {PauliString.from_letters("XI"): -2.0, PauliString.from_letters("ZZ"): 1.0})
        obs, f = canonical_observable(op)
        obs2, f2 = canonical_observable(op * -3.0)
        assert obs.key == obs2.key
        assert f2 / f == pytest.approx(-3.0)
        assert (obs.operator() * f).allclose(op)

    def test_determinism_and_order_independence(self, six_site):
        _, rho, tmpl = six_site
        a = tmpl.evaluate(MeasurementRecord.from_state(rho, 1e-4, 7)).data
        b = tmpl.evaluate(MeasurementRecord.from_state(rho, 1e-4, 7)).data
        np.testing.assert_array_equal(a, b)
        rec = MeasurementRecord.from_state(rho, 1e-4, 7)
        rev = rec.measure(tmpl.observables[::-1])[::-1]
        np.testing.assert_array_equal(rev, MeasurementRecord.from_state(rho, 1e-4, 7).measure(tmpl.observables))
        c = tmpl.evaluate(MeasurementRecord.from_state(rho, 1e-4, 8)).data
        assert not np.array_equal(a, c)

    def test_noise_is_linear_in_epsilon(self, six_site):
        _, rho, tmpl = six_site
        exact = tmpl.evaluate(MeasurementRecord.from_state(rho)).data
        n1 = tmpl.evaluate(MeasurementRecord.from_state(rho, 1e-5, 3)).data - exact
        n2 = tmpl.evaluate(MeasurementRecord.from_state(rho, 1e-4, 3)).data - exact
        np.testing.assert_allclose(n2, 10 * n1, atol=1e-13)

    def test_noise_statistics(self, six_site):
        _, rho, tmpl = six_site
        exact = MeasurementRecord.from_state(rho).measure(tmpl.observables)
        noisy = MeasurementRecord.from_state(rho, 1e-3, 11).measure(tmpl.observables)
        z = (noisy - exact) / 1e-3
        assert abs(z.mean()) < 5 / np.sqrt(z.size)
        assert abs(z.std() - 1) < 0.1

    def test_shared_observable_shares_its_draw(self, six_site):
        _, rho, _ = six_site
        rec = MeasurementRecord.from_state(rho, 1e-3, 5)
        op = LocalOperator(6, {PauliString.from_letters("XZIIII"): 0.5, PauliString.from_letters("IYYIII"): -1.0})
        assert rec.value(op * 2.0) == pytest.approx(2 * rec.value(op), rel=1e-14)

    def test_pauli_mode_sums_string_values(self, six_site):
        _, rho, _ = six_site
        rec = MeasurementRecord.from_state(rho, 1e-3, 5, mode="pauli")
        a, b = PauliString.from_letters("XZIIII"), PauliString.from_letters("IYYIII")
        op = LocalOperator(6, {a: 0.5, b: -1.0})
        want = 0.5 * rec.value(LocalOperator.from_pauli(a)) - rec.value(LocalOperator.from_pauli(b))
        assert rec.value(op) == pytest.approx(want, rel=1e-14)

    def test_entry_mode_perturbs_only_structural_entries(self, six_site):
        _, rho, tmpl = six_site
        exact = tmpl.evaluate(MeasurementRecord.from_state(rho)).data
        noisy = tmpl.evaluate(MeasurementRecord.from_state(rho, 1e-4, 2, mode="entry")).data
        diff = noisy - exact
        assert not np.any(diff[~tmpl.sparsity().toarray()])
        assert np.count_nonzero(diff) == len(tmpl.rows)

    def test_bad_mode(self):
        with pytest.raises(ValueError):
            MeasurementRecord(mode="bogus")


class TestRecords:
    def test_missing_observable(self):
        rec = MeasurementRecord(epsilon=0.0)
        with pytest.raises(MissingObservable):
            rec.value(LocalOperator.from_pauli("XZ"))

    def test_record_round_trip(self, tmp_path, six_site):
        _, rho, tmpl = six_site
        rec = MeasurementRecord.from_state(rho, 1e-4, 9)
        k = tmpl.evaluate(rec)
        rec.save(tmp_path / "r.json")
        k2 = tmpl.evaluate(MeasurementRecord.load(tmp_path / "r.json"))
        np.testing.assert_array_equal(k.data, k2.data)

    def test_matrix_round_trip(self, tmp_path, six_site):
        _, rho, tmpl = six_site
        k = tmpl.evaluate(MeasurementRecord.from_state(rho, 1e-4, 9))
        k.save(tmp_path / "K")
        k2 = ConstraintMatrix.load(tmp_path / "K")
        np.testing.assert_array_equal(k.data, k2.data)
        assert k2.row_labels == k.row_labels and k2.col_labels == k.col_labels
        assert k.head(10).shape == (10, 117)


class TestPriorSystems:
    def test_exact_prior_residual(self, six_site):
        model, rho, tmpl = six_site
        k_l, b = build_prior_system(tmpl.constraints, model.basis, MeasurementRecord.from_state(rho), model.c_h, tmpl)
        c_l = pack(model)[model.basis.n_hamiltonian :]
        assert np.linalg.norm(k_l.data @ c_l - b) <= 1e-8

    def test_zero_hamiltonian_gives_zero_rhs(self, six_site):
        model, rho, tmpl = six_site
        _, b = build_prior_system(tmpl.constraints, model.basis, MeasurementRecord.from_state(rho, 1e-3, 1),
                                  np.zeros(model.basis.n_hamiltonian), tmpl)
        assert not np.any(b)

    def test_known_dissipation(self):
        model = classical_ising_loss_model(4, 3)
        rho = find_steady_state(model).rho
        cs = single_site_constraints(4, "YZ")
        nh = model.basis.n_hamiltonian
        k_h, b = build_known_dissipation_system(cs, model.basis, MeasurementRecord.from_state(rho), pack(model)[nh:])
        assert k_h.shape == (8, nh)
        assert np.linalg.norm(k_h.data @ model.c_h - b) <= 1e-10

