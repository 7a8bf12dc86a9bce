import numpy as np
import pytest

from steadylearn.constraints import MeasurementRecord, constraint_set
from steadylearn.model import pack, random_nn_model
from steadylearn.recovery import reconstruction_error
from steadylearn.steady_state import find_steady_state
from steadylearn.stitching import (
    PatchRecovery,
    SharedBlockTooSmall,
    SignAmbiguous,
    partition,
    patch_columns,
    patch_constraints,
    recover_patches,
    stitch,
    stitched_error,
    synthetic_layout,
    synthetic_stitch_details,
    synthetic_stitch_trial,
)


class TestLayout:
    @pytest.mark.parametrize("n, count", [(98, 24), (6, 1), (14, 3)])
    def test_patch_counts(self, n, count):
        assert partition(n, 6, 4).n_patches == count

    def test_non_tiling(self):
        with pytest.raises(ValueError):
            partition(13, 6, 4)
        with pytest.raises(ValueError):
            partition(100, 6, 4)  # (100 - 6) is not a multiple of 4
        with pytest.raises(ValueError):
            partition(5, 6, 4)

    def test_bounds_and_interior(self):
        lay = partition(14, 6, 4)
        assert [lay.bounds(i) for i in range(3)] == [(0, 5), (4, 9), (8, 13)]
        assert [lay.interior(i) for i in range(3)] == [(0, 4), (5, 8), (9, 13)]
        with pytest.raises(IndexError):
            lay.bounds(3)

    def test_interiors_tile_the_chain(self):
        lay = partition(30, 6, 4)
        covered = [s for i in range(lay.n_patches) for s in range(*np.add(lay.interior(i), (0, 1)))]
        assert covered == list(range(30))

    def test_bulk_patch_constraints(self):
        cs = patch_constraints(partition(14, 6, 4), 1)
        assert len(cs) == 12 + 27 + 72

    def test_single_patch_is_full_set(self):
        cs = patch_constraints(partition(6, 6, 4), 0)
        assert cs.strings == constraint_set(6, 3).strings

    def test_patch_columns_inside_patch(self):
        model = random_nn_model(10, 0.5, 0)
        lay = partition(10, 6, 4)
        total = set()
        for i in range(lay.n_patches):
            cols = patch_columns(lay, i, model.basis)
            total.update(cols)
        assert total == set(model.basis.columns)


def _random_patches(rng, sizes=(10, 12, 9), shared=3):
    index_sets = synthetic_layout(len(sizes), max(sizes), shared)
    n = index_sets[-1][-1] + 1
    truth = rng.normal(size=n)
    labels = [f"t{k}" for k in range(n)]
    recs = [PatchRecovery(j, tuple(labels[k] for k in idx), truth[idx]) for j, idx in enumerate(index_sets)]
    return truth, labels, recs


class TestStitch:
    def test_single_patch_identity(self, rng):
        v = rng.normal(size=7)
        res = stitch([PatchRecovery(0, tuple("abcdefg"), 3 * v)])
        np.testing.assert_allclose(res.coefs, v / np.linalg.norm(v))

    def test_exact_patches_recover_truth(self, rng):
        truth, labels, recs = _random_patches(rng)
        res = stitch(recs)
        assert reconstruction_error(res.vector_for(labels), truth) < 1e-12

    def test_gauge_invariance(self, rng):
        truth, labels, recs = _random_patches(rng)
        base = stitch(recs).vector_for(labels)
        moved = [recs[0], PatchRecovery(1, recs[1].labels, -4.2 * recs[1].coefs), recs[2]]
        np.testing.assert_allclose(stitch(moved).vector_for(labels), base, atol=1e-14)

    def test_audit(self, rng):
        _, _, recs = _random_patches(rng)
        res = stitch(recs)
        assert len(res.audit["steps"]) == 2
        assert res.audit["steps"][0]["n_shared"] == 3
        assert '"scales"' in res.audit_json()

    def test_shared_block_too_small(self):
        a = PatchRecovery(0, ("a", "b", "c"), np.array([1.0, 0.5, 0.0]))
        b = PatchRecovery(1, ("c", "d"), np.array([0.0, 1.0]))
        with pytest.raises(SharedBlockTooSmall):
            stitch([a, b])
        with pytest.raises(SharedBlockTooSmall):
            stitch([a, PatchRecovery(1, ("x", "y"), np.array([1.0, 1.0]))])

    def test_sign_ambiguous(self):
        a = PatchRecovery(0, ("a", "b"), np.array([1.0, 0.01]), error_estimate=0.01)
        b = PatchRecovery(1, ("b", "c"), np.array([0.01, 1.0]))
        with pytest.raises(SignAmbiguous):
            stitch([a, b])

    @pytest.mark.parametrize("n, size, stride", [(6, 6, 4), (6, 4, 2), (7, 5, 2)])
    def test_exact_state_stitching(self, n, size, stride):
        model = random_nn_model(n, 0.7, 3)
        rho = find_steady_state(model, compute_gap=False).rho
        lay = partition(n, size, stride)
        res = stitch(recover_patches(lay, model.basis, MeasurementRecord.from_state(rho)))
        assert len(res.labels) == model.basis.n_params
        assert stitched_error(res, model.basis, pack(model)) <= 1e-8


class TestSynthetic:
    def test_layout(self):
        sets = synthetic_layout(3, 4, 2)
        assert sets[0] == list(range(6))
        assert sets[1] == list(range(4, 12))
        assert sets[2] == list(range(10, 16))

    def test_zero_noise(self):
        assert synthetic_stitch_trial(8, 0.0, 1) < 1e-13

    def test_single_patch_rotation(self):
        vals = [synthetic_stitch_trial(1, 1e-4, s) for s in range(20)]
        assert max(vals) <= 1e-4 * (1 + 1e-6)
        assert np.median(vals) > 0.8e-4

    def test_determinism(self):
        a = synthetic_stitch_details(16, 1e-4, 5)
        b = synthetic_stitch_details(16, 1e-4, 5)
        assert a.delta_total == b.delta_total
        np.testing.assert_array_equal(a.log_scale_errors, b.log_scale_errors)
        assert a.log_scale_errors[0] == 0
        assert a.regime_ok
