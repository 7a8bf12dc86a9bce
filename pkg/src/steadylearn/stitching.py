"""Patch-wise recovery on a chain and stitching of the patch vectors.

A patch recovery fixes its coefficient vector only up to scale and sign.
Consecutive patches share the terms acting near their overlap; the ratio of
the shared-block norms fixes the relative scale and the shared term of
largest magnitude fixes the relative sign.  Scale factors accumulate from
left to right, overlapping coefficients are averaged and the result is
normalized.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .constraints import ConstraintSet, KTemplate, MeasurementRecord, column_label_strings, constraint_set
from .model import Column, OperatorBasis
from .recovery import reconstruction_error, recover


class SharedBlockTooSmall(ValueError):
    """A shared block norm is below the floor, so the relative scale is undefined."""


class SignAmbiguous(ValueError):
    """The sign reference coefficient is not clearly larger than the patch error."""


@dataclass(frozen=True)
class PatchLayout:
    n_sites: int
    patch_size: int = 6
    stride: int = 4
    edge: int = 1

    def __post_init__(self):
        if not 1 <= self.stride <= self.patch_size <= self.n_sites:
            raise ValueError(f"need 1 <= stride <= patch_size <= n_sites, got {self}")
        if (self.n_sites - self.patch_size) % self.stride:
            raise ValueError(
                f"patches of {self.patch_size} with stride {self.stride} do not tile {self.n_sites} sites"
            )
        if self.n_patches > 1 and 2 * self.edge > self.overlap:
            raise ValueError("edge exclusion larger than half the overlap leaves sites uncovered")

    @property
    def overlap(self) -> int:
        return self.patch_size - self.stride

    @property
    def n_patches(self) -> int:
        return (self.n_sites - self.patch_size) // self.stride + 1

    def bounds(self, i: int) -> tuple[int, int]:
        """First and last site of patch ``i``."""
        self._check(i)
        lo = i * self.stride
        return lo, lo + self.patch_size - 1

    def interior(self, i: int) -> tuple[int, int]:
        """Sites whose constraints belong to patch ``i``.

        ``edge`` sites are dropped on every side that faces a neighbouring
        patch; chain ends are kept.
        """
        lo, hi = self.bounds(i)
        if i > 0:
            lo += self.edge
        if i < self.n_patches - 1:
            hi -= self.edge
        return lo, hi

    def _check(self, i: int) -> None:
        if not 0 <= i < self.n_patches:
            raise IndexError(f"patch index {i} out of range for {self.n_patches} patches")


def partition(n_sites: int, patch_size: int = 6, stride: int = 4, edge: int = 1) -> PatchLayout:
    return PatchLayout(n_sites, patch_size, stride, edge)


def patch_constraints(layout: PatchLayout, patch_index: int, k_max: int = 3, ordering_seed: int = 0) -> ConstraintSet:
    """All strings of span at most ``k_max`` inside the patch interior."""
    lo, hi = layout.interior(patch_index)
    return constraint_set(layout.n_sites, min(k_max, hi - lo + 1), ordering_seed, window=(lo, hi))


def _column_support(basis: OperatorBasis, col: Column) -> int:
    mask = 0
    for op in basis.column_operators(col):
        mask |= op.support_mask
    return mask


def _site_mask(n_sites: int, lo: int, hi: int) -> int:
    return sum(1 << (n_sites - 1 - j) for j in range(lo, hi + 1))


def patch_columns(layout: PatchLayout, patch_index: int, basis: OperatorBasis) -> list[Column]:
    """Global columns supported inside the patch that touch its interior."""
    n = layout.n_sites
    patch = _site_mask(n, *layout.bounds(patch_index))
    inner = _site_mask(n, *layout.interior(patch_index))
    out = []
    for col in basis.columns:
        m = _column_support(basis, col)
        if m & inner and not m & ~patch:
            out.append(col)
    return out


@dataclass(frozen=True, eq=False)
class PatchRecovery:
    """Unit-norm coefficients of one patch, labelled by global term identity."""

    patch_index: int
    labels: tuple[str, ...]
    coefs: np.ndarray
    error_estimate: float = 0.0

    def __post_init__(self):
        c = np.asarray(self.coefs, dtype=float)
        if c.shape != (len(self.labels),):
            raise ValueError("one coefficient per label required")
        object.__setattr__(self, "coefs", c / np.linalg.norm(c))

    def blocks(self, left: "PatchRecovery | None", right: "PatchRecovery | None") -> dict[str, list[str]]:
        """Partition labels into left-shared, interior and right-shared."""
        ls = set(left.labels) if left else set()
        rs = set(right.labels) if right else set()
        return {
            "left": [lab for lab in self.labels if lab in ls],
            "interior": [lab for lab in self.labels if lab not in ls and lab not in rs],
            "right": [lab for lab in self.labels if lab in rs],
        }


@dataclass(frozen=True, eq=False)
class StitchResult:
    labels: tuple[str, ...]
    coefs: np.ndarray
    scales: tuple[float, ...]
    signs: tuple[int, ...]
    audit: dict = field(default_factory=dict)

    def vector_for(self, labels: Sequence[str]) -> np.ndarray:
        """Coefficients reordered to ``labels`` (zero for absent labels)."""
        pos = {lab: i for i, lab in enumerate(self.labels)}
        return np.array([self.coefs[pos[lab]] if lab in pos else 0.0 for lab in labels])

    def audit_json(self) -> str:
        return json.dumps(self.audit, indent=1)


def stitch(recoveries: Sequence[PatchRecovery], floor: float = 1e-6, sign_margin: float = 10.0) -> StitchResult:
    """Merge patch vectors into one unit-norm vector (left-to-right fold)."""
    if not recoveries:
        raise ValueError("nothing to stitch")
    scales = [1.0]
    signs = [1]
    steps = []
    for prev, cur in zip(recoveries, recoveries[1:]):
        pos_prev = {lab: i for i, lab in enumerate(prev.labels)}
        pos_cur = {lab: i for i, lab in enumerate(cur.labels)}
        shared = [lab for lab in prev.labels if lab in pos_cur]
        a = np.array([prev.coefs[pos_prev[lab]] for lab in shared])
        b = np.array([cur.coefs[pos_cur[lab]] for lab in shared])
        na, nb = float(np.linalg.norm(a)), float(np.linalg.norm(b))
        if not shared or na < floor or nb < floor:
            raise SharedBlockTooSmall(
                f"patches {prev.patch_index}/{cur.patch_index}: shared norms {na:.3g}, {nb:.3g} below {floor:.3g}"
            )
        ref = int(np.argmax(np.abs(a)))
        if abs(a[ref]) < sign_margin * prev.error_estimate:
            raise SignAmbiguous(f"reference term {shared[ref]!r} too small relative to the patch error")
        rel_sign = 1 if np.sign(a[ref]) == np.sign(b[ref]) else -1
        scales.append(scales[-1] * na / nb)
        signs.append(signs[-1] * rel_sign)
        steps.append(
            {
                "patches": [prev.patch_index, cur.patch_index],
                "n_shared": len(shared),
                "shared_norms": [na, nb],
                "sign_reference": shared[ref],
                "relative_sign": rel_sign,
                "cumulative_scale": scales[-1],
            }
        )

    sums: dict[str, float] = {}
    counts: dict[str, int] = {}
    order: list[str] = []
    for rec, s, g in zip(recoveries, scales, signs):
        for lab, c in zip(rec.labels, rec.coefs):
            if lab not in sums:
                order.append(lab)
                sums[lab] = 0.0
                counts[lab] = 0
            sums[lab] += g * s * c
            counts[lab] += 1
    coefs = np.array([sums[lab] / counts[lab] for lab in order])
    coefs /= np.linalg.norm(coefs)
    audit = {
        "merge": "average of rescaled overlapping estimates",
        "sign_rule": "largest-magnitude shared term of the earlier patch",
        "patches": [r.patch_index for r in recoveries],
        "scales": scales,
        "signs": signs,
        "steps": steps,
    }
    return StitchResult(tuple(order), coefs, tuple(scales), tuple(signs), audit)


# --------------------------------------------------------------------------
# Exact-state patch recovery


def recover_patches(
    layout: PatchLayout,
    basis: OperatorBasis,
    record: MeasurementRecord,
    k_max: int = 3,
) -> list[PatchRecovery]:
    """Recover every patch of ``layout`` from measurements inside its interior."""
    out = []
    for i in range(layout.n_patches):
        cols = patch_columns(layout, i, basis)
        template = KTemplate(patch_constraints(layout, i, k_max), basis, cols)
        res = recover(template.evaluate(record), record.epsilon if record.mode != "entry" else record.epsilon)
        est = res.delta_est if np.isfinite(res.delta_est) else 0.0
        out.append(PatchRecovery(i, template.col_labels(), res.c_hat, est))
    return out


def stitched_error(result: StitchResult, basis: OperatorBasis, c_true: np.ndarray) -> float:
    """Distance between the stitched vector and the truth on the stitched terms."""
    labels = column_label_strings(basis)
    pos = {lab: j for j, lab in enumerate(labels)}
    truth = np.array([c_true[pos[lab]] for lab in result.labels])
    return reconstruction_error(result.coefs, truth)


# --------------------------------------------------------------------------
# Synthetic stitching trials


@dataclass(frozen=True)
class SyntheticTrial:
    delta_total: float
    log_scale_errors: np.ndarray
    regime_ok: bool


def synthetic_layout(n_patches: int, private: int, shared: int) -> list[list[int]]:
    """Index sets of each patch in a chain of blocks ``S0 P0 S1 P1 ... `` without end shares."""
    patches = []
    start = 0
    for j in range(n_patches):
        left = list(range(start, start + shared)) if j > 0 else []
        body_start = start + (shared if j > 0 else 0)
        body = list(range(body_start, body_start + private))
        right = list(range(body[-1] + 1, body[-1] + 1 + shared)) if j < n_patches - 1 else []
        patches.append(left + body + right)
        start = body[-1] + 1
    return patches


def synthetic_stitch_details(
    n_patches: int,
    delta: float,
    rng_seed: int | np.random.SeedSequence | None = None,
    private: int = 30,
    shared: int = 2,
) -> SyntheticTrial:
    """Stitch noisy copies of a random global vector and measure the error.

    Each patch gets the true restriction, normalized, plus an independent
    random direction of norm ``delta``; it is renormalized and then put in an
    arbitrary gauge (positive scale and sign).  ``log_scale_errors[j]`` is the
    log of patch ``j``'s cumulative scale relative to the exact one.
    """
    rng = np.random.default_rng(rng_seed)
    index_sets = synthetic_layout(n_patches, private, shared)
    n_terms = index_sets[-1][-1] + 1
    truth = rng.standard_normal(n_terms)
    truth /= np.linalg.norm(truth)
    labels = [f"t{k}" for k in range(n_terms)]
    recs, true_scales = [], []
    for j, idx in enumerate(index_sets):
        v = truth[idx]
        true_scales.append(np.linalg.norm(v))
        v = v / np.linalg.norm(v)
        u = rng.standard_normal(len(idx))
        v = v + delta * u / np.linalg.norm(u)
        gauge = rng.uniform(0.5, 2.0) * rng.choice([-1.0, 1.0])
        recs.append(PatchRecovery(j, tuple(labels[k] for k in idx), gauge * v))
    res = stitch(recs, floor=0.0, sign_margin=0.0)
    # Cumulative scale s_j maps unit patch j onto patch 0's normalization; the
    # exact value is |truth_j| / |truth_0|.
    exact = np.array(true_scales) / true_scales[0]
    got = np.array(res.scales)
    log_err = np.log(got / exact)
    delta_total = reconstruction_error(res.vector_for(labels), truth)
    return SyntheticTrial(delta_total, log_err, bool(np.sqrt(n_patches) * delta < 0.1))


def synthetic_stitch_trial(
    n_patches: int,
    delta: float,
    rng_seed: int | np.random.SeedSequence | None = None,
    private: int = 30,
    shared: int = 2,
) -> float:
    """``Delta_total`` of one synthetic stitching trial."""
    return synthetic_stitch_details(n_patches, delta, rng_seed, private, shared).delta_total
