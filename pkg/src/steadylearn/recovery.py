"""Recover coefficient vectors from a constraint matrix.

The homogeneous problem ``K c = 0`` is solved by the right singular vector
of ``K`` with the smallest singular value.  The spectrum of ``K^T K`` is
reported as squared singular values (padded with zeros when ``K`` has fewer
rows than columns).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .constraints import ConstraintMatrix
from .pauli import DimensionError

ILL_DETERMINED_RATIO = 10.0


class DegenerateSpectrum(ValueError):
    """A nonzero-mode eigenvalue of ``K^T K`` is not positive."""


@dataclass(frozen=True, eq=False)
class RecoveryResult:
    c_hat: np.ndarray
    spectrum: np.ndarray
    delta_est: float
    sign_convention: int
    ill_determined: bool
    epsilon: float = 0.0
    flags: dict = field(default_factory=dict)

    @property
    def gap_ratio(self) -> float:
        lam = self.spectrum[::-1]
        return float(lam[1] / lam[0]) if lam[0] > 0 else np.inf

    def to_dict(self) -> dict:
        return {
            "c_hat": self.c_hat.tolist(),
            "spectrum": self.spectrum.tolist(),
            "delta_est": self.delta_est,
            "epsilon": self.epsilon,
            "flags": {"sign_convention": self.sign_convention, "ill_determined": self.ill_determined, **self.flags},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "RecoveryResult":
        flags = dict(data["flags"])
        return cls(
            np.asarray(data["c_hat"], dtype=float),
            np.asarray(data["spectrum"], dtype=float),
            float(data["delta_est"]),
            int(flags.pop("sign_convention")),
            bool(flags.pop("ill_determined")),
            float(data.get("epsilon", 0.0)),
            flags,
        )


def _as_array(k) -> np.ndarray:
    return k.data if isinstance(k, ConstraintMatrix) else np.asarray(k, dtype=float)


def fix_sign(v: np.ndarray) -> tuple[np.ndarray, int]:
    """Flip ``v`` so that its entry of largest magnitude is positive."""
    s = 1 if v[np.argmax(np.abs(v))] >= 0 else -1
    return s * v, s


def kernel_spectrum(k) -> tuple[np.ndarray, np.ndarray]:
    """Nonincreasing eigenvalues of ``K^T K`` and the matching right singular vectors."""
    a = _as_array(k)
    n, m = a.shape
    _, s, vt = sla.svd(a, full_matrices=True, lapack_driver="gesdd")
    lam = np.zeros(m)
    lam[: len(s)] = s**2
    return lam, vt


def error_estimate(spectrum, epsilon: float) -> float:
    """``epsilon * sqrt(sum_{m>0} 1/lambda_m)`` for a spectrum in any order."""
    lam = np.sort(np.asarray(spectrum, dtype=float))
    if epsilon == 0:
        return 0.0
    rest = lam[1:]
    if np.any(rest <= 0):
        raise DegenerateSpectrum("kernel of K^T K is more than one-dimensional")
    return float(epsilon * np.sqrt(np.sum(1.0 / rest)))


def error_bound(spectrum, epsilon: float) -> float:
    """Gap-dominated bound ``epsilon * sqrt(M / lambda_1)``."""
    lam = np.sort(np.asarray(spectrum, dtype=float))
    if epsilon == 0:
        return 0.0
    if lam[1] <= 0:
        raise DegenerateSpectrum("kernel of K^T K is more than one-dimensional")
    return float(epsilon * np.sqrt(len(lam) / lam[1]))


def recover(k, epsilon: float = 0.0, rel_floor: float = 1e-24) -> RecoveryResult:
    """Unit vector minimizing ``||K c||``.

    The result is flagged ``ill_determined`` when the second-smallest
    eigenvalue of ``K^T K`` is less than ten times the smallest, or is itself
    numerically zero (below ``rel_floor`` times the largest eigenvalue).
    ``delta_est`` is infinite when the kernel is not one-dimensional.
    """
    a = _as_array(k)
    if a.ndim != 2 or a.shape[1] < 2 or a.shape[0] < 1:
        raise DimensionError(f"need an N x M matrix with N >= 1, M >= 2, got {a.shape}")
    lam, vt = kernel_spectrum(a)
    c_hat, sign = fix_sign(vt[-1].copy())
    c_hat /= np.linalg.norm(c_hat)
    lam_min, lam_1, lam_max = lam[-1], lam[-2], lam[0]
    zero_second = lam_1 <= max(rel_floor * lam_max, 1e-300)
    ill = bool(zero_second or lam_1 < ILL_DETERMINED_RATIO * lam_min)
    try:
        est = error_estimate(lam, epsilon)
    except DegenerateSpectrum:
        est = np.inf
    return RecoveryResult(c_hat, lam, est, sign, ill, float(epsilon))


def reconstruction_error(c_hat, c_true) -> float:
    """Sign-minimized distance between the normalized vectors."""
    a = np.asarray(c_hat, dtype=float)
    b = np.asarray(c_true, dtype=float)
    if a.shape != b.shape:
        raise DimensionError(f"vectors of length {a.shape} and {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("zero-norm coefficient vector")
    a, b = a / na, b / nb
    return float(min(np.linalg.norm(a - b), np.linalg.norm(a + b)))


def recover_with_prior(k_l, b) -> tuple[np.ndarray, float]:
    """Least-squares ``c_l`` for ``K_l c_l = b`` and the residual norm.

    Uses an SVD-based solve, so rank-deficient systems give the minimum-norm
    solution.
    """
    a = _as_array(k_l)
    b = np.asarray(b, dtype=float)
    if a.shape[0] != b.shape[0]:
        raise DimensionError(f"K_l has {a.shape[0]} rows but b has {b.shape[0]}")
    c, *_ = sla.lstsq(a, b, lapack_driver="gelsd")
    return c, float(np.linalg.norm(a @ c - b))
