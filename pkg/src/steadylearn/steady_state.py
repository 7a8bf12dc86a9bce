"""Stationary states of a :class:`LindbladModel`.

Three strategies share one entry point.  Short chains use a full dense
eigendecomposition of the superoperator.  Longer chains work in real Pauli
coordinates ``rho = 2**-n sum_P r_P P``: the identity coordinate is conserved,
so fixing ``r_I = 1`` turns ``L(rho) = 0`` into a square real system on the
traceless coordinates.  Up to six sites that system is factorized densely
(a shift-invert step at zero shift, which converges in one application); at
seven sites it is solved with restarted GMRES, falling back to a sparse LU.
The gap report comes from shift-inverted Arnoldi on the same factorization.
"""

from __future__ import annotations

import logging
import struct
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .model import DEFAULT_MAX_SITES, LindbladModel, apply, pauli_generator, pauli_to_state, superoperator, unvec, vec
from .pauli import DensityMatrix, DimensionError, as_array

log = logging.getLogger(__name__)

DENSE_MAX_SITES = 4
PAULI_LU_MAX_SITES = 6
_MAGIC = b"SLRHO\x00\x01\x00"


class DegenerateSteadyState(RuntimeError):
    """The generator has more than one (numerically) zero eigenvalue."""


class NoConvergence(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class SteadyStateResult:
    rho: DensityMatrix
    residual: float
    gap_report: tuple[float, float]
    raw_vector: np.ndarray
    method: str
    degenerate: bool = False

    @property
    def gap_ratio(self) -> float:
        small, second = self.gap_report
        return second / small if small > 0 else np.inf


def verify_steady_state(model: LindbladModel, rho: DensityMatrix | np.ndarray) -> float:
    """Frobenius norm of ``L(rho)``."""
    return float(np.linalg.norm(apply(model, rho)))


def _postprocess(v: np.ndarray) -> DensityMatrix:
    m = unvec(v)
    m = 0.5 * (m + m.conj().T)
    return DensityMatrix.from_array(m / np.trace(m).real)


def _dense_solve(model: LindbladModel):
    s = superoperator(model, dense=True)
    w, vecs = np.linalg.eig(s)
    order = np.argsort(np.abs(w))
    v = vecs[:, order[0]]
    rho = _postprocess(v)
    # One inverse-iteration polish on the nullspace direction.
    shift = 1e-13 * max(1.0, np.abs(s).max())
    try:
        polished = np.linalg.solve(s - shift * np.eye(s.shape[0]), vec(rho.data))
        candidate = _postprocess(polished)
        if verify_steady_state(model, candidate) < verify_steady_state(model, rho):
            rho, v = candidate, polished
    except np.linalg.LinAlgError:
        pass
    return rho, v, (float(abs(w[order[0]])), float(abs(w[order[1]])))


def _reduced_system(model: LindbladModel, max_sites: int):
    # With r_I fixed to 1 the stationarity condition on the traceless
    # coordinates is a nonsingular square system for a unique steady state.
    g = pauli_generator(model, max_sites=max_sites).tocsc()
    return g[1:, 1:].tocsc(), -g[1:, 0].toarray().ravel(), g


def _from_reduced(x: np.ndarray):
    r = np.concatenate([[1.0], x])
    rho = DensityMatrix.from_array(pauli_to_state(r)).hermitized()
    return rho, r


def _smallest_nonzero(a, solve, dim: int) -> float:
    op_inv = spla.LinearOperator((dim, dim), matvec=solve, dtype=float)
    try:
        w = spla.eigs(op_inv, k=1, which="LM", return_eigenvectors=False, tol=1e-10, maxiter=5000)
    except spla.ArpackNoConvergence:
        log.warning("ARPACK did not converge for the gap report")
        return float("nan")
    return float(1.0 / abs(w[0]))


def _pauli_lu_solve(model: LindbladModel, max_sites: int, compute_gap: bool):
    a, b, g = _reduced_system(model, max_sites)
    dim = a.shape[0]
    with warnings.catch_warnings():
        warnings.simplefilter("error", sla.LinAlgWarning)
        try:
            lu = sla.lu_factor(a.toarray(), check_finite=False)
            singular = False
        except (sla.LinAlgWarning, np.linalg.LinAlgError):
            lu, singular = None, True
    if singular:
        # Exactly singular reduced block: more than one stationary state.
        x = spla.lsqr(a, b, atol=1e-15, btol=1e-15)[0]
        rho, r = _from_reduced(x)
        return rho, r, (0.0, 0.0)
    x = sla.lu_solve(lu, b, check_finite=False)
    rho, r = _from_reduced(x)
    small = float(np.linalg.norm(g @ r) / np.linalg.norm(r))
    second = _smallest_nonzero(a, lambda v: sla.lu_solve(lu, v, check_finite=False), dim) if compute_gap else np.nan
    return rho, r, (small, second)


def _krylov_solve(model: LindbladModel, tol: float, max_sites: int, maxiter: int, compute_gap: bool):
    a, b, g = _reduced_system(model, max_sites)
    dim = a.shape[0]
    x, info = spla.gmres(a, b, rtol=1e-14, atol=0.0, restart=300, maxiter=maxiter)
    rho, r = _from_reduced(x)
    lu = None
    if info != 0 or verify_steady_state(model, rho) > tol:
        log.info("GMRES stalled (info=%d); falling back to sparse LU", info)
        lu = spla.splu(a, permc_spec="MMD_AT_PLUS_A")
        rho, r = _from_reduced(lu.solve(b))
    small = float(np.linalg.norm(g @ r) / np.linalg.norm(r))
    second = np.nan
    if compute_gap:
        if lu is None:
            lu = spla.splu(a, permc_spec="MMD_AT_PLUS_A")
        second = _smallest_nonzero(a, lu.solve, dim)
    return rho, r, (small, second)


def find_steady_state(
    model: LindbladModel,
    tol: float = 1e-10,
    *,
    method: str = "auto",
    degeneracy_ratio: float = 1e3,
    allow_degenerate: bool = False,
    max_sites: int = DEFAULT_MAX_SITES,
    maxiter: int = 50,
    compute_gap: bool = True,
) -> SteadyStateResult:
    """Solve ``L(rho) = 0``.

    ``method`` is ``"dense"``, ``"pauli-lu"``, ``"krylov"`` or ``"auto"``
    (dense up to four sites, Pauli LU up to six, Krylov beyond).  With
    ``compute_gap=False`` the second eigenvalue is not computed (reported as
    NaN) and no degeneracy check is made.  The result is Hermitized and trace-normalized.  When the two
    smallest superoperator eigenvalues are both below ``100 * tol`` (or their
    ratio is below ``degeneracy_ratio``) the state is not unique and
    :class:`DegenerateSteadyState` is raised unless ``allow_degenerate``.
    """
    if method == "auto":
        if model.n_sites <= DENSE_MAX_SITES:
            method = "dense"
        elif model.n_sites <= PAULI_LU_MAX_SITES:
            method = "pauli-lu"
        else:
            method = "krylov"
    if method == "dense":
        rho, raw, gap = _dense_solve(model)
    elif method == "pauli-lu":
        rho, raw, gap = _pauli_lu_solve(model, max_sites, compute_gap)
    elif method == "krylov":
        rho, raw, gap = _krylov_solve(model, tol, max_sites, maxiter, compute_gap)
    else:
        raise ValueError(f"unknown method {method!r}")

    small, second = gap
    degenerate = bool(second < 100 * tol or (small > 0 and second < degeneracy_ratio * small))
    if degenerate and not allow_degenerate:
        raise DegenerateSteadyState(f"two near-zero eigenvalues: {small:.3g}, {second:.3g}")
    residual = verify_steady_state(model, rho)
    if residual > tol and not degenerate:
        raise NoConvergence(f"steady-state residual {residual:.3g} above tolerance {tol:.3g} ({method})")
    return SteadyStateResult(rho, residual, gap, raw, method, degenerate)


# --------------------------------------------------------------------------
# Binary state files: 8-byte magic, uint64 site count, then complex128 data
# in row-major order, all little-endian.


def save_state(path, rho: DensityMatrix | np.ndarray) -> None:
    data = as_array(rho)
    n = int(round(np.log2(data.shape[0])))
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<Q", n))
        fh.write(np.ascontiguousarray(data, dtype="<c16").tobytes())


def load_state(path) -> DensityMatrix:
    with open(path, "rb") as fh:
        header = fh.read(16)
        if len(header) != 16 or header[:8] != _MAGIC:
            raise ValueError(f"{path}: not a steady-state file")
        (n,) = struct.unpack("<Q", header[8:])
        d = 1 << n
        data = np.frombuffer(fh.read(), dtype="<c16")
    if data.size != d * d:
        raise DimensionError(f"{path}: expected {d * d} entries, found {data.size}")
    return DensityMatrix(n, data.reshape(d, d).astype(complex))
