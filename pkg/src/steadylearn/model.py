"""Local Lindbladians in a fixed operator basis.

The generator is

    rho_dot = -i sum_i c_i [h_i, rho]
              + sum_{r,s} c_rs/2 ([l_r rho, l_s^dag] + [l_r, rho l_s^dag])

with real ``c_i`` and a Hermitian dissipation matrix ``c_rs`` that is nonzero
only on the ``allowed_pairs`` of the basis.  The packed real parameter vector
has layout ``[c_i..., c_rr..., Re c_rs (r>s)..., Im c_rs (r>s)...]``.

Superoperators use column stacking: ``vec(A rho B) = (B^T kron A) vec(rho)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp

from .pauli import (
    DensityMatrix,
    DimensionError,
    LocalOperator,
    PauliString,
    as_array,
    sigma_minus,
)

DEFAULT_MAX_SITES = 7
_PAULI = "XYZ"


class SizeError(RuntimeError):
    """Requested dense object would exceed the configured memory budget."""


class Column(NamedTuple):
    """Identity of one parameter: kind is ``h``, ``d``, ``re`` or ``im``."""

    kind: str
    r: int
    s: int = -1


@dataclass(frozen=True, eq=False)
class OperatorBasis:
    hamiltonian_ops: tuple[LocalOperator, ...]
    jump_ops: tuple[LocalOperator, ...]
    allowed_pairs: tuple[tuple[int, int], ...]

    def __post_init__(self):
        object.__setattr__(self, "hamiltonian_ops", tuple(self.hamiltonian_ops))
        object.__setattr__(self, "jump_ops", tuple(self.jump_ops))
        object.__setattr__(self, "allowed_pairs", tuple((int(r), int(s)) for r, s in self.allowed_pairs))
        ops = self.hamiltonian_ops + self.jump_ops
        if not ops:
            raise ValueError("empty basis")
        n = ops[0].n_sites
        if any(op.n_sites != n for op in ops):
            raise DimensionError("basis operators on different chain lengths")
        for h in self.hamiltonian_ops:
            if not h.is_hermitian():
                raise ValueError(f"Hamiltonian basis operator {h} is not Hermitian")
        seen = set()
        for r, s in self.allowed_pairs:
            if r < s:
                raise ValueError(f"allowed pair ({r}, {s}) must have r >= s")
            if not (0 <= s and r < len(self.jump_ops)):
                raise ValueError(f"allowed pair ({r}, {s}) out of range")
            if (r, s) in seen:
                raise ValueError(f"duplicate allowed pair ({r}, {s})")
            seen.add((r, s))
        for r, s in self.allowed_pairs:
            if r != s and ((r, r) not in seen or (s, s) not in seen):
                raise ValueError(f"pair ({r}, {s}) requires both diagonal entries")

    @property
    def n_sites(self) -> int:
        return (self.hamiltonian_ops + self.jump_ops)[0].n_sites

    @cached_property
    def diag_pairs(self) -> tuple[int, ...]:
        return tuple(r for r, s in self.allowed_pairs if r == s)

    @cached_property
    def off_pairs(self) -> tuple[tuple[int, int], ...]:
        return tuple((r, s) for r, s in self.allowed_pairs if r != s)

    @property
    def n_hamiltonian(self) -> int:
        return len(self.hamiltonian_ops)

    @property
    def n_dissipative(self) -> int:
        return len(self.diag_pairs) + 2 * len(self.off_pairs)

    @property
    def n_params(self) -> int:
        return self.n_hamiltonian + self.n_dissipative

    @cached_property
    def columns(self) -> tuple[Column, ...]:
        cols = [Column("h", i) for i in range(self.n_hamiltonian)]
        cols += [Column("d", r, r) for r in self.diag_pairs]
        cols += [Column("re", r, s) for r, s in self.off_pairs]
        cols += [Column("im", r, s) for r, s in self.off_pairs]
        return tuple(cols)

    def column_operators(self, col: Column) -> tuple[LocalOperator, ...]:
        if col.kind == "h":
            return (self.hamiltonian_ops[col.r],)
        return (self.jump_ops[col.r], self.jump_ops[col.s])

    def column_label(self, col: Column) -> tuple[str, ...]:
        """Basis-independent identity of a column, built from operator text."""
        if col.kind == "h":
            return ("h", self.hamiltonian_ops[col.r].to_text())
        return (col.kind, self.jump_ops[col.r].to_text(), self.jump_ops[col.s].to_text())

    def column_labels(self) -> list[tuple[str, ...]]:
        return [self.column_label(c) for c in self.columns]

    @cached_property
    def dissipative_slice(self) -> slice:
        return slice(self.n_hamiltonian, self.n_params)

    def pair_blocks(self) -> list[list[int]]:
        """Connected groups of jump indices linked by allowed pairs."""
        parent = list(range(len(self.jump_ops)))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        used = set()
        for r, s in self.allowed_pairs:
            used.update((r, s))
            parent[find(r)] = find(s)
        groups: dict[int, list[int]] = {}
        for r in sorted(used):
            groups.setdefault(find(r), []).append(r)
        return list(groups.values())

    def restrict(self, keep_columns: Sequence[Column]) -> "OperatorBasis":
        """Sub-basis with only the listed columns; ``im`` columns follow their ``re`` partner."""
        keep = set(keep_columns)
        h_idx = [c.r for c in self.columns if c.kind == "h" and c in keep]
        pairs = [p for p in self.allowed_pairs if Column("d" if p[0] == p[1] else "re", *p) in keep]
        jumps = sorted({i for p in pairs for i in p})
        remap = {old: new for new, old in enumerate(jumps)}
        return OperatorBasis(
            tuple(self.hamiltonian_ops[i] for i in h_idx),
            tuple(self.jump_ops[i] for i in jumps),
            tuple((remap[r], remap[s]) for r, s in pairs),
        )


@dataclass(frozen=True, eq=False)
class LindbladModel:
    basis: OperatorBasis
    c_h: np.ndarray
    c_d: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        c_h = np.asarray(self.c_h, dtype=float).copy()
        nj = len(self.basis.jump_ops)
        c_d = np.asarray(self.c_d, dtype=complex).reshape(nj, nj).copy()
        if c_h.shape != (self.basis.n_hamiltonian,):
            raise DimensionError(f"c_h has shape {c_h.shape}, basis needs {self.basis.n_hamiltonian}")
        scale = max(1.0, float(np.max(np.abs(c_d), initial=0.0)))
        if np.max(np.abs(c_d - c_d.conj().T), initial=0.0) > 1e-12 * scale:
            raise ValueError("dissipation matrix is not Hermitian")
        mask = np.zeros((nj, nj), dtype=bool)
        for r, s in self.basis.allowed_pairs:
            mask[r, s] = mask[s, r] = True
        if np.any(np.abs(c_d[~mask]) > 0):
            raise ValueError("dissipation matrix has entries outside the allowed pairs")
        c_d = 0.5 * (c_d + c_d.conj().T)
        c_h.flags.writeable = False
        c_d.flags.writeable = False
        object.__setattr__(self, "c_h", c_h)
        object.__setattr__(self, "c_d", c_d)

    @property
    def n_sites(self) -> int:
        return self.basis.n_sites

    def hamiltonian(self) -> LocalOperator:
        out = LocalOperator.zero(self.n_sites)
        for c, h in zip(self.c_h, self.basis.hamiltonian_ops):
            out = out + float(c) * h
        return out

    @cached_property
    def effective_jumps(self) -> tuple[tuple[float, LocalOperator], ...]:
        """Diagonalize ``c_d`` block by block: sum_rs c_rs l_r . l_s^dag = sum_k w_k L_k . L_k^dag.

        Weights may be negative for recovered (non-PSD) matrices.
        """
        out = []
        for block in self.basis.pair_blocks():
            sub = self.c_d[np.ix_(block, block)]
            if not np.any(sub):
                continue
            w, u = np.linalg.eigh(sub)
            for k in range(len(block)):
                if abs(w[k]) < 1e-15:
                    continue
                op = LocalOperator.zero(self.n_sites)
                for a, r in enumerate(block):
                    op = op + complex(u[a, k]) * self.basis.jump_ops[r]
                out.append((float(w[k]), op))
        return tuple(out)

    @cached_property
    def _dense_parts(self):
        h = self.hamiltonian().dense()
        jumps = []
        for w, op in self.effective_jumps:
            m = op.dense()
            jumps.append((w, m, m.conj().T @ m))
        return h, jumps

    def min_dissipation_eigenvalue(self) -> float:
        if not self.c_d.size:
            return 0.0
        return float(np.linalg.eigvalsh(self.c_d)[0])

    def with_coefficients(self, c_h=None, c_d=None) -> "LindbladModel":
        return LindbladModel(
            self.basis,
            self.c_h if c_h is None else c_h,
            self.c_d if c_d is None else c_d,
            dict(self.meta),
        )


# --------------------------------------------------------------------------
# Generator action


def apply(model: LindbladModel, rho: DensityMatrix | np.ndarray) -> np.ndarray:
    """``L(rho)`` as a dense matrix."""
    data = as_array(rho)
    d = 1 << model.n_sites
    if data.shape != (d, d):
        raise DimensionError(f"state of shape {data.shape} for a {model.n_sites}-site model")
    h, jumps = model._dense_parts
    out = -1j * (h @ data - data @ h)
    for w, m, mdm in jumps:
        out += w * (m @ data @ m.conj().T - 0.5 * (mdm @ data + data @ mdm))
    return out


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v: np.ndarray) -> np.ndarray:
    d = int(round(np.sqrt(v.shape[0])))
    return np.asarray(v).reshape((d, d), order="F")


def superoperator(model: LindbladModel, max_sites: int = DEFAULT_MAX_SITES, dense: bool = False):
    """Matrix of ``L`` acting on column-stacked density matrices.

    Returned as CSR unless ``dense`` is set.  Chains longer than ``max_sites``
    raise :class:`SizeError`.
    """
    n = model.n_sites
    if n > max_sites:
        raise SizeError(f"superoperator for {n} sites exceeds budget of {max_sites} sites")
    d = 1 << n
    eye = sp.identity(d, dtype=complex, format="csr")
    h = model.hamiltonian().sparse()
    out = -1j * (sp.kron(eye, h) - sp.kron(h.T, eye))
    for w, op in model.effective_jumps:
        m = op.sparse()
        mdm = (m.conj().T @ m).tocsr()
        out = out + w * (sp.kron(m.conj(), m) - 0.5 * sp.kron(eye, mdm) - 0.5 * sp.kron(mdm.T, eye))
    out = sp.csr_matrix(out)
    out.eliminate_zeros()
    return out.toarray() if dense else out


# --------------------------------------------------------------------------
# Packing


def pack(model: LindbladModel) -> np.ndarray:
    b = model.basis
    c = model.c_d
    return np.concatenate(
        [
            model.c_h,
            np.array([c[r, r].real for r in b.diag_pairs]),
            np.array([c[r, s].real for r, s in b.off_pairs]),
            np.array([c[r, s].imag for r, s in b.off_pairs]),
        ]
    )


def unpack(basis: OperatorBasis, values: Sequence[float]) -> LindbladModel:
    """Inverse of :func:`pack`.  The dissipation matrix is not projected to PSD."""
    v = np.asarray(values, dtype=float)
    if v.shape != (basis.n_params,):
        raise DimensionError(f"vector of length {v.shape} for basis with {basis.n_params} parameters")
    nh, nd, no = basis.n_hamiltonian, len(basis.diag_pairs), len(basis.off_pairs)
    nj = len(basis.jump_ops)
    c_d = np.zeros((nj, nj), dtype=complex)
    for k, r in enumerate(basis.diag_pairs):
        c_d[r, r] = v[nh + k]
    for k, (r, s) in enumerate(basis.off_pairs):
        val = v[nh + nd + k] + 1j * v[nh + nd + no + k]
        c_d[r, s] = val
        c_d[s, r] = np.conj(val)
    return LindbladModel(basis, v[:nh], c_d)


# --------------------------------------------------------------------------
# Bases and random ensembles


def _site_pauli(n: int, letters: dict[int, str]) -> LocalOperator:
    return LocalOperator.from_pauli(PauliString.from_sites(n, letters))


def nn_hamiltonian_basis(n_sites: int) -> list[LocalOperator]:
    """On-site Paulis for every site, then all nine Pauli pairs on every bond (open chain)."""
    ops = [_site_pauli(n_sites, {j: a}) for j in range(n_sites) for a in _PAULI]
    ops += [
        _site_pauli(n_sites, {j: a, j + 1: b}) for j in range(n_sites - 1) for a in _PAULI for b in _PAULI
    ]
    return ops


def _pairs_within(groups: Sequence[Sequence[int]]) -> list[tuple[int, int]]:
    pairs: list[tuple[int, int]] = []
    seen = set()
    for g in groups:
        for r in g:
            if (r, r) not in seen:
                seen.add((r, r))
                pairs.append((r, r))
    for g in groups:
        for a, r in enumerate(g):
            for s in g[:a]:
                p = (max(r, s), min(r, s))
                if p not in seen:
                    seen.add(p)
                    pairs.append(p)
    return pairs


def onsite_basis(n_sites: int, hamiltonian_ops: Sequence[LocalOperator] | None = None) -> OperatorBasis:
    """On-site Pauli jump basis with pairs restricted to a single site."""
    if hamiltonian_ops is None:
        hamiltonian_ops = nn_hamiltonian_basis(n_sites)
    jumps = [_site_pauli(n_sites, {j: a}) for j in range(n_sites) for a in _PAULI]
    groups = [[3 * j, 3 * j + 1, 3 * j + 2] for j in range(n_sites)]
    return OperatorBasis(tuple(hamiltonian_ops), tuple(jumps), tuple(_pairs_within(groups)))


def nn_jump_basis(n_sites: int) -> tuple[OperatorBasis, list[list[int]]]:
    """Jump basis with on-site Paulis plus XX and YY on each bond.

    Returns the basis and the per-site jump groups
    ``{X_j, Y_j, Z_j, X_j X_j+1, Y_j Y_j+1}`` (the last site has three).
    """
    jumps = [_site_pauli(n_sites, {j: a}) for j in range(n_sites) for a in _PAULI]
    bond_start = len(jumps)
    for j in range(n_sites - 1):
        jumps.append(_site_pauli(n_sites, {j: "X", j + 1: "X"}))
        jumps.append(_site_pauli(n_sites, {j: "Y", j + 1: "Y"}))
    groups = []
    for j in range(n_sites):
        g = [3 * j, 3 * j + 1, 3 * j + 2]
        if j < n_sites - 1:
            g += [bond_start + 2 * j, bond_start + 2 * j + 1]
        groups.append(g)
    basis = OperatorBasis(tuple(nn_hamiltonian_basis(n_sites)), tuple(jumps), tuple(_pairs_within(groups)))
    return basis, groups


def _dissipation_from_amplitudes(n_jumps: int, jumps: Sequence[tuple[Sequence[int], np.ndarray]]) -> np.ndarray:
    """``c_rs = sum_j d_r^(j) conj(d_s^(j))``; PSD by construction."""
    c = np.zeros((n_jumps, n_jumps), dtype=complex)
    for idx, amp in jumps:
        idx = list(idx)
        amp = np.asarray(amp, dtype=complex)
        c[np.ix_(idx, idx)] += np.outer(amp, amp.conj())
    return c


def _complex_normal(rng: np.random.Generator, std: float, size: int) -> np.ndarray:
    return rng.normal(0.0, std, size) + 1j * rng.normal(0.0, std, size)


def random_nn_model(n_sites: int, alpha_d: float, rng_seed: int | None = None) -> LindbladModel:
    """Random nearest-neighbour Hamiltonian with one random on-site jump per site."""
    if n_sites < 2:
        raise ValueError("need at least two sites")
    if alpha_d < 0:
        raise ValueError("alpha_d must be nonnegative")
    rng = np.random.default_rng(rng_seed)
    basis = onsite_basis(n_sites)
    c_h = rng.normal(0.0, 1.0, basis.n_hamiltonian)
    jumps = [([3 * j, 3 * j + 1, 3 * j + 2], _complex_normal(rng, alpha_d, 3)) for j in range(n_sites)]
    c_d = _dissipation_from_amplitudes(len(basis.jump_ops), jumps)
    meta = {"ensemble": "random_nn", "alpha_d": alpha_d, "seed": rng_seed}
    return LindbladModel(basis, c_h, c_d, meta)


def random_nn_jump_model(n_sites: int, alpha_d: float, rng_seed: int | None = None) -> LindbladModel:
    """Like :func:`random_nn_model` but each jump also carries ``XX`` and ``YY`` bond terms."""
    if n_sites < 2:
        raise ValueError("need at least two sites")
    if alpha_d < 0:
        raise ValueError("alpha_d must be nonnegative")
    rng = np.random.default_rng(rng_seed)
    basis, groups = nn_jump_basis(n_sites)
    c_h = rng.normal(0.0, 1.0, basis.n_hamiltonian)
    jumps = [(g, _complex_normal(rng, alpha_d, len(g))) for g in groups]
    c_d = _dissipation_from_amplitudes(len(basis.jump_ops), jumps)
    meta = {"ensemble": "random_nn_jump", "alpha_d": alpha_d, "seed": rng_seed}
    return LindbladModel(basis, c_h, c_d, meta)


def loss_dephasing_model(n_sites: int, alpha_l: float, rng_seed: int | None = None) -> LindbladModel:
    """Random Hamiltonian with per-site loss ``alpha_l * sigma^-`` and dephasing ``(1 - alpha_l) Z``."""
    if not 0.0 <= alpha_l <= 1.0:
        raise ValueError("alpha_l must lie in [0, 1]")
    if n_sites < 1:
        raise ValueError("need at least one site")
    rng = np.random.default_rng(rng_seed)
    basis = onsite_basis(n_sites)
    c_h = rng.normal(0.0, 1.0, basis.n_hamiltonian)
    loss = alpha_l * np.array([0.5, -0.5j, 0.0])
    dephase = np.array([0.0, 0.0, 1.0 - alpha_l])
    jumps = []
    for j in range(n_sites):
        idx = [3 * j, 3 * j + 1, 3 * j + 2]
        jumps += [(idx, loss), (idx, dephase)]
    c_d = _dissipation_from_amplitudes(len(basis.jump_ops), jumps)
    meta = {"ensemble": "loss_dephasing", "alpha_l": alpha_l, "seed": rng_seed}
    return LindbladModel(basis, c_h, c_d, meta)


def classical_ising_basis(n_sites: int) -> OperatorBasis:
    h_ops = [_site_pauli(n_sites, {j: "X"}) for j in range(n_sites)]
    h_ops += [_site_pauli(n_sites, {j: "X", j + 1: "X"}) for j in range(n_sites - 1)]
    return onsite_basis(n_sites, h_ops)


def classical_ising_loss_model(
    n_sites: int,
    rng_seed: int | None = None,
    fields: Sequence[float] | None = None,
    couplings: Sequence[float] | None = None,
) -> LindbladModel:
    """X-basis Ising chain with random fields/couplings and loss ``2 sigma^-`` on every site.

    ``fields`` and ``couplings`` override the random draws when given.
    """
    if n_sites < 2:
        raise ValueError("need at least two sites")
    rng = np.random.default_rng(rng_seed)
    basis = classical_ising_basis(n_sites)
    b = rng.normal(0.0, 1.0, n_sites)
    J = rng.normal(0.0, 1.0, n_sites - 1)
    if fields is not None:
        b = np.asarray(fields, dtype=float)
    if couplings is not None:
        J = np.asarray(couplings, dtype=float)
    amp = np.array([1.0, -1.0j, 0.0])  # 2 sigma^- = X - iY
    jumps = [([3 * j, 3 * j + 1, 3 * j + 2], amp) for j in range(n_sites)]
    c_d = _dissipation_from_amplitudes(len(basis.jump_ops), jumps)
    meta = {"ensemble": "classical_ising_loss", "seed": rng_seed}
    return LindbladModel(basis, np.concatenate([b, J]), c_d, meta)


def single_site_loss_model(n_sites: int, rate: float = 1.0) -> LindbladModel:
    """Pure loss ``sqrt(rate) sigma^-`` on every site, no Hamiltonian."""
    basis = onsite_basis(n_sites, [])
    jumps = []
    for j in range(n_sites):
        op = sigma_minus(n_sites, j)
        amp = np.sqrt(rate) * np.array([op.terms.get(PauliString.from_sites(n_sites, {j: a}), 0.0) for a in _PAULI])
        jumps.append(([3 * j, 3 * j + 1, 3 * j + 2], amp))
    return LindbladModel(basis, np.zeros(0), _dissipation_from_amplitudes(3 * n_sites, jumps))


# --------------------------------------------------------------------------
# JSON model files


def _op_descriptor(op: LocalOperator) -> dict:
    items = list(op.items())
    if len(items) == 1 and items[0][1] == 1.0:
        p = items[0][0]
        sup = p.support
        return {"letters": p.letters[sup[0] : sup[-1] + 1], "offset": sup[0]}
    terms = []
    for p, c in sorted(items, key=lambda t: t[0].letters):
        sup = p.support or (0,)
        terms.append(
            {"letters": p.letters[sup[0] : sup[-1] + 1], "offset": sup[0], "re": c.real, "im": c.imag}
        )
    return {"terms": terms}


def _op_from_descriptor(n_sites: int, desc: dict) -> LocalOperator:
    if "terms" in desc:
        out = LocalOperator.zero(n_sites)
        for t in desc["terms"]:
            p = PauliString.from_letters(t["letters"]).shifted(t["offset"], n_sites)
            out = out + LocalOperator.from_pauli(p, complex(t["re"], t["im"]))
        return out
    return LocalOperator.from_pauli(PauliString.from_letters(desc["letters"]).shifted(desc["offset"], n_sites))


def model_to_dict(model: LindbladModel) -> dict:
    b = model.basis
    return {
        "n_sites": model.n_sites,
        "basis": {
            "hamiltonian": [_op_descriptor(h) for h in b.hamiltonian_ops],
            "jumps": [_op_descriptor(l) for l in b.jump_ops],
            "allowed_pairs": [list(p) for p in b.allowed_pairs],
        },
        "c_h": [float(v) for v in model.c_h],
        "c_d": [[r, s, float(model.c_d[r, s].real), float(model.c_d[r, s].imag)] for r, s in b.allowed_pairs],
        "meta": model.meta,
    }


def model_from_dict(data: dict) -> LindbladModel:
    n = int(data["n_sites"])
    bd = data["basis"]
    basis = OperatorBasis(
        tuple(_op_from_descriptor(n, d) for d in bd["hamiltonian"]),
        tuple(_op_from_descriptor(n, d) for d in bd["jumps"]),
        tuple(tuple(p) for p in bd["allowed_pairs"]),
    )
    nj = len(basis.jump_ops)
    c_d = np.zeros((nj, nj), dtype=complex)
    for r, s, re_, im in data["c_d"]:
        c_d[r, s] = complex(re_, im)
        c_d[s, r] = complex(re_, -im)
    return LindbladModel(basis, np.array(data["c_h"], dtype=float), c_d, dict(data.get("meta", {})))


def save_model(model: LindbladModel, path) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh, indent=1)


def load_model(path) -> LindbladModel:
    with open(path) as fh:
        return model_from_dict(json.load(fh))


# --------------------------------------------------------------------------
# Real Pauli-coordinate generator
#
# A Hermitian state is rho = 2**-n sum_P r_P P with real r_P = Tr(P rho) and
# r_I = 1.  Index of P = x * 2**n + z.  In these coordinates L is a real
# matrix G with G[Q, P] = 2**-n Tr(Q L(P)); its identity row vanishes.


def _np_popcount(a: np.ndarray) -> np.ndarray:
    return np.bitwise_count(a).astype(np.int64)


def _np_multiply(ax, az, bx, bz):
    """Vectorized Pauli product; returns (i-power mod 4, x, z)."""
    x = ax ^ bx
    z = az ^ bz
    k = _np_popcount(ax & az) + _np_popcount(bx & bz) - _np_popcount(x & z) + 2 * _np_popcount(az & bx)
    return k % 4, x, z


_IPOW = np.array([1.0, 1.0j, -1.0, -1.0j])


def pauli_generator(model: LindbladModel, max_sites: int = DEFAULT_MAX_SITES) -> sp.csr_matrix:
    """Real sparse matrix of ``L`` in Pauli coordinates (see module notes)."""
    n = model.n_sites
    if n > max_sites:
        raise SizeError(f"generator for {n} sites exceeds budget of {max_sites} sites")
    d = 1 << n
    cols = np.arange(d * d, dtype=np.int64)
    px, pz = cols >> n, cols & (d - 1)
    rows_acc, cols_acc, vals_acc = [], [], []

    def add(coef, k, x, z, mask=None):
        v = coef * _IPOW[k]
        c = cols
        if mask is not None:
            v, x, z, c = v[mask], x[mask], z[mask], c[mask]
        rows_acc.append(x * d + z)
        cols_acc.append(c)
        vals_acc.append(v)

    for c, h in zip(model.c_h, model.basis.hamiltonian_ops):
        for p, a in h.items():
            # -i c [h, P]: only anticommuting P survive, with 2 hP
            anti = (_np_popcount(p.x & pz) + _np_popcount(p.z & px)) % 2 == 1
            k, x, z = _np_multiply(p.x, p.z, px, pz)
            add(-2j * float(c) * a, k, x, z, anti)

    for r, s in model.basis.allowed_pairs:
        pairs = [(r, s, model.c_d[r, s])]
        if r != s:
            pairs.append((s, r, model.c_d[s, r]))
        for rr, ss, crs in pairs:
            if crs == 0:
                continue
            for pr, ar in model.basis.jump_ops[rr].items():
                for ps, as_ in model.basis.jump_ops[ss].items():
                    coef = crs * ar * np.conj(as_)
                    # l_r P l_s^dag
                    k1, x1, z1 = _np_multiply(pr.x, pr.z, px, pz)
                    k2, x2, z2 = _np_multiply(x1, z1, ps.x, ps.z)
                    add(coef, (k1 + k2) % 4, x2, z2)
                    # -1/2 {l_s^dag l_r, P}
                    ph, q = _pauli_mul_scalar(ps, pr)
                    kq = int(np.round(np.angle(ph) / (np.pi / 2))) % 4
                    k3, x3, z3 = _np_multiply(q.x, q.z, px, pz)
                    k4, x4, z4 = _np_multiply(px, pz, q.x, q.z)
                    add(-0.5 * coef, (kq + k3) % 4, x3, z3)
                    add(-0.5 * coef, (kq + k4) % 4, x4, z4)

    if not rows_acc:
        return sp.csr_matrix((d * d, d * d))
    g = sp.coo_matrix(
        (np.concatenate(vals_acc), (np.concatenate(rows_acc), np.concatenate(cols_acc))), shape=(d * d, d * d)
    ).tocsr()
    g.sum_duplicates()
    scale = max(1.0, float(np.abs(g.data).max(initial=0.0)))
    if np.abs(g.data.imag).max(initial=0.0) > 1e-10 * scale:
        raise ValueError("generator is not Hermiticity-preserving")
    out = sp.csr_matrix((g.data.real, g.indices, g.indptr), shape=g.shape)
    out.eliminate_zeros()
    return out


def _pauli_mul_scalar(a: PauliString, b: PauliString):
    from .pauli import multiply

    return multiply(a, b)


def state_to_pauli(rho: DensityMatrix | np.ndarray) -> np.ndarray:
    """Real Pauli coordinates ``r_P = Tr(P rho)`` indexed by ``x * 2**n + z``."""
    data = as_array(rho)
    d = data.shape[0]
    idx = np.arange(d)
    out = np.empty(d * d)
    for x in range(d):
        row = data[idx, idx ^ x]
        for z in range(d):
            signs = 1 - 2 * (np.bitwise_count(idx & z) & 1).astype(np.int64)
            out[x * d + z] = (_IPOW[_popcount_int(x & z) % 4] * np.dot(signs, row)).real
    return out


def pauli_to_state(r: np.ndarray) -> np.ndarray:
    d = int(round(np.sqrt(r.shape[0])))
    idx = np.arange(d)
    out = np.zeros((d, d), dtype=complex)
    for x in range(d):
        for z in range(d):
            v = r[x * d + z]
            if v == 0:
                continue
            signs = 1 - 2 * (np.bitwise_count(idx & z) & 1).astype(np.int64)
            out[idx ^ x, idx] += v * _IPOW[_popcount_int(x & z) % 4] * signs
    return out / d


def _popcount_int(v: int) -> int:
    return bin(v).count("1")
