"""Constraint operators, measured observables and the constraint matrix ``K``.

For a constraint observable ``A`` the stationarity condition
``Tr(A L(rho)) = 0`` is linear in the packed coefficient vector ``c``:
``sum_m K[A, m] c_m = 0`` with ``K[A, m] = <O_m(A)>`` and ``O_m`` the adjoint
generator piece belonging to column ``m``:

* Hamiltonian column ``h``:  ``O = i [h, A]``
* diagonal pair ``(r, r)``:  ``O = M_rr``
* ``Re c_rs`` column:        ``O = M_rs + M_rs^dag``
* ``Im c_rs`` column:        ``O = i (M_rs - M_rs^dag)``

where ``M_rs = l_s^dag A l_r - 1/2 {l_s^dag l_r, A}``.  Every ``O`` is
Hermitian for Hermitian ``A``, so all entries are real.

Noise is attached to *observables*, not to matrix entries.  Each operator
``O`` is written as ``factor * Q`` with ``Q`` a canonical Hermitian
combination of Pauli strings whose largest coefficient is one, and one
Gaussian draw of width ``epsilon`` is made per distinct ``Q``.
Draws are a pure function of ``(seed, observable key)``, so a record gives
the same value for an observable regardless of which other observables are
requested or in which order.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.special import ndtri

from .model import Column, OperatorBasis
from .pauli import (
    DensityMatrix,
    DimensionError,
    ExpectationCache,
    LocalOperator,
    PauliString,
    commutator,
)

NOISE_MODES = ("combination", "pauli", "entry")
_IMAG_TOL = 1e-8


class MissingObservable(KeyError):
    """A record without a state was asked for an observable it does not hold."""


class ConsistencyError(RuntimeError):
    """An assembled entry had a significant imaginary part."""


# --------------------------------------------------------------------------
# Constraint sets


def _window_strings(n_sites: int, span: int, lo: int, hi: int) -> list[PauliString]:
    """Strings whose support starts and ends exactly ``span - 1`` sites apart inside [lo, hi]."""
    out = []
    for start in range(lo, hi - span + 2):
        end = start + span - 1
        ends = "XYZ"
        middle = "IXYZ"
        pools = [ends] + [middle] * (span - 2) + ([ends] if span > 1 else [])
        for combo in _product(pools):
            out.append(PauliString.from_sites(n_sites, {start + k: c for k, c in enumerate(combo) if c != "I"}))
    return out


def _product(pools: Sequence[str]) -> Iterable[str]:
    if not pools:
        yield ""
        return
    for head in pools[0]:
        for tail in _product(pools[1:]):
            yield head + tail


@dataclass(frozen=True, eq=False)
class ConstraintSet:
    """Ordered single-Pauli-string constraint operators."""

    n_sites: int
    k_max: int
    ordering_seed: int
    strings: tuple[PauliString, ...]
    window: tuple[int, int] | None = None

    def __len__(self) -> int:
        return len(self.strings)

    @property
    def operators(self) -> tuple[LocalOperator, ...]:
        return tuple(LocalOperator.from_pauli(p) for p in self.strings)

    def labels(self) -> list[str]:
        return [p.letters for p in self.strings]

    def head(self, n: int) -> "ConstraintSet":
        """The first ``n`` constraints in the set's order."""
        return ConstraintSet(self.n_sites, self.k_max, self.ordering_seed, self.strings[:n], self.window)

    def __add__(self, other: "ConstraintSet") -> "ConstraintSet":
        """Concatenate, dropping strings already present."""
        if other.n_sites != self.n_sites:
            raise DimensionError("constraint sets on different chains")
        seen = set(self.strings)
        extra = tuple(p for p in other.strings if p not in seen)
        return ConstraintSet(self.n_sites, max(self.k_max, other.k_max), self.ordering_seed, self.strings + extra)


def constraint_set(
    n_sites: int,
    k_max: int,
    ordering_seed: int = 0,
    window: tuple[int, int] | None = None,
) -> ConstraintSet:
    """All Pauli strings supported on at most ``k_max`` contiguous sites.

    Strings spanning one and two sites come first in a fixed order (by span,
    then first site, then letters); longer spans follow in an order shuffled
    by ``ordering_seed``.  ``window = (lo, hi)`` restricts supports to sites
    ``lo..hi`` inclusive.
    """
    if not 1 <= k_max <= n_sites:
        raise ValueError(f"k_max must be in [1, {n_sites}], got {k_max}")
    lo, hi = (0, n_sites - 1) if window is None else window
    if not 0 <= lo <= hi < n_sites:
        raise ValueError(f"window {window} outside a {n_sites}-site chain")
    fixed: list[PauliString] = []
    shuffled: list[PauliString] = []
    for span in range(1, min(k_max, hi - lo + 1) + 1):
        (fixed if span <= 2 else shuffled).extend(_window_strings(n_sites, span, lo, hi))
    if shuffled:
        order = np.random.default_rng(ordering_seed).permutation(len(shuffled))
        shuffled = [shuffled[i] for i in order]
    return ConstraintSet(n_sites, k_max, ordering_seed, tuple(fixed + shuffled), window)


def single_site_constraints(n_sites: int, letters: str = "XYZ") -> ConstraintSet:
    """On-site strings with the given letters, site by site."""
    strings = tuple(PauliString.from_sites(n_sites, {j: a}) for j in range(n_sites) for a in letters)
    return ConstraintSet(n_sites, 1, 0, strings)


# --------------------------------------------------------------------------
# Entry operators and canonical observables


def _as_operator(a: PauliString | LocalOperator) -> LocalOperator:
    return LocalOperator.from_pauli(a) if isinstance(a, PauliString) else a


def _m_rs(a: LocalOperator, lr: LocalOperator, ls: LocalOperator) -> LocalOperator:
    lsd = ls.dagger()
    q = lsd @ lr
    return lsd @ a @ lr - 0.5 * (q @ a + a @ q)


def entry_operator(a: PauliString | LocalOperator, basis: OperatorBasis, col: Column) -> LocalOperator:
    """Hermitian operator whose expectation is ``K[a, col]``."""
    a = _as_operator(a)
    ops = basis.column_operators(col)
    mask = 0
    for op in ops:
        mask |= op.support_mask
    if not (mask & a.support_mask):
        return LocalOperator.zero(a.n_sites)
    if col.kind == "h":
        return 1j * commutator(ops[0], a)
    m = _m_rs(a, ops[0], ops[1])
    if col.kind == "d":
        return m
    if col.kind == "re":
        return m + m.dagger()
    if col.kind == "im":
        return 1j * (m - m.dagger())
    raise ValueError(f"unknown column kind {col.kind!r}")


@dataclass(frozen=True, eq=False)
class Observable:
    """A Hermitian combination of Pauli strings with real coefficients."""

    key: str
    paulis: tuple[PauliString, ...]
    coefs: np.ndarray

    def operator(self) -> LocalOperator:
        n = self.paulis[0].n_sites
        return LocalOperator(n, dict(zip(self.paulis, self.coefs.astype(complex))))


def canonical_observable(op: LocalOperator, tol: float = 1e-12) -> tuple[Observable, float]:
    """Split ``op`` into ``factor * observable``.

    The observable has real Pauli coefficients, its largest coefficient has
    magnitude one and its first coefficient (in string order) is positive, so
    ``O``, ``-O`` and ``2 O`` share one key.  Raises :class:`ConsistencyError`
    if ``op`` is not Hermitian.
    """
    if op.is_zero:
        raise ValueError("zero operator has no observable")
    items = sorted(op.items(), key=lambda t: (t[0].x, t[0].z))
    scale = max(abs(c) for _, c in items)
    if max(abs(c.imag) for _, c in items) > tol * scale:
        raise ConsistencyError(f"entry operator is not Hermitian: {op.to_text()}")
    factor = scale if items[0][1].real > 0 else -scale
    paulis = tuple(p for p, _ in items)
    coefs = np.array([c.real / factor for _, c in items])
    key = f"{op.n_sites}|" + ",".join(f"{p.letters}:{c:.12g}" for p, c in zip(paulis, coefs))
    return Observable(key, paulis, coefs), factor


def _hash_normals(seed: int, keys: Sequence[str]) -> np.ndarray:
    """Standard normal draws that are a pure function of ``(seed, key)``."""
    out = np.empty(len(keys))
    prefix = f"{int(seed)}#".encode()
    for i, k in enumerate(keys):
        h = int.from_bytes(hashlib.blake2b(prefix + k.encode(), digest_size=8).digest(), "little")
        out[i] = ((h >> 11) + 0.5) / 2.0**53
    return ndtri(out)


# --------------------------------------------------------------------------
# Measurement records


@dataclass(eq=False)
class MeasurementRecord:
    """Measured (possibly noisy) values of canonical observables.

    With a ``rho`` attached, missing observables are measured on demand:
    exact expectation plus ``epsilon`` times a keyed standard normal.
    ``mode`` selects the noise granularity: ``"combination"`` draws once per
    canonical observable, ``"pauli"`` once per Pauli string (combinations are
    then sums of noisy Pauli values), and ``"entry"`` makes observables exact
    and leaves noise to :func:`build_K`, which draws independently per entry.
    """

    epsilon: float = 0.0
    seed: int = 0
    mode: str = "combination"
    rho: DensityMatrix | np.ndarray | None = None
    values: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in NOISE_MODES:
            raise ValueError(f"noise mode must be one of {NOISE_MODES}, got {self.mode!r}")
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        self._cache = ExpectationCache(self.rho) if self.rho is not None else None

    @classmethod
    def from_state(cls, rho, epsilon: float = 0.0, seed: int = 0, mode: str = "combination") -> "MeasurementRecord":
        return cls(epsilon=epsilon, seed=seed, mode=mode, rho=rho)

    def _exact(self, obs: Observable) -> float:
        v = sum((c * self._cache.pauli(p) for p, c in zip(obs.paulis, obs.coefs)), 0.0j)
        if abs(v.imag) > _IMAG_TOL:
            raise ConsistencyError(f"observable {obs.key} has imaginary expectation {v.imag:.3g}")
        return v.real

    def _pauli_value(self, p: PauliString) -> float:
        key = f"{p.n_sites}|{p.letters}:1"
        v = self.values.get(key)
        if v is None:
            if self._cache is None:
                raise MissingObservable(key)
            exact = self._cache.pauli(p)
            if abs(exact.imag) > _IMAG_TOL:
                raise ConsistencyError(f"Pauli expectation {p.letters} not real")
            v = exact.real
            if self.epsilon:
                v += self.epsilon * _hash_normals(self.seed, [key])[0]
            self.values[key] = v
        return v

    def measure(self, observables: Sequence[Observable]) -> np.ndarray:
        """Measured values of ``observables`` (in the given order)."""
        if self.mode == "pauli":
            return np.array([sum(c * self._pauli_value(p) for p, c in zip(o.paulis, o.coefs)) for o in observables])
        missing = [o for o in observables if o.key not in self.values]
        if missing:
            if self._cache is None:
                raise MissingObservable(missing[0].key)
            exact = np.array([self._exact(o) for o in missing])
            if self.epsilon and self.mode == "combination":
                exact = exact + self.epsilon * _hash_normals(self.seed, [o.key for o in missing])
            for o, v in zip(missing, exact):
                self.values[o.key] = float(v)
        return np.array([self.values[o.key] for o in observables])

    def value(self, op: LocalOperator) -> float:
        """Measured value of an arbitrary Hermitian operator."""
        if op.is_zero:
            return 0.0
        obs, factor = canonical_observable(op)
        return factor * float(self.measure([obs])[0])

    def to_dict(self) -> dict:
        return {"epsilon": self.epsilon, "seed": int(self.seed), "mode": self.mode, "values": dict(self.values)}

    @classmethod
    def from_dict(cls, data: dict) -> "MeasurementRecord":
        return cls(
            epsilon=float(data["epsilon"]),
            seed=int(data["seed"]),
            mode=data.get("mode", "combination"),
            values={k: float(v) for k, v in data["values"].items()},
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @classmethod
    def load(cls, path) -> "MeasurementRecord":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


# --------------------------------------------------------------------------
# Constraint matrices


@dataclass(frozen=True, eq=False)
class ConstraintMatrix:
    data: np.ndarray
    row_labels: tuple[str, ...]
    col_labels: tuple[str, ...]

    def __post_init__(self):
        if self.data.shape != (len(self.row_labels), len(self.col_labels)):
            raise DimensionError(f"matrix shape {self.data.shape} does not match labels")

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def head(self, n: int) -> "ConstraintMatrix":
        return ConstraintMatrix(self.data[:n], self.row_labels[:n], self.col_labels)

    def save(self, prefix) -> None:
        """Write ``prefix.csv`` (labels), ``prefix.bin`` (float64 LE, row-major) and ``prefix.json``."""
        prefix = str(prefix)
        with open(prefix + ".csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["axis", "index", "label"])
            w.writerows(("row", i, lab) for i, lab in enumerate(self.row_labels))
            w.writerows(("col", j, lab) for j, lab in enumerate(self.col_labels))
        np.ascontiguousarray(self.data, dtype="<f8").tofile(prefix + ".bin")
        with open(prefix + ".json", "w") as fh:
            json.dump({"rows": self.shape[0], "cols": self.shape[1], "dtype": "<f8", "order": "C"}, fh)

    @classmethod
    def load(cls, prefix) -> "ConstraintMatrix":
        prefix = str(prefix)
        with open(prefix + ".json") as fh:
            meta = json.load(fh)
        rows, cols = [], []
        with open(prefix + ".csv", newline="") as fh:
            for rec in csv.DictReader(fh):
                (rows if rec["axis"] == "row" else cols).append(rec["label"])
        data = np.fromfile(prefix + ".bin", dtype="<f8").reshape(meta["rows"], meta["cols"])
        return cls(data.astype(float), tuple(rows), tuple(cols))


def column_label_strings(basis: OperatorBasis, columns: Sequence[Column] | None = None) -> tuple[str, ...]:
    cols = basis.columns if columns is None else columns
    return tuple(" | ".join(basis.column_label(c)) for c in cols)


class KTemplate:
    """State-independent part of ``K``: which observable sits in each entry.

    Building the template is the expensive symbolic step; it can be reused
    for every state and noise draw with the same constraints and basis.
    """

    def __init__(self, constraints: ConstraintSet, basis: OperatorBasis, columns: Sequence[Column] | None = None):
        if constraints.n_sites != basis.n_sites:
            raise DimensionError("constraints and basis live on different chains")
        self.constraints = constraints
        self.basis = basis
        self.columns = tuple(basis.columns if columns is None else columns)
        index: dict[str, int] = {}
        self.observables: list[Observable] = []
        rows, cols, obs_idx, factors = [], [], [], []
        for i, a in enumerate(constraints.strings):
            for j, col in enumerate(self.columns):
                op = entry_operator(a, basis, col)
                if op.is_zero:
                    continue
                obs, factor = canonical_observable(op)
                k = index.get(obs.key)
                if k is None:
                    k = index[obs.key] = len(self.observables)
                    self.observables.append(obs)
                rows.append(i)
                cols.append(j)
                obs_idx.append(k)
                factors.append(factor)
        self.rows = np.array(rows, dtype=np.int64)
        self.cols = np.array(cols, dtype=np.int64)
        self.obs_idx = np.array(obs_idx, dtype=np.int64)
        self.factors = np.array(factors)

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.constraints), len(self.columns)

    def row_labels(self) -> tuple[str, ...]:
        return tuple(self.constraints.labels())

    def col_labels(self) -> tuple[str, ...]:
        return column_label_strings(self.basis, self.columns)

    def evaluate(self, record: MeasurementRecord) -> ConstraintMatrix:
        vals = record.measure(self.observables)
        data = np.zeros(self.shape)
        data[self.rows, self.cols] = self.factors * vals[self.obs_idx]
        if record.mode == "entry" and record.epsilon:
            rl, cl = self.row_labels(), self.col_labels()
            keys = [f"entry|{rl[i]}|{cl[j]}" for i, j in zip(self.rows, self.cols)]
            data[self.rows, self.cols] += record.epsilon * _hash_normals(record.seed, keys)
        return ConstraintMatrix(data, self.row_labels(), self.col_labels())

    def combined_observables(self, weights: np.ndarray) -> list[LocalOperator | None]:
        """Per row, the operator ``sum_j weights[j] O_j(A)`` (``None`` if zero)."""
        n_rows = len(self.constraints)
        acc: list[dict[PauliString, complex]] = [dict() for _ in range(n_rows)]
        for i, j, k, s in zip(self.rows, self.cols, self.obs_idx, self.factors):
            w = weights[j]
            if w == 0:
                continue
            obs = self.observables[k]
            d = acc[i]
            for p, c in zip(obs.paulis, obs.coefs):
                d[p] = d.get(p, 0.0) + w * s * c
        n = self.constraints.n_sites
        out = []
        for d in acc:
            op = LocalOperator(n, d)
            out.append(None if op.is_zero else op)
        return out

    def sparsity(self) -> sp.csr_matrix:
        """Boolean pattern of structurally nonzero entries."""
        return sp.csr_matrix((np.ones(len(self.rows), dtype=bool), (self.rows, self.cols)), shape=self.shape)


def build_K(
    constraints: ConstraintSet,
    basis: OperatorBasis,
    record: MeasurementRecord,
    template: KTemplate | None = None,
) -> ConstraintMatrix:
    """Assemble ``K`` from measured observables."""
    template = template or KTemplate(constraints, basis)
    return template.evaluate(record)


def _known_part_system(template: KTemplate, record: MeasurementRecord, known_cols: list[int], known_values):
    """Move known columns to the right-hand side: ``K_u c_u = -sum_known v_j O_j``.

    The right-hand side of each row is measured as one observable.
    """
    k = template.evaluate(record)
    unknown = [j for j in range(len(template.columns)) if j not in set(known_cols)]
    weights = np.zeros(len(template.columns))
    weights[known_cols] = known_values
    rhs_ops = template.combined_observables(weights)
    b = np.array([0.0 if op is None else -record.value(op) for op in rhs_ops])
    sub = ConstraintMatrix(k.data[:, unknown], k.row_labels, tuple(k.col_labels[j] for j in unknown))
    return sub, b


def build_prior_system(
    constraints: ConstraintSet,
    basis: OperatorBasis,
    record: MeasurementRecord,
    known_c_h: Sequence[float],
    template: KTemplate | None = None,
) -> tuple[ConstraintMatrix, np.ndarray]:
    """Dissipative columns ``K_l`` and ``b_n = <i[A_n, H]>`` for a known Hamiltonian.

    ``known_c_h`` are the Hamiltonian coefficients in ``basis``; the
    solution satisfies ``K_l c_l = b`` in least squares.
    """
    known_c_h = np.asarray(known_c_h, dtype=float)
    if known_c_h.shape != (basis.n_hamiltonian,):
        raise DimensionError(f"expected {basis.n_hamiltonian} Hamiltonian coefficients")
    template = template or KTemplate(constraints, basis)
    return _known_part_system(template, record, list(range(basis.n_hamiltonian)), known_c_h)


def build_known_dissipation_system(
    constraints: ConstraintSet,
    basis: OperatorBasis,
    record: MeasurementRecord,
    known_dissipative: Sequence[float],
    template: KTemplate | None = None,
) -> tuple[ConstraintMatrix, np.ndarray]:
    """Hamiltonian columns ``K_h`` and ``b_n = -<D^dag(A_n)>`` for known jumps.

    ``known_dissipative`` is the dissipative part of the packed vector.
    """
    known = np.asarray(known_dissipative, dtype=float)
    if known.shape != (basis.n_dissipative,):
        raise DimensionError(f"expected {basis.n_dissipative} dissipative coefficients")
    template = template or KTemplate(constraints, basis)
    cols = list(range(basis.n_hamiltonian, basis.n_params))
    return _known_part_system(template, record, cols, known)
