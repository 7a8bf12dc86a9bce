"""Pauli-string algebra, dense realizations, expectations and partial traces.

Conventions used everywhere in the package:

* A Pauli string on ``n`` sites is stored as two bitmasks ``(x, z)`` such that
  the operator equals ``i**popcount(x & z) * X**x Z**z``.  Site ``j`` lives on
  bit ``n - 1 - j`` so that the masks act directly on computational-basis
  indices with qubit 0 as the most significant bit.
* ``|0>`` is spin up (``Z = +1``), ``|1>`` is spin down.
* Dense matrices are row-major numpy arrays.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp

PRUNE_TOL = 1e-14

_LETTER_BITS = {"I": (0, 0), "X": (1, 0), "Z": (0, 1), "Y": (1, 1)}
_BITS_LETTER = {v: k for k, v in _LETTER_BITS.items()}
_I_POWERS = (1.0 + 0.0j, 1.0j, -1.0 + 0.0j, -1.0j)


class DimensionError(ValueError):
    """Operands live on chains of different length or mismatched matrices."""


def _popcount(v: int) -> int:
    return bin(v).count("1")


class PauliString(NamedTuple):
    """Tensor product of single-site Pauli letters."""

    n_sites: int
    x: int
    z: int

    @classmethod
    def from_letters(cls, letters: str) -> "PauliString":
        letters = letters.upper()
        n = len(letters)
        if n == 0:
            raise ValueError("empty Pauli string")
        x = z = 0
        for j, ch in enumerate(letters):
            try:
                bx, bz = _LETTER_BITS[ch]
            except KeyError:
                raise ValueError(f"invalid Pauli letter {ch!r}") from None
            bit = 1 << (n - 1 - j)
            if bx:
                x |= bit
            if bz:
                z |= bit
        return cls(n, x, z)

    @classmethod
    def from_sites(cls, n_sites: int, letters: Mapping[int, str]) -> "PauliString":
        """Build from a ``{site: letter}`` map; unlisted sites are identity."""
        chars = ["I"] * n_sites
        for site, ch in letters.items():
            if not 0 <= site < n_sites:
                raise ValueError(f"site {site} outside chain of {n_sites}")
            chars[site] = ch
        return cls.from_letters("".join(chars))

    @classmethod
    def identity(cls, n_sites: int) -> "PauliString":
        return cls(n_sites, 0, 0)

    @property
    def letters(self) -> str:
        n = self.n_sites
        out = []
        for j in range(n):
            bit = 1 << (n - 1 - j)
            out.append(_BITS_LETTER[(int(bool(self.x & bit)), int(bool(self.z & bit)))])
        return "".join(out)

    @property
    def support(self) -> tuple[int, ...]:
        mask = self.x | self.z
        n = self.n_sites
        return tuple(j for j in range(n) if mask >> (n - 1 - j) & 1)

    @property
    def weight(self) -> int:
        return _popcount(self.x | self.z)

    def span(self) -> int:
        """Number of contiguous sites covering the support (0 for identity)."""
        s = self.support
        return s[-1] - s[0] + 1 if s else 0

    def is_identity(self) -> bool:
        return not (self.x | self.z)

    def commutes_with(self, other: "PauliString") -> bool:
        return (_popcount(self.x & other.z) + _popcount(self.z & other.x)) % 2 == 0

    def shifted(self, offset: int, n_sites: int) -> "PauliString":
        """Embed this string into a chain of ``n_sites`` starting at ``offset``."""
        letters = self.letters
        if offset < 0 or offset + len(letters) > n_sites:
            raise ValueError("shifted string does not fit in the chain")
        return PauliString.from_letters("I" * offset + letters + "I" * (n_sites - offset - len(letters)))

    def dense(self) -> np.ndarray:
        d = 1 << self.n_sites
        idx = np.arange(d)
        out = np.zeros((d, d), dtype=complex)
        out[idx ^ self.x, idx] = _column_values(self, idx)
        return out

    def sparse(self) -> sp.csr_matrix:
        d = 1 << self.n_sites
        idx = np.arange(d)
        return sp.csr_matrix((_column_values(self, idx), (idx ^ self.x, idx)), shape=(d, d))

    def __str__(self) -> str:
        return self.letters


def _column_values(p: PauliString, idx: np.ndarray) -> np.ndarray:
    signs = 1 - 2 * (np.bitwise_count(idx & p.z) & 1).astype(np.int64)
    return _I_POWERS[_popcount(p.x & p.z) % 4] * signs


def multiply(a: PauliString, b: PauliString) -> tuple[complex, PauliString]:
    """Return ``(phase, c)`` with ``a @ b == phase * c`` and phase in {1, i, -1, -i}."""
    if a.n_sites != b.n_sites:
        raise DimensionError(f"cannot multiply strings on {a.n_sites} and {b.n_sites} sites")
    x = a.x ^ b.x
    z = a.z ^ b.z
    k = _popcount(a.x & a.z) + _popcount(b.x & b.z) - _popcount(x & z) + 2 * _popcount(a.z & b.x)
    return _I_POWERS[k % 4], PauliString(a.n_sites, x, z)


_TERM_RE = re.compile(r"^\s*(?P<coef>\S+)\s*\*\s*(?P<letters>[IXYZ]+)\s*$")


def _format_complex(c: complex) -> str:
    re_, im = float(c.real), float(c.imag)
    sign = "-" if im < 0 or (im == 0 and str(im).startswith("-")) else "+"
    return f"{re_!r}{sign}{abs(im)!r}i"


def _parse_complex(s: str) -> complex:
    return complex(s.replace("i", "j"))


class LocalOperator:
    """Linear combination of Pauli strings with complex coefficients.

    Instances are immutable; every arithmetic operation returns a new operator
    with coefficients below ``PRUNE_TOL`` dropped.
    """

    __slots__ = ("n_sites", "_terms")

    def __init__(self, n_sites: int, terms: Mapping[PauliString, complex] | None = None):
        self.n_sites = int(n_sites)
        clean: dict[PauliString, complex] = {}
        for p, c in (terms or {}).items():
            if p.n_sites != self.n_sites:
                raise DimensionError("term length does not match operator")
            c = complex(c)
            if abs(c) > PRUNE_TOL:
                clean[p] = c
        self._terms = clean

    @classmethod
    def _raw(cls, n_sites: int, terms: dict[PauliString, complex]) -> "LocalOperator":
        op = cls.__new__(cls)
        op.n_sites = n_sites
        op._terms = {p: c for p, c in terms.items() if abs(c) > PRUNE_TOL}
        return op

    @classmethod
    def from_pauli(cls, p: PauliString | str, coeff: complex = 1.0) -> "LocalOperator":
        if isinstance(p, str):
            p = PauliString.from_letters(p)
        return cls(p.n_sites, {p: coeff})

    @classmethod
    def zero(cls, n_sites: int) -> "LocalOperator":
        return cls(n_sites)

    @property
    def terms(self) -> dict[PauliString, complex]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def __len__(self) -> int:
        return len(self._terms)

    @property
    def is_zero(self) -> bool:
        return not self._terms

    # --- arithmetic -----------------------------------------------------
    def _check(self, other: "LocalOperator") -> None:
        if self.n_sites != other.n_sites:
            raise DimensionError(f"operators on {self.n_sites} and {other.n_sites} sites")

    def __add__(self, other: "LocalOperator") -> "LocalOperator":
        self._check(other)
        out = dict(self._terms)
        for p, c in other._terms.items():
            out[p] = out.get(p, 0.0) + c
        return LocalOperator._raw(self.n_sites, out)

    def __sub__(self, other: "LocalOperator") -> "LocalOperator":
        return self + (-1.0) * other

    def __neg__(self) -> "LocalOperator":
        return (-1.0) * self

    def __mul__(self, scalar: complex) -> "LocalOperator":
        if isinstance(scalar, LocalOperator):
            return self @ scalar
        return LocalOperator._raw(self.n_sites, {p: c * scalar for p, c in self._terms.items()})

    __rmul__ = __mul__

    def __matmul__(self, other: "LocalOperator") -> "LocalOperator":
        self._check(other)
        out: dict[PauliString, complex] = {}
        for pa, ca in self._terms.items():
            for pb, cb in other._terms.items():
                phase, p = multiply(pa, pb)
                out[p] = out.get(p, 0.0) + phase * ca * cb
        return LocalOperator._raw(self.n_sites, out)

    def dagger(self) -> "LocalOperator":
        return LocalOperator._raw(self.n_sites, {p: c.conjugate() for p, c in self._terms.items()})

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LocalOperator):
            return NotImplemented
        return self.n_sites == other.n_sites and self._terms == other._terms

    def __hash__(self) -> int:
        return hash((self.n_sites, frozenset(self._terms.items())))

    def allclose(self, other: "LocalOperator", atol: float = 1e-12) -> bool:
        diff = self - other
        return all(abs(c) <= atol for _, c in diff.items())

    # --- predicates -----------------------------------------------------
    def is_hermitian(self, tol: float = 0.0) -> bool:
        return all(abs(c.imag) <= tol for c in self._terms.values())

    @property
    def support(self) -> tuple[int, ...]:
        mask = 0
        for p in self._terms:
            mask |= p.x | p.z
        n = self.n_sites
        return tuple(j for j in range(n) if mask >> (n - 1 - j) & 1)

    @property
    def support_mask(self) -> int:
        mask = 0
        for p in self._terms:
            mask |= p.x | p.z
        return mask

    def is_local(self, k: int) -> bool:
        """True when the support fits inside ``k`` contiguous sites."""
        s = self.support
        return not s or s[-1] - s[0] + 1 <= k

    # --- realizations ---------------------------------------------------
    def dense(self) -> np.ndarray:
        d = 1 << self.n_sites
        out = np.zeros((d, d), dtype=complex)
        idx = np.arange(d)
        for p, c in self._terms.items():
            out[idx ^ p.x, idx] += c * _column_values(p, idx)
        return out

    def sparse(self) -> sp.csr_matrix:
        d = 1 << self.n_sites
        if not self._terms:
            return sp.csr_matrix((d, d), dtype=complex)
        idx = np.arange(d)
        rows, cols, vals = [], [], []
        for p, c in self._terms.items():
            rows.append(idx ^ p.x)
            cols.append(idx)
            vals.append(c * _column_values(p, idx))
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(d, d)
        )

    # --- text form ------------------------------------------------------
    def to_text(self) -> str:
        """Serialize as ``"coeff * letters"`` terms joined by ``" + "``."""
        if not self._terms:
            return "0"
        return " + ".join(
            f"{_format_complex(c)} * {p.letters}" for p, c in sorted(self._terms.items(), key=lambda t: t[0].letters)
        )

    @classmethod
    def from_text(cls, text: str) -> "LocalOperator":
        text = text.strip()
        terms: dict[PauliString, complex] = {}
        n = None
        for chunk in text.split(" + "):
            m = _TERM_RE.match(chunk)
            if m is None:
                raise ValueError(f"cannot parse operator term {chunk!r}")
            p = PauliString.from_letters(m["letters"])
            if n is None:
                n = p.n_sites
            elif n != p.n_sites:
                raise DimensionError("terms of different length in operator text")
            terms[p] = terms.get(p, 0.0) + _parse_complex(m["coef"])
        return cls(n, terms)

    def __repr__(self) -> str:
        return f"LocalOperator({self.to_text()!r})"


def commutator(a: LocalOperator, b: LocalOperator) -> LocalOperator:
    """``[a, b] = ab - ba``.

    Only anticommuting Pauli pairs contribute, each with ``2 * phase``.
    """
    a._check(b)
    out: dict[PauliString, complex] = {}
    for pa, ca in a.items():
        for pb, cb in b.items():
            if pa.commutes_with(pb):
                continue
            phase, p = multiply(pa, pb)
            out[p] = out.get(p, 0.0) + 2.0 * phase * ca * cb
    return LocalOperator._raw(a.n_sites, out)


def anticommutator(a: LocalOperator, b: LocalOperator) -> LocalOperator:
    a._check(b)
    out: dict[PauliString, complex] = {}
    for pa, ca in a.items():
        for pb, cb in b.items():
            if not pa.commutes_with(pb):
                continue
            phase, p = multiply(pa, pb)
            out[p] = out.get(p, 0.0) + 2.0 * phase * ca * cb
    return LocalOperator._raw(a.n_sites, out)


def sigma_minus(n_sites: int, site: int) -> LocalOperator:
    """Lowering operator ``(X - iY)/2`` on ``site``; maps up (|0>) to down (|1>)."""
    x = PauliString.from_sites(n_sites, {site: "X"})
    y = PauliString.from_sites(n_sites, {site: "Y"})
    return LocalOperator(n_sites, {x: 0.5, y: -0.5j})


# --------------------------------------------------------------------------
# Density matrices


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Dense ``2**n x 2**n`` density matrix."""

    n_sites: int
    data: np.ndarray

    def __post_init__(self):
        d = 1 << self.n_sites
        if self.data.shape != (d, d):
            raise DimensionError(f"expected {d}x{d} matrix for {self.n_sites} sites, got {self.data.shape}")

    @classmethod
    def from_array(cls, data: np.ndarray) -> "DensityMatrix":
        data = np.asarray(data, dtype=complex)
        n = int(round(np.log2(data.shape[0])))
        return cls(n, data)

    @classmethod
    def fully_mixed(cls, n_sites: int) -> "DensityMatrix":
        d = 1 << n_sites
        return cls(n_sites, np.eye(d, dtype=complex) / d)

    @classmethod
    def from_ket(cls, psi: np.ndarray) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls.from_array(np.outer(psi, psi.conj()))

    @classmethod
    def basis_state(cls, bits: str) -> "DensityMatrix":
        """Product state from a string of ``0``/``1`` (or ``u``/``d``) per site."""
        table = {"0": "0", "1": "1", "u": "0", "d": "1"}
        index = int("".join(table[b] for b in bits), 2)
        d = 1 << len(bits)
        data = np.zeros((d, d), dtype=complex)
        data[index, index] = 1.0
        return cls(len(bits), data)

    def hermitized(self) -> "DensityMatrix":
        h = 0.5 * (self.data + self.data.conj().T)
        return DensityMatrix(self.n_sites, h / np.trace(h).real)

    def check(self, tol_herm: float = 1e-10, tol_trace: float = 1e-10, tol_psd: float = 1e-8) -> None:
        herm = np.max(np.abs(self.data - self.data.conj().T))
        if herm > tol_herm:
            raise ValueError(f"not Hermitian: max |rho - rho^dag| = {herm:.3g}")
        tr = np.trace(self.data)
        if abs(tr - 1.0) > tol_trace:
            raise ValueError(f"trace {tr} differs from 1")
        lam = np.linalg.eigvalsh(0.5 * (self.data + self.data.conj().T))[0]
        if lam < -tol_psd:
            raise ValueError(f"negative eigenvalue {lam:.3g}")


def as_array(rho: DensityMatrix | np.ndarray) -> np.ndarray:
    return rho.data if isinstance(rho, DensityMatrix) else np.asarray(rho)


def pauli_expectation(rho: DensityMatrix | np.ndarray, p: PauliString) -> complex:
    """``Tr(p rho)`` in O(2**n) without forming the dense string."""
    data = as_array(rho)
    d = data.shape[0]
    if d != 1 << p.n_sites:
        raise DimensionError("state and Pauli string dimensions differ")
    idx = np.arange(d)
    return complex(np.dot(_column_values(p, idx), data[idx, idx ^ p.x]))


def expectation(rho: DensityMatrix | np.ndarray, op: LocalOperator) -> complex:
    """``Tr(op rho)``."""
    data = as_array(rho)
    if data.shape[0] != 1 << op.n_sites:
        raise DimensionError("state and operator dimensions differ")
    return sum((c * pauli_expectation(data, p) for p, c in op.items()), 0.0j)


class ExpectationCache:
    """Memoized Pauli-string expectations of one fixed state."""

    def __init__(self, rho: DensityMatrix | np.ndarray):
        self.data = as_array(rho)
        self._idx = np.arange(self.data.shape[0])
        self._cache: dict[PauliString, complex] = {}

    def pauli(self, p: PauliString) -> complex:
        v = self._cache.get(p)
        if v is None:
            v = complex(np.dot(_column_values(p, self._idx), self.data[self._idx, self._idx ^ p.x]))
            self._cache[p] = v
        return v

    def __call__(self, op: LocalOperator) -> complex:
        return sum((c * self.pauli(p) for p, c in op.items()), 0.0j)


def partial_trace(rho: DensityMatrix | np.ndarray, keep_sites: Sequence[int]) -> DensityMatrix:
    """Reduced density matrix on ``keep_sites`` (strictly increasing)."""
    data = as_array(rho)
    n = int(round(np.log2(data.shape[0])))
    keep = list(keep_sites)
    if any(s < 0 or s >= n for s in keep):
        raise ValueError(f"site index out of range for {n} sites: {keep}")
    if any(b <= a for a, b in zip(keep, keep[1:])):
        raise ValueError("keep_sites must be strictly increasing")
    drop = [s for s in range(n) if s not in keep]
    t = data.reshape([2] * (2 * n))
    perm = keep + drop + [n + s for s in keep] + [n + s for s in drop]
    dk, dd = 1 << len(keep), 1 << len(drop)
    t = t.transpose(perm).reshape(dk, dd, dk, dd)
    return DensityMatrix(len(keep), np.einsum("ajbj->ab", t))


def all_pauli_strings(n_sites: int, include_identity: bool = False) -> Iterable[PauliString]:
    start = 0 if include_identity else 1
    for code in range(start, 4**n_sites):
        x = z = 0
        for j in range(n_sites):
            bx, bz = divmod((code >> (2 * j)) & 3, 2)
            x |= bx << j
            z |= bz << j
        yield PauliString(n_sites, x, z)
