"""Pauli-string operator algebra, symmetry-sector bases and statevectors.

Conventions (fixed across the package):
- qubit 0 is the least significant bit of a basis-state integer
- |0> is the Z = +1 eigenstate, so Z_j has eigenvalue 1 - 2*bit_j
- a Pauli string is stored internally as (coeff, xmask, zmask) with the
  i**nY factors of Y = i*X*Z folded into coeff:
      P|b> = coeff * (-1)^popcount(b & zmask) |b ^ xmask>
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import _kernels

NORM_TOL = 1e-12


class SectorViolationError(ValueError):
    """An operator term maps a sector basis state outside the sector."""


def _letters_to_czx(coefficient, letters):
    c = complex(coefficient)
    x = 0
    z = 0
    for q, p in letters.items():
        if p == "X":
            x |= 1 << q
        elif p == "Y":
            x |= 1 << q
            z |= 1 << q
            c *= 1j
        elif p == "Z":
            z |= 1 << q
        else:
            raise ValueError(f"unknown Pauli letter {p!r} on qubit {q}")
    return c, x, z


def _czx_to_letters(c, x, z):
    letters = {}
    q = 0
    m = x | z
    while m:
        if m & 1:
            bx, bz = bool(x >> q & 1), bool(z >> q & 1)
            if bx and bz:
                letters[q] = "Y"
                c /= 1j
            elif bx:
                letters[q] = "X"
            else:
                letters[q] = "Z"
        q += 1
        m >>= 1
    return c, letters


@dataclass(frozen=True)
class PauliTerm:
    """A weighted Pauli string; identity on unlisted qubits."""

    coefficient: complex
    letters: dict

    def __post_init__(self):
        if len(set(self.letters)) != len(self.letters):
            raise ValueError("duplicate qubit index in Pauli term")
        if any(q < 0 for q in self.letters):
            raise ValueError("negative qubit index")

    @property
    def max_qubit(self):
        return max(self.letters) if self.letters else -1


class OperatorSum:
    """A sum of weighted Pauli strings on a fixed register."""

    def __init__(self, register_size, terms=()):
        self.register_size = int(register_size)
        self._c = []
        self._x = []
        self._z = []
        for t in terms:
            if isinstance(t, PauliTerm):
                c, x, z = _letters_to_czx(t.coefficient, t.letters)
            else:
                c, x, z = t
            self._add_raw(c, x, z)
        self._compiled = None

    # -- construction ------------------------------------------------------
    def _add_raw(self, c, x, z):
        if (x | z) >> self.register_size:
            raise ValueError("Pauli term exceeds register size")
        self._c.append(complex(c))
        self._x.append(int(x))
        self._z.append(int(z))
        self._compiled = None

    def add(self, coefficient, letters):
        c, x, z = _letters_to_czx(coefficient, letters)
        self._add_raw(c, x, z)
        return self

    @classmethod
    def identity(cls, register_size, coefficient=1.0):
        op = cls(register_size)
        op._add_raw(coefficient, 0, 0)
        return op

    def copy(self):
        out = OperatorSum(self.register_size)
        out._c, out._x, out._z = list(self._c), list(self._x), list(self._z)
        return out

    # -- normalization and inspection ---------------------------------------
    def normalized(self, tol=NORM_TOL):
        """Combine duplicate strings and drop coefficients below tol."""
        acc = {}
        for c, x, z in zip(self._c, self._x, self._z):
            key = (x, z)
            acc[key] = acc.get(key, 0.0) + c
        out = OperatorSum(self.register_size)
        for (x, z), c in sorted(acc.items()):
            if abs(c) > tol:
                out._add_raw(c, x, z)
        return out

    @property
    def terms(self):
        out = []
        for c, x, z in zip(self._c, self._x, self._z):
            coeff, letters = _czx_to_letters(c, x, z)
            out.append(PauliTerm(coeff, letters))
        return out

    @property
    def num_terms(self):
        return len(self._c)

    def term_map(self, tol=NORM_TOL):
        op = self.normalized(tol)
        return {(x, z): c for c, x, z in zip(op._c, op._x, op._z)}

    def is_hermitian(self, tol=1e-10):
        for (x, z), c in self.term_map().items():
            # c X^x Z^z hermitian conjugate: conj(c) (-1)^|x&z| X^x Z^z
            sign = -1.0 if bin(x & z).count("1") % 2 else 1.0
            if abs(np.conj(c) * sign - c) > tol:
                return False
        return True

    # -- algebra -------------------------------------------------------------
    def __add__(self, other):
        if other.register_size != self.register_size:
            raise ValueError("register size mismatch")
        out = self.copy()
        out._c += other._c
        out._x += other._x
        out._z += other._z
        out._compiled = None
        return out

    def __sub__(self, other):
        return self + (-1.0) * other

    def __rmul__(self, scalar):
        out = self.copy()
        out._c = [scalar * c for c in out._c]
        return out

    def __matmul__(self, other):
        """Operator product; (X^x1 Z^z1)(X^x2 Z^z2) = (-1)^|z1&x2| X^(x1^x2) Z^(z1^z2)."""
        if other.register_size != self.register_size:
            raise ValueError("register size mismatch")
        out = OperatorSum(self.register_size)
        for c1, x1, z1 in zip(self._c, self._x, self._z):
            for c2, x2, z2 in zip(other._c, other._x, other._z):
                sign = -1.0 if bin(z1 & x2).count("1") % 2 else 1.0
                out._add_raw(c1 * c2 * sign, x1 ^ x2, z1 ^ z2)
        return out.normalized()

    def dagger(self):
        out = OperatorSum(self.register_size)
        for c, x, z in zip(self._c, self._x, self._z):
            sign = -1.0 if bin(x & z).count("1") % 2 else 1.0
            out._add_raw(np.conj(c) * sign, x, z)
        return out

    def commutator(self, other):
        return (self @ other) - (other @ self)

    def without_identity(self):
        out = OperatorSum(self.register_size)
        for c, x, z in zip(self._c, self._x, self._z):
            if x or z:
                out._add_raw(c, x, z)
        return out

    def identity_coefficient(self):
        return sum(c for c, x, z in zip(self._c, self._x, self._z) if x == 0 and z == 0)

    def is_diagonal(self):
        return all(x == 0 for x in self._x)

    # -- compiled array view -------------------------------------------------
    def compiled(self):
        """Terms sorted and grouped by xmask: (gx, gptr, zf, cf)."""
        if self._compiled is None:
            op = self.normalized()
            order = np.lexsort((op._z, op._x))
            x = np.asarray(op._x, dtype=np.int64)[order]
            z = np.asarray(op._z, dtype=np.int64)[order]
            c = np.asarray(op._c, dtype=np.complex128)[order]
            gx, starts = np.unique(x, return_index=True)
            gptr = np.concatenate([starts, [len(x)]]).astype(np.int64)
            self._compiled = (gx.astype(np.int64), gptr, z, c)
        return self._compiled

    def preserves_sector(self, basis, tol=NORM_TOL):
        """True if summed amplitudes to out-of-sector targets all vanish."""
        gx, gptr, zf, cf = self.compiled()
        states = basis.states
        for g in range(len(gx)):
            xm = int(gx[g])
            if xm == 0:
                continue
            targets = np.bitwise_xor(states, xm)
            j = np.searchsorted(states, targets)
            ok = j < states.shape[0]
            jj = np.where(ok, j, 0)
            ok &= states[jj] == targets
            if ok.all():
                continue
            missing = states[~ok]
            amp = np.zeros(missing.shape[0], dtype=np.complex128)
            for t in range(gptr[g], gptr[g + 1]):
                amp += cf[t] * _kernels.parity_u64(missing, int(zf[t]))
            if np.abs(amp).max(initial=0.0) > tol:
                return False
        return True

    # -- dense oracle --------------------------------------------------------
    def to_dense(self):
        if self.register_size > 14:
            raise ValueError("dense form limited to 14 qubits")
        dim = 1 << self.register_size
        m = np.zeros((dim, dim), dtype=np.complex128)
        b = np.arange(dim, dtype=np.int64)
        for c, x, z in zip(self._c, self._x, self._z):
            sign = _kernels.parity_u64(b, z)
            m[np.bitwise_xor(b, x), b] += c * sign
        return m

    def __repr__(self):
        return f"OperatorSum(n={self.register_size}, terms={self.num_terms})"


# ---------------------------------------------------------------------------
# Bases
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FullBasis:
    register_size: int

    @property
    def dim(self):
        return 1 << self.register_size

    @property
    def states(self):
        return np.arange(self.dim, dtype=np.int64)


@dataclass(frozen=True)
class SectorBasis:
    """Bitstrings satisfying Hamming-weight constraints on qubit subsets."""

    register_size: int
    constraints: tuple  # of (qubit-subset mask, required weight)
    states: np.ndarray = field(compare=False)

    @property
    def dim(self):
        return self.states.shape[0]

    def index(self, bitstring):
        i = int(np.searchsorted(self.states, bitstring))
        if i >= self.dim or self.states[i] != bitstring:
            raise KeyError(f"bitstring {bitstring:b} not in sector")
        return i


def build_sector_basis(n, constraints):
    """Enumerate all n-qubit bitstrings with given (qubits, weight) constraints.

    ``constraints`` is an iterable of (qubit indices or mask, weight) pairs.
    States come out in ascending integer order.
    """
    norm = []
    for qubits, w in constraints:
        mask = qubits if isinstance(qubits, int) else sum(1 << q for q in qubits)
        if mask >> n:
            raise ValueError("constraint references qubits outside register")
        w = int(w)
        if w < 0 or w > bin(mask).count("1"):
            raise ValueError(f"infeasible constraint: weight {w} on {bin(mask).count('1')} qubits")
        norm.append((int(mask), w))
    if not norm:
        raise ValueError("at least one constraint required")
    full = (1 << n) - 1
    if len(norm) == 1 and norm[0][0] == full:
        states = _kernels.gosper_states(n, norm[0][1])
    else:
        states = _kernels.filter_states(
            n, np.asarray([m for m, _ in norm], dtype=np.int64), np.asarray([w for _, w in norm], dtype=np.int64)
        )
    if states.shape[0] == 0:
        raise ValueError("constraints produce an empty basis")
    return SectorBasis(n, tuple(norm), np.ascontiguousarray(states))


# ---------------------------------------------------------------------------
# States
# ---------------------------------------------------------------------------


class QuantumState:
    """Complex amplitudes over a full register or a sector basis."""

    def __init__(self, amplitudes, basis, normalized=True):
        self.amplitudes = np.asarray(amplitudes, dtype=np.complex128)
        self.basis = basis
        if self.amplitudes.shape != (basis.dim,):
            raise ValueError("amplitude vector does not match basis dimension")
        if normalized:
            nrm = np.linalg.norm(self.amplitudes)
            if abs(nrm - 1.0) > 1e-6:
                raise ValueError(f"state not normalized: |psi| = {nrm}")

    @property
    def register_size(self):
        return self.basis.register_size

    @classmethod
    def from_bitstring(cls, bitstring, basis):
        v = np.zeros(basis.dim, dtype=np.complex128)
        if isinstance(basis, SectorBasis):
            v[basis.index(bitstring)] = 1.0
        else:
            v[bitstring] = 1.0
        return cls(v, basis)

    def copy(self):
        return QuantumState(self.amplitudes.copy(), self.basis, normalized=False)

    def norm(self):
        return float(np.linalg.norm(self.amplitudes))

    def overlap(self, other):
        self._check_same_basis(other)
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def _check_same_basis(self, other):
        if self.basis.register_size != other.basis.register_size or self.basis.dim != other.basis.dim:
            raise ValueError("states live on different bases")

    def to_full(self):
        """Embed a sector state into the full 2^n register."""
        if isinstance(self.basis, FullBasis):
            return self
        v = np.zeros(1 << self.register_size, dtype=np.complex128)
        v[self.basis.states] = self.amplitudes
        return QuantumState(v, FullBasis(self.register_size), normalized=False)


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def apply_operator(op, state, check_sector=True):
    """Return op|state> (unnormalized)."""
    if op.register_size != state.register_size:
        raise ValueError("operator and state register sizes differ")
    gx, gptr, zf, cf = op.compiled()
    v = state.amplitudes
    out = np.zeros_like(v)
    if isinstance(state.basis, SectorBasis):
        worst = _kernels.apply_grouped_sector(v, state.basis.states, gx, gptr, zf, cf, out)
        if check_sector and worst > NORM_TOL:
            bad = _offending_group(op, state.basis)
            raise SectorViolationError(
                f"operator maps outside the sector basis (amplitude {worst:.3g}); offending term {bad}"
            )
    else:
        _kernels.apply_grouped_full(v, gx, gptr, zf, cf, out)
    return QuantumState(out, state.basis, normalized=False)


def _offending_group(op, basis):
    for term in op.normalized().terms:
        single = OperatorSum(op.register_size, [term])
        if not single.preserves_sector(basis):
            return term
    return None


def expectation(op, state):
    """<state|op|state>; real up to 1e-12 when op is Hermitian."""
    applied = apply_operator(op, state, check_sector=False)
    return complex(np.vdot(state.amplitudes, applied.amplitudes))


def to_sector_matrix(op, basis, tol=1e-12):
    """Sparse matrix of op in the sector basis; Hermiticity enforced to tol."""
    gx, gptr, zf, cf = op.compiled()
    states = basis.states
    rows, cols, vals = [], [], []
    col = np.arange(basis.dim, dtype=np.int64)
    for g in range(len(gx)):
        xm = int(gx[g])
        amp = np.zeros(basis.dim, dtype=np.complex128)
        for t in range(gptr[g], gptr[g + 1]):
            amp += cf[t] * _kernels.parity_u64(states, int(zf[t]))
        if xm == 0:
            rows.append(col)
            cols.append(col)
            vals.append(amp)
            continue
        targets = np.bitwise_xor(states, xm)
        j = np.searchsorted(states, targets)
        ok = j < basis.dim
        jj = np.where(ok, j, 0)
        ok &= states[jj] == targets
        if not ok.all() and np.abs(amp[~ok]).max(initial=0.0) > tol:
            bad = _offending_group(op, basis)
            raise SectorViolationError(f"term {bad} maps outside the sector basis")
        rows.append(jj[ok])
        cols.append(col[ok])
        vals.append(amp[ok])
    m = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(basis.dim, basis.dim),
    )
    herm_dev = abs(m - m.getH()).max()
    if herm_dev > tol:
        raise ValueError(f"matrix not Hermitian within {tol}: deviation {herm_dev}")
    m = 0.5 * (m + m.getH())
    if abs(m.imag).max() <= tol:
        m = m.real
    return m.tocsr()
