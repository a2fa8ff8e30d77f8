"""Dense and sparse (Lanczos) eigensolvers and spectral observables."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from . import _kernels
from .core import FullBasis, QuantumState, SectorBasis, to_sector_matrix
from .hamiltonian import schwinger_hamiltonian, schwinger_sector

_DENSE_LIMIT = 600  # below this dimension, use dense eigh
_SEED = 1234  # fixed Lanczos start vector for reproducibility

DEGENERACY_TOL = 1e-10


class SolverConvergenceError(RuntimeError):
    def __init__(self, message, best_residual=None):
        super().__init__(message)
        self.best_residual = best_residual


def _matvec_operator(op, basis):
    """Matrix-free LinearOperator for a sector Hamiltonian (real path when possible)."""
    gx, gptr, zf, cf = op.compiled()
    states = basis.states
    if np.abs(cf.imag).max(initial=0.0) <= 1e-12:
        cr = np.ascontiguousarray(cf.real)

        def mv(v):
            out = np.zeros(basis.dim, dtype=np.float64)
            _kernels.apply_grouped_sector_real(np.ascontiguousarray(v, dtype=np.float64), states, gx, gptr, zf, cr, out)
            return out

        return spla.LinearOperator((basis.dim, basis.dim), matvec=mv, dtype=np.float64)

    def mvc(v):
        out = np.zeros(basis.dim, dtype=np.complex128)
        _kernels.apply_grouped_sector(np.ascontiguousarray(v, dtype=np.complex128), states, gx, gptr, zf, cf, out)
        return out

    return spla.LinearOperator((basis.dim, basis.dim), matvec=mvc, dtype=np.complex128)


def _fix_degenerate_frame(vals, vecs, tol=DEGENERACY_TOL):
    """Rotate each degenerate cluster to a deterministic orthonormal frame.

    Within a cluster, vectors are sequentially aligned with the largest-
    amplitude pivot row, then re-orthonormalized.
    """
    k = len(vals)
    i = 0
    while i < k:
        j = i + 1
        while j < k and abs(vals[j] - vals[j - 1]) < tol:
            j += 1
        if j - i > 1:
            block = vecs[:, i:j].copy()
            for col in range(block.shape[1]):
                weights = np.sum(np.abs(block[:, col:]) ** 2, axis=1)
                pivot = int(np.argmax(weights))
                coeffs = block[pivot, col:].conj()
                nrm = np.linalg.norm(coeffs)
                if nrm > 0:
                    new = block[:, col:] @ (coeffs / nrm)
                    block[:, col] = new
                    # orthogonalize the remainder against the new column
                    for rest in range(col + 1, block.shape[1]):
                        block[:, rest] -= new * np.vdot(new, block[:, rest])
                        block[:, rest] /= np.linalg.norm(block[:, rest])
            vecs[:, i:j] = block
        i = j
    # fix global sign/phase: largest-amplitude entry real positive
    for col in range(k):
        pivot = int(np.argmax(np.abs(vecs[:, col])))
        phase = vecs[pivot, col] / abs(vecs[pivot, col])
        vecs[:, col] /= phase
    return vecs


def low_spectrum(op, basis=None, k=1, maxiter=None):
    """k lowest eigenpairs of a Hermitian operator, deterministic frame."""
    if basis is None:
        basis = FullBasis(op.register_size)
    dim = basis.dim
    k = min(k, dim)
    if dim <= _DENSE_LIMIT:
        if isinstance(basis, SectorBasis):
            m = to_sector_matrix(op, basis).toarray()
        else:
            m = op.to_dense()
            if np.abs(m - m.conj().T).max() > 1e-10:
                raise ValueError("operator is not Hermitian")
            m = 0.5 * (m + m.conj().T)
        vals, vecs = np.linalg.eigh(m if np.iscomplexobj(m) else m.astype(np.float64))
        vals, vecs = vals[:k], vecs[:, :k]
    else:
        if isinstance(basis, SectorBasis) and dim > 200_000:
            lin = _matvec_operator(op, basis)
        else:
            m = to_sector_matrix(op, basis) if isinstance(basis, SectorBasis) else None
            if m is None:
                lin = _matvec_operator_full(op, basis)
            else:
                lin = m
        rng = np.random.default_rng(_SEED)
        v0 = rng.standard_normal(dim)
        v0 /= np.linalg.norm(v0)
        try:
            vals, vecs = spla.eigsh(lin, k=k, which="SA", v0=v0, maxiter=maxiter)
        except spla.ArpackNoConvergence as err:
            raise SolverConvergenceError(
                f"Lanczos failed to converge: {err}", best_residual=getattr(err, "eigenvalues", None)
            ) from err
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
    vecs = np.asarray(vecs, dtype=np.complex128)
    vecs = _fix_degenerate_frame(vals, vecs)
    states = [QuantumState(vecs[:, i] / np.linalg.norm(vecs[:, i]), basis) for i in range(k)]
    return np.asarray(vals, dtype=float), states


def _matvec_operator_full(op, basis):
    gx, gptr, zf, cf = op.compiled()

    def mv(v):
        out = np.zeros(basis.dim, dtype=np.complex128)
        _kernels.apply_grouped_full(np.ascontiguousarray(v, dtype=np.complex128), gx, gptr, zf, cf, out)
        return out

    return spla.LinearOperator((basis.dim, basis.dim), matvec=mv, dtype=np.complex128)


def ground_state(op, basis=None, maxiter=None):
    vals, states = low_spectrum(op, basis, k=1, maxiter=maxiter)
    return float(vals[0]), states[0]


@dataclass(frozen=True)
class HadronMass:
    value: float
    correlation_length: float
    degenerate: bool


def hadron_mass(spec):
    """Mass gap in the Q = 0 sector: first excited state above the vacuum."""
    h = schwinger_hamiltonian(spec)
    basis = schwinger_sector(spec.L, 0)
    vals, _ = low_spectrum(h, basis, k=2)
    gap = float(vals[1] - vals[0])
    return HadronMass(gap, 1.0 / gap if gap > 0 else np.inf, gap < DEGENERACY_TOL)


def heavy_hadron_mass(spec):
    """Lambda-bar: ground-state energy with static charges minus the vacuum."""
    if not spec.background_charges:
        raise ValueError("spec must carry at least one background charge")
    from dataclasses import replace

    qtot = int(round(sum(spec.background_charges.values())))
    h_bg = schwinger_hamiltonian(spec)
    basis_bg = schwinger_sector(spec.L, -qtot)
    e_bg, _ = ground_state(h_bg, basis_bg)
    vac_spec = replace(spec, background_charges={})
    e_vac, _ = ground_state(schwinger_hamiltonian(vac_spec), schwinger_sector(spec.L, 0))
    return float(e_bg - e_vac)
