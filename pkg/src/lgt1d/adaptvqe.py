"""SC-ADAPT-VQE: operator pools, adaptive ansatz growth and volume
extrapolation of the variational parameters.

Pool unitaries exp(i*theta*O) are realized either exactly or as first-order
Trotter products over "factors": single-xmask Hermitian generators whose
exponential is an exact two-state rotation. The Trotter term ordering for the
volume operators follows the brickwork / offset-X layering used to define the
state-preparation circuits, so optimized angles are those of the circuit.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize as sopt
import scipy.sparse.linalg as spla

from . import _kernels
from .core import OperatorSum, QuantumState, SectorBasis, apply_operator, expectation, to_sector_matrix


# ---------------------------------------------------------------------------
# Factors: exactly exponentiable single-xmask generators
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Factor:
    """Hermitian generator sum_t cf[t] * X^x Z^zf[t] on a shared xmask."""

    x: int
    zf: np.ndarray
    cf: np.ndarray

    def apply_exp(self, v, theta, states=None):
        """In-place v <- exp(i theta G) v."""
        if self.x == 0:
            if states is None:
                states = np.arange(v.shape[0], dtype=np.int64)
            _kernels.diagonal_phase_sector(v, states, theta, self.zf, self.cf.real.copy())
        elif states is None:
            _kernels.pair_rotation_full(v, theta, self.x, self.zf, self.cf)
        else:
            _kernels.pair_rotation_sector(v, states, theta, self.x, self.zf, self.cf)

    def to_operator(self, n):
        op = OperatorSum(n)
        for z, c in zip(self.zf, self.cf):
            op._add_raw(c, self.x, int(z))
        return op


def _factor(n, entries):
    """Build a Factor from (coefficient, letters) entries sharing one xmask."""
    op = OperatorSum(n)
    for coeff, letters in entries:
        op.add(coeff, letters)
    gx, gptr, zf, cf = op.compiled()
    if len(gx) != 1:
        raise ValueError("factor entries must share a single xmask")
    return Factor(int(gx[0]), zf.copy(), cf.copy())


def _xy_pair(a, b, coeff):
    """coeff * (X_a Z.. Y_b - Y_a Z.. X_b) as letter entries (a < b)."""
    zs = {q: "Z" for q in range(a + 1, b)}
    return [
        (coeff, {a: "X", b: "Y", **zs}),
        (-coeff, {a: "Y", b: "X", **zs}),
    ]


def _xx_pair(a, b, coeff):
    """coeff * (X_a Z.. X_b + Y_a Z.. Y_b) as letter entries (a < b)."""
    zs = {q: "Z" for q in range(a + 1, b)}
    return [
        (coeff, {a: "X", b: "X", **zs}),
        (coeff, {a: "Y", b: "Y", **zs}),
    ]


# ---------------------------------------------------------------------------
# Pool operators
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PoolOperator:
    op_id: str
    operator: OperatorSum
    factors: tuple  # Trotter-ordered Factor sequence
    commuting_terms: bool

    @property
    def register_size(self):
        return self.operator.register_size


def _volume_layer_order(count, d):
    """Term ordering for the volume hopping-family Trotterization.

    d = 1 uses brickwork (even starts then odd); d >= 3 layers terms with
    starts offset by d-1, successive layers shifted by (d-1)/2.
    """
    if d == 1:
        return [n for n in range(count) if n % 2 == 0] + [n for n in range(count) if n % 2 == 1]
    period = d - 1
    shift = period // 2
    offsets = []
    pos = 0
    for _ in range(period):
        while pos in offsets:
            pos = (pos + 1) % period
        offsets.append(pos)
        pos = (pos + shift) % period
    order = []
    for off in offsets:
        order.extend(range(off, count, period))
    return order


def _build_pool_op(op_id, n, factor_entries, order=None):
    factors = [_factor(n, e) for e in factor_entries]
    if order is not None:
        factors = [factors[i] for i in order]
    total = OperatorSum(n)
    for f in factors:
        total = total + f.to_operator(n)
    total = total.normalized()
    commuting = True
    for i in range(len(factors)):
        for j in range(i + 1, len(factors)):
            comm = factors[i].to_operator(n).commutator(factors[j].to_operator(n)).normalized()
            if comm.num_terms:
                commuting = False
                break
        if not commuting:
            break
    return PoolOperator(op_id, total, tuple(factors), commuting)


def pool_vacuum(L):
    """Volume and surface one-body operators for vacuum preparation."""
    n = 2 * L
    ops = []
    for d in range(1, 2 * L - 2, 2):
        entries = [_xy_pair(m, m + d, 0.5 * (-1) ** m) for m in range(2 * L - d)]
        ops.append(_build_pool_op(f"V_mh({d})", n, entries, _volume_layer_order(len(entries), d)))
    for d in range(1, 2 * L - 2, 2):
        entries = [
            _xy_pair(0, d, 0.25),
            _xy_pair(2 * L - 1 - d, 2 * L - 1, 0.25),
        ]
        ops.append(_build_pool_op(f"S_mh(0,{d})", n, entries))
    for d in range(1, 2 * L - 4, 2):
        entries = [
            _xy_pair(1, d + 1, -0.25),
            _xy_pair(2 * L - 2 - d, 2 * L - 2, -0.25),
        ]
        ops.append(_build_pool_op(f"S_mh(1,{d})", n, entries))
    return ops


def pool_wavepacket(L):
    """CP-symmetric operators creating a localized hadron at mid-lattice."""
    n = 2 * L
    ops = []
    for name, pair in (("WP_mh", _xy_pair), ("WP_h", _xx_pair)):
        for nn in range(1, L + 1):
            for d in range(1, L + nn):
                a = L - nn
                gamma = L - 1 + nn - d
                if a > gamma:
                    continue  # CP-deduplicated: partner of an (n', d) already kept
                entries = [pair(a, a + d, 0.5)]
                if a != gamma:
                    entries.append(pair(gamma, gamma + d, 0.5 * (-1) ** (d + 1)))
                ops.append(_build_pool_op(f"{name}({nn},{d})", n, entries))
    for nn in range(1, L + 1):
        entries = [[(1.0, {L - nn: "Z"}), (-1.0, {L - 1 + nn: "Z"})]]
        ops.append(_build_pool_op(f"WP_m({nn})", n, entries))
    return ops


def pool_static(L, charge_site=None):
    """Charge- and time-reversal-respecting pool around a background charge."""
    n = 2 * L
    if charge_site is None:
        charge_site = L - 1
    ops = []
    for nn in range(-L + 1, L):
        a = charge_site - nn
        if not 0 <= a < n:
            continue
        for d in range(1, n - a):
            ops.append(_build_pool_op(f"ST_mh({nn},{d})", n, [_xy_pair(a, a + d, 0.5)]))
    return ops


def pool_by_id(pool):
    return {op.op_id: op for op in pool}


# ---------------------------------------------------------------------------
# Ansatz and its application
# ---------------------------------------------------------------------------


@dataclass
class Ansatz:
    steps: list  # of (op_id, theta)
    initial_state: str = "strong_coupling_vacuum"
    mode: str = "trotter"  # "exact" or "trotter"

    @property
    def thetas(self):
        return np.array([t for _, t in self.steps], dtype=float)

    def with_thetas(self, thetas):
        return Ansatz([(op_id, float(t)) for (op_id, _), t in zip(self.steps, thetas)], self.initial_state, self.mode)

    def records(self):
        return [{"operator": op_id, "theta": float(t)} for op_id, t in self.steps]


def _apply_pool_unitary(v, basis_states, pool_op, theta, mode, basis=None):
    """In-place v <- exp(i theta O) v, exactly or first-order Trotterized."""
    if not np.isfinite(theta):
        raise ValueError("non-finite ansatz angle")
    if mode == "trotter" or pool_op.commuting_terms:
        for f in pool_op.factors:
            f.apply_exp(v, theta, basis_states)
        return
    if mode != "exact":
        raise ValueError(f"unknown ansatz mode {mode!r}")
    if basis is None or not isinstance(basis, SectorBasis):
        m = pool_op.operator.to_dense()
        v[:] = spla.expm_multiply(1j * theta * m, v)
    else:
        m = to_sector_matrix(pool_op.operator, basis)
        v[:] = spla.expm_multiply(1j * theta * m.astype(np.complex128), v)


def apply_ansatz(ansatz, state, pool, mode=None):
    """Return exp(i th_k O_k) ... exp(i th_1 O_1)|state>."""
    mode = mode or ansatz.mode
    ops = pool_by_id(pool) if not isinstance(pool, dict) else pool
    v = state.amplitudes.astype(np.complex128).copy()
    basis_states = state.basis.states if isinstance(state.basis, SectorBasis) else None
    for op_id, theta in ansatz.steps:
        _apply_pool_unitary(v, basis_states, ops[op_id], theta, mode, state.basis)
    return QuantumState(v, state.basis, normalized=False)


# ---------------------------------------------------------------------------
# Objectives and gradients
# ---------------------------------------------------------------------------


class EnergyObjective:
    """<psi|H|psi>, minimized."""

    def __init__(self, hamiltonian):
        self.h = hamiltonian

    def value_and_lambda(self, state):
        hpsi = apply_operator(self.h, state, check_sector=False)
        val = float(np.real(np.vdot(state.amplitudes, hpsi.amplitudes)))
        return val, hpsi.amplitudes, 1.0


class ProjectedEnergyObjective(EnergyObjective):
    """<psi|H + mu |vac><vac| |psi>: energy plus a vacuum-chemical-potential."""

    def __init__(self, hamiltonian, mu, vacuum):
        super().__init__(hamiltonian)
        self.mu = float(mu)
        self.vac = vacuum

    def value_and_lambda(self, state):
        hpsi = apply_operator(self.h, state, check_sector=False)
        ov = np.vdot(self.vac.amplitudes, state.amplitudes)
        lam = hpsi.amplitudes + self.mu * ov * self.vac.amplitudes
        val = float(np.real(np.vdot(state.amplitudes, lam)))
        return val, lam, 1.0


class InfidelityObjective:
    """1 - |<target|psi>|^2, minimized."""

    def __init__(self, target):
        self.target = target

    def value_and_lambda(self, state):
        o = np.vdot(self.target.amplitudes, state.amplitudes)
        val = float(1.0 - abs(o) ** 2)
        return val, o * self.target.amplitudes, -1.0


def energy_gradient(hamiltonian, pool_op, state):
    """d/dtheta <psi|e^{-i th O} H e^{i th O}|psi> at theta = 0 = i<[H, O]>."""
    hpsi = apply_operator(hamiltonian, state, check_sector=False)
    opsi = apply_operator(pool_op.operator if isinstance(pool_op, PoolOperator) else pool_op, state, check_sector=False)
    return float(-2.0 * np.imag(np.vdot(hpsi.amplitudes, opsi.amplitudes)))


def projector_gradient(hamiltonian, mu, vacuum, pool_op, state):
    g = energy_gradient(hamiltonian, pool_op, state)
    op = pool_op.operator if isinstance(pool_op, PoolOperator) else pool_op
    opsi = apply_operator(op, state, check_sector=False)
    ov = np.vdot(vacuum.amplitudes, state.amplitudes)
    g += float(-2.0 * mu * np.imag(np.conj(ov) * np.vdot(vacuum.amplitudes, opsi.amplitudes)))
    return g


def infidelity_gradient(target, pool_op, state):
    """d/dtheta (1 - |<target|e^{i th O}|psi>|^2) at theta = 0."""
    op = pool_op.operator if isinstance(pool_op, PoolOperator) else pool_op
    opsi = apply_operator(op, state, check_sector=False)
    o = np.vdot(target.amplitudes, state.amplitudes)
    return float(2.0 * np.imag(np.vdot(target.amplitudes, opsi.amplitudes) * np.conj(o)))


def _selection_gradient(objective, pool_op, state):
    if isinstance(objective, ProjectedEnergyObjective):
        return projector_gradient(objective.h, objective.mu, objective.vac, pool_op, state)
    if isinstance(objective, EnergyObjective):
        return energy_gradient(objective.h, pool_op, state)
    if isinstance(objective, InfidelityObjective):
        return infidelity_gradient(objective.target, pool_op, state)
    raise TypeError(f"unsupported objective {objective!r}")


# ---------------------------------------------------------------------------
# Variational optimization with adjoint-mode gradients
# ---------------------------------------------------------------------------


def _objective_and_grad(thetas, step_ops, init, objective, mode):
    basis = init.basis
    basis_states = basis.states if isinstance(basis, SectorBasis) else None
    psi = init.amplitudes.astype(np.complex128).copy()
    for op, th in zip(step_ops, thetas):
        _apply_pool_unitary(psi, basis_states, op, th, mode, basis)
    state = QuantumState(psi, basis, normalized=False)
    val, lam, sign = objective.value_and_lambda(state)

    grads = np.zeros(len(thetas))
    x = psi.copy()
    w = lam.astype(np.complex128).copy()
    for j in range(len(thetas) - 1, -1, -1):
        op, th = step_ops[j], thetas[j]
        contrib = 0.0
        for f in reversed(op.factors):
            # term t sandwiched between already-unapplied later factors
            gx = x.copy()
            _apply_ig(gx, basis_states, f)
            contrib += 2.0 * np.real(np.vdot(w, gx))
            f.apply_exp(x, -th, basis_states)
            f.apply_exp(w, -th, basis_states)
        grads[j] = sign * contrib
    return val, grads


def _apply_ig(v, basis_states, factor):
    """v <- i G v for a single factor generator."""
    out = np.zeros_like(v)
    if basis_states is None:
        states = np.arange(v.shape[0], dtype=np.int64)
    else:
        states = basis_states
    _kernels.apply_grouped_sector(
        v,
        states,
        np.array([factor.x], dtype=np.int64),
        np.array([0, len(factor.zf)], dtype=np.int64),
        factor.zf,
        factor.cf,
        out,
    )
    v[:] = 1j * out


@dataclass
class AdaptDiagnostics:
    objective_trace: list = field(default_factory=list)
    gradient_trace: list = field(default_factory=list)
    theta_history: list = field(default_factory=list)


@dataclass
class AdaptResult:
    ansatz: Ansatz
    diagnostics: AdaptDiagnostics
    converged_reason: str


class OptimizerFailure(RuntimeError):
    def __init__(self, message, best):
        super().__init__(message)
        self.best = best


def _optimize(step_ops, thetas0, init, objective, mode, tol=1e-10):
    res = sopt.minimize(
        _objective_and_grad,
        thetas0,
        args=(step_ops, init, objective, mode),
        jac=True,
        method="BFGS",
        options={"gtol": tol, "maxiter": 600},
    )
    return res


def run_adapt(objective, pool, init, grad_tol=1e-4, step_tol=1e-4, max_steps=10, mode="trotter"):
    """Grow an ansatz by repeated max-gradient selection and re-optimization."""
    ops = list(pool)
    diag = AdaptDiagnostics()
    steps = []  # list of (op_id, theta)
    reason = "max_steps"
    v0, _, _ = objective.value_and_lambda(init)
    diag.objective_trace.append(v0)

    for _ in range(max_steps):
        state = apply_ansatz(Ansatz(steps, mode=mode), init, ops, mode=mode) if steps else init
        grads = np.array([_selection_gradient(objective, op, state) for op in ops])
        best = int(np.argmax(np.abs(grads) - 1e-12 * np.arange(len(ops))))
        diag.gradient_trace.append(float(np.abs(grads).max()))
        if np.abs(grads[best]) < grad_tol:
            if not steps and isinstance(objective, InfidelityObjective):
                best = _degenerate_first_step(objective, ops, init, mode)
                if best is None:
                    reason = "grad_tol"
                    break
            else:
                reason = "grad_tol"
                break
        steps.append((ops[best].op_id, 0.0))
        step_ops = [next(o for o in ops if o.op_id == sid) for sid, _ in steps]
        res = _optimize(step_ops, np.array([t for _, t in steps]), init, objective, mode)
        if not res.success and not np.isfinite(res.fun):
            raise OptimizerFailure(
                f"optimizer failed at step {len(steps)}: {res.message}",
                AdaptResult(Ansatz(steps, mode=mode), diag, "optimizer_failure"),
            )
        steps = [(sid, float(t)) for (sid, _), t in zip(steps, res.x)]
        diag.objective_trace.append(float(res.fun))
        diag.theta_history.append([t for _, t in steps])
        if abs(steps[-1][1]) < step_tol:
            steps.pop()
            reason = "step_tol"
            break
    else:
        reason = "max_steps"
    return AdaptResult(Ansatz(steps, mode=mode), diag, reason)


def _degenerate_first_step(objective, ops, init, mode):
    """Zero-gradient start (e.g. infidelity from an orthogonal state):
    1-D optimize each pool operator separately and pick the best."""
    best_val, best_idx, best_theta = np.inf, None, 0.0
    for i, op in enumerate(ops):
        r = sopt.minimize_scalar(
            lambda th: _objective_and_grad(np.array([th]), [op], init, objective, mode)[0],
            bounds=(-np.pi, np.pi),
            method="bounded",
            options={"xatol": 1e-10},
        )
        if r.fun < best_val - 1e-12:
            best_val, best_idx, best_theta = r.fun, i, r.x
    return best_idx


# ---------------------------------------------------------------------------
# Volume extrapolation of variational parameters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ThetaExtrapolation:
    value: float
    uncertainty: float
    mode: str
    warning: str | None = None


def extrapolate_theta(series, mode="exp_fit"):
    """Extrapolate theta(L) to L = infinity.

    exp_fit: 3-parameter nonlinear fit theta = theta_inf + c1 exp(-c2 L).
    effective_theta: algebraic plateau from 4 consecutive volumes.
    """
    series = sorted(series)
    Ls = np.array([l for l, _ in series], dtype=float)
    th = np.array([t for _, t in series], dtype=float)
    if mode == "exp_fit":
        if len(series) < 4:
            raise ValueError("exp_fit needs at least 4 points")
        if np.ptp(th) < 1e-14:
            return ThetaExtrapolation(float(th[0]), 0.0, mode)
        diffs = np.abs(np.diff(th))
        warning = None
        if np.any(diffs[1:] > diffs[:-1] + 1e-12):
            warning = "residuals not monotone; exponential form may not describe the data"
            warnings.warn(warning)
        c2_0 = 0.5
        if diffs[0] > 0 and diffs[-1] > 0 and len(diffs) > 1 and diffs[-1] < diffs[0]:
            c2_0 = max(0.05, np.log(diffs[0] / diffs[-1]) / (Ls[-2] - Ls[0]))
        p0 = (th[-1], th[0] - th[-1], c2_0)
        popt, pcov = sopt.curve_fit(
            lambda L, a, b, c: a + b * np.exp(-c * L), Ls, th, p0=p0, maxfev=20000
        )
        err = float(np.sqrt(max(pcov[0, 0], 0.0))) if np.all(np.isfinite(pcov)) else np.nan
        return ThetaExtrapolation(float(popt[0]), err, mode, warning)
    if mode == "effective_theta":
        byL = dict(zip(Ls.astype(int), th))
        effs = []
        for L in sorted(byL):
            if all(L + k in byL for k in range(4)):
                t0, t1, t2, t3 = (byL[L + k] for k in range(4))
                den = t0 + t3 - t1 - t2
                if abs(den) > 1e-14:
                    effs.append((t0 * t3 - t1 * t2) / den)
        if not effs:
            raise ValueError("effective_theta needs 4 consecutive volumes")
        effs = np.array(effs)
        return ThetaExtrapolation(float(effs.mean()), float(effs.max() - effs.min()), mode)
    raise ValueError(f"unknown extrapolation mode {mode!r}")
