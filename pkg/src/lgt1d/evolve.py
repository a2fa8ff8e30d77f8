"""Exact and Trotterized real-time evolution, adiabatic wavepacket
preparation, and heavy-charge trajectory runs."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse.linalg as spla

from . import _kernels
from .adaptvqe import Factor
from .core import FullBasis, OperatorSum, QuantumState, SectorBasis, apply_operator, expectation, to_sector_matrix
from .hamiltonian import SchwingerSpec, schwinger_parts, schwinger_sector, schwinger_truncated


# ---------------------------------------------------------------------------
# Heavy-charge trajectories
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Trajectory:
    """Smooth accelerate / coast / decelerate trajectory for a heavy charge.

    Positions are staggered-site coordinates; the heavy charge lives on odd
    (positron) sites, so x0 and xf must be odd.
    """

    x0: int
    xf: int
    v_max: float
    a_max: float
    a0: float = 1e-4

    def __post_init__(self):
        if not (0 < self.v_max < 1):
            raise ValueError("require 0 < v_max < 1 (staggered sites per unit time)")
        if self.a_max <= 0:
            raise ValueError("a_max must be positive")
        if self.a_max < self.a0:
            raise ValueError("a_max below the initial acceleration a0 leaves t0 undefined")
        if self.x0 % 2 == 0 or self.xf % 2 == 0:
            raise ValueError("heavy charges live on odd staggered sites")

    @property
    def beta(self):
        return 2.0 * self.a_max / self.v_max

    @property
    def t0(self):
        return float(np.rint(np.arccosh(np.sqrt(self.a_max / self.a0)) / self.beta))

    @property
    def T(self):
        return (self.xf - self.x0) / self.v_max

    def position(self, t):
        b, t0, T = self.beta, self.t0, self.T
        return (self.v_max**2 / (4 * self.a_max)) * (
            np.log(np.cosh(b * (t - t0))) - np.log(np.cosh(b * (t - t0 - T)))
        ) + 0.5 * (self.xf + self.x0)

    def velocity(self, t):
        b, t0, T = self.beta, self.t0, self.T
        return 0.5 * self.v_max * (np.tanh(b * (t - t0)) - np.tanh(b * (t - t0 - T)))

    def acceleration(self, t):
        b, t0, T = self.beta, self.t0, self.T
        return self.a_max * (1.0 / np.cosh(b * (t - t0)) ** 2 - 1.0 / np.cosh(b * (t - t0 - T)) ** 2)

    def arrival_time(self):
        """Total simulated time: coast window plus the two ramps."""
        return self.T + 2 * self.t0


def trajectory_eval(traj, t):
    return traj.position(t), traj.velocity(t), traj.acceleration(t)


def charge_partition(traj, t, Q=1.0):
    """Distribute the moving charge over the two nearest odd staggered sites."""
    x = float(traj.position(t))
    xq1 = int(np.floor((x - 1) / 2)) * 2 + 1
    xq2 = xq1 + 2
    q1 = Q * (xq2 - x) / 2.0
    q2 = Q * (x - xq1) / 2.0
    return {xq1: q1, xq2: q2}


def default_time_step(v_max):
    """Trotter step sufficient for convergence at a given peak velocity."""
    for vcut, dt in ((0.05, 2.0), (0.1, 1.5), (0.2, 1.0), (0.4, 0.5)):
        if v_max <= vcut:
            return dt
    return 0.25


# ---------------------------------------------------------------------------
# Exact evolution
# ---------------------------------------------------------------------------

_EIG_LIMIT = 5000


class EigenPropagator:
    """e^{-iHt} via eigendecomposition (small) or Krylov (larger sectors)."""

    def __init__(self, op, basis):
        self.op = op
        self.basis = basis
        dim = basis.dim
        if isinstance(basis, SectorBasis):
            m = to_sector_matrix(op, basis)
        else:
            if op.register_size > 14:
                raise ValueError("full-register exact evolution limited to 14 qubits")
            m = op.to_dense()
        if dim <= _EIG_LIMIT:
            md = m.toarray() if hasattr(m, "toarray") else m
            self._vals, self._vecs = np.linalg.eigh(md)
            self._matrix = None
        else:
            if dim > 200_000:
                raise ValueError("exact evolution limited to sector dimension ~1e5")
            self._matrix = m.tocsc().astype(np.complex128)
            self._vals = self._vecs = None

    def evolve(self, state, t):
        v = state.amplitudes
        if self._vals is not None:
            w = self._vecs.conj().T @ v
            out = self._vecs @ (np.exp(-1j * self._vals * t) * w)
        else:
            out = spla.expm_multiply(-1j * t * self._matrix, v)
        return QuantumState(out, state.basis, normalized=False)


def exact_evolve(op, t, state):
    """e^{-i op t}|state> by eigendecomposition; unitary to machine precision."""
    return EigenPropagator(op, state.basis).evolve(state, t)


# ---------------------------------------------------------------------------
# Split Hamiltonians for Trotterized evolution
# ---------------------------------------------------------------------------


def _bond_factor(n, a, b, scale):
    """scale * (sigma+_a Z.. sigma-_b + h.c.) as a single exact factor."""
    op = OperatorSum(n)
    zs = {q: "Z" for q in range(a + 1, b)}
    op.add(0.5 * scale, {a: "X", b: "X", **zs})
    op.add(0.5 * scale, {a: "Y", b: "Y", **zs})
    gx, gptr, zf, cf = op.compiled()
    return Factor(int(gx[0]), zf.copy(), cf.copy())


def _diag_terms(op):
    """(coeffs, zmasks) of a purely diagonal OperatorSum."""
    gx, gptr, zf, cf = op.compiled()
    if not (len(gx) == 1 and gx[0] == 0) and len(gx) > 0:
        raise ValueError("operator has off-diagonal terms")
    if np.abs(cf.imag).max(initial=0.0) > 1e-12:
        raise ValueError("diagonal part must be real")
    return np.ascontiguousarray(cf.real), zf.copy()


class SplitSchwinger:
    """Schwinger Hamiltonian split for Trotter steps: odd/even hopping layers
    plus a diagonal (mass + electric) part, optional lambda_bar truncation and
    time-dependent background charges."""

    def __init__(self, spec, basis, truncated=False, charge_fn=None, kinetic_weight_fn=None):
        self.spec = spec
        self.basis = basis
        n = spec.n_qubits
        self.odd_bonds = [(j, j + 1) for j in range(1, n - 1, 2)]
        self.even_bonds = [(j, j + 1) for j in range(0, n - 1, 2)]
        self.odd_factors = [_bond_factor(n, a, b, 0.5) for a, b in self.odd_bonds]
        self.even_factors = [_bond_factor(n, a, b, 0.5) for a, b in self.even_bonds]
        base = replace(spec, background_charges={})
        parts = schwinger_parts(base)
        diag_op = parts["H_m"] + (schwinger_truncated(base) if truncated else parts["H_el"])
        cf, zf = _diag_terms(diag_op.normalized())
        self._static_diag = self._eval_diag(cf, zf)
        self.charge_fn = charge_fn
        self.kinetic_weight_fn = kinetic_weight_fn
        self._states = basis.states if isinstance(basis, SectorBasis) else FullBasis(n).states

    def _eval_diag(self, cf, zf):
        states = self.basis.states if isinstance(self.basis, SectorBasis) else FullBasis(self.spec.n_qubits).states
        out = np.zeros(states.shape[0], dtype=np.float64)
        _kernels.diagonal_sector(states, cf, zf, out)
        return out

    def diagonal(self, t):
        d = self._static_diag
        if self.charge_fn is None:
            return d
        charges = self.charge_fn(t)
        n = self.spec.n_qubits
        g2 = self.spec.g**2
        # Background charges add g^2 sum_j B_j(t) S_j + (g^2/2) sum_j B_j^2,
        # with B_j the cumulative background charge and S_j = sum_{k<=j} q_k;
        # regrouped onto single sites: sum_k wtil_k q_k, wtil_k = sum_{j>=k} B_j.
        B = np.zeros(n - 1)
        run = 0.0
        for j in range(n - 1):
            run += charges.get(j, 0.0)
            B[j] = run
        wtil = np.array([B[k:].sum() for k in range(n)])
        stagger = np.array([(-1.0) ** k for k in range(n)])
        const = 0.5 * g2 * float(np.sum(B**2)) - 0.5 * g2 * float(np.sum(wtil * stagger))
        cf = np.concatenate([-0.5 * g2 * wtil, [const]])
        zf = np.array([1 << k for k in range(n)] + [0], dtype=np.int64)
        extra = np.zeros_like(d)
        _kernels.diagonal_sector(self._states, np.ascontiguousarray(cf, dtype=np.float64), zf, extra)
        return d + extra

    def kin_layers(self, t):
        if self.kinetic_weight_fn is None:
            wo = np.ones(len(self.odd_bonds))
            we = np.ones(len(self.even_bonds))
        else:
            wo = np.array([self.kinetic_weight_fn(t, a) for a, _ in self.odd_bonds])
            we = np.array([self.kinetic_weight_fn(t, a) for a, _ in self.even_bonds])
        return [(self.odd_factors, wo), (self.even_factors, we)]


class SplitGeneric:
    """Trotter splitting of an arbitrary OperatorSum: the diagonal part plus
    one factor per off-diagonal xmask group, applied in ascending-mask order."""

    def __init__(self, op, basis):
        self.basis = basis
        states = basis.states if isinstance(basis, SectorBasis) else FullBasis(op.register_size).states
        gx, gptr, zf, cf = op.compiled()
        self.factors = []
        diag_cf, diag_zf = [], []
        for g in range(len(gx)):
            lo, hi = gptr[g], gptr[g + 1]
            if gx[g] == 0:
                diag_cf.extend(cf[lo:hi].real)
                diag_zf.extend(zf[lo:hi])
            else:
                self.factors.append(Factor(int(gx[g]), zf[lo:hi].copy(), cf[lo:hi].copy()))
        self._diag = np.zeros(states.shape[0], dtype=np.float64)
        if diag_cf:
            _kernels.diagonal_sector(
                states, np.ascontiguousarray(diag_cf, dtype=np.float64), np.asarray(diag_zf, dtype=np.int64), self._diag
            )

    def diagonal(self, t):
        return self._diag

    def kin_layers(self, t):
        return [(self.factors, np.ones(len(self.factors)))]


def _step(split, v, states, t_mid, dt, order):
    layers = split.kin_layers(t_mid)
    diag = split.diagonal(t_mid)
    if order == 2:
        for factors, w in layers:
            for f, wi in zip(factors, w):
                f.apply_exp(v, -0.5 * dt * wi, states)
        v *= np.exp(-1j * dt * diag)
        for factors, w in reversed(layers):
            for f, wi in zip(reversed(factors), reversed(w)):
                f.apply_exp(v, -0.5 * dt * wi, states)
    elif order == 1:
        v *= np.exp(-1j * dt * diag)
        for factors, w in reversed(layers):
            for f, wi in zip(factors, w):
                f.apply_exp(v, -dt * wi, states)
    else:
        raise ValueError("Trotter order must be 1 or 2")


@dataclass
class EvolutionPlan:
    """Time grid and recording cadence for a Trotterized run."""

    dt: float
    t_total: float
    order: int = 2
    cadence: int = 1
    t_start: float = 0.0

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        steps = self.n_steps
        if self.cadence < 1 or steps % self.cadence:
            raise ValueError("cadence must divide the step count")

    @property
    def n_steps(self):
        steps = int(round(self.t_total / self.dt))
        if abs(steps * self.dt - self.t_total) > 1e-9:
            raise ValueError("dt must divide t_total")
        return steps


def trotter_evolve(plan, split, state, observables=None, callback=None):
    """Run the plan; returns (final state, records at the sampling cadence).

    ``observables`` maps names to OperatorSums evaluated at each record point.
    """
    v = state.amplitudes.astype(np.complex128).copy()
    states = state.basis.states if isinstance(state.basis, SectorBasis) else FullBasis(state.register_size).states
    records = []
    observables = observables or {}

    def record(step, t):
        cur = QuantumState(v, state.basis, normalized=False)
        row = {"t": t, "step": step}
        for name, op in observables.items():
            row[name] = float(np.real(expectation(op, cur)))
        if callback is not None:
            row.update(callback(cur, t))
        records.append(row)

    record(0, plan.t_start)
    for n in range(plan.n_steps):
        t_mid = plan.t_start + (n + 0.5) * plan.dt
        _step(split, v, states, t_mid, plan.dt, plan.order)
        if (n + 1) % plan.cadence == 0:
            record(n + 1, plan.t_start + (n + 1) * plan.dt)
    return QuantumState(v, state.basis, normalized=False), records


# ---------------------------------------------------------------------------
# Adiabatic hadron wavepacket
# ---------------------------------------------------------------------------


def adiabatic_wavepacket(L, m, g, T1=200.0, T2=10.0, dt=0.2, vacuum=None, basis=None):
    """Two-stage adiabatic preparation of a localized hadron wavepacket.

    Starting from X_{L-1} X_L |Omega_0>, the kinetic term is ramped on with
    the two links surrounding the pair severed, the links are then closed,
    and a final backward evolution for T_B = T2/2 under the full Hamiltonian
    undoes the residual spreading.
    """
    from .hamiltonian import strong_coupling_vacuum_bits

    spec = SchwingerSpec(L=L, m=m, g=g)
    if basis is None:
        basis = schwinger_sector(L, 0)
    bits = strong_coupling_vacuum_bits(L) ^ (1 << (L - 1)) ^ (1 << L)
    state = QuantumState.from_bitstring(bits, basis)
    severed = {L - 2, L}

    def weight(t, bond_start):
        if t <= T1:
            return 0.0 if bond_start in severed else t / T1
        return (t - T1) / T2 if bond_start in severed else 1.0

    split = SplitSchwinger(spec, basis, kinetic_weight_fn=weight)
    plan1 = EvolutionPlan(dt=dt, t_total=T1 + T2, order=2)
    state, _ = trotter_evolve(plan1, split, state)
    split_full = SplitSchwinger(spec, basis)
    nback = int(round((T2 / 2.0) / dt))
    vb = state.amplitudes.copy()
    for nstep in range(nback):
        _step(split_full, vb, basis.states, 0.0, -dt, 2)
    wp = QuantumState(vb / np.linalg.norm(vb), basis)
    info = {}
    if vacuum is not None:
        info["vacuum_overlap"] = abs(np.vdot(vacuum.amplitudes, wp.amplitudes)) ** 2
        h = schwinger_parts(spec)
        htot = h["H_m"] + h["H_kin"] + h["H_el"]
        info["energy_above_vacuum"] = float(
            np.real(expectation(htot, wp)) - np.real(expectation(htot, vacuum))
        )
    return wp, info


# ---------------------------------------------------------------------------
# Heavy-charge runs
# ---------------------------------------------------------------------------


@dataclass
class HeavyChargeRecord:
    t: float
    x: float
    v: float
    energy: float
    parts: dict
    charge_density: np.ndarray


def heavy_charge_run(spec, traj, dt=None, extra_static=None, order=2, cadence=1, include_density=True):
    """Evolve the screened ground state while the heavy charge moves.

    ``extra_static`` maps staggered sites to additional fixed charges (the
    dense medium). Records total energy, part expectations and the light
    charge density, indexed by the heavy-charge position x(t).
    """
    from .solver import ground_state
    from .hamiltonian import schwinger_hamiltonian, staggered_charge

    if dt is None:
        dt = default_time_step(traj.v_max)
    extra_static = dict(extra_static or {})
    q_init = charge_partition(traj, 0.0)
    charges0 = dict(extra_static)
    for k, q in q_init.items():
        charges0[k] = charges0.get(k, 0.0) + q
    qtot = int(round(sum(charges0.values())))
    spec0 = replace(spec, background_charges=charges0)
    basis = schwinger_sector(spec.L, -qtot)
    e0, psi = ground_state(schwinger_hamiltonian(spec0), basis)

    def charge_fn(t):
        ch = dict(extra_static)
        for k, q in charge_partition(traj, t).items():
            ch[k] = ch.get(k, 0.0) + q
        return ch

    split = SplitSchwinger(spec, basis, charge_fn=charge_fn)
    n_q = spec.n_qubits
    qops = [staggered_charge(n_q, k) for k in range(n_q)]
    parts = schwinger_parts(replace(spec, background_charges={}))
    t_end = traj.arrival_time()
    n_steps = int(np.ceil(t_end / dt))
    v = psi.amplitudes.astype(np.complex128).copy()
    records = []

    def record(t):
        cur = QuantumState(v, basis, normalized=False)
        kin = float(np.real(expectation(parts["H_kin"], cur)))
        diag = split.diagonal(t)
        dens = np.abs(v) ** 2
        etot = kin + float(np.sum(diag * dens))
        mass = float(np.real(expectation(parts["H_m"], cur)))
        qdens = None
        if include_density:
            qdens = np.array([float(np.real(expectation(qk, cur))) for qk in qops])
        records.append(
            HeavyChargeRecord(
                t=t,
                x=float(traj.position(t)),
                v=float(traj.velocity(t)),
                energy=etot,
                parts={"H_kin": kin, "H_m": mass, "H_el": etot - kin - mass},
                charge_density=qdens,
            )
        )

    record(0.0)
    for nstep in range(n_steps):
        t0 = nstep * dt
        step_dt = min(dt, t_end - t0)
        if step_dt <= 0:
            break
        _step(split, v, basis.states, t0 + 0.5 * step_dt, step_dt, order)
        if (nstep + 1) % cadence == 0 or nstep == n_steps - 1:
            record(t0 + step_dt)
    return records
