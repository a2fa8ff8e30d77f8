"""Spin Hamiltonians for the Schwinger model and SU(Nc) x Nf Kogut-Susskind theory.

Site conventions: staggered site = qubit index, site 0 leftmost. Even sites
host matter (electrons / quarks), odd sites antimatter. An occupied even site
has Z = +1; the strong-coupling vacuum has Z_j = -(-1)^j, i.e. bit pattern
...0101 with qubit 0 set.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import OperatorSum, build_sector_basis


@dataclass(frozen=True)
class SchwingerSpec:
    """Lattice Schwinger model parameters in staggered units (a = 1)."""

    L: int
    m: float
    g: float
    lambda_bar: int | None = None
    background_charges: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.L < 2:
            raise ValueError("need at least L = 2 spatial sites")
        if self.lambda_bar is not None and not 1 <= self.lambda_bar <= self.L - 1:
            raise ValueError("lambda_bar must lie in [1, L-1]")
        for k in self.background_charges:
            if not 0 <= k < 2 * self.L:
                raise ValueError(f"background charge site {k} outside lattice")

    @property
    def n_qubits(self):
        return 2 * self.L


@dataclass(frozen=True)
class KSSpec:
    """SU(Nc) gauge theory with Nf fundamental flavors on L spatial sites."""

    L: int
    Nc: int = 3
    Nf: int = 2
    masses: tuple = (1.0, 1.0)
    g: float = 1.0
    mu_B: float = 0.0
    mu_I: float = 0.0
    h: float = 0.0

    def __post_init__(self):
        if self.Nc < 2 or self.Nf < 1 or self.L < 1:
            raise ValueError("require Nc >= 2, Nf >= 1, L >= 1")
        if len(self.masses) != self.Nf:
            raise ValueError("one mass per flavor required")
        if self.mu_I != 0.0 and self.Nf != 2:
            raise ValueError("isospin chemical potential defined for Nf = 2 only")

    @property
    def n_qubits(self):
        return 2 * self.L * self.Nc * self.Nf

    def qubit(self, n, f, c):
        """JW layout: colors fastest, then flavor, then staggered site."""
        return self.Nc * self.Nf * n + self.Nc * f + c


# ---------------------------------------------------------------------------
# Schwinger model
# ---------------------------------------------------------------------------


def staggered_charge(n_qubits, k):
    """q_k = -( Z_k + (-1)^k ) / 2; annihilates the strong-coupling vacuum."""
    op = OperatorSum(n_qubits)
    op.add(-0.5, {k: "Z"})
    op._add_raw(-0.5 * (-1) ** k, 0, 0)
    return op


def charge_operators(spec):
    """Staggered charges q_k, spatial charges Qbar_n and dipoles delta_n."""
    n = spec.n_qubits
    q = [staggered_charge(n, k) for k in range(n)]
    qbar = [(q[2 * j] + q[2 * j + 1]).normalized() for j in range(spec.L)]
    delta = [(q[2 * j] - q[2 * j + 1]).normalized() for j in range(spec.L)]
    return {"q": q, "Qbar": qbar, "delta": delta}


def schwinger_parts(spec):
    """H_m, H_kin, H_el of the Schwinger Hamiltonian as separate operators.

    Constant (identity) terms are retained so absolute energies match exact
    diagonalization. Background charges enter the electric term through the
    cumulative Gauss-law sum.
    """
    n = spec.n_qubits
    hm = OperatorSum(n)
    for j in range(n):
        hm.add(0.5 * spec.m * (-1) ** j, {j: "Z"})
        hm._add_raw(0.5 * spec.m, 0, 0)
    hkin = OperatorSum(n)
    for j in range(n - 1):
        # (sigma+_j sigma-_{j+1} + h.c.) / 2 = (X_j X_{j+1} + Y_j Y_{j+1}) / 4
        hkin.add(0.25, {j: "X", j + 1: "X"})
        hkin.add(0.25, {j: "Y", j + 1: "Y"})
    hel = OperatorSum(n)
    cum = OperatorSum(n)
    for j in range(n - 1):
        cum = cum + staggered_charge(n, j)
        qbg = spec.background_charges.get(j, 0.0)
        if qbg:
            cum = cum + OperatorSum.identity(n, qbg)
        cum = cum.normalized()
        hel = hel + (spec.g**2 / 2.0) * (cum @ cum)
    return {"H_m": hm.normalized(), "H_kin": hkin.normalized(), "H_el": hel.normalized()}


def schwinger_hamiltonian(spec):
    """Full H = H_m + H_kin + H_el; see schwinger_parts for the pieces."""
    parts = schwinger_parts(spec)
    return (parts["H_m"] + parts["H_kin"] + parts["H_el"]).normalized()


def schwinger_electric_cp(L, g, n_qubits=None):
    """Manifestly CP-symmetric electric term, valid in the Q = 0 sector."""
    n = n_qubits or 2 * L
    q = [staggered_charge(n, k) for k in range(2 * L)]
    hel = OperatorSum(n)
    for j in range(L - 1):
        cum = OperatorSum(n)
        for k in range(j + 1):
            cum = cum + q[k]
        hel = hel + (g**2 / 2.0) * (cum @ cum)
    for j in range(L + 1, 2 * L):
        cum = OperatorSum(n)
        for k in range(j, 2 * L):
            cum = cum + q[k]
        hel = hel + (g**2 / 2.0) * (cum @ cum)
    half_left = OperatorSum(n)
    for k in range(L):
        half_left = half_left + q[k]
    half_right = OperatorSum(n)
    for k in range(L, 2 * L):
        half_right = half_right + q[k]
    hel = hel + (g**2 / 4.0) * (half_left @ half_left) + (g**2 / 4.0) * (half_right @ half_right)
    return hel.normalized()


def schwinger_truncated(spec):
    """Electric interaction with charge/dipole couplings dropped beyond
    lambda_bar spatial sites; even- and odd-L closed forms dispatched."""
    if spec.lambda_bar is None:
        raise ValueError("spec.lambda_bar must be set for the truncated builder")
    if spec.background_charges:
        raise ValueError("truncated interaction assumes zero background charges")
    lam = spec.lambda_bar
    L = spec.L
    n = spec.n_qubits
    ops = charge_operators(spec)
    Q, D = ops["Qbar"], ops["delta"]
    g2 = spec.g**2 / 2.0
    hel = OperatorSum(n)
    if L % 2 == 0:
        half = L // 2
        for nn in range(half):
            hel = hel + g2 * (L - 1.25 - 2 * nn) * (Q[nn] @ Q[nn])
            hel = hel + g2 * 0.5 * (Q[nn] @ D[nn])
            hel = hel + g2 * 0.25 * (D[nn] @ D[nn])
            hel = hel + g2 * (0.75 + 2 * nn) * (Q[half + nn] @ Q[half + nn])
            hel = hel - g2 * 0.5 * (Q[half + nn] @ D[half + nn])
            hel = hel + g2 * 0.25 * (D[half + nn] @ D[half + nn])
        for nn in range(half - 1):
            for mm in range(nn + 1, min(half - 1, nn + lam) + 1):
                hel = hel + 2 * g2 * (L - 1 - 2 * mm) * (Q[nn] @ Q[mm])
                hel = hel + g2 * (Q[nn] @ D[mm])
                hel = hel + 2 * g2 * (1 + 2 * nn) * (Q[half + nn] @ Q[half + mm])
                hel = hel - g2 * (Q[half + mm] @ D[half + nn])
    else:
        c = (L - 1) // 2  # central spatial site
        for nn in range((L - 1) // 2):
            hel = hel + g2 * (L - 1.25 - 2 * nn) * (Q[nn] @ Q[nn])
            hel = hel + g2 * 0.5 * (Q[nn] @ D[nn])
            hel = hel + g2 * 0.25 * (D[nn] @ D[nn])
            hel = hel + g2 * (1.75 + 2 * nn) * (Q[c + 1 + nn] @ Q[c + 1 + nn])
            hel = hel - g2 * 0.5 * (Q[c + 1 + nn] @ D[c + 1 + nn])
            hel = hel + g2 * 0.25 * (D[c + 1 + nn] @ D[c + 1 + nn])
        hel = hel + g2 * 0.25 * ((Q[c] @ Q[c]) + (D[c] @ D[c]))
        for nn in range((L - 3) // 2):
            for mm in range(nn + 1, min((L - 3) // 2, nn + lam) + 1):
                hel = hel + 2 * g2 * (L - 1 - 2 * mm) * (Q[nn] @ Q[mm])
                hel = hel + g2 * (Q[nn] @ D[mm])
                hel = hel + 2 * g2 * (2 + 2 * nn) * (Q[c + 1 + nn] @ Q[c + 1 + mm])
                hel = hel - g2 * (Q[c + 1 + mm] @ D[c + 1 + nn])
        for nn in range(1, min((L - 1) // 2, lam) + 1):
            hel = hel + g2 * 0.5 * (Q[c - nn] @ Q[c])
            hel = hel + g2 * 0.5 * (Q[c - nn] @ D[c])
            hel = hel + g2 * 0.5 * (Q[c + nn] @ Q[c])
            hel = hel - g2 * 0.5 * (Q[c + nn] @ D[c])
    return hel.normalized()


def schwinger_sector(L, q_total=0):
    """Basis of the total-charge sector; Q_tot = (Hamming weight) - L."""
    return build_sector_basis(2 * L, [(tuple(range(2 * L)), L + q_total)])


def strong_coupling_vacuum_bits(L):
    """|Omega_0>: every even (electron) site unoccupied -> bit set."""
    return sum(1 << j for j in range(0, 2 * L, 2))


# ---------------------------------------------------------------------------
# CP transformation (charge-zero sector)
# ---------------------------------------------------------------------------


def cp_transform(op, n_qubits=None):
    """Site reversal j -> n-1-j composed with X conjugation on every qubit.

    X sigma X leaves X invariant and negates Y and Z.
    """
    n = n_qubits or op.register_size
    out = OperatorSum(op.register_size)
    for term in op.terms:
        coeff = term.coefficient
        letters = {}
        for q, p in term.letters.items():
            letters[n - 1 - q] = p
            if p in ("Y", "Z"):
                coeff = -coeff
        out.add(coeff, letters)
    return out.normalized()


def cp_image_bits(bits, n_qubits):
    """CP image of a computational basis state: reverse qubits, flip all bits."""
    out = 0
    for j in range(n_qubits):
        if not (bits >> j) & 1:
            out |= 1 << (n_qubits - 1 - j)
    return out


# ---------------------------------------------------------------------------
# SU(Nc) x Nf Kogut-Susskind theory
# ---------------------------------------------------------------------------


def _charge_product_same(spec, n_site, f):
    """4 Q_{n,f}.Q_{n,f} = (Nc^2-1)/2 - (1 + 1/Nc) sum_{c<c'} Z Z."""
    n = spec.n_qubits
    Nc = spec.Nc
    op = OperatorSum.identity(n, (Nc**2 - 1) / 2.0)
    for c in range(Nc - 1):
        for cp in range(c + 1, Nc):
            op.add(-(1.0 + 1.0 / Nc), {spec.qubit(n_site, f, c): "Z", spec.qubit(n_site, f, cp): "Z"})
    return 0.25 * op


def _charge_product_cross(spec, n1, f1, n2, f2):
    """8 Q_{n,f}.Q_{m,f'} for (n,f) != (m,f'), per the general JW expansion."""
    n = spec.n_qubits
    Nc = spec.Nc
    op = OperatorSum(n)
    for c in range(Nc - 1):
        for cp in range(c + 1, Nc):
            i1, j1 = spec.qubit(n1, f1, c), spec.qubit(n1, f1, cp)
            i2, j2 = spec.qubit(n2, f2, c), spec.qubit(n2, f2, cp)
            # sigma+_{i1} Z.. sigma-_{j1} sigma-_{i2} Z.. sigma+_{j2} + h.c.
            hop = _sigma_pm_string(n, i1, j1, +1) @ _sigma_pm_string(n, i2, j2, -1)
            op = op + 4.0 * (hop + hop.dagger())
    for c in range(Nc):
        for cp in range(Nc):
            coeff = (1.0 if c == cp else 0.0) - 1.0 / Nc
            op.add(coeff, {spec.qubit(n1, f1, c): "Z", spec.qubit(n2, f2, cp): "Z"})
    return (1.0 / 8.0) * op.normalized()


def _sigma_pm_string(n, i, j, sign):
    """sigma+/-_i (Z string) sigma-/+_j for i < j, interior Z's between them."""
    # sigma+ = (X + iY)/2 maps |1> -> |0>;  sigma- = (X - iY)/2
    si = OperatorSum(n)
    si.add(0.5, {i: "X"})
    si.add(0.5j * sign, {i: "Y"})
    sj = OperatorSum(n)
    sj.add(0.5, {j: "X"})
    sj.add(-0.5j * sign, {j: "Y"})
    zs = OperatorSum.identity(n)
    for k in range(i + 1, j):
        znext = OperatorSum(n)
        znext.add(1.0, {k: "Z"})
        zs = zs @ znext
    return (si @ zs @ sj).normalized()


def site_charge_product(spec, n_site):
    """Sum over flavors of Q.Q on one staggered site (all color charges)."""
    op = OperatorSum(spec.n_qubits)
    for f in range(spec.Nf):
        op = op + _charge_product_same(spec, n_site, f)
    for f in range(spec.Nf - 1):
        for fp in range(f + 1, spec.Nf):
            op = op + 2.0 * _charge_product_cross(spec, n_site, f, n_site, fp)
    return op.normalized()


def cross_site_charge_product(spec, n1, n2):
    op = OperatorSum(spec.n_qubits)
    for f in range(spec.Nf):
        for fp in range(spec.Nf):
            op = op + _charge_product_cross(spec, n1, f, n2, fp)
    return op.normalized()


def ks_parts(spec):
    """JW-mapped Hamiltonian pieces for SU(Nc) with Nf flavors."""
    n = spec.n_qubits
    nsites = 2 * spec.L
    NcNf = spec.Nc * spec.Nf
    hkin = OperatorSum(n)
    sign = (-1.0) ** (NcNf - 1)
    for nn in range(nsites - 1):
        for f in range(spec.Nf):
            for c in range(spec.Nc):
                i = spec.qubit(nn, f, c)
                hop = _sigma_pm_string(n, i, i + NcNf, +1)
                hkin = hkin + 0.5 * sign * (hop + hop.dagger())
    hm = OperatorSum(n)
    for nn in range(nsites):
        for f in range(spec.Nf):
            for c in range(spec.Nc):
                hm.add(0.5 * spec.masses[f] * (-1) ** nn, {spec.qubit(nn, f, c): "Z"})
                hm._add_raw(0.5 * spec.masses[f], 0, 0)
    hel = OperatorSum(n)
    for nn in range(nsites - 1):
        hel = hel + (spec.g**2 / 2.0) * (nsites - 1 - nn) * site_charge_product(spec, nn)
    for nn in range(nsites - 2):
        for mm in range(nn + 1, nsites - 1):
            hel = hel + spec.g**2 * (nsites - 1 - mm) * cross_site_charge_product(spec, nn, mm)
    hmub = OperatorSum(n)
    for nn in range(nsites):
        for f in range(spec.Nf):
            for c in range(spec.Nc):
                hmub.add(-spec.mu_B / (2.0 * spec.Nc), {spec.qubit(nn, f, c): "Z"})
    hmui = OperatorSum(n)
    if spec.Nf == 2:
        for nn in range(nsites):
            for f in range(spec.Nf):
                for c in range(spec.Nc):
                    hmui.add(-spec.mu_I / 4.0 * (-1) ** f, {spec.qubit(nn, f, c): "Z"})
    h1 = OperatorSum(n)
    if spec.h:
        for nn in range(nsites):
            h1 = h1 + (spec.h**2 / 2.0) * site_charge_product(spec, nn)
        for nn in range(nsites - 1):
            for mm in range(nn + 1, nsites):
                h1 = h1 + spec.h**2 * cross_site_charge_product(spec, nn, mm)
    return {
        "H_kin": hkin.normalized(),
        "H_m": hm.normalized(),
        "H_el": hel.normalized(),
        "H_muB": hmub.normalized(),
        "H_muI": hmui.normalized(),
        "H_1": h1.normalized(),
    }


def ks_hamiltonian(spec):
    parts = ks_parts(spec)
    total = OperatorSum(spec.n_qubits)
    for p in parts.values():
        total = total + p
    return total.normalized()


def ks_sector(spec, color_charges=None, i3=None):
    """Basis with fixed color charges (one per color) and, for Nf=2, fixed I3.

    The color charge c counts quarks minus antiquarks of that color; the
    corresponding Hamming weight on that color's qubits is L*Nf - c.
    """
    Nc, Nf, L = spec.Nc, spec.Nf, spec.L
    if color_charges is None:
        color_charges = (0,) * Nc
    constraints = []
    total_weight = 0
    for c in range(Nc):
        qubits = [spec.qubit(nn, f, c) for nn in range(2 * L) for f in range(Nf)]
        w = L * Nf - color_charges[c]
        constraints.append((tuple(qubits), w))
        total_weight += w
    if i3 is not None:
        if Nf != 2:
            raise ValueError("I3 sectors require Nf = 2")
        w_u = (total_weight - int(round(2 * i3))) // 2
        if (total_weight - int(round(2 * i3))) % 2:
            raise ValueError("inconsistent I3 for this color sector")
        qubits_u = [spec.qubit(nn, 0, c) for nn in range(2 * L) for c in range(Nc)]
        constraints.append((tuple(qubits_u), w_u))
    return build_sector_basis(spec.n_qubits, constraints)


def ks_trivial_vacuum_bits(spec):
    """Unoccupied state: quark sites (even n) all bits set, antiquarks clear."""
    bits = 0
    for nn in range(0, 2 * spec.L, 2):
        for f in range(spec.Nf):
            for c in range(spec.Nc):
                bits |= 1 << spec.qubit(nn, f, c)
    return bits
