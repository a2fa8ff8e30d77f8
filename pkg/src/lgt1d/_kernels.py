"""Hot numeric kernels: numba-jitted with a pure-numpy fallback.

The active backend is chosen once at import from the environment variable
``LGT1D_KERNELS`` (``numba`` or ``numpy``). Default is numba when importable.
All kernels operate on the packed representation used throughout the package:

- basis states are int64 bitmasks, qubit 0 = least significant bit
- a Pauli string is (coeff, xmask, zmask) with coeff including the i**nY
  factor from Y = i*X*Z, so  P|b> = coeff * (-1)^popcount(b & zmask) |b ^ xmask>
"""

from __future__ import annotations

import os

import numpy as np

_BACKEND = os.environ.get("LGT1D_KERNELS", "numba").lower()
if _BACKEND not in ("numba", "numpy"):
    raise ValueError(f"LGT1D_KERNELS must be 'numba' or 'numpy', got {_BACKEND!r}")

if _BACKEND == "numba":
    try:
        import numba
        from numba import njit, prange
    except ImportError:  # pragma: no cover
        _BACKEND = "numpy"

# 16-bit parity lookup for the numpy backend
_PAR16 = np.zeros(1 << 16, dtype=np.int8)
for _i in range(1, 1 << 16):
    _PAR16[_i] = _PAR16[_i >> 1] ^ (_i & 1)


def backend() -> str:
    return _BACKEND


def parity_u64(arr, mask):
    """(-1)^popcount(arr & mask) as a float array (numpy path)."""
    x = np.bitwise_and(arr, mask)
    p = _PAR16[x & 0xFFFF] ^ _PAR16[(x >> 16) & 0xFFFF] ^ _PAR16[(x >> 32) & 0xFFFF] ^ _PAR16[(x >> 48) & 0xFFFF]
    return 1.0 - 2.0 * p.astype(np.float64)


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

if _BACKEND == "numba":

    @njit(inline="always", cache=True)
    def _popcount(x):
        x = x - ((x >> 1) & 0x5555555555555555)
        x = (x & 0x3333333333333333) + ((x >> 2) & 0x3333333333333333)
        x = (x + (x >> 4)) & 0x0F0F0F0F0F0F0F0F
        return (x * 0x0101010101010101) >> 56

    @njit(inline="always", cache=True)
    def _sign(b, zmask):
        return 1.0 - 2.0 * (_popcount(b & zmask) & 1)

    @njit(inline="always", cache=True)
    def _find(states, b):
        lo, hi = 0, states.shape[0]
        while lo < hi:
            mid = (lo + hi) >> 1
            if states[mid] < b:
                lo = mid + 1
            else:
                hi = mid
        if lo < states.shape[0] and states[lo] == b:
            return lo
        return -1

    @njit(parallel=True, cache=True)
    def apply_grouped_sector(v, states, gx, gptr, zf, cf, out):
        """Apply one xmask-grouped operator; returns the largest summed
        amplitude whose target falls outside the sector (0 if none)."""
        n = states.shape[0]
        worst = 0.0
        for g in range(gx.shape[0]):
            x = gx[g]
            lo, hi = gptr[g], gptr[g + 1]
            if x == 0:
                for i in prange(n):
                    b = states[i]
                    amp = 0.0 + 0.0j
                    for t in range(lo, hi):
                        amp += cf[t] * _sign(b, zf[t])
                    out[i] += amp * v[i]
            else:
                wloc = 0.0
                for i in prange(n):
                    b = states[i]
                    amp = 0.0 + 0.0j
                    for t in range(lo, hi):
                        amp += cf[t] * _sign(b, zf[t])
                    j = _find(states, b ^ x)
                    if j >= 0:
                        out[j] += amp * v[i]
                    elif abs(amp) > wloc:
                        wloc = abs(amp)
                if wloc > worst:
                    worst = wloc
        return worst

    @njit(parallel=True, cache=True)
    def apply_grouped_sector_real(v, states, gx, gptr, zf, cf, out):
        n = states.shape[0]
        for g in range(gx.shape[0]):
            x = gx[g]
            lo, hi = gptr[g], gptr[g + 1]
            if x == 0:
                for i in prange(n):
                    b = states[i]
                    amp = 0.0
                    for t in range(lo, hi):
                        amp += cf[t] * _sign(b, zf[t])
                    out[i] += amp * v[i]
            else:
                for i in prange(n):
                    b = states[i]
                    amp = 0.0
                    for t in range(lo, hi):
                        amp += cf[t] * _sign(b, zf[t])
                    j = _find(states, b ^ x)
                    if j >= 0:
                        out[j] += amp * v[i]

    @njit(parallel=True, cache=True)
    def apply_grouped_full(v, gx, gptr, zf, cf, out):
        dim = v.shape[0]
        for g in range(gx.shape[0]):
            x = gx[g]
            lo, hi = gptr[g], gptr[g + 1]
            for b in prange(dim):
                amp = 0.0 + 0.0j
                for t in range(lo, hi):
                    amp += cf[t] * _sign(b, zf[t])
                out[b ^ x] += amp * v[b]

    @njit(parallel=True, cache=True)
    def diagonal_sector(states, coeffs, zmasks, out):
        n = states.shape[0]
        for i in prange(n):
            b = states[i]
            acc = 0.0
            for t in range(coeffs.shape[0]):
                acc += coeffs[t] * _sign(b, zmasks[t])
            out[i] = acc

    @njit(parallel=True, cache=True)
    def pair_rotation_sector(v, states, theta, x, zf, cf):
        """v <- exp(i*theta*G) v with G = sum_t cf[t] X^x Z^zf[t] Hermitian, x != 0.

        Exact per factor: G is block-diagonal on basis pairs {b, b^x} with
        blocks [[0, conj(w)], [w, 0]], w(b) = sum_t cf[t] * sign(b, zf[t])
        evaluated as <b^x|G|b>.
        """
        n = states.shape[0]
        for i in prange(n):
            b = states[i]
            b2 = b ^ x
            if b2 < b:
                continue
            j = _find(states, b2)
            if j < 0:
                continue
            w = 0.0 + 0.0j
            for t in range(cf.shape[0]):
                w += cf[t] * _sign(b, zf[t])
            aw = abs(w)
            if aw == 0.0:
                continue
            ph = w / aw
            cs, sn = np.cos(theta * aw), np.sin(theta * aw)
            vi, vj = v[i], v[j]
            v[i] = cs * vi + 1j * sn * np.conj(ph) * vj
            v[j] = cs * vj + 1j * sn * ph * vi

    @njit(parallel=True, cache=True)
    def pair_rotation_full(v, theta, x, zf, cf):
        dim = v.shape[0]
        for b in prange(dim):
            b2 = b ^ x
            if b2 < b:
                continue
            w = 0.0 + 0.0j
            for t in range(cf.shape[0]):
                w += cf[t] * _sign(b, zf[t])
            aw = abs(w)
            if aw == 0.0:
                continue
            ph = w / aw
            cs, sn = np.cos(theta * aw), np.sin(theta * aw)
            vi, vj = v[b], v[b2]
            v[b] = cs * vi + 1j * sn * np.conj(ph) * vj
            v[b2] = cs * vj + 1j * sn * ph * vi

    @njit(parallel=True, cache=True)
    def diagonal_phase_sector(v, states, theta, zf, cf):
        """v <- exp(i*theta*D) v with diagonal D = sum_t cf[t] Z^zf[t]."""
        n = states.shape[0]
        for i in prange(n):
            b = states[i]
            d = 0.0
            for t in range(cf.shape[0]):
                d += cf[t] * _sign(b, zf[t])
            v[i] = v[i] * (np.cos(theta * d) + 1j * np.sin(theta * d))

    @njit(cache=True)
    def filter_states(nq, submasks, weights):
        total = np.int64(1) << nq
        keep = np.empty(total, dtype=np.int64)
        cnt = 0
        for b in range(total):
            ok = True
            for k in range(submasks.shape[0]):
                if _popcount(b & submasks[k]) != weights[k]:
                    ok = False
                    break
            if ok:
                keep[cnt] = b
                cnt += 1
        return keep[:cnt].copy()

    @njit(cache=True)
    def gosper_states(nq, weight):
        if weight == 0:
            return np.zeros(1, dtype=np.int64)
        count = 1
        for i in range(weight):
            count = count * (nq - i) // (i + 1)
        out = np.empty(count, dtype=np.int64)
        b = (np.int64(1) << weight) - 1
        limit = np.int64(1) << nq
        k = 0
        while b < limit:
            out[k] = b
            k += 1
            lo = b & (-b)
            ripple = b + lo
            b = ripple | (((b ^ ripple) >> 2) // lo)
        return out

else:
    # -----------------------------------------------------------------------
    # numpy fallback implementations
    # -----------------------------------------------------------------------

    def _group_amp(states, lo, hi, zf, cf):
        amp = np.zeros(states.shape[0], dtype=cf.dtype)
        for t in range(lo, hi):
            amp += cf[t] * parity_u64(states, int(zf[t]))
        return amp

    def _grouped_apply(v, states, gx, gptr, zf, cf, out, track):
        worst = 0.0
        for g in range(gx.shape[0]):
            x = int(gx[g])
            amp = _group_amp(states, gptr[g], gptr[g + 1], zf, cf) * v
            if x == 0:
                out += amp
                continue
            targets = np.bitwise_xor(states, x)
            j = np.searchsorted(states, targets)
            ok = j < states.shape[0]
            jj = np.where(ok, j, 0)
            ok &= states[jj] == targets
            if track and not ok.all():
                coeff = _group_amp(states[~ok], gptr[g], gptr[g + 1], zf, cf)
                worst = max(worst, float(np.abs(coeff).max(initial=0.0)))
            np.add.at(out, jj[ok], amp[ok])
        return worst

    def apply_grouped_sector(v, states, gx, gptr, zf, cf, out):
        return _grouped_apply(v, states, gx, gptr, zf, cf, out, True)

    def apply_grouped_sector_real(v, states, gx, gptr, zf, cf, out):
        _grouped_apply(v, states, gx, gptr, zf, cf, out, False)

    def apply_grouped_full(v, gx, gptr, zf, cf, out):
        states = np.arange(v.shape[0], dtype=np.int64)
        for g in range(gx.shape[0]):
            x = int(gx[g])
            amp = _group_amp(states, gptr[g], gptr[g + 1], zf, cf) * v
            out[np.bitwise_xor(states, x)] += amp

    def diagonal_sector(states, coeffs, zmasks, out):
        out[:] = 0.0
        for t in range(coeffs.shape[0]):
            out += coeffs[t] * parity_u64(states, int(zmasks[t]))

    def _pair_rotation(v, states, sector, theta, x, zf, cf):
        b = states
        b2 = np.bitwise_xor(b, x)
        sel = b2 > b
        i = np.nonzero(sel)[0]
        if sector:
            j = np.searchsorted(states, b2[sel])
            ok = (j < states.shape[0])
            jj = np.where(ok, j, 0)
            ok &= states[jj] == b2[sel]
            i, j = i[ok], jj[ok]
        else:
            j = b2[sel]
        w = np.zeros(i.shape[0], dtype=np.complex128)
        for t in range(cf.shape[0]):
            w += cf[t] * parity_u64(b[i], int(zf[t]))
        aw = np.abs(w)
        nz = aw > 0
        i, j, w, aw = i[nz], j[nz], w[nz], aw[nz]
        ph = w / aw
        cs, sn = np.cos(theta * aw), np.sin(theta * aw)
        vi, vj = v[i].copy(), v[j].copy()
        v[i] = cs * vi + 1j * sn * np.conj(ph) * vj
        v[j] = cs * vj + 1j * sn * ph * vi

    def pair_rotation_sector(v, states, theta, x, zf, cf):
        _pair_rotation(v, states, True, theta, int(x), zf, cf)

    def pair_rotation_full(v, theta, x, zf, cf):
        states = np.arange(v.shape[0], dtype=np.int64)
        _pair_rotation(v, states, False, theta, int(x), zf, cf)

    def diagonal_phase_sector(v, states, theta, zf, cf):
        d = np.zeros(states.shape[0], dtype=np.float64)
        for t in range(cf.shape[0]):
            d += cf[t] * parity_u64(states, int(zf[t]))
        v *= np.exp(1j * theta * d)

    def filter_states(nq, submasks, weights):
        states = np.arange(1 << nq, dtype=np.int64)
        keep = np.ones(states.shape[0], dtype=bool)
        for k in range(submasks.shape[0]):
            keep &= _np_popcount(np.bitwise_and(states, int(submasks[k]))) == weights[k]
        return states[keep]

    def _np_popcount(x):
        x = x - ((x >> 1) & 0x5555555555555555)
        x = (x & 0x3333333333333333) + ((x >> 2) & 0x3333333333333333)
        x = (x + (x >> 4)) & 0x0F0F0F0F0F0F0F0F
        return (x * 0x0101010101010101) >> 56

    def gosper_states(nq, weight):
        if weight == 0:
            return np.zeros(1, dtype=np.int64)
        states = np.arange(1 << nq, dtype=np.int64)
        return states[_np_popcount(states) == weight]
