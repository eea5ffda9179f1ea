"""Compiled sweep kernels.

Arrays are laid out ``(L, L, R)`` with ``R`` independent replicas in the last
axis so the per-site update vectorizes across replicas.  Replicas never
interact: a replica's trajectory is identical whether it runs alone or in a
batch.

LCG arithmetic runs in float64, which is exact while a*(m-1)+c+m < 2**53.
All four built-in generators satisfy this.
"""

from __future__ import annotations

import numba as nb
import numpy as np

FLOAT_EXACT = 2**53
ALWAYS = 1e300


def lcg_fits_float(params) -> bool:
    m, a, c = params.modulus, params.multiplier, params.increment
    return a * (m - 1) + c + m < FLOAT_EXACT


def lcg_constants(params):
    m = float(params.modulus)
    return m, float(params.multiplier), float(params.increment), 1.0 / m


@nb.njit(cache=True, inline="always")
def _lcg_step(x, m, a, c, invm):
    p = a * x + c
    q = np.floor(p * invm)
    r = p - q * m
    if r < 0.0:
        r += m
    if r >= m:
        r -= m
    return r


@nb.njit(cache=True)
def lcg_fill(state, m, a, c, invm, out):
    x = state
    for k in range(out.shape[0]):
        x = _lcg_step(x, m, a, c, invm)
        out[k] = x
    return x


@nb.njit(cache=True, boundscheck=False)
def sweep_lcg(spins, states, m, a, c, invm, t4, t8, nsweeps, totals, sums, offset):
    """Run ``nsweeps`` full sweeps drawing from per-site LCG states.

    ``totals[q]`` is the running spin sum of replica q; when ``sums`` has rows
    it receives the total after sweep s at row ``offset + s``.
    """
    L = spins.shape[0]
    R = spins.shape[2]
    record = sums.shape[0] > 0
    for s in range(nsweeps):
        for color in range(2):
            for i in range(L):
                up = i - 1 if i > 0 else L - 1
                dn = i + 1 if i < L - 1 else 0
                for j in range((i + color) & 1, L, 2):
                    lf = j - 1 if j > 0 else L - 1
                    rt = j + 1 if j < L - 1 else 0
                    sv = spins[i, j]
                    xv = states[i, j]
                    u = spins[up, j]
                    d = spins[dn, j]
                    l = spins[i, lf]
                    rr = spins[i, rt]
                    for q in range(R):
                        p = a * xv[q] + c
                        qq = np.floor(p * invm)
                        r = p - qq * m
                        r = r + m if r < 0.0 else r
                        r = r - m if r >= m else r
                        xv[q] = r
                        old = sv[q]
                        h = old * (u[q] + d[q] + l[q] + rr[q])
                        thr = t8 if h > 2.0 else (t4 if h > 0.0 else ALWAYS)
                        new = -old if r <= thr else old
                        sv[q] = new
                        totals[q] += new - old
        if record:
            for q in range(R):
                sums[offset + s, q] = totals[q]


@nb.njit(cache=True, boundscheck=False)
def sweep_external(spins, raws, t4, t8, nsweeps, totals, sums, offset):
    """Sweeps consuming supplied raw draws.

    ``raws[s, k, q]``: within sweep s the same-colour sites of the first
    sublattice take k = 0 .. L*L/2 - 1 in row-major order, then the second.
    """
    L = spins.shape[0]
    R = spins.shape[2]
    record = sums.shape[0] > 0
    for s in range(nsweeps):
        k = 0
        for color in range(2):
            for i in range(L):
                up = i - 1 if i > 0 else L - 1
                dn = i + 1 if i < L - 1 else 0
                for j in range((i + color) & 1, L, 2):
                    lf = j - 1 if j > 0 else L - 1
                    rt = j + 1 if j < L - 1 else 0
                    sv = spins[i, j]
                    xv = raws[s, k]
                    u = spins[up, j]
                    d = spins[dn, j]
                    l = spins[i, lf]
                    rr = spins[i, rt]
                    for q in range(R):
                        r = xv[q]
                        old = sv[q]
                        h = old * (u[q] + d[q] + l[q] + rr[q])
                        thr = t8 if h > 2.0 else (t4 if h > 0.0 else ALWAYS)
                        new = -old if r <= thr else old
                        sv[q] = new
                        totals[q] += new - old
                    k += 1
        if record:
            for q in range(R):
                sums[offset + s, q] = totals[q]
