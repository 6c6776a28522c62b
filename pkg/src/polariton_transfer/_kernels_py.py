"""Pure numpy implementations of the hot loops (fallback for ``_kernels``).

Both kernels work in the eigenbasis of the hopping matrix: ``c = V.T @ psi``.
Free evolution is then a diagonal phase and a failed receiver measurement
is the rank-one update ``c -= f_r * V[r, :]``.
"""
from __future__ import annotations

import numpy as np


def measure_rounds(V, w, c, r, dts, target, cumulative0):
    """Evolve by each ``dts[k]`` then measure the receiver, until ``target``.

    Returns ``(f_r, p_cond, cumulative, remaining, c_out, n_done)``; ``f_r``
    is the receiver amplitude seen at each round and ``remaining`` the
    squared norm left after that round's failed measurement. Stops early when
    the cumulative success reaches ``target`` or the remaining norm vanishes.
    """
    V = np.asarray(V, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    c = np.array(c, dtype=np.complex128)
    dts = np.asarray(dts, dtype=np.float64)
    vr = V[r, :].copy()
    n = len(dts)
    f_r = np.zeros(n, dtype=np.complex128)
    p_cond = np.zeros(n)
    cum = np.zeros(n)
    left = np.zeros(n)
    total = float(cumulative0)
    rem = float(np.vdot(c, c).real)
    done = 0
    for k in range(n):
        if rem <= 1e-24:
            break
        c *= np.exp(-1j * w * dts[k])
        f = vr @ c
        pa = f.real * f.real + f.imag * f.imag
        f_r[k] = f
        p_cond[k] = min(pa / rem, 1.0)
        total += pa
        cum[k] = total
        c -= f * vr
        rem = float(np.vdot(c, c).real)
        left[k] = rem
        done = k + 1
        if total >= target:
            break
    return f_r[:done], p_cond[:done], cum[:done], left[:done], c, done


def receiver_profile(vr, c, w, step, m):
    """|<r|exp(-i H t)|psi>|^2 at t = step, 2*step, ..., m*step."""
    vr = np.asarray(vr, dtype=np.float64)
    c = np.asarray(c, dtype=np.complex128)
    w = np.asarray(w, dtype=np.float64)
    t = step * np.arange(1, m + 1)
    amps = np.exp(-1j * np.outer(t, w)) @ (vr * c)
    return amps.real ** 2 + amps.imag ** 2
