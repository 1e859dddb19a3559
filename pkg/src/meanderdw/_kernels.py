"""Numba kernels: fused local-field evaluation and LLG stepping.

One pass over the cells evaluates every local field term (exchange, DMI,
uniaxial anisotropy, RKKY, applied field) from a packed coefficient
vector; disabled terms carry zero coefficients. The same pass backs the
per-term public API (single nonzero coefficient) and the integrator hot
path, so the finite-difference energy checks exercise the production
kernel.

Field convention: B in tesla with B_i = -(1/(M_S V)) dE/dm_i exactly at
the discrete level. All reductions run serially in cell-index order;
results do not depend on thread count.

Packed coefficient layout (index: meaning):
    0..2   exchange  2*A/(M_S d_a^2) per axis
    3..4   DMI       D/(M_S d_a) for a = x, y
    5      anisotropy 2*K_eff/M_S
    6..8   applied field B_a [T]
    9      RKKY      J/(M_S t_fm)
    10..12 exchange energy A*V/d_a^2 per axis
    13..14 DMI energy D*V/d_a
    15     anisotropy energy K_eff*V
    16     Zeeman energy M_S*V
    17     RKKY energy J*V/t_fm
"""

import numpy as np
from numba import njit, prange

NCOEF = 18


@njit(cache=True, inline="always")
def _field_cell(i, m, nb, nbw, kfac, partner, pw, c):
    """Local field terms of cell i; returns (bx, by, bz)."""
    jpx, wpx = nb[i, 0], nbw[i, 0]
    jmx, wmx = nb[i, 1], nbw[i, 1]
    jpy, wpy = nb[i, 2], nbw[i, 2]
    jmy, wmy = nb[i, 3], nbw[i, 3]
    jpz, wpz = nb[i, 4], nbw[i, 4]
    jmz, wmz = nb[i, 5], nbw[i, 5]
    mx, my, mz = m[i, 0], m[i, 1], m[i, 2]
    bx = c[0] * ((m[jpx, 0] - mx) * wpx + (m[jmx, 0] - mx) * wmx) \
        + c[1] * ((m[jpy, 0] - mx) * wpy + (m[jmy, 0] - mx) * wmy) \
        + c[2] * ((m[jpz, 0] - mx) * wpz + (m[jmz, 0] - mx) * wmz)
    by = c[0] * ((m[jpx, 1] - my) * wpx + (m[jmx, 1] - my) * wmx) \
        + c[1] * ((m[jpy, 1] - my) * wpy + (m[jmy, 1] - my) * wmy) \
        + c[2] * ((m[jpz, 1] - my) * wpz + (m[jmz, 1] - my) * wmz)
    bz = c[0] * ((m[jpx, 2] - mz) * wpx + (m[jmx, 2] - mz) * wmx) \
        + c[1] * ((m[jpy, 2] - mz) * wpy + (m[jmy, 2] - mz) * wmy) \
        + c[2] * ((m[jpz, 2] - mz) * wpz + (m[jmz, 2] - mz) * wmz)
    bx += c[3] * (m[jpx, 2] * wpx - m[jmx, 2] * wmx)
    by += c[4] * (m[jpy, 2] * wpy - m[jmy, 2] * wmy)
    bz += -c[3] * (m[jpx, 0] * wpx - m[jmx, 0] * wmx) \
        - c[4] * (m[jpy, 1] * wpy - m[jmy, 1] * wmy)
    bz += c[5] * kfac[i] * mz
    bx += c[6]
    by += c[7]
    bz += c[8]
    w = pw[i]
    if w != 0.0 and c[9] != 0.0:
        j = partner[i]
        bx += c[9] * m[j, 0]
        by += c[9] * m[j, 1]
        bz += c[9] * m[j, 2]
    return bx, by, bz


@njit(cache=True, inline="always")
def _rhs_cell(i, m, bx, by, bz, sot, alpha, gp, pinned):
    """LLG right-hand side of cell i given its field."""
    if pinned[i]:
        return 0.0, 0.0, 0.0
    mx, my, mz = m[i, 0], m[i, 1], m[i, 2]
    px = my * bz - mz * by
    py = mz * bx - mx * bz
    pz = mx * by - my * bx
    qx = my * pz - mz * py
    qy = mz * px - mx * pz
    qz = mx * py - my * px
    sx, sy, sz = sot[i, 0], sot[i, 1], sot[i, 2]
    ms = mx * sx + my * sy + mz * sz
    return (-gp * (px + alpha * qx + (sx - mx * ms)),
            -gp * (py + alpha * qy + (sy - my * ms)),
            -gp * (pz + alpha * qz + (sz - mz * ms)))


@njit(cache=True)
def local_field(m, nb, nbw, kfac, partner, pw, c, b):
    """Accumulate all local field terms into b (n, 3)."""
    n = m.shape[0]
    for i in range(n):
        jpx, wpx = nb[i, 0], nbw[i, 0]
        jmx, wmx = nb[i, 1], nbw[i, 1]
        jpy, wpy = nb[i, 2], nbw[i, 2]
        jmy, wmy = nb[i, 3], nbw[i, 3]
        jpz, wpz = nb[i, 4], nbw[i, 4]
        jmz, wmz = nb[i, 5], nbw[i, 5]
        mx, my, mz = m[i, 0], m[i, 1], m[i, 2]

        # exchange: 2A/(Ms d^2) sum (m_j - m_i)
        bx = c[0] * ((m[jpx, 0] - mx) * wpx + (m[jmx, 0] - mx) * wmx) \
            + c[1] * ((m[jpy, 0] - mx) * wpy + (m[jmy, 0] - mx) * wmy) \
            + c[2] * ((m[jpz, 0] - mx) * wpz + (m[jmz, 0] - mx) * wmz)
        by = c[0] * ((m[jpx, 1] - my) * wpx + (m[jmx, 1] - my) * wmx) \
            + c[1] * ((m[jpy, 1] - my) * wpy + (m[jmy, 1] - my) * wmy) \
            + c[2] * ((m[jpz, 1] - my) * wpz + (m[jmz, 1] - my) * wmz)
        bz = c[0] * ((m[jpx, 2] - mz) * wpx + (m[jmx, 2] - mz) * wmx) \
            + c[1] * ((m[jpy, 2] - mz) * wpy + (m[jmy, 2] - mz) * wmy) \
            + c[2] * ((m[jpz, 2] - mz) * wpz + (m[jmz, 2] - mz) * wmz)

        # interfacial DMI on in-plane links
        bx += c[3] * (m[jpx, 2] * wpx - m[jmx, 2] * wmx)
        by += c[4] * (m[jpy, 2] * wpy - m[jmy, 2] * wmy)
        bz += -c[3] * (m[jpx, 0] * wpx - m[jmx, 0] * wmx) \
            - c[4] * (m[jpy, 1] * wpy - m[jmy, 1] * wmy)

        # uniaxial anisotropy with grain factor
        bz += c[5] * kfac[i] * mz

        # applied field
        bx += c[6]
        by += c[7]
        bz += c[8]

        # RKKY partner coupling
        w = pw[i]
        if w != 0.0 and c[9] != 0.0:
            j = partner[i]
            bx += c[9] * m[j, 0]
            by += c[9] * m[j, 1]
            bz += c[9] * m[j, 2]

        b[i, 0] = bx
        b[i, 1] = by
        b[i, 2] = bz
    return b


@njit(cache=True)
def local_energies(m, nb, nbw, kfac, partner, pw, layer, c):
    """(E_exch, E_dmi, E_anis, E_zeeman, E_rkky) of the packed terms [J]."""
    n = m.shape[0]
    e_ex = 0.0
    e_dmi = 0.0
    e_an = 0.0
    e_ze = 0.0
    e_rk = 0.0
    for i in range(n):
        mx, my, mz = m[i, 0], m[i, 1], m[i, 2]
        for a in range(3):
            j = nb[i, 2 * a]
            w = nbw[i, 2 * a]
            if w != 0.0:
                dx = m[j, 0] - mx
                dy = m[j, 1] - my
                dz = m[j, 2] - mz
                e_ex += c[10 + a] * (dx * dx + dy * dy + dz * dz)
        jpx, wpx = nb[i, 0], nbw[i, 0]
        if wpx != 0.0:
            e_dmi += c[13] * (mz * m[jpx, 0] - m[jpx, 2] * mx)
        jpy, wpy = nb[i, 2], nbw[i, 2]
        if wpy != 0.0:
            e_dmi += c[14] * (mz * m[jpy, 1] - m[jpy, 2] * my)
        e_an += c[15] * kfac[i] * (1.0 - mz * mz)
        e_ze -= c[16] * (mx * c[6] + my * c[7] + mz * c[8])
        if pw[i] != 0.0 and layer[i] == 1:
            j = partner[i]
            e_rk -= c[17] * (mx * m[j, 0] + my * m[j, 1] + mz * m[j, 2])
    return e_ex, e_dmi, e_an, e_ze, e_rk


@njit(cache=True)
def _rhs_inline(m, b, sot, alpha, gp, pinned, dm):
    n = m.shape[0]
    for i in range(n):
        if pinned[i]:
            dm[i, 0] = 0.0
            dm[i, 1] = 0.0
            dm[i, 2] = 0.0
            continue
        mx, my, mz = m[i, 0], m[i, 1], m[i, 2]
        bx, by, bz = b[i, 0], b[i, 1], b[i, 2]
        px = my * bz - mz * by
        py = mz * bx - mx * bz
        pz = mx * by - my * bx
        qx = my * pz - mz * py
        qy = mz * px - mx * pz
        qz = mx * py - my * px
        sx, sy, sz = sot[i, 0], sot[i, 1], sot[i, 2]
        ms = mx * sx + my * sy + mz * sz
        dm[i, 0] = -gp * (px + alpha * qx + (sx - mx * ms))
        dm[i, 1] = -gp * (py + alpha * qy + (sy - my * ms))
        dm[i, 2] = -gp * (pz + alpha * qz + (sz - mz * ms))
    return dm


@njit(cache=True)
def llg_rhs(m, b, sot, alpha, gamma_prime, pinned, dm):
    """dm/dt = -g'[m x B + a m x (m x B)] - g' m x (sot x m).

    sot is the damping-like SOT field vector B_DL * sigma per cell;
    m x (sot x m) = sot - m (m.sot) for unit m. Pinned cells hold still.
    """
    return _rhs_inline(m, b, sot, alpha, gamma_prime, pinned, dm)


@njit(cache=True, parallel=True)
def rhs_eval(m, noise, has_noise, sot, nb, nbw, kfac, partner, pw, c,
             alpha, gp, pinned, b, dm):
    """Fused field + LLG right-hand side (one call per RK stage).

    Purely per-cell work in the parallel loop; results are independent of
    the thread count.
    """
    n = m.shape[0]
    for i in prange(n):
        bx, by, bz = _field_cell(i, m, nb, nbw, kfac, partner, pw, c)
        if has_noise:
            bx += noise[i, 0]
            by += noise[i, 1]
            bz += noise[i, 2]
        b[i, 0] = bx
        b[i, 1] = by
        b[i, 2] = bz
        dx, dy, dz = _rhs_cell(i, m, bx, by, bz, sot, alpha, gp, pinned)
        dm[i, 0] = dx
        dm[i, 1] = dy
        dm[i, 2] = dz
    return dm


@njit(cache=True, parallel=True)
def heun_step_fused(m, noise, has_noise, noise_scale, sot, nb, nbw, kfac,
                    partner, pw, c, alpha, gp, pinned, dt, k1, mtmp, out):
    """One stochastic Heun step, same noise in predictor and corrector.

    Each stage is a single per-cell parallel loop (field, right-hand
    side, projected step); bit-identical for any thread count.
    """
    n = m.shape[0]
    for i in prange(n):
        bx, by, bz = _field_cell(i, m, nb, nbw, kfac, partner, pw, c)
        if has_noise:
            bx += noise_scale * noise[i, 0]
            by += noise_scale * noise[i, 1]
            bz += noise_scale * noise[i, 2]
        dx, dy, dz = _rhs_cell(i, m, bx, by, bz, sot, alpha, gp, pinned)
        k1[i, 0] = dx
        k1[i, 1] = dy
        k1[i, 2] = dz
        x = m[i, 0] + dt * dx
        y = m[i, 1] + dt * dy
        z = m[i, 2] + dt * dz
        inv = 1.0 / np.sqrt(x * x + y * y + z * z)
        mtmp[i, 0] = x * inv
        mtmp[i, 1] = y * inv
        mtmp[i, 2] = z * inv
    h = 0.5 * dt
    for i in prange(n):
        bx, by, bz = _field_cell(i, mtmp, nb, nbw, kfac, partner, pw, c)
        if has_noise:
            bx += noise_scale * noise[i, 0]
            by += noise_scale * noise[i, 1]
            bz += noise_scale * noise[i, 2]
        dx, dy, dz = _rhs_cell(i, mtmp, bx, by, bz, sot, alpha, gp, pinned)
        x = m[i, 0] + h * (k1[i, 0] + dx)
        y = m[i, 1] + h * (k1[i, 1] + dy)
        z = m[i, 2] + h * (k1[i, 2] + dz)
        inv = 1.0 / np.sqrt(x * x + y * y + z * z)
        out[i, 0] = x * inv
        out[i, 1] = y * inv
        out[i, 2] = z * inv
    return out


@njit(cache=True)
def damping_rhs(m, b, gamma_prime, pinned, dm):
    """Precession-free descent dm/dt = -g' m x (m x B), for relaxation."""
    n = m.shape[0]
    for i in range(n):
        if pinned[i]:
            dm[i, 0] = 0.0
            dm[i, 1] = 0.0
            dm[i, 2] = 0.0
            continue
        mx, my, mz = m[i, 0], m[i, 1], m[i, 2]
        bx, by, bz = b[i, 0], b[i, 1], b[i, 2]
        px = my * bz - mz * by
        py = mz * bx - mx * bz
        pz = mx * by - my * bx
        dm[i, 0] = -gamma_prime * (my * pz - mz * py)
        dm[i, 1] = -gamma_prime * (mz * px - mx * pz)
        dm[i, 2] = -gamma_prime * (mx * py - my * px)
    return dm


@njit(cache=True)
def max_torque(m, b, pinned):
    """max |m_i x B_i| over the unpinned cells [T]."""
    n = m.shape[0]
    worst = 0.0
    for i in range(n):
        if pinned[i]:
            continue
        mx, my, mz = m[i, 0], m[i, 1], m[i, 2]
        bx, by, bz = b[i, 0], b[i, 1], b[i, 2]
        px = my * bz - mz * by
        py = mz * bx - mx * bz
        pz = mx * by - my * bx
        t = px * px + py * py + pz * pz
        if t > worst:
            worst = t
    return np.sqrt(worst)


@njit(cache=True)
def step_normalize(m, k, dt, out):
    """out = normalize(m + dt*k); returns the max rotation estimate."""
    n = m.shape[0]
    worst = 0.0
    for i in range(n):
        x = m[i, 0] + dt * k[i, 0]
        y = m[i, 1] + dt * k[i, 1]
        z = m[i, 2] + dt * k[i, 2]
        step2 = dt * dt * (k[i, 0] ** 2 + k[i, 1] ** 2 + k[i, 2] ** 2)
        if step2 > worst:
            worst = step2
        inv = 1.0 / np.sqrt(x * x + y * y + z * z)
        out[i, 0] = x * inv
        out[i, 1] = y * inv
        out[i, 2] = z * inv
    return np.sqrt(worst)


@njit(cache=True)
def step2_normalize(m, k1, k2, dt, out):
    """out = normalize(m + dt/2 (k1 + k2)) (Heun corrector)."""
    n = m.shape[0]
    h = 0.5 * dt
    for i in range(n):
        x = m[i, 0] + h * (k1[i, 0] + k2[i, 0])
        y = m[i, 1] + h * (k1[i, 1] + k2[i, 1])
        z = m[i, 2] + h * (k1[i, 2] + k2[i, 2])
        inv = 1.0 / np.sqrt(x * x + y * y + z * z)
        out[i, 0] = x * inv
        out[i, 1] = y * inv
        out[i, 2] = z * inv
    return out


@njit(cache=True)
def rk_combine(m, ks, coefs, dt, out, normalize):
    """out = m + dt * sum_c coefs[c] * ks[c], optionally renormalized.

    Returns the max per-cell step length (rotation estimate, radians).
    """
    n = m.shape[0]
    nc = coefs.shape[0]
    worst = 0.0
    for i in range(n):
        sx = sy = sz = 0.0
        for cix in range(nc):
            a = coefs[cix]
            if a == 0.0:
                continue
            sx += a * ks[cix, i, 0]
            sy += a * ks[cix, i, 1]
            sz += a * ks[cix, i, 2]
        x = m[i, 0] + dt * sx
        y = m[i, 1] + dt * sy
        z = m[i, 2] + dt * sz
        step2 = dt * dt * (sx * sx + sy * sy + sz * sz)
        if step2 > worst:
            worst = step2
        if normalize:
            inv = 1.0 / np.sqrt(x * x + y * y + z * z)
            x *= inv
            y *= inv
            z *= inv
        out[i, 0] = x
        out[i, 1] = y
        out[i, 2] = z
    return np.sqrt(worst)


@njit(cache=True)
def max_diff(a, b):
    """max_i |a_i - b_i| over (n, 3) arrays."""
    n = a.shape[0]
    worst = 0.0
    for i in range(n):
        dx = a[i, 0] - b[i, 0]
        dy = a[i, 1] - b[i, 1]
        dz = a[i, 2] - b[i, 2]
        t = dx * dx + dy * dy + dz * dz
        if t > worst:
            worst = t
    return np.sqrt(worst)
