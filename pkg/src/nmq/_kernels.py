"""Fixed-step loops shared by the simulation modules.

Everything here is written in the numba-compatible subset of numpy. The
``njit`` wrapper from :mod:`nmq._accel` compiles it, or leaves it as plain
Python when acceleration is disabled.
"""
import numpy as np

from ._accel import njit


# -- memory kernel ------------------------------------------------------------

@njit
def riccati_f(F, kappa, Q, S):
    return kappa * F * F + Q * F + S


@njit
def riccati_rk4_batch(F0, kappa, Q, S, dt, n_steps, stride, blowup):
    """RK4 for a batch of independent Riccati equations F' = kF^2 + QF + S.

    Elements whose modulus exceeds ``blowup`` are frozen and their step index
    recorded in ``hit`` (-1 when the element stayed finite).
    """
    B = F0.shape[0]
    n_out = n_steps // stride + 1
    out = np.empty((n_out, B), dtype=np.complex128)
    hit = -np.ones(B, dtype=np.int64)
    F = F0.copy()
    out[0] = F
    h = 0.5 * dt
    j = 1
    for step in range(1, n_steps + 1):
        k1 = kappa * F * F + Q * F + S
        y = F + h * k1
        k2 = kappa * y * y + Q * y + S
        y = F + h * k2
        k3 = kappa * y * y + Q * y + S
        y = F + dt * k3
        k4 = kappa * y * y + Q * y + S
        Fn = F + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        for b in range(B):
            if hit[b] < 0:
                v = Fn[b]
                if not (abs(v) <= blowup):
                    hit[b] = step
                else:
                    F[b] = v
        if step % stride == 0:
            out[j] = F
            j += 1
    return out, hit


# -- single-cavity mean values --------------------------------------------------
#
# Model ids: 0 complex form, 1 real form, 2 driven real form. Every layout ends
# with the ground population as an extra row so normalization can be tracked.

MODEL_COMPLEX = 0
MODEL_REAL = 1
MODEL_DRIVEN = 2


@njit
def ltv_dim(model, L):
    if model == 2:
        return 5 * L + 4
    return 3 * L + 2


@njit
def fill_complex(t, F, g, Delta, kap, kcav, A):
    L = g.shape[0]
    A[:, :] = 0.0
    ph = 3 * L
    gr = 3 * L + 1
    for n in range(L):
        gt = g[n] * np.exp(1j * Delta[n] * t)
        K = kap[n] * F[n]
        Kl = 0.0j
        if n > 0:
            Kl = kap[n - 1] * F[n - 1]
        p = 3 * n
        c = p + 1
        cb = p + 2
        A[p, p] = -(K + np.conj(K))
        A[p, c] = -1j * gt
        A[p, cb] = 1j * np.conj(gt)
        if n + 1 < L:
            gt1 = g[n + 1] * np.exp(1j * Delta[n + 1] * t)
            K1 = kap[n + 1] * F[n + 1]
            A[p, p + 3] = K1 + np.conj(K1)
            A[p, p + 4] = 1j * gt1
            A[p, p + 5] = -1j * np.conj(gt1)
        A[c, p] = -1j * np.conj(gt)
        A[c, c] = -(np.conj(K) + Kl + 0.5 * kcav)
        A[c, ph] = 1j * np.conj(gt)
        A[cb, p] = 1j * gt
        A[cb, cb] = -(K + np.conj(Kl) + 0.5 * kcav)
        A[cb, ph] = -1j * gt
        A[ph, c] += 1j * gt
        A[ph, cb] += -1j * np.conj(gt)
    A[ph, ph] = -kcav
    gt0 = g[0] * np.exp(1j * Delta[0] * t)
    K0 = kap[0] * F[0]
    A[gr, 0] = K0 + np.conj(K0)
    A[gr, 1] = 1j * gt0
    A[gr, 2] = -1j * np.conj(gt0)


@njit
def _fill_real_levels(t, F, g, Delta, kap, kcav, A, stride):
    """Population/coherence rows shared by the real and driven layouts.

    Level n occupies rows base..base+2 with base = stride*n; the photon row
    follows the last level block.
    """
    L = g.shape[0]
    ph = stride * L
    for n in range(L):
        gs = g[n] * np.sin(Delta[n] * t)
        gc = g[n] * np.cos(Delta[n] * t)
        R = (kap[n] * F[n]).real
        I = (kap[n] * F[n]).imag
        Rl = 0.0
        Il = 0.0
        if n > 0:
            Rl = (kap[n - 1] * F[n - 1]).real
            Il = (kap[n - 1] * F[n - 1]).imag
        p = stride * n
        x = p + 1
        y = p + 2
        A[p, p] = -2.0 * R
        A[p, x] = 2.0 * gs
        A[p, y] = 2.0 * gc
        if n + 1 < L:
            gs1 = g[n + 1] * np.sin(Delta[n + 1] * t)
            gc1 = g[n + 1] * np.cos(Delta[n + 1] * t)
            R1 = (kap[n + 1] * F[n + 1]).real
            A[p, p + stride] = 2.0 * R1
            A[p, p + stride + 1] = -2.0 * gs1
            A[p, p + stride + 2] = -2.0 * gc1
        KR = R + Rl + 0.5 * kcav
        KI = -I + Il
        A[x, p] = -gs
        A[x, x] = -KR
        A[x, y] = KI
        A[x, ph] = gs
        A[y, p] = -gc
        A[y, x] = -KI
        A[y, y] = -KR
        A[y, ph] = gc
        A[ph, x] += -2.0 * gs
        A[ph, y] += -2.0 * gc
    A[ph, ph] = -kcav


@njit
def fill_real(t, F, g, Delta, kap, kcav, A):
    L = g.shape[0]
    A[:, :] = 0.0
    _fill_real_levels(t, F, g, Delta, kap, kcav, A, 3)
    gr = 3 * L + 1
    A[gr, 0] = 2.0 * (kap[0] * F[0]).real
    A[gr, 1] = -2.0 * g[0] * np.sin(Delta[0] * t)
    A[gr, 2] = -2.0 * g[0] * np.cos(Delta[0] * t)


@njit
def fill_driven(t, F, g, Delta, kap, kcav, E, A, b):
    L = g.shape[0]
    A[:, :] = 0.0
    b[:] = 0.0
    _fill_real_levels(t, F, g, Delta, kap, kcav, A, 5)
    ph = 5 * L
    Ra = ph + 1
    Ia = ph + 2
    gr = ph + 3
    for n in range(L):
        gs = g[n] * np.sin(Delta[n] * t)
        gc = g[n] * np.cos(Delta[n] * t)
        K = kap[n] * F[n]
        Kl = 0.0j
        if n > 0:
            Kl = np.conj(kap[n - 1] * F[n - 1])
        Kt = K + Kl
        p = 5 * n
        sR = p + 3
        sI = p + 4
        A[p + 1, sR] = E
        A[p + 2, sI] = -E
        A[sR, sR] = -Kt.real
        A[sR, sI] = Kt.imag
        A[sI, sR] = -Kt.imag
        A[sI, sI] = -Kt.real
        A[sR, Ra] = 0.5 * gs
        A[sR, Ia] = -0.5 * gc
        A[sI, Ra] = -0.5 * gc
        A[sI, Ia] = -0.5 * gs
        A[Ra, sR] += -2.0 * gs
        A[Ra, sI] += 2.0 * gc
        A[Ia, sR] += 2.0 * gc
        A[Ia, sI] += 2.0 * gs
    A[ph, Ra] = E
    A[Ra, Ra] = -0.5 * kcav
    A[Ia, Ia] = -0.5 * kcav
    b[Ra] = 2.0 * E
    A[gr, 0] = 2.0 * (kap[0] * F[0]).real
    A[gr, 1] = -2.0 * g[0] * np.sin(Delta[0] * t)
    A[gr, 2] = -2.0 * g[0] * np.cos(Delta[0] * t)


@njit
def _ltv_eval(model, t, z, F, g, Delta, kap, kcav, E, A, Ar, b):
    if model == 0:
        fill_complex(t, F, g, Delta, kap, kcav, A)
        return A @ z
    if model == 1:
        fill_real(t, F, g, Delta, kap, kcav, Ar)
    else:
        fill_driven(t, F, g, Delta, kap, kcav, E, Ar, b)
    return (Ar @ np.ascontiguousarray(z.real) + b).astype(np.complex128)


@njit
def ltv_rk4(model, z0, F0, kk, Q, S, g, Delta, kap, kcav, E, frozen, dt, n_steps, stride, blowup):
    """Co-integrate the mean-value system and its memory kernels with RK4.

    Returns (z samples, F samples, first step at which |F| > blowup or -1).
    """
    L = g.shape[0]
    d = z0.shape[0]
    A = np.zeros((d, d), dtype=np.complex128)
    Ar = np.zeros((d, d))
    b = np.zeros(d)
    n_out = n_steps // stride + 1
    zs = np.empty((n_out, d), dtype=np.complex128)
    Fs = np.empty((n_out, L), dtype=np.complex128)
    z = z0.copy()
    F = F0.copy()
    zs[0] = z
    Fs[0] = F
    h = 0.5 * dt
    j = 1
    for step in range(n_steps):
        t = step * dt
        if frozen:
            kF1 = np.zeros(L, dtype=np.complex128)
        else:
            kF1 = kk * F * F + Q * F + S
        k1 = _ltv_eval(model, t, z, F, g, Delta, kap, kcav, E, A, Ar, b)
        F2 = F + h * kF1
        kF2 = kF1 if frozen else kk * F2 * F2 + Q * F2 + S
        k2 = _ltv_eval(model, t + h, z + h * k1, F2, g, Delta, kap, kcav, E, A, Ar, b)
        F3 = F + h * kF2
        kF3 = kF1 if frozen else kk * F3 * F3 + Q * F3 + S
        k3 = _ltv_eval(model, t + h, z + h * k2, F3, g, Delta, kap, kcav, E, A, Ar, b)
        F4 = F + dt * kF3
        kF4 = kF1 if frozen else kk * F4 * F4 + Q * F4 + S
        k4 = _ltv_eval(model, t + dt, z + dt * k3, F4, g, Delta, kap, kcav, E, A, Ar, b)
        z = z + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        F = F + (dt / 6.0) * (kF1 + 2.0 * kF2 + 2.0 * kF3 + kF4)
        if (step + 1) % stride == 0:
            zs[j] = z
            Fs[j] = F
            j += 1
        if np.max(np.abs(F)) > blowup or not np.all(np.isfinite(z)):
            return zs[:j], Fs[:j], step + 1
    return zs, Fs, -1


# -- homodyne feedback -----------------------------------------------------------
#
# Cavity-quadrature model, real layout y = [x, p, sR_1, sI_1, ..., aR, aI];
# moments m = [V_x, V_xp, V_p]. Parameters packed in
# par = [kappa, Delta, E, g_f, beta_x, beta_p, kappa_c].

@njit
def variance_rhs(m, kappa, Delta, gf, bx, bp):
    Vx, Vxp, Vp = m[0], m[1], m[2]
    Vx1 = Vx - 0.5
    r2 = np.sqrt(2.0)
    ax = r2 * Vx1 + gf * bp
    ap = r2 * Vxp - gf * bx
    out = np.empty(3)
    out[0] = 2.0 * Delta * Vxp - kappa * Vx1 + 2.0 * r2 * gf * bp * Vx1 + gf * gf * bp * bp - ax * ax
    out[1] = (Delta * Vp - Delta * Vx - kappa * Vxp + r2 * gf * bp * Vxp - r2 * gf * bx * Vx
              + 0.5 * r2 * gf * bx - gf * gf * bx * bp - ap * ax)
    out[2] = (-2.0 * Delta * Vxp - kappa * Vp + 0.5 * kappa - 2.0 * r2 * gf * bx * Vxp
              + gf * gf * bx * bx - ap * ap)
    return out


@njit
def cavity_fb_terms(t, y, m, F, Fa, g, dlt, kap, par, drift, diff):
    """Drift and dW-coefficient of the quadrature-feedback mean equations."""
    kappa, Delta, E, gf, bx, bp, kc = par[0], par[1], par[2], par[3], par[4], par[5], par[6]
    L = g.shape[0]
    r2 = np.sqrt(2.0)
    x = y[0]
    p = y[1]
    a = y[2 * L + 2] + 1j * y[2 * L + 3]
    damp = 0.5 * kappa + kc * Fa
    da = -1j * Delta * a - damp * a + E - 1j * gf * (bx + 1j * bp) * x
    dx = Delta * p - 0.5 * kappa * x + r2 * gf * bp * x + r2 * E
    dp = -Delta * x - 0.5 * kappa * p - r2 * gf * bx * x
    if kc != 0.0:
        # non-Markovian cavity channel acts on x, p through a = (x + ip)/sqrt2
        cx = kc * Fa * (x + 1j * p)
        dx -= cx.real
        dp -= cx.imag
    for n in range(L):
        s = y[2 + 2 * n] + 1j * y[3 + 2 * n]
        em = np.exp(-1j * dlt[n] * t)
        ds = -1j * g[n] * np.conj(em) * a - F[n] * kap[n] * s
        drift[2 + 2 * n] = ds.real
        drift[3 + 2 * n] = ds.imag
        diff[2 + 2 * n] = 0.0
        diff[3 + 2 * n] = 0.0
        z = -1j * g[n] * em * s
        da += z
        dx += r2 * z.real
        dp += r2 * z.imag
    drift[0] = dx
    drift[1] = dp
    drift[2 * L + 2] = da.real
    drift[2 * L + 3] = da.imag
    cx = r2 * (m[0] - 0.5) + gf * bp
    cp = r2 * m[1] - gf * bx
    diff[0] = cx
    diff[1] = cp
    # dW coefficient of <a> = (coef_x + i coef_p)/sqrt2
    diff[2 * L + 2] = cx / r2
    diff[2 * L + 3] = cp / r2


@njit
def _kernel_step(F, kk, Q, S, dt):
    k1 = kk * F * F + Q * F + S
    y = F + 0.5 * dt * k1
    k2 = kk * y * y + Q * y + S
    y = F + 0.5 * dt * k2
    k3 = kk * y * y + Q * y + S
    y = F + dt * k3
    k4 = kk * y * y + Q * y + S
    return F + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@njit
def kernel_grid(F0, kk, Q, S, dt, n_steps):
    """Kernel values at every half step: row 2k is t = k dt, row 2k+1 is t = (k+1/2) dt."""
    out = np.empty((2 * n_steps + 1, F0.shape[0]), dtype=np.complex128)
    F = F0.copy()
    out[0] = F
    for k in range(n_steps):
        # midpoint sample from a half step of RK4 started at F
        out[2 * k + 1] = _kernel_step(F, kk, Q, S, 0.5 * dt)
        F = _kernel_step(F, kk, Q, S, dt)
        out[2 * k + 2] = F
    return out


@njit
def _moment_step(m, kappa, Delta, gf, bx, bp, dt):
    k1 = variance_rhs(m, kappa, Delta, gf, bx, bp)
    k2 = variance_rhs(m + 0.5 * dt * k1, kappa, Delta, gf, bx, bp)
    k3 = variance_rhs(m + 0.5 * dt * k2, kappa, Delta, gf, bx, bp)
    k4 = variance_rhs(m + dt * k3, kappa, Delta, gf, bx, bp)
    return m + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@njit
def moment_grid(m0, kappa, Delta, gf, bx, bp, dt, n_steps):
    """Moments on the same half-step grid as :func:`kernel_grid`."""
    out = np.empty((2 * n_steps + 1, 3))
    m = m0.copy()
    out[0] = m
    for k in range(n_steps):
        out[2 * k + 1] = _moment_step(m, kappa, Delta, gf, bx, bp, 0.5 * dt)
        m = _moment_step(m, kappa, Delta, gf, bx, bp, dt)
        out[2 * k + 2] = m
    return out


@njit
def cavity_fb_rk4(y0, Mg, Fg, Fag, g, dlt, kap, par, dt, n_steps, stride):
    """Deterministic (xi = 0) RK4 with precomputed moment/kernel half-step grids."""
    d = y0.shape[0]
    n_out = n_steps // stride + 1
    out = np.empty((n_out, d))
    y = y0.copy()
    out[0] = y
    k1 = np.empty(d)
    k2 = np.empty(d)
    k3 = np.empty(d)
    k4 = np.empty(d)
    dd = np.empty(d)
    h = 0.5 * dt
    j = 1
    for k in range(n_steps):
        t = k * dt
        cavity_fb_terms(t, y, Mg[2 * k], Fg[2 * k], Fag[2 * k], g, dlt, kap, par, k1, dd)
        cavity_fb_terms(t + h, y + h * k1, Mg[2 * k + 1], Fg[2 * k + 1], Fag[2 * k + 1], g, dlt, kap, par, k2, dd)
        cavity_fb_terms(t + h, y + h * k2, Mg[2 * k + 1], Fg[2 * k + 1], Fag[2 * k + 1], g, dlt, kap, par, k3, dd)
        cavity_fb_terms(t + dt, y + dt * k3, Mg[2 * k + 2], Fg[2 * k + 2], Fag[2 * k + 2], g, dlt, kap, par, k4, dd)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if (k + 1) % stride == 0:
            out[j] = y
            j += 1
    return out


@njit
def cavity_fb_em(y0, Mg, Fg, Fag, g, dlt, kap, par, dt, dW, stride):
    """Euler-Maruyama over a batch; dW has shape (n_traj, n_steps)."""
    n_traj, n_steps = dW.shape
    d = y0.shape[0]
    n_out = n_steps // stride + 1
    out = np.empty((n_traj, n_out, d))
    a = np.empty(d)
    b = np.empty(d)
    for i in range(n_traj):
        y = y0.copy()
        out[i, 0] = y
        j = 1
        for k in range(n_steps):
            cavity_fb_terms(k * dt, y, Mg[2 * k], Fg[2 * k], Fag[2 * k], g, dlt, kap, par, a, b)
            y = y + a * dt + b * dW[i, k]
            if (k + 1) % stride == 0:
                out[i, j] = y
                j += 1
    return out


# Atomic sigma_x feedback, complex layout y = [alpha, s, w];
# par = [g1, delta, kappa1, kappa, kappa_c, E, g_f, Delta].

@njit
def atomic_fb_terms(t, y, F1, Fa, par, drift, diff):
    g1, dl, k1, kappa, kc, E, gf, Delta = par[0], par[1], par[2], par[3], par[4], par[5], par[6], par[7]
    al = y[0]
    s = y[1]
    w = y[2]
    ep = np.exp(1j * dl * t)
    damp = 0.5 * kappa + kc * Fa
    drift[0] = -1j * g1 * np.conj(ep) * s - damp * al - 1j * Delta * al + E
    drift[1] = (1j * g1 * ep * al * w - F1 * k1 * s + 1j * gf * (al + np.conj(al)) * w
                - gf * gf * (s - np.conj(s)))
    dw = (-2j * g1 * ep * np.conj(s) * al + 2j * g1 * np.conj(ep) * s * np.conj(al)
          - (F1 + np.conj(F1)) * k1 * (w + 1.0) - 2j * gf * (np.conj(s) - s) * (al + np.conj(al))
          - 2.0 * gf * gf * w)
    drift[2] = dw.real
    diff[0] = 0.0
    diff[1] = 1j * gf * w
    diff[2] = (-2j * gf * (np.conj(s) - s)).real


@njit
def atomic_fb_rk4(y0, Fg, Fag, par, dt, n_steps, stride):
    n_out = n_steps // stride + 1
    out = np.empty((n_out, 3), dtype=np.complex128)
    y = y0.copy()
    out[0] = y
    k1 = np.empty(3, dtype=np.complex128)
    k2 = np.empty(3, dtype=np.complex128)
    k3 = np.empty(3, dtype=np.complex128)
    k4 = np.empty(3, dtype=np.complex128)
    dd = np.empty(3, dtype=np.complex128)
    h = 0.5 * dt
    j = 1
    for k in range(n_steps):
        t = k * dt
        atomic_fb_terms(t, y, Fg[2 * k], Fag[2 * k], par, k1, dd)
        atomic_fb_terms(t + h, y + h * k1, Fg[2 * k + 1], Fag[2 * k + 1], par, k2, dd)
        atomic_fb_terms(t + h, y + h * k2, Fg[2 * k + 1], Fag[2 * k + 1], par, k3, dd)
        atomic_fb_terms(t + dt, y + dt * k3, Fg[2 * k + 2], Fag[2 * k + 2], par, k4, dd)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if (k + 1) % stride == 0:
            out[j] = y
            j += 1
    return out


@njit
def atomic_fb_em(y0, Fg, Fag, par, dt, dW, stride):
    n_traj, n_steps = dW.shape
    n_out = n_steps // stride + 1
    out = np.empty((n_traj, n_out, 3), dtype=np.complex128)
    a = np.empty(3, dtype=np.complex128)
    b = np.empty(3, dtype=np.complex128)
    for i in range(n_traj):
        y = y0.copy()
        out[i, 0] = y
        j = 1
        for k in range(n_steps):
            atomic_fb_terms(k * dt, y, Fg[2 * k], Fag[2 * k], par, a, b)
            y = y + a * dt + b * dW[i, k]
            if (k + 1) % stride == 0:
                out[i, j] = y
                j += 1
    return out


# -- coupled-cavity lattice --------------------------------------------------------
#
# Real layout X = [sR_1, sI_1, ..., sR_M, sI_M, aR_1, aI_1, ..., aR_M, aI_M];
# par = [J, kappa, Delta, g_f, beta_x, beta_p].

@njit
def fill_lattice(t, F, g, dlt, kap, par, A):
    M = g.shape[0]
    J, kappa, Delta = par[0], par[1], par[2]
    c = np.sqrt(2.0) * par[3] * par[5]
    b = np.sqrt(2.0) * par[3] * par[4]
    A[:, :] = 0.0
    for m in range(M):
        s = 2 * m
        a = 2 * M + 2 * m
        K = kap[m] * F[m]
        A[s, s] = -K.real
        A[s, s + 1] = K.imag
        A[s + 1, s] = -K.imag
        A[s + 1, s + 1] = -K.real
        sn = g[m] * np.sin(dlt[m] * t)
        cs = g[m] * np.cos(dlt[m] * t)
        A[s, a] = sn
        A[s, a + 1] = cs
        A[s + 1, a] = -cs
        A[s + 1, a + 1] = sn
        A[a, s] = -sn
        A[a, s + 1] = cs
        A[a + 1, s] = -cs
        A[a + 1, s + 1] = -sn
        A[a, a] = c - kappa
        A[a, a + 1] = Delta
        A[a + 1, a] = -Delta - b
        A[a + 1, a + 1] = -kappa
        for n in (m - 1, m + 1):
            if 0 <= n < M:
                an = 2 * M + 2 * n
                A[a, an + 1] = J
                A[a + 1, an] = -J


@njit
def lattice_rk4(X0, F0, kk, Q, S, g, dlt, kap, par, dt, n_steps, stride, blowup):
    """Co-integrate the lattice mean values and the per-site kernels."""
    M = g.shape[0]
    d = X0.shape[0]
    A = np.zeros((d, d))
    n_out = n_steps // stride + 1
    Xs = np.empty((n_out, d))
    Fs = np.empty((n_out, M), dtype=np.complex128)
    X = X0.copy()
    F = F0.copy()
    Xs[0] = X
    Fs[0] = F
    h = 0.5 * dt
    j = 1
    for step in range(n_steps):
        t = step * dt
        kF1 = riccati_f(F, kk, Q, S)
        fill_lattice(t, F, g, dlt, kap, par, A)
        k1 = A @ X
        F2 = F + h * kF1
        kF2 = riccati_f(F2, kk, Q, S)
        fill_lattice(t + h, F2, g, dlt, kap, par, A)
        k2 = A @ (X + h * k1)
        F3 = F + h * kF2
        kF3 = riccati_f(F3, kk, Q, S)
        fill_lattice(t + h, F3, g, dlt, kap, par, A)
        k3 = A @ (X + h * k2)
        F4 = F + dt * kF3
        kF4 = riccati_f(F4, kk, Q, S)
        fill_lattice(t + dt, F4, g, dlt, kap, par, A)
        k4 = A @ (X + dt * k3)
        X = X + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        F = F + (dt / 6.0) * (kF1 + 2.0 * kF2 + 2.0 * kF3 + kF4)
        if (step + 1) % stride == 0:
            Xs[j] = X
            Fs[j] = F
            j += 1
        if np.max(np.abs(F)) > blowup or not np.all(np.isfinite(X)):
            return Xs[:j], Fs[:j], step + 1
    return Xs, Fs, -1
