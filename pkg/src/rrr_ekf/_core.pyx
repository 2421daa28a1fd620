# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for the built-in flight models.

Mirrors ``_pykernel.py``: RK4 propagation, central-difference Jacobians,
the augmented EKF forward pass and the RTS backward pass, all in C loops.
Status codes are translated into exceptions by ``rrr_ekf.kernels``.
"""
from libc.math cimport sin, cos, tan, fabs, isfinite, isnan, sqrt

cdef enum:
    MAXD = 32
    MAXM = 8

# constant vector indices (KERNEL_CONSTANT_ORDER in aircraft.py)
cdef enum:
    CBAR = 0
    BSPAN = 1
    SREF = 2
    MASS = 3
    IXX = 4
    IYY = 5
    IZZ = 6
    IZX = 7
    QBAR = 8
    VEL = 9
    GRAV = 10
    KA = 11
    KAXA = 12
    XAN = 13
    ZAX = 14
    KBZB = 15
    KBXB = 16
    ZAY = 17
    XAY = 18
    RHO = 19
    LROLL = 20

cdef enum:
    OK = 0
    ERR_NONFINITE = 1
    ERR_DEGENERATE = 2
    ERR_S_NOT_PD = 3
    ERR_P_NOT_PD = 4
    ERR_SINGULAR_INERTIA = 5
    ERR_UNKNOWN_CASE = 6

cdef struct Dims:
    int n
    int p
    int m
    int nu


cdef int case_dims(int case, Dims* d) noexcept nogil:
    if case == 1:
        d.n = 3; d.p = 13; d.m = 5; d.nu = 6
    elif case == 2:
        d.n = 3; d.p = 10; d.m = 4; d.nu = 7
    elif case == 3:
        d.n = 4; d.p = 20; d.m = 5; d.nu = 5
    else:
        return ERR_UNKNOWN_CASE
    return OK


def dims(int case):
    cdef Dims d
    if case_dims(case, &d) != OK:
        raise ValueError(f"unknown case {case}")
    return d.n, d.p, d.m, d.nu


# ------------------------------------------------------------------ models

cdef int dyn1(const double* c, const double* x, const double* th, const double* u,
              double* out) noexcept nogil:
    cdef double alpha = x[0], q = x[1], pitch = x[2]
    cdef double de = u[0], phim = u[1], betam = u[2], pm = u[3], rm = u[4], am = u[5]
    cdef double cn = th[0] * alpha + th[1] * de + th[8]
    cdef double ca = th[9] * alpha + th[10] * alpha * alpha + th[11] * de + th[12]
    cdef double cl = cn * cos(alpha) - ca * sin(alpha) + th[2]
    cdef double V = c[VEL]
    out[0] = (-c[QBAR] * c[SREF] / (c[MASS] * V) * cl
              + q
              + c[GRAV] / V * (cos(phim) * cos(am) * cos(pitch) + sin(am) * sin(pitch))
              - betam * (pm * cos(am) + rm * sin(am)))
    out[1] = (c[QBAR] * c[SREF] * c[CBAR] / c[IYY]
              * (th[3] * alpha + th[4] * c[CBAR] / (2.0 * V) * q + th[5] * de + th[6])
              + (c[IZZ] - c[IXX]) / c[IYY] * rm * pm)
    out[2] = q * cos(phim) - rm * sin(phim) + th[7]
    return OK


cdef int meas1(const double* c, const double* x, const double* xd, const double* th,
               const double* u, double* out) noexcept nogil:
    cdef double alpha = x[0], q = x[1], de = u[0]
    cdef double cn = th[0] * alpha + th[1] * de + th[8]
    cdef double ca = th[9] * alpha + th[10] * alpha * alpha + th[11] * de + th[12]
    cdef double k = c[QBAR] * c[SREF] / (c[MASS] * c[GRAV])
    out[0] = alpha - c[KAXA] * q / c[VEL]
    out[1] = q
    out[2] = x[2]
    out[3] = k * cn + c[XAN] / c[GRAV] * xd[1]
    out[4] = -k * ca + c[ZAX] / c[GRAV] * xd[1]
    return OK


cdef inline double qbar2(const double* c, double vm) noexcept nogil:
    if isnan(c[QBAR]):
        return 0.5 * c[RHO] * vm * vm
    return c[QBAR]


cdef int dyn2(const double* c, const double* x, const double* th, const double* u,
              double* out) noexcept nogil:
    cdef double alpha = x[0], q = x[1], pitch = x[2]
    cdef double de = u[0], phim = u[1], betam = u[2], vm = u[3], pm = u[4], rm = u[5], am = u[6]
    cdef double cb = cos(betam)
    if fabs(cb) < 1e-6:
        return ERR_DEGENERATE
    cdef double qbar = qbar2(c, vm)
    cdef double cl = th[0] * alpha + th[1] * de + th[2]
    cdef double alpha_dot = (-qbar * c[SREF] / (c[MASS] * vm * cb) * cl
                             + q
                             + c[GRAV] / (vm * cb) * (cos(phim) * cos(am) * cos(pitch) + sin(am) * sin(pitch))
                             - tan(betam) * (pm * cos(am) + rm * sin(am)))
    cdef double k = c[CBAR] / (2.0 * vm)
    out[0] = alpha_dot
    out[1] = (qbar * c[SREF] * c[CBAR] / c[IYY]
              * (th[3] * alpha + th[4] * k * q + th[5] * k * alpha_dot + th[6] * de + th[7])
              + (c[IZZ] - c[IXX]) / c[IYY] * rm * pm)
    out[2] = q * cos(phim) - rm * sin(phim) + th[8]
    return OK


cdef int meas2(const double* c, const double* x, const double* xd, const double* th,
               const double* u, double* out) noexcept nogil:
    cdef double alpha = x[0], q = x[1], de = u[0], vm = u[3]
    cdef double qbar = qbar2(c, vm)
    cdef double cn = th[0] * alpha + th[1] * de + th[9]
    out[0] = c[KA] * alpha - c[KAXA] * q / vm
    out[1] = q
    out[2] = x[2]
    out[3] = qbar * c[SREF] / (c[MASS] * c[GRAV]) * cn + c[XAN] / c[GRAV] * xd[1]
    return OK


cdef inline double side_force(double beta, double p, double r, double da, double dr,
                              const double* th, double k, double bias) noexcept nogil:
    return th[0] * beta + th[17] * k * p + th[18] * k * r + th[19] * da + th[1] * dr + bias


cdef int dyn3(const double* c, const double* x, const double* th, const double* u,
              double* out) noexcept nogil:
    cdef double beta = x[0], p = x[1], phi = x[2], r = x[3]
    cdef double da = u[0], dr = u[1], thm = u[2], qm = u[3], am = u[4]
    cdef double V = c[VEL]
    cdef double k = c[BSPAN] / (2.0 * V)
    cdef double kl = c[LROLL] / (2.0 * V)
    cdef double izx = c[IZX]
    out[0] = (c[QBAR] * c[SREF] / (c[MASS] * V) * side_force(beta, p, r, da, dr, th, k, th[2])
              + c[GRAV] / V * sin(phi) * cos(thm)
              + p * sin(am)
              - r * cos(am))
    cdef double l_rhs = (c[QBAR] * c[SREF] * c[BSPAN] / c[IXX]
                         * (th[3] * beta + th[4] * kl * p + th[5] * kl * r + th[6] * da + th[7] * dr + th[8])
                         + (c[IYY] - c[IZZ]) / c[IXX] * r * qm
                         + izx / c[IXX] * p * qm)
    cdef double n_rhs = (c[QBAR] * c[SREF] * c[BSPAN] / c[IZZ]
                         * (th[10] * beta + th[11] * k * p + th[12] * k * r + th[13] * da + th[14] * dr + th[15])
                         + (c[IXX] - c[IYY]) / c[IZZ] * p * qm
                         - izx / c[IZZ] * r * qm)
    cdef double a = izx / c[IXX]
    cdef double dd = izx / c[IZZ]
    cdef double det = 1.0 - a * dd
    if not fabs(det) > 1e-12:
        return ERR_SINGULAR_INERTIA
    out[1] = (l_rhs + a * n_rhs) / det
    out[3] = (n_rhs + dd * l_rhs) / det
    cdef double tt = tan(thm)
    out[2] = p + qm * tt * sin(phi) + r * tt * cos(phi) + th[9]
    return OK


cdef int meas3(const double* c, const double* x, const double* xd, const double* th,
               const double* u, double* out) noexcept nogil:
    cdef double beta = x[0], p = x[1], r = x[3]
    cdef double V = c[VEL]
    cdef double k = c[BSPAN] / (2.0 * V)
    cdef double cy = side_force(beta, p, r, u[0], u[1], th, k, th[16])
    out[0] = beta - c[KBZB] * p / V + c[KBXB] * r / V
    out[1] = p
    out[2] = x[2]
    out[3] = r
    out[4] = (c[QBAR] * c[SREF] / (c[MASS] * c[GRAV]) * cy
              - c[ZAY] / c[GRAV] * xd[1] + c[XAY] / c[GRAV] * xd[3])
    return OK


cdef inline int dyn(int case, const double* c, const double* x, const double* th,
                    const double* u, double* out) noexcept nogil:
    if case == 1:
        return dyn1(c, x, th, u, out)
    elif case == 2:
        return dyn2(c, x, th, u, out)
    return dyn3(c, x, th, u, out)


cdef inline int meas(int case, const double* c, const double* x, const double* xd,
                     const double* th, const double* u, double* out) noexcept nogil:
    if case == 1:
        return meas1(c, x, xd, th, u, out)
    elif case == 2:
        return meas2(c, x, xd, th, u, out)
    return meas3(c, x, xd, th, u, out)


cdef int observe_pt(int case, Dims* D, const double* c, const double* xa, const double* u,
                    double* y) noexcept nogil:
    cdef double xd[MAXD]
    cdef int st = dyn(case, c, xa, xa + D.n, u, xd)
    if st != OK:
        return st
    st = meas(case, c, xa, xd, xa + D.n, u, y)
    if st != OK:
        return st
    cdef int i
    for i in range(D.m):
        if not isfinite(y[i]):
            return ERR_NONFINITE
    return OK


cdef inline double jstep(double v) noexcept nogil:
    cdef double h = 1e-6 * fabs(v)
    return h if h > 1e-6 else 1e-6


cdef int jac_f(int case, Dims* D, const double* c, const double* xa, const double* u,
               double* F) noexcept nogil:
    """F is d x d row-major; parameter rows are zero."""
    cdef int d = D.n + D.p, i, j, st
    cdef double xp[MAXD]
    cdef double xm[MAXD]
    cdef double fp[MAXD]
    cdef double fm[MAXD]
    cdef double h
    for i in range(d * d):
        F[i] = 0.0
    for i in range(d):
        xp[i] = xa[i]
        xm[i] = xa[i]
    for j in range(d):
        h = jstep(xa[j])
        xp[j] = xa[j] + h
        xm[j] = xa[j] - h
        st = dyn(case, c, xp, xp + D.n, u, fp)
        if st != OK:
            return st
        st = dyn(case, c, xm, xm + D.n, u, fm)
        if st != OK:
            return st
        for i in range(D.n):
            if not (isfinite(fp[i]) and isfinite(fm[i])):
                return ERR_NONFINITE
            F[i * d + j] = (fp[i] - fm[i]) / (2.0 * h)
        xp[j] = xa[j]
        xm[j] = xa[j]
    return OK


cdef int jac_h(int case, Dims* D, const double* c, const double* xa, const double* u,
               double* H) noexcept nogil:
    """H is m x d row-major, Jacobian of the composite h(x, f(x))."""
    cdef int d = D.n + D.p, i, j, st
    cdef double xp[MAXD]
    cdef double xm[MAXD]
    cdef double yp[MAXM]
    cdef double ym[MAXM]
    cdef double h
    for i in range(d):
        xp[i] = xa[i]
        xm[i] = xa[i]
    for j in range(d):
        h = jstep(xa[j])
        xp[j] = xa[j] + h
        xm[j] = xa[j] - h
        st = observe_pt(case, D, c, xp, u, yp)
        if st != OK:
            return st
        st = observe_pt(case, D, c, xm, u, ym)
        if st != OK:
            return st
        for i in range(D.m):
            H[i * d + j] = (yp[i] - ym[i]) / (2.0 * h)
        xp[j] = xa[j]
        xm[j] = xa[j]
    return OK


cdef int rk4(int case, Dims* D, const double* c, const double* xa, const double* u0,
             const double* um, const double* u1, double dt, double* out) noexcept nogil:
    cdef int n = D.n, i, st
    cdef const double* th = xa + n
    cdef double k1[MAXD]
    cdef double k2[MAXD]
    cdef double k3[MAXD]
    cdef double k4[MAXD]
    cdef double tmp[MAXD]
    st = dyn(case, c, xa, th, u0, k1)
    if st != OK:
        return st
    for i in range(n):
        tmp[i] = xa[i] + (0.5 * dt) * k1[i]
    st = dyn(case, c, tmp, th, um, k2)
    if st != OK:
        return st
    for i in range(n):
        tmp[i] = xa[i] + (0.5 * dt) * k2[i]
    st = dyn(case, c, tmp, th, um, k3)
    if st != OK:
        return st
    for i in range(n):
        tmp[i] = xa[i] + dt * k3[i]
    st = dyn(case, c, tmp, th, u1, k4)
    if st != OK:
        return st
    for i in range(n):
        if not (isfinite(k1[i]) and isfinite(k2[i]) and isfinite(k3[i]) and isfinite(k4[i])):
            return ERR_NONFINITE
        out[i] = xa[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    for i in range(n, n + D.p):
        out[i] = xa[i]
    return OK


cdef int transition(int case, Dims* D, const double* c, const double* xa, const double* u0,
                    const double* um, const double* u1, double dt, double* xn,
                    double* Phi, double* F, double* F2) noexcept nogil:
    cdef int d = D.n + D.p, i, j, l, st
    cdef double s
    st = rk4(case, D, c, xa, u0, um, u1, dt, xn)
    if st != OK:
        return st
    st = jac_f(case, D, c, xa, u0, F)
    if st != OK:
        return st
    # F has zero parameter rows, so F @ F only needs the state rows
    for i in range(d):
        for j in range(d):
            s = 0.0
            if i < D.n:
                for l in range(D.n):
                    s = s + F[i * d + l] * F[l * d + j]
            F2[i * d + j] = s
    for i in range(d):
        for j in range(d):
            Phi[i * d + j] = (1.0 if i == j else 0.0) + F[i * d + j] * dt + F2[i * d + j] * (0.5 * dt * dt)
    return OK


# ------------------------------------------------------------ linear algebra

cdef double JITTER[4]
JITTER[:] = [0.0, 1e-12, 1e-10, 1e-8]


cdef int cholesky(double* A, int n, double* scale) noexcept nogil:
    """In-place lower Cholesky of the diagonally scaled n x n row-major A.

    ``scale`` receives sqrt(diag(A)); the factor is that of
    ``D^-1 A D^-1`` (upper part zeroed).  When the scaled matrix is not
    numerically positive definite the factorization is retried with a
    small multiple of the identity added, mirroring ``_pykernel._chol``.
    """
    cdef int i, j, l, attempt
    cdef double s
    cdef int failed = 0
    for i in range(n):
        s = A[i * n + i]
        if not (s > 0.0) or not isfinite(s):
            return -1
        scale[i] = sqrt(s)
    for i in range(n):
        for j in range(n):
            A[i * n + j] = A[i * n + j] / (scale[i] * scale[j])
    for attempt in range(4):
        if attempt > 0:
            # the strict upper triangle still holds the scaled matrix
            for i in range(n):
                A[i * n + i] = 1.0 + JITTER[attempt]
                for j in range(i):
                    A[i * n + j] = A[j * n + i]
        failed = 0
        for j in range(n):
            s = A[j * n + j]
            for l in range(j):
                s = s - A[j * n + l] * A[j * n + l]
            if not (s > 0.0) or not isfinite(s):
                failed = 1
                break
            A[j * n + j] = sqrt(s)
            for i in range(j + 1, n):
                s = A[i * n + j]
                for l in range(j):
                    s = s - A[i * n + l] * A[j * n + l]
                A[i * n + j] = s / A[j * n + j]
        if not failed:
            break
    if failed:
        return -1
    for i in range(n):
        for j in range(i + 1, n):
            A[i * n + j] = 0.0
    return 0


cdef void chol_solve(const double* L, const double* scale, int n, double* B, int ncol) noexcept nogil:
    """Solve (D L L^T D) X = B in place; B is n x ncol row-major."""
    cdef int i, j, l
    cdef double s
    for j in range(ncol):
        for i in range(n):
            s = B[i * ncol + j] / scale[i]
            for l in range(i):
                s = s - L[i * n + l] * B[l * ncol + j]
            B[i * ncol + j] = s / L[i * n + i]
        for i in range(n - 1, -1, -1):
            s = B[i * ncol + j]
            for l in range(i + 1, n):
                s = s - L[l * n + i] * B[l * ncol + j]
            B[i * ncol + j] = s / L[i * n + i]
        for i in range(n):
            B[i * ncol + j] = B[i * ncol + j] / scale[i]


cdef void matmul(const double* A, const double* B, double* C, int r, int k, int c) noexcept nogil:
    cdef int i, j, l
    cdef double s
    for i in range(r):
        for j in range(c):
            s = 0.0
            for l in range(k):
                s = s + A[i * k + l] * B[l * c + j]
            C[i * c + j] = s


cdef void matmul_bt(const double* A, const double* B, double* C, int r, int k, int c) noexcept nogil:
    """C = A @ B.T with A r x k, B c x k."""
    cdef int i, j, l
    cdef double s
    for i in range(r):
        for j in range(c):
            s = 0.0
            for l in range(k):
                s = s + A[i * k + l] * B[j * k + l]
            C[i * c + j] = s


cdef void symmetrize(double* A, int n) noexcept nogil:
    cdef int i, j
    cdef double s
    for i in range(n):
        for j in range(i + 1, n):
            s = 0.5 * (A[i * n + j] + A[j * n + i])
            A[i * n + j] = s
            A[j * n + i] = s


# ------------------------------------------------------------------ drivers

def forward(int case, const double[::1] c, const double[:, ::1] u, const double[:, ::1] umid,
            const double[::1] dts, const double[::1] x0, const double[:, ::1] P0,
            const double[:, ::1] Qaug, const double[:, ::1] R, const double[:, ::1] Z,
            double[:, ::1] x_prior, double[:, :, ::1] P_prior,
            double[:, ::1] x_post, double[:, :, ::1] P_post, double[:, :, ::1] Phi_out,
            double[:, ::1] y_prior, double[:, :, ::1] H_prior, double[:, ::1] nu_out,
            double[:, :, ::1] S_out, double[:, :, ::1] K_out,
            double[:, ::1] y_post, double[:, :, ::1] H_post):
    """Augmented EKF forward pass; returns ``(status, step)``."""
    cdef Dims D
    if case_dims(case, &D) != OK:
        return ERR_UNKNOWN_CASE, 0
    cdef int d = D.n + D.p, m = D.m
    cdef int N = Z.shape[0]
    cdef int k = 0, i, j, l, st = OK
    cdef double xa[MAXD]
    cdef double P[MAXD * MAXD]
    cdef double T1[MAXD * MAXD]
    cdef double Phi[MAXD * MAXD]
    cdef double F[MAXD * MAXD]
    cdef double F2[MAXD * MAXD]
    cdef double H[MAXM * MAXD]
    cdef double HP[MAXM * MAXD]
    cdef double S[MAXM * MAXM]
    cdef double sc[MAXD]
    cdef double K[MAXD * MAXM]
    cdef double KR[MAXD * MAXM]
    cdef double IKH[MAXD * MAXD]
    cdef double y[MAXM]
    cdef double nu[MAXM]
    cdef double s
    cdef const double* cp = &c[0]
    with nogil:
        for i in range(d):
            xa[i] = x0[i]
        for i in range(d):
            for j in range(d):
                P[i * d + j] = P0[i, j]
        for k in range(N):
            if k > 0:
                st = transition(case, &D, cp, &x_post[k - 1, 0], &u[k - 1, 0], &umid[k - 1, 0],
                                &u[k, 0], dts[k - 1], xa, Phi, F, F2)
                if st != OK:
                    break
                for i in range(d):
                    for j in range(d):
                        Phi_out[k - 1, i, j] = Phi[i * d + j]
                matmul(Phi, &P_post[k - 1, 0, 0], T1, d, d, d)
                matmul_bt(T1, Phi, P, d, d, d)
                for i in range(d):
                    for j in range(d):
                        P[i * d + j] = P[i * d + j] + Qaug[i, j]
                symmetrize(P, d)
            for i in range(d):
                if not isfinite(xa[i]):
                    st = ERR_NONFINITE
            for i in range(d * d):
                if not isfinite(P[i]):
                    st = ERR_NONFINITE
            if st != OK:
                break
            for i in range(d):
                x_prior[k, i] = xa[i]
                for j in range(d):
                    P_prior[k, i, j] = P[i * d + j]
            st = observe_pt(case, &D, cp, xa, &u[k, 0], y)
            if st != OK:
                break
            st = jac_h(case, &D, cp, xa, &u[k, 0], H)
            if st != OK:
                break
            for i in range(m):
                nu[i] = Z[k, i] - y[i]
            matmul(H, P, HP, m, d, d)
            matmul_bt(HP, H, S, m, d, m)
            for i in range(m):
                for j in range(m):
                    S[i * m + j] = S[i * m + j] + R[i, j]
            symmetrize(S, m)
            for i in range(m):
                for j in range(m):
                    S_out[k, i, j] = S[i * m + j]
            if cholesky(S, m, sc) != 0:
                st = ERR_S_NOT_PD
                break
            # K^T = S^-1 H P  (HP is overwritten with K^T)
            chol_solve(S, sc, m, HP, d)
            for i in range(d):
                for j in range(m):
                    K[i * m + j] = HP[j * d + i]
            for i in range(d):
                for j in range(d):
                    s = 1.0 if i == j else 0.0
                    for l in range(m):
                        s = s - K[i * m + l] * H[l * d + j]
                    IKH[i * d + j] = s
            matmul(IKH, P, T1, d, d, d)
            matmul_bt(T1, IKH, F, d, d, d)
            for i in range(d):
                for j in range(m):
                    s = 0.0
                    for l in range(m):
                        s = s + K[i * m + l] * R[l, j]
                    KR[i * m + j] = s
            matmul_bt(KR, K, F2, d, m, d)
            for i in range(d * d):
                F[i] = F[i] + F2[i]
            symmetrize(F, d)
            for i in range(d):
                s = 0.0
                for l in range(m):
                    s = s + K[i * m + l] * nu[l]
                x_post[k, i] = xa[i] + s
                for j in range(d):
                    P_post[k, i, j] = F[i * d + j]
                for j in range(m):
                    K_out[k, i, j] = K[i * m + j]
            for i in range(m):
                y_prior[k, i] = y[i]
                nu_out[k, i] = nu[i]
                for j in range(d):
                    H_prior[k, i, j] = H[i * d + j]
            st = observe_pt(case, &D, cp, &x_post[k, 0], &u[k, 0], y)
            if st != OK:
                break
            st = jac_h(case, &D, cp, &x_post[k, 0], &u[k, 0], H)
            if st != OK:
                break
            for i in range(m):
                y_post[k, i] = y[i]
                for j in range(d):
                    H_post[k, i, j] = H[i * d + j]
    return st, k


def smooth(const double[:, ::1] x_prior, const double[:, :, ::1] P_prior,
           const double[:, ::1] x_post, const double[:, :, ::1] P_post,
           const double[:, :, ::1] Phi, double[:, ::1] xs, double[:, :, ::1] Ps,
           double[:, :, ::1] G_out, double[:, :, ::1] C_out):
    """RTS backward pass; returns ``(status, step)``."""
    cdef int N = x_post.shape[0], d = x_post.shape[1]
    cdef int k = 0, i, j, l, st = OK
    cdef double L[MAXD * MAXD]
    cdef double sc[MAXD]
    cdef double B[MAXD * MAXD]
    cdef double G[MAXD * MAXD]
    cdef double D1[MAXD * MAXD]
    cdef double T1[MAXD * MAXD]
    cdef double T2[MAXD * MAXD]
    cdef double dx[MAXD]
    cdef double s
    if d > MAXD:
        return ERR_UNKNOWN_CASE, 0
    with nogil:
        for i in range(d):
            xs[N - 1, i] = x_post[N - 1, i]
            for j in range(d):
                Ps[N - 1, i, j] = P_post[N - 1, i, j]
        k = N - 2
        while k >= 0:
            for i in range(d * d):
                L[i] = P_prior[k + 1, i // d, i % d]
            if cholesky(L, d, sc) != 0:
                st = ERR_P_NOT_PD
                break
            # B = Phi_k P_post_k ; solve P_prior B' = B ; G = B'^T
            matmul(&Phi[k, 0, 0], &P_post[k, 0, 0], B, d, d, d)
            chol_solve(L, sc, d, B, d)
            for i in range(d):
                for j in range(d):
                    G[i * d + j] = B[j * d + i]
            for i in range(d):
                dx[i] = xs[k + 1, i] - x_prior[k + 1, i]
            for i in range(d):
                s = 0.0
                for l in range(d):
                    s = s + G[i * d + l] * dx[l]
                xs[k, i] = x_post[k, i] + s
            for i in range(d * d):
                D1[i] = Ps[k + 1, i // d, i % d] - P_prior[k + 1, i // d, i % d]
            matmul(G, D1, T1, d, d, d)
            matmul_bt(T1, G, T2, d, d, d)
            for i in range(d * d):
                T2[i] = P_post[k, i // d, i % d] + T2[i]
            symmetrize(T2, d)
            for i in range(d):
                for j in range(d):
                    Ps[k, i, j] = T2[i * d + j]
                    G_out[k, i, j] = G[i * d + j]
            matmul_bt(&Ps[k + 1, 0, 0], G, T1, d, d, d)
            for i in range(d):
                for j in range(d):
                    C_out[k, i, j] = T1[i * d + j]
            k = k - 1
    return st, k


def observe_batch(int case, const double[::1] c, const double[:, ::1] u,
                  const double[:, ::1] X, double[:, ::1] Y, double[:, :, ::1] Hout):
    """Measurement prediction and Jacobian at each row of X; ``(status, step)``."""
    cdef Dims D
    if case_dims(case, &D) != OK:
        return ERR_UNKNOWN_CASE, 0
    cdef int d = D.n + D.p, m = D.m, N = X.shape[0], k = 0, i, j, st = OK
    cdef double H[MAXM * MAXD]
    cdef double y[MAXM]
    with nogil:
        for k in range(N):
            st = observe_pt(case, &D, &c[0], &X[k, 0], &u[k, 0], y)
            if st != OK:
                break
            st = jac_h(case, &D, &c[0], &X[k, 0], &u[k, 0], H)
            if st != OK:
                break
            for i in range(m):
                Y[k, i] = y[i]
                for j in range(d):
                    Hout[k, i, j] = H[i * d + j]
    return st, k


def propagate_batch(int case, const double[::1] c, const double[:, ::1] u,
                    const double[:, ::1] umid, const double[::1] dts,
                    const double[:, ::1] X, double[:, ::1] Xn, double[:, :, ::1] Phi_out):
    """One-step prediction ``f_d(X[k])`` and transition for k = 0..N-2."""
    cdef Dims D
    if case_dims(case, &D) != OK:
        return ERR_UNKNOWN_CASE, 0
    cdef int d = D.n + D.p, N = X.shape[0], k = 0, i, j, st = OK
    cdef double xn[MAXD]
    cdef double Phi[MAXD * MAXD]
    cdef double F[MAXD * MAXD]
    cdef double F2[MAXD * MAXD]
    with nogil:
        for k in range(N - 1):
            st = transition(case, &D, &c[0], &X[k, 0], &u[k, 0], &umid[k, 0], &u[k + 1, 0],
                            dts[k], xn, Phi, F, F2)
            if st != OK:
                break
            for i in range(d):
                Xn[k, i] = xn[i]
                for j in range(d):
                    Phi_out[k, i, j] = Phi[i * d + j]
    return st, k


def open_loop(int case, const double[::1] c, const double[:, ::1] u,
              const double[:, ::1] umid, const double[::1] dts, double[:, ::1] X):
    """Noise-free RK4 trajectory from ``X[0]``; returns ``(status, step)``."""
    cdef Dims D
    if case_dims(case, &D) != OK:
        return ERR_UNKNOWN_CASE, 0
    cdef int d = D.n + D.p, N = X.shape[0], k = 0, i, st = OK
    with nogil:
        for k in range(N - 1):
            st = rk4(case, &D, &c[0], &X[k, 0], &u[k, 0], &umid[k, 0], &u[k + 1, 0], dts[k], &X[k + 1, 0])
            if st != OK:
                break
            for i in range(d):
                if not isfinite(X[k + 1, i]):
                    st = ERR_NONFINITE
            if st != OK:
                k = k + 1
                break
    return st, k


def eval_dynamics(int case, const double[::1] c, const double[::1] x, const double[::1] th,
                  const double[::1] u):
    """Single dynamics evaluation (testing and benchmarking)."""
    cdef double out[MAXD]
    cdef Dims D
    case_dims(case, &D)
    cdef int st = dyn(case, &c[0], &x[0], &th[0], &u[0], out)
    return st, [out[i] for i in range(D.n)]
