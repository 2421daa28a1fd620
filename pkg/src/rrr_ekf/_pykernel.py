"""Pure-Python filter kernels.

Works with any :class:`~rrr_ekf.statespace.ModelDefinition` (including the
optional analytic hooks) and is the fallback when the compiled extension is
not built.  The compiled kernels in ``_core.pyx`` mirror these loops
operation for operation.
"""
import numpy as np

from .errors import DivergenceError, NumericError
from .statespace import _rk4, numeric_jacobian


# relative diagonal loadings tried when a scaled covariance is numerically
# indefinite (near-deterministic states make the augmented covariance
# almost singular)
JITTER = (0.0, 1e-12, 1e-10, 1e-8)


def _chol(a, what, step):
    """Cholesky factor of the diagonally scaled ``a``; returns ``(L, scale)``.

    Scaling to unit diagonal first keeps covariances whose state and
    parameter blocks differ by many orders of magnitude factorizable.
    """
    diag = np.diag(a)
    if not np.all(diag > 0) or not np.all(np.isfinite(diag)):
        raise NumericError(f"{what} is not positive definite at step {step}", step=step)
    scale = np.sqrt(diag)
    an = a / np.outer(scale, scale)
    for jitter in JITTER:
        if jitter:
            an = an.copy()
            an[np.diag_indices_from(an)] = 1.0 + jitter
        try:
            return np.linalg.cholesky(an), scale
        except np.linalg.LinAlgError:
            continue
    raise NumericError(f"{what} is not positive definite at step {step}", step=step)


def _chol_solve(factor, b):
    lower, scale = factor
    y = np.linalg.solve(lower, b / scale[:, None])
    return np.linalg.solve(lower.T, y) / scale[:, None]


def taylor_transition(F, dt):
    """Second-order Taylor transition ``I + F dt + F^2 dt^2 / 2``."""
    d = F.shape[0]
    return np.eye(d) + F * dt + (F @ F) * (0.5 * dt * dt)


class PythonKernel:
    """Model-specific kernels evaluated through the model's Python callables."""

    backend = "python"

    def __init__(self, model, times, u, umid):
        self.model = model
        self.times = np.asarray(times, dtype=float)
        self.u = np.asarray(u, dtype=float)
        self.umid = np.asarray(umid, dtype=float)
        self.dts = np.diff(self.times)

    # -- single-point primitives ------------------------------------------------
    def _f_aug(self, xa, k):
        return self.model.augmented_dynamics(xa, self.u[k])

    def jac_f(self, xa, k):
        m = self.model
        if m.dynamics_jacobian is not None:
            return np.asarray(m.dynamics_jacobian(xa, self.u[k]), dtype=float)
        return numeric_jacobian(lambda v: self._f_aug(v, k), xa)

    def observe_one(self, xa, k):
        m = self.model
        y = m.observe(xa, self.u[k])
        if m.measurement_jacobian is not None:
            H = np.asarray(m.measurement_jacobian(xa, self.u[k]), dtype=float)
        else:
            H = numeric_jacobian(lambda v: m.observe(v, self.u[k]), xa)
        return y, H

    def step(self, xa, k):
        """Propagate ``xa`` from sample ``k`` to ``k+1``; returns ``(x_next, Phi)``."""
        m = self.model
        dt = self.dts[k]
        inputs = (self.u[k], self.umid[k], self.u[k + 1])
        if m.transition is not None:
            xn, phi = m.transition(xa, self.times[k], dt, inputs)
            return np.asarray(xn, dtype=float), np.asarray(phi, dtype=float)
        x, th = m.split(xa)
        xn = np.concatenate([_rk4(m.dynamics, x, th, *inputs, dt, self.times[k]), th])
        return xn, taylor_transition(self.jac_f(xa, k), dt)

    # -- batch routines -----------------------------------------------------------
    def forward(self, x0, P0, Qaug, R, Z):
        N, d = Z.shape[0], x0.size
        mm = Z.shape[1]
        out = _alloc_forward(N, d, mm)
        xa = x0.astype(float).copy()
        P = P0.astype(float).copy()
        eye = np.eye(d)
        for k in range(N):
            if k > 0:
                xa, phi = self.step(out["x_post"][k - 1], k - 1)
                out["Phi"][k - 1] = phi
                P = phi @ out["P_post"][k - 1] @ phi.T + Qaug
                P = 0.5 * (P + P.T)
            if not np.all(np.isfinite(xa)) or not np.all(np.isfinite(P)):
                raise DivergenceError(f"filter diverged at step {k}", step=k,
                                      time=float(self.times[k]),
                                      last_state=out["x_post"][k - 1] if k else x0)
            out["x_prior"][k] = xa
            out["P_prior"][k] = P
            y, H = self.observe_one(xa, k)
            nu = Z[k] - y
            S = H @ P @ H.T + R
            S = 0.5 * (S + S.T)
            L = _chol(S, "innovation covariance", k)
            K = _chol_solve(L, H @ P).T
            IKH = eye - K @ H
            Pp = IKH @ P @ IKH.T + K @ R @ K.T
            Pp = 0.5 * (Pp + Pp.T)
            xp = xa + K @ nu
            out["y_prior"][k] = y
            out["H_prior"][k] = H
            out["nu"][k] = nu
            out["S"][k] = S
            out["K"][k] = K
            out["x_post"][k] = xp
            out["P_post"][k] = Pp
            yp, Hp = self.observe_one(xp, k)
            out["y_post"][k] = yp
            out["H_post"][k] = Hp
        return out

    def observe(self, X):
        N = X.shape[0]
        Y = np.empty((N, self.model.n_meas))
        H = np.empty((N, self.model.n_meas, X.shape[1]))
        for k in range(N):
            Y[k], H[k] = self.observe_one(X[k], k)
        return Y, H

    def propagate(self, X):
        """``f_d(X[k])`` and its transition for ``k = 0..N-2``."""
        N, d = X.shape
        Xn = np.empty((N - 1, d))
        Phi = np.empty((N - 1, d, d))
        for k in range(N - 1):
            Xn[k], Phi[k] = self.step(X[k], k)
        return Xn, Phi

    def open_loop(self, x0):
        N = self.times.size
        X = np.empty((N, x0.size))
        X[0] = x0
        for k in range(N - 1):
            m = self.model
            x, th = m.split(X[k])
            inputs = (self.u[k], self.umid[k], self.u[k + 1])
            if m.transition is not None:
                X[k + 1] = m.transition(X[k], self.times[k], self.dts[k], inputs)[0]
            else:
                X[k + 1, : m.n_states] = _rk4(m.dynamics, x, th, *inputs, self.dts[k], self.times[k])
                X[k + 1, m.n_states:] = th
            if not np.all(np.isfinite(X[k + 1])):
                raise DivergenceError(f"open-loop trajectory diverged at step {k + 1}", step=k + 1)
        return X

    def smooth(self, x_prior, P_prior, x_post, P_post, Phi):
        return rts_smooth_arrays(x_prior, P_prior, x_post, P_post, Phi)


def _alloc_forward(N, d, m):
    return {
        "x_prior": np.empty((N, d)),
        "P_prior": np.empty((N, d, d)),
        "x_post": np.empty((N, d)),
        "P_post": np.empty((N, d, d)),
        "Phi": np.empty((max(N - 1, 0), d, d)),
        "y_prior": np.empty((N, m)),
        "H_prior": np.empty((N, m, d)),
        "nu": np.empty((N, m)),
        "S": np.empty((N, m, m)),
        "K": np.empty((N, d, m)),
        "y_post": np.empty((N, m)),
        "H_post": np.empty((N, m, d)),
    }


def rts_smooth_arrays(x_prior, P_prior, x_post, P_post, Phi):
    """Rauch-Tung-Striebel backward pass; returns ``(x_s, P_s, G, C)``.

    ``C[k]`` is the lag-one smoothed cross-covariance ``Cov(x_{k+1}, x_k | N)``.
    """
    N, d = x_post.shape
    xs = np.empty_like(x_post)
    Ps = np.empty_like(P_post)
    G = np.zeros((max(N - 1, 0), d, d))
    C = np.zeros((max(N - 1, 0), d, d))
    xs[-1] = x_post[-1]
    Ps[-1] = P_post[-1]
    for k in range(N - 2, -1, -1):
        L = _chol(P_prior[k + 1], "predicted covariance", k + 1)
        g = _chol_solve(L, Phi[k] @ P_post[k]).T
        xs[k] = x_post[k] + g @ (xs[k + 1] - x_prior[k + 1])
        p = P_post[k] + g @ (Ps[k + 1] - P_prior[k + 1]) @ g.T
        Ps[k] = 0.5 * (p + p.T)
        G[k] = g
        C[k] = Ps[k + 1] @ g.T
    return xs, Ps, G, C
