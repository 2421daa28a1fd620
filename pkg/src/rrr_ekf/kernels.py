"""Kernel backend selection.

The compiled extension ``rrr_ekf._core`` is used for the built-in flight
models when it is importable; everything else (custom models, or
``RRR_EKF_BACKEND=python``) runs on :class:`~rrr_ekf._pykernel.PythonKernel`.
"""
import logging
import os

import numpy as np

from ._pykernel import PythonKernel, _alloc_forward, rts_smooth_arrays
from .errors import (ConfigError, ConstantsError, DegenerateInputError, DivergenceError,
                     NumericError)

log = logging.getLogger(__name__)

try:
    from . import _core
except ImportError:  # extension not built
    _core = None

COMPILED_AVAILABLE = _core is not None


def default_backend() -> str:
    want = os.environ.get("RRR_EKF_BACKEND", "auto").lower()
    if want == "python" or not COMPILED_AVAILABLE:
        return "python"
    return "compiled"


def _raise_status(status, step, what, times=None):
    t = None if times is None or step >= len(times) else float(times[step])
    if status == 1:
        raise DivergenceError(f"{what}: non-finite value at step {step}", step=step, time=t)
    if status == 2:
        raise DegenerateInputError(f"{what}: cos(beta_m) too close to zero at step {step}")
    if status == 3:
        raise NumericError(f"innovation covariance is not positive definite at step {step}",
                           step=step, time=t)
    if status == 4:
        raise NumericError(f"predicted covariance is not positive definite at step {step}",
                           step=step, time=t)
    if status == 5:
        raise ConstantsError("roll/yaw inertia coupling matrix is singular")
    raise NumericError(f"{what}: kernel status {status} at step {step}", step=step)


def _c(a):
    return np.ascontiguousarray(a, dtype=float)


class CompiledKernel:
    """Same interface as :class:`PythonKernel`, backed by ``_core``."""

    backend = "compiled"

    def __init__(self, model, times, u, umid):
        self.model = model
        self.case, consts = model.kernel
        self.consts = _c(consts)
        self.times = _c(times)
        self.u = _c(u)
        self.umid = _c(umid) if len(umid) else np.zeros((0, self.u.shape[1]))
        self.dts = _c(np.diff(self.times))

    def forward(self, x0, P0, Qaug, R, Z):
        N, m = Z.shape
        out = _alloc_forward(N, x0.size, m)
        status, step = _core.forward(
            self.case, self.consts, self.u, self.umid, self.dts, _c(x0), _c(P0),
            _c(Qaug), _c(R), _c(Z), out["x_prior"], out["P_prior"], out["x_post"],
            out["P_post"], out["Phi"], out["y_prior"], out["H_prior"], out["nu"],
            out["S"], out["K"], out["y_post"], out["H_post"])
        if status:
            if status == 1:
                last = out["x_post"][step - 1] if step > 0 else x0
                raise DivergenceError(f"filter diverged at step {step}", step=step,
                                      time=float(self.times[step]), last_state=last.copy())
            _raise_status(status, step, "forward pass", self.times)
        return out

    def smooth(self, x_prior, P_prior, x_post, P_post, Phi):
        N, d = x_post.shape
        xs = np.empty((N, d))
        Ps = np.empty((N, d, d))
        G = np.zeros((max(N - 1, 0), d, d))
        C = np.zeros((max(N - 1, 0), d, d))
        status, step = _core.smooth(_c(x_prior), _c(P_prior), _c(x_post), _c(P_post), _c(Phi),
                                    xs, Ps, G, C)
        if status:
            _raise_status(status, step + 1, "smoother", self.times)
        return xs, Ps, G, C

    def observe(self, X):
        N = X.shape[0]
        Y = np.empty((N, self.model.n_meas))
        H = np.empty((N, self.model.n_meas, X.shape[1]))
        status, step = _core.observe_batch(self.case, self.consts, self.u[:N], _c(X), Y, H)
        if status:
            _raise_status(status, step, "measurement evaluation", self.times)
        return Y, H

    def propagate(self, X):
        N, d = X.shape
        Xn = np.empty((max(N - 1, 0), d))
        Phi = np.empty((max(N - 1, 0), d, d))
        status, step = _core.propagate_batch(self.case, self.consts, self.u, self.umid,
                                             self.dts, _c(X), Xn, Phi)
        if status:
            _raise_status(status, step, "propagation", self.times)
        return Xn, Phi

    def open_loop(self, x0):
        X = np.zeros((self.times.size, x0.size))
        X[0] = x0
        status, step = _core.open_loop(self.case, self.consts, self.u, self.umid, self.dts, X)
        if status:
            _raise_status(status, step, "open-loop trajectory", self.times)
        return X


def make_kernel(model, times, u, umid, backend=None):
    """Kernel for ``model`` on the sample grid ``times`` with pre-sampled inputs."""
    backend = backend or default_backend()
    if backend == "compiled":
        if not COMPILED_AVAILABLE:
            raise ConfigError("compiled backend requested but rrr_ekf._core is not built")
        if model.kernel is not None and model.transition is None:
            return CompiledKernel(model, times, u, umid)
    return PythonKernel(model, times, u, umid)


__all__ = ["COMPILED_AVAILABLE", "CompiledKernel", "PythonKernel", "default_backend",
           "make_kernel", "rts_smooth_arrays"]
