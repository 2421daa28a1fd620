"""Flight-test models: two longitudinal short-period cases and one lateral case.

Coupling quantities from the other axis are substituted by their measured
values, which enter the models as exogenous input channels.  All angles are
radians, accelerometer outputs are in g.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, fields, replace
from typing import Optional

import numpy as np

from .errors import ConfigError, ConstantsError, DegenerateInputError
from .statespace import ModelDefinition

__all__ = [
    "CaseId",
    "ModelConstants",
    "ParameterLayout",
    "CASE1_CONSTANTS",
    "CASE2_CONSTANTS",
    "CASE3_CONSTANTS",
    "LAYOUTS",
    "case1_dynamics",
    "case1_measurement",
    "case2_dynamics",
    "case2_measurement",
    "case3_dynamics",
    "case3_measurement",
    "builtin_model",
    "check_runtime_constants",
    "parse_case",
]


class CaseId(enum.Enum):
    Case1Longitudinal = 1
    Case2Longitudinal = 2
    Case3Lateral = 3


def parse_case(value) -> CaseId:
    if isinstance(value, CaseId):
        return value
    try:
        return CaseId(int(value))
    except (ValueError, TypeError):
        for c in CaseId:
            if str(value).lower() == c.name.lower():
                return c
    raise ConfigError(f"unknown case {value!r}; expected 1, 2 or 3")


@dataclass(frozen=True)
class ModelConstants:
    """Geometry, mass, inertia, flight condition and sensor-offset constants.

    ``None`` marks a constant the case does not use (or one that must be
    supplied at run time, such as the case-2 dynamic pressure).
    """

    cbar: Optional[float] = None
    b: Optional[float] = None
    S: Optional[float] = None
    mass: Optional[float] = None
    Ixx: Optional[float] = None
    Iyy: Optional[float] = None
    Izz: Optional[float] = None
    Izx: Optional[float] = 0.0
    qbar: Optional[float] = None
    V: Optional[float] = None
    g: Optional[float] = None
    K_alpha: Optional[float] = 1.0
    K_alpha_x_alpha: Optional[float] = None
    x_an: Optional[float] = None
    z_ax: Optional[float] = None
    K_beta_z_beta: Optional[float] = None
    K_beta_x_beta: Optional[float] = None
    z_ay: Optional[float] = None
    x_ay: Optional[float] = None
    # case-2 only: qbar = 0.5 * rho * V_m**2 when qbar itself is not given
    rho: Optional[float] = None
    # reference length of the roll-moment damping terms in case 3: "b" or "cbar"
    roll_length: str = "b"

    def __post_init__(self):
        if self.mass is not None and not self.mass > 0:
            raise ConstantsError(f"mass must be > 0, got {self.mass!r}")
        if self.Iyy is not None and not self.Iyy > 0:
            raise ConstantsError(f"Iyy must be > 0, got {self.Iyy!r}")
        if self.V is not None and not self.V > 0:
            raise ConstantsError(f"V must be > 0, got {self.V!r}")
        if self.Ixx is not None and self.Izz is not None:
            izx = self.Izx or 0.0
            if not self.Ixx * self.Izz - izx * izx > 0:
                raise ConstantsError("Ixx*Izz - Izx**2 must be > 0 (roll/yaw coupling is singular)")
        if self.roll_length not in ("b", "cbar"):
            raise ConfigError(f"roll_length must be 'b' or 'cbar', got {self.roll_length!r}")

    def updated(self, **changes) -> "ModelConstants":
        known = {f.name for f in fields(self)}
        unknown = set(changes) - known
        if unknown:
            raise ConfigError(f"unknown model constant(s): {', '.join(sorted(unknown))}")
        return replace(self, **changes)

    def as_vector(self) -> np.ndarray:
        """Flat float vector in :data:`KERNEL_CONSTANT_ORDER` (NaN for unset)."""
        vals = []
        for name in KERNEL_CONSTANT_ORDER:
            if name == "roll_length":
                v = self.cbar if self.roll_length == "cbar" else self.b
            else:
                v = getattr(self, name)
            vals.append(np.nan if v is None else float(v))
        return np.array(vals)


# Index order shared with the compiled kernels.
KERNEL_CONSTANT_ORDER = (
    "cbar", "b", "S", "mass", "Ixx", "Iyy", "Izz", "Izx", "qbar", "V", "g",
    "K_alpha", "K_alpha_x_alpha", "x_an", "z_ax", "K_beta_z_beta",
    "K_beta_x_beta", "z_ay", "x_ay", "rho", "roll_length",
)

CASE1_CONSTANTS = ModelConstants(
    cbar=5.58, S=184.0, mass=172.667, Ixx=4142.9, Iyy=3922.4, Izz=7642.5,
    g=32.2, V=403.1, qbar=83.08, K_alpha_x_alpha=-0.0279, x_an=0.101, z_ax=-1.17,
)

# No flight speed or dynamic pressure is tabulated for case 2: V is taken from
# the measured V_m channel and qbar must be configured.
CASE2_CONSTANTS = ModelConstants(
    S=184.0, mass=196.0, Ixx=6892.7, Iyy=3953.2, Izz=10416.4, g=32.2,
    cbar=5.58, K_alpha_x_alpha=-0.0279, x_an=0.101, K_alpha=1.0,
)

CASE3_CONSTANTS = ModelConstants(
    qbar=865.3, S=9.3, mass=387.7, Ixx=314.0, Iyy=488.0, Izz=698.0, Izx=69.0,
    V=39.41, g=9.81, b=6.81, K_beta_z_beta=0.305, K_beta_x_beta=2.73,
    z_ay=-0.098, x_ay=0.651,
)


@dataclass(frozen=True)
class ParameterLayout:
    names: tuple
    initial: tuple

    def __post_init__(self):
        if len(self.names) != len(self.initial):
            raise ConfigError("parameter layout names/initial length mismatch")


LAYOUTS = {
    CaseId.Case1Longitudinal: ParameterLayout(
        names=("C_N_alpha", "C_N_delta_e", "C_L_0", "C_m_alpha", "C_m_q",
               "C_m_delta_e", "C_m_0", "theta_0", "C_N_0", "C_A_alpha",
               "C_A_alpha2", "C_A_delta_e", "C_A_0"),
        initial=(4.0, 0.24, 0.17, -0.48, -17.0, -0.9, -0.05, -0.02, 0.175,
                 -0.3, 0.03, -0.083, -0.015),
    ),
    CaseId.Case2Longitudinal: ParameterLayout(
        names=("C_L_alpha", "C_L_delta_e", "C_L_0", "C_m_alpha", "C_m_q",
               "C_m_alphadot", "C_m_delta_e", "C_m_0", "theta_0", "C_N_0"),
        initial=(4.0, 0.15, 0.2, -0.5, -11.5, -5.0, -1.38, -0.06, -0.01, 0.2),
    ),
    CaseId.Case3Lateral: ParameterLayout(
        names=("C_Y_beta", "C_Y_delta_r", "beta_0", "C_L_beta", "C_L_p", "C_L_r",
               "C_L_delta_a", "C_L_delta_r", "C_L_0", "phi_0", "C_N_beta",
               "C_N_p", "C_N_r", "C_N_delta_a", "C_N_delta_r", "C_N_0", "C_Y_0",
               "C_Y_p", "C_Y_r", "C_Y_delta_a"),
        initial=(-0.5, 0.1, -0.01, 0.01, -0.35, 0.01, 0.06, 0.01, -0.002, 0.002,
                 0.07, -0.055, -0.05, 0.003, -0.04, 0.0068, -0.025, 0.5, -1.0,
                 0.005),
    ),
}

STATE_NAMES = {
    CaseId.Case1Longitudinal: ("alpha", "q", "theta_pitch"),
    CaseId.Case2Longitudinal: ("alpha", "q", "theta_pitch"),
    CaseId.Case3Lateral: ("beta", "p", "phi", "r"),
}
MEAS_NAMES = {
    CaseId.Case1Longitudinal: ("alpha", "q", "theta", "an", "ax"),
    CaseId.Case2Longitudinal: ("alpha", "q", "theta", "an"),
    CaseId.Case3Lateral: ("beta", "p", "phi", "r", "ay"),
}
INPUT_NAMES = {
    CaseId.Case1Longitudinal: ("delta_e", "phi_m", "beta_m", "p_m", "r_m", "alpha_m"),
    CaseId.Case2Longitudinal: ("delta_e", "phi_m", "beta_m", "V_m", "p_m", "r_m", "alpha_m"),
    CaseId.Case3Lateral: ("delta_a", "delta_r", "theta_m", "q_m", "alpha_m"),
}


# ---------------------------------------------------------------- case 1

def _case1_coeffs(alpha, de, th):
    cn = th[0] * alpha + th[1] * de + th[8]
    ca = th[9] * alpha + th[10] * alpha * alpha + th[11] * de + th[12]
    return cn, ca


def case1_dynamics(state, params, inputs, c: ModelConstants = CASE1_CONSTANTS):
    """(alpha, q, theta) derivatives for the first longitudinal case."""
    alpha, q, pitch = state[0], state[1], state[2]
    th = params
    de, phim, betam, pm, rm, am = inputs[0], inputs[1], inputs[2], inputs[3], inputs[4], inputs[5]
    cn, ca = _case1_coeffs(alpha, de, th)
    cl = cn * math.cos(alpha) - ca * math.sin(alpha) + th[2]
    V = c.V
    alpha_dot = (
        -c.qbar * c.S / (c.mass * V) * cl
        + q
        + c.g / V * (math.cos(phim) * math.cos(am) * math.cos(pitch) + math.sin(am) * math.sin(pitch))
        - betam * (pm * math.cos(am) + rm * math.sin(am))
    )
    q_dot = (
        c.qbar * c.S * c.cbar / c.Iyy
        * (th[3] * alpha + th[4] * c.cbar / (2.0 * V) * q + th[5] * de + th[6])
        + (c.Izz - c.Ixx) / c.Iyy * rm * pm
    )
    pitch_dot = q * math.cos(phim) - rm * math.sin(phim) + th[7]
    return np.array([alpha_dot, q_dot, pitch_dot])


def case1_measurement(state, state_deriv, params, inputs, c: ModelConstants = CASE1_CONSTANTS):
    """(alpha_m, q_m, theta_m, an_m, ax_m); an/ax in g."""
    alpha, q, pitch = state[0], state[1], state[2]
    q_dot = state_deriv[1]
    cn, ca = _case1_coeffs(alpha, inputs[0], params)
    k = c.qbar * c.S / (c.mass * c.g)
    return np.array([
        alpha - c.K_alpha_x_alpha * q / c.V,
        q,
        pitch,
        k * cn + c.x_an / c.g * q_dot,
        -k * ca + c.z_ax / c.g * q_dot,
    ])


# ---------------------------------------------------------------- case 2

def _case2_qbar(c: ModelConstants, vm):
    if c.qbar is not None:
        return c.qbar
    if c.rho is not None:
        return 0.5 * c.rho * vm * vm
    raise ConfigError("case 2 needs the dynamic pressure: set qbar (or rho)")


def case2_dynamics(state, params, inputs, c: ModelConstants = CASE2_CONSTANTS):
    """(alpha, q, theta) derivatives for the second longitudinal case.

    The pitch equation contains an alpha-dot damping term; it is evaluated
    with the alpha-dot computed first, which is exact because alpha-dot does
    not depend on q-dot.
    """
    alpha, q, pitch = state[0], state[1], state[2]
    th = params
    de, phim, betam, vm, pm, rm, am = (inputs[0], inputs[1], inputs[2], inputs[3],
                                       inputs[4], inputs[5], inputs[6])
    cb = math.cos(betam)
    if abs(cb) < 1e-6:
        raise DegenerateInputError(f"cos(beta_m) = {cb!r} is too close to zero")
    qbar = _case2_qbar(c, vm)
    cl = th[0] * alpha + th[1] * de + th[2]
    alpha_dot = (
        -qbar * c.S / (c.mass * vm * cb) * cl
        + q
        + c.g / (vm * cb) * (math.cos(phim) * math.cos(am) * math.cos(pitch) + math.sin(am) * math.sin(pitch))
        - math.tan(betam) * (pm * math.cos(am) + rm * math.sin(am))
    )
    k = c.cbar / (2.0 * vm)
    q_dot = (
        qbar * c.S * c.cbar / c.Iyy
        * (th[3] * alpha + th[4] * k * q + th[5] * k * alpha_dot + th[6] * de + th[7])
        + (c.Izz - c.Ixx) / c.Iyy * rm * pm
    )
    pitch_dot = q * math.cos(phim) - rm * math.sin(phim) + th[8]
    return np.array([alpha_dot, q_dot, pitch_dot])


def case2_measurement(state, state_deriv, params, inputs, c: ModelConstants = CASE2_CONSTANTS):
    """(alpha_m, q_m, theta_m, an_m) with C_N_alpha = C_L_alpha and C_N_de = C_L_de."""
    alpha, q, pitch = state[0], state[1], state[2]
    th = params
    de, vm = inputs[0], inputs[3]
    qbar = _case2_qbar(c, vm)
    cn = th[0] * alpha + th[1] * de + th[9]
    return np.array([
        c.K_alpha * alpha - c.K_alpha_x_alpha * q / vm,
        q,
        pitch,
        qbar * c.S / (c.mass * c.g) * cn + c.x_an / c.g * state_deriv[1],
    ])


# ---------------------------------------------------------------- case 3

def _case3_side_force(beta, p, r, da, dr, th, k, bias):
    return th[0] * beta + th[17] * k * p + th[18] * k * r + th[19] * da + th[1] * dr + bias


def case3_moments(state, params, inputs, c: ModelConstants = CASE3_CONSTANTS):
    """Right-hand sides (L~, N~) of the coupled roll/yaw equations."""
    beta, p, phi, r = state[0], state[1], state[2], state[3]
    th = params
    da, dr, qm = inputs[0], inputs[1], inputs[3]
    k = c.b / (2.0 * c.V)
    if c.roll_length == "cbar":
        if c.cbar is None:
            raise ConfigError("roll_length='cbar' needs the constant cbar")
        kl = c.cbar / (2.0 * c.V)
    else:
        kl = k
    izx = c.Izx or 0.0
    l_rhs = (
        c.qbar * c.S * c.b / c.Ixx
        * (th[3] * beta + th[4] * kl * p + th[5] * kl * r + th[6] * da + th[7] * dr + th[8])
        + (c.Iyy - c.Izz) / c.Ixx * r * qm
        + izx / c.Ixx * p * qm
    )
    n_rhs = (
        c.qbar * c.S * c.b / c.Izz
        * (th[10] * beta + th[11] * k * p + th[12] * k * r + th[13] * da + th[14] * dr + th[15])
        + (c.Ixx - c.Iyy) / c.Izz * p * qm
        - izx / c.Izz * r * qm
    )
    return l_rhs, n_rhs


def solve_roll_yaw(l_rhs, n_rhs, c: ModelConstants):
    """Solve ``[[1, -Izx/Ixx], [-Izx/Izz, 1]] [p_dot, r_dot] = [L~, N~]``."""
    izx = c.Izx or 0.0
    a = izx / c.Ixx
    d = izx / c.Izz
    det = 1.0 - a * d
    if not abs(det) > 1e-12:
        raise ConstantsError("roll/yaw inertia coupling matrix is singular")
    return (l_rhs + a * n_rhs) / det, (n_rhs + d * l_rhs) / det


def case3_dynamics(state, params, inputs, c: ModelConstants = CASE3_CONSTANTS):
    """(beta, p, phi, r) derivatives for the lateral case."""
    beta, p, phi, r = state[0], state[1], state[2], state[3]
    th = params
    da, dr, thm, qm, am = inputs[0], inputs[1], inputs[2], inputs[3], inputs[4]
    k = c.b / (2.0 * c.V)
    beta_dot = (
        c.qbar * c.S / (c.mass * c.V) * _case3_side_force(beta, p, r, da, dr, th, k, th[2])
        + c.g / c.V * math.sin(phi) * math.cos(thm)
        + p * math.sin(am)
        - r * math.cos(am)
    )
    l_rhs, n_rhs = case3_moments(state, params, inputs, c)
    p_dot, r_dot = solve_roll_yaw(l_rhs, n_rhs, c)
    tt = math.tan(thm)
    phi_dot = p + qm * tt * math.sin(phi) + r * tt * math.cos(phi) + th[9]
    return np.array([beta_dot, p_dot, phi_dot, r_dot])


def case3_measurement(state, state_deriv, params, inputs, c: ModelConstants = CASE3_CONSTANTS):
    """(beta_m, p_m, phi_m, r_m, ay_m); ay in g, side-force bias C_Y_0."""
    beta, p, phi, r = state[0], state[1], state[2], state[3]
    th = params
    da, dr = inputs[0], inputs[1]
    k = c.b / (2.0 * c.V)
    cy = _case3_side_force(beta, p, r, da, dr, th, k, th[16])
    return np.array([
        beta - c.K_beta_z_beta * p / c.V + c.K_beta_x_beta * r / c.V,
        p,
        phi,
        r,
        c.qbar * c.S / (c.mass * c.g) * cy - c.z_ay / c.g * state_deriv[1] + c.x_ay / c.g * state_deriv[3],
    ])


_FUNCS = {
    CaseId.Case1Longitudinal: (case1_dynamics, case1_measurement, CASE1_CONSTANTS),
    CaseId.Case2Longitudinal: (case2_dynamics, case2_measurement, CASE2_CONSTANTS),
    CaseId.Case3Lateral: (case3_dynamics, case3_measurement, CASE3_CONSTANTS),
}


def builtin_model(case, constants: Optional[ModelConstants] = None, **overrides) -> ModelDefinition:
    """Model definition for one of the three flight-test cases.

    ``constants`` replaces the tabulated set wholesale; keyword ``overrides``
    patch individual entries (e.g. ``qbar=...`` for case 2).
    """
    case = parse_case(case)
    dyn, meas, default = _FUNCS[case]
    c = constants if constants is not None else default
    if overrides:
        c = c.updated(**overrides)
    layout = LAYOUTS[case]

    def dynamics(x, theta, u, _c=c):
        return dyn(x, theta, u, _c)

    def measurement(x, xdot, theta, u, _c=c):
        return meas(x, xdot, theta, u, _c)

    return ModelDefinition(
        n_states=len(STATE_NAMES[case]),
        n_meas=len(MEAS_NAMES[case]),
        n_params=len(layout.names),
        dynamics=dynamics,
        measurement=measurement,
        state_names=STATE_NAMES[case],
        meas_names=MEAS_NAMES[case],
        param_names=layout.names,
        input_names=INPUT_NAMES[case],
        constants=c,
        theta_init=np.array(layout.initial),
        name=f"case{case.value}",
        kernel=(case.value, c.as_vector()),
    )


def check_runtime_constants(model: ModelDefinition) -> None:
    """Raise :class:`ConfigError` naming any constant the model still lacks."""
    c = model.constants
    if not isinstance(c, ModelConstants) or model.kernel is None:
        return
    case = CaseId(model.kernel[0])
    if case is CaseId.Case2Longitudinal and c.qbar is None and c.rho is None:
        raise ConfigError("case 2 needs the dynamic pressure qbar (or air density rho); none configured")
    if case is CaseId.Case3Lateral and c.roll_length == "cbar" and c.cbar is None:
        raise ConfigError("roll_length='cbar' needs the constant cbar")
