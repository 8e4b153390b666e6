"""Closed-form dynamics of the pinned three-link biped with a hip disc.

Coordinates are ``q = (q_d, q_r, q_N)``:

* ``q_N`` absolute angle of the stance leg (foot -> hip) from the vertical,
  counter-clockwise positive,
* ``q_r`` swing-leg angle minus stance-leg angle,
* ``q_d`` disc angle relative to the inter-leg bisector ``q_N + q_r/2``.

The bisector is unchanged when the legs swap roles, so the disc angle needs no
relabeling at impact. Expressions here were generated by
``tools/derive_dynamics.py`` and are checked against it in the test suite.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace
from typing import NamedTuple

import numpy as np

from .errors import OutOfBounds, SingularMomentumMap

# indices into q, qdot
QD, QR, QN = 0, 1, 2

B_MATRIX = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])


@dataclass(frozen=True)
class RobotParams:
    """Physical constants. ``m_h`` lumps the hip carrier and the disc mass."""

    L: float = 1.0
    m_l: float = 5.0
    l_c: float = 0.5
    I_l: float = 5.0 / 12.0
    m_h: float = 10.0
    J_d: float = 0.5
    g: float = 9.81

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not np.isfinite(v) or v <= 0.0:
                raise ValueError(f"{f.name} must be positive, got {v!r}")
        if self.l_c > self.L:
            raise ValueError("l_c must not exceed L")

    def as_array(self) -> np.ndarray:
        return np.array([self.L, self.m_l, self.l_c, self.I_l, self.m_h, self.J_d, self.g])

    def to_dict(self) -> dict:
        return asdict(self)


PERTURBABLE = tuple(f.name for f in fields(RobotParams))


def perturb_params(p: RobotParams, factors: dict[str, float] | None = None) -> RobotParams:
    """Return a copy of ``p`` with fields scaled by ``factors``.

    Only the plant should ever see the perturbed copy; the controller keeps the
    nominal parameters.
    """
    if not factors:
        return p
    changes = {}
    for key, k in factors.items():
        if key not in PERTURBABLE:
            raise KeyError(f"unknown parameter {key!r}")
        if not 0.5 < k < 2.0:
            raise OutOfBounds(f"factor for {key} must lie in (0.5, 2.0), got {k}")
        changes[key] = getattr(p, key) * k
    return replace(p, **changes)


class DynTerms(NamedTuple):
    D: np.ndarray
    C: np.ndarray
    G: np.ndarray
    B: np.ndarray


@dataclass(frozen=True)
class State:
    """Positions ``q = (q_d, q_r, q_N)`` and ``omega = (sigma_N, dq_r, dq_N)``."""

    q: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float).reshape(3))
        object.__setattr__(self, "omega", np.asarray(self.omega, dtype=float).reshape(3))


def _lumped(p: RobotParams):
    a = p.m_l * (p.L - p.l_c) ** 2 + p.I_l + (p.m_h + p.m_l) * p.L**2
    b = p.m_l * p.l_c**2 + p.I_l
    e = p.m_l * (p.L - p.l_c) + (p.m_h + p.m_l) * p.L
    return a, b, e


def mass_matrix(p: RobotParams, q_r: float) -> np.ndarray:
    a, b, _ = _lumped(p)
    c = p.m_l * p.L * p.l_c * np.cos(q_r)
    J = p.J_d
    return np.array(
        [
            [J, 0.5 * J, J],
            [0.5 * J, b + 0.25 * J, b - c + 0.5 * J],
            [J, b - c + 0.5 * J, a + b - 2.0 * c + J],
        ]
    )


def mass_matrix_dqr(p: RobotParams, q_r: float) -> np.ndarray:
    """Derivative of the mass matrix with respect to ``q_r`` (the only one)."""
    s = p.m_l * p.L * p.l_c * np.sin(q_r)
    return np.array([[0.0, 0.0, 0.0], [0.0, 0.0, s], [0.0, s, 2.0 * s]])


def coriolis_matrix(p: RobotParams, q_r: float, dq: np.ndarray) -> np.ndarray:
    """Christoffel-form Coriolis matrix.

    With ``M = dD/dq_r`` and only ``q_r`` entering ``D``,
    ``C[k, j] = (M[k, j] dq_r + delta_jr (M dq)_k - delta_kr (M dq)_j) / 2``.
    """
    M = mass_matrix_dqr(p, q_r)
    dq = np.asarray(dq, dtype=float)
    Mdq = M @ dq
    C = 0.5 * M * dq[QR]
    C[:, QR] += 0.5 * Mdq
    C[QR, :] -= 0.5 * Mdq
    return C


def gravity_vector(p: RobotParams, q_r: float, q_N: float) -> np.ndarray:
    _, _, e = _lumped(p)
    swing = p.m_l * p.l_c * np.sin(q_N + q_r)
    return p.g * np.array([0.0, swing, -e * np.sin(q_N) + swing])


def dyn_terms(p: RobotParams, q, dq) -> DynTerms:
    q = np.asarray(q, dtype=float)
    dq = np.asarray(dq, dtype=float)
    return DynTerms(
        mass_matrix(p, q[QR]),
        coriolis_matrix(p, q[QR], dq),
        gravity_vector(p, q[QR], q[QN]),
        B_MATRIX.copy(),
    )


def momentum(p: RobotParams, q, dq) -> float:
    """Angular momentum about the stance foot (last row of ``D`` times ``dq``)."""
    return float(mass_matrix(p, q[QR])[QN] @ np.asarray(dq, dtype=float))


def omega_matrix(p: RobotParams, q) -> np.ndarray:
    """Linear map ``dq -> omega`` at configuration ``q``."""
    W = np.zeros((3, 3))
    W[0] = mass_matrix(p, q[QR])[QN]
    W[1, QR] = 1.0
    W[2, QN] = 1.0
    return W


def omega_from_vel(p: RobotParams, q, dq) -> np.ndarray:
    dq = np.asarray(dq, dtype=float)
    return np.array([momentum(p, q, dq), dq[QR], dq[QN]])


def vel_from_omega(p: RobotParams, q, omega) -> np.ndarray:
    sigma, dq_r, dq_N = omega
    DN = mass_matrix(p, q[QR])[QN]
    if abs(DN[QD]) < 1e-12:
        raise SingularMomentumMap(f"D[N, d] = {DN[QD]:.3e}; disc speed not recoverable")
    dq_d = (sigma - DN[QR] * dq_r - DN[QN] * dq_N) / DN[QD]
    return np.array([dq_d, dq_r, dq_N])


def potential_energy(p: RobotParams, q) -> float:
    _, _, e = _lumped(p)
    return float(p.g * (e * np.cos(q[QN]) - p.m_l * p.l_c * np.cos(q[QN] + q[QR])))


def kinetic_energy(p: RobotParams, q, dq) -> float:
    dq = np.asarray(dq, dtype=float)
    return float(0.5 * dq @ mass_matrix(p, q[QR]) @ dq)


def total_energy(p: RobotParams, q, dq) -> float:
    return kinetic_energy(p, q, dq) + potential_energy(p, q)


def accelerations(p: RobotParams, q, dq, u) -> np.ndarray:
    """Solve ``D ddq = B u - C dq - G`` for ``ddq``."""
    D, C, G, B = dyn_terms(p, q, dq)
    return np.linalg.solve(D, B @ np.asarray(u, dtype=float) - C @ np.asarray(dq) - G)
