"""Driven pendulum with two counter-propagating waves.

H(p, q, t) = p**2/2 - (g+/2) cos(q + t) - (g-/2) cos(q - t), drive period 2*pi.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TAU = 2.0 * math.pi


@dataclass(frozen=True)
class SystemParams:
    """Physical configuration of the driven pendulum.

    Parameters
    ----------
    gamma_plus, gamma_minus : float
        Amplitudes of the co- and counter-propagating drive terms.
    hbar : float
        Effective Planck constant (ignored by the classical code).
    tau : float
        Drive period. Fixed to 2*pi; anything else is rejected.
    """

    gamma_plus: float
    gamma_minus: float
    hbar: float = 1.0
    tau: float = TAU

    def __post_init__(self):
        if not (self.gamma_plus >= 0 and self.gamma_minus >= 0):
            raise ValueError("couplings must be non-negative")
        if not self.hbar > 0:
            raise ValueError("hbar must be positive")
        if self.tau != TAU:
            raise ValueError("drive period is fixed to 2*pi")

    @classmethod
    def symmetric(cls, gamma: float, hbar: float = 1.0) -> "SystemParams":
        return cls(gamma, gamma, hbar)

    @property
    def symmetric_mode(self) -> bool:
        return self.gamma_plus == self.gamma_minus

    @property
    def gamma(self) -> float:
        """Common coupling; only meaningful in symmetric mode."""
        return 0.5 * (self.gamma_plus + self.gamma_minus)

    def with_hbar(self, hbar: float) -> "SystemParams":
        return SystemParams(self.gamma_plus, self.gamma_minus, hbar)


def wrap_angle(q):
    """Reduce angles into [-pi, pi)."""
    return np.mod(np.asarray(q) + math.pi, TAU) - math.pi


@dataclass(frozen=True)
class PhaseSpacePoint:
    p: float
    q: float

    def __post_init__(self):
        object.__setattr__(self, "q", float(wrap_angle(self.q)))
        object.__setattr__(self, "p", float(self.p))

    def as_array(self) -> np.ndarray:
        return np.array([self.p, self.q])

    def reflected(self) -> "PhaseSpacePoint":
        return PhaseSpacePoint(-self.p, self.q)


def potential(params: SystemParams, q, t):
    return -0.5 * params.gamma_plus * np.cos(q + t) - 0.5 * params.gamma_minus * np.cos(q - t)


def hamiltonian(params: SystemParams, p, q, t):
    return 0.5 * np.asarray(p) ** 2 + potential(params, q, t)


def force(params: SystemParams, q, t):
    """-dV/dq."""
    return -0.5 * params.gamma_plus * np.sin(q + t) - 0.5 * params.gamma_minus * np.sin(q - t)


def equations_of_motion(params: SystemParams, p, q, t):
    """Hamilton's equations, returned as (dp/dt, dq/dt)."""
    return force(params, q, t), np.asarray(p, dtype=float)


def h0(params: SystemParams, p, q_comoving, island: str = "upper"):
    """Integrable pendulum approximation in the frame co-moving with one island.

    ``island="upper"`` keeps the gamma_minus wave, (p-1)^2/2 - (g-/2) cos(q - t);
    ``"lower"`` keeps the gamma_plus wave around p = -1 with q_comoving = q + t.
    """
    if island == "upper":
        return 0.5 * (np.asarray(p) - 1.0) ** 2 - 0.5 * params.gamma_minus * np.cos(q_comoving)
    if island == "lower":
        return 0.5 * (np.asarray(p) + 1.0) ** 2 - 0.5 * params.gamma_plus * np.cos(q_comoving)
    raise ValueError(f"unknown island {island!r}")
