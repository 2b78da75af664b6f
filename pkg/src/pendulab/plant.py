"""The data-generating process: a damped nonlinear pendulum.

State dynamics   x'' + 2*zeta*omega0*x' + omega0**2 * sin(x) = u(t)
Measured output  y = sin(x)

The angle is not wrapped: for large torques the pendulum swings over the top
and x keeps accumulating while y stays bounded.  Integration uses scipy's
Radau method (adaptive 5th-order implicit Runge-Kutta with Newton inner
iterations), with the input interpolated linearly between grid samples to
match how the inputs are constructed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .signals import Signal

__all__ = [
    "PlantParams",
    "PlantState",
    "IntegrationError",
    "simulate_true",
    "simulate_true_trajectory",
    "mechanical_energy",
]

DEFAULT_RTOL = 1e-8
DEFAULT_ATOL = 1e-10


class IntegrationError(RuntimeError):
    """The ODE solver failed to reach the end of the horizon."""

    def __init__(self, message: str, failure_time: float):
        super().__init__(message)
        self.failure_time = failure_time


@dataclass(frozen=True)
class PlantParams:
    """Damping ratio and small-signal resonant frequency of the pendulum."""

    zeta: float = 0.5
    omega0: float = 2.0

    def __post_init__(self) -> None:
        if self.zeta <= 0.0:
            raise ValueError(f"zeta must be positive, got {self.zeta}")
        if self.omega0 <= 0.0:
            raise ValueError(f"omega0 must be positive, got {self.omega0}")


@dataclass(frozen=True)
class PlantState:
    """Angle from the lower equilibrium and angular velocity."""

    x: float = 0.0
    v: float = 0.0


def simulate_true_trajectory(
    params: PlantParams,
    u: Signal,
    x0: PlantState = PlantState(),
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> tuple[Signal, Signal]:
    """Integrate the pendulum; returns the angle and velocity on u's grid."""
    t = u.times()
    u_samples = u.samples
    two_zw = 2.0 * params.zeta * params.omega0
    w0sq = params.omega0 ** 2

    def rhs(ti: float, state: np.ndarray) -> list[float]:
        x, v = state
        ui = np.interp(ti, t, u_samples)
        return [v, ui - two_zw * v - w0sq * np.sin(x)]

    def jac(ti: float, state: np.ndarray) -> np.ndarray:
        x, _ = state
        return np.array([[0.0, 1.0], [-w0sq * np.cos(x), -two_zw]])

    sol = solve_ivp(
        rhs,
        (t[0], t[-1]),
        [x0.x, x0.v],
        method="Radau",
        t_eval=t,
        rtol=rtol,
        atol=atol,
        jac=jac,
    )
    if not sol.success:
        reached = float(sol.t[-1]) if len(sol.t) else float(t[0])
        raise IntegrationError(
            f"pendulum integration failed at t={reached:.6g}: {sol.message}", reached
        )
    if not np.all(np.isfinite(sol.y)):
        raise IntegrationError("pendulum state became non-finite", float(t[-1]))
    angle = Signal(u.t0, u.dt, sol.y[0])
    velocity = Signal(u.t0, u.dt, sol.y[1])
    return angle, velocity


def simulate_true(
    params: PlantParams,
    u: Signal,
    x0: PlantState = PlantState(),
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> Signal:
    """Measured output y = sin(x) of the pendulum driven by u."""
    angle, _ = simulate_true_trajectory(params, u, x0, rtol=rtol, atol=atol)
    return Signal(u.t0, u.dt, np.sin(angle.samples))


def mechanical_energy(params: PlantParams, angle: Signal, velocity: Signal) -> np.ndarray:
    """Energy 0.5*v**2 + omega0**2 * (1 - cos x) along a trajectory."""
    angle._check_same_grid(velocity)
    return 0.5 * velocity.samples ** 2 + params.omega0 ** 2 * (
        1.0 - np.cos(angle.samples)
    )
