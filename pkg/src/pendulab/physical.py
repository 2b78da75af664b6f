"""Linear pendulum model, its damping sensitivity, and damping estimation.

Model  x'' + 2*zeta*omega0*x' + omega0**2 * x = u(t),  y = x,  zero ICs.

omega0 is treated as known; zeta is the single free parameter.  Because the
model is linear, simulation uses the exact piecewise-linear-input
discretization from linsys (one matrix exponential per horizon), which makes
the scalar prediction-error minimization cheap and fully deterministic.

Estimation runs a coarse grid search over the requested interval to bracket
the minimum, then refines by golden-section search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .linsys import simulate_foh
from .signals import Signal, inner_product, l2_norm, mismatch_norm

__all__ = [
    "PhysicalParams",
    "ZetaFit",
    "BracketingError",
    "simulate_physical",
    "sensitivity_zeta",
    "estimate_zeta",
    "prediction_error_loss",
    "loss_derivative_zeta",
]

GRID_STEP = 0.05
GOLDEN_TOL = 1e-7


class BracketingError(RuntimeError):
    """The loss has no interior minimum in the search interval."""


@dataclass(frozen=True)
class PhysicalParams:
    zeta: float
    omega0: float = 2.0

    def __post_init__(self) -> None:
        if self.zeta <= 0.0:
            raise ValueError(f"zeta must be positive, got {self.zeta}")
        if self.omega0 <= 0.0:
            raise ValueError(f"omega0 must be positive, got {self.omega0}")

    def state_matrix(self) -> np.ndarray:
        return np.array(
            [[0.0, 1.0], [-self.omega0 ** 2, -2.0 * self.zeta * self.omega0]]
        )


def simulate_physical(params: PhysicalParams, u: Signal) -> Signal:
    """Output of the linear model from rest under input u."""
    a = params.state_matrix()
    b = np.array([0.0, 1.0])
    states = simulate_foh(a, b, u.samples, u.dt)
    return Signal(u.t0, u.dt, states[:, 0])


def sensitivity_zeta(params: PhysicalParams, u: Signal) -> Signal:
    """Forward sensitivity s = d y / d zeta of the linear model.

    Differentiating the model equation in zeta couples the sensitivity to the
    model velocity: s'' + 2*zeta*omega0*s' + omega0**2*s = -2*omega0*x'.
    Both systems integrate jointly as one 4-state LTI system, so the result
    is exact for the discretized model.
    """
    w0 = params.omega0
    two_zw = 2.0 * params.zeta * w0
    a = np.array(
        [
            [0.0, 1.0, 0.0, 0.0],
            [-w0 ** 2, -two_zw, 0.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [0.0, -2.0 * w0, -w0 ** 2, -two_zw],
        ]
    )
    b = np.array([0.0, 1.0, 0.0, 0.0])
    states = simulate_foh(a, b, u.samples, u.dt)
    return Signal(u.t0, u.dt, states[:, 2])


def prediction_error_loss(
    zeta: float, u: Signal, y: Signal, omega0: float, burn_in: float = 0.0
) -> float:
    """Squared time-average L2 error between y and the model output."""
    yhat = simulate_physical(PhysicalParams(zeta=zeta, omega0=omega0), u)
    return l2_norm(y - yhat, burn_in) ** 2


@dataclass
class ZetaFit:
    """Result of a prediction-error fit of the damping ratio."""

    zeta_hat: float
    mismatch: float
    loss: float
    search_interval: tuple[float, float]
    iterations: list[dict] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "zeta_hat": self.zeta_hat,
            "mismatch": self.mismatch,
            "loss": self.loss,
            "search_interval": list(self.search_interval),
            "iterations": self.iterations,
        }


def _golden_section(f, lo: float, hi: float, tol: float, trace: list[dict]):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    trace.append({"stage": "golden", "zeta": c, "loss": fc})
    trace.append({"stage": "golden", "zeta": d, "loss": fd})
    while (b - a) > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
            trace.append({"stage": "golden", "zeta": c, "loss": fc})
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
            trace.append({"stage": "golden", "zeta": d, "loss": fd})
    return (c, fc) if fc < fd else (d, fd)


def estimate_zeta(
    u: Signal,
    y: Signal,
    omega0: float,
    search: tuple[float, float] = (0.05, 2.0),
    burn_in: float = 0.0,
    grid_step: float = GRID_STEP,
    tol: float = GOLDEN_TOL,
) -> ZetaFit:
    """Prediction-error estimate of the damping ratio.

    A coarse grid over `search` brackets the minimum; the bracket is then
    refined by golden-section search to absolute tolerance `tol` on zeta.
    Raises BracketingError when the grid minimum sits on an endpoint of the
    search interval, in which case the caller should widen it.
    """
    u._check_same_grid(y)
    lo, hi = search
    if not (0.0 < lo < hi):
        raise ValueError(f"search interval must satisfy 0 < lo < hi, got {search}")

    def loss(z: float) -> float:
        return prediction_error_loss(z, u, y, omega0, burn_in)

    n_grid = max(int(round((hi - lo) / grid_step)), 1)
    grid = np.linspace(lo, hi, n_grid + 1)
    trace: list[dict] = []
    losses = []
    for z in grid:
        value = loss(float(z))
        losses.append(value)
        trace.append({"stage": "grid", "zeta": float(z), "loss": value})
    best = int(np.argmin(losses))
    if best == 0 or best == len(grid) - 1:
        raise BracketingError(
            f"loss minimum at search boundary zeta={grid[best]:.4g}; widen {search}"
        )
    zeta_hat, best_loss = _golden_section(
        loss, float(grid[best - 1]), float(grid[best + 1]), tol, trace
    )
    yhat = simulate_physical(PhysicalParams(zeta=zeta_hat, omega0=omega0), u)
    return ZetaFit(
        zeta_hat=zeta_hat,
        mismatch=mismatch_norm(y, yhat, burn_in),
        loss=best_loss,
        search_interval=(lo, hi),
        iterations=trace,
    )


def loss_derivative_zeta(
    zeta: float, u: Signal, y: Signal, omega0: float, burn_in: float = 0.0
) -> float:
    """Directional derivative of the squared loss via the forward sensitivity.

    d/dzeta ||y - yhat||^2 = -2 <y - yhat, d yhat / d zeta>.
    """
    params = PhysicalParams(zeta=zeta, omega0=omega0)
    yhat = simulate_physical(params, u)
    s = sensitivity_zeta(params, u)
    return -2.0 * inner_product(y - yhat, s, burn_in)
