"""Input generators: sinusoidal witnesses and pseudorandom piecewise-linear inputs.

Two families are supported.  Sinusoids alpha*cos(omega*t + phi) form the
witness class for the orthogonality certificates; pseudorandom inputs linearly
interpolate independent Uniform(-alpha, alpha) node values drawn at a fixed
node period, and drive residual fitting and validation.

All randomness flows through an explicit 64-bit seed feeding numpy's PCG64
generator, so identical specs regenerate bit-identical inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .signals import Grid, Signal

__all__ = ["ExcitationSpec", "generate", "sinusoid", "pseudorandom"]

SINUSOID = "sinusoid"
PSEUDORANDOM = "pseudorandom"

DEFAULT_NODE_PERIOD = 0.8


@dataclass(frozen=True)
class ExcitationSpec:
    """Description of an input signal.

    kind:        "sinusoid" or "pseudorandom"
    amplitude:   alpha > 0; sinusoid amplitude, or the half-width of the
                 uniform node distribution
    omega:       sinusoid frequency in rad/s (sinusoid only)
    phase:       sinusoid phase in [0, 2*pi) (sinusoid only)
    node_period: spacing of interpolation nodes in seconds (pseudorandom only)
    seed:        64-bit RNG seed (pseudorandom only)
    """

    kind: str
    amplitude: float
    omega: float | None = None
    phase: float = 0.0
    node_period: float = DEFAULT_NODE_PERIOD
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in (SINUSOID, PSEUDORANDOM):
            raise ValueError(f"unknown excitation kind {self.kind!r}")
        if self.amplitude <= 0.0:
            raise ValueError(f"amplitude must be positive, got {self.amplitude}")
        if self.kind == SINUSOID:
            if self.omega is None or self.omega <= 0.0:
                raise ValueError(f"sinusoid needs omega > 0, got {self.omega}")
            if not (0.0 <= self.phase < 2.0 * math.pi):
                raise ValueError(f"phase must lie in [0, 2*pi), got {self.phase}")
        else:
            if self.node_period <= 0.0:
                raise ValueError(f"node period must be positive, got {self.node_period}")
            if self.seed is None:
                raise ValueError("pseudorandom excitation needs a seed")


def sinusoid(spec: ExcitationSpec, grid: Grid) -> Signal:
    """Sample alpha*cos(omega*t + phi) exactly at the grid times."""
    if spec.kind != SINUSOID:
        raise ValueError(f"expected a sinusoid spec, got kind={spec.kind!r}")
    t = grid.times()
    return Signal(grid.t0, grid.dt, spec.amplitude * np.cos(spec.omega * t + spec.phase))


def pseudorandom(spec: ExcitationSpec, grid: Grid) -> Signal:
    """Linear interpolation of i.i.d. Uniform(-alpha, alpha) node values.

    Nodes sit at t = 0, node_period, 2*node_period, ... regardless of the
    grid's t0 (which must be >= 0).  Convexity of linear interpolation keeps
    |u(t)| <= alpha everywhere.
    """
    if spec.kind != PSEUDORANDOM:
        raise ValueError(f"expected a pseudorandom spec, got kind={spec.kind!r}")
    if grid.t0 < 0.0:
        raise ValueError("pseudorandom inputs are defined for t0 >= 0")
    t_end = grid.t0 + grid.duration
    n_nodes = int(math.floor(t_end / spec.node_period + 1e-9)) + 2
    node_times = spec.node_period * np.arange(n_nodes)
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    node_values = rng.uniform(-spec.amplitude, spec.amplitude, size=n_nodes)
    samples = np.interp(grid.times(), node_times, node_values)
    return Signal(grid.t0, grid.dt, samples)


def generate(spec: ExcitationSpec, grid: Grid) -> Signal:
    """Dispatch on the spec kind."""
    if spec.kind == SINUSOID:
        return sinusoid(spec, grid)
    return pseudorandom(spec, grid)
