"""Uniformly sampled signals, time-average inner products and harmonic probes.

Everything downstream (simulation, estimation, certificates) works with
single-channel signals on a shared uniform grid.  The central quantity is the
time-average inner product

    <a, b> = (1/T') * integral of a(t) b(t) over [t0 + burn_in, t0 + duration]

evaluated by the trapezoidal rule, which is spectrally accurate for periodic
integrands sampled over whole periods.  Infinite-horizon statements are
approximated at finite horizon; callers compensate with decay checks over a
ladder of horizons.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Sequence

import numpy as np

__all__ = [
    "Grid",
    "Signal",
    "HarmonicEntry",
    "HarmonicSpectrum",
    "GridMismatchError",
    "DegenerateReferenceError",
    "trapezoid_weights",
    "inner_product",
    "l2_norm",
    "mismatch_norm",
    "harmonic_content",
]


class GridMismatchError(ValueError):
    """Two signals do not share t0, dt and sample count."""


class DegenerateReferenceError(ValueError):
    """The reference signal of a mismatch norm has zero norm."""


@dataclass(frozen=True)
class Grid:
    """Uniform sampling grid: times t0 + i*dt for i in range(count)."""

    t0: float
    dt: float
    count: int

    def __post_init__(self) -> None:
        if self.dt <= 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.count < 2:
            raise ValueError(f"need at least 2 samples, got {self.count}")

    @classmethod
    def from_horizon(cls, horizon: float, dt: float, t0: float = 0.0) -> "Grid":
        """Grid covering [t0, t0 + horizon]; duration matches within one dt."""
        count = int(round(horizon / dt)) + 1
        return cls(t0=t0, dt=dt, count=count)

    @property
    def duration(self) -> float:
        return (self.count - 1) * self.dt

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.count)


@dataclass(frozen=True, eq=False)
class Signal:
    """Real-valued time series on a uniform grid.

    Immutable: the sample array is made read-only at construction so signals
    can be shared freely across threads.
    """

    t0: float
    dt: float
    samples: np.ndarray

    def __post_init__(self) -> None:
        samples = np.ascontiguousarray(self.samples, dtype=float)
        if samples.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        if samples.shape[0] < 2:
            raise ValueError("need at least 2 samples")
        if self.dt <= 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @classmethod
    def from_values(cls, grid: Grid, values: Sequence[float] | np.ndarray) -> "Signal":
        values = np.asarray(values, dtype=float)
        if values.shape != (grid.count,):
            raise ValueError(f"expected {grid.count} samples, got {values.shape}")
        return cls(t0=grid.t0, dt=grid.dt, samples=values)

    @property
    def grid(self) -> Grid:
        return Grid(self.t0, self.dt, len(self.samples))

    @property
    def duration(self) -> float:
        return (len(self.samples) - 1) * self.dt

    def times(self) -> np.ndarray:
        return self.grid.times()

    # -- arithmetic on a shared grid -------------------------------------

    def _check_same_grid(self, other: "Signal") -> None:
        if (
            self.t0 != other.t0
            or self.dt != other.dt
            or len(self.samples) != len(other.samples)
        ):
            raise GridMismatchError(
                f"grids differ: (t0={self.t0}, dt={self.dt}, n={len(self.samples)}) vs "
                f"(t0={other.t0}, dt={other.dt}, n={len(other.samples)})"
            )

    def __add__(self, other: "Signal") -> "Signal":
        self._check_same_grid(other)
        return Signal(self.t0, self.dt, self.samples + other.samples)

    def __sub__(self, other: "Signal") -> "Signal":
        self._check_same_grid(other)
        return Signal(self.t0, self.dt, self.samples - other.samples)

    def __neg__(self) -> "Signal":
        return Signal(self.t0, self.dt, -self.samples)

    def __mul__(self, scale: float) -> "Signal":
        return Signal(self.t0, self.dt, self.samples * float(scale))

    __rmul__ = __mul__

    def __iter__(self) -> Iterator[float]:
        return iter(self.samples)

    def __len__(self) -> int:
        return len(self.samples)

    # -- serialization ----------------------------------------------------

    def to_csv(self) -> str:
        """Render as `t,value` CSV with 15 significant digits."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t", "value"])
        for t, v in zip(self.times(), self.samples):
            writer.writerow([f"{t:.15g}", f"{v:.15g}"])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Signal":
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        if [h.strip() for h in header] != ["t", "value"]:
            raise ValueError(f"expected header 't,value', got {header!r}")
        t: list[float] = []
        v: list[float] = []
        for row in reader:
            if not row:
                continue
            t.append(float(row[0]))
            v.append(float(row[1]))
        times = np.asarray(t)
        if len(times) < 2:
            raise ValueError("need at least 2 samples")
        steps = np.diff(times)
        dt = float(np.median(steps))
        if not np.allclose(steps, dt, rtol=1e-9, atol=1e-12):
            raise ValueError("time column is not uniformly spaced")
        return cls(t0=float(times[0]), dt=dt, samples=np.asarray(v))

    def to_json_dict(self) -> dict:
        return {"t0": self.t0, "dt": self.dt, "samples": self.samples.tolist()}

    @classmethod
    def from_json_dict(cls, payload: dict) -> "Signal":
        return cls(
            t0=float(payload["t0"]),
            dt=float(payload["dt"]),
            samples=np.asarray(payload["samples"], dtype=float),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json(cls, text: str) -> "Signal":
        return cls.from_json_dict(json.loads(text))


class HarmonicEntry(NamedTuple):
    k: int
    magnitude: float
    phase: float


@dataclass(frozen=True)
class HarmonicSpectrum:
    """Projections of a signal onto harmonics of a base frequency.

    Entry k holds (M_k, phi_k) such that the component at k*base_omega is
    M_k * cos(k * base_omega * t + phi_k); k = 0 is the window mean.
    """

    base_omega: float
    entries: tuple[HarmonicEntry, ...]

    def magnitude(self, k: int) -> float:
        for entry in self.entries:
            if entry.k == k:
                return entry.magnitude
        raise KeyError(f"no harmonic {k} in spectrum")

    def phase(self, k: int) -> float:
        for entry in self.entries:
            if entry.k == k:
                return entry.phase
        raise KeyError(f"no harmonic {k} in spectrum")


def trapezoid_weights(count: int, dt: float) -> np.ndarray:
    """Trapezoidal quadrature weights on a uniform grid of `count` points."""
    if count < 2:
        raise ValueError("need at least 2 samples")
    w = np.full(count, dt)
    w[0] = 0.5 * dt
    w[-1] = 0.5 * dt
    return w


def _burn_in_index(sig: Signal, burn_in: float) -> int:
    if burn_in < 0.0:
        raise ValueError(f"burn_in must be nonnegative, got {burn_in}")
    if burn_in >= sig.duration:
        raise ValueError(
            f"burn_in {burn_in} must be shorter than the duration {sig.duration}"
        )
    # snap to the grid; tolerate representation noise in burn_in/dt
    i0 = int(math.ceil(burn_in / sig.dt - 1e-9))
    if len(sig.samples) - i0 < 2:
        raise ValueError("fewer than 2 samples remain after burn-in")
    return i0


def inner_product(a: Signal, b: Signal, burn_in: float = 0.0) -> float:
    """Time-average inner product (1/T') * integral(a*b) after burn-in."""
    a._check_same_grid(b)
    i0 = _burn_in_index(a, burn_in)
    x = a.samples[i0:]
    y = b.samples[i0:]
    w = trapezoid_weights(len(x), a.dt)
    window = (len(x) - 1) * a.dt
    return float(np.dot(w, x * y) / window)


def l2_norm(a: Signal, burn_in: float = 0.0) -> float:
    """Root-mean-square norm induced by the time-average inner product."""
    return math.sqrt(max(inner_product(a, a, burn_in), 0.0))


def mismatch_norm(reference: Signal, candidate: Signal, burn_in: float = 0.0) -> float:
    """RMS of (reference - candidate) normalized by the RMS of reference.

    Returned as a fraction; multiply by 100 to quote percent.
    """
    denom = l2_norm(reference, burn_in)
    if denom == 0.0:
        raise DegenerateReferenceError("reference signal has zero norm")
    return l2_norm(reference - candidate, burn_in) / denom


def harmonic_content(
    a: Signal, base_omega: float, max_k: int, burn_in: float = 0.0
) -> HarmonicSpectrum:
    """Project onto cos/sin at integer multiples of base_omega.

    Requires the post-burn-in window to contain at least five full periods of
    the base frequency.  Magnitudes are exact (to quadrature accuracy) on
    whole-period windows; otherwise leakage decays as O(1/T).
    """
    if base_omega <= 0.0:
        raise ValueError(f"base_omega must be positive, got {base_omega}")
    if max_k < 1:
        raise ValueError(f"max_k must be >= 1, got {max_k}")
    i0 = _burn_in_index(a, burn_in)
    window = (len(a.samples) - 1 - i0) * a.dt
    period = 2.0 * math.pi / base_omega
    if window < 5.0 * period:
        raise ValueError(
            f"window {window:.3g} s holds fewer than 5 periods of omega={base_omega}"
        )
    t = a.times()
    entries = []
    for k in range(0, max_k + 1):
        if k == 0:
            mean = inner_product(a, Signal(a.t0, a.dt, np.ones_like(t)), burn_in)
            mag, phi = abs(mean), (0.0 if mean >= 0.0 else math.pi)
        else:
            ck = Signal(a.t0, a.dt, np.cos(k * base_omega * t))
            sk = Signal(a.t0, a.dt, np.sin(k * base_omega * t))
            u = 2.0 * inner_product(a, ck, burn_in)
            v = 2.0 * inner_product(a, sk, burn_in)
            mag = math.hypot(u, v)
            phi = math.atan2(-v, u) % (2.0 * math.pi)
        entries.append(HarmonicEntry(k=k, magnitude=mag, phase=phi))
    return HarmonicSpectrum(base_omega=base_omega, entries=tuple(entries))
