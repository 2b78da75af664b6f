"""Exact discretization of LTI systems driven by piecewise-linear inputs.

Inputs in this project are either piecewise linear by construction
(pseudorandom node interpolation) or smooth and finely sampled (sinusoids,
Chebyshev features), and the convention throughout is to interpolate sampled
inputs linearly between grid points.  Under that convention the continuous
response of x' = A x + B u can be stepped exactly:

    x[j+1] = Phi x[j] + G0 u[j] + G1 u[j+1]

with Phi, G0, G1 obtained from a single matrix exponential of the Van Loan
block matrix [[A, B, 0], [0, 0, I], [0, 0, 0]] * dt.  The companion routine
also returns directional derivatives of (Phi, G0, G1) with respect to entries
of (A, B) via the Frechet derivative of expm, which keeps parameter gradients
of simulated trajectories exact for the discrete map.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import expm, expm_frechet

__all__ = [
    "foh_discretize",
    "foh_discretize_with_derivatives",
    "simulate_foh",
    "simulate_foh_bank",
]


def _vanloan_blocks(a: np.ndarray, b: np.ndarray, dt: float) -> np.ndarray:
    nx, nu = b.shape
    m = np.zeros((nx + 2 * nu, nx + 2 * nu))
    m[:nx, :nx] = a
    m[:nx, nx : nx + nu] = b
    m[nx : nx + nu, nx + nu :] = np.eye(nu)
    return m * dt


def _split_blocks(em: np.ndarray, nx: int, nu: int, dt: float):
    phi = em[:nx, :nx]
    ga = em[:nx, nx : nx + nu]  # integral of expm(A(dt-s)) B ds
    gb = em[:nx, nx + nu :]  # integral of expm(A(dt-s)) B s ds
    g1 = gb / dt
    g0 = ga - g1
    return phi, g0, g1


def foh_discretize(a: np.ndarray, b: np.ndarray, dt: float):
    """Return (Phi, G0, G1) for the exact piecewise-linear-input step."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if b.ndim == 1:
        b = b[:, None]
    nx, nu = b.shape
    em = expm(_vanloan_blocks(a, b, dt))
    return _split_blocks(em, nx, nu, dt)


def foh_discretize_with_derivatives(
    a: np.ndarray,
    b: np.ndarray,
    da: np.ndarray,
    db: np.ndarray,
    dt: float,
):
    """(Phi, G0, G1) plus their derivatives along directions (da[i], db[i]).

    da has shape (ndir, nx, nx) and db shape (ndir, nx, nu); the returned
    dPhi/dG0/dG1 stack the corresponding directional derivatives.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if b.ndim == 1:
        b = b[:, None]
    nx, nu = b.shape
    m = _vanloan_blocks(a, b, dt)
    ndir = da.shape[0]
    dphi = np.zeros((ndir, nx, nx))
    dg0 = np.zeros((ndir, nx, nu))
    dg1 = np.zeros((ndir, nx, nu))
    phi = g0 = g1 = None
    for i in range(ndir):
        dm = np.zeros_like(m)
        dm[:nx, :nx] = da[i] * dt
        dbi = db[i]
        if dbi.ndim == 1:
            dbi = dbi[:, None]
        dm[:nx, nx : nx + nu] = dbi * dt
        em, dem = expm_frechet(m, dm)
        if phi is None:
            phi, g0, g1 = _split_blocks(em, nx, nu, dt)
        dphi[i], dg0[i], dg1[i] = _split_blocks(dem, nx, nu, dt)
    return phi, g0, g1, dphi, dg0, dg1


def simulate_foh(
    a: np.ndarray,
    b: np.ndarray,
    u: np.ndarray,
    dt: float,
    x0: np.ndarray | None = None,
) -> np.ndarray:
    """Simulate x' = A x + B u on a uniform grid; returns states (n, nx).

    u has shape (n,) for single-input systems or (n, nu).
    """
    u = np.asarray(u, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    phi, g0, g1 = foh_discretize(a, b, dt)
    n = u.shape[0]
    nx = phi.shape[0]
    x = np.zeros((n, nx))
    if x0 is not None:
        x[0] = x0
    forcing = u[:-1] @ g0.T + u[1:] @ g1.T
    for j in range(n - 1):
        x[j + 1] = phi @ x[j] + forcing[j]
    return x


def simulate_foh_bank(
    a: np.ndarray,
    b: np.ndarray,
    z: np.ndarray,
    dt: float,
) -> np.ndarray:
    """Drive `q` independent copies of one SISO system x' = A x + b z_k.

    z has shape (n, q); returns states of shape (n, nx, q).  All copies share
    the discretized (Phi, G0, G1), so the whole bank advances with one small
    matmul per step.
    """
    z = np.asarray(z, dtype=float)
    if z.ndim == 1:
        z = z[:, None]
    phi, g0, g1 = foh_discretize(a, b, dt)
    g0 = g0[:, 0]
    g1 = g1[:, 0]
    n, q = z.shape
    nx = phi.shape[0]
    x = np.zeros((n, nx, q))
    forcing = g0[None, :, None] * z[:-1, None, :] + g1[None, :, None] * z[1:, None, :]
    for j in range(n - 1):
        x[j + 1] = phi @ x[j] + forcing[j]
    return x
