"""Hammerstein residual class: odd Chebyshev features into a shared-denominator LTI.

The residual maps an input u through static features z_k = T_{2k+1}(u/alpha)
(odd Chebyshev polynomials, k = 1..n) and sums filtered versions of them:

    r = sum_k  N_k(s) / D(s) [z_k],
    N_k(s) = sum_{d=1..m} B[d,k] s^d,      D(s) = 1 + sum_{d=1..m} A[d] s^d.

Fixing D(0) = 1 and starting the numerators at s^1 removes the overall scale
freedom of (A, B) and pins the otherwise-marginal pole at the origin; the
span of the class is unchanged.  On a sinusoid of amplitude exactly alpha the
features are pure odd harmonics (T_j(cos t) = cos(j t)), so the steady-state
residual carries no energy at the input frequency: that structural fact is
what the certificates in `certificates` measure.

Simulation realizes all filters on one shared state chain per feature
(w, w', ..., w^(m-1) with D(s) w = z), so feature derivatives are never
formed numerically.  Fitting is separable: for fixed denominator the response
is linear in B, solved by weighted linear least squares, while a BFGS outer
loop moves the denominator through a stability-preserving log-parameterization
(products of first/second-order factors with positive coefficients).
Gradients are exact for the discrete simulation, via Frechet derivatives of
the discretization matrices.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .linsys import foh_discretize, foh_discretize_with_derivatives, simulate_foh_bank
from .signals import Signal, l2_norm, trapezoid_weights
from .signals import _burn_in_index  # shared burn-in convention

__all__ = [
    "ResidualParams",
    "ResidualFitReport",
    "ResidualParameterError",
    "ResidualFitError",
    "chebyshev_t",
    "chebyshev_feature",
    "feature_matrix",
    "simulate_residual",
    "simulate_filtered_features",
    "residual_loss_gradient",
    "fit_residual",
    "denominator_from_log_factors",
    "initial_log_factors",
    "sample_stable_params",
]


class ResidualParameterError(ValueError):
    """Residual parameters violate stability or properness requirements."""


class ResidualFitError(RuntimeError):
    """The residual optimizer diverged."""

    def __init__(self, message: str, trace: list[float] | None = None):
        super().__init__(message)
        self.trace = trace or []


# ---------------------------------------------------------------------------
# Chebyshev features


def chebyshev_t(x: np.ndarray | float, degree: int) -> np.ndarray:
    """Evaluate the Chebyshev polynomial T_degree by the stable recurrence."""
    if degree < 0:
        raise ValueError("degree must be nonnegative")
    x = np.asarray(x, dtype=float)
    if degree == 0:
        return np.ones_like(x)
    t_prev = np.ones_like(x)
    t = x.copy()
    for _ in range(degree - 1):
        t_prev, t = t, 2.0 * x * t - t_prev
    return t


def chebyshev_feature(u: Signal, alpha: float, k: int) -> Signal:
    """Odd feature z_k = T_{2k+1}(u/alpha), evaluated pointwise.

    Inputs with |u| > alpha are evaluated by the same polynomial; the cosine
    identity underlying the harmonic confinement then no longer applies.
    """
    if k < 1:
        raise ValueError(f"feature index must be >= 1, got {k}")
    if alpha <= 0.0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    return Signal(u.t0, u.dt, chebyshev_t(u.samples / alpha, 2 * k + 1))


def feature_matrix(u: Signal, alpha: float, n: int) -> np.ndarray:
    """Stack the n odd Chebyshev features as columns of an (len(u), n) array."""
    return np.column_stack(
        [chebyshev_t(u.samples / alpha, 2 * k + 1) for k in range(1, n + 1)]
    )


# ---------------------------------------------------------------------------
# Parameters


@dataclass(frozen=True)
class ResidualParams:
    """Hammerstein residual parameters.

    a[d-1] holds A_d of D(s) = 1 + sum A_d s^d; b[d-1, k-1] holds B_{d,k} of
    the k-th numerator N_k(s) = sum B_{d,k} s^d.
    """

    alpha: float
    m: int
    n: int
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self) -> None:
        if self.alpha <= 0.0:
            raise ResidualParameterError(f"alpha must be positive, got {self.alpha}")
        if self.m < 1 or self.n < 1:
            raise ResidualParameterError(f"need m >= 1 and n >= 1, got {self.m}, {self.n}")
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if a.shape != (self.m,):
            raise ResidualParameterError(f"a must have shape ({self.m},), got {a.shape}")
        if b.shape != (self.m, self.n):
            raise ResidualParameterError(
                f"b must have shape ({self.m}, {self.n}), got {b.shape}"
            )
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        self._validate_dynamics()

    def _validate_dynamics(self) -> None:
        p = self.denominator_degree()
        if np.any(self.b[p:, :] != 0.0):
            raise ResidualParameterError(
                f"numerator degree exceeds denominator degree {p}: improper filter"
            )
        roots = self.denominator_roots()
        if np.any(roots.real >= 0.0):
            raise ResidualParameterError(
                f"denominator is not Hurwitz; roots {np.round(roots, 6)}"
            )

    def denominator_degree(self) -> int:
        nz = np.nonzero(self.a)[0]
        if len(nz) == 0:
            raise ResidualParameterError("denominator has no dynamic terms (D = 1)")
        return int(nz[-1]) + 1

    def denominator_roots(self) -> np.ndarray:
        p = self.denominator_degree()
        # descending coefficients A_p .. A_1, 1
        return np.roots(np.concatenate([self.a[:p][::-1], [1.0]]))

    @classmethod
    def zero(cls, alpha: float, m: int, n: int, cutoff: float = 4.0) -> "ResidualParams":
        """The zero model: B = 0 with a stable default denominator."""
        a = denominator_from_log_factors(initial_log_factors(m, cutoff))
        return cls(alpha=alpha, m=m, n=n, a=a, b=np.zeros((m, n)))

    def to_json_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "m": self.m,
            "n": self.n,
            "A": self.a.tolist(),
            "B": self.b.tolist(),
            "convention": (
                "D(s) = 1 + sum_{d=1..m} A[d-1] s^d (constant term fixed to 1); "
                "N_k(s) = sum_{d=1..m} B[d-1][k-1] s^d; features T_{2k+1}(u/alpha)"
            ),
        }

    @classmethod
    def from_json_dict(cls, payload: dict) -> "ResidualParams":
        return cls(
            alpha=float(payload["alpha"]),
            m=int(payload["m"]),
            n=int(payload["n"]),
            a=np.asarray(payload["A"], dtype=float),
            b=np.asarray(payload["B"], dtype=float),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ResidualParams":
        return cls.from_json_dict(json.loads(text))


# ---------------------------------------------------------------------------
# Stability-preserving denominator parameterization


def _factor_sizes(m: int) -> list[int]:
    """Split order m into first/second-order Hurwitz factors."""
    sizes = [1] * (m % 2) + [2] * (m // 2)
    return sizes


def denominator_from_log_factors(psi: np.ndarray) -> np.ndarray:
    """Map unconstrained psi to A_1..A_m of a Hurwitz D with D(0) = 1.

    tau = exp(psi) fills factors (1 + tau*s) and (1 + tau_a*s + tau_b*s^2);
    positive coefficients make each factor Hurwitz, hence their product too.
    """
    psi = np.asarray(psi, dtype=float)
    tau = np.exp(psi)
    poly = np.array([1.0])
    pos = 0
    for size in _factor_sizes(len(psi)):
        factor = np.concatenate([[1.0], tau[pos : pos + size]])
        poly = np.convolve(poly, factor)
        pos += size
    return poly[1:]  # drop the constant 1


def denominator_jacobian(psi: np.ndarray) -> np.ndarray:
    """d A / d psi, shape (m, m), for the map above."""
    psi = np.asarray(psi, dtype=float)
    m = len(psi)
    tau = np.exp(psi)
    sizes = _factor_sizes(m)
    factors = []
    pos = 0
    for size in sizes:
        factors.append(np.concatenate([[1.0], tau[pos : pos + size]]))
        pos += size
    jac = np.zeros((m, m))
    pos = 0
    for fi, size in enumerate(sizes):
        others = np.array([1.0])
        for fj, factor in enumerate(factors):
            if fj != fi:
                others = np.convolve(others, factor)
        for local in range(size):
            dfactor = np.zeros(size + 1)
            dfactor[local + 1] = 1.0
            dpoly = np.convolve(others, dfactor)
            # chain rule through tau = exp(psi)
            jac[:, pos + local] = dpoly[1:] * tau[pos + local]
        pos += size
    return jac


def initial_log_factors(m: int, cutoff: float = 4.0) -> np.ndarray:
    """Log factor parameters realizing roughly D(s) = (1 + s/cutoff)^m.

    Factors are detuned by a few percent so the starting point is not exactly
    permutation-symmetric, which would pin quasi-Newton iterates to the
    symmetric subspace.
    """
    if cutoff <= 0.0:
        raise ValueError(f"cutoff must be positive, got {cutoff}")
    psi = []
    for i, size in enumerate(_factor_sizes(m)):
        wc = cutoff * (1.0 + 0.03 * i)
        if size == 1:
            psi.append(math.log(1.0 / wc))
        else:
            psi.extend([math.log(2.0 / wc), math.log(1.0 / wc ** 2)])
    return np.asarray(psi)


def sample_stable_params(
    alpha: float,
    m: int,
    n: int,
    rng: np.random.Generator,
    log_factor_range: float = 1.0,
    b_scale: float = 1.0,
) -> ResidualParams:
    """Draw random stable residual parameters with unit-scale coefficients."""
    psi = rng.uniform(-log_factor_range, log_factor_range, size=m)
    a = denominator_from_log_factors(psi)
    b = b_scale * rng.standard_normal((m, n))
    return ResidualParams(alpha=alpha, m=m, n=n, a=a, b=b)


# ---------------------------------------------------------------------------
# Simulation


def _core_realization(a_vec: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Controller-canonical chain for w with D(s) w = z.

    State W = (w, w', ..., w^(p-1)); returns (A_c, b_c, atil) where atil is
    (1, A_1, ..., A_p).
    """
    a_vec = np.asarray(a_vec, dtype=float)
    nz = np.nonzero(a_vec)[0]
    if len(nz) == 0:
        raise ResidualParameterError("denominator has no dynamic terms (D = 1)")
    p = int(nz[-1]) + 1
    atil = np.concatenate([[1.0], a_vec[:p]])
    ac = np.zeros((p, p))
    for i in range(p - 1):
        ac[i, i + 1] = 1.0
    ac[p - 1, :] = -atil[:p] / atil[p]
    bc = np.zeros(p)
    bc[p - 1] = 1.0 / atil[p]
    return ac, bc, atil


def _basis_from_states(
    z: np.ndarray, states: np.ndarray, atil: np.ndarray
) -> np.ndarray:
    """Assemble g[:, d-1, k] = (s^d / D)[z_k] for d = 1..p from chain states."""
    n_steps, p, q = states.shape
    g = np.empty((n_steps, p, q))
    g[:, : p - 1, :] = states[:, 1:, :]
    # top derivative from the chain ODE itself
    g[:, p - 1, :] = (z - np.einsum("j,tjq->tq", atil[:p], states)) / atil[p]
    return g


def filtered_feature_basis(a_vec: np.ndarray, z: np.ndarray, dt: float) -> np.ndarray:
    """Responses (s^d / D)[z_k] for d = 1..p on the grid, shape (n, p, q)."""
    z = np.asarray(z, dtype=float)
    if z.ndim == 1:
        z = z[:, None]
    ac, bc, atil = _core_realization(a_vec)
    states = simulate_foh_bank(ac, bc, z, dt)
    return _basis_from_states(z, states, atil)


def simulate_filtered_features(
    a_vec: np.ndarray, b_mat: np.ndarray, z: np.ndarray, dt: float
) -> np.ndarray:
    """Sum of N_k/D applied to columns of z; b_mat has shape (p_or_more, q)."""
    g = filtered_feature_basis(a_vec, z, dt)
    p = g.shape[1]
    if np.any(np.asarray(b_mat)[p:, :] != 0.0):
        raise ResidualParameterError("numerator degree exceeds denominator degree")
    return np.einsum("tdq,dq->t", g, np.asarray(b_mat, dtype=float)[:p, :])


def simulate_residual(params: ResidualParams, u: Signal) -> Signal:
    """Residual model output from rest under input u."""
    z = feature_matrix(u, params.alpha, params.n)
    r = simulate_filtered_features(params.a, params.b, z, u.dt)
    return Signal(u.t0, u.dt, r)


# ---------------------------------------------------------------------------
# Loss and exact discrete gradient


def _loss_weights(sig: Signal, burn_in: float) -> tuple[int, np.ndarray]:
    i0 = _burn_in_index(sig, burn_in)
    count = len(sig.samples) - i0
    w = trapezoid_weights(count, sig.dt) / ((count - 1) * sig.dt)
    return i0, w


def residual_loss_gradient(
    params: ResidualParams,
    u: Signal,
    target: Signal,
    burn_in: float = 0.0,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Loss ||target - r||^2 and its exact gradient in (A, B).

    The gradient differentiates the discrete simulation itself (Frechet
    derivatives of the discretization matrices plus forward sensitivity
    recursions), so it matches finite differences of the loss to near
    machine precision.
    """
    u._check_same_grid(target)
    m, n = params.m, params.n
    if params.denominator_degree() != m:
        raise ResidualParameterError("gradient requires a full-degree denominator")
    z = feature_matrix(u, params.alpha, params.n)
    dt = u.dt
    ac, bc, atil = _core_realization(params.a)

    # directions: one per denominator coefficient A_1..A_m
    da = np.zeros((m, m, m))
    db = np.zeros((m, m, 1))
    for c in range(1, m):  # A_c, c < m: only the chain's last row moves
        da[c - 1, m - 1, c] = -1.0 / atil[m]
    da[m - 1, m - 1, :] = atil[:m] / atil[m] ** 2  # A_m: rescales the row
    db[m - 1, m - 1, 0] = -1.0 / atil[m] ** 2

    phi, g0, g1, dphi, dg0, dg1 = foh_discretize_with_derivatives(ac, bc, da, db, dt)
    g0, g1 = g0[:, 0], g1[:, 0]
    dg0, dg1 = dg0[:, :, 0], dg1[:, :, 0]

    n_steps, q = z.shape
    states = np.zeros((n_steps, m, q))
    forcing = g0[None, :, None] * z[:-1, None, :] + g1[None, :, None] * z[1:, None, :]
    for j in range(n_steps - 1):
        states[j + 1] = phi @ states[j] + forcing[j]

    # forward sensitivities of the chain states in each A-direction
    sens_forcing = np.einsum("cab,tbq->tcaq", dphi, states[:-1])
    sens_forcing += dg0[None, :, :, None] * z[:-1, None, None, :]
    sens_forcing += dg1[None, :, :, None] * z[1:, None, None, :]
    # flatten (dir, q) so the whole sensitivity bank advances per step
    sens_forcing = np.ascontiguousarray(
        sens_forcing.transpose(0, 2, 1, 3).reshape(n_steps - 1, m, m * q)
    )
    sens = np.zeros((n_steps, m, m * q))
    for j in range(n_steps - 1):
        sens[j + 1] = phi @ sens[j] + sens_forcing[j]
    sens = sens.reshape(n_steps, m, m, q).transpose(0, 2, 1, 3)  # (t, dir, state, q)

    g = _basis_from_states(z, states, atil)
    r = np.einsum("tdq,dq->t", g, params.b)

    i0, w = _loss_weights(u, burn_in)
    e = target.samples[i0:] - r[i0:]
    loss = float(np.dot(w, e * e))

    we = w * e
    grad_b = -2.0 * np.einsum("t,tdq->dq", we, g[i0:])

    # dg in each direction: chain states for d <= m-1, top derivative for d = m
    dg = np.empty((n_steps, m, m, q))  # (t, dir, d, q)
    dg[:, :, : m - 1, :] = sens[:, :, 1:, :]
    chain_top = -np.einsum("j,tcjq->tcq", atil[:m], sens) / atil[m]
    dg[:, :, m - 1, :] = chain_top
    for c in range(1, m):
        dg[:, c - 1, m - 1, :] -= states[:, c, :] / atil[m]
    dg[:, m - 1, m - 1, :] -= g[:, m - 1, :] / atil[m]

    dr = np.einsum("tcdq,dq->tc", dg, params.b)
    grad_a = -2.0 * np.einsum("t,tc->c", we, dr[i0:])
    return loss, grad_a, grad_b


# ---------------------------------------------------------------------------
# Variable-projection fit


@dataclass
class ResidualFitReport:
    """Diagnostics of a residual fit."""

    loss_trace: list[float]
    final_loss: float
    gradient_norm: float
    n_outer: int
    termination: str
    target_mismatch: float
    hybrid_mismatch: float | None = None
    message: str = ""

    def to_json_dict(self) -> dict:
        return {
            "loss_trace": self.loss_trace,
            "final_loss": self.final_loss,
            "gradient_norm": self.gradient_norm,
            "n_outer": self.n_outer,
            "termination": self.termination,
            "target_mismatch": self.target_mismatch,
            "hybrid_mismatch": self.hybrid_mismatch,
            "message": self.message,
        }


def _solve_b(
    g: np.ndarray, target: np.ndarray, i0: int, w: np.ndarray
) -> tuple[np.ndarray, float]:
    """Weighted linear least squares for B given the basis responses."""
    n_steps, p, q = g.shape
    cols = g[i0:].reshape(len(w), p * q)
    sw = np.sqrt(w)
    scale = np.linalg.norm(cols * sw[:, None], axis=0)
    scale[scale == 0.0] = 1.0
    lhs = cols * sw[:, None] / scale[None, :]
    rhs = target[i0:] * sw
    sol, *_ = np.linalg.lstsq(lhs, rhs, rcond=None)
    bvec = sol / scale
    resid = rhs - lhs @ sol
    return bvec.reshape(p, q), float(np.dot(resid, resid))


def fit_residual(
    u: Signal,
    residual_target: Signal,
    alpha: float,
    m: int,
    n: int,
    burn_in: float = 0.0,
    init_cutoff: float = 4.0,
    max_outer: int = 500,
    gtol: float = 1e-8,
    reference: Signal | None = None,
) -> tuple[ResidualParams, ResidualFitReport]:
    """Prediction-error fit of the residual to residual_target = y - yhat.

    Separable strategy: the numerators B enter linearly and are eliminated by
    weighted least squares at every denominator candidate; BFGS moves the
    denominator's stability-preserving log parameters.  The outer gradient is
    the exact discrete-loss gradient composed with the parameterization
    Jacobian (the eliminated B contributes nothing at its optimum).

    `reference` (the measured output y) is only used to report the hybrid
    mismatch ||target - r|| / ||y||.
    """
    u._check_same_grid(residual_target)
    i0, w = _loss_weights(u, burn_in)
    z = feature_matrix(u, alpha, n)
    target = residual_target.samples

    trace: list[float] = []
    last: dict = {"psi": None, "loss": None}

    def fun_and_grad(psi: np.ndarray) -> tuple[float, np.ndarray]:
        a_vec = denominator_from_log_factors(psi)
        if not np.all(np.isfinite(a_vec)):
            return 1e30, np.zeros_like(psi)
        g = filtered_feature_basis(a_vec, z, u.dt)
        b_mat, loss = _solve_b(g, target, i0, w)
        params = ResidualParams(alpha=alpha, m=m, n=n, a=a_vec, b=b_mat)
        loss2, grad_a, _ = residual_loss_gradient(params, u, residual_target, burn_in)
        grad_psi = denominator_jacobian(psi).T @ grad_a
        last["psi"] = np.array(psi)
        last["loss"] = loss2
        return loss2, grad_psi

    def record(psi: np.ndarray) -> None:
        if last["psi"] is not None and np.array_equal(last["psi"], psi):
            trace.append(last["loss"])
        else:
            trace.append(fun_and_grad(psi)[0])

    psi0 = initial_log_factors(m, init_cutoff)
    trace.append(fun_and_grad(psi0)[0])
    result = minimize(
        fun_and_grad,
        psi0,
        jac=True,
        method="BFGS",
        callback=record,
        options={"gtol": gtol, "maxiter": max_outer},
    )
    psi = result.x
    if not np.all(np.isfinite(psi)):
        raise ResidualFitError("optimizer produced non-finite parameters", trace)

    a_vec = denominator_from_log_factors(psi)
    g = filtered_feature_basis(a_vec, z, u.dt)
    b_mat, _ = _solve_b(g, target, i0, w)
    params = ResidualParams(alpha=alpha, m=m, n=n, a=a_vec, b=b_mat)
    loss, grad_a, _ = residual_loss_gradient(params, u, residual_target, burn_in)
    if not math.isfinite(loss):
        raise ResidualFitError("residual fit diverged to a non-finite loss", trace)
    grad_norm = float(np.max(np.abs(denominator_jacobian(psi).T @ grad_a)))

    if grad_norm < gtol:
        termination = "gradient"
    elif result.nit >= max_outer:
        termination = "maxiter"
    else:
        termination = "stalled"

    r = simulate_residual(params, u)
    err = residual_target - r
    target_norm = l2_norm(residual_target, burn_in)
    target_mismatch = l2_norm(err, burn_in) / target_norm if target_norm > 0 else 0.0
    hybrid = None
    if reference is not None:
        hybrid = l2_norm(err, burn_in) / l2_norm(reference, burn_in)
    report = ResidualFitReport(
        loss_trace=trace,
        final_loss=loss,
        gradient_norm=grad_norm,
        n_outer=int(result.nit),
        termination=termination,
        target_mismatch=target_mismatch,
        hybrid_mismatch=hybrid,
        message=str(result.message),
    )
    return params, report
