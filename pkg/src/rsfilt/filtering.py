"""Optimal filters for the weighted exponential criterion.

``leg_filter`` computes the estimate sequence minimizing
``E mu exp{(mu/2) sum_t Q_t (X_t - h_t)^2}`` over causal filters, together
with the auxiliary processes that factorize the conditional Laplace
transform. All scalar routines accept a batch of observation paths: ``Y``
may have any leading shape as long as its last axis is the horizon.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, DomainError, InconsistentRecursion, SingularInnovationMatrix
from .model import GaussianModel, RiskSpec, _as_sequence
from .volterra import (
    VolterraSolution,
    ar1_riccati,
    ma1_gamma,
    solve_volterra,
    solve_volterra_correlated,
    solve_volterra_matrix,
)

ZTILDE_RAISE_TOL = 1e-9


@dataclass(frozen=True)
class FilterRun:
    """Filter output along one path (or a batch of paths on leading axes).

    ``Z_h``, ``Z_tilde``, ``gamma_tilde`` and ``risk`` are populated by the
    scalar routines; vector-valued runs carry the estimate sequence only.
    """

    h_bar: np.ndarray
    Z_h: np.ndarray | None = None
    Z_tilde: np.ndarray | None = None
    gamma_tilde: np.ndarray | None = None
    gamma_bar_diag: np.ndarray | None = None
    risk: float | None = None

    def rows(self, Y):
        """Per-step rows (t, Y, h_bar, Z_h, Z_tilde, gamma_bar, gamma_tilde) for CSV output."""
        T = self.h_bar.shape[-1]
        out = []
        for t in range(T):
            out.append(
                (
                    t + 1,
                    float(Y[t]),
                    float(self.h_bar[t]),
                    float(self.Z_h[t]) if self.Z_h is not None else None,
                    float(self.Z_tilde[t]) if self.Z_tilde is not None else None,
                    float(self.gamma_bar_diag[t]) if self.gamma_bar_diag is not None else None,
                    float(self.gamma_tilde[t]) if self.gamma_tilde is not None else None,
                )
            )
        return out

    def to_dict(self, Y=None) -> dict:
        out = {
            "h_bar": np.asarray(self.h_bar).tolist(),
            "Z_h": None if self.Z_h is None else np.asarray(self.Z_h).tolist(),
            "Z_tilde": None if self.Z_tilde is None else np.asarray(self.Z_tilde).tolist(),
            "gamma_tilde": None if self.gamma_tilde is None else np.asarray(self.gamma_tilde).tolist(),
            "gamma_bar": None if self.gamma_bar_diag is None else np.asarray(self.gamma_bar_diag).tolist(),
            "risk": self.risk,
        }
        if Y is not None:
            out["Y"] = np.asarray(Y).tolist()
        return out


def _check_horizon(Y, T):
    Y = np.asarray(Y, dtype=float)
    if Y.shape[-1] != T:
        raise DimensionMismatch(f"observation path has {Y.shape[-1]} steps, model has {T}")
    return Y


def _scalar_solution(model, risk, solution) -> VolterraSolution:
    if solution is None:
        solution = solve_volterra(model, risk)
    return solution.require_feasible()


def optimal_risk(solution: VolterraSolution, risk: RiskSpec, A) -> float:
    """Closed-form optimal value mu * prod_t [(1+S_t g_t)/(1+A_t^2 g_t)]^(-1/2)."""
    if risk.mu == 0.0:
        raise DomainError("the exponential criterion degenerates at mu = 0; no risk value is defined")
    solution.require_feasible()
    A = np.asarray(A, dtype=float)
    g = solution.diag
    log_prod = -0.5 * (np.log1p(solution.S * g) - np.log1p(A**2 * g)).sum()
    return risk.mu * float(np.exp(log_prod))


def _hbar_recursion(gam, A, m, Y):
    """Forward recursion for the optimal estimate; Y may be batched."""
    T = gam.shape[0]
    h = np.zeros(Y.shape)
    diag = np.diagonal(gam)
    for t in range(T):
        acc = m[t]
        if t > 0:
            resid = Y[..., :t] - A[:t] * h[..., :t]
            acc = acc + resid @ (A[:t] * gam[t, :t])
        h[..., t] = (acc + A[t] * diag[t] * Y[..., t]) / (1.0 + A[t] ** 2 * diag[t])
    return h


def leg_filter(model: GaussianModel, risk: RiskSpec, Y, solution: VolterraSolution | None = None) -> FilterRun:
    """Optimal filter for the exponential criterion on a scalar model.

    Pass a precomputed feasible ``solution`` to amortize the covariance
    recursion across many paths.
    """
    model._require_scalar()
    sol = _scalar_solution(model, risk, solution)
    Y = _check_horizon(Y, model.horizon)
    A, m = model.gains1, model.mean1
    h = _hbar_recursion(sol.gamma_bar, A, m, Y)
    Z = z_h(model, risk, Y, h, solution=sol)
    g = sol.diag
    gamma_tilde = g / (1.0 + A**2 * g)
    risk_value = optimal_risk(sol, risk, A) if risk.mu != 0.0 else None
    return FilterRun(
        h_bar=h,
        Z_h=Z,
        Z_tilde=h,  # the optimum is the fixed point h = Z~
        gamma_tilde=np.broadcast_to(gamma_tilde, h.shape).copy(),
        gamma_bar_diag=np.broadcast_to(g, h.shape).copy(),
        risk=risk_value,
    )


def z_h(model: GaussianModel, risk: RiskSpec, Y, h, solution: VolterraSolution | None = None) -> np.ndarray:
    """Auxiliary centering sequence of the conditional factorization.

    Z_t = m_t - sum_{l<t} g(t,l) mu Q_l / (1+S_l g_l) (h_l - Z_l)
        + sum_{l<t} g(t,l) A_l / (1+S_l g_l) (Y_l - A_l Z_l)
    for the realized estimate sequence ``h``.
    """
    model._require_scalar()
    sol = _scalar_solution(model, risk, solution)
    T = model.horizon
    Y = _check_horizon(Y, T)
    h = _check_horizon(h, T)
    A, m = model.gains1, model.mean1
    Q = risk.q_vector()
    g = sol.diag
    denom = 1.0 + sol.S * g
    wq = risk.mu * Q / denom
    wa = A / denom
    Z = np.zeros(np.broadcast_shapes(Y.shape, h.shape))
    for t in range(T):
        acc = np.asarray(m[t], dtype=float)
        if t > 0:
            acc = (
                m[t]
                - (h[..., :t] - Z[..., :t]) @ (sol.gamma_bar[t, :t] * wq[:t])
                + (Y[..., :t] - A[:t] * Z[..., :t]) @ (sol.gamma_bar[t, :t] * wa[:t])
            )
        Z[..., t] = acc
    return Z


def z_tilde(model: GaussianModel, risk: RiskSpec, Y, h, solution: VolterraSolution | None = None):
    """Filtered variant of the centering sequence plus its variance sequence.

    Computes the direct recursion and the algebraic map from ``z_h`` and
    checks that they agree; persistent disagreement signals an indexing bug
    in the covariance table, not bad data.
    """
    model._require_scalar()
    sol = _scalar_solution(model, risk, solution)
    T = model.horizon
    Y = _check_horizon(Y, T)
    h = _check_horizon(h, T)
    A, m = model.gains1, model.mean1
    Q = risk.q_vector()
    g = sol.diag
    gamma_tilde = g / (1.0 + A**2 * g)

    wq = risk.mu * Q / (1.0 + sol.S * g)
    Zt = np.zeros(np.broadcast_shapes(Y.shape, h.shape))
    for t in range(T):
        acc = np.asarray(m[t], dtype=float)
        if t > 0:
            acc = (
                m[t]
                - (h[..., :t] - Zt[..., :t]) @ (sol.gamma_bar[t, :t] * wq[:t])
                + (Y[..., :t] - A[:t] * Zt[..., :t]) @ (sol.gamma_bar[t, :t] * A[:t])
            )
        # the l = t term is implicit; solved for Z~_t in closed form
        Zt[..., t] = (acc + g[t] * A[t] * Y[..., t]) / (1.0 + A[t] ** 2 * g[t])

    Z = z_h(model, risk, Y, h, solution=sol)
    Zt_alg = (Z + A * g * Y) / (1.0 + A**2 * g)
    err = float(np.max(np.abs(Zt - Zt_alg) / np.maximum(1.0, np.abs(Zt_alg))))
    if err > ZTILDE_RAISE_TOL:
        raise InconsistentRecursion(
            f"direct and algebraic centering sequences disagree by {err:.3e}"
        )
    return Zt_alg, np.broadcast_to(gamma_tilde, Zt_alg.shape).copy()


def risk_neutral_filter(model: GaussianModel, Y) -> np.ndarray:
    """Conditional expectation of X_t given observations up to t (mu = 0)."""
    risk0 = RiskSpec(mu=0.0, Q=np.zeros(model.horizon))
    if model.is_scalar and model.cross_cov is None:
        return leg_filter(model, risk0, Y).h_bar
    return filter_correlated(model, risk0, Y).h_bar


def ar1_filter(a, D, x0, A, Q, mu, Y) -> FilterRun:
    """One-pass filter for the AR(1) signal.

    h_t = a_t h_{t-1} / (1 + A_t^2 g_t) + A_t g_t Y_t / (1 + A_t^2 g_t) with
    h_0 = x0, where g is the one-dimensional Riccati sequence.
    """
    Y = np.asarray(Y, dtype=float)
    T = Y.shape[-1]
    a = _as_sequence(a, T, "a")
    A = _as_sequence(A, T, "A")
    Q = _as_sequence(Q, T, "Q")
    g = ar1_riccati(a, D, A, Q, mu, T)
    h = np.zeros(Y.shape)
    prev = np.full(Y.shape[:-1], float(x0))
    for t in range(T):
        c = 1.0 + A[t] ** 2 * g[t]
        h[..., t] = (a[t] * prev + A[t] * g[t] * Y[..., t]) / c
        prev = h[..., t]
    return _specialized_run(h, A, g, Q, mu, Y)


def ma1_filter(lam, A, Q, mu, Y) -> FilterRun:
    """One-pass filter for the first-order moving-average signal."""
    Y = np.asarray(Y, dtype=float)
    T = Y.shape[-1]
    lam = float(lam)
    A = _as_sequence(A, T, "A")
    Q = _as_sequence(Q, T, "Q")
    g = ma1_gamma(lam, A, Q, mu, T)
    h = np.zeros(Y.shape)
    for t in range(T):
        c = 1.0 + A[t] ** 2 * g[t]
        lag = 0.0
        if t > 0:
            lag = lam * A[t - 1] * (Y[..., t - 1] - A[t - 1] * h[..., t - 1])
        h[..., t] = (lag + A[t] * g[t] * Y[..., t]) / c
    return _specialized_run(h, A, g, Q, mu, Y)


def _specialized_run(h, A, g, Q, mu, Y) -> FilterRun:
    S = A**2 - mu * Q
    gamma_tilde = g / (1.0 + A**2 * g)
    Z = h * (1.0 + A**2 * g) - A * g * Y
    risk_value = None
    if mu != 0.0:
        log_prod = -0.5 * (np.log1p(S * g) - np.log1p(A**2 * g)).sum()
        risk_value = mu * float(np.exp(log_prod))
    return FilterRun(
        h_bar=h,
        Z_h=Z,
        Z_tilde=h,
        gamma_tilde=np.broadcast_to(gamma_tilde, h.shape).copy(),
        gamma_bar_diag=np.broadcast_to(g, h.shape).copy(),
        risk=risk_value,
    )


def filter_correlated(model: GaussianModel, risk: RiskSpec, Y, solution: VolterraSolution | None = None) -> FilterRun:
    """Optimal filter for vector-valued models, correlated noise allowed.

    h_t = m_t + sum_{l<=t} [C(t,l) + g(t,l) A_l'] [I + A_l C(l,l)]^{-1}
    (Y_l - A_l h_l); the l = t term is solved implicitly. ``Y`` is (T, m)
    or (T,) for m = 1.
    """
    if solution is None:
        if model.cross_cov is None:
            solution = solve_volterra_matrix(model, risk)
        else:
            solution = solve_volterra_correlated(model, risk)
    solution.require_feasible()
    T, n, m = model.horizon, model.n, model.m
    Y = np.asarray(Y, dtype=float)
    if Y.shape == (T,) and m == 1:
        Y = Y[:, None]
    if Y.shape != (T, m):
        raise DimensionMismatch(f"observations must have shape {(T, m)}, got {Y.shape}")

    gam = solution.gamma_bar
    A = model.gains
    C = model.cross_cov

    def gain(t, l):
        Ctl = C[t, l] if C is not None else np.zeros((n, m))
        Cll = C[l, l] if C is not None else np.zeros((n, m))
        M = np.eye(m) + A[l] @ Cll
        if np.linalg.cond(M) > 1e12:
            raise SingularInnovationMatrix(
                f"observation gain denominator at step {l + 1} is singular", step=l + 1
            )
        return np.linalg.solve(M.T, (Ctl + gam[t, l] @ A[l].T).T).T

    h = np.zeros((T, n))
    for t in range(T):
        acc = model.mean[t].copy()
        for l in range(t):
            acc += gain(t, l) @ (Y[l] - A[l] @ h[l])
        Gtt = gain(t, t)
        lhs = np.eye(n) + Gtt @ A[t]
        h[t] = np.linalg.solve(lhs, acc + Gtt @ Y[t])

    diag = np.stack([gam[t, t] for t in range(T)])
    run = FilterRun(h_bar=h[:, 0] if n == 1 else h, gamma_bar_diag=diag[:, 0, 0] if n == 1 else diag)
    return run
