"""Conditional factorization of the exponential-quadratic transform.

``cm_decompose`` evaluates, step by step, the closed-form factorization of

    I_T = E[ exp((mu/2) sum_t Q_t (X_t - h_t)^2) | Y_1..Y_T ]

into per-step scale factors, per-step quadratic exponents and a positive
martingale driven by the innovations of the risk-neutral filter. All
exponents are assembled in log space; plain values are exposed as
properties. ``cm_general`` evaluates the same object for an arbitrary
jointly Gaussian signal-observation pair through exact conditioning.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, DomainError, SingularConditioning, TransformDiverges
from .filtering import leg_filter, z_h, z_tilde
from .model import GaussianModel, RiskSpec, sample_paths
from .oracle import assemble_joint, log_expected_exp_quadratic
from .volterra import VolterraSolution, solve_volterra

SIGMA_FLOOR = 1e-14


@dataclass(frozen=True)
class CMDecomposition:
    """Stepwise factorization along one path (batched on leading axes).

    All ``log_*`` fields are natural logarithms; ``I`` and ``M`` are their
    exponentials, always positive for a feasible instance.
    """

    log_I: np.ndarray
    log_M: np.ndarray
    nu: np.ndarray
    gamma: np.ndarray
    gamma_bar: np.ndarray
    z: np.ndarray
    z_tilde: np.ndarray
    step_log_scale: np.ndarray
    step_exponent: np.ndarray
    step_log_M: np.ndarray

    @property
    def I(self) -> np.ndarray:  # noqa: E743 - single-letter name mirrors the math
        return np.exp(self.log_I)

    @property
    def M(self) -> np.ndarray:
        return np.exp(self.log_M)

    def to_dict(self) -> dict:
        return {
            "log_I": self.log_I.tolist(),
            "log_M": self.log_M.tolist(),
            "I": self.I.tolist(),
            "M": self.M.tolist(),
            "innovations": self.nu.tolist(),
            "gamma": self.gamma.tolist(),
            "gamma_bar": self.gamma_bar.tolist(),
            "z": self.z.tolist(),
            "z_tilde": self.z_tilde.tolist(),
            "step_log_scale": self.step_log_scale.tolist(),
            "step_exponent": self.step_exponent.tolist(),
            "step_log_M": self.step_log_M.tolist(),
        }


def _risk_neutral_pass(model: GaussianModel, Y):
    """One-step predictor, innovations and prediction-error variances (mu = 0)."""
    T = model.horizon
    risk0 = RiskSpec(mu=0.0, Q=np.zeros(T))
    sol0 = solve_volterra(model, risk0)
    predictor = z_h(model, risk0, Y, np.zeros_like(Y), solution=sol0)
    A = model.gains1
    nu = Y - A * predictor
    return sol0, predictor, nu


def cm_decompose(model: GaussianModel, risk: RiskSpec, Y, h,
                 solution: VolterraSolution | None = None) -> CMDecomposition:
    """Evaluate the stepwise factorization for realized observations and estimates."""
    model._require_scalar()
    T = model.horizon
    Y = np.asarray(Y, dtype=float)
    h = np.asarray(h, dtype=float)
    if solution is None:
        solution = solve_volterra(model, risk)
    solution.require_feasible()

    A = model.gains1
    Q = risk.q_vector()
    mu = risk.mu
    gbar = solution.diag
    S = solution.S

    sol0, predictor, nu = _risk_neutral_pass(model, Y)
    gamma = sol0.diag

    Z = z_h(model, risk, Y, h, solution=solution)
    Zt, _ = z_tilde(model, risk, Y, h, solution=solution)

    one_bar = 1.0 + A**2 * gbar
    one_rn = 1.0 + A**2 * gamma
    step_log_scale = -0.5 * (np.log1p(S * gbar) - np.log(one_bar))
    step_exponent = 0.5 * mu * Q * one_bar / (1.0 + S * gbar) * (h - Zt) ** 2

    diff = Z - predictor
    step_log_M = (
        0.5 * (np.log(one_rn) - np.log(one_bar))
        + A / one_bar * diff * nu
        - 0.5 * A**2 / one_bar * diff**2
        - 0.5 * A**2 * (gamma - gbar) * nu**2 / (one_bar * one_rn)
    )

    log_M = np.cumsum(step_log_M, axis=-1)
    log_I = np.cumsum(step_log_scale + step_exponent, axis=-1) + log_M
    return CMDecomposition(
        log_I=log_I,
        log_M=log_M,
        nu=nu,
        gamma=np.broadcast_to(gamma, Y.shape).copy(),
        gamma_bar=np.broadcast_to(gbar, Y.shape).copy(),
        z=Z,
        z_tilde=Zt,
        step_log_scale=np.broadcast_to(step_log_scale, Y.shape).copy(),
        step_exponent=step_exponent,
        step_log_M=step_log_M,
    )


def martingale_expectation_check(model: GaussianModel, risk: RiskSpec,
                                 n_paths: int, seed: int):
    """Monte Carlo estimate of E[M_T]; returns (estimate, stderr).

    The estimate sequence fed to the factorization is the optimal filter,
    which exercises every term of the martingale.
    """
    model._require_scalar()
    solution = solve_volterra(model, risk).require_feasible()
    _, Yb = sample_paths(model, seed, n_paths)
    Yb = Yb[:, :, 0]
    h = leg_filter(model, risk, Yb, solution=solution).h_bar
    dec = cm_decompose(model, risk, Yb, h, solution=solution)
    M = np.exp(dec.log_M[:, -1])
    est = float(np.mean(M))
    stderr = float(np.std(M, ddof=1) / np.sqrt(n_paths)) if n_paths > 1 else 0.0
    return est, stderr


def exact_martingale_expectation(model: GaussianModel, risk: RiskSpec, filt) -> float:
    """E[M_T] as one exact Gaussian integral, for an affine causal filter.

    log M_T is a quadratic form in the observation vector once the filter is
    affine; its coefficients are extracted by evaluating the pipeline on
    basis paths.
    """
    model._require_scalar()
    T = model.horizon
    solution = solve_volterra(model, risk).require_feasible()
    A = model.gains1
    gbar = solution.diag
    risk0 = RiskSpec(mu=0.0, Q=np.zeros(T))

    # Affine maps Y -> (Z - predictor) and Y -> nu, extracted on basis paths.
    def z_minus_pred(Y):
        Y = np.asarray(Y, dtype=float)
        Z = z_h(model, risk, Y, filt.apply(Y), solution=solution)
        return Z - z_h(model, risk0, Y, np.zeros(T))

    def nu_map(Y):
        Y = np.asarray(Y, dtype=float)
        return Y - A * z_h(model, risk0, Y, np.zeros(T))

    u0 = z_minus_pred(np.zeros(T))
    v0 = nu_map(np.zeros(T))
    U = np.zeros((T, T))
    V = np.zeros((T, T))
    for j in range(T):
        e = np.zeros(T)
        e[j] = 1.0
        U[:, j] = z_minus_pred(e) - u0
        V[:, j] = nu_map(e) - v0

    gamma = solve_volterra(model, risk0).diag
    one_bar = 1.0 + A**2 * gbar
    one_rn = 1.0 + A**2 * gamma
    beta = A / one_bar
    delta = A**2 / one_bar
    eps = A**2 * (gamma - gbar) / (one_bar * one_rn)
    const = float(np.sum(0.5 * (np.log(one_rn) - np.log(one_bar))))

    P = np.zeros((T, T))
    q = np.zeros(T)
    r = const
    for t in range(T):
        ut, vt = U[t], V[t]
        P += delta[t] * np.outer(ut, ut) + eps[t] * np.outer(vt, vt)
        P -= beta[t] * (np.outer(ut, vt) + np.outer(vt, ut))
        q += beta[t] * (u0[t] * vt + v0[t] * ut) - delta[t] * u0[t] * ut - eps[t] * v0[t] * vt
        r += beta[t] * u0[t] * v0[t] - 0.5 * delta[t] * u0[t] ** 2 - 0.5 * eps[t] * v0[t] ** 2

    joint = assemble_joint(model)
    y_idx = joint.indices("y")
    meanY = joint.mean[y_idx]
    covY = joint.cov[np.ix_(y_idx, y_idx)]
    return float(np.exp(log_expected_exp_quadratic(meanY, covY, P, q, r)))


@dataclass(frozen=True)
class InfoStateDensity:
    """Gaussian kernel with an accumulated positive weight.

    The unnormalized conditional density at step t is
    weight * N(center, variance) evaluated pointwise.
    """

    center: float
    variance: float
    log_weight: float

    @property
    def weight(self) -> float:
        return float(np.exp(self.log_weight))

    def density(self, x):
        x = np.asarray(x, dtype=float)
        kernel = np.exp(-((x - self.center) ** 2) / (2.0 * self.variance))
        return self.weight * kernel / np.sqrt(2.0 * np.pi * self.variance)


def info_state(model: GaussianModel, risk: RiskSpec, Y, h, t: int,
               solution: VolterraSolution | None = None) -> InfoStateDensity:
    """Parameters of the unnormalized conditional density at step t (1-based).

    The weight accumulates the per-step factors up to t-1 and the martingale
    at t, so integrating the density recovers the conditional transform of
    the criterion truncated before step t.
    """
    T = model.horizon
    if not 1 <= t <= T:
        raise DomainError(f"step t must lie in [1, {T}], got {t}")
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 1:
        raise DimensionMismatch("info_state evaluates a single path")
    dec = cm_decompose(model, risk, Y, h, solution=solution)
    partial = float(np.sum(dec.step_log_scale[: t - 1] + dec.step_exponent[: t - 1]))
    log_weight = partial + float(dec.log_M[t - 1])
    center = float(dec.z_tilde[t - 1])
    sol = solution if solution is not None else solve_volterra(model, risk)
    A = model.gains1
    g = sol.diag
    variance = float(g[t - 1] / (1.0 + A[t - 1] ** 2 * g[t - 1]))
    if variance <= 0:
        raise DomainError(f"filtered variance at step {t} is not positive")
    return InfoStateDensity(center=center, variance=variance, log_weight=log_weight)


@dataclass(frozen=True)
class CMGeneralResult:
    """Factorization of the conditional transform for a general Gaussian pair."""

    log_I: np.ndarray
    log_M: np.ndarray
    z_tilde: np.ndarray
    gamma_tilde: np.ndarray
    sigma2: np.ndarray
    sigma2_bar: np.ndarray
    v_bar: np.ndarray

    @property
    def I(self) -> np.ndarray:  # noqa: E743
        return np.exp(self.log_I)

    @property
    def M(self) -> np.ndarray:
        return np.exp(self.log_M)


def _raw_condition(mean, cov, obs, vals):
    """Schur-complement conditioning on raw arrays.

    Unlike the validated oracle path this tolerates an indefinite matrix
    (the risk-averse continuation makes the auxiliary noise "variances"
    negative) and drops only exactly-degenerate coordinates, whose whole
    covariance row vanishes.
    """
    scale = max(float(np.max(np.abs(cov))), 1.0)
    keep = [i for i in obs if np.max(np.abs(cov[i])) > 1e-14 * scale]
    vals = np.asarray(vals, dtype=float)[[k for k, i in enumerate(obs) if i in set(keep)]]
    rest = [i for i in range(len(mean)) if i not in set(obs)]
    if not keep:
        return rest, mean[rest].copy(), cov[np.ix_(rest, rest)].copy()
    Soo = cov[np.ix_(keep, keep)]
    if np.linalg.cond(Soo) > 1e12:
        raise SingularConditioning("observed block is numerically singular")
    Sro = cov[np.ix_(rest, keep)]
    sol = np.linalg.solve(Soo, vals - mean[keep])
    mc = mean[rest] + Sro @ sol
    Sc = cov[np.ix_(rest, rest)] - Sro @ np.linalg.solve(Soo, Sro.T)
    return rest, mc, (Sc + Sc.T) / 2


def cm_general(joint_or_model, risk: RiskSpec, Y, h, aux_values=None) -> CMGeneralResult:
    """Conditional transform factorization without structural assumptions.

    Works from the joint law of the signal and observation coordinates
    alone: the filtered moments, innovation variances and martingale factors
    are produced by exact Gaussian conditioning on the law augmented with
    squared-error auxiliary observations (mu > 0 proceeds as the analytic
    continuation with negative auxiliary noise weights). The auxiliary
    observation values cancel out of the result; ``aux_values`` (default
    zeros) only needs to be a vector of the right length.
    """
    if isinstance(joint_or_model, GaussianModel):
        joint = assemble_joint(joint_or_model)
    else:
        joint = joint_or_model
    Y = np.asarray(Y, dtype=float)
    h = np.asarray(h, dtype=float)
    x_idx = joint.indices("x")
    y_idx = joint.indices("y")
    T = len(y_idx)
    if len(x_idx) != T:
        raise DimensionMismatch("general factorization requires one signal coordinate per step")
    if Y.shape != (T,) or h.shape != (T,):
        raise DimensionMismatch(f"Y and h must have length {T}")

    Qp = -risk.mu * risk.q_vector()
    mu = risk.mu
    Q = risk.q_vector()
    aux = np.zeros(T) if aux_values is None else np.asarray(aux_values, dtype=float)

    # Canonical augmented layout: x_t -> t-1, y_t -> T+t-1, aux_t -> 2T+t-1.
    perm = x_idx + y_idx
    m0 = joint.mean[perm]
    c0 = joint.cov[np.ix_(perm, perm)]
    mean = np.concatenate([m0, Qp * (m0[:T] - h)])
    cov = np.zeros((3 * T, 3 * T))
    cov[: 2 * T, : 2 * T] = c0
    cov[: 2 * T, 2 * T :] = c0[:, :T] * Qp[None, :]
    cov[2 * T :, : 2 * T] = cov[: 2 * T, 2 * T :].T
    cov[2 * T :, 2 * T :] = Qp[:, None] * c0[:T, :T] * Qp[None, :] + np.diag(Qp)

    log_steps = np.zeros(T)
    log_m_steps = np.zeros(T)
    z_t = np.zeros(T)
    g_t = np.zeros(T)
    s2 = np.zeros(T)
    s2b = np.zeros(T)
    vb = np.zeros(T)
    for t in range(1, T + 1):
        # plain innovation moments of Y_t
        hist_y = [T + s - 1 for s in range(1, t)]
        rest, mc, Sc = _raw_condition(mean, cov, hist_y, Y[: t - 1])
        pos = {i: k for k, i in enumerate(rest)}
        iy = pos[T + t - 1]
        s2[t - 1] = Sc[iy, iy]
        piY = mc[iy]
        if s2[t - 1] <= SIGMA_FLOOR:
            raise SingularConditioning(f"innovation variance at step {t} is not positive")

        # augmented-history innovation moments of Y_t
        hist = hist_y + [2 * T + s - 1 for s in range(1, t)]
        rest, mc, Sc = _raw_condition(mean, cov, hist, np.concatenate([Y[: t - 1], aux[: t - 1]]))
        pos = {i: k for k, i in enumerate(rest)}
        iy2 = pos[T + t - 1]
        s2b[t - 1] = Sc[iy2, iy2]
        if s2b[t - 1] <= SIGMA_FLOOR:
            raise SingularConditioning(f"augmented innovation variance at step {t} is not positive")
        corr = sum(aux[s - 1] * Sc[iy2, pos[s - 1]] for s in range(1, t))
        vb[t - 1] = mc[iy2] - corr

        # filtered moments of X_t given observations to t, auxiliaries to t-1
        rest, mc, Sc = _raw_condition(
            mean, cov, hist + [T + t - 1],
            np.concatenate([Y[: t - 1], aux[: t - 1], Y[t - 1 : t]]),
        )
        pos = {i: k for k, i in enumerate(rest)}
        ix = pos[t - 1]
        g_t[t - 1] = Sc[ix, ix]
        zcorr = sum(aux[s - 1] * Sc[ix, pos[s - 1]] for s in range(1, t))
        z_t[t - 1] = mc[ix] - zcorr

        denom = 1.0 + Qp[t - 1] * g_t[t - 1]
        if denom <= SIGMA_FLOOR:
            raise TransformDiverges(
                f"the conditional transform diverges at step {t} (1 - mu Q gamma = {denom:.3e})"
            )
        log_steps[t - 1] = (
            -0.5 * np.log(denom)
            + 0.5 * mu * Q[t - 1] / denom * (h[t - 1] - z_t[t - 1]) ** 2
        )
        log_m_steps[t - 1] = (
            0.5 * (np.log(s2[t - 1]) - np.log(s2b[t - 1]))
            + (Y[t - 1] - piY) ** 2 / (2.0 * s2[t - 1])
            - (Y[t - 1] - vb[t - 1]) ** 2 / (2.0 * s2b[t - 1])
        )

    log_M = np.cumsum(log_m_steps)
    return CMGeneralResult(
        log_I=np.cumsum(log_steps) + log_M,
        log_M=log_M,
        z_tilde=z_t,
        gamma_tilde=g_t,
        sigma2=s2,
        sigma2_bar=s2b,
        v_bar=vb,
    )
