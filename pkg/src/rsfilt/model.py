"""Signal-observation models: general Gaussian signals observed in white noise.

A model consists of a Gaussian signal X with mean sequence ``mean`` and
two-index covariance table ``cov``, observed through per-step gain matrices
``gains`` as ``Y_t = A_t X_t + eps_t`` with i.i.d. standard Gaussian noise.
An optional ``cross_cov`` table correlates the signal with the observation
noise (noise at step s may correlate with the signal at steps t >= s only).

Steps are 1-based in all user-facing documentation and error messages; the
underlying arrays are 0-based, so row/column ``t-1`` of a table holds step t.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigError,
    DimensionMismatch,
    FactorizationFailure,
    NegativeVariance,
    NotPositiveSemidefinite,
)

# Relative tolerances, scaled by the trace of the table they guard.
PSD_TOL = 1e-10
JITTER = 1e-12


def _as_sequence(x, T, name):
    """Broadcast a scalar to length T or validate a length-T sequence."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        return np.full(T, float(arr))
    if arr.shape != (T,):
        raise DimensionMismatch(f"{name} must be scalar or length {T}, got shape {arr.shape}")
    return arr


def _symmetrize_from_lower(K):
    """Mirror the lower triangle (including diagonal) onto the upper."""
    L = np.tril(K)
    return L + L.T - np.diag(np.diag(K))


def check_psd(mat, what):
    """Eigenvalue floor check with tolerance -PSD_TOL * trace."""
    sym = (mat + mat.T) / 2.0
    scale = max(float(np.trace(sym)), 1.0)
    eigvals = np.linalg.eigvalsh(sym)
    worst = float(eigvals[0])
    if worst < -PSD_TOL * scale:
        raise NotPositiveSemidefinite(
            f"{what} is not positive semidefinite (worst eigenvalue {worst:.3e})",
            worst_eigenvalue=worst,
        )


@dataclass(frozen=True)
class GaussianModel:
    """Validated signal-observation model.

    Attributes:
        mean: (T, n) signal mean.
        cov: (T, T, n, n) covariance table, ``cov[t, s] = E (X_t-m_t)(X_s-m_s)'``.
        gains: (T, m, n) observation gain matrices.
        cross_cov: optional (T, T, n, m) table ``E (X_t-m_t) eps_s'``; zero for s > t.
    """

    mean: np.ndarray
    cov: np.ndarray
    gains: np.ndarray
    cross_cov: np.ndarray | None = None

    @property
    def horizon(self) -> int:
        return self.mean.shape[0]

    @property
    def n(self) -> int:
        return self.mean.shape[1]

    @property
    def m(self) -> int:
        return self.gains.shape[1]

    @property
    def dims(self) -> tuple[int, int]:
        return (self.n, self.m)

    @property
    def is_scalar(self) -> bool:
        return self.n == 1 and self.m == 1

    def _require_scalar(self):
        if not self.is_scalar:
            raise DimensionMismatch(f"operation requires a scalar model, dims are {self.dims}")

    # Squeezed views for the scalar (n = m = 1) code paths.
    @property
    def mean1(self) -> np.ndarray:
        self._require_scalar()
        return self.mean[:, 0]

    @property
    def cov2(self) -> np.ndarray:
        self._require_scalar()
        return self.cov[:, :, 0, 0]

    @property
    def gains1(self) -> np.ndarray:
        self._require_scalar()
        return self.gains[:, 0, 0]

    @property
    def cross2(self) -> np.ndarray | None:
        self._require_scalar()
        return None if self.cross_cov is None else self.cross_cov[:, :, 0, 0]

    def flat_mean(self) -> np.ndarray:
        """Signal mean flattened to (T*n,), ordered (t, component)."""
        return self.mean.reshape(-1)

    def flat_cov(self) -> np.ndarray:
        """Signal covariance flattened to (T*n, T*n)."""
        T, n = self.horizon, self.n
        return self.cov.transpose(0, 2, 1, 3).reshape(T * n, T * n)

    def flat_cross(self) -> np.ndarray:
        """Signal/observation-noise covariance flattened to (T*n, T*m)."""
        T, n, m = self.horizon, self.n, self.m
        if self.cross_cov is None:
            return np.zeros((T * n, T * m))
        return self.cross_cov.transpose(0, 2, 1, 3).reshape(T * n, T * m)


@dataclass(frozen=True)
class RiskSpec:
    """Risk parameter and nonnegative weight sequence for the exponential criterion."""

    mu: float
    Q: np.ndarray

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "mu", float(self.mu))
        if Q.ndim == 1:
            if np.any(Q < 0):
                raise NegativeVariance("weights Q must be nonnegative")
        elif Q.ndim == 3:
            for t in range(Q.shape[0]):
                check_psd(Q[t], f"weight matrix Q at step {t + 1}")
        else:
            raise DimensionMismatch("Q must have shape (T,) or (T, n, n)")

    @property
    def horizon(self) -> int:
        return self.Q.shape[0]

    def q_vector(self) -> np.ndarray:
        if self.Q.ndim != 1:
            raise DimensionMismatch("scalar weights requested from a matrix-valued RiskSpec")
        return self.Q

    def q_blocks(self, n: int) -> np.ndarray:
        """Weights as (T, n, n) blocks, promoting scalars to Q_t * I."""
        if self.Q.ndim == 3:
            if self.Q.shape[1] != n:
                raise DimensionMismatch(f"Q blocks are {self.Q.shape[1]}x{self.Q.shape[1]}, signal dim is {n}")
            return self.Q
        return self.Q[:, None, None] * np.eye(n)[None, :, :]

    def s_values(self, gains: np.ndarray) -> np.ndarray:
        """Per-step S_t = A_t'A_t - mu Q_t (scalar: A_t^2 - mu Q_t)."""
        gains = np.asarray(gains, dtype=float)
        if gains.ndim == 1:
            return gains**2 - self.mu * self.q_vector()
        n = gains.shape[2]
        Q = self.q_blocks(n)
        return np.einsum("tji,tjk->tik", gains, gains) - self.mu * Q


@dataclass(frozen=True)
class Trajectory:
    """One sampled path; X is (T,) or (T, n), Y is (T,) or (T, m)."""

    X: np.ndarray
    Y: np.ndarray
    seed: int


def _validate_model(mean, cov, gains, cross_cov):
    T, n = mean.shape
    m = gains.shape[1]
    if cov.shape != (T, T, n, n):
        raise DimensionMismatch(f"cov must have shape {(T, T, n, n)}, got {cov.shape}")
    if gains.shape != (T, m, n):
        raise DimensionMismatch(f"gains must have shape {(T, m, n)}, got {gains.shape}")
    diag_vars = np.array([np.diag(cov[t, t]) for t in range(T)])
    if np.any(diag_vars < -PSD_TOL * max(float(diag_vars.max(initial=0.0)), 1.0)):
        raise NotPositiveSemidefinite(
            f"a diagonal block of cov has a negative variance ({float(diag_vars.min()):.3e})",
            worst_eigenvalue=float(diag_vars.min()),
        )
    model = GaussianModel(mean=mean, cov=cov, gains=gains, cross_cov=cross_cov)
    check_psd(model.flat_cov(), "signal covariance table")
    if cross_cov is not None:
        if cross_cov.shape != (T, T, n, m):
            raise DimensionMismatch(f"cross_cov must have shape {(T, T, n, m)}, got {cross_cov.shape}")
        for t in range(T):
            for s in range(t + 1, T):
                if np.any(cross_cov[t, s] != 0.0):
                    raise DimensionMismatch(
                        "cross_cov must be lower-triangular: noise at step "
                        f"{s + 1} may not correlate with the signal at earlier step {t + 1}"
                    )
        # The (signal, noise) joint must itself be a covariance.
        check_psd(_joint_signal_noise_cov(model), "joint signal/noise covariance")
    return model


def _joint_signal_noise_cov(model: GaussianModel) -> np.ndarray:
    Tn = model.horizon * model.n
    Tm = model.horizon * model.m
    C = model.flat_cross()
    out = np.empty((Tn + Tm, Tn + Tm))
    out[:Tn, :Tn] = model.flat_cov()
    out[:Tn, Tn:] = C
    out[Tn:, :Tn] = C.T
    out[Tn:, Tn:] = np.eye(Tm)
    return out


def build_general(m, K, A) -> GaussianModel:
    """Scalar model from a mean sequence, covariance table and gain sequence.

    Only the lower triangle of K is read; the symmetric extension is checked
    for positive semidefiniteness.
    """
    m = np.asarray(m, dtype=float)
    K = np.asarray(K, dtype=float)
    A = np.asarray(A, dtype=float)
    if m.ndim != 1:
        raise DimensionMismatch(f"mean must be 1-d, got shape {m.shape}")
    T = m.shape[0]
    if K.shape != (T, T):
        raise DimensionMismatch(f"K must be {T}x{T}, got {K.shape}")
    A = _as_sequence(A, T, "A")
    Ksym = _symmetrize_from_lower(K)
    return _validate_model(
        m[:, None], Ksym[:, :, None, None], A[:, None, None], None
    )


def build_ar1(a, D, x0, A, T) -> GaussianModel:
    """AR(1) signal ``X_t = a_t X_{t-1} + sqrt(D_t) e_t`` with X_0 = x0 fixed.

    The mean is m_t = (prod_{u<=t} a_u) x0 and the covariance table is
    K(t, s) = (prod_{s<u<=t} a_u) k_s with k_t = a_t^2 k_{t-1} + D_t.
    """
    a = _as_sequence(a, T, "a")
    D = _as_sequence(D, T, "D")
    A = _as_sequence(A, T, "A")
    if np.any(D < 0):
        raise NegativeVariance("innovation variances D must be nonnegative")
    k = np.zeros(T)
    prev = 0.0
    for t in range(T):
        prev = a[t] ** 2 * prev + D[t]
        k[t] = prev
    K = np.zeros((T, T))
    for s in range(T):
        fac = np.concatenate([[1.0], np.cumprod(a[s + 1 :])])
        K[s:, s] = fac * k[s]
    m = np.cumprod(a) * float(x0)
    return build_general(m, K, A)


def build_ma1(lam, A, T) -> GaussianModel:
    """First-order moving-average signal ``X_t = e_t + lam * e_{t-1}``."""
    lam = float(lam)
    A = _as_sequence(A, T, "A")
    K = (1.0 + lam**2) * np.eye(T)
    idx = np.arange(T - 1)
    K[idx + 1, idx] = lam
    K[idx, idx + 1] = lam
    return build_general(np.zeros(T), K, A)


def build_vector_model(m, K, A, K_Xeps=None) -> GaussianModel:
    """Vector-valued model from block tables.

    Args:
        m: (T, n) mean (a 1-d sequence is treated as n = 1).
        K: (T, T, n, n) covariance blocks; only blocks with t >= s are read
           (a (T, T) array is treated as 1x1 blocks).
        A: (T, m, n) gain matrices (a 1-d sequence is treated as 1x1).
        K_Xeps: optional (T, T, n, m) signal/noise covariance blocks,
           zero for s > t.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim == 1:
        m = m[:, None]
    if m.ndim != 2:
        raise DimensionMismatch(f"mean must be (T,) or (T, n), got shape {m.shape}")
    T, n = m.shape

    K = np.asarray(K, dtype=float)
    if K.shape == (T, T) and n == 1:
        K = K[:, :, None, None]
    if K.shape != (T, T, n, n):
        raise DimensionMismatch(f"K must have shape {(T, T, n, n)}, got {K.shape}")
    # Mirror lower blocks: K[s, t] = K[t, s]' for s < t.
    Kfull = K.copy()
    for t in range(T):
        for s in range(t):
            Kfull[s, t] = K[t, s].T
        Kfull[t, t] = (K[t, t] + K[t, t].T) / 2.0

    A = np.asarray(A, dtype=float)
    if A.ndim == 1 and n == 1:
        A = A[:, None, None]
    if A.ndim != 3 or A.shape[0] != T or A.shape[2] != n:
        raise DimensionMismatch(f"gains must have shape (T, m, {n}), got {A.shape}")

    C = None
    if K_Xeps is not None:
        C = np.asarray(K_Xeps, dtype=float)
        if C.shape == (T, T) and n == 1 and A.shape[1] == 1:
            C = C[:, :, None, None]
    return _validate_model(m, Kfull, A, C)


def build_ma1_observations(lam, alpha, beta, T) -> GaussianModel:
    """Moving-average signal observed through noise with one-step memory.

    The state is the pair (X_t, eps_{t-1}) where X_t = e_t + lam e_{t-1} and
    Y_t = alpha_t X_t + beta eps_{t-1} + eps_t, so the observation noise is
    itself a first-order moving average. Returned as a correlated vector model.
    """
    lam = float(lam)
    beta = float(beta)
    alpha = _as_sequence(alpha, T, "alpha")
    K = np.zeros((T, T, 2, 2))
    for t in range(T):
        K[t, t] = np.diag([1.0 + lam**2, 1.0])
        if t > 0:
            K[t, t - 1] = np.array([[lam, 0.0], [0.0, 0.0]])
    A = np.zeros((T, 1, 2))
    A[:, 0, 0] = alpha
    A[:, 0, 1] = beta
    C = np.zeros((T, T, 2, 1))
    for t in range(1, T):
        C[t, t - 1, 1, 0] = 1.0  # the lagged-noise state component is eps_{t-1}
    return build_vector_model(np.zeros((T, 2)), K, A, C)


def build_ar1_noise(a, b, alpha, beta, T) -> GaussianModel:
    """AR(1) signal observed through autoregressive noise.

    The state is (X_t, eps_{t-1}) with X_t = a_t X_{t-1} + e_t (X_0 = 0) and
    eps_t = b eps_{t-1} + w_t (eps_0 = 0); the observation is
    Y_t = alpha_t X_t + beta eps_{t-1} + w_t. With beta = b this realizes
    Y_t = alpha_t X_t + eps_t.
    """
    a = _as_sequence(a, T, "a")
    alpha = _as_sequence(alpha, T, "alpha")
    b = float(b)
    beta = float(beta)

    k = np.zeros(T)
    prev = 0.0
    for t in range(T):
        prev = a[t] ** 2 * prev + 1.0
        k[t] = prev
    v = np.zeros(T + 1)  # v[t] = Var(eps_t), eps_0 = 0
    for t in range(1, T + 1):
        v[t] = b**2 * v[t - 1] + 1.0

    K = np.zeros((T, T, 2, 2))
    for t in range(T):
        for s in range(t + 1):
            K[t, s, 0, 0] = np.prod(a[s + 1 : t + 1]) * k[s]
            K[t, s, 1, 1] = b ** (t - s) * v[s]  # Cov(eps_{t-1}, eps_{s-1})
    A = np.zeros((T, 1, 2))
    A[:, 0, 0] = alpha
    A[:, 0, 1] = beta
    C = np.zeros((T, T, 2, 1))
    for t in range(T):
        for s in range(t):
            C[t, s, 1, 0] = b ** (t - 1 - s)  # E eps_{t-1} w_s, s <= t-1
    return build_vector_model(np.zeros((T, 2)), K, A, C)


def _joint_factor(model: GaussianModel) -> np.ndarray:
    joint = _joint_signal_noise_cov(model)
    if not np.all(np.isfinite(joint)):
        raise FactorizationFailure("joint covariance contains non-finite entries")
    scale = max(float(np.trace(joint)), 1.0)
    try:
        L = np.linalg.cholesky(joint + JITTER * scale * np.eye(joint.shape[0]))
    except np.linalg.LinAlgError as exc:
        raise FactorizationFailure(f"joint covariance could not be factorized: {exc}") from exc
    if not np.all(np.isfinite(L)):
        raise FactorizationFailure("covariance factorization produced non-finite entries")
    return L


def sample_paths(model: GaussianModel, rng_seed: int, n_paths: int):
    """Draw paths; returns (X, Y) with shapes (n_paths, T, n) and (n_paths, T, m)."""
    T, n, m = model.horizon, model.n, model.m
    L = _joint_factor(model)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(rng_seed)))
    z = rng.standard_normal((n_paths, L.shape[0]))
    draws = z @ L.T
    X = draws[:, : T * n].reshape(n_paths, T, n) + model.mean[None, :, :]
    eps = draws[:, T * n :].reshape(n_paths, T, m)
    Y = np.einsum("tmn,ptn->ptm", model.gains, X) + eps
    return X, Y


def sample(model: GaussianModel, rng_seed: int, n_paths: int) -> list[Trajectory]:
    """Sample trajectories; deterministic given the seed."""
    if n_paths < 0:
        raise ConfigError("n_paths must be nonnegative")
    if n_paths == 0:
        return []
    X, Y = sample_paths(model, rng_seed, n_paths)
    if model.is_scalar:
        X, Y = X[:, :, 0], Y[:, :, 0]
    return [Trajectory(X=X[p], Y=Y[p], seed=rng_seed) for p in range(n_paths)]


# --- JSON configuration -----------------------------------------------------

def model_from_config(cfg: dict) -> GaussianModel:
    """Build a model from a configuration mapping (see README for the schema)."""
    if not isinstance(cfg, dict):
        raise ConfigError("model config must be an object", field="model")
    kind = cfg.get("kind")
    try:
        if kind == "general":
            return build_general(cfg["m"], cfg["K"], cfg["A"])
        if kind == "ar1":
            return build_ar1(cfg["a"], cfg["D"], cfg.get("x0", 0.0), cfg["A"], int(cfg["T"]))
        if kind == "ma1":
            return build_ma1(cfg["lambda"], cfg["A"], int(cfg["T"]))
        if kind == "vector":
            return build_vector_model(cfg["m"], cfg["K"], cfg["A"], cfg.get("K_Xeps"))
        if kind == "ma1_observations":
            return build_ma1_observations(cfg["lambda"], cfg["alpha"], cfg["beta"], int(cfg["T"]))
        if kind == "ar1_noise":
            return build_ar1_noise(cfg["a"], cfg["b"], cfg["alpha"], cfg["beta"], int(cfg["T"]))
    except KeyError as exc:
        raise ConfigError(f"missing model parameter {exc.args[0]!r}", field=f"model.{exc.args[0]}") from exc
    raise ConfigError(f"unknown model kind {kind!r}", field="model.kind")


def risk_from_config(cfg: dict, horizon: int) -> RiskSpec:
    """Build a RiskSpec from a configuration mapping."""
    if not isinstance(cfg, dict):
        raise ConfigError("risk config must be an object", field="risk")
    try:
        mu = float(cfg["mu"])
        Q = cfg["Q"]
    except KeyError as exc:
        raise ConfigError(f"missing risk parameter {exc.args[0]!r}", field=f"risk.{exc.args[0]}") from exc
    Q = np.asarray(Q, dtype=float)
    if Q.ndim == 0:
        Q = np.full(horizon, float(Q))
    if Q.ndim == 1 and Q.shape[0] != horizon:
        raise ConfigError(f"Q has length {Q.shape[0]}, model horizon is {horizon}", field="risk.Q")
    return RiskSpec(mu=mu, Q=Q)
