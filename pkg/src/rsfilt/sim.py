"""Monte Carlo estimation of filter risks.

Paths are generated in batches from a counter-based generator, the chosen
filter is applied vectorized over the batch, and per-batch partial sums are
combined with ``math.fsum`` so results are reproducible independent of the
batching. Filter comparisons reuse the same paths (common random numbers).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, OverflowDominated
from .filtering import leg_filter, risk_neutral_filter
from .model import GaussianModel, RiskSpec, _joint_factor, model_from_config, risk_from_config
from .oracle import AffineFilter
from .volterra import solve_volterra

EXP_CAP = 700.0
OVERFLOW_FRACTION = 1e-3


@dataclass(frozen=True)
class ExperimentConfig:
    """One Monte Carlo experiment: model, risk, filter choice, path budget."""

    model: GaussianModel
    risk: RiskSpec
    filter_kind: str = "leg"  # 'leg' | 'risk_neutral' | 'custom'
    custom: AffineFilter | None = None
    n_paths: int = 10000
    seed: int = 0
    criterion: str = "exponential"  # 'exponential' | 'mean_square'
    batch_size: int = 1 << 15

    def __post_init__(self):
        if self.n_paths < 1:
            raise ConfigError("n_paths must be at least 1", field="n_paths")
        if self.filter_kind not in ("leg", "risk_neutral", "custom"):
            raise ConfigError(f"unknown filter kind {self.filter_kind!r}", field="filter.kind")
        if self.filter_kind == "custom" and self.custom is None:
            raise ConfigError("custom filter requires coefficients", field="filter")
        if self.criterion not in ("exponential", "mean_square"):
            raise ConfigError(f"unknown criterion {self.criterion!r}", field="criterion")

    @classmethod
    def from_dict(cls, cfg: dict) -> "ExperimentConfig":
        model = model_from_config(cfg.get("model", {}))
        risk = risk_from_config(cfg.get("risk", {}), model.horizon)
        filt_cfg = cfg.get("filter", {"kind": "leg"})
        kind = filt_cfg.get("kind", "leg")
        custom = None
        if kind == "custom":
            try:
                custom = AffineFilter(
                    intercept=np.asarray(filt_cfg["intercept"], dtype=float),
                    gains=np.asarray(filt_cfg["gains"], dtype=float),
                )
            except KeyError as exc:
                raise ConfigError(
                    f"custom filter needs {exc.args[0]!r}", field=f"filter.{exc.args[0]}"
                ) from exc
        return cls(
            model=model,
            risk=risk,
            filter_kind=kind,
            custom=custom,
            n_paths=int(cfg.get("paths", cfg.get("n_paths", 10000))),
            seed=int(cfg.get("seed", 0)),
            criterion=cfg.get("criterion", "exponential"),
        )


@dataclass(frozen=True)
class RiskEstimate:
    """Sample mean and standard error of the criterion over the simulated paths."""

    mean: float
    stderr: float
    n_paths: int
    criterion: str
    n_overflow: int = 0
    batch_sums: tuple = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "stderr": self.stderr,
            "n_paths": self.n_paths,
            "criterion": self.criterion,
            "n_overflow": self.n_overflow,
        }


def _apply_filter(config: ExperimentConfig, solution, Yb: np.ndarray) -> np.ndarray:
    if config.filter_kind == "leg":
        return leg_filter(config.model, config.risk, Yb, solution=solution).h_bar
    if config.filter_kind == "risk_neutral":
        return risk_neutral_filter(config.model, Yb)
    return config.custom.apply(Yb)


def _criterion_exponents(config: ExperimentConfig, Xb, hb) -> np.ndarray:
    Q = config.risk.q_vector()
    err2 = (Xb - hb) ** 2
    return 0.5 * config.risk.mu * err2 @ Q


def _batches(n_paths: int, batch_size: int):
    start = 0
    while start < n_paths:
        yield start, min(batch_size, n_paths - start)
        start += batch_size


def estimate_risk(config: ExperimentConfig) -> RiskEstimate:
    """Monte Carlo estimate of the configured criterion.

    For mu > 0 the per-path exponents are accumulated in log space and paths
    over the exponent cap are counted; more than 0.1% of them aborts the
    estimate. The estimate is deterministic given the seed.
    """
    model = config.model
    model._require_scalar()
    risk = config.risk
    solution = None
    if config.filter_kind == "leg":
        solution = solve_volterra(model, risk).require_feasible()

    ss = np.random.SeedSequence(config.seed)
    batch_seeds = ss.spawn(sum(1 for _ in _batches(config.n_paths, config.batch_size)))

    sums, sq_sums = [], []
    log_parts, log_parts_sq = [], []
    n_overflow = 0
    for (start, size), bseed in zip(_batches(config.n_paths, config.batch_size), batch_seeds):
        rng = np.random.Generator(np.random.Philox(bseed))
        Xb, Yb = _sample_batch(model, rng, size)
        hb = _apply_filter(config, solution, Yb)
        if config.criterion == "mean_square":
            vals = (Xb - hb) ** 2 @ risk.q_vector()
            sums.append(math.fsum(vals))
            sq_sums.append(math.fsum(vals * vals))
            continue
        expo = _criterion_exponents(config, Xb, hb)
        if risk.mu > 0:
            n_overflow += int(np.count_nonzero(expo > EXP_CAP))
            log_parts.append(_logsumexp(expo))
            log_parts_sq.append(_logsumexp(2.0 * expo))
        else:
            vals = risk.mu * np.exp(expo)
            sums.append(math.fsum(vals))
            sq_sums.append(math.fsum(vals * vals))

    n = config.n_paths
    if config.criterion == "exponential" and risk.mu > 0:
        if n_overflow > OVERFLOW_FRACTION * n:
            raise OverflowDominated(
                f"{n_overflow} of {n} paths exceeded the exponent cap {EXP_CAP:.0f}"
            )
        log_total = _logsumexp(np.array(log_parts))
        log_total_sq = _logsumexp(np.array(log_parts_sq))
        mean = risk.mu * math.exp(log_total - math.log(n))
        second = math.exp(log_total_sq - math.log(n)) * risk.mu**2
        var = max(second - mean * mean, 0.0)
        stderr = math.sqrt(var / n)
        return RiskEstimate(mean=mean, stderr=stderr, n_paths=n,
                            criterion=config.criterion, n_overflow=n_overflow,
                            batch_sums=tuple(log_parts))
    total = math.fsum(sums)
    total_sq = math.fsum(sq_sums)
    mean = total / n
    var = max(total_sq / n - mean * mean, 0.0)
    stderr = math.sqrt(var / n) if n > 1 else 0.0
    return RiskEstimate(mean=mean, stderr=stderr, n_paths=n,
                        criterion=config.criterion, n_overflow=n_overflow,
                        batch_sums=tuple(sums))


def _sample_batch(model: GaussianModel, rng, size: int):
    T = model.horizon
    L = _joint_factor(model)
    z = rng.standard_normal((size, L.shape[0]))
    draws = z @ L.T
    X = draws[:, :T] + model.flat_mean()[None, :]
    eps = draws[:, T:]
    Y = model.gains1 * X + eps
    return X, Y


def _logsumexp(a) -> float:
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return -math.inf
    hi = float(np.max(a))
    if not math.isfinite(hi):
        return hi
    return hi + math.log(float(np.sum(np.exp(a - hi))))


@dataclass(frozen=True)
class ComparisonReport:
    """Paired-path risk difference between two filters on shared trajectories."""

    diff_mean: float
    diff_stderr: float
    estimate_a: RiskEstimate
    estimate_b: RiskEstimate

    def to_dict(self) -> dict:
        return {
            "diff_mean": self.diff_mean,
            "diff_stderr": self.diff_stderr,
            "a": self.estimate_a.to_dict(),
            "b": self.estimate_b.to_dict(),
        }


def compare_filters(config_a: ExperimentConfig, config_b: ExperimentConfig) -> ComparisonReport:
    """Common-random-number comparison; both configs must share model, risk and seed."""
    if config_a.seed != config_b.seed or config_a.n_paths != config_b.n_paths:
        raise ConfigError("paired comparison requires a shared seed and path count")
    if config_a.model is not config_b.model and not (
        np.array_equal(config_a.model.mean, config_b.model.mean)
        and np.array_equal(config_a.model.cov, config_b.model.cov)
        and np.array_equal(config_a.model.gains, config_b.model.gains)
    ):
        raise ConfigError("paired comparison requires a shared model")
    if config_a.criterion != config_b.criterion or config_a.risk.mu != config_b.risk.mu or not np.array_equal(
        config_a.risk.Q, config_b.risk.Q
    ):
        raise ConfigError("paired comparison requires a shared criterion (mu, Q)")

    model = config_a.model
    model._require_scalar()
    sol_a = solve_volterra(model, config_a.risk).require_feasible() if config_a.filter_kind == "leg" else None
    sol_b = solve_volterra(model, config_b.risk).require_feasible() if config_b.filter_kind == "leg" else None

    ss = np.random.SeedSequence(config_a.seed)
    batch_seeds = ss.spawn(sum(1 for _ in _batches(config_a.n_paths, config_a.batch_size)))

    d_sums, d_sq_sums = [], []
    a_sums, a_sq, b_sums, b_sq = [], [], [], []
    n_overflow = 0
    for (start, size), bseed in zip(_batches(config_a.n_paths, config_a.batch_size), batch_seeds):
        rng = np.random.Generator(np.random.Philox(bseed))
        Xb, Yb = _sample_batch(model, rng, size)
        va, oa = _path_values(config_a, sol_a, Xb, Yb)
        vb, ob = _path_values(config_b, sol_b, Xb, Yb)
        n_overflow += oa + ob
        d = va - vb
        d_sums.append(math.fsum(d))
        d_sq_sums.append(math.fsum(d * d))
        a_sums.append(math.fsum(va))
        a_sq.append(math.fsum(va * va))
        b_sums.append(math.fsum(vb))
        b_sq.append(math.fsum(vb * vb))

    n = config_a.n_paths
    if n_overflow > OVERFLOW_FRACTION * n:
        raise OverflowDominated(
            f"{n_overflow} capped exponents over {n} paired paths; the comparison is unreliable"
        )

    def finish(sums, sqs):
        mean = math.fsum(sums) / n
        var = max(math.fsum(sqs) / n - mean * mean, 0.0)
        return mean, math.sqrt(var / n) if n > 1 else 0.0

    dm, ds = finish(d_sums, d_sq_sums)
    am, asd = finish(a_sums, a_sq)
    bm, bsd = finish(b_sums, b_sq)
    ea = RiskEstimate(mean=am, stderr=asd, n_paths=n, criterion=config_a.criterion, batch_sums=tuple(a_sums))
    eb = RiskEstimate(mean=bm, stderr=bsd, n_paths=n, criterion=config_b.criterion, batch_sums=tuple(b_sums))
    return ComparisonReport(diff_mean=dm, diff_stderr=ds, estimate_a=ea, estimate_b=eb)


def _path_values(config: ExperimentConfig, solution, Xb, Yb):
    """Per-path criterion values and the count of capped exponents."""
    hb = _apply_filter(config, solution, Yb)
    if config.criterion == "mean_square":
        return (Xb - hb) ** 2 @ config.risk.q_vector(), 0
    expo = _criterion_exponents(config, Xb, hb)
    capped = 0
    if config.risk.mu > 0:
        capped = int(np.count_nonzero(expo > EXP_CAP))
        expo = np.minimum(expo, EXP_CAP)
    return config.risk.mu * np.exp(expo), capped
