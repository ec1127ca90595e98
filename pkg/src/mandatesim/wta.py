"""Willingness-to-accept estimation from price/accept observations.

Fits accept-probability-vs-price logistic curves by iteratively reweighted
least squares and reports the crossover price where acceptance hits 50%,
with a delta-method confidence interval and an optional seeded parametric
bootstrap.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import norm

from .errors import (
    DatasetParseError,
    DegenerateDataError,
    SeparationError,
    ValidationError,
)

MAX_IRLS_ITERATIONS = 100
LOGLIK_TOLERANCE = 1e-8
# IRLS coefficients running past this magnitude mean the likelihood is
# monotone (separated data); the exact overlap precheck should catch that
# first, this is the backstop.
COEFFICIENT_BOUND = 1e6


@dataclass(frozen=True)
class Observation:
    """One offer: the price asked and whether it was accepted."""

    price: float
    accepted: bool

    def __post_init__(self):
        if not np.isfinite(self.price):
            raise ValidationError(f"price must be finite, got {self.price!r}")


@dataclass(frozen=True)
class LogisticFit:
    """Accept-probability model logit(p) = intercept + slope * price."""

    intercept: float
    slope: float
    covariance: tuple[tuple[float, float], tuple[float, float]]
    log_likelihood: float
    iterations: int
    converged: bool
    n_obs: int


@dataclass(frozen=True)
class CrossoverEstimate:
    """Price at 50% acceptance, with a confidence interval."""

    value: float
    ci_low: float
    ci_high: float
    level: float
    method: str
    stderr: float | None = None


def _design(observations: list[Observation]) -> tuple[np.ndarray, np.ndarray]:
    if len(observations) < 2:
        raise DegenerateDataError(f"need at least 2 observations, got {len(observations)}")
    prices = np.array([o.price for o in observations], dtype=float)
    y = np.array([1.0 if o.accepted else 0.0 for o in observations])
    return prices, y


def _check_separation(prices: np.ndarray, y: np.ndarray) -> None:
    accept = prices[y == 1.0]
    reject = prices[y == 0.0]
    if accept.size == 0 or reject.size == 0:
        label = "accepted" if reject.size == 0 else "rejected"
        raise DegenerateDataError(f"every observation is {label}; cannot fit a curve")
    if reject.max() <= accept.min():
        boundary = (reject.max() + accept.min()) / 2.0
        raise SeparationError(
            f"price {boundary:g} perfectly separates rejections from acceptances",
            price=float(boundary),
        )
    if accept.max() <= reject.min():
        boundary = (accept.max() + reject.min()) / 2.0
        raise SeparationError(
            f"price {boundary:g} perfectly separates acceptances from rejections",
            price=float(boundary),
        )


def _log_likelihood(eta: np.ndarray, y: np.ndarray) -> float:
    # sum of y*eta - log(1 + exp(eta)), computed stably
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def fit_logistic(observations: list[Observation]) -> LogisticFit:
    """Maximum-likelihood logistic fit via IRLS.

    Raises DegenerateDataError when the data cannot identify two
    coefficients (single label, constant price) and SeparationError when a
    price threshold splits the labels perfectly, naming that price.
    """
    prices, y = _design(observations)
    if np.ptp(prices) == 0.0:
        raise DegenerateDataError("price never varies; slope is unidentifiable")
    _check_separation(prices, y)
    X = np.column_stack([np.ones_like(prices), prices])
    beta = np.zeros(2)
    ll = _log_likelihood(X @ beta, y)
    converged = False
    iterations = 0
    for iterations in range(1, MAX_IRLS_ITERATIONS + 1):
        eta = X @ beta
        mu = 1.0 / (1.0 + np.exp(-eta))
        weights = np.clip(mu * (1.0 - mu), 1e-12, None)
        info = (X * weights[:, None]).T @ X
        score = X.T @ (y - mu)
        try:
            beta = beta + np.linalg.solve(info, score)
        except np.linalg.LinAlgError as exc:
            raise DegenerateDataError(f"singular information matrix: {exc}") from exc
        if np.abs(beta).max() > COEFFICIENT_BOUND:
            raise SeparationError(
                "likelihood is monotone (coefficients diverged); data are separated"
            )
        new_ll = _log_likelihood(X @ beta, y)
        if abs(new_ll - ll) <= LOGLIK_TOLERANCE:
            ll = new_ll
            converged = True
            break
        ll = new_ll
    eta = X @ beta
    mu = 1.0 / (1.0 + np.exp(-eta))
    weights = np.clip(mu * (1.0 - mu), 1e-12, None)
    info = (X * weights[:, None]).T @ X
    covariance = np.linalg.inv(info)
    return LogisticFit(
        intercept=float(beta[0]),
        slope=float(beta[1]),
        covariance=tuple(tuple(float(v) for v in row) for row in covariance),
        log_likelihood=ll,
        iterations=iterations,
        converged=converged,
        n_obs=len(observations),
    )


def crossover_price(fit: LogisticFit, level: float = 0.95) -> CrossoverEstimate:
    """The 50%-acceptance price -intercept/slope with a delta-method CI."""
    if not 0.0 < level < 1.0:
        raise ValidationError(f"confidence level must be in (0, 1), got {level!r}")
    if fit.slope == 0.0:
        raise DegenerateDataError("slope is zero; no crossover price exists")
    value = -fit.intercept / fit.slope
    gradient = np.array([-1.0 / fit.slope, fit.intercept / fit.slope**2])
    variance = float(gradient @ np.array(fit.covariance) @ gradient)
    stderr = float(np.sqrt(max(variance, 0.0)))
    z = float(norm.ppf(0.5 + level / 2.0))
    return CrossoverEstimate(
        value=float(value),
        ci_low=float(value - z * stderr),
        ci_high=float(value + z * stderr),
        level=level,
        method="delta",
        stderr=stderr,
    )


def bootstrap_crossover(
    fit: LogisticFit,
    observations: list[Observation],
    level: float = 0.95,
    resamples: int = 2000,
    seed: int = 0,
) -> CrossoverEstimate:
    """Parametric bootstrap percentile CI for the crossover price.

    Resamples acceptances from the fitted probabilities at the observed
    prices; resamples that degenerate or separate are dropped (they carry no
    finite crossover).
    """
    if not 0.0 < level < 1.0:
        raise ValidationError(f"confidence level must be in (0, 1), got {level!r}")
    if resamples < 100:
        raise ValidationError(f"resamples must be >= 100, got {resamples!r}")
    prices, _ = _design(observations)
    eta = fit.intercept + fit.slope * prices
    p = 1.0 / (1.0 + np.exp(-eta))
    rng = np.random.default_rng(seed)
    values = []
    for _ in range(resamples):
        simulated = rng.random(prices.size) < p
        try:
            refit = fit_logistic(
                [Observation(float(pr), bool(acc)) for pr, acc in zip(prices, simulated)]
            )
            estimate = crossover_price(refit, level)
        except (DegenerateDataError, SeparationError):
            continue
        values.append(estimate.value)
    if len(values) < resamples // 2:
        raise DegenerateDataError(
            f"only {len(values)} of {resamples} bootstrap resamples were estimable"
        )
    lo, hi = np.quantile(values, [0.5 - level / 2.0, 0.5 + level / 2.0])
    return CrossoverEstimate(
        value=-fit.intercept / fit.slope,
        ci_low=float(lo),
        ci_high=float(hi),
        level=level,
        method=f"bootstrap[{len(values)}/{resamples}]",
        stderr=float(np.std(values, ddof=1)),
    )


def read_observations_csv(path: str | Path) -> list[Observation]:
    """Read a price,accepted CSV (accepted is 0 or 1)."""
    path = Path(path)
    observations = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip().lower() for c in header[:2]] != ["price", "accepted"]:
            raise DatasetParseError(
                f"{path.name} line 1: expected header 'price,accepted', got {header!r}", line=1
            )
        for line_no, row in enumerate(reader, start=2):
            if not row or not "".join(row).strip():
                continue
            try:
                price = float(row[0])
                flag = row[1].strip()
                if flag not in ("0", "1"):
                    raise ValueError(f"accepted must be 0 or 1, got {flag!r}")
                observations.append(Observation(price=price, accepted=flag == "1"))
            except (ValueError, IndexError, ValidationError) as exc:
                raise DatasetParseError(
                    f"{path.name} line {line_no}: {exc}", line=line_no
                ) from exc
    if not observations:
        raise DatasetParseError(f"{path.name} has no observations", line=1)
    return observations


def format_crossover(estimate: CrossoverEstimate) -> str:
    """Human-readable one-liner, e.g. '2.27 (95% CI [1.536, 3.016])'."""
    return (
        f"{estimate.value:.2f} ({estimate.level:.0%} CI "
        f"[{estimate.ci_low:.3f}, {estimate.ci_high:.3f}])"
    )
