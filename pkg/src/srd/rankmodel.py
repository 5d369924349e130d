"""Beta-binomial smoothing of rank distributions.

The smoothed probability that a match lands at rank ``j`` (1-based) among
``N`` references is the beta-binomial pmf at ``k = j - 1`` over ``N - 1``
trials. Parameters are fitted by minimising a penalised negative
log-likelihood whose quadratic term pins the modelled rank-1 probability to
the empirical one: rank 1 carries the largest disclosure, and smoothing must
not be allowed to move it.

    loss(a, b) = -sum_j counts_j * ln gamma_j(a, b)
                 + lambda * M * (gamma_1(a, b) - p1)^2

with ``M`` the observation total, so the penalty's pull scales with the data
term. The search runs over ``(ln a, ln b)`` inside a box, via Nelder-Mead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import gammaln

from .ranking import RankDistribution

ALPHA_BETA_BOUNDS = (1e-3, 1e3)
CONSTRAINT_FORM = "rank1-quadratic-penalty"

MOMENTS_INIT = "method_of_moments"
FIXED_INIT = "fixed"
INITIALIZERS = (MOMENTS_INIT, FIXED_INIT)

_GRID = (0.1, 1.0, 10.0)  # multistart values per axis


class FitError(ValueError):
    """Invalid model parameters or an unusable fit request."""


class FitConvergenceError(FitError):
    """The optimiser stopped without converging; carries the best iterate."""

    def __init__(self, message: str, *, alpha: float, beta: float, loss: float, iterations: int):
        super().__init__(message)
        self.alpha = alpha
        self.beta = beta
        self.loss = loss
        self.iterations = iterations


@dataclass(frozen=True)
class FitConfig:
    """Knobs for the penalised maximum-likelihood fit."""

    rank1_penalty_weight: float = 1e4
    tolerance: float = 1e-8
    max_iterations: int = 1000
    initializer: str = MOMENTS_INIT
    multistart: bool = False

    def __post_init__(self):
        if not self.rank1_penalty_weight >= 0.0:
            raise FitError("rank1_penalty_weight must be >= 0")
        if not self.tolerance > 0.0:
            raise FitError("tolerance must be > 0")
        if self.max_iterations < 1:
            raise FitError("max_iterations must be >= 1")
        if self.initializer not in INITIALIZERS:
            raise FitError(f"unknown initializer {self.initializer!r}")


@dataclass(frozen=True)
class BetaBinomialModel:
    """A fitted smooth rank distribution ``gamma`` with its parameters."""

    alpha: float
    beta: float
    n_references: int
    gamma: np.ndarray
    loss: float | None = None
    iterations: int | None = None

    def __post_init__(self):
        lo, hi = ALPHA_BETA_BOUNDS
        if not (lo <= self.alpha <= hi and lo <= self.beta <= hi):
            raise FitError(
                f"alpha/beta must lie in [{lo:g}, {hi:g}], "
                f"got ({self.alpha:g}, {self.beta:g})"
            )
        gamma = np.asarray(self.gamma, dtype=np.float64)
        if gamma.shape != (self.n_references,):
            raise FitError("gamma must hold one probability per rank")
        if np.any(gamma <= 0.0):
            raise FitError("gamma must be strictly positive everywhere")
        if abs(float(gamma.sum()) - 1.0) > 1e-9:
            raise FitError("gamma must sum to 1 within 1e-9")
        object.__setattr__(self, "gamma", gamma)

    @classmethod
    def from_parameters(cls, alpha: float, beta: float, n_references: int):
        """Model at given parameters, without fit metadata."""
        return cls(alpha, beta, n_references, betabinom_pmf(alpha, beta, n_references))

    def to_json_dict(self) -> dict:
        return {
            "alpha": float(self.alpha),
            "beta": float(self.beta),
            "n_references": int(self.n_references),
            "gamma": [float(g) for g in self.gamma],
            "loss": None if self.loss is None else float(self.loss),
            "iterations": None if self.iterations is None else int(self.iterations),
            "constraint_form": CONSTRAINT_FORM,
        }

    @classmethod
    def from_json_dict(cls, data: dict):
        try:
            gamma = np.asarray(data["gamma"], dtype=np.float64)
            total = float(gamma.sum())
            # stored gamma is rounded to 6 significant digits; renormalise to
            # restore the exact-sum invariant, but reject real corruption
            if abs(total - 1.0) > 1e-4:
                raise FitError(f"model gamma sums to {total:.6g}, expected 1")
            return cls(
                alpha=float(data["alpha"]),
                beta=float(data["beta"]),
                n_references=int(data["n_references"]),
                gamma=gamma / total,
                loss=None if data.get("loss") is None else float(data["loss"]),
                iterations=None if data.get("iterations") is None else int(data["iterations"]),
            )
        except KeyError as exc:
            raise FitError(f"model JSON missing key {exc}") from None


def betabinom_pmf(alpha: float, beta: float, n_references: int) -> np.ndarray:
    """Beta-binomial rank probabilities ``gamma_1..gamma_N``.

    ``gamma_j = C(N-1, j-1) * B(j-1+alpha, N-j+beta) / B(alpha, beta)``.
    Computed in log space with the gamma-function terms arranged in
    cancelling pairs, so ``alpha = beta = 1`` yields exactly ``1/N`` in every
    entry; the result is renormalised by its sum.
    """
    if not (np.isfinite(alpha) and np.isfinite(beta)) or alpha <= 0.0 or beta <= 0.0:
        raise FitError(f"alpha and beta must be positive, got ({alpha!r}, {beta!r})")
    if n_references < 2:
        raise FitError("n_references must be >= 2")
    n = n_references - 1
    k = np.arange(n_references, dtype=np.float64)
    log_w = (
        (gammaln(k + alpha) - gammaln(k + 1.0))
        + (gammaln(n - k + beta) - gammaln(n - k + 1.0))
        + (gammaln(n + 2.0) - gammaln(n + alpha + beta))
        + (gammaln(alpha + beta) - gammaln(alpha) - gammaln(beta))
        - np.log(n + 1.0)
    )
    w = np.exp(log_w - log_w.max())
    # keep every entry strictly positive even when an extreme parameter
    # corner underflows a far tail; no-op on ordinary inputs
    w = np.maximum(w, np.finfo(np.float64).tiny)
    return w / w.sum()


def log_likelihood(dist: RankDistribution, alpha: float, beta: float) -> float:
    """Multinomial log-likelihood of the counts under the model, in nats."""
    gamma = betabinom_pmf(alpha, beta, dist.n_references)
    return float(np.sum(dist.counts * np.log(gamma)))


def _moments_init(dist: RankDistribution) -> tuple[float, float]:
    """Method-of-moments starting point; falls back to (1, 1)."""
    n = dist.n_references - 1
    if n < 1:
        return 1.0, 1.0
    k = np.arange(dist.n_references, dtype=np.float64)
    w = dist.probabilities
    m1 = float(np.sum(w * k))
    m2 = float(np.sum(w * k * k))
    if m1 <= 0.0 or m1 >= n:
        return 1.0, 1.0
    den = n * (m2 / m1 - m1 - 1.0) + m1
    if den == 0.0 or not np.isfinite(den):
        return 1.0, 1.0
    alpha = (n * m1 - m2) / den
    beta = (n - m1) * (n - m2 / m1) / den
    if not (np.isfinite(alpha) and np.isfinite(beta)) or alpha <= 0.0 or beta <= 0.0:
        return 1.0, 1.0
    lo, hi = ALPHA_BETA_BOUNDS
    return float(np.clip(alpha, lo, hi)), float(np.clip(beta, lo, hi))


def penalized_loss(
    dist: RankDistribution, alpha: float, beta: float, rank1_penalty_weight: float
) -> float:
    """The objective that :func:`fit` minimises, at explicit parameters."""
    gamma = betabinom_pmf(alpha, beta, dist.n_references)
    nll = -float(np.sum(dist.counts * np.log(gamma)))
    residual = float(gamma[0] - dist.probabilities[0])
    return nll + rank1_penalty_weight * dist.total * residual**2


def fit(dist: RankDistribution, config: FitConfig | None = None) -> BetaBinomialModel:
    """Fit a rank-1-anchored beta-binomial model to ``dist``.

    Deterministic: no random restarts, and the optional multistart walks a
    fixed 3x3 grid of starting points in ``(ln alpha, ln beta)``. The
    returned loss never exceeds the loss at the starting point. Raises
    :class:`FitConvergenceError` (carrying the best iterate) if the
    optimiser hits ``max_iterations`` without meeting the tolerance.
    """
    if config is None:
        config = FitConfig()
    if dist.n_references < 2:
        raise FitError("n_references must be >= 2")
    counts = dist.counts.astype(np.float64)
    total = float(dist.total)
    p1 = float(dist.probabilities[0])
    lam = config.rank1_penalty_weight
    N = dist.n_references

    def loss(x: np.ndarray) -> float:
        gamma = betabinom_pmf(float(np.exp(x[0])), float(np.exp(x[1])), N)
        nll = -float(np.sum(counts * np.log(gamma)))
        return nll + lam * total * float(gamma[0] - p1) ** 2

    lo, hi = np.log(ALPHA_BETA_BOUNDS[0]), np.log(ALPHA_BETA_BOUNDS[1])
    if config.initializer == MOMENTS_INIT:
        a0, b0 = _moments_init(dist)
    else:
        a0, b0 = 1.0, 1.0
    starts = [np.log([a0, b0])]
    if config.multistart:
        starts += [np.log([a, b]) for a in _GRID for b in _GRID]

    best = None
    for start in starts:
        result = minimize(
            loss,
            start,
            method="Nelder-Mead",
            bounds=[(lo, hi), (lo, hi)],
            options={
                "fatol": config.tolerance,
                "xatol": 1e-8,
                "maxiter": config.max_iterations,
                "maxfev": 4 * config.max_iterations,
            },
        )
        if not result.success:
            a, b = np.exp(result.x)
            raise FitConvergenceError(
                f"fit did not converge within {config.max_iterations} iterations "
                f"(status: {result.message})",
                alpha=float(a),
                beta=float(b),
                loss=float(result.fun),
                iterations=int(result.nit),
            )
        if best is None or result.fun < best.fun:
            best = result

    alpha, beta = (float(v) for v in np.clip(np.exp(best.x), *ALPHA_BETA_BOUNDS))
    return BetaBinomialModel(
        alpha=alpha,
        beta=beta,
        n_references=N,
        gamma=betabinom_pmf(alpha, beta, N),
        loss=float(best.fun),
        iterations=int(best.nit),
    )
