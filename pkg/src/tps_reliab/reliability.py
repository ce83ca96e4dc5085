"""Bayesian formulation of the back-temperature design constraint.

The design target "P(T_back <= T_critical) = R" is turned into a Gaussian
target distribution for the back temperature: its mean sits z(R) standard
deviations below the critical temperature, so a parameter set whose back
temperature follows N(mu_target, sigma_target) meets the reliability score by
construction.  The likelihood of a material sample measures how close its
predicted back temperature lands to that target; the posterior combines it
with factored per-parameter priors.  Verification always goes back through
the finite-difference solver, never the surrogate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .heatsim import ThermalScenario, back_temperature_batch
from .pinn import as_material_array

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def normal_quantile(p: float) -> float:
    """Inverse standard normal CDF, accurate to ~1e-15 over (0, 1).

    Acklam's rational approximation (|rel err| < 1.2e-9) refined by one
    Halley step on Phi(x) - p evaluated through erfc.
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"quantile argument must lie strictly in (0, 1), got {p}")

    a = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
         1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
    b = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
         6.680131188771972e+01, -1.328068155288572e+01)
    c = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
         -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
    d = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
         3.754408661907416e+00)

    p_low, p_high = 0.02425, 1.0 - 0.02425
    if p < p_low:
        q = math.sqrt(-2.0 * math.log(p))
        x = ((((( c[0]*q + c[1])*q + c[2])*q + c[3])*q + c[4])*q + c[5]) / \
            ((((d[0]*q + d[1])*q + d[2])*q + d[3])*q + 1.0)
    elif p <= p_high:
        q = p - 0.5
        r = q * q
        x = ((((( a[0]*r + a[1])*r + a[2])*r + a[3])*r + a[4])*r + a[5]) * q / \
            (((((b[0]*r + b[1])*r + b[2])*r + b[3])*r + b[4])*r + 1.0)
    else:
        q = math.sqrt(-2.0 * math.log1p(-p))
        x = -((((( c[0]*q + c[1])*q + c[2])*q + c[3])*q + c[4])*q + c[5]) / \
             ((((d[0]*q + d[1])*q + d[2])*q + d[3])*q + 1.0)

    # One Halley refinement: e = Phi(x) - p, Phi via erfc for tail accuracy.
    e = 0.5 * math.erfc(-x / math.sqrt(2.0)) - p
    u = e * math.sqrt(2.0 * math.pi) * math.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


def normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


@dataclass(frozen=True)
class TargetSpec:
    """Gaussian back-temperature target realizing reliability R at T_critical."""

    T_critical: float
    R: float
    sigma_target: float
    mu_target: float

    def __post_init__(self) -> None:
        if not 0.0 < self.R < 1.0:
            raise ValueError(f"R must lie in (0, 1), got {self.R}")
        if self.sigma_target <= 0:
            raise ValueError("sigma_target must be positive")


def make_target(T_critical: float, R: float, sigma_target: float) -> TargetSpec:
    """mu_target = T_critical - z(R) * sigma_target."""
    if not 0.0 < R < 1.0:
        raise ValueError(f"R must lie in (0, 1), got {R}")
    mu = T_critical - normal_quantile(R) * sigma_target
    return TargetSpec(T_critical=T_critical, R=R, sigma_target=sigma_target, mu_target=mu)


@dataclass(frozen=True)
class ParameterPrior:
    """One coordinate's prior: uniform over (low, high) or normal(mean, std)."""

    dist: str
    low: float = 0.0
    high: float = 0.0
    mean: float = 0.0
    std: float = 1.0

    def __post_init__(self) -> None:
        if self.dist not in ("uniform", "normal"):
            raise ValueError(f"unknown prior distribution {self.dist!r}")
        if self.dist == "uniform":
            if not self.low < self.high:
                raise ValueError("uniform bounds must be ordered")
            if self.low < 0:
                raise ValueError("prior support must stay within positive reals")
        elif self.std <= 0:
            raise ValueError("normal prior std must be positive")

    def log_density(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape, -np.inf)
        if self.dist == "uniform":
            inside = (x >= self.low) & (x <= self.high)
            out[inside] = -math.log(self.high - self.low)
        else:
            inside = x > 0.0
            out[inside] = (
                -math.log(self.std) - _LOG_SQRT_2PI
                - 0.5 * ((x[inside] - self.mean) / self.std) ** 2
            )
        return out

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.dist == "uniform":
            return rng.uniform(self.low, self.high, n)
        out = rng.normal(self.mean, self.std, n)
        while True:  # positive-support rejection; negligible unless mean ~ 0
            bad = out <= 0.0
            if not bad.any():
                return out
            out[bad] = rng.normal(self.mean, self.std, int(bad.sum()))


@dataclass(frozen=True)
class PriorSpec:
    """Factored prior over (k, rho_cp) with a hard conductivity cap."""

    k: ParameterPrior = ParameterPrior("uniform", low=0.1, high=1.3)
    rho_cp: ParameterPrior = ParameterPrior("uniform", low=0.8e6, high=2.4e6)
    k_max: float = 1.0

    def __post_init__(self) -> None:
        if self.k_max <= 0:
            raise ValueError("k_max must be positive")


def log_prior(prior: PriorSpec, mats) -> np.ndarray:
    """Sum of per-parameter log-densities; -inf outside support or above k_max."""
    arr = as_material_array(mats)
    out = prior.k.log_density(arr[:, 0]) + prior.rho_cp.log_density(arr[:, 1])
    out[arr[:, 0] > prior.k_max] = -np.inf
    return out


def sample_prior(prior: PriorSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw (n, 2) samples honoring the k_max cap by rejection."""
    ks = prior.k.sample(n, rng)
    while True:
        over = ks > prior.k_max
        if not over.any():
            break
        ks[over] = prior.k.sample(int(over.sum()), rng)
    return np.column_stack([ks, prior.rho_cp.sample(n, rng)])


Predictor = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class PosteriorModel:
    """Target + prior + back-temperature predictor (surrogate or FDM)."""

    target: TargetSpec
    prior: PriorSpec
    predictor: Predictor
    sigma_like: float = 0.0  # 0 means "use the target's sigma"

    def __post_init__(self) -> None:
        if self.sigma_like < 0:
            raise ValueError("sigma_like must be non-negative")
        object.__setattr__(
            self, "sigma_like", float(self.sigma_like) or float(self.target.sigma_target)
        )

    def log_likelihood(self, mats) -> np.ndarray:
        return log_likelihood(self, mats)

    def log_posterior(self, mats) -> np.ndarray:
        arr = as_material_array(mats)
        lp = log_prior(self.prior, arr)
        out = np.full(arr.shape[0], -np.inf)
        ok = np.isfinite(lp)
        if ok.any():
            out[ok] = lp[ok] + log_likelihood(self, arr[ok])
        return out


def log_likelihood(model: PosteriorModel, mats) -> np.ndarray:
    """Gaussian log-density of the predicted back temperature under the target.

    The predictor is evaluated once over the whole batch.  Items where it
    returns a non-finite value get -inf.
    """
    arr = as_material_array(mats)
    t_back = np.asarray(model.predictor(arr), dtype=float)
    sigma = model.sigma_like
    out = np.full(arr.shape[0], -np.inf)
    ok = np.isfinite(t_back)
    out[ok] = (
        -((model.target.mu_target - t_back[ok]) ** 2) / (2.0 * sigma**2)
        - math.log(sigma) - _LOG_SQRT_2PI
    )
    return out


@dataclass(frozen=True)
class FdmPredictor:
    """Back-temperature predictor backed by the implicit FDM (batch-vectorized)."""

    scenario: ThermalScenario

    def __call__(self, mats) -> np.ndarray:
        arr = as_material_array(mats)
        return back_temperature_batch(self.scenario, arr[:, 0], arr[:, 1])


@dataclass(frozen=True)
class PriorSampler:
    """Picklable (n, rng) -> (n, 2) sampler for use inside worker processes."""

    prior: PriorSpec

    def __call__(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return sample_prior(self.prior, n, rng)


@dataclass(frozen=True)
class PriorLogDensity:
    """Picklable batch log-prior for use inside worker processes."""

    prior: PriorSpec

    def __call__(self, mats) -> np.ndarray:
        return log_prior(self.prior, mats)


def verify_reliability(samples, T_critical: float, scenario: ThermalScenario) -> float:
    """Fraction of samples whose FDM back temperature stays at or below T_critical.

    This is the acceptance check for a sampled design distribution, decoupled
    from whatever predictor generated the samples.
    """
    arr = as_material_array(samples)
    if arr.shape[0] == 0:
        raise ValueError("empty sample batch")
    temps = back_temperature_batch(scenario, arr[:, 0], arr[:, 1])
    return float(np.mean(temps <= T_critical))
