"""Metropolis-Hastings chains and tempered sequential Monte Carlo.

Both samplers are generic over log-densities.  The SMC sampler marches a
tempering exponent phi from 0 (prior) to 1 (posterior), choosing each step
size by bisection so the reweighted effective sample size stays at the
requested target, and restoring particle diversity after each resampling with
a short batch of Metropolis mutations.  Every particle owns an rng stream
derived from (seed, stage, particle index), so serial and parallel execution
draw identical randomness per particle.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from multiprocessing import get_context
from typing import Callable, Sequence

import numpy as np

LogDensity = Callable[[np.ndarray], np.ndarray]


def _limit_worker_blas() -> None:
    """Keep worker processes single-threaded in BLAS; the particles are the
    parallelism axis, and nested thread pools just thrash the cores."""
    try:
        from threadpoolctl import threadpool_limits

        threadpool_limits(1)
    except Exception:
        pass


def make_worker_pool(workers: int) -> ProcessPoolExecutor:
    """Forked process pool with single-threaded BLAS, reusable across runs."""
    return ProcessPoolExecutor(
        max_workers=workers,
        mp_context=get_context("fork"),
        initializer=_limit_worker_blas,
    )


class SamplerError(RuntimeError):
    pass


class DegenerateWeightsError(SamplerError):
    """Every particle weight underflowed to zero in one reweighting stage."""


# ---------------------------------------------------------------------------
# Metropolis-Hastings
# ---------------------------------------------------------------------------

@dataclass
class ChainState:
    """Mutable state of one random-walk chain."""

    theta: np.ndarray
    log_post: float
    cov: np.ndarray
    accepted: int = 0
    steps: int = 0
    rng: np.random.Generator = field(default_factory=np.random.default_rng)

    def __post_init__(self) -> None:
        self.theta = np.asarray(self.theta, dtype=float)
        self.cov = np.asarray(self.cov, dtype=float)
        d = self.theta.size
        if self.cov.shape != (d, d):
            raise ValueError(f"covariance must be ({d}, {d}), got {self.cov.shape}")
        if not np.allclose(self.cov, self.cov.T):
            raise ValueError("proposal covariance must be symmetric")
        if np.any(np.linalg.eigvalsh(self.cov) < -1e-12):
            raise ValueError("proposal covariance must be positive semidefinite")

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.steps if self.steps else 0.0


@dataclass(frozen=True)
class MhResult:
    samples: np.ndarray          # (n_steps, d); burn-in retained
    acceptance_rate: float
    state: ChainState


def _scale_tril(cov: np.ndarray) -> np.ndarray:
    if not cov.any():
        return np.zeros_like(cov)
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        jitter = 1e-12 * max(np.trace(cov) / cov.shape[0], 1.0)
        return np.linalg.cholesky(cov + jitter * np.eye(cov.shape[0]))


def mh_run(
    logpost: Callable[[np.ndarray], float],
    init,
    cov0,
    n_steps: int,
    seed: int = 0,
    adapt_every: int = 200,
) -> MhResult:
    """Random-walk Metropolis with symmetric Gaussian proposals.

    A proposal is accepted when log r >= log u with u ~ Uniform(0, 1).  All
    samples including burn-in are kept.  When adapt_every > 0 the proposal
    covariance is re-estimated every adapt_every steps from the chain history
    scaled by 2.38^2/d; pass adapt_every=0 to keep cov0 frozen.
    """
    theta = np.array(init, dtype=float)
    d = theta.size
    lp = float(logpost(theta))
    if not math.isfinite(lp):
        raise SamplerError(f"log-posterior not finite at the initial point: {lp!r}")
    state = ChainState(theta, lp, np.asarray(cov0, dtype=float),
                       rng=np.random.default_rng(seed))
    chol = _scale_tril(state.cov)
    samples = np.empty((n_steps, d))
    for step in range(n_steps):
        prop = state.theta + chol @ state.rng.standard_normal(d)
        lp_new = float(logpost(prop))
        if math.isnan(lp_new):
            raise SamplerError(f"log-posterior returned NaN at step {step}")
        if lp_new - state.log_post >= math.log(state.rng.random()):
            state.theta = prop
            state.log_post = lp_new
            state.accepted += 1
        samples[step] = state.theta
        state.steps += 1
        if adapt_every and (step + 1) % adapt_every == 0 and step + 1 >= 2 * d:
            hist = samples[: step + 1]
            cov = np.cov(hist.T, ddof=1).reshape(d, d)
            state.cov = (2.38**2 / d) * cov + 1e-12 * np.eye(d)
            chol = _scale_tril(state.cov)
    return MhResult(samples=samples, acceptance_rate=state.acceptance_rate, state=state)


def gelman_rubin(chains: np.ndarray) -> np.ndarray:
    """Potential scale reduction factor per dimension; chains is (m, n, d)."""
    chains = np.asarray(chains, dtype=float)
    if chains.ndim == 2:
        chains = chains[:, :, None]
    m, n, d = chains.shape
    if m < 2 or n < 2:
        raise ValueError("need at least two chains with two samples each")
    means = chains.mean(axis=1)                      # (m, d)
    b = n * means.var(axis=0, ddof=1)                # between-chain
    w = chains.var(axis=1, ddof=1).mean(axis=0)      # within-chain
    var_hat = (n - 1) / n * w + b / n
    return np.sqrt(var_hat / w)


# ---------------------------------------------------------------------------
# Particle ensemble and SMC building blocks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ParticleEnsemble:
    """N weighted particles with cached log-likelihoods at tempering phi."""

    thetas: np.ndarray           # (N, d)
    weights: np.ndarray          # (N,), normalized
    loglikes: np.ndarray         # (N,)
    phi: float
    stage: int = 0

    def __post_init__(self) -> None:
        n = self.thetas.shape[0]
        if self.weights.shape != (n,) or self.loglikes.shape != (n,):
            raise ValueError("weights and loglikes must match the particle count")
        if np.any(self.weights < 0):
            raise ValueError("negative particle weight")
        if abs(float(self.weights.sum()) - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got {self.weights.sum()!r}")
        if not -1e-12 <= self.phi <= 1.0 + 1e-12:
            raise ValueError(f"phi must lie in [0, 1], got {self.phi}")

    @property
    def n(self) -> int:
        return self.thetas.shape[0]

    @property
    def ess(self) -> float:
        return ess(self.weights)


def ess(weights: np.ndarray) -> float:
    """Effective sample size 1/sum(w^2) of a normalized weight vector."""
    w = np.asarray(weights, dtype=float)
    s2 = float(np.sum(w * w))
    if s2 == 0.0:
        raise ValueError("all weights are zero")
    return float(np.sum(w)) ** 2 / s2


def _reweighted_log(weights: np.ndarray, loglikes: np.ndarray, delta_phi: float) -> np.ndarray:
    with np.errstate(divide="ignore"):
        lw = np.log(weights) + delta_phi * loglikes
    top = np.max(lw)
    if not np.isfinite(top):
        raise DegenerateWeightsError("all particle weights vanished during reweighting")
    return lw - top


def reweight(ensemble: ParticleEnsemble, loglikes: np.ndarray, delta_phi: float) -> ParticleEnsemble:
    """w_i <- w_i * exp(delta_phi * loglike_i), renormalized in log space."""
    if delta_phi < 0:
        raise ValueError("delta_phi must be non-negative")
    lw = _reweighted_log(ensemble.weights, np.asarray(loglikes, dtype=float), delta_phi)
    w = np.exp(lw)
    w /= w.sum()
    return ParticleEnsemble(
        thetas=ensemble.thetas,
        weights=w,
        loglikes=np.asarray(loglikes, dtype=float),
        phi=min(ensemble.phi + delta_phi, 1.0),
        stage=ensemble.stage,
    )


def next_phi(ensemble: ParticleEnsemble, loglikes: np.ndarray, ess_target: float,
             bisect_iters: int = 30) -> float:
    """Largest step with reweighted ESS >= ess_target, found by bisection.

    Returns the full remaining step 1 - phi when even that keeps the ESS above
    target.  When no positive step meets the target (e.g. ess_target = N with
    unequal log-likelihoods) the smallest probed step is returned, still > 0.
    """
    if ensemble.phi >= 1.0:
        raise ValueError("tempering already complete")
    loglikes = np.asarray(loglikes, dtype=float)
    remaining = 1.0 - ensemble.phi

    def ess_at(dphi: float) -> float:
        lw = _reweighted_log(ensemble.weights, loglikes, dphi)
        w = np.exp(lw)
        return float(w.sum() ** 2 / np.sum(w * w))

    if ess_at(remaining) >= ess_target:
        return remaining
    lo, hi = 0.0, remaining
    for _ in range(bisect_iters):
        mid = 0.5 * (lo + hi)
        if ess_at(mid) >= ess_target:
            lo = mid
        else:
            hi = mid
    return lo if lo > 0.0 else hi


def systematic_resample(weights: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Low-variance resampling: particle i is copied floor/ceil(N*w_i) times."""
    w = np.asarray(weights, dtype=float)
    n = w.size
    positions = (rng.random() + np.arange(n)) / n
    cumulative = np.cumsum(w)
    cumulative[-1] = 1.0  # guard against roundoff at the top end
    return np.searchsorted(cumulative, positions)


# ---------------------------------------------------------------------------
# Mutation kernel (serial or process-parallel over particle chunks)
# ---------------------------------------------------------------------------

def _mutate_chunk(args):
    """Run mutation_steps of Metropolis on one contiguous particle slice.

    Each particle draws its proposals and acceptance uniforms from its own
    SeedSequence([seed, stage, index]) stream, which makes the result
    independent of chunking and execution order.
    """
    (start, thetas, loglikes, logpriors, phi, chol, steps, seed, stage,
     log_prior_fn, log_like_fn) = args
    thetas = thetas.copy()
    loglikes = loglikes.copy()
    logpriors = logpriors.copy()
    m, d = thetas.shape
    draws = np.empty((m, steps, d))
    unifs = np.empty((m, steps))
    for i in range(m):
        gen = np.random.default_rng(np.random.SeedSequence([seed, stage, start + i]))
        draws[i] = gen.standard_normal((steps, d))
        unifs[i] = gen.random(steps)

    lp = logpriors + phi * loglikes
    accepted = 0
    for s in range(steps):
        props = thetas + draws[:, s, :] @ chol.T
        lpri = np.asarray(log_prior_fn(props), dtype=float)
        llik = np.full(m, -np.inf)
        inside = np.isfinite(lpri)
        if inside.any():
            llik[inside] = np.asarray(log_like_fn(props[inside]), dtype=float)
        if np.any(np.isnan(lpri)) or np.any(np.isnan(llik)):
            bad = int(np.argmax(np.isnan(lpri) | np.isnan(llik)))
            raise SamplerError(f"log-density returned NaN for particle {start + bad}")
        lp_new = lpri + phi * llik
        with np.errstate(invalid="ignore"):
            accept = (lp_new - lp) >= np.log(unifs[:, s])
        accept &= np.isfinite(lp_new)
        thetas[accept] = props[accept]
        loglikes[accept] = llik[accept]
        logpriors[accept] = lpri[accept]
        lp[accept] = lp_new[accept]
        accepted += int(accept.sum())
    return start, thetas, loglikes, accepted


def _proposal_tril(thetas: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """2.38^2/d scaled weighted covariance of the ensemble, as a Cholesky factor."""
    d = thetas.shape[1]
    mean = weights @ thetas
    centered = thetas - mean
    cov = (centered * weights[:, None]).T @ centered / max(1.0 - np.sum(weights**2), 1e-12)
    cov = (2.38**2 / d) * cov + 1e-12 * np.eye(d)
    return _scale_tril(cov)


def resample_and_mutate(
    ensemble: ParticleEnsemble,
    log_prior_fn: LogDensity,
    log_like_fn: LogDensity,
    mutation_steps: int,
    seed: int = 0,
    pool: ProcessPoolExecutor | None = None,
    workers: int = 1,
) -> tuple[ParticleEnsemble, float]:
    """Systematic resampling followed by independent Metropolis mutations.

    The mutation kernel targets the current tempered posterior
    prior * likelihood^phi with a proposal covariance frozen for the stage at
    2.38^2/d times the weighted ensemble covariance.  Returns the new
    equal-weight ensemble and the mutation acceptance rate.
    """
    n, d = ensemble.thetas.shape
    rng = np.random.default_rng(np.random.SeedSequence([seed, ensemble.stage, n]))
    chol = _proposal_tril(ensemble.thetas, ensemble.weights)
    idx = systematic_resample(ensemble.weights, rng)
    thetas = ensemble.thetas[idx]
    loglikes = ensemble.loglikes[idx]
    weights = np.full(n, 1.0 / n)

    acc_rate = 1.0
    if mutation_steps > 0:
        logpriors = np.asarray(log_prior_fn(thetas), dtype=float)
        # A few chunks per worker lets the pool absorb scheduler stragglers.
        n_chunks = max(1, min(4 * workers if workers > 1 else 1, n))
        bounds = np.linspace(0, n, n_chunks + 1, dtype=int)
        tasks = [
            (int(b0), thetas[b0:b1], loglikes[b0:b1], logpriors[b0:b1],
             ensemble.phi, chol, mutation_steps, seed, ensemble.stage,
             log_prior_fn, log_like_fn)
            for b0, b1 in zip(bounds[:-1], bounds[1:]) if b1 > b0
        ]
        if pool is not None and len(tasks) > 1:
            results = list(pool.map(_mutate_chunk, tasks))
        else:
            results = [_mutate_chunk(t) for t in tasks]
        accepted = 0
        for start, th, ll, acc in results:
            span = slice(start, start + th.shape[0])
            thetas[span] = th
            loglikes[span] = ll
            accepted += acc
        acc_rate = accepted / (n * mutation_steps)

    out = ParticleEnsemble(thetas=thetas, weights=weights, loglikes=loglikes,
                           phi=ensemble.phi, stage=ensemble.stage)
    return out, acc_rate


# ---------------------------------------------------------------------------
# Full SMC driver
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StageDiagnostics:
    stage: int
    phi: float
    ess: float
    acceptance_rate: float
    resampled: bool
    elapsed_s: float


def smc_run(
    prior_sampler: Callable[[int, np.random.Generator], np.ndarray],
    log_prior_fn: LogDensity,
    log_like_fn: LogDensity,
    n_particles: int,
    ess_threshold_ratio: float = 0.5,
    mutation_steps: int = 5,
    seed: int = 0,
    workers: int = 1,
    pool: ProcessPoolExecutor | None = None,
) -> tuple[ParticleEnsemble, list[StageDiagnostics]]:
    """Temper from the prior to the posterior with ESS-adaptive steps.

    Each stage picks the largest tempering increment keeping the effective
    sample size at ess_threshold_ratio * N, reweights, and, whenever the ESS
    falls below that threshold, resamples and mutates.  A final resample-and-
    mutate pass is applied at phi = 1 if the weights are still uneven, so the
    returned ensemble is usable as equal-weight posterior samples.

    With workers > 1 the mutation phase fans out over a process pool (the
    log-density callables must then be picklable).  A long-lived pool from
    make_worker_pool may be passed in to amortize startup across runs.
    """
    if n_particles < 2:
        raise ValueError("need at least two particles")
    if not 0.0 < ess_threshold_ratio <= 1.0:
        raise ValueError("ess_threshold_ratio must lie in (0, 1]")

    rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    thetas = np.asarray(prior_sampler(n_particles, rng), dtype=float)
    if thetas.shape[0] != n_particles:
        raise ValueError("prior sampler returned the wrong particle count")
    loglikes = np.asarray(log_like_fn(thetas), dtype=float)
    if np.any(np.isnan(loglikes)):
        raise SamplerError(
            f"log-likelihood returned NaN for particle {int(np.argmax(np.isnan(loglikes)))}"
        )
    ensemble = ParticleEnsemble(
        thetas=thetas,
        weights=np.full(n_particles, 1.0 / n_particles),
        loglikes=loglikes,
        phi=0.0,
        stage=0,
    )

    ess_target = ess_threshold_ratio * n_particles
    diagnostics: list[StageDiagnostics] = []
    own_pool = pool is None and workers > 1
    if own_pool:
        pool = make_worker_pool(workers)
    try:
        while ensemble.phi < 1.0:
            tic = time.perf_counter()
            stage = ensemble.stage + 1
            ensemble = ParticleEnsemble(
                thetas=ensemble.thetas, weights=ensemble.weights,
                loglikes=ensemble.loglikes, phi=ensemble.phi, stage=stage,
            )
            remaining = 1.0 - ensemble.phi
            delta = next_phi(ensemble, ensemble.loglikes, ess_target)
            try:
                ensemble = reweight(ensemble, ensemble.loglikes, delta)
            except DegenerateWeightsError as err:
                raise DegenerateWeightsError(f"stage {stage}: {err}") from err
            acc_rate = math.nan
            resampled = False
            # Resample when the step was ESS-limited (delta < remaining), when
            # weights degenerated anyway, or to leave phi=1 with even weights.
            if (delta < remaining or ensemble.ess < ess_target
                    or (ensemble.phi >= 1.0 and ensemble.ess < n_particles - 1e-9)):
                ensemble, acc_rate = resample_and_mutate(
                    ensemble, log_prior_fn, log_like_fn, mutation_steps,
                    seed=seed, pool=pool, workers=workers,
                )
                resampled = True
            diagnostics.append(StageDiagnostics(
                stage=stage, phi=ensemble.phi, ess=ensemble.ess,
                acceptance_rate=acc_rate, resampled=resampled,
                elapsed_s=time.perf_counter() - tic,
            ))
    finally:
        if own_pool:
            pool.shutdown()
    return ensemble, diagnostics
