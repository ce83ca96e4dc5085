"""Timing harness: surrogate batching vs sequential FDM, and SMC worker scaling.

Wall times are hardware-specific, so nothing here asserts absolute numbers;
the harness only records medians (warmup run discarded) for the scaling
properties checked downstream: FDM cost grows about linearly with the number
of simulations, one batched surrogate prediction grows far slower, and the
SMC run shrinks with worker count.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass
from statistics import median

import numpy as np

from . import pinn, samplers
from .heatsim import MaterialSample, ThermalScenario, solve_implicit
from .reliability import PosteriorModel, PriorLogDensity, PriorSampler, PriorSpec


@dataclass(frozen=True)
class InferenceBenchRow:
    batch: int
    fdm_time_s: float
    pinn_time_s: float


@dataclass(frozen=True)
class SmcBenchRow:
    workers: int
    time_s: float


def _bench_mats(model: pinn.SurrogateModel, n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return np.column_stack([
        rng.uniform(*model.k_range, n),
        rng.uniform(*model.rho_cp_range, n),
    ])


def bench_inference(
    scenario: ThermalScenario,
    model: pinn.SurrogateModel,
    sizes=(1, 10, 100, 1000, 10_000),
    reps: int = 5,
    seed: int = 0,
) -> list[InferenceBenchRow]:
    """Median time of M sequential implicit solves vs one batched prediction.

    The sweep over batch sizes is interleaved and repeated (small batches get
    extra repetitions, never fewer than `reps`), so host-load phases hit every
    row rather than biasing the ratios; the whole first sweep is warmup.
    """
    cases = []
    for m in sizes:
        mats = _bench_mats(model, m, seed)
        samples = [MaterialSample(k, c) for k, c in mats]
        quota = max(reps, min(25, 10_000 // m))
        cases.append((m, mats, samples, quota, [], []))
    max_quota = max(c[3] for c in cases)
    for rep in range(max_quota + 1):
        for m, mats, samples, quota, fdm_times, pinn_times in cases:
            if rep > quota:
                continue
            tic = time.perf_counter()
            for s in samples:
                solve_implicit(scenario, s)
            fdm_t = time.perf_counter() - tic
            tic = time.perf_counter()
            pinn.predict_back_temperature(model, mats)
            pinn_t = time.perf_counter() - tic
            if rep > 0:  # first sweep is warmup
                fdm_times.append(fdm_t)
                pinn_times.append(pinn_t)
    return [
        InferenceBenchRow(m, median(fdm), median(pn))
        for m, _, _, _, fdm, pn in cases
    ]


def worker_counts(max_workers: int | None = None) -> list[int]:
    top = max_workers or os.cpu_count() or 1
    return sorted({1, 2, 4, top})


def bench_smc(
    posterior: PosteriorModel,
    prior: PriorSpec,
    n_particles: int = 10_000,
    counts=None,
    reps: int = 5,
    ess_threshold_ratio: float = 0.5,
    mutation_steps: int = 5,
    seed: int = 0,
) -> list[SmcBenchRow]:
    """Median SMC wall time per worker count on the given posterior."""
    counts = list(counts) if counts is not None else worker_counts()

    def run(workers: int, pool) -> float:
        tic = time.perf_counter()
        samplers.smc_run(
            PriorSampler(prior),
            PriorLogDensity(prior),
            posterior.log_likelihood,
            n_particles,
            ess_threshold_ratio=ess_threshold_ratio,
            mutation_steps=mutation_steps,
            seed=seed,
            workers=workers,
            pool=pool,
        )
        return time.perf_counter() - tic

    rows = []
    for w in counts:
        # Worker pools are long-lived infrastructure; create outside the
        # timed region and let the warmup run prime the workers.
        pool = samplers.make_worker_pool(w) if w > 1 else None
        try:
            run(w, pool)  # warmup
            rows.append(SmcBenchRow(w, median(run(w, pool) for _ in range(reps))))
        finally:
            if pool is not None:
                pool.shutdown()
    return rows
