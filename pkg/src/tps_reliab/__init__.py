"""Reliability-targeted thermal protection design.

Finite-difference conduction solvers, a physics-informed surrogate trained
from scratch, and Bayesian samplers (Metropolis-Hastings and tempered SMC)
that find material-parameter distributions meeting a back-temperature
reliability target.
"""

from .heatsim import (MaterialSample, TemperatureField, ThermalScenario,
                      analytic_reference, back_temperature,
                      back_temperature_batch, solve_explicit, solve_implicit)
from .pinn import (SurrogateModel, SurrogatePredictor, TrainingConfig,
                   load_weights, predict_back_temperature, save_weights, train)
from .reliability import (FdmPredictor, PosteriorModel, PriorSpec, TargetSpec,
                          log_likelihood, log_prior, make_target,
                          normal_quantile, verify_reliability)
from .samplers import (ParticleEnsemble, ess, mh_run, next_phi, reweight,
                       resample_and_mutate, smc_run, systematic_resample)

__version__ = "0.1.0"

__all__ = [
    "MaterialSample", "TemperatureField", "ThermalScenario",
    "analytic_reference", "back_temperature", "back_temperature_batch",
    "solve_explicit", "solve_implicit",
    "SurrogateModel", "SurrogatePredictor", "TrainingConfig", "load_weights",
    "predict_back_temperature", "save_weights", "train",
    "FdmPredictor", "PosteriorModel", "PriorSpec", "TargetSpec",
    "log_likelihood", "log_prior", "make_target", "normal_quantile",
    "verify_reliability",
    "ParticleEnsemble", "ess", "mh_run", "next_phi", "reweight",
    "resample_and_mutate", "smc_run", "systematic_resample",
    "__version__",
]
