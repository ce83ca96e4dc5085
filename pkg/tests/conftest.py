import numpy as np
import pytest

from tps_reliab.heatsim import MaterialSample, ThermalScenario

# RCC composite used throughout as the validation material.
VALIDATION_K = 0.65
VALIDATION_RHO_CP = 1509.0 * 1050.0


@pytest.fixture(scope="session")
def validation_material() -> MaterialSample:
    return MaterialSample(k=VALIDATION_K, rho_cp=VALIDATION_RHO_CP)


@pytest.fixture(scope="session")
def validation_scenario() -> ThermalScenario:
    """The 100 s validation case: 10 kW/m^2 on a 7 mm slab, 100 nodes, CFL 0.2."""
    return ThermalScenario(Q=10_000.0, L=0.007, t_final=100.0, T_init=25.0,
                           T_norm=100.0, n_x=100, cfl=0.2)


@pytest.fixture(scope="session")
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)
