"""1D transient heat conduction through a protection layer.

The slab is insulated at the inner face (x = 0) and receives a constant
heating flux Q at the outer face (x = L).  Three independent solution
routes are provided: an explicit finite-difference scheme, an implicit
(backward Euler) scheme, and the exact constant-flux series solution used
as a verification oracle.  Public inputs and outputs are in physical units
(m, s, degrees C); internally the solvers work on the normalized variables
T' = T/T_norm, t' = t/t_final, x' = x/L.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded


def _require_finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")
    return value


@dataclass(frozen=True)
class ThermalScenario:
    """Geometry, loading and normalization constants for one design case.

    Q : applied heat flux at x = L, W/m^2 (>= 0)
    L : slab thickness, m
    t_final : simulated duration, s
    T_init : uniform initial temperature, degrees C
    T_norm : temperature normalization scale, degrees C
    n_x : number of spatial nodes (>= 3)
    cfl : explicit stability factor alpha*dt/dx^2, in (0, 0.5]
    n_t_implicit : implicit time-step count (default: same as n_x)
    """

    Q: float = 10_000.0
    L: float = 0.007
    t_final: float = 300.0
    T_init: float = 25.0
    T_norm: float = 100.0
    n_x: int = 100
    cfl: float = 0.2
    n_t_implicit: int = 0  # 0 means "use n_x"

    def __post_init__(self) -> None:
        for name in ("Q", "L", "t_final", "T_init", "T_norm", "cfl"):
            _require_finite(name, getattr(self, name))
        if self.Q < 0:
            raise ValueError(f"Q must be >= 0, got {self.Q}")
        if self.L <= 0 or self.t_final <= 0 or self.T_norm <= 0:
            raise ValueError("L, t_final and T_norm must be positive")
        if self.n_x < 3:
            raise ValueError(f"n_x must be >= 3, got {self.n_x}")
        if not 0.0 < self.cfl <= 0.5:
            raise ValueError(f"cfl must lie in (0, 0.5] for stability, got {self.cfl}")
        if self.n_t_implicit < 0:
            raise ValueError("n_t_implicit must be >= 0")
        object.__setattr__(self, "n_t_implicit", int(self.n_t_implicit) or int(self.n_x))

    @property
    def dx(self) -> float:
        return self.L / (self.n_x - 1)


@dataclass(frozen=True)
class MaterialSample:
    """One sampled material: conductivity k and thermal density rho*c_p."""

    k: float
    rho_cp: float

    def __post_init__(self) -> None:
        _require_finite("k", self.k)
        _require_finite("rho_cp", self.rho_cp)
        if self.k <= 0 or self.rho_cp <= 0:
            raise ValueError(f"k and rho_cp must be positive, got k={self.k}, rho_cp={self.rho_cp}")
        if not math.isfinite(self.diffusivity) or self.diffusivity <= 0:
            raise ValueError("derived diffusivity is not finite and positive")

    @property
    def diffusivity(self) -> float:
        """alpha = k / (rho*c_p), m^2/s."""
        return self.k / self.rho_cp


@dataclass(frozen=True)
class TemperatureField:
    """Solution grid: temps[i_t, i_x] in degrees C, with spacings dx (m), dt (s)."""

    temps: np.ndarray
    dx: float
    dt: float

    def __post_init__(self) -> None:
        if self.temps.ndim != 2 or self.temps.shape[0] < 1:
            raise ValueError("temps must be a non-empty (n_t+1) x n_x array")
        if not np.all(np.isfinite(self.temps)):
            raise ValueError("temperature field contains non-finite entries")

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.temps.shape[0]) * self.dt

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.temps.shape[1]) * self.dx

    def at_times(self, times) -> np.ndarray:
        """Rows linearly interpolated in time at the requested instants."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        grid = self.times
        idx = np.clip(np.searchsorted(grid, times), 1, len(grid) - 1)
        t0, t1 = grid[idx - 1], grid[idx]
        w = np.where(t1 > t0, (times - t0) / np.where(t1 > t0, t1 - t0, 1.0), 0.0)
        w = np.clip(w, 0.0, 1.0)
        return (1.0 - w)[:, None] * self.temps[idx - 1] + w[:, None] * self.temps[idx]

    def spatial_mean(self) -> np.ndarray:
        """Trapezoidal spatial mean per time row (the discrete energy measure)."""
        w = np.ones(self.temps.shape[1])
        w[0] = w[-1] = 0.5
        return self.temps @ w / w.sum()


def _normalized_setup(scenario: ThermalScenario, mat: MaterialSample):
    """Dimensionless diffusion coefficient and flux gradient for the solvers."""
    kappa = mat.diffusivity * scenario.t_final / scenario.L**2
    flux_grad = scenario.Q * scenario.L / (mat.k * scenario.T_norm)
    return kappa, flux_grad


def solve_explicit(scenario: ThermalScenario, mat: MaterialSample) -> TemperatureField:
    """March the explicit scheme T_i^{n+1} = T_i^n + r*(T_{i+1} - 2T_i + T_{i-1}).

    The step count is chosen so that r = alpha*dt/dx^2 <= scenario.cfl and the
    grid lands exactly on t_final.  Both boundaries use second-order ghost-node
    closures: an insulated face at x = 0 and the heating flux dT/dx = +Q/k at
    x = L, so the discrete energy balance dT_mean/dt = Q/(rho*c_p*L) is exact.
    """
    kappa, flux_grad = _normalized_setup(scenario, mat)
    n_x = scenario.n_x
    dxn = 1.0 / (n_x - 1)
    n_t = max(1, math.ceil(kappa / (scenario.cfl * dxn**2)))
    dtn = 1.0 / n_t
    r = kappa * dtn / dxn**2
    if r > 0.5 + 1e-12:
        raise ValueError(f"explicit stability violated: alpha*dt/dx^2 = {r:.4f} > 0.5")

    u0 = scenario.T_init / scenario.T_norm
    temps = np.empty((n_t + 1, n_x))
    temps[0] = u0
    u = temps[0].copy()
    ghost_src = 2.0 * r * dxn * flux_grad
    for n in range(1, n_t + 1):
        new = temps[n]
        new[1:-1] = u[1:-1] + r * (u[2:] - 2.0 * u[1:-1] + u[:-2])
        new[0] = u[0] + 2.0 * r * (u[1] - u[0])
        new[-1] = u[-1] + 2.0 * r * (u[-2] - u[-1]) + ghost_src
        u = new
    temps *= scenario.T_norm
    return TemperatureField(temps=temps, dx=scenario.dx, dt=scenario.t_final / n_t)


def _implicit_bands(n_x: int, r: float) -> np.ndarray:
    """Banded (ab) form of I - r*D2 with ghost-node boundary rows."""
    ab = np.zeros((3, n_x))
    ab[0, 1:] = -r          # superdiagonal
    ab[1, :] = 1.0 + 2.0 * r
    ab[2, :-1] = -r         # subdiagonal
    ab[0, 1] = -2.0 * r     # insulated face couples twice to node 1
    ab[2, -2] = -2.0 * r    # flux face couples twice to node n-2
    return ab


def solve_implicit(scenario: ThermalScenario, mat: MaterialSample) -> TemperatureField:
    """Backward Euler with a tridiagonal solve per step; unconditionally stable.

    Uses the same ghost-node boundary closure as the explicit scheme, so the
    two schemes share the exact discrete energy balance.
    """
    kappa, flux_grad = _normalized_setup(scenario, mat)
    n_x = scenario.n_x
    n_t = scenario.n_t_implicit
    dxn = 1.0 / (n_x - 1)
    dtn = 1.0 / n_t
    r = kappa * dtn / dxn**2

    ab = _implicit_bands(n_x, r)
    u0 = scenario.T_init / scenario.T_norm
    temps = np.empty((n_t + 1, n_x))
    temps[0] = u0
    ghost_src = 2.0 * r * dxn * flux_grad
    u = temps[0].copy()
    for n in range(1, n_t + 1):
        rhs = u.copy()
        rhs[-1] += ghost_src
        u = solve_banded((1, 1), ab, rhs, check_finite=False)
        temps[n] = u
    temps *= scenario.T_norm
    return TemperatureField(temps=temps, dx=scenario.dx, dt=scenario.t_final / n_t)


def back_temperature_batch(
    scenario: ThermalScenario, k: np.ndarray, rho_cp: np.ndarray
) -> np.ndarray:
    """Implicit back temperatures T(0, t_final) for a whole material batch.

    The backward-Euler recursion is run for all materials simultaneously with
    a Thomas elimination vectorized over the batch axis, which is what makes
    re-verifying 10^4 sampled materials against the FDM tractable.
    """
    k = np.asarray(k, dtype=float)
    rho_cp = np.asarray(rho_cp, dtype=float)
    if k.shape != rho_cp.shape or k.ndim != 1:
        raise ValueError("k and rho_cp must be 1D arrays of equal length")
    if k.size == 0:
        return np.empty(0)
    if not (np.all(np.isfinite(k)) and np.all(np.isfinite(rho_cp))):
        raise ValueError("material batch contains non-finite entries")
    if np.any(k <= 0) or np.any(rho_cp <= 0):
        raise ValueError("material batch contains non-positive entries")

    n_x = scenario.n_x
    n_t = scenario.n_t_implicit
    dxn = 1.0 / (n_x - 1)
    dtn = 1.0 / n_t
    kappa = (k / rho_cp) * scenario.t_final / scenario.L**2
    r = kappa * dtn / dxn**2                       # (m,)
    flux_grad = scenario.Q * scenario.L / (k * scenario.T_norm)
    ghost_src = 2.0 * r * dxn * flux_grad

    m = k.size
    lower = np.tile(-r, (n_x, 1))                  # a[i] couples to node i-1
    diag = np.tile(1.0 + 2.0 * r, (n_x, 1))
    upper = np.tile(-r, (n_x, 1))
    upper[0] = -2.0 * r
    lower[-1] = -2.0 * r

    # Thomas forward elimination depends only on the matrix: precompute once.
    cp = np.empty((n_x, m))
    inv = np.empty((n_x, m))
    inv[0] = 1.0 / diag[0]
    cp[0] = upper[0] * inv[0]
    for i in range(1, n_x):
        inv[i] = 1.0 / (diag[i] - lower[i] * cp[i - 1])
        cp[i] = upper[i] * inv[i]

    u = np.full((n_x, m), scenario.T_init / scenario.T_norm)
    dp = np.empty((n_x, m))
    for _ in range(n_t):
        u[-1] += ghost_src
        dp[0] = u[0] * inv[0]
        for i in range(1, n_x):
            dp[i] = (u[i] - lower[i] * dp[i - 1]) * inv[i]
        u[-1] = dp[-1]
        for i in range(n_x - 2, -1, -1):
            u[i] = dp[i] - cp[i] * u[i + 1]
    return u[0] * scenario.T_norm


def analytic_reference(
    scenario: ThermalScenario,
    mat: MaterialSample,
    x,
    t,
    n_terms: int = 50,
):
    """Exact constant-flux / insulated-slab series solution at (x, t).

    T = T_init + (Q*L/k) * [ alpha*t/L^2 + (3x^2 - L^2)/(6L^2)
        - (2/pi^2) * sum_{n>=1} ((-1)^n / n^2) exp(-n^2 pi^2 alpha t / L^2)
          cos(n pi x / L) ]

    Vectorized over x and t (broadcast together).  This is the independent
    verification oracle for both finite-difference schemes.
    """
    if n_terms < 1:
        raise ValueError("n_terms must be >= 1")
    xb, tb = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
    if np.any(xb < -1e-12) or np.any(xb > scenario.L + 1e-12):
        raise ValueError("x outside the slab")
    if np.any(tb < 0):
        raise ValueError("t must be non-negative")
    scalar = xb.ndim == 0
    xf = np.atleast_1d(xb).ravel()
    tf = np.atleast_1d(tb).ravel()
    alpha = mat.diffusivity
    L = scenario.L
    fo = alpha * tf / L**2
    n = np.arange(1.0, n_terms + 1)[:, None]
    series = ((-1.0) ** n / n**2) * np.exp(-(n**2) * np.pi**2 * fo) * np.cos(n * np.pi * xf / L)
    bracket = fo + (3.0 * xf**2 - L**2) / (6.0 * L**2) - (2.0 / np.pi**2) * series.sum(axis=0)
    out = scenario.T_init + (scenario.Q * L / mat.k) * bracket
    if scalar:
        return float(out[0])
    return out.reshape(xb.shape)


def back_temperature(field: TemperatureField) -> float:
    """Temperature at the insulated face (node 0) at the final saved time."""
    return float(field.temps[-1, 0])
