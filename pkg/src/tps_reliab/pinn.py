"""Physics-informed surrogate for the slab's temperature field.

The network maps (x', t', k~, c~) -> u, where x' and t' are the normalized
space/time coordinates, k~ and c~ are the material parameters min-max scaled
over the training range, and u is temperature over T_norm.  Training
minimizes the weighted sum of the PDE residual loss, the initial-condition
loss, and the two-face boundary loss, by full-batch Adam on collocation
points drawn uniformly over the normalized domain and the material range.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .heatsim import ThermalScenario


class WeightsFormatError(ValueError):
    """Weights file is malformed, truncated, or inconsistent."""


class TrainingDivergedError(FloatingPointError):
    def __init__(self, epoch: int, message: str):
        super().__init__(message)
        self.epoch = epoch


@dataclass(frozen=True)
class TrainingConfig:
    n_grid: int = 100
    n_ib: int = 100
    loss_weights: tuple[float, float, float] = (1.0, 1.0, 1.0)
    learning_rate: float = 0.006
    epochs: int = 2000
    seed: int = 0
    k_range: tuple[float, float] = (0.1, 1.3)
    rho_cp_range: tuple[float, float] = (0.8e6, 2.4e6)
    hidden: tuple[int, ...] = (30, 30, 30)
    resample_each_epoch: bool = False

    def __post_init__(self) -> None:
        if self.n_grid < 1 or self.n_ib < 1:
            raise ValueError("point counts must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if any(a < 0 for a in self.loss_weights) or len(self.loss_weights) != 3:
            raise ValueError("loss_weights must be three non-negative values")
        for name in ("k_range", "rho_cp_range"):
            lo, hi = getattr(self, name)
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise ValueError(f"{name} must be an ordered finite pair")
        if not self.hidden or any(h < 1 for h in self.hidden):
            raise ValueError("hidden layer sizes must be positive")


@dataclass(frozen=True)
class SurrogateModel:
    """Trained network plus everything needed to interpret its inputs/outputs."""

    net: ad.MlpNetwork
    scenario: ThermalScenario
    k_range: tuple[float, float]
    rho_cp_range: tuple[float, float]
    loss_history: np.ndarray = field(default_factory=lambda: np.empty((0, 4)))

    def __post_init__(self) -> None:
        if self.net.layer_sizes[0] != 4 or self.net.layer_sizes[-1] != 1:
            raise ValueError("surrogate network must map 4 inputs to 1 output")

    def scale_materials(self, mats: np.ndarray) -> np.ndarray:
        """(n, 2) raw (k, rho_cp) -> (n, 2) min-max scaled to the training range."""
        k0, k1 = self.k_range
        c0, c1 = self.rho_cp_range
        out = np.empty_like(mats, dtype=float)
        out[:, 0] = (mats[:, 0] - k0) / (k1 - k0)
        out[:, 1] = (mats[:, 1] - c0) / (c1 - c0)
        return out


def as_material_array(mats) -> np.ndarray:
    """Accept an (n, 2) array, a single (k, rho_cp) pair, or MaterialSample(s)."""
    if hasattr(mats, "k") and hasattr(mats, "rho_cp"):
        return np.array([[mats.k, mats.rho_cp]], dtype=float)
    if isinstance(mats, (list, tuple)) and len(mats) and hasattr(mats[0], "k"):
        arr = np.array([[m.k, m.rho_cp] for m in mats], dtype=float)
    else:
        arr = np.asarray(mats, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"expected (n, 2) material array, got shape {arr.shape}")
    return arr


def _net_inputs(model: SurrogateModel, mats: np.ndarray, x: np.ndarray, t: np.ndarray) -> np.ndarray:
    scaled = model.scale_materials(mats)
    return np.column_stack([x, t, scaled[:, 0], scaled[:, 1]])


def _pde_coefficient(model: SurrogateModel, mats: np.ndarray) -> np.ndarray:
    """Dimensionless group alpha * t_final / L^2 multiplying the space term."""
    sc = model.scenario
    return (mats[:, 0] / mats[:, 1]) * sc.t_final / sc.L**2


def _flux_gradient(model: SurrogateModel, mats: np.ndarray) -> np.ndarray:
    """Normalized target gradient Q*L/(k*T_norm) at the heated face."""
    sc = model.scenario
    return sc.Q * sc.L / (mats[:, 0] * sc.T_norm)


def _physics_evaluator(kappa: np.ndarray):
    def evaluate(dv: ad.InputDerivatives):
        n = dv.u.size
        resid = dv.du_dt - kappa * dv.d2u_dx2
        loss = float(np.mean(resid**2))
        zeros = np.zeros(n)
        seeds = ad.InputDerivatives(
            u=zeros, du_dx=zeros, du_dt=2.0 * resid / n, d2u_dx2=-2.0 * resid * kappa / n
        )
        return loss, seeds

    return evaluate


def _initial_evaluator(u0: float):
    def evaluate(dv: ad.InputDerivatives):
        n = dv.u.size
        miss = dv.u - u0
        loss = float(np.mean(miss**2))
        zeros = np.zeros(n)
        seeds = ad.InputDerivatives(u=2.0 * miss / n, du_dx=zeros, du_dt=zeros, d2u_dx2=zeros)
        return loss, seeds

    return evaluate


def _boundary_evaluator(grad_target: np.ndarray):
    """Batch layout: first half at x'=0 (insulated), second half at x'=1 (flux)."""

    def evaluate(dv: ad.InputDerivatives):
        m = dv.u.size // 2
        inner = dv.du_dx[:m]
        outer = dv.du_dx[m:] - grad_target
        loss = float((np.sum(inner**2) + np.sum(outer**2)) / m)
        seed_dx = np.concatenate([2.0 * inner, 2.0 * outer]) / m
        zeros = np.zeros(2 * m)
        seeds = ad.InputDerivatives(u=zeros, du_dx=seed_dx, du_dt=zeros, d2u_dx2=zeros)
        return loss, seeds

    return evaluate


def physics_loss(model: SurrogateModel, mats, points) -> float:
    """Mean squared PDE residual du/dt' - (alpha t_final/L^2) d2u/dx'^2."""
    mats = as_material_array(mats)
    pts = np.asarray(points, dtype=float)
    dv = ad.input_derivatives(model.net, pts[:, 0], pts[:, 1], model.scale_materials(mats))
    kappa = _pde_coefficient(model, mats)
    return float(np.mean((dv.du_dt - kappa * dv.d2u_dx2) ** 2))


def initial_loss(model: SurrogateModel, mats, x_points) -> float:
    """Mean squared deviation of u(x', 0) from the normalized initial temperature."""
    mats = as_material_array(mats)
    x = np.asarray(x_points, dtype=float)
    dv = ad.input_derivatives(model.net, x, np.zeros_like(x), model.scale_materials(mats))
    u0 = model.scenario.T_init / model.scenario.T_norm
    return float(np.mean((dv.u - u0) ** 2))


def boundary_loss(model: SurrogateModel, mats, t_points) -> float:
    """Insulated-face plus heated-face gradient mismatch, averaged over t' points."""
    mats = as_material_array(mats)
    t = np.asarray(t_points, dtype=float)
    scaled = model.scale_materials(mats)
    dv0 = ad.input_derivatives(model.net, np.zeros_like(t), t, scaled)
    dv1 = ad.input_derivatives(model.net, np.ones_like(t), t, scaled)
    g = _flux_gradient(model, mats)
    return float(np.mean(dv0.du_dx**2 + (dv1.du_dx - g) ** 2))


def total_loss(model: SurrogateModel, batches, weights=(1.0, 1.0, 1.0)) -> float:
    """alpha1*physics + alpha2*initial + alpha3*boundary.

    `batches` is a mapping with keys "physics" -> (mats, points),
    "initial" -> (mats, x_points), "boundary" -> (mats, t_points).
    """
    a1, a2, a3 = weights
    mats_p, pts = batches["physics"]
    mats_i, xs = batches["initial"]
    mats_b, ts = batches["boundary"]
    return (
        a1 * physics_loss(model, mats_p, pts)
        + a2 * initial_loss(model, mats_i, xs)
        + a3 * boundary_loss(model, mats_b, ts)
    )


def _draw_batches(config: TrainingConfig, rng: np.random.Generator):
    def mats(n):
        return np.column_stack(
            [
                rng.uniform(config.k_range[0], config.k_range[1], n),
                rng.uniform(config.rho_cp_range[0], config.rho_cp_range[1], n),
            ]
        )

    n_init = config.n_ib // 2
    n_b = config.n_ib - n_init
    return {
        "physics": (mats(config.n_grid), rng.uniform(0.0, 1.0, (config.n_grid, 2))),
        "initial": (mats(n_init), rng.uniform(0.0, 1.0, n_init)),
        "boundary": (mats(n_b), rng.uniform(0.0, 1.0, n_b)),
    }


class AdamState:
    """Bias-corrected Adam over a list of parameter arrays."""

    def __init__(self, params, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        out = []
        for i, (p, g) in enumerate(zip(params, grads)):
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g
            m_hat = self.m[i] / c1
            v_hat = self.v[i] / c2
            out.append(p - self.lr * m_hat / (np.sqrt(v_hat) + self.eps))
        return out


def train(config: TrainingConfig, scenario: ThermalScenario) -> SurrogateModel:
    """Full-batch Adam over the weighted total loss; returns the trained model.

    Collocation points and material samples are drawn once up front from the
    seeded generator (or each epoch when config.resample_each_epoch is set).
    The per-epoch history records (total, physics, initial, boundary) at the
    parameters in force at the start of the epoch.
    """
    rng = np.random.default_rng(config.seed)
    net = ad.initialize_network((4, *config.hidden, 1), seed=config.seed)
    model = SurrogateModel(net, scenario, config.k_range, config.rho_cp_range)
    if config.epochs == 0:
        return model

    batches = _draw_batches(config, rng)
    params = [p.copy() for p in net.parameters()]
    opt = AdamState(params, config.learning_rate)
    a1, a2, a3 = config.loss_weights
    u0 = scenario.T_init / scenario.T_norm
    history = np.empty((config.epochs, 4))

    for epoch in range(config.epochs):
        if config.resample_each_epoch and epoch > 0:
            batches = _draw_batches(config, rng)
        current = net.with_parameters(params)
        model = SurrogateModel(current, scenario, config.k_range, config.rho_cp_range)

        mats_p, pts = batches["physics"]
        inp_p = _net_inputs(model, mats_p, pts[:, 0], pts[:, 1])
        lp, gp = ad.loss_gradient(current, inp_p, _physics_evaluator(_pde_coefficient(model, mats_p)))

        mats_i, xs = batches["initial"]
        inp_i = _net_inputs(model, mats_i, xs, np.zeros_like(xs))
        li, gi = ad.loss_gradient(current, inp_i, _initial_evaluator(u0))

        mats_b, ts = batches["boundary"]
        both = np.vstack([mats_b, mats_b])
        xs_b = np.concatenate([np.zeros_like(ts), np.ones_like(ts)])
        inp_b = _net_inputs(model, both, xs_b, np.concatenate([ts, ts]))
        lb, gb = ad.loss_gradient(current, inp_b, _boundary_evaluator(_flux_gradient(model, mats_b)))

        total = a1 * lp + a2 * li + a3 * lb
        if not math.isfinite(total):
            raise TrainingDivergedError(epoch, f"non-finite loss {total!r} at epoch {epoch}")
        history[epoch] = (total, lp, li, lb)
        grads = [a1 * p + a2 * i + a3 * b for p, i, b in zip(gp, gi, gb)]
        params = opt.step(params, grads)

    final = net.with_parameters(params)
    return SurrogateModel(final, scenario, config.k_range, config.rho_cp_range, history)


@dataclass(frozen=True)
class PredictionBatch:
    """Back temperatures in degrees C with a per-item status code.

    status 0: inside the training range; 1: extrapolated within the allowed
    margin (a warning is issued); 2: beyond the margin (temperature is NaN).
    """

    temps: np.ndarray
    status: np.ndarray

    OK = 0
    EXTRAPOLATED = 1
    OUT_OF_RANGE = 2


def predict_back_temperature(
    model: SurrogateModel, mats, extrapolation_margin: float = 0.10
) -> PredictionBatch:
    """Vectorized u(x'=0, t'=1, mat) for the whole batch, denormalized to C.

    Materials outside the training range but within `extrapolation_margin`
    (as a fraction of each range's width) are evaluated with a warning;
    anything further out gets status OUT_OF_RANGE and a NaN temperature while
    the rest of the batch proceeds.
    """
    mats = as_material_array(mats)
    n = mats.shape[0]
    status = np.zeros(n, dtype=int)
    for col, (lo, hi) in enumerate((model.k_range, model.rho_cp_range)):
        width = hi - lo
        v = mats[:, col]
        outside = (v < lo) | (v > hi)
        far = (v < lo - extrapolation_margin * width) | (v > hi + extrapolation_margin * width)
        status = np.maximum(status, np.where(far, 2, np.where(outside, 1, 0)))
    if np.any(status == PredictionBatch.EXTRAPOLATED):
        warnings.warn(
            f"{int(np.sum(status == 1))} material(s) outside the training range; "
            "extrapolating within the configured margin",
            stacklevel=2,
        )
    k0, k1 = model.k_range
    c0, c1 = model.rho_cp_range
    if not status.any():  # common case: whole batch inside the training range
        inputs = np.empty((n, 4))
        inputs[:, 0] = 0.0
        inputs[:, 1] = 1.0
        np.divide(mats[:, 0] - k0, k1 - k0, out=inputs[:, 2])
        np.divide(mats[:, 1] - c0, c1 - c0, out=inputs[:, 3])
        temps = ad.forward(model.net, inputs)
        temps *= model.scenario.T_norm
        return PredictionBatch(temps=temps, status=status)
    temps = np.full(n, np.nan)
    ok = status < PredictionBatch.OUT_OF_RANGE
    if np.any(ok):
        inputs = _net_inputs(model, mats[ok], np.zeros(int(ok.sum())), np.ones(int(ok.sum())))
        temps[ok] = ad.forward(model.net, inputs) * model.scenario.T_norm
    return PredictionBatch(temps=temps, status=status)


@dataclass(frozen=True)
class SurrogatePredictor:
    """Picklable batch back-temperature predictor wrapping a trained model."""

    model: SurrogateModel
    extrapolation_margin: float = 0.10

    def __call__(self, mats) -> np.ndarray:
        return predict_back_temperature(self.model, mats, self.extrapolation_margin).temps


def predict_field(model: SurrogateModel, mat, x_norm: np.ndarray, t_norm: np.ndarray) -> np.ndarray:
    """Temperature field in degrees C on the (t_norm x x_norm) tensor grid."""
    mats = as_material_array(mat)
    xx, tt = np.meshgrid(np.asarray(x_norm, float), np.asarray(t_norm, float))
    flat_mats = np.repeat(mats, xx.size, axis=0)
    inputs = _net_inputs(model, flat_mats, xx.ravel(), tt.ravel())
    u = ad.forward(model.net, inputs)
    return u.reshape(xx.shape) * model.scenario.T_norm


WEIGHTS_VERSION = 1
_HEADER_KEYS = ("version", "layer_sizes", "k_range", "rho_cp_range",
                "T_norm", "t_final", "L", "Q", "T_init")


def save_weights(model: SurrogateModel, path) -> None:
    """Versioned self-describing text format; loads back bit-exactly."""
    num = lambda v: repr(float(v))  # shortest decimal that round-trips exactly
    lines = [
        f"version {WEIGHTS_VERSION}",
        "layer_sizes " + " ".join(str(s) for s in model.net.layer_sizes),
        f"k_range {num(model.k_range[0])} {num(model.k_range[1])}",
        f"rho_cp_range {num(model.rho_cp_range[0])} {num(model.rho_cp_range[1])}",
        f"T_norm {num(model.scenario.T_norm)}",
        f"t_final {num(model.scenario.t_final)}",
        f"L {num(model.scenario.L)}",
        f"Q {num(model.scenario.Q)}",
        f"T_init {num(model.scenario.T_init)}",
    ]
    for l, (w, b) in enumerate(zip(model.net.weights, model.net.biases)):
        lines.append(f"weights {l} {w.shape[0]} {w.shape[1]}")
        lines.extend(" ".join(num(v) for v in row) for row in w)
        lines.append(f"biases {l} {b.shape[0]}")
        lines.append(" ".join(num(v) for v in b))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_weights(path) -> SurrogateModel:
    with open(path) as fh:
        raw = [ln.strip() for ln in fh if ln.strip()]
    pos = 0

    def take(section: str) -> list[str]:
        nonlocal pos
        if pos >= len(raw):
            raise WeightsFormatError(f"truncated weights file: missing section '{section}'")
        parts = raw[pos].split()
        if parts[0] != section:
            raise WeightsFormatError(
                f"expected section '{section}' at line {pos + 1}, found '{parts[0]}'"
            )
        pos += 1
        return parts[1:]

    version = int(take("version")[0])
    if version != WEIGHTS_VERSION:
        raise WeightsFormatError(f"unsupported weights version {version}")
    sizes = tuple(int(s) for s in take("layer_sizes"))
    k_range = tuple(float(v) for v in take("k_range"))
    rho_cp_range = tuple(float(v) for v in take("rho_cp_range"))
    t_norm = float(take("T_norm")[0])
    t_final = float(take("t_final")[0])
    length = float(take("L")[0])
    q = float(take("Q")[0])
    t_init = float(take("T_init")[0])

    def rows(n: int, width: int, what: str) -> np.ndarray:
        nonlocal pos
        if pos + n > len(raw):
            raise WeightsFormatError(f"truncated weights file: missing section '{what}'")
        block = np.array([[float(v) for v in raw[pos + i].split()] for i in range(n)])
        if block.shape != (n, width):
            raise WeightsFormatError(f"section '{what}' has shape {block.shape}, expected {(n, width)}")
        pos += n
        return block

    weights, biases = [], []
    for l in range(len(sizes) - 1):
        hdr = take("weights")
        if [int(h) for h in hdr] != [l, sizes[l + 1], sizes[l]]:
            raise WeightsFormatError(f"weights header mismatch at layer {l}: {hdr}")
        weights.append(rows(sizes[l + 1], sizes[l], f"weights {l}"))
        hdr = take("biases")
        if [int(h) for h in hdr] != [l, sizes[l + 1]]:
            raise WeightsFormatError(f"biases header mismatch at layer {l}: {hdr}")
        biases.append(rows(1, sizes[l + 1], f"biases {l}")[0])

    net = ad.MlpNetwork(sizes, tuple(weights), tuple(biases))
    scenario = ThermalScenario(Q=q, L=length, t_final=t_final, T_init=t_init, T_norm=t_norm)
    return SurrogateModel(net, scenario, k_range, rho_cp_range)
