"""Deterministic synthetic aeroengine data with the 18-input / 2-output schema.

A stand-in for envelope-flight simulation decks. Flight conditions and a
latent throttle are sampled, the 18 sensor channels are derived from them by
smooth monotone relations, and thrust / specific impulse come from a
momentum-plus-pressure nozzle balance evaluated on those channels
(:func:`surrogate_targets`). None of the constants below describe a real
engine; they only fix smoothness, monotonicity and dynamic range.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import INPUT_COLUMNS, Dataset
from .errors import ParameterError

G0 = 9.80665
GAMMA = 1.4
R_AIR = 287.05
FUEL_LHV = 43.0e6
BLOCK = 1024

_COL = {name: i for i, name in enumerate(INPUT_COLUMNS)}


@dataclass(frozen=True)
class Regime:
    mach: tuple[float, float]
    altitude_m: tuple[float, float]
    epr: tuple[float, float]  # EPR = a + b * throttle
    ramjet_onset_mach: float
    throat_area_m2: float
    map_ripple: float  # amplitude of the spool-speed efficiency ripple
    shutdown_fraction: float
    default_noise: float


REGIMES = {
    "hs": Regime((2.0, 4.0), (14_000.0, 30_000.0), (1.1, 0.6), 0.0, 0.5, 0.02, 0.0, 0.002),
    "ls": Regime((0.0, 2.3), (0.0, 18_000.0), (1.3, 1.7), 1.2, 0.3, 0.08, 0.005, 0.005),
}
_REGIME_ID = {"hs": 1, "ls": 2}


@dataclass(frozen=True)
class SyntheticGenConfig:
    regime: str = "hs"
    count: int = 10_000
    noise_sd: float | None = None  # relative; None -> regime default
    seed: int = 0

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ParameterError(f"unknown regime {self.regime!r}; expected one of {tuple(REGIMES)}")
        if self.count < 0:
            raise ParameterError(f"count must be >= 0, got {self.count}")
        if self.noise_sd is not None and self.noise_sd < 0:
            raise ParameterError(f"noise_sd must be >= 0, got {self.noise_sd}")

    @property
    def noise(self) -> float:
        return REGIMES[self.regime].default_noise if self.noise_sd is None else float(self.noise_sd)


def standard_atmosphere(altitude_m):
    """Static temperature [K] and pressure [Pa] of the standard atmosphere up to 32 km."""
    h = np.asarray(altitude_m, dtype=np.float64)
    t_trop = 288.15 - 0.0065 * np.minimum(h, 11_000.0)
    p_trop = 101_325.0 * (t_trop / 288.15) ** 5.25588
    # isothermal 11-20 km, then +1 K/km
    p_iso = p_trop * np.exp(-(np.minimum(h, 20_000.0) - 11_000.0) / 6341.62)
    t_up = 216.65 + 0.001 * np.maximum(h - 20_000.0, 0.0)
    p_up = p_iso * (t_up / 216.65) ** -34.1632
    t = np.where(h <= 11_000.0, t_trop, t_up)
    p = np.where(h <= 11_000.0, p_trop, p_up)
    return t, p


def intake_recovery(mach):
    """Total pressure recovery, flat subsonically and falling off supersonically."""
    m = np.asarray(mach, dtype=np.float64)
    return 0.995 - 0.075 * np.maximum(m - 1.0, 0.0) ** 1.35


def _smoothstep(x):
    x = np.clip(x, 0.0, 1.0)
    return x * x * (3.0 - 2.0 * x)


def _draws(cfg: SyntheticGenConfig):
    """Uniform and normal draws from per-block streams (order-independent)."""
    n_blocks = -(-cfg.count // BLOCK)
    u, z = [], []
    for b in range(n_blocks):
        rng = np.random.default_rng([cfg.seed, _REGIME_ID[cfg.regime], b])
        u.append(rng.random((BLOCK, 8)))
        z.append(rng.standard_normal((BLOCK, 2)))
    if not n_blocks:
        return np.empty((0, 8)), np.empty((0, 2))
    return np.vstack(u)[: cfg.count], np.vstack(z)[: cfg.count]


def generate_inputs(regime_name: str, u: np.ndarray) -> np.ndarray:
    """Map uniform draws (n, 8) to the 18 sensor channels."""
    rg = REGIMES[regime_name]
    n = len(u)
    alt = rg.altitude_m[0] + (rg.altitude_m[1] - rg.altitude_m[0]) * u[:, 0]
    mach = rg.mach[0] + (rg.mach[1] - rg.mach[0]) * u[:, 1]
    throttle = 0.02 + 0.98 * u[:, 2]
    shutdown = u[:, 7] < rg.shutdown_fraction
    throttle = np.where(shutdown, 0.0, throttle)
    ramjet = u[:, 3] * _smoothstep((mach - rg.ramjet_onset_mach) / 1.1) if rg.ramjet_onset_mach else 0.2 + 0.8 * u[:, 3]
    ramjet = np.where(shutdown, 0.0, ramjet)
    bypass = 0.3 + 0.6 * u[:, 4]
    jitter = 2.0 * u[:, 5] - 1.0
    expansion = 2.0 * u[:, 6] - 1.0

    t_amb, p_amb = standard_atmosphere(alt)
    ram = 1.0 + 0.5 * (GAMMA - 1.0) * mach**2
    tt0 = t_amb * ram
    pt0 = p_amb * ram ** (GAMMA / (GAMMA - 1.0))
    sigma = intake_recovery(mach)
    mdot = 0.02 * sigma * pt0 / np.sqrt(tt0) * (0.45 + 0.55 * throttle)
    epr = rg.epr[0] + rg.epr[1] * throttle
    throat = rg.throat_area_m2 * (0.7 + 0.5 * throttle) * (1.0 + 0.05 * jitter)

    X = np.empty((n, len(INPUT_COLUMNS)))
    X[:, _COL["atm_static_pressure_pa"]] = p_amb
    X[:, _COL["atm_static_temperature_k"]] = t_amb
    X[:, _COL["flight_mach"]] = mach
    X[:, _COL["intake_pressure_recovery"]] = sigma
    X[:, _COL["intake_mass_flow_kg_s"]] = mdot
    X[:, _COL["fan_relative_speed"]] = 0.45 + 0.5 * throttle + 0.05 * np.sin(np.pi * mach / rg.mach[1])
    X[:, _COL["compressor_relative_speed"]] = 0.5 + 0.45 * throttle**0.8
    X[:, _COL["lpt_outlet_total_temperature_k"]] = tt0 + 250.0 + 550.0 * throttle
    X[:, _COL["fan_inlet_total_pressure_pa"]] = sigma * pt0
    X[:, _COL["lpt_outlet_static_pressure_pa"]] = 0.9 * sigma * pt0 * epr
    X[:, _COL["engine_pressure_ratio"]] = epr
    X[:, _COL["turbine_throttle_lever_angle_deg"]] = np.where(shutdown, 0.0, 15.0 + 115.0 * throttle)
    X[:, _COL["turbine_outlet_relative_opening"]] = 0.25 + 0.7 * throttle
    X[:, _COL["bypass_mixer_area_ratio"]] = bypass
    X[:, _COL["combined_throttle_angle_deg"]] = 10.0 + 80.0 * ramjet
    X[:, _COL["ramjet_fuel_flow_kg_s"]] = 0.03 * ramjet * mdot
    X[:, _COL["nozzle_throat_area_m2"]] = throat
    X[:, _COL["nozzle_exit_area_m2"]] = throat * (_design_area_ratio(mach) + 0.2 * expansion)
    return X


def _design_area_ratio(mach):
    return 1.2 + 0.35 * mach


def surrogate_targets(X: np.ndarray, regime_name: str) -> np.ndarray:
    """Noise-free thrust [N] and specific impulse [s] from the sensor channels."""
    rg = REGIMES[regime_name]
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    col = lambda name: X[:, _COL[name]]  # noqa: E731
    p_amb = col("atm_static_pressure_pa")
    mach = col("flight_mach")
    mdot = col("intake_mass_flow_kg_s")
    epr = col("engine_pressure_ratio")
    tla = col("turbine_throttle_lever_angle_deg")
    throat = col("nozzle_throat_area_m2")
    exit_area = col("nozzle_exit_area_m2")

    v0 = mach * np.sqrt(GAMMA * R_AIR * col("atm_static_temperature_k"))
    running = tla > 0.0
    throttle = np.clip((tla - 15.0) / 115.0, 0.0, 1.0)
    fuel = np.where(running, mdot * (0.006 + 0.018 * throttle), 0.0) + col("ramjet_fuel_flow_kg_s")
    far = fuel / mdot

    ripple = 1.0 + rg.map_ripple * np.sin(2.0 * np.pi * col("fan_relative_speed"))
    efficiency = (0.12 + 0.06 * np.log(epr) + 0.1 * np.tanh(mach / 2.0)) * ripple
    v_jet = np.sqrt(v0**2 + 2.0 * efficiency * far * FUEL_LHV)

    design_ar = _design_area_ratio(mach)
    area_ratio = exit_area / throat
    bypass = col("bypass_mixer_area_ratio")
    velocity_coeff = 0.985 - 0.05 * np.log(area_ratio / design_ar) ** 2 - 0.02 * (bypass - 0.6) ** 2
    p_exit = p_amb * (design_ar / area_ratio) ** 1.25

    thrust = (mdot + fuel) * velocity_coeff * v_jet - mdot * v0 + 0.2 * (p_exit - p_amb) * exit_area
    with np.errstate(divide="ignore", invalid="ignore"):
        impulse = np.where(fuel > 0.0, thrust / (fuel * G0), 0.0)
    return np.column_stack([thrust, impulse])


def synth_generate(config: SyntheticGenConfig) -> Dataset:
    """Generate ``config.count`` raw samples (zero-impulse rows included)."""
    u, z = _draws(config)
    X = generate_inputs(config.regime, u)
    Y = surrogate_targets(X, config.regime) if len(X) else np.empty((0, 2))
    Y = Y * (1.0 + config.noise * z)
    return Dataset(X, Y)
