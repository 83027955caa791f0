"""Overnight-fast patient simulation under closed-loop insulin control.

One scenario = an evening meal at t=0 (carb impulse into the gut plus a
pump bolus) followed by a fast of ``fast_hours``. A minimal
glucose/insulin/carb ODE system is integrated with fixed-step RK4; a
CGM with ARMA(1,1) sensor noise is read every few minutes and drives a
PID controller that can only *add* insulin (underactuated, clamped at
zero). The risk functional is the minimum blood glucose over the fast.

The basal plasma insulin ``Ib`` is sustained endogenously by the
``-ke*(Ip - Ib)`` clearance term, i.e. it already accounts for the
pump's steady background delivery; ``basal_rate`` in the controller
config is delivery *above* that baseline and defaults to zero, which
makes (Gb, Ib) an exact equilibrium of the unforced system.
"""

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from ._kernels import (
    INSULIN_VOLUME_ML_PER_KG,
    STATUS_NEGATIVE,
    STATUS_NONFINITE,
    _rollout_core,
)
from .errors import DataError, SimulationDivergedError

__all__ = [
    "PARAM_NAMES",
    "PhysParams",
    "ScenarioSample",
    "Rollout",
    "SimConfig",
    "ControllerConfig",
    "ArmaState",
    "PidState",
    "cgm_read",
    "controller_step",
    "rollout",
    "risk",
    "simulate_batch",
    "load_sim_config",
    "dump_trace_csv",
]

# Canonical physiological parameter order; every flat vector uses it.
PARAM_NAMES = (
    "Vg", "p1", "SI", "p2", "ka1", "ka2", "ke",
    "kabs", "kemp", "fbio", "Gb", "Ib", "BW",
)


@dataclass(frozen=True)
class PhysParams:
    """Stand-in physiological parameter vector (units in field comments)."""

    Vg: float      # glucose distribution volume, dL/kg
    p1: float      # glucose effectiveness, 1/min
    SI: float      # insulin sensitivity, 1/min per uU/mL
    p2: float      # remote-insulin decay, 1/min
    ka1: float     # subcutaneous absorption, depot 1 -> 2, 1/min
    ka2: float     # subcutaneous absorption, depot 2 -> plasma, 1/min
    ke: float      # plasma insulin clearance, 1/min
    kabs: float    # gut absorption, 1/min
    kemp: float    # gastric emptying, 1/min
    fbio: float    # carbohydrate bioavailability, dimensionless
    Gb: float      # basal glucose, mg/dL
    Ib: float      # basal plasma insulin, uU/mL
    BW: float      # body weight, kg

    def validate(self):
        vec = self.to_vector()
        positive = vec[:9]
        if np.any(positive <= 0) or self.BW <= 0 or self.Ib <= 0:
            raise DataError("rates, volumes, Ib and BW must be positive")
        if not 0.0 < self.fbio <= 1.0:
            raise DataError("fbio must lie in (0, 1]")
        if not 70.0 <= self.Gb <= 180.0:
            raise DataError("Gb must lie in [70, 180] mg/dL")
        return self

    def to_vector(self):
        return np.array([getattr(self, name) for name in PARAM_NAMES])

    @classmethod
    def from_vector(cls, vec):
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (len(PARAM_NAMES),):
            raise DataError(f"parameter vector must have length {len(PARAM_NAMES)}")
        return cls(**dict(zip(PARAM_NAMES, vec.tolist())))


@dataclass(frozen=True)
class ScenarioSample:
    """One scenario: a synthetic patient, their meal, and a noise seed."""

    params: PhysParams
    carbs_g: float
    fast_hours: float
    seed: int = 0


@dataclass(frozen=True)
class Rollout:
    t: np.ndarray        # minutes since the meal
    bg: np.ndarray       # true blood glucose, mg/dL
    cgm: np.ndarray      # sensor reading in effect, mg/dL
    insulin: np.ndarray  # infusion in effect, uU/min
    min_bg: float
    hypo: bool


@dataclass(frozen=True)
class SimConfig:
    step_min: float = 1.0
    cgm_period_min: float = 5.0
    gamma: float = 70.0
    arma_phi: float = 0.7
    arma_psi: float = 0.3
    arma_sigma: float = 2.0  # mg/dL


@dataclass(frozen=True)
class ControllerConfig:
    kp: float = 250.0           # uU/min per mg/dL
    ki: float = 2.0             # uU/min per mg/dL/min of accumulated error
    kd: float = 1500.0          # uU/min per mg/dL/min
    target: float = 120.0       # mg/dL
    basal_rate: float = 0.0     # uU/min above the Ib-sustaining baseline
    max_rate: float = 5e6 / 60  # uU/min; total <= 5 U/h
    carb_ratio: float = 10.0    # g of carbohydrate per U of bolus insulin


@dataclass(frozen=True)
class ArmaState:
    """ARMA(1,1) sensor-noise state; owns its random stream."""

    phi: float
    psi: float
    sigma: float
    rng: np.random.Generator = field(compare=False)
    e_prev: float = 0.0
    eta_prev: float = 0.0


@dataclass(frozen=True)
class PidState:
    integral: float = 0.0
    prev_err: float = 0.0
    primed: bool = False  # becomes True after the first tick


def cgm_read(true_bg, state):
    """One CGM reading: true BG plus correlated noise, floored at 1 mg/dL.

    Returns (reading, next_state); e_t = phi*e_{t-1} + eta_t + psi*eta_{t-1}.
    """
    eta = float(state.rng.normal(0.0, state.sigma)) if state.sigma > 0 else 0.0
    e = state.phi * state.e_prev + eta + state.psi * state.eta_prev
    reading = max(true_bg + e, 1.0)
    return reading, replace(state, e_prev=e, eta_prev=eta)


def controller_step(cgm, state, config, dt_min=5.0):
    """One PID tick on (cgm - target); output clamped into [0, max_rate].

    The integral term is frozen whenever the clamp is active
    (conditional anti-windup). Returns (infusion, next_state).
    """
    err = cgm - config.target
    prev = err if not state.primed else state.prev_err
    deriv = (err - prev) / dt_min
    integral_new = state.integral + err * dt_min
    raw = config.basal_rate + config.kp * err + config.ki * integral_new + config.kd * deriv
    infusion = min(max(raw, 0.0), config.max_rate)
    integral = integral_new if infusion == raw else state.integral
    return infusion, PidState(integral=integral, prev_err=err, primed=True)


def rollout(sample, controller=None, sim=None):
    """Simulate one meal-plus-fast; deterministic given (sample, configs)."""
    controller = controller or ControllerConfig()
    sim = sim or SimConfig()
    params = sample.params.validate()

    n_steps = int(round(sample.fast_hours * 60.0 / sim.step_min))
    if n_steps < 1:
        raise DataError("fast horizon shorter than one integration step")
    cgm_every = int(round(sim.cgm_period_min / sim.step_min))
    if cgm_every < 1 or not math.isclose(cgm_every * sim.step_min, sim.cgm_period_min):
        raise DataError("cgm_period_min must be an integer multiple of step_min")

    n_ticks = n_steps // cgm_every + 1
    noise_rng = np.random.default_rng(sample.seed)
    eta = noise_rng.standard_normal(n_ticks) * sim.arma_sigma

    bolus_uu = sample.carbs_g / controller.carb_ratio * 1e6  # U -> uU
    carbs_mg = sample.carbs_g * 1000.0

    bg = np.empty(n_steps + 1)
    cgm = np.empty(n_steps + 1)
    ins = np.empty(n_steps + 1)

    min_bg, status, t_fail = _rollout_core(
        params.Vg, params.p1, params.SI, params.p2, params.ka1, params.ka2,
        params.ke, params.kabs, params.kemp, params.fbio, params.Gb,
        params.Ib, params.BW,
        carbs_mg, bolus_uu, n_steps, sim.step_min, cgm_every,
        eta, sim.arma_phi, sim.arma_psi,
        controller.kp, controller.ki, controller.kd, controller.target,
        controller.basal_rate, controller.max_rate,
        bg, cgm, ins,
    )
    if status == STATUS_NONFINITE:
        raise SimulationDivergedError(
            f"state became non-finite at t = {t_fail:.1f} min", t_min=t_fail)
    if status == STATUS_NEGATIVE:
        raise SimulationDivergedError(
            f"state became negative at t = {t_fail:.1f} min", t_min=t_fail)

    t = np.arange(n_steps + 1) * sim.step_min
    return Rollout(t=t, bg=bg, cgm=cgm, insulin=ins,
                   min_bg=float(min_bg), hypo=bool(min_bg <= sim.gamma))


def risk(r):
    """Risk functional f(X): the minimum blood glucose of a rollout."""
    return r.min_bg


def _risk_only(sample, controller, sim):
    return rollout(sample, controller, sim).min_bg


def simulate_batch(samples, controller=None, sim=None, threads=None):
    """Minimum-BG risks for a batch of scenarios; order-stable.

    Results are keyed by sample index, so they do not depend on worker
    scheduling. ``threads=None`` or 1 runs serially.
    """
    controller = controller or ControllerConfig()
    sim = sim or SimConfig()
    samples = list(samples)
    risks = np.empty(len(samples))
    if threads is None or threads <= 1 or len(samples) < 2:
        for i, s in enumerate(samples):
            risks[i] = _risk_only(s, controller, sim)
        return risks

    def work(chunk):
        for i in chunk:
            risks[i] = _risk_only(samples[i], controller, sim)

    chunks = np.array_split(np.arange(len(samples)), threads * 4)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        list(pool.map(work, [c for c in chunks if c.size]))
    return risks


def load_sim_config(path):
    """Read the JSON sim/controller config; returns (SimConfig, ControllerConfig)."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError as exc:
        raise DataError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed config JSON in {path}: {exc}") from exc
    try:
        arma = raw.get("arma", {})
        sim = SimConfig(
            step_min=float(raw.get("step_min", 1.0)),
            cgm_period_min=float(raw.get("cgm_period_min", 5.0)),
            gamma=float(raw.get("gamma", 70.0)),
            arma_phi=float(arma.get("phi", 0.7)),
            arma_psi=float(arma.get("psi", 0.3)),
            arma_sigma=float(arma.get("sigma", 2.0)),
        )
        pid = raw.get("pid", {})
        defaults = ControllerConfig()
        controller = ControllerConfig(
            kp=float(pid.get("kp", defaults.kp)),
            ki=float(pid.get("ki", defaults.ki)),
            kd=float(pid.get("kd", defaults.kd)),
            target=float(pid.get("target", defaults.target)),
            basal_rate=float(pid.get("basal_rate", defaults.basal_rate)),
            max_rate=float(pid.get("max_rate", defaults.max_rate)),
            carb_ratio=float(pid.get("carb_ratio", defaults.carb_ratio)),
        )
    except (TypeError, ValueError) as exc:
        raise DataError(f"bad value in config {path}: {exc}") from exc
    return sim, controller


def dump_trace_csv(r, path):
    """Write a rollout trace as CSV with columns t_min,bg,cgm,insulin."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t_min", "bg", "cgm", "insulin"])
        for i in range(r.t.shape[0]):
            writer.writerow([f"{r.t[i]:.6g}", f"{r.bg[i]:.10g}",
                             f"{r.cgm[i]:.10g}", f"{r.insulin[i]:.10g}"])
