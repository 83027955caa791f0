"""Behavior-data ingestion and per-patient generative models.

Eating behavior (evening-meal carbs, overnight fast length) is fitted
as a 2-d logit-normal from pre-extracted survey rows. Physiology gets a
per-patient logit-normal whose box spans 1/10 of the subpopulation
range centered on the patient's nominal parameters, with an isotropic
0.25 I logit-space covariance (we claim no knowledge of the covariance
of these small perturbations). The two blocks are independent, so the
joint scenario distribution is block-diagonal in logit space.
"""

import csv
import json
import logging
from dataclasses import dataclass

import numpy as np

from .distributions import GaussianMeanFamily, LogitNormal, fit_logit_normal, logit
from .errors import DataError, DegenerateDataError
from .simulator import PARAM_NAMES, PhysParams, ScenarioSample

__all__ = [
    "BehaviorRecord",
    "PatientProfile",
    "ScenarioModel",
    "load_behavior_csv",
    "fit_behavior_model",
    "load_patient_json",
    "build_patient_model",
    "build_scenario_model",
    "sample_scenario",
]

logger = logging.getLogger(__name__)

MIN_FAST_HOURS = 5.0
PATIENT_SIGMA_DIAG = 0.25  # logit-space variance per physiology dimension


@dataclass(frozen=True)
class BehaviorRecord:
    """One survey row: evening-meal carbs (g) and overnight fast (h)."""

    carbs_g: float
    fast_hours: float

    def __post_init__(self):
        if not self.carbs_g > 0:
            raise DataError(f"carbs_g must be positive, got {self.carbs_g}")
        if not self.fast_hours > MIN_FAST_HOURS:
            raise DataError(
                f"fast_hours must exceed {MIN_FAST_HOURS}, got {self.fast_hours}")


def load_behavior_csv(path):
    """Parse behavior records from a CSV with header ``carbs_g,fast_hours``.

    Rows violating the record invariants (carbs <= 0, fast <= 5 h) are
    skipped and logged with their 1-based line numbers. Unparseable
    rows, a missing file, a wrong header, or an empty result raise
    :class:`DataError`.
    """
    try:
        fh = open(path, newline="", encoding="utf-8")
    except FileNotFoundError as exc:
        raise DataError(f"behavior file not found: {path}") from exc
    records = []
    rejected = []
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["carbs_g", "fast_hours"]:
            raise DataError(
                f"{path}: expected header 'carbs_g,fast_hours', got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 2:
                raise DataError(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
            try:
                carbs = float(row[0])
                fast = float(row[1])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: non-numeric field") from exc
            if carbs > 0 and fast > MIN_FAST_HOURS:
                records.append(BehaviorRecord(carbs_g=carbs, fast_hours=fast))
            else:
                rejected.append(lineno)
    if rejected:
        logger.warning("%s: rejected %d row(s) violating invariants (lines %s)",
                       path, len(rejected), rejected)
    if not records:
        raise DataError(f"{path}: no valid behavior records")
    return records


def fit_behavior_model(records, pad=0.01):
    """Fit the 2-d (carbs, fast) logit-normal from behavior records."""
    if len(records) < 2:
        raise DataError("need at least 2 behavior records to fit")
    data = np.array([[r.carbs_g, r.fast_hours] for r in records])
    return fit_logit_normal(data, pad=pad)


@dataclass(frozen=True)
class PatientProfile:
    """Nominal physiology plus subpopulation bounds for one patient."""

    id: str
    age_group: str
    nominal: np.ndarray   # ordered per PARAM_NAMES
    pop_lo: np.ndarray
    pop_hi: np.ndarray
    nonneg: np.ndarray    # bool mask: parameter must stay >= 0

    def __post_init__(self):
        d = len(PARAM_NAMES)
        for name in ("nominal", "pop_lo", "pop_hi"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (d,):
                raise DataError(f"{name} must have length {d}")
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "nonneg", np.asarray(self.nonneg, dtype=bool))
        if self.nonneg.shape != (d,):
            raise DataError(f"nonneg mask must have length {d}")
        if np.any(self.pop_lo > self.nominal) or np.any(self.nominal > self.pop_hi):
            raise DataError(f"patient {self.id}: nominal outside [pop_lo, pop_hi]")
        if self.age_group not in ("child", "adolescent", "adult"):
            raise DataError(f"unknown age_group {self.age_group!r}")

    def nominal_params(self):
        return PhysParams.from_vector(self.nominal).validate()


def load_patient_json(path):
    """Load a patient profile; schema {id, age_group, params: {name: {...}}}.

    A nonnegative-flagged parameter whose nominal value is exactly 0
    would put the per-patient support boundary on the nominal point
    (its logit is undefined), so such profiles are rejected here.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError as exc:
        raise DataError(f"patient file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed patient JSON in {path}: {exc}") from exc
    try:
        params = raw["params"]
        missing = [n for n in PARAM_NAMES if n not in params]
        extra = [n for n in params if n not in PARAM_NAMES]
        if missing or extra:
            raise DataError(
                f"{path}: parameter names mismatch (missing {missing}, extra {extra})")
        nominal = np.array([float(params[n]["value"]) for n in PARAM_NAMES])
        lo = np.array([float(params[n]["lo"]) for n in PARAM_NAMES])
        hi = np.array([float(params[n]["hi"]) for n in PARAM_NAMES])
        nonneg = np.array([bool(params[n].get("nonneg", False)) for n in PARAM_NAMES])
        profile = PatientProfile(
            id=str(raw["id"]), age_group=str(raw["age_group"]),
            nominal=nominal, pop_lo=lo, pop_hi=hi, nonneg=nonneg)
    except KeyError as exc:
        raise DataError(f"{path}: missing field {exc}") from exc
    if np.any(nonneg & (nominal == 0.0)):
        bad = [PARAM_NAMES[i] for i in np.nonzero(nonneg & (nominal == 0.0))[0]]
        raise DataError(
            f"{path}: zero nominal value for nonnegative parameter(s) {bad}; "
            "the clamped support would exclude the nominal point")
    return profile


def build_patient_model(profile):
    """Per-patient physiology model on a box of 1/20 half-width.

    The box spans [Y - w, Y + w] with w = (pop_hi - pop_lo)/20, lower
    edges clamped at 0 for nonnegative-flagged parameters; the
    logit-space mean puts the nominal point at the box's image and the
    covariance is the fixed isotropic 0.25 I.
    """
    width = (profile.pop_hi - profile.pop_lo) / 20.0
    if np.any(width <= 0):
        bad = [PARAM_NAMES[i] for i in np.nonzero(width <= 0)[0]]
        raise DegenerateDataError(
            f"patient {profile.id}: zero subpopulation range for {bad}")
    a = profile.nominal - width
    a = np.where(profile.nonneg, np.maximum(a, 0.0), a)
    b = profile.nominal + width
    if np.any(profile.nominal <= a):
        bad = [PARAM_NAMES[i] for i in np.nonzero(profile.nominal <= a)[0]]
        raise DataError(
            f"patient {profile.id}: nominal value on the clamped support "
            f"boundary for {bad}")
    mu = logit((profile.nominal - a) / (b - a))
    sigma = PATIENT_SIGMA_DIAG * np.eye(len(PARAM_NAMES))
    return LogitNormal(a=a, b=b, mu=np.atleast_1d(mu), sigma=sigma)


@dataclass(frozen=True)
class ScenarioModel:
    """Joint base distribution P0: independent physiology and behavior blocks."""

    physiology: LogitNormal
    behavior: LogitNormal

    def __post_init__(self):
        if self.behavior.dim != 2:
            raise DataError("behavior block must be 2-dimensional (carbs, fast)")

    @property
    def dim(self):
        return self.physiology.dim + 2

    def joint(self):
        """The joint logit-normal (block-diagonal covariance)."""
        dp = self.physiology.dim
        sigma = np.zeros((self.dim, self.dim))
        sigma[:dp, :dp] = self.physiology.sigma
        sigma[dp:, dp:] = self.behavior.sigma
        return LogitNormal(
            a=np.concatenate([self.physiology.a, self.behavior.a]),
            b=np.concatenate([self.physiology.b, self.behavior.b]),
            mu=np.concatenate([self.physiology.mu, self.behavior.mu]),
            sigma=sigma,
        )

    def family(self, radius):
        """Gaussian mean family over the joint logit space, centered at P0."""
        j = self.joint()
        return GaussianMeanFamily(cov=j.sigma, center=j.mu, radius=radius)

    def to_scenarios(self, z, seeds):
        """Map joint logit-space rows to ScenarioSamples with noise seeds."""
        z = np.atleast_2d(np.asarray(z, dtype=float))
        dp = self.physiology.dim
        phys = self.physiology.to_observation(z[:, :dp])
        beh = self.behavior.to_observation(z[:, dp:])
        seeds = np.asarray(seeds)
        if seeds.shape[0] != z.shape[0]:
            raise DataError("need one noise seed per scenario row")
        return [
            ScenarioSample(
                params=PhysParams.from_vector(phys[i]),
                carbs_g=float(beh[i, 0]),
                fast_hours=float(beh[i, 1]),
                seed=int(seeds[i]),
            )
            for i in range(z.shape[0])
        ]


def build_scenario_model(profile, behavior_model):
    return ScenarioModel(physiology=build_patient_model(profile),
                         behavior=behavior_model)


def sample_scenario(model, rng, n):
    """Draw n scenarios from P0; blocks independent, deterministic per seed."""
    z_phys = model.physiology.sample_logit(rng, n)
    z_beh = model.behavior.sample_logit(rng, n)
    seeds = rng.integers(0, 2**62, size=n)
    return model.to_scenarios(np.hstack([z_phys, z_beh]), seeds)
