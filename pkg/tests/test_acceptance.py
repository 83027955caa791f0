"""Acceptance suite: one test and one printed PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines as
they complete. Tolerances are pinned here and nowhere else.
"""

import json
import math
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from hypoguard.cli import main
from hypoguard.distributions import (
    GaussianMeanFamily,
    LogitNormal,
    fit_logit_normal,
    graphical_lasso,
)
from hypoguard.experiments import (
    CEConfig,
    gaussian_cdf,
    run_comparison,
    run_synthetic_validation,
)
from hypoguard.population import (
    build_patient_model,
    fit_behavior_model,
    load_behavior_csv,
    load_patient_json,
)
from hypoguard.rare_event import cross_entropy_train, is_estimate
from hypoguard.simulator import (
    ScenarioSample,
    load_sim_config,
    rollout,
)

from test_graphical_lasso import proximal_gradient_oracle

DATA_DIR = Path(__file__).resolve().parents[1] / "src" / "hypoguard" / "data"


def _verdict(num, name, ok, detail):
    line = f"ACCEPTANCE {num:2d} {name}: {'PASS' if ok else 'FAIL'} ({detail})"
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def adult_reports():
    profile = load_patient_json(DATA_DIR / "patient_adult.json")
    behavior = fit_behavior_model(load_behavior_csv(DATA_DIR / "behavior.csv"))
    sim, ctrl = load_sim_config(DATA_DIR / "sim_adult.json")
    reports = {}
    for seed in (0, 1, 2):
        cfg = CEConfig(gamma=70.0, seed=seed)  # rho=0.01, N_k=500, K=10
        reports[seed] = run_comparison(profile, behavior, ctrl, sim, cfg,
                                       n=10_000, resamples=500, threads=4)
    return reports


def test_criterion_01_synthetic_analytic_oracle():
    t0 = time.perf_counter()
    report = run_synthetic_validation(
        CEConfig(gamma=-3.0, rho=0.05, seed=0), n=10_000, resamples=200)
    elapsed = time.perf_counter() - t0
    p = gaussian_cdf(-3.0)
    mc_ok = abs(report.mc.p_hat - p) <= 3 * max(report.mc.std_err, 1e-12)
    ce_ok = abs(report.ce.p_hat - p) <= 3 * report.ce.std_err
    var_ok = report.ce.std_err <= 0.5 * report.mc.std_err
    _verdict(1, "synthetic analytic oracle", mc_ok and ce_ok and var_ok
             and elapsed < 30.0,
             f"mc={report.mc.p_hat:.2e} ce={report.ce.p_hat:.2e} "
             f"p={p:.2e} se_ce/se_mc={report.ce.std_err / report.mc.std_err:.3f} "
             f"t={elapsed:.1f}s")


def test_criterion_02_event_frequency(adult_reports):
    ratios = {seed: r.event_ratio for seed, r in adult_reports.items()}
    ok = all(v >= 2.0 for v in ratios.values())
    _verdict(2, "event-frequency >= 2x on adult, 3/3 seeds", ok,
             "ratios=" + ", ".join(f"s{k}:{v:.2f}" for k, v in ratios.items()))


def test_criterion_03_variance_reduction(adult_reports):
    ratios = {seed: r.bootstrap_std_ratio for seed, r in adult_reports.items()}
    ok = all(v >= 1.5 for v in ratios.values())
    _verdict(3, "bootstrap std ratio >= 1.5 on adult", ok,
             "achieved " + ", ".join(f"s{k}:{v:.2f}" for k, v in ratios.items()))


def test_criterion_04_unbiasedness():
    t0 = time.perf_counter()
    family = GaussianMeanFamily(cov=[[1.0]], center=[0.0], radius=3.0)
    risk_fn = lambda z, rng: np.atleast_2d(z)[:, 0]
    gamma = -3.0
    estimates, variances = [], []
    for seed in range(200):
        ss = np.random.SeedSequence((seed, 404))
        r_train, r_eval = (np.random.default_rng(s) for s in ss.spawn(2))
        theta, _ = cross_entropy_train(family, risk_fn, gamma, rho=0.05,
                                       alphas=0.8, batch_sizes=300,
                                       iterations=6, rng=r_train)
        est = is_estimate(family, theta, risk_fn, gamma, 4_000, r_eval)
        estimates.append(est.p_hat)
        variances.append(est.std_err ** 2)
    elapsed = time.perf_counter() - t0
    mean = float(np.mean(estimates))
    pooled_se = math.sqrt(np.sum(variances)) / len(estimates)
    p = gaussian_cdf(gamma)
    ok = abs(mean - p) <= 3 * pooled_se and elapsed < 300.0
    _verdict(4, "unbiasedness over 200 CE-IS runs", ok,
             f"mean={mean:.3e} p={p:.3e} pooled_se={pooled_se:.1e} "
             f"t={elapsed:.0f}s")


def test_criterion_05_graphical_lasso():
    rng = np.random.default_rng(2024)
    worst_pg, worst_inv = 0.0, 0.0
    for _ in range(3):
        a = rng.standard_normal((3, 3))
        s = a @ a.T / 3 + 0.5 * np.eye(3)
        for lam in (0.0, 0.05, 0.1):
            t = graphical_lasso(s, lam)
            t_oracle = proximal_gradient_oracle(s, lam)
            worst_pg = max(worst_pg, float(np.linalg.norm(t - t_oracle)))
        worst_inv = max(worst_inv, float(np.max(np.abs(
            graphical_lasso(s, 0.0) - np.linalg.inv(s)))))
    ok = worst_pg < 1e-4 and worst_inv < 1e-6
    _verdict(5, "graphical lasso vs projected-gradient oracle", ok,
             f"max Frobenius gap {worst_pg:.1e}, lam=0 inverse gap {worst_inv:.1e}")


def test_criterion_06_logit_normal_roundtrip():
    true = LogitNormal(a=[10.0, 5.0], b=[160.0, 14.0], mu=[-0.4, 0.2],
                       sigma=[[0.6, 0.1], [0.1, 0.4]])
    y = true.sample(np.random.default_rng(33), 100_000)
    fit = fit_logit_normal(y, support=(true.a, true.b))
    tol = 3 * np.sqrt(np.diag(true.sigma) / 100_000)
    gaps = np.abs(fit.mu - true.mu)
    ok = bool(np.all(gaps < tol))
    _verdict(6, "logit-normal mu recovery at n=1e5", ok,
             f"gaps={gaps.round(5).tolist()} tol={tol.round(5).tolist()}")


def test_criterion_07_patient_mass_property():
    profile = load_patient_json(DATA_DIR / "patient_adult.json")
    model = build_patient_model(profile)
    y = model.sample(np.random.default_rng(7), 100_000)
    width = model.b - model.a
    inside = np.logical_and(y >= model.a + 0.2 * width,
                            y <= model.b - 0.2 * width)
    fractions = inside.mean(axis=0)
    ok = bool(np.all(np.abs(fractions - 0.99) <= 0.005))
    _verdict(7, "99% mass in central interval", ok,
             f"fractions in [{fractions.min():.4f}, {fractions.max():.4f}]")


def test_criterion_08_simulator_equilibrium_and_step():
    profile = load_patient_json(DATA_DIR / "patient_adult.json")
    sim, ctrl = load_sim_config(DATA_DIR / "sim_adult.json")
    quiet = replace(sim, arma_sigma=0.0)
    basal_only = replace(ctrl, kp=0.0, ki=0.0, kd=0.0)
    params = profile.nominal_params()
    r = rollout(ScenarioSample(params=params, carbs_g=1e-12, fast_hours=12.0,
                               seed=0), basal_only, quiet)
    drift = float(np.max(np.abs(r.bg - params.Gb)))
    sample = ScenarioSample(params=params, carbs_g=60.0, fast_hours=9.0, seed=0)
    step_gap = abs(rollout(sample, ctrl, quiet).min_bg
                   - rollout(sample, ctrl, replace(quiet, step_min=0.5)).min_bg)
    ok = drift < 0.5 and step_gap < 0.1
    _verdict(8, "equilibrium and RK4 step-halving", ok,
             f"12h drift {drift:.2e} mg/dL, step-halving gap {step_gap:.2e} mg/dL")


def test_criterion_09_throughput_floor():
    profile = load_patient_json(DATA_DIR / "patient_adult.json")
    sim, ctrl = load_sim_config(DATA_DIR / "sim_adult.json")
    sample = ScenarioSample(params=profile.nominal_params(), carbs_g=60.0,
                            fast_hours=12.0, seed=0)
    rollout(sample, ctrl, sim)  # warm-up (JIT compile / cache load)
    t0 = time.perf_counter()
    rollout(sample, ctrl, sim)
    single = time.perf_counter() - t0
    t0 = time.perf_counter()
    reps = 200
    for _ in range(reps):
        rollout(sample, ctrl, sim)
    per_sec = reps / (time.perf_counter() - t0)
    ok = single <= 0.6
    _verdict(9, "throughput floor (12h rollout <= 0.6 s)", ok,
             f"single rollout {single * 1e3:.2f} ms, "
             f"{per_sec:.0f} rollouts/s single-core")


def test_criterion_10_cli_determinism(tmp_path):
    train_fast = ["--batch-size", "150", "--iterations", "3"]
    fast = [*train_fast, "--n", "600", "--resamples", "50"]

    def artifacts(outdir):
        return {p.name: p.read_bytes() for p in sorted(Path(outdir).iterdir())}

    runs = {
        "fit-behavior": lambda d: main(["fit-behavior", "--out", str(d / "m.json")]),
        "train-ce": lambda d: main(["train-ce", "--patient", "adult", "--seed",
                                    "3", *train_fast, "--out", str(d / "t.json")]),
        "estimate": lambda d: main(["estimate", "--method", "ce", "--patient",
                                    "adult", "--seed", "3", *train_fast,
                                    "--n", "600", "--out", str(d / "e.json")]),
        "rollout": lambda d: main(["rollout", "--patient", "adult", "--carbs",
                                   "75", "--fast-hours", "8", "--seed", "3",
                                   "--trace", str(d / "r.csv")]),
        "synth": lambda d: main(["synth", "--gamma", "-3", "--seed", "3", *fast,
                                 "--outdir", str(d)]),
        "compare": lambda d: main(["compare", "--patient", "adult", "--seed",
                                   "3", *fast, "--outdir", str(d)]),
    }
    failures = []
    for name, run in runs.items():
        d1 = tmp_path / f"{name}-1"
        d2 = tmp_path / f"{name}-2"
        d1.mkdir(), d2.mkdir()
        if run(d1) != 0 or run(d2) != 0:
            failures.append(f"{name}: nonzero exit")
        elif artifacts(d1) != artifacts(d2):
            failures.append(f"{name}: artifacts differ between identical runs")
    # thread-count invariance on the batched subcommand (bitwise here,
    # which implies the 1e-9 relative requirement)
    d1, d4 = tmp_path / "thr-1", tmp_path / "thr-4"
    d1.mkdir(), d4.mkdir()
    main(["compare", "--patient", "adult", "--seed", "9", *fast,
          "--threads", "1", "--outdir", str(d1)])
    main(["compare", "--patient", "adult", "--seed", "9", *fast,
          "--threads", "4", "--outdir", str(d4)])
    if artifacts(d1) != artifacts(d4):
        failures.append("compare: artifacts differ across thread counts")
    _verdict(10, "CLI determinism", not failures,
             "all subcommands byte-identical" if not failures
             else "; ".join(failures))
