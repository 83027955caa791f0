"""Command-line entry point.

Subcommands wire the bundled data files, configs, and modules into
runnable estimation pipelines. Exit codes: 0 success, 1 a --check gate
failed, 2 usage or data errors. All artifacts are deterministic given
--seed and --threads; timing goes to stderr only.
"""

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import experiments, population, rare_event, simulator
from .errors import DataError, HypoguardError

DATA_DIR = Path(__file__).parent / "data"
BUNDLED_PATIENTS = ("child", "adolescent", "adult")

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2


def _env_seed():
    try:
        return int(os.environ.get("HYPOGUARD_SEED", "0"))
    except ValueError:
        return 0


def _add_common(parser):
    parser.add_argument("--seed", type=int, default=_env_seed(),
                        help="master random seed (env HYPOGUARD_SEED overrides "
                             "this default)")
    parser.add_argument("--threads", type=int, default=os.cpu_count(),
                        help="worker threads for batched rollouts; results do "
                             "not depend on this")


def _add_patient_args(parser):
    parser.add_argument("--patient", default="adult",
                        help="bundled patient id (child|adolescent|adult) or a "
                             "path to a patient JSON file")
    parser.add_argument("--sim-config", default=None,
                        help="sim/controller JSON; default: bundled config for "
                             "the patient's age group")
    parser.add_argument("--behavior-csv", default=str(DATA_DIR / "behavior.csv"),
                        help="behavior CSV with header carbs_g,fast_hours")


def _resolve_patient(spec):
    if spec in BUNDLED_PATIENTS:
        return population.load_patient_json(DATA_DIR / f"patient_{spec}.json")
    path = Path(spec)
    if not path.exists():
        raise DataError(
            f"unknown patient {spec!r}: not one of {BUNDLED_PATIENTS} and not a file")
    return population.load_patient_json(path)


def _resolve_sim(args, profile):
    path = args.sim_config or DATA_DIR / f"sim_{profile.age_group}.json"
    return simulator.load_sim_config(path)


def _load_scenario_setup(args):
    profile = _resolve_patient(args.patient)
    sim, controller = _resolve_sim(args, profile)
    behavior = population.fit_behavior_model(
        population.load_behavior_csv(args.behavior_csv))
    return profile, sim, controller, behavior


def _ce_config(args, gamma, seed):
    base = experiments.load_ce_config(args.ce_config) if args.ce_config \
        else experiments.CEConfig()
    return experiments.CEConfig(
        rho=args.rho if args.rho is not None else base.rho,
        alpha=args.alpha if args.alpha is not None else base.alpha,
        batch_size=args.batch_size if args.batch_size is not None else base.batch_size,
        iterations=args.iterations if args.iterations is not None else base.iterations,
        radius=args.radius if args.radius is not None else base.radius,
        gamma=gamma,
        seed=seed,
        normalize_weights=base.normalize_weights,
    )


def _add_ce_args(parser):
    parser.add_argument("--ce-config", default=None,
                        help="CE config JSON; flags below override its fields")
    parser.add_argument("--rho", type=float, default=None,
                        help="elite quantile level (default from config: 0.01)")
    parser.add_argument("--alpha", type=float, default=None,
                        help="smoothing step size (default from config: 0.8)")
    parser.add_argument("--batch-size", type=int, default=None,
                        help="samples per CE iteration (default from config: 500)")
    parser.add_argument("--iterations", type=int, default=None,
                        help="CE iterations (default from config: 10)")
    parser.add_argument("--radius", type=float, default=None,
                        help="search-ball radius (default: per age group "
                             "child/adolescent 0.1, adult 0.5; synthetic 3.0)")


def _write_json(obj, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def _logit_normal_to_dict(model):
    return {
        "a": model.a.tolist(),
        "b": model.b.tolist(),
        "mu": model.mu.tolist(),
        "sigma": model.sigma.tolist(),
    }


def cmd_fit_behavior(args):
    records = population.load_behavior_csv(args.csv)
    model = population.fit_behavior_model(records, pad=args.pad)
    _write_json({"records": len(records), **_logit_normal_to_dict(model)}, args.out)
    print(f"fitted 2-d logit-normal from {len(records)} records -> {args.out}")
    print(f"a={model.a.tolist()} b={model.b.tolist()}")
    return EXIT_OK


def _train(family, risk_fn, cfg):
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(2)[0])
    return rare_event.cross_entropy_train(
        family, risk_fn, cfg.gamma, rho=cfg.rho, alphas=cfg.alpha,
        batch_sizes=cfg.batch_size, iterations=cfg.iterations, rng=rng,
        normalize_weights=cfg.normalize_weights)


def cmd_train_ce(args):
    profile, sim, controller, behavior = _load_scenario_setup(args)
    cfg = _ce_config(args, args.gamma, args.seed)
    model = population.build_scenario_model(profile, behavior)
    family = model.family(cfg.resolve_radius(profile.age_group))
    risk_fn = experiments.make_scenario_risk(model, controller, sim,
                                             threads=args.threads)
    theta_hat, state = _train(family, risk_fn, cfg)
    _write_json({
        "patient": profile.id,
        "gamma": cfg.gamma,
        "seed": cfg.seed,
        "radius": family.radius,
        "theta_hat": theta_hat.tolist(),
        "center": family.center.tolist(),
        "best_iteration": state.best_iteration,
        "history": state.summary(),
    }, args.out)
    print(f"trained CE sampler for {profile.id} -> {args.out}")
    print(f"best iteration {state.best_iteration}, "
          f"||theta_hat - center|| = {np.linalg.norm(theta_hat - family.center):.4f}")
    return EXIT_OK


def cmd_estimate(args):
    if args.theta and args.method == "mc":
        raise DataError("--theta only applies to --method ce")
    profile, sim, controller, behavior = _load_scenario_setup(args)
    cfg = _ce_config(args, args.gamma, args.seed)
    model = population.build_scenario_model(profile, behavior)
    family = model.family(cfg.resolve_radius(profile.age_group))
    risk_fn = experiments.make_scenario_risk(model, controller, sim,
                                             threads=args.threads)
    eval_rng = np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(2)[1])
    if args.method == "mc":
        est = rare_event.mc_estimate(family, risk_fn, cfg.gamma, args.n, eval_rng)
        theta = family.center
    else:
        if args.theta:
            with open(args.theta, encoding="utf-8") as fh:
                theta = np.asarray(json.load(fh)["theta_hat"], dtype=float)
        else:
            theta, _ = _train(family, risk_fn, cfg)
        est = rare_event.is_estimate(family, theta, risk_fn, cfg.gamma, args.n,
                                     eval_rng)
    _write_json({
        "patient": profile.id,
        "gamma": cfg.gamma,
        "seed": cfg.seed,
        "theta": np.asarray(theta).tolist(),
        **est.to_dict(),
    }, args.out)
    print(f"{est.method}: p_hat={est.p_hat:.6g} std_err={est.std_err:.3g} "
          f"events={est.events}/{est.n} ess={est.ess:.0f} "
          f"clamped={est.clamped_ratios}")
    return EXIT_OK


def cmd_rollout(args):
    profile, sim, controller, _ = _load_scenario_setup(args)
    sample = simulator.ScenarioSample(
        params=profile.nominal_params(), carbs_g=args.carbs,
        fast_hours=args.fast_hours, seed=args.seed)
    r = simulator.rollout(sample, controller, sim)
    print(f"patient={profile.id} carbs={args.carbs:g} g fast={args.fast_hours:g} h "
          f"seed={args.seed}")
    print(f"min_bg={r.min_bg:.4f} mg/dL  hypo={r.hypo}  "
          f"final_bg={r.bg[-1]:.2f}  peak_bg={r.bg.max():.2f}")
    if args.trace:
        simulator.dump_trace_csv(r, args.trace)
        print(f"trace -> {args.trace}")
    return EXIT_OK


def _emit_report(report, outdir, check_failures, timing_note):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    experiments.write_report_json(report, outdir / f"report_{report.patient}.json")
    experiments.write_events_csv([report], outdir / "events.csv")
    experiments.write_std_csv([report], outdir / "std.csv")
    mc, ce = report.mc, report.ce
    print(f"patient={report.patient} gamma={report.gamma:g} n={report.n}")
    print(f"  MC   : p_hat={mc.p_hat:.6g} std_err={mc.std_err:.4g} events={mc.events}")
    print(f"  CE-IS: p_hat={ce.p_hat:.6g} std_err={ce.std_err:.4g} events={ce.events} "
          f"ess={ce.ess:.0f} clamped={ce.clamped_ratios}")
    print(f"  event_ratio={report.event_ratio:.3f} std_ratio={report.std_ratio:.3f} "
          f"bootstrap_std_ratio={report.bootstrap_std_ratio:.3f}")
    if report.p_true is not None:
        print(f"  p_true={report.p_true:.6g}")
    print(f"reports -> {outdir}", file=sys.stderr)
    print(timing_note, file=sys.stderr)
    for failure in check_failures:
        print(f"CHECK FAILED: {failure}", file=sys.stderr)
    return EXIT_CHECK_FAILED if check_failures else EXIT_OK


def cmd_compare(args):
    if args.from_estimates:
        return _compare_from_files(args)
    profile, sim, controller, behavior = _load_scenario_setup(args)
    if args.gammas:
        return _compare_sweep(args, profile, sim, controller, behavior)
    cfg = _ce_config(args, args.gamma, args.seed)
    report = experiments.run_comparison(
        profile, behavior, controller, sim, cfg,
        n=args.n, resamples=args.resamples, threads=args.threads)
    failures = experiments.check_comparison(
        report, args.min_event_ratio, args.min_std_ratio) if args.check else []
    note = (f"wall {report.wall_time_s:.1f} s, "
            f"{report.rollouts_per_second:.0f} rollouts/s")
    return _emit_report(report, args.outdir, failures, note)


def _compare_sweep(args, profile, sim, controller, behavior):
    try:
        gammas = [float(g) for g in args.gammas.split(",") if g.strip()]
    except ValueError as exc:
        raise DataError(f"bad --gammas list {args.gammas!r}: {exc}") from exc
    if not gammas:
        raise DataError("--gammas needs at least one value")
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    reports = []
    for gamma in gammas:
        cfg = _ce_config(args, gamma, args.seed)
        report = experiments.run_comparison(
            profile, behavior, controller, sim, cfg,
            n=args.n, resamples=args.resamples, threads=args.threads)
        reports.append(report)
        experiments.write_report_json(
            report, outdir / f"report_{report.patient}_gamma{gamma:g}.json")
        print(f"gamma={gamma:g}: mc_events={report.mc.events} "
              f"ce_events={report.ce.events} event_ratio={report.event_ratio:.3f}")
    experiments.write_events_csv(reports, outdir / "events.csv")
    experiments.write_std_csv(reports, outdir / "std.csv")
    print(f"sweep reports -> {outdir}", file=sys.stderr)
    return EXIT_OK


def _compare_from_files(args):
    ests = {}
    for path in args.from_estimates:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        ests[raw["method"]] = raw
    if set(ests) != {"MC", "CE-IS"}:
        raise DataError("--from-estimates needs one MC and one CE-IS file")
    mc_raw, ce_raw = ests["MC"], ests["CE-IS"]
    keys = ("p_hat", "std_err", "events", "n", "method", "clamped_ratios", "ess")
    mc = rare_event.Estimate(**{k: mc_raw[k] for k in keys})
    ce = rare_event.Estimate(**{k: ce_raw[k] for k in keys})
    report = experiments.ComparisonReport(
        patient=mc_raw["patient"], gamma=mc_raw["gamma"], n=mc.n, mc=mc, ce=ce,
        event_ratio=ce.events / max(mc.events, 1),
        std_ratio=mc.std_err / ce.std_err if ce.std_err > 0 else float("inf"),
        bootstrap_std_mc=float("nan"), bootstrap_std_ce=float("nan"),
        bootstrap_std_ratio=float("nan"), ce_summary=[],
        theta_hat=np.asarray(ce_raw.get("theta", [])))
    failures = []
    if args.check:
        if report.event_ratio < args.min_event_ratio:
            failures.append(f"event ratio {report.event_ratio:.2f} below "
                            f"{args.min_event_ratio:g}")
        if report.std_ratio < args.min_std_ratio:
            failures.append(f"std ratio {report.std_ratio:.2f} below "
                            f"{args.min_std_ratio:g}")
    return _emit_report(report, args.outdir, failures, "assembled from estimate files")


def cmd_synth(args):
    cfg = experiments.CEConfig(
        rho=args.rho if args.rho is not None else 0.05,
        alpha=args.alpha if args.alpha is not None else 0.8,
        batch_size=args.batch_size if args.batch_size is not None else 500,
        iterations=args.iterations if args.iterations is not None else 10,
        radius=args.radius, gamma=args.gamma, seed=args.seed)
    report = experiments.run_synthetic_validation(cfg, n=args.n,
                                                  resamples=args.resamples)
    failures = experiments.check_synthetic(report) if args.check else []
    note = f"wall {report.wall_time_s:.1f} s"
    return _emit_report(report, args.outdir, failures, note)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="hypoguard",
        description="Rare-event estimation of overnight hypoglycemia under "
                    "closed-loop insulin control.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit-behavior", help="fit the 2-d behavior model from CSV",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--csv", default=str(DATA_DIR / "behavior.csv"),
                   help="input CSV with header carbs_g,fast_hours")
    p.add_argument("--pad", type=float, default=0.01,
                   help="fractional support widening beyond the data range")
    p.add_argument("--out", required=True, help="output model JSON path")
    p.set_defaults(func=cmd_fit_behavior)

    p = sub.add_parser("train-ce", help="train the cross-entropy importance sampler",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    _add_patient_args(p)
    _add_ce_args(p)
    _add_common(p)
    p.add_argument("--gamma", type=float, default=70.0,
                   help="hypoglycemia threshold (mg/dL)")
    p.add_argument("--out", required=True, help="output theta JSON path")
    p.set_defaults(func=cmd_train_ce)

    p = sub.add_parser("estimate", help="estimate the hypoglycemia probability",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    _add_patient_args(p)
    _add_ce_args(p)
    _add_common(p)
    p.add_argument("--method", choices=("mc", "ce"), required=True,
                   help="naive Monte Carlo or trained CE importance sampling")
    p.add_argument("--gamma", type=float, default=70.0,
                   help="hypoglycemia threshold (mg/dL)")
    p.add_argument("--n", type=int, default=10_000, help="evaluation samples")
    p.add_argument("--theta", default=None,
                   help="pre-trained theta JSON from train-ce (ce only)")
    p.add_argument("--out", required=True, help="output estimate JSON path")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("rollout", help="simulate one meal-plus-fast and dump a trace",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    _add_patient_args(p)
    _add_common(p)
    p.add_argument("--carbs", type=float, default=60.0, help="evening meal (g)")
    p.add_argument("--fast-hours", type=float, default=9.0, help="fast length (h)")
    p.add_argument("--trace", default=None,
                   help="optional CSV path for t_min,bg,cgm,insulin")
    p.set_defaults(func=cmd_rollout)

    p = sub.add_parser("compare", help="MC-vs-CE comparison report for a patient",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    _add_patient_args(p)
    _add_ce_args(p)
    _add_common(p)
    p.add_argument("--gamma", type=float, default=70.0,
                   help="hypoglycemia threshold (mg/dL)")
    p.add_argument("--gammas", default=None,
                   help="comma-separated threshold sweep (e.g. 50,60,70); "
                        "overrides --gamma and writes per-gamma reports")
    p.add_argument("--n", type=int, default=10_000, help="evaluation samples")
    p.add_argument("--resamples", type=int, default=500,
                   help="bootstrap resamples for the std comparison")
    p.add_argument("--outdir", default="out", help="output directory")
    p.add_argument("--check", action="store_true",
                   help="exit 1 unless the ratio gates below pass")
    p.add_argument("--min-event-ratio", type=float, default=2.0,
                   help="--check floor for CE/MC event ratio")
    p.add_argument("--min-std-ratio", type=float, default=1.5,
                   help="--check floor for MC/CE bootstrap std ratio")
    p.add_argument("--from-estimates", nargs=2, metavar=("MC_JSON", "CE_JSON"),
                   default=None,
                   help="assemble the report from two estimate files instead "
                        "of running")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("synth", help="synthetic Gaussian validation with analytic truth",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    _add_ce_args(p)
    _add_common(p)
    p.add_argument("--gamma", type=float, default=-3.0,
                   help="threshold for f(x)=x, X~N(0,1); p_true = Phi(gamma)")
    p.add_argument("--n", type=int, default=10_000, help="evaluation samples")
    p.add_argument("--resamples", type=int, default=500,
                   help="bootstrap resamples for the std comparison")
    p.add_argument("--outdir", default="out", help="output directory")
    p.add_argument("--check", action="store_true",
                   help="exit 1 unless both estimates fall within 3 std errors "
                        "of the analytic probability")
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (HypoguardError, OSError, ValueError, KeyError,
            json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
