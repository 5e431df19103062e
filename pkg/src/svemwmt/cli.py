"""Command-line entry point: ``svemwmt {test,simulate,sample-points,surface,lnp-example}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from ._errors import SvemError
from .whole_model import TestSettings

log = logging.getLogger("svemwmt")


def _settings_args(p, defaults: TestSettings):
    p.add_argument("--nperm", type=int, default=defaults.n_perm)
    p.add_argument("--npoint", type=int, default=defaults.n_point)
    p.add_argument("--nboot", type=int, default=defaults.n_boot)
    p.add_argument("--percent", type=float, default=defaults.percent)
    p.add_argument("--nsvem", type=int, default=defaults.n_svem)
    p.add_argument("--family", choices=["shash", "weibull", "gamma"],
                   default=defaults.reference_family)
    p.add_argument("--lhs", action="store_true",
                   help="Latin hypercube for continuous factors of the evaluation points")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1, help="worker processes")


def _settings(args):
    return TestSettings(n_perm=args.nperm, n_point=args.npoint, n_boot=args.nboot,
                        percent=args.percent, n_svem=args.nsvem,
                        reference_family=args.family, seed=args.seed,
                        latin_hypercube=args.lhs)


def cmd_test(args):
    from .report import RunConfig, run_test_command

    cfg = RunConfig(data=Path(args.data), config=Path(args.config),
                    responses=[r.strip() for r in args.responses.split(",") if r.strip()],
                    learner=args.learner, settings=_settings(args), out=Path(args.out),
                    seed=args.seed)
    report = run_test_command(cfg, n_jobs=args.jobs, plot=not args.no_plot)
    for name, r in report.results.items():
        from .report import format_p
        print(f"{name:<16} p = {format_p(r.p_value):>8}   ({r.family}, k={r.k})")
    if report.errors:
        print("\nresponse errors:", file=sys.stderr)
        for name, err in report.errors.items():
            print(f"  {name:<16} {err}", file=sys.stderr)
    return report.exit_code


def _grid(text):
    return [float(v) for v in text.split(",") if v.strip()]


def cmd_simulate(args):
    from .plots import power_plot
    from .simulation import ccd_design, power_curve

    settings = _settings(args)
    trials = args.trials
    if args.full:
        settings = replace(TestSettings(), seed=args.seed)
        trials = 1500
    design = ccd_design(args.alpha_mode, args.n_center)
    methods = [m.strip() for m in args.methods.split(",")]
    table = power_curve(args.scenario, _grid(args.beta_grid), methods, trials, settings,
                        args.seed, design, args.jobs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    table.to_csv(out / "power.csv", index=False)
    meta = {"scenario": args.scenario, "trials": trials, "methods": methods,
            "ccd": {"alpha_mode": args.alpha_mode, "n_center": args.n_center,
                    "runs": len(design)},
            "settings": settings.to_dict(), "seed": args.seed}
    (out / "power_meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True))
    if not args.no_plot:
        power_plot(table, out / "power.svg", f"Scenario {args.scenario}")
    print(table.assign(power=table.rejections / table.trials).to_string(index=False))
    return 0


def cmd_sample_points(args):
    from .factors import parse_factor_spec
    from .points import sample_points

    specs = parse_factor_spec(Path(args.config).read_text())
    T = sample_points(specs, args.npoint, args.seed, latin_hypercube=args.lhs)
    if args.out == "-":
        T.to_csv(sys.stdout, index=False, float_format="%.12g")
    else:
        T.to_csv(args.out, index=False, float_format="%.12g")
    return 0


def cmd_surface(args):
    from .ensemble import svem_fit
    from .factors import parse_terms
    from .plots import surface_plot
    from .points import sample_points
    from .simulation import (ScenarioSpec, ccd_design, ccd_specs, sample_surface,
                             simulate_response)
    from ._seeding import derive_seed

    spec = ScenarioSpec(args.scenario, args.beta)
    design = ccd_design(args.alpha_mode, args.n_center)
    specs = ccd_specs(design)
    terms = parse_terms(spec.svem_terms(), specs)
    y = simulate_response(design, spec, derive_seed(args.seed, 0))
    model = svem_fit(design, y, specs, terms, args.learner, args.nboot, derive_seed(args.seed, 1))
    T = sample_points(specs, args.npoint, derive_seed(args.seed, 2))
    v = sample_surface(model, T, derive_seed(args.seed, 3))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    T.assign(v=v).to_csv(out / "surface.csv", index=False, float_format="%.10g")
    if not args.no_plot:
        surface_plot(T, v, out / "surface.svg")
    return 0


def cmd_lnp_example(args):
    from .simulation import LNP_DATA_SEED, lnp_config_text, simulate_lnp

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    df = simulate_lnp(args.data_seed if args.data_seed is not None else LNP_DATA_SEED)
    df.to_csv(out / "lnp.csv", index=False, float_format="%.10g")
    (out / "lnp.yaml").write_text(lnp_config_text())
    print(f"wrote {out / 'lnp.csv'} and {out / 'lnp.yaml'}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="svemwmt", description="Permutation whole-model test for self-validated ensembles")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("test", help="run the whole-model test on each response of a CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--config", required=True, help="YAML factor/term config")
    p.add_argument("--responses", required=True, help="comma-separated response columns")
    p.add_argument("--learner", choices=["fs", "lasso"], default="fs")
    p.add_argument("--out", default="svem_out")
    p.add_argument("--no-plot", action="store_true")
    _settings_args(p, TestSettings())
    p.set_defaults(func=cmd_test)

    from .simulation import DESK_SETTINGS, DESK_TRIALS
    p = sub.add_parser("simulate", help="power curve on a three-factor CCD")
    p.add_argument("--scenario", type=int, choices=[1, 2, 3], required=True)
    p.add_argument("--beta-grid", default="0,0.5,1,1.5,2")
    p.add_argument("--trials", type=int, default=DESK_TRIALS)
    p.add_argument("--methods", default="svem_fs,svem_lasso,anova_full,anova_reduced")
    p.add_argument("--alpha-mode", choices=["rotatable", "face_centered"],
                   default="face_centered")
    p.add_argument("--n-center", type=int, default=2)
    p.add_argument("--full", action="store_true",
                   help="default test settings and 1500 trials per knot")
    p.add_argument("--out", default="sim_out")
    p.add_argument("--no-plot", action="store_true")
    _settings_args(p, DESK_SETTINGS)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sample-points", help="write random evaluation points as CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--npoint", type=int, default=TestSettings().n_point)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lhs", action="store_true")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_sample_points)

    p = sub.add_parser("surface", help="sampled ensemble surface for one simulated experiment")
    p.add_argument("--scenario", type=int, choices=[1, 2, 3], default=1)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--learner", choices=["fs", "lasso"], default="fs")
    p.add_argument("--nboot", type=int, default=TestSettings().n_boot)
    p.add_argument("--npoint", type=int, default=50_000)
    p.add_argument("--alpha-mode", choices=["rotatable", "face_centered"],
                   default="face_centered")
    p.add_argument("--n-center", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="surface_out")
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_surface)

    p = sub.add_parser("lnp-example", help="write the synthetic LNP dataset and its config")
    p.add_argument("--out", default="lnp_example")
    p.add_argument("--data-seed", type=int, default=None)
    p.set_defaults(func=cmd_lnp_example)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (SvemError, ValueError, OSError) as exc:
        print(f"svemwmt: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
