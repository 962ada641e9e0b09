"""Command line front end.

Subcommands:
  theory            critical exponents only, from a config
  sample            draw and export attractor points
  estimate          dimension spectrum from a sample file
  compare           full theory-vs-empirical pipeline with a report
  check-separation  finite-depth separation certificate
"""

from __future__ import annotations

import argparse
import os
import sys

from .empirical import (
    default_scales,
    estimate_dimension,
    write_fit_csv,
    write_spectrum_csv,
)
from .errors import ConfigError
from .harness import (
    ExperimentConfig,
    build_measure,
    build_scheme,
    build_system,
    emit_report,
    realize_scheme,
    run_experiment,
    theoretical_exponents,
)
from .systems import check_separation, load_sample_csv, sample_measure, save_sample_csv
from .theory import clamp_dimension


def _parse_q_list(text: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in text.split(",") if tok.strip())


def _parse_scales(text: str) -> tuple[float, ...]:
    if ":" in text:
        lo, hi = text.split(":")
        return tuple(2.0**-e for e in range(int(lo), int(hi) + 1))
    return tuple(float(tok) for tok in text.split(",") if tok.strip())


def _load_config(args) -> ExperimentConfig:
    config = ExperimentConfig.from_file(args.config)
    updates = {}
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    if getattr(args, "q", None):
        updates["q_values"] = _parse_q_list(args.q)
    if getattr(args, "tolerance", None) is not None:
        updates["tolerance"] = args.tolerance
    if updates:
        import dataclasses

        config = dataclasses.replace(config, **updates)
    return config


def _cmd_theory(args) -> int:
    config = _load_config(args)
    system = build_system(config)
    measure = build_measure(config)
    lines = ["q,d_theory,method,bracket_lo,bracket_hi,clamped"]
    for q in config.q_values:
        ce = theoretical_exponents(system, measure, q)
        clamped = ce.value > system.ambient_dim
        print(f"q={q:g}: d={ce.value:.6f} "
              f"(clamped to {clamp_dimension(ce.value, system.ambient_dim):.6f}) "
              f"[{ce.method}]")
        lines.append(",".join([repr(float(q)), repr(ce.value), ce.method,
                               repr(ce.lower), repr(ce.upper),
                               "true" if clamped else "false"]))
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "theory.csv")
        with open(path, "w", newline="") as fh:
            fh.write("\n".join(lines) + "\n")
        print(f"wrote {path}")
    return 0


def _cmd_sample(args) -> int:
    config = _load_config(args)
    system = build_system(config)
    measure = build_measure(config)
    scheme = realize_scheme(build_scheme(config, system), config.seed, 0)
    sample = sample_measure(system, scheme, measure, count=config.samples,
                            depth=config.depth, seed=config.seed,
                            target_resolution=min(config.scales))
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "points.csv")
    save_sample_csv(sample, path)
    print(f"wrote {len(sample)} points to {path} "
          f"(depth={sample.meta['depth']}, truncation={sample.meta['truncation_bound']:.3g})")
    return 0


def _cmd_estimate(args) -> int:
    sample = load_sample_csv(args.sample)
    q_values = _parse_q_list(args.q) if args.q else (0.5, 1.0, 2.0, 3.0)
    scales = _parse_scales(args.scales) if args.scales else default_scales()
    all_records = []
    fits = []
    for q in q_values:
        records, est = estimate_dimension(sample, q, scales)
        all_records.extend(records)
        fits.append(est)
        print(f"q={q:g}: D={est.dimension:.4f} +- {est.stderr:.4f} "
              f"({est.n_scales} scales in [{est.r_fine:g}, {est.r_coarse:g}])")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        spec_path = os.path.join(args.out, "spectrum.csv")
        fit_path = os.path.join(args.out, "fits.csv")
        write_spectrum_csv(all_records, spec_path)
        write_fit_csv(fits, fit_path)
        print(f"wrote {spec_path} and {fit_path}")
    return 0


def _cmd_compare(args) -> int:
    config = _load_config(args)
    report = run_experiment(config)
    for row in report.rows:
        verdict = "pass" if row.passed else "FAIL"
        print(f"q={row.q:g}: theory={row.d_theory:.4f} empirical={row.d_empirical:.4f} "
              f"+- {row.fit_err:.4f} [{row.method}] {verdict}")
    paths = emit_report(report, args.out)
    print(f"wrote {paths['csv']} and {paths['text']}")
    return 0


def _cmd_check_separation(args) -> int:
    config = _load_config(args)
    system = build_system(config)
    scheme = realize_scheme(build_scheme(config, system), config.seed, 0)
    report = check_separation(system, scheme, depth=args.depth, kind=args.kind)
    witness = None
    if report.witness:
        witness = tuple(w.letters for w in report.witness)
    print(f"kind={report.kind} depth={report.depth} "
          f"holds_at_depth={str(report.holds_at_depth).lower()} "
          f"worst_gap_ratio={report.worst_gap_ratio:.6g} witness={witness}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="qdims",
        description="Generalized q-dimensions of level-varying contraction systems",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_default=None):
        p.add_argument("--config", required=True, help="experiment config (JSON)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--q", default=None, help="comma-separated q list override")
        p.add_argument("--tolerance", type=float, default=None,
                       help="override the pass/fail tolerance")
        p.add_argument("--out", default=out_default, help="output directory")

    p_theory = sub.add_parser("theory", help="compute critical exponents only")
    common(p_theory)
    p_theory.set_defaults(func=_cmd_theory)

    p_sample = sub.add_parser("sample", help="draw and export attractor points")
    common(p_sample, out_default="out")
    p_sample.set_defaults(func=_cmd_sample)

    p_est = sub.add_parser("estimate", help="dimension spectrum from a sample CSV")
    p_est.add_argument("sample", help="headerless CSV of x_1,...,x_d,weight rows")
    p_est.add_argument("--q", default=None, help="comma-separated q list")
    p_est.add_argument("--scales", default=None,
                       help="either MIN:MAX dyadic exponents (e.g. 4:12) or comma floats")
    p_est.add_argument("--out", default=None, help="output directory")
    p_est.set_defaults(func=_cmd_estimate)

    p_cmp = sub.add_parser("compare", help="full theory-vs-empirical pipeline")
    common(p_cmp, out_default="out")
    p_cmp.set_defaults(func=_cmd_compare)

    p_sep = sub.add_parser("check-separation", help="finite-depth separation certificate")
    common(p_sep)
    p_sep.add_argument("--depth", type=int, default=5)
    p_sep.add_argument("--kind", choices=["ssc", "osc", "gsc"], default="ssc")
    p_sep.set_defaults(func=_cmd_check_separation)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
