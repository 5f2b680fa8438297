"""Command line front end: calibrate thresholds, run benchmarks, detect.

Measurement files are plain text, one value per line, ordered like the
topology rows (all bus injections in bus order, then branch flows in branch
order).  See docs/formats.md for the full layout.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .attack_model import ConfigurationError
from .bench import (
    METHODS,
    ExperimentSpec,
    Thresholds,
    calibrate_thresholds,
    emit_results,
    run_experiment,
)
from .cases import case_path
from .estimation import NoiseModel
from .gic import CandidateFamily, FamilyEvaluator, PenaltyConfig, gic_select
from .gmgic import gm_gic
from .grid_model import build_topology, load_case
from .omp import OmpConfig, omp_identify


def _load_network(case: str | None):
    if case is None:
        return load_case(case_path("ieee30"))
    return load_case(case)


def read_measurements(path, n_expected: int) -> np.ndarray:
    """Load a one-value-per-line measurement snapshot and check its length."""
    values = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            try:
                values.append(float(text))
            except ValueError:
                raise ConfigurationError(
                    f"{path}:{line_no}: not a number: {text!r}"
                ) from None
    if len(values) != n_expected:
        raise ConfigurationError(
            f"{path}: expected {n_expected} measurements, found {len(values)}"
        )
    return np.array(values)


def _add_case_argument(parser):
    parser.add_argument(
        "--case",
        default=None,
        help="grid case file (MATPOWER-style .m or JSON); default: bundled 30-bus case",
    )


def _cmd_calibrate(args) -> int:
    spec = ExperimentSpec(
        case=args.case,
        methods=("gic",),
        attack_norm=(1.0,),
        sigma_s2=(args.sigma_s2,),
        sigma_e2=args.sigma_e2,
        n_null=args.n_null,
        alpha=args.alpha,
        k_c=args.k_c,
        zeta=args.zeta,
        ground=args.ground,
        rho_method=args.rho_method,
        seed=args.seed,
    )
    network = _load_network(args.case)
    topology = build_topology(network)
    thresholds = calibrate_thresholds(network, topology, spec)
    thresholds.to_file(args.out)
    print(f"wrote {args.out}")
    for name in ("gamma_bdd", "gamma_eng", "gamma_gic", "gamma_omp", "gamma_oracle", "rho"):
        print(f"  {name} = {getattr(thresholds, name):.6g}")
    return 0


def _cmd_run(args) -> int:
    if args.config:
        spec = ExperimentSpec.from_file(args.config)
    else:
        spec = ExperimentSpec()
    overrides = {}
    if args.case is not None:
        overrides["case"] = args.case
    if args.method:
        overrides["methods"] = tuple(args.method)
    if args.k_a is not None:
        overrides["k_a"] = tuple(args.k_a)
    if args.attack_norm is not None:
        overrides["attack_norm"] = tuple(args.attack_norm)
        overrides["attack_norm_per_node"] = None
    if args.attack_norm_per_node is not None:
        overrides["attack_norm_per_node"] = tuple(args.attack_norm_per_node)
        if args.attack_norm is None:
            overrides["attack_norm"] = None
    if args.sigma_s2 is not None:
        overrides["sigma_s2"] = tuple(args.sigma_s2)
    if args.trials is not None:
        overrides["n_trials"] = args.trials
    if args.n_null is not None:
        overrides["n_null"] = args.n_null
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.threads is not None:
        overrides["threads"] = args.threads
    if args.ground is not None:
        overrides["ground"] = args.ground
    if overrides:
        doc = {
            f: getattr(spec, f)
            for f in (
                "case",
                "methods",
                "k_a",
                "attack_norm",
                "attack_norm_per_node",
                "sigma_s2",
                "sigma_e2",
                "n_trials",
                "n_null",
                "alpha",
                "k_c",
                "zeta",
                "ground",
                "rho_method",
                "seed",
                "threads",
                "restricted_buses",
            )
        }
        doc.update(overrides)
        if doc["attack_norm"] is not None and doc["attack_norm_per_node"] is not None:
            # a total-norm flag displaces a per-node norm from the config file
            doc["attack_norm_per_node"] = None
        spec = ExperimentSpec(**doc)

    thresholds = Thresholds.from_file(args.thresholds) if args.thresholds else None
    table = run_experiment(spec, thresholds=thresholds)
    paths = emit_results(table, args.out)
    print(f"wrote {paths['aggregates']}")
    print(f"wrote {paths['results']}")
    header = (
        "method",
        "k_a",
        "attack_norm",
        "sigma_s2",
        "detection_rate",
        "false_alarm_rate",
        "f_score_mean",
        "runtime_ns_median",
    )
    print("  ".join(header))
    for row in table.aggregates():
        print(
            "  ".join(
                f"{row[k]:.4g}" if isinstance(row[k], float) else str(row[k])
                for k in header
            )
        )
    return 0


def _cmd_detect(args) -> int:
    network = _load_network(args.case)
    topology = build_topology(network)
    thresholds = Thresholds.from_file(args.thresholds)
    z_prev = read_measurements(args.z_prev, topology.n_measurements)
    z_curr = read_measurements(args.z_curr, topology.n_measurements)
    dz = z_curr - z_prev
    dz_load = dz[list(topology.load_rows)]

    if thresholds.ground == "all":
        ground = tuple(range(topology.n_states))
    else:
        ground = tuple(topology.restricted_states)

    if args.method == "gic":
        family = CandidateFamily.enumerate_from(ground, thresholds.k_c)
        penalty = PenaltyConfig(zeta=thresholds.zeta, gamma_gic=thresholds.gamma_gic)
        result = gic_select(topology, dz_load, family, penalty, thresholds.sigma_e2)
    elif args.method == "omp":
        config = OmpConfig(k_max=thresholds.k_c, gamma_omp=thresholds.gamma_omp)
        result = omp_identify(topology, dz_load, config, ground)
    elif args.method == "gmgic":
        penalty = PenaltyConfig(zeta=thresholds.zeta, gamma_gic=0.0)
        result = gm_gic(
            topology,
            dz_load,
            thresholds.rho,
            k_c=thresholds.k_c,
            penalty=penalty,
            sigma_e2=thresholds.sigma_e2,
            ground=ground,
            global_budget=thresholds.k_c,
        )
    else:
        raise ConfigurationError(f"unknown detect method {args.method!r}")

    verdict = {
        "method": args.method,
        "detected": bool(result.detected),
        "statistic": float(result.statistic),
        "attacked_buses": [int(topology.col_map[j]) for j in result.support],
        "state_columns": [int(j) for j in result.support],
        "bias_estimates": [float(v) for v in result.values],
    }
    print(json.dumps(verdict, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridshield",
        description="Detect and localize stealth injection attacks on DC grid measurements.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    cal = sub.add_parser("calibrate", help="calibrate detection thresholds on null simulations")
    _add_case_argument(cal)
    cal.add_argument("--alpha", type=float, default=0.05, help="target false alarm level")
    cal.add_argument("--n-null", type=int, default=500, help="number of null simulations")
    cal.add_argument("--sigma-e2", type=float, default=0.01, help="difference noise variance")
    cal.add_argument("--sigma-s2", type=float, default=0.05, help="load change variance")
    cal.add_argument("--seed", type=int, default=0)
    cal.add_argument("--k-c", type=int, default=6, help="selector cardinality cap")
    cal.add_argument("--zeta", type=float, default=2.0, help="per-state sparsity penalty")
    cal.add_argument("--ground", choices=("restricted", "all"), default="restricted")
    cal.add_argument(
        "--rho-method", choices=("bonferroni", "family-max"), default="family-max"
    )
    cal.add_argument("--out", required=True, help="output thresholds JSON path")
    cal.set_defaults(func=_cmd_calibrate)

    run = sub.add_parser("run", help="run a Monte Carlo benchmark over a scenario grid")
    _add_case_argument(run)
    run.add_argument("--config", default=None, help="experiment TOML or JSON file")
    run.add_argument(
        "--method",
        action="append",
        choices=METHODS,
        help="method to benchmark (repeatable); overrides the config list",
    )
    run.add_argument("--k-a", type=int, nargs="+", default=None, help="attacked state counts")
    run.add_argument("--attack-norm", type=float, nargs="+", default=None)
    run.add_argument("--attack-norm-per-node", type=float, nargs="+", default=None)
    run.add_argument("--sigma-s2", type=float, nargs="+", default=None)
    run.add_argument("--trials", type=int, default=None, help="Monte Carlo trials per grid point")
    run.add_argument("--n-null", type=int, default=None, help="calibration null simulations")
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--threads", type=int, default=None)
    run.add_argument("--ground", choices=("restricted", "all"), default=None)
    run.add_argument("--thresholds", default=None, help="reuse a thresholds JSON file")
    run.add_argument("--out", required=True, help="output directory")
    run.set_defaults(func=_cmd_run)

    det = sub.add_parser("detect", help="run one detector on a pair of measurement files")
    _add_case_argument(det)
    det.add_argument("--method", choices=("gic", "omp", "gmgic"), default="gic")
    det.add_argument("--thresholds", required=True, help="thresholds JSON from calibrate")
    det.add_argument("--z-prev", required=True, help="previous snapshot, one value per line")
    det.add_argument("--z-curr", required=True, help="current snapshot, one value per line")
    det.set_defaults(func=_cmd_detect)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
