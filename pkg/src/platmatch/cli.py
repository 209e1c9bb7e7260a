"""Scenario-driven command line: load a JSON scenario, dispatch a subcommand,
emit report.json and CSV files.

Exit codes: 0 ok, 2 precondition failure, 3 validation failure, 4 asserted
verdict failed, 5 internal identity failure.  Outputs are byte-identical
across reruns with the same file and seed; --jobs bounds internal
parallelism (execution is serial, so determinism holds for every setting).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .compstat import ShiftSpec, apply_shift, compare, welfare_delta
from .core import FirmType, IndividualType, MarketSpec, check_supermodularity
from .errors import (
    IdentityError,
    InputError,
    InvariantViolation,
    NumericError,
    PreconditionError,
    ValidationError,
)
from .families import CompetitionKernel, PayoffFamily, ScalarFn, ShapeFn
from .mechanism import DistributionSpec, Partition
from .monopcomp import (
    CesParams,
    RetailSpec,
    acquire_cell,
    counterfactual_compare,
    discretize_firms,
    refine_partition,
    solve_retail,
)
from .mvpd import MvpdSpec, merger_compare, merger_transform, solve_mvpd
from .solver import brute_force, solve_pointwise_affine, solve_threshold
from .suites import SUITES, run_suite

SCHEMA_VERSION = "1"


# ---------------------------------------------------------------------------
# scenario parsing; validators collect every error before failing


class _Collector:
    def __init__(self):
        self.errors = []

    def add(self, msg):
        self.errors.append(msg)

    def guard(self, fn, context):
        try:
            return fn()
        except (ValidationError, InputError) as exc:
            msgs = exc.errors if isinstance(exc, ValidationError) else [str(exc)]
            self.errors.extend(f"{context}: {m}" for m in msgs)
            return None

    def raise_if_any(self):
        if self.errors:
            raise ValidationError(self.errors)


def _parse_scalar_fn(obj, col, ctx):
    kind = obj.get("kind", "affine")
    if kind == "affine":
        return ScalarFn("affine", c0=float(obj.get("c0", 0.0)), c1=float(obj.get("c1", 0.0)))
    if kind == "table":
        return col.guard(lambda: ScalarFn.table(obj["knots"], obj["values"]), ctx)
    col.add(f"{ctx}: unknown scalar kind {kind!r}")
    return None


def _parse_shape_fn(obj, col, ctx):
    kind = obj.get("kind", "affine")
    try:
        if kind == "affine":
            return ShapeFn.linear(float(obj.get("a", 1.0)), float(obj.get("b", 0.0)))
        if kind == "power":
            return ShapeFn("power", rho=float(obj.get("rho", 1.0)))
        if kind == "log1p":
            return ShapeFn("log1p")
        if kind == "table":
            return ShapeFn("table", knots=tuple(obj["knots"]), values=tuple(obj["values"]))
    except (ValidationError, KeyError) as exc:
        col.add(f"{ctx}: {exc}")
        return None
    col.add(f"{ctx}: unknown shape kind {kind!r}")
    return None


def _parse_payoff(obj, col, ctx):
    family = obj.get("family")
    bonus = float(obj.get("slope_bonus", 0.0))
    if family == "multiplicative":
        g = _parse_shape_fn(obj.get("g", {}), col, f"{ctx}.g")
        if g is None:
            return None
        return col.guard(lambda: PayoffFamily("multiplicative", g=g, slope_bonus=bonus), ctx)
    if family == "affine":
        a = _parse_scalar_fn(obj.get("a", {}), col, f"{ctx}.a")
        b = _parse_scalar_fn(obj.get("b", {}), col, f"{ctx}.b")
        if a is None or b is None:
            return None
        return col.guard(lambda: PayoffFamily("affine", a=a, b=b, slope_bonus=bonus), ctx)
    if family == "tabulated":
        return col.guard(
            lambda: PayoffFamily(
                "tabulated",
                v_knots=tuple(obj["v_knots"]),
                x_knots=tuple(obj["x_knots"]),
                table=tuple(tuple(r) for r in obj["values"]),
                slope_bonus=bonus,
            ),
            ctx,
        )
    col.add(f"{ctx}: unknown payoff family {family!r}")
    return None


def _parse_kernel(obj, col, ctx):
    family = obj.get("family")
    decay = {
        "sigma_i_decay": float(obj.get("sigma_i_decay", 0.0)),
        "sigma_f_decay": float(obj.get("sigma_f_decay", 0.0)),
    }
    def build():
        if family == "constant":
            return CompetitionKernel("constant", value=float(obj.get("value", 1.0)), **decay)
        if family == "table":
            return CompetitionKernel(
                "table", knots=tuple(obj["x"]), values=tuple(obj["h"]), **decay
            )
        if family == "power":
            return CompetitionKernel(
                "power", scale=float(obj.get("scale", 1.0)), eps=float(obj.get("eps", 0.0)),
                kappa=float(obj.get("kappa", -1.0)), **decay
            )
        if family == "affine_trunc":
            return CompetitionKernel(
                "affine_trunc", c0=float(obj.get("c0", 1.0)), c1=float(obj.get("c1", 0.0)), **decay
            )
        if family == "ces":
            return CompetitionKernel(
                "ces", sigma=float(obj["sigma"]), theta=float(obj["theta"]), **decay
            )
        raise ValidationError([f"unknown kernel family {family!r}"])
    return col.guard(build, ctx)


def _parse_dist(obj, col, ctx):
    family = obj.get("family")
    def build():
        if family == "uniform":
            return DistributionSpec.uniform(obj["a"], obj["b"], n_grid=int(obj.get("n_grid", 1001)))
        if family == "truncnorm":
            return DistributionSpec.truncated_normal(
                obj["mu"], obj["s"], obj["a"], obj["b"], n_grid=int(obj.get("n_grid", 1001))
            )
        if family == "table":
            return DistributionSpec(
                "table",
                table_grid=tuple(obj["grid"]),
                table_cdf=tuple(obj["cdf"]),
                table_pdf=tuple(obj["pdf"]),
            )
        raise ValidationError([f"unknown distribution family {family!r}"])
    return col.guard(build, ctx)


def _parse_market(obj, col):
    firms = []
    for k, f in enumerate(obj.get("firms", [])):
        firms.append(FirmType(id=int(f["id"]), v=float(f["v"]), sigma=float(f.get("sigma", 1.0))))
    individuals = []
    for k, i in enumerate(obj.get("individuals", [])):
        individuals.append(
            IndividualType(
                id=int(i["id"]), v=float(i["v"]), sigma=float(i.get("sigma", 1.0)),
                mass=float(i["mass"]),
            )
        )
    u_i = _parse_payoff(obj.get("individual_payoff", {}), col, "market.individual_payoff")
    u_f = _parse_payoff(obj.get("firm_payoff", {}), col, "market.firm_payoff")
    kernel = _parse_kernel(obj.get("kernel", {}), col, "market.kernel")
    if col.errors or u_i is None or u_f is None or kernel is None:
        return None
    return col.guard(
        lambda: MarketSpec(
            firms=firms, individuals=individuals,
            individual_payoff=u_i, firm_payoff=u_f, kernel=kernel,
        ),
        "market",
    )


def _parse_mvpd(obj, col):
    channels = [
        FirmType(id=int(c["id"]), v=float(c["v"]), sigma=float(c.get("sigma", 1.0)))
        for c in obj.get("channels", [])
    ]
    payoff = _parse_payoff(obj.get("channel_payoff", {}), col, "mvpd.channel_payoff")
    bundle = _parse_shape_fn(obj.get("bundle_value", {}), col, "mvpd.bundle_value")
    dist = _parse_dist(obj.get("viewer_dist", {}), col, "mvpd.viewer_dist")
    kernel = _parse_kernel(obj.get("kernel", {}), col, "mvpd.kernel")
    if col.errors or None in (payoff, bundle, dist, kernel):
        return None
    owned = obj.get("owned_channel")
    return col.guard(
        lambda: MvpdSpec(
            channels=channels, channel_payoff=payoff, bundle_value=bundle,
            viewer_dist=dist, beta=float(obj.get("beta", 0.5)),
            leverage_theta=float(obj.get("leverage_theta", 0.0)),
            owned_channel=int(owned) if owned is not None else None,
            kernel=kernel,
        ),
        "mvpd",
    )


def _parse_retail(obj, col):
    ces_obj = obj.get("ces", {})
    ces = col.guard(
        lambda: CesParams(float(ces_obj.get("sigma", 0.0)), float(ces_obj.get("theta", 0.0))),
        "monopcomp.ces",
    )
    dist = _parse_dist(obj.get("firm_dist", {}), col, "monopcomp.firm_dist")
    if col.errors or ces is None or dist is None:
        return None
    n_firms = int(obj.get("n_firms", 12))
    values, weights = discretize_firms(dist, n_firms)
    partition = col.guard(lambda: Partition(tuple(obj.get("partition", (dist.a, dist.b)))), "monopcomp.partition")
    individual_dist = None
    if "individual_dist" in obj:
        individual_dist = _parse_dist(obj["individual_dist"], col, "monopcomp.individual_dist")
    if col.errors or partition is None:
        return None
    return col.guard(
        lambda: RetailSpec(
            firm_values=tuple(values), firm_weights=tuple(weights), firm_dist=dist,
            partition=partition, ces=ces,
            individual_mode=obj.get("individual_mode", "homogeneous"),
            objective_mode=obj.get("objective_mode", "welfare"),
            individual_dist=individual_dist,
            owned_cells=frozenset(int(c) for c in obj.get("owned_cells", ())),
        ),
        "monopcomp",
    )


def load_scenario(path):
    """Parse and validate a scenario file; ValidationError carries every problem found."""
    raw = Path(path).read_bytes()
    try:
        data = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValidationError([f"scenario does not parse as JSON: {exc}"])
    col = _Collector()
    if data.get("schema_version") != SCHEMA_VERSION:
        col.add(f"schema_version must be {SCHEMA_VERSION!r}")
    kind = data.get("kind")
    spec = None
    if kind == "generic":
        spec = _parse_market(data.get("market", {}), col)
    elif kind == "mvpd":
        spec = _parse_mvpd(data.get("mvpd", {}), col)
    elif kind == "monopcomp":
        spec = _parse_retail(data.get("monopcomp", {}), col)
    else:
        col.add(f"kind must be generic, mvpd, or monopcomp, got {kind!r}")
    col.raise_if_any()
    return {
        "kind": kind,
        "spec": spec,
        "solver": data.get("solver", {}),
        "experiment": data.get("experiment"),
        "sha256": hashlib.sha256(raw).hexdigest(),
    }


# ---------------------------------------------------------------------------
# report emission


def _fmt(x):
    return f"{x:.17g}"


def _jsonable(obj):
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if obj is None or isinstance(obj, (str, bool)):
        return obj
    return str(obj)


def _write_report(out_dir, bundle, fmt):
    if fmt in ("json", "both"):
        path = out_dir / "report.json"
        path.write_text(json.dumps(_jsonable(bundle), indent=2, sort_keys=True) + "\n")


def _write_csv(out_dir, name, header, rows, fmt):
    if fmt not in ("csv", "both"):
        return
    with open(out_dir / name, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _matching_rows(market, matching):
    rows = []
    for k, f in enumerate(market.firms):
        for c, i in enumerate(market.individuals):
            rows.append([f.id, i.id, int(matching.incidence[k, c])])
    return rows


def _threshold_rows(market, matching):
    rows = []
    for c, i in enumerate(market.individuals):
        matched = np.flatnonzero(matching.incidence[:, c])
        cutoff = min(market.firm_v[matched]) if matched.size else np.inf
        rows.append([i.id, _fmt(float(cutoff))])
    return rows


def _verdict_list(verdicts):
    return [
        {"name": v.name, "applicable": v.applicable, "passed": v.passed, "reason": v.reason}
        for v in verdicts
    ]


# ---------------------------------------------------------------------------
# subcommands


def _solver_for(options):
    method = options.get("method", "auto")
    if method in ("auto", "threshold"):
        return solve_threshold
    if method == "brute":
        return brute_force
    if method == "pointwise":
        return solve_pointwise_affine
    raise ValidationError([f"unknown solver method {method!r}"])


def _run_generic_solve(scenario, args, out_dir):
    market = scenario["spec"]
    report = _solver_for(scenario["solver"])(market)
    bundle = _base_bundle(scenario, args, "solve")
    bundle["results"] = {
        "objective": report.objective,
        "method": report.method,
        "iterations": report.iterations,
        "representable": report.matching.representable,
        "threshold_repr": report.matching.threshold_repr,
    }
    _write_report(out_dir, bundle, args.format)
    _write_csv(out_dir, "matching.csv", ["firm_id", "individual_id", "matched"],
               _matching_rows(market, report.matching), args.format)
    _write_csv(out_dir, "thresholds.csv", ["individual_id", "cutoff_vf"],
               _threshold_rows(market, report.matching), args.format)
    return 0


def _run_oracle(scenario, args, out_dir):
    market = scenario["spec"]
    oracle = brute_force(market)
    fast = solve_threshold(market)
    gap = abs(oracle.objective - fast.objective)
    bundle = _base_bundle(scenario, args, "oracle")
    bundle["results"] = {
        "oracle_objective": oracle.objective,
        "threshold_objective": fast.objective,
        "oracle_gap": gap,
        "oracle_representable": oracle.matching.representable,
    }
    ok = gap <= args.tolerance
    bundle["status"] = "ok" if ok else "assertion_failed"
    _write_report(out_dir, bundle, args.format)
    _write_csv(out_dir, "matching.csv", ["firm_id", "individual_id", "matched"],
               _matching_rows(market, oracle.matching), args.format)
    _write_csv(out_dir, "thresholds.csv", ["individual_id", "cutoff_vf"],
               _threshold_rows(market, oracle.matching), args.format)
    return 0 if ok else 4


def _run_check(scenario, args, out_dir):
    bundle = _base_bundle(scenario, args, "check")
    results = {"valid": True}
    if scenario["kind"] == "generic":
        market = scenario["spec"]
        sizes = market.achievable_sizes
        ui = check_supermodularity(market.individual_payoff, np.unique(market.ind_v), sizes) \
            if np.unique(market.ind_v).size >= 2 else None
        uf = check_supermodularity(market.firm_payoff, np.unique(market.firm_v), market.quality_grid) \
            if np.unique(market.firm_v).size >= 2 else None
        results["individual_payoff_supermodular"] = None if ui is None else ui.passed
        results["firm_payoff_supermodular"] = None if uf is None else uf.passed
    elif scenario["kind"] == "mvpd":
        results["viewer_dist_regular"] = scenario["spec"].regular
    else:
        results["ratio_monotone_per_cell"] = scenario["spec"].ratio_monotone_per_cell
    bundle["results"] = results
    _write_report(out_dir, bundle, args.format)
    return 0


def _parse_shift(experiment, col):
    kind = experiment.get("shift_kind", "additive_slope")
    alpha = None
    replacement = None
    if kind == "beta_scale":
        alpha = _parse_scalar_fn(experiment.get("alpha", {}), col, "experiment.alpha")
    if kind == "replace":
        replacement = _parse_payoff(experiment.get("replacement", {}), col, "experiment.replacement")
    col.raise_if_any()
    return ShiftSpec(
        targets=tuple(int(t) for t in experiment.get("targets", ())),
        kind=kind,
        epsilon=float(experiment.get("epsilon", 0.0)),
        alpha=alpha,
        replacement=replacement,
    )


def _run_compstat(scenario, args, out_dir):
    if scenario["kind"] != "generic":
        raise PreconditionError("compstat runs on generic scenarios")
    experiment = scenario["experiment"] or {}
    if experiment.get("kind") != "shift":
        raise ValidationError(["compstat needs an experiment block of kind 'shift'"])
    col = _Collector()
    shift = _parse_shift(experiment, col)
    market = scenario["spec"]
    shifted = apply_shift(market, shift)
    report = compare(market, shifted, solver=experiment.get("solver", "brute"), shift=shift)
    bundle = _base_bundle(scenario, args, "compstat")
    bundle["results"] = {
        "objective_before": report.solve_before.objective,
        "objective_after": report.solve_after.objective,
        "firm_relations": report.firm_relations,
        "individual_relations": report.individual_relations,
        "firm_quality_delta": report.firm_quality_delta,
        "duplicate_firm_sets": report.duplicate_firm_sets,
    }
    bundle["verdicts"] = _verdict_list(report.verdicts)
    failed = bool(report.failed_verdicts)

    delta = welfare_delta(market, shifted, report.solve_before.matching, report.solve_after.matching)
    bundle["results"]["welfare_movement"] = delta.movement
    bundle["results"]["welfare_sign_claim"] = delta.sign_claim
    bundle["results"]["welfare_claim_holds"] = delta.claim_holds
    if delta.sign_claim is not None and delta.claim_holds is False:
        failed = True
    rows = [
        [_fmt(v), _fmt(b), _fmt(a), _fmt(d)]
        for v, b, a, d in zip(delta.grid, delta.before, delta.after, delta.delta)
    ]
    bundle["status"] = "assertion_failed" if failed else "ok"
    _write_report(out_dir, bundle, args.format)
    _write_csv(out_dir, "welfare.csv", ["v", "V_before", "V_after", "delta"], rows, args.format)
    _write_csv(out_dir, "matching.csv", ["firm_id", "individual_id", "matched"],
               _matching_rows(market, report.solve_before.matching), args.format)
    return 4 if failed else 0


def _run_mvpd(scenario, args, out_dir):
    if scenario["kind"] != "mvpd":
        raise PreconditionError("the mvpd subcommand needs an mvpd scenario")
    spec = scenario["spec"]
    outcome = solve_mvpd(spec)
    bundle = _base_bundle(scenario, args, "mvpd")
    bundle["results"] = {
        "menu_cutoff_types": [None if np.isinf(t) else t for t in outcome.menu_cutoff_types],
        "objective": outcome.objective,
        "viewer_revenue": outcome.viewer_revenue,
        "fee_total": outcome.fee_total,
        "viewer_dist_regular": spec.regular,
    }
    failed = False
    experiment = scenario["experiment"]
    if experiment:
        kind = experiment.get("kind")
        if kind == "horizontal_merger":
            ids = tuple(int(c) for c in experiment.get("channels", ()))
            transformed = merger_transform(spec, "horizontal", channel_ids=ids,
                                           synergy=float(experiment.get("synergy", 0.0)))
            merger = merger_compare(spec, transformed, "horizontal", channel_ids=ids)
        elif kind == "vertical_merger":
            cid = int(experiment.get("channel"))
            transformed = merger_transform(spec, "vertical", channel_id=cid)
            merger = merger_compare(spec, transformed, "vertical", channel_id=cid)
        else:
            raise ValidationError([f"unknown mvpd experiment {kind!r}"])
        bundle["results"]["bundle_movement"] = merger.bundle_movement
        bundle["verdicts"] = _verdict_list(merger.verdicts)
        failed = any(v.applicable and v.passed is False for v in merger.verdicts)
        rows = [
            [_fmt(v), _fmt(b), _fmt(a), _fmt(a - b)]
            for v, b, a in zip(spec.grid, merger.outcome_before.envelope, merger.outcome_after.envelope)
        ]
        _write_csv(out_dir, "welfare.csv", ["v", "V_before", "V_after", "delta"], rows, args.format)
        outcome = merger.outcome_before
    bundle["status"] = "assertion_failed" if failed else "ok"
    _write_report(out_dir, bundle, args.format)
    fee_rows = [[cid, _fmt(fee)] for cid, fee in sorted(outcome.fees.items())]
    _write_csv(out_dir, "fees.csv", ["channel_id", "fee"], fee_rows, args.format)
    return 4 if failed else 0


def _run_monopcomp(scenario, args, out_dir):
    if scenario["kind"] != "monopcomp":
        raise PreconditionError("the monopcomp subcommand needs a monopcomp scenario")
    spec = scenario["spec"]
    solution = solve_retail(spec)
    bundle = _base_bundle(scenario, args, "monopcomp")
    bundle["results"] = {
        "objective": solution.objective,
        "pooled": solution.pooled,
        "included_cells": list(solution.included_cells),
        "ratio_monotone_per_cell": solution.ratio_monotone_per_cell,
        "set_sizes": [int(s.sum()) for s in solution.sets],
    }
    failed = False
    experiment = scenario["experiment"]
    if experiment:
        kind = experiment.get("kind")
        if kind == "acquire_cell":
            transformed = acquire_cell(
                spec, int(experiment["cell"]),
                require_included=bool(experiment.get("require_included", True)),
            )
        elif kind == "refine_partition":
            transformed = refine_partition(spec, int(experiment["cell"]), float(experiment["split"]))
        else:
            raise ValidationError([f"unknown monopcomp experiment {kind!r}"])
        report = counterfactual_compare(spec, transformed)
        bundle["results"]["set_movement"] = report.set_movement
        rows = [
            [_fmt(v), _fmt(b), _fmt(a), _fmt(d)]
            for v, b, a, d in zip(spec.individual_grid, report.welfare_before,
                                  report.welfare_after, report.welfare_delta)
        ]
        _write_csv(out_dir, "welfare.csv", ["v", "V_before", "V_after", "delta"], rows, args.format)
    bundle["status"] = "assertion_failed" if failed else "ok"
    _write_report(out_dir, bundle, args.format)
    rows = []
    for c in range(solution.sets.shape[0]):
        for j in range(solution.sets.shape[1]):
            rows.append([j + 1, c + 1, int(solution.sets[c, j])])
    _write_csv(out_dir, "matching.csv", ["firm_id", "individual_id", "matched"], rows, args.format)
    return 4 if failed else 0


def _run_properties(args, out_dir):
    result = run_suite(args.suite, args.trials, args.seed)
    bundle = {
        "schema_version": SCHEMA_VERSION,
        "subcommand": "properties",
        "provenance": {"input_sha256": None, "seed": args.seed, "tool_version": __version__},
        "suite": result.name,
        "trials": result.trials,
        "failures": result.failures,
        "details": result.details,
        "status": "ok" if result.passed else "assertion_failed",
    }
    _write_report(out_dir, bundle, args.format)
    return 0 if result.passed else 4


def _base_bundle(scenario, args, subcommand):
    return {
        "schema_version": SCHEMA_VERSION,
        "subcommand": subcommand,
        "scenario_kind": scenario["kind"],
        "provenance": {
            "input_sha256": scenario["sha256"],
            "seed": args.seed,
            "tool_version": __version__,
        },
    }


def build_parser():
    parser = argparse.ArgumentParser(
        prog="platmatch",
        description="Solve platform matching scenarios and run counterfactual experiments",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p, scenario=True):
        if scenario:
            p.add_argument("scenario", help="path to a JSON scenario file")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--jobs", type=int, default=1, help="parallelism bound (execution is serial)")
        p.add_argument("--tolerance", type=float, default=1e-9)
        p.add_argument("--format", choices=("json", "csv", "both"), default="both")

    for name in ("solve", "oracle", "check", "compstat", "mvpd", "monopcomp"):
        common(sub.add_parser(name))
    props = sub.add_parser("properties")
    common(props, scenario=False)
    props.add_argument("--suite", required=True, choices=sorted(SUITES))
    props.add_argument("--trials", type=int, default=100)
    return parser


_DISPATCH = {
    "solve": _run_generic_solve,
    "oracle": _run_oracle,
    "check": _run_check,
    "compstat": _run_compstat,
    "mvpd": _run_mvpd,
    "monopcomp": _run_monopcomp,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return 3
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        if args.subcommand == "properties":
            return _run_properties(args, out_dir)
        scenario = load_scenario(args.scenario)
        if args.subcommand == "solve" and scenario["kind"] == "mvpd":
            return _run_mvpd(scenario, args, out_dir)
        if args.subcommand == "solve" and scenario["kind"] == "monopcomp":
            return _run_monopcomp(scenario, args, out_dir)
        return _DISPATCH[args.subcommand](scenario, args, out_dir)
    except ValidationError as exc:
        for msg in exc.errors:
            print(f"validation error: {msg}", file=sys.stderr)
        return 3
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 3
    except PreconditionError as exc:
        print(f"precondition error: {exc}", file=sys.stderr)
        return 2
    except (IdentityError, NumericError, InvariantViolation) as exc:
        print(f"internal consistency error: {exc}", file=sys.stderr)
        return 5
    except FileNotFoundError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
