"""Batch front-end.

Subcommands::

    estimandkit analyze   --data f.csv --treatment T --outcome Y --covariates X1 X2 --estimand att --method smr-weights
    estimandkit balance   --data f.csv --treatment T --covariates X1 X2 --estimand att --method smr-weights
    estimandkit simulate  --config sim.json
    estimandkit oracle

Any flag may also come from a JSON ``--config`` file (keys use underscores);
flags given on the command line win. Exit codes: 0 success, 2 validation
failure, 3 estimand/method incompatibility, 4 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import warnings
from pathlib import Path
from typing import Optional

import numpy as np

from . import simulation as sim
from .core import Dataset, Estimand, validate
from .diagnostics import balance_table, overlap_report, target_population
from .errors import EstimandKitError, EstimandRelabelWarning, IncompatibleEstimandError, ValidationError
from .estimation import Pipeline, bootstrap, hajek_contrast, with_bootstrap
from .weighting import TrimSpec

SCHEMA_VERSION = 1

_AS_ATT = frozenset({"pair-matching", "optimal-pair-matching", "full-matching", "fine-stratification",
                     "smr-weights"})
COMPATIBLE = {
    Estimand.ATT: _AS_ATT,
    Estimand.ATU: _AS_ATT,
    Estimand.ATE: frozenset({"full-matching", "fine-stratification", "ipw"}),
    Estimand.ATO: frozenset({"caliper-matching", "cem", "cardinality-matching", "overlap-weights",
                             "matching-weights", "weight-trimming"}),
}
ALL_METHODS = sorted(set().union(*COMPATIBLE.values()))


def is_compatible(estimand: Estimand, method: str, relabeled: bool = False) -> bool:
    """Whether the (estimand, method) pair is allowed.

    A restriction that relabels a run to the ATO (caliper, trimming, dropped
    strata) makes any method acceptable for the ATO.
    """
    if method in COMPATIBLE[estimand]:
        return True
    return relabeled and estimand is Estimand.ATO and method in ALL_METHODS


def check_compatible(estimand: Estimand, method: str) -> None:
    if method not in ALL_METHODS:
        raise ValidationError(f"unknown method {method!r}; choose from {', '.join(ALL_METHODS)}")
    if not is_compatible(estimand, method):
        allowed = ", ".join(sorted(COMPATIBLE[estimand]))
        raise IncompatibleEstimandError(
            f"method {method!r} does not target the {estimand}; methods for the {estimand}: {allowed}"
        )


# --------------------------------------------------------------------------
# input


def read_csv(path, treatment: str, covariates, outcome: Optional[str] = None) -> Dataset:
    """Read only the named columns of a header-row CSV file.

    Empty outcome cells become missing outcomes; every other cell must parse
    as a number.
    """
    path = Path(path)
    try:
        fh = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read data file {path}: {exc.strerror}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValidationError(f"data file {path} is empty") from None
        wanted = [treatment, *covariates] + ([outcome] if outcome else [])
        missing = [c for c in wanted if c not in header]
        if missing:
            raise ValidationError(f"column(s) {', '.join(missing)} not found in {path} (header: {', '.join(header)})")
        pos = {c: header.index(c) for c in wanted}
        x, t, y = [], [], []
        for line, row in enumerate(reader, start=2):
            if not any(cell.strip() for cell in row):
                continue

            def num(col):
                cell = row[pos[col]].strip() if pos[col] < len(row) else ""
                try:
                    return float(cell)
                except ValueError:
                    raise ValidationError(f"line {line}, column {col!r}: cannot parse {cell!r} as a number") from None

            x.append([num(c) for c in covariates])
            t.append(num(treatment))
            if outcome:
                cell = row[pos[outcome]].strip() if pos[outcome] < len(row) else ""
                y.append(math.nan if cell == "" else num(outcome))
    x_arr = np.array(x, dtype=float).reshape(len(t), len(covariates))
    return Dataset(x_arr, t, tuple(covariates), y if outcome else None)


def write_csv(dataset: Dataset, path, treatment: str = "T", outcome: str = "Y") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([*dataset.covariate_names, treatment] + ([outcome] if dataset.outcome is not None else []))
        for row in dataset.to_rows():
            w.writerow(["" if v is None else repr(v) if isinstance(v, float) else v for v in row])


# --------------------------------------------------------------------------
# reports


def _clean(obj):
    """Make a report JSON-safe: NaN/inf become null, numpy scalars become Python numbers."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, Estimand):
        return obj.value
    return obj


def dump_report(report: dict) -> str:
    return json.dumps(_clean(report), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _emit(text: str, output: Optional[str]) -> None:
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _pipeline_from(cfg: dict) -> Pipeline:
    trim = None
    if cfg.get("trim_window") is not None:
        lo, hi = cfg["trim_window"]
        trim = TrimSpec.window(float(lo), float(hi))
    elif cfg.get("trim_percentile") is not None:
        trim = TrimSpec.cap(float(cfg["trim_percentile"]))
    tol = cfg.get("tolerance")
    if isinstance(tol, list):
        tol = float(tol[0]) if len(tol) == 1 else dict(zip(cfg["covariates"], map(float, tol)))
    return Pipeline(
        method=cfg["method"],
        caliper=cfg.get("caliper"),
        ratio=int(cfg.get("ratio") or 1),
        strata_count=int(cfg.get("strata_count") or 5),
        bins=cfg.get("bins"),
        tolerance=tol,
        distance=cfg.get("distance") or "logit",
        trim=trim,
        measure=cfg.get("measure") or "mean-difference",
    )


def design_section(dataset: Dataset, pipeline: Pipeline, estimand: Estimand):
    """Outcome-free part of the report; returns (section, design, effective estimand, warnings)."""
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", EstimandRelabelWarning)
        design = pipeline.design(dataset, estimand)
    notes = [str(w.message) for w in caught if issubclass(w.category, EstimandRelabelWarning)]
    weights = design.weights
    effective = weights.target
    section: dict = {}
    scores = None
    if design.model is not None:
        scores = design.model.scores
        section["propensity"] = {
            "coefficients": dict(zip(("(intercept)",) + design.model.covariate_names,
                                     design.model.coefficients.tolist())),
            "converged": design.model.converged,
            "iterations": design.model.iterations,
        }
        overlap = overlap_report(scores, dataset.treatment)
        section["overlap"] = overlap.to_dict()
        if not overlap.feasible[estimand]:
            notes.append(f"overlap diagnostics judge the {estimand} infeasible for these data")
    section["balance"] = balance_table(dataset, weights, scores).to_dict()
    section["target_population"] = {
        "description": "weighted covariate means per group",
        "means": target_population(dataset, weights),
    }
    section["weights"] = {"target": effective, "provenance": weights.provenance,
                          "positive": int(np.count_nonzero(weights.weights > 0))}
    if design.match is not None:
        section["match"] = {"method": design.match.method, "strata": design.match.n_strata,
                            "discarded": len(design.match.discarded), "total_distance": design.match.distance}
    notes.extend(n for n in weights.notes if n not in notes)
    return section, design, effective, notes


def run_analysis(cfg: dict, design_only: bool = False) -> tuple[dict, int]:
    """Execute one analysis config; returns the report and the exit code."""
    for key in ("data", "treatment", "covariates", "estimand", "method"):
        if not cfg.get(key):
            raise ValidationError(f"missing required setting {key!r}")
    estimand = Estimand.parse(cfg["estimand"])
    method = cfg["method"]
    check_compatible(estimand, method)
    covariates = list(cfg["covariates"])
    outcome = None if design_only else cfg.get("outcome")
    if not design_only and not outcome:
        raise ValidationError("analyze needs --outcome (use the balance command for a design-only run)")

    dataset = read_csv(cfg["data"], cfg["treatment"], covariates, outcome)
    findings = validate(dataset)
    if findings:
        raise ValidationError("; ".join(findings))
    pipeline = _pipeline_from(cfg)
    section, design, effective, notes = design_section(dataset.without_outcome(), pipeline, estimand)
    relabeled = effective is not estimand
    if not is_compatible(effective, method, relabeled):
        raise IncompatibleEstimandError(f"method {method!r} ended up targeting the {effective}")

    report = {
        "schema_version": SCHEMA_VERSION,
        "estimand": effective,
        "method": method,
        "relabeled": relabeled,
        "columns": {"treatment": cfg["treatment"], "covariates": covariates},
        "design": section,
        "warnings": notes,
    }
    if not design_only:
        report["columns"]["outcome"] = outcome
        estimate = hajek_contrast(dataset, design.weights, pipeline.measure)
        if cfg.get("bootstrap"):
            res = bootstrap(dataset, pipeline, int(cfg["bootstrap"]), int(cfg.get("seed") or 0), estimand)
            estimate = with_bootstrap(estimate, res)
        report["estimate"] = estimate.to_dict()
        report["warnings"] = notes + [n for n in estimate.notes if n not in notes]
    return report, 0


def run_simulation(cfg: dict) -> dict:
    if "dgp" in cfg:
        config = sim.DGPConfig.from_dict(cfg["dgp"])
    elif "scenario" in cfg:
        name = cfg["scenario"]
        if name not in sim.SCENARIOS:
            raise ValidationError(f"unknown scenario {name!r}; choose from {', '.join(sim.SCENARIOS)}")
        kwargs = {"n": int(cfg["n"])} if cfg.get("n") else {}
        config = sim.SCENARIOS[name](**kwargs)
    else:
        raise ValidationError("simulation config needs a 'dgp' or 'scenario' section")
    for key in ("estimand", "method"):
        if not cfg.get(key):
            raise ValidationError(f"simulation config needs {key!r}")
    estimand = Estimand.parse(cfg["estimand"])
    check_compatible(estimand, cfg["method"])
    pipeline = _pipeline_from({**cfg, "covariates": list(config.covariate_names)})
    R = int(cfg.get("replications") or 1)
    seed = int(cfg.get("seed") or 0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EstimandRelabelWarning)
        result = sim.evaluate_bias(config, pipeline, estimand, R, seed)
    out = result.to_dict()
    out.update({"schema_version": SCHEMA_VERSION, "method": cfg["method"], "seed": seed,
                "dgp": config.to_dict()})
    return out


def oracle_lines() -> list[str]:
    data, pot, scores = sim.table1()
    truths = sim.true_estimands(pot, data.treatment, scores)
    lines = [f"{e.value}={truths[e]:g}" for e in (Estimand.ATE, Estimand.ATT, Estimand.ATU)]
    lines.append(f"ATO={truths[Estimand.ATO]:.6g}  ({sim.ATO_DEFINITION}; scores 0.6 for X=0, 0.2 for X=1)")
    return lines


# --------------------------------------------------------------------------
# argument handling


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="estimandkit", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_outcome: bool):
        p.add_argument("--config", help="JSON file supplying any of these settings")
        p.add_argument("--data", help="CSV file with a header row")
        p.add_argument("--treatment", help="0/1 treatment column")
        if with_outcome:
            p.add_argument("--outcome", help="outcome column")
        p.add_argument("--covariates", nargs="+", help="covariate columns")
        p.add_argument("--estimand", choices=["att", "atu", "ate", "ato", "ATT", "ATU", "ATE", "ATO"])
        p.add_argument("--method", help=f"one of: {', '.join(ALL_METHODS)}")
        p.add_argument("--caliper", type=float, help="caliper, in SDs of the logit score")
        p.add_argument("--ratio", type=int, help="controls per focal unit for pair matching")
        p.add_argument("--strata-count", type=int, dest="strata_count")
        p.add_argument("--bins", type=int, help="CEM bins per continuous covariate (default Sturges)")
        p.add_argument("--tolerance", type=float, nargs="+", help="cardinality matching |SMD| bound(s)")
        p.add_argument("--distance", choices=["logit", "euclidean"])
        p.add_argument("--trim-window", type=float, nargs=2, dest="trim_window", metavar=("LO", "HI"))
        p.add_argument("--trim-percentile", type=float, dest="trim_percentile")
        p.add_argument("--output", help="report path (default stdout)")

    a = sub.add_parser("analyze", help="design, diagnostics and effect estimate")
    common(a, True)
    a.add_argument("--measure", choices=["mean-difference", "risk-ratio", "odds-ratio"])
    a.add_argument("--bootstrap", type=int, help="bootstrap replicates")
    a.add_argument("--seed", type=int)
    b = sub.add_parser("balance", help="design-stage diagnostics only; never reads the outcome")
    common(b, False)
    s = sub.add_parser("simulate", help="bias evaluation on a data-generating process")
    s.add_argument("--config", required=True)
    s.add_argument("--replications", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--output")
    sub.add_parser("oracle", help="print the true estimands of the embedded example population")
    return parser


def merged_config(args: argparse.Namespace) -> dict:
    cfg: dict = {}
    if getattr(args, "config", None):
        try:
            cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config file {args.config}: {exc}") from None
        if not isinstance(cfg, dict):
            raise ValidationError("config file must hold a JSON object")
    for key, value in vars(args).items():
        if key not in ("command", "config") and value is not None:
            cfg[key] = value
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "oracle":
            print("\n".join(oracle_lines()))
            return 0
        cfg = merged_config(args)
        if args.command == "simulate":
            _emit(dump_report(run_simulation(cfg)), cfg.get("output"))
            return 0
        report, code = run_analysis(cfg, design_only=args.command == "balance")
        report["command"] = args.command
        _emit(dump_report(report), cfg.get("output"))
        return code
    except EstimandKitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
