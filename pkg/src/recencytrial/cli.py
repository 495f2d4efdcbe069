"""Command-line interface: ``recencytrial {design,simulate,estimate}``.

Exit codes: 0 success, 1 usage or validation error, 2 infeasible design,
3 runtime or degenerate-estimate error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from typing import Dict, List, Optional, Sequence

from .config import DesignConfig, load_config
from .design import sample_size
from .domain import AssayProperties, HypothesisSpec, ScreeningCounts, TrialCounts
from .errors import InfeasibleDesignError, RecencyTrialError, ValidationError
from .estimators import efficacy_test, lambda0_kassanjee, lambda1_active_arm
from .simulation import SimulationConfig, run_study, simulate_replicates, write_replicates

EXIT_OK, EXIT_VALIDATION, EXIT_INFEASIBLE, EXIT_RUNTIME = 0, 1, 2, 3

DESIGN_COLUMNS = ("tau", "n_screened", "expected_n_positive", "expected_n_recent",
                  "expected_n_enrolled", "expected_n_events")
SIMULATE_COLUMNS = ("tau", "n_screened", "hypothesis", "true_ratio", "replicates",
                    "n_degenerate", "rejection_rate", "mean_z", "var_z", "var_log_lambda0",
                    "var_log_lambda1", "corr_log_lambdas", "var_log_ratio")
ESTIMATE_COLUMNS = ("lambda0_hat", "v0_hat", "lambda1_hat", "v1_hat", "ratio_hat", "rho_hat",
                    "ci_lower", "ci_upper", "z", "reject")
HEADERS = {
    "tau": "tau", "n_screened": "N", "expected_n_positive": "E(N+)",
    "expected_n_recent": "E(N_R)", "expected_n_enrolled": "E(N-,enroll)",
    "expected_n_events": "E(N_event)",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2, which is reserved for infeasible designs
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def format_value(value, precision: int) -> str:
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return format(value, f".{precision}g")
    return str(value)


def _json_value(value, precision: int):
    if isinstance(value, (bool, int)) or value is None or isinstance(value, str):
        return value
    if math.isnan(value):
        return None
    return float(format(value, f".{precision}g"))


def render(rows: List[Dict], columns: Sequence[str], fmt: str, precision: int) -> str:
    """Render rows as an aligned table, CSV or JSON (a list of objects)."""
    if fmt == "json":
        data = [{c: _json_value(r[c], precision) for c in columns} for r in rows]
        return json.dumps(data, indent=2) + "\n"
    cells = [[format_value(r[c], precision) for c in columns] for r in rows]
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        writer.writerows(cells)
        return buf.getvalue()
    header = [HEADERS.get(c, c) for c in columns]
    widths = [max(len(h), *(len(row[i]) for row in cells)) for i, h in enumerate(header)]
    lines = ["  ".join(h.rjust(w) for h, w in zip(header, widths)),
             "  ".join("-" * w for w in widths)]
    lines += ["  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in cells]
    return "\n".join(lines) + "\n"


def _taus(cfg: DesignConfig, tau: Optional[float]):
    return (tau,) if tau is not None else cfg.followup_taus


def cmd_design(args) -> str:
    cfg = load_config(args.config)
    hyp = cfg.hypothesis()
    rows = []
    for tau in _taus(cfg, args.tau):
        rep = sample_size(cfg.context(tau), hyp)
        rows.append({"tau": tau, "n_screened": rep.n_screened,
                     "expected_n_positive": rep.expected_n_positive,
                     "expected_n_recent": rep.expected_n_recent,
                     "expected_n_enrolled": rep.expected_n_enrolled,
                     "expected_n_events": rep.expected_n_events})
    return render(rows, DESIGN_COLUMNS, args.format, args.precision)


def cmd_simulate(args) -> str:
    cfg = load_config(args.config)
    hyp = cfg.hypothesis()
    if args.true_ratio is not None:
        cells = [("custom", args.true_ratio)]
    else:
        cells = [("H0", hyp.r0), ("H1", hyp.r1)]
    taus = _taus(cfg, args.tau)
    if args.replicates_out and len(taus) * len(cells) > 1:
        raise ValidationError("--replicates-out needs a single cell: give --tau and --true-ratio")
    rows = []
    for tau in taus:
        ctx = cfg.context(tau)
        n = args.n if args.n is not None else sample_size(ctx, hyp).n_screened
        for label, ratio in cells:
            sim = SimulationConfig(ctx=ctx, hyp=hyp, true_ratio=ratio, n_screened=n,
                                   replicates=args.reps, master_seed=args.seed,
                                   zero_rse_mode=args.zero_rse,
                                   legacy_inctools_variance=cfg.legacy_inctools_variance)
            arrays = simulate_replicates(sim, args.workers)
            if args.replicates_out:
                write_replicates(arrays, args.replicates_out)
            rep = run_study(sim, arrays=arrays)
            rows.append({"tau": tau, "n_screened": n, "hypothesis": label, "true_ratio": ratio,
                         "replicates": rep.replicate_count, "n_degenerate": rep.n_degenerate,
                         "rejection_rate": rep.rejection_rate, "mean_z": rep.mean_z,
                         "var_z": rep.var_z, "var_log_lambda0": rep.var_log_lambda0,
                         "var_log_lambda1": rep.var_log_lambda1,
                         "corr_log_lambdas": rep.corr_log_lambdas,
                         "var_log_ratio": rep.var_log_ratio})
    return render(rows, SIMULATE_COLUMNS, args.format, args.precision)


def cmd_estimate(args) -> str:
    legacy = args.legacy_inctools_variance
    r0 = args.r0
    if args.config is not None:
        cfg = load_config(args.config)
        assay = cfg.context().assay
        legacy = legacy or cfg.legacy_inctools_variance
        r0 = cfg.r0 if r0 is None else r0
    else:
        missing = [f"--{name.replace('_', '-')}" for name in ("mdri_days", "mdri_rse_pct", "frr_pct")
                   if getattr(args, name) is None]
        if missing:
            raise UsageError(f"give --config or all of {', '.join(missing)}")
        assay = AssayProperties.from_days(args.cutoff_years, args.mdri_days,
                                          args.mdri_rse_pct / 100, args.frr_pct / 100,
                                          args.frr_rse_pct / 100)
    r0 = 0.5 if r0 is None else r0
    # the alternative does not enter the test; any r1 below r0 is a placeholder
    hyp = HypothesisSpec(r0=r0, r1=r0 / 2, alpha=args.alpha)
    counts = ScreeningCounts(args.n_total, args.n_positive, args.n_recent)
    trial = TrialCounts(args.n_enrolled, args.n_events, args.tau)
    l0 = lambda0_kassanjee(counts, assay, legacy_inctools_variance=legacy)
    l1 = lambda1_active_arm(trial)
    res = efficacy_test(l0, l1, hyp, confidence=args.confidence)
    row = {"lambda0_hat": l0.value, "v0_hat": l0.log_variance, "lambda1_hat": l1.value,
           "v1_hat": l1.log_variance, "ratio_hat": res.ratio_hat, "rho_hat": res.rho_hat,
           "ci_lower": res.ci_rho[0], "ci_upper": res.ci_rho[1], "z": res.z_value,
           "reject": res.reject}
    return render([row], ESTIMATE_COLUMNS, args.format, args.precision)


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _seed(text):
    value = int(text)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be in [0, 2**64)")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="recencytrial",
                     description="Sample size, simulation and analysis for active-arm trials "
                                 "with a recency-assay counterfactual placebo incidence.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("table", "csv", "json"), default="table")
    common.add_argument("--precision", type=_positive_int, default=4,
                        help="significant digits for printed numbers (default 4)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("design", parents=[common], help="screening sample size per follow-up time")
    p.add_argument("config", help="config file, or 'msm' / 'women' for the bundled ones")
    p.add_argument("--tau", type=float, help="single follow-up time in years (default: config list)")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo type-I error and power")
    p.add_argument("config", help="config file, or 'msm' / 'women' for the bundled ones")
    p.add_argument("--reps", type=_positive_int, default=10000, help="replicates per cell")
    p.add_argument("--seed", type=_seed, default=0, help="master seed")
    p.add_argument("--true-ratio", type=float,
                   help="generate under this ratio only (default: both r0 and r1)")
    p.add_argument("--n", type=_positive_int,
                   help="screening size (default: the computed sample size)")
    p.add_argument("--tau", type=float, help="single follow-up time in years")
    p.add_argument("--workers", type=_positive_int, default=1,
                   help="worker threads; results do not depend on this")
    p.add_argument("--zero-rse", action="store_true", help="treat MDRI and FRR as known exactly")
    p.add_argument("--replicates-out", metavar="FILE", help="write per-replicate CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", parents=[common], help="analyse observed counts")
    for flag in ("--n-total", "--n-positive", "--n-recent", "--n-enrolled", "--n-events"):
        p.add_argument(flag, type=int, required=True)
    p.add_argument("--tau", type=float, required=True, help="follow-up time in years")
    p.add_argument("--config", help="take pooled assay properties and r0 from this config")
    p.add_argument("--mdri-days", type=float)
    p.add_argument("--mdri-rse-pct", type=float)
    p.add_argument("--frr-pct", type=float)
    p.add_argument("--frr-rse-pct", type=float, default=25.0)
    p.add_argument("--cutoff-years", type=float, default=2.0)
    p.add_argument("--r0", type=float, help="null incidence ratio (default 0.5)")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--confidence", type=float, default=0.95)
    p.add_argument("--legacy-inctools-variance", action="store_true",
                   help="drop the FRR-uncertainty cross term from the variance")
    p.set_defaults(func=cmd_estimate)
    return parser


def main(argv: Optional[Sequence[str]] = None, stdout=None, stderr=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        stdout.write(args.func(args))
    except UsageError as exc:
        stderr.write(f"{exc}\n")
        return EXIT_VALIDATION
    except InfeasibleDesignError as exc:
        stderr.write(f"infeasible design: {exc}\n")
        return EXIT_INFEASIBLE
    except ValidationError as exc:
        stderr.write(f"error: {exc}\n")
        return EXIT_VALIDATION
    except (RecencyTrialError, OSError) as exc:
        # estimation, simulation and file errors
        stderr.write(f"error: {exc}\n")
        return EXIT_RUNTIME
    return EXIT_OK


def main_entry() -> None:
    sys.exit(main())
