"""``ptex`` command line.

Exit codes: 0 ok, 1 usage or parameter-domain error, 2 data error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any, NoReturn

from . import __version__
from ._format import render_pairs, render_table, use_color
from .config import PtexConfig, load_config
from .datasets import load_counts, parse_grid, parse_severity_spec, write_counts
from .distribution import PteParams, RngStream, sample
from .errors import PtexError
from .estimation import FitResult
from .records import METHODS, ModelRecord
from .regression import RegressionData, fit_poisson_baseline, fit_regression
from .reports import (
    fit_payload,
    gof_payload,
    moments_payload,
    regression_payload,
    risk_payload,
    run_fits,
)
from .risk import CompoundDistribution, DiscreteSeverity

logger = logging.getLogger("ptex")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class Output:
    as_json: bool
    precision: int
    color: bool

    def emit(self, payload: dict[str, Any], render: Callable[[dict[str, Any], Output], str]) -> None:
        if self.as_json:
            print(json.dumps(payload, indent=2))
        else:
            print(render(payload, self))

    def table(self, headers: Sequence[str], rows: Sequence[Sequence[object]], title: str | None = None) -> str:
        return render_table(headers, rows, precision=self.precision, title=title, color=self.color)

    def pairs(self, pairs: Sequence[tuple[str, object]], title: str | None = None) -> str:
        return render_pairs(pairs, precision=self.precision, title=title, color=self.color)


# ---------------------------------------------------------------------------
# Renderers
# ---------------------------------------------------------------------------


def _render_fit(payload: dict[str, Any], out: Output) -> str:
    ds = payload["dataset"]
    blocks = [out.pairs(
        [("dataset", ds["name"]), ("n", ds["n"]), ("mean", ds["mean"]), ("variance", ds["variance"])],
        title="Data",
    )]
    rows = []
    for f in payload["fits"]:
        if "error" in f:
            rows.append([f["method"]] + [None] * 8 + [f["error"]])
            continue
        status = "converged" if f["converged"] else f["message"]
        rows.append([
            f["method"], f["alpha"], f["theta"], f["se_alpha"], f["se_theta"],
            f["loglik"], f["aic"], f["chi_square"], f["dof"], status,
        ])
    base = payload["baseline"]
    if base is not None:
        rows.append(["poisson", None, None, None, None, base["loglik"], base["aic"],
                     base["chi_square"], base["dof"], f"lambda={base['lambda']:.{out.precision}g}"])
    blocks.append(out.table(
        ["method", "alpha", "theta", "se(alpha)", "se(theta)", "loglik", "AIC", "chi2", "dof", "status"],
        rows,
        title="Estimates",
    ))

    columns = [f for f in payload["fits"] if f.get("expected")]
    if base is not None and base.get("expected"):
        columns.append(base)
    freq_rows = []
    for i, cell in enumerate(payload["cells"]):
        freq_rows.append([cell["label"], cell["observed"]] + [c["expected"][i] for c in columns])
    tail = "open" if payload["grouping"]["open_tail"] else "closed"
    title = f"Expected frequencies, last cell {tail} ({payload['cells'][-1]['label']})"
    blocks.append(out.table(["count", "observed"] + [c["method"] for c in columns], freq_rows, title=title))
    return "\n\n".join(blocks)


def _render_moments(payload: dict[str, Any], out: Output) -> str:
    summary = out.pairs(
        [
            ("alpha", payload["alpha"]),
            ("theta", payload["theta"]),
            ("mean", payload["mean"]),
            ("variance", payload["variance"]),
            ("skewness", payload["skewness"]),
            ("kurtosis", payload["kurtosis"]),
            ("cv", payload["cv"]),
            ("mode", ", ".join(str(m) for m in payload["mode"])),
        ],
        title="PTE law",
    )
    table = out.table(["x", "pmf", "cdf"], [[r["x"], r["pmf"], r["cdf"]] for r in payload["table"]])
    return f"{summary}\n\n{table}"


def _render_risk(payload: dict[str, Any], out: Output) -> str:
    sev = payload["severity"]
    head = [("alpha", payload["alpha"]), ("theta", payload["theta"]), ("severity", sev["kind"])]
    head += [("rate", sev["rate"])] if "rate" in sev else [("max claim", sev["max_value"])]
    head += [("P(S=0)", payload["atom0"]), ("E[S]", payload["mean"])]
    if "total" in payload:
        head.append(("mass listed", payload["total"]))
        table = out.table(["s", "P(S=s)"], [[r["s"], r["pmf"]] for r in payload["rows"]])
    else:
        table = out.table(["y", "f_S(y)"], [[r["y"], r["density"]] for r in payload["rows"]])
    return f"{out.pairs(head, title='Aggregate loss')}\n\n{table}"


def _render_regression(payload: dict[str, Any], out: Output) -> str:
    def coef_table(block: dict[str, Any], title: str) -> str:
        rows = [[c["name"], c["estimate"], c["se"], c["t"], c["p"]] for c in block["coefficients"]]
        return out.table(["term", "estimate", "SE", "t", "p"], rows, title=title)

    pte = payload["pte"]
    blocks = [coef_table(pte, "PTE regression")]
    models = [["PTE", pte["loglik"], pte["aic"], "converged" if pte["converged"] else pte["message"]]]
    if payload["poisson"] is not None:
        blocks.append(coef_table(payload["poisson"], "Poisson regression"))
        models.append(["Poisson", payload["poisson"]["loglik"], payload["poisson"]["aic"], "converged"])
    blocks.append(out.table(["model", "loglik", "AIC", "status"], models, title=f"Comparison (n={payload['n']})"))
    return "\n\n".join(blocks)


def _render_gof(payload: dict[str, Any], out: Output) -> str:
    model = payload["model"]
    head = out.pairs(
        [
            ("method", model["method"]),
            ("alpha", model["alpha"]),
            ("theta", model["theta"]),
            ("dataset", payload["dataset"]["name"]),
            ("digest match", payload["digest_match"]),
            ("loglik", payload["loglik"]),
            ("AIC", payload["aic"]),
            ("chi-square", payload["chi_square"]),
            ("dof", payload["dof"]),
            ("p-value", payload["p_value"]),
        ],
        title="Goodness of fit",
    )
    expected = payload["expected"] or [None] * len(payload["cells"])
    rows = [[c["label"], c["observed"], e] for c, e in zip(payload["cells"], expected)]
    return f"{head}\n\n{out.table(['count', 'observed', 'expected'], rows)}"


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_fit(args: argparse.Namespace, config: PtexConfig, out: Output) -> int:
    data = load_counts(args.data)
    methods = list(METHODS) if args.method == "all" else [args.method]
    fits = run_fits(data, methods, max_iter=config.mle_max_iter, gtol=config.mle_gtol)
    payload = fit_payload(
        data, fits, baseline=args.baseline == "poisson", open_tail=not args.closed_tail
    )
    out.emit(payload, _render_fit)

    good = {m: f for m, f in fits.items() if isinstance(f, FitResult)}
    if args.save:
        chosen = good.get("mle") or next(iter(good.values()), None)
        if chosen is not None:
            path = Path(args.save)
            if not path.is_absolute():
                path = Path(config.model_dir) / path
            ModelRecord.from_fit(chosen, data).save(path)
    if not good:
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_sample(args: argparse.Namespace, config: PtexConfig, out: Output) -> int:
    if args.n < 1:
        raise ValueError(f"sample size must be >= 1, got {args.n}")
    params = PteParams(args.alpha, args.theta)
    rng = RngStream(args.seed if args.seed is not None else config.default_seed)
    logger.info("Sampling %d counts with seed %d", args.n, rng.seed)
    counts = sample(params, args.n, rng)
    if args.output:
        write_counts(args.output, counts)
        if out.as_json:
            print(json.dumps({"seed": rng.seed, "n": args.n, "output": str(args.output)}))
    elif out.as_json:
        print(json.dumps({"seed": rng.seed, "counts": counts.tolist()}))
    else:
        sys.stdout.write("".join(f"{c}\n" for c in counts))
    return EXIT_OK


def cmd_risk(args: argparse.Namespace, config: PtexConfig, out: Output) -> int:
    severity = parse_severity_spec(args.severity)
    dist = CompoundDistribution(PteParams(args.alpha, args.theta), severity)
    if isinstance(severity, DiscreteSeverity):
        payload = risk_payload(dist, s_max=args.s_max, max_rows=config.max_table_rows)
    else:
        payload = risk_payload(dist, grid=parse_grid(args.grid))
    out.emit(payload, _render_risk)
    return EXIT_OK


def cmd_regress(args: argparse.Namespace, config: PtexConfig, out: Output) -> int:
    data = RegressionData.from_csv(args.csv, args.response, args.covariates or None)
    baseline = fit_poisson_baseline(data)
    fit = fit_regression(
        data,
        init=(2.0, baseline.beta),
        max_iter=config.regression_max_iter,
        gtol=config.regression_gtol,
    )
    out.emit(regression_payload(fit, None if args.no_baseline else baseline), _render_regression)
    return EXIT_OK


def cmd_gof(args: argparse.Namespace, config: PtexConfig, out: Output) -> int:
    record = ModelRecord.load(args.model)
    payload = gof_payload(record, load_counts(args.data), open_tail=not args.closed_tail)
    out.emit(payload, _render_gof)
    return EXIT_OK


def cmd_moments(args: argparse.Namespace, config: PtexConfig, out: Output) -> int:
    if args.x_max < 0:
        raise ValueError(f"--x-max must be >= 0, got {args.x_max}")
    out.emit(moments_payload(PteParams(args.alpha, args.theta), args.x_max), _render_moments)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _law_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("-a", "--alpha", type=float, required=True, help="alpha in [-1, 1]")
    p.add_argument("-t", "--theta", type=float, required=True, help="theta > 0")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("--precision", type=int, help="significant digits in tables (default 6)")
    common.add_argument("--config", help="path to a JSON config file")
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")

    parser = _Parser(prog="ptex", description="Poisson-transmuted-exponential count models.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", parents=[common], help="fit a count dataset")
    p.add_argument("--data", required=True, help="count file or embedded dataset name (seizure)")
    p.add_argument("--method", choices=[*METHODS, "all"], default="mle")
    p.add_argument("--baseline", choices=["poisson"], help="add a comparison model")
    p.add_argument("--closed-tail", action="store_true",
                   help="last chi-square cell holds only the largest observed value")
    p.add_argument("--save", metavar="PATH", help="write the model record (MLE when fitting all)")
    p.set_defaults(handler=cmd_fit)

    p = sub.add_parser("sample", parents=[common], help="draw counts from a PTE law")
    _law_options(p)
    p.add_argument("-n", type=int, required=True, help="number of draws")
    p.add_argument("--seed", type=int)
    p.add_argument("-o", "--output", help="file to write (default stdout)")
    p.set_defaults(handler=cmd_sample)

    p = sub.add_parser("risk", parents=[common], help="aggregate-loss density or pmf")
    _law_options(p)
    p.add_argument("--severity", required=True, help="exp:RATE, erlang2:RATE or discrete:PATH")
    p.add_argument("--grid", default="0:10:0.5", help="START:STOP:STEP for continuous severities")
    p.add_argument("--s-max", type=int, default=50, help="largest total for discrete severities")
    p.set_defaults(handler=cmd_risk)

    p = sub.add_parser("regress", parents=[common], help="log-link count regression")
    p.add_argument("--csv", required=True, help="CSV file with a header row")
    p.add_argument("--response", required=True)
    p.add_argument("--covariates", nargs="*", help="default: every other column")
    p.add_argument("--no-baseline", action="store_true", help="omit the Poisson regression")
    p.set_defaults(handler=cmd_regress)

    p = sub.add_parser("gof", parents=[common], help="evaluate a saved model on data")
    p.add_argument("--model", required=True, help="model record written by fit --save")
    p.add_argument("--data", required=True, help="count file or embedded dataset name")
    p.add_argument("--closed-tail", action="store_true")
    p.set_defaults(handler=cmd_gof)

    p = sub.add_parser("moments", parents=[common], help="moments, mode and pmf table")
    _law_options(p)
    p.add_argument("--x-max", type=int, default=10)
    p.set_defaults(handler=cmd_moments)

    return parser


def _configure_logging(verbose: bool, quiet: bool) -> None:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(
        level=level,
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
        stream=sys.stderr,
    )
    logging.getLogger("ptex").setLevel(level)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose, args.quiet)

    try:
        config = load_config(args.config)
    except (OSError, ValueError) as e:
        print(f"ptex: error: invalid configuration: {e}", file=sys.stderr)
        return EXIT_USAGE
    precision = args.precision if args.precision is not None else config.precision
    if precision < 1:
        print("ptex: error: --precision must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    out = Output(args.json, precision, use_color(sys.stdout, config.no_color))

    try:
        return args.handler(args, config, out)
    except PtexError as e:
        print(f"ptex: error: {e}", file=sys.stderr)
        return e.exit_code
    except ValueError as e:
        print(f"ptex: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"ptex: error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
