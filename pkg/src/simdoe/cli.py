"""Command-line entry point.

Subcommands mirror the study workflow: design generation, study execution,
ANOVA / effect / half-normal / robustness analysis, and the two packaged
case studies.  Exit codes: 0 ok, 2 validation error, 3 simulation failure,
4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import casestudies, harness, heredity
from .analysis import (anova_csv, effect_estimates, fit_anova, format_anova,
                       half_normal, marginal_means)
from .core import (Role, ResponseTable, filter_table, make_factor,
                   read_response_csv, reorder_factors, response_csv_text,
                   write_design_csv, write_design_json, write_response_csv)
from .design import (crossed_array, defining_relation, design_report,
                     fractional_factorial, full_factorial)
from .errors import SimulationFailure, ValidationError
from .plots import (PlotKind, PlotSpec, half_normal_svg, histogram_grid_svg,
                    interaction2_svg)
from .trpd import format_ranking, response_distributions, robustness_summary

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SIMULATION = 3
EXIT_IO = 4


def _parse_factor(text: str):
    """Parse 'name=l1,l2' or 'name:control=l1,l2' into a Factor."""
    head, _, body = text.partition("=")
    if not body:
        raise ValidationError(f"factor spec needs levels: {text!r}")
    name, _, role_text = head.partition(":")
    role = Role(role_text) if role_text else Role.UNASSIGNED
    raw = [tok.strip() for tok in body.split(",") if tok.strip()]
    values: list[object] = []
    for tok in raw:
        try:
            values.append(float(tok))
        except ValueError:
            values = list(raw)
            break
    return make_factor(name.strip(), values, role)


def _parse_excludes(pairs):
    out: dict[str, list[str]] = {}
    for pair in pairs or ():
        name, _, levels = pair.partition("=")
        if not levels:
            raise ValidationError(f"expected factor=level[,level...]: {pair!r}")
        out.setdefault(name.strip(), []).extend(
            tok.strip() for tok in levels.split(","))
    return out or None


def _load_table(args) -> ResponseTable:
    table = read_response_csv(args.table)
    exclude = _parse_excludes(getattr(args, "exclude", None))
    keep = _parse_excludes(getattr(args, "keep", None))
    if exclude or keep:
        table = filter_table(table, exclude=exclude, keep=keep)
    order = getattr(args, "order", None)
    if order:
        table = reorder_factors(table, [t.strip() for t in order.split(",")])
    return table


def _effects_for(args, table):
    relation = None
    if args.generators:
        gens = [g.strip() for g in args.generators.split(",")]
        relation = defining_relation(gens, len(table.design.factors))
    return effect_estimates(table, max_order=args.max_order,
                            relation=relation)


def _cmd_design(args) -> int:
    if args.design_cmd == "full":
        design = full_factorial([_parse_factor(f) for f in args.factor])
        report = design_report(design)
    elif args.design_cmd == "fraction":
        gens = [g.strip() for g in args.generators.split(",")]
        design = fractional_factorial(
            [_parse_factor(f) for f in args.factor], gens)
        report = design_report(design, gens, alias_order=args.alias_order)
    else:
        control = full_factorial([_parse_factor(f) for f in args.control])
        noise_factors = [_parse_factor(f) for f in args.noise]
        if args.noise_generators:
            gens = [g.strip() for g in args.noise_generators.split(",")]
            noise = fractional_factorial(noise_factors, gens)
        else:
            noise = full_factorial(noise_factors)
        design = crossed_array(control, noise)
        report = design_report(design)
    sys.stdout.write(report)
    if args.out:
        write_design_csv(design, args.out)
    if args.json:
        write_design_json(design, args.json)
    return EXIT_OK


def _cmd_run(args) -> int:
    plan = harness.load_plan(args.study)
    if args.pilot:
        subset = harness.parse_pilot_spec(args.pilot, plan.design.n_runs)
        table, failures = harness.pilot(plan, runs=subset,
                                        workers=args.workers,
                                        keep_going=args.keep_going)
    else:
        table, failures = harness.run_study(plan, workers=args.workers,
                                            keep_going=args.keep_going)
    out = args.out or plan.output
    if out:
        write_response_csv(table, out)
        sys.stdout.write(f"wrote {table.n_rows} rows to {out}\n")
    else:
        sys.stdout.write(response_csv_text(table))
    for f in failures:
        sys.stderr.write(f"failed: {f}\n")
    return EXIT_SIMULATION if failures else EXIT_OK


def _cmd_anova(args) -> int:
    table = _load_table(args)
    anova = fit_anova(table, max_order=args.max_order)
    sys.stdout.write(format_anova(anova))
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            fh.write(anova_csv(anova))
    return EXIT_OK


def _cmd_effects(args) -> int:
    table = _load_table(args)
    effects = _effects_for(args, table)
    names = table.design.factor_names
    lines = ["term,effect,aliases"]
    for e in sorted(effects, key=lambda e: -abs(e.value)):
        alias = " ".join(t.name(names) for t in e.aliases)
        lines.append(f"{e.term.name(names)},{e.value!r},{alias}")
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return EXIT_OK


def _cmd_halfnormal(args) -> int:
    table = _load_table(args)
    effects = _effects_for(args, table)
    points = half_normal(effects)
    names = table.design.factor_names
    lines = ["quantile,abs_effect,term"]
    for q, v, term in points:
        lines.append(f"{q!r},{v!r},{term.name(names)}")
    sys.stdout.write("\n".join(lines) + "\n")
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            fh.write("\n".join(lines) + "\n")
    if args.svg:
        spec = PlotSpec(PlotKind.HALF_NORMAL, out=args.svg,
                        label_top=args.label_top)
        with open(args.svg, "w", encoding="utf-8", newline="") as fh:
            fh.write(half_normal_svg(points, names, spec))
    return EXIT_OK


def _cmd_trpd(args) -> int:
    table = _load_table(args)
    control = tuple(t.strip() for t in args.control.split(","))
    summary = robustness_summary(table, control, args.target,
                                 exceedance_penalty=args.penalty)
    sys.stdout.write(format_ranking(summary))
    if args.hist_svg:
        if len(control) != 2:
            raise ValidationError("--hist-svg needs exactly 2 control factors")
        groups = response_distributions(table, control)
        rows = table.design.factors[table.design.factor_index(control[0])].labels
        cols = table.design.factors[table.design.factor_index(control[1])].labels
        spec = PlotSpec(PlotKind.HISTOGRAM_GRID, reference_line=args.target)
        with open(args.hist_svg, "w", encoding="utf-8", newline="") as fh:
            fh.write(histogram_grid_svg(groups, rows, cols, spec))
    return EXIT_OK


def _cmd_heredity(args) -> int:
    params = heredity.solve_heredity_params(args.ene, args.q)
    if args.heredity_cmd == "solve":
        mains, one_p, two_p = heredity.expected_counts(params)
        sys.stdout.write(
            f"pi={params.pi!r}\nc1={params.c1!r}\nc2={params.c2!r}\n"
            f"expected active: mains={mains:g}, "
            f"one-parent 2fi={one_p:g}, two-parent 2fi={two_p:g}\n")
    else:
        pattern = heredity.sample_pattern(params, args.seed)
        lines = ["kind,i,j"]
        for i in sorted(pattern.active_mains):
            lines.append(f"main,{i + 1},")
        for i, j in sorted(pattern.active_interactions):
            lines.append(f"interaction,{i + 1},{j + 1}")
        text = "\n".join(lines) + "\n"
        sys.stdout.write(text)
        if args.csv:
            with open(args.csv, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
    return EXIT_OK


def _cmd_casestudy(args) -> int:
    if args.case == "kmm":
        bundle = casestudies.casestudy_kmm(args.stage, args.outdir)
    else:
        bundle = casestudies.casestudy_sl(args.seed, args.scale, args.outdir,
                                          workers=args.workers)
    for name in sorted(bundle):
        sys.stdout.write(f"wrote {bundle[name]}\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="simdoe",
        description="design, run and analyze simulation experiments")
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("design", help="construct experimental designs")
    dsub = p.add_subparsers(dest="design_cmd", required=True)
    for kind in ("full", "fraction", "cross"):
        d = dsub.add_parser(kind)
        if kind == "cross":
            d.add_argument("--control", action="append", required=True,
                           metavar="NAME[:ROLE]=L1,L2,...")
            d.add_argument("--noise", action="append", required=True,
                           metavar="NAME[:ROLE]=L1,L2,...")
            d.add_argument("--noise-generators", default=None)
        else:
            d.add_argument("--factor", action="append", required=True,
                           metavar="NAME[:ROLE]=L1,L2,...")
        if kind == "fraction":
            d.add_argument("--generators", required=True,
                           help="comma list, e.g. ABCE=+1,BCDF=+1")
            d.add_argument("--alias-order", type=int, default=2)
        d.add_argument("--out", help="design CSV path")
        d.add_argument("--json", help="design JSON path")
        d.set_defaults(fn=_cmd_design)

    p = sub.add_parser("run", help="execute a study plan JSON")
    p.add_argument("study")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--pilot", help="'frac:0.1' or comma list of run indices")
    p.add_argument("--keep-going", action="store_true")
    p.add_argument("--out", help="override the plan's output CSV path")
    p.set_defaults(fn=_cmd_run)

    def table_options(q, with_generators=False):
        q.add_argument("table", help="response CSV (long format)")
        q.add_argument("--exclude", action="append",
                       metavar="FACTOR=LEVEL[,LEVEL...]")
        q.add_argument("--keep", action="append",
                       metavar="FACTOR=LEVEL[,LEVEL...]")
        q.add_argument("--order", help="comma list: display factor order")
        if with_generators:
            q.add_argument("--generators", default=None,
                           help="fraction generators for alias grouping")

    p = sub.add_parser("anova", help="balanced ANOVA of a response table")
    table_options(p)
    p.add_argument("--max-order", type=int, default=4)
    p.add_argument("--csv", help="machine-readable output path")
    p.set_defaults(fn=_cmd_anova)

    p = sub.add_parser("effects", help="2-level effect estimates")
    table_options(p, with_generators=True)
    p.add_argument("--max-order", type=int, default=2)
    p.add_argument("--csv")
    p.set_defaults(fn=_cmd_effects)

    p = sub.add_parser("halfnormal", help="half-normal effect screening")
    table_options(p, with_generators=True)
    p.add_argument("--max-order", type=int, default=4)
    p.add_argument("--svg")
    p.add_argument("--csv")
    p.add_argument("--label-top", type=int, default=6)
    p.set_defaults(fn=_cmd_halfnormal)

    p = sub.add_parser("trpd", help="robustness summary around a target")
    table_options(p)
    p.add_argument("--control", required=True, help="comma list of factors")
    p.add_argument("--target", type=float, required=True)
    p.add_argument("--penalty", type=float, default=1.0,
                   help="multiplier on squared deviations above target")
    p.add_argument("--hist-svg")
    p.set_defaults(fn=_cmd_trpd)

    p = sub.add_parser("heredity", help="effect-heredity activity prior")
    hsub = p.add_subparsers(dest="heredity_cmd", required=True)
    for kind in ("solve", "sample"):
        hp = hsub.add_parser(kind)
        hp.add_argument("--ene", type=float, required=True)
        hp.add_argument("--q", type=int, required=True)
        if kind == "sample":
            hp.add_argument("--seed", type=int, default=0)
            hp.add_argument("--csv")
        hp.set_defaults(fn=_cmd_heredity)

    p = sub.add_parser("casestudy", help="packaged case-study bundles")
    csub = p.add_subparsers(dest="case", required=True)
    k = csub.add_parser("kmm")
    k.add_argument("--stage", choices=("full", "no_an", "cheapo"),
                   default="full")
    k.add_argument("--outdir", required=True)
    k.set_defaults(fn=_cmd_casestudy)
    s = csub.add_parser("sl")
    s.add_argument("--seed", type=int, default=20260809)
    s.add_argument("--scale", choices=("desk", "paper"), default="desk")
    s.add_argument("--outdir", required=True)
    s.add_argument("--workers", type=int, default=None)
    s.set_defaults(fn=_cmd_casestudy)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except SimulationFailure as exc:
        sys.stderr.write(f"simulation failure: {exc}\n")
        return EXIT_SIMULATION
    except ValidationError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_VALIDATION
    except (OSError, json.JSONDecodeError) as exc:
        sys.stderr.write(f"i/o error: {exc}\n")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
