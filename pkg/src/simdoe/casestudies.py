"""Reproducible case-study report bundles.

kmm_bundle re-analyzes the embedded type-I-error study at three stages:
the full 432-run table, the 324-run table with the AN method removed, and
the 72-run "cheapo" subset keeping only extreme numeric levels.  Each stage
writes a 4th-order ANOVA, a robustness ranking around the 5% target
(control factors: method and tail), and the effect/interaction/histogram
plot set.

sl_bundle designs and executes the statistical-learning study: a 32-run
quarter fraction of the seven 2-level factors (generators ABCE and BCDF
over the noise letters, crossed with the learner factor), lasso versus a
ridge baseline, logit test-R^2 response, half-normal effect screening.
Desk scale shrinks training and test sizes so the bundle runs in CI;
paper scale uses the original levels.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .analysis import (anova_csv, effect_estimates, fit_anova, format_anova,
                       half_normal, marginal_means)
from .core import (ResponseTable, Role, make_factor, reorder_factors,
                   write_response_csv)
from .design import defining_relation, design_report, fractional_factorial
from .errors import ValidationError
from .harness import StudyPlan, kmm_stage, run_study
from .plots import (PlotKind, PlotSpec, emit_plot, half_normal_svg,
                    histogram_grid_svg, interaction2_svg, interaction3_svg,
                    main_effects_svg)
from .trpd import (control_noise_interaction, format_ranking,
                   response_distributions, robustness_summary)

KMM_DISPLAY_ORDER = ("method", "tail", "n", "p0", "sigma")
KMM_TARGET = 5.0
SL_GENERATORS = ("ABCE=+1", "BCDF=+1")


def _write(outdir: str, name: str, text: str, bundle: dict) -> None:
    path = os.path.join(outdir, name)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    bundle[name] = path


def casestudy_kmm(stage: str, outdir: str) -> dict[str, str]:
    """Write the report bundle for one KMM stage; returns name -> path."""
    os.makedirs(outdir, exist_ok=True)
    table = reorder_factors(kmm_stage(stage), KMM_DISPLAY_ORDER)
    bundle: dict[str, str] = {}

    anova = fit_anova(table, max_order=4)
    _write(outdir, "anova.txt", format_anova(anova), bundle)
    _write(outdir, "anova.csv", anova_csv(anova), bundle)

    ranking = robustness_summary(table, ("method", "tail"), KMM_TARGET)
    _write(outdir, "trpd_ranking.txt", format_ranking(ranking), bundle)

    ref = PlotSpec(PlotKind.MAIN_EFFECTS, reference_line=KMM_TARGET,
                   title=f"main effects ({stage})")
    blocks = [marginal_means(table, (name,))
              for name in table.design.factor_names]
    _write(outdir, "main_effects.svg",
           main_effects_svg(blocks, ref, ylabel="type I error (%)"), bundle)

    for a, b in (("method", "tail"), ("tail", "p0")):
        mm = marginal_means(table, (a, b))
        spec = PlotSpec(PlotKind.INTERACTION2, reference_line=KMM_TARGET)
        _write(outdir, f"interaction_{a}_{b}.svg",
               interaction2_svg(mm, spec, ylabel="type I error (%)"), bundle)

    for noise in ("p0", "sigma"):
        data = control_noise_interaction(table, ("method", "tail"), noise)
        spec = PlotSpec(PlotKind.INTERACTION3_COMBINED,
                        reference_line=KMM_TARGET)
        _write(outdir, f"interaction3_{noise}.svg",
               interaction3_svg(data, spec, ylabel="type I error (%)"),
               bundle)

    groups = response_distributions(table, ("method", "tail"))
    methods = table.design.factors[table.design.factor_index("method")].labels
    tails = table.design.factors[table.design.factor_index("tail")].labels
    spec = PlotSpec(PlotKind.HISTOGRAM_GRID, reference_line=KMM_TARGET,
                    title="response by method/tail")
    _write(outdir, "histograms.svg",
           histogram_grid_svg(groups, methods, tails, spec), bundle)

    lines = [f"stage: {stage}", f"rows: {table.n_rows}",
             f"residual df: {anova.residual_df}",
             f"residual SS: {anova.residual_ss:.2f}"]
    top = sorted(anova.rows, key=lambda r: -r.ss)[:5]
    lines.append("largest terms by SS: " + ", ".join(
        f"{r.term.name(anova.factor_names)} ({r.ss:.2f})" for r in top))
    if stage == "full":
        an_mean = marginal_means(table, ("method",)).cell("AN")
        lines.append(f"mean type I error for method=AN: {an_mean:.2f}%")
    best = ranking.groups[0]
    lines.append(f"best method/tail by MSD from {KMM_TARGET:g}: "
                 f"{'/'.join(best.labels)} (MSD {best.msd:.3f})")
    _write(outdir, "summary.txt", "\n".join(lines) + "\n", bundle)
    return bundle


# ---------------------------------------------------------------------------
# Statistical-learning study


@dataclass(frozen=True)
class SlScale:
    n_levels: tuple[int, int]
    q_levels: tuple[int, int]
    ene_levels: tuple[float, float]
    test_size: int


# Desk scale trims ENE along with n and q: ENE = 2q is the prior's
# feasibility boundary, so q = 10 cannot carry ENE = 20.  The lower desk
# level stays at 10 so activity stays bounded away from the empty pattern
# (an empty pattern makes the clamped logit response a pure artifact).
SL_SCALES = {
    "paper": SlScale((250, 1000), (20, 50), (10.0, 20.0), 10000),
    "desk": SlScale((100, 250), (10, 20), (10.0, 16.0), 2000),
}


def sl_factors(scale: str):
    """Study factors in generator-letter order A..G (model last, coded +1
    for lasso as in the crossed-array construction)."""
    if scale not in SL_SCALES:
        raise ValidationError(f"unknown scale {scale!r}; "
                              f"expected {sorted(SL_SCALES)}")
    s = SL_SCALES[scale]
    return [
        make_factor("n", list(s.n_levels), Role.NOISE),
        make_factor("q", list(s.q_levels), Role.NOISE),
        make_factor("ENE", list(s.ene_levels), Role.NOISE),
        make_factor("beta.mu", [1.0, 3.0], Role.NOISE),
        make_factor("sigma", [0.5, 2.0], Role.NOISE),
        make_factor("x.cor", [0.0, 0.8], Role.NOISE),
        make_factor("model", ["ridge", "lasso"], Role.CONTROL),
    ]


def sl_plan(seed: int, scale: str = "desk") -> StudyPlan:
    factors = sl_factors(scale)
    design = fractional_factorial(factors, SL_GENERATORS)
    return StudyPlan(design, "sl_logit_r2", replicates=1, master_seed=seed,
                     params={"test_size": SL_SCALES[scale].test_size,
                             "folds": 10},
                     name=f"sl-{scale}")


def sl_effects(table: ResponseTable):
    """All 31 alias-class effect estimates of the quarter fraction."""
    relation = defining_relation(SL_GENERATORS, len(table.design.factors))
    return effect_estimates(table, max_order=len(table.design.factors),
                            relation=relation), relation


def casestudy_sl(seed: int, scale: str = "desk", outdir: str = ".",
                 workers: int | None = None) -> dict[str, str]:
    """Design, run and analyze the learning study; returns name -> path."""
    os.makedirs(outdir, exist_ok=True)
    bundle: dict[str, str] = {}
    plan = sl_plan(seed, scale)
    _write(outdir, "design_report.txt",
           design_report(plan.design, SL_GENERATORS), bundle)

    table, _ = run_study(plan, workers=workers)
    write_response_csv(table, os.path.join(outdir, "responses.csv"))
    bundle["responses.csv"] = os.path.join(outdir, "responses.csv")

    effects, relation = sl_effects(table)
    names = table.design.factor_names
    rows = ["term,effect,aliases"]
    for e in sorted(effects, key=lambda e: -abs(e.value)):
        alias = " ".join(t.name(names) for t in e.aliases)
        rows.append(f"{e.term.name(names)},{e.value!r},{alias}")
    _write(outdir, "effects.csv", "\n".join(rows) + "\n", bundle)

    points = half_normal(effects)
    spec = PlotSpec(PlotKind.HALF_NORMAL, label_top=6,
                    title=f"half-normal plot ({scale} scale)")
    _write(outdir, "halfnormal.svg",
           half_normal_svg(points, names, spec), bundle)

    blocks = [marginal_means(table, (name,)) for name in names]
    _write(outdir, "main_effects.svg",
           main_effects_svg(blocks, PlotSpec(PlotKind.MAIN_EFFECTS),
                            ylabel="logit R2"), bundle)
    for other in ("beta.mu", "sigma"):
        mm = marginal_means(table, (other, "model"))
        _write(outdir, f"interaction_model_{other}.svg",
               interaction2_svg(mm, PlotSpec(PlotKind.INTERACTION2),
                                ylabel="logit R2", x_second=False), bundle)

    by_model = {}
    model_ax = table.design.factor_index("model")
    for i in range(table.n_rows):
        label = table.design.factors[model_ax].levels[
            table.row_levels(i)[model_ax]].label
        by_model.setdefault(label, []).append(table.response[i])
    means = {k: float(np.mean(v)) for k, v in by_model.items()}
    ranked = sorted(effects, key=lambda e: -abs(e.value))
    lines = [f"scale: {scale}", f"master seed: {seed}",
             f"runs: {table.n_rows}",
             "mean logit R2 by model: " +
             ", ".join(f"{k}={means[k]:.3f}" for k in sorted(means)),
             "top effects: " + ", ".join(
                 f"{e.term.name(names)} ({e.value:+.3f})"
                 for e in ranked[:6])]
    _write(outdir, "summary.txt", "\n".join(lines) + "\n", bundle)
    return bundle
