from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

from helpers import anova_oracle, full_table, random_balanced_table, two_level_factors
from simdoe.analysis import (EffectEstimate, anova_csv, effect_estimates,
                             fit_anova, format_anova, half_normal,
                             marginal_means)
from simdoe.core import Term, make_factor, reorder_factors, table_from_rows
from simdoe.design import defining_relation, fractional_factorial, full_factorial
from simdoe.errors import NonTwoLevelFactor, Unbalanced, ValidationError
from simdoe.harness import kmm_stage
from simdoe.special import normal_quantile

KMM_ORDER = ("method", "tail", "n", "p0", "sigma")


@pytest.fixture(scope="module")
def kmm_full():
    return reorder_factors(kmm_stage("full"), KMM_ORDER)


@pytest.fixture(scope="module")
def kmm_no_an():
    return reorder_factors(kmm_stage("no_an"), KMM_ORDER)


def test_anova_432_run_anchors(kmm_full):
    a = fit_anova(kmm_full, max_order=4)
    r = a.row("method")
    assert r.df == 3 and abs(r.ss - 555.1) < 0.15
    r = a.row("method", "tail")
    assert r.df == 6 and abs(r.ss - 2258.0) < 0.15
    assert a.residual_df == 72
    assert abs(a.residual_ss - 21.2) < 0.15
    assert a.total_df == 431


def test_anova_324_run_anchors(kmm_no_an):
    a = fit_anova(kmm_no_an, max_order=4)
    r = a.row("method", "tail")
    assert r.df == 4 and abs(r.ss - 215.13) < 0.15
    assert a.residual_df == 48
    assert abs(a.residual_ss - 9.33) < 0.15


def test_anova_72_run_anchors():
    table = reorder_factors(kmm_stage("cheapo"), KMM_ORDER)
    a = fit_anova(table, max_order=4)
    r = a.row("method", "tail")
    assert r.df == 4 and abs(r.ss - 51.55) < 0.15
    assert a.residual_df == 4
    assert abs(a.residual_ss - 0.40) < 0.15


def test_anova_constant_response():
    table = full_table([make_factor("a", ["1", "2"]),
                        make_factor("b", ["1", "2", "3"])], [7.0] * 6)
    a = fit_anova(table, max_order=2)
    assert a.total_ss == 0.0
    assert all(r.ss == 0.0 for r in a.rows)


def test_anova_oracle_equivalence_random():
    rng = np.random.default_rng(42)
    for _ in range(8):
        table = random_balanced_table(rng)
        m = len(table.design.factors)
        max_order = int(rng.integers(1, m + 1))
        a = fit_anova(table, max_order=max_order)
        oracle = anova_oracle(table, max_order)
        for row in a.rows:
            df, ss = oracle[row.term.factors]
            assert row.df == df
            assert abs(row.ss - ss) <= 1e-9 * max(1.0, abs(ss))


def test_anova_ss_and_df_identities():
    rng = np.random.default_rng(3)
    table = random_balanced_table(rng)
    m = len(table.design.factors)
    a = fit_anova(table, max_order=m)
    term_ss = sum(r.ss for r in a.rows)
    assert abs(term_ss + a.residual_ss - a.total_ss) <= 1e-9 * max(1, a.total_ss)
    assert sum(r.df for r in a.rows) + a.residual_df == a.total_df
    for r in a.rows:
        levels = [table.design.factors[i].n_levels for i in r.term.factors]
        assert r.df == math.prod(v - 1 for v in levels)


def test_anova_permutation_invariance(kmm_full):
    a = fit_anova(kmm_full, max_order=2)
    rng = np.random.default_rng(11)
    perm = rng.permutation(kmm_full.n_rows)
    shuffled = table_from_rows(
        kmm_full.design,
        [(kmm_full.row_levels(int(i)), kmm_full.replicate[int(i)],
          kmm_full.response[int(i)]) for i in perm])
    b = fit_anova(shuffled, max_order=2)
    for r1, r2 in zip(a.rows, b.rows):
        assert r1.term == r2.term
        assert abs(r1.ss - r2.ss) < 1e-9 * max(1, r1.ss)


def test_anova_location_scale():
    rng = np.random.default_rng(5)
    table = random_balanced_table(rng, max_factors=3)
    m = len(table.design.factors)
    base = fit_anova(table, max_order=min(2, m))
    shifted = table_from_rows(
        table.design,
        [(table.row_levels(i), table.replicate[i], table.response[i] + 100.0)
         for i in range(table.n_rows)])
    scaled = table_from_rows(
        table.design,
        [(table.row_levels(i), table.replicate[i], table.response[i] * 3.0)
         for i in range(table.n_rows)])
    a_sh = fit_anova(shifted, max_order=min(2, m))
    a_sc = fit_anova(scaled, max_order=min(2, m))
    for r0, rs, rk in zip(base.rows, a_sh.rows, a_sc.rows):
        assert abs(rs.ss - r0.ss) < 1e-8 * max(1, r0.ss)
        assert abs(rk.ss - 9.0 * r0.ss) < 1e-7 * max(1, r0.ss)
        if r0.f is not None:
            assert abs(rs.f - r0.f) < 1e-6 * max(1, abs(r0.f))
            assert abs(rk.f - r0.f) < 1e-6 * max(1, abs(r0.f))
            assert abs(rs.p - r0.p) < 1e-9
            assert abs(rk.p - r0.p) < 1e-9


def test_anova_no_residual_df():
    table = full_table([make_factor("a", ["1", "2"]),
                        make_factor("b", ["1", "2"])], [1.0, 2.0, 3.0, 5.0])
    a = fit_anova(table, max_order=2)
    assert a.residual_df == 0
    assert all(r.f is None and r.p is None for r in a.rows)
    assert "F and p omitted" in format_anova(a)


def test_anova_rejects_unbalanced_and_bad_order(kmm_full):
    trimmed = table_from_rows(
        kmm_full.design,
        [(kmm_full.row_levels(i), kmm_full.replicate[i], kmm_full.response[i])
         for i in range(1, kmm_full.n_rows)])
    with pytest.raises(Unbalanced):
        fit_anova(trimmed, max_order=2)
    with pytest.raises(ValidationError):
        fit_anova(kmm_full, max_order=6)
    with pytest.raises(ValidationError):
        fit_anova(kmm_full, max_order=0)


def test_anova_replicated_table_f_columns():
    rng = np.random.default_rng(8)
    factors = [make_factor("a", ["1", "2"]), make_factor("b", ["1", "2", "3"])]
    table = full_table(factors, rng.normal(size=12), replicates=2)
    a = fit_anova(table, max_order=2)
    assert a.residual_df == 6
    oracle = anova_oracle(table, 2)
    for row in a.rows:
        df, ss = oracle[row.term.factors]
        assert row.df == df and abs(row.ss - ss) < 1e-9


def test_marginal_means_an_average(kmm_full):
    mm = marginal_means(kmm_full, ("method",))
    assert round(mm.cell("AN"), 1) == 7.6
    assert int(mm.counts.max()) == 108


def test_marginal_means_single_run_table():
    factors = [make_factor("a", ["x", "y"])]
    table = table_from_rows(full_factorial(factors),
                            [((0,), 1, 3.5), ((1,), 1, 4.5)])
    mm = marginal_means(table, ("a",))
    assert mm.cell("x") == 3.5 and mm.cell("y") == 4.5


def test_marginal_means_right_tail_monotone_in_censoring(kmm_no_an):
    mm = marginal_means(kmm_no_an, ("tail", "p0"))
    right = [mm.cell("R", p0) for p0 in ("0.2", "0.3", "0.5", "0.7")]
    assert all(a > b for a, b in zip(right, right[1:]))


def test_marginal_means_weighted_average_is_grand_mean(kmm_no_an):
    mm = marginal_means(kmm_no_an, ("method", "tail"))
    grand = float(np.mean(kmm_no_an.response))
    weighted = float((mm.means * mm.counts).sum() / mm.counts.sum())
    assert abs(weighted - grand) < 1e-12 * max(1, abs(grand))


def test_effect_estimate_pure_contrast():
    factors = two_level_factors("ABC")
    design = full_factorial(factors)
    rows = [(run, 1, -1.0 if run[0] == 0 else 1.0) for run in design.runs]
    table = table_from_rows(design, rows)
    effects = {e.term.factors: e.value
               for e in effect_estimates(table, max_order=3)}
    assert abs(effects[(0,)] - 2.0) < 1e-12
    for t, v in effects.items():
        if t != (0,):
            assert abs(v) < 1e-12


def test_effect_estimates_synthetic_two_cube():
    # y = 3*A - 2*(B*C): difference-of-means doubles the coefficient
    factors = two_level_factors("ABC")
    design = full_factorial(factors)

    def coded(ix):
        return -1.0 if ix == 0 else 1.0

    rows = [(run, 1, 3 * coded(run[0]) - 2 * coded(run[1]) * coded(run[2]))
            for run in design.runs]
    table = table_from_rows(design, rows)
    effects = {e.term.factors: e.value
               for e in effect_estimates(table, max_order=3)}
    assert abs(effects[(0,)] - 6.0) < 1e-12
    assert abs(effects[(1, 2)] - (-4.0)) < 1e-12
    others = [v for t, v in effects.items() if t not in ((0,), (1, 2))]
    assert max(abs(v) for v in others) < 1e-12


def test_effect_estimates_aliased_fraction_labels():
    factors = two_level_factors("ABCDEFG")
    design = fractional_factorial(factors, ["ABCE", "BCDF"])
    rel = defining_relation(["ABCE", "BCDF"], 7)
    rng = np.random.default_rng(1)
    table = table_from_rows(
        design, [(run, 1, float(rng.normal())) for run in design.runs])
    effects = effect_estimates(table, max_order=7, relation=rel)
    assert len(effects) == 31
    by_term = {e.term.factors: e for e in effects}
    # AB's estimate is labeled AB (lowest order, lexicographic) and lists CE
    assert (0, 1) in by_term
    assert (2, 4) in {t.factors for t in by_term[(0, 1)].aliases}
    assert (2, 4) not in by_term


def test_effect_estimates_require_two_levels(kmm_full):
    with pytest.raises(NonTwoLevelFactor):
        effect_estimates(kmm_full, max_order=2)


def test_half_normal_two_effects_quantiles():
    effects = [EffectEstimate(Term((0,)), 1.0), EffectEstimate(Term((1,)), -2.0)]
    pts = half_normal(effects)
    assert abs(pts[0][0] - normal_quantile(0.625)) < 1e-14
    assert abs(pts[1][0] - normal_quantile(0.875)) < 1e-14
    assert pts[0][1] == 1.0 and pts[1][1] == 2.0
    assert pts[1][2] == Term((1,))


def test_half_normal_sorted_and_strictly_increasing_quantiles():
    rng = np.random.default_rng(2)
    effects = [EffectEstimate(Term((i,)), float(v))
               for i, v in enumerate(rng.normal(size=15))]
    pts = half_normal(effects)
    absvals = [p[1] for p in pts]
    qs = [p[0] for p in pts]
    assert absvals == sorted(absvals)
    assert all(a < b for a, b in zip(qs, qs[1:]))


def test_half_normal_slope_sanity():
    # standard-normal effects fall near the unit line through the origin
    rng = np.random.default_rng(99)
    slopes = []
    for _ in range(300):
        effects = [EffectEstimate(Term((i,)), float(v))
                   for i, v in enumerate(rng.normal(size=15))]
        pts = half_normal(effects)
        lower = pts[: len(pts) // 2]
        q = np.array([p[0] for p in lower])
        v = np.array([p[1] for p in lower])
        slopes.append(float(q @ v / (q @ q)))
    assert abs(np.mean(slopes) - 1.0) < 0.1


def test_anova_csv_layout(kmm_full):
    a = fit_anova(kmm_full, max_order=1)
    text = anova_csv(a)
    lines = text.strip().splitlines()
    assert lines[0] == "term,df,sum_sq,mean_sq,f_value,p_value"
    assert lines[1].startswith("method,3,")
    assert lines[-1].startswith("Residuals,")


def test_format_anova_mirrors_paper_layout(kmm_full):
    text = format_anova(fit_anova(kmm_full, max_order=4))
    assert "Df" in text and "Sum Sq" in text and "Pr(>F)" in text
    line = next(l for l in text.splitlines() if l.startswith("method:tail "))
    assert "2258.0" in line
    assert "***" in line
    assert "< 1e-16" in line
    assert "Signif. codes" in text
