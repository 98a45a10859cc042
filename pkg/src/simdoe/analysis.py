"""Balanced fixed-effects ANOVA, effect estimation and screening plots data.

Sums of squares use the hierarchical marginal-mean decomposition: the
estimate of a term in each of its marginal cells is that cell's marginal
mean minus all fitted lower-order contributions, and the term SS is the
replication-weighted sum of those squared estimates.  This is exact for the
balanced-complete layouts this package accepts (where the usual Type I /
Type III distinction vanishes); unbalanced data is rejected, not
approximated.

Effect estimates on 2-level designs follow the classical full
difference-of-means convention (mean at +1 minus mean at -1), not the
regression half-effect.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import Design, ResponseTable, Term, term_of, validate_table
from .design import DefiningRelation, alias_classes, coded_value
from .errors import NonTwoLevelFactor, ValidationError
from .special import f_upper_tail, normal_quantile

__all__ = [
    "AnovaRow", "AnovaTable", "EffectEstimate", "MarginalMeans",
    "fit_anova", "marginal_means", "effect_estimates", "half_normal",
    "format_anova", "anova_csv", "f_upper_tail",
]


@dataclass(frozen=True)
class AnovaRow:
    term: Term
    df: int
    ss: float
    ms: float
    f: float | None
    p: float | None


@dataclass(frozen=True)
class AnovaTable:
    rows: tuple[AnovaRow, ...]
    residual_df: int
    residual_ss: float
    total_df: int
    total_ss: float
    factor_names: tuple[str, ...]

    @property
    def residual_ms(self) -> float | None:
        if self.residual_df == 0:
            return None
        return self.residual_ss / self.residual_df

    def row(self, *names: str) -> AnovaRow:
        """Look up a row by its factor names (order-insensitive)."""
        want = term_of(self.factor_names, names)
        for r in self.rows:
            if r.term == want:
                return r
        raise KeyError(f"no ANOVA row for term {':'.join(names)}")


@dataclass(frozen=True)
class EffectEstimate:
    """Difference of means across a coded contrast, in response units."""

    term: Term
    value: float
    aliases: tuple[Term, ...] = ()


@dataclass(frozen=True)
class MarginalMeans:
    term: Term
    factor_names: tuple[str, ...]
    level_labels: tuple[tuple[str, ...], ...]   # labels per term factor
    means: np.ndarray                           # shape = levels of term factors
    counts: np.ndarray

    def cell(self, *labels: str) -> float:
        ix = tuple(self.level_labels[k].index(lab)
                   for k, lab in enumerate(labels))
        return float(self.means[ix])


def _response_cube(table: ResponseTable) -> tuple[np.ndarray, int]:
    """Responses reshaped to (levels_1, ..., levels_m, replicates)."""
    validate_table(table)
    design = table.design
    shape = tuple(f.n_levels for f in design.factors)
    r = table.n_rows // design.n_runs
    cube = np.empty(shape + (r,), dtype=float)
    for i in range(table.n_rows):
        levels = table.row_levels(i)
        cube[levels + (table.replicate[i] - 1,)] = table.response[i]
    return cube, r


def fit_anova(table: ResponseTable, max_order: int) -> AnovaTable:
    """Balanced ANOVA with one row per term of order <= max_order.

    The residual collects everything above max_order plus replication
    error.  When the residual has zero degrees of freedom the SS
    decomposition is still reported, with F and p omitted.
    """
    design = table.design
    m = len(design.factors)
    if max_order < 1:
        raise ValidationError("max_order must be >= 1")
    if max_order > m:
        raise ValidationError(
            f"max_order {max_order} exceeds the {m} factors")
    cube, r = _response_cube(table)
    levels = tuple(f.n_levels for f in design.factors)
    n = cube.size
    cell_means = cube.mean(axis=-1)
    grand = float(cell_means.mean())
    total_ss = float(((cube - grand) ** 2).sum())

    effects: dict[tuple[int, ...], np.ndarray] = {
        (): np.full((1,) * m, grand)}
    rows = []
    for size in range(1, max_order + 1):
        for combo in itertools.combinations(range(m), size):
            other_axes = tuple(ax for ax in range(m) if ax not in combo)
            marg = cell_means.mean(axis=other_axes, keepdims=True)
            fitted_below = effects[()].copy()
            for sub_size in range(1, size):
                for sub in itertools.combinations(combo, sub_size):
                    fitted_below = fitted_below + effects[sub]
            u = marg - fitted_below
            effects[combo] = u
            weight = r * math.prod(levels[ax] for ax in other_axes)
            ss = float((u ** 2).sum()) * weight
            df = math.prod(levels[ax] - 1 for ax in combo)
            rows.append((Term(combo), df, ss))

    term_df = sum(df for _, df, _ in rows)
    term_ss = sum(ss for _, _, ss in rows)
    residual_df = (n - 1) - term_df
    residual_ss = max(total_ss - term_ss, 0.0)
    residual_ms = residual_ss / residual_df if residual_df > 0 else None

    out = []
    for term, df, ss in rows:
        ms = ss / df
        if residual_ms is not None and residual_ms > 0:
            f = ms / residual_ms
            p = f_upper_tail(f, df, residual_df)
        else:
            f = p = None
        out.append(AnovaRow(term, df, ss, ms, f, p))
    return AnovaTable(tuple(out), residual_df, residual_ss,
                      n - 1, total_ss, design.factor_names)


def marginal_means(table: ResponseTable, term) -> MarginalMeans:
    """Mean response per level combination of the term, averaged over the rest."""
    design = table.design
    t = term_of(design, term)
    cube, r = _response_cube(table)
    m = len(design.factors)
    other = tuple(ax for ax in range(m) if ax not in t.factors) + (m,)
    means = cube.mean(axis=other)
    count = r * math.prod(design.factors[ax].n_levels
                          for ax in range(m) if ax not in t.factors)
    counts = np.full(means.shape, count, dtype=int)
    return MarginalMeans(
        t,
        tuple(design.factors[i].name for i in t.factors),
        tuple(design.factors[i].labels for i in t.factors),
        means, counts)


def _coded_columns(table: ResponseTable) -> np.ndarray:
    design = table.design
    bad = [f.name for f in design.factors if f.n_levels != 2]
    if bad:
        raise NonTwoLevelFactor(
            f"effect estimates need 2-level factors; offending: {bad}")
    cols = np.empty((table.n_rows, len(design.factors)), dtype=float)
    for i in range(table.n_rows):
        cols[i] = [coded_value(ix) for ix in table.row_levels(i)]
    return cols


def effect_estimates(table: ResponseTable, max_order: int,
                     relation: DefiningRelation | None = None
                     ) -> list[EffectEstimate]:
    """Difference-of-means effects for every alias class up to max_order.

    Aliased terms share one estimate labeled by the lowest-order member
    (ties broken lexicographically); pass the fraction's defining relation
    to group them.  Without a relation every term is its own class.
    """
    design = table.design
    coded = _coded_columns(table)
    y = np.asarray(table.response, dtype=float)
    m = len(design.factors)

    if relation is not None:
        if relation.n_factors != m:
            raise ValidationError("relation factor count does not match design")
        classes = alias_classes(relation, max_order)
    else:
        classes = [(Term(c), (Term(c),))
                   for size in range(1, max_order + 1)
                   for c in itertools.combinations(range(m), size)]

    out = []
    for rep, members in classes:
        contrast = coded[:, rep.factors].prod(axis=1)
        plus = contrast > 0
        n_plus = int(plus.sum())
        if n_plus == 0 or n_plus == len(contrast):
            raise ValidationError(
                f"contrast for {rep.factors} does not vary over the design")
        if 2 * n_plus != len(contrast):
            raise ValidationError(
                f"unbalanced contrast for term {rep.factors}; "
                "effects need a balanced (fractional) factorial")
        value = float(y[plus].mean() - y[~plus].mean())
        out.append(EffectEstimate(rep, value,
                                  tuple(t for t in members if t != rep)))
    return out


def half_normal(effects: Sequence[EffectEstimate]
                ) -> list[tuple[float, float, Term]]:
    """(quantile, |effect|, term) triples sorted ascending by |effect|.

    The i-th quantile (1-based) is the standard normal inverse CDF at
    0.5 + 0.5*(i - 0.5)/m, the usual half-normal plotting positions.
    """
    if len(effects) < 2:
        raise ValidationError("half-normal plot needs at least 2 effects")
    m = len(effects)
    ordered = sorted(effects, key=lambda e: (abs(e.value), e.term.factors))
    return [(normal_quantile(0.5 + 0.5 * (i - 0.5) / m),
             abs(e.value), e.term)
            for i, e in enumerate(ordered, start=1)]


# ---------------------------------------------------------------------------
# Presentation


def _signif_stars(p: float) -> str:
    if p <= 0.001:
        return "***"
    if p <= 0.01:
        return "** "
    if p <= 0.05:
        return "*  "
    if p <= 0.1:
        return ".  "
    return "   "


def _fmt_p(p: float) -> str:
    # display floor only; the stored value stays as computed
    if p < 1e-16:
        return " < 1e-16"
    if p < 1e-4:
        return f"{p:.2e}"
    return f"{p:.6f}"


def format_anova(anova: AnovaTable, group_by_order: bool = True) -> str:
    """Fixed-width ANOVA text in the style of R's aov summary."""
    name_width = max([len(r.term.name(anova.factor_names)) for r in anova.rows]
                     + [len("Residuals")]) + 1
    lines = [f"{'':<{name_width}}{'Df':>4} {'Sum Sq':>8} {'Mean Sq':>8} "
             f"{'F value':>9} {'Pr(>F)':>9}"]
    last_order = None
    for r in anova.rows:
        if group_by_order and last_order is not None and r.term.order != last_order:
            lines.append("")
        last_order = r.term.order
        name = r.term.name(anova.factor_names)
        base = (f"{name:<{name_width}}{r.df:>4} {r.ss:>8.2f} {r.ms:>8.2f}")
        if r.f is not None:
            base += f" {r.f:>9.3f} {_fmt_p(r.p):>9} {_signif_stars(r.p)}"
        lines.append(base)
    lines.append("")
    res = f"{'Residuals':<{name_width}}{anova.residual_df:>4} {anova.residual_ss:>8.2f}"
    if anova.residual_ms is not None:
        res += f" {anova.residual_ms:>8.2f}"
    lines.append(res)
    lines.append("---")
    lines.append("Signif. codes:  0 '***' 0.001 '**' 0.01 '*' 0.05 '.' 0.1 ' ' 1")
    if anova.residual_ms is None:
        lines.append("(residual df = 0: F and p omitted)")
    return "\n".join(lines) + "\n"


def anova_csv(anova: AnovaTable) -> str:
    """Machine-readable ANOVA rows at full precision."""
    lines = ["term,df,sum_sq,mean_sq,f_value,p_value"]
    for r in anova.rows:
        f = repr(r.f) if r.f is not None else ""
        p = repr(r.p) if r.p is not None else ""
        lines.append(f"{r.term.name(anova.factor_names)},{r.df},"
                     f"{r.ss!r},{r.ms!r},{f},{p}")
    ms = repr(anova.residual_ms) if anova.residual_ms is not None else ""
    lines.append(f"Residuals,{anova.residual_df},{anova.residual_ss!r},{ms},,")
    return "\n".join(lines) + "\n"
