"""Taguchi robust-parameter analysis.

Groups the response by control-factor combinations and summarizes location
and dispersion across the noise-factor combinations lumped into each group.
The ranking criterion is mean squared deviation from target, which combines
bias and spread; mean and SD are reported alongside so an asymmetric
preference (e.g. "at or slightly below nominal") can be applied by eye.
An optional exceedance penalty multiplies the squared deviation of
responses above target (default 1 = symmetric).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .analysis import marginal_means
from .core import ResponseTable, term_of, validate_table
from .errors import EmptyControlSet, ValidationError


@dataclass(frozen=True)
class GroupStats:
    labels: tuple[str, ...]
    mean: float
    sd: float            # sample convention (n-1)
    minimum: float
    maximum: float
    count: int
    msd: float           # mean squared deviation from target


@dataclass(frozen=True)
class RobustnessSummary:
    control_names: tuple[str, ...]
    target: float
    groups: tuple[GroupStats, ...]   # ranked: best (smallest MSD) first

    def group(self, *labels: str) -> GroupStats:
        for g in self.groups:
            if g.labels == labels:
                return g
        raise KeyError(f"no control combination {labels}")


def _control_groups(table: ResponseTable, control: Sequence[str]):
    """Yield (labels, responses in canonical run order) per control combo."""
    if not control:
        raise EmptyControlSet("need at least one control factor")
    validate_table(table)
    design = table.design
    axes = [design.factor_index(name) for name in control]
    if len(set(axes)) != len(axes):
        raise ValidationError(f"repeated control factor in {list(control)}")
    t = table.sorted_rows()
    buckets: dict[tuple[int, ...], list[float]] = {}
    for i in range(t.n_rows):
        levels = t.row_levels(i)
        key = tuple(levels[ax] for ax in axes)
        buckets.setdefault(key, []).append(t.response[i])
    for key in sorted(buckets):
        labels = tuple(design.factors[ax].levels[ix].label
                       for ax, ix in zip(axes, key))
        yield labels, np.asarray(buckets[key], dtype=float)


def robustness_summary(table: ResponseTable, control: Sequence[str],
                       target: float,
                       exceedance_penalty: float = 1.0) -> RobustnessSummary:
    """Per-control-combination statistics, ranked by MSD from target.

    Ties rank the smaller SD first, then lexicographic labels.
    """
    groups = []
    for labels, y in _control_groups(table, control):
        sq = (y - target) ** 2
        if exceedance_penalty != 1.0:
            sq = np.where(y > target, exceedance_penalty * sq, sq)
        sd = float(y.std(ddof=1)) if y.size > 1 else 0.0
        groups.append(GroupStats(
            labels, float(y.mean()), sd, float(y.min()), float(y.max()),
            int(y.size), float(sq.mean())))
    counts = {g.count for g in groups}
    if len(counts) != 1:
        raise ValidationError(f"unequal group sizes {sorted(counts)}; "
                              "crossed data must be balanced")
    groups.sort(key=lambda g: (g.msd, g.sd, g.labels))
    return RobustnessSummary(tuple(control), target, tuple(groups))


@dataclass(frozen=True)
class ControlNoiseInteraction:
    """Means per (combined control level, noise level): Figure-6-style data."""

    control_names: tuple[str, ...]
    noise_name: str
    control_labels: tuple[tuple[str, ...], ...]
    noise_labels: tuple[str, ...]
    means: np.ndarray   # shape (n control combos, n noise levels)


def control_noise_interaction(table: ResponseTable, control: Sequence[str],
                              noise_factor: str) -> ControlNoiseInteraction:
    """Combine the control factors into one and cross against a noise factor."""
    if not control:
        raise EmptyControlSet("need at least one control factor")
    if noise_factor in control:
        raise ValidationError(f"{noise_factor!r} is listed as a control factor")
    design = table.design
    term = term_of(design, tuple(control) + (noise_factor,))
    mm = marginal_means(table, term)
    noise_pos = term.factors.index(design.factor_index(noise_factor))
    control_pos = [k for k in range(len(term.factors)) if k != noise_pos]
    combos = list(itertools.product(*(range(len(mm.level_labels[k]))
                                      for k in control_pos)))
    noise_labels = mm.level_labels[noise_pos]
    means = np.empty((len(combos), len(noise_labels)))
    labels = []
    for row, combo in enumerate(combos):
        labels.append(tuple(mm.level_labels[k][ix]
                            for k, ix in zip(control_pos, combo)))
        for col in range(len(noise_labels)):
            ix = [0] * len(term.factors)
            for k, v in zip(control_pos, combo):
                ix[k] = v
            ix[noise_pos] = col
            means[row, col] = mm.means[tuple(ix)]
    ctrl_names = tuple(design.factors[design.factor_index(c)].name
                       for c in control)
    return ControlNoiseInteraction(ctrl_names, noise_factor,
                                   tuple(labels), noise_labels, means)


def response_distributions(table: ResponseTable, control: Sequence[str]
                           ) -> dict[tuple[str, ...], np.ndarray]:
    """Raw response vectors per control combination, canonical run order."""
    return {labels: y for labels, y in _control_groups(table, control)}


def msd_identity_gap(stats: GroupStats, target: float) -> float:
    """|MSD - ((mean-target)^2 + (n-1)/n * sd^2)|, zero up to roundoff."""
    n = stats.count
    recon = (stats.mean - target) ** 2 + (n - 1) / n * stats.sd ** 2
    return abs(stats.msd - recon)


def format_ranking(summary: RobustnessSummary) -> str:
    """Fixed-width ranking table, best control combination first."""
    name = "/".join(summary.control_names)
    width = max([len("/".join(g.labels)) for g in summary.groups] + [len(name)])
    lines = [f"target: {summary.target}",
             f"{name:<{width}}  {'MSD':>8} {'mean':>7} {'SD':>7} "
             f"{'min':>7} {'max':>7} {'n':>5}"]
    for g in summary.groups:
        lines.append(f"{'/'.join(g.labels):<{width}}  {g.msd:>8.3f} "
                     f"{g.mean:>7.3f} {g.sd:>7.3f} {g.minimum:>7.2f} "
                     f"{g.maximum:>7.2f} {g.count:>5}")
    return "\n".join(lines) + "\n"
