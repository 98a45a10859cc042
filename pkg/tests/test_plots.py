from __future__ import annotations

import numpy as np
import pytest

from simdoe.analysis import effect_estimates, half_normal, marginal_means
from simdoe.core import reorder_factors
from simdoe.design import defining_relation, fractional_factorial
from simdoe.errors import ArityMismatch
from simdoe.harness import kmm_stage
from simdoe.plots import (PlotKind, PlotSpec, emit_plot, half_normal_svg,
                          histogram_grid_svg, interaction2_svg,
                          interaction3_svg, main_effects_svg, nice_ticks)
from simdoe.trpd import control_noise_interaction, response_distributions

from helpers import two_level_factors
from simdoe.core import table_from_rows

KMM_ORDER = ("method", "tail", "n", "p0", "sigma")


@pytest.fixture(scope="module")
def kmm324():
    return reorder_factors(kmm_stage("no_an"), KMM_ORDER)


def test_nice_ticks_deterministic_125():
    assert nice_ticks(0.0, 10.0) == [0.0, 2.0, 4.0, 6.0, 8.0, 10.0]
    assert nice_ticks(3.2, 3.9) == [3.2, 3.4, 3.6, 3.8]
    assert nice_ticks(-1.0, 1.0) == [-1.0, -0.5, 0.0, 0.5, 1.0]


def test_main_effects_svg_structure(kmm324):
    blocks = [marginal_means(kmm324, (name,)) for name in KMM_ORDER]
    spec = PlotSpec(PlotKind.MAIN_EFFECTS, reference_line=5.0)
    svg = main_effects_svg(blocks, spec)
    assert svg.startswith("<?xml")
    assert svg.rstrip().endswith("</svg>")
    for name in KMM_ORDER:
        assert f">{name}<" in svg
    assert "stroke-dasharray" in svg  # the reference line
    assert main_effects_svg(blocks, spec) == svg  # byte-stable


def test_main_effects_rejects_interactions(kmm324):
    with pytest.raises(ArityMismatch):
        main_effects_svg([marginal_means(kmm324, ("method", "tail"))],
                         PlotSpec(PlotKind.MAIN_EFFECTS))


def test_interaction2_svg(kmm324):
    mm = marginal_means(kmm324, ("method", "tail"))
    svg = interaction2_svg(mm, PlotSpec(PlotKind.INTERACTION2,
                                        reference_line=5.0))
    assert svg.count("<polyline") >= 3     # one line per method
    assert ">GV<" in svg and ">T<" in svg
    flipped = interaction2_svg(mm, PlotSpec(PlotKind.INTERACTION2),
                               x_second=False)
    assert ">tail:method<" in flipped
    with pytest.raises(ArityMismatch):
        interaction2_svg(marginal_means(kmm324, ("method",)),
                         PlotSpec(PlotKind.INTERACTION2))


def test_interaction3_svg(kmm324):
    data = control_noise_interaction(kmm324, ("method", "tail"), "p0")
    svg = interaction3_svg(data, PlotSpec(PlotKind.INTERACTION3_COMBINED,
                                          reference_line=5.0))
    assert svg.count("<polyline") == 9
    assert ">GV/L<" in svg


def test_half_normal_svg_labels_top_k():
    factors = two_level_factors("ABCDEFG")
    design = fractional_factorial(factors, ["ABCE", "BCDF"])
    rel = defining_relation(["ABCE", "BCDF"], 7)
    rng = np.random.default_rng(4)
    table = table_from_rows(design,
                            [(run, 1, float(rng.normal())) for run in design.runs])
    effects = effect_estimates(table, max_order=7, relation=rel)
    pts = half_normal(effects)
    spec = PlotSpec(PlotKind.HALF_NORMAL, label_top=6)
    svg = half_normal_svg(pts, design.factor_names, spec)
    assert svg.count("<circle") == 31
    ranked = sorted(effects, key=lambda e: -abs(e.value))[:6]
    for e in ranked:
        assert f">{e.term.name(design.factor_names)}<" in svg


def test_histogram_grid_svg(kmm324):
    groups = response_distributions(kmm324, ("method", "tail"))
    svg = histogram_grid_svg(groups, ("GV", "SL", "MS"), ("L", "R", "T"),
                             PlotSpec(PlotKind.HISTOGRAM_GRID,
                                      reference_line=5.0))
    for m in ("GV", "SL", "MS"):
        for t in ("L", "R", "T"):
            assert f">{m}/{t}<" in svg
    with pytest.raises(ArityMismatch):
        histogram_grid_svg(groups, ("GV",), ("L",),
                           PlotSpec(PlotKind.HISTOGRAM_GRID))


def test_emit_plot_dispatch_and_file_output(tmp_path, kmm324):
    out = tmp_path / "plot.svg"
    blocks = [marginal_means(kmm324, (name,)) for name in KMM_ORDER]
    spec = PlotSpec(PlotKind.MAIN_EFFECTS, reference_line=5.0, out=str(out))
    text = emit_plot(blocks, spec)
    assert out.read_text() == text
