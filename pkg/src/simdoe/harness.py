"""Study execution: replicated runs, pilot subsets, parallel scheduling.

Every (run, replicate) gets the seed derive_seed(master_seed, run_index,
replicate), so responses are identical no matter how work is split across
workers.  Results are always gathered back into canonical (run, replicate)
order.  Simulation functions must be pure given their seed; the
scheduling-invariance test enforces this.

Also hosts the embedded KMM type-I-error table (432 runs; factors n, p0,
method, sigma, tail; response in percent).  Each printed cell came from
1,000 Monte Carlo replications in the original study, implying a binomial
noise floor of roughly 0.7 percentage points at the 5% level; the embedded
values are nonetheless treated as fixed ground truth here.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Iterable, Mapping, Sequence

from . import slstudy  # noqa: F401  (registers the sl_logit_r2 simulation)
from .core import (Design, Factor, Kind, ResponseTable, Role, filter_table,
                   format_value, make_factor, parse_response_csv,
                   table_from_rows)
from .design import full_factorial, fractional_factorial
from .errors import EmptySubset, SimulationFailure, ValidationError
from .registry import get_simulation, register_simulation
from .seeds import derive_seed

WORKERS_ENV = "SIMDOE_WORKERS"


@dataclass(frozen=True)
class StudyPlan:
    design: Design
    simulation: str
    replicates: int = 1
    master_seed: int = 0
    params: dict = field(default_factory=dict)
    name: str = "study"
    output: str | None = None

    def __post_init__(self):
        if self.replicates < 1:
            raise ValidationError("replicates must be >= 1")
        get_simulation(self.simulation)


def plan_from_json(spec: Mapping) -> StudyPlan:
    """Build a plan from the study-spec JSON structure.

    Required keys: simulation, factors, design; optional: replicates,
    master_seed, params, name, output.  factors is a list of {name, levels,
    role?}; design is {"kind": "full"} or {"kind": "fraction", "generators":
    [...]} with generator letters mapping to declared factor order.
    """
    try:
        factors = []
        for f in spec["factors"]:
            role = Role(f.get("role", "unassigned"))
            factors.append(make_factor(f["name"], f["levels"], role))
        dspec = spec["design"]
        kind = dspec["kind"]
        if kind == "full":
            design = full_factorial(factors)
        elif kind == "fraction":
            design = fractional_factorial(factors, dspec["generators"])
        else:
            raise ValidationError(f"unknown design kind {kind!r}")
        return StudyPlan(
            design=design,
            simulation=spec["simulation"],
            replicates=int(spec.get("replicates", 1)),
            master_seed=int(spec.get("master_seed", 0)),
            params=dict(spec.get("params", {})),
            name=str(spec.get("name", "study")),
            output=spec.get("output"))
    except KeyError as exc:
        raise ValidationError(f"study spec missing key {exc}") from exc


def load_plan(path) -> StudyPlan:
    with open(path, encoding="utf-8") as fh:
        return plan_from_json(json.load(fh))


def run_levels(design: Design, run_index: int) -> dict[str, object]:
    """Factor name -> level value for a run (numeric value when available)."""
    out = {}
    for f, ix in zip(design.factors, design.runs[run_index]):
        lv = f.levels[ix]
        out[f.name] = lv.numeric_value if f.kind == Kind.NUMERIC else lv.label
    return out


def run_seed(plan: StudyPlan, run_index: int, replicate: int) -> int:
    return derive_seed(plan.master_seed, run_index, replicate)


def _evaluate_pair(plan: StudyPlan, run_index: int, replicate: int) -> float:
    fn = get_simulation(plan.simulation)
    seed = run_seed(plan, run_index, replicate)
    levels = run_levels(plan.design, run_index)
    try:
        return float(fn(levels, plan.params, seed))
    except Exception as exc:
        raise SimulationFailure(
            f"simulation {plan.simulation!r} failed on run {run_index} "
            f"{levels}, replicate {replicate}, seed {seed}: {exc!r}",
            run_index, replicate, seed, levels) from exc


_WORKER_PLAN: StudyPlan | None = None


def _worker_init(plan: StudyPlan) -> None:
    global _WORKER_PLAN
    _WORKER_PLAN = plan


def _worker_eval(task: tuple[int, int]):
    run_index, replicate = task
    try:
        return run_index, replicate, _evaluate_pair(_WORKER_PLAN, run_index,
                                                    replicate), None
    except SimulationFailure as exc:
        return run_index, replicate, None, exc


def resolve_workers(workers: int | None) -> int:
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1"))
    if workers < 1:
        raise ValidationError("worker count must be >= 1")
    return workers


def _execute(plan: StudyPlan, pairs: Sequence[tuple[int, int]],
             workers: int | None, keep_going: bool
             ) -> tuple[ResponseTable, list[SimulationFailure]]:
    workers = resolve_workers(workers)
    results: dict[tuple[int, int], float] = {}
    failures: list[SimulationFailure] = []
    if workers == 1:
        for run_index, replicate in pairs:
            try:
                results[(run_index, replicate)] = _evaluate_pair(
                    plan, run_index, replicate)
            except SimulationFailure as exc:
                if not keep_going:
                    raise
                failures.append(exc)
    else:
        with ProcessPoolExecutor(max_workers=workers,
                                 initializer=_worker_init,
                                 initargs=(plan,)) as pool:
            for run_index, replicate, value, err in pool.map(
                    _worker_eval, pairs, chunksize=1):
                if err is not None:
                    if not keep_going:
                        raise err
                    failures.append(err)
                else:
                    results[(run_index, replicate)] = value
    rows = [(plan.design.runs[ri], rep, results[(ri, rep)])
            for ri, rep in sorted(results)]
    table = table_from_rows(plan.design, rows)
    return table, failures


def run_study(plan: StudyPlan, workers: int | None = None,
              keep_going: bool = False
              ) -> tuple[ResponseTable, list[SimulationFailure]]:
    """Execute every (run, replicate) of the plan.

    Returns (table, failures).  Without keep_going the first failure
    raises; with it, failed cells are dropped from the table and returned
    for replay (each failure carries run index, levels and seed).
    """
    pairs = [(ri, rep) for ri in range(plan.design.n_runs)
             for rep in range(1, plan.replicates + 1)]
    return _execute(plan, pairs, workers, keep_going)


def parse_pilot_spec(text: str, n_runs: int) -> list[int]:
    """Pilot subset notation: 'frac:0.1' or a comma list of run indices."""
    text = text.strip()
    if text.startswith("frac:"):
        frac = float(text[len("frac:"):])
        return pilot_indices(n_runs, fraction=frac)
    return [int(tok) for tok in text.split(",") if tok.strip()]


def pilot_indices(n_runs: int, fraction: float) -> list[int]:
    """Evenly spaced run subset of the requested fraction (at least 1 run)."""
    if not 0 < fraction <= 1:
        raise ValidationError("pilot fraction must lie in (0, 1]")
    k = max(1, round(fraction * n_runs))
    return sorted({(i * n_runs) // k for i in range(k)})


def pilot(plan: StudyPlan, fraction: float | None = None,
          runs: Iterable[int] | None = None, workers: int | None = None,
          keep_going: bool = False
          ) -> tuple[ResponseTable, list[SimulationFailure]]:
    """Run a subset of the plan with the full study's seeding.

    Because seeds depend only on (master_seed, run index, replicate), pilot
    rows equal the corresponding rows of the full study.
    """
    if runs is not None:
        subset = sorted(set(int(r) for r in runs))
    elif fraction is not None:
        subset = pilot_indices(plan.design.n_runs, fraction)
    else:
        raise EmptySubset("pilot needs a fraction or an explicit run list")
    if not subset:
        raise EmptySubset("pilot subset selects no runs")
    for r in subset:
        if not 0 <= r < plan.design.n_runs:
            raise ValidationError(f"pilot run index {r} out of range")
    pairs = [(ri, rep) for ri in subset
             for rep in range(1, plan.replicates + 1)]
    return _execute(plan, pairs, workers, keep_going)


# ---------------------------------------------------------------------------
# Embedded KMM type-I-error study


_KMM_ROLES = {"n": Role.NOISE, "p0": Role.NOISE, "sigma": Role.NOISE,
              "method": Role.CONTROL, "tail": Role.CONTROL}


@lru_cache(maxsize=1)
def kmm_table() -> ResponseTable:
    """The embedded 432-run type-I-error table (response in percent)."""
    text = resources.files("simdoe.data").joinpath("kmm_table1.csv").read_text(
        encoding="utf-8")
    raw = parse_response_csv(text)
    factors = tuple(Factor(f.name, f.levels, _KMM_ROLES[f.name], f.kind)
                    for f in raw.design.factors)
    design = full_factorial(factors)
    rows = [(raw.row_levels(i), raw.replicate[i], raw.response[i])
            for i in range(raw.n_rows)]
    table = table_from_rows(design, rows)
    _check_kmm(table)
    return table


def _check_kmm(table: ResponseTable) -> None:
    if table.n_rows != 432 or table.design.n_runs != 432:
        raise ValidationError("embedded KMM table must have 432 runs")
    levels = {f.name: set(f.labels) for f in table.design.factors}
    expected = {"n": {"20", "30", "50"}, "p0": {"0.2", "0.3", "0.5", "0.7"},
                "method": {"GV", "AN", "SL", "MS"}, "sigma": {"1", "2", "3"},
                "tail": {"L", "R", "T"}}
    if levels != expected:
        raise ValidationError(f"embedded KMM levels corrupt: {levels}")
    method_ax = table.design.factor_index("method")
    an_ix = table.design.factors[method_ax].level_index("AN")
    an = [table.response[i] for i in range(table.n_rows)
          if table.row_levels(i)[method_ax] == an_ix]
    if len(an) != 108 or round(sum(an) / len(an), 1) != 7.6:
        raise ValidationError("embedded KMM AN-subset checksum failed")


def kmm_stage(stage: str) -> ResponseTable:
    """'full' (432 runs), 'no_an' (324), or 'cheapo' (72: extremes, no AN)."""
    table = kmm_table()
    if stage == "full":
        return table
    if stage == "no_an":
        return filter_table(table, exclude={"method": ["AN"]})
    if stage == "cheapo":
        return filter_table(table, exclude={"method": ["AN"]},
                            keep={"n": ["20", "50"], "p0": ["0.2", "0.7"],
                                  "sigma": ["1", "3"]})
    raise ValidationError(f"unknown KMM stage {stage!r}; "
                          "expected full, no_an or cheapo")


@lru_cache(maxsize=1)
def _kmm_lookup_map() -> dict[tuple[str, ...], float]:
    table = kmm_table()
    out = {}
    for i in range(table.n_rows):
        labels = table.design.run_labels(table.row_levels(i))
        out[labels] = table.response[i]
    return out


@register_simulation("kmm_lookup")
def kmm_lookup(levels, params, seed: int) -> float:
    """Replay the embedded study as a deterministic lookup 'simulation'."""
    key = tuple(format_value(levels[name]) if isinstance(levels[name], float)
                else str(levels[name])
                for name in ("n", "p0", "method", "sigma", "tail"))
    table = _kmm_lookup_map()
    if key not in table:
        raise ValidationError(f"no KMM cell for levels {key}")
    return table[key]


def kmm_plan(master_seed: int = 0) -> StudyPlan:
    """A plan that replays the embedded table through the harness."""
    return StudyPlan(kmm_table().design, "kmm_lookup",
                     master_seed=master_seed, name="kmm-replay")
