"""Shared builders for the test suite."""

from __future__ import annotations

import itertools

import numpy as np

from simdoe.core import ResponseTable, make_factor, table_from_rows
from simdoe.design import full_factorial


def two_level_factors(names):
    return [make_factor(name, ["lo", "hi"]) for name in names]


def full_table(factors, responses, replicates=1) -> ResponseTable:
    """Balanced-complete table over the full factorial, canonical order."""
    design = full_factorial(factors)
    responses = list(responses)
    assert len(responses) == design.n_runs * replicates
    rows = []
    k = 0
    for run in design.runs:
        for rep in range(1, replicates + 1):
            rows.append((run, rep, responses[k]))
            k += 1
    return table_from_rows(design, rows)


def random_balanced_table(rng, max_factors=4, max_levels=3, max_reps=3):
    n_factors = rng.integers(1, max_factors + 1)
    factors = [make_factor(f"f{i}", [f"l{j}" for j in
                                     range(rng.integers(2, max_levels + 1))])
               for i in range(n_factors)]
    reps = int(rng.integers(1, max_reps + 1))
    design = full_factorial(factors)
    responses = rng.normal(size=design.n_runs * reps)
    return full_table(factors, responses, replicates=reps)


def coded_column(design, term_factors) -> np.ndarray:
    """Product of +-1 coded columns over the design's runs."""
    out = np.ones(design.n_runs)
    for i, run in enumerate(design.runs):
        v = 1.0
        for f in term_factors:
            v *= -1.0 if run[f] == 0 else 1.0
        out[i] = v
    return out


def anova_oracle(table, max_order):
    """Independent balanced-ANOVA oracle via orthogonal contrast regression.

    Builds Helmert-style contrast columns per factor, takes tensor products
    per term, and projects the response onto each column; in a balanced
    layout those columns are mutually orthogonal, so the term SS is the sum
    of squared normalized projections.  Shares no code with fit_anova.
    """
    design = table.design
    y = np.asarray(table.response, dtype=float)
    rows = [table.row_levels(i) for i in range(table.n_rows)]

    def helmert(n_levels):
        cols = []
        for k in range(1, n_levels):
            v = np.zeros(n_levels)
            v[:k] = 1.0
            v[k] = -float(k)
            cols.append(v)
        return cols

    contrasts = [helmert(f.n_levels) for f in design.factors]
    out = {}
    m = len(design.factors)
    for size in range(1, max_order + 1):
        for combo in itertools.combinations(range(m), size):
            ss = 0.0
            for pick in itertools.product(*(range(len(contrasts[f]))
                                            for f in combo)):
                col = np.ones(len(rows))
                for f, c in zip(combo, pick):
                    vec = contrasts[f][c]
                    col *= np.array([vec[row[f]] for row in rows])
                ss += (col @ y) ** 2 / (col @ col)
            df = 1
            for f in combo:
                df *= design.factors[f].n_levels - 1
            out[combo] = (df, ss)
    return out
