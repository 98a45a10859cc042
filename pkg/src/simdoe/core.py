"""Core domain types: factors, designs, response tables.

Runs store level *indices*, not labels; labels appear only at I/O
boundaries.  Numeric factors keep their numeric value for plot axes but are
treated as categorical everywhere in the analysis.  All types are immutable
after construction and safe to share across parallel workers.
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .errors import OutOfRangeLevel, Unbalanced, ValidationError


class Role(str, Enum):
    CONTROL = "control"
    NOISE = "noise"
    UNASSIGNED = "unassigned"


class Kind(str, Enum):
    CATEGORICAL = "categorical"
    NUMERIC = "numeric"


@dataclass(frozen=True)
class Level:
    """One setting of a factor. numeric_value present iff the factor is numeric."""

    label: str
    numeric_value: float | None = None


@dataclass(frozen=True)
class Factor:
    name: str
    levels: tuple[Level, ...]
    role: Role = Role.UNASSIGNED
    kind: Kind = Kind.CATEGORICAL

    def __post_init__(self):
        if not self.name:
            raise ValidationError("factor name must be nonempty")
        if len(self.levels) < 2:
            raise ValidationError(f"factor {self.name!r} needs >= 2 levels")
        labels = [lv.label for lv in self.levels]
        if len(set(labels)) != len(labels):
            raise ValidationError(f"factor {self.name!r} has duplicate level labels")
        for lv in self.levels:
            has_value = lv.numeric_value is not None
            if has_value != (self.kind == Kind.NUMERIC):
                raise ValidationError(
                    f"factor {self.name!r}: numeric_value must be present "
                    f"iff the factor kind is numeric (level {lv.label!r})")

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(lv.label for lv in self.levels)

    def level_index(self, label: str) -> int:
        for i, lv in enumerate(self.levels):
            if lv.label == label:
                return i
        raise OutOfRangeLevel(f"factor {self.name!r} has no level {label!r}")

    def with_role(self, role: Role) -> "Factor":
        return Factor(self.name, self.levels, role, self.kind)


def format_value(v) -> str:
    if isinstance(v, float):
        if v == int(v) and abs(v) < 1e15:
            return str(int(v))
        return repr(v)
    return str(v)


def make_factor(name: str, values: Sequence, role: Role = Role.UNASSIGNED) -> Factor:
    """Build a Factor from raw level values.

    All-numeric values give a numeric factor whose labels are the trimmed
    decimal forms; anything else gives a categorical factor of string labels.
    """
    numeric = all(isinstance(v, (int, float)) and not isinstance(v, bool)
                  for v in values)
    if numeric:
        levels = tuple(Level(format_value(float(v)), float(v)) for v in values)
        return Factor(name, levels, role, Kind.NUMERIC)
    levels = tuple(Level(str(v)) for v in values)
    return Factor(name, levels, role, Kind.CATEGORICAL)


# ---------------------------------------------------------------------------
# Designs


@dataclass(frozen=True)
class FullFactorial:
    pass


@dataclass(frozen=True)
class FractionalFactorial:
    generators: tuple[str, ...]


@dataclass(frozen=True)
class Crossed:
    control: "Design"
    noise: "Design"


@dataclass(frozen=True)
class Manual:
    pass


Provenance = FullFactorial | FractionalFactorial | Crossed | Manual


@dataclass(frozen=True)
class Design:
    """An ordered list of runs; each run is one level index per factor."""

    factors: tuple[Factor, ...]
    runs: tuple[tuple[int, ...], ...]
    provenance: Provenance = field(default_factory=Manual)

    def __post_init__(self):
        for run in self.runs:
            if len(run) != len(self.factors):
                raise ValidationError(
                    f"run {run} has {len(run)} entries for "
                    f"{len(self.factors)} factors")
            for ix, f in zip(run, self.factors):
                if not 0 <= ix < f.n_levels:
                    raise OutOfRangeLevel(
                        f"run {run}: index {ix} out of range for factor "
                        f"{f.name!r} with {f.n_levels} levels")
        if len(set(self.runs)) != len(self.runs):
            dup = [r for r, c in Counter(self.runs).items() if c > 1]
            raise ValidationError(f"duplicated runs in design: {dup[:5]}")

    @property
    def n_runs(self) -> int:
        return len(self.runs)

    @property
    def factor_names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.factors)

    def factor_index(self, name: str) -> int:
        try:
            return self.factor_names.index(name)
        except ValueError:
            raise ValidationError(f"no factor named {name!r}") from None

    def run_labels(self, run: Sequence[int]) -> tuple[str, ...]:
        return tuple(f.levels[ix].label for f, ix in zip(self.factors, run))


@dataclass(frozen=True)
class Term:
    """A main effect (one factor index) or interaction (several, sorted)."""

    factors: tuple[int, ...]

    def __post_init__(self):
        if not self.factors:
            raise ValidationError("term must involve at least one factor")
        if tuple(sorted(set(self.factors))) != self.factors:
            raise ValidationError(
                f"term factors must be sorted and distinct: {self.factors}")

    @property
    def order(self) -> int:
        return len(self.factors)

    def name(self, factor_names: Sequence[str]) -> str:
        return ":".join(factor_names[i] for i in self.factors)


def term_of(design_or_names, spec: "Term | Sequence[str] | Sequence[int]") -> Term:
    """Coerce factor names, indices, or a Term into a Term for this design."""
    if isinstance(spec, Term):
        return spec
    names = (design_or_names.factor_names
             if isinstance(design_or_names, Design) else tuple(design_or_names))
    idx = []
    for item in spec:
        if isinstance(item, str):
            if item not in names:
                raise ValidationError(f"no factor named {item!r}")
            idx.append(names.index(item))
        else:
            idx.append(int(item))
    return Term(tuple(sorted(set(idx))))


# ---------------------------------------------------------------------------
# Response tables


@dataclass(frozen=True)
class ResponseTable:
    """Design runs joined with one numeric response per (run, replicate) row."""

    design: Design
    run_index: tuple[int, ...]
    replicate: tuple[int, ...]
    response: tuple[float, ...]

    def __post_init__(self):
        n = len(self.run_index)
        if not (len(self.replicate) == len(self.response) == n):
            raise ValidationError("row arrays must have equal length")
        for ri in self.run_index:
            if not 0 <= ri < self.design.n_runs:
                raise ValidationError(f"row references unknown run {ri}")
        for rep in self.replicate:
            if rep < 1:
                raise ValidationError("replicate indices start at 1")
        for y in self.response:
            if y is None or (isinstance(y, float) and math.isnan(y)):
                raise ValidationError("missing response value")

    @property
    def n_rows(self) -> int:
        return len(self.run_index)

    def sorted_rows(self) -> "ResponseTable":
        """Rows reordered into canonical (run index, replicate) order."""
        order = sorted(range(self.n_rows),
                       key=lambda i: (self.run_index[i], self.replicate[i]))
        return ResponseTable(
            self.design,
            tuple(self.run_index[i] for i in order),
            tuple(self.replicate[i] for i in order),
            tuple(self.response[i] for i in order))

    def row_levels(self, i: int) -> tuple[int, ...]:
        return self.design.runs[self.run_index[i]]


def table_from_rows(design: Design,
                    rows: Iterable[tuple[Sequence[int], int, float]]) -> ResponseTable:
    """Build a table from (level indices, replicate, response) triples."""
    lookup = {run: i for i, run in enumerate(design.runs)}
    run_ix, reps, ys = [], [], []
    for levels, rep, y in rows:
        key = tuple(levels)
        if key not in lookup:
            raise OutOfRangeLevel(f"row {key} is not a run of the design")
        run_ix.append(lookup[key])
        reps.append(int(rep))
        ys.append(float(y))
    return ResponseTable(design, tuple(run_ix), tuple(reps), tuple(ys))


def validate_table(table: ResponseTable) -> ResponseTable:
    """Return the table iff it is balanced-complete.

    Balanced-complete means every design run carries exactly the replicate
    set {1..r}, where r = rows / runs.  Raises Unbalanced naming the
    missing and duplicated (run, replicate) cells otherwise.
    """
    n_runs = table.design.n_runs
    if n_runs == 0 or table.n_rows == 0:
        raise Unbalanced("table has no rows")
    r = max(table.replicate)
    seen = Counter(zip(table.run_index, table.replicate))
    expected = {(run, rep) for run in range(n_runs) for rep in range(1, r + 1)}
    dup = sorted(cell for cell, c in seen.items() if c > 1)
    missing = sorted(expected - set(seen))
    extra = sorted(set(seen) - expected)
    if dup or missing or extra:
        def cell_name(cell):
            run, rep = cell
            labels = table.design.run_labels(table.design.runs[run])
            return f"({', '.join(labels)}; replicate {rep})"
        parts = []
        if missing:
            parts.append("missing cells: " +
                         ", ".join(cell_name(c) for c in missing[:10]))
        if dup:
            parts.append("duplicated cells: " +
                         ", ".join(cell_name(c) for c in dup[:10]))
        if extra:
            parts.append("unexpected replicate indices: " +
                         ", ".join(cell_name(c) for c in extra[:10]))
        raise Unbalanced("; ".join(parts), missing=missing + extra, duplicated=dup)
    return table


def replicate_count(table: ResponseTable) -> int:
    validate_table(table)
    return table.n_rows // table.design.n_runs


def filter_table(table: ResponseTable,
                 exclude: Mapping[str, Iterable[str]] | None = None,
                 keep: Mapping[str, Iterable[str]] | None = None) -> ResponseTable:
    """Subset a table by level labels, rebuilding a reduced design.

    ``exclude`` removes the named levels; ``keep`` retains only the named
    levels.  A factor reduced to a single level is dropped from the design
    (the table is conditioned on that level).
    """
    design = table.design
    survivors: list[list[int]] = []
    for f in design.factors:
        kept = list(range(f.n_levels))
        if keep and f.name in keep:
            want = set(keep[f.name])
            unknown = want - set(f.labels)
            if unknown:
                raise OutOfRangeLevel(
                    f"factor {f.name!r} has no level(s) {sorted(unknown)}")
            kept = [i for i in kept if f.levels[i].label in want]
        if exclude and f.name in exclude:
            drop = set(exclude[f.name])
            unknown = drop - set(f.labels)
            if unknown:
                raise OutOfRangeLevel(
                    f"factor {f.name!r} has no level(s) {sorted(unknown)}")
            kept = [i for i in kept if f.levels[i].label not in drop]
        if not kept:
            raise ValidationError(f"all levels of factor {f.name!r} removed")
        survivors.append(kept)
    for name in list(keep or ()) + list(exclude or ()):
        if name not in design.factor_names:
            raise ValidationError(f"no factor named {name!r}")

    kept_factors, kept_axes = [], []
    for axis, (f, kept) in enumerate(zip(design.factors, survivors)):
        if len(kept) == 1:
            continue
        kept_axes.append(axis)
        if len(kept) == f.n_levels:
            kept_factors.append(f)
        else:
            kept_factors.append(Factor(
                f.name, tuple(f.levels[i] for i in kept), f.role, f.kind))
    index_map = [{old: new for new, old in enumerate(kept)} for kept in survivors]

    new_runs: dict[tuple[int, ...], int] = {}
    rows = []
    for i in range(table.n_rows):
        old = table.row_levels(i)
        if any(old[axis] not in index_map[axis] for axis in range(len(old))):
            continue
        new = tuple(index_map[axis][old[axis]] for axis in kept_axes)
        if new not in new_runs:
            new_runs[new] = len(new_runs)
        rows.append((new, table.replicate[i], table.response[i]))
    if not rows:
        raise ValidationError("filter removed every row")
    runs = tuple(sorted(new_runs))
    new_design = Design(tuple(kept_factors), runs, Manual())
    return table_from_rows(new_design, rows)


def reorder_factors(table: ResponseTable, order: Sequence[str]) -> ResponseTable:
    """Permute the design's factor order (display convenience; SS-invariant)."""
    design = table.design
    if sorted(order) != sorted(design.factor_names):
        raise ValidationError(
            f"order {order} is not a permutation of {design.factor_names}")
    perm = [design.factor_index(name) for name in order]
    factors = tuple(design.factors[i] for i in perm)
    permuted = [tuple(run[i] for i in perm) for run in design.runs]
    new_runs = tuple(sorted(set(permuted)))
    new_design = Design(factors, new_runs, design.provenance)
    rows = [(permuted[table.run_index[i]], table.replicate[i], table.response[i])
            for i in range(table.n_rows)]
    return table_from_rows(new_design, rows)


# ---------------------------------------------------------------------------
# Serialization: CSV long format and JSON designs


def write_response_csv(table: ResponseTable, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(response_csv_text(table))


def response_csv_text(table: ResponseTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(table.design.factor_names) + ["replicate", "response"])
    for i in range(table.n_rows):
        labels = table.design.run_labels(table.row_levels(i))
        w.writerow(list(labels) + [table.replicate[i],
                                   format_value(table.response[i])])
    return buf.getvalue()


def read_response_csv(path, design: Design | None = None) -> ResponseTable:
    with open(path, newline="", encoding="utf-8") as fh:
        return parse_response_csv(fh.read(), design)


def parse_response_csv(text: str, design: Design | None = None) -> ResponseTable:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise ValidationError("empty response CSV")
    header = rows[0]
    if header[-2:] != ["replicate", "response"]:
        raise ValidationError(
            "response CSV must end with 'replicate,response' columns")
    names = header[:-2]
    if not names:
        raise ValidationError("response CSV has no factor columns")
    body = [r for r in rows[1:] if r]

    if design is None:
        seen: list[dict[str, None]] = [dict() for _ in names]
        for r in body:
            for j in range(len(names)):
                seen[j].setdefault(r[j])
        factors = []
        for name, levels in zip(names, seen):
            labels = list(levels)
            values = []
            for lab in labels:
                try:
                    values.append(float(lab))
                except ValueError:
                    values.append(None)
                    break
            if len(values) == len(labels) and None not in values:
                factors.append(Factor(
                    name, tuple(Level(lab, v) for lab, v in zip(labels, values)),
                    Role.UNASSIGNED, Kind.NUMERIC))
            else:
                factors.append(Factor(name, tuple(Level(lab) for lab in labels)))
        runs = {}
        for r in body:
            key = tuple(f.level_index(r[j]) for j, f in enumerate(factors))
            runs.setdefault(key, len(runs))
        design = Design(tuple(factors),
                        tuple(sorted(runs, key=runs.get)), Manual())
    else:
        if list(design.factor_names) != names:
            raise ValidationError(
                f"CSV factor columns {names} do not match design "
                f"{list(design.factor_names)}")

    triples = []
    for r in body:
        if len(r) != len(names) + 2:
            raise ValidationError(f"malformed CSV row: {r}")
        levels = tuple(f.level_index(r[j]) for j, f in enumerate(design.factors))
        triples.append((levels, int(r[-2]), float(r[-1])))
    return table_from_rows(design, triples)


def write_design_csv(design: Design, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(design.factor_names)
        for run in design.runs:
            w.writerow(design.run_labels(run))


def _factor_to_json(f: Factor) -> dict:
    return {
        "name": f.name,
        "levels": [{"label": lv.label, "numeric_value": lv.numeric_value}
                   for lv in f.levels],
        "role": f.role.value,
        "kind": f.kind.value,
    }


def _factor_from_json(d: dict) -> Factor:
    return Factor(
        d["name"],
        tuple(Level(lv["label"], lv.get("numeric_value")) for lv in d["levels"]),
        Role(d.get("role", "unassigned")),
        Kind(d.get("kind", "categorical")))


def _provenance_to_json(p: Provenance) -> dict:
    if isinstance(p, FullFactorial):
        return {"type": "full_factorial"}
    if isinstance(p, FractionalFactorial):
        return {"type": "fractional_factorial", "generators": list(p.generators)}
    if isinstance(p, Crossed):
        return {"type": "crossed",
                "control": design_to_json(p.control),
                "noise": design_to_json(p.noise)}
    return {"type": "manual"}


def _provenance_from_json(d: dict) -> Provenance:
    t = d.get("type", "manual")
    if t == "full_factorial":
        return FullFactorial()
    if t == "fractional_factorial":
        return FractionalFactorial(tuple(d["generators"]))
    if t == "crossed":
        return Crossed(design_from_json(d["control"]), design_from_json(d["noise"]))
    return Manual()


def design_to_json(design: Design) -> dict:
    return {
        "factors": [_factor_to_json(f) for f in design.factors],
        "runs": [list(run) for run in design.runs],
        "provenance": _provenance_to_json(design.provenance),
    }


def design_from_json(d: dict) -> Design:
    return Design(
        tuple(_factor_from_json(f) for f in d["factors"]),
        tuple(tuple(run) for run in d["runs"]),
        _provenance_from_json(d.get("provenance", {})))


def write_design_json(design: Design, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(design_to_json(design), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_design_json(path) -> Design:
    with open(path, encoding="utf-8") as fh:
        return design_from_json(json.load(fh))
