"""Design construction: full factorials, two-level fractions, alias algebra.

Generator words use uppercase letters mapped to factor positions in declared
order (A = first factor).  Coded levels follow the documented convention:
first declared level = -1, second = +1.  Run order is lexicographic in level
indices; randomizing execution order is the harness's job.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

from .core import (Crossed, Design, Factor, FractionalFactorial, FullFactorial,
                   Role, Term)
from .errors import (DependentGenerators, NonTwoLevelFactor, OverlappingFactors,
                     TrivialRelation, ValidationError)

_LETTERS = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"


@dataclass(frozen=True)
class Word:
    """Signed product of coded factor columns; the identity is I = ((), +1)."""

    letters: tuple[int, ...]
    sign: int = 1

    def __post_init__(self):
        if tuple(sorted(set(self.letters))) != self.letters:
            raise ValidationError(f"word letters must be sorted and distinct: "
                                  f"{self.letters}")
        if self.sign not in (-1, 1):
            raise ValidationError("word sign must be +1 or -1")

    @property
    def order(self) -> int:
        return len(self.letters)

    @property
    def is_identity(self) -> bool:
        return not self.letters

    def __mul__(self, other: "Word") -> "Word":
        sym = set(self.letters) ^ set(other.letters)
        return Word(tuple(sorted(sym)), self.sign * other.sign)

    def name(self) -> str:
        body = "".join(_LETTERS[i] for i in self.letters) if self.letters else "I"
        return f"{body}={'+' if self.sign > 0 else '-'}1"


IDENTITY = Word(())


def parse_word(text: str, n_factors: int) -> Word:
    """Parse generator notation like 'ABCE', 'ABCE=+1' or 'BCDF=-1'."""
    text = text.strip()
    sign = 1
    if "=" in text:
        body, _, rhs = text.partition("=")
        rhs = rhs.strip()
        if rhs in ("+1", "1"):
            sign = 1
        elif rhs == "-1":
            sign = -1
        else:
            raise ValidationError(f"generator sign must be +1 or -1, got {rhs!r}")
    else:
        body = text
    body = body.strip().upper()
    if not body:
        raise ValidationError("empty generator word")
    letters = []
    for ch in body:
        if ch not in _LETTERS:
            raise ValidationError(f"invalid letter {ch!r} in generator {text!r}")
        pos = _LETTERS.index(ch)
        if pos >= n_factors:
            raise ValidationError(
                f"letter {ch!r} exceeds the {n_factors} declared factors")
        letters.append(pos)
    if len(set(letters)) != len(letters):
        raise ValidationError(f"repeated letter in generator {text!r}")
    return Word(tuple(sorted(letters)), sign)


def _coerce_words(generators: Iterable[Word | str], n_factors: int) -> list[Word]:
    out = []
    for g in generators:
        out.append(g if isinstance(g, Word) else parse_word(g, n_factors))
    return out


def _independent(words: Sequence[Word]) -> bool:
    """GF(2) rank check over letter incidence vectors."""
    basis: dict[int, int] = {}
    for w in words:
        vec = 0
        for i in w.letters:
            vec |= 1 << i
        while vec:
            high = vec.bit_length() - 1
            if high not in basis:
                basis[high] = vec
                break
            vec ^= basis[high]
        if vec == 0:
            return False
    return True


@dataclass(frozen=True)
class DefiningRelation:
    """Group of words (including I) generated by the design generators."""

    words: frozenset[Word]
    n_factors: int

    def non_identity(self) -> list[Word]:
        return sorted((w for w in self.words if not w.is_identity),
                      key=lambda w: (w.order, w.letters))


@dataclass(frozen=True)
class AliasStructure:
    """Symmetric map Term -> aliased Terms, full word order retained."""

    aliases: dict[Term, tuple[Term, ...]]
    max_order: int

    def display(self, term: Term) -> tuple[Term, ...]:
        return tuple(t for t in self.aliases[term] if t.order <= self.max_order)


def full_factorial(factors: Sequence[Factor]) -> Design:
    """Every level combination, lexicographic in level indices."""
    if not factors:
        raise ValidationError("full factorial needs at least one factor")
    runs = tuple(itertools.product(*(range(f.n_levels) for f in factors)))
    return Design(tuple(factors), runs, FullFactorial())


def _check_two_level(factors: Sequence[Factor]) -> None:
    bad = [f.name for f in factors if f.n_levels != 2]
    if bad:
        raise NonTwoLevelFactor(f"factors must have exactly 2 levels: {bad}")


def coded_value(level_index: int) -> int:
    """First declared level codes to -1, second to +1."""
    return -1 if level_index == 0 else 1


def fractional_factorial(factors: Sequence[Factor],
                         generators: Sequence[Word | str]) -> Design:
    """Retain the full-factorial runs satisfying every generator's sign.

    For q factors and g independent generators, 2^(q-g) runs survive.
    Flipping any generator's sign selects a different, statistically
    equivalent fraction; the default sign is +1.
    """
    _check_two_level(factors)
    words = _coerce_words(generators, len(factors))
    if not words:
        raise ValidationError("a fraction needs at least one generator")
    for w in words:
        if w.is_identity:
            raise DependentGenerators("identity word cannot be a generator")
    if not _independent(words):
        raise DependentGenerators(
            f"generators are not independent: {[w.name() for w in words]}")
    runs = []
    for run in itertools.product(*(range(2) for _ in factors)):
        ok = True
        for w in words:
            prod = 1
            for i in w.letters:
                prod *= coded_value(run[i])
            if prod != w.sign:
                ok = False
                break
        if ok:
            runs.append(run)
    return Design(tuple(factors), tuple(runs),
                  FractionalFactorial(tuple(w.name() for w in words)))


def defining_relation(generators: Sequence[Word | str],
                      n_factors: int) -> DefiningRelation:
    """Close the generators under word multiplication (a group of 2^g words)."""
    words = _coerce_words(generators, n_factors)
    group = {IDENTITY}
    for subset_size in range(1, len(words) + 1):
        for subset in itertools.combinations(words, subset_size):
            prod = IDENTITY
            for w in subset:
                prod = prod * w
            group.add(prod)
    if len({w.letters for w in group}) != 2 ** len(words):
        raise DependentGenerators(
            f"generators are not independent: {[w.name() for w in words]}")
    return DefiningRelation(frozenset(group), n_factors)


def resolution(relation: DefiningRelation) -> int:
    """Length of the shortest non-identity word in the relation."""
    lengths = [w.order for w in relation.words if not w.is_identity]
    if not lengths:
        raise TrivialRelation("full factorial: resolution is undefined")
    return min(lengths)


def _term_times_word(term: Term, word: Word) -> Term | None:
    sym = tuple(sorted(set(term.factors) ^ set(word.letters)))
    return Term(sym) if sym else None


def alias_structure(relation: DefiningRelation, max_order: int) -> AliasStructure:
    """Aliases of every term up to max_order.

    A term's aliases are its products with each non-identity relation word;
    full word order is retained internally and truncated only for display.
    """
    if max_order < 1:
        raise ValidationError("max_order must be >= 1")
    non_identity = relation.non_identity()
    aliases: dict[Term, tuple[Term, ...]] = {}
    for size in range(1, max_order + 1):
        for combo in itertools.combinations(range(relation.n_factors), size):
            term = Term(combo)
            partners = []
            for w in non_identity:
                other = _term_times_word(term, w)
                if other is not None and other != term:
                    partners.append(other)
            aliases[term] = tuple(sorted(set(partners),
                                         key=lambda t: (t.order, t.factors)))
    return AliasStructure(aliases, max_order)


def alias_classes(relation: DefiningRelation,
                  max_order: int) -> list[tuple[Term, tuple[Term, ...]]]:
    """Distinct contrast classes whose lowest-order member has order <= cap.

    Returns (representative, members) pairs; the representative is the
    lowest-order member, ties broken lexicographically.  For the trivial
    relation every term is its own class.  Terms whose letters form a
    relation word are aliased with the intercept (their contrast is
    constant over the fraction) and are excluded.
    """
    intercept_class = {w.letters for w in relation.words}
    seen: set[Term] = set()
    classes = []
    for size in range(1, relation.n_factors + 1):
        for combo in itertools.combinations(range(relation.n_factors), size):
            term = Term(combo)
            if term in seen or combo in intercept_class:
                continue
            members = {term}
            for w in relation.non_identity():
                other = _term_times_word(term, w)
                if other is not None:
                    members.add(other)
            seen |= members
            rep = min(members, key=lambda t: (t.order, t.factors))
            if rep.order <= max_order:
                ordered = tuple(sorted(members, key=lambda t: (t.order, t.factors)))
                classes.append((rep, ordered))
    classes.sort(key=lambda pair: (pair[0].order, pair[0].factors))
    return classes


def crossed_array(control: Design, noise: Design) -> Design:
    """Cross every control run with every noise run (control-major order)."""
    overlap = set(control.factor_names) & set(noise.factor_names)
    if overlap:
        raise OverlappingFactors(f"factors in both designs: {sorted(overlap)}")
    factors = tuple(f.with_role(Role.CONTROL) for f in control.factors) + \
        tuple(f.with_role(Role.NOISE) for f in noise.factors)
    runs = tuple(c + n for c in control.runs for n in noise.runs)
    return Design(factors, runs, Crossed(control, noise))


def generators_of(design: Design) -> tuple[str, ...] | None:
    """Generator strings recorded in the design provenance, if any."""
    prov = design.provenance
    if isinstance(prov, FractionalFactorial):
        return prov.generators
    return None


def design_report(design: Design,
                  generators: Sequence[Word | str] | None = None,
                  alias_order: int = 2,
                  alias_cap: int = 4) -> str:
    """Text report: factors, run count, defining relation, resolution, aliases."""
    lines = [f"runs: {design.n_runs}"]
    lines.append("factors:")
    width = max(len(f.name) for f in design.factors)
    for i, f in enumerate(design.factors):
        letter = _LETTERS[i] if i < len(_LETTERS) else f"#{i}"
        role = f" [{f.role.value}]" if f.role != Role.UNASSIGNED else ""
        lines.append(f"  {letter}  {f.name:<{width}}  "
                     f"levels: {', '.join(f.labels)}{role}")
    if generators is None:
        generators = generators_of(design)
    if generators:
        relation = defining_relation(list(generators), len(design.factors))
        words = [w.name() for w in relation.non_identity()]
        lines.append(f"defining relation: I = {' = '.join(words)}")
        lines.append(f"resolution: {resolution(relation)}")
        structure = alias_structure(relation, max_order=alias_order)
        names = design.factor_names
        lines.append(f"aliases (terms up to order {alias_order}, "
                     f"partners up to order {alias_cap}):")
        for term in sorted(structure.aliases, key=lambda t: (t.order, t.factors)):
            partners = [t.name(names) for t in structure.aliases[term]
                        if t.order <= alias_cap]
            rhs = " = ".join(partners) if partners else \
                f"(no aliases up to order {alias_cap})"
            lines.append(f"  {term.name(names)} = {rhs}")
    return "\n".join(lines) + "\n"
