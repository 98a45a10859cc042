"""Effect-heredity activity prior for sparse coefficient patterns.

Main effects are active independently with probability pi.  A two-way
interaction's activation probability depends on its parents: 0 with both
parents inactive, c1*pi with exactly one active, c2*pi with both active.
Given a target expected number of active effects ENE and q variables, the
50/25/25 split (half the activity in main effects, a quarter in each
interaction class) pins (pi, c1, c2) in closed form:

    pi = ENE / (2q)
    c1 = ENE / (4 pi^2 (1-pi) q (q-1))
    c2 = ENE / (2 pi^3 q (q-1))

Infeasible solutions (a conditional probability above 1) raise rather than
clamp, since clamping would silently change what ENE means.

Note the number of active mains f is Binomial(q, pi), so E f = pi*q and
E f^2 = q*pi*(1-pi) + (q*pi)^2; the standard binomial moments are used
throughout.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleParams, ValidationError
from .seeds import derive_seed_array, uniform_block, uniform_stream


@dataclass(frozen=True)
class HeredityParams:
    q: int
    ene: float
    pi: float
    c1: float
    c2: float


@dataclass(frozen=True)
class ActivityPattern:
    """Which main effects and two-way interactions carry a nonzero coefficient."""

    q: int
    active_mains: frozenset[int]
    active_interactions: frozenset[tuple[int, int]]

    def __post_init__(self):
        for i in self.active_mains:
            if not 0 <= i < self.q:
                raise ValidationError(f"main effect index {i} out of range")
        for i, j in self.active_interactions:
            if not (0 <= i < j < self.q):
                raise ValidationError(f"interaction {(i, j)} not canonical")
            if i not in self.active_mains and j not in self.active_mains:
                raise ValidationError(
                    f"interaction {(i, j)} violates heredity: both parents inactive")


def pair_order(q: int) -> list[tuple[int, int]]:
    """Canonical (i < j) enumeration used for pair-indexed uniforms/columns."""
    return list(itertools.combinations(range(q), 2))


def solve_heredity_params(ene: float, q: int) -> HeredityParams:
    """Unique (pi, c1, c2) putting ENE/2, ENE/4, ENE/4 expected activity in
    mains, one-parent and two-parent interactions respectively."""
    if q < 2:
        raise ValidationError("need q >= 2 measured variables")
    if not 0 < ene < 2 * q:
        raise InfeasibleParams(
            f"ENE must lie in (0, 2q) = (0, {2 * q}), got {ene}")
    pi = ene / (2.0 * q)
    c1 = ene / (4.0 * pi ** 2 * (1.0 - pi) * q * (q - 1))
    c2 = ene / (2.0 * pi ** 3 * q * (q - 1))
    if c1 * pi > 1.0 or c2 * pi > 1.0:
        raise InfeasibleParams(
            f"conditional probabilities exceed 1: c1*pi={c1 * pi:.4f}, "
            f"c2*pi={c2 * pi:.4f} (ENE={ene}, q={q})")
    return HeredityParams(q, ene, pi, c1, c2)


def expected_counts(params: HeredityParams) -> tuple[float, float, float]:
    """Expected (active mains, one-parent interactions, two-parent interactions)."""
    q, pi = params.q, params.pi
    mains = pi * q
    one_parent = params.c1 * pi ** 2 * (1 - pi) * q * (q - 1)
    two_parent = params.c2 * pi ** 3 * q * (q - 1) / 2.0
    return mains, one_parent, two_parent


def _draw_arrays(params: HeredityParams, seed: int
                 ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(mains active, pairs active, active-parent count per pair) as arrays.

    Mains use the seed's counters 0..q-1, pairs q..q+P-1 in canonical pair
    order, so patterns replay identically regardless of batch size.
    """
    q = params.q
    pairs = pair_order(q)
    u = uniform_stream(seed, 0, q + len(pairs))
    mains = u[:q] < params.pi
    i_idx = np.fromiter((p[0] for p in pairs), dtype=int, count=len(pairs))
    j_idx = np.fromiter((p[1] for p in pairs), dtype=int, count=len(pairs))
    n_parents = mains[i_idx].astype(int) + mains[j_idx].astype(int)
    threshold = np.choose(n_parents,
                          [0.0, params.c1 * params.pi, params.c2 * params.pi])
    active_pairs = u[q:] < threshold
    return mains, active_pairs, n_parents


def sample_pattern(params: HeredityParams, rng_seed: int) -> ActivityPattern:
    """Draw one activity pattern; deterministic given the seed."""
    mains, active_pairs, _ = _draw_arrays(params, rng_seed)
    pairs = pair_order(params.q)
    return ActivityPattern(
        params.q,
        frozenset(int(i) for i in np.flatnonzero(mains)),
        frozenset(pairs[k] for k in np.flatnonzero(active_pairs)))


def simulate_counts(params: HeredityParams, n_samples: int, master_seed: int,
                    block: int = 2000) -> dict[str, float]:
    """Monte Carlo means of the three activity counts plus a violation tally.

    Sample s uses seed derive_seed(master_seed, s), so its pattern equals
    sample_pattern(params, derive_seed(master_seed, s)); samples are drawn
    in vectorized blocks for speed, which does not change the streams.
    """
    q = params.q
    pairs = pair_order(q)
    i_idx = np.fromiter((p[0] for p in pairs), dtype=int, count=len(pairs))
    j_idx = np.fromiter((p[1] for p in pairs), dtype=int, count=len(pairs))
    thresholds = np.array([0.0, params.c1 * params.pi, params.c2 * params.pi])
    totals = np.zeros(3)
    violations = 0
    for start in range(0, n_samples, block):
        idx = np.arange(start, min(start + block, n_samples))
        u = uniform_block(derive_seed_array(master_seed, idx), q + len(pairs))
        mains = u[:, :q] < params.pi
        n_parents = mains[:, i_idx].astype(np.int8) + \
            mains[:, j_idx].astype(np.int8)
        active = u[:, q:] < thresholds[n_parents]
        totals[0] += int(mains.sum())
        totals[1] += int((active & (n_parents == 1)).sum())
        totals[2] += int((active & (n_parents == 2)).sum())
        violations += int((active & (n_parents == 0)).sum())
    return {
        "mains": totals[0] / n_samples,
        "one_parent": totals[1] / n_samples,
        "two_parent": totals[2] / n_samples,
        "violations": violations,
    }
