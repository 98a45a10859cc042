"""Named simulation functions the harness can execute.

A simulation maps (levels, params, seed) -> float response, where levels is
factor name -> level value (numeric value for numeric factors, label
otherwise).  Simulations must be pure given their seed; the harness's
determinism test enforces this contract.
"""

from __future__ import annotations

from typing import Callable, Mapping

from .errors import ValidationError

SimulationFn = Callable[[Mapping[str, object], Mapping[str, object], int], float]

SIMULATIONS: dict[str, SimulationFn] = {}


def register_simulation(name: str):
    def decorate(fn: SimulationFn) -> SimulationFn:
        if name in SIMULATIONS and SIMULATIONS[name] is not fn:
            raise ValidationError(f"simulation {name!r} already registered")
        SIMULATIONS[name] = fn
        return fn
    return decorate


def get_simulation(name: str) -> SimulationFn:
    if name not in SIMULATIONS:
        raise ValidationError(
            f"unknown simulation {name!r}; registered: {sorted(SIMULATIONS)}")
    return SIMULATIONS[name]
