"""Game data model and scenario file handling.

A scenario bundles the epidemic parameters, the action bounds, the decision
grid, and the list of player types.  Types are kept sorted by their derived
risk ratio b = s0 * g / s (ascending), which the rest of the package relies
on: the interval [0, 1) of player indices is laid out type by type in that
order, so less cautious players occupy lower indices.

Scenario file format
--------------------
UTF-8 text, one `key = value` pair per line, `#` starts a comment.  Global
scalars come first, then one ``[[type]]`` block per player type::

    r = 0.4            # transmission coefficient (1/time)
    kappa = 3.0        # baseline outing desire
    u_min = 0.4
    u_max = 0.75
    steps = 13         # number of decision intervals
    step_length = 7.0  # duration of one interval (time units)
    substeps = 64      # ODE substeps per interval (optional)

    [[type]]
    mass = 1.0         # population fraction
    s0 = 0.99          # initial susceptible probability
    i0 = 0.01          # initial infected probability
    alpha = 0.1666667  # removal rate (1/time)
    g = 202.0          # infection disutility
    s = 1.0            # sociability weight

All numbers are decimal floating point; `steps` and `substeps` must be
integers.  `step_length` defaults to 1 and `substeps` to 64.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, replace

import numpy as np

MASS_TOL = 1e-12

__all__ = [
    "ScenarioError",
    "PlayerType",
    "Scenario",
    "b_parameter",
    "type_boundaries",
    "load_scenario",
    "loads_scenario",
    "serialize_scenario",
]


class ScenarioError(ValueError):
    """Invalid scenario file or inconsistent scenario parameters."""


@dataclass(frozen=True)
class PlayerType:
    """One homogeneous class of players."""

    mass: float
    s0: float
    i0: float
    alpha: float
    g: float
    s: float

    def __post_init__(self):
        if not 0.0 < self.mass <= 1.0:
            raise ScenarioError(f"type mass must be in (0, 1], got {self.mass}")
        if not (0.0 <= self.s0 <= 1.0 and 0.0 <= self.i0 <= 1.0):
            raise ScenarioError(f"s0, i0 must lie in [0, 1], got {self.s0}, {self.i0}")
        if self.s0 + self.i0 > 1.0 + 1e-15:
            raise ScenarioError(f"s0 + i0 exceeds 1: {self.s0} + {self.i0}")
        if self.alpha <= 0.0:
            raise ScenarioError(f"removal rate alpha must be positive, got {self.alpha}")
        if self.g <= 0.0:
            raise ScenarioError(f"infection disutility g must be positive, got {self.g}")
        if self.s <= 0.0:
            raise ScenarioError(f"sociability weight s must be positive, got {self.s}")


def b_parameter(t: PlayerType) -> float:
    """Risk ratio b = s0 * g / s driving the type's distancing behavior."""
    return t.s0 * t.g / t.s


@dataclass(frozen=True)
class Scenario:
    """Immutable description of one game instance.

    Types are re-sorted by ascending b at construction; equal b values across
    distinct types are rejected because the equilibrium layout of players on
    [0, 1) needs a strict order.
    """

    r: float
    kappa: float
    u_min: float
    u_max: float
    steps: int
    types: tuple[PlayerType, ...]
    step_length: float = 1.0
    substeps: int = 64

    def __post_init__(self):
        if self.r <= 0.0:
            raise ScenarioError(f"transmission coefficient r must be positive, got {self.r}")
        if self.kappa <= 0.0:
            raise ScenarioError(f"outing-desire constant kappa must be positive, got {self.kappa}")
        if not 0.0 < self.u_min < self.u_max <= 1.0:
            raise ScenarioError(
                f"action bounds must satisfy 0 < u_min < u_max <= 1, got {self.u_min}, {self.u_max}"
            )
        if self.steps < 1:
            raise ScenarioError(f"need at least one decision interval, got {self.steps}")
        if self.step_length <= 0.0:
            raise ScenarioError(f"step_length must be positive, got {self.step_length}")
        if self.substeps < 1:
            raise ScenarioError(f"substeps must be at least 1, got {self.substeps}")
        if not self.types:
            raise ScenarioError("scenario has no player types")

        types = tuple(sorted(self.types, key=b_parameter))
        object.__setattr__(self, "types", types)

        total = math.fsum(t.mass for t in types)
        if abs(total - 1.0) > MASS_TOL:
            raise ScenarioError(f"type masses must sum to 1, got {total!r}")
        for a, b in zip(types, types[1:]):
            if b_parameter(a) == b_parameter(b):
                raise ScenarioError(
                    f"duplicate risk ratio b = {b_parameter(a)!r} for types with "
                    f"(g, s, s0) = {(a.g, a.s, a.s0)} and {(b.g, b.s, b.s0)}; "
                    "merge them into one type"
                )

    @property
    def num_types(self) -> int:
        return len(self.types)

    def b_values(self) -> np.ndarray:
        """Per-type risk ratios, strictly increasing."""
        return np.array([b_parameter(t) for t in self.types])

    def alphas(self) -> np.ndarray:
        return np.array([t.alpha for t in self.types])

    def masses(self) -> np.ndarray:
        return np.array([t.mass for t in self.types])

    def with_u_max(self, u_max: float) -> "Scenario":
        return replace(self, u_max=u_max)

    def with_substeps(self, substeps: int) -> "Scenario":
        return replace(self, substeps=substeps)

    def horizon(self) -> float:
        return self.steps * self.step_length


def type_boundaries(sc: Scenario) -> np.ndarray:
    """Cumulative type boundaries 0 = i_0 < i_1 < ... < i_M = 1 on [0, 1).

    Type j occupies the player-index interval [i_{j-1}, i_j) whose width is
    its mass.  The last boundary is pinned to exactly 1.
    """
    bounds = np.concatenate([[0.0], np.cumsum([t.mass for t in sc.types])])
    bounds[-1] = 1.0
    return bounds


# --- scenario file parsing -------------------------------------------------

_GLOBAL_KEYS = {"r", "kappa", "u_min", "u_max", "steps", "step_length", "substeps"}
_TYPE_KEYS = {"mass", "s0", "i0", "alpha", "g", "s"}
_INT_KEYS = {"steps", "substeps"}


def _parse_number(key: str, raw: str, lineno: int):
    try:
        if key in _INT_KEYS:
            return int(raw)
        return float(raw)
    except ValueError:
        kind = "an integer" if key in _INT_KEYS else "a number"
        raise ScenarioError(f"line {lineno}: value for '{key}' must be {kind}, got {raw!r}") from None


def loads_scenario(text: str) -> Scenario:
    """Parse scenario text; see the module docstring for the grammar."""
    globals_: dict = {}
    type_blocks: list[dict] = []
    current = globals_

    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if line == "[[type]]":
            current = {}
            type_blocks.append(current)
            continue
        if "=" not in line:
            raise ScenarioError(f"line {lineno}: expected 'key = value' or '[[type]]', got {raw_line!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        allowed = _TYPE_KEYS if current is not globals_ else _GLOBAL_KEYS
        if key not in allowed:
            where = "a [[type]] block" if current is not globals_ else "the top level"
            raise ScenarioError(f"line {lineno}: unknown key '{key}' in {where}")
        if key in current:
            raise ScenarioError(f"line {lineno}: duplicate key '{key}'")
        current[key] = _parse_number(key, value, lineno)

    missing = {"r", "kappa", "u_min", "u_max", "steps"} - globals_.keys()
    if missing:
        raise ScenarioError(f"missing required global keys: {', '.join(sorted(missing))}")
    if not type_blocks:
        raise ScenarioError("scenario defines no [[type]] blocks")
    types = []
    for i, block in enumerate(type_blocks, start=1):
        missing = _TYPE_KEYS - block.keys()
        if missing:
            raise ScenarioError(f"[[type]] block {i} is missing keys: {', '.join(sorted(missing))}")
        types.append(PlayerType(**block))
    return Scenario(types=tuple(types), **globals_)


def load_scenario(path: str | os.PathLike) -> Scenario:
    """Read and validate a scenario file.  Types come back sorted by b."""
    with open(path, encoding="utf-8") as f:
        return loads_scenario(f.read())


def serialize_scenario(sc: Scenario) -> str:
    """Render a scenario in the file format; inverse of loads_scenario."""
    lines = [
        f"r = {sc.r!r}",
        f"kappa = {sc.kappa!r}",
        f"u_min = {sc.u_min!r}",
        f"u_max = {sc.u_max!r}",
        f"steps = {sc.steps}",
        f"step_length = {sc.step_length!r}",
        f"substeps = {sc.substeps}",
    ]
    for t in sc.types:
        lines += [
            "",
            "[[type]]",
            f"mass = {t.mass!r}",
            f"s0 = {t.s0!r}",
            f"i0 = {t.i0!r}",
            f"alpha = {t.alpha!r}",
            f"g = {t.g!r}",
            f"s = {t.s!r}",
        ]
    return "\n".join(lines) + "\n"
