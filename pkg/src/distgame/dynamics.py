"""Grouped SIR integration and the aggregate quantities coupling the players.

A population profile is a finite list of groups, each holding a mass of
players of one type that follow one piecewise-constant action vector.  The
infection states of a group evolve as

    dS/dt = -r * v_k * S * If        If(t) = sum_g mass_g * I_g(t) * v_{g,k}
    dI/dt =  r * v_k * S * If - alpha * I

on each decision interval, where If is the density of infected people in
public places.  The per-interval integrals of If and of the mean action
(plus the outing-desire constant) are the only quantities the players' costs
depend on.

Integration uses classical fixed-step RK4 so that results are exactly
reproducible run to run; the integral of If is carried as an extra quadrature
state advanced by the same scheme.  Many independent profiles can be
integrated in one sweep, which is what makes the equilibrium search cheap.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import MASS_TOL, Scenario

# States may exit [0, 1] only by roundoff; anything worse means the step
# resolution cannot handle the scenario.
BLOWUP_TOL = 1e-6

__all__ = [
    "IntegrationError",
    "GroupProfile",
    "AggregatePath",
    "TrajectoryBundle",
    "profile_from_type_actions",
    "uniform_profile",
    "simulate",
    "batch_aggregates",
    "mean_action",
    "write_trajectory_csv",
    "write_aggregates_csv",
]


class IntegrationError(RuntimeError):
    """State left [0, 1] by more than BLOWUP_TOL: substeps too coarse."""


@dataclass(frozen=True)
class GroupProfile:
    """Finite grouped representation of the whole population's actions.

    type_index : (G,) int array, index into Scenario.types per group
    actions    : (G, N) array, action level of each group on each interval
    mass       : (G,) array, population fraction per group
    """

    type_index: np.ndarray
    actions: np.ndarray
    mass: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "type_index", np.asarray(self.type_index, dtype=np.intp))
        object.__setattr__(self, "actions", np.atleast_2d(np.asarray(self.actions, dtype=float)))
        object.__setattr__(self, "mass", np.asarray(self.mass, dtype=float))
        if not (len(self.type_index) == len(self.mass) == self.actions.shape[0]):
            raise ValueError("type_index, actions and mass must have one row per group")

    @property
    def num_groups(self) -> int:
        return len(self.mass)


def _check_profile(sc: Scenario, gp: GroupProfile):
    if gp.actions.shape[1] != sc.steps:
        raise ValueError(f"profile has {gp.actions.shape[1]} intervals, scenario has {sc.steps}")
    if np.any(gp.type_index < 0) or np.any(gp.type_index >= sc.num_types):
        raise ValueError("group type index out of range")
    if np.any(gp.mass < 0.0):
        raise ValueError("group masses must be nonnegative")
    lo, hi = sc.u_min - 1e-12, sc.u_max + 1e-12
    if np.any(gp.actions < lo) or np.any(gp.actions > hi):
        raise ValueError("group actions outside [u_min, u_max]")
    per_type = np.bincount(gp.type_index, weights=gp.mass, minlength=sc.num_types)
    expected = sc.masses()
    if np.any(np.abs(per_type - expected) > 1e-9):
        raise ValueError(f"per-type group masses {per_type} do not match scenario masses {expected}")


@dataclass(frozen=True)
class AggregatePath:
    """Per-interval integrated aggregates: u_bar_k and If_k."""

    u_bar: np.ndarray
    i_f: np.ndarray

    @property
    def steps(self) -> int:
        return len(self.u_bar)


@dataclass(frozen=True)
class TrajectoryBundle:
    """Sampled S/I paths per group plus the aggregates of the run.

    times          : (T,) sample times, one per substep boundary
    s, i           : (G, T) susceptible / infected probability paths
    total_infected : (T,) mass-weighted infected share of the population
    """

    times: np.ndarray
    s: np.ndarray
    i: np.ndarray
    aggregates: AggregatePath
    total_infected: np.ndarray


def profile_from_type_actions(sc: Scenario, actions_per_type: Sequence[np.ndarray]) -> GroupProfile:
    """One group per type, each with the full type mass and the given actions."""
    if len(actions_per_type) != sc.num_types:
        raise ValueError("need one action vector per type")
    return GroupProfile(
        type_index=np.arange(sc.num_types),
        actions=np.array([np.broadcast_to(a, sc.steps) for a in actions_per_type], dtype=float),
        mass=sc.masses(),
    )


def uniform_profile(sc: Scenario, level: float) -> GroupProfile:
    """Everybody plays the constant action `level` on every interval."""
    return profile_from_type_actions(sc, [np.full(sc.steps, float(level))] * sc.num_types)


def _rhs_weights(sc: Scenario, gp_list: Sequence[GroupProfile]):
    """Flatten a batch of profiles into one set of integration arrays."""
    type_index = np.concatenate([gp.type_index for gp in gp_list])
    actions = np.vstack([gp.actions for gp in gp_list])
    mass = np.concatenate([gp.mass for gp in gp_list])
    member = np.concatenate(
        [np.full(gp.num_groups, b, dtype=np.intp) for b, gp in enumerate(gp_list)]
    )
    alphas = sc.alphas()[type_index]
    s0 = np.array([t.s0 for t in sc.types])[type_index]
    i0 = np.array([t.i0 for t in sc.types])[type_index]
    return actions, mass, member, alphas, s0, i0


def _sweep(sc: Scenario, actions, mass, member, alpha, s0, i0, n_profiles, record=False):
    """Integrate all groups of all profiles over the full horizon.

    Returns (i_f, s_path, i_path); the paths are None unless record is set.
    Profiles are independent: If couples only groups with the same member id.
    """
    n_steps = sc.steps
    h = sc.step_length / sc.substeps
    r = sc.r
    s = s0.copy()
    i = i0.copy()
    i_f = np.zeros((n_profiles, n_steps))

    s_path = i_path = None
    if record:
        n_samples = n_steps * sc.substeps + 1
        s_path = np.empty((len(mass), n_samples))
        i_path = np.empty((len(mass), n_samples))
        s_path[:, 0] = s
        i_path[:, 0] = i

    def field(i_vec, w):
        return np.bincount(member, weights=w * i_vec, minlength=n_profiles)

    for k in range(n_steps):
        a = actions[:, k]
        ra = r * a
        w = mass * a
        z = np.zeros(n_profiles)
        for sub in range(sc.substeps):
            f1 = field(i, w)
            ds1 = -ra * s * f1[member]
            di1 = -ds1 - alpha * i

            s2 = s + 0.5 * h * ds1
            i2 = i + 0.5 * h * di1
            f2 = field(i2, w)
            ds2 = -ra * s2 * f2[member]
            di2 = -ds2 - alpha * i2

            s3 = s + 0.5 * h * ds2
            i3 = i + 0.5 * h * di2
            f3 = field(i3, w)
            ds3 = -ra * s3 * f3[member]
            di3 = -ds3 - alpha * i3

            s4 = s + h * ds3
            i4 = i + h * di3
            f4 = field(i4, w)
            ds4 = -ra * s4 * f4[member]
            di4 = -ds4 - alpha * i4

            sixth = h / 6.0
            s = s + sixth * (ds1 + 2.0 * (ds2 + ds3) + ds4)
            i = i + sixth * (di1 + 2.0 * (di2 + di3) + di4)
            z = z + sixth * (f1 + 2.0 * (f2 + f3) + f4)
            if record:
                col = k * sc.substeps + sub + 1
                s_path[:, col] = s
                i_path[:, col] = i
        i_f[:, k] = z
        if (s.min(initial=0.0) < -BLOWUP_TOL or i.min(initial=0.0) < -BLOWUP_TOL
                or s.max(initial=0.0) > 1.0 + BLOWUP_TOL or i.max(initial=0.0) > 1.0 + BLOWUP_TOL):
            raise IntegrationError(
                f"state left [0, 1] during interval {k}; increase substeps (now {sc.substeps})"
            )
    return i_f, s_path, i_path


def _u_bar(sc: Scenario, gp: GroupProfile) -> np.ndarray:
    mean = gp.mass @ gp.actions
    return sc.step_length * (sc.kappa + mean)


def batch_aggregates(sc: Scenario, profiles: Sequence[GroupProfile]) -> list[AggregatePath]:
    """Aggregates for many profiles in a single integration sweep."""
    if not profiles:
        return []
    actions, mass, member, alpha, s0, i0 = _rhs_weights(sc, profiles)
    i_f, _, _ = _sweep(sc, actions, mass, member, alpha, s0, i0, len(profiles))
    return [AggregatePath(u_bar=_u_bar(sc, gp), i_f=i_f[b]) for b, gp in enumerate(profiles)]


def simulate(sc: Scenario, gp: GroupProfile) -> TrajectoryBundle:
    """Integrate one profile and record the full sampled trajectories."""
    _check_profile(sc, gp)
    actions, mass, member, alpha, s0, i0 = _rhs_weights(sc, [gp])
    i_f, s_path, i_path = _sweep(sc, actions, mass, member, alpha, s0, i0, 1, record=True)
    times = np.linspace(0.0, sc.horizon(), sc.steps * sc.substeps + 1)
    return TrajectoryBundle(
        times=times,
        s=s_path,
        i=i_path,
        aggregates=AggregatePath(u_bar=_u_bar(sc, gp), i_f=i_f[0]),
        total_infected=gp.mass @ i_path,
    )


def mean_action(sc: Scenario, gp: GroupProfile, k: int) -> float:
    """Integrated mean action plus kappa on interval k (exact, no quadrature)."""
    if not 0 <= k < sc.steps:
        raise IndexError(f"interval index {k} out of range for {sc.steps} steps")
    return sc.step_length * (sc.kappa + float(gp.mass @ gp.actions[:, k]))


def write_trajectory_csv(path, sc: Scenario, gp: GroupProfile, bundle: TrajectoryBundle):
    """Per-sample rows (t, group_id, type_id, S, I) for every group."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["t", "group_id", "type_id", "S", "I"])
        for g in range(gp.num_groups):
            tid = int(gp.type_index[g])
            for t, s, i in zip(bundle.times, bundle.s[g], bundle.i[g]):
                w.writerow([repr(float(t)), g, tid, repr(float(s)), repr(float(i))])


def write_aggregates_csv(path, sc: Scenario, bundle: TrajectoryBundle):
    """Per-interval rows (k, u_bar_k, I_f_k, total_infected_at_t_k)."""
    agg = bundle.aggregates
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["k", "u_bar_k", "I_f_k", "total_infected_at_t_k"])
        for k in range(agg.steps):
            infected = bundle.total_infected[k * sc.substeps]
            w.writerow([k, repr(float(agg.u_bar[k])), repr(float(agg.i_f[k])), repr(float(infected))])
