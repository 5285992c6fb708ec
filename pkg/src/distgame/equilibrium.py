"""Reduced-order equilibrium computation and verification.

Because optimal actions are threshold rules, the actions present at an
equilibrium always form a chain in {u_min, u_max}^N, so an equilibrium is
pinned down by the fractions rho_k of players at u_max on each interval.
A fraction vector induces at most N+1 chain actions and at most M+N+1
(type, action) groups; the gap function

    H(rho) = sum over groups of  mass * (cost of its action - type optimum)

is continuous, nonnegative, and zero exactly at Nash equilibria.  H is
minimized over the box [0, 1]^N by multi-start compass search.

For small horizons the full complementarity formulation over all 2^N
actions is available as an independent check (verify_ncp).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from .best_response import candidate_thresholds, ratio_profile, vertex_actions
from .dynamics import AggregatePath, GroupProfile, TrajectoryBundle, batch_aggregates, simulate
from .model import Scenario, type_boundaries

__all__ = [
    "ChainProfile",
    "GapEntry",
    "GapReport",
    "NcpReport",
    "StartResult",
    "EquilibriumResult",
    "chain_actions",
    "chain_profile",
    "rho_to_pi",
    "evaluate_gap",
    "evaluate_gap_batch",
    "solve_equilibrium",
    "full_distribution",
    "verify_ncp",
]


def chain_actions(rho: np.ndarray, u_min: float, u_max: float) -> np.ndarray:
    """The N+1 chain actions induced by a fraction vector, largest first.

    Row n plays u_max exactly on the intervals whose fraction is at least
    the (n+1)-th smallest fraction; the final row is all-u_min.  Rows are
    ordered decreasingly, so row 0 is always all-u_max.  (The construction
    is 0-based; row n corresponds to the 1-based chain position n+1.)
    """
    rho = np.asarray(rho, dtype=float)
    sorted_rho = np.sort(rho, kind="stable")
    rows = np.where(rho[None, :] >= sorted_rho[:, None], u_max, u_min)
    return np.vstack([rows, np.full((1, len(rho)), u_min)])


@dataclass(frozen=True)
class ChainProfile:
    """A fraction vector with its induced chain actions and group masses.

    cell_mass[j, n] is the mass of type j playing chain action n; the
    profile collects the strictly positive cells in (type, chain) order.
    """

    rho: np.ndarray
    order: np.ndarray          # permutation sorting rho ascending (stable)
    actions: np.ndarray        # (N+1, N) chain actions, row 0 = all-u_max
    cell_mass: np.ndarray      # (M, N+1)
    profile: GroupProfile
    chain_index: np.ndarray    # chain row of each group in profile


def chain_profile(rho: np.ndarray, sc: Scenario) -> ChainProfile:
    """Map fractions to the unique chain-structured population profile.

    Players are laid on [0, 1) in ascending-b type order; the interval
    [sorted_rho[n-1], sorted_rho[n]) plays chain action n, so low-b types
    land on the more social actions.
    """
    rho = np.clip(np.asarray(rho, dtype=float), 0.0, 1.0)
    if len(rho) != sc.steps:
        raise ValueError(f"fraction vector has {len(rho)} entries, scenario has {sc.steps} steps")
    order = np.argsort(rho, kind="stable")
    actions = chain_actions(rho, sc.u_min, sc.u_max)

    cell_lo = np.concatenate([[0.0], rho[order]])
    cell_hi = np.concatenate([rho[order], [1.0]])
    bounds = type_boundaries(sc)
    lo = np.maximum(bounds[:-1, None], cell_lo[None, :])
    hi = np.minimum(bounds[1:, None], cell_hi[None, :])
    cell_mass = np.maximum(0.0, hi - lo)

    tidx, cidx = np.nonzero(cell_mass > 0.0)
    profile = GroupProfile(
        type_index=tidx,
        actions=actions[cidx],
        mass=cell_mass[tidx, cidx],
    )
    return ChainProfile(
        rho=rho, order=order, actions=actions, cell_mass=cell_mass,
        profile=profile, chain_index=cidx,
    )


def rho_to_pi(rho: np.ndarray, sc: Scenario) -> GroupProfile:
    """Grouped population profile induced by a fraction vector."""
    return chain_profile(rho, sc).profile


@dataclass(frozen=True)
class GapEntry:
    type_index: int
    chain_index: int
    mass: float
    cost: float      # auxiliary cost of this (type, action) cell
    optimum: float   # the type's best-response cost
    gap: float


@dataclass(frozen=True)
class GapReport:
    """Gap-function value H with its per-group decomposition."""

    total: float
    entries: tuple
    aggregates: AggregatePath
    type_optima: np.ndarray


def _chain_costs(sc: Scenario, actions: np.ndarray, agg: AggregatePath, b: np.ndarray):
    """Auxiliary costs of the chain actions (M, N+1) and type optima (M,)."""
    expo = actions @ agg.i_f
    social = actions @ agg.u_bar
    costs = -b[:, None] * np.exp(-sc.r * expo)[None, :] - social[None, :]

    thresholds = candidate_thresholds(agg)
    cand = np.where(ratio_profile(agg)[None, :] > thresholds[:, None], sc.u_max, sc.u_min)
    cand_costs = -b[:, None] * np.exp(-sc.r * (cand @ agg.i_f))[None, :] - (cand @ agg.u_bar)[None, :]
    optima = cand_costs.min(axis=1)
    return costs, optima


def _gap_report(sc: Scenario, cp: ChainProfile, agg: AggregatePath) -> GapReport:
    b = sc.b_values()
    costs, optima = _chain_costs(sc, cp.actions, agg, b)
    gaps = costs - optima[:, None]
    total = float(np.sum(cp.cell_mass * gaps))
    entries = tuple(
        GapEntry(
            type_index=int(j), chain_index=int(n), mass=float(cp.cell_mass[j, n]),
            cost=float(costs[j, n]), optimum=float(optima[j]), gap=float(gaps[j, n]),
        )
        for j, n in zip(*np.nonzero(cp.cell_mass > 0.0))
    )
    return GapReport(total=total, entries=entries, aggregates=agg, type_optima=optima)


def evaluate_gap(rho: np.ndarray, sc: Scenario) -> GapReport:
    """The equilibrium gap H(rho) and its decomposition."""
    cp = chain_profile(rho, sc)
    agg = batch_aggregates(sc, [cp.profile])[0]
    return _gap_report(sc, cp, agg)


def evaluate_gap_batch(rhos: np.ndarray, sc: Scenario) -> np.ndarray:
    """H at many fraction vectors with one shared integration sweep."""
    rhos = np.atleast_2d(rhos)
    profiles = [chain_profile(rho, sc) for rho in rhos]
    aggs = batch_aggregates(sc, [cp.profile for cp in profiles])
    b = sc.b_values()
    out = np.empty(len(profiles))
    for idx, (cp, agg) in enumerate(zip(profiles, aggs)):
        costs, optima = _chain_costs(sc, cp.actions, agg, b)
        out[idx] = np.sum(cp.cell_mass * (costs - optima[:, None]))
    return out


@dataclass(frozen=True)
class StartResult:
    index: int
    rho: np.ndarray
    gap: float
    iterations: int


@dataclass(frozen=True)
class EquilibriumResult:
    """Best point found by the multi-start search, with diagnostics."""

    rho: np.ndarray
    report: GapReport
    chain: ChainProfile
    trajectories: TrajectoryBundle
    type_costs: np.ndarray       # realized per-type total cost
    mean_cost: float
    success: bool
    tol: float
    seed: int
    starts_requested: int
    start_results: tuple
    evaluations: int
    trace: tuple                 # (iteration, H) improvements of winning start


def _compass_search(sc, rho0, tol, max_iters, init_step=0.25, shrink=0.5, min_step=1e-6,
                    max_resets=1):
    """Coordinate pattern search on [0, 1]^N with shrinking step.

    All 2N coordinate moves are evaluated per iteration (one batched sweep)
    and the best strict improvement is taken; a failed poll halves the step.
    When the step bottoms out above tolerance the step is reset once to
    escape shallow stalls.
    """
    n = sc.steps
    rho = np.clip(np.asarray(rho0, dtype=float), 0.0, 1.0)
    h = float(evaluate_gap_batch(rho[None, :], sc)[0])
    evals = 1
    trace = [(0, h)]
    step = init_step
    resets = 0
    iters = 0
    while iters < max_iters and h > tol:
        iters += 1
        moves = []
        for i in range(n):
            for d in (step, -step):
                cand = rho.copy()
                cand[i] = min(1.0, max(0.0, cand[i] + d))
                if cand[i] != rho[i]:
                    moves.append(cand)
        values = evaluate_gap_batch(np.array(moves), sc)
        evals += len(moves)
        best = int(np.argmin(values))
        if values[best] < h:
            rho = moves[best]
            h = float(values[best])
            trace.append((iters, h))
        else:
            step *= shrink
            if step < min_step:
                if resets < max_resets:
                    resets += 1
                    step = init_step
                else:
                    break
    return rho, h, iters, evals, trace


def _start_points(sc: Scenario, starts: int, seed: int) -> np.ndarray:
    n = sc.steps
    fixed = [np.zeros(n), np.ones(n), np.full(n, 0.5)]
    points = fixed[:starts]
    if starts > len(fixed):
        sampler = qmc.Sobol(d=n, scramble=True, seed=seed)
        points += list(sampler.random(starts - len(fixed)))
    return np.array(points)


def solve_equilibrium(sc: Scenario, starts: int = 8, max_iters: int = 1000, tol: float = 1e-6,
                      seed: int = 0) -> EquilibriumResult:
    """Minimize the gap H over fraction vectors by multi-start compass search.

    Starts run in order (two corners, the center, then seeded quasi-random
    points) and the search stops at the first start reaching H <= tol; if
    none does, the lowest-H point is returned with success=False.
    """
    if tol <= 0.0:
        raise ValueError("tolerance must be positive")
    if starts < 1:
        raise ValueError("need at least one start")
    results = []
    traces = []
    evals = 0
    for idx, rho0 in enumerate(_start_points(sc, starts, seed)):
        rho, h, iters, ev, trace = _compass_search(sc, rho0, tol, max_iters)
        results.append(StartResult(index=idx, rho=rho, gap=h, iterations=iters))
        traces.append(trace)
        evals += ev
        if h <= tol:
            break
    winner = min(results, key=lambda sr: (sr.gap, sr.index))

    cp = chain_profile(winner.rho, sc)
    bundle = simulate(sc, cp.profile)
    report = _gap_report(sc, cp, bundle.aggregates)
    type_costs = _realized_type_costs(sc, cp, bundle)
    mean_cost = float(sc.masses() @ type_costs)
    return EquilibriumResult(
        rho=winner.rho, report=report, chain=cp, trajectories=bundle,
        type_costs=type_costs, mean_cost=mean_cost,
        success=bool(report.total <= tol), tol=tol, seed=seed,
        starts_requested=starts, start_results=tuple(results), evaluations=evals,
        trace=tuple(traces[winner.index]),
    )


def _realized_type_costs(sc: Scenario, cp: ChainProfile, bundle: TrajectoryBundle) -> np.ndarray:
    """Per-type expected total cost: infection disutility minus social utility."""
    agg = bundle.aggregates
    social = cp.profile.actions @ agg.u_bar
    s_final = bundle.s[:, -1]
    costs = np.zeros(sc.num_types)
    for g in range(cp.profile.num_groups):
        j = int(cp.profile.type_index[g])
        t = sc.types[j]
        group_cost = t.g * (1.0 - s_final[g]) - t.s * social[g]
        costs[j] += cp.profile.mass[g] / t.mass * group_cost
    return costs


@dataclass(frozen=True)
class NcpReport:
    """Residuals of the full complementarity formulation at a distribution."""

    min_mass: float        # min distribution entry, >= 0 at a valid point
    min_excess: float      # min cost excess over type optimum, >= -tol
    complementarity: float  # |sum mass * excess|, <= tol
    vi_residual: float     # worst directional value over vertices, >= -tol
    tol: float
    passed: bool


def full_distribution(cp: ChainProfile, sc: Scenario) -> np.ndarray:
    """Expand chain cell masses onto the full (M, 2^N) action distribution.

    Vertex indexing follows vertex_actions: bit k set means u_max on
    interval k.
    """
    n = sc.steps
    if n > 20:
        raise ValueError("full action distribution limited to 20 intervals")
    powers = 1 << np.arange(n)
    vertex_of_chain = ((cp.actions == sc.u_max) @ powers).astype(np.int64)
    pi = np.zeros((sc.num_types, 2**n))
    for j in range(sc.num_types):
        np.add.at(pi[j], vertex_of_chain, cp.cell_mass[j])
    return pi


def verify_ncp(pi: np.ndarray, sc: Scenario, tol: float = 1e-6) -> NcpReport:
    """Check the complementarity and variational-inequality residuals of pi.

    pi is a full (M, 2^N) distribution of type masses over every vertex
    action.  Costs of all actions are evaluated under the aggregates that pi
    induces; the type optimum here is the plain minimum over all 2^N costs,
    independent of the threshold enumeration used by the solver.
    """
    n = sc.steps
    if n > 12:
        raise ValueError(f"full enumeration limited to 12 intervals, got {n}")
    pi = np.asarray(pi, dtype=float)
    if pi.shape != (sc.num_types, 2**n):
        raise ValueError(f"distribution must have shape {(sc.num_types, 2 ** n)}, got {pi.shape}")
    masses = sc.masses()
    if np.any(np.abs(pi.sum(axis=1) - masses) > 1e-9):
        raise ValueError("per-type distribution masses do not match the scenario")

    all_actions = vertex_actions(np.arange(2**n), n, sc.u_min, sc.u_max)
    tidx, vidx = np.nonzero(pi > 0.0)
    gp = GroupProfile(type_index=tidx, actions=all_actions[vidx], mass=pi[tidx, vidx])
    agg = batch_aggregates(sc, [gp])[0]

    b = sc.b_values()
    costs = -b[:, None] * np.exp(-sc.r * (all_actions @ agg.i_f))[None, :] \
        - (all_actions @ agg.u_bar)[None, :]
    optima = costs.min(axis=1)
    excess = costs - optima[:, None]

    complementarity = abs(float(np.sum(pi * excess)))
    vi_residual = float(masses @ optima - np.sum(pi * costs))
    min_mass = float(pi.min())
    min_excess = float(excess.min())
    passed = (min_mass >= 0.0 and min_excess >= -tol
              and complementarity <= tol and vi_residual >= -tol)
    return NcpReport(
        min_mass=min_mass, min_excess=min_excess, complementarity=complementarity,
        vi_residual=vi_residual, tol=tol, passed=passed,
    )
