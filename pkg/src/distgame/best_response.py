"""Exact single-player optimization against fixed aggregates.

Given the per-interval aggregates (u_bar_k, If_k), a player's auxiliary cost

    -b * exp(-r * sum_k v_k * If_k) - sum_k v_k * u_bar_k

is strictly concave in each v_k, so optima sit at the action bounds, and the
optimizer is always a threshold rule on the ratios u_bar_k / If_k: intervals
whose ratio exceeds a cutoff get u_max, the rest u_min.  Enumerating the at
most N+1 distinct threshold actions therefore solves the problem exactly; a
2^N vertex enumeration is kept alongside as an independent oracle.

Intervals with If_k = 0 carry no infection risk, so their ratio is +inf and
every candidate plays u_max there.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import AggregatePath

RATIO_MERGE_RTOL = 1e-12

__all__ = [
    "BestResponse",
    "BruteForceResult",
    "PiecewiseAffineValue",
    "ratio_profile",
    "candidate_thresholds",
    "threshold_action",
    "auxiliary_cost",
    "best_response",
    "brute_force_best_response",
    "vertex_actions",
    "exposure_value_function",
]


@dataclass(frozen=True)
class BestResponse:
    """Minimizer of the auxiliary cost plus the full candidate sweep.

    candidates holds one (threshold, action, cost) triple per distinct
    threshold, ordered by ascending threshold (i.e. descending action).
    """

    action: np.ndarray
    cost: float
    threshold: float
    candidates: tuple


@dataclass(frozen=True)
class BruteForceResult:
    action: np.ndarray
    cost: float
    num_optimal: int  # vertices within relative 1e-12 of the minimum


def ratio_profile(agg: AggregatePath) -> np.ndarray:
    """Per-interval ratios u_bar_k / If_k, +inf where If_k = 0."""
    with np.errstate(divide="ignore"):
        return np.where(agg.i_f > 0.0, agg.u_bar / np.where(agg.i_f > 0.0, agg.i_f, 1.0), np.inf)


def _merged_ratios(ratios: np.ndarray) -> np.ndarray:
    """Distinct finite ratios, near-duplicates collapsed to the group max."""
    finite = np.sort(ratios[np.isfinite(ratios)])
    out: list[float] = []
    for v in finite:
        if out and v - out[-1] <= RATIO_MERGE_RTOL * max(abs(v), abs(out[-1])):
            out[-1] = v
        else:
            out.append(float(v))
    return np.array(out)


def candidate_thresholds(agg: AggregatePath) -> np.ndarray:
    """Ascending candidate cutoffs: 0 plus the distinct finite ratios."""
    return np.concatenate([[0.0], _merged_ratios(ratio_profile(agg))])


def threshold_action(agg: AggregatePath, threshold: float, u_min: float, u_max: float) -> np.ndarray:
    """u_max where the ratio strictly exceeds the cutoff, u_min otherwise."""
    return np.where(ratio_profile(agg) > threshold, u_max, u_min)


def auxiliary_cost(b: float, v: np.ndarray, agg: AggregatePath, r: float) -> float:
    v = np.asarray(v, dtype=float)
    return float(-b * np.exp(-r * (v @ agg.i_f)) - v @ agg.u_bar)


def _candidate_matrix(agg: AggregatePath, u_min: float, u_max: float):
    thresholds = candidate_thresholds(agg)
    ratios = ratio_profile(agg)
    actions = np.where(ratios[None, :] > thresholds[:, None], u_max, u_min)
    return thresholds, actions


def best_response(b: float, agg: AggregatePath, u_min: float, u_max: float, r: float) -> BestResponse:
    """Minimize the auxiliary cost by sweeping all threshold candidates.

    Exact-cost ties go to the larger threshold (the more cautious action);
    b = 0 is allowed and yields all-u_max.
    """
    thresholds, actions = _candidate_matrix(agg, u_min, u_max)
    costs = -b * np.exp(-r * (actions @ agg.i_f)) - actions @ agg.u_bar
    best = 0
    for idx in range(1, len(thresholds)):
        if costs[idx] <= costs[best]:
            best = idx
    return BestResponse(
        action=actions[best],
        cost=float(costs[best]),
        threshold=float(thresholds[best]),
        candidates=tuple(
            (float(t), a, float(c)) for t, a, c in zip(thresholds, actions, costs)
        ),
    )


def vertex_actions(indices: np.ndarray, n_steps: int, u_min: float, u_max: float) -> np.ndarray:
    """Actions at the given vertex indices of {u_min, u_max}^N.

    Bit k of an index selects the action on interval k (set bit = u_max).
    This ordering is the package-wide enumeration convention for the full
    action set.
    """
    bits = (np.asarray(indices, dtype=np.int64)[:, None] >> np.arange(n_steps)) & 1
    return u_min + bits * (u_max - u_min)


def brute_force_best_response(
    b: float, agg: AggregatePath, u_min: float, u_max: float, r: float, max_steps: int = 20
) -> BruteForceResult:
    """Exhaustive minimum over all 2^N action vertices (oracle path)."""
    n = agg.steps
    if n > max_steps:
        raise ValueError(f"brute force enumeration limited to {max_steps} intervals, got {n}")
    total = 2**n
    costs = np.empty(total)
    for start in range(0, total, 65536):
        idx = np.arange(start, min(start + 65536, total))
        actions = vertex_actions(idx, n, u_min, u_max)
        costs[idx] = -b * np.exp(-r * (actions @ agg.i_f)) - actions @ agg.u_bar
    best = int(np.argmin(costs))
    tol = RATIO_MERGE_RTOL * max(1.0, abs(costs[best]))
    return BruteForceResult(
        action=vertex_actions(np.array([best]), n, u_min, u_max)[0],
        cost=float(costs[best]),
        num_optimal=int(np.sum(costs <= costs[best] + tol)),
    )


@dataclass(frozen=True)
class PiecewiseAffineValue:
    """Minimal social cost as a function of the total exposure A.

    Convex, non-increasing and piecewise affine on [a_min, a_max]; +inf
    outside.  breakpoints has one entry per piece boundary (endpoints
    included), values the function there, slopes one entry per piece.
    """

    a_min: float
    a_max: float
    breakpoints: np.ndarray
    values: np.ndarray
    slopes: np.ndarray

    def __call__(self, a: float) -> float:
        if a < self.a_min or a > self.a_max:
            return np.inf
        return float(np.interp(a, self.breakpoints, self.values))

    def composite_minimum(self, b: float) -> float:
        """min_A of -b*exp(-A) + f(A); attained at a breakpoint by concavity."""
        return float(np.min(-b * np.exp(-self.breakpoints) + self.values))


def exposure_value_function(agg: AggregatePath, u_min: float, u_max: float, r: float) -> PiecewiseAffineValue:
    """Build the exposure/social-cost tradeoff curve by the sorted-ratio sweep.

    Starting from all-u_min, intervals flip to u_max in order of decreasing
    ratio; each flip contributes one affine piece of slope
    -u_bar_k / (r * If_k).  Zero-If intervals are pinned to u_max and only
    shift the curve by a constant.
    """
    ratios = ratio_profile(agg)
    active = np.isfinite(ratios)
    base = -u_min * float(agg.u_bar[active].sum()) - u_max * float(agg.u_bar[~active].sum())
    a_lo = r * u_min * float(agg.i_f.sum())

    order = np.argsort(-ratios[active], kind="stable")
    u_bar_s = agg.u_bar[active][order]
    i_f_s = agg.i_f[active][order]
    ratio_s = ratios[active][order]

    breakpoints = [a_lo]
    values = [base]
    slopes = []
    for j in range(len(order)):
        width = r * (u_max - u_min) * i_f_s[j]
        rise = -(u_max - u_min) * u_bar_s[j]
        same_ratio = slopes and (
            ratio_s[j - 1] - ratio_s[j] <= RATIO_MERGE_RTOL * max(abs(ratio_s[j]), abs(ratio_s[j - 1]))
        )
        if same_ratio:
            # equal ratios give one affine piece; extend it
            breakpoints[-1] += width
            values[-1] += rise
            slopes[-1] = (values[-1] - values[-2]) / (breakpoints[-1] - breakpoints[-2])
        else:
            breakpoints.append(breakpoints[-1] + width)
            values.append(values[-1] + rise)
            slopes.append(-u_bar_s[j] / (r * i_f_s[j]))
    return PiecewiseAffineValue(
        a_min=a_lo,
        a_max=breakpoints[-1],
        breakpoints=np.array(breakpoints),
        values=np.array(values),
        slopes=np.array(slopes),
    )
