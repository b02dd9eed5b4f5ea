"""Offline battery-draw optimization over a realized trajectory.

solve_offline maximizes the weighted battery usage sum_i W_i Xh(i) with
full knowledge of the harvest/demand/weight sequences. Storage overflow
is modeled explicitly (a nonnegative spill variable reproduces the
min-clamp battery recursion), which keeps the program feasible for every
input. dp_oracle is an independent exact check on a quantized battery grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .energy import EnergyError, replay_split_trajectory


class PlannerError(ValueError):
    pass


@dataclass(frozen=True)
class PlannerInput:
    x: np.ndarray      # required energy per frame (J)
    e: np.ndarray      # harvested energy per frame (J)
    w: np.ndarray      # grid weight per frame
    b_max: float

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "e", np.asarray(self.e, dtype=float))
        object.__setattr__(self, "w", np.asarray(self.w, dtype=float))
        if not len(self.x) == len(self.e) == len(self.w):
            raise PlannerError("x, e, w must have equal length")
        if len(self.x) == 0:
            raise PlannerError("empty instance")
        if (np.any(self.x < 0) or np.any(self.e < 0) or np.any(self.w < 0)
                or self.b_max < 0):
            raise PlannerError("inputs must be nonnegative")


@dataclass(frozen=True)
class PlannerSolution:
    xh: np.ndarray
    objective: float   # sum_i W_i Xh(i)
    feasible: bool

    def grid_cost(self, inp: PlannerInput) -> float:
        return float(np.dot(inp.w, inp.x)) - self.objective


def solve_offline(inp: PlannerInput) -> PlannerSolution:
    """Exact LP over variables (Xh, battery, spill) per frame.

    Battery recursion with spill:
        b[0] + s[0]                    = E[0]
        b[i] - b[i-1] + Xh[i-1] + s[i] = E[i]
    with 0 <= Xh[i] <= min(X[i], b[i]), 0 <= b[i] <= B_max, s[i] >= 0.
    Spilling more than the forced overflow never helps the objective, so the
    optimum matches the min-clamp dynamics exactly.
    """
    n = len(inp.x)
    # variable layout: xh[0:n], b[n:2n], s[2n:3n]
    c = np.concatenate([-inp.w, np.zeros(2 * n)])

    a_eq = np.zeros((n, 3 * n))
    b_eq = inp.e.copy()
    for i in range(n):
        a_eq[i, n + i] = 1.0      # b[i]
        a_eq[i, 2 * n + i] = 1.0  # s[i]
        if i > 0:
            a_eq[i, n + i - 1] = -1.0
            a_eq[i, i - 1] = 1.0  # xh[i-1]

    a_ub = np.zeros((n, 3 * n))
    for i in range(n):
        a_ub[i, i] = 1.0
        a_ub[i, n + i] = -1.0     # xh[i] - b[i] <= 0
    b_ub = np.zeros(n)

    bounds = ([(0.0, xi) for xi in inp.x]
              + [(0.0, inp.b_max)] * n
              + [(0.0, None)] * n)
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq,
                  bounds=bounds, method="highs")
    if not res.success:
        raise PlannerError(f"LP solver failed: {res.message}")
    xh = np.clip(res.x[:n], 0.0, inp.x)
    xh[inp.w == 0.0] = 0.0  # tie-break: zero-weight frames draw nothing
    # canonical trajectory: replay through the real dynamics (clips only
    # solver round-off; the zeroing above can never reduce feasibility)
    trace = replay_split_trajectory(inp.x, inp.e, inp.w, xh, inp.b_max)
    if np.max(np.abs(trace.xh - xh)) > 1e-7:
        raise PlannerError("LP solution failed dynamics replay")
    return PlannerSolution(xh=trace.xh, objective=float(np.dot(inp.w, trace.xh)),
                           feasible=True)


def dp_oracle(inp: PlannerInput, grid_step: float = 0.05,
              max_states: int = 2_000_000) -> PlannerSolution:
    """Exact dynamic program over battery levels quantized to grid_step.

    Inputs are rounded to the grid first, so on grid-aligned instances the
    result is exact; otherwise it is optimal for the rounded instance.
    """
    if grid_step <= 0:
        raise PlannerError("grid_step must be positive")
    n = len(inp.x)
    xq = np.rint(inp.x / grid_step).astype(int)
    eq = np.rint(inp.e / grid_step).astype(int)
    bq = int(round(inp.b_max / grid_step))
    levels = bq + 1
    if n * levels > max_states:
        raise PlannerError(f"state space too large: {n * levels} > {max_states}")

    # value[b] = best weighted draw from frame i onward with battery level b
    value = np.zeros(levels)
    best_action = np.zeros((n, levels), dtype=int)
    for i in range(n - 1, -1, -1):
        new_value = np.full(levels, -np.inf)
        for b in range(levels):
            a_max = min(xq[i], b)
            actions = np.arange(a_max + 1)
            if i + 1 < n:
                nxt = np.minimum(b - actions + eq[i + 1], bq)
                future = value[nxt]
            else:
                future = 0.0
            scores = inp.w[i] * actions * grid_step + future
            a_star = int(np.argmax(scores))
            new_value[b] = scores[a_star]
            best_action[i, b] = a_star
        value = new_value

    b = min(eq[0], bq)
    start_value = value[b]
    xh = np.zeros(n)
    for i in range(n):
        a = best_action[i, b]
        xh[i] = a * grid_step
        if i + 1 < n:
            b = min(b - a + eq[i + 1], bq)
    return PlannerSolution(xh=xh, objective=float(start_value), feasible=True)


def verify_solution(inp: PlannerInput, sol: PlannerSolution, atol: float = 1e-8) -> None:
    """Independent replay of a draw sequence through the battery dynamics."""
    trace = replay_split_trajectory(inp.x, inp.e, inp.w, sol.xh, inp.b_max)
    if np.max(np.abs(trace.xh - sol.xh)) > atol:
        raise EnergyError("draw sequence is infeasible for the battery dynamics")
    trace.validate(inp.b_max)
