"""Harvesting source, grid weights, battery dynamics, and grid cost.

Harvest arrives as a discrete-level Markov chain. Within a trajectory the
battery is credited with E(i) at the start of frame i (the first frame's
harvest initializes the battery), energy X^h(i) <= B(i) is drawn during
the frame, and whatever would exceed capacity at the next arrival spills.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import NetworkConfig


class EnergyError(ValueError):
    """Violation of battery physics (causality or bounds)."""


@dataclass
class HarvestProcess:
    """Markov chain over harvest levels omega with column-stochastic Q.

    Q[next, cur] = P(E(i+1) = omega[next] | E(i) = omega[cur]).
    """

    omega: np.ndarray
    q: np.ndarray
    state: int = 0

    def __post_init__(self):
        self.omega = np.asarray(self.omega, dtype=float)
        self.q = np.asarray(self.q, dtype=float)
        n = len(self.omega)
        if np.any(self.omega < 0):
            raise EnergyError("harvest levels must be nonnegative")
        if self.q.shape != (n, n):
            raise EnergyError(f"Q must be {n}x{n}, got {self.q.shape}")
        if np.any(self.q < 0) or not np.allclose(self.q.sum(axis=0), 1.0, atol=1e-9):
            raise EnergyError("every column of Q must be a probability vector")
        if not 0 <= self.state < n:
            raise EnergyError("state index out of range")

    @classmethod
    def tridiagonal(cls, levels, stay: float = 0.5, state: int = 0) -> "HarvestProcess":
        """Stay with probability `stay`, split the rest between the two
        neighbor levels; at the edges the outward share folds into staying."""
        levels = np.asarray(levels, dtype=float)
        n = len(levels)
        move = (1.0 - stay) / 2.0
        q = np.zeros((n, n))
        for j in range(n):
            q[j, j] = stay
            if j > 0:
                q[j - 1, j] = move
            else:
                q[j, j] += move
            if j < n - 1:
                q[j + 1, j] = move
            else:
                q[j, j] += move
        if n == 1:
            q[0, 0] = 1.0
        return cls(omega=levels, q=q, state=state)

    @classmethod
    def from_config(cls, cfg: NetworkConfig, state: int = 0) -> "HarvestProcess":
        return cls.tridiagonal(cfg.harvest_levels_j, state=state)


def step_harvest(proc: HarvestProcess, rng: np.random.Generator) -> float:
    """Sample the next level from the current state's column; return omega."""
    proc.state = int(rng.choice(len(proc.omega), p=proc.q[:, proc.state]))
    return float(proc.omega[proc.state])


def harvest_sequence(proc: HarvestProcess, n: int, rng: np.random.Generator) -> np.ndarray:
    return np.array([step_harvest(proc, rng) for _ in range(n)])


def sample_weight(rng: np.random.Generator) -> float:
    """Per-frame grid price proxy, i.i.d. uniform on [0, 1)."""
    return float(rng.random())


def update_battery(b: float, xh: float, e: float, b_max: float) -> float:
    """Next battery level min(B_max, B - Xh + E); overflow is lost."""
    if xh < 0 or xh > b + 1e-12:
        raise EnergyError(f"causality violation: Xh={xh} exceeds battery {b}")
    return min(b_max, b - xh + e)


def greedy_split(x: float, b: float) -> tuple[float, float]:
    """Serve demand from the battery first: Xh = min(X, B), Xg = remainder."""
    xh = min(x, b)
    return xh, x - xh


@dataclass
class EnergyTrace:
    """Per-frame energy bookkeeping for one trajectory."""

    e: np.ndarray    # harvested (J)
    w: np.ndarray    # grid weight
    x: np.ndarray    # required (J)
    xh: np.ndarray   # drawn from battery (J)
    xg: np.ndarray   # drawn from grid (J)
    b: np.ndarray    # battery level at frame start (J)

    def validate(self, b_max: float, atol: float = 1e-9) -> None:
        """Raise unless conservation, causality, and bounds hold frame-wise."""
        if np.any(self.xh < -atol) or np.any(self.xg < -atol):
            raise EnergyError("negative energy split")
        if np.any(np.abs(self.x - self.xh - self.xg) > atol):
            raise EnergyError("conservation X = Xh + Xg violated")
        if np.any(self.xh > self.b + atol):
            raise EnergyError("causality Xh <= B violated")
        if np.any(self.b < -atol) or np.any(self.b > b_max + atol):
            raise EnergyError("battery bounds violated")
        for i in range(len(self.b) - 1):
            expect = update_battery(self.b[i], min(self.xh[i], self.b[i]),
                                    self.e[i + 1], b_max)
            if abs(self.b[i + 1] - expect) > atol:
                raise EnergyError(f"battery recursion violated at frame {i}")


def grid_cost(trace: EnergyTrace) -> float:
    """Weighted grid energy over the trajectory: sum_i W_i * Xg(i)."""
    return float(np.dot(trace.w, trace.xg))


def run_greedy_trajectory(x: np.ndarray, e: np.ndarray, w: np.ndarray,
                          b_max: float) -> EnergyTrace:
    """Greedy online policy over a realized (X, E, W) sequence.

    The battery starts at the first harvest arrival (clamped to capacity).
    """
    n = len(x)
    xh = np.zeros(n)
    xg = np.zeros(n)
    b = np.zeros(n)
    b[0] = min(b_max, e[0])
    for i in range(n):
        xh[i], xg[i] = greedy_split(x[i], b[i])
        if i + 1 < n:
            b[i + 1] = update_battery(b[i], xh[i], e[i + 1], b_max)
    return EnergyTrace(e=np.asarray(e, float), w=np.asarray(w, float),
                       x=np.asarray(x, float), xh=xh, xg=xg, b=b)


def replay_split_trajectory(x: np.ndarray, e: np.ndarray, w: np.ndarray,
                            xh: np.ndarray, b_max: float) -> EnergyTrace:
    """Replay an externally chosen battery-draw sequence through the dynamics.

    Draws are clipped to the feasible [0, min(X, B)] interval; the clip is the
    caller's responsibility to keep small (it is asserted by validate()).
    """
    n = len(x)
    xh_run = np.zeros(n)
    xg = np.zeros(n)
    b = np.zeros(n)
    b[0] = min(b_max, e[0])
    for i in range(n):
        xh_run[i] = min(max(xh[i], 0.0), min(x[i], b[i]))
        xg[i] = x[i] - xh_run[i]
        if i + 1 < n:
            b[i + 1] = update_battery(b[i], xh_run[i], e[i + 1], b_max)
    return EnergyTrace(e=np.asarray(e, float), w=np.asarray(w, float),
                       x=np.asarray(x, float), xh=xh_run, xg=xg, b=b)


# -- harvest model file ------------------------------------------------------

def load_harvest_file(path: str, state: int = 0) -> HarvestProcess:
    """First line: omega levels; following |omega| lines: rows of Q."""
    with open(path, "r", encoding="utf-8") as fh:
        rows = [line.split("#", 1)[0].strip() for line in fh]
    rows = [r for r in rows if r]
    omega = np.array([float(v) for v in rows[0].split()])
    n = len(omega)
    if len(rows) != n + 1:
        raise EnergyError(f"expected {n} matrix rows after the level line")
    q = np.array([[float(v) for v in rows[i + 1].split()] for i in range(n)])
    return HarvestProcess(omega=omega, q=q, state=state)


def save_harvest_file(path: str, proc: HarvestProcess) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(" ".join(format(v, ".12g") for v in proc.omega) + "\n")
        for row in proc.q:
            fh.write(" ".join(format(v, ".12g") for v in row) + "\n")


def dump_trace_csv(path: str, trace: EnergyTrace) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("i,e,w,x,xh,xg,b\n")
        for i in range(len(trace.x)):
            vals = (trace.e[i], trace.w[i], trace.x[i],
                    trace.xh[i], trace.xg[i], trace.b[i])
            fh.write(str(i + 1) + "," + ",".join(format(v, ".12g") for v in vals) + "\n")
