"""End-to-end Monte Carlo experiments: scheme x sweep x seeded trials.

A trial realizes one deployment (topology, harvest, weights, fading),
runs the chosen assignment scheme frame by frame, splits each frame's
demand between battery and grid, and reports the weighted grid cost.
Trial randomness derives from SeedSequence([seed_base, sweep_index,
trial_index]) so any run can be reproduced point by point, and schemes
compared under the same seeds see identical realizations.
"""

from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass

import numpy as np

from . import assignment as asg
from . import channel as ch
from . import energy as en
from .config import NetworkConfig
from .planner import PlannerInput, solve_offline

SCHEMES = ("optimal", "hurma", "hcrma", "random", "rr", "rl")


class HarnessError(ValueError):
    pass


@dataclass
class Scenario:
    cfg: NetworkConfig
    channel_mode: str = "iid"        # "iid" | "gilbert-elliott"
    scheme: str = "hurma"
    sweep_name: str = "none"         # "gamma_th_db" | "m" | "b_max_j" | "none"
    sweep_values: tuple = ()
    trials: int = 100
    seed_base: int = 1

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise HarnessError(f"unknown scheme {self.scheme!r}")
        if self.channel_mode not in ("iid", "gilbert-elliott"):
            raise HarnessError(f"unknown channel mode {self.channel_mode!r}")
        if self.sweep_name not in ("none", "gamma_th_db", "m", "b_max_j"):
            raise HarnessError(f"unknown sweep variable {self.sweep_name!r}")
        if self.scheme == "optimal":
            for value in self.sweep_values or (None,):
                cfg = apply_sweep(self.cfg, self.sweep_name, value)
                count = asg.enumeration_count(cfg.k, cfg.m, cfg.n_sf)
                if count > 100_000:
                    raise HarnessError(
                        f"optimal scheme needs the exhaustive-search guard: "
                        f"{count} candidates at sweep value {value}")


@dataclass
class ResultRow:
    sweep_value: float
    mean_cost: float
    std_cost: float
    mean_harvest_used: float
    mean_grid: float
    accuracy: float     # RL only; nan otherwise
    wall_s: float


def trial_rngs(seed_base: int, sweep_index: int, trial_index: int):
    """Independent streams for the environment draws and the scheme's own
    randomness, so all schemes see identical realizations per trial."""
    seq = np.random.SeedSequence([seed_base, sweep_index, trial_index])
    env_seed, scheme_seed = seq.spawn(2)
    return np.random.default_rng(env_seed), np.random.default_rng(scheme_seed)


def apply_sweep(cfg: NetworkConfig, name: str, value) -> NetworkConfig:
    if name == "none" or value is None:
        return cfg
    if name == "gamma_th_db":
        return dataclasses.replace(cfg, gamma_th_db=float(value))
    if name == "b_max_j":
        return dataclasses.replace(cfg, b_max_j=float(value))
    if name == "m":
        # channel count changes the bandwidth tuple's length
        return dataclasses.replace(cfg, m=int(value),
                                   bandwidth_hz=(cfg.bandwidth_hz[0],) * int(value))
    raise HarnessError(f"unknown sweep variable {name!r}")


@dataclass
class TrialRealization:
    """Everything random a trial needs, drawn once and shared by schemes."""

    topo: ch.Topology
    realizations: list[ch.ChannelRealization]
    e: np.ndarray
    w: np.ndarray


def realize_trial(cfg: NetworkConfig, mode: str,
                  rng: np.random.Generator) -> TrialRealization:
    topo = ch.sample_topology(cfg, rng)
    harvest = en.HarvestProcess.from_config(cfg)
    e = en.harvest_sequence(harvest, cfg.l, rng)
    w = rng.random(cfg.l)
    if mode == "gilbert-elliott":
        proc = ch.GilbertElliottProcess.from_config(cfg, rng)
        realizations = [ch.step_gilbert_elliott(proc, topo, rng) for _ in range(cfg.l)]
    else:
        realizations = [ch.sample_iid_channels(topo, cfg, rng, frame_index=i)
                        for i in range(cfg.l)]
    return TrialRealization(topo=topo, realizations=realizations, e=e, w=w)


def scheme_assignments(cfg: NetworkConfig, scheme: str, trial: TrialRealization,
                       rng: np.random.Generator, policies: dict | None = None):
    """Per-frame assignments for any scheme on a fixed trial realization."""
    if scheme == "rl":
        if not policies or policies.get("policy") is None:
            raise HarnessError("missing checkpoint: rl scheme needs a trained policy")
        from .ppo import ChannelAssignEnv, rollout_assignments

        env = ChannelAssignEnv(cfg, trial.topo, rng,
                               replay_frames=trial.realizations)
        frames = rollout_assignments(policies["policy"], env, rng, greedy=True)
        return [a for (_, a) in frames]
    out = []
    for i, realization in enumerate(trial.realizations):
        if scheme == "optimal":
            out.append(asg.brute_force_optimal(realization, cfg))
        elif scheme == "hurma":
            out.append(asg.hurma_frame(realization, cfg))
        elif scheme == "hcrma":
            out.append(asg.hcrma_frame(realization, trial.topo, cfg))
        elif scheme == "random":
            out.append(asg.random_assignment(rng, cfg, frame_index=i))
        elif scheme == "rr":
            out.append(asg.round_robin(i, cfg))
        else:
            raise HarnessError(f"unknown scheme {scheme!r}")
    return out


def split_demand(cfg: NetworkConfig, scheme: str, x: np.ndarray,
                 trial: TrialRealization, policies: dict | None = None) -> en.EnergyTrace:
    """Battery/grid split: offline LP for the optimal scheme, the trained
    actor for RL (when provided), greedy otherwise."""
    if scheme == "optimal":
        sol = solve_offline(PlannerInput(x=x, e=trial.e, w=trial.w,
                                         b_max=cfg.b_max_j))
        return en.replay_split_trajectory(x, trial.e, trial.w, sol.xh, cfg.b_max_j)
    if scheme == "rl" and policies and policies.get("actor") is not None:
        from .ddpg import EnergyManagementEnv, actor_split_trajectory

        env = EnergyManagementEnv(lambda _rng: (x, trial.e, trial.w),
                                  cfg.b_max_j, np.random.default_rng(0))
        env.norms = np.array([max(cfg.harvest_levels_j) or 1e-12,
                              max(float(x.max()), 1e-12), 1.0])
        draws = actor_split_trajectory(policies["actor"], env)
        return en.replay_split_trajectory(x, trial.e, trial.w, draws, cfg.b_max_j)
    return en.run_greedy_trajectory(x, trial.e, trial.w, cfg.b_max_j)


def simulate_trajectory(cfg: NetworkConfig, mode: str, scheme: str,
                        env_rng: np.random.Generator,
                        scheme_rng: np.random.Generator,
                        policies: dict | None = None,
                        audit: bool = False):
    """One seeded trajectory. Returns (trace, aux)."""
    trial = realize_trial(cfg, mode, env_rng)
    assignments = scheme_assignments(cfg, scheme, trial, scheme_rng, policies)
    x = np.array([ch.frame_energy(a, r, cfg)
                  for a, r in zip(assignments, trial.realizations)])
    trace = split_demand(cfg, scheme, x, trial, policies)
    if audit:
        for a in assignments:
            a.validate(cfg, partial=(scheme == "rl"))
        trace.validate(cfg.b_max_j)
    aux = {
        "assignments": assignments,
        "trial": trial,
        "objective": np.array([asg.objective(a, r, cfg)
                               for a, r in zip(assignments, trial.realizations)]),
        "scheduled": np.array([a.n_scheduled for a in assignments]),
    }
    return trace, aux


def run_scenario(scenario: Scenario, policies: dict | None = None,
                 audit: bool = False) -> list[ResultRow]:
    """Monte Carlo sweep; one ResultRow per sweep point."""
    rows = []
    sweep_values = scenario.sweep_values or (None,)
    for sweep_index, value in enumerate(sweep_values):
        cfg = apply_sweep(scenario.cfg, scenario.sweep_name, value)
        started = time.perf_counter()
        costs = np.zeros(scenario.trials)
        used = np.zeros(scenario.trials)
        grid = np.zeros(scenario.trials)
        for trial_index in range(scenario.trials):
            env_rng, scheme_rng = trial_rngs(scenario.seed_base, sweep_index,
                                             trial_index)
            trace, _ = simulate_trajectory(cfg, scenario.channel_mode,
                                           scenario.scheme, env_rng, scheme_rng,
                                           policies, audit)
            costs[trial_index] = en.grid_cost(trace)
            used[trial_index] = trace.xh.sum()
            grid[trial_index] = trace.xg.sum()
        rows.append(ResultRow(
            sweep_value=float("nan") if value is None else float(value),
            mean_cost=float(costs.mean()),
            std_cost=float(costs.std(ddof=1)) if scenario.trials > 1 else 0.0,
            mean_harvest_used=float(used.mean()),
            mean_grid=float(grid.mean()),
            accuracy=float("nan"),
            wall_s=time.perf_counter() - started,
        ))
    return rows


def sweep_channels(scenario: Scenario, policies: dict | None = None) -> list[ResultRow]:
    """Convenience wrapper: the sweep variable is the channel count."""
    if scenario.sweep_name != "m":
        scenario = dataclasses.replace(scenario, sweep_name="m")
    return run_scenario(scenario, policies)


def cumulative_report(traces: list[en.EnergyTrace]) -> dict:
    """Mean per-frame cumulative battery draw and grid draw across traces."""
    grid = np.mean([np.cumsum(t.xg) for t in traces], axis=0)
    harvest = np.mean([np.cumsum(t.xh) for t in traces], axis=0)
    return {"cum_grid": grid, "cum_harvest": harvest}


# -- output -------------------------------------------------------------------

def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".12g")


def write_csv(path: str, header: list[str], rows: list[tuple]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(format_value(v) for v in row) + "\n")


def write_results_csv(path: str, rows: list[ResultRow],
                      include_timing: bool = False) -> None:
    """Result table; wall time is opt-in so identical seeds give identical bytes."""
    header = ["sweep_value", "mean_cost", "std_cost", "mean_harvest_used",
              "mean_grid", "accuracy"]
    if include_timing:
        header.append("wall_s")
    data = []
    for r in rows:
        vals = [r.sweep_value, r.mean_cost, r.std_cost, r.mean_harvest_used,
                r.mean_grid, r.accuracy]
        if include_timing:
            vals.append(r.wall_s)
        data.append(tuple(vals))
    write_csv(path, header, data)


def write_gnuplot(path: str, csv_path: str, title: str,
                  x_label: str, y_column: int = 2) -> None:
    """Companion plot script that references only the CSV."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            "set datafile separator ','\n"
            f"set title '{title}'\n"
            f"set xlabel '{x_label}'\n"
            "set ylabel 'grid energy cost (J)'\n"
            "set key left top\n"
            f"plot '{csv_path}' every ::1 using 1:{y_column} with linespoints "
            f"title 'mean cost'\n"
        )
