"""Per-frame channel and spreading-factor assignment schemes.

Five producers share one Assignment contract: an exhaustive optimal
search (small instances only), the two greedy heuristics for
uncorrelated/correlated channels, and random / round-robin baselines.
Every producer schedules min(K, M*N) devices, at most N per channel,
with pairwise-distinct SFs inside a channel.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization, Topology
from .config import NetworkConfig


class AssignmentError(ValueError):
    """Invalid assignment or intractable exhaustive-search request."""


@dataclass
class Assignment:
    """chi[k, m] marks device k on channel m; alpha[k] is its SF (0 = idle)."""

    chi: np.ndarray
    alpha: np.ndarray
    frame_index: int = 0

    @property
    def psi(self) -> list[list[int]]:
        """Device indices per channel, ascending."""
        return [list(np.nonzero(self.chi[:, m])[0]) for m in range(self.chi.shape[1])]

    @property
    def n_scheduled(self) -> int:
        return int(self.chi.sum())

    def validate(self, cfg: NetworkConfig, partial: bool = False) -> None:
        """partial=True skips the scheduled-count check (RL policies may
        legally leave devices unserved)."""
        k_n, m_n = self.chi.shape
        if (k_n, m_n) != (cfg.k, cfg.m):
            raise AssignmentError(f"chi shape {self.chi.shape} != ({cfg.k}, {cfg.m})")
        per_device = self.chi.sum(axis=1)
        if np.any(per_device > 1):
            raise AssignmentError("device assigned to more than one channel")
        per_channel = self.chi.sum(axis=0)
        if np.any(per_channel > cfg.n_sf):
            raise AssignmentError("channel holds more devices than SFs")
        if not partial and self.n_scheduled != min(cfg.k, cfg.m * cfg.n_sf):
            raise AssignmentError(
                f"scheduled {self.n_scheduled}, expected {min(cfg.k, cfg.m * cfg.n_sf)}"
            )
        scheduled = per_device > 0
        if np.any(~np.isin(self.alpha[scheduled], cfg.sf_set)):
            raise AssignmentError("scheduled device carries SF outside the SF set")
        for members in self.psi:
            sfs = [int(self.alpha[k]) for k in members]
            if len(set(sfs)) != len(sfs):
                raise AssignmentError("duplicate SF within a channel")


def objective(assignment: Assignment, realization: ChannelRealization,
              cfg: NetworkConfig) -> float:
    """Assignment-stage cost: sum over scheduled devices of
    gamma_th sigma_m^2 / |g|^2 * 2^alpha. Frame energy is E_c + T * objective."""
    k_idx, m_idx = np.nonzero(assignment.chi)
    if k_idx.size == 0:
        return 0.0
    gains = realization.gain[k_idx, m_idx]
    if np.any(gains == 0.0):
        raise AssignmentError("scheduled device with zero gain")
    sigma2 = np.asarray(cfg.sigma2_w)[m_idx]
    return float(np.dot(cfg.gamma_th * sigma2 / gains,
                        2.0 ** np.asarray(assignment.alpha)[k_idx]))


def theorem1_sf_order(v, sf_set) -> list[int]:
    """Energy-optimal SFs for one channel: the largest coefficient v gets the
    smallest SF, descending coefficients get ascending SFs. With fewer
    devices than SFs only the cheapest len(v) factors are used.

    Returns the SF per element of v, in input order. Ties keep input order.
    """
    v = list(v)
    if len(v) > len(sf_set):
        raise AssignmentError(f"{len(v)} coefficients but only {len(sf_set)} SFs")
    if any(c <= 0 for c in v):
        raise AssignmentError("coefficients must be positive")
    order = sorted(range(len(v)), key=lambda i: (-v[i], i))
    out = [0] * len(v)
    for rank, idx in enumerate(order):
        out[idx] = sf_set[rank]
    return out


def _sf_cost(v, sfs) -> float:
    """Canonical summation order so equal assignments compare bit-exactly."""
    return float(sum(c * 2.0**sf for c, sf in zip(v, sfs)))


def _channel_cost(v, sf_set) -> float:
    return _sf_cost(v, theorem1_sf_order(v, sf_set))


def enumeration_count(k: int, m: int, n: int) -> int:
    """Number of candidate schedules the exhaustive search walks through:
    device subsets times capacity-respecting channel placements."""
    n_sched = min(k, m * n)
    # ways[j] = placements of j labeled devices into the channels seen so far
    ways = [0] * (n_sched + 1)
    ways[0] = 1
    for _ in range(m):
        nxt = [0] * (n_sched + 1)
        for j in range(n_sched + 1):
            if ways[j] == 0:
                continue
            for load in range(0, min(n, n_sched - j) + 1):
                nxt[j + load] += ways[j] * math.comb(j + load, load)
        ways = nxt
    return math.comb(k, n_sched) * ways[n_sched]


def brute_force_optimal(realization: ChannelRealization, cfg: NetworkConfig,
                        max_candidates: int = 100_000) -> Assignment:
    """Exhaustive minimum of the per-frame cost over all valid schedules.

    Per channel the SF order is separable and settled by theorem1_sf_order,
    so only device subsets and channel partitions are enumerated.
    """
    count = enumeration_count(cfg.k, cfg.m, cfg.n_sf)
    if count > max_candidates:
        raise AssignmentError(
            f"instance too large for exhaustive search: {count} candidates "
            f"exceed the cap of {max_candidates}"
        )
    gains = realization.gain
    if np.any(gains == 0.0):
        raise AssignmentError("scheduled device with zero gain")
    v_all = cfg.gamma_th * np.asarray(cfg.sigma2_w)[None, :] / gains  # (K, M)
    n_sched = min(cfg.k, cfg.m * cfg.n_sf)

    best_cost = math.inf
    best_partition = None

    def extend(remaining: tuple[int, ...], channel: int, partition, cost):
        nonlocal best_cost, best_partition
        if cost >= best_cost:
            return
        if channel == cfg.m - 1:
            if len(remaining) > cfg.n_sf:
                return
            members = list(remaining)
            total = cost + _channel_cost([v_all[k, channel] for k in members], cfg.sf_set)
            if total < best_cost:
                best_cost = total
                best_partition = partition + [members]
            return
        max_here = min(cfg.n_sf, len(remaining))
        rest_capacity = (cfg.m - 1 - channel) * cfg.n_sf
        min_here = max(0, len(remaining) - rest_capacity)
        for size in range(min_here, max_here + 1):
            for members in itertools.combinations(remaining, size):
                left = tuple(d for d in remaining if d not in members)
                extend(left, channel + 1,
                       partition + [list(members)],
                       cost + _channel_cost([v_all[k, channel] for k in members],
                                            cfg.sf_set))

    for subset in itertools.combinations(range(cfg.k), n_sched):
        extend(subset, 0, [], 0.0)

    chi = np.zeros((cfg.k, cfg.m), dtype=bool)
    alpha = np.zeros(cfg.k, dtype=int)
    for m, members in enumerate(best_partition):
        sfs = theorem1_sf_order([v_all[k, m] for k in members], cfg.sf_set)
        for k, sf in zip(members, sfs):
            chi[k, m] = True
            alpha[k] = sf
    return Assignment(chi=chi, alpha=alpha, frame_index=realization.frame_index)


def _apply_sf_step(chi: np.ndarray, realization: ChannelRealization,
                   cfg: NetworkConfig) -> np.ndarray:
    """Shared SF stage of both heuristics: per channel, order members by
    v = sigma^2 / |g|^2 and hand out SFs by theorem1_sf_order."""
    alpha = np.zeros(cfg.k, dtype=int)
    for m in range(cfg.m):
        members = np.nonzero(chi[:, m])[0]
        if members.size == 0:
            continue
        gains = realization.gain[members, m]
        if np.any(gains == 0.0):
            raise AssignmentError("scheduled device with zero gain")
        v = cfg.sigma2_w[m] / gains
        for k, sf in zip(members, theorem1_sf_order(v, cfg.sf_set)):
            alpha[k] = sf
    return alpha


def hurma_frame(realization: ChannelRealization, cfg: NetworkConfig) -> Assignment:
    """Greedy scheme for uncorrelated channels.

    Repeatedly grab the globally strongest remaining |g| entry; assign the
    device if its channel has a free SF slot, otherwise retire the channel
    column. Ties break toward the lowest device, then channel, index.
    """
    v = np.abs(realization.g).copy()
    chi = np.zeros((cfg.k, cfg.m), dtype=bool)
    loads = np.zeros(cfg.m, dtype=int)
    target = min(cfg.k, cfg.m * cfg.n_sf)
    while chi.sum() < target:
        flat = int(np.argmax(v))
        k, m = divmod(flat, cfg.m)
        if v[k, m] <= 0.0:
            break  # nothing assignable remains
        if loads[m] < cfg.n_sf:
            chi[k, m] = True
            loads[m] += 1
            v[k, :] = 0.0
        else:
            v[:, m] = 0.0
    alpha = _apply_sf_step(chi, realization, cfg)
    return Assignment(chi=chi, alpha=alpha, frame_index=realization.frame_index)


def hcrma_frame(realization: ChannelRealization, topo: Topology,
                cfg: NetworkConfig) -> Assignment:
    """Greedy scheme for time-correlated channels.

    The min(K, M*N) most distant devices are selected; walking from the most
    distant inwards, each picks its strongest still-open channel. A channel
    closes once it holds N devices. The SF stage matches hurma_frame.
    """
    n_sched = min(cfg.k, cfg.m * cfg.n_sf)
    # ascending path-loss sort == ascending distance; most distant last
    order = sorted(range(cfg.k), key=lambda k: (topo.distance_m[k], k))
    selected = order[cfg.k - n_sched:]
    chi = np.zeros((cfg.k, cfg.m), dtype=bool)
    loads = np.zeros(cfg.m, dtype=int)
    for k in reversed(selected):
        open_ch = loads < cfg.n_sf
        row = np.where(open_ch, np.abs(realization.g[k]), -1.0)
        m = int(np.argmax(row))
        chi[k, m] = True
        loads[m] += 1
    alpha = _apply_sf_step(chi, realization, cfg)
    return Assignment(chi=chi, alpha=alpha, frame_index=realization.frame_index)


def random_assignment(rng: np.random.Generator, cfg: NetworkConfig,
                      frame_index: int = 0) -> Assignment:
    """Uniform baseline: random device subset, random channel slots, random
    distinct SFs inside each channel."""
    n_sched = min(cfg.k, cfg.m * cfg.n_sf)
    devices = rng.choice(cfg.k, size=n_sched, replace=False)
    slots = rng.permutation(np.repeat(np.arange(cfg.m), cfg.n_sf))[:n_sched]
    chi = np.zeros((cfg.k, cfg.m), dtype=bool)
    alpha = np.zeros(cfg.k, dtype=int)
    sf_pool = np.asarray(cfg.sf_set)
    for m in range(cfg.m):
        members = devices[slots == m]
        if members.size == 0:
            continue
        sfs = rng.choice(sf_pool, size=members.size, replace=False)
        for k, sf in zip(members, sfs):
            chi[k, m] = True
            alpha[k] = int(sf)
    return Assignment(chi=chi, alpha=alpha, frame_index=frame_index)


def round_robin(frame_index: int, cfg: NetworkConfig) -> Assignment:
    """Deterministic rotation: device (i*MN + j) mod K fills slot j, channels
    in order, SFs in SF-set order within each channel."""
    n_sched = min(cfg.k, cfg.m * cfg.n_sf)
    chi = np.zeros((cfg.k, cfg.m), dtype=bool)
    alpha = np.zeros(cfg.k, dtype=int)
    for j in range(n_sched):
        k = (frame_index * cfg.m * cfg.n_sf + j) % cfg.k
        m = j // cfg.n_sf
        chi[k, m] = True
        alpha[k] = cfg.sf_set[j % cfg.n_sf]
    return Assignment(chi=chi, alpha=alpha, frame_index=frame_index)


def dump_assignment_csv(path: str, assignment: Assignment,
                        realization: ChannelRealization, cfg: NetworkConfig) -> None:
    """Rows of (k, m, sf, p_k) for the scheduled devices."""
    from .channel import required_power

    with open(path, "w", encoding="utf-8") as fh:
        fh.write("k,m,sf,p_w\n")
        for k, m in zip(*np.nonzero(assignment.chi)):
            p = required_power(cfg.gamma_th, cfg.sigma2_w[m], realization.g[k, m])
            fh.write(f"{k},{m},{assignment.alpha[k]},{format(p, '.12g')}\n")
