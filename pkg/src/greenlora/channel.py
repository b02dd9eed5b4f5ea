"""Topology, per-frame channel coefficients, and link-budget arithmetic.

Two fading generators are provided: i.i.d. Rayleigh draws for the
uncorrelated scenario and a two-state good/bad Markov process for the
time-correlated one. All randomness flows through an explicit
numpy Generator so trials are reproducible and parallelizable.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .config import NetworkConfig


class LinkError(ValueError):
    """Physically impossible link request (e.g. scheduling a dead channel)."""


@dataclass(frozen=True)
class Topology:
    """Static device placement. beta is the large-scale power gain d^-eta."""

    distance_m: np.ndarray   # (K,)
    beta: np.ndarray         # (K,) linear power gain

    def __post_init__(self):
        if np.any(self.beta <= 0):
            raise LinkError("beta must be strictly positive")


@dataclass(frozen=True)
class ChannelRealization:
    """Complex coefficients g[k, m] for a single frame."""

    g: np.ndarray            # (K, M) complex
    frame_index: int = 0

    @cached_property
    def gain(self) -> np.ndarray:
        """|g|^2 per device/channel pair."""
        return np.abs(self.g) ** 2


def sample_topology(cfg: NetworkConfig, rng: np.random.Generator) -> Topology:
    """Place K devices area-uniformly on the disk of radius cell_radius_m."""
    d = cfg.cell_radius_m * np.sqrt(rng.random(cfg.k))
    beta = d ** (-cfg.path_loss_exponent)
    return Topology(distance_m=d, beta=beta)


def sample_iid_channels(
    topo: Topology, cfg: NetworkConfig, rng: np.random.Generator, frame_index: int = 0
) -> ChannelRealization:
    """Quasi-static Rayleigh draw: h ~ CN(0, 1), g = sqrt(beta) * h."""
    shape = (cfg.k, cfg.m)
    h = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    g = np.sqrt(topo.beta)[:, None] * h
    return ChannelRealization(g=g, frame_index=frame_index)


@dataclass
class GilbertElliottProcess:
    """Per-link two-state Markov fading: True = good state.

    lambda1 = P(good | good), lambda0 = P(good | bad). The emitted
    small-scale coefficient is the real square root of the state gain.
    """

    state: np.ndarray        # (K, M) bool
    lambda1: float
    lambda0: float
    gain_good: float
    gain_bad: float
    frame_index: int = 0

    @classmethod
    def from_config(
        cls, cfg: NetworkConfig, rng: np.random.Generator, init: str = "stationary"
    ) -> "GilbertElliottProcess":
        shape = (cfg.k, cfg.m)
        if init == "good":
            state = np.ones(shape, dtype=bool)
        elif init == "bad":
            state = np.zeros(shape, dtype=bool)
        elif init == "stationary":
            p_good = stationary_good_fraction(cfg.ge_lambda1, cfg.ge_lambda0)
            state = rng.random(shape) < p_good
        else:
            raise ValueError(f"unknown init {init!r}")
        return cls(state=state, lambda1=cfg.ge_lambda1, lambda0=cfg.ge_lambda0,
                   gain_good=cfg.ge_gain_good, gain_bad=cfg.ge_gain_bad)


def stationary_good_fraction(lambda1: float, lambda0: float) -> float:
    """Long-run fraction of time in the good state: lambda0 / (1 - lambda1 + lambda0)."""
    denom = 1.0 - lambda1 + lambda0
    if denom == 0.0:  # lambda1 = 1, lambda0 = 0: both states absorbing
        return 1.0
    return lambda0 / denom


def step_gilbert_elliott(
    proc: GilbertElliottProcess, topo: Topology, rng: np.random.Generator
) -> ChannelRealization:
    """Advance every link one frame and emit the resulting coefficients."""
    u = rng.random(proc.state.shape)
    proc.state = np.where(proc.state, u < proc.lambda1, u < proc.lambda0)
    proc.frame_index += 1
    h = np.sqrt(np.where(proc.state, proc.gain_good, proc.gain_bad))
    g = np.sqrt(topo.beta)[:, None] * h
    return ChannelRealization(g=g.astype(complex), frame_index=proc.frame_index)


# -- link budget ------------------------------------------------------------

def snr(p_w: float, g: complex, sigma2_w: float) -> float:
    """Received SNR p |g|^2 / sigma^2 (linear)."""
    return p_w * abs(g) ** 2 / sigma2_w


def required_power(gamma_th: float, sigma2_w: float, g: complex) -> float:
    """Transmit power that meets the SNR target on coefficient g."""
    gain = abs(g) ** 2
    if gain == 0.0:
        raise LinkError("unservable device: zero channel gain")
    return gamma_th * sigma2_w / gain


def shannon_rate(p_w: float, g: complex, sigma2_w: float, bandwidth_hz: float) -> float:
    """Reporting-only capacity bound B log2(1 + SNR)."""
    return bandwidth_hz * np.log2(1.0 + snr(p_w, g, sigma2_w))


def frame_energy(assignment, realization: ChannelRealization, cfg: NetworkConfig) -> float:
    """Energy to serve one frame: circuit energy plus per-device airtime energy.

    Each scheduled device k on channel m at spreading factor alpha costs
    required_power * 2^alpha * t_sample.
    """
    k_idx, m_idx = np.nonzero(assignment.chi)
    if k_idx.size == 0:
        return cfg.e_c_j
    gains = realization.gain[k_idx, m_idx]
    if np.any(gains == 0.0):
        raise LinkError("unservable device: zero channel gain")
    sigma2 = np.asarray(cfg.sigma2_w)[m_idx]
    p = cfg.gamma_th * sigma2 / gains
    airtime = 2.0 ** np.asarray(assignment.alpha)[k_idx] * cfg.t_sample_s
    return cfg.e_c_j + float(np.dot(p, airtime))


def dump_realizations_csv(path: str, realizations: list[ChannelRealization]) -> None:
    """Write realizations as rows of (frame, k, m, re, im)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("frame,k,m,re,im\n")
        for real in realizations:
            k_n, m_n = real.g.shape
            for k in range(k_n):
                for m in range(m_n):
                    fh.write(
                        f"{real.frame_index},{k},{m},"
                        f"{format(real.g[k, m].real, '.17g')},"
                        f"{format(real.g[k, m].imag, '.17g')}\n"
                    )


def load_realizations_csv(path: str) -> list[ChannelRealization]:
    """Inverse of dump_realizations_csv."""
    rows = np.genfromtxt(path, delimiter=",", names=True)
    rows = np.atleast_1d(rows)
    frames = np.unique(rows["frame"]).astype(int)
    out = []
    for f in frames:
        sel = rows[rows["frame"] == f]
        k_n = int(sel["k"].max()) + 1
        m_n = int(sel["m"].max()) + 1
        g = np.zeros((k_n, m_n), dtype=complex)
        g[sel["k"].astype(int), sel["m"].astype(int)] = sel["re"] + 1j * sel["im"]
        out.append(ChannelRealization(g=g, frame_index=int(f)))
    return out
