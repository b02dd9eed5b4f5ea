"""Scenario constants for the downlink LoRa simulator.

Every tool in the package is driven by a single immutable NetworkConfig
parsed from a plain ``key = value`` text file (``#`` starts a comment).
Derived quantities (noise power, sample time, per-channel SF capacity)
are exposed as properties so they can never drift from the stored fields.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

CHIP_COUNT = 2**12  # samples per frame slot; an SF-12 symbol fills it
SF_RANGE = range(7, 13)


class ConfigError(ValueError):
    """Malformed or out-of-range configuration input."""


@dataclass(frozen=True)
class NetworkConfig:
    """All scenario constants. Immutable; safe to share across trials."""

    k: int                      # device count
    m: int                      # channel count
    l: int                      # frames per trajectory
    b_max_j: float              # battery capacity (J)
    path_loss_exponent: float
    noise_psd_dbm_hz: float
    circuit_power_dbm: float
    cell_radius_m: float
    sf_set: tuple[int, ...] = (7, 8, 9, 10, 11, 12)
    gamma_th_db: float = 0.0    # SNR target; stored in dB, used linear
    t_out_s: float = 1.0        # frame duration (s)
    bandwidth_hz: tuple[float, ...] = ()   # per channel; empty = 125 kHz each
    rng_seed: int = 1
    ge_lambda1: float = 0.9     # P(Good -> Good)
    ge_lambda0: float = 0.3     # P(Bad -> Good)
    ge_gain_good: float = 1.0
    ge_gain_bad: float = 0.1
    harvest_levels_j: tuple[float, ...] = (0.0, 2.0, 4.0, 6.0, 8.0)

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError("k out of range: device count must be >= 1")
        if self.m < 1:
            raise ConfigError("m out of range: channel count must be >= 1")
        if self.l < 1:
            raise ConfigError("l out of range: frame count must be >= 1")
        if not self.sf_set:
            raise ConfigError("sf_set must be nonempty")
        if any(sf not in SF_RANGE for sf in self.sf_set):
            raise ConfigError(f"sf_set out of range: {self.sf_set} not within 7..12")
        if any(a >= b for a, b in zip(self.sf_set, self.sf_set[1:])):
            raise ConfigError(f"sf_set not strictly increasing: {self.sf_set}")
        if self.b_max_j < 0:
            raise ConfigError("b_max_j out of range: must be >= 0")
        if self.t_out_s <= 0:
            raise ConfigError("t_out_s out of range: must be > 0")
        if not self.bandwidth_hz:
            object.__setattr__(self, "bandwidth_hz", (125e3,) * self.m)
        if len(self.bandwidth_hz) != self.m:
            raise ConfigError(
                f"bandwidth_hz needs 1 or {self.m} values, got {len(self.bandwidth_hz)}"
            )
        if any(b <= 0 for b in self.bandwidth_hz):
            raise ConfigError("bandwidth_hz out of range: must be > 0")
        if self.path_loss_exponent <= 0:
            raise ConfigError("path_loss_exponent out of range: must be > 0")
        if self.cell_radius_m <= 0:
            raise ConfigError("cell_radius_m out of range: must be > 0")
        for name in ("ge_lambda1", "ge_lambda0"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} out of range: must be within [0, 1]")
        if not self.ge_gain_good > self.ge_gain_bad > 0:
            raise ConfigError("ge gains out of range: need ge_gain_good > ge_gain_bad > 0")
        if any(w < 0 for w in self.harvest_levels_j):
            raise ConfigError("harvest_levels_j out of range: must be >= 0")

    # -- derived quantities ------------------------------------------------

    @property
    def n_sf(self) -> int:
        """Per-channel capacity: number of distinct SFs available."""
        return len(self.sf_set)

    @property
    def t_sample_s(self) -> float:
        """Duration of one chirp sample: frame time split into 2^12 chips."""
        return self.t_out_s / CHIP_COUNT

    @property
    def sigma2_w(self) -> tuple[float, ...]:
        """Per-channel noise power 10^(psd/10) * bandwidth."""
        psd = 10.0 ** (self.noise_psd_dbm_hz / 10.0)
        return tuple(psd * b for b in self.bandwidth_hz)

    @property
    def e_c_j(self) -> float:
        """Circuit energy per frame: dBm converted to W, held for t_out."""
        return 10.0 ** ((self.circuit_power_dbm - 30.0) / 10.0) * self.t_out_s

    @property
    def gamma_th(self) -> float:
        """SNR target in linear scale."""
        return 10.0 ** (self.gamma_th_db / 10.0)


_REQUIRED = ("k", "m", "l", "b_max_j", "path_loss_exponent", "noise_psd_dbm_hz",
             "circuit_power_dbm", "cell_radius_m")
_INT_KEYS = ("k", "m", "l", "rng_seed")
_TUPLE_INT_KEYS = ("sf_set",)
_TUPLE_FLOAT_KEYS = ("bandwidth_hz", "harvest_levels_j")


def _parse_value(key: str, raw: str):
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _TUPLE_INT_KEYS:
            return tuple(int(v) for v in raw.split(","))
        if key in _TUPLE_FLOAT_KEYS:
            return tuple(float(v) for v in raw.split(","))
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc


def parse_kv(text: str) -> dict:
    """Parse ``key = value`` lines into a raw string dict. Duplicates are errors."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, raw = line.partition("=")
        key = key.strip().lower()
        if key in out:
            raise ConfigError(f"duplicate key: {key}")
        out[key] = raw.strip()
    return out


def from_dict(raw: dict[str, str]) -> NetworkConfig:
    known = {f.name for f in fields(NetworkConfig)}
    for key in raw:
        if key not in known:
            raise ConfigError(f"unknown key: {key}")
    for key in _REQUIRED:
        if key not in raw:
            raise ConfigError(f"missing key: {key}")
    kwargs = {key: _parse_value(key, val) for key, val in raw.items()}
    if "bandwidth_hz" in kwargs and len(kwargs["bandwidth_hz"]) == 1:
        kwargs["bandwidth_hz"] = kwargs["bandwidth_hz"] * kwargs["m"]
    return NetworkConfig(**kwargs)


def loads(text: str, overrides: dict[str, str] | None = None) -> NetworkConfig:
    """Build a config from a key-value document, with optional CLI overrides."""
    raw = parse_kv(text)
    if overrides:
        for key, val in overrides.items():
            raw[key.strip().lower()] = str(val)
    return from_dict(raw)


def load(path: str, overrides: dict[str, str] | None = None) -> NetworkConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return loads(fh.read(), overrides)


def parse_overrides(pairs: list[str]) -> dict[str, str]:
    """Turn repeated ``--set key=value`` arguments into an override dict."""
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"override must look like key=value, got {pair!r}")
        key, _, val = pair.partition("=")
        out[key.strip().lower()] = val.strip()
    return out


def serialize(cfg: NetworkConfig) -> str:
    """Render a config back to the key-value format accepted by loads()."""
    lines = []
    for f in fields(NetworkConfig):
        val = getattr(cfg, f.name)
        if isinstance(val, tuple):
            rendered = ",".join(format(v, ".12g") for v in val)
        elif isinstance(val, int):
            rendered = str(val)
        else:
            rendered = format(val, ".12g")
        lines.append(f"{f.name} = {rendered}")
    return "\n".join(lines) + "\n"


def table_defaults() -> NetworkConfig:
    """The stock large-network scenario used by the sweep experiments."""
    return NetworkConfig(
        k=35, m=5, l=50, b_max_j=200.0,
        path_loss_exponent=3.7, noise_psd_dbm_hz=-174.0,
        circuit_power_dbm=30.0, cell_radius_m=500.0,
    )


def small_oracle_defaults() -> NetworkConfig:
    """Small scenario where the exhaustive assignment search is tractable."""
    return NetworkConfig(
        k=6, m=2, l=50, b_max_j=10.0,
        path_loss_exponent=3.7, noise_psd_dbm_hz=-174.0,
        circuit_power_dbm=30.0, cell_radius_m=500.0,
        sf_set=(7, 8, 9),
    )
