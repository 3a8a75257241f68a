"""Network scenarios: geometry, channel gains and physical constants.

All powers are stored in mW, times as fractions of a unit block and energies
in mW per block. dBm values are converted once, when a configuration is read.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import yaml

# Nodes closer than this to the relay are redrawn (d^-2 blows up at 0).
MIN_RELAY_DISTANCE = 1e-6

FADING_MODELS = ("rayleigh", "deterministic")


def dbm_to_mw(level: float) -> float:
    """Convert a power level in dBm to mW."""
    if not math.isfinite(level):
        raise ValueError(f"power level must be finite, got {level!r}")
    return 10.0 ** (level / 10.0)


def mean_path_gain(distance):
    """Average power gain ``distance**-2`` of the path-loss model.

    Accepts scalars or arrays; every distance must be strictly positive.
    """
    d = np.asarray(distance, dtype=float)
    if np.any(~(d > 0)):
        raise ValueError("distance must be strictly positive")
    gain = d ** -2.0
    return float(gain) if gain.ndim == 0 else gain


@dataclass(frozen=True)
class PhysicalParams:
    noise_power: float = dbm_to_mw(-95.0)
    conversion_efficiency: float = 0.5
    relay_fixed_cost: float = 0.1
    min_pair_time_fraction: float = 0.05
    source_power_cap: float = 10.0
    relay_power_cap: float = 10.0
    block_time: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.conversion_efficiency < 1.0:
            raise ValueError("conversion_efficiency must lie in (0, 1)")
        if not self.noise_power > 0:
            raise ValueError("noise_power must be positive")
        if not (self.source_power_cap > 0 and self.relay_power_cap > 0):
            raise ValueError("power caps must be positive")
        if not self.relay_fixed_cost >= 0:
            raise ValueError("relay_fixed_cost must be non-negative")
        if not self.min_pair_time_fraction > 0:
            raise ValueError("min_pair_time_fraction must be positive")
        if self.block_time != 1.0:
            raise ValueError("block_time is normalized to 1")

    def check_pairs(self, num_pairs: int) -> None:
        """Raise if ``num_pairs`` pairs cannot all meet the per-pair time floor."""
        if num_pairs * self.min_pair_time_fraction >= 1.0:
            raise ValueError(
                f"{num_pairs} pairs x min_pair_time_fraction="
                f"{self.min_pair_time_fraction} leaves no time for harvesting"
            )


@dataclass(frozen=True)
class NetworkInstance:
    """One realisation of the relay network.

    Gains are dimensionless channel power gains: ``source_relay_gains[i]`` is
    |h_i|^2 (source i to relay) and ``relay_destination_gains[i]`` is |g_i|^2.
    """

    source_relay_gains: np.ndarray
    relay_destination_gains: np.ndarray
    params: PhysicalParams = field(default_factory=PhysicalParams)
    source_positions: np.ndarray | None = None
    destination_positions: np.ndarray | None = None
    relay_position: np.ndarray | None = None
    seed: int | None = None

    def __post_init__(self):
        h = np.array(self.source_relay_gains, dtype=float).reshape(-1)
        g = np.array(self.relay_destination_gains, dtype=float).reshape(-1)
        if h.shape != g.shape or h.size == 0:
            raise ValueError("gain sequences must be non-empty and of equal length")
        for name, arr in (("source_relay_gains", h), ("relay_destination_gains", g)):
            if not np.all(np.isfinite(arr) & (arr > 0)):
                raise ValueError(f"{name} must be strictly positive and finite")
        h.setflags(write=False)
        g.setflags(write=False)
        object.__setattr__(self, "source_relay_gains", h)
        object.__setattr__(self, "relay_destination_gains", g)
        for name in ("source_positions", "destination_positions", "relay_position"):
            value = getattr(self, name)
            if value is not None:
                arr = np.array(value, dtype=float)
                arr.setflags(write=False)
                object.__setattr__(self, name, arr)
        self.params.check_pairs(h.size)

    @property
    def num_pairs(self) -> int:
        return int(self.source_relay_gains.size)

    def with_params(self, **changes) -> "NetworkInstance":
        """Copy of this instance with some physical parameters replaced."""
        return replace(self, params=replace(self.params, **changes))

    def to_dict(self) -> dict[str, Any]:
        def plain(a):
            return None if a is None else np.asarray(a).tolist()

        return {
            "num_pairs": self.num_pairs,
            "seed": self.seed,
            "source_positions": plain(self.source_positions),
            "destination_positions": plain(self.destination_positions),
            "relay_position": plain(self.relay_position),
            "source_relay_gains": plain(self.source_relay_gains),
            "relay_destination_gains": plain(self.relay_destination_gains),
            "params": asdict(self.params),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "NetworkInstance":
        inst = cls(
            source_relay_gains=data["source_relay_gains"],
            relay_destination_gains=data["relay_destination_gains"],
            params=PhysicalParams(**data["params"]),
            source_positions=data.get("source_positions"),
            destination_positions=data.get("destination_positions"),
            relay_position=data.get("relay_position"),
            seed=data.get("seed"),
        )
        if "num_pairs" in data and data["num_pairs"] != inst.num_pairs:
            raise ValueError("num_pairs does not match the gain vectors")
        return inst

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "NetworkInstance":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class ScenarioConfig:
    region_length: float = 20.0
    region_width: float = 20.0
    num_pairs: int = 7
    fading_model: str = "rayleigh"
    params: PhysicalParams = field(default_factory=PhysicalParams)

    def __post_init__(self):
        if not (self.region_length > 0 and self.region_width > 0):
            raise ValueError("region dimensions must be positive")
        if self.num_pairs < 1:
            raise ValueError("num_pairs must be at least 1")
        if self.fading_model not in FADING_MODELS:
            raise ValueError(f"fading_model must be one of {FADING_MODELS}")
        self.params.check_pairs(self.num_pairs)


def _draw_away_from(rng, low, high, point, n):
    out = np.empty((n, 2))
    for k in range(n):
        while True:
            p = rng.uniform(low, high)
            if np.hypot(*(p - point)) > MIN_RELAY_DISTANCE:
                out[k] = p
                break
    return out


def generate_scenario(config: ScenarioConfig, seed: int) -> NetworkInstance:
    """Draw a network realisation; a pure function of ``(config, seed)``.

    Sources are uniform in the lower-left quarter of the region, destinations
    in the upper-right quarter and the relay sits at the centre. Each channel
    power gain is ``distance**-2`` times a unit-mean exponential draw under
    Rayleigh fading, or times 1 for deterministic channels.
    """
    rng = np.random.default_rng(seed)
    L, W, n = config.region_length, config.region_width, config.num_pairs
    relay = np.array([L / 2, W / 2])
    sources = _draw_away_from(rng, [0.0, 0.0], [L / 2, W / 2], relay, n)
    dests = _draw_away_from(rng, [L / 2, W / 2], [L, W], relay, n)
    h = mean_path_gain(np.hypot(*(sources - relay).T))
    g = mean_path_gain(np.hypot(*(dests - relay).T))
    if config.fading_model == "rayleigh":
        h = h * rng.exponential(1.0, n)
        g = g * rng.exponential(1.0, n)
    return NetworkInstance(
        source_relay_gains=np.atleast_1d(h),
        relay_destination_gains=np.atleast_1d(g),
        params=config.params,
        source_positions=sources,
        destination_positions=dests,
        relay_position=relay,
        seed=int(seed),
    )


# Configuration-file keys and the units they are given in.
_PARAM_KEYS = {
    "source_power_cap_mw": "source_power_cap",
    "relay_power_cap_mw": "relay_power_cap",
    "relay_fixed_cost_mw": "relay_fixed_cost",
    "conversion_efficiency": "conversion_efficiency",
    "min_pair_time_fraction": "min_pair_time_fraction",
}


def scenario_from_mapping(data: Mapping[str, Any]) -> ScenarioConfig:
    """Build a ScenarioConfig from config-file keys (noise given in dBm)."""
    unknown = set(data) - set(_PARAM_KEYS) - {
        "region_length", "region_width", "num_pairs", "fading_model",
        "noise_dbm", "seed", "epsilon",
    }
    if unknown:
        raise ValueError(f"unknown configuration keys: {sorted(unknown)}")
    kwargs = {v: float(data[k]) for k, v in _PARAM_KEYS.items() if k in data}
    if "noise_dbm" in data:
        kwargs["noise_power"] = dbm_to_mw(float(data["noise_dbm"]))
    defaults = ScenarioConfig()
    return ScenarioConfig(
        region_length=float(data.get("region_length", defaults.region_length)),
        region_width=float(data.get("region_width", defaults.region_width)),
        num_pairs=int(data.get("num_pairs", defaults.num_pairs)),
        fading_model=str(data.get("fading_model", defaults.fading_model)),
        params=PhysicalParams(**kwargs),
    )


def load_config(path: str | Path) -> dict[str, Any]:
    """Read a YAML configuration file.

    Returns a dict with ``scenario`` (ScenarioConfig), ``seed`` and
    ``epsilon`` (the inner-loop stopping tolerance, ``None`` if absent).
    """
    data = yaml.safe_load(Path(path).read_text()) or {}
    return {
        "scenario": scenario_from_mapping(data),
        "seed": int(data.get("seed", 0)),
        "epsilon": float(data["epsilon"]) if "epsilon" in data else None,
    }
