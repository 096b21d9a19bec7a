"""Domain types and validated configuration for the nanonetwork simulator.

All quantities are SI unless a field name says otherwise (dB fields carry
power ratios as 10*log10). Layers are 0-based everywhere in code; reports
and schedule weights use the 1-based presentation number (innermost = 1).
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from typing import Iterable, Mapping


class InvalidConfig(ValueError):
    """Raised on the first violated configuration invariant.

    ``field`` names the offending key so callers (and the CLI) can report
    machine-readable errors.
    """

    def __init__(self, field_name: str, reason: str):
        super().__init__(f"{field_name}: {reason}")
        self.field = field_name
        self.reason = reason


class Role(Enum):
    NC = "nc"          # nanocontroller (sink)
    NCC = "ncc"        # cluster head
    NCM = "ncm"        # cluster member


class Mode(Enum):
    HARVESTING = "harvesting"
    TRANSMITTING = "transmitting"
    IDLE = "idle"


@dataclass(frozen=True)
class Position:
    """Point in the deployment volume, meters, relative to the sink at the origin."""
    x: float
    y: float
    z: float

    def __post_init__(self):
        for axis in (self.x, self.y, self.z):
            if not math.isfinite(axis):
                raise ValueError("position coordinates must be finite")

    def distance_to(self, other: "Position") -> float:
        return math.sqrt(
            (self.x - other.x) ** 2 + (self.y - other.y) ** 2 + (self.z - other.z) ** 2
        )


@dataclass
class NodeState:
    """Mutable per-node simulation state."""
    node_id: int
    position: Position
    role: Role = Role.NCM
    layer: int | None = None          # 0-based; None for the sink
    cluster: int | None = None
    residual_energy: float = 0.0      # J, in [0, e_nps_max]
    energy_state: int = 0             # chain state index u in [0, beta]
    mode: Mode = Mode.HARVESTING


@dataclass(frozen=True)
class ChannelParams:
    """Terahertz link-budget parameters."""
    frequency_hz: float = 1.0e12
    absorption_per_m: float = 100.0       # molecular absorption coefficient K(f)
    path_loss_exponent: float = 3.0       # >= 2
    shadow_sigma_db: float = 1.0          # lognormal shadowing std, dB
    antenna_gain: float = 1.0             # combined tx*rx gain, linear
    noise_power_w: float = 1.0e-12
    sinr_threshold_db: float = 12.0
    propagation_speed_m_s: float = 3.0e8


@dataclass(frozen=True)
class EnergyParams:
    """Piezoelectric harvester and storage parameters."""
    capacitance_f: float = 9.0e-9         # storage capacitance
    generator_voltage_v: float = 0.42     # harvester open-circuit limit
    charge_per_cycle_c: float = 6.0e-12   # charge moved per vibration cycle
    vibration_period_s: float = 0.02      # one harvesting cycle
    e_min_j: float = 0.0                  # energy floor of the chain
    e_tx_j: float = 100.0e-12             # energy quantum per packet transmission


# Sentinel meaning "fill this in during validation".
DERIVED = None


@dataclass(frozen=True)
class SimConfig:
    """Raw simulation configuration; run through validate_config before use."""
    node_count: int = 100
    tx_range_r: float = 0.010             # m, full transmission range r
    deployment_radius: float = 0.010      # m
    deployment_shape: str = "sphere"      # "sphere" or "cube" (cube side = 2*radius)
    layer_count: int | None = DERIVED     # ceil(2*deployment_radius / tx_range_r)
    pulse_energy: float = 100.0e-12       # J per transmitted pulse
    pulse_duration: float = 100.0e-15     # s
    pulse_interval: float = 10.0e-12      # s, one bit occupies one pulse slot
    packet_bits: int = 256
    message_interval: float = 0.1         # s between transmission cycles
    ttl: int = 1000                       # hop budget per packet
    adtn_probability: float = 1.0         # chance an NCM has data in a cycle
    initial_energy_fraction: float | str = "random"  # "random" or fixed fraction of e_nps_max
    tx_power: float = 2.0e-14             # W, reference power for capacity sweeps
    tx_margin_db: float = 3.0             # link margin above the SINR threshold
    bandwidth: float = 1.0e9              # Hz, per sub-channel
    slot_quantum: float = 1.0e-12         # s, TDMA slot granularity
    cluster_range_factor: float = 0.5     # advertisement range as a fraction of tx_range_r
    relay_rx_energy_per_bit: float | None = DERIVED  # J/bit decode cost at a relay
    theta: float | None = DERIVED         # 1/J, storage-failure exponent
    trials: int = 1_000_000               # Monte Carlo trials
    cycles: int = 100                     # simulated transmission cycles
    seed: int = 1
    channel: ChannelParams = field(default_factory=ChannelParams)
    energy: EnergyParams = field(default_factory=EnergyParams)
    priority_table: Mapping[str, int] = field(default_factory=lambda: {"default": 1})


@dataclass(frozen=True)
class ValidatedConfig(SimConfig):
    """SimConfig whose invariants were checked and derived fields filled."""


# Distance at which a two-hop relay path starts beating the direct path under
# default parameters; the relay decode cost default is calibrated to it.
RELAY_CROSSOVER_M = 3.0e-3


def _check(ok: bool, field_name: str, reason: str):
    if not ok:
        raise InvalidConfig(field_name, reason)


def validate_config(cfg: SimConfig) -> ValidatedConfig:
    """Check every config invariant and fill derived fields.

    Idempotent: validating a ValidatedConfig returns an equal object.
    Raises InvalidConfig naming the first violated field, in declaration order.
    """
    _check(isinstance(cfg.node_count, int) and cfg.node_count >= 0,
           "node_count", "must be an integer >= 0")
    _check(cfg.tx_range_r > 0, "tx_range_r", "must be > 0")
    _check(cfg.deployment_radius > 0, "deployment_radius", "must be > 0")
    _check(cfg.deployment_shape in ("sphere", "cube"),
           "deployment_shape", "must be 'sphere' or 'cube'")
    derived_layers = math.ceil(2.0 * cfg.deployment_radius / cfg.tx_range_r)
    if cfg.layer_count is not None:
        _check(cfg.layer_count == derived_layers, "layer_count",
               f"must equal ceil(2*deployment_radius/tx_range_r) = {derived_layers}")
    _check(cfg.pulse_energy > 0, "pulse_energy", "must be > 0")
    _check(cfg.pulse_duration > 0, "pulse_duration", "must be > 0")
    _check(cfg.pulse_interval > 0, "pulse_interval", "must be > 0")
    _check(isinstance(cfg.packet_bits, int) and cfg.packet_bits >= 1,
           "packet_bits", "must be an integer >= 1")
    _check(cfg.message_interval > 0, "message_interval", "must be > 0")
    _check(isinstance(cfg.ttl, int) and cfg.ttl >= 1, "ttl", "must be an integer >= 1")
    _check(0.0 <= cfg.adtn_probability <= 1.0, "adtn_probability", "must be in [0, 1]")
    if isinstance(cfg.initial_energy_fraction, str):
        _check(cfg.initial_energy_fraction == "random",
               "initial_energy_fraction", "must be 'random' or a fraction in (0, 1]")
    else:
        _check(0.0 < cfg.initial_energy_fraction <= 1.0,
               "initial_energy_fraction", "must be 'random' or a fraction in (0, 1]")
    _check(cfg.tx_power > 0, "tx_power", "must be > 0")
    _check(cfg.tx_margin_db >= 0, "tx_margin_db", "must be >= 0")
    _check(cfg.bandwidth > 0, "bandwidth", "must be > 0")
    _check(cfg.slot_quantum > 0, "slot_quantum", "must be > 0")
    _check(0.0 < cfg.cluster_range_factor <= 1.0,
           "cluster_range_factor", "must be in (0, 1]")
    if cfg.relay_rx_energy_per_bit is not None:
        _check(cfg.relay_rx_energy_per_bit >= 0,
               "relay_rx_energy_per_bit", "must be >= 0")
    if cfg.theta is not None:
        _check(cfg.theta > 0, "theta", "must be > 0")
    _check(isinstance(cfg.trials, int) and cfg.trials >= 1,
           "trials", "must be an integer >= 1")
    _check(isinstance(cfg.cycles, int) and cfg.cycles >= 1,
           "cycles", "must be an integer >= 1")
    _check(isinstance(cfg.seed, int) and cfg.seed >= 0,
           "seed", "must be a non-negative integer")

    ch = cfg.channel
    _check(ch.frequency_hz > 0, "channel.frequency", "must be > 0")
    _check(ch.absorption_per_m >= 0, "channel.absorption", "must be >= 0")
    _check(ch.path_loss_exponent >= 2, "channel.path_loss_exp", "must be >= 2")
    _check(ch.shadow_sigma_db >= 0, "channel.shadowing_sigma_db", "must be >= 0")
    _check(ch.antenna_gain > 0, "channel.antenna_gain", "must be > 0")
    _check(ch.noise_power_w > 0, "channel.noise_power", "must be > 0")
    _check(math.isfinite(ch.sinr_threshold_db), "channel.sinr_threshold_db", "must be finite")
    _check(ch.propagation_speed_m_s > 0, "channel.propagation_speed", "must be > 0")

    en = cfg.energy
    _check(en.capacitance_f > 0, "energy.capacitance", "must be > 0")
    _check(en.generator_voltage_v > 0, "energy.generator_voltage", "must be > 0")
    _check(en.charge_per_cycle_c > 0, "energy.charge_per_cycle", "must be > 0")
    _check(en.vibration_period_s > 0, "energy.vibration_period", "must be > 0")
    _check(en.e_min_j >= 0, "energy.e_min", "must be >= 0")
    _check(en.e_tx_j > 0, "energy.e_tx", "must be > 0")
    e_max = 0.5 * en.capacitance_f * en.generator_voltage_v ** 2
    _check(en.e_min_j + en.e_tx_j <= e_max, "energy.e_tx",
           f"e_min + e_tx must not exceed the storage maximum {e_max!r} J")

    for name, prio in cfg.priority_table.items():
        _check(isinstance(prio, int) and prio >= 1,
               f"priority.{name}", "must be an integer >= 1")
    _check("default" in cfg.priority_table, "priority.default", "must be present")

    # Derived fields. Imported here: engine sits above netmodel in the module
    # graph, and these defaults reuse its link-budget arithmetic.
    from . import engine

    def e_bit(distance: float) -> float:
        return engine.energy_per_bit(distance, ch, ch.noise_power_w,
                                     ch.sinr_threshold_db, cfg.pulse_duration)

    relay_rx = cfg.relay_rx_energy_per_bit
    if relay_rx is None:
        # Decode cost that puts the two-hop/one-hop energy crossover at
        # RELAY_CROSSOVER_M under the configured channel.
        relay_rx = e_bit(RELAY_CROSSOVER_M) - 2.0 * e_bit(RELAY_CROSSOVER_M / 2.0)
    theta = cfg.theta
    if theta is None:
        # Even odds of an energy saving for a relayed hop across half the
        # transmission range.
        theta = math.log(2.0) / (2.0 * e_bit(cfg.tx_range_r / 4.0))

    validated = ValidatedConfig(
        **{
            **{f.name: getattr(cfg, f.name) for f in fields(SimConfig)},
            "layer_count": derived_layers,
            "relay_rx_energy_per_bit": relay_rx,
            "theta": theta,
            "priority_table": dict(cfg.priority_table),
        }
    )
    return validated


# ---------------------------------------------------------------------------
# Flat key/value config file format
# ---------------------------------------------------------------------------

# key -> (python type, unit, description). Order is the canonical file order.
CONFIG_SCHEMA: dict[str, tuple[type, str, str]] = {
    "node_count": (int, "count", "sensor nodes deployed around the sink"),
    "tx_range_r": (float, "m", "full transmission range r"),
    "deployment_radius": (float, "m", "deployment region radius (cube: half side)"),
    "deployment_shape": (str, "sphere|cube", "deployment volume shape"),
    "layer_count": (int, "count", "derived: ceil(2*deployment_radius/tx_range_r)"),
    "pulse_energy": (float, "J", "energy per transmitted pulse"),
    "pulse_duration": (float, "s", "pulse width"),
    "pulse_interval": (float, "s", "time between pulses; one bit per pulse slot"),
    "packet_bits": (int, "bits", "payload size per packet"),
    "message_interval": (float, "s", "time between transmission cycles"),
    "ttl": (int, "hops", "hop budget per packet"),
    "adtn_probability": (float, "probability", "chance an NCM has data each cycle"),
    "initial_energy_fraction": (str, "fraction|'random'", "starting charge level"),
    "tx_power": (float, "W", "reference transmit power for capacity sweeps"),
    "tx_margin_db": (float, "dB", "link margin above the SINR threshold"),
    "bandwidth": (float, "Hz", "per sub-channel bandwidth"),
    "slot_quantum": (float, "s", "TDMA slot granularity"),
    "cluster_range_factor": (float, "fraction", "advertisement range / tx_range_r"),
    "relay_rx_energy_per_bit": (float, "J/bit", "relay decode cost (derived if absent)"),
    "theta": (float, "1/J", "storage-failure exponent (derived if absent)"),
    "trials": (int, "count", "Monte Carlo trials"),
    "cycles": (int, "count", "simulated transmission cycles"),
    "seed": (int, "-", "root RNG seed"),
    "channel.frequency": (float, "Hz", "carrier frequency"),
    "channel.absorption": (float, "1/m", "molecular absorption coefficient"),
    "channel.path_loss_exp": (float, "-", "path-loss exponent, >= 2"),
    "channel.shadowing_sigma_db": (float, "dB", "lognormal shadowing std"),
    "channel.antenna_gain": (float, "-", "combined antenna gain, linear"),
    "channel.noise_power": (float, "W", "receiver noise power"),
    "channel.sinr_threshold_db": (float, "dB", "decoding SINR threshold"),
    "channel.propagation_speed": (float, "m/s", "wave propagation speed"),
    "energy.capacitance": (float, "F", "storage capacitance"),
    "energy.generator_voltage": (float, "V", "harvester voltage limit"),
    "energy.charge_per_cycle": (float, "C", "charge moved per vibration cycle"),
    "energy.vibration_period": (float, "s", "one harvesting cycle"),
    "energy.e_min": (float, "J", "energy floor of the chain"),
    "energy.e_tx": (float, "J", "energy quantum per packet transmission"),
    # priority.<class> keys are open-ended integer priorities; "default" required.
}

_CHANNEL_KEYS = {
    "channel.frequency": "frequency_hz",
    "channel.absorption": "absorption_per_m",
    "channel.path_loss_exp": "path_loss_exponent",
    "channel.shadowing_sigma_db": "shadow_sigma_db",
    "channel.antenna_gain": "antenna_gain",
    "channel.noise_power": "noise_power_w",
    "channel.sinr_threshold_db": "sinr_threshold_db",
    "channel.propagation_speed": "propagation_speed_m_s",
}

_ENERGY_KEYS = {
    "energy.capacitance": "capacitance_f",
    "energy.generator_voltage": "generator_voltage_v",
    "energy.charge_per_cycle": "charge_per_cycle_c",
    "energy.vibration_period": "vibration_period_s",
    "energy.e_min": "e_min_j",
    "energy.e_tx": "e_tx_j",
}


def _parse_scalar(key: str, raw: str, want: type):
    raw = raw.strip()
    try:
        if want is int:
            return int(raw)
        if want is float:
            return float(raw)
    except ValueError:
        raise InvalidConfig(key, f"cannot parse {raw!r} as {want.__name__}")
    return raw


def parse_config_text(text: str) -> SimConfig:
    """Parse the flat ``key = value`` config format.

    ``#`` starts a comment; blank lines are skipped; unknown keys are rejected.
    """
    top: dict = {}
    ch: dict = {}
    en: dict = {}
    prio: dict[str, int] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise InvalidConfig(f"line {lineno}", f"expected 'key = value', got {body!r}")
        key, _, raw = body.partition("=")
        key = key.strip()
        if key in _CHANNEL_KEYS:
            ch[_CHANNEL_KEYS[key]] = _parse_scalar(key, raw, CONFIG_SCHEMA[key][0])
        elif key in _ENERGY_KEYS:
            en[_ENERGY_KEYS[key]] = _parse_scalar(key, raw, CONFIG_SCHEMA[key][0])
        elif key.startswith("priority."):
            prio[key[len("priority."):]] = _parse_scalar(key, raw, int)
        elif key in CONFIG_SCHEMA:
            want = CONFIG_SCHEMA[key][0]
            if key == "initial_energy_fraction":
                value = raw.strip()
                top[key] = value if value == "random" else _parse_scalar(key, value, float)
            else:
                top[key] = _parse_scalar(key, raw, want)
        else:
            raise InvalidConfig(key, "unknown configuration key")
    kwargs = dict(top)
    if ch:
        kwargs["channel"] = replace(ChannelParams(), **ch)
    if en:
        kwargs["energy"] = replace(EnergyParams(), **en)
    if prio:
        kwargs["priority_table"] = prio
    return SimConfig(**kwargs)


def _format_scalar(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def serialize_config(cfg: SimConfig) -> str:
    """Render a config in the canonical flat key/value form (round-trips)."""
    lines = ["# nanonetsim configuration (SI units; dB fields are 10*log10)"]
    for key in CONFIG_SCHEMA:
        if key in _CHANNEL_KEYS:
            value = getattr(cfg.channel, _CHANNEL_KEYS[key])
        elif key in _ENERGY_KEYS:
            value = getattr(cfg.energy, _ENERGY_KEYS[key])
        else:
            value = getattr(cfg, key)
        if value is None:
            continue  # derived field left for validate_config
        unit = CONFIG_SCHEMA[key][1]
        lines.append(f"{key} = {_format_scalar(value)}  # {unit}")
    for name in sorted(cfg.priority_table):
        lines.append(f"priority.{name} = {cfg.priority_table[name]}  # weight")
    return "\n".join(lines) + "\n"


def load_config(path: str) -> SimConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def config_digest(cfg: SimConfig) -> str:
    """Stable SHA-256 of the canonical serialized form."""
    return hashlib.sha256(serialize_config(cfg).encode("utf-8")).hexdigest()


def positions_in_volume(positions: Iterable[Position], cfg: SimConfig) -> bool:
    """True when every position lies inside the configured deployment volume."""
    radius = cfg.deployment_radius
    for pos in positions:
        if cfg.deployment_shape == "sphere":
            if pos.distance_to(Position(0.0, 0.0, 0.0)) > radius * (1.0 + 1e-12):
                return False
        else:
            if max(abs(pos.x), abs(pos.y), abs(pos.z)) > radius * (1.0 + 1e-12):
                return False
    return True
