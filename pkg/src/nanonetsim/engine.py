"""Protocol execution and analysis sweeps.

run_cycle plays one TDMA cycle over virtual time: wake-ups, intra-cluster
transmissions with relay decisions, inter-layer decode-and-forward into a
fusion head, rotation, and harvesting. Sweeps evaluate the closed-form
per-link metrics (energy, capacity, outage, energy-saving rate) without
touching the RNG.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import channel, energy
from .clustering import Cluster, rotate_ncc
from .netmodel import ChannelParams, Mode, NodeState, Role, ValidatedConfig
from .scheduler import Timeline, TransmissionRequest, build_timeline
from .topology import Deployment, deploy, pairwise_distance, phase_rng

PHASE_TRAFFIC = 1
PHASE_SHADOW = 2

# Event kinds recorded in a CycleTrace, in the vocabulary of the protocol.
WAKE_UP = "WakeUp"
TX_INTRA = "TxIntra"
TX_RELAY = "TxRelay"
TX_INTER = "TxInter"
FUSE = "Fuse"
ROTATE = "Rotate"
HARVEST = "Harvest"
DEAD_NODE = "DeadNode"


class UnknownAxis(ValueError):
    """sweep() was given an axis name it does not provide."""


def energy_per_bit(d: float, ch: ChannelParams, n0: float, gamma_th_db: float,
                   pulse_duration: float) -> float:
    """Minimum transmit energy per bit to decode at distance d, J/bit.

    One pulse carries one bit; the pulse power is sized so the median (no
    shadowing) received SINR meets the threshold exactly. Strictly increasing
    in d through every link-budget factor.
    """
    if d <= 0:
        raise ValueError("d must be > 0")
    if pulse_duration <= 0:
        raise ValueError("pulse_duration must be > 0")
    unit_gain = channel.received_power(1.0, d, 0.0, ch)
    power = channel.db_to_linear(gamma_th_db) * n0 / unit_gain
    return power * pulse_duration


def choose_intra_path(adtn: NodeState, ncc: NodeState,
                      candidates: Sequence[NodeState], ch: ChannelParams,
                      n0: float, gamma_th_db: float,
                      pulse_duration: float) -> NodeState | None:
    """Pick the intra-cluster route: None for direct, or the cheapest relay.

    Direct wins when every candidate's two-hop energy sum exceeds the direct
    cost; otherwise the relay minimizing the sum (ties to the lower id).
    """
    def e_bit(d: float) -> float:
        return energy_per_bit(d, ch, n0, gamma_th_db, pulse_duration)

    direct = e_bit(pairwise_distance(adtn, ncc))
    best: NodeState | None = None
    best_key: tuple[float, int] | None = None
    for node in candidates:
        if node.node_id in (adtn.node_id, ncc.node_id):
            continue
        two_hop = (e_bit(pairwise_distance(adtn, node))
                   + e_bit(pairwise_distance(node, ncc)))
        if two_hop > direct:
            continue
        key = (two_hop, node.node_id)
        if best_key is None or key < best_key:
            best, best_key = node, key
    return best


@dataclass
class WorldState:
    """Everything run_cycle reads and mutates for one simulation."""
    cfg: ValidatedConfig
    dep: Deployment
    clusters: list[Cluster]
    cycle: int = 0
    requests: list[TransmissionRequest] = field(default_factory=list)

    def node(self, node_id: int) -> NodeState:
        if node_id == self.dep.sink.node_id:
            return self.dep.sink
        return self._by_id[node_id]

    def __post_init__(self):
        self._by_id = {n.node_id: n for n in self.dep.nodes}

    def cluster_of(self, cluster_id: int) -> Cluster:
        for cluster in self.clusters:
            if cluster.id == cluster_id:
                return cluster
        raise KeyError(cluster_id)


@dataclass(frozen=True)
class CycleTrace:
    """Immutable record of one executed cycle."""
    cycle: int
    timeline: Timeline
    events: tuple[tuple[int, int, str, str], ...]   # (time_q, node, kind, detail)
    per_node_energy_spent: dict[int, float]
    delivered_bits: int
    outage_events: int
    start_residuals: dict[int, float]
    end_residuals: dict[int, float]
    decrements: tuple[tuple[int, float], ...]       # replayable spend ledger


def collect_requests(state: WorldState,
                     rng: np.random.Generator) -> list[TransmissionRequest]:
    """Draw this cycle's transmitters: each non-head member independently.

    Emission order (cluster id, then member id) pins the RNG stream so a
    seed fully determines the request set.
    """
    cfg = state.cfg
    requests: list[TransmissionRequest] = []
    priority = cfg.priority_table.get("default", 1)
    for cluster in sorted(state.clusters, key=lambda c: c.id):
        for member in sorted(cluster.members):
            if member == cluster.ncc:
                continue
            if rng.random() >= cfg.adtn_probability:
                continue
            node = state.node(member)
            requests.append(TransmissionRequest(
                ncm_id=member,
                nc_id=state.dep.sink.node_id,
                d_k=node.position.distance_to(state.dep.nc_position),
                layer=node.layer,
                residual=node.residual_energy,
                amount=cfg.packet_bits,
                priority=priority,
            ))
    return requests


def _spend(state: WorldState, ledger: list, node: NodeState, amount: float):
    node.residual_energy -= amount
    ledger.append((node.node_id, amount))


def run_cycle(state: WorldState, timeline: Timeline,
              rng: np.random.Generator) -> CycleTrace:
    """Execute one transmission cycle over the built timeline.

    Layers run in the timeline's priority order. Every link samples one
    shadowing value; a sample below the configured margin is an outage and
    the data on that link is lost. Inter-layer forwarding hops are lossless
    once decoded (decode-and-forward contract); outage is assessed on each
    path's ingress to the fusion head and on the final hop to the sink.
    Transmitters pay the per-bit link energy times the margin; intermediate
    relays additionally pay the decode cost per bit. A node that cannot
    afford its transmission is recorded as DeadNode and skipped. After the
    end-of-cycle snapshot every node harvests for one message interval.
    """
    cfg = state.cfg
    ch = cfg.channel
    sigma = ch.shadow_sigma_db
    margin_db = cfg.tx_margin_db
    margin_lin = channel.db_to_linear(margin_db)
    start_residuals = {n.node_id: n.residual_energy for n in state.dep.nodes}

    if timeline.empty:
        return CycleTrace(cycle=state.cycle, timeline=timeline, events=(),
                          per_node_energy_spent={}, delivered_bits=0,
                          outage_events=0, start_residuals=start_residuals,
                          end_residuals=dict(start_residuals), decrements=())

    def e_bit(d: float) -> float:
        return energy_per_bit(d, ch, ch.noise_power_w, ch.sinr_threshold_db,
                              cfg.pulse_duration)

    def link_outage() -> bool:
        return float(rng.normal(0.0, sigma)) < -margin_db if sigma > 0 else False

    bits_of: dict[int, int] = {}
    for request in state.requests:
        bits_of[request.ncm_id] = bits_of.get(request.ncm_id, 0) + request.amount

    events: list[tuple[int, int, str, str]] = []
    ledger: list[tuple[int, float]] = []
    outage_events = 0
    delivered_bits = 0
    clusters_by_id = {c.id: c for c in state.clusters}
    nccs_by_layer: dict[int, list[NodeState]] = {}
    for cluster in state.clusters:
        nccs_by_layer.setdefault(cluster.layer, []).append(state.node(cluster.ncc))

    def nearest_lower_ncc(sender: NodeState, layer: int) -> NodeState | None:
        below = nccs_by_layer.get(layer - 1, ())
        best, best_key = None, None
        for head in below:
            key = (pairwise_distance(sender, head), head.node_id)
            if best_key is None or key < best_key:
                best, best_key = head, key
        return best

    def try_spend(node: NodeState, amount: float, time_q: int) -> bool:
        if node.residual_energy < amount:
            events.append((time_q, node.node_id, DEAD_NODE,
                           f"needed={amount!r};have={node.residual_energy!r}"))
            return False
        _spend(state, ledger, node, amount)
        return True

    for layer, layer_start, layer_duration in timeline.layer_slots:
        layer_end = layer_start + layer_duration
        slots_here = timeline.cluster_slots.get(layer, ())
        awake: list[NodeState] = []

        # Wake-up preambles: every member of a scheduled cluster.
        for cluster_id, _, _ in slots_here:
            for member in clusters_by_id[cluster_id].members:
                node = state.node(member)
                node.mode = Mode.IDLE
                awake.append(node)
        for node in sorted(awake, key=lambda n: n.node_id):
            events.append((layer_start, node.node_id, WAKE_UP, f"layer={layer + 1}"))

        # Intra-cluster phase: ADTNs reach their head directly or via a relay.
        aggregates: dict[int, dict[int, tuple[int, int]]] = {}   # head -> src -> (bits, ttl)
        for cluster_id, _, _ in slots_here:
            cluster = clusters_by_id[cluster_id]
            head = state.node(cluster.ncc)
            aggregate = aggregates.setdefault(head.node_id, {})
            members = [state.node(m) for m in cluster.members]
            for adtn_id, slot_start, slot_duration in timeline.adtn_slots.get(cluster_id, ()):
                adtn = state.node(adtn_id)
                bits = bits_of.get(adtn_id, 0)
                if bits == 0:
                    continue
                ttl = cfg.ttl
                candidates = [m for m in members
                              if m.node_id not in (adtn_id, head.node_id)
                              and pairwise_distance(adtn, m) <= cfg.tx_range_r]
                relay = choose_intra_path(adtn, head, candidates, ch,
                                          ch.noise_power_w, ch.sinr_threshold_db,
                                          cfg.pulse_duration)
                adtn.mode = Mode.TRANSMITTING
                if relay is None:
                    cost = e_bit(pairwise_distance(adtn, head)) * bits * margin_lin
                    if not try_spend(adtn, cost, slot_start):
                        continue
                    lost = link_outage()
                    events.append((slot_start, adtn_id, TX_INTRA,
                                   f"to={head.node_id};bits={bits};outage={int(lost)}"))
                    if lost:
                        outage_events += 1
                        continue
                    ttl -= 1
                else:
                    half = max(slot_duration // 2, 1)
                    hop1 = e_bit(pairwise_distance(adtn, relay)) * bits * margin_lin
                    if not try_spend(adtn, hop1, slot_start):
                        continue
                    lost = link_outage()
                    events.append((slot_start, adtn_id, TX_RELAY,
                                   f"to={relay.node_id};bits={bits};hop=1;outage={int(lost)}"))
                    if lost:
                        outage_events += 1
                        continue
                    ttl -= 1
                    decode = cfg.relay_rx_energy_per_bit * bits
                    if not try_spend(relay, decode, slot_start):
                        continue
                    hop2 = e_bit(pairwise_distance(relay, head)) * bits * margin_lin
                    t2 = slot_start + half
                    if not try_spend(relay, hop2, t2):
                        continue
                    lost = link_outage()
                    events.append((t2, relay.node_id, TX_RELAY,
                                   f"to={head.node_id};bits={bits};hop=2;outage={int(lost)}"))
                    if lost:
                        outage_events += 1
                        continue
                    ttl -= 1
                if ttl > 0:
                    aggregate[adtn_id] = (bits, ttl)

        # Inter-cluster phase: heads forward down the layers into a fusion
        # head, which sends the fused aggregate to the sink.
        plans: list[tuple[NodeState, list[NodeState], dict[int, tuple[int, int]]]] = []
        for cluster_id, _, _ in slots_here:
            cluster = clusters_by_id[cluster_id]
            head = state.node(cluster.ncc)
            aggregate = aggregates.get(head.node_id, {})
            if not aggregate:
                continue
            hops: list[NodeState] = []
            sender = head
            reachable = True
            for down_layer in range(layer, 0, -1):
                target = nearest_lower_ncc(sender, down_layer)
                if target is None:
                    reachable = False
                    break
                hops.append(target)
                sender = target
            if reachable:
                plans.append((head, hops, aggregate))

        inter_tx_count = sum(len(hops) for _, hops, _ in plans)
        fusion_groups: dict[int, list[tuple[NodeState, list[NodeState], dict]]] = {}
        for head, hops, aggregate in plans:
            fusion = hops[-1] if hops else head
            fusion_groups.setdefault(fusion.node_id, []).append((head, hops, aggregate))
        inter_tx_count += len(fusion_groups)
        t_inter = max(layer_start, layer_end - inter_tx_count)

        for fusion_id in sorted(fusion_groups):
            group = fusion_groups[fusion_id]
            fusion = state.node(fusion_id)
            fused: dict[int, tuple[int, int]] = {}
            arrived = 0
            for head, hops, aggregate in group:
                path_bits = sum(b for b, _ in aggregate.values())
                sender = head
                alive = True
                for receiver in hops:
                    cost = e_bit(pairwise_distance(sender, receiver)) * path_bits * margin_lin
                    if not try_spend(sender, cost, t_inter):
                        alive = False
                        break
                    events.append((t_inter, sender.node_id, TX_INTER,
                                   f"to={receiver.node_id};bits={path_bits}"))
                    t_inter = min(t_inter + 1, layer_end - 1)
                    if receiver.node_id != fusion_id:
                        decode = cfg.relay_rx_energy_per_bit * path_bits
                        if not try_spend(receiver, decode, t_inter):
                            alive = False
                            break
                    sender = receiver
                if not alive:
                    continue
                aggregate = {src: (b, ttl - len(hops)) for src, (b, ttl) in aggregate.items()
                             if ttl - len(hops) > 0}
                if hops and link_outage():
                    # Path-level outage assessed at the fusion ingress.
                    outage_events += 1
                    continue
                arrived += 1
                for src, (b, ttl) in aggregate.items():
                    if src not in fused:
                        fused[src] = (b, ttl)
            if arrived >= 2:
                fused_bits = sum(b for b, _ in fused.values())
                events.append((t_inter, fusion_id, FUSE,
                               f"links={arrived};bits={fused_bits}"))
            if not fused:
                continue
            final = {src: (b, ttl - 1) for src, (b, ttl) in fused.items() if ttl - 1 > 0}
            if not final:
                continue
            final_bits = sum(b for b, _ in final.values())
            cost = (e_bit(pairwise_distance(fusion, state.dep.sink))
                    * final_bits * margin_lin)
            if not try_spend(fusion, cost, t_inter):
                continue
            lost = link_outage()
            events.append((t_inter, fusion_id, TX_INTER,
                           f"to={state.dep.sink.node_id};bits={final_bits};outage={int(lost)}"))
            t_inter = min(t_inter + 1, layer_end - 1)
            if lost:
                outage_events += 1
                continue
            delivered_bits += final_bits

        # Rotation: every scheduled cluster hands its head role onward.
        for cluster_id, _, _ in slots_here:
            cluster = clusters_by_id[cluster_id]
            successor = rotate_ncc(cluster)
            clusters_by_id[cluster_id] = successor
            old = state.node(cluster.ncc)
            new = state.node(successor.ncc)
            old.role = Role.NCM
            new.role = Role.NCC
            events.append((layer_end - 1, successor.ncc, ROTATE,
                           f"cluster={cluster_id};from={cluster.ncc}"))

        for node in awake:
            node.mode = Mode.HARVESTING

    state.clusters = [clusters_by_id[c.id] for c in state.clusters]

    end_residuals = {n.node_id: n.residual_energy for n in state.dep.nodes}
    spent: dict[int, float] = {}
    for node_id, amount in ledger:
        spent[node_id] = spent.get(node_id, 0.0) + amount

    # Post-snapshot harvesting: recharge along the charge curve for one
    # message interval; gains land after the conservation measurement point.
    harvest_time = timeline.cycle_quanta
    for node in state.dep.nodes:
        before = node.residual_energy
        node.residual_energy = energy.recharge(before, cfg.message_interval,
                                               cfg.energy)
        gain = node.residual_energy - before
        if gain > 0.0:
            events.append((harvest_time, node.node_id, HARVEST, f"gain={gain!r}"))

    return CycleTrace(cycle=state.cycle, timeline=timeline,
                      events=tuple(events), per_node_energy_spent=spent,
                      delivered_bits=delivered_bits, outage_events=outage_events,
                      start_residuals=start_residuals, end_residuals=end_residuals,
                      decrements=tuple(ledger))


class Simulation:
    """Owns a deployed world and advances it cycle by cycle.

    Clustering happens once at construction; afterwards only rotation
    changes heads. All randomness flows from the config seed through
    per-phase, per-cycle streams.
    """

    def __init__(self, cfg: ValidatedConfig):
        from .clustering import elect_nccs
        self.cfg = cfg
        dep = deploy(cfg)
        clusters = elect_nccs(dep, cfg)
        self.state = WorldState(cfg=cfg, dep=dep, clusters=clusters)
        self.traces: list[CycleTrace] = []

    def step(self) -> CycleTrace:
        cfg = self.cfg
        cycle = self.state.cycle
        traffic_rng = phase_rng(cfg.seed, PHASE_TRAFFIC, cycle)
        self.state.requests = collect_requests(self.state, traffic_rng)
        timeline = build_timeline(self.state.requests, self.state.clusters, cfg)
        link_rng = phase_rng(cfg.seed, PHASE_SHADOW, cycle)
        trace = run_cycle(self.state, timeline, link_rng)
        self.traces.append(trace)
        self.state.cycle += 1
        return trace

    def run(self, cycles: int | None = None) -> list[CycleTrace]:
        for _ in range(cycles if cycles is not None else self.cfg.cycles):
            self.step()
        return self.traces


def events_to_csv(trace: CycleTrace) -> str:
    """Event log dump (time_ps, node, event, detail)."""
    scale = trace.timeline.quantum_s / 1e-12
    out = io.StringIO()
    out.write("time_ps,node,event,detail\n")
    for time_q, node, kind, detail in trace.events:
        t = time_q * scale
        t_text = str(int(t)) if t == int(t) else repr(t)
        out.write(f"{t_text},{node},{kind},{detail}\n")
    return out.getvalue()


# ---------------------------------------------------------------------------
# Analysis sweeps
# ---------------------------------------------------------------------------

METRIC_COLUMNS = (
    "energy_per_bit_single_J",
    "energy_per_bit_multi_J",
    "pes_rate",
    "capacity_single_bps",
    "capacity_multi_bps",
    "outage_capacity_bps",
    "outage_probability",
)

SWEEP_AXES = ("distance", "p_out", "k_links", "theta")

# Reported outage capacity follows the 0.1-outage convention unless the
# sweep axis is p_out itself.
DEFAULT_P_OUT = 0.1


@dataclass(frozen=True)
class MetricsTable:
    """Sweep results: one row per axis value, fixed column order."""
    axis: str
    values: tuple[float, ...]
    rows: tuple[tuple[float, ...], ...]
    meta: dict

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write(",".join((self.axis,) + METRIC_COLUMNS) + "\n")
        for value, row in zip(self.values, self.rows):
            out.write(",".join(repr(float(x)) for x in (value,) + row) + "\n")
        return out.getvalue()

    def to_json(self) -> str:
        import json
        return json.dumps({
            "axis": self.axis,
            "columns": list((self.axis,) + METRIC_COLUMNS),
            "rows": [[float(v)] + [float(x) for x in row]
                     for v, row in zip(self.values, self.rows)],
            "meta": self.meta,
        }, indent=2, sort_keys=True)


def _metrics_at(cfg: ValidatedConfig, d: float, p_out: float,
                k_links: int, theta: float) -> tuple[float, ...]:
    ch = cfg.channel
    eb = lambda x: energy_per_bit(x, ch, ch.noise_power_w, ch.sinr_threshold_db,
                                  cfg.pulse_duration)
    single = eb(d)
    multi = 2.0 * eb(d / 2.0) + cfg.relay_rx_energy_per_bit
    hop = eb(d / 2.0)
    pes_rate = energy.p_es_rate(hop, hop, theta)
    gamma_single = channel.sinr(
        channel.received_power(cfg.tx_power, d, 0.0, ch), 0.0, ch.noise_power_w)
    gamma_half = channel.sinr(
        channel.received_power(cfg.tx_power, d / 2.0, 0.0, ch), 0.0, ch.noise_power_w)
    cap_single = channel.capacity(((cfg.bandwidth, gamma_single),))
    # Store-and-forward relaying halves the air time available per hop.
    cap_multi = max(cap_single,
                    0.5 * channel.capacity(((cfg.bandwidth, gamma_half),)))
    out_cap = channel.outage_capacity(cfg.bandwidth, gamma_single, p_out)
    phi_db = channel.linear_to_db(gamma_single) if gamma_single > 0 else -math.inf
    if k_links == 1:
        p_outage = channel.outage_single(ch.sinr_threshold_db, phi_db,
                                         ch.shadow_sigma_db)
    else:
        p_outage = channel.cooperative_fusion_outage(
            ch.sinr_threshold_db, phi_db, ch.shadow_sigma_db, k_links)
    return (single, multi, pes_rate, cap_single, cap_multi, out_cap, p_outage)


def crossover_distance(cfg: ValidatedConfig, lo: float = 1e-4,
                       hi: float | None = None) -> float | None:
    """Distance beyond which the two-hop spend beats the direct spend.

    Bisects the sign change of (two-hop minus direct); None when the bracket
    holds no crossover.
    """
    ch = cfg.channel
    eb = lambda x: energy_per_bit(x, ch, ch.noise_power_w, ch.sinr_threshold_db,
                                  cfg.pulse_duration)
    gap = lambda d: (2.0 * eb(d / 2.0) + cfg.relay_rx_energy_per_bit) - eb(d)
    if hi is None:
        hi = cfg.tx_range_r
    a, b = lo, hi
    ga, gb = gap(a), gap(b)
    if ga <= 0 or gb >= 0:
        return None
    for _ in range(200):
        mid = 0.5 * (a + b)
        if gap(mid) > 0:
            a = mid
        else:
            b = mid
    return 0.5 * (a + b)


def sweep(cfg: ValidatedConfig, sweep_axis: str,
          values: Sequence[float]) -> MetricsTable:
    """Evaluate the analytic metric columns along one named axis.

    Axes: distance (m), p_out (probability), k_links (fused branches), theta
    (1/J). Off-axis parameters hold at half the transmission range, the
    0.1-outage convention, one link, and the configured theta.
    """
    if sweep_axis not in SWEEP_AXES:
        raise UnknownAxis(f"unknown sweep axis {sweep_axis!r}; "
                          f"expected one of {', '.join(SWEEP_AXES)}")
    d0 = cfg.tx_range_r / 2.0
    rows = []
    for value in values:
        d, p_out, k, theta = d0, DEFAULT_P_OUT, 1, cfg.theta
        if sweep_axis == "distance":
            d = float(value)
            if d <= 0:
                raise ValueError("distance values must be > 0")
        elif sweep_axis == "p_out":
            p_out = float(value)
        elif sweep_axis == "k_links":
            k = int(value)
            if k < 1 or k != value:
                raise ValueError("k_links values must be integers >= 1")
        else:
            theta = float(value)
            if theta <= 0:
                raise ValueError("theta values must be > 0")
        rows.append(_metrics_at(cfg, d, p_out, k, theta))
    meta: dict = {"axis": sweep_axis}
    if sweep_axis == "distance":
        crossover = crossover_distance(cfg)
        meta["crossover_m"] = crossover
    return MetricsTable(axis=sweep_axis, values=tuple(float(v) for v in values),
                        rows=tuple(rows), meta=meta)
