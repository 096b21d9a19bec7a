"""Layer-ordering weight and the three-phase nested TDMA timeline.

A transmission cycle is carved top-down: layer slots ordered by descending
weight, each split among its clusters by data volume, each cluster slot split
among its registered transmitters. All durations are integer multiples of the
slot quantum, apportioned by largest remainder so every level conserves its
parent's duration exactly.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .clustering import Cluster
from .netmodel import ValidatedConfig


@dataclass(frozen=True)
class TransmissionRequest:
    """One registration message from a node with data to send."""
    ncm_id: int
    nc_id: int
    d_k: float          # m, distance to the sink
    layer: int          # 0-based
    residual: float     # J at registration time
    amount: int         # bits to transmit
    priority: int = 1

    def __post_init__(self):
        if self.amount < 0:
            raise ValueError("amount must be >= 0")
        if self.layer < 0:
            raise ValueError("layer must be >= 0")


# Slot tuples are (owner id, start, duration) in whole quanta.
Slot = tuple[int, int, int]


@dataclass(frozen=True)
class Timeline:
    """Immutable three-level slot tree for one transmission cycle."""
    quantum_s: float
    cycle_quanta: int
    layer_slots: tuple[Slot, ...]                     # (layer, start, duration), emission order
    cluster_slots: dict[int, tuple[Slot, ...]] = field(default_factory=dict)   # layer -> slots
    adtn_slots: dict[int, tuple[Slot, ...]] = field(default_factory=dict)      # cluster -> slots
    alpha: dict[int, float] = field(default_factory=dict)                      # layer -> weight
    empty: bool = False

    @property
    def cycle_time(self) -> float:
        """Cycle length T in seconds."""
        return self.cycle_quanta * self.quantum_s


class EmptyCycle:
    """Marker namespace: an empty Timeline stands for a cycle with no requests."""

    @staticmethod
    def timeline(quantum_s: float) -> Timeline:
        return Timeline(quantum_s=quantum_s, cycle_quanta=0, layer_slots=(),
                        empty=True)


def layer_weight(layer_number: int, requests: Sequence[TransmissionRequest],
                 t: float, cycle_time: float, gamma_prop: float,
                 priority: int) -> float:
    """Ordering weight of one layer for the coming cycle.

    ``layer_number`` is the 1-based presentation number (innermost = 1), so
    the innermost layer keeps a nonzero weight. ``t`` is seconds per bit and
    ``gamma_prop`` the layer's propagation allowance; the weight scales their
    sum by the cycle time, the layer's total bits, and its priority. Used
    strictly ordinally.
    """
    if cycle_time <= 0:
        raise ValueError("cycle_time must be > 0")
    if layer_number < 1:
        raise ValueError("layer_number is 1-based")
    for request in requests:
        if request.layer != layer_number - 1:
            raise ValueError("request does not belong to this layer")
    total_bits = sum(r.amount for r in requests)
    return layer_number * ((t + gamma_prop) / cycle_time) * total_bits * priority


def split_quanta(total: int, weights: Sequence[int]) -> list[int]:
    """Apportion ``total`` quanta proportionally by largest remainder.

    Shares sum to ``total`` exactly and each differs from its exact
    proportional value by less than one quantum. An all-zero weight vector
    falls back to an equal split.
    """
    if total < 0:
        raise ValueError("total must be >= 0")
    if not weights:
        return []
    if any(w < 0 for w in weights):
        raise ValueError("weights must be >= 0")
    if sum(weights) == 0:
        weights = [1] * len(weights)
    denom = sum(weights)
    exact = [Fraction(total * w, denom) for w in weights]
    base = [int(e) for e in exact]
    leftover = total - sum(base)
    order = sorted(range(len(weights)), key=lambda i: (base[i] - exact[i], i))
    for i in order[:leftover]:
        base[i] += 1
    return base


def _ceil_quanta(duration_s: float, quantum_s: float) -> int:
    return int(math.ceil(duration_s / quantum_s - 1e-12))


def build_timeline(requests: Sequence[TransmissionRequest],
                   clusters: Sequence[Cluster],
                   cfg: ValidatedConfig) -> Timeline:
    """Build the cycle's slot tree from the registered transmission requests.

    Layer demand is its serialized data time plus a propagation allowance
    (worst sink distance over the propagation speed); the cycle time is the
    sum of demands. Layers emit in descending weight order (ties toward the
    inner layer), clusters and transmitters split their parent proportionally
    to bits. Layers with no requests get no slot. No requests at all yields
    the flagged empty timeline.
    """
    quantum = cfg.slot_quantum
    if not requests:
        return EmptyCycle.timeline(quantum)

    member_cluster: dict[int, Cluster] = {}
    for cluster in clusters:
        for member in cluster.members:
            member_cluster[member] = cluster
    by_layer: dict[int, list[TransmissionRequest]] = {}
    for request in requests:
        home = member_cluster.get(request.ncm_id)
        if home is None:
            raise ValueError(f"request from node {request.ncm_id} maps to no cluster")
        if home.layer != request.layer:
            raise ValueError(f"request from node {request.ncm_id} names layer "
                             f"{request.layer}, cluster {home.id} sits in {home.layer}")
        by_layer.setdefault(request.layer, []).append(request)

    t_per_bit = cfg.pulse_interval
    speed = cfg.channel.propagation_speed_m_s
    demands: dict[int, int] = {}
    gammas: dict[int, float] = {}
    for layer, layer_requests in by_layer.items():
        gamma = max(r.d_k for r in layer_requests) / speed
        bits = sum(r.amount for r in layer_requests)
        demands[layer] = (_ceil_quanta(bits * t_per_bit, quantum)
                          + _ceil_quanta(gamma, quantum))
        gammas[layer] = gamma

    cycle_quanta = sum(demands.values())
    cycle_time = cycle_quanta * quantum
    alpha: dict[int, float] = {}
    for layer, layer_requests in by_layer.items():
        priority = max(r.priority for r in layer_requests)
        alpha[layer] = layer_weight(layer + 1, layer_requests, t_per_bit,
                                    cycle_time, gammas[layer], priority)

    emission_order = sorted(by_layer, key=lambda layer: (-alpha[layer], layer))
    layer_slots: list[Slot] = []
    cluster_slots: dict[int, tuple[Slot, ...]] = {}
    adtn_slots: dict[int, tuple[Slot, ...]] = {}
    cursor = 0
    for layer in emission_order:
        duration = demands[layer]
        layer_slots.append((layer, cursor, duration))

        layer_requests = by_layer[layer]
        per_cluster: dict[int, list[TransmissionRequest]] = {}
        for request in layer_requests:
            per_cluster.setdefault(member_cluster[request.ncm_id].id, []).append(request)
        cluster_ids = sorted(per_cluster)
        shares = split_quanta(duration,
                              [sum(r.amount for r in per_cluster[c]) for c in cluster_ids])
        sub_cursor = cursor
        slots_here: list[Slot] = []
        for cluster_id, share in zip(cluster_ids, shares):
            slots_here.append((cluster_id, sub_cursor, share))

            per_node: dict[int, int] = {}
            for request in per_cluster[cluster_id]:
                per_node[request.ncm_id] = per_node.get(request.ncm_id, 0) + request.amount
            node_ids = sorted(per_node)
            node_shares = split_quanta(share, [per_node[n] for n in node_ids])
            node_cursor = sub_cursor
            node_slots: list[Slot] = []
            for node_id, node_share in zip(node_ids, node_shares):
                node_slots.append((node_id, node_cursor, node_share))
                node_cursor += node_share
            adtn_slots[cluster_id] = tuple(node_slots)
            sub_cursor += share
        cluster_slots[layer] = tuple(slots_here)
        cursor += duration

    return Timeline(quantum_s=quantum, cycle_quanta=cycle_quanta,
                    layer_slots=tuple(layer_slots), cluster_slots=cluster_slots,
                    adtn_slots=adtn_slots, alpha=alpha)


def timeline_to_csv(timeline: Timeline) -> str:
    """Slot dump (level, owner_id, start_ps, duration_ps); layers 1-based."""
    scale = timeline.quantum_s / 1e-12
    out = io.StringIO()
    out.write("level,owner_id,start_ps,duration_ps\n")

    def emit(level: str, owner: int, start_q: int, duration_q: int):
        start = start_q * scale
        duration = duration_q * scale
        out.write(f"{level},{owner},{_format_ps(start)},{_format_ps(duration)}\n")

    for layer, start, duration in timeline.layer_slots:
        emit("layer", layer + 1, start, duration)
        for cluster_id, c_start, c_duration in timeline.cluster_slots.get(layer, ()):
            emit("cluster", cluster_id, c_start, c_duration)
            for node_id, n_start, n_duration in timeline.adtn_slots.get(cluster_id, ()):
                emit("adtn", node_id, n_start, n_duration)
    return out.getvalue()


def _format_ps(value: float) -> str:
    if value == int(value):
        return str(int(value))
    return repr(value)
