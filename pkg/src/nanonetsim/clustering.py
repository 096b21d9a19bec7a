"""Cluster-head election by normalized residual energy and round-robin rotation.

Clustering runs once per simulation; afterwards only rotation changes heads.
Clusters are immutable snapshots so phases can exchange them safely.
"""
from __future__ import annotations

import io
import warnings
from dataclasses import dataclass, replace

from .energy import e_nps_max
from .netmodel import NodeState, Role, ValidatedConfig
from .topology import Deployment, pairwise_distance


class OrphanNode(UserWarning):
    """A node found no cluster head within advertisement range."""


@dataclass(frozen=True)
class Cluster:
    """One cluster: head, members in rotation order, and its layer."""
    id: int
    layer: int                    # 0-based
    ncc: int                      # current head's node id
    members: tuple[int, ...]      # rotation order: head first, joiners by ascending id
    formed_at: int                # cycle index of formation


def weight(node: NodeState, e_max: float) -> float:
    """Normalized residual energy of a node, in [0, 1]."""
    if e_max <= 0:
        raise ValueError("e_max must be > 0")
    if not 0.0 <= node.residual_energy <= e_max * (1.0 + 1e-12):
        raise ValueError("residual_energy must lie in [0, e_max]")
    return min(node.residual_energy / e_max, 1.0)


def _beats(a: NodeState, b: NodeState, e_max: float) -> bool:
    """True when a outranks b for head election (higher weight, then lower id)."""
    wa, wb = weight(a, e_max), weight(b, e_max)
    if wa != wb:
        return wa > wb
    return a.node_id < b.node_id


def elect_nccs(dep: Deployment, cfg: ValidatedConfig,
               formed_at: int = 0) -> list[Cluster]:
    """Form clusters in every layer from the current residual energies.

    A node declares itself head when no in-range same-layer neighbor outranks
    it; remaining nodes join the nearest in-range head (strongest received
    advertisement under the monotone power-distance law). Join order, and so
    rotation order, is ascending node id after the head. Nodes with no head in
    range are reported through an OrphanNode warning and left unclustered.

    Election also stamps node roles and cluster ids in place.
    """
    advert_range = cfg.tx_range_r * cfg.cluster_range_factor
    e_max = e_nps_max(cfg.energy)
    clusters: list[Cluster] = []
    next_id = 0
    for layer_idx, layer_nodes in sorted(dep.layers().items()):
        heads = []
        for node in layer_nodes:
            rivals = (
                other for other in layer_nodes
                if other.node_id != node.node_id
                and pairwise_distance(node, other) <= advert_range
            )
            if not any(_beats(other, node, e_max) for other in rivals):
                heads.append(node)
        heads.sort(key=lambda n: n.node_id)
        membership: dict[int, list[int]] = {h.node_id: [] for h in heads}
        for node in sorted(layer_nodes, key=lambda n: n.node_id):
            if node.node_id in membership:
                continue
            best = None
            best_key = None
            for head in heads:
                d = pairwise_distance(node, head)
                if d > advert_range:
                    continue
                key = (d, head.node_id)
                if best_key is None or key < best_key:
                    best, best_key = head, key
            if best is None:
                warnings.warn(OrphanNode(
                    f"node {node.node_id} (layer {layer_idx + 1}) has no head "
                    f"within {advert_range!r} m"))
                node.role = Role.NCM
                node.cluster = None
                continue
            membership[best.node_id].append(node.node_id)
        for head in heads:
            members = (head.node_id, *membership[head.node_id])
            clusters.append(Cluster(id=next_id, layer=layer_idx, ncc=head.node_id,
                                    members=members, formed_at=formed_at))
            next_id += 1
    by_id = {n.node_id: n for n in dep.nodes}
    for cluster in clusters:
        for member in cluster.members:
            node = by_id[member]
            node.cluster = cluster.id
            node.role = Role.NCC if member == cluster.ncc else Role.NCM
    return clusters


def rotate_ncc(cluster: Cluster) -> Cluster:
    """Hand the head role to the next member in rotation order, wrapping.

    Pending aggregate state is keyed by cluster id elsewhere, so it follows
    the head implicitly.
    """
    if not cluster.members:
        raise ValueError("cluster has no members")
    idx = cluster.members.index(cluster.ncc)
    successor = cluster.members[(idx + 1) % len(cluster.members)]
    return replace(cluster, ncc=successor)


def clusters_to_csv(clusters: list[Cluster]) -> str:
    """Cluster dump with 1-based layer numbers; member ids ;-joined."""
    out = io.StringIO()
    out.write("cluster_id,layer,ncc_id,member_ids\n")
    for c in clusters:
        members = ";".join(str(m) for m in c.members)
        out.write(f"{c.id},{c.layer + 1},{c.ncc},{members}\n")
    return out.getvalue()
