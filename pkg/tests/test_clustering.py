"""Cluster-head election, membership, and rotation."""
import warnings

import numpy as np
import pytest

from nanonetsim.clustering import (Cluster, OrphanNode, clusters_to_csv,
                                   elect_nccs, rotate_ncc, weight)
from nanonetsim.netmodel import NodeState, Position, Role, SimConfig, validate_config
from nanonetsim.topology import ORIGIN, Deployment, assign_layers


def _cfg(**kw):
    return validate_config(SimConfig(**kw))


def _world(spots, residuals, cfg):
    nodes = [NodeState(i + 1, Position(*p), residual_energy=e)
             for i, (p, e) in enumerate(zip(spots, residuals))]
    dep = Deployment(nodes=nodes, nc_position=ORIGIN, rng_seed=0)
    return assign_layers(dep, cfg.tx_range_r)


def test_weight_is_normalized_residual():
    node = NodeState(1, Position(0.001, 0, 0), residual_energy=2.0e-10)
    assert weight(node, 8.0e-10) == pytest.approx(0.25, rel=1e-12)
    assert weight(NodeState(2, ORIGIN, residual_energy=8.0e-10), 8.0e-10) == 1.0


def test_weight_rejects_bad_inputs():
    node = NodeState(1, ORIGIN, residual_energy=1.0)
    with pytest.raises(ValueError):
        weight(node, 0.0)
    with pytest.raises(ValueError):
        weight(NodeState(1, ORIGIN, residual_energy=-1e-12), 1e-10)
    with pytest.raises(ValueError):
        weight(NodeState(1, ORIGIN, residual_energy=2e-10), 1e-10)


def test_weight_ordering_invariant_under_ceiling_choice():
    # The election only compares weights inside one deployment, so the
    # argmax must equal the argmax of raw residuals for any ceiling.
    rng = np.random.default_rng(8)
    for _ in range(50):
        residuals = rng.uniform(1e-12, 7.9e-10, size=6)
        nodes = [NodeState(i, ORIGIN, residual_energy=float(e))
                 for i, e in enumerate(residuals)]
        for e_max in (7.938e-10, 1.0e-9, 5.0e-9):
            weights = [weight(n, e_max) for n in nodes]
            assert int(np.argmax(weights)) == int(np.argmax(residuals))


def test_highest_residual_in_range_heads():
    # Three nodes bunched well inside the advert range (r/2 = 5 mm).
    cfg = _cfg(node_count=0)
    dep = _world([(0.002, 0, 0), (0.0025, 0, 0), (0.003, 0, 0)],
                 [3e-10, 6e-10, 4e-10], cfg)
    clusters = elect_nccs(dep, cfg)
    assert len(clusters) == 1
    assert clusters[0].ncc == 2
    assert clusters[0].members == (2, 1, 3)
    assert dep.nodes[1].role is Role.NCC
    assert dep.nodes[0].role is Role.NCM


def test_tied_weights_go_to_lower_id():
    cfg = _cfg(node_count=0)
    dep = _world([(0.002, 0, 0), (0.003, 0, 0)], [5e-10, 5e-10], cfg)
    clusters = elect_nccs(dep, cfg)
    assert [c.ncc for c in clusters] == [1]


def test_distant_groups_each_elect_a_head():
    # Two bunches in the same layer, farther apart than the advert range.
    cfg = _cfg(node_count=0)
    dep = _world([(0.006, 0, 0), (0.0065, 0, 0),
                  (-0.006, 0, 0), (-0.0065, 0, 0)],
                 [5e-10, 4e-10, 3e-10, 6e-10], cfg)
    clusters = elect_nccs(dep, cfg)
    assert sorted(c.ncc for c in clusters) == [1, 4]
    layers = {c.layer for c in clusters}
    assert layers == {1}


def test_orphan_is_reported_not_adopted():
    # Chain in one layer: node 3 is outranked by its neighbor 2, so it never
    # self-elects, yet the only head (1) sits 8 mm away, past the advert
    # range. It must stay unclustered and be warned about, not silently
    # adopted.
    cfg = _cfg(node_count=0)
    spots = [(0.0055, 0.0, 0), (0.0055, 0.004, 0), (0.0055, 0.008, 0)]
    with pytest.warns(OrphanNode, match="node 3"):
        dep = _world(spots, [6e-10, 5e-10, 4e-10], cfg)
        clusters = elect_nccs(dep, cfg)
    assert [c.ncc for c in clusters] == [1]
    assert clusters[0].members == (1, 2)
    assert dep.nodes[2].cluster is None
    assert dep.nodes[2].role is Role.NCM


def test_isolated_node_heads_alone():
    # No in-range rival means self-election, so isolation yields a singleton
    # cluster rather than an orphan.
    cfg = _cfg(node_count=0)
    dep = _world([(0.007, 0, 0), (-0.007, 0, 0)], [3e-10, 2e-10], cfg)
    clusters = elect_nccs(dep, cfg)
    assert [(c.ncc, c.members) for c in clusters] == [(1, (1,)), (2, (2,))]


def test_members_tuple_is_rotation_order():
    cfg = _cfg(node_count=0)
    dep = _world([(0.003, 0, 0), (0.0031, 0, 0), (0.0032, 0, 0)],
                 [6e-10, 5e-10, 4e-10], cfg)
    cluster = elect_nccs(dep, cfg)[0]
    assert cluster.members[0] == cluster.ncc
    assert list(cluster.members[1:]) == sorted(cluster.members[1:])


def test_rotation_is_round_robin():
    cluster = Cluster(id=0, layer=0, ncc=4, members=(4, 7, 9), formed_at=0)
    seen = [cluster.ncc]
    current = cluster
    for _ in range(3):
        current = rotate_ncc(current)
        seen.append(current.ncc)
    assert seen == [4, 7, 9, 4]
    assert current.members == cluster.members


def test_rotation_returns_new_frozen_cluster():
    cluster = Cluster(id=1, layer=0, ncc=2, members=(2, 5), formed_at=0)
    rotated = rotate_ncc(cluster)
    assert rotated is not cluster
    assert cluster.ncc == 2
    with pytest.raises(Exception):
        rotated.ncc = 99


def test_singleton_cluster_rotates_to_itself():
    cluster = Cluster(id=2, layer=1, ncc=3, members=(3,), formed_at=0)
    assert rotate_ncc(cluster).ncc == 3


def test_clusters_csv_schema():
    clusters = [Cluster(id=0, layer=1, ncc=4, members=(4, 7), formed_at=0)]
    text = clusters_to_csv(clusters)
    lines = text.strip().splitlines()
    assert lines[0] == "cluster_id,layer,ncc_id,members"
    assert lines[1] == "0,2,4,4;7"
