"""Node placement, layer registration, and deployment determinism."""
import math

import pytest

from nanonetsim.netmodel import SimConfig, validate_config
from nanonetsim import energy
from nanonetsim.topology import (Deployment, deploy, layer_of, nodes_to_csv,
                                 phase_rng)


def _cfg(**kw):
    return validate_config(SimConfig(**kw))


def test_layer_registration_examples():
    # floor(2 * 12mm / 10mm) = 2, even though that exceeds the nominal
    # two-layer deployment: registration never clamps.
    assert layer_of(0.012, 0.010) == 2
    assert layer_of(0.0, 0.010) == 0
    assert layer_of(0.004, 0.010) == 0
    assert layer_of(0.005, 0.010) == 1


def test_layer_boundaries_exact():
    r = 0.010
    for m in range(8):
        assert layer_of(m * r / 2, r) == m


def test_layer_boundary_snaps_float_noise():
    r = 0.010
    d = 3 * (r / 2)
    assert layer_of(d * (1 - 1e-13), r) == 3     # snapped up to the boundary
    assert layer_of(d * (1 - 1e-6), r) == 2      # genuinely below it


def test_deploy_is_seed_deterministic():
    cfg = _cfg(node_count=40, seed=5)
    a = deploy(cfg)
    b = deploy(cfg)
    assert [n.position for n in a.nodes] == [n.position for n in b.nodes]
    assert [n.residual_energy for n in a.nodes] == [n.residual_energy for n in b.nodes]
    c = deploy(_cfg(node_count=40, seed=6))
    assert [n.position for n in a.nodes] != [n.position for n in c.nodes]


def test_deploy_stays_in_volume():
    cfg = _cfg(node_count=200, seed=2)
    dep = deploy(cfg)
    for node in dep.nodes:
        assert node.position.distance_to(dep.nc_position) <= cfg.deployment_radius + 1e-15

    cube = _cfg(node_count=200, seed=2, deployment_shape="cube")
    for node in deploy(cube).nodes:
        for coord in (node.position.x, node.position.y, node.position.z):
            assert abs(coord) <= cube.deployment_radius + 1e-15


def test_empty_deployment_keeps_sink():
    dep = deploy(_cfg(node_count=0))
    assert dep.nodes == []
    assert dep.sink.node_id == 0
    assert dep.sink.layer == 0


def test_node_ids_and_layers_assigned():
    cfg = _cfg(node_count=30, seed=3)
    dep = deploy(cfg)
    assert [n.node_id for n in dep.nodes] == list(range(1, 31))
    for node in dep.nodes:
        d = node.position.distance_to(dep.nc_position)
        assert node.layer == layer_of(d, cfg.tx_range_r)
    assert set(dep.layers()) <= {0, 1}


def test_initial_energy_random_band():
    cfg = _cfg(node_count=50, seed=4)
    e_max = energy.e_nps_max(cfg.energy)
    for node in deploy(cfg).nodes:
        assert 0.5 * e_max <= node.residual_energy <= e_max


def test_initial_energy_fixed_fraction():
    cfg = _cfg(node_count=5, initial_energy_fraction=0.25)
    e_max = energy.e_nps_max(cfg.energy)
    for node in deploy(cfg).nodes:
        assert node.residual_energy == pytest.approx(0.25 * e_max, rel=1e-12)
        expected_u = min(7, int((node.residual_energy - cfg.energy.e_min_j)
                                / cfg.energy.e_tx_j))
        assert node.energy_state == expected_u


def test_nodes_csv_uses_presentation_layers():
    cfg = _cfg(node_count=4, seed=1)
    text = nodes_to_csv(deploy(cfg))
    lines = text.strip().splitlines()
    assert lines[0] == "id,x,y,z,layer"
    assert len(lines) == 5
    for line in lines[1:]:
        layer = int(line.rsplit(",", 1)[1])
        assert layer >= 1


def test_phase_rng_streams_are_independent():
    a = phase_rng(1, 0).random(4).tolist()
    b = phase_rng(1, 1).random(4).tolist()
    c = phase_rng(1, 0).random(4).tolist()
    assert a == c
    assert a != b
