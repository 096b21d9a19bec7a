"""Node deployment around the sink and distance-based layer registration."""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

from .energy import e_nps_max
from .netmodel import Mode, NodeState, Position, Role, ValidatedConfig

ORIGIN = Position(0.0, 0.0, 0.0)

# spawn_key tags keep each stochastic phase on its own stream of the root seed
PHASE_DEPLOY = 0


def phase_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for one named phase of a seeded run."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


@dataclass
class Deployment:
    """Sink plus sensor population, after placement and layer registration."""
    nodes: list[NodeState]
    nc_position: Position
    rng_seed: int
    sink: NodeState = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.sink is None:
            self.sink = NodeState(node_id=0, position=self.nc_position,
                                  role=Role.NC, mode=Mode.IDLE)

    def layers(self) -> dict[int, list[NodeState]]:
        """Nodes grouped by 0-based layer, ascending; only layers present."""
        grouped: dict[int, list[NodeState]] = {}
        for node in self.nodes:
            grouped.setdefault(node.layer, []).append(node)
        return dict(sorted(grouped.items()))


def _sample_positions(rng: np.random.Generator, count: int,
                      radius: float, shape: str) -> list[Position]:
    if shape == "cube":
        coords = rng.uniform(-radius, radius, size=(count, 3))
        return [Position(*row) for row in coords]
    # Uniform in a ball: isotropic direction, cube-root radial profile.
    directions = rng.normal(size=(count, 3))
    norms = np.linalg.norm(directions, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    radii = radius * rng.uniform(size=(count, 1)) ** (1.0 / 3.0)
    coords = directions / norms * radii
    return [Position(*row) for row in coords]


def layer_of(distance: float, tx_range_r: float) -> int:
    """0-based layer for a node at the given sink distance.

    Layers are half a transmission range deep, so a node at exactly m*r/2
    lands in layer m; distances within floating-point noise of a boundary are
    snapped to it first.
    """
    if distance < 0:
        raise ValueError("distance must be >= 0")
    if tx_range_r <= 0:
        raise ValueError("tx_range_r must be > 0")
    q = 2.0 * distance / tx_range_r
    nearest = round(q)
    if abs(q - nearest) <= 1e-9 * (abs(q) + 1.0):
        q = nearest
    return int(math.floor(q))


def assign_layers(dep: Deployment, tx_range_r: float) -> Deployment:
    """Stamp every node with its layer index; the sink stays unlayered."""
    for node in dep.nodes:
        node.layer = layer_of(node.position.distance_to(dep.nc_position), tx_range_r)
    return dep


def deploy(cfg: ValidatedConfig,
           rng: np.random.Generator | None = None) -> Deployment:
    """Place the sink at the origin and the sensors uniformly in the volume.

    Node ids start at 1 (0 is the sink). Starting charge is either a fixed
    fraction of the storage ceiling or uniform on [0.5, 1.0] of it.
    """
    if rng is None:
        rng = phase_rng(cfg.seed, PHASE_DEPLOY)
    e_max = e_nps_max(cfg.energy)
    if cfg.initial_energy_fraction == "random":
        fractions = rng.uniform(0.5, 1.0, size=cfg.node_count)
    else:
        fractions = np.full(cfg.node_count, float(cfg.initial_energy_fraction))
    positions = _sample_positions(rng, cfg.node_count,
                                  cfg.deployment_radius, cfg.deployment_shape)
    quanta = math.floor((e_max - cfg.energy.e_min_j) / cfg.energy.e_tx_j)
    nodes = []
    for idx in range(cfg.node_count):
        residual = float(fractions[idx]) * e_max
        state = min(quanta, int((residual - cfg.energy.e_min_j) // cfg.energy.e_tx_j))
        nodes.append(NodeState(
            node_id=idx + 1,
            position=positions[idx],
            role=Role.NCM,
            residual_energy=residual,
            energy_state=max(0, state),
            mode=Mode.HARVESTING,
        ))
    dep = Deployment(nodes=nodes, nc_position=ORIGIN, rng_seed=cfg.seed)
    dep.sink.residual_energy = e_max
    return assign_layers(dep, cfg.tx_range_r)


def pairwise_distance(a: NodeState, b: NodeState) -> float:
    return a.position.distance_to(b.position)


def nodes_to_csv(dep: Deployment) -> str:
    """Coordinate dump (id,x,y,z,layer) with 1-based layer numbers."""
    out = io.StringIO()
    out.write("id,x,y,z,layer\n")
    for node in dep.nodes:
        p = node.position
        out.write(f"{node.node_id},{p.x!r},{p.y!r},{p.z!r},{node.layer + 1}\n")
    return out.getvalue()
