"""Shared fixture builders for hand-crafted networks and mini simulations."""

from __future__ import annotations

import pytest

from fwdsim import (DataPiece, InterferenceConfig, LatencyEnergyConfig,
                    LinkState, NetworkState, NodeState, PathTable,
                    ScenarioConfig, Simulation, install_path)


def make_net(edges, energies, proxies=frozenset(), eps=50e-6, latency=10.0,
             positions=None):
    """Build a NetworkState from an explicit edge list.

    ``edges`` is an iterable of undirected pairs, or a dict mapping directed
    pairs to (eps, latency); undirected pairs get identical attributes both
    ways. ``energies`` maps node -> joules.
    """
    links = {}
    if isinstance(edges, dict):
        for (u, v), (e, lat) in edges.items():
            links[(u, v)] = LinkState(eps_j=e, eps_prev_j=e, latency_ms=lat)
        for (u, v) in list(links):
            if (v, u) not in links:
                mirror = links[(u, v)]
                links[(v, u)] = LinkState(eps_j=mirror.eps_j,
                                          eps_prev_j=mirror.eps_j,
                                          latency_ms=mirror.latency_ms)
    else:
        for u, v in edges:
            for a, b in ((u, v), (v, u)):
                links[(a, b)] = LinkState(eps_j=eps, eps_prev_j=eps,
                                          latency_ms=latency)
    nodes = {}
    neighbor_map = {u: [] for u in energies}
    for (u, v) in links:
        neighbor_map[u].append(v)
    for u, energy in energies.items():
        pos = positions[u] if positions else (float(u), 0.0)
        nodes[u] = NodeState(node=u, pos=pos, initial_energy_j=energy,
                             is_proxy=u in proxies)
    return NetworkState(
        nodes=nodes,
        links=links,
        proxies=set(proxies),
        neighbors={u: tuple(sorted(set(vs))) for u, vs in neighbor_map.items()},
        link_params=LatencyEnergyConfig(),
    )


def quiet_config(**overrides) -> ScenarioConfig:
    """A scenario with no stochastic inputs, for fixture-driven runs."""
    base = dict(
        horizon=50,
        strategy="DistrDataFwd",
        request_prob=0.0,
        interference=InterferenceConfig(prob_per_cycle=0.0),
        seed=0,
    )
    base.update(overrides)
    return ScenarioConfig(**base)


def mini_sim(net, specs, **cfg_overrides) -> Simulation:
    """Simulation over a prebuilt network.

    ``specs`` is a list of (source, consumer, proxy, rate, chain) tuples; the
    chain is installed directly, no planner involved.
    """
    table = PathTable()
    pieces = []
    for pid, (src, cons, proxy, rate, chain) in enumerate(specs):
        piece = DataPiece(id=pid, source=src, consumer=cons, rate=rate,
                          proxy=proxy)
        pieces.append(piece)
        install_path(net, table, piece, list(chain))
    cfg = quiet_config(**cfg_overrides)
    return Simulation(cfg, net=net, table=table, pieces=pieces)


def spike_link(sim: Simulation, u: int, v: int, factor: float = 2.5) -> None:
    """Raise one link's per-piece cost as interference would, so the next
    protocol scan sees the jump."""
    link = sim.net.links[(u, v)]
    link.eps_prev_j = link.eps_j
    link.eps_j = link.eps_j * factor


def settle_links(sim: Simulation) -> None:
    for link in sim.net.links.values():
        link.eps_prev_j = link.eps_j


def surviving_violations(sim: Simulation, kinds=("loop", "pointer-asymmetry")):
    """Loop/symmetry violations among pieces that are not marked broken."""
    from fwdsim import validate_paths

    alive_pieces = [p for p in sim.pieces if not sim.piece_status[p.id].broken]
    report = validate_paths(sim.net, sim.table, alive_pieces)
    return report.of_kind(*kinds)


@pytest.fixture
def grid18():
    from fwdsim import build_grid_topology

    return build_grid_topology(3, 6, 2.5, 3.6, {4, 7, 10, 13}, seed=1)
