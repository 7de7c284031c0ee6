"""Independent brute-force oracles.

Each oracle recomputes its answer by explicit enumeration, sharing no code
path with the implementation it checks (only plain data structures).
"""

from __future__ import annotations

import math
import random

from fwdsim import DataPiece, PathTable, install_path

from conftest import make_net


def brute_force_epoch_bound(net, table, pieces, params) -> float:
    """Minimum lifetime over nodes with at least one activated outgoing link,
    by direct enumeration."""
    best = math.inf
    for u in net.nodes:
        active = [v for v in net.neighbors[u]
                  if net.links[(u, v)].active_pieces]
        if not active:
            continue
        spend = 0.0
        for v in sorted(active):
            rate = 0.0
            for piece in sorted(pieces, key=lambda p: p.id):
                row = table.row(piece.id, u)
                if (row is not None and row.next == v
                        and piece.id in net.links[(u, v)].active_pieces):
                    rate += piece.rate
            spend += net.links[(u, v)].eps_j * rate
        energy = net.nodes[u].energy_j
        if energy <= 0.0:
            life = 0.0
        elif energy <= params.config_phase_energy_j:
            life = 1.0
        elif spend == 0.0:
            life = math.inf
        else:
            life = energy / spend
        best = min(best, life)
    return best


def random_epoch_instance(rng: random.Random):
    """A random network with random simple chains installed, for the epoch
    bound oracle."""
    n = rng.randint(3, 20)
    nodes = list(range(n))
    edges = set()
    for u in nodes[1:]:                      # random connected backbone
        v = rng.choice(nodes[:u])
        edges.add((min(u, v), max(u, v)))
    extra = rng.randint(0, n)
    for _ in range(extra):
        u, v = rng.sample(nodes, 2)
        edges.add((min(u, v), max(u, v)))
    directed = {}
    for u, v in edges:
        for a, b in ((u, v), (v, u)):
            directed[(a, b)] = (rng.choice([25e-6, 50e-6, 100e-6]),
                                rng.uniform(5.0, 15.0))
    energies = {u: rng.choice([0.0, 0.002, 0.5, 2.0, 10.0]) for u in nodes}
    net = make_net(directed, energies)
    table = PathTable()
    pieces = []
    adjacency = net.neighbors
    for pid in range(rng.randint(1, 4)):
        start = rng.choice(nodes)
        chain = [start]
        while len(chain) < rng.randint(2, 6):
            options = [v for v in adjacency[chain[-1]] if v not in chain]
            if not options:
                break
            chain.append(rng.choice(options))
        if len(chain) < 2:
            continue
        piece = DataPiece(id=pid, source=chain[0], consumer=chain[-1],
                          rate=rng.randint(0, 8),
                          proxy=chain[len(chain) // 2])
        pieces.append(piece)
        install_path(net, table, piece, chain)
    return net, table, pieces


def enumerate_best_bottleneck(view, src, dst, budget, rate, round_trip=False):
    """Exhaustive simple-path search for the latency-bounded maximum
    bottleneck; returns (bottleneck, hops, path) or None."""
    best = None

    def edge_cost(u, v):
        lat = view.edges[(u, v)][1]
        if round_trip:
            lat += view.edges[(v, u)][1]
        return lat

    def dfs(node, latency, bottleneck, path):
        nonlocal best
        if node == dst:
            key = (-bottleneck, len(path) - 1, tuple(path))
            if best is None or key < best[0]:
                best = (key, bottleneck, path[:])
            return
        for v in sorted(w for (u, w) in view.edges if u == node):
            if v in path:
                continue
            nlat = latency + edge_cost(node, v)
            if budget is not None and nlat > budget:
                continue
            nbot = min(bottleneck, view.edge_lifetime(node, v, rate))
            path.append(v)
            dfs(v, nlat, nbot, path)
            path.pop()

    dfs(src, 0.0, math.inf, [src])
    if best is None:
        return None
    return best[1], len(best[2]) - 1, best[2]


def random_planner_graph(rng: random.Random, max_nodes: int = 8):
    """Random small connected graph expressed as a PlannerView plus the raw
    pieces needed to drive compute_plan."""
    from fwdsim import LifetimeParams, PlannerView, StatusReport

    n = rng.randint(3, max_nodes)
    nodes = list(range(n))
    edges = set()
    for u in nodes[1:]:
        v = rng.choice(nodes[:u])
        edges.add((min(u, v), max(u, v)))
    for _ in range(rng.randint(0, 2 * n)):
        u, v = rng.sample(nodes, 2)
        edges.add((min(u, v), max(u, v)))
    links = {}
    for u, v in edges:
        links[(u, v)] = (rng.choice([25e-6, 50e-6, 100e-6]), rng.uniform(3.0, 20.0))
        links[(v, u)] = (rng.choice([25e-6, 50e-6, 100e-6]), rng.uniform(3.0, 20.0))
    reports = []
    for u in nodes:
        own = {v: links[(u, v)] for (a, v) in links if a == u}
        reports.append(StatusReport(node=u,
                                    energy_j=rng.choice([0.05, 0.5, 2.0, 8.0]),
                                    links=own))
    params = LifetimeParams(config_phase_energy_j=5e-3)
    view = PlannerView.from_status(reports, params)
    for u in nodes:                      # pre-existing load on some nodes
        if rng.random() < 0.4:
            view.spend[u] = rng.uniform(0.0, 2e-4)
    return view, nodes


def enumerate_single_piece_plan(view, piece, proxies, budget):
    """Best (proxy, source path, consumer path) triple by full enumeration:
    max bottleneck, then fewest total hops, then smallest chain."""
    best = None
    for proxy in sorted(proxies):
        if proxy in (piece.source, piece.consumer):
            continue
        if proxy not in view.energy:
            continue
        s_paths = _all_simple_paths(view, piece.source, proxy)
        c_paths = _all_simple_paths(view, proxy, piece.consumer)
        for sp in s_paths:
            for cp in c_paths:
                if set(sp) & set(cp) != {proxy}:
                    continue
                rt = sum(view.edges[(u, v)][1] + view.edges[(v, u)][1]
                         for u, v in zip(cp, cp[1:]))
                if rt > budget:
                    continue
                chain = sp + cp[1:]
                bot = min(view.edge_lifetime(u, v, piece.rate)
                          for u, v in zip(chain, chain[1:]))
                key = (-bot, len(chain) - 1, tuple(chain), proxy)
                if best is None or key < best[0]:
                    best = (key, proxy, sp, cp, bot)
    return best


def _all_simple_paths(view, src, dst):
    out = []

    def dfs(node, path):
        if node == dst:
            out.append(path[:])
            return
        for v in sorted(w for (u, w) in view.edges if u == node):
            if v in path:
                continue
            path.append(v)
            dfs(v, path)
            path.pop()

    dfs(src, [src])
    return out
