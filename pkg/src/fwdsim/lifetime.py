"""Epoch and lifetime arithmetic.

A node's lifetime under a fixed forwarding assignment is measured in cycles:
energy divided by the per-cycle transmit spend implied by the aggregate data
rates on its activated outgoing links. The epoch bound is the minimum of
those lifetimes over nodes that actually transmit. The trigger test decides
whether a link's per-piece energy cost jumped enough between two consecutive
cycles to warrant reconfiguration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .netmodel import DataPiece, NetworkState, NodeId, PathTable

INFINITE_LIFETIME = math.inf


@dataclass(frozen=True)
class LifetimeParams:
    config_phase_energy_j: float = 5e-3   # energy a node needs to finish a configuration phase
    cycle_seconds: float = 1.0
    trigger_threshold: float = 0.5        # relative cost increase that triggers repair

    def __post_init__(self) -> None:
        if self.config_phase_energy_j < 0:
            raise ValueError("config_phase_energy_j must be >= 0")
        if self.cycle_seconds <= 0:
            raise ValueError("cycle_seconds must be > 0")
        if not 0.0 < self.trigger_threshold < 1.0:
            raise ValueError("trigger_threshold must lie in (0, 1)")


def lifetime_from_spend(energy_j: float, spend_j_per_cycle: float,
                        params: LifetimeParams) -> float:
    """Cycles until a node empties, given its total per-cycle transmit spend.

    Three regimes: an empty node has no lifetime; a node that can only afford
    the configuration phase survives exactly one cycle; otherwise energy over
    spend. Zero spend with energy to spare is the idle case and yields the
    infinite sentinel (callers exclude idle nodes from epoch minima).
    """
    if energy_j <= 0.0:
        return 0.0
    if energy_j <= params.config_phase_energy_j:
        return 1.0
    if spend_j_per_cycle == 0.0:
        return INFINITE_LIFETIME
    return energy_j / spend_j_per_cycle


def node_lifetime(energy_j: float, rates: dict[NodeId, float],
                  eps_per_link: dict[NodeId, float],
                  params: LifetimeParams) -> float:
    """Lifetime of one node from its per-neighbor aggregate rates and link costs."""
    if set(rates) != set(eps_per_link):
        raise ValueError("rates and eps_per_link must cover the same link set")
    spend = 0.0
    for v in sorted(rates):
        spend += eps_per_link[v] * rates[v]
    return lifetime_from_spend(energy_j, spend, params)


def aggregate_rates(net: NetworkState, table: PathTable,
                    pieces: list[DataPiece]) -> dict[NodeId, dict[NodeId, float]]:
    """Per-node, per-neighbor aggregate data rate over activated links."""
    rates: dict[NodeId, dict[NodeId, float]] = {}
    for piece in sorted(pieces, key=lambda p: p.id):
        for node, row in sorted(table.rows_for_piece(piece.id).items()):
            v = row.next
            if v is None:
                continue
            link = net.links.get((node, v))
            if link is None or piece.id not in link.active_pieces:
                continue
            rates.setdefault(node, {}).setdefault(v, 0.0)
            rates[node][v] += piece.rate
    return rates


def max_epoch_duration(net: NetworkState, table: PathTable,
                       pieces: list[DataPiece], params: LifetimeParams) -> float:
    """Upper bound on the epoch length: the shortest lifetime among nodes with
    at least one activated outgoing link. Infinite when nothing transmits."""
    rates = aggregate_rates(net, table, pieces)
    best = INFINITE_LIFETIME
    for u in sorted(net.nodes):
        active = {v for v in net.neighbors[u]
                  if net.links[(u, v)].active_pieces}
        if not active:
            continue
        per_link = {v: rates.get(u, {}).get(v, 0.0) for v in sorted(active)}
        eps = {v: net.links[(u, v)].eps_j for v in sorted(active)}
        life = node_lifetime(net.nodes[u].energy_j, per_link, eps, params)
        if life < best:
            best = life
    return best


def trigger_check(eps_now_j: float, eps_prev_j: float, threshold: float) -> bool:
    """True iff the relative cost increase, normalized by the current value,
    strictly exceeds the threshold."""
    if eps_now_j <= 0.0:
        raise ValueError("current link cost must be positive")
    return (eps_now_j - eps_prev_j) / eps_now_j > threshold
