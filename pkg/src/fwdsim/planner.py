"""Centralized controller: initial forwarding plans and full recomputation.

The controller assembles node status reports into a view of the alive
network, then assigns each piece a caching proxy plus a source segment and a
consumer segment. Segments are chosen to maximize the minimum projected
lifetime of their transmitting nodes, subject to the round-trip access
latency budget on the consumer side. Planning is greedy in descending rate
order and fully deterministic under the documented tie-breaking.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

from .lifetime import LifetimeParams, lifetime_from_spend
from .netmodel import NetworkState, NodeId


class PlanningError(RuntimeError):
    pass


@dataclass(frozen=True)
class StatusReport:
    node: NodeId
    energy_j: float
    links: dict[NodeId, tuple[float, float]]   # neighbor -> (eps_j, latency_ms)


@dataclass
class PiecePlan:
    proxy: NodeId
    source_segment: list[NodeId]     # source .. proxy
    consumer_segment: list[NodeId]   # proxy .. consumer

    @property
    def chain(self) -> list[NodeId]:
        return self.source_segment + self.consumer_segment[1:]


@dataclass
class Plan:
    pieces: dict[int, PiecePlan] = field(default_factory=dict)
    infeasible: dict[int, str] = field(default_factory=dict)

    def to_text(self) -> str:
        out = []
        for pid in sorted(self.pieces):
            pp = self.pieces[pid]
            out.append(f"piece {pid} proxy={pp.proxy} "
                       f"source={'-'.join(map(str, pp.source_segment))} "
                       f"consumer={'-'.join(map(str, pp.consumer_segment))}")
        for pid in sorted(self.infeasible):
            out.append(f"piece {pid} infeasible: {self.infeasible[pid]}")
        return "\n".join(out) + "\n"


@dataclass
class PlannerView:
    """Controller-side picture of the alive network built from status reports."""

    energy: dict[NodeId, float]
    edges: dict[tuple[NodeId, NodeId], tuple[float, float]]  # (eps_j, latency_ms)
    spend: dict[NodeId, float]                               # accumulated J/cycle
    params: LifetimeParams

    @classmethod
    def from_status(cls, reports: list[StatusReport],
                    params: LifetimeParams) -> "PlannerView":
        energy = {}
        edges = {}
        for rep in sorted(reports, key=lambda r: r.node):
            energy[rep.node] = rep.energy_j
        for rep in sorted(reports, key=lambda r: r.node):
            for v, (eps, lat) in sorted(rep.links.items()):
                if v in energy:                      # both endpoints reported alive
                    edges[(rep.node, v)] = (eps, lat)
        return cls(energy=energy, edges=edges,
                   spend={u: 0.0 for u in energy}, params=params)

    def out_neighbors(self, u: NodeId) -> list[NodeId]:
        return sorted(v for (a, v) in self.edges if a == u)

    def edge_lifetime(self, u: NodeId, v: NodeId, rate: float) -> float:
        """Projected lifetime of u if it also forwards this piece over (u, v)."""
        eps, _ = self.edges[(u, v)]
        return lifetime_from_spend(self.energy[u], self.spend[u] + eps * rate,
                                   self.params)

    def commit(self, chain: list[NodeId], rate: float) -> None:
        for u, v in zip(chain, chain[1:]):
            eps, _ = self.edges[(u, v)]
            self.spend[u] += eps * rate


def status_from_network(net: NetworkState) -> list[StatusReport]:
    """Status reports for every alive node, as uploaded to the controller."""
    reports = []
    for u in sorted(net.nodes):
        node = net.nodes[u]
        if not node.alive or node.energy_j <= 0.0:
            continue
        links = {v: (net.links[(u, v)].eps_j, net.links[(u, v)].latency_ms)
                 for v in net.neighbors[u]}
        reports.append(StatusReport(node=u, energy_j=node.energy_j, links=links))
    return reports


INFINITY = float("inf")


def _edge_weight(view: PlannerView, u: NodeId, v: NodeId, round_trip: bool) -> float:
    _, lat = view.edges[(u, v)]
    if not round_trip:
        return lat
    back = view.edges.get((v, u))
    if back is None:
        return INFINITY
    return lat + back[1]


def bottleneck_path(
    view: PlannerView,
    src: NodeId,
    dst: NodeId,
    latency_budget_ms: float | None,
    rate: float,
    round_trip: bool = False,
    excluded: frozenset[NodeId] | set[NodeId] = frozenset(),
    hop_only: bool = False,
) -> list[NodeId] | None:
    """Path from src to dst maximizing the minimum projected lifetime of its
    transmitting nodes, among paths whose total latency fits the budget.

    Label-correcting search keeping Pareto-optimal (latency, bottleneck, hops)
    labels per node; a budget of None disables the constraint and the budget
    comparison is inclusive. Ties resolve toward fewer hops, then the
    lexicographically smallest node sequence among surviving labels. Returns
    None when no feasible path exists. With ``hop_only`` the lifetime
    criterion is ignored and the search simply minimizes hops within the
    budget (used to generate low-blocking candidate segments).
    """
    if src == dst:
        raise PlanningError("source and target must differ")
    if src not in view.energy or dst not in view.energy:
        return None
    if src in excluded or dst in excluded:
        return None
    budget = INFINITY if latency_budget_ms is None else latency_budget_ms

    labels: dict[NodeId, list[tuple[float, float, int]]] = {src: [(0.0, INFINITY, 0)]}
    best_terminal: tuple[float, int, tuple[NodeId, ...]] | None = None  # (-bot, hops, path)
    heap: list[tuple[float, float, int, tuple[NodeId, ...]]] = [(-INFINITY, 0.0, 0, (src,))]

    while heap:
        neg_bot, lat, hops, path = heapq.heappop(heap)
        bot = -neg_bot
        if best_terminal is not None and bot < -best_terminal[0]:
            # Bottlenecks only shrink along a path and the heap pops them in
            # descending order, so no remaining label can beat the incumbent.
            break
        u = path[-1]
        if u == dst:
            cand = (neg_bot, hops, path)
            if best_terminal is None or cand < best_terminal:
                best_terminal = cand
            continue
        for v in view.out_neighbors(u):
            if v in excluded or v in path:
                continue
            nlat = lat + _edge_weight(view, u, v, round_trip)
            if nlat > budget:
                continue
            if hop_only:
                nbot = INFINITY
            else:
                nbot = min(bot, view.edge_lifetime(u, v, rate))
            bucket = labels.setdefault(v, [])
            if _dominated(bucket, nlat, nbot, hops + 1):
                continue
            _insert_label(bucket, nlat, nbot, hops + 1)
            heapq.heappush(heap, (-nbot, nlat, hops + 1, path + (v,)))

    if best_terminal is None:
        return None
    return list(best_terminal[2])


def _dominated(existing: list[tuple[float, float, int]],
               lat: float, bot: float, hops: int) -> bool:
    return any(elat <= lat and ebot >= bot and ehops <= hops
               for (elat, ebot, ehops) in existing)


def _insert_label(existing: list[tuple[float, float, int]],
                  lat: float, bot: float, hops: int) -> None:
    existing[:] = [(elat, ebot, ehops) for (elat, ebot, ehops) in existing
                   if not (lat <= elat and bot >= ebot and hops <= ehops)]
    existing.append((lat, bot, hops))


def path_bottleneck(view: PlannerView, chain: list[NodeId], rate: float) -> float:
    """Minimum projected lifetime over a chain's transmitting nodes."""
    return min(view.edge_lifetime(u, v, rate) for u, v in zip(chain, chain[1:]))


def compute_plan(
    reports: list[StatusReport],
    pieces,
    proxies: set[NodeId],
    latency_budget_ms: float,
    params: LifetimeParams,
) -> Plan:
    """Assign every piece a proxy and both path segments.

    Pieces are planned greedily in descending rate order against the rates
    accumulated so far. Per piece, every alive proxy is tried; the consumer
    segment carries the round-trip latency budget, the source segment only
    needs to exist. Segments may share no node but the proxy. Unplannable
    pieces are reported in ``Plan.infeasible``; the caller counts their
    traffic as lost until a later plan covers them.
    """
    if latency_budget_ms <= 0:
        raise PlanningError("latency budget must be positive")
    view = PlannerView.from_status(reports, params)
    plan = Plan()
    alive_proxies = sorted(p for p in proxies if p in view.energy)

    for piece in sorted(pieces, key=lambda p: (-p.rate, p.id)):
        if piece.source not in view.energy:
            plan.infeasible[piece.id] = "source not alive"
            continue
        if piece.consumer not in view.energy:
            plan.infeasible[piece.id] = "consumer not alive"
            continue
        best = None   # (-bottleneck, hops, chain, proxy, s_seg, c_seg)
        for proxy in alive_proxies:
            if proxy in (piece.source, piece.consumer):
                continue
            for candidate in _candidate_segments(view, piece, proxy,
                                                 latency_budget_ms):
                s_seg, c_seg = candidate
                chain = s_seg + c_seg[1:]
                bot = path_bottleneck(view, chain, piece.rate)
                key = (-bot, len(chain) - 1, tuple(chain), proxy)
                if best is None or key < best[0]:
                    best = (key, proxy, s_seg, c_seg)
        if best is None:
            plan.infeasible[piece.id] = "no latency-feasible path"
            continue
        _, proxy, s_seg, c_seg = best
        plan.pieces[piece.id] = PiecePlan(proxy=proxy, source_segment=s_seg,
                                          consumer_segment=c_seg)
        view.commit(s_seg + c_seg[1:], piece.rate)
    return plan


def _candidate_segments(view: PlannerView, piece, proxy: NodeId,
                        budget_ms: float):
    """Candidate (source_segment, consumer_segment) pairs for one proxy.

    Tries each side first with the other fit around it, both in the
    lifetime-maximizing and the hop-minimizing (low-blocking) variants, so
    one side's choice cannot starve the other of every feasible route."""
    out = []
    firsts_c = []
    for hop_only in (False, True):
        c_seg = bottleneck_path(view, proxy, piece.consumer, budget_ms,
                                piece.rate, round_trip=True, hop_only=hop_only)
        if c_seg is not None and piece.source not in c_seg and c_seg not in firsts_c:
            firsts_c.append(c_seg)
    for c_seg in firsts_c:
        s_seg = bottleneck_path(view, piece.source, proxy, None, piece.rate,
                                excluded=frozenset(c_seg) - {proxy})
        if s_seg is not None:
            out.append((s_seg, c_seg))
    firsts_s = []
    for hop_only in (False, True):
        s_seg = bottleneck_path(view, piece.source, proxy, None, piece.rate,
                                hop_only=hop_only)
        if s_seg is not None and piece.consumer not in s_seg and s_seg not in firsts_s:
            firsts_s.append(s_seg)
    for s_seg in firsts_s:
        c_seg = bottleneck_path(view, proxy, piece.consumer, budget_ms,
                                piece.rate, round_trip=True,
                                excluded=frozenset(s_seg) - {proxy})
        if c_seg is not None:
            out.append((s_seg, c_seg))
    return out


def recompute_central(
    trigger_event: str,
    net: NetworkState,
    pieces,
    latency_budget_ms: float,
    params: LifetimeParams,
    charge=None,
) -> tuple[Plan, float]:
    """Full central reconfiguration after a trigger event.

    Every alive node is charged one controller exchange for the status upload
    and plan download; the fresh plan is computed over the post-charge state.
    Returns the plan and the configuration energy actually spent. A network
    with no alive nodes is a no-op. ``charge(node_state, amount) -> float``
    lets the engine route the spend through its accounting; it defaults to
    charging the node directly.
    """
    if charge is None:
        charge = lambda node, amount: node.charge(amount)
    charged = 0.0
    cost = net.link_params.controller_energy_j
    for u in sorted(net.nodes):
        node = net.nodes[u]
        if node.alive and node.energy_j > 0.0:
            charged += charge(node, cost)
    reports = status_from_network(net)
    if not reports:
        return Plan(), charged
    plan = compute_plan(reports, pieces, net.proxies, latency_budget_ms, params)
    return plan, charged
