"""Deterministic cycle-driven simulation.

Per cycle, in fixed order: message delivery, interference injection, forced
deaths, data generation and forwarding (a generated piece crosses its whole
chain within the generating cycle), per-node protocol steps (local-repair
strategy only), consumer request sampling, the strategy hook (central
recomputation), the death sweep, and metrics. Identical configurations,
including the seed, produce bit-identical metrics.

Three strategies share the same initial centrally computed plan:

* ``PDD``           static plan, never reconfigured;
* ``PDD-CR``        full central recomputation on every trigger event, every
                    alive node paying one controller exchange;
* ``DistrDataFwd``  per-node local repair (splice or TTL-bounded route
                    discovery) with no controller involvement after start-up.
"""

from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass, field

from . import netmodel, planner, protocol
from .lifetime import lifetime_from_spend, max_epoch_duration, trigger_check
from .netmodel import DataPiece, NetworkState, NodeId, PathRow, PathTable
from .scenario import ScenarioConfig, sample_pieces

DATA = "data"
CFG = "cfg"


class EngineError(RuntimeError):
    pass


@dataclass
class PieceStatus:
    planned: bool = False
    broken: bool = False
    cause: str | None = None
    stuck_cycles: int = 0   # consecutive delivery failures with no repair underway


@dataclass
class Metrics:
    """Per-cycle series plus run totals. Counter series are cumulative;
    max_latency_ms is the worst access latency sampled in that cycle."""

    strategy: str = ""
    seed: int = 0
    cycles: list[int] = field(default_factory=list)
    energy_data_j: list[float] = field(default_factory=list)
    energy_cfg_j: list[float] = field(default_factory=list)
    generated: list[int] = field(default_factory=list)
    delivered: list[int] = field(default_factory=list)
    lost: list[int] = field(default_factory=list)
    max_latency_ms: list[float] = field(default_factory=list)
    reconfigurations: list[int] = field(default_factory=list)
    alive_nodes: list[int] = field(default_factory=list)

    loss_causes: Counter = field(default_factory=Counter)
    requests_total: int = 0
    requests_ok: int = 0
    latency_violations: int = 0
    request_misses: int = 0
    miss_causes: Counter = field(default_factory=Counter)
    max_access_latency_ms: float = 0.0
    death_times: dict[int, int] = field(default_factory=dict)
    epoch_boundaries: list[int] = field(default_factory=list)
    initial_epoch_bound: float = 0.0
    in_transit: int = 0   # forwarding completes within the cycle by design

    CSV_HEADER = ("cycle,energy_data_J,energy_cfg_J,generated,delivered,"
                  "lost,max_latency_ms,reconfigs,alive_nodes")

    def totals(self) -> dict[str, float]:
        last = -1
        return {
            "energy_data_j": self.energy_data_j[last] if self.cycles else 0.0,
            "energy_cfg_j": self.energy_cfg_j[last] if self.cycles else 0.0,
            "generated": self.generated[last] if self.cycles else 0,
            "delivered": self.delivered[last] if self.cycles else 0,
            "lost": self.lost[last] if self.cycles else 0,
            "reconfigurations": self.reconfigurations[last] if self.cycles else 0,
        }

    def csv_text(self) -> str:
        out = [self.CSV_HEADER]
        for k in range(len(self.cycles)):
            out.append(
                f"{self.cycles[k]},{self.energy_data_j[k]:.10g},"
                f"{self.energy_cfg_j[k]:.10g},{self.generated[k]},"
                f"{self.delivered[k]},{self.lost[k]},"
                f"{self.max_latency_ms[k]:.10g},{self.reconfigurations[k]},"
                f"{self.alive_nodes[k]}"
            )
        return "\n".join(out) + "\n"

    def summary_text(self) -> str:
        t = self.totals()
        lines = [
            f"strategy: {self.strategy}",
            f"seed: {self.seed}",
            f"cycles: {len(self.cycles)}",
            f"energy_data_J: {t['energy_data_j']:.10g}",
            f"energy_cfg_J: {t['energy_cfg_j']:.10g}",
            f"energy_total_J: {t['energy_data_j'] + t['energy_cfg_j']:.10g}",
            f"generated: {t['generated']}",
            f"delivered: {t['delivered']}",
            f"lost: {t['lost']}",
            f"in_transit: {self.in_transit}",
        ]
        for cause in sorted(self.loss_causes):
            lines.append(f"loss[{cause}]: {self.loss_causes[cause]}")
        lines += [
            f"requests: {self.requests_total}",
            f"requests_ok: {self.requests_ok}",
            f"latency_violations: {self.latency_violations}",
            f"request_misses: {self.request_misses}",
        ]
        for cause in sorted(self.miss_causes):
            lines.append(f"miss[{cause}]: {self.miss_causes[cause]}")
        lines += [
            f"max_access_latency_ms: {self.max_access_latency_ms:.10g}",
            f"reconfigurations: {t['reconfigurations']}",
            f"initial_epoch_bound_cycles: {self.initial_epoch_bound:.10g}",
            "epoch_boundaries: " + ",".join(map(str, self.epoch_boundaries)),
            "deaths: " + ",".join(f"{n}:{c}" for n, c in sorted(self.death_times.items())),
            f"alive_at_end: {self.alive_nodes[-1] if self.alive_nodes else 0}",
        ]
        return "\n".join(lines) + "\n"


class NodeCtx:
    """Node-local view handed to the protocol handlers.

    Exposes only what a real node could know: its own rows, links and energy,
    beacon-carried neighbor information (adjacency, link metrics, projected
    lifetime, liveness within two hops), and its inbox/outbox.
    """

    __slots__ = ("_sim", "node", "state", "_inbox")

    def __init__(self, sim: "Simulation", node: NodeId):
        self._sim = sim
        self.node = node
        self.state = protocol.ProtocolState()
        self._inbox: list[tuple[NodeId, object]] = []

    # --- identity / timing -------------------------------------------------
    def cycle(self) -> int:
        return self._sim.cycle

    @property
    def trigger_threshold(self) -> float:
        return self._sim.cfg.trigger_threshold

    @property
    def route_ttl(self) -> int:
        return self._sim.cfg.route_ttl

    # --- own state ----------------------------------------------------------
    def alive(self) -> bool:
        return self._sim.net.nodes[self.node].alive

    def energy_j(self) -> float:
        return self._sim.net.nodes[self.node].energy_j

    def out_neighbor_ids(self) -> tuple[NodeId, ...]:
        return self._sim.net.neighbors[self.node]

    def out_link(self, v: NodeId) -> netmodel.LinkState:
        return self._sim.net.links[(self.node, v)]

    def link_latency(self, v: NodeId) -> float:
        link = self._sim.net.links.get((self.node, v))
        return link.latency_ms if link else float("inf")

    # --- neighborhood knowledge ----------------------------------------------
    def alive_neighbor_ids(self) -> list[NodeId]:
        return self._sim.net.alive_neighbors(self.node)

    def neighbor_neighbors(self, v: NodeId) -> tuple[NodeId, ...]:
        return self._sim.net.neighbors[v]

    def two_hop_latency(self, via: NodeId, to: NodeId) -> float:
        link = self._sim.net.links.get((via, to))
        return link.latency_ms if link else float("inf")

    def node_alive(self, x: NodeId) -> bool:
        return self._sim.net.nodes[x].alive

    def projected_lifetime_of(self, node: NodeId, next_node: NodeId,
                              rate: float) -> float:
        return self._sim.projected_lifetime(node, next_node, rate)

    # --- pointer rows ---------------------------------------------------------
    def row(self, piece: int) -> PathRow | None:
        return self._sim.table.row(piece, self.node)

    def pieces_here(self) -> list[int]:
        return self._sim.table.pieces_at(self.node)

    def set_row(self, piece: int, prev: NodeId | None, next: NodeId | None,
                order_key: float) -> None:
        self._sim.write_row(piece, self.node, prev, next, order_key)

    def set_prev(self, piece: int, w: NodeId) -> None:
        row = self.row(piece)
        if row is None:
            self.diagnostic(f"previous-pointer write without a row, piece {piece}")
            return
        self._sim.write_row(piece, self.node, w, row.next, row.order_key)

    def set_next(self, piece: int, v: NodeId | None) -> None:
        row = self.row(piece)
        if row is None:
            self.diagnostic(f"next-pointer write without a row, piece {piece}")
            return
        self._sim.write_row(piece, self.node, row.prev, v, row.order_key)

    def clear_row(self, piece: int) -> None:
        self._sim.clear_row(piece, self.node)

    # --- edge activation -------------------------------------------------------
    def deactivate_edge(self, piece: int, v: NodeId) -> None:
        self._sim.net.deactivate(piece, self.node, v)

    def deactivate_edge_all_pieces(self, v: NodeId) -> None:
        link = self._sim.net.links.get((self.node, v))
        if link is None:
            return
        for piece in sorted(link.active_pieces):
            self._sim.net.deactivate(piece, self.node, v)

    def deactivate_all_edges(self) -> None:
        for v in self.out_neighbor_ids():
            self.deactivate_edge_all_pieces(v)
            back = self._sim.net.links.get((v, self.node))
            if back is not None:
                for piece in sorted(back.active_pieces):
                    self._sim.net.deactivate(piece, v, self.node)

    # --- pieces -------------------------------------------------------------------
    def piece_known(self, piece: int) -> bool:
        return piece in self._sim.pieces_by_id

    def piece_rate(self, piece: int) -> float:
        return self._sim.pieces_by_id[piece].rate

    def piece_proxy(self, piece: int) -> NodeId | None:
        return self._sim.pieces_by_id[piece].proxy

    def is_source(self, piece: int) -> bool:
        return self._sim.pieces_by_id[piece].source == self.node

    # --- effects ----------------------------------------------------------------
    def send(self, dst: NodeId, msg) -> None:
        self._sim.send_message(self.node, dst, msg)

    def take_inbox(self) -> list[tuple[NodeId, object]]:
        out = self._inbox
        self._inbox = []
        return out

    def deliver(self, src: NodeId, msg) -> None:
        self._inbox.append((src, msg))

    def report_broken(self, piece: int, cause: str) -> None:
        self._sim.mark_broken(piece, cause)

    def repair_started(self) -> None:
        self._sim.note_reconfiguration()

    def diagnostic(self, text: str) -> None:
        self._sim.diagnostics.append(f"{self._sim.cycle}: node {self.node}: {text}")

    def set_dead(self) -> None:
        self._sim.mark_dead(self.node)


class Simulation:
    """One scenario run. ``run()`` advances the remaining horizon (or a given
    number of cycles) and returns the metrics collected so far."""

    def __init__(self, cfg: ScenarioConfig, *, net: NetworkState | None = None,
                 table: PathTable | None = None,
                 pieces: list[DataPiece] | None = None):
        self.cfg = cfg
        self.cycle = 0
        self.diagnostics: list[str] = []
        self.trace_lines: list[str] = []
        self.energy_log: dict[NodeId, list[tuple[int, str, float]]] = {}

        prebuilt = net is not None
        if prebuilt:
            self.net = net
            self.table = table if table is not None else PathTable()
            self.pieces = pieces if pieces is not None else []
        else:
            self.net = netmodel.build_grid_topology(
                cfg.rows, cfg.cols, cfg.spacing_m, cfg.range_m,
                set(cfg.proxies), cfg.link_params(), cfg.seed)
            self.table = PathTable()
            self.pieces = sample_pieces(cfg, self.net)
        self.pieces_by_id = {p.id: p for p in self.pieces}
        self.piece_status = {p.id: PieceStatus() for p in self.pieces}

        self.params = cfg.lifetime_params()
        self.metrics = Metrics(strategy=cfg.strategy, seed=cfg.seed)

        self._rng_interference = random.Random(f"{cfg.seed}:interference")
        self._rng_requests = random.Random(f"{cfg.seed}:requests")
        self._link_ids = sorted(self.net.links)
        self._dirty_links: set[tuple[NodeId, NodeId]] = set()
        self._reverts: dict[int, list[tuple[NodeId, NodeId]]] = {}
        self._forced: dict[int, list[NodeId]] = {}
        for cyc, node in cfg.forced_deaths:
            self._forced.setdefault(cyc, []).append(node)

        self._pending_msgs: list[tuple[NodeId, NodeId, object]] = []
        self._ctx = {u: NodeCtx(self, u) for u in sorted(self.net.nodes)}
        self._chains: dict[int, tuple[int, list, bool]] = {}
        self._stride = cfg.effective_metrics_stride()

        self._data_energy = 0.0
        self._cfg_energy = 0.0
        self._generated = 0
        self._delivered = 0
        self._lost = 0
        self._reconfigs = 0
        self._epochs: list[int] = []
        self._cr_trigger = False
        self._cr_deaths_pending = False

        if not prebuilt:
            self._initial_configuration()
        else:
            for p in self.pieces:
                self.piece_status[p.id].planned = True
        self.metrics.initial_epoch_bound = max_epoch_duration(
            self.net, self.table, self.pieces, self.params)

    # ------------------------------------------------------------------ setup

    def _initial_configuration(self) -> None:
        """Status upload and plan download at start-up: every node with any
        energy pays one controller exchange, then the plan is computed over
        the survivors and installed."""
        cost = self.net.link_params.controller_energy_j
        for u in sorted(self.net.nodes):
            node = self.net.nodes[u]
            if node.energy_j > 0.0:
                self._charge(node, cost, CFG)
                if self.cfg.trace:
                    self._trace(u, -1, protocol.StatusMsg(u, node.energy_j))
        for u in sorted(self.net.nodes):
            node = self.net.nodes[u]
            if node.alive and node.energy_j <= 0.0:
                self.mark_dead(u)
        reports = planner.status_from_network(self.net)
        plan = planner.compute_plan(reports, self.pieces, self.net.proxies,
                                    self.cfg.latency_budget_ms, self.params)
        self._install_plan(plan)
        if self.cfg.trace:
            for u in sorted(self.net.nodes):
                if self.net.nodes[u].alive:
                    self._trace(-1, u, protocol.PlanMsg(len(plan.pieces)))

    def _install_plan(self, plan: planner.Plan) -> None:
        for pid in sorted(self.pieces_by_id):
            piece = self.pieces_by_id[pid]
            status = self.piece_status[pid]
            if pid in plan.pieces:
                pp = plan.pieces[pid]
                piece.proxy = pp.proxy
                netmodel.install_path(self.net, self.table, piece, pp.chain)
                status.planned = True
                status.broken = False
                status.cause = None
            else:
                netmodel.clear_piece_paths(self.net, self.table, pid)
                piece.proxy = None
                status.planned = False
                status.broken = True
                status.cause = "unplanned"

    # ------------------------------------------------------------------- run

    def run(self, cycles: int | None = None) -> Metrics:
        remaining = (self.cfg.horizon - self.cycle) if cycles is None else cycles
        for _ in range(max(0, remaining)):
            self._step()
        return self.metrics

    def _step(self) -> None:
        cyc = self.cycle
        self._deliver_messages()
        self._refresh_trigger_baselines(cyc)
        self._inject_interference(cyc)
        for node in self._forced.get(cyc, ()):
            st = self.net.nodes[node]
            if st.alive:
                st.spent_j = st.initial_energy_j   # forced exhaustion
        self._generate_and_forward()
        if self.cfg.strategy == "DistrDataFwd":
            for u in sorted(self.net.nodes):
                protocol.node_cycle(self._ctx[u], cyc)
        max_lat = self._sample_requests()
        if self.cfg.strategy == "PDD-CR":
            self._central_reconfiguration_hook()
        self._death_sweep()
        if self._generated != self._delivered + self._lost + self.metrics.in_transit:
            raise EngineError("piece conservation violated cumulatively")
        if cyc % self._stride == 0 or cyc == self.cfg.horizon - 1:
            self._append_metrics(cyc, max_lat)
        self.cycle += 1

    # ------------------------------------------------------------- sub-steps

    def _deliver_messages(self) -> None:
        pending = self._pending_msgs
        self._pending_msgs = []
        for src, dst, msg in pending:
            if self.net.nodes[dst].alive:
                self._ctx[dst].deliver(src, msg)

    def _refresh_trigger_baselines(self, cyc: int) -> None:
        for lk in sorted(self._dirty_links):
            link = self.net.links[lk]
            link.eps_prev_j = link.eps_j
        self._dirty_links.clear()
        for lk in self._reverts.pop(cyc, ()):
            link = self.net.links[lk]
            link.eps_prev_j = link.eps_j
            link.eps_j = link.eps_baseline_j
            self._dirty_links.add(lk)

    def _inject_interference(self, cyc: int) -> None:
        inter = self.cfg.interference
        self._cr_trigger = False
        affected = inject_interference(self.net, self._rng_interference, inter,
                                       self.cfg.trigger_threshold,
                                       link_ids=self._link_ids)
        for lk, fired in affected:
            self._dirty_links.add(lk)
            self._reverts.setdefault(cyc + inter.duration_cycles, []).append(lk)
            if fired:
                self._cr_trigger = True

    def _generate_and_forward(self) -> tuple[int, int, int]:
        gen = dlv = lost = 0
        learn_prev = self.cfg.strategy == "DistrDataFwd"
        for pid in sorted(self.pieces_by_id):
            piece = self.pieces_by_id[pid]
            src = self.net.nodes[piece.source]
            if not src.alive or piece.rate == 0:
                continue
            gen += piece.rate
            hops, complete = self._chain(piece)
            cause = None
            delivered = False
            blocked_at = piece.source
            for tx, link, rx in hops:
                blocked_at = tx.node
                if not tx.alive:
                    cause = "node-dead"
                    break
                if pid not in link.active_pieces:
                    cause = "link-down"
                    break
                need = link.eps_j * piece.rate
                got = self._charge(tx, need, DATA)
                if got < need:
                    cause = "node-dead"
                    break
                if not rx.alive:
                    cause = "node-dead"
                    break
                if learn_prev:
                    # Data-plane learning: whoever actually handed me the
                    # piece is my previous hop. Reconciles a stale pointer
                    # left by the losing side of two concurrent repairs.
                    rx_row = self.table.row(pid, rx.node)
                    if rx_row is not None and rx_row.prev != tx.node:
                        self.write_row(pid, rx.node, tx.node, rx_row.next,
                                       rx_row.order_key)
                blocked_at = rx.node
            else:
                if complete:
                    delivered = True
                else:
                    cause = "path-broken"
            status = self.piece_status[pid]
            if delivered:
                dlv += piece.rate
                status.stuck_cycles = 0
            else:
                if status.cause:
                    cause = status.cause
                lost += piece.rate
                self.metrics.loss_causes[cause] += piece.rate
                self._note_delivery_failure(piece, status, blocked_at)
        self._generated += gen
        self._delivered += dlv
        self._lost += lost
        if gen != dlv + lost:
            raise EngineError("piece conservation violated within a cycle")
        return gen, dlv, lost

    def _note_delivery_failure(self, piece: DataPiece, status: PieceStatus,
                               blocked_at: NodeId) -> None:
        """Transmission feedback: a node that keeps failing to move a piece,
        with no repair of its own underway, eventually declares the piece
        path-broken. Covers breakage races no alert can reach (the local
        repair strategy only; the static plan never reacts and the central
        one replans wholesale)."""
        if self.cfg.strategy != "DistrDataFwd" or status.broken:
            return
        state = self._ctx[blocked_at].state
        if piece.id in state.pending_route or piece.id in state.pending_splice:
            status.stuck_cycles = 0
            return
        status.stuck_cycles += 1
        if status.stuck_cycles > 2 * (self.cfg.route_ttl + 1) + 4:
            self.mark_broken(piece.id, "repair-failed")

    def _chain(self, piece: DataPiece):
        ver = self.table.version.get(piece.id, 0)
        cached = self._chains.get(piece.id)
        if cached is not None and cached[0] == ver:
            return cached[1], cached[2]
        rows = self.table.rows_for_piece(piece.id)
        hops = []
        complete = False
        node = piece.source
        seen = {node}
        for _ in range(len(rows) + 1):
            row = rows.get(node)
            if row is None or row.next is None:
                complete = node == piece.consumer
                break
            nxt = row.next
            link = self.net.links.get((node, nxt))
            if link is None:
                break
            hops.append((self.net.nodes[node], link, self.net.nodes[nxt]))
            if nxt in seen:
                break
            seen.add(nxt)
            node = nxt
        self._chains[piece.id] = (ver, hops, complete)
        return hops, complete

    def _sample_requests(self) -> float:
        cfg = self.cfg
        worst = 0.0
        for pid in sorted(self.pieces_by_id):
            draw = self._rng_requests.random()   # one draw per piece per cycle
            if cfg.request_prob <= 0.0 or draw >= cfg.request_prob:
                continue
            piece = self.pieces_by_id[pid]
            self.metrics.requests_total += 1
            latency, miss = sample_access_latency(piece, self.table, self.net)
            if miss is not None:
                self.metrics.request_misses += 1
                self.metrics.miss_causes[miss] += 1
                continue
            worst = max(worst, latency)
            self.metrics.max_access_latency_ms = max(
                self.metrics.max_access_latency_ms, latency)
            if latency > cfg.latency_budget_ms:
                self.metrics.latency_violations += 1
            else:
                self.metrics.requests_ok += 1
        return worst

    def _central_reconfiguration_hook(self) -> None:
        if not (self._cr_trigger or self._cr_deaths_pending):
            return
        self._cr_deaths_pending = False
        plan, _ = planner.recompute_central(
            "trigger", self.net, self.pieces, self.cfg.latency_budget_ms,
            self.params, charge=lambda node, amount: self._charge(node, amount, CFG))
        self._install_plan(plan)
        self.note_reconfiguration()

    def _death_sweep(self) -> None:
        for u in sorted(self.net.nodes):
            node = self.net.nodes[u]
            if node.alive and node.energy_j <= 0.0:
                self.mark_dead(u)

    def _append_metrics(self, cyc: int, max_lat: float) -> None:
        m = self.metrics
        m.cycles.append(cyc)
        m.energy_data_j.append(self._data_energy)
        m.energy_cfg_j.append(self._cfg_energy)
        m.generated.append(self._generated)
        m.delivered.append(self._delivered)
        m.lost.append(self._lost)
        m.max_latency_ms.append(max_lat)
        m.reconfigurations.append(self._reconfigs)
        m.alive_nodes.append(sum(1 for n in self.net.nodes.values() if n.alive))

    # ------------------------------------------------------------- primitives

    def _charge(self, node: netmodel.NodeState, amount: float, kind: str) -> float:
        got = node.charge(amount)
        if kind == DATA:
            self._data_energy += got
        else:
            self._cfg_energy += got
        if self.cfg.audit_energy and got > 0.0:
            self.energy_log.setdefault(node.node, []).append((self.cycle, kind, got))
        return got

    def projected_lifetime(self, node: NodeId, next_node: NodeId,
                           rate: float) -> float:
        """Lifetime of ``node`` if it also forwarded ``rate`` pieces per cycle
        over (node, next_node), on top of its current activated load."""
        state = self.net.nodes[node]
        spend = 0.0
        for v in self.net.neighbors[node]:
            link = self.net.links[(node, v)]
            if not link.active_pieces:
                continue
            for pid in sorted(link.active_pieces):
                spend += link.eps_j * self.pieces_by_id[pid].rate
        extra_link = self.net.links.get((node, next_node))
        if extra_link is None:
            return 0.0
        spend += extra_link.eps_j * rate
        return lifetime_from_spend(state.energy_j, spend, self.params)

    def send_message(self, src: NodeId, dst: NodeId, msg) -> None:
        link = self.net.links.get((src, dst))
        if link is None:
            raise EngineError(f"message over non-existent link {src}->{dst}")
        self._charge(self.net.nodes[src], link.eps_j, CFG)
        self._pending_msgs.append((src, dst, msg))
        if self.cfg.trace:
            self._trace(src, dst, msg)

    def pending_message_count(self) -> int:
        return len(self._pending_msgs) + sum(
            len(ctx._inbox) for ctx in self._ctx.values())

    def _trace(self, src: NodeId, dst: NodeId, msg) -> None:
        piece = getattr(msg, "piece", "")
        self.trace_lines.append(
            f"{self.cycle},{type(msg).__name__},{src},{dst},{piece}")

    def write_row(self, piece: int, node: NodeId, prev: NodeId | None,
                  nxt: NodeId | None, order_key: float) -> None:
        old = self.table.row(piece, node)
        if old is not None and old.next is not None and old.next != nxt:
            self.net.deactivate(piece, node, old.next)
        self.table.set_row(piece, node, PathRow(prev=prev, next=nxt,
                                                order_key=order_key))
        if nxt is not None:
            self.net.activate(piece, node, nxt)

    def clear_row(self, piece: int, node: NodeId) -> None:
        old = self.table.row(piece, node)
        if old is None:
            return
        if old.next is not None:
            self.net.deactivate(piece, node, old.next)
        self.table.drop_row(piece, node)

    def mark_broken(self, piece: int, cause: str) -> None:
        status = self.piece_status[piece]
        if not status.broken:
            status.broken = True
            status.cause = cause

    def mark_dead(self, node: NodeId) -> None:
        st = self.net.nodes[node]
        if not st.alive:
            return
        st.alive = False
        self.metrics.death_times[node] = self.cycle
        self._cr_deaths_pending = True
        for pid in sorted(self.pieces_by_id):
            piece = self.pieces_by_id[pid]
            if piece.source == node:
                self.mark_broken(pid, "source-dead")
            elif piece.consumer == node:
                self.mark_broken(pid, "endpoint-dead")
            elif piece.proxy == node:
                self.mark_broken(pid, "proxy-dead")

    def note_reconfiguration(self) -> None:
        self._reconfigs += 1
        if not self._epochs or self._epochs[-1] != self.cycle:
            self._epochs.append(self.cycle)
        self.metrics.epoch_boundaries = self._epochs


def inject_interference(net: NetworkState, rng: random.Random,
                        params, trigger_threshold: float = 0.5,
                        link_ids=None) -> list[tuple[tuple[NodeId, NodeId], bool]]:
    """Sample and apply this cycle's interference.

    At most one event per cycle (with the configured probability); an event
    multiplies ``affected_links`` distinct links' per-piece cost by the
    configured factor above their baseline, recording the previous value for
    the trigger ratio. Returns the affected directed edges, each paired with
    whether the jump fired the trigger on an actively used link. Reverting
    after ``duration_cycles`` is the caller's bookkeeping.
    """
    if params.prob_per_cycle <= 0.0:
        return []
    if rng.random() >= params.prob_per_cycle:
        return []
    if link_ids is None:
        link_ids = sorted(net.links)
    k = min(params.affected_links, len(link_ids))
    affected = []
    for lk in rng.sample(link_ids, k):
        link = net.links[lk]
        link.eps_prev_j = link.eps_j
        link.eps_j = link.eps_baseline_j * params.multiplier
        fired = (bool(link.active_pieces) and link.eps_j > 0
                 and trigger_check(link.eps_j, link.eps_prev_j,
                                   trigger_threshold))
        affected.append((lk, fired))
    return affected


def sample_access_latency(piece: DataPiece, table: PathTable,
                          net: NetworkState) -> tuple[float | None, str | None]:
    """Round-trip access latency for one consumer request over the piece's
    current proxy-to-consumer segment (request travels the reverse direction,
    response the forward one). Returns (latency_ms, None) or (None, miss
    cause) when the segment cannot serve the request."""
    if piece.proxy is None:
        return None, "unplanned"
    if not net.nodes[piece.consumer].alive:
        return None, "consumer-dead"
    if not net.nodes[piece.proxy].alive:
        return None, "proxy-dead"
    total = 0.0
    node = piece.proxy
    seen = {node}
    limit = len(table.rows_for_piece(piece.id)) + 1
    for _ in range(limit):
        row = table.row(piece.id, node)
        if row is None or row.next is None:
            return None, "consumer-segment-broken"
        nxt = row.next
        fwd = net.links.get((node, nxt))
        rev = net.links.get((nxt, node))
        if fwd is None or rev is None or piece.id not in fwd.active_pieces:
            return None, "consumer-segment-broken"
        if not net.nodes[nxt].alive:
            return None, "consumer-segment-broken"
        total += fwd.latency_ms + rev.latency_ms
        if nxt == piece.consumer:
            return total, None
        if nxt in seen:
            return None, "consumer-segment-broken"
        seen.add(nxt)
        node = nxt
    return None, "consumer-segment-broken"


def run_simulation(cfg: ScenarioConfig) -> Metrics:
    """Build and run one scenario to its horizon."""
    return Simulation(cfg).run()
