import math
import random

import pytest

from fwdsim import (DataPiece, LifetimeParams, PlannerView, PlanningError,
                    StatusReport, bottleneck_path, compute_plan, install_path,
                    path_bottleneck, recompute_central, round_trip_latency,
                    status_from_network, validate_paths, PathTable)

from conftest import make_net
from oracles import (enumerate_best_bottleneck, enumerate_single_piece_plan,
                     random_planner_graph)

PARAMS = LifetimeParams(config_phase_energy_j=5e-3)


def view_from(links, energies, spend=None):
    reports = []
    for u in sorted(energies):
        own = {v: links[(a, v)] for (a, v) in links if a == u}
        reports.append(StatusReport(node=u, energy_j=energies[u], links=own))
    view = PlannerView.from_status(reports, PARAMS)
    if spend:
        view.spend.update(spend)
    return view


def sym(links):
    out = {}
    for (u, v), attrs in links.items():
        out[(u, v)] = attrs
        out.setdefault((v, u), attrs)
    return out


class TestBottleneckPath:
    def test_avoids_low_energy_node_even_if_slower(self):
        # two disjoint routes 0-1-3 and 0-2-3; node 1 is nearly dead
        links = sym({(0, 1): (50e-6, 5.0), (1, 3): (50e-6, 5.0),
                     (0, 2): (50e-6, 20.0), (2, 3): (50e-6, 20.0)})
        view = view_from(links, {0: 5.0, 1: 0.01, 2: 5.0, 3: 5.0})
        path = bottleneck_path(view, 0, 3, 100.0, rate=2.0)
        assert path == [0, 2, 3]

    def test_budget_is_inclusive(self):
        links = sym({(0, 1): (50e-6, 10.0), (1, 2): (50e-6, 10.0)})
        view = view_from(links, {0: 5.0, 1: 5.0, 2: 5.0})
        assert bottleneck_path(view, 0, 2, 20.0, rate=1.0) == [0, 1, 2]
        assert bottleneck_path(view, 0, 2, 19.999, rate=1.0) is None

    def test_unreachable_target(self):
        links = sym({(0, 1): (50e-6, 10.0), (2, 3): (50e-6, 10.0)})
        view = view_from(links, {0: 5.0, 1: 5.0, 2: 5.0, 3: 5.0})
        assert bottleneck_path(view, 0, 3, None, rate=1.0) is None

    def test_same_endpoints_rejected(self):
        links = sym({(0, 1): (50e-6, 10.0)})
        view = view_from(links, {0: 5.0, 1: 5.0})
        with pytest.raises(PlanningError):
            bottleneck_path(view, 0, 0, None, rate=1.0)

    def test_excluded_nodes_respected(self):
        links = sym({(0, 1): (50e-6, 5.0), (1, 3): (50e-6, 5.0),
                     (0, 2): (50e-6, 5.0), (2, 3): (50e-6, 5.0)})
        view = view_from(links, {0: 5.0, 1: 5.0, 2: 5.0, 3: 5.0})
        path = bottleneck_path(view, 0, 3, None, rate=1.0, excluded={1})
        assert path == [0, 2, 3]

    @pytest.mark.parametrize("round_trip", [False, True])
    def test_matches_exhaustive_enumeration(self, round_trip):
        rng = random.Random(99)
        checked = 0
        for _ in range(80):
            view, nodes = random_planner_graph(rng)
            src, dst = rng.sample(nodes, 2)
            budget = rng.choice([None, 20.0, 60.0, 200.0])
            rate = rng.randint(1, 8)
            got = bottleneck_path(view, src, dst, budget, rate,
                                  round_trip=round_trip)
            want = enumerate_best_bottleneck(view, src, dst, budget, rate,
                                             round_trip=round_trip)
            if want is None:
                assert got is None
                continue
            checked += 1
            assert got is not None
            got_bot = path_bottleneck(view, got, rate)
            assert got_bot == want[0]
            if budget is not None:
                lat = sum(view.edges[(u, v)][1]
                          + (view.edges[(v, u)][1] if round_trip else 0.0)
                          for u, v in zip(got, got[1:]))
                assert lat <= budget
        assert checked > 20


def five_node_reports(dying=1):
    """Proxies 1 and 2; the route to proxy `dying` passes a nearly-dead relay."""
    links = sym({(0, 3): (50e-6, 10.0), (3, 1): (50e-6, 10.0),
                 (0, 4): (50e-6, 10.0), (4, 2): (50e-6, 10.0),
                 (1, 5): (50e-6, 10.0), (2, 5): (50e-6, 10.0)})
    energies = {0: 5.0, 1: 50.0, 2: 50.0, 3: 5.0, 4: 5.0, 5: 5.0}
    energies[3 if dying == 1 else 4] = 0.02
    reports = []
    for u in sorted(energies):
        own = {v: links[(a, v)] for (a, v) in links if a == u}
        reports.append(StatusReport(node=u, energy_j=energies[u], links=own))
    return reports, links, energies


class TestComputePlan:
    def test_avoids_proxy_behind_nearly_dead_relay(self):
        reports, links, energies = five_node_reports(dying=1)
        piece = DataPiece(id=0, source=0, consumer=5, rate=4)
        plan = compute_plan(reports, [piece], {1, 2}, 100.0, PARAMS)
        assert plan.pieces[0].proxy == 2
        # brute force agrees on the winning bottleneck
        view = view_from(links, energies)
        best = enumerate_single_piece_plan(view, piece, {1, 2}, 100.0)
        assert best[1] == 2

    def test_adjacent_source_proxy_consumer_two_hop_plan(self):
        links = sym({(0, 1): (50e-6, 10.0), (1, 2): (50e-6, 10.0)})
        reports = []
        for u in (0, 1, 2):
            own = {v: links[(a, v)] for (a, v) in links if a == u}
            reports.append(StatusReport(node=u, energy_j=5.0, links=own))
        piece = DataPiece(id=0, source=0, consumer=2, rate=1)
        plan = compute_plan(reports, [piece], {1}, 100.0, PARAMS)
        assert plan.pieces[0].source_segment == [0, 1]
        assert plan.pieces[0].consumer_segment == [1, 2]

    def test_unattainable_budget_reported_infeasible(self):
        reports, _, _ = five_node_reports()
        piece = DataPiece(id=0, source=0, consumer=5, rate=4)
        plan = compute_plan(reports, [piece], {1, 2}, 1.0, PARAMS)
        assert plan.pieces == {}
        assert "no latency-feasible path" in plan.infeasible[0]

    def test_matches_single_piece_enumeration(self):
        rng = random.Random(4242)
        for _ in range(40):
            view, nodes = random_planner_graph(rng)
            if len(nodes) < 4:
                continue
            src, cons, proxy_a, proxy_b = rng.sample(nodes, 4)
            piece = DataPiece(id=0, source=src, consumer=cons, rate=rng.randint(1, 8))
            reports = [StatusReport(node=u, energy_j=view.energy[u],
                                    links={v: view.edges[(a, v)]
                                           for (a, v) in view.edges if a == u})
                       for u in sorted(view.energy)]
            fresh = PlannerView.from_status(reports, PARAMS)
            plan = compute_plan(reports, [piece], {proxy_a, proxy_b}, 150.0, PARAMS)
            best = enumerate_single_piece_plan(fresh, piece, {proxy_a, proxy_b}, 150.0)
            if best is None:
                assert 0 in plan.infeasible
                continue
            assert 0 in plan.pieces
            chain = plan.pieces[0].chain
            got_bot = path_bottleneck(fresh, chain, piece.rate)
            assert got_bot == best[4]

    def test_planning_is_deterministic(self):
        reports, _, _ = five_node_reports()
        pieces = [DataPiece(id=0, source=0, consumer=5, rate=4),
                  DataPiece(id=1, source=5, consumer=0, rate=4)]
        a = compute_plan(reports, pieces, {1, 2}, 100.0, PARAMS)
        b = compute_plan(reports, pieces, {1, 2}, 100.0, PARAMS)
        assert a.to_text() == b.to_text()

    def test_emitted_plans_validate_and_respect_budget(self):
        rng = random.Random(777)
        from fwdsim import build_grid_topology
        for seed in range(6):
            net = build_grid_topology(3, 4, 2.5, 3.6, {5, 6}, seed=seed)
            for u in net.nodes.values():
                u.initial_energy_j = rng.uniform(1.0, 30.0)
            net.nodes[5].initial_energy_j = 100.0
            net.nodes[6].initial_energy_j = 100.0
            pieces = [DataPiece(id=0, source=0, consumer=11, rate=3),
                      DataPiece(id=1, source=4, consumer=1, rate=6)]
            plan = compute_plan(status_from_network(net), pieces, net.proxies,
                                100.0, PARAMS)
            table = PathTable()
            for pid, pp in plan.pieces.items():
                piece = pieces[pid]
                piece.proxy = pp.proxy
                install_path(net, table, piece, pp.chain)
                assert round_trip_latency(pid, pp.consumer_segment, net) <= 100.0
            planned = [p for p in pieces if p.id in plan.pieces]
            assert validate_paths(net, table, planned).ok()


class TestRecompute:
    def make_net_with_pieces(self):
        net = make_net([(0, 1), (1, 2), (2, 3), (0, 4), (4, 3), (1, 4)],
                       {0: 5.0, 1: 50.0, 2: 5.0, 3: 5.0, 4: 50.0},
                       proxies={1, 4})
        pieces = [DataPiece(id=0, source=0, consumer=3, rate=2)]
        return net, pieces

    def test_charges_every_alive_node_one_exchange(self):
        net, pieces = self.make_net_with_pieces()
        cost = net.link_params.controller_energy_j
        before = {u: net.nodes[u].energy_j for u in net.nodes}
        plan, charged = recompute_central("node-death", net, pieces, 100.0, PARAMS)
        assert charged == pytest.approx(len(net.nodes) * cost)
        for u in net.nodes:
            assert net.nodes[u].energy_j == pytest.approx(before[u] - cost)
        assert 0 in plan.pieces

    def test_dead_nodes_neither_pay_nor_appear_in_paths(self):
        net, pieces = self.make_net_with_pieces()
        net.nodes[2].alive = False
        plan, charged = recompute_central("node-death", net, pieces, 100.0, PARAMS)
        assert charged == pytest.approx(4 * net.link_params.controller_energy_j)
        chain = plan.pieces[0].chain
        assert 2 not in chain
        table = PathTable()
        pieces[0].proxy = plan.pieces[0].proxy
        install_path(net, table, pieces[0], chain)
        assert validate_paths(net, table, pieces).ok()

    def test_everyone_dead_is_a_noop(self):
        net, pieces = self.make_net_with_pieces()
        for node in net.nodes.values():
            node.alive = False
        plan, charged = recompute_central("node-death", net, pieces, 100.0, PARAMS)
        assert charged == 0.0
        assert plan.pieces == {} and plan.infeasible == {}
