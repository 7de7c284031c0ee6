import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fwdsim import (DataPiece, PathRow, PathTable, PathBrokenError,
                    TopologyError, build_grid_topology, export_topology,
                    install_path, path_latency, round_trip_latency,
                    validate_paths, walk_chain)

from conftest import make_net

PROXIES = {4, 7, 10, 13}


def undirected(net):
    return {tuple(sorted(k)) for k in net.links}


class TestGridConstruction:
    def test_paper_scale_grid_is_four_neighbor_at_3m(self):
        net = build_grid_topology(3, 6, 2.5, 3.0, PROXIES, seed=1)
        assert len(net.nodes) == 18
        assert len(undirected(net)) == 27          # no diagonals at 3 m
        # corner degree 2, edge degree 3, interior degree 4
        degrees = {u: len(net.neighbors[u]) for u in net.nodes}
        assert degrees[0] == 2 and degrees[17] == 2
        assert degrees[1] == 3 and degrees[6] == 3
        assert degrees[7] == 4 and degrees[10] == 4
        # the 3.54 m diagonal is excluded
        assert (0, 7) not in net.links

    def test_operating_grid_matches_published_edge_count(self):
        net = build_grid_topology(3, 6, 2.5, 3.6, PROXIES, seed=1)
        assert len(net.nodes) == 18
        assert len(undirected(net)) == 47          # diagonals included

    def test_minimal_two_node_grid(self):
        net = build_grid_topology(1, 2, 2.5, 3.0, {0}, seed=1)
        assert set(net.links) == {(0, 1), (1, 0)}

    def test_two_by_two_grid_has_four_link_pairs(self):
        # horizontal 2.5 x2, vertical 2.5 x2, diagonal 3.54 excluded
        net = build_grid_topology(2, 2, 2.5, 3.0, {0}, seed=1)
        assert len(net.nodes) == 4
        assert len(undirected(net)) == 4
        assert (0, 3) not in net.links and (1, 2) not in net.links

    def test_disconnected_grid_rejected(self):
        with pytest.raises(TopologyError):
            build_grid_topology(1, 3, 2.5, 2.0, {0}, seed=1)

    def test_bad_proxy_ids_rejected(self):
        with pytest.raises(TopologyError):
            build_grid_topology(2, 2, 2.5, 3.0, {9}, seed=1)

    def test_construction_is_deterministic(self):
        a = build_grid_topology(3, 6, 2.5, 3.6, PROXIES, seed=42)
        b = build_grid_topology(3, 6, 2.5, 3.6, PROXIES, seed=42)
        assert export_topology(a) == export_topology(b)
        c = build_grid_topology(3, 6, 2.5, 3.6, PROXIES, seed=43)
        assert export_topology(a) != export_topology(c)

    @pytest.mark.parametrize("seed", [0, 7, 99])
    def test_link_existence_symmetric_and_range_consistent(self, seed):
        net = build_grid_topology(3, 5, 2.5, 3.6, {2}, seed=seed)
        for (u, v) in net.links:
            assert (v, u) in net.links
        for u in net.nodes:
            for v in net.nodes:
                if u == v:
                    continue
                within = math.dist(net.nodes[u].pos, net.nodes[v].pos) <= 3.6
                assert ((u, v) in net.links) == within
                assert (v in net.neighbors[u]) == within

    def test_proxies_start_richer(self):
        net = build_grid_topology(3, 6, 2.5, 3.6, PROXIES, seed=1)
        proxy_floor = min(net.nodes[p].initial_energy_j for p in PROXIES)
        normal_ceiling = max(net.nodes[u].initial_energy_j
                             for u in net.nodes if u not in PROXIES)
        assert proxy_floor > normal_ceiling


class TestPathLatency:
    def net3(self):
        return make_net({(0, 1): (50e-6, 10.0), (1, 0): (50e-6, 10.0),
                         (1, 2): (50e-6, 12.0), (2, 1): (50e-6, 12.0),
                         (2, 3): (50e-6, 8.0), (3, 2): (50e-6, 8.0)},
                        {0: 1.0, 1: 1.0, 2: 1.0, 3: 1.0})

    def test_single_hop(self):
        assert path_latency(0, [0, 1], self.net3()) == 10.0

    def test_three_hop_sum(self):
        assert path_latency(0, [0, 1, 2, 3], self.net3()) == 30.0

    def test_round_trip_symmetric_two_hops(self):
        net = make_net([(0, 1), (1, 2)], {0: 1.0, 1: 1.0, 2: 1.0}, latency=10.0)
        assert round_trip_latency(0, [0, 1, 2], net) == 40.0

    def test_broken_chain_raises_naming_gap(self):
        with pytest.raises(PathBrokenError) as err:
            path_latency(5, [0, 2], self.net3())
        assert err.value.piece_id == 5
        assert err.value.at_node == 0

    def test_latency_is_additive_over_concatenation(self):
        net = self.net3()
        whole = path_latency(None, [0, 1, 2, 3], net)
        assert whole == path_latency(None, [0, 1], net) + path_latency(None, [1, 2, 3], net)


def line_fixture():
    net = make_net([(0, 1), (1, 2), (2, 3)],
                   {0: 1.0, 1: 1.0, 2: 1.0, 3: 1.0})
    piece = DataPiece(id=0, source=0, consumer=3, rate=1, proxy=2)
    table = PathTable()
    install_path(net, table, piece, [0, 1, 2, 3])
    return net, table, piece


class TestValidatePaths:
    def test_intact_path_reports_nothing(self):
        net, table, piece = line_fixture()
        assert validate_paths(net, table, [piece]).ok()

    def test_pointer_asymmetry_flagged(self):
        net, table, piece = line_fixture()
        row = table.row(0, 2)
        table.set_row(0, 2, PathRow(prev=0, next=row.next, order_key=row.order_key))
        report = validate_paths(net, table, [piece])
        kinds = [v.kind for v in report.violations]
        assert "pointer-asymmetry" in kinds

    def test_loop_flagged_with_node_name(self):
        net = make_net([(0, 1), (1, 2), (2, 3), (1, 3)],
                       {0: 1.0, 1: 1.0, 2: 1.0, 3: 1.0})
        piece = DataPiece(id=0, source=0, consumer=3, rate=1, proxy=2)
        table = PathTable()
        install_path(net, table, piece, [0, 1, 2, 3])
        row = table.row(0, 3)
        table.set_row(0, 3, PathRow(prev=2, next=1, order_key=row.order_key))
        net.activate(0, 3, 1)
        report = validate_paths(net, table, [piece])
        loops = report.of_kind("loop")
        assert loops and "node 1 visited twice" in loops[0].detail

    def test_inactive_link_flagged(self):
        net, table, piece = line_fixture()
        net.deactivate(0, 1, 2)
        report = validate_paths(net, table, [piece])
        assert report.of_kind("inactive-link")

    def test_walk_chain_stops_at_gap(self):
        net, table, piece = line_fixture()
        table.drop_row(0, 2)
        assert walk_chain(table, 0, 0) == [0, 1, 2]


class TestExport:
    def test_topology_snapshot_lists_nodes_and_links(self):
        net = build_grid_topology(1, 2, 2.5, 3.0, {0}, seed=3)
        text = export_topology(net)
        assert text.splitlines()[0] == "nodes"
        assert "links" in text
        assert any(line.startswith("0 1 eps=") for line in text.splitlines())


@settings(max_examples=50, deadline=None)
@given(rows=st.integers(1, 4), cols=st.integers(2, 5), seed=st.integers(0, 10))
def test_grid_chain_reconstruction_roundtrip(rows, cols, seed):
    net = build_grid_topology(rows, cols, 2.5, 3.6, {0}, seed=seed)
    ids = sorted(net.nodes)
    chain = [ids[0]]
    for v in ids[1:]:
        if v in net.neighbors[chain[-1]]:
            chain.append(v)
    if len(chain) < 2:
        return
    piece = DataPiece(id=0, source=chain[0], consumer=chain[-1], rate=1,
                      proxy=chain[len(chain) // 2])
    table = PathTable()
    install_path(net, table, piece, chain)
    assert walk_chain(table, 0, chain[0]) == chain
    assert validate_paths(net, table, [piece]).ok()
