import ipaddress
import itertools
import json
import random
import unittest

from tests import fixtures
from tracemax.errors import ParseError, UnknownNode, Unreachable, ValidationError
from tracemax.topology import (
    Link,
    Node,
    NodeKind,
    PortRef,
    Topology,
    dump_topology,
    forwarding_tables,
    load_topology,
    neighbors,
    shortest_path,
    structural_hash,
)


def _all_shortest_paths(topology, src, dst):
    # brute force over node sequences of the minimal length, hosts never transit
    adjacency = {
        n: {p.peer.node for p in topology.ports(n)} for n in topology.nodes
    }
    best = []
    frontier = [[src]]
    while frontier and not best:
        extended = []
        for path in frontier:
            for nxt in sorted(adjacency[path[-1]]):
                if nxt in path:
                    continue
                if nxt != dst and topology.node(nxt).is_host:
                    continue
                if nxt == dst:
                    best.append(path + [nxt])
                else:
                    extended.append(path + [nxt])
        frontier = extended
    return best


class TestLoadTopology(unittest.TestCase):
    def test_minimal_document(self):
        text = json.dumps(
            {
                "nodes": [
                    {"id": 1, "kind": "core-router", "ip": "10.0.0.1"},
                    {"id": 2, "kind": "edge-router", "ip": "10.0.0.2"},
                ],
                "links": [{"a": [1, 0], "b": [2, 0]}],
            }
        )
        topology = load_topology(text)
        self.assertEqual(len(topology.nodes), 2)
        self.assertEqual(len(topology.links), 1)
        self.assertEqual(topology.port_count(1) + topology.port_count(2), 2)
        self.assertEqual(topology.node(2).kind, NodeKind.EDGE_ROUTER)
        self.assertFalse(topology.node(2).system_border)

    def test_dangling_reference(self):
        text = json.dumps(
            {
                "nodes": [{"id": 1, "kind": "core-router", "ip": "10.0.0.1"}],
                "links": [{"a": [1, 0], "b": [9, 0]}],
            }
        )
        with self.assertRaises(ValidationError):
            load_topology(text)

    def test_rejects_unknown_keys_and_bad_json(self):
        with self.assertRaises(ParseError):
            load_topology('{"nodes": [], "links": [], "extra": 1}')
        with self.assertRaises(ParseError):
            load_topology("{not json")
        with self.assertRaises(ParseError):
            load_topology(
                '{"nodes": [{"id": 1, "kind": "switch", "ip": "10.0.0.1"}], "links": []}'
            )

    def test_validation(self):
        a = Node(1, NodeKind.CORE_ROUTER, ipaddress.IPv4Address("10.0.0.1"))
        b = Node(2, NodeKind.CORE_ROUTER, ipaddress.IPv4Address("10.0.0.2"))
        same_ip = Node(3, NodeKind.CORE_ROUTER, ipaddress.IPv4Address("10.0.0.1"))
        with self.assertRaises(ValidationError):
            Topology([a, a], [])
        with self.assertRaises(ValidationError):
            Topology([a, same_ip], [])
        with self.assertRaises(ValidationError):
            Topology([a, b], [Link(PortRef(1, 0), PortRef(1, 1))])
        with self.assertRaises(ValidationError):
            # port 1 without port 0
            Topology([a, b], [Link(PortRef(1, 1), PortRef(2, 0))])
        with self.assertRaises(ValidationError):
            Topology(
                [a, b],
                [Link(PortRef(1, 0), PortRef(2, 0)), Link(PortRef(1, 0), PortRef(2, 1))],
            )

    def test_random_graph_round_trip(self):
        rng = random.Random(12)
        for _ in range(20):
            topology = fixtures.random_topology(rng)
            reloaded = load_topology(json.dumps(dump_topology(topology)))
            self.assertEqual(structural_hash(reloaded), structural_hash(topology))
            degree = {n: 0 for n in topology.nodes}
            for link in topology.links:
                degree[link.a.node] += 1
                degree[link.b.node] += 1
            for node_id, count in degree.items():
                self.assertEqual(reloaded.port_count(node_id), count)

    def test_structural_hash_ignores_link_order(self):
        topology = fixtures.chain(4)
        reversed_links = Topology(
            topology.nodes.values(), [Link(l.b, l.a) for l in reversed(topology.links)]
        )
        self.assertEqual(structural_hash(topology), structural_hash(reversed_links))
        self.assertNotEqual(structural_hash(topology), structural_hash(fixtures.chain(5)))

    def test_unknown_node(self):
        with self.assertRaises(UnknownNode):
            fixtures.chain(2).node(7)


class TestNeighbors(unittest.TestCase):
    def test_chain(self):
        topology = fixtures.chain(3)
        self.assertEqual(neighbors(topology, 2), {(1, 0, 0), (3, 1, 0)})

    def test_isolated_node(self):
        node = Node(1, NodeKind.CORE_ROUTER, ipaddress.IPv4Address("10.0.0.1"))
        self.assertEqual(neighbors(Topology([node], []), 1), set())

    def test_star(self):
        self.assertEqual(len(neighbors(fixtures.star(7), 0)), 7)

    def test_peer_is_symmetric(self):
        for seed in range(50):
            topology = fixtures.random_topology(random.Random(seed))
            for node in topology.nodes:
                for port in topology.ports(node):
                    back = topology.peer(port.peer.node, port.peer.index)
                    self.assertEqual(back, PortRef(node, port.index), seed)


class TestShortestPath(unittest.TestCase):
    def test_identity(self):
        self.assertEqual(shortest_path(fixtures.chain(3), 2, 2), [2])

    def test_chain(self):
        self.assertEqual(shortest_path(fixtures.chain(5), 1, 5), [1, 2, 3, 4, 5])

    def test_tie_break_on_lower_id(self):
        self.assertEqual(shortest_path(fixtures.diamond(), 0, 5), [0, 1, 2, 4, 5])

    def test_matches_brute_force_minimum(self):
        rng = random.Random(3)
        for _ in range(20):
            topology = fixtures.random_topology(rng, size=8, extra_links=4)
            for src, dst in itertools.permutations(sorted(topology.nodes), 2):
                expected = min(_all_shortest_paths(topology, src, dst))
                self.assertEqual(shortest_path(topology, src, dst), expected)

    def test_hosts_never_transit(self):
        builder = fixtures.TopologyBuilder().router(1).router(2).host(3)
        builder.connect(1, 3)
        builder.connect(3, 2)
        with self.assertRaises(Unreachable):
            shortest_path(builder.build(), 1, 2)

    def test_disabled_link(self):
        topology = fixtures.diamond()
        link = topology.link_at(1, 1)
        path = shortest_path(topology, 0, 5, frozenset({link}))
        self.assertEqual(path, [0, 1, 3, 4, 5])


class TestForwardingTables(unittest.TestCase):
    def test_follow_shortest_paths(self):
        topology = fixtures.diamond()
        tables = forwarding_tables(topology)
        victim = ipaddress.IPv4Network(topology.node(5).ip)
        self.assertEqual(set(tables), {1, 2, 3, 4})
        # R1 port 1 leads to R2
        self.assertEqual(tables[1][victim], 1)
        self.assertEqual(tables[4][victim], 2)

    def test_disabled_link_shifts_route(self):
        topology = fixtures.diamond()
        victim = ipaddress.IPv4Network(topology.node(5).ip)
        tables = forwarding_tables(topology, frozenset({topology.link_at(1, 1)}))
        self.assertEqual(tables[1][victim], 2)

    def test_no_route_without_link(self):
        topology = fixtures.diamond()
        victim = ipaddress.IPv4Network(topology.node(5).ip)
        tables = forwarding_tables(topology, frozenset({topology.link_at(4, 2)}))
        self.assertTrue(all(victim not in table for table in tables.values()))


if __name__ == "__main__":
    unittest.main()
