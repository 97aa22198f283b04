import ipaddress
import json
import os
import random
import tempfile
import unittest
from collections import Counter

import dpkt

import tracemax.marking as marking
import tracemax.reconstruction as reconstruction
import tracemax.simulator as simulator
import tracemax.utils as utils
from tests import fixtures
from tracemax.errors import ConfigError
from tracemax.id_assignment import assign_ids
from tracemax.topology import dump_topology


def run(document, base_dir="."):
    return simulator.run_scenario(simulator.scenario_from_dict(document, base_dir))


def conserved(report):
    for stats in report.flows.values():
        if stats.generated != (
            stats.delivered + stats.dropped_total + stats.lost + stats.in_flight
        ):
            return False
    return True


class TestIdsDetect(unittest.TestCase):
    def test_fires_on_first_tick_at_threshold(self):
        self.assertEqual(
            simulator.ids_detect([1, 2, 100], 50, first_tick=1), simulator.Detection(True, 3)
        )
        self.assertEqual(simulator.ids_detect([1, 2, 100], 50).tick, 2)

    def test_below_threshold(self):
        self.assertFalse(simulator.ids_detect([1, 2, 3], 4).fired)
        self.assertFalse(simulator.ids_detect([], 1).fired)

    def test_boundary(self):
        self.assertEqual(simulator.ids_detect([0, 5], 5).tick, 1)

    def test_threshold_must_be_positive(self):
        with self.assertRaises(ConfigError):
            simulator.ids_detect([1], 0)


class TestGenerateTraffic(unittest.TestCase):
    def setUp(self):
        self.topology = fixtures.attack_topology()

    def flow(self, **changes):
        fields = dict(label="f", src=31, dst=0, rate=3)
        fields.update(changes)
        return simulator.FlowSpec(**fields)

    def test_rate_zero_and_start_tick(self):
        rng = random.Random(1)
        self.assertEqual(simulator.generate_traffic(self.flow(rate=0), 0, rng, self.topology), [])
        self.assertEqual(
            simulator.generate_traffic(self.flow(start_tick=4), 3, rng, self.topology), []
        )

    def test_fixed_spoof(self):
        spoof = ipaddress.IPv4Address("192.0.2.66")
        flow = self.flow(spoof_mode=simulator.SpoofMode.FIXED, spoof_ip=spoof)
        packets = simulator.generate_traffic(flow, 0, random.Random(1), self.topology)
        self.assertEqual(len(packets), 3)
        self.assertEqual({p.header.src_ip for p in packets}, {spoof})
        self.assertEqual({p.header.dst_ip for p in packets}, {fixtures.ip_of(0)})

    def test_no_spoof_and_transport(self):
        flow = self.flow(protocol=dpkt.ip.IP_PROTO_TCP, dst_port=80, payload_size=10)
        packets = simulator.generate_traffic(flow, 2, random.Random(1), self.topology)
        self.assertEqual({p.header.src_ip for p in packets}, {fixtures.ip_of(31)})
        for packet in packets:
            self.assertEqual(packet.header.protocol, dpkt.ip.IP_PROTO_TCP)
            self.assertEqual(marking.destination_port(packet), 80)
            self.assertEqual(len(packet.payload), 20 + 10)
        self.assertEqual([p.header.identification for p in packets], [6, 7, 8])

    def test_deterministic_under_seed(self):
        flow = self.flow(spoof_mode=simulator.SpoofMode.RANDOM)
        first = simulator.generate_traffic(flow, 0, random.Random(5), self.topology)
        second = simulator.generate_traffic(flow, 0, random.Random(5), self.topology)
        self.assertEqual(first, second)

    def test_random_spoof_is_uniform(self):
        pool = ipaddress.IPv4Network("198.18.0.0/28")
        flow = self.flow(spoof_mode=simulator.SpoofMode.RANDOM, rate=100)
        rng = random.Random(11)
        counts = Counter()
        for tick in range(100):
            for packet in simulator.generate_traffic(flow, tick, rng, self.topology, pool):
                self.assertIn(packet.header.src_ip, pool)
                counts[packet.header.src_ip] += 1
        expected = 10000 / pool.num_addresses
        chi_square = sum((c - expected) ** 2 / expected for c in counts.values())
        self.assertEqual(len(counts), pool.num_addresses)
        # 15 degrees of freedom, p = 0.0001
        self.assertLess(chi_square, 44.3)


class TestRouteChange(unittest.TestCase):
    def setUp(self):
        self.topology = fixtures.diamond()
        self.view = simulator.RoutingView(self.topology, 5)
        self.victim = ipaddress.IPv4Network(fixtures.ip_of(5))

    def test_shift_and_restore(self):
        link = self.topology.link_at(1, 1)
        tables = simulator.route_change(self.view, simulator.RouteChangeEvent(3, link, False))
        self.assertEqual(tables[1][self.victim], 2)
        tables = simulator.route_change(self.view, simulator.RouteChangeEvent(4, link, True))
        self.assertEqual(tables[1][self.victim], 1)
        self.assertEqual(self.view.warnings, [])

    def test_disconnected_victim_warns(self):
        link = self.topology.link_at(4, 2)
        with self.assertLogs("tracemax.simulator", level="WARNING"):
            tables = simulator.route_change(
                self.view, simulator.RouteChangeEvent(1, link, False)
            )
        self.assertTrue(all(self.victim not in t for t in tables.values()))
        self.assertEqual(len(self.view.warnings), 1)
        self.assertIn("victim 5", self.view.warnings[0])


class TestScenarioFile(unittest.TestCase):
    def test_rejects_bad_documents(self):
        base = fixtures.attack_scenario()
        for changes in (
            {"victim": 99},
            {"unknown_key": 1},
            {"loss_prob": 1.0},
            {"ids_threshold": 0},
            {"trace_scope": "somewhere"},
            {"attackers": [{"source": 1, "rate": 1}]},
            {"attackers": [{"source": 31, "rate": 1, "spoof_mode": "fixed"}]},
            {"route_change_events": [{"tick": 1, "link": [1, 99], "action": "disable"}]},
            {"static_filters": [{"action": "nuke"}]},
        ):
            document = dict(base, **changes)
            with self.assertRaises(ConfigError, msg=str(changes)):
                simulator.scenario_from_dict(document)
        with self.assertRaises(ConfigError):
            simulator.load_scenario("{")

    def test_topology_by_path(self):
        document = fixtures.attack_scenario()
        with tempfile.TemporaryDirectory() as directory:
            utils.write_text_file(
                os.path.join(directory, "net.json"),
                json.dumps(document["topology"]),
            )
            document["topology"] = "net.json"
            config = simulator.load_scenario(json.dumps(document), directory)
        self.assertEqual(len(config.attackers), 5)
        self.assertEqual(config.attackers[0].protocol, dpkt.ip.IP_PROTO_UDP)
        self.assertEqual(config.benign_flows[0].dst_port, 80)
        self.assertEqual(config.spoof_pool, simulator.DEFAULT_SPOOF_POOL)
        self.assertEqual(config.collection_ticks, 5)

    def test_static_filters_from_file(self):
        document = fixtures.attack_scenario()
        victim = str(fixtures.ip_of(fixtures.VICTIM))
        rules = [{"dst": victim, "protocol": "udp", "port": 53}]
        with tempfile.TemporaryDirectory() as directory:
            utils.write_text_file(
                os.path.join(directory, "filters.json"), json.dumps(rules)
            )
            document["static_filters"] = "filters.json"
            config = simulator.scenario_from_dict(document, directory)
            document["static_filters"] = "missing.json"
            with self.assertRaises(ConfigError):
                simulator.scenario_from_dict(document, directory)
        self.assertEqual(len(config.static_filters), 1)
        self.assertEqual(config.static_filters[0].port, 53)

        report = simulator.run_scenario(config)
        self.assertIsNone(report.detection_tick)
        attack = report.flows["attacker-0"]
        self.assertEqual(attack.delivered, 0)
        self.assertEqual(attack.dropped, {"defense_filter": attack.generated})
        self.assertEqual(report.flows["benign-0"].dropped_total, 0)


class TestRunScenario(unittest.TestCase):
    def test_five_attackers(self):
        report = run(fixtures.attack_scenario())
        self.assertEqual(report.detection_tick, 8)
        self.assertEqual(report.distinct_attacker_count, 5)
        self.assertEqual(len(report.traced_paths), 5)
        for i in range(1, 6):
            path = report.traced_paths[f"attacker-{i - 1}"]
            self.assertEqual(path.routers, (20 + i, 10 + i, fixtures.VICTIM_ROUTER))
            self.assertEqual(path.sender_ip, fixtures.ip_of(30 + i))
            self.assertTrue(path.complete)
        self.assertEqual(len({p.routers for p in report.traced_paths.values()}), 5)
        self.assertIsNotNone(report.defense_tick)
        self.assertGreaterEqual(report.attack_drop_rate, 0.99)
        self.assertEqual(report.benign_drop_rate, 0.0)
        self.assertEqual(report.oracle_mismatches, 0)
        self.assertGreater(report.oracle_checks, 0)
        self.assertTrue(conserved(report))
        self.assertEqual(len(report.installed_filters), 1)
        self.assertEqual(report.installed_filters[0].port, 53)

    def test_detection_within_three_ticks_of_onset(self):
        for seed in (1, 2, 3):
            first = run(fixtures.attack_scenario(seed=seed, benign_rate=2))
            second = run(fixtures.attack_scenario(seed=seed, benign_rate=2))
            self.assertEqual(first.detection_tick, second.detection_tick)
            self.assertLessEqual(first.detection_tick - 5, 3)
            self.assertGreaterEqual(first.detection_tick, 5)

    def test_spoof_independence(self):
        traced = {}
        for mode in ("none", "random", "fixed"):
            report = run(fixtures.attack_scenario(spoof_mode=mode))
            traced[mode] = {
                label: (path.routers, path.sender_ip)
                for label, path in report.traced_paths.items()
            }
        self.assertEqual(traced["none"], traced["random"])
        self.assertEqual(traced["none"], traced["fixed"])

    def test_deterministic_report(self):
        document = fixtures.attack_scenario(duration=20)
        document["loss_prob"] = 0.1
        first = utils.dump_json_document(run(document).to_dict())
        second = utils.dump_json_document(run(document).to_dict())
        self.assertEqual(first, second)

    def test_no_attackers(self):
        document = fixtures.attack_scenario()
        document["attackers"] = []
        report = run(document)
        self.assertIsNone(report.detection_tick)
        self.assertEqual(report.traced_paths, {})
        benign = report.flows["benign-0"]
        self.assertEqual(benign.dropped_total, 0)
        self.assertEqual(benign.delivered + benign.in_flight, benign.generated)
        self.assertEqual(benign.in_flight, 3)

    def test_loss_is_accounted(self):
        document = fixtures.attack_scenario()
        document["loss_prob"] = 0.3
        report = run(document)
        self.assertTrue(conserved(report))
        self.assertGreater(sum(s.lost for s in report.flows.values()), 0)
        self.assertEqual(report.oracle_mismatches, 0)

    def test_delay_filter(self):
        document = fixtures.attack_scenario()
        document["filter_action"] = "delay"
        report = run(document)
        self.assertEqual(report.attack_drop_rate, 0.0)
        self.assertTrue(conserved(report))

    def test_path_scopes(self):
        document = fixtures.attack_scenario()
        document["trace_scope"] = "path"
        document["filter_scope"] = "paths"
        report = run(document)
        self.assertEqual(report.distinct_attacker_count, 5)
        self.assertGreaterEqual(report.attack_drop_rate, 0.99)

    def test_victim_link_cut(self):
        document = fixtures.attack_scenario()
        document["route_change_events"] = [
            {"tick": 2, "link": [fixtures.VICTIM_ROUTER, 0], "action": "disable"}
        ]
        report = run(document)
        self.assertIsNone(report.detection_tick)
        self.assertGreater(report.flows["benign-0"].dropped.get("no_route", 0), 0)
        self.assertEqual(len(report.warnings), 1)
        self.assertTrue(conserved(report))

    def test_route_shift_is_reflected_in_paths(self):
        topology = fixtures.diamond()
        document = {
            "topology": dump_topology(topology),
            "victim": 5,
            "benign_flows": [{"src": 0, "dst": 5, "rate": 1}],
            "ids_threshold": 1,
            "duration": 20,
            "seed": 3,
            "route_change_events": [
                {"tick": 10, "link": [1, 1], "action": "disable"}
            ],
        }
        report = run(document)
        self.assertEqual(report.detection_tick, 3)
        self.assertEqual(report.oracle_mismatches, 0)
        marked = report.collector.records
        before = {r["router"] for r in marked if r["event"] == "marked" and r["time"] < 10}
        after = {r["router"] for r in marked if r["event"] == "marked" and r["time"] > 10}
        self.assertEqual(before, {1, 2, 4})
        self.assertEqual(after, {1, 3, 4})
        self.assertTrue(conserved(report))

    def test_capacity_exceeded_counted(self):
        topology = fixtures.chain(60, hosts=True)
        document = {
            "topology": dump_topology(topology),
            "victim": 61,
            "benign_flows": [{"src": 0, "dst": 61, "rate": 1}],
            "ids_threshold": 1,
            "duration": 130,
            "seed": 1,
            "bit_width": 5,
        }
        report = run(document)
        self.assertEqual(report.detection_tick, 60)
        self.assertGreater(report.capacity_exceeded_count, 0)
        self.assertEqual(
            report.collector.count(marking.Event.CAPACITY_EXCEEDED),
            report.capacity_exceeded_count,
        )
        self.assertEqual(report.oracle_mismatches, 0)
        assignment = assign_ids(topology, 5)
        paths = [
            reconstruction.reconstruct_from_capture(record, topology, assignment)
            for record in report.captures
        ]
        self.assertTrue(any(not p.complete for p in paths))
        self.assertTrue(any(p.complete for p in paths))


if __name__ == "__main__":
    unittest.main()
