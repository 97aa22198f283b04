import ipaddress
import random
from collections import defaultdict

from tracemax.topology import Link, Node, NodeKind, PortRef, Topology, dump_topology

BASE_IP = ipaddress.IPv4Address("10.0.0.0")


def ip_of(node_id):
    return BASE_IP + node_id + 1


class TopologyBuilder:
    """
    Builds topologies with dense port numbering: each connect() takes the
    next free port on both ends
    """

    def __init__(self):
        self.nodes = []
        self.links = []
        self.next_port = defaultdict(int)

    def router(self, node_id, kind=NodeKind.CORE_ROUTER, **flags):
        self.nodes.append(Node(id=node_id, kind=kind, ip=ip_of(node_id), **flags))
        return self

    def edge(self, node_id, **flags):
        return self.router(node_id, NodeKind.EDGE_ROUTER, system_border=True, **flags)

    def host(self, node_id, external=False):
        self.nodes.append(
            Node(
                id=node_id,
                kind=NodeKind.ENDPOINT_HOST,
                ip=ip_of(node_id),
                system_border=external,
            )
        )
        return self

    def connect(self, a, b) -> Link:
        link = Link(PortRef(a, self.next_port[a]), PortRef(b, self.next_port[b]))
        self.next_port[a] += 1
        self.next_port[b] += 1
        self.links.append(link)
        return link

    def build(self) -> Topology:
        return Topology(self.nodes, self.links)


def chain(length, hosts=False) -> Topology:
    """
    Routers 1..length in a line; with hosts, host 0 hangs off router 1 and
    host length + 1 off the last router
    """
    builder = TopologyBuilder()
    for node_id in range(1, length + 1):
        builder.router(node_id)
    if hosts:
        builder.host(0).host(length + 1)
        builder.connect(0, 1)
    for node_id in range(1, length):
        builder.connect(node_id, node_id + 1)
    if hosts:
        builder.connect(length, length + 1)
    return builder.build()


def star(degree) -> Topology:
    """
    Hub router 0 with spoke routers 1..degree
    """
    builder = TopologyBuilder().router(0)
    for node_id in range(1, degree + 1):
        builder.router(node_id)
        builder.connect(node_id, 0)
    return builder.build()


def diamond() -> Topology:
    """
    host 0 - R1, R1 - R2 - R4, R1 - R3 - R4, R4 - host 5
    """
    builder = TopologyBuilder().host(0).host(5)
    for node_id in range(1, 5):
        builder.router(node_id)
    builder.connect(0, 1)
    builder.connect(1, 2)
    builder.connect(1, 3)
    builder.connect(2, 4)
    builder.connect(3, 4)
    builder.connect(4, 5)
    return builder.build()


def random_topology(rng: random.Random, size=12, extra_links=3) -> Topology:
    """
    Connected router graph: a random spanning tree plus a few extra links,
    parallel links allowed
    """
    builder = TopologyBuilder()
    order = list(range(size))
    rng.shuffle(order)
    for node_id in range(size):
        builder.router(node_id)
    for i in range(1, size):
        builder.connect(order[i], order[rng.randrange(i)])
    for _ in range(rng.randint(0, extra_links)):
        a, b = rng.sample(range(size), 2)
        builder.connect(a, b)
    return builder.build()


VICTIM = 0
VICTIM_ROUTER = 1
BENIGN_HOST = 40
ATTACKERS = 5


def attack_topology() -> Topology:
    """
    Victim host 0 behind router 1. Router 1 links to cores 11..15, core
    10 + i to border edge router 20 + i, which serves external attacker
    host 30 + i. Benign external host 40 sits on edge router 21.
    """
    builder = TopologyBuilder().host(VICTIM).router(VICTIM_ROUTER)
    builder.connect(VICTIM, VICTIM_ROUTER)
    for i in range(1, ATTACKERS + 1):
        builder.router(10 + i).edge(20 + i).host(30 + i, external=True)
        builder.connect(VICTIM_ROUTER, 10 + i)
        builder.connect(10 + i, 20 + i)
        builder.connect(20 + i, 30 + i)
    builder.host(BENIGN_HOST, external=True)
    builder.connect(21, BENIGN_HOST)
    return builder.build()


def attack_scenario(spoof_mode="random", benign_rate=1, seed=7, duration=40):
    """
    Scenario document for attack_topology: five UDP/53 attackers starting
    at tick 5 with an aggregate rate of ten times the TCP/80 benign rate,
    IDS threshold at twice the benign rate
    """
    attackers = [
        {
            "source": 30 + i,
            "spoof_mode": spoof_mode,
            "rate": 2 * benign_rate,
            "protocol": "udp",
            "dst_port": 53,
            "start_tick": 5,
        }
        for i in range(1, ATTACKERS + 1)
    ]
    if spoof_mode == "fixed":
        for attacker in attackers:
            attacker["spoof_ip"] = "192.0.2.66"
    return {
        "topology": dump_topology(attack_topology()),
        "victim": VICTIM,
        "attackers": attackers,
        "benign_flows": [
            {
                "src": BENIGN_HOST,
                "dst": VICTIM,
                "rate": benign_rate,
                "protocol": "tcp",
                "dst_port": 80,
            }
        ],
        "ids_threshold": 2 * benign_rate,
        "duration": duration,
        "seed": seed,
    }
