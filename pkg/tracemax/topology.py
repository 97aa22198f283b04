"""
Router network model: nodes, dense per-router ports, bidirectional links,
endpoint hosts, and the routing primitives built on top of them.

Topology file (JSON):

    {
      "nodes": [{"id": 1, "kind": "edge-router", "ip": "10.0.0.1",
                 "system_border": true, "ingress_filtering": false}, ...],
      "links": [{"a": [1, 0], "b": [2, 0]}, ...]
    }
"""
import hashlib
import ipaddress
import logging
from dataclasses import dataclass
from enum import Enum
from types import MappingProxyType
from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Tuple

import networkx as nx

import tracemax.utils as utils
from tracemax.errors import (
    ParseError,
    UnknownNode,
    Unreachable,
    ValidationError,
)

logger = logging.getLogger(__name__)

RouterId = int


class NodeKind(Enum):
    CORE_ROUTER = "core-router"
    EDGE_ROUTER = "edge-router"
    ENDPOINT_HOST = "endpoint-host"


@dataclass(frozen=True, order=True)
class PortRef:
    node: RouterId
    index: int


@dataclass(frozen=True)
class Port:
    owner: RouterId
    index: int
    peer: PortRef


@dataclass(frozen=True)
class Node:
    id: RouterId
    kind: NodeKind
    ip: ipaddress.IPv4Address
    system_border: bool = False
    ingress_filtering: bool = False

    @property
    def is_router(self) -> bool:
        return self.kind is not NodeKind.ENDPOINT_HOST

    @property
    def is_host(self) -> bool:
        return self.kind is NodeKind.ENDPOINT_HOST

    # A host flagged as system_border sits outside the Tracemax deployment
    @property
    def is_external(self) -> bool:
        return self.is_host and self.system_border


@dataclass(frozen=True, order=True)
class Link:
    a: PortRef
    b: PortRef

    def end(self, node_id) -> PortRef:
        if self.a.node == node_id:
            return self.a
        if self.b.node == node_id:
            return self.b
        raise UnknownNode(node_id)

    def other(self, ref: PortRef) -> PortRef:
        return self.b if ref == self.a else self.a


class Topology:
    """
    Immutable, validated router network
    """

    def __init__(self, nodes: Iterable[Node], links: Iterable[Link]):
        node_map: Dict[RouterId, Node] = {}
        ips = set()
        for node in nodes:
            if node.id in node_map:
                raise ValidationError(f"duplicate node id {node.id}")
            if node.ip in ips:
                raise ValidationError(f"duplicate IP {node.ip}")
            node_map[node.id] = node
            ips.add(node.ip)

        peers: Dict[PortRef, PortRef] = {}
        link_at: Dict[PortRef, Link] = {}
        link_list: List[Link] = []
        for link in links:
            for ref in (link.a, link.b):
                if ref.node not in node_map:
                    raise ValidationError(f"link {_link_text(link)} names undefined node {ref.node}")
                if ref.index < 0:
                    raise ValidationError(f"negative port index in link {_link_text(link)}")
                if ref in peers:
                    raise ValidationError(
                        f"port {ref.node}:{ref.index} is used by more than one link"
                    )
            if link.a.node == link.b.node:
                raise ValidationError(f"self-loop at node {link.a.node}")
            peers[link.a] = link.b
            peers[link.b] = link.a
            link_at[link.a] = link
            link_at[link.b] = link
            link_list.append(link)

        port_counts: Dict[RouterId, int] = {node_id: 0 for node_id in node_map}
        for ref in peers:
            port_counts[ref.node] += 1
        for ref in peers:
            if ref.index >= port_counts[ref.node]:
                raise ValidationError(
                    f"port indices of node {ref.node} are not dense from 0"
                )

        self._nodes = MappingProxyType(node_map)
        self._links = tuple(link_list)
        self._peers = MappingProxyType(peers)
        self._link_at = MappingProxyType(link_at)
        self._port_counts = MappingProxyType(port_counts)
        self._by_ip = MappingProxyType({node.ip: node for node in node_map.values()})
        self._graph: Optional[nx.MultiGraph] = None

    @property
    def nodes(self):
        return self._nodes

    @property
    def links(self) -> Tuple[Link, ...]:
        return self._links

    def node(self, node_id) -> Node:
        try:
            return self._nodes[node_id]
        except KeyError:
            raise UnknownNode(node_id) from None

    def node_by_ip(self, ip) -> Optional[Node]:
        return self._by_ip.get(ipaddress.IPv4Address(ip))

    def router_ids(self) -> List[RouterId]:
        return sorted(n.id for n in self._nodes.values() if n.is_router)

    def host_ids(self) -> List[RouterId]:
        return sorted(n.id for n in self._nodes.values() if n.is_host)

    def port_count(self, node_id) -> int:
        self.node(node_id)
        return self._port_counts[node_id]

    def ports(self, node_id) -> List[Port]:
        return [
            Port(owner=node_id, index=i, peer=self._peers[PortRef(node_id, i)])
            for i in range(self.port_count(node_id))
        ]

    def peer(self, node_id, port_index) -> PortRef:
        try:
            return self._peers[PortRef(node_id, port_index)]
        except KeyError:
            self.node(node_id)
            raise ValidationError(f"node {node_id} has no port {port_index}") from None

    def link_at(self, node_id, port_index) -> Link:
        self.peer(node_id, port_index)
        return self._link_at[PortRef(node_id, port_index)]

    def graph(self) -> nx.MultiGraph:
        # Edge keys are link positions so views can hide single links
        if self._graph is None:
            graph = nx.MultiGraph()
            graph.add_nodes_from(sorted(self._nodes))
            for key, link in enumerate(self._links):
                graph.add_edge(link.a.node, link.b.node, key=key)
            self._graph = nx.freeze(graph)
        return self._graph

    def link_key(self, link: Link) -> int:
        return self._links.index(link)


def _link_text(link: Link):
    return f"{link.a.node}:{link.a.index}-{link.b.node}:{link.b.index}"


def _parse_port_ref(value, where) -> PortRef:
    if not isinstance(value, list) or len(value) != 2:
        raise ParseError(f"{where} must be a [node id, port index] pair")
    return PortRef(
        node=utils.require_int(value[0], f"{where} node id"),
        index=utils.require_int(value[1], f"{where} port index"),
    )


def _parse_node(record, position) -> Node:
    where = f"node #{position}"
    utils.check_keys(
        record,
        required=("id", "kind", "ip"),
        optional=("system_border", "ingress_filtering"),
        where=where,
    )
    try:
        kind = NodeKind(record["kind"])
    except ValueError:
        raise ParseError(f"{where}: unknown kind {record['kind']!r}") from None
    node_id = utils.require_int(record["id"], f"{where} id")
    if node_id < 0:
        raise ParseError(f"{where}: id must be unsigned")
    return Node(
        id=node_id,
        kind=kind,
        ip=utils.parse_ipv4(record["ip"], f"{where} ip"),
        system_border=utils.require_bool(
            record.get("system_border", False), f"{where} system_border"
        ),
        ingress_filtering=utils.require_bool(
            record.get("ingress_filtering", False), f"{where} ingress_filtering"
        ),
    )


def topology_from_dict(document) -> Topology:
    utils.check_keys(document, required=("nodes", "links"), where="topology")
    if not isinstance(document["nodes"], list) or not isinstance(
        document["links"], list
    ):
        raise ParseError("topology nodes and links must be lists")
    nodes = [_parse_node(record, i) for i, record in enumerate(document["nodes"])]
    links = []
    for i, record in enumerate(document["links"]):
        utils.check_keys(record, required=("a", "b"), where=f"link #{i}")
        links.append(
            Link(
                a=_parse_port_ref(record["a"], f"link #{i} a"),
                b=_parse_port_ref(record["b"], f"link #{i} b"),
            )
        )
    return Topology(nodes, links)


def load_topology(text) -> Topology:
    return topology_from_dict(utils.load_json_document(text))


def dump_topology(topology: Topology) -> dict:
    return {
        "nodes": [
            {
                "id": node.id,
                "kind": node.kind.value,
                "ip": str(node.ip),
                "system_border": node.system_border,
                "ingress_filtering": node.ingress_filtering,
            }
            for node in sorted(topology.nodes.values(), key=lambda n: n.id)
        ],
        "links": [
            {"a": [link.a.node, link.a.index], "b": [link.b.node, link.b.index]}
            for link in topology.links
        ],
    }


def structural_hash(topology: Topology) -> str:
    document = dump_topology(topology)
    # Link order and orientation carry no meaning
    document["links"] = sorted(
        sorted([tuple(link["a"]), tuple(link["b"])]) for link in document["links"]
    )
    return hashlib.sha256(utils.dump_json_document(document).encode()).hexdigest()


def neighbors(topology: Topology, node_id) -> Set[Tuple[RouterId, int, int]]:
    return {
        (port.peer.node, port.index, port.peer.index)
        for port in topology.ports(node_id)
    }


def routing_graph(
    topology: Topology,
    endpoints: Iterable[RouterId] = (),
    disabled: FrozenSet[Link] = frozenset(),
):
    """
    View of the network that packets may cross: every router plus the given
    endpoint hosts, without disabled links. Hosts never transit.
    """
    graph = topology.graph()
    if disabled:
        graph = nx.restricted_view(
            graph,
            [],
            [(l.a.node, l.b.node, topology.link_key(l)) for l in disabled],
        )
    keep = set(topology.router_ids()) | set(endpoints)
    return graph.subgraph(keep)


def _next_hop(graph, distances, node_id) -> RouterId:
    return min(
        n for n in graph.neighbors(node_id) if distances.get(n) == distances[node_id] - 1
    )


def shortest_path(
    topology: Topology,
    src_node,
    dst_node,
    disabled: FrozenSet[Link] = frozenset(),
) -> List[RouterId]:
    topology.node(src_node)
    topology.node(dst_node)
    if src_node == dst_node:
        return [src_node]
    graph = routing_graph(topology, (src_node, dst_node), disabled)
    distances = nx.single_source_shortest_path_length(graph, dst_node)
    if src_node not in distances:
        raise Unreachable(src_node, dst_node)
    path = [src_node]
    while path[-1] != dst_node:
        path.append(_next_hop(graph, distances, path[-1]))
    return path


def out_port_towards(
    topology: Topology,
    node_id,
    next_hop,
    disabled: FrozenSet[Link] = frozenset(),
) -> int:
    return min(
        port.index
        for port in topology.ports(node_id)
        if port.peer.node == next_hop
        and topology.link_at(node_id, port.index) not in disabled
    )


def forwarding_tables(
    topology: Topology, disabled: FrozenSet[Link] = frozenset()
) -> Dict[RouterId, Dict[ipaddress.IPv4Network, int]]:
    """
    Per-router map of destination /32 prefix to outgoing port index, following
    the same lowest-id tie-break as shortest_path
    """
    tables: Dict[RouterId, Dict[ipaddress.IPv4Network, int]] = {
        router_id: {} for router_id in topology.router_ids()
    }
    for dst in sorted(topology.nodes):
        graph = routing_graph(topology, (dst,), disabled)
        distances = nx.single_source_shortest_path_length(graph, dst)
        prefix = ipaddress.IPv4Network(topology.node(dst).ip)
        for router_id in tables:
            if router_id == dst or router_id not in distances:
                continue
            hop = _next_hop(graph, distances, router_id)
            tables[router_id][prefix] = out_port_towards(
                topology, router_id, hop, disabled
            )
    return tables
