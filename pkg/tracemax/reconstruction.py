"""
Backward path reconstruction from a single packet's ID sequence.
"""
import ipaddress
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import tracemax.codec as codec
from tracemax.errors import (
    AmbiguousStep,
    MissingEndpoint,
    NoMatchingNeighbor,
    ParseError,
    UnknownNode,
    UnknownRouter,
)
from tracemax.id_assignment import IdAssignment
from tracemax.topology import PortRef, RouterId, Topology

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ReconstructedPath:
    # source side first; the receiver is not part of routers
    routers: Tuple[RouterId, ...]
    links: Tuple[Tuple[PortRef, PortRef], ...]
    ips: Tuple[ipaddress.IPv4Address, ...]
    receiver: RouterId
    sender_ip: Optional[ipaddress.IPv4Address] = None
    complete: bool = True

    @property
    def origin(self) -> str:
        return "external" if self.sender_ip is not None else "internal"


@dataclass(frozen=True)
class CaptureRecord:
    tick: int
    # None: resolve the endpoint from the option's receiver IP
    node: Optional[RouterId]
    direction: str
    data: bytes


def _candidates(
    topology: Topology, assignment: IdAssignment, node_id, port_id
) -> List[Tuple[RouterId, int, int]]:
    found = []
    for port in topology.ports(node_id):
        neighbor = topology.node(port.peer.node)
        if not neighbor.is_router:
            continue
        if assignment.ids.get((neighbor.id, port.peer.index)) == port_id:
            found.append((neighbor.id, port.peer.index, port.index))
    return found


def reconstruct(
    topology: Topology,
    assignment: IdAssignment,
    option: codec.TracemaxOption,
    receiver,
    strict=False,
) -> ReconstructedPath:
    topology.node(receiver)
    suffix: List[RouterId] = []
    links: List[Tuple[PortRef, PortRef]] = []
    current = receiver
    # Routers past a full option forward it unmarked, so the hop the walk
    # starts from is unknown
    complete = option.id_count < codec.capacity(
        assignment.bit_width, option.has_sender_ip, option.has_receiver_ip
    )
    if not complete:
        logger.info(
            "option is full with %d IDs, path may be truncated", option.id_count
        )

    for port_id in reversed(option.ids):
        candidates = _candidates(topology, assignment, current, port_id)
        if len(candidates) > 1:
            raise AmbiguousStep(current, port_id, [(u, p) for u, p, _ in candidates])
        if not candidates:
            if strict:
                raise NoMatchingNeighbor(current, port_id)
            logger.warning(
                "no neighbor of %s carries ID %d, keeping partial path", current, port_id
            )
            complete = False
            break
        neighbor, neighbor_port, local_port = candidates[0]
        suffix.append(neighbor)
        links.append((PortRef(neighbor, neighbor_port), PortRef(current, local_port)))
        current = neighbor

    routers = tuple(reversed(suffix))
    return ReconstructedPath(
        routers=routers,
        links=tuple(reversed(links)),
        ips=tuple(map_to_ips(topology, routers)),
        receiver=receiver,
        sender_ip=option.sender_ip,
        complete=complete,
    )


def map_to_ips(topology: Topology, path: Sequence[RouterId]) -> List[ipaddress.IPv4Address]:
    ips = []
    for router_id in path:
        try:
            ips.append(topology.node(router_id).ip)
        except UnknownNode:
            raise UnknownRouter(router_id) from None
    return ips


def reconstruct_from_capture(
    record: CaptureRecord, topology: Topology, assignment: IdAssignment
) -> ReconstructedPath:
    packet = codec.decode_packet(record.data)
    option = codec.packet_tracemax(packet, assignment.bit_width)
    receiver = record.node
    if option is None:
        if receiver is None:
            raise MissingEndpoint("capture names no node and the packet carries no option")
        # unmarked: nothing was traced, the path is the receiver alone
        option = codec.TracemaxOption()
    elif receiver is None:
        if option.receiver_ip is None or option.receiver_ip == codec.UNSET_IP:
            raise MissingEndpoint("capture names no node and the option no receiver IP")
        node = topology.node_by_ip(option.receiver_ip)
        if node is None:
            raise MissingEndpoint(f"receiver IP {option.receiver_ip} is not in the topology")
        receiver = node.id
    return reconstruct(topology, assignment, option, receiver)


def parse_capture_line(line) -> CaptureRecord:
    """
    Parse "tick node dir hexbytes"; node "-" leaves the endpoint open
    """
    fields = line.split()
    if len(fields) != 4:
        raise ParseError(f"capture line needs 4 fields, got {len(fields)}")
    tick, node, direction, payload = fields
    try:
        return CaptureRecord(
            tick=int(tick),
            node=None if node == "-" else int(node),
            direction=direction,
            data=bytes.fromhex(payload),
        )
    except ValueError as e:
        raise ParseError(f"bad capture line: {e}") from e


def format_capture_line(record: CaptureRecord) -> str:
    node = "-" if record.node is None else str(record.node)
    return f"{record.tick} {node} {record.direction} {record.data.hex()}"


def load_captures(text) -> List[CaptureRecord]:
    return [
        parse_capture_line(line)
        for line in text.splitlines()
        if line.strip() and not line.lstrip().startswith("#")
    ]


def path_to_dict(path: ReconstructedPath) -> Dict:
    return {
        "routers": list(path.routers),
        "ips": [str(ip) for ip in path.ips],
        "origin": path.origin,
        "sender_ip": str(path.sender_ip) if path.sender_ip is not None else None,
        "receiver": path.receiver,
        "complete": path.complete,
    }


def format_arrow(path: ReconstructedPath) -> str:
    hops = [str(ip) for ip in path.ips]
    if path.sender_ip is not None:
        hops.insert(0, str(path.sender_ip))
    return " -> ".join(hops)
