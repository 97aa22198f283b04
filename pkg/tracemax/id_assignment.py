"""
Port ID assignment. Every port owned by a router gets a small k-bit ID; IDs
are not unique system-wide, only among the ports that face the same node
(Local Uniqueness Constraint), which is what backward reconstruction needs.
"""
import logging
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Dict, List, Mapping, NamedTuple, Tuple

import tracemax.utils as utils
from tracemax.errors import (
    CoverageError,
    InfeasibleBitWidth,
    InvalidBitWidth,
    ParseError,
)
from tracemax.topology import RouterId, Topology

logger = logging.getLogger(__name__)

DEFAULT_BIT_WIDTH = 5
MIN_BIT_WIDTH = 1
MAX_BIT_WIDTH = 8


@dataclass(frozen=True)
class IdAssignment:
    bit_width: int
    ids: Mapping[Tuple[RouterId, int], int] = field(compare=False)

    def __post_init__(self):
        check_bit_width(self.bit_width)
        object.__setattr__(self, "ids", MappingProxyType(dict(self.ids)))

    def __eq__(self, other):
        if not isinstance(other, IdAssignment):
            return NotImplemented
        return self.bit_width == other.bit_width and dict(self.ids) == dict(other.ids)

    def __hash__(self):
        return hash((self.bit_width, tuple(sorted(self.ids.items()))))

    def id_of(self, node_id, port_index) -> int:
        try:
            return self.ids[(node_id, port_index)]
        except KeyError:
            raise CoverageError(node_id, port_index) from None


class Violation(NamedTuple):
    node: RouterId
    ports: Tuple[Tuple[RouterId, int], Tuple[RouterId, int]]
    id: int


def check_bit_width(bit_width):
    if (
        isinstance(bit_width, bool)
        or not isinstance(bit_width, int)
        or not MIN_BIT_WIDTH <= bit_width <= MAX_BIT_WIDTH
    ):
        raise InvalidBitWidth(bit_width)


def inbound_ports(topology: Topology, node_id) -> List[Tuple[RouterId, int]]:
    """
    Router ports whose link ends at node_id, sorted by (neighbor id, port index)
    """
    return sorted(
        (port.peer.node, port.peer.index)
        for port in topology.ports(node_id)
        if topology.node(port.peer.node).is_router
    )


def min_feasible_bit_width(topology: Topology) -> int:
    widest = max(
        (len(inbound_ports(topology, node_id)) for node_id in topology.nodes),
        default=0,
    )
    # ceil(log2(widest)), at least one bit
    return max(MIN_BIT_WIDTH, (widest - 1).bit_length())


def assign_ids(topology: Topology, bit_width=DEFAULT_BIT_WIDTH) -> IdAssignment:
    check_bit_width(bit_width)
    space = 1 << bit_width
    ids: Dict[Tuple[RouterId, int], int] = {}

    # Each router port faces exactly one node, so the per-node groups are
    # disjoint and can be labeled one after the other
    for node_id in sorted(topology.nodes):
        ports = inbound_ports(topology, node_id)
        if len(ports) > space:
            raise InfeasibleBitWidth(node_id, len(ports), bit_width)
        taken = set()
        for port in ports:
            tentative = port[1] % space
            for step in range(space):
                candidate = (tentative + step) % space
                if candidate not in taken:
                    break
            if step:
                logger.debug(
                    "port %s:%s facing %s: ID %d taken, incremented to %d",
                    port[0],
                    port[1],
                    node_id,
                    tentative,
                    candidate,
                )
            taken.add(candidate)
            ids[port] = candidate

    return IdAssignment(bit_width=bit_width, ids=ids)


def verify_assignment(topology: Topology, assignment: IdAssignment) -> List[Violation]:
    for router_id in topology.router_ids():
        for port in topology.ports(router_id):
            if (router_id, port.index) not in assignment.ids:
                raise CoverageError(router_id, port.index)

    violations = []
    for node_id in sorted(topology.nodes):
        seen: Dict[int, Tuple[RouterId, int]] = {}
        for port in inbound_ports(topology, node_id):
            value = assignment.id_of(*port)
            if value >= 1 << assignment.bit_width:
                raise ParseError(
                    f"ID {value} of port {port[0]}:{port[1]} exceeds "
                    f"{assignment.bit_width} bits"
                )
            if value in seen:
                violations.append(Violation(node_id, (seen[value], port), value))
            else:
                seen[value] = port
    return violations


def load_assignment(text) -> IdAssignment:
    document = utils.load_json_document(text)
    utils.check_keys(document, required=("bit_width", "ids"), where="assignment")
    if not isinstance(document["ids"], list):
        raise ParseError("assignment ids must be a list")
    bit_width = utils.require_int(document["bit_width"], "assignment bit_width")
    ids = {}
    for i, record in enumerate(document["ids"]):
        where = f"assignment entry #{i}"
        utils.check_keys(record, required=("node", "port", "id"), where=where)
        key = (
            utils.require_int(record["node"], f"{where} node"),
            utils.require_int(record["port"], f"{where} port"),
        )
        if key in ids:
            raise ParseError(f"{where}: duplicate port {key[0]}:{key[1]}")
        value = utils.require_int(record["id"], f"{where} id")
        if not 0 <= value < 1 << MAX_BIT_WIDTH:
            raise ParseError(f"{where}: id {value} out of range")
        ids[key] = value
    return IdAssignment(bit_width=bit_width, ids=ids)


def dump_assignment(assignment: IdAssignment) -> dict:
    return {
        "bit_width": assignment.bit_width,
        "ids": [
            {"node": node, "port": port, "id": value}
            for (node, port), value in sorted(assignment.ids.items())
        ],
    }
