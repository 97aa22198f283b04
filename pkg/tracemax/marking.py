"""
Per-router packet processing: border clearing and sender stamping, ingress
filtering, defense filters, source-route dropping, ID marking and header
bookkeeping.
"""
import hashlib
import ipaddress
import json
import logging
import struct
from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Tuple

from dpkt import ip as dpkt_ip

import tracemax.codec as codec
import tracemax.utils as utils
from tracemax.errors import (
    CapacityExceeded,
    CodecError,
    EmptyScope,
    InvalidSignature,
    MalformedOptionArea,
    ParseError,
)
from tracemax.id_assignment import IdAssignment
from tracemax.topology import RouterId, Topology

logger = logging.getLogger(__name__)

DEFAULT_DELAY_TICKS = 2

PROTOCOLS = {
    "icmp": dpkt_ip.IP_PROTO_ICMP,
    "tcp": dpkt_ip.IP_PROTO_TCP,
    "udp": dpkt_ip.IP_PROTO_UDP,
}


class Action(Enum):
    DROP = "drop"
    PASS = "pass"
    DELAY = "delay"


class Outcome(Enum):
    FORWARD = "forward"
    DELIVER = "deliver"
    DROP = "drop"


class DropReason(Enum):
    LSR_SSR = "lsr_ssr"
    INGRESS_FILTER = "ingress_filter"
    DEFENSE_FILTER = "defense_filter"
    MALFORMED = "malformed"
    NO_ROUTE = "no_route"
    TTL_EXPIRED = "ttl_expired"


class Event(Enum):
    MARKED = "marked"
    CLEARED = "cleared"
    DROPPED = "dropped"
    CAPACITY_EXCEEDED = "capacity_exceeded"
    CORRECTED = "corrected"


def destination_port(packet: codec.Ipv4Packet) -> Optional[int]:
    if packet.header.protocol not in (dpkt_ip.IP_PROTO_TCP, dpkt_ip.IP_PROTO_UDP):
        return None
    if len(packet.payload) < 4:
        return None
    return struct.unpack("!HH", packet.payload[:4])[1]


def packet_digest(packet: codec.Ipv4Packet) -> str:
    h = packet.header
    digest = hashlib.sha256()
    digest.update(struct.pack("!H", h.identification))
    digest.update(h.src_ip.packed + h.dst_ip.packed)
    digest.update(packet.payload)
    return digest.hexdigest()[:16]


@dataclass(frozen=True)
class FilterSignature:
    src: Optional[ipaddress.IPv4Network] = None
    dst: Optional[ipaddress.IPv4Network] = None
    protocol: Optional[int] = None
    port: Optional[int] = None
    action: Action = Action.DROP

    def __post_init__(self):
        if (
            self.src is None
            and self.dst is None
            and self.protocol is None
            and self.port is None
        ):
            raise InvalidSignature("signature matches every packet")

    def matches(self, packet: codec.Ipv4Packet) -> bool:
        h = packet.header
        if self.src is not None and h.src_ip not in self.src:
            return False
        if self.dst is not None and h.dst_ip not in self.dst:
            return False
        if self.protocol is not None and h.protocol != self.protocol:
            return False
        if self.port is not None and destination_port(packet) != self.port:
            return False
        return True

    def to_dict(self) -> dict:
        return {
            "src": str(self.src) if self.src is not None else None,
            "dst": str(self.dst) if self.dst is not None else None,
            "protocol": self.protocol,
            "port": self.port,
            "action": self.action.value,
        }


def parse_protocol(value, where, error_cls=ParseError) -> Optional[int]:
    if value is None:
        return None
    if isinstance(value, str):
        try:
            return PROTOCOLS[value.lower()]
        except KeyError:
            raise error_cls(f"{where}: unknown protocol {value!r}") from None
    value = utils.require_int(value, where, error_cls)
    if not 0 <= value <= 255:
        raise error_cls(f"{where}: protocol {value} out of range")
    return value


def filter_from_dict(record, where="filter") -> FilterSignature:
    utils.check_keys(
        record,
        required=(),
        optional=("src", "dst", "protocol", "port", "action"),
        where=where,
    )
    try:
        action = Action(record.get("action", "drop"))
    except ValueError:
        raise ParseError(f"{where}: unknown action {record['action']!r}") from None
    port = record.get("port")
    if port is not None:
        port = utils.require_int(port, f"{where} port")
    return FilterSignature(
        src=utils.parse_ipv4_network(record["src"], f"{where} src")
        if record.get("src") is not None
        else None,
        dst=utils.parse_ipv4_network(record["dst"], f"{where} dst")
        if record.get("dst") is not None
        else None,
        protocol=parse_protocol(record.get("protocol"), f"{where} protocol"),
        port=port,
        action=action,
    )


def load_filters(text) -> List[FilterSignature]:
    document = utils.load_json_document(text)
    if not isinstance(document, list):
        raise ParseError("filter file must hold a list of rules")
    return [filter_from_dict(r, f"filter #{i}") for i, r in enumerate(document)]


@dataclass(frozen=True)
class PortInfo:
    peer_node: RouterId
    peer_port: int
    peer_ip: ipaddress.IPv4Address
    peer_is_router: bool
    peer_is_external: bool
    # None means no ingress check applies on this port
    legitimate_sources: Optional[Tuple[ipaddress.IPv4Network, ...]] = None


@dataclass(frozen=True)
class RouterState:
    node: RouterId
    ip: ipaddress.IPv4Address
    assignment: IdAssignment
    ports: Tuple[PortInfo, ...]
    forwarding_table: Mapping[ipaddress.IPv4Network, int]
    tracing_enabled: bool = False
    system_border: bool = False
    ingress_filtering: bool = False
    filter_rules: Tuple[FilterSignature, ...] = ()
    marking_peers: FrozenSet[RouterId] = frozenset()
    stamp_receiver_ip: bool = False
    delay_ticks: int = DEFAULT_DELAY_TICKS

    @property
    def bit_width(self) -> int:
        return self.assignment.bit_width


@dataclass(frozen=True)
class ForwardDecision:
    outcome: Outcome
    packet: Optional[codec.Ipv4Packet] = None
    out_port: Optional[int] = None
    reason: Optional[DropReason] = None
    delay: int = 0
    marked: bool = False
    capacity_exceeded: bool = False
    corrected: bool = False


@dataclass(frozen=True)
class TraceTrigger:
    """
    Control message from the victim's IDS; authentic by assumption.
    A scope of None means every router receiving the trigger.
    """

    victim: RouterId
    scope: Optional[FrozenSet[RouterId]] = None


class Collector:
    """
    Sink for path information and router events, stamped with the current
    simulation time
    """

    def __init__(self):
        self.clock = 0
        self.records: List[dict] = []

    def emit(self, router, event: Event, packet, option=None, detail=None):
        self.records.append(
            {
                "time": self.clock,
                "router": router,
                "event": event.value,
                "digest": packet_digest(packet),
                "option": option.hex() if option is not None else "",
                "detail": detail,
            }
        )

    def count(self, event: Event) -> int:
        return sum(1 for record in self.records if record["event"] == event.value)

    def lines(self) -> List[str]:
        return [json.dumps(record, sort_keys=True) for record in self.records]


def router_state(
    topology: Topology,
    node_id,
    assignment: IdAssignment,
    forwarding_table,
    **settings,
) -> RouterState:
    node = topology.node(node_id)
    ports = []
    for port in topology.ports(node_id):
        peer = topology.node(port.peer.node)
        ports.append(
            PortInfo(
                peer_node=peer.id,
                peer_port=port.peer.index,
                peer_ip=peer.ip,
                peer_is_router=peer.is_router,
                peer_is_external=peer.is_external,
                legitimate_sources=(ipaddress.IPv4Network(peer.ip),)
                if peer.is_host
                else None,
            )
        )
    return RouterState(
        node=node_id,
        ip=node.ip,
        assignment=assignment,
        ports=tuple(ports),
        forwarding_table=dict(forwarding_table),
        system_border=node.system_border,
        ingress_filtering=node.ingress_filtering,
        **settings,
    )


def router_states(
    topology: Topology, assignment: IdAssignment, tables, **settings
) -> Dict[RouterId, RouterState]:
    return {
        router_id: router_state(
            topology, router_id, assignment, tables.get(router_id, {}), **settings
        )
        for router_id in topology.router_ids()
    }


def lookup_route(table: Mapping[ipaddress.IPv4Network, int], address) -> Optional[int]:
    port = table.get(ipaddress.IPv4Network(address))
    if port is not None:
        return port
    best = None
    for prefix, candidate in table.items():
        if address in prefix and (best is None or prefix.prefixlen > best[0].prefixlen):
            best = (prefix, candidate)
    return best[1] if best else None


def activate_tracing(
    routers: Mapping[RouterId, RouterState], trigger: TraceTrigger
) -> Dict[RouterId, RouterState]:
    scope = frozenset(routers) if trigger.scope is None else frozenset(trigger.scope)
    scope &= frozenset(routers)
    if not scope:
        raise EmptyScope(f"trace trigger for victim {trigger.victim} reaches no router")
    updated = dict(routers)
    for router_id in sorted(scope):
        state = routers[router_id]
        for port_index in range(len(state.ports)):
            state.assignment.id_of(router_id, port_index)
        updated[router_id] = replace(
            state, tracing_enabled=True, marking_peers=state.marking_peers | scope
        )
    logger.info(
        "tracing activated on %d routers for victim %s", len(scope), trigger.victim
    )
    return updated


def install_filters(
    routers: Mapping[RouterId, RouterState],
    signature: FilterSignature,
    scope: Optional[Iterable[RouterId]] = None,
) -> Dict[RouterId, RouterState]:
    if not isinstance(signature, FilterSignature):
        raise InvalidSignature(f"{signature!r} is not a filter signature")
    targets = set(routers) if scope is None else set(scope) & set(routers)
    updated = dict(routers)
    for router_id in sorted(targets):
        state = routers[router_id]
        updated[router_id] = replace(
            state, filter_rules=state.filter_rules + (signature,)
        )
    logger.info("filter %s installed on %d routers", signature.to_dict(), len(targets))
    return updated


def _drop(state, packet, reason: DropReason, collector, option=None):
    if collector is not None:
        collector.emit(state.node, Event.DROPPED, packet, option, reason.value)
    logger.debug("router %s drops packet: %s", state.node, reason.value)
    return ForwardDecision(outcome=Outcome.DROP, reason=reason)


def egress_clear(
    state: RouterState, packet: codec.Ipv4Packet, collector: Optional[Collector] = None
) -> codec.Ipv4Packet:
    option = codec.find_tracemax(packet.header.options)
    if option is None:
        return packet
    if collector is not None:
        collector.emit(state.node, Event.CLEARED, packet, option, "egress")
    return codec.set_packet_options(packet, codec.strip_tracemax(packet.header.options))


def _mark(state: RouterState, option, in_peer: PortInfo, out_port, fresh, packet, collector):
    """
    Verify the previous hop's ID, append our outgoing-port ID and stamp the
    receiver IP on the last hop. Returns (option, marked, exceeded, corrected).
    """
    bit_width = state.bit_width
    decoded = codec.decode_option(option, bit_width)
    limit = codec.capacity(bit_width, decoded.has_sender_ip, decoded.has_receiver_ip)
    corrected = False

    if (
        not fresh
        and decoded.ids
        and decoded.id_count < limit
        and in_peer.peer_is_router
        and in_peer.peer_node in state.marking_peers
    ):
        expected = state.assignment.id_of(in_peer.peer_node, in_peer.peer_port)
        if decoded.ids[-1] != expected:
            logger.info(
                "router %s corrects ID %d to %d", state.node, decoded.ids[-1], expected
            )
            option = codec.replace_last_id(option, expected, bit_width)
            corrected = True
            if collector is not None:
                collector.emit(state.node, Event.CORRECTED, packet, option)

    marked = exceeded = False
    try:
        option = codec.append_id(
            option, state.assignment.id_of(state.node, out_port), bit_width
        )
        marked = True
        if collector is not None:
            collector.emit(state.node, Event.MARKED, packet, option)
    except CapacityExceeded:
        # the path outgrew the option; keep forwarding unmodified
        exceeded = True
        if collector is not None:
            collector.emit(state.node, Event.CAPACITY_EXCEEDED, packet, option)

    out_peer = state.ports[out_port]
    if decoded.has_receiver_ip and not out_peer.peer_is_router:
        option = codec.set_receiver_ip(option, out_peer.peer_ip, bit_width)
    return option, marked, exceeded, corrected


def process_packet(
    state: RouterState,
    packet: codec.Ipv4Packet,
    in_port,
    collector: Optional[Collector] = None,
) -> ForwardDecision:
    in_peer = state.ports[in_port]
    header = packet.header
    options = header.options

    from_outside = state.system_border and in_peer.peer_is_external

    # 1. option area sanity; options from outside are replaced, not read
    try:
        kind = codec.classify_foreign_options(options)
        if kind is codec.OptionKind.TRACEMAX and not from_outside:
            codec.decode_option(codec.find_tracemax(options), state.bit_width)
    except (MalformedOptionArea, CodecError):
        return _drop(state, packet, DropReason.MALFORMED, collector)

    # 2. source routing is never forwarded
    if kind is codec.OptionKind.LSR_OR_SSR:
        return _drop(state, packet, DropReason.LSR_SSR, collector)

    # 3. border ingress from outside the system
    fresh = False
    if from_outside:
        old = codec.find_tracemax(options)
        if old is not None:
            if collector is not None:
                collector.emit(state.node, Event.CLEARED, packet, old, "ingress")
            options = codec.strip_tracemax(options)
        if state.tracing_enabled:
            options = codec.new_option(
                state.bit_width,
                sender_ip=in_peer.peer_ip,
                reserve_receiver_ip=state.stamp_receiver_ip,
            )
            fresh = True

    # 4. ingress filtering on edge ports
    if state.ingress_filtering and in_peer.legitimate_sources is not None:
        if not any(header.src_ip in prefix for prefix in in_peer.legitimate_sources):
            return _drop(state, packet, DropReason.INGRESS_FILTER, collector)

    # 5. defense filters, first match wins
    delay = 0
    for rule in state.filter_rules:
        if rule.matches(packet):
            if rule.action is Action.DROP:
                return _drop(state, packet, DropReason.DEFENSE_FILTER, collector)
            if rule.action is Action.DELAY:
                delay = state.delay_ticks
            break

    if header.dst_ip == state.ip:
        return ForwardDecision(outcome=Outcome.DELIVER, packet=packet)

    out_port = lookup_route(state.forwarding_table, header.dst_ip)
    if out_port is None:
        return _drop(state, packet, DropReason.NO_ROUTE, collector)
    if header.ttl <= 1:
        return _drop(state, packet, DropReason.TTL_EXPIRED, collector)

    # 6./7. marking
    marked = exceeded = corrected = False
    if state.tracing_enabled:
        option = codec.find_tracemax(options)
        if option is None:
            # the whole option area is ours once tracing is on
            option = codec.new_option(
                state.bit_width, reserve_receiver_ip=state.stamp_receiver_ip
            )
            fresh = True
        option, marked, exceeded, corrected = _mark(
            state, option, in_peer, out_port, fresh, packet, collector
        )
        options = option

    # 8. header bookkeeping, payload untouched
    forwarded = codec.Ipv4Packet(
        header=codec.with_options(
            replace(header, ttl=header.ttl - 1), options, len(packet.payload)
        ),
        payload=packet.payload,
    )
    if state.system_border and state.ports[out_port].peer_is_external:
        forwarded = egress_clear(state, forwarded, collector)

    return ForwardDecision(
        outcome=Outcome.FORWARD,
        packet=forwarded,
        out_port=out_port,
        delay=delay,
        marked=marked,
        capacity_exceeded=exceeded,
        corrected=corrected,
    )
