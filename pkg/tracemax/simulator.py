"""
Deterministic tick-based simulation of a DDoS attack against one victim:
traffic generation with spoofed sources, hop-by-hop forwarding through the
router pipeline, packet loss, route changes, IDS detection, trace activation,
forensic reconstruction and defense filter propagation.

One tick is one hop: a packet generated at tick t is processed by its first
router at t, by the next one at t + 1, and so on.
"""
import ipaddress
import logging
import os
import random
from collections import defaultdict
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, FrozenSet, List, NamedTuple, Optional, Sequence, Tuple

import dpkt

import tracemax.codec as codec
import tracemax.marking as marking
import tracemax.reconstruction as reconstruction
import tracemax.utils as utils
from tracemax.errors import (
    CodecError,
    ConfigError,
    DisconnectedVictim,
    ReconstructionError,
    TracemaxError,
    Unreachable,
)
from tracemax.id_assignment import (
    DEFAULT_BIT_WIDTH,
    IdAssignment,
    assign_ids,
    load_assignment,
    min_feasible_bit_width,
    verify_assignment,
)
from tracemax.topology import (
    Link,
    PortRef,
    RouterId,
    Topology,
    forwarding_tables,
    load_topology,
    shortest_path,
    topology_from_dict,
)

logger = logging.getLogger(__name__)

DEFAULT_SPOOF_POOL = ipaddress.IPv4Network("198.18.0.0/15")
DEFAULT_COLLECTION_TICKS = 5
DEFAULT_TTL = 64
DEFAULT_PAYLOAD_SIZE = 32


class SpoofMode(Enum):
    NONE = "none"
    RANDOM = "random"
    FIXED = "fixed"


class TraceScope(Enum):
    ALL = "all"
    # routers on the current routes from every host toward the victim
    PATH = "path"


class FilterScope(Enum):
    ALL = "all"
    # routers on the reconstructed attack paths only
    PATHS = "paths"


@dataclass(frozen=True)
class FlowSpec:
    label: str
    src: RouterId
    dst: RouterId
    rate: int
    protocol: int = dpkt.ip.IP_PROTO_UDP
    dst_port: int = 53
    spoof_mode: SpoofMode = SpoofMode.NONE
    spoof_ip: Optional[ipaddress.IPv4Address] = None
    start_tick: int = 0
    payload_size: int = DEFAULT_PAYLOAD_SIZE
    attack: bool = False


@dataclass(frozen=True)
class RouteChangeEvent:
    tick: int
    link: Link
    enabled: bool


@dataclass(frozen=True)
class ScenarioConfig:
    topology: Topology
    victim: RouterId
    assignment: Optional[IdAssignment] = None
    bit_width: Optional[int] = None
    attackers: Tuple[FlowSpec, ...] = ()
    benign_flows: Tuple[FlowSpec, ...] = ()
    ids_threshold: int = 1
    duration: int = 50
    seed: int = 0
    loss_prob: float = 0.0
    route_change_events: Tuple[RouteChangeEvent, ...] = ()
    spoof_pool: ipaddress.IPv4Network = DEFAULT_SPOOF_POOL
    trace_scope: TraceScope = TraceScope.ALL
    filter_scope: FilterScope = FilterScope.ALL
    filter_action: marking.Action = marking.Action.DROP
    collection_ticks: int = DEFAULT_COLLECTION_TICKS
    delay_ticks: int = marking.DEFAULT_DELAY_TICKS
    stamp_receiver_ip: bool = False
    static_filters: Tuple[marking.FilterSignature, ...] = ()
    ttl: int = DEFAULT_TTL

    def __post_init__(self):
        topology = self.topology
        if self.victim not in topology.nodes:
            raise ConfigError(f"victim {self.victim} is not in the topology")
        if self.ids_threshold <= 0:
            raise ConfigError("ids_threshold must be positive")
        if self.duration < 0:
            raise ConfigError("duration must not be negative")
        if not 0 <= self.loss_prob < 1:
            raise ConfigError("loss_prob must lie in [0, 1)")
        if self.collection_ticks < 0 or self.delay_ticks < 0:
            raise ConfigError("collection_ticks and delay_ticks must not be negative")
        if not 1 <= self.ttl <= 255:
            raise ConfigError("ttl must lie in [1, 255]")
        if not 0 <= self.seed < 1 << 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        for flow in self.flows:
            if flow.rate < 0:
                raise ConfigError(f"{flow.label}: rate must not be negative")
            if flow.src not in topology.nodes or not topology.node(flow.src).is_host:
                raise ConfigError(f"{flow.label}: source {flow.src} is not a host")
            if flow.dst not in topology.nodes:
                raise ConfigError(f"{flow.label}: destination {flow.dst} is unknown")
            if flow.spoof_mode is SpoofMode.FIXED and flow.spoof_ip is None:
                raise ConfigError(f"{flow.label}: fixed spoofing needs spoof_ip")
        for event in self.route_change_events:
            if event.link not in topology.links:
                raise ConfigError(f"route change at tick {event.tick} names no link")

    @property
    def flows(self) -> Tuple[FlowSpec, ...]:
        return self.attackers + self.benign_flows


@dataclass
class FlowStats:
    generated: int = 0
    delivered: int = 0
    lost: int = 0
    in_flight: int = 0
    dropped: Dict[str, int] = field(default_factory=dict)

    @property
    def dropped_total(self) -> int:
        return sum(self.dropped.values())

    def to_dict(self) -> dict:
        return {
            "generated": self.generated,
            "delivered": self.delivered,
            "lost": self.lost,
            "in_flight": self.in_flight,
            "dropped": dict(sorted(self.dropped.items())),
        }


class Detection(NamedTuple):
    fired: bool
    tick: Optional[int] = None


@dataclass
class SimReport:
    detection_tick: Optional[int]
    defense_tick: Optional[int]
    traced_paths: Dict[str, reconstruction.ReconstructedPath]
    distinct_attacker_count: int
    attack_drop_rate: float
    benign_drop_rate: float
    victim_inbound: List[int]
    victim_bandwidth: List[int]
    capacity_exceeded_count: int
    oracle_checks: int
    oracle_mismatches: int
    flows: Dict[str, FlowStats]
    installed_filters: List[marking.FilterSignature]
    warnings: List[str]
    collector: marking.Collector
    captures: List[reconstruction.CaptureRecord]

    def to_dict(self) -> dict:
        return {
            "detection_tick": self.detection_tick,
            "defense_tick": self.defense_tick,
            "traced_paths": {
                label: reconstruction.path_to_dict(path)
                for label, path in sorted(self.traced_paths.items())
            },
            "distinct_attacker_count": self.distinct_attacker_count,
            "attack_drop_rate": self.attack_drop_rate,
            "benign_drop_rate": self.benign_drop_rate,
            "victim_inbound": self.victim_inbound,
            "victim_bandwidth": self.victim_bandwidth,
            "capacity_exceeded_count": self.capacity_exceeded_count,
            "oracle_checks": self.oracle_checks,
            "oracle_mismatches": self.oracle_mismatches,
            "flows": {label: s.to_dict() for label, s in sorted(self.flows.items())},
            "installed_filters": [f.to_dict() for f in self.installed_filters],
            "warnings": self.warnings,
            "collector": self.collector.records,
        }


def ids_detect(window: Sequence[int], threshold, first_tick=0) -> Detection:
    if threshold <= 0:
        raise ConfigError("IDS threshold must be positive")
    for offset, count in enumerate(window):
        if count >= threshold:
            return Detection(True, first_tick + offset)
    return Detection(False)


def _transport_payload(flow: FlowSpec, sequence, rng: random.Random) -> bytes:
    data = rng.randbytes(flow.payload_size)
    sport = rng.randrange(1024, 65536)
    if flow.protocol == dpkt.ip.IP_PROTO_UDP:
        return bytes(
            dpkt.udp.UDP(sport=sport, dport=flow.dst_port, ulen=8 + len(data), data=data)
        )
    if flow.protocol == dpkt.ip.IP_PROTO_TCP:
        return bytes(
            dpkt.tcp.TCP(
                sport=sport, dport=flow.dst_port, seq=sequence, flags=dpkt.tcp.TH_SYN, data=data
            )
        )
    if flow.protocol == dpkt.ip.IP_PROTO_ICMP:
        echo = dpkt.icmp.ICMP.Echo(id=sport, seq=sequence & 0xFFFF, data=data)
        return bytes(dpkt.icmp.ICMP(type=dpkt.icmp.ICMP_ECHO, data=echo))
    return data


def generate_traffic(
    flow: FlowSpec,
    tick,
    rng: random.Random,
    topology: Topology,
    spoof_pool: ipaddress.IPv4Network = DEFAULT_SPOOF_POOL,
    ttl=DEFAULT_TTL,
) -> List[codec.Ipv4Packet]:
    if tick < flow.start_tick or flow.rate == 0:
        return []
    true_src = topology.node(flow.src).ip
    dst = topology.node(flow.dst).ip
    packets = []
    for i in range(flow.rate):
        if flow.spoof_mode is SpoofMode.RANDOM:
            src = spoof_pool.network_address + rng.randrange(spoof_pool.num_addresses)
        elif flow.spoof_mode is SpoofMode.FIXED:
            src = flow.spoof_ip
        else:
            src = true_src
        sequence = (tick - flow.start_tick) * flow.rate + i
        packets.append(
            codec.build_packet(
                src,
                dst,
                _transport_payload(flow, sequence, rng),
                identification=sequence & 0xFFFF,
                ttl=ttl,
                protocol=flow.protocol,
            )
        )
    return packets


class RoutingView:
    """
    Current link state of the topology as seen by the routers
    """

    def __init__(self, topology: Topology, victim):
        self.topology = topology
        self.victim = victim
        self.disabled: FrozenSet[Link] = frozenset()
        self.warnings: List[str] = []

    def tables(self):
        return forwarding_tables(self.topology, self.disabled)

    def attachment(self, host) -> Optional[PortRef]:
        # a host sends on its lowest enabled port
        for port in self.topology.ports(host):
            if self.topology.link_at(host, port.index) not in self.disabled:
                return port.peer
        return None


def route_change(view: RoutingView, event: RouteChangeEvent):
    topology = view.topology
    if event.link not in topology.links:
        raise ConfigError("route change names a link that does not exist")
    if event.enabled:
        view.disabled = view.disabled - {event.link}
    else:
        view.disabled = view.disabled | {event.link}
    logger.info(
        "link %s:%s-%s:%s %s",
        event.link.a.node,
        event.link.a.index,
        event.link.b.node,
        event.link.b.index,
        "enabled" if event.enabled else "disabled",
    )
    tables = view.tables()
    prefix = ipaddress.IPv4Network(topology.node(view.victim).ip)
    cut_off = [
        router_id
        for router_id, table in sorted(tables.items())
        if router_id != view.victim and prefix not in table
    ]
    if cut_off:
        warning = DisconnectedVictim(view.victim, cut_off)
        logger.warning("%s", warning)
        view.warnings.append(f"tick {event.tick}: {warning}")
    return tables


def derive_signatures(config: ScenarioConfig) -> List[marking.FilterSignature]:
    """
    One (protocol, dst=victim, dst_port) signature per distinct attack flow kind
    """
    victim = ipaddress.IPv4Network(config.topology.node(config.victim).ip)
    seen = []
    for flow in config.attackers:
        port = (
            flow.dst_port
            if flow.protocol in (dpkt.ip.IP_PROTO_TCP, dpkt.ip.IP_PROTO_UDP)
            else None
        )
        signature = marking.FilterSignature(
            dst=victim, protocol=flow.protocol, port=port, action=config.filter_action
        )
        if signature not in seen:
            seen.append(signature)
    return seen


def _trace_scope(config: ScenarioConfig, view: RoutingView) -> Optional[FrozenSet[RouterId]]:
    if config.trace_scope is TraceScope.ALL:
        return None
    routers = set()
    for host in config.topology.host_ids():
        if host == config.victim:
            continue
        try:
            path = shortest_path(config.topology, host, config.victim, view.disabled)
        except Unreachable:
            continue
        routers.update(n for n in path if config.topology.node(n).is_router)
    return frozenset(routers)


@dataclass
class _Transit:
    seq: int
    flow: FlowSpec
    packet: codec.Ipv4Packet
    node: RouterId
    in_port: int
    ready: int
    generated: int
    hops: List[RouterId] = field(default_factory=list)
    # some router found the option full and forwarded it unmarked
    overflowed: bool = False


class Simulation:
    """
    Mutable run state of one scenario; run_scenario is the entry point
    """

    def __init__(self, config: ScenarioConfig):
        self.config = config
        self.topology = config.topology
        self.assignment = config.assignment or assign_ids(
            self.topology,
            config.bit_width
            or max(DEFAULT_BIT_WIDTH, min_feasible_bit_width(self.topology)),
        )
        violations = verify_assignment(self.topology, self.assignment)
        if violations:
            raise ConfigError(
                f"ID assignment violates local uniqueness at node {violations[0].node}"
            )
        self.rng = random.Random(config.seed)
        self.view = RoutingView(self.topology, config.victim)
        self.states = marking.router_states(
            self.topology,
            self.assignment,
            self.view.tables(),
            stamp_receiver_ip=config.stamp_receiver_ip,
            delay_ticks=config.delay_ticks,
        )
        for signature in config.static_filters:
            self.states = marking.install_filters(self.states, signature)
        self.collector = marking.Collector()
        self.stats = {flow.label: FlowStats() for flow in config.flows}
        self.transit: List[_Transit] = []
        self.seq = 0
        self.inbound = [0] * config.duration
        self.bandwidth = [0] * config.duration
        self.detection_tick: Optional[int] = None
        self.defense_tick: Optional[int] = None
        self.traced: Dict[str, reconstruction.ReconstructedPath] = {}
        self.installed: List[marking.FilterSignature] = []
        self.capacity_exceeded = 0
        self.oracle_checks = 0
        self.oracle_mismatches = 0
        self.captures: List[reconstruction.CaptureRecord] = []
        # after-defense attack outcomes, benign outcomes: [dropped, resolved]
        self.post_defense = [0, 0]
        self.benign = [0, 0]

    def _resolve(self, item: _Transit, outcome, reason=None):
        stats = self.stats[item.flow.label]
        if outcome == "delivered":
            stats.delivered += 1
        elif outcome == "lost":
            stats.lost += 1
            return
        else:
            stats.dropped[reason] = stats.dropped.get(reason, 0) + 1

        dropped = outcome == "dropped"
        if item.flow.attack:
            if self.defense_tick is not None and item.generated > self.defense_tick:
                self.post_defense[0] += dropped
                self.post_defense[1] += 1
        else:
            self.benign[0] += dropped
            self.benign[1] += 1

    def _deliver(self, item: _Transit, tick):
        node = self.topology.node(item.node)
        if item.packet.header.dst_ip != node.ip:
            self._resolve(item, "dropped", marking.DropReason.NO_ROUTE.value)
            return
        self._resolve(item, "delivered")
        if item.node == self.config.victim:
            self.inbound[tick] += 1
            self.bandwidth[tick] += item.packet.header.total_length
        if codec.find_tracemax(item.packet.header.options) is None:
            return

        record = reconstruction.CaptureRecord(
            tick=tick, node=item.node, direction="in", data=codec.encode_packet(item.packet)
        )
        self.captures.append(record)
        self.oracle_checks += 1
        try:
            path = reconstruction.reconstruct_from_capture(
                record, self.topology, self.assignment
            )
        except (ReconstructionError, CodecError) as e:
            logger.warning("capture at tick %d does not reconstruct: %s", tick, e)
            self.oracle_mismatches += 1
            return
        if item.overflowed:
            # only the incomplete flag can be checked once marks were skipped
            if path.complete:
                logger.warning("overflowed packet reconstructed as complete")
                self.oracle_mismatches += 1
        elif list(path.routers) != item.hops:
            logger.warning(
                "reconstructed %s, hop log says %s", list(path.routers), item.hops
            )
            self.oracle_mismatches += 1
        if (
            path.complete
            and item.flow.attack
            and self.detection_tick is not None
            and item.generated > self.detection_tick
            and item.flow.label not in self.traced
        ):
            self.traced[item.flow.label] = path

    def _inject(self, tick):
        for flow in self.config.flows:
            packets = generate_traffic(
                flow, tick, self.rng, self.topology, self.config.spoof_pool, self.config.ttl
            )
            for packet in packets:
                self.stats[flow.label].generated += 1
                item = _Transit(
                    seq=self.seq,
                    flow=flow,
                    packet=packet,
                    node=flow.src,
                    in_port=-1,
                    ready=tick,
                    generated=tick,
                )
                self.seq += 1
                attachment = self.view.attachment(flow.src)
                if attachment is None:
                    self._resolve(item, "dropped", marking.DropReason.NO_ROUTE.value)
                    continue
                item.node = attachment.node
                item.in_port = attachment.index
                self.transit.append(item)

    def _forward(self, tick):
        pending = []
        for item in self.transit:
            if item.ready > tick:
                pending.append(item)
                continue
            if self.topology.node(item.node).is_host:
                self._deliver(item, tick)
                continue

            decision = marking.process_packet(
                self.states[item.node], item.packet, item.in_port, self.collector
            )
            if decision.outcome is marking.Outcome.DROP:
                self._resolve(item, "dropped", decision.reason.value)
                continue
            if decision.outcome is marking.Outcome.DELIVER:
                self._deliver(item, tick)
                continue
            if decision.marked:
                item.hops.append(item.node)
            if decision.capacity_exceeded:
                self.capacity_exceeded += 1
                item.overflowed = True
            if self.config.loss_prob and self.rng.random() < self.config.loss_prob:
                self._resolve(item, "lost")
                continue
            peer = self.topology.peer(item.node, decision.out_port)
            item.packet = decision.packet
            item.node = peer.node
            item.in_port = peer.index
            item.ready = tick + 1 + decision.delay
            pending.append(item)
        self.transit = pending

    def _react(self, tick):
        config = self.config
        if self.detection_tick is None:
            if ids_detect([self.inbound[tick]], config.ids_threshold, tick).fired:
                self.detection_tick = tick
                logger.info("IDS alarm at tick %d for victim %s", tick, config.victim)
                self.states = marking.activate_tracing(
                    self.states,
                    marking.TraceTrigger(config.victim, _trace_scope(config, self.view)),
                )
            return
        if (
            self.defense_tick is None
            and self.traced
            and tick >= self.detection_tick + config.collection_ticks
        ):
            if config.filter_scope is FilterScope.ALL:
                scope = [r for r, s in self.states.items() if s.tracing_enabled]
            else:
                scope = sorted({r for p in self.traced.values() for r in p.routers})
            for signature in derive_signatures(config):
                self.states = marking.install_filters(self.states, signature, scope)
                self.installed.append(signature)
            self.defense_tick = tick
            logger.info("defense installed at tick %d", tick)

    def run(self) -> SimReport:
        events = defaultdict(list)
        for event in self.config.route_change_events:
            events[event.tick].append(event)

        for tick in range(self.config.duration):
            self.collector.clock = tick
            for event in events.get(tick, ()):
                tables = route_change(self.view, event)
                self.states = {
                    router_id: replace(state, forwarding_table=tables[router_id])
                    for router_id, state in self.states.items()
                }
            self._inject(tick)
            self._forward(tick)
            self._react(tick)

        for item in self.transit:
            self.stats[item.flow.label].in_flight += 1

        return SimReport(
            detection_tick=self.detection_tick,
            defense_tick=self.defense_tick,
            traced_paths=dict(self.traced),
            distinct_attacker_count=len(
                {(p.sender_ip, p.routers) for p in self.traced.values()}
            ),
            attack_drop_rate=_rate(*self.post_defense),
            benign_drop_rate=_rate(*self.benign),
            victim_inbound=self.inbound,
            victim_bandwidth=self.bandwidth,
            capacity_exceeded_count=self.capacity_exceeded,
            oracle_checks=self.oracle_checks,
            oracle_mismatches=self.oracle_mismatches,
            flows=self.stats,
            installed_filters=self.installed,
            warnings=self.view.warnings,
            collector=self.collector,
            captures=self.captures,
        )


def _rate(part, whole) -> float:
    return part / whole if whole else 0.0


def run_scenario(config: ScenarioConfig) -> SimReport:
    return Simulation(config).run()


# scenario file


def _flow_from_dict(record, label, attack, victim, error=ConfigError) -> FlowSpec:
    where = label
    if attack:
        utils.check_keys(
            record,
            required=("source", "rate"),
            optional=(
                "spoof_mode",
                "spoof_ip",
                "protocol",
                "dst_port",
                "start_tick",
                "payload_size",
            ),
            where=where,
            error_cls=error,
        )
        src, dst = record["source"], victim
        default_protocol, default_port = "udp", 53
    else:
        utils.check_keys(
            record,
            required=("src", "dst", "rate"),
            optional=("protocol", "dst_port", "start_tick", "payload_size"),
            where=where,
            error_cls=error,
        )
        src, dst = record["src"], record["dst"]
        default_protocol, default_port = "tcp", 80
    try:
        spoof_mode = SpoofMode(record.get("spoof_mode", "none"))
    except ValueError:
        raise error(f"{where}: unknown spoof_mode {record['spoof_mode']!r}") from None
    spoof_ip = record.get("spoof_ip")
    return FlowSpec(
        label=label,
        src=utils.require_int(src, f"{where} source", error),
        dst=utils.require_int(dst, f"{where} destination", error),
        rate=utils.require_int(record["rate"], f"{where} rate", error),
        protocol=marking.parse_protocol(
            record.get("protocol", default_protocol), f"{where} protocol", error
        ),
        dst_port=utils.require_int(record.get("dst_port", default_port), f"{where} dst_port", error),
        spoof_mode=spoof_mode,
        spoof_ip=utils.parse_ipv4(spoof_ip, f"{where} spoof_ip", error)
        if spoof_ip is not None
        else None,
        start_tick=utils.require_int(record.get("start_tick", 0), f"{where} start_tick", error),
        payload_size=utils.require_int(
            record.get("payload_size", DEFAULT_PAYLOAD_SIZE), f"{where} payload_size", error
        ),
        attack=attack,
    )


def _load_part(value, base_dir, loader_from_dict, loader_from_text, what):
    try:
        if isinstance(value, str):
            return loader_from_text(utils.read_text_file(os.path.join(base_dir, value)))
        return loader_from_dict(value)
    except OSError as e:
        raise ConfigError(f"cannot read {what} {value!r}: {e}") from e
    except TracemaxError as e:
        raise ConfigError(f"{what}: {e}") from e


def scenario_from_dict(document, base_dir=".") -> ScenarioConfig:
    utils.check_keys(
        document,
        required=("topology", "victim", "ids_threshold", "duration", "seed"),
        optional=(
            "assignment",
            "bit_width",
            "attackers",
            "benign_flows",
            "loss_prob",
            "route_change_events",
            "spoof_pool",
            "trace_scope",
            "filter_scope",
            "filter_action",
            "collection_ticks",
            "delay_ticks",
            "stamp_receiver_ip",
            "static_filters",
            "ttl",
        ),
        where="scenario",
        error_cls=ConfigError,
    )
    topology = _load_part(
        document["topology"], base_dir, topology_from_dict, load_topology, "topology"
    )
    assignment = None
    if document.get("assignment") is not None:
        assignment = _load_part(
            document["assignment"],
            base_dir,
            lambda d: load_assignment(utils.dump_json_document(d)),
            load_assignment,
            "assignment",
        )
    victim = utils.require_int(document["victim"], "victim", ConfigError)

    attackers = tuple(
        _flow_from_dict(r, f"attacker-{i}", True, victim)
        for i, r in enumerate(document.get("attackers", []))
    )
    benign = tuple(
        _flow_from_dict(r, f"benign-{i}", False, victim)
        for i, r in enumerate(document.get("benign_flows", []))
    )

    events = []
    for i, record in enumerate(document.get("route_change_events", [])):
        where = f"route change #{i}"
        utils.check_keys(
            record, required=("tick", "link", "action"), where=where, error_cls=ConfigError
        )
        if record["action"] not in ("disable", "enable"):
            raise ConfigError(f"{where}: action must be disable or enable")
        link_end = record["link"]
        if not isinstance(link_end, list) or len(link_end) != 2:
            raise ConfigError(f"{where}: link must be a [node id, port index] pair")
        try:
            link = topology.link_at(*link_end)
        except TracemaxError as e:
            raise ConfigError(f"{where}: {e}") from e
        events.append(
            RouteChangeEvent(
                tick=utils.require_int(record["tick"], f"{where} tick", ConfigError),
                link=link,
                enabled=record["action"] == "enable",
            )
        )

    static_filters = tuple(
        _load_part(
            document.get("static_filters", []),
            base_dir,
            lambda rules: marking.load_filters(utils.dump_json_document(rules)),
            marking.load_filters,
            "static_filters",
        )
    )
    try:
        trace_scope = TraceScope(document.get("trace_scope", "all"))
        filter_scope = FilterScope(document.get("filter_scope", "all"))
        filter_action = marking.Action(document.get("filter_action", "drop"))
    except ValueError as e:
        raise ConfigError(f"scenario: {e}") from e

    loss_prob = document.get("loss_prob", 0.0)
    if isinstance(loss_prob, bool) or not isinstance(loss_prob, (int, float)):
        raise ConfigError("loss_prob must be a number")
    bit_width = document.get("bit_width")
    if bit_width is not None:
        bit_width = utils.require_int(bit_width, "bit_width", ConfigError)

    return ScenarioConfig(
        topology=topology,
        victim=victim,
        assignment=assignment,
        bit_width=bit_width,
        attackers=attackers,
        benign_flows=benign,
        ids_threshold=utils.require_int(document["ids_threshold"], "ids_threshold", ConfigError),
        duration=utils.require_int(document["duration"], "duration", ConfigError),
        seed=utils.require_int(document["seed"], "seed", ConfigError),
        loss_prob=float(loss_prob),
        route_change_events=tuple(events),
        spoof_pool=utils.parse_ipv4_network(
            document.get("spoof_pool", str(DEFAULT_SPOOF_POOL)), "spoof_pool", ConfigError
        ),
        trace_scope=trace_scope,
        filter_scope=filter_scope,
        filter_action=filter_action,
        collection_ticks=utils.require_int(
            document.get("collection_ticks", DEFAULT_COLLECTION_TICKS),
            "collection_ticks",
            ConfigError,
        ),
        delay_ticks=utils.require_int(
            document.get("delay_ticks", marking.DEFAULT_DELAY_TICKS), "delay_ticks", ConfigError
        ),
        stamp_receiver_ip=utils.require_bool(
            document.get("stamp_receiver_ip", False), "stamp_receiver_ip", ConfigError
        ),
        static_filters=static_filters,
        ttl=utils.require_int(document.get("ttl", DEFAULT_TTL), "ttl", ConfigError),
    )


def load_scenario(text, base_dir=".") -> ScenarioConfig:
    return scenario_from_dict(utils.load_json_document(text, ConfigError), base_dir)
