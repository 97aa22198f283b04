class TracemaxError(Exception):
    """
    Base class of every domain error raised by the tracemax package
    """


# topology


class ParseError(TracemaxError):
    pass


class ValidationError(TracemaxError):
    pass


class UnknownNode(TracemaxError):
    def __init__(self, node_id):
        super().__init__(f"unknown node {node_id}")
        self.node_id = node_id


class Unreachable(TracemaxError):
    def __init__(self, src, dst):
        super().__init__(f"node {dst} is unreachable from node {src}")
        self.src = src
        self.dst = dst


# id assignment


class InvalidBitWidth(TracemaxError):
    def __init__(self, bit_width):
        super().__init__(f"bit width {bit_width} is outside [1, 8]")
        self.bit_width = bit_width


class InfeasibleBitWidth(TracemaxError):
    def __init__(self, node_id, inbound, bit_width):
        super().__init__(
            f"router {node_id} has {inbound} inbound neighbor ports, "
            f"more than 2^{bit_width} = {2 ** bit_width} distinct IDs"
        )
        self.node_id = node_id
        self.inbound = inbound
        self.bit_width = bit_width


class CoverageError(TracemaxError):
    def __init__(self, node_id, port):
        super().__init__(f"port {port} of router {node_id} has no ID")
        self.node_id = node_id
        self.port = port


# codec


class CodecError(TracemaxError):
    pass


class CapacityExceeded(CodecError):
    def __init__(self, id_count, capacity):
        super().__init__(f"{id_count} IDs exceed the option capacity of {capacity}")
        self.id_count = id_count
        self.capacity = capacity


class IdOutOfRange(CodecError):
    def __init__(self, value, bit_width):
        super().__init__(f"ID {value} does not fit into {bit_width} bits")
        self.value = value
        self.bit_width = bit_width


class BadPreamble(CodecError):
    pass


class CountOverflow(CodecError):
    pass


class BadChecksum(CodecError):
    pass


class BadIhl(CodecError):
    pass


class TruncatedHeader(CodecError):
    pass


class MalformedOptionArea(CodecError):
    pass


# marking


class EmptyScope(TracemaxError):
    pass


class InvalidSignature(TracemaxError):
    pass


# reconstruction


class ReconstructionError(TracemaxError):
    pass


class AmbiguousStep(ReconstructionError):
    def __init__(self, node_id, port_id, candidates):
        super().__init__(
            f"ID {port_id} at node {node_id} matches {len(candidates)} neighbors: "
            + ", ".join(f"{u}:{p}" for u, p in candidates)
        )
        self.node_id = node_id
        self.port_id = port_id
        self.candidates = candidates


class NoMatchingNeighbor(ReconstructionError):
    def __init__(self, node_id, port_id):
        super().__init__(f"no neighbor of node {node_id} carries ID {port_id}")
        self.node_id = node_id
        self.port_id = port_id


class UnknownRouter(ReconstructionError):
    def __init__(self, node_id):
        super().__init__(f"unknown router {node_id}")
        self.node_id = node_id


class MissingEndpoint(ReconstructionError):
    pass


# simulator


class ConfigError(TracemaxError):
    pass


class DisconnectedVictim(TracemaxError):
    def __init__(self, victim, routers):
        super().__init__(
            f"victim {victim} is unreachable from routers "
            + ", ".join(str(r) for r in routers)
        )
        self.victim = victim
        self.routers = routers
