"""
Bit-exact IPv4 header and Tracemax option codec.

Tracemax option, always 40 bytes:

    octet 0    0x56  (copied=0, class=10, number=10110)
    octet 1    0x28  (option length 40)
    octet 2    S R C C C C C C   S=sender IP present, R=receiver IP present,
                                 C=6-bit ID count
    [4 bytes sender IP]          when S
    IDs, k bits each, MSB-first, in marking order
    ...zero fill...
    [4 bytes receiver IP]        when R, always the final 4 octets
"""
import ipaddress
import struct
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterator, Optional, Tuple

from dpkt.dpkt import in_cksum

from tracemax.errors import (
    BadChecksum,
    BadIhl,
    BadPreamble,
    CapacityExceeded,
    CodecError,
    CountOverflow,
    IdOutOfRange,
    MalformedOptionArea,
    TruncatedHeader,
)
from tracemax.id_assignment import check_bit_width

OPTION_TYPE = 0x56
OPTION_LENGTH = 40
OPTION_HEADER_OCTETS = 3
ID_AREA_BITS = (OPTION_LENGTH - OPTION_HEADER_OCTETS) * 8
IP_BITS = 32
MAX_ID_COUNT = 0x3F
SENDER_FLAG = 0x80
RECEIVER_FLAG = 0x40

OPTION_EOL = 0
OPTION_NOP = 1
OPTION_LSR = 131
OPTION_SSR = 137

# Router Stamping with deterministic marking keeps whole IPv4 addresses
RS_DRS_OPTION_HEADER_OCTETS = 2

IPV4_HEADER_LENGTH = 20
MAX_OPTIONS_LENGTH = 40

# Placeholder for a receiver IP field that is reserved but not written yet
UNSET_IP = ipaddress.IPv4Address(0)

_HEADER_FORMAT = "!BBHHHBBH4s4s"


class OptionKind(Enum):
    NONE = "none"
    TRACEMAX = "tracemax"
    LSR_OR_SSR = "lsr_or_ssr"
    OTHER = "other"


@dataclass(frozen=True)
class TracemaxOption:
    ids: Tuple[int, ...] = ()
    sender_ip: Optional[ipaddress.IPv4Address] = None
    receiver_ip: Optional[ipaddress.IPv4Address] = None

    option_type = OPTION_TYPE
    option_length = OPTION_LENGTH

    @property
    def has_sender_ip(self) -> bool:
        return self.sender_ip is not None

    @property
    def has_receiver_ip(self) -> bool:
        return self.receiver_ip is not None

    @property
    def id_count(self) -> int:
        return len(self.ids)


@dataclass(frozen=True)
class Ipv4Header:
    src_ip: ipaddress.IPv4Address
    dst_ip: ipaddress.IPv4Address
    version: int = 4
    ihl: int = 5
    dscp: int = 0
    ecn: int = 0
    total_length: int = IPV4_HEADER_LENGTH
    identification: int = 0
    flags: int = 0
    fragment_offset: int = 0
    ttl: int = 64
    protocol: int = 0
    header_checksum: int = 0
    options: bytes = b""


@dataclass(frozen=True)
class Ipv4Packet:
    header: Ipv4Header
    payload: bytes = b""


def capacity(bit_width, has_sender_ip=False, has_receiver_ip=False) -> int:
    check_bit_width(bit_width)
    bits = ID_AREA_BITS - IP_BITS * bool(has_sender_ip) - IP_BITS * bool(has_receiver_ip)
    return min(bits // bit_width, MAX_ID_COUNT)


def rs_drs_capacity() -> int:
    return (OPTION_LENGTH - RS_DRS_OPTION_HEADER_OCTETS) // (IP_BITS // 8)


def _id_area_start(has_sender_ip) -> int:
    return OPTION_HEADER_OCTETS + (4 if has_sender_ip else 0)


def _check_id(value, bit_width):
    if isinstance(value, bool) or not isinstance(value, int) or not 0 <= value < 1 << bit_width:
        raise IdOutOfRange(value, bit_width)


def encode_option(opt: TracemaxOption, bit_width) -> bytes:
    limit = capacity(bit_width, opt.has_sender_ip, opt.has_receiver_ip)
    if opt.id_count > limit:
        raise CapacityExceeded(opt.id_count, limit)
    for value in opt.ids:
        _check_id(value, bit_width)

    data = bytearray(OPTION_LENGTH)
    data[0] = OPTION_TYPE
    data[1] = OPTION_LENGTH
    data[2] = (
        (SENDER_FLAG if opt.has_sender_ip else 0)
        | (RECEIVER_FLAG if opt.has_receiver_ip else 0)
        | opt.id_count
    )
    if opt.has_sender_ip:
        data[3:7] = opt.sender_ip.packed
    if opt.has_receiver_ip:
        data[-4:] = opt.receiver_ip.packed

    packed = 0
    for value in opt.ids:
        packed = (packed << bit_width) | value
    used_bits = opt.id_count * bit_width
    length = (used_bits + 7) // 8
    packed <<= length * 8 - used_bits
    start = _id_area_start(opt.has_sender_ip)
    data[start : start + length] = packed.to_bytes(length, "big")
    return bytes(data)


def _check_preamble(data):
    if len(data) != OPTION_LENGTH:
        raise BadPreamble(f"Tracemax option must be {OPTION_LENGTH} bytes, got {len(data)}")
    if data[0] != OPTION_TYPE or data[1] != OPTION_LENGTH:
        raise BadPreamble(
            f"expected preamble 56 28, got {data[0]:02x} {data[1]:02x}"
        )


def _layout(data, bit_width) -> Tuple[bool, bool, int]:
    _check_preamble(data)
    has_sender_ip = bool(data[2] & SENDER_FLAG)
    has_receiver_ip = bool(data[2] & RECEIVER_FLAG)
    id_count = data[2] & MAX_ID_COUNT
    limit = capacity(bit_width, has_sender_ip, has_receiver_ip)
    if id_count > limit:
        raise CountOverflow(
            f"option declares {id_count} IDs, layout holds at most {limit}"
        )
    return has_sender_ip, has_receiver_ip, id_count


def decode_option(data, bit_width) -> TracemaxOption:
    data = bytes(data)
    has_sender_ip, has_receiver_ip, id_count = _layout(data, bit_width)
    start = _id_area_start(has_sender_ip)
    end = OPTION_LENGTH - (4 if has_receiver_ip else 0)
    area = int.from_bytes(data[start:end], "big")
    area_bits = (end - start) * 8
    mask = (1 << bit_width) - 1
    ids = tuple(
        (area >> (area_bits - (i + 1) * bit_width)) & mask for i in range(id_count)
    )
    return TracemaxOption(
        ids=ids,
        sender_ip=ipaddress.IPv4Address(data[3:7]) if has_sender_ip else None,
        receiver_ip=ipaddress.IPv4Address(data[-4:]) if has_receiver_ip else None,
    )


def _write_id(data: bytes, slot, value, bit_width) -> bytes:
    has_sender_ip = bool(data[2] & SENDER_FLAG)
    offset = _id_area_start(has_sender_ip) * 8 + slot * bit_width
    shift = OPTION_LENGTH * 8 - offset - bit_width
    word = int.from_bytes(data, "big")
    word &= ~(((1 << bit_width) - 1) << shift)
    word |= value << shift
    return word.to_bytes(OPTION_LENGTH, "big")


def append_id(data, value, bit_width) -> bytes:
    data = bytes(data)
    has_sender_ip, has_receiver_ip, id_count = _layout(data, bit_width)
    _check_id(value, bit_width)
    limit = capacity(bit_width, has_sender_ip, has_receiver_ip)
    if id_count >= limit:
        raise CapacityExceeded(id_count + 1, limit)
    out = bytearray(_write_id(data, id_count, value, bit_width))
    out[2] = (data[2] & (SENDER_FLAG | RECEIVER_FLAG)) | (id_count + 1)
    return bytes(out)


def replace_last_id(data, value, bit_width) -> bytes:
    data = bytes(data)
    _, _, id_count = _layout(data, bit_width)
    _check_id(value, bit_width)
    if id_count == 0:
        raise CodecError("option carries no ID to replace")
    return _write_id(data, id_count - 1, value, bit_width)


def set_receiver_ip(data, ip, bit_width) -> bytes:
    data = bytes(data)
    _, has_receiver_ip, _ = _layout(data, bit_width)
    if not has_receiver_ip:
        raise CodecError("option layout reserves no receiver IP field")
    return data[:-4] + ipaddress.IPv4Address(ip).packed


def new_option(bit_width, sender_ip=None, reserve_receiver_ip=False) -> bytes:
    return encode_option(
        TracemaxOption(
            sender_ip=ipaddress.IPv4Address(sender_ip) if sender_ip is not None else None,
            receiver_ip=UNSET_IP if reserve_receiver_ip else None,
        ),
        bit_width,
    )


def iter_options(area) -> Iterator[Tuple[int, int, int]]:
    """
    Yield (type, offset, length) for every option in an IPv4 option area
    """
    i = 0
    while i < len(area):
        option_type = area[i]
        if option_type == OPTION_EOL:
            return
        if option_type == OPTION_NOP:
            yield option_type, i, 1
            i += 1
            continue
        if i + 1 >= len(area):
            raise MalformedOptionArea(f"option {option_type} at offset {i} has no length octet")
        length = area[i + 1]
        if length < 2 or i + length > len(area):
            raise MalformedOptionArea(
                f"option {option_type} at offset {i} declares length {length}, "
                f"area has {len(area) - i} bytes left"
            )
        yield option_type, i, length
        i += length


def classify_foreign_options(options_bytes) -> OptionKind:
    kinds = set()
    for option_type, _, _ in iter_options(options_bytes):
        if option_type in (OPTION_LSR, OPTION_SSR):
            kinds.add(OptionKind.LSR_OR_SSR)
        elif option_type == OPTION_TYPE:
            kinds.add(OptionKind.TRACEMAX)
        elif option_type != OPTION_NOP:
            kinds.add(OptionKind.OTHER)
    for kind in (OptionKind.LSR_OR_SSR, OptionKind.TRACEMAX, OptionKind.OTHER):
        if kind in kinds:
            return kind
    return OptionKind.NONE


def find_tracemax(options_bytes) -> Optional[bytes]:
    for option_type, offset, length in iter_options(options_bytes):
        if option_type == OPTION_TYPE:
            return bytes(options_bytes[offset : offset + length])
    return None


def strip_tracemax(options_bytes) -> bytes:
    kept = bytearray()
    for option_type, offset, length in iter_options(options_bytes):
        if option_type != OPTION_TYPE:
            kept += options_bytes[offset : offset + length]
    # pad with end-of-option-list octets to a 32-bit boundary
    kept += bytes(-len(kept) % 4)
    return bytes(kept)


def internet_checksum(data) -> int:
    return in_cksum(bytes(data))


def _pack_header(h: Ipv4Header, checksum) -> bytes:
    return (
        struct.pack(
            _HEADER_FORMAT,
            (h.version << 4) | h.ihl,
            (h.dscp << 2) | h.ecn,
            h.total_length,
            h.identification,
            (h.flags << 13) | h.fragment_offset,
            h.ttl,
            h.protocol,
            checksum,
            h.src_ip.packed,
            h.dst_ip.packed,
        )
        + h.options
    )


def _check_header(h: Ipv4Header):
    if not 5 <= h.ihl <= 15:
        raise BadIhl(f"IHL {h.ihl} outside [5, 15]")
    if len(h.options) != (h.ihl - 5) * 4:
        raise BadIhl(
            f"IHL {h.ihl} implies {(h.ihl - 5) * 4} option bytes, got {len(h.options)}"
        )
    if h.total_length < h.ihl * 4:
        raise BadIhl(f"total length {h.total_length} is shorter than the header")


def header_checksum(h: Ipv4Header) -> int:
    _check_header(h)
    return internet_checksum(_pack_header(h, 0))


def encode_header(h: Ipv4Header) -> bytes:
    return _pack_header(h, header_checksum(h))


def decode_header(data) -> Ipv4Header:
    data = bytes(data)
    if len(data) < IPV4_HEADER_LENGTH:
        raise TruncatedHeader(f"{len(data)} bytes, IPv4 header needs {IPV4_HEADER_LENGTH}")
    (
        version_ihl,
        tos,
        total_length,
        identification,
        flags_fragment,
        ttl,
        protocol,
        checksum,
        src,
        dst,
    ) = struct.unpack(_HEADER_FORMAT, data[:IPV4_HEADER_LENGTH])
    version, ihl = version_ihl >> 4, version_ihl & 0x0F
    if version != 4:
        raise CodecError(f"IP version {version} is not 4")
    if ihl < 5:
        raise BadIhl(f"IHL {ihl} below 5")
    if len(data) < ihl * 4:
        raise TruncatedHeader(f"IHL {ihl} needs {ihl * 4} bytes, got {len(data)}")
    if internet_checksum(data[: ihl * 4]) != 0:
        raise BadChecksum(f"header checksum {checksum:#06x} does not validate")
    header = Ipv4Header(
        version=version,
        ihl=ihl,
        dscp=tos >> 2,
        ecn=tos & 0x03,
        total_length=total_length,
        identification=identification,
        flags=flags_fragment >> 13,
        fragment_offset=flags_fragment & 0x1FFF,
        ttl=ttl,
        protocol=protocol,
        header_checksum=checksum,
        src_ip=ipaddress.IPv4Address(src),
        dst_ip=ipaddress.IPv4Address(dst),
        options=data[IPV4_HEADER_LENGTH : ihl * 4],
    )
    if total_length < ihl * 4:
        raise BadIhl(f"total length {total_length} is shorter than the header")
    return header


def finalize(header: Ipv4Header, **changes) -> Ipv4Header:
    """
    Apply field changes and recompute the checksum
    """
    header = replace(header, **changes)
    return replace(header, header_checksum=header_checksum(header))


def with_options(header: Ipv4Header, options, payload_length) -> Ipv4Header:
    options = bytes(options)
    if len(options) % 4 or len(options) > MAX_OPTIONS_LENGTH:
        raise BadIhl(f"option area of {len(options)} bytes cannot be expressed in IHL")
    ihl = 5 + len(options) // 4
    return finalize(
        header, options=options, ihl=ihl, total_length=ihl * 4 + payload_length
    )


def set_packet_options(packet: Ipv4Packet, options) -> Ipv4Packet:
    return Ipv4Packet(
        header=with_options(packet.header, options, len(packet.payload)),
        payload=packet.payload,
    )


def build_packet(src_ip, dst_ip, payload=b"", **fields) -> Ipv4Packet:
    header = Ipv4Header(
        src_ip=ipaddress.IPv4Address(src_ip), dst_ip=ipaddress.IPv4Address(dst_ip), **fields
    )
    return Ipv4Packet(
        header=with_options(header, header.options, len(payload)), payload=bytes(payload)
    )


def encode_packet(packet: Ipv4Packet) -> bytes:
    return encode_header(packet.header) + packet.payload


def decode_packet(data) -> Ipv4Packet:
    data = bytes(data)
    header = decode_header(data)
    if len(data) < header.total_length:
        raise TruncatedHeader(
            f"total length {header.total_length} exceeds the {len(data)} captured bytes"
        )
    return Ipv4Packet(header=header, payload=data[header.ihl * 4 : header.total_length])


def packet_tracemax(packet: Ipv4Packet, bit_width) -> Optional[TracemaxOption]:
    option = find_tracemax(packet.header.options)
    if option is None:
        return None
    return decode_option(option, bit_width)


def hexdump(data, width=16) -> str:
    data = bytes(data)
    lines = []
    for offset in range(0, len(data), width):
        chunk = data[offset : offset + width]
        lines.append(f"{offset:04x}  " + " ".join(f"{b:02x}" for b in chunk))
    return "\n".join(lines)
