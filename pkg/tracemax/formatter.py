import shutil
import textwrap
from typing import Dict, List, Optional

import tracemax.codec as codec
import tracemax.reconstruction as reconstruction
import tracemax.utils as utils
from tracemax.errors import CodecError

OPTION_NAMES = {
    codec.OPTION_TYPE: "tracemax",
    codec.OPTION_LSR: "lsr",
    codec.OPTION_SSR: "ssr",
    codec.OPTION_NOP: "nop",
}


# Draw a titled box around output lines, wrapping long ones
def draw_box(title, lines: List[str], width: Optional[int] = None):
    max_length = (width or shutil.get_terminal_size((80, 24)).columns) - 2
    border = "╭" + "─" * max_length + "╮"
    bottom_border = "│" + "─" * max_length + "│"
    title_line = "│ " + title.ljust(max_length - 1) + "│"
    result = [border, title_line, bottom_border]

    for line in lines:
        if len(line) > max_length - 2:
            wrapped_lines = textwrap.wrap(line, width=max_length - 4)
            result.append("│ " + wrapped_lines[0].ljust(max_length - 2) + " │")
            for wrapped_line in wrapped_lines[1:]:
                result.append("│   " + wrapped_line.ljust(max_length - 4) + " │")
        else:
            result.append("│ " + line.ljust(max_length - 2) + " │")

    result.append("╰" + "─" * max_length + "╯")
    return "\n".join(result)


def capacity_rows(bit_widths=range(1, 9)) -> List[Dict]:
    layouts = [
        ("ids", False, False),
        ("sender", True, False),
        ("receiver", False, True),
        ("both", True, True),
    ]
    return [
        {
            "bit_width": k,
            **{name: codec.capacity(k, s, r) for name, s, r in layouts},
        }
        for k in bit_widths
    ]


def render_capacity_table(rows) -> str:
    header = f"{'bits':>4}  {'ids':>4}  {'sender':>6}  {'receiver':>8}  {'both':>4}"
    lines = [utils.get_bold_text(header)]
    for row in rows:
        lines.append(
            f"{row['bit_width']:>4}  {row['ids']:>4}  {row['sender']:>6}  "
            f"{row['receiver']:>8}  {row['both']:>4}"
        )
    lines.append(f"RS-DRS: {codec.rs_drs_capacity()}")
    return "\n".join(lines)


def render_report(report, width=None) -> str:
    lines = [
        f"◇ Detection tick: {report.detection_tick}",
        f"◇ Defense tick: {report.defense_tick}",
        f"◇ Distinct attackers: {report.distinct_attacker_count}",
        f"◇ Attack drop rate after defense: {report.attack_drop_rate:.2%}",
        f"◇ Benign drop rate: {report.benign_drop_rate:.2%}",
        f"◇ Capacity exceeded: {report.capacity_exceeded_count}",
        f"◇ Oracle mismatches: {report.oracle_mismatches} of {report.oracle_checks}",
    ]
    for label, path in sorted(report.traced_paths.items()):
        lines.append(f"◇ {label} [{path.origin}]: {reconstruction.format_arrow(path)}")
    for warning in report.warnings:
        lines.append(f"⚠️  {warning}")
    return draw_box("Simulation Report", lines, width)


def describe_packet(data, bit_width) -> Dict:
    """
    Decoded header fields, option list and Tracemax IDs of one captured
    packet. Undecodable parts are reported, never raised.
    """
    description = {"hex": bytes(data).hex()}
    try:
        packet = codec.decode_packet(data)
    except CodecError as e:
        description["error"] = str(e)
        return description

    h = packet.header
    description["header"] = {
        "src": str(h.src_ip),
        "dst": str(h.dst_ip),
        "ihl": h.ihl,
        "total_length": h.total_length,
        "identification": h.identification,
        "ttl": h.ttl,
        "protocol": h.protocol,
        "checksum": f"{h.header_checksum:#06x}",
    }
    options = []
    try:
        for option_type, offset, length in codec.iter_options(h.options):
            raw = h.options[offset : offset + length]
            entry = {
                "type": option_type,
                "name": OPTION_NAMES.get(option_type, "other"),
                "hex": raw.hex(),
            }
            if option_type == codec.OPTION_TYPE:
                try:
                    option = codec.decode_option(raw, bit_width)
                    entry["ids"] = list(option.ids)
                    entry["sender_ip"] = (
                        str(option.sender_ip) if option.sender_ip is not None else None
                    )
                    entry["receiver_ip"] = (
                        str(option.receiver_ip) if option.receiver_ip is not None else None
                    )
                except CodecError as e:
                    entry["error"] = str(e)
            options.append(entry)
    except CodecError as e:
        description["options_error"] = str(e)
    description["options"] = options
    return description


def render_inspect(record: reconstruction.CaptureRecord, description, width=None) -> str:
    node = "-" if record.node is None else record.node
    lines = []
    if "error" in description:
        lines.append(f"◇ undecodable: {description['error']}")
    else:
        for key, value in description["header"].items():
            lines.append(f"◇ {key}: {value}")
        for option in description["options"]:
            lines.append(f"◇ option {option['name']}: {option['hex']}")
            if "ids" in option:
                lines.append(f"    IDs: {option['ids']}")
                if option["sender_ip"] is not None:
                    lines.append(f"    sender: {option['sender_ip']}")
                if option["receiver_ip"] is not None:
                    lines.append(f"    receiver: {option['receiver_ip']}")
            if "error" in option:
                lines.append(f"    {option['error']}")
        if "options_error" in description:
            lines.append(f"◇ option area: {description['options_error']}")
    lines.extend(codec.hexdump(bytes.fromhex(description["hex"])).splitlines())
    return draw_box(f"tick {record.tick} node {node} {record.direction}", lines, width)
