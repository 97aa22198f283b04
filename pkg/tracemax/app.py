import argparse
import logging
import os
import sys

from yaspin import yaspin

import tracemax.codec as codec
import tracemax.formatter as formatter
import tracemax.reconstruction as reconstruction
import tracemax.simulator as simulator
import tracemax.utils as utils
from tracemax.errors import TracemaxError
from tracemax.id_assignment import (
    MAX_BIT_WIDTH,
    MIN_BIT_WIDTH,
    assign_ids,
    dump_assignment,
    load_assignment,
    min_feasible_bit_width,
    verify_assignment,
)
from tracemax.topology import load_topology

BIT_WIDTHS = range(MIN_BIT_WIDTH, MAX_BIT_WIDTH + 1)


def print_json(document):
    sys.stdout.write(utils.dump_json_document(document))


def cmd_assign(args):
    topology = load_topology(utils.read_text_file(args.topology))
    bit_width = min_feasible_bit_width(topology) if args.auto else args.bits
    assignment = assign_ids(topology, bit_width)
    document = dump_assignment(assignment)
    if not args.out:
        print_json(document)
        return 0

    utils.write_text_file(args.out, utils.dump_json_document(document))
    if args.json:
        print_json({"bit_width": bit_width, "ports": len(assignment.ids), "out": args.out})
    else:
        print(
            f"✨ {len(assignment.ids)} port IDs with {bit_width} bits written to "
            + utils.get_bold_text(args.out)
        )
    return 0


def cmd_verify(args):
    topology = load_topology(utils.read_text_file(args.topology))
    assignment = load_assignment(utils.read_text_file(args.assignment))
    violations = verify_assignment(topology, assignment)
    if args.json:
        print_json(
            {
                "valid": not violations,
                "violations": [
                    {"node": v.node, "ports": [list(p) for p in v.ports], "id": v.id}
                    for v in violations
                ],
            }
        )
    elif not violations:
        print("✨ Local uniqueness holds for every node")
    else:
        for v in violations:
            (a_node, a_port), (b_node, b_port) = v.ports
            print(
                f"⚠️  Node {utils.get_bold_text(v.node)}: ports {a_node}:{a_port} and "
                f"{b_node}:{b_port} share ID {v.id}"
            )
    return 1 if violations else 0


def cmd_capacity(args):
    value = codec.capacity(args.bits, args.sender, args.receiver)
    if args.json:
        print_json(
            {
                "bit_width": args.bits,
                "sender_ip": args.sender,
                "receiver_ip": args.receiver,
                "capacity": value,
                "rs_drs": codec.rs_drs_capacity(),
            }
        )
    else:
        print(value)
        print(f"RS-DRS: {codec.rs_drs_capacity()}")
    return 0


def cmd_compare(args):
    rows = formatter.capacity_rows(BIT_WIDTHS)
    if args.json:
        print_json({"tracemax": rows, "rs_drs": codec.rs_drs_capacity()})
    else:
        print(formatter.render_capacity_table(rows))
    return 0


def cmd_simulate(args):
    config = simulator.load_scenario(
        utils.read_text_file(args.scenario),
        os.path.dirname(os.path.abspath(args.scenario)),
    )
    spinner = None
    if sys.stdout.isatty() and not args.json:
        spinner = yaspin(text="🔍 Simulating...")
        spinner.start()
    try:
        report = simulator.run_scenario(config)
    finally:
        if spinner is not None:
            spinner.stop()

    document = report.to_dict()
    if args.out:
        utils.write_text_file(args.out, utils.dump_json_document(document))
    if args.captures:
        utils.write_text_file(
            args.captures,
            "".join(reconstruction.format_capture_line(r) + "\n" for r in report.captures),
        )
    if args.collector:
        utils.write_text_file(
            args.collector, "".join(line + "\n" for line in report.collector.lines())
        )

    if args.json:
        print_json(document)
    else:
        print("✨ Simulation Result ✨")
        print(formatter.render_report(report))
    return 0


def cmd_reconstruct(args):
    topology = load_topology(utils.read_text_file(args.topology))
    assignment = load_assignment(utils.read_text_file(args.assignment))
    records = reconstruction.load_captures(utils.read_text_file(args.captures))
    paths = [
        reconstruction.reconstruct_from_capture(record, topology, assignment)
        for record in records
    ]
    if args.json:
        print_json([reconstruction.path_to_dict(path) for path in paths])
        return 0
    for record, path in zip(records, paths):
        marker = "" if path.complete else " (partial)"
        print(
            f"◇ tick {record.tick} at {path.receiver}: "
            f"{reconstruction.format_arrow(path) or '(no marks)'}{marker}"
        )
    return 0


def cmd_inspect(args):
    records = reconstruction.load_captures(utils.read_text_file(args.captures))
    descriptions = [formatter.describe_packet(r.data, args.bits) for r in records]
    if args.json:
        print_json(
            [
                {"tick": r.tick, "node": r.node, "direction": r.direction, **d}
                for r, d in zip(records, descriptions)
            ]
        )
        return 0
    for record, description in zip(records, descriptions):
        print(formatter.render_inspect(record, description))
    return 0


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="Machine-readable output")
    common.add_argument(
        "--verbose", action="store_true", help="Log debug messages to stderr"
    )

    parser = argparse.ArgumentParser(
        prog="tracemax", description="Single-packet IP traceback toolkit"
    )
    subparsers = parser.add_subparsers(dest="action", required=True)

    assign = subparsers.add_parser(
        "assign", parents=[common], help="Assign port IDs to a topology"
    )
    assign.add_argument("topology", help="Topology file")
    width = assign.add_mutually_exclusive_group(required=True)
    width.add_argument("--bits", type=int, choices=BIT_WIDTHS, help="ID bit width")
    width.add_argument(
        "--auto", action="store_true", help="Use the smallest feasible bit width"
    )
    assign.add_argument("--out", type=str, help="Write the assignment file here")
    assign.set_defaults(handler=cmd_assign)

    verify = subparsers.add_parser(
        "verify", parents=[common], help="Check the local uniqueness of an assignment"
    )
    verify.add_argument("topology", help="Topology file")
    verify.add_argument("assignment", help="Assignment file")
    verify.set_defaults(handler=cmd_verify)

    capacity = subparsers.add_parser(
        "capacity", parents=[common], help="IDs that fit into one option"
    )
    capacity.add_argument("--bits", type=int, choices=BIT_WIDTHS, required=True)
    capacity.add_argument("--sender", action="store_true", help="Sender IP present")
    capacity.add_argument("--receiver", action="store_true", help="Receiver IP present")
    capacity.set_defaults(handler=cmd_capacity)

    compare = subparsers.add_parser(
        "compare", parents=[common], help="Capacity per bit width next to RS-DRS"
    )
    compare.set_defaults(handler=cmd_compare)

    simulate = subparsers.add_parser(
        "simulate", parents=[common], help="Run an attack scenario"
    )
    simulate.add_argument("scenario", help="Scenario file")
    simulate.add_argument("--out", type=str, help="Write the JSON report here")
    simulate.add_argument("--captures", type=str, help="Write victim captures here")
    simulate.add_argument("--collector", type=str, help="Write router events here")
    simulate.set_defaults(handler=cmd_simulate)

    reconstruct = subparsers.add_parser(
        "reconstruct", parents=[common], help="Reconstruct paths from captures"
    )
    reconstruct.add_argument("captures", help="Capture file")
    reconstruct.add_argument("--topology", required=True, help="Topology file")
    reconstruct.add_argument("--assignment", required=True, help="Assignment file")
    reconstruct.set_defaults(handler=cmd_reconstruct)

    inspect = subparsers.add_parser(
        "inspect", parents=[common], help="Decode captured packets"
    )
    inspect.add_argument("captures", help="Capture file")
    inspect.add_argument(
        "--bits", type=int, choices=BIT_WIDTHS, default=5, help="ID bit width"
    )
    inspect.set_defaults(handler=cmd_inspect)

    return parser


def run(argv=None) -> int:
    """
    Main function to run the command line tool
    """
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.handler(args)
    except (TracemaxError, OSError) as e:
        print(f"💥 {e}", file=sys.stderr)
        return 1
