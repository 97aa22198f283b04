import ipaddress
import json
from typing import Any, Iterable, Type

from tracemax.errors import ParseError, TracemaxError


def load_json_document(text, error_cls: Type[TracemaxError] = ParseError) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise error_cls(f"invalid JSON: {e}") from e


def dump_json_document(document) -> str:
    # Sorted keys and a trailing newline keep re-runs byte-identical
    return json.dumps(document, indent=2, sort_keys=True) + "\n"


def check_keys(
    record,
    required: Iterable[str],
    optional: Iterable[str] = (),
    where="record",
    error_cls: Type[TracemaxError] = ParseError,
):
    if not isinstance(record, dict):
        raise error_cls(f"{where} must be an object")
    required = set(required)
    allowed = required | set(optional)
    missing = required - record.keys()
    if missing:
        raise error_cls(f"{where} misses keys: {', '.join(sorted(missing))}")
    unknown = record.keys() - allowed
    if unknown:
        raise error_cls(f"{where} has unknown keys: {', '.join(sorted(unknown))}")


def require_int(value, where, error_cls: Type[TracemaxError] = ParseError) -> int:
    # bool is an int subclass but never a valid number here
    if isinstance(value, bool) or not isinstance(value, int):
        raise error_cls(f"{where} must be an integer")
    return value


def require_bool(value, where, error_cls: Type[TracemaxError] = ParseError) -> bool:
    if not isinstance(value, bool):
        raise error_cls(f"{where} must be a boolean")
    return value


def parse_ipv4(value, where="address", error_cls: Type[TracemaxError] = ParseError):
    try:
        return ipaddress.IPv4Address(value)
    except (ipaddress.AddressValueError, ValueError, TypeError) as e:
        raise error_cls(f"{where}: {value!r} is not an IPv4 address") from e


def parse_ipv4_network(
    value, where="prefix", error_cls: Type[TracemaxError] = ParseError
):
    try:
        return ipaddress.IPv4Network(value, strict=False)
    except (ipaddress.AddressValueError, ValueError, TypeError) as e:
        raise error_cls(f"{where}: {value!r} is not an IPv4 prefix") from e


def get_bold_text(text):
    return f"\033[01m{text}\033[0m"


def read_text_file(path) -> str:
    with open(path, "r") as file:
        return file.read()


def write_text_file(path, text):
    with open(path, "w") as file:
        file.write(text)
