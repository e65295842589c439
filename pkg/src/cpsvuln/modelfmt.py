"""System models and their line-oriented ``.model`` text format.

A document looks like::

    # comments start with '#'
    [model] Flight Control System

    [component] gps
    display_name = NMEA GPS
    operating_system = Bare Metal
    communication = I2C, RS232, UART, RF
    entry_points = RF

    [connection] gps -> primary_processor
    kind = digital
    protocols = I2C

Values are comma separated; a value containing a comma or a double quote is
written in double quotes with embedded quotes doubled.
"""

from __future__ import annotations

import csv
import enum
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .schema import (
    CATEGORIES,
    CyberComponent,
    ID_PATTERN,
    TaxonomicRecord,
    ValidationError,
    validate_component,
)


class ConnectionKind(str, enum.Enum):
    DIGITAL = "digital"
    ANALOG = "analog"
    PHYSICAL = "physical"


class ModelSyntaxError(ValueError):
    def __init__(self, message: str, line: int, column: int = 1):
        self.message = message
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")


class ModelValidationError(ValidationError):
    """A syntactically fine document describing an invalid model."""

    def __init__(self, violations: list[str], unknown_references: tuple[str, ...] = ()):
        super().__init__(violations)
        self.unknown_references = unknown_references


@dataclass(frozen=True)
class Connection:
    source: str
    target: str
    kind: ConnectionKind = ConnectionKind.DIGITAL
    protocols: frozenset[str] = frozenset()
    loopback: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", ConnectionKind(self.kind))
        protocols = [self.protocols] if isinstance(self.protocols, str) else self.protocols
        object.__setattr__(self, "protocols", frozenset(protocols))

    @property
    def sort_key(self) -> tuple[str, str, tuple[str, ...]]:
        return (self.source, self.target, tuple(sorted(self.protocols)))


@dataclass(frozen=True)
class SystemModel:
    """Components and directed connections; stored in canonical order."""

    name: str
    components: tuple[CyberComponent, ...] = ()
    connections: tuple[Connection, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "components", tuple(sorted(self.components, key=lambda c: c.id)))
        object.__setattr__(
            self,
            "connections",
            tuple(sorted(self.connections, key=lambda c: (c.sort_key, c.kind.value))),
        )

    def component(self, component_id: str) -> CyberComponent:
        for comp in self.components:
            if comp.id == component_id:
                return comp
        raise KeyError(component_id)

    @property
    def component_ids(self) -> tuple[str, ...]:
        return tuple(c.id for c in self.components)


def validate_model(model: SystemModel) -> list[str]:
    violations: list[str] = []
    known: dict[str, CyberComponent] = {}
    if not model.name.strip() or "\n" in model.name:
        violations.append("model: name must be a single non-empty line")
    for comp in model.components:
        if comp.id in known:
            violations.append(f"{comp.id}: duplicate component id")
        known[comp.id] = comp
        violations.extend(f"{comp.id}: {v}" for v in validate_component(comp))
        for label, text in (("display_name", comp.display_name), ("function", comp.function_note)):
            if "\n" in text or "\r" in text:
                violations.append(f"{comp.id}: {label} must be a single line")

    seen: set[tuple] = set()
    for conn in model.connections:
        where = f"connection {conn.source} -> {conn.target}"
        for end in (conn.source, conn.target):
            if end not in known:
                violations.append(f"{where}: unknown component {end!r}")
        if conn.source == conn.target and not conn.loopback:
            violations.append(f"{where}: self-loop requires loopback = true")
        if conn.kind is ConnectionKind.DIGITAL and not conn.protocols:
            violations.append(f"{where}: digital connection needs at least one protocol")
        for label in sorted(conn.protocols):
            if not label.strip() or label != label.strip() or "\n" in label:
                violations.append(f"{where}: bad protocol label {label!r}")
        key = (conn.sort_key, conn.kind)
        if key in seen:
            violations.append(f"{where}: duplicate connection")
        seen.add(key)
        src, tgt = known.get(conn.source), known.get(conn.target)
        if (
            conn.kind is ConnectionKind.DIGITAL
            and src is not None
            and tgt is not None
            and src.is_cyber
            and tgt.is_cyber
        ):
            for comp in (src, tgt):
                comm = comp.record.communication or frozenset()
                missing = sorted(conn.protocols - comm)
                if missing:
                    violations.append(
                        f"{where}: protocol(s) {', '.join(missing)} not in communication of {comp.id}"
                    )
    return violations


def check_model(model: SystemModel) -> SystemModel:
    violations = validate_model(model)
    if violations:
        known = set(model.component_ids)
        unknown = sorted(
            {e for c in model.connections for e in (c.source, c.target) if e not in known}
        )
        raise ModelValidationError(violations, tuple(unknown))
    return model


# -- parsing -----------------------------------------------------------------

_SECTION = re.compile(r"\[(?P<kind>[a-z]+)\]\s*(?P<rest>.*)$")
_CONNECTION = re.compile(r"(?P<src>\S+)\s*->\s*(?P<tgt>\S+)$")
_TRUE = {"true", "yes", "1"}
_FALSE = {"false", "no", "0"}

_COMPONENT_KEYS = {"display_name", "is_cyber", "function"} | {c.value for c in CATEGORIES}
_CONNECTION_KEYS = {"kind", "protocols", "loopback"}


def split_values(text: str, line: int = 0, column: int = 1) -> list[str]:
    text = text.strip()
    if not text:
        return []
    try:
        row = next(csv.reader([text], skipinitialspace=True, strict=True))
    except csv.Error as exc:
        raise ModelSyntaxError(f"bad value list: {exc}", line, column) from None
    return [value.strip() for value in row]


def join_values(values) -> str:
    out = []
    for value in values:
        if any(ch in value for ch in ',"'):
            value = '"' + value.replace('"', '""') + '"'
        out.append(value)
    return ", ".join(out)


def _parse_bool(text: str, line: int, column: int) -> bool:
    low = text.strip().lower()
    if low in _TRUE:
        return True
    if low in _FALSE:
        return False
    raise ModelSyntaxError(f"expected true or false, got {text.strip()!r}", line, column)


def _build_component(ident: str, fields_: dict[str, tuple[str, int, int]]) -> CyberComponent:
    record = {}
    for cat in CATEGORIES:
        if cat.value in fields_:
            text, line, col = fields_[cat.value]
            values = split_values(text, line, col)
            if cat.is_set and len(set(values)) != len(values):
                raise ModelSyntaxError(f"duplicate value in {cat.value}", line, col)
            record[cat.value] = values
    is_cyber = True
    if "is_cyber" in fields_:
        text, line, col = fields_["is_cyber"]
        is_cyber = _parse_bool(text, line, col)
    return CyberComponent(
        id=ident,
        display_name=fields_.get("display_name", ("", 0, 0))[0].strip(),
        is_cyber=is_cyber,
        record=TaxonomicRecord(**record),
        function_note=fields_.get("function", ("", 0, 0))[0].strip(),
    )


def _build_connection(src: str, tgt: str, fields_: dict) -> Connection:
    kind = ConnectionKind.DIGITAL
    if "kind" in fields_:
        text, line, col = fields_["kind"]
        try:
            kind = ConnectionKind(text.strip().lower())
        except ValueError:
            raise ModelSyntaxError(
                f"unknown connection kind {text.strip()!r}", line, col
            ) from None
    protocols: list[str] = []
    if "protocols" in fields_:
        text, line, col = fields_["protocols"]
        protocols = split_values(text, line, col)
    loopback = False
    if "loopback" in fields_:
        text, line, col = fields_["loopback"]
        loopback = _parse_bool(text, line, col)
    return Connection(src, tgt, kind, frozenset(protocols), loopback)


def parse_model(document: str) -> SystemModel:
    """Parse a ``.model`` document.

    Raises :class:`ModelSyntaxError` at the first malformed line, or
    :class:`ModelValidationError` carrying every invariant violation.
    """
    name: str | None = None
    components: list[CyberComponent] = []
    connections: list[Connection] = []
    section: tuple | None = None  # (kind, args, header line, fields)

    def close():
        if section is None or section[0] == "model":
            return
        kind, args, _, fields_ = section
        if kind == "component":
            components.append(_build_component(args, fields_))
        else:
            connections.append(_build_connection(*args, fields_))

    for lineno, raw in enumerate(document.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        indent = len(raw) - len(raw.lstrip())
        col = indent + 1
        if stripped.startswith("["):
            m = _SECTION.match(stripped)
            if not m:
                raise ModelSyntaxError("malformed section header", lineno, col)
            kind, rest = m.group("kind"), m.group("rest").strip()
            rest_col = col + m.start("rest")
            close()
            if kind == "model":
                if name is not None:
                    raise ModelSyntaxError("duplicate [model] header", lineno, col)
                if components or connections:
                    raise ModelSyntaxError("[model] header must come first", lineno, col)
                if not rest:
                    raise ModelSyntaxError("model name missing", lineno, rest_col)
                name = rest
                section = ("model", rest, lineno, {})
            elif name is None:
                raise ModelSyntaxError("document must start with a [model] header", lineno, col)
            elif kind == "component":
                if not ID_PATTERN.fullmatch(rest):
                    raise ModelSyntaxError(f"invalid component id {rest!r}", lineno, rest_col)
                section = ("component", rest, lineno, {})
            elif kind == "connection":
                cm = _CONNECTION.match(rest)
                if not cm:
                    raise ModelSyntaxError("expected '<source> -> <target>'", lineno, rest_col)
                section = ("connection", (cm.group("src"), cm.group("tgt")), lineno, {})
            else:
                raise ModelSyntaxError(f"unknown section [{kind}]", lineno, col)
            continue

        if section is None:
            raise ModelSyntaxError("document must start with a [model] header", lineno, col)
        if "=" not in stripped:
            raise ModelSyntaxError("expected 'key = value'", lineno, col)
        key, _, value = stripped.partition("=")
        key = key.strip()
        value_col = col + stripped.index("=") + 1
        allowed = {"component": _COMPONENT_KEYS, "connection": _CONNECTION_KEYS}.get(
            section[0], set()
        )
        if key not in allowed:
            raise ModelSyntaxError(f"unknown key {key!r} in [{section[0]}]", lineno, col)
        if key in section[3]:
            raise ModelSyntaxError(f"duplicate key {key!r}", lineno, col)
        section[3][key] = (value, lineno, value_col)

    close()
    if name is None:
        raise ModelSyntaxError("document must start with a [model] header", 1, 1)
    return check_model(SystemModel(name, tuple(components), tuple(connections)))


def serialize_model(model: SystemModel) -> str:
    lines = [f"[model] {model.name}"]
    for comp in model.components:
        lines += ["", f"[component] {comp.id}"]
        if comp.display_name:
            lines.append(f"display_name = {comp.display_name}")
        lines.append(f"is_cyber = {'true' if comp.is_cyber else 'false'}")
        if comp.function_note:
            lines.append(f"function = {comp.function_note}")
        if comp.is_cyber:
            for cat in CATEGORIES:
                lines.append(f"{cat.value} = {join_values(comp.record.values(cat))}".rstrip())
    for conn in model.connections:
        lines += ["", f"[connection] {conn.source} -> {conn.target}", f"kind = {conn.kind.value}"]
        if conn.protocols:
            lines.append(f"protocols = {join_values(sorted(conn.protocols))}")
        if conn.loopback:
            lines.append("loopback = true")
    return "\n".join(lines) + "\n"


def load_model(path: str | Path) -> SystemModel:
    return parse_model(Path(path).read_text(encoding="utf-8"))


def example_fcs_text() -> str:
    return resources.files("cpsvuln").joinpath("data/fcs.model").read_text(encoding="utf-8")


def load_example_fcs() -> SystemModel:
    """The flight control system fixture model."""
    return parse_model(example_fcs_text())

