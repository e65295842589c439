"""Internal block diagram as a graph, and its GraphML encoding.

A graph is ``G = (V, P, src, tgt, A)``: components are vertices, every
directed connection is one port with a source and a target vertex, and the
attribute store ``A`` is split into per-vertex and per-port attributes.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from xml.parsers import expat
from collections import deque
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

from .modelfmt import Connection, ConnectionKind, SystemModel, check_model
from .schema import CATEGORIES, AttributeSet, Category, CyberComponent, flatten_attributes

GRAPHML_NS = "http://graphml.graphdrawing.org/xmlns"
XSI_NS = "http://www.w3.org/2001/XMLSchema-instance"
SCHEMA_LOCATION = GRAPHML_NS + " http://graphml.graphdrawing.org/xmlns/1.0/graphml.xsd"

NODE_KEYS: dict[str, Category] = {f"d_{cat.short}": cat for cat in CATEGORIES}
CATEGORY_KEYS: dict[Category, str] = {cat: key for key, cat in NODE_KEYS.items()}
# node metadata that is not part of the taxonomic record
META_KEYS = {"d_label": "string", "d_is_cyber": "boolean", "d_function": "string"}
EDGE_KEYS = {"d_kind": "string", "d_protocols": "string"}
GRAPH_KEYS = {"d_model": "string"}


class GraphLookupError(KeyError):
    pass


class GraphMLError(ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.message = message
        self.line = line
        self.column = column
        where = f"line {line}: " if line is not None else ""
        if line is not None and column is not None:
            where = f"line {line}, column {column}: "
        super().__init__(where + message)


@dataclass(frozen=True)
class PortAttributes:
    kind: ConnectionKind
    protocols: frozenset[str] = frozenset()

    def labels(self) -> frozenset[str]:
        return frozenset({self.kind.value}) | self.protocols


@dataclass(frozen=True)
class VertexInfo:
    label: str = ""
    is_cyber: bool = True
    function_note: str = ""


def _frozen(mapping: Mapping) -> Mapping:
    return MappingProxyType(dict(mapping))


@dataclass(frozen=True, eq=False)
class IbdGraph:
    name: str
    V: frozenset[str]
    P: frozenset[str]
    src: Mapping[str, str]
    tgt: Mapping[str, str]
    A_v: Mapping[str, AttributeSet]
    A_p: Mapping[str, PortAttributes]
    info: Mapping[str, VertexInfo] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name in ("src", "tgt", "A_v", "A_p", "info"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        for name in ("V", "P"):
            object.__setattr__(self, name, frozenset(getattr(self, name)))
        problems = []
        for port in self.P:
            for fn in ("src", "tgt"):
                end = getattr(self, fn).get(port)
                if end is None:
                    problems.append(f"{fn} undefined for port {port}")
                elif end not in self.V:
                    problems.append(f"{fn}({port}) = {end} is not a vertex")
        if set(self.src) - self.P or set(self.tgt) - self.P:
            problems.append("src/tgt defined outside P")
        if set(self.A_v) - self.V or set(self.A_p) - self.P:
            problems.append("attributes indexed by unknown vertex or port")
        if problems:
            raise ValueError("; ".join(problems))

    def __eq__(self, other) -> bool:
        if not isinstance(other, IbdGraph):
            return NotImplemented
        return (
            self.name == other.name
            and self.V == other.V
            and self.P == other.P
            and dict(self.src) == dict(other.src)
            and dict(self.tgt) == dict(other.tgt)
            and dict(self.A_v) == dict(other.A_v)
            and dict(self.A_p) == dict(other.A_p)
            and self.vertex_info_map() == other.vertex_info_map()
        )

    __hash__ = None  # type: ignore[assignment]

    @property
    def A(self) -> frozenset:
        """Every attribute in the store, tagged with where it lives."""
        out = set()
        for v, attrs in self.A_v.items():
            out.update(("vertex", v, cat.value, value) for cat, value in attrs)
        for p, attrs in self.A_p.items():
            out.update(("port", p, label) for label in attrs.labels())
        return frozenset(out)

    def vertex_info(self, vertex: str) -> VertexInfo:
        return self.info.get(vertex, VertexInfo())

    def vertex_info_map(self) -> dict[str, VertexInfo]:
        return {v: self.vertex_info(v) for v in self.V}

    def ports(self) -> list[str]:
        """Ports in canonical order."""
        return sorted(self.P, key=_port_order)

    def out_ports(self, vertex: str) -> list[str]:
        return [p for p in self.ports() if self.src[p] == vertex]

    def in_ports(self, vertex: str) -> list[str]:
        return [p for p in self.ports() if self.tgt[p] == vertex]

    def successors(self, vertex: str) -> set[str]:
        return {self.tgt[p] for p in self.P if self.src[p] == vertex}

    def adjacent(self, a: str, b: str) -> bool:
        return any(
            (self.src[p], self.tgt[p]) in ((a, b), (b, a)) for p in self.P
        )

    def reachable(self, start: str) -> set[str]:
        """Vertices reachable from ``start`` along port direction, ``start`` included."""
        if start not in self.V:
            raise GraphLookupError(start)
        succ: dict[str, list[str]] = {}
        for p in self.P:
            succ.setdefault(self.src[p], []).append(self.tgt[p])
        seen = {start}
        queue = deque([start])
        while queue:
            for nxt in succ.get(queue.popleft(), ()):
                if nxt not in seen:
                    seen.add(nxt)
                    queue.append(nxt)
        return seen


def _port_order(port: str):
    # p0, p1, ... p10 sort numerically; foreign ids after, lexically
    if port.startswith("p") and port[1:].isdigit():
        return (0, int(port[1:]), "")
    return (1, 0, port)


def to_graph(model: SystemModel) -> IbdGraph:
    check_model(model)
    V = {c.id for c in model.components}
    A_v = {c.id: flatten_attributes(c) for c in model.components}
    info = {c.id: VertexInfo(c.display_name, c.is_cyber, c.function_note) for c in model.components}
    src, tgt, A_p = {}, {}, {}
    # model connections are already in canonical (src, tgt, protocols) order
    for i, conn in enumerate(model.connections):
        port = f"p{i}"
        src[port], tgt[port] = conn.source, conn.target
        A_p[port] = PortAttributes(conn.kind, conn.protocols)
    return IbdGraph(model.name, frozenset(V), frozenset(src), src, tgt, A_v, A_p, info)


def from_graph(graph: IbdGraph) -> SystemModel:
    """Inverse of :func:`to_graph`."""
    components = []
    for v in sorted(graph.V):
        meta = graph.vertex_info(v)
        components.append(
            CyberComponent(v, meta.label, meta.is_cyber, graph.A_v[v].rebuild(), meta.function_note)
        )
    connections = [
        Connection(
            graph.src[p],
            graph.tgt[p],
            graph.A_p[p].kind,
            graph.A_p[p].protocols,
            loopback=graph.src[p] == graph.tgt[p],
        )
        for p in graph.ports()
    ]
    return check_model(SystemModel(graph.name, tuple(components), tuple(connections)))


def attr_v(graph: IbdGraph, vertex: str) -> AttributeSet:
    if vertex not in graph.V:
        raise GraphLookupError(f"unknown vertex {vertex!r}")
    return graph.A_v.get(vertex, AttributeSet())


def attr_p(graph: IbdGraph, port: str) -> frozenset[str]:
    if port not in graph.P:
        raise GraphLookupError(f"unknown port {port!r}")
    return graph.A_p[port].labels()


def find_port(graph: IbdGraph, source: str, target: str) -> list[str]:
    return [p for p in graph.ports() if graph.src[p] == source and graph.tgt[p] == target]


# -- GraphML ------------------------------------------------------------------

def escape_list(values) -> str:
    return ";".join(v.replace("\\", "\\\\").replace(";", "\\;") for v in values)


def unescape_list(text: str) -> list[str]:
    values, current, chars = [], [], iter(text)
    for ch in chars:
        if ch == "\\":
            current.append(next(chars, "\\"))
        elif ch == ";":
            values.append("".join(current))
            current = []
        else:
            current.append(ch)
    values.append("".join(current))
    return values


def _q(tag: str) -> str:
    return f"{{{GRAPHML_NS}}}{tag}"


def emit_graphml(graph: IbdGraph) -> str:
    """Serialize to a GraphML 1.0 document; identical graphs give identical bytes."""
    ET.register_namespace("", GRAPHML_NS)
    ET.register_namespace("xsi", XSI_NS)
    root = ET.Element(_q("graphml"), {f"{{{XSI_NS}}}schemaLocation": SCHEMA_LOCATION})
    for key_id, cat in NODE_KEYS.items():
        ET.SubElement(root, _q("key"), {"id": key_id, "for": "node", "attr.name": cat.value, "attr.type": "string"})
    for key_id, typ in META_KEYS.items():
        ET.SubElement(root, _q("key"), {"id": key_id, "for": "node", "attr.name": key_id[2:], "attr.type": typ})
    for key_id, typ in EDGE_KEYS.items():
        ET.SubElement(root, _q("key"), {"id": key_id, "for": "edge", "attr.name": key_id[2:], "attr.type": typ})
    for key_id, typ in GRAPH_KEYS.items():
        ET.SubElement(root, _q("key"), {"id": key_id, "for": "graph", "attr.name": key_id[2:], "attr.type": typ})

    g = ET.SubElement(root, _q("graph"), {"id": "G", "edgedefault": "directed"})
    ET.SubElement(g, _q("data"), {"key": "d_model"}).text = graph.name

    def data(parent, key, text):
        ET.SubElement(parent, _q("data"), {"key": key}).text = text

    for v in sorted(graph.V):
        node = ET.SubElement(g, _q("node"), {"id": v})
        attrs = attr_v(graph, v)
        for cat in CATEGORIES:
            values = attrs.by_category(cat)
            if values:
                data(node, CATEGORY_KEYS[cat], escape_list(values))
        meta = graph.vertex_info(v)
        if meta.label:
            data(node, "d_label", meta.label)
        data(node, "d_is_cyber", "true" if meta.is_cyber else "false")
        if meta.function_note:
            data(node, "d_function", meta.function_note)

    for p in graph.ports():
        edge = ET.SubElement(g, _q("edge"), {"id": p, "source": graph.src[p], "target": graph.tgt[p]})
        pa = graph.A_p[p]
        data(edge, "d_kind", pa.kind.value)
        if pa.protocols:
            data(edge, "d_protocols", escape_list(sorted(pa.protocols)))

    ET.indent(root)
    body = ET.tostring(root, encoding="unicode")
    return '<?xml version="1.0" encoding="UTF-8"?>\n' + body + "\n"


def _read_xml(document: str | bytes):
    """Parse into an element tree, remembering each element's source line."""
    parser = expat.ParserCreate(namespace_separator=" ")
    lines: dict[int, int] = {}
    stack: list[ET.Element] = []
    roots: list[ET.Element] = []

    def start(name, attrs):
        elem = ET.Element(name.rsplit(" ", 1)[-1], {k.rsplit(" ", 1)[-1]: v for k, v in attrs.items()})
        lines[id(elem)] = parser.CurrentLineNumber
        if stack:
            stack[-1].append(elem)
        else:
            roots.append(elem)
        stack.append(elem)

    def end(name):
        stack.pop()

    def chars(text):
        if stack:
            elem = stack[-1]
            elem.text = (elem.text or "") + text

    parser.StartElementHandler = start
    parser.EndElementHandler = end
    parser.CharacterDataHandler = chars
    try:
        parser.Parse(document, True)
    except expat.ExpatError as exc:
        raise GraphMLError(f"malformed XML: {expat.errors.messages[exc.code]}", exc.lineno, exc.offset + 1) from None
    return roots[0], lines


def parse_graphml(document: str | bytes) -> IbdGraph:
    """Read a document produced by :func:`emit_graphml` (or written by hand
    against the same key schema)."""
    root, lines = _read_xml(document)

    def line_of(elem) -> int | None:
        return lines.get(id(elem))

    if root.tag != "graphml":
        raise GraphMLError(f"root element is <{root.tag}>, expected <graphml>", line_of(root))

    known = {**{k: "node" for k in NODE_KEYS}, **{k: "node" for k in META_KEYS},
             **{k: "edge" for k in EDGE_KEYS}, **{k: "graph" for k in GRAPH_KEYS}}
    declared: dict[str, str] = {}
    graphs = []
    for child in root:
        tag = child.tag
        if tag == "key":
            key_id = child.get("id")
            if key_id not in known:
                raise GraphMLError(f"unknown key {key_id!r}", line_of(child))
            if child.get("for", known[key_id]) != known[key_id]:
                raise GraphMLError(f"key {key_id!r} declared for {child.get('for')!r}", line_of(child))
            declared[key_id] = known[key_id]
        elif tag == "graph":
            graphs.append(child)
    if len(graphs) != 1:
        raise GraphMLError(f"expected exactly one <graph>, found {len(graphs)}", line_of(root))
    g = graphs[0]
    if g.get("edgedefault", "directed") != "directed":
        raise GraphMLError("only directed graphs are supported", line_of(g))

    def read_data(elem, scope: str) -> dict[str, str]:
        out = {}
        for d in elem:
            if d.tag != "data":
                continue
            key = d.get("key")
            if key not in declared:
                raise GraphMLError(f"data uses undeclared key {key!r}", line_of(d))
            if declared[key] != scope:
                raise GraphMLError(f"key {key!r} is not a {scope} key", line_of(d))
            out[key] = d.text or ""
        return out

    name = read_data(g, "graph").get("d_model", g.get("id", ""))
    V, A_v, info = set(), {}, {}
    src, tgt, A_p = {}, {}, {}
    edges = []
    for elem in g:
        tag = elem.tag
        if tag == "node":
            v = elem.get("id")
            if not v:
                raise GraphMLError("node without id", line_of(elem))
            if v in V:
                raise GraphMLError(f"duplicate node {v!r}", line_of(elem))
            values = read_data(elem, "node")
            V.add(v)
            A_v[v] = AttributeSet(tuple(
                (cat, value)
                for key, cat in NODE_KEYS.items()
                if key in values and values[key] != ""
                for value in unescape_list(values[key])
            ))
            cyber_text = values.get("d_is_cyber", "true").strip().lower()
            if cyber_text not in ("true", "false"):
                raise GraphMLError(f"d_is_cyber must be true or false, got {cyber_text!r}", line_of(elem))
            info[v] = VertexInfo(values.get("d_label", ""), cyber_text == "true", values.get("d_function", ""))
        elif tag == "edge":
            edges.append(elem)
    for n, elem in enumerate(edges):
        port = elem.get("id") or f"p{n}"
        if port in src:
            raise GraphMLError(f"duplicate edge id {port!r}", line_of(elem))
        for end in ("source", "target"):
            v = elem.get(end)
            if v is None:
                raise GraphMLError(f"edge {port!r} has no {end}", line_of(elem))
            if v not in V:
                raise GraphMLError(f"edge {port!r} references undeclared node {v!r}", line_of(elem))
        values = read_data(elem, "edge")
        try:
            kind = ConnectionKind(values.get("d_kind", "digital"))
        except ValueError:
            raise GraphMLError(f"edge {port!r} has unknown kind {values['d_kind']!r}", line_of(elem)) from None
        protocols = values.get("d_protocols", "")
        src[port], tgt[port] = elem.get("source"), elem.get("target")
        A_p[port] = PortAttributes(kind, frozenset(unescape_list(protocols)) if protocols else frozenset())
    return IbdGraph(name, frozenset(V), frozenset(src), src, tgt, A_v, A_p, info)
