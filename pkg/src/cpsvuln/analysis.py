"""Attack chains, compromise impact, and attack-surface filtering."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Mapping

from .graph import GraphLookupError, IbdGraph
from .matcher import Evidence
from .modelfmt import ConnectionKind, SystemModel
from .schema import is_attack_surface
from .vulndb import AttackVector, Effect, Privilege

DEFAULT_MAX_STEPS = 4
DEFAULT_MAX_CHAINS = 1000


class Degradation(str, enum.Enum):
    NONE = "none"
    PARTIAL = "partial"
    FULL = "full"


def _key(e: Evidence) -> tuple[str, str]:
    return (e.component, e.vector_id)


def improves(a: AttackVector, b: AttackVector) -> bool:
    """True when using ``b`` after ``a`` leaves the attacker strictly better off."""
    return (
        b.gained_privilege > a.gained_privilege
        or (a.requires_user_interaction and not b.requires_user_interaction)
        or (b.effect is Effect.CODE_EXECUTION and a.effect is not Effect.CODE_EXECUTION)
    )


def can_follow(a: Evidence, b: Evidence, graph: IbdGraph) -> bool:
    if _key(a) == _key(b):
        return False
    if a.vector.gained_privilege < b.vector.required_privilege:
        return False
    if not improves(a.vector, b.vector):
        return False
    return a.component == b.component or graph.adjacent(a.component, b.component)


@dataclass(frozen=True)
class AttackChain:
    steps: tuple[Evidence, ...]

    def __post_init__(self) -> None:
        if len(self.steps) < 2:
            raise ValueError("an attack chain needs at least two steps")

    @property
    def entry_component(self) -> str:
        return self.steps[0].component

    @property
    def vector_ids(self) -> tuple[str, ...]:
        return tuple(s.vector_id for s in self.steps)

    @property
    def narrative(self) -> list[str]:
        return [describe_step(i, step) for i, step in enumerate(self.steps, start=1)]

    def to_dict(self) -> dict:
        return {
            "entry_component": self.entry_component,
            "steps": [{"component": s.component, "vector": s.vector_id} for s in self.steps],
            "narrative": self.narrative,
        }


def describe_step(index: int, step: Evidence) -> str:
    v = step.vector
    effect = v.effect.value.replace("_", " ")
    needs = (
        f"needs {v.required_privilege.label} privileges"
        if v.required_privilege > Privilege.NONE
        else "needs no privileges"
    )
    if v.requires_user_interaction:
        needs += " and operator interaction"
    else:
        needs += ", no operator input"
    gained = (
        f"leaves the attacker with {v.gained_privilege.label} privileges"
        if v.gained_privilege > Privilege.NONE
        else "grants no privileges"
    )
    return f"Step {index}: {v.id} against {step.component} ({effect}); {needs}; {gained}."


def enumerate_chains(
    evidence: Iterable[Evidence],
    graph: IbdGraph,
    max_steps: int | None = DEFAULT_MAX_STEPS,
    max_chains: int | None = DEFAULT_MAX_CHAINS,
) -> tuple[list[AttackChain], bool]:
    """Chains in canonical (length, step keys) order, plus a truncation flag.

    Chains are built one length at a time by extending the previous level.
    Extending sorted prefixes with sorted successors keeps each level sorted,
    so stopping at ``max_chains`` keeps exactly the first chains in canonical
    order. The follow relation may contain cycles and the number of chains
    grows geometrically with length, hence both bounds.
    """
    items = sorted({_key(e): e for e in evidence}.values(), key=_key)
    follows = {_key(a): [b for b in items if can_follow(a, b, graph)] for a in items}
    chains: list[AttackChain] = []
    level = [(a,) for a in items]
    length = 1
    while level and (max_steps is None or length < max_steps):
        length += 1
        nxt = []
        for path in level:
            used = {_key(s) for s in path}
            for b in follows[_key(path[-1])]:
                if _key(b) in used:
                    continue
                if max_chains is not None and len(chains) >= max_chains:
                    return chains, True
                nxt.append(path + (b,))
                chains.append(AttackChain(path + (b,)))
        level = nxt
    return chains, False


def find_chains(
    evidence: Iterable[Evidence],
    graph: IbdGraph,
    max_steps: int | None = DEFAULT_MAX_STEPS,
    max_chains: int | None = DEFAULT_MAX_CHAINS,
) -> list[AttackChain]:
    """Every ordered sequence of distinct evidence items, two or more long,
    whose consecutive pairs satisfy :func:`can_follow`, up to the bounds of
    :func:`enumerate_chains`."""
    return enumerate_chains(evidence, graph, max_steps, max_chains)[0]


@dataclass(frozen=True)
class ImpactResult:
    compromised: str
    vector: str
    effect: Effect
    violated: frozenset[str]
    degradation: Degradation
    severed_links: tuple[tuple[str, str, str], ...] = ()
    tainted_links: tuple[tuple[str, str, str], ...] = ()
    actuation_endpoints: frozenset[str] = frozenset()

    def to_dict(self) -> dict:
        return {
            "compromised": self.compromised,
            "vector": self.vector,
            "effect": self.effect.value,
            "violated": sorted(self.violated),
            "degradation": self.degradation.value,
            "severed_links": [list(link) for link in self.severed_links],
            "tainted_links": [list(link) for link in self.tainted_links],
            "actuation_endpoints": sorted(self.actuation_endpoints),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ImpactResult":
        return cls(
            compromised=d["compromised"],
            vector=d["vector"],
            effect=Effect(d["effect"]),
            violated=frozenset(d["violated"]),
            degradation=Degradation(d["degradation"]),
            severed_links=tuple(tuple(x) for x in d.get("severed_links", ())),
            tainted_links=tuple(tuple(x) for x in d.get("tainted_links", ())),
            actuation_endpoints=frozenset(d.get("actuation_endpoints", ())),
        )


def actuation_endpoints(graph: IbdGraph) -> frozenset[str]:
    """Physical parts at the end of a command path: non-cyber vertices with
    incoming ports and no outgoing ones (servos, for instance)."""
    has_in = {graph.tgt[p] for p in graph.P}
    has_out = {graph.src[p] for p in graph.P}
    return frozenset(
        v for v in graph.V
        if v in has_in and v not in has_out and not graph.vertex_info(v).is_cyber
    )


def takes_control(vector: AttackVector) -> bool:
    return vector.effect is Effect.CODE_EXECUTION or (
        vector.effect is Effect.PRIVILEGE_GAIN and vector.gained_privilege is Privilege.SYSTEM
    )


def _link(graph: IbdGraph, port: str) -> tuple[str, str, str]:
    return (port, graph.src[port], graph.tgt[port])


def impact(graph: IbdGraph, evidence: Evidence) -> ImpactResult:
    """What a successful exploit of ``evidence`` does to the system graph.

    Code execution, or a privilege gain up to system level, violates every
    vertex reachable from the compromised one. A denial of service violates
    only the component itself but severs every data link touching it.
    """
    comp = evidence.component
    if comp not in graph.V:
        raise GraphLookupError(f"unknown component {comp!r}")
    vector = evidence.vector
    # power and other physical flows are not data exchange
    data_ports = [p for p in graph.ports() if graph.A_p[p].kind is not ConnectionKind.PHYSICAL]
    severed: tuple = ()
    tainted: tuple = ()
    if takes_control(vector):
        violated = frozenset(graph.reachable(comp))
        tainted = tuple(_link(graph, p) for p in data_ports if graph.src[p] in violated)
    elif vector.effect is Effect.DENIAL_OF_SERVICE:
        violated = frozenset({comp})
        severed = tuple(_link(graph, p) for p in data_ports if comp in (graph.src[p], graph.tgt[p]))
    else:
        violated = frozenset({comp})

    endpoints = actuation_endpoints(graph)
    if endpoints and endpoints <= violated:
        degradation = Degradation.FULL
    elif len(violated) > 1 or severed:
        degradation = Degradation.PARTIAL
    else:
        degradation = Degradation.NONE
    return ImpactResult(comp, vector.id, vector.effect, violated, degradation, severed, tainted, endpoints)


def attack_surface(model: SystemModel) -> list[str]:
    return [c.id for c in model.components if is_attack_surface(c)]
