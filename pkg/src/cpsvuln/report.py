"""Assessment reports: assembly from (model, store) and JSON/markdown rendering."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping

from . import __version__
from .analysis import AttackChain, ImpactResult, attack_surface, enumerate_chains, impact
from .graph import IbdGraph, to_graph
from .matcher import Evidence, match_model
from .modelfmt import SystemModel
from .vulndb import VulnStore

SCHEMA_VERSION = "1.0"


@dataclass(frozen=True)
class AssessmentReport:
    model_name: str
    store_hash: str
    store_size: int
    components: tuple[str, ...]
    evidence: Mapping[str, tuple[Evidence, ...]]
    chains: tuple[AttackChain, ...] = ()
    impacts: tuple[ImpactResult, ...] = ()
    attack_surface: tuple[str, ...] = ()
    surface_only: bool = False
    chains_truncated: bool = False
    schema_version: str = SCHEMA_VERSION
    tool_version: str = field(default=__version__)

    @property
    def zero_evidence(self) -> tuple[str, ...]:
        return tuple(c for c in self.components if not self.evidence.get(c))

    def all_evidence(self) -> list[Evidence]:
        return [e for c in self.components for e in self.evidence.get(c, ())]

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "tool_version": self.tool_version,
            "model": self.model_name,
            "store": {"hash": self.store_hash, "records": self.store_size},
            "surface_only": self.surface_only,
            "components": list(self.components),
            "attack_surface": list(self.attack_surface),
            "evidence": {c: [e.to_dict() for e in self.evidence.get(c, ())] for c in self.components},
            "zero_evidence": list(self.zero_evidence),
            "chains": [c.to_dict() for c in self.chains],
            "chains_truncated": self.chains_truncated,
            "impacts": [i.to_dict() for i in self.impacts],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "AssessmentReport":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema version {d.get('schema_version')!r}")
        evidence = {
            c: tuple(Evidence.from_dict(e) for e in items) for c, items in d["evidence"].items()
        }
        by_key = {(e.component, e.vector_id): e for items in evidence.values() for e in items}
        chains = tuple(
            AttackChain(tuple(by_key[(s["component"], s["vector"])] for s in chain["steps"]))
            for chain in d["chains"]
        )
        return cls(
            model_name=d["model"],
            store_hash=d["store"]["hash"],
            store_size=d["store"]["records"],
            components=tuple(d["components"]),
            evidence=evidence,
            chains=chains,
            impacts=tuple(ImpactResult.from_dict(i) for i in d["impacts"]),
            attack_surface=tuple(d["attack_surface"]),
            surface_only=d.get("surface_only", False),
            chains_truncated=d.get("chains_truncated", False),
            schema_version=d["schema_version"],
            tool_version=d.get("tool_version", __version__),
        )


def assess(
    model: SystemModel, store: VulnStore, surface_only: bool = False, graph: IbdGraph | None = None
) -> AssessmentReport:
    """Run matching, chaining, and impact analysis for a whole model."""
    graph = graph or to_graph(model)
    surface = attack_surface(model)
    matches = match_model(model, store)
    if surface_only:
        matches = {c: (ev if c in surface else []) for c, ev in matches.items()}
    evidence = {c: tuple(ev) for c, ev in matches.items()}
    flat = [e for c in model.component_ids for e in evidence[c]]
    chains, truncated = enumerate_chains(flat, graph)
    return AssessmentReport(
        model_name=model.name,
        store_hash=store.version_hash(),
        store_size=len(store),
        components=model.component_ids,
        evidence=evidence,
        chains=tuple(chains),
        impacts=tuple(impact(graph, e) for e in flat),
        attack_surface=tuple(surface),
        surface_only=surface_only,
        chains_truncated=truncated,
    )


def render_json(report: AssessmentReport) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def report_from_json(document: str) -> AssessmentReport:
    return AssessmentReport.from_dict(json.loads(document))


def _cell(text: str) -> str:
    return text.replace("|", "\\|").replace("\n", " ")


def render_markdown(report: AssessmentReport) -> str:
    out = [f"# Vulnerability assessment: {report.model_name}", ""]
    n = len(report.components)
    out.append(
        f"{n} component{'s' if n != 1 else ''} assessed against {report.store_size} "
        f"historic records (store `{report.store_hash}`, report schema {report.schema_version})."
    )
    if report.surface_only:
        out.append("Only attack-surface components were matched.")
    out.append("")

    out += ["## Attack surface", ""]
    if report.attack_surface:
        out += [f"- `{c}`" for c in report.attack_surface]
    else:
        out.append("No component exposes an entry point.")
    out.append("")

    out += ["## Evidence", ""]
    surface = set(report.attack_surface)
    any_evidence = False
    for comp in report.components:
        items = report.evidence.get(comp, ())
        if not items:
            continue
        any_evidence = True
        marker = " (attack surface)" if comp in surface else ""
        out += [f"### `{comp}`{marker}", ""]
        out += ["| CVE | CWE | CAPEC | Effect | Matched term | Field |",
                "|---|---|---|---|---|---|"]
        for e in items:
            cwe = ", ".join(sorted(e.lifted_weaknesses)) or "-"
            capec = ", ".join(sorted(e.lifted_patterns)) or "-"
            out.append(
                f"| {e.vector_id} | {cwe} | {capec} | {e.vector.effect.value} | "
                f"{_cell(e.matched_term.text)} ({e.matched_term.category.value}) | {e.matched_field} |"
            )
        shared = set.intersection(*(set(e.lifted_weaknesses) for e in items))
        if len(items) > 1 and shared:
            out += ["", f"All {len(items)} records share weakness {', '.join(sorted(shared))}."]
        out += ["", "Guidance: look for a substitute part with no reported records, or write "
                "requirements that mitigate these weakness classes."]
        out.append("")
        for e in items:
            out.append(f"- **{e.vector_id}**: {_cell(e.vector.summary)}")
        out.append("")
    if not any_evidence:
        out += ["No evidence found.", ""]

    out += ["## Attack chains", ""]
    if report.chains:
        for i, chain in enumerate(report.chains, start=1):
            out.append(f"{i}. {' -> '.join(chain.vector_ids)} (entry: `{chain.entry_component}`)")
            out += [f"   - {line}" for line in chain.narrative]
    else:
        out.append("No attack chains.")
    if report.chains_truncated:
        out += ["", f"Only the first {len(report.chains)} chains are listed; more exist."]
    out.append("")

    out += ["## Impact", ""]
    if report.impacts:
        out += ["| Compromised | CVE | Effect | Degradation | Violated | Severed links |",
                "|---|---|---|---|---|---|"]
        for r in report.impacts:
            severed = ", ".join(f"{s}->{t}" for _, s, t in r.severed_links) or "-"
            out.append(
                f"| {r.compromised} | {r.vector} | {r.effect.value} | {r.degradation.value} | "
                f"{', '.join(sorted(r.violated))} | {severed} |"
            )
    else:
        out.append("No impact to assess.")
    out.append("")

    out += ["## Components without evidence", ""]
    if report.zero_evidence:
        out += [f"- `{c}`" for c in report.zero_evidence]
    elif not report.components:
        out.append("The model has no components.")
    else:
        out.append("Every component has at least one matching record.")
    out.append("")
    return "\n".join(out)


def render_report(report: AssessmentReport, fmt: str = "json") -> str:
    if fmt == "json":
        return render_json(report)
    if fmt == "markdown":
        return render_markdown(report)
    raise ValueError(f"unknown report format {fmt!r}")
