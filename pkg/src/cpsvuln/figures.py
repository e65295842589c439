"""Figure and CSV output for scan reports.

Figures are drawn with the non-interactive Agg backend so they render on
headless machines. Every writer returns the paths it produced.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import networkx as nx  # noqa: E402

from .graph import IbdGraph  # noqa: E402
from .report import AssessmentReport  # noqa: E402

CSV_FIELDS = (
    "component", "vector", "effect", "required_privilege", "gained_privilege",
    "requires_user_interaction", "matched_term", "matched_field", "cwe", "capec",
)


def write_evidence_csv(report: AssessmentReport, path: str | Path) -> Path:
    """One row per evidence item, components in model order."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_FIELDS)
        for e in report.all_evidence():
            v = e.vector
            writer.writerow([
                e.component, v.id, v.effect.value, v.required_privilege.label,
                v.gained_privilege.label, str(v.requires_user_interaction).lower(),
                e.matched_term.text, e.matched_field,
                ";".join(sorted(e.lifted_weaknesses)), ";".join(sorted(e.lifted_patterns)),
            ])
    return path


def plot_evidence_counts(report: AssessmentReport, path: str | Path) -> Path:
    """Bar chart of evidence per cyber component, split by effect."""
    path = Path(path)
    comps = [c for c in report.components if c in report.evidence]
    effects = sorted({e.vector.effect.value for e in report.all_evidence()})
    fig, ax = plt.subplots(figsize=(max(4.0, 0.8 * len(comps) + 2), 3.5))
    bottom = [0] * len(comps)
    for effect in effects:
        counts = [sum(1 for e in report.evidence[c] if e.vector.effect.value == effect) for c in comps]
        ax.bar(comps, counts, bottom=bottom, label=effect.replace("_", " "))
        bottom = [b + n for b, n in zip(bottom, counts)]
    ax.set_ylabel("matching records")
    ax.set_title(f"Evidence by component: {report.model_name}")
    ax.tick_params(axis="x", labelrotation=45)
    if effects:
        ax.legend(fontsize="small")
    else:
        ax.text(0.5, 0.5, "no evidence", ha="center", va="center", transform=ax.transAxes)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_system_graph(report: AssessmentReport, graph: IbdGraph, path: str | Path) -> Path:
    """The system graph with attack-surface, violated, and severed elements marked.

    Violated vertices are the union over all impact results, so the figure
    shows the worst case across every piece of evidence.
    """
    path = Path(path)
    g = nx.MultiDiGraph()
    g.add_nodes_from(sorted(graph.V))
    for p in graph.ports():
        g.add_edge(graph.src[p], graph.tgt[p], key=p)
    violated = set().union(*(r.violated for r in report.impacts)) if report.impacts else set()
    severed = {link[0] for r in report.impacts for link in r.severed_links}
    surface = set(report.attack_surface)

    pos = nx.spring_layout(nx.Graph(g), seed=7) if g.number_of_nodes() else {}
    fig, ax = plt.subplots(figsize=(8, 6))
    colors = ["tab:red" if v in violated else "tab:blue" if graph.vertex_info(v).is_cyber else "tab:gray"
              for v in g.nodes]
    edgecolors = ["black" if v in surface else "none" for v in g.nodes]
    nx.draw_networkx_nodes(g, pos, ax=ax, node_color=colors, edgecolors=edgecolors, linewidths=2)
    nx.draw_networkx_labels(g, pos, ax=ax, font_size=7)
    plain = [(graph.src[p], graph.tgt[p]) for p in graph.ports() if p not in severed]
    cut = [(graph.src[p], graph.tgt[p]) for p in graph.ports() if p in severed]
    nx.draw_networkx_edges(g, pos, ax=ax, edgelist=plain, edge_color="gray", arrows=True)
    nx.draw_networkx_edges(g, pos, ax=ax, edgelist=cut, edge_color="tab:red", style="dashed", arrows=True)
    ax.set_title(f"{report.model_name}: red = violated, outlined = attack surface, dashed = severed")
    ax.axis("off")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def write_figures(report: AssessmentReport, graph: IbdGraph, directory: str | Path) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    return [
        write_evidence_csv(report, directory / "evidence.csv"),
        plot_evidence_counts(report, directory / "evidence_by_component.png"),
        plot_system_graph(report, graph, directory / "system_graph.png"),
    ]
