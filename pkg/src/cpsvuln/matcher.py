"""Query terms from component attributes, and evidence from the store.

A component is linked to an attack vector as soon as any single query term
occurs in the vector's summary or affected-product text; no combination of
attributes is required.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from typing import Mapping

from .modelfmt import SystemModel
from .schema import MATCHABLE_CATEGORIES, Category, CyberComponent, validate_component
from .vulndb import AttackVector, VulnStore, normalize_text

MIN_TERM_LENGTH = 3


def _load_stopwords() -> frozenset[str]:
    text = resources.files("cpsvuln").joinpath("data/stopwords.txt").read_text(encoding="utf-8")
    return frozenset(
        line.strip().lower() for line in text.splitlines() if line.strip() and not line.startswith("#")
    )


STOPWORDS = _load_stopwords()


@dataclass(frozen=True)
class QueryTerm:
    text: str
    component: str
    category: Category
    value: str

    def __post_init__(self) -> None:
        if self.text != normalize_text(self.text) or len(self.text) < MIN_TERM_LENGTH:
            raise ValueError(f"query term {self.text!r} is not normalized or too short")
        if Category(self.category) not in MATCHABLE_CATEGORIES:
            raise ValueError(f"{self.category} is not a matchable category")
        object.__setattr__(self, "category", Category(self.category))

    def to_dict(self) -> dict:
        return {"text": self.text, "component": self.component,
                "category": self.category.value, "value": self.value}

    @classmethod
    def from_dict(cls, d: Mapping) -> "QueryTerm":
        return cls(d["text"], d["component"], Category(d["category"]), d["value"])


@dataclass(frozen=True)
class Evidence:
    component: str
    vector: AttackVector
    matched_term: QueryTerm
    matched_field: str  # "summary" or "affected_products"
    lifted_weaknesses: frozenset[str] = frozenset()
    lifted_patterns: frozenset[str] = frozenset()

    @property
    def vector_id(self) -> str:
        return self.vector.id

    def to_dict(self) -> dict:
        return {
            "component": self.component,
            "vector": self.vector.to_dict(),
            "matched_term": self.matched_term.to_dict(),
            "matched_field": self.matched_field,
            "lifted_weaknesses": sorted(self.lifted_weaknesses),
            "lifted_patterns": sorted(self.lifted_patterns),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Evidence":
        return cls(
            component=d["component"],
            vector=AttackVector.from_dict(d["vector"]),
            matched_term=QueryTerm.from_dict(d["matched_term"]),
            matched_field=d["matched_field"],
            lifted_weaknesses=frozenset(d.get("lifted_weaknesses", ())),
            lifted_patterns=frozenset(d.get("lifted_patterns", ())),
        )


def _phrases(value: str) -> list[str]:
    """The whole value, then every word n-gram that neither starts nor ends
    with a stopword, longest first."""
    words = normalize_text(value).split()
    out = [" ".join(words)]
    for n in range(len(words) - 1, 0, -1):
        for i in range(len(words) - n + 1):
            gram = words[i:i + n]
            if gram[0] in STOPWORDS or gram[-1] in STOPWORDS:
                continue
            out.append(" ".join(gram))
    return out


def query_terms(component: CyberComponent) -> list[QueryTerm]:
    """Search terms for a cyber component, deterministic and duplicate free.

    Non-cyber components produce no terms.
    """
    if not component.is_cyber:
        return []
    violations = validate_component(component)
    if violations:
        raise ValueError(f"{component.id}: invalid component: {'; '.join(violations)}")
    seen: set[str] = set()
    terms = []
    for cat in MATCHABLE_CATEGORIES:
        for value in component.record.values(cat):
            for text in _phrases(value):
                if len(text) < MIN_TERM_LENGTH or text in seen:
                    continue
                seen.add(text)
                terms.append(QueryTerm(text, component.id, cat, value))
    return terms


def _rank(term: QueryTerm, field_: str, order: int) -> tuple:
    # longest term wins; summary hits beat product hits; then term order
    return (-len(term.text), 0 if field_ == "summary" else 1, order)


def match_component(component: CyberComponent, store: VulnStore) -> list[Evidence]:
    """Evidence for one component, one item per matching vector, by vector id."""
    best: dict[str, tuple[tuple, QueryTerm, str]] = {}
    for order, term in enumerate(query_terms(component)):
        for ident in store.candidates(term.text):
            text = store.texts[ident]
            if term.text in text.summary:
                field_ = "summary"
            elif any(term.text in p for p in text.products):
                field_ = "affected_products"
            else:
                continue
            rank = _rank(term, field_, order)
            if ident not in best or rank < best[ident][0]:
                best[ident] = (rank, term, field_)
    evidence = []
    for ident in sorted(best):
        _, term, field_ = best[ident]
        vector = store.records[ident]
        evidence.append(Evidence(
            component.id, vector, term, field_,
            frozenset(vector.weakness_ids), frozenset(vector.pattern_ids),
        ))
    return evidence


def match_model(model: SystemModel, store: VulnStore) -> dict[str, list[Evidence]]:
    """Evidence for every component; components without hits map to ``[]``."""
    return {comp.id: match_component(comp, store) for comp in model.components}
