"""Slow, obviously-correct reference implementations used as test oracles."""

from __future__ import annotations

import itertools

from cpsvuln.matcher import query_terms
from cpsvuln.vulndb import Privilege, Effect


def _norm(text: str) -> str:
    return " ".join(text.lower().split())


def brute_force_match(model, vectors) -> dict[str, list[tuple[str, str, str]]]:
    """Linear scan over every record for every query term.

    Returns ``{component: [(vector id, term text, field), ...]}`` sorted by
    vector id, using the same best-term preference as the matcher: longest
    term, then summary over products, then term order.
    """
    records = {v.id: v for v in vectors}  # later duplicates win, like the store
    out = {}
    for comp in model.components:
        best = {}
        for order, term in enumerate(query_terms(comp)):
            for ident, v in records.items():
                if term.text in _norm(v.summary):
                    where = "summary"
                elif any(term.text in _norm(p) for p in v.products_text):
                    where = "affected_products"
                else:
                    continue
                rank = (-len(term.text), where != "summary", order)
                if ident not in best or rank < best[ident][0]:
                    best[ident] = (rank, term.text, where)
        out[comp.id] = [(i, best[i][1], best[i][2]) for i in sorted(best)]
    return out


def chain_rule(a, b, adjacent) -> bool:
    """Restated pairwise rule, written without reference to the library."""
    va, vb = a.vector, b.vector
    if (a.component, va.id) == (b.component, vb.id):
        return False
    order = [Privilege.NONE, Privilege.USER, Privilege.SYSTEM]
    if order.index(va.gained_privilege) < order.index(vb.required_privilege):
        return False
    better = (
        order.index(vb.gained_privilege) > order.index(va.gained_privilege)
        or (va.requires_user_interaction and not vb.requires_user_interaction)
        or (vb.effect == Effect.CODE_EXECUTION and va.effect != Effect.CODE_EXECUTION)
    )
    near = a.component == b.component or adjacent(a.component, b.component)
    return better and near


def brute_force_chains(evidence, adjacent, max_steps: int) -> list[tuple[tuple[str, str], ...]]:
    """Every permutation of 2..max_steps distinct items, filtered by the rule."""
    items = list({(e.component, e.vector.id): e for e in evidence}.values())
    found = set()
    for n in range(2, max_steps + 1):
        for perm in itertools.permutations(items, n):
            if all(chain_rule(x, y, adjacent) for x, y in zip(perm, perm[1:])):
                found.add(tuple((e.component, e.vector.id) for e in perm))
    return sorted(found, key=lambda c: (len(c), c))
