"""Taxonomic scheme for cyber components.

Every programmable part of a cyber-physical system is described by the same
seven categories. Five of them (operating system through software) say what
the part *is* and are used to look up historic vulnerabilities; the other two
(communication, entry points) say how it interacts with the rest of the system.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator


class Category(str, enum.Enum):
    OPERATING_SYSTEM = "operating_system"
    DEVICE_NAME = "device_name"
    HARDWARE = "hardware"
    FIRMWARE = "firmware"
    SOFTWARE = "software"
    COMMUNICATION = "communication"
    ENTRY_POINTS = "entry_points"

    @property
    def short(self) -> str:
        return SHORT_NAMES[self]

    @property
    def is_set(self) -> bool:
        return self in SET_CATEGORIES


# schema order; serialization and flattening follow it
CATEGORIES: tuple[Category, ...] = tuple(Category)

SHORT_NAMES = {
    Category.OPERATING_SYSTEM: "os",
    Category.DEVICE_NAME: "device",
    Category.HARDWARE: "hardware",
    Category.FIRMWARE: "firmware",
    Category.SOFTWARE: "software",
    Category.COMMUNICATION: "comm",
    Category.ENTRY_POINTS: "entry",
}

ID_PATTERN = re.compile(r"[A-Za-z_][A-Za-z0-9_.-]*")

SET_CATEGORIES = frozenset({Category.COMMUNICATION, Category.ENTRY_POINTS})

# categories that name products and therefore produce query terms
MATCHABLE_CATEGORIES: tuple[Category, ...] = (
    Category.OPERATING_SYSTEM,
    Category.DEVICE_NAME,
    Category.HARDWARE,
    Category.FIRMWARE,
    Category.SOFTWARE,
)


class ValidationError(ValueError):
    """Raised when an object that must be valid is not."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations) or "invalid")


def _freeze(value, as_set: bool):
    if value is None:
        return None
    if isinstance(value, str):
        value = [value]
    if as_set:
        return frozenset(value)
    return tuple(value)


@dataclass(frozen=True)
class TaxonomicRecord:
    """The seven-category attribute row for one component.

    List categories keep their order; communication and entry points are
    sets. A category set to ``None`` is treated as missing and reported by
    :func:`validate_component`.
    """

    operating_system: tuple[str, ...] = ()
    device_name: tuple[str, ...] = ()
    hardware: tuple[str, ...] = ()
    firmware: tuple[str, ...] = ()
    software: tuple[str, ...] = ()
    communication: frozenset[str] = frozenset()
    entry_points: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        for cat in CATEGORIES:
            object.__setattr__(self, cat.value, _freeze(getattr(self, cat.value), cat.is_set))

    def values(self, category: Category | str) -> tuple[str, ...]:
        """Values of one category; sets come back sorted."""
        cat = Category(category)
        raw = getattr(self, cat.value)
        if raw is None:
            return ()
        return tuple(sorted(raw)) if cat.is_set else raw

    def is_empty(self) -> bool:
        return not any(self.values(cat) for cat in CATEGORIES)

    @classmethod
    def from_mapping(cls, mapping: dict) -> "TaxonomicRecord":
        """Build from a ``{category name: values}`` dict.

        Absent keys become missing categories rather than empty ones, so the
        omission surfaces during validation.
        """
        kwargs = {}
        for cat in CATEGORIES:
            kwargs[cat.value] = mapping.get(cat.value, mapping.get(cat))
        return cls(**kwargs)

    def to_mapping(self) -> dict[str, list[str]]:
        return {cat.value: list(self.values(cat)) for cat in CATEGORIES}


@dataclass(frozen=True)
class CyberComponent:
    id: str
    display_name: str = ""
    is_cyber: bool = True
    record: TaxonomicRecord = field(default_factory=TaxonomicRecord)
    function_note: str = ""


@dataclass(frozen=True)
class AttributeSet:
    """Flattened ``(category, value)`` pairs of one component.

    Pairs are kept in schema order (and list order within a category) so the
    record can be rebuilt exactly; comparison helpers treat it as a set.
    """

    entries: tuple[tuple[Category, str], ...] = ()

    def __iter__(self) -> Iterator[tuple[Category, str]]:
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, item) -> bool:
        if isinstance(item, str):
            return item in self.values()
        cat, value = item
        return (Category(cat), value) in self.entries

    def values(self) -> set[str]:
        return {value for _, value in self.entries}

    def as_set(self) -> frozenset[tuple[Category, str]]:
        return frozenset(self.entries)

    def by_category(self, category: Category | str) -> tuple[str, ...]:
        cat = Category(category)
        return tuple(v for c, v in self.entries if c is cat)

    def rebuild(self) -> TaxonomicRecord:
        grouped: dict[Category, list[str]] = {cat: [] for cat in CATEGORIES}
        for cat, value in self.entries:
            grouped[cat].append(value)
        return TaxonomicRecord(**{cat.value: grouped[cat] for cat in CATEGORIES})


def _category_violations(record: TaxonomicRecord) -> Iterable[str]:
    for cat in CATEGORIES:
        raw = getattr(record, cat.value)
        if raw is None:
            yield f"{cat.value}: category missing"
            continue
        seen: set[str] = set()
        for value in raw:
            if not isinstance(value, str):
                yield f"{cat.value}: value {value!r} is not text"
                continue
            if not value.strip():
                yield f"{cat.value}: empty value"
            elif value != value.strip():
                yield f"{cat.value}: value {value!r} not trimmed"
            elif any(ord(ch) < 32 or ord(ch) == 127 for ch in value):
                yield f"{cat.value}: value {value!r} contains control characters"
            if value in seen:
                yield f"{cat.value}: duplicate value {value!r}"
            seen.add(value)


def validate_record(record: TaxonomicRecord) -> list[str]:
    violations = list(_category_violations(record))
    comm, entry = record.communication, record.entry_points
    if comm is not None and entry is not None and not entry <= comm:
        extra = ", ".join(sorted(entry - comm))
        violations.append(f"entry_points not subset of communication (extra: {extra})")
    return violations


def validate_component(component: CyberComponent) -> list[str]:
    """Return a description of every broken rule; empty when valid."""
    violations: list[str] = []
    if not isinstance(component.id, str) or not ID_PATTERN.fullmatch(component.id):
        violations.append(f"id: {component.id!r} is not a machine name")
    record = component.record
    violations.extend(validate_record(record))
    if component.is_cyber:
        if record.device_name is not None and not record.device_name:
            violations.append("device_name: cyber component requires a device name")
    elif not record.is_empty():
        violations.append("record: non-cyber component must not carry attributes")
    return violations


def flatten_attributes(component: CyberComponent) -> AttributeSet:
    violations = validate_component(component)
    if violations:
        raise ValidationError([f"{component.id}: {v}" for v in violations])
    record = component.record
    return AttributeSet(tuple((cat, value) for cat in CATEGORIES for value in record.values(cat)))


def is_attack_surface(component: CyberComponent) -> bool:
    return bool(component.record.entry_points)
