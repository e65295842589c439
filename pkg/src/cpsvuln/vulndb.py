"""Historic vulnerability records and a searchable local store.

Records come from NVD-style JSON feeds (the 1.1 ``CVE_Items`` feed files and
the 2.0 API ``vulnerabilities`` layout) or from a cve-search compatible HTTP
API. Every source goes through the same mapping onto :class:`AttackVector`:

==========================  ==================================================
field                       source
==========================  ==================================================
``required_privilege``      CVSS v3 ``privilegesRequired`` NONE/LOW/HIGH ->
                            none/user/system; otherwise CVSS v2
                            ``authentication`` NONE -> none, else user
``requires_user_interaction``  CVSS v3 ``userInteraction == REQUIRED``;
                            otherwise v2 ``userInteractionRequired``
``effect``                  first keyword group found in the description, in
                            the order of ``EFFECT_KEYWORDS``; without a hit,
                            the CVSS impact triad decides
``gained_privilege``        none for denial of service and disclosure;
                            system when the text names kernel/root/system
                            context, v2 ``obtainAllPrivilege`` is set, or all
                            three impacts are HIGH/COMPLETE; user otherwise;
                            never below ``required_privilege``
==========================  ==================================================
"""

from __future__ import annotations

import enum
import hashlib
import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping

logger = logging.getLogger(__name__)

FIXTURE_DIR = Path(__file__).parent / "fixtures" / "vulndb"


class Privilege(enum.IntEnum):
    NONE = 0
    USER = 1
    SYSTEM = 2

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, text: str | int | "Privilege") -> "Privilege":
        if isinstance(text, int):
            return cls(text)
        return cls[str(text).upper()]


class Effect(str, enum.Enum):
    CODE_EXECUTION = "code_execution"
    PRIVILEGE_GAIN = "privilege_gain"
    DENIAL_OF_SERVICE = "denial_of_service"
    INFORMATION_DISCLOSURE = "information_disclosure"


EFFECT_KEYWORDS: tuple[tuple[Effect, tuple[str, ...]], ...] = (
    (Effect.CODE_EXECUTION, (
        "execute arbitrary code", "execute arbitrary commands", "code execution",
        "execution of arbitrary code", "load and execute",
    )),
    (Effect.PRIVILEGE_GAIN, (
        "gain privileges", "elevation of privilege", "escalation of privilege",
        "privilege escalation", "elevate privileges", "escalate privileges",
        "gain system privileges", "gain root",
    )),
    (Effect.DENIAL_OF_SERVICE, ("denial of service", "denial-of-service", "application crash")),
    (Effect.INFORMATION_DISCLOSURE, (
        "obtain sensitive information", "information disclosure", "obtain cleartext",
        "decrypt", "obtain the encryption key", "read arbitrary",
    )),
)

_SYSTEM_CONTEXT = re.compile(r"\b(kernel|root|system privileges|administrator|superuser)\b")
_V3_PRIVILEGE = {"NONE": Privilege.NONE, "LOW": Privilege.USER, "HIGH": Privilege.SYSTEM}


class IngestError(ValueError):
    """A feed file that cannot be read at all."""


class EntrySchemaError(ValueError):
    """One feed entry does not follow the expected layout."""


@dataclass(frozen=True)
class Product:
    vendor: str
    product: str
    version: str = ""

    @property
    def text(self) -> str:
        return " ".join(p for p in (self.vendor, self.product, self.version) if p)

    @classmethod
    def from_cpe(cls, uri: str, version_range: str = "") -> "Product":
        """Product from a CPE 2.3 formatted string or a CPE 2.2 URI."""
        if uri.startswith("cpe:2.3:"):
            parts = re.split(r"(?<!\\):", uri)[3:]
        elif uri.startswith("cpe:/"):
            parts = uri[len("cpe:/"):].split(":")[1:]
        else:
            raise EntrySchemaError(f"not a CPE name: {uri!r}")
        if len(parts) < 2:
            raise EntrySchemaError(f"CPE name lacks vendor/product: {uri!r}")
        vendor, product = parts[0], parts[1]
        version = parts[2] if len(parts) > 2 else "*"
        if version in ("*", "-", ""):
            version = version_range

        def clean(field_: str) -> str:
            return field_.replace("\\", "").replace("_", " ")

        return cls(clean(vendor), clean(product), clean(version))


@dataclass(frozen=True)
class AttackVector:
    id: str
    summary: str
    affected_products: tuple[Product, ...] = ()
    weakness_ids: tuple[str, ...] = ()
    pattern_ids: tuple[str, ...] = ()
    required_privilege: Privilege = Privilege.NONE
    gained_privilege: Privilege = Privilege.NONE
    requires_user_interaction: bool = False
    effect: Effect = Effect.INFORMATION_DISCLOSURE

    def __post_init__(self) -> None:
        object.__setattr__(self, "id", self.id.strip().upper())
        object.__setattr__(self, "affected_products", tuple(self.affected_products))
        object.__setattr__(self, "weakness_ids", tuple(self.weakness_ids))
        object.__setattr__(self, "pattern_ids", tuple(self.pattern_ids))
        object.__setattr__(self, "required_privilege", Privilege.parse(self.required_privilege))
        object.__setattr__(self, "gained_privilege", Privilege.parse(self.gained_privilege))
        object.__setattr__(self, "effect", Effect(self.effect))
        if self.effect in (Effect.PRIVILEGE_GAIN, Effect.CODE_EXECUTION) and (
            self.gained_privilege < self.required_privilege
        ):
            raise ValueError(f"{self.id}: gained privilege below required privilege")

    @property
    def products_text(self) -> tuple[str, ...]:
        return tuple(p.text for p in self.affected_products)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "summary": self.summary,
            "affected_products": [
                {"vendor": p.vendor, "product": p.product, "version": p.version}
                for p in self.affected_products
            ],
            "weakness_ids": list(self.weakness_ids),
            "pattern_ids": list(self.pattern_ids),
            "required_privilege": self.required_privilege.label,
            "gained_privilege": self.gained_privilege.label,
            "requires_user_interaction": self.requires_user_interaction,
            "effect": self.effect.value,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "AttackVector":
        return cls(
            id=d["id"],
            summary=d["summary"],
            affected_products=tuple(Product(**p) for p in d.get("affected_products", ())),
            weakness_ids=tuple(d.get("weakness_ids", ())),
            pattern_ids=tuple(d.get("pattern_ids", ())),
            required_privilege=Privilege.parse(d.get("required_privilege", "none")),
            gained_privilege=Privilege.parse(d.get("gained_privilege", "none")),
            requires_user_interaction=bool(d.get("requires_user_interaction", False)),
            effect=Effect(d.get("effect", Effect.INFORMATION_DISCLOSURE.value)),
        )


# -- text normalization and indexes -----------------------------------------

def normalize_text(text: str) -> str:
    return " ".join(text.lower().split())


_TOKEN = re.compile(r"[a-z0-9]+(?:[._-][a-z0-9]+)*")


def tokenize(text: str) -> set[str]:
    return set(_TOKEN.findall(normalize_text(text)))


def trigrams(text: str) -> set[str]:
    return {text[i:i + 3] for i in range(len(text) - 2)}


@dataclass(frozen=True)
class SearchText:
    """Normalized, lowercase fields of one record used for matching."""

    summary: str
    products: tuple[str, ...]

    @classmethod
    def of(cls, vector: AttackVector) -> "SearchText":
        return cls(normalize_text(vector.summary), tuple(normalize_text(t) for t in vector.products_text))


@dataclass
class VulnStore:
    """Write-once collection of attack vectors with two indexes.

    ``token_index`` maps whole words to record ids; ``gram_index`` maps
    character trigrams to record ids and narrows substring searches to
    candidates before the exact containment check.
    """

    records: dict[str, AttackVector] = field(default_factory=dict)
    texts: dict[str, SearchText] = field(default_factory=dict)
    token_index: dict[str, set[str]] = field(default_factory=dict)
    gram_index: dict[str, set[str]] = field(default_factory=dict)

    @classmethod
    def from_vectors(cls, vectors: Iterable[AttackVector]) -> "VulnStore":
        store = cls()
        for vector in vectors:
            store._put(vector)
        return store

    def _put(self, vector: AttackVector) -> None:
        if vector.id in self.records:
            self._drop(vector.id)
        self.records[vector.id] = vector
        text = SearchText.of(vector)
        self.texts[vector.id] = text
        for token in tokenize(" ".join((vector.summary, *vector.products_text))):
            self.token_index.setdefault(token, set()).add(vector.id)
        grams = trigrams(text.summary)
        for product in text.products:
            grams |= trigrams(product)
        for gram in grams:
            self.gram_index.setdefault(gram, set()).add(vector.id)

    def _drop(self, ident: str) -> None:
        del self.records[ident]
        del self.texts[ident]
        for index in (self.token_index, self.gram_index):
            for key in [k for k, ids in index.items() if ident in ids]:
                index[key].discard(ident)
                if not index[key]:
                    del index[key]

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[AttackVector]:
        return (self.records[k] for k in sorted(self.records))

    def __eq__(self, other) -> bool:
        if not isinstance(other, VulnStore):
            return NotImplemented
        return self.records == other.records

    def ids(self) -> list[str]:
        return sorted(self.records)

    def search_token(self, token: str) -> set[str]:
        return set(self.token_index.get(token.lower(), ()))

    def candidates(self, term: str) -> set[str]:
        """Ids of records that might contain ``term``; a superset of the hits."""
        term = normalize_text(term)
        if len(term) < 3:
            return set(self.records)
        grams = sorted(trigrams(term), key=lambda g: len(self.gram_index.get(g, ())))
        result: set[str] | None = None
        for gram in grams:
            ids = self.gram_index.get(gram)
            if not ids:
                return set()
            result = set(ids) if result is None else result & ids
            if not result:
                return set()
        return result or set()

    def search(self, term: str) -> list[AttackVector]:
        """Records whose summary or any affected product contains ``term``."""
        needle = normalize_text(term)
        hits = []
        for ident in sorted(self.candidates(needle)):
            text = self.texts[ident]
            if needle in text.summary or any(needle in p for p in text.products):
                hits.append(self.records[ident])
        return hits

    def version_hash(self) -> str:
        payload = json.dumps([v.to_dict() for v in self], sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def lookup(store: VulnStore, ident: str) -> AttackVector | None:
    """Record by id, compared case-insensitively; ``None`` when absent."""
    return store.records.get(ident.strip().upper())


def lift(store: VulnStore, ident: str) -> tuple[frozenset[str], frozenset[str]]:
    vector = lookup(store, ident)
    if vector is None:
        raise KeyError(ident)
    return frozenset(vector.weakness_ids), frozenset(vector.pattern_ids)


# -- feed mapping ------------------------------------------------------------

def classify_effect(description: str, impacts: Mapping[str, str] | None = None) -> Effect:
    text = normalize_text(description)
    for effect, keywords in EFFECT_KEYWORDS:
        if any(k in text for k in keywords):
            return effect
    impacts = impacts or {}
    affected = {"HIGH", "COMPLETE", "PARTIAL", "LOW"}
    if impacts.get("integrity") in affected:
        return Effect.PRIVILEGE_GAIN
    if impacts.get("availability") in affected and impacts.get("confidentiality") not in affected:
        return Effect.DENIAL_OF_SERVICE
    return Effect.INFORMATION_DISCLOSURE


def _gained(effect: Effect, description: str, impacts: Mapping[str, str], all_priv: bool,
            required: Privilege) -> Privilege:
    if effect in (Effect.DENIAL_OF_SERVICE, Effect.INFORMATION_DISCLOSURE):
        return Privilege.NONE
    full = all(impacts.get(k) in ("HIGH", "COMPLETE") for k in ("confidentiality", "integrity", "availability"))
    if all_priv or full or _SYSTEM_CONTEXT.search(normalize_text(description)):
        gained = Privilege.SYSTEM
    else:
        gained = Privilege.USER
    return max(gained, required)


def map_vector(
    ident: str,
    description: str,
    products: Iterable[Product],
    weaknesses: Iterable[str],
    patterns: Iterable[str],
    v3: Mapping | None,
    v2: Mapping | None,
    v2_flags: Mapping | None = None,
) -> AttackVector:
    """Apply the documented mapping table to already-extracted feed fields."""
    v2_flags = v2_flags or {}
    if v3:
        required = _V3_PRIVILEGE.get(str(v3.get("privilegesRequired", "NONE")).upper(), Privilege.NONE)
        interaction = str(v3.get("userInteraction", "NONE")).upper() == "REQUIRED"
        impacts = {k: str(v3.get(f"{k}Impact", "NONE")).upper()
                   for k in ("confidentiality", "integrity", "availability")}
    elif v2:
        required = Privilege.NONE if str(v2.get("authentication", "NONE")).upper() == "NONE" else Privilege.USER
        interaction = bool(v2_flags.get("userInteractionRequired", False))
        impacts = {k: str(v2.get(f"{k}Impact", "NONE")).upper()
                   for k in ("confidentiality", "integrity", "availability")}
    else:
        required, interaction, impacts = Privilege.NONE, False, {}
    effect = classify_effect(description, impacts)
    gained = _gained(effect, description, impacts, bool(v2_flags.get("obtainAllPrivilege")), required)
    weak = []
    for w in weaknesses:
        w = w.strip()
        if re.fullmatch(r"CWE-\d+", w, re.IGNORECASE) and w.upper() not in weak:
            weak.append(w.upper())
    pats = []
    for p in patterns:
        p = str(p).strip().upper()
        if p.isdigit():
            p = f"CAPEC-{p}"
        if re.fullmatch(r"CAPEC-\d+", p) and p not in pats:
            pats.append(p)
    return AttackVector(
        id=ident,
        summary=description,
        affected_products=tuple(dict.fromkeys(products)),
        weakness_ids=tuple(weak),
        pattern_ids=tuple(pats),
        required_privilege=required,
        gained_privilege=gained,
        requires_user_interaction=interaction,
        effect=effect,
    )


def _range_text(match: Mapping) -> str:
    parts = []
    for key, op in (("versionStartIncluding", ">="), ("versionStartExcluding", ">"),
                    ("versionEndIncluding", "<="), ("versionEndExcluding", "<")):
        if match.get(key):
            parts.append(f"{op}{match[key]}")
    return " ".join(parts)


def _walk_nodes(nodes) -> Iterator[Mapping]:
    for node in nodes or ():
        yield from node.get("cpe_match", ()) or ()
        yield from node.get("cpeMatch", ()) or ()
        yield from _walk_nodes(node.get("children"))


def _products(matches: Iterable[Mapping]) -> list[Product]:
    out = []
    for match in matches:
        if not match.get("vulnerable", True):
            continue
        uri = match.get("cpe23Uri") or match.get("criteria")
        if not isinstance(uri, str):
            raise EntrySchemaError("cpe match without a CPE name")
        out.append(Product.from_cpe(uri, _range_text(match)))
    return out


def _english(entries) -> str:
    for entry in entries or ():
        if entry.get("lang", "en") == "en" and entry.get("value"):
            return entry["value"]
    raise EntrySchemaError("no English description")


def parse_nvd11_item(item: Mapping) -> AttackVector:
    try:
        cve = item["cve"]
        ident = cve["CVE_data_meta"]["ID"]
        description = _english(cve["description"]["description_data"])
        weaknesses = [
            d["value"]
            for pt in cve.get("problemtype", {}).get("problemtype_data", ())
            for d in pt.get("description", ())
        ]
        configurations = item.get("configurations") or {}
        products = _products(_walk_nodes(configurations.get("nodes")))
        impact = item.get("impact") or {}
        v3 = (impact.get("baseMetricV3") or {}).get("cvssV3")
        v2_block = impact.get("baseMetricV2") or {}
        v2 = v2_block.get("cvssV2")
    except (KeyError, TypeError, AttributeError) as exc:
        raise EntrySchemaError(f"missing or malformed field: {exc}") from None
    if not isinstance(ident, str) or not re.fullmatch(r"CVE-\d{4}-\d{4,}", ident.strip(), re.IGNORECASE):
        raise EntrySchemaError(f"bad CVE id {ident!r}")
    return map_vector(ident, description, products, weaknesses, item.get("capec", ()), v3, v2, v2_block)


def parse_nvd20_item(item: Mapping) -> AttackVector:
    try:
        cve = item["cve"]
        ident = cve["id"]
        description = _english(cve["descriptions"])
        weaknesses = [d["value"] for w in cve.get("weaknesses", ()) for d in w.get("description", ())]
        nodes = [n for conf in cve.get("configurations", ()) for n in conf.get("nodes", ())]
        products = _products(_walk_nodes(nodes))
        metrics = cve.get("metrics", {})
        v3_list = metrics.get("cvssMetricV31") or metrics.get("cvssMetricV30") or []
        v3 = v3_list[0]["cvssData"] if v3_list else None
        v2_list = metrics.get("cvssMetricV2") or []
        v2_block = v2_list[0] if v2_list else {}
        v2 = v2_block.get("cvssData")
    except (KeyError, TypeError, AttributeError, IndexError) as exc:
        raise EntrySchemaError(f"missing or malformed field: {exc}") from None
    if not isinstance(ident, str) or not re.fullmatch(r"CVE-\d{4}-\d{4,}", ident.strip(), re.IGNORECASE):
        raise EntrySchemaError(f"bad CVE id {ident!r}")
    return map_vector(ident, description, products, weaknesses, item.get("capec", ()), v3, v2, v2_block)


def _feed_entries(doc) -> tuple[list, callable]:
    if not isinstance(doc, dict):
        raise IngestError("feed must be a JSON object")
    if isinstance(doc.get("CVE_Items"), list):
        return doc["CVE_Items"], parse_nvd11_item
    if isinstance(doc.get("vulnerabilities"), list):
        return doc["vulnerabilities"], parse_nvd20_item
    raise IngestError("feed has neither CVE_Items nor vulnerabilities list")


def read_feed(document: str | bytes | Path | Mapping) -> list[AttackVector]:
    """Parse one feed; malformed entries are skipped with a warning."""
    source = "<document>"
    if isinstance(document, Path):
        source = str(document)
        try:
            document = document.read_bytes()
        except OSError as exc:
            raise IngestError(f"{source}: {exc}") from None
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise IngestError(f"{source}: not valid JSON: {exc}") from None
    entries, parse = _feed_entries(document)
    vectors = []
    for n, entry in enumerate(entries):
        try:
            vectors.append(parse(entry))
        except (EntrySchemaError, ValueError) as exc:
            logger.warning("%s: skipping entry %d: %s", source, n, exc)
    return vectors


def ingest_nvd(feeds: Iterable | str | bytes | Path | Mapping) -> VulnStore:
    """Build a store from one or more feed documents.

    A later record with the same id replaces an earlier one, so ingesting a
    feed twice yields the same store.
    """
    if isinstance(feeds, (str, bytes, Path, Mapping)):
        feeds = [feeds]
    vectors: list[AttackVector] = []
    for feed in feeds:
        vectors.extend(read_feed(feed))
    return VulnStore.from_vectors(vectors)


def load_store(directory: str | Path) -> VulnStore:
    """Ingest every ``*.json`` feed in ``directory`` in name order."""
    directory = Path(directory)
    if not directory.is_dir():
        raise IngestError(f"{directory}: not a directory")
    return ingest_nvd(sorted(directory.glob("*.json")))


def load_fixture_store() -> VulnStore:
    return load_store(FIXTURE_DIR)
