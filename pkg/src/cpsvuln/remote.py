"""Client for a cve-search compatible HTTP API.

Only used when the caller passes an endpoint explicitly; nothing in the
offline pipeline touches the network. Results are returned as a list and are
merged into a store only by the caller.

Request: ``GET {endpoint}/api/search/{query}``. The response may be a JSON
list of records or an object holding the list under ``results`` or ``data``.
A record is either a cve-search document (``id``, ``summary``, ``cwe``,
``capec``, ``vulnerable_configuration``, ``access``, ``impact`` and an
optional ``cvss3_vector``) or an NVD 1.1 feed item.
"""

from __future__ import annotations

import logging
from typing import Mapping
from urllib.parse import quote

import requests

from .vulndb import (
    AttackVector,
    EntrySchemaError,
    Product,
    map_vector,
    parse_nvd11_item,
)

logger = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 10.0

_V3_FIELDS = {
    "AV": ("attackVector", {"N": "NETWORK", "A": "ADJACENT_NETWORK", "L": "LOCAL", "P": "PHYSICAL"}),
    "PR": ("privilegesRequired", {"N": "NONE", "L": "LOW", "H": "HIGH"}),
    "UI": ("userInteraction", {"N": "NONE", "R": "REQUIRED"}),
    "C": ("confidentialityImpact", {"N": "NONE", "L": "LOW", "H": "HIGH"}),
    "I": ("integrityImpact", {"N": "NONE", "L": "LOW", "H": "HIGH"}),
    "A": ("availabilityImpact", {"N": "NONE", "L": "LOW", "H": "HIGH"}),
}


class RemoteError(Exception):
    pass


class RemoteNetworkError(RemoteError):
    pass


class RemoteStatusError(RemoteError):
    def __init__(self, status: int, url: str):
        self.status = status
        self.url = url
        super().__init__(f"{url} answered HTTP {status}")


class RemoteSchemaError(RemoteError):
    pass


def parse_cvss3_vector(vector: str) -> dict[str, str]:
    parts = vector.split("/")
    if not parts or not parts[0].startswith("CVSS:3"):
        raise EntrySchemaError(f"not a CVSS v3 vector: {vector!r}")
    out = {}
    for part in parts[1:]:
        metric, _, value = part.partition(":")
        if metric in _V3_FIELDS:
            name, values = _V3_FIELDS[metric]
            if value not in values:
                raise EntrySchemaError(f"bad CVSS v3 value {part!r}")
            out[name] = values[value]
    return out


def parse_cve_search_record(record: Mapping) -> AttackVector:
    if "cve" in record and isinstance(record["cve"], Mapping):
        return parse_nvd11_item(record)
    try:
        ident = record["id"]
        summary = record["summary"]
    except (KeyError, TypeError):
        raise EntrySchemaError("record lacks id or summary") from None
    if not isinstance(ident, str) or not isinstance(summary, str):
        raise EntrySchemaError("id and summary must be text")
    cwe = record.get("cwe") or []
    weaknesses = [cwe] if isinstance(cwe, str) else list(cwe)
    capec = [c.get("id") if isinstance(c, Mapping) else c for c in record.get("capec") or ()]
    products = []
    for cpe in record.get("vulnerable_configuration") or ():
        uri = cpe.get("id") if isinstance(cpe, Mapping) else cpe
        if isinstance(uri, str):
            products.append(Product.from_cpe(uri))
    v3 = parse_cvss3_vector(record["cvss3_vector"]) if record.get("cvss3_vector") else None
    v2 = None
    access, impact = record.get("access") or {}, record.get("impact") or {}
    if access or impact:
        v2 = {"authentication": access.get("authentication", "NONE")}
        for k in ("confidentiality", "integrity", "availability"):
            v2[f"{k}Impact"] = impact.get(k, "NONE")
    return map_vector(ident, summary, products, weaknesses, [c for c in capec if c], v3, v2)


def fetch_remote(
    endpoint: str, query: str, timeout: float = DEFAULT_TIMEOUT, session: requests.Session | None = None
) -> list[AttackVector]:
    url = f"{endpoint.rstrip('/')}/api/search/{quote(query, safe='/')}"
    http = session or requests
    try:
        response = http.get(url, timeout=timeout, headers={"Accept": "application/json"})
    except requests.RequestException as exc:
        raise RemoteNetworkError(f"{url}: {exc}") from None
    if not 200 <= response.status_code < 300:
        raise RemoteStatusError(response.status_code, url)
    try:
        payload = response.json()
    except ValueError:
        raise RemoteSchemaError(f"{url}: response is not JSON") from None
    if isinstance(payload, Mapping):
        payload = payload.get("results", payload.get("data"))
    if not isinstance(payload, list):
        raise RemoteSchemaError(f"{url}: expected a list of records")
    vectors = []
    for n, record in enumerate(payload):
        try:
            vectors.append(parse_cve_search_record(record))
        except (EntrySchemaError, ValueError) as exc:
            logger.warning("%s: skipping record %d: %s", url, n, exc)
    return sorted(vectors, key=lambda v: v.id)
