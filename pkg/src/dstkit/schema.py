"""Task schemas: domains, slots, descriptions, and deterministic description sampling.

A schema lists the domains and slots a tracker has to fill, together with
optional natural-language descriptions and, for categorical slots, the closed
set of admissible values. Schemas are read from SGD-style JSON files (a list
of services). All objects here are immutable after construction and safe to
share across threads.
"""
from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterator, Mapping, Sequence

logger = logging.getLogger(__name__)

PROVENANCE_TAGS = ("multiwoz21", "multiwoz22", "m2m", "custom")

# MultiWOZ domains that appear only in the training split; excluded by default.
DEFAULT_EXCLUDED_DOMAINS = frozenset({"police", "hospital"})


class SchemaError(ValueError):
    """Malformed or internally inconsistent schema input."""


def _check_name(name: str, what: str) -> None:
    if not isinstance(name, str) or not name.strip():
        raise SchemaError(f"{what} name must be a non-empty string, got {name!r}")
    if name != name.strip():
        raise SchemaError(f"{what} name {name!r} has surrounding whitespace")


@dataclass(frozen=True)
class SlotDef:
    """One slot of a domain.

    ``description`` is None when the source dataset provides none; it is never
    the empty string. ``possible_values`` is non-empty only for categorical
    slots.
    """

    name: str
    description: str | None = None
    is_categorical: bool = False
    possible_values: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        _check_name(self.name, "slot")
        if self.description is not None and not self.description:
            raise SchemaError(f"slot {self.name!r}: empty description, use None")
        if not self.is_categorical and self.possible_values:
            raise SchemaError(f"slot {self.name!r}: non-categorical slots carry no value list")
        if len(set(self.possible_values)) != len(self.possible_values):
            raise SchemaError(f"slot {self.name!r}: duplicate possible values")


@dataclass(frozen=True)
class DomainDef:
    """One domain with its slots, in source-file order."""

    name: str
    description: str | None = None
    slots: tuple[SlotDef, ...] = ()

    def __post_init__(self) -> None:
        _check_name(self.name, "domain")
        if self.description is not None and not self.description:
            raise SchemaError(f"domain {self.name!r}: empty description, use None")
        seen = set()
        for slot in self.slots:
            if slot.name in seen:
                raise SchemaError(f"domain {self.name!r}: duplicate slot {slot.name!r}")
            seen.add(slot.name)

    def slot(self, name: str) -> SlotDef:
        for s in self.slots:
            if s.name == name:
                return s
        raise KeyError(f"domain {self.name!r} has no slot {name!r}")

    def has_slot(self, name: str) -> bool:
        return any(s.name == name for s in self.slots)


@dataclass(frozen=True)
class Schema:
    """Ordered collection of domains; domain order defines canonical iteration order."""

    domains: tuple[DomainDef, ...]
    provenance: str = "custom"

    def __post_init__(self) -> None:
        if self.provenance not in PROVENANCE_TAGS:
            raise SchemaError(
                f"unknown provenance {self.provenance!r}, expected one of {PROVENANCE_TAGS}"
            )
        seen = set()
        for dom in self.domains:
            if dom.name in seen:
                raise SchemaError(f"duplicate domain {dom.name!r}")
            seen.add(dom.name)

    def domain(self, name: str) -> DomainDef:
        for d in self.domains:
            if d.name == name:
                return d
        raise KeyError(f"schema has no domain {name!r}")

    def has_domain(self, name: str) -> bool:
        return any(d.name == name for d in self.domains)

    def has_pair(self, domain: str, slot: str) -> bool:
        return self.has_domain(domain) and self.domain(domain).has_slot(slot)

    def slot(self, domain: str, slot: str) -> SlotDef:
        return self.domain(domain).slot(slot)

    def pairs(self) -> Iterator[tuple[DomainDef, SlotDef]]:
        """All (domain, slot) pairs in canonical (schema) order."""
        for dom in self.domains:
            for s in dom.slots:
                yield dom, s

    @property
    def num_categorical(self) -> int:
        return sum(1 for _, s in self.pairs() if s.is_categorical)

    @property
    def num_noncategorical(self) -> int:
        return sum(1 for _, s in self.pairs() if not s.is_categorical)


@dataclass(frozen=True)
class DescriptionConfig:
    """Toggles which schema text is woven into prompts.

    The three flags are independent so every ablation combination (names only,
    only slot descriptions, descriptions without value lists, ...) can be
    expressed. ``sampling_seed`` fixes the choice when a slot has several
    candidate descriptions.
    """

    use_domain_desc: bool = False
    use_slot_desc: bool = False
    use_value_list: bool = False
    sampling_seed: int = 0


def parse_schema(path: str | Path, provenance: str = "custom") -> Schema:
    """Read an SGD-format schema file (a JSON list of services).

    Each service carries ``service_name``, an optional ``description`` and a
    ``slots`` list of ``{name, description, is_categorical, possible_values}``.
    Missing or blank descriptions become None. A value list on a
    non-categorical slot is treated as annotation noise and dropped with a
    warning.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON: {exc}") from exc

    if not isinstance(raw, list):
        raise SchemaError(f"{path}: expected a top-level list of services")
    if not raw:
        raise SchemaError(f"{path}: schema file lists no domains")

    domains = []
    for service in raw:
        name = service.get("service_name") or service.get("name")
        if not name:
            raise SchemaError(f"{path}: service without a service_name: {service!r:.80}")
        slots = []
        for slot_raw in service.get("slots", []):
            slot_name = slot_raw.get("name")
            if not slot_name:
                raise SchemaError(f"{path}: domain {name!r}: slot without a name")
            is_cat = bool(slot_raw.get("is_categorical", False))
            values = tuple(str(v) for v in slot_raw.get("possible_values", []) or ())
            if values and not is_cat:
                logger.warning(
                    "%s: domain %s slot %s: dropping value list on non-categorical slot",
                    path, name, slot_name,
                )
                values = ()
            try:
                slots.append(
                    SlotDef(
                        name=slot_name,
                        description=_opt_text(slot_raw.get("description")),
                        is_categorical=is_cat,
                        possible_values=values,
                    )
                )
            except SchemaError as exc:
                raise SchemaError(f"{path}: domain {name!r}: {exc}") from exc
        try:
            domains.append(
                DomainDef(name=name, description=_opt_text(service.get("description")), slots=tuple(slots))
            )
        except SchemaError as exc:
            raise SchemaError(f"{path}: {exc}") from exc

    return Schema(domains=tuple(domains), provenance=provenance)


def _opt_text(value: object) -> str | None:
    if value is None:
        return None
    text = str(value)
    return text if text.strip() else None


def filter_domains(schema: Schema, excluded: Sequence[str] | frozenset[str]) -> Schema:
    """Drop the named domains; names absent from the schema are silently skipped."""
    excluded = set(excluded)
    kept = tuple(d for d in schema.domains if d.name not in excluded)
    if not kept:
        logger.warning("domain filter %s removed every domain", sorted(excluded))
    return replace(schema, domains=kept)


def load_description_table(path: str | Path) -> dict[tuple[str, str], list[str]]:
    """Read a candidate-description table: UTF-8 TSV with columns domain, slot, description.

    Several rows per (domain, slot) are allowed; row order defines candidate
    order for sampling. A row with an empty slot column describes the domain
    itself.
    """
    table: dict[tuple[str, str], list[str]] = {}
    path = Path(path)
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise SchemaError(f"{path}:{lineno}: expected 3 tab-separated columns, got {len(parts)}")
        domain, slot, desc = (p.strip() for p in parts)
        if not domain:
            raise SchemaError(f"{path}:{lineno}: empty domain")
        if not desc:
            raise SchemaError(f"{path}:{lineno}: empty description")
        table.setdefault((domain, slot), []).append(desc)
    return table


def _pick_candidate(candidates: Sequence[str], seed: int, domain: str, slot: str) -> str:
    # Keyed by (seed, domain, slot) so adding or removing one slot never
    # perturbs the choice made for any other slot.
    digest = hashlib.sha256(f"{seed}\x1f{domain}\x1f{slot}".encode("utf-8")).digest()
    return candidates[int.from_bytes(digest[:8], "big") % len(candidates)]


def resolve_descriptions(
    schema: Schema,
    overrides: Mapping[tuple[str, str], Sequence[str]] | None = None,
    config: DescriptionConfig = DescriptionConfig(),
) -> Schema:
    """Attach one description per slot, sampling deterministically among candidates.

    ``overrides`` maps (domain, slot) to candidate descriptions, e.g. loaded
    via :func:`load_description_table`; it replaces whatever description the
    schema already carries. An empty slot name addresses the domain's own
    description. References to unknown (domain, slot) pairs are an error.
    Pure function of (schema, overrides, config.sampling_seed).
    """
    overrides = dict(overrides or {})
    unknown = sorted(
        k for k in overrides
        if not (schema.has_domain(k[0]) if k[1] == "" else schema.has_pair(*k))
    )
    if unknown:
        raise SchemaError(f"description overrides reference unknown (domain, slot) pairs: {unknown}")

    domains = []
    for dom in schema.domains:
        slots = []
        for slot in dom.slots:
            candidates = overrides.get((dom.name, slot.name))
            if candidates:
                chosen = _pick_candidate(list(candidates), config.sampling_seed, dom.name, slot.name)
                slots.append(replace(slot, description=chosen))
            else:
                slots.append(slot)
        dom_candidates = overrides.get((dom.name, ""))
        new_desc = (
            _pick_candidate(list(dom_candidates), config.sampling_seed, dom.name, "")
            if dom_candidates
            else dom.description
        )
        domains.append(replace(dom, description=new_desc, slots=tuple(slots)))
    return replace(schema, domains=tuple(domains))


def schema_hash(schema: Schema) -> str:
    """Stable content hash of a schema, for run metadata."""
    payload = json.dumps(
        [
            {
                "name": d.name,
                "description": d.description,
                "slots": [
                    {
                        "name": s.name,
                        "description": s.description,
                        "is_categorical": s.is_categorical,
                        "possible_values": list(s.possible_values),
                    }
                    for s in d.slots
                ],
            }
            for d in schema.domains
        ],
        ensure_ascii=False,
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()
