"""Streaming loader for the lexical and hierarchical slice of an RDF/XML OWL ontology.

Only what is needed to put a mapping in context is kept: labels, synonyms and
named direct parents of every class, property and named individual. The file is
parsed with expat in a single pass, so memory tracks entity metadata rather than
raw file size (large comments, definitions and axioms are never buffered).
"""

from __future__ import annotations

import logging
import re
import warnings
from dataclasses import dataclass
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping
from xml.parsers import expat

log = logging.getLogger(__name__)

RDF = "http://www.w3.org/1999/02/22-rdf-syntax-ns#"
RDFS = "http://www.w3.org/2000/01/rdf-schema#"
OWL = "http://www.w3.org/2002/07/owl#"
SKOS = "http://www.w3.org/2004/02/skos/core#"
OBO_IN_OWL = "http://www.geneontology.org/formats/oboInOwl#"
NCI_THESAURUS = "http://ncicb.nci.nih.gov/xml/owl/EVS/Thesaurus.owl#"

TOP_ENTITIES = frozenset(
    {
        OWL + "Thing",
        OWL + "topObjectProperty",
        OWL + "topDataProperty",
        RDFS + "Resource",
    }
)

_CLASS_TYPES = {OWL + "Class": "class", RDFS + "Class": "class"}
_PROPERTY_TYPES = {
    OWL + "ObjectProperty": "property",
    OWL + "DatatypeProperty": "property",
    OWL + "FunctionalProperty": "property",
    OWL + "TransitiveProperty": "property",
    OWL + "SymmetricProperty": "property",
    RDF + "Property": "property",
}
_INDIVIDUAL_TYPES = {OWL + "NamedIndividual": "individual"}
_DECLARATIONS = {**_CLASS_TYPES, **_PROPERTY_TYPES, **_INDIVIDUAL_TYPES}

_NCI_TERM_NAME = re.compile(r"<ncicp:term-name>(.*?)</ncicp:term-name>", re.S)


class OntologyParseError(ValueError):
    """Raised for unreadable or malformed ontology files."""

    def __init__(self, path, message: str, byte_offset: int | None = None):
        self.path = str(path)
        self.byte_offset = byte_offset
        where = f" at byte offset {byte_offset}" if byte_offset is not None else ""
        super().__init__(f"{self.path}{where}: {message}")


@dataclass(frozen=True)
class LexicalConfig:
    """Which annotation properties provide labels and synonyms, in priority order."""

    label_properties: tuple[str, ...] = (RDFS + "label", SKOS + "prefLabel")
    synonym_properties: tuple[str, ...] = (
        OBO_IN_OWL + "hasExactSynonym",
        OBO_IN_OWL + "hasRelatedSynonym",
        OBO_IN_OWL + "hasBroadSynonym",
        SKOS + "altLabel",
        NCI_THESAURUS + "FULL_SYN",
    )

    @classmethod
    def from_dict(cls, data: Mapping | None) -> "LexicalConfig":
        if not data:
            return cls()
        default = cls()
        return cls(
            label_properties=tuple(data.get("label_properties", default.label_properties)),
            synonym_properties=tuple(data.get("synonym_properties", default.synonym_properties)),
        )


@dataclass(frozen=True)
class EntityRecord:
    iri: str
    kind: str
    labels: tuple[str, ...] = ()
    synonyms: tuple[str, ...] = ()
    direct_parents: tuple[str, ...] = ()

    @property
    def fragment(self) -> str:
        return iri_fragment(self.iri)


@dataclass(frozen=True)
class Ontology:
    entities: Mapping[str, EntityRecord]
    source_path: str = ""
    unresolved_references: tuple[str, ...] = ()

    @property
    def entity_count(self) -> int:
        return len(self.entities)

    def __contains__(self, iri: str) -> bool:
        return iri in self.entities

    def get(self, iri: str) -> EntityRecord | None:
        return self.entities.get(iri)


@dataclass(frozen=True)
class Lineage:
    level0: str
    level0_synonyms: tuple[str, ...] = ()
    level1: tuple[tuple[str, tuple[str, ...]], ...] = ()
    level2: tuple[tuple[str, tuple[str, ...]], ...] = ()


def iri_fragment(iri: str) -> str:
    """Local name of an IRI: text after the last '#', else after the last '/'."""
    for sep in ("#", "/"):
        if sep in iri:
            tail = iri.rsplit(sep, 1)[1]
            if tail:
                return tail
    return iri


def display_label(entity: EntityRecord) -> str:
    if entity.labels:
        return entity.labels[0]
    return entity.fragment


def _ordered_unique(values: Iterable[str]) -> list[str]:
    seen: set[str] = set()
    out = []
    for v in values:
        if v not in seen:
            seen.add(v)
            out.append(v)
    return out


def _sort_key(entity: EntityRecord) -> tuple[str, str]:
    return display_label(entity), entity.iri


def sorted_parents(entity: EntityRecord, ontology: Ontology) -> list[EntityRecord]:
    """Resolved direct parents ordered by display label, ties broken by IRI."""
    parents = [ontology.entities[p] for p in entity.direct_parents if p in ontology.entities]
    return sorted(parents, key=_sort_key)


def lineage(entity: EntityRecord, ontology: Ontology, depth: int = 2) -> Lineage:
    if depth not in (1, 2):
        raise ValueError(f"lineage depth must be 1 or 2, got {depth}")
    parents = sorted_parents(entity, ontology)
    level1 = tuple((display_label(p), p.synonyms) for p in parents)
    level2: tuple = ()
    if depth == 2 and parents:
        grand: dict[str, EntityRecord] = {}
        for p in parents:
            for g in sorted_parents(p, ontology):
                grand.setdefault(g.iri, g)
        level2 = tuple((display_label(g), g.synonyms) for g in sorted(grand.values(), key=_sort_key))
    return Lineage(
        level0=display_label(entity),
        level0_synonyms=entity.synonyms,
        level1=level1,
        level2=level2,
    )


# ---------------------------------------------------------------------------
# streaming parser


class _Builder:
    """Accumulates raw facts for one IRI across every element that describes it."""

    __slots__ = ("kind", "labels", "synonyms", "synonym_refs", "parents")

    def __init__(self):
        self.kind: str | None = None
        self.labels: dict[str, list[str]] = {}
        self.synonyms: list[str] = []
        self.synonym_refs: list[str] = []
        self.parents: list[str] = []


class _Handler:
    """expat callbacks; only top-level nodes and their direct property elements matter."""

    def __init__(self, config: LexicalConfig):
        self.label_props = set(config.label_properties)
        self.synonym_props = set(config.synonym_properties)
        self.builders: dict[str, _Builder] = {}
        self.base = ""
        self.depth = 0
        self.subject: _Builder | None = None
        self.prop: str | None = None
        self.prop_text: list[str] | None = None
        self.nested_labels: list[str] | None = None
        self.nested_text: list[str] | None = None

    def _absolute(self, value: str) -> str:
        if value == "" or value.startswith("#"):
            return self.base + value
        return value

    def _subject_iri(self, attrs: dict) -> str | None:
        about = attrs.get(RDF + " about")
        if about is not None:
            return self._absolute(about)
        ident = attrs.get(RDF + " ID")
        if ident is not None:
            return f"{self.base}#{ident}"
        return None

    def _add_type(self, type_iri: str):
        b = self.subject
        kind = _DECLARATIONS.get(type_iri)
        if kind is not None:
            if b.kind is None:
                b.kind = kind
        elif type_iri not in TOP_ENTITIES and not type_iri.startswith(OWL):
            b.parents.append(type_iri)  # asserted type of an individual

    def start(self, name: str, attrs: dict):
        self.depth += 1
        tag = name.replace(" ", "", 1)
        depth = self.depth
        if depth == 1:
            base = attrs.get("http://www.w3.org/XML/1998/namespace base")
            if base:
                self.base = base.rstrip("#")
        elif depth == 2:
            iri = self._subject_iri(attrs)
            if iri is None:
                self.subject = None  # anonymous node: axioms, restrictions
                return
            b = self.builders.get(iri)
            if b is None:
                b = self.builders[iri] = _Builder()
            self.subject = b
            if tag != RDF + "Description":
                self._add_type(tag)
        elif self.subject is None:
            return
        elif depth == 3:
            self.prop = tag
            self.prop_text = None
            self.nested_labels = None
            res = attrs.get(RDF + " resource")
            if res is not None:
                res = self._absolute(res)
                if tag == RDF + "type":
                    self._add_type(res)
                elif tag in (RDFS + "subClassOf", RDFS + "subPropertyOf"):
                    self.subject.parents.append(res)
                elif tag in self.synonym_props:
                    self.subject.synonym_refs.append(res)
            elif tag in self.label_props or tag in self.synonym_props:
                self.prop_text = []
        elif depth == 4 and self.prop in self.synonym_props:
            # synonym given as a nested node carrying its own label
            self.prop_text = None
            self.nested_labels = []
        elif depth == 5 and self.nested_labels is not None and tag in self.label_props:
            self.nested_text = []

    def end(self, name: str):
        depth = self.depth
        self.depth -= 1
        if depth == 2:
            self.subject = None
            return
        if self.subject is None:
            return
        if depth == 5 and self.nested_text is not None:
            text = "".join(self.nested_text).strip()
            if text:
                self.nested_labels.append(text)
            self.nested_text = None
        elif depth == 4 and self.nested_labels is not None:
            self.subject.synonyms.extend(self.nested_labels)
            self.nested_labels = None
        elif depth == 3:
            if self.prop_text is not None:
                text = "".join(self.prop_text).strip()
                if text:
                    if self.prop in self.label_props:
                        self.subject.labels.setdefault(self.prop, []).append(text)
                    else:
                        self.subject.synonyms.extend(_split_synonym(text))
            self.prop = None
            self.prop_text = None

    def chars(self, data: str):
        if self.nested_text is not None:
            self.nested_text.append(data)
        elif self.prop_text is not None and self.depth == 3:
            self.prop_text.append(data)


def _split_synonym(text: str) -> list[str]:
    # NCI FULL_SYN carries an escaped XML literal with the term inside
    if "<ncicp:term-name>" in text:
        return [m.strip() for m in _NCI_TERM_NAME.findall(text) if m.strip()]
    return [text]


def load_ontology(path, lexical_config: LexicalConfig | None = None, chunk_size: int = 1 << 20) -> Ontology:
    """Stream-parse an RDF/XML ontology into an immutable :class:`Ontology`."""
    config = lexical_config or LexicalConfig()
    path = Path(path)
    handler = _Handler(config)
    parser = expat.ParserCreate(namespace_separator=" ")
    parser.buffer_text = True
    parser.StartElementHandler = handler.start
    parser.EndElementHandler = handler.end
    parser.CharacterDataHandler = handler.chars
    try:
        fh = open(path, "rb")
    except OSError as exc:
        raise OntologyParseError(path, f"cannot read file ({exc.strerror or exc})") from exc
    with fh:
        try:
            while True:
                chunk = fh.read(chunk_size)
                parser.Parse(chunk, not chunk)
                if not chunk:
                    break
        except expat.ExpatError as exc:
            raise OntologyParseError(
                path,
                f"malformed XML: {expat.ErrorString(exc.code)} (line {exc.lineno}, column {exc.offset})",
                byte_offset=parser.ErrorByteIndex,
            ) from exc
    return _finalize(handler, config, str(path))


def _finalize(handler: _Handler, config: LexicalConfig, source_path: str) -> Ontology:
    entities: dict[str, EntityRecord] = {}
    for iri, b in handler.builders.items():
        if b.kind is None:
            continue
        labels: list[str] = []
        for prop in config.label_properties:
            labels.extend(sorted(set(b.labels.get(prop, ()))))
        labels = _ordered_unique(labels)
        syns = list(b.synonyms)
        for ref in b.synonym_refs:
            node = handler.builders.get(ref)
            if node is not None:
                for prop in config.label_properties:
                    syns.extend(node.labels.get(prop, ()))
        label_set = set(labels)
        synonyms = [s for s in _ordered_unique(syns) if s not in label_set]
        parents = [p for p in _ordered_unique(b.parents) if p not in TOP_ENTITIES and p != iri]
        entities[iri] = EntityRecord(
            iri=iri,
            kind=b.kind,
            labels=tuple(labels),
            synonyms=tuple(synonyms),
            direct_parents=tuple(parents),
        )
    unresolved = sorted({p for e in entities.values() for p in e.direct_parents if p not in entities})
    if unresolved:
        log.info("%s: %d parent references do not resolve to loaded entities", source_path, len(unresolved))
    if not entities:
        warnings.warn(f"{source_path}: no entities found", stacklevel=3)
    return Ontology(
        entities=MappingProxyType(entities),
        source_path=source_path,
        unresolved_references=tuple(unresolved),
    )
