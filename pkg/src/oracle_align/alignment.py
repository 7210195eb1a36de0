"""Alignment sets: parsing, writing, confusion counts and merging oracle decisions."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Mapping as TMapping
from xml.etree import ElementTree as ET
from xml.sax.saxutils import quoteattr, escape

RDF_NS = "http://www.w3.org/1999/02/22-rdf-syntax-ns#"
ALIGN_NS = "http://knowledgeweb.semanticweb.org/heterogeneity/alignment#"


class Relation(str, Enum):
    EQUIVALENCE = "equivalence"
    SUBSUMES = "subsumes"  # source ⊒ target
    SUBSUMED_BY = "subsumed-by"  # source ⊑ target

    @property
    def symbol(self) -> str:
        return _SYMBOLS[self]

    @classmethod
    def from_symbol(cls, symbol: str) -> "Relation":
        try:
            return _FROM_SYMBOL[symbol.strip()]
        except KeyError:
            raise ValueError(f"unknown relation symbol {symbol!r}") from None


_SYMBOLS = {Relation.EQUIVALENCE: "=", Relation.SUBSUMES: ">", Relation.SUBSUMED_BY: "<"}
_FROM_SYMBOL = {v: k for k, v in _SYMBOLS.items()}
_FROM_SYMBOL.update({"&lt;": Relation.SUBSUMED_BY, "&gt;": Relation.SUBSUMES})


class Decision(str, Enum):
    ACCEPT = "accept"
    REJECT = "reject"
    ABSTAIN = "abstain"


class Role(str, Enum):
    SYSTEM_OUTPUT = "system-output"
    ASK_SET = "ask-set"
    REFERENCE = "reference"


MappingKey = tuple  # (source, target, relation value)


class AlignmentFormatError(ValueError):
    """A located problem in an alignment file."""


@dataclass(frozen=True, eq=False)
class Mapping:
    source: str
    target: str
    relation: Relation = Relation.EQUIVALENCE
    confidence: float = 1.0

    def __post_init__(self):
        if not isinstance(self.relation, Relation):
            object.__setattr__(self, "relation", Relation(self.relation))
        c = self.confidence
        if not (isinstance(c, (int, float)) and math.isfinite(c) and 0.0 < c <= 1.0):
            raise ValueError(f"confidence must lie in (0, 1], got {c!r}")

    @property
    def key(self) -> MappingKey:
        return (self.source, self.target, self.relation.value)

    def __eq__(self, other):
        if not isinstance(other, Mapping):
            return NotImplemented
        return self.key == other.key

    def __hash__(self):
        return hash(self.key)

    def swapped(self) -> "Mapping":
        inverse = {
            Relation.EQUIVALENCE: Relation.EQUIVALENCE,
            Relation.SUBSUMES: Relation.SUBSUMED_BY,
            Relation.SUBSUMED_BY: Relation.SUBSUMES,
        }[self.relation]
        return Mapping(self.target, self.source, inverse, self.confidence)


class AlignmentSet:
    """Immutable set of mappings keyed by (source, target, relation).

    Adding a mapping whose key is already present keeps the higher confidence.
    """

    __slots__ = ("_by_key", "role")

    def __init__(self, mappings: Iterable[Mapping] = (), role: Role | str = Role.SYSTEM_OUTPUT):
        by_key: dict[MappingKey, Mapping] = {}
        for m in mappings:
            prev = by_key.get(m.key)
            if prev is None or m.confidence > prev.confidence:
                by_key[m.key] = m
        self._by_key = by_key
        self.role = Role(role)

    def __len__(self):
        return len(self._by_key)

    def __iter__(self) -> Iterator[Mapping]:
        return iter(self._by_key.values())

    def __contains__(self, item) -> bool:
        key = item.key if isinstance(item, Mapping) else tuple(item)
        return key in self._by_key

    def __eq__(self, other):
        if not isinstance(other, AlignmentSet):
            return NotImplemented
        return self._by_key.keys() == other._by_key.keys()

    def __repr__(self):
        return f"AlignmentSet({len(self)} mappings, role={self.role.value})"

    def keys(self) -> set[MappingKey]:
        return set(self._by_key)

    def get(self, key: MappingKey) -> Mapping | None:
        return self._by_key.get(tuple(key))

    def sorted(self) -> list[Mapping]:
        return [self._by_key[k] for k in sorted(self._by_key)]

    def equivalences(self) -> "AlignmentSet":
        return AlignmentSet((m for m in self if m.relation is Relation.EQUIVALENCE), self.role)

    def with_role(self, role: Role | str) -> "AlignmentSet":
        return AlignmentSet(self, role)

    def __and__(self, other: "AlignmentSet") -> "AlignmentSet":
        return AlignmentSet((m for m in self if m.key in other._by_key), self.role)

    def __or__(self, other: "AlignmentSet") -> "AlignmentSet":
        merged = dict(other._by_key)
        merged.update(self._by_key)  # left operand wins on confidence
        return AlignmentSet(merged.values(), self.role)

    def __sub__(self, other: "AlignmentSet") -> "AlignmentSet":
        return AlignmentSet((m for m in self if m.key not in other._by_key), self.role)


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def positives(self) -> int:
        """Ask mappings that are in the reference."""
        return self.tp + self.fn

    @property
    def negatives(self) -> int:
        return self.tn + self.fp


# ---------------------------------------------------------------------------
# parsing


def detect_format(path) -> str:
    suffix = Path(path).suffix.lower()
    return "tsv" if suffix in (".tsv", ".txt", ".tab") else "alignment-rdf"


def parse_alignment(path, format: str | None = None, role: Role | str = Role.SYSTEM_OUTPUT) -> AlignmentSet:
    fmt = format or detect_format(path)
    if fmt == "tsv":
        mappings = list(_parse_tsv(path))
    elif fmt in ("alignment-rdf", "rdf"):
        mappings = list(_parse_rdf(path))
    else:
        raise ValueError(f"unknown alignment format {fmt!r}")
    return AlignmentSet(mappings, role)


def _parse_tsv(path) -> Iterator[Mapping]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.split("\t")
            where = f"{path}:{lineno}"
            if len(fields) not in (3, 4):
                raise AlignmentFormatError(f"{where}: expected 3 or 4 tab-separated fields, got {len(fields)}")
            source, target, symbol = fields[:3]
            try:
                relation = Relation.from_symbol(symbol)
            except ValueError as exc:
                raise AlignmentFormatError(f"{where}: {exc}") from None
            confidence = 1.0
            if len(fields) == 4 and fields[3].strip():
                confidence = _confidence(fields[3], where)
            yield Mapping(source.strip(), target.strip(), relation, confidence)


def _confidence(text: str, where: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise AlignmentFormatError(f"{where}: confidence {text!r} is not a number") from None
    if not (math.isfinite(value) and 0.0 < value <= 1.0):
        raise AlignmentFormatError(f"{where}: confidence {value!r} outside (0, 1]")
    return value


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _parse_rdf(path) -> Iterator[Mapping]:
    resource = f"{{{RDF_NS}}}resource"
    about = f"{{{RDF_NS}}}about"
    n = 0
    try:
        for _, elem in ET.iterparse(path, events=("end",)):
            if _local(elem.tag) != "Cell":
                continue
            n += 1
            fields = {_local(child.tag): child for child in elem}
            ent1 = fields.get("entity1")
            ent2 = fields.get("entity2")
            source = ent1.get(resource) or ent1.get(about) or (ent1.text or "").strip() if ent1 is not None else ""
            target = ent2.get(resource) or ent2.get(about) or (ent2.text or "").strip() if ent2 is not None else ""
            where = f"{path}: Cell #{n} ({source or '?'} -> {target or '?'})"
            if not source or not target:
                raise AlignmentFormatError(f"{where}: missing entity1 or entity2")
            rel = fields.get("relation")
            try:
                relation = Relation.from_symbol(rel.text or "=") if rel is not None else Relation.EQUIVALENCE
            except ValueError as exc:
                raise AlignmentFormatError(f"{where}: {exc}") from None
            measure = fields.get("measure")
            confidence = 1.0
            if measure is not None and (measure.text or "").strip():
                confidence = _confidence(measure.text.strip(), where)
            yield Mapping(source, target, relation, confidence)
            elem.clear()
    except ET.ParseError as exc:
        raise AlignmentFormatError(f"{path}: malformed XML ({exc})") from None


# ---------------------------------------------------------------------------
# writing


def write_alignment(alignment: AlignmentSet, path, format: str | None = None,
                    onto1: str = "", onto2: str = "") -> Path:
    path = Path(path)
    fmt = format or detect_format(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "tsv":
        lines = [f"{m.source}\t{m.target}\t{m.relation.symbol}\t{m.confidence!r}\n" for m in alignment.sorted()]
        path.write_text("".join(lines), encoding="utf-8", newline="\n")
    else:
        path.write_text(_render_rdf(alignment, onto1, onto2), encoding="utf-8", newline="\n")
    return path


def _render_rdf(alignment: AlignmentSet, onto1: str, onto2: str) -> str:
    out = [
        "<?xml version='1.0' encoding='utf-8' standalone='no'?>\n",
        f"<rdf:RDF xmlns={quoteattr(ALIGN_NS)}\n",
        f"         xmlns:rdf={quoteattr(RDF_NS)}\n",
        "         xmlns:xsd='http://www.w3.org/2001/XMLSchema#'>\n",
        "<Alignment>\n",
        "  <xml>yes</xml>\n",
        "  <level>0</level>\n",
        "  <type>??</type>\n",
    ]
    if onto1:
        out.append(f"  <onto1>{escape(onto1)}</onto1>\n")
    if onto2:
        out.append(f"  <onto2>{escape(onto2)}</onto2>\n")
    for m in alignment.sorted():
        out += [
            "  <map>\n",
            "    <Cell>\n",
            f"      <entity1 rdf:resource={quoteattr(m.source)}/>\n",
            f"      <entity2 rdf:resource={quoteattr(m.target)}/>\n",
            f"      <relation>{escape(m.relation.symbol)}</relation>\n",
            f"      <measure rdf:datatype='http://www.w3.org/2001/XMLSchema#float'>{m.confidence!r}</measure>\n",
            "    </Cell>\n",
            "  </map>\n",
        ]
    out += ["</Alignment>\n", "</rdf:RDF>\n"]
    return "".join(out)


# ---------------------------------------------------------------------------
# scoring and merging


def confusion(ask: AlignmentSet, verdicts: TMapping[MappingKey, bool], reference: AlignmentSet) -> ConfusionCounts:
    """Cross the oracle's accept/reject verdicts on the ask set with reference membership."""
    missing = [m.key for m in ask if m.key not in verdicts]
    if missing:
        raise KeyError(f"no verdict for {len(missing)} ask mapping(s): {sorted(missing)[:10]}")
    tp = fp = tn = fn = 0
    for m in ask:
        correct = m in reference
        if verdicts[m.key]:
            if correct:
                tp += 1
            else:
                fp += 1
        elif correct:
            fn += 1
        else:
            tn += 1
    return ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)


def merge_decisions(base: AlignmentSet, ask: AlignmentSet,
                    verdicts: TMapping[MappingKey, Decision | str]) -> AlignmentSet:
    """Apply oracle decisions on the ask set to the base alignment.

    Accepted mappings are added, rejected ones removed. An abstention keeps
    whatever the base system decided for that mapping.
    """
    missing = [m.key for m in ask if m.key not in verdicts]
    if missing:
        raise KeyError(f"no decision for {len(missing)} ask mapping(s): {sorted(missing)[:10]}")
    kept = [m for m in base if m not in ask]
    for m in ask.sorted():
        decision = Decision(verdicts[m.key])
        in_base = base.get(m.key)
        if decision is Decision.ACCEPT:
            kept.append(in_base or m)
        elif decision is Decision.ABSTAIN and in_base is not None:
            kept.append(in_base)
    return AlignmentSet(kept, base.role)
