"""Ontology-driven prompt templates for asking an oracle about one candidate mapping.

Six templates combine three switches: natural-language phrasing (NLF), an
extended two-level parent context (EC) and explicit synonyms (S). Template
frames live in ``templates/`` as text resources; the per-entity clauses that
differ between templates are assembled here. Output is byte-deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from importlib import resources
from string import Template
from typing import Mapping as TMapping

import yaml

from .alignment import Mapping, MappingKey
from .ontology import EntityRecord, Lineage, Ontology, lineage

TEMPLATE_VERSION = "1"
MAX_SYNONYMS = 4
TOP_LEVEL = "a top-level concept"
ANSWER_CLAUSE = 'Respond with "True" or "False".'


class PromptTemplateId(str, Enum):
    P = "P"
    P_EC = "P_EC"
    P_NLF = "P_NLF"
    P_NLF_EC = "P_NLF_EC"
    P_NLF_S = "P_NLF_S"
    P_NLF_EC_S = "P_NLF_EC_S"

    @property
    def nlf(self) -> bool:
        return self.value.startswith("P_NLF")

    @property
    def extended_context(self) -> bool:
        return self in (PromptTemplateId.P_EC, PromptTemplateId.P_NLF_EC, PromptTemplateId.P_NLF_EC_S)

    @property
    def synonyms(self) -> bool:
        return self in (PromptTemplateId.P_NLF_S, PromptTemplateId.P_NLF_EC_S)


class SystemPromptId(str, Enum):
    NONE = "none"
    OM_EXPERT = "om-expert"
    BIOMEDICAL_SPECIALIST = "biomedical-specialist"
    SYNONYM_AWARE = "synonym-aware"
    EXPLAIN_NLF = "explain-nlf"


class PromptError(LookupError):
    pass


@dataclass(frozen=True)
class PromptInstance:
    template: PromptTemplateId
    system: SystemPromptId
    user_text: str
    system_text: str | None
    mapping_key: MappingKey


@lru_cache(maxsize=None)
def _frame(name: str) -> Template:
    text = resources.files(__package__).joinpath(f"templates/{name}.txt").read_text(encoding="utf-8")
    return Template(text.replace("\r\n", "\n").removesuffix("\n"))


@lru_cache(maxsize=None)
def _default_system_texts() -> dict[str, str]:
    raw = resources.files(__package__).joinpath("templates/system_prompts.yaml").read_text(encoding="utf-8")
    return dict(yaml.safe_load(raw))


def system_text(system: SystemPromptId | str, overrides: TMapping[str, str] | None = None) -> str | None:
    system = SystemPromptId(system)
    if system is SystemPromptId.NONE:
        return None
    if overrides and system.value in overrides:
        return overrides[system.value]
    return _default_system_texts()[system.value]


# ---------------------------------------------------------------------------
# clause helpers


def _quoted(values) -> str:
    return ", ".join(f'"{v}"' for v in values)


def _cap(synonyms, by_length: bool = False) -> list[str]:
    seen: list[str] = []
    for s in synonyms:
        if s not in seen:
            seen.append(s)
    if by_length:
        seen.sort(key=lambda s: (len(s), s))
    return seen[:MAX_SYNONYMS]


def _level_labels(level) -> str | None:
    return ", ".join(label for label, _ in level) if level else None


def _level_synonyms(level, by_length: bool) -> list[str]:
    return _cap((s for _, syns in level for s in syns), by_length)


def _structured_block(line: Lineage) -> str:
    # P shows a single direct parent: the first by label order
    return line.level1[0][0] if line.level1 else TOP_LEVEL


def _lineage_block(line: Lineage) -> str:
    rows = [f"\tLevel 0: {line.level0}", f"\tLevel 1: {_level_labels(line.level1) or TOP_LEVEL}"]
    if line.level2:
        rows.append(f"\tLevel 2: {_level_labels(line.level2)}")
    return "\n".join(rows)


def _nlf_description(template: PromptTemplateId, line: Lineage) -> str:
    parent = _level_labels(line.level1) if template.extended_context else (line.level1[0][0] if line.level1 else None)
    grand = _level_labels(line.level2) if template.extended_context else None
    text = f'"{line.level0}"'

    if template in (PromptTemplateId.P_NLF, PromptTemplateId.P_NLF_EC):
        if parent is None:
            return text + f", which is {TOP_LEVEL}"
        text += f', which belongs to the broader category "{parent}"'
        if grand:
            text += f', under the even broader category "{grand}"'
        return text

    if template is PromptTemplateId.P_NLF_S:
        syns = _cap(line.level0_synonyms)
        if syns:
            text += f", also known as {_quoted(syns)}"
        if parent is None:
            return text + f", which is {TOP_LEVEL}."
        return text + f', which falls under the category "{parent}".'

    # P_NLF_EC_S lists synonyms shortest first
    syns = _cap(line.level0_synonyms, by_length=True)
    if syns:
        text += f", also known as {_quoted(syns)}"
    if parent is None:
        return text + f", is {TOP_LEVEL}."
    text += f', belongs to broader category "{parent}"'
    parent_syns = _level_synonyms(line.level1, by_length=True)
    if parent_syns:
        text += f" (also known as {_quoted(parent_syns)})"
    if grand:
        text += f', under the even broader category "{grand}"'
        grand_syns = _level_synonyms(line.level2, by_length=True)
        if grand_syns:
            text += f" (also known as {_quoted(grand_syns)})"
    return text + "."


def _resolve(ontology: Ontology, iri: str, side: str) -> EntityRecord:
    entity = ontology.get(iri)
    if entity is None:
        raise PromptError(f"{side} entity {iri!r} not found in {ontology.source_path or 'ontology'}")
    return entity


def render(template: PromptTemplateId | str, mapping: Mapping, source_onto: Ontology, target_onto: Ontology,
           system: SystemPromptId | str = SystemPromptId.NONE,
           system_texts: TMapping[str, str] | None = None) -> PromptInstance:
    template = PromptTemplateId(template)
    system = SystemPromptId(system)
    source = _resolve(source_onto, mapping.source, "source")
    target = _resolve(target_onto, mapping.target, "target")
    depth = 2 if template.extended_context else 1
    src_line = lineage(source, source_onto, depth)
    tgt_line = lineage(target, target_onto, depth)

    if template is PromptTemplateId.P:
        text = _frame("P").substitute(
            source=src_line.level0, source_parent=_structured_block(src_line),
            target=tgt_line.level0, target_parent=_structured_block(tgt_line),
        )
    elif template is PromptTemplateId.P_EC:
        text = _frame("P_EC").substitute(
            source_lineage=_lineage_block(src_line), target_lineage=_lineage_block(tgt_line),
        )
    else:
        text = _frame("NLF").substitute(
            source=_nlf_description(template, src_line), target=_nlf_description(template, tgt_line),
        )
    return PromptInstance(
        template=template,
        system=system,
        user_text=text,
        system_text=system_text(system, system_texts),
        mapping_key=mapping.key,
    )
