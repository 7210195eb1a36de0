import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracle_align.ontology import (
    EntityRecord,
    LexicalConfig,
    OntologyParseError,
    display_label,
    iri_fragment,
    lineage,
    load_ontology,
    sorted_parents,
)

from conftest import FIXTURES, MOUSE, NCI

HEADER = """<?xml version="1.0"?>
<rdf:RDF xmlns="http://example.org/t#"
     xml:base="http://example.org/t"
     xmlns:rdfs="http://www.w3.org/2000/01/rdf-schema#"
     xmlns:owl="http://www.w3.org/2002/07/owl#"
     xmlns:skos="http://www.w3.org/2004/02/skos/core#"
     xmlns:rdf="http://www.w3.org/1999/02/22-rdf-syntax-ns#"
     xmlns:oboInOwl="http://www.geneontology.org/formats/oboInOwl#">
"""
T = "http://example.org/t#"


def owl(tmp_path, body, name="t.owl"):
    path = tmp_path / name
    path.write_text(HEADER + body + "</rdf:RDF>\n", encoding="utf-8")
    return path


def cls(name, label=None, parents=(), extra=""):
    out = f'<owl:Class rdf:about="#{name}">'
    if label:
        out += f"<rdfs:label>{label}</rdfs:label>"
    for p in parents:
        out += f'<rdfs:subClassOf rdf:resource="{p if ":" in p else "#" + p}"/>'
    return out + extra + "</owl:Class>\n"


def test_three_class_chain(tmp_path):
    path = owl(tmp_path, cls("A", "a", ["B"]) + cls("B", "b", ["C"]) + cls("C", "c"))
    onto = load_ontology(path)
    assert onto.entity_count == 3
    assert onto.get(T + "A").direct_parents == (T + "B",)
    assert onto.get(T + "A").labels == ("a",)
    assert onto.get(T + "C").direct_parents == ()
    assert onto.unresolved_references == ()


def test_owl_thing_parent_is_dropped(tmp_path):
    onto = load_ontology(owl(tmp_path, cls("A", "a", ["http://www.w3.org/2002/07/owl#Thing"])))
    assert onto.get(T + "A").direct_parents == ()


def test_related_synonym_by_reference(mouse):
    e = mouse.get(MOUSE + "MA_0000421")
    assert e.labels == ("respiratory system epithelium",)
    assert e.synonyms == ("respiratory system mucosa",)
    # the synonym node itself is not an entity
    assert MOUSE + "genid3201" not in mouse


def test_literal_and_nested_synonyms(tmp_path):
    body = cls("A", "alveolus epithelium", extra=(
        "<oboInOwl:hasRelatedSynonym>alveolar lining</oboInOwl:hasRelatedSynonym>"
        "<oboInOwl:hasExactSynonym>alveolus epithelium</oboInOwl:hasExactSynonym>"
        "<oboInOwl:hasExactSynonym><oboInOwl:Synonym><rdfs:label>air sac lining</rdfs:label>"
        "</oboInOwl:Synonym></oboInOwl:hasExactSynonym>"
        "<oboInOwl:hasRelatedSynonym>alveolar lining</oboInOwl:hasRelatedSynonym>"
    ))
    e = load_ontology(owl(tmp_path, body)).get(T + "A")
    assert e.labels == ("alveolus epithelium",)
    assert e.synonyms == ("alveolar lining", "air sac lining")


def test_restriction_parent_ignored(mouse):
    assert mouse.get(MOUSE + "MA_0001771").direct_parents == (MOUSE + "MA_0001772",)


def test_nci_full_syn_and_unresolved(human):
    e = human.get(NCI + "Alveolar_Epithelium")
    assert e.labels == ()
    assert e.synonyms == ("Lung Alveolar Epithelia", "Alveolar Epithelium", "Epithelia of lung alveoli")
    assert NCI + "Tissue" in human.unresolved_references


def test_properties_and_individuals(tmp_path):
    body = (
        cls("Organ", "organ")
        + '<owl:ObjectProperty rdf:about="#partOf"><rdfs:label>part of</rdfs:label>'
        '<rdfs:subPropertyOf rdf:resource="http://www.w3.org/2002/07/owl#topObjectProperty"/></owl:ObjectProperty>\n'
        '<owl:NamedIndividual rdf:about="#heart1"><rdf:type rdf:resource="#Organ"/>'
        "<rdfs:label>my heart</rdfs:label></owl:NamedIndividual>\n"
    )
    onto = load_ontology(owl(tmp_path, body))
    assert onto.get(T + "partOf").kind == "property"
    assert onto.get(T + "partOf").direct_parents == ()
    assert onto.get(T + "heart1").kind == "individual"
    assert onto.get(T + "heart1").direct_parents == (T + "Organ",)


def test_display_label_cases(mouse, human, tmp_path):
    assert display_label(mouse.get(MOUSE + "MA_0001771")) == "alveolus epithelium"
    assert display_label(human.get(NCI + "Alveolar_Epithelium")) == "Alveolar_Epithelium"
    onto = load_ontology(owl(tmp_path, cls("X", extra="<rdfs:label>b-term</rdfs:label><rdfs:label>a-term</rdfs:label>")))
    assert display_label(onto.get(T + "X")) == "a-term"


def test_label_priority_rdfs_over_skos(tmp_path):
    body = cls("X", extra="<skos:prefLabel>aaa</skos:prefLabel><rdfs:label>zzz</rdfs:label>")
    body += cls("Y", extra="<skos:prefLabel>only pref</skos:prefLabel>")
    onto = load_ontology(owl(tmp_path, body))
    assert display_label(onto.get(T + "X")) == "zzz"
    assert display_label(onto.get(T + "Y")) == "only pref"


def test_custom_lexical_config(tmp_path):
    body = cls("X", "x", extra="<skos:altLabel>ex</skos:altLabel><oboInOwl:hasExactSynonym>ecks</oboInOwl:hasExactSynonym>")
    config = LexicalConfig.from_dict({"synonym_properties": ["http://www.w3.org/2004/02/skos/core#altLabel"]})
    assert load_ontology(owl(tmp_path, body), config).get(T + "X").synonyms == ("ex",)


def test_fragment():
    assert iri_fragment("http://a.org/x#Alveolar_Epithelium") == "Alveolar_Epithelium"
    assert iri_fragment("http://purl.obolibrary.org/obo/UBERON_0000001") == "UBERON_0000001"
    assert iri_fragment("urn:x") == "urn:x"


def test_lineage_mouse(mouse):
    line = lineage(mouse.get(MOUSE + "MA_0001771"), mouse, 2)
    assert [label for label, _ in line.level1] == ["lung epithelium"]
    assert [label for label, _ in line.level2] == ["respiratory system epithelium"]


def test_lineage_human_multiple_grandparents(human):
    line = lineage(human.get(NCI + "Alveolar_Epithelium"), human, 2)
    assert ", ".join(label for label, _ in line.level2) == "Epithelial_Tissue, Normal_Tissue"


def test_lineage_root(mouse):
    line = lineage(mouse.get(MOUSE + "MA_0001778"), mouse, 2)
    assert line.level1 == () and line.level2 == ()


def test_lineage_depth_validation(mouse):
    with pytest.raises(ValueError):
        lineage(mouse.get(MOUSE + "MA_0001778"), mouse, 3)


def test_grandparents_deduplicated(tmp_path):
    # diamond: A < B, A < C, B < D, C < D
    body = cls("A", "a", ["B", "C"]) + cls("B", "b", ["D"]) + cls("C", "c", ["D"]) + cls("D", "d")
    onto = load_ontology(owl(tmp_path, body))
    line = lineage(onto.get(T + "A"), onto, 2)
    assert [lbl for lbl, _ in line.level1] == ["b", "c"]
    assert [lbl for lbl, _ in line.level2] == ["d"]


def test_ties_broken_by_iri(tmp_path):
    body = cls("A", "a", ["Q", "P"]) + cls("Q", "same") + cls("P", "same")
    onto = load_ontology(owl(tmp_path, body))
    assert [p.iri for p in sorted_parents(onto.get(T + "A"), onto)] == [T + "P", T + "Q"]


def test_deterministic_reload():
    a = load_ontology(FIXTURES / "human_mini.owl")
    b = load_ontology(FIXTURES / "human_mini.owl")
    assert dict(a.entities) == dict(b.entities)
    assert a.unresolved_references == b.unresolved_references


DECL = re.compile(
    r"<owl:(?:Class|ObjectProperty|DatatypeProperty|NamedIndividual)\s+rdf:about=\"([^\"]+)\"")


@pytest.mark.parametrize("name", ["mouse_mini.owl", "human_mini.owl"])
def test_entity_count_matches_brute_force_scan(name):
    text = (FIXTURES / name).read_text(encoding="utf-8")
    assert load_ontology(FIXTURES / name).entity_count == len(set(DECL.findall(text)))


def test_malformed_xml_reports_offset(tmp_path):
    path = tmp_path / "bad.owl"
    good = HEADER + cls("A", "a")
    path.write_text(good + "<owl:Class rdf:about='#B'></owl:Clas>\n</rdf:RDF>\n", encoding="utf-8")
    with pytest.raises(OntologyParseError) as err:
        load_ontology(path, chunk_size=64)
    assert err.value.byte_offset is not None
    assert len(good.encode()) <= err.value.byte_offset < path.stat().st_size


def test_missing_file(tmp_path):
    with pytest.raises(OntologyParseError, match="cannot read"):
        load_ontology(tmp_path / "nope.owl")


def test_empty_ontology_warns(tmp_path):
    with pytest.warns(UserWarning, match="no entities"):
        onto = load_ontology(owl(tmp_path, ""))
    assert onto.entity_count == 0


def test_ontology_is_read_only(mouse):
    with pytest.raises(TypeError):
        mouse.entities["x"] = EntityRecord("x", "class")


names = st.text(alphabet="abcdefgh", min_size=1, max_size=3)


@settings(max_examples=60, deadline=None)
@given(edges=st.lists(st.tuples(st.integers(0, 7), st.integers(0, 7)), max_size=14),
       labels=st.lists(names, min_size=8, max_size=8))
def test_lineage_properties(tmp_path_factory, edges, labels):
    parents = {i: sorted({p for c, p in edges if c == i and p != i}) for i in range(8)}
    body = "".join(cls(f"N{i}", labels[i], [f"N{p}" for p in parents[i]]) for i in range(8))
    body += cls("Top", "Thing-ish", ["http://www.w3.org/2002/07/owl#Thing"])
    onto = load_ontology(owl(tmp_path_factory.mktemp("h"), body))
    for e in onto.entities.values():
        one, two = lineage(e, onto, 1), lineage(e, onto, 2)
        assert one.level2 == ()
        assert one.level1 == two.level1
        if not two.level1:
            assert two.level2 == ()
        keys = [lbl for lbl, _ in two.level1]
        assert keys == sorted(keys)
        assert "Thing" not in keys
        assert "http://www.w3.org/2002/07/owl#Thing" not in e.direct_parents
