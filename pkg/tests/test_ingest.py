import bz2
import gzip
import io
import json

import pytest

from factforge.ingest import (LinkTables, MissingInput, StreamCorrupt, XmlMalformed, build_manifest,
                              read_disambiguation, read_entity_dump, read_page_dump, read_redirects_tsv)
from factforge.pipeline import load_pack
from factforge.policy import DEFAULT_POLICY, NormalizationPolicy


def _ent(i, **extra):
    return {"type": "item", "id": f"Q{i}", "labels": {"en": {"language": "en", "value": f"E{i}"}},
            "sitelinks": {"enwiki": {"site": "enwiki", "title": f"E{i}"}, "commonswiki": {"title": "x"}},
            "claims": {}, **extra}


def test_entities_in_file_order(tmp_path):
    p = tmp_path / "e.json"
    p.write_text("[\n" + ",\n".join(json.dumps(_ent(i)) for i in (3, 1, 2)) + "\n]\n")
    recs = list(read_entity_dump(p))
    assert [r.entity_id for r in recs] == ["Q3", "Q1", "Q2"]
    assert recs[0].sitelinks == {"en": "E3"} and recs[0].labels == {"en": "E3"}


def test_malformed_line_skipped(tmp_path):
    lines = [json.dumps(_ent(i)) for i in range(1, 101)]
    lines[41] = '{"id": "Q42", broken'
    p = tmp_path / "e.jsonl"
    p.write_text("\n".join(lines) + "\n")
    rd = read_entity_dump(p)
    recs = list(rd)
    assert len(recs) == 99
    assert len(rd.skipped) == 1 and rd.skipped[0].line_no == 42


def test_empty_stream():
    rd = read_entity_dump(io.BytesIO(b""))
    assert list(rd) == [] and rd.skipped == []


@pytest.mark.parametrize("opener", [gzip.compress, bz2.compress])
def test_compressed_dumps(tmp_path, opener):
    p = tmp_path / "e.json.z"
    p.write_bytes(opener(json.dumps(_ent(5)).encode() + b"\n"))
    assert [r.entity_id for r in read_entity_dump(p)] == ["Q5"]


def test_corrupt_compression(tmp_path):
    p = tmp_path / "e.json.gz"
    p.write_bytes(gzip.compress(json.dumps(_ent(5)).encode())[:-12] + b"garbage!")
    with pytest.raises(StreamCorrupt):
        list(read_entity_dump(p))


def test_missing_input(tmp_path):
    with pytest.raises(MissingInput):
        list(read_entity_dump(tmp_path / "nope.json"))


XML = """<mediawiki xmlns="http://www.mediawiki.org/xml/export-0.10/">
  <page><title>Alpha</title><ns>0</ns><id>1</id>
    <revision><id>10</id><timestamp>2020-01-01T00:00:00Z</timestamp><text>old</text></revision>
    <revision><id>11</id><timestamp>2021-01-01T00:00:00Z</timestamp><text xml:space="preserve">Hi &lt;nowiki&gt;]]&lt;/nowiki&gt; there</text></revision>
  </page>
  <page><title>Beta</title><ns>0</ns><id>2</id>
    <revision><id>20</id><text>Beta text</text></revision></page>
  <page><title>Gamma</title><ns>0</ns><id>3</id><redirect title="Alpha" />
    <revision><id>30</id><text>#REDIRECT [[Alpha]]</text></revision></page>
  <page><title>Template:Box</title><ns>10</ns><id>4</id>
    <revision><id>40</id><text>{{{1}}}</text></revision></page>
</mediawiki>
"""


def test_page_dump(tmp_path):
    p = tmp_path / "p.xml"
    p.write_text(XML)
    pages = list(read_page_dump(p))
    assert [x.page_id for x in pages] == [1, 2, 3, 4]
    a = pages[0]
    assert a.revision_id == 11  # latest revision
    assert a.wikitext == "Hi <nowiki>]]</nowiki> there"
    assert pages[2].is_redirect and pages[2].redirect_target == "Alpha"
    assert pages[3].namespace == 10
    assert sum(x.is_redirect for x in pages) == 1


def test_wikitext_byte_exact_vs_raw_node(fixture_dir):
    import xml.etree.ElementTree as ET

    src = fixture_dir / "pages" / "de.xml"
    ns = {"m": "http://www.mediawiki.org/xml/export-0.10/"}
    tree = ET.parse(src)
    want = {}
    for page in tree.getroot().findall("m:page", ns):
        revs = page.findall("m:revision", ns)
        want[int(page.find("m:id", ns).text)] = revs[-1].find("m:text", ns).text or ""
    got = {p.page_id: p.wikitext for p in read_page_dump(src)}
    assert got == want


def test_truncated_page_dump(fixture_dir):
    pages = []
    with pytest.raises(XmlMalformed):
        for p in read_page_dump(fixture_dir / "truncated" / "en.xml"):
            pages.append(p)
    assert len(pages) > 10


def test_redirect_tables(tmp_path):
    p = tmp_path / "r.tsv"
    p.write_text("# comment\nA\tB\nB\tC\nX\tY\nY\tX\n")
    links = LinkTables(read_redirects_tsv(p))
    assert links.resolve("A") == ("C", 2)
    assert links.resolve("C") == ("C", 0)
    assert links.resolve("X")[0] is None and links.cycles == ["X"]
    d = tmp_path / "d.txt"
    d.write_text("5\n\n7\n")
    assert read_disambiguation(d) == {5, 7}


def _manifest(tmp_path, data=b"abc", policy=DEFAULT_POLICY):
    f = tmp_path / "in.bin"
    f.write_bytes(data)
    return build_manifest([("in.bin", f, "2024-01-01")], policy, {"en": load_pack("en")}, {"k": 1}, "t/1")


def test_manifest_determinism_and_sensitivity(tmp_path):
    a = _manifest(tmp_path)
    assert a.to_record() == _manifest(tmp_path).to_record()
    assert _manifest(tmp_path, b"abd").build_id != a.build_id
    bumped = NormalizationPolicy(label="strict2")
    assert _manifest(tmp_path, policy=bumped).build_id != a.build_id


def test_manifest_missing_input(tmp_path):
    with pytest.raises(MissingInput):
        build_manifest([("x", tmp_path / "x", "")], DEFAULT_POLICY, {}, {}, "t")
