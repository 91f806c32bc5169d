"""Annotation parsing and corpus loading."""

import pytest
from hypothesis import given, strategies as st

from patchlab.corpus import ContractCase, load_corpus, parse_annotations
from patchlab.errors import CorpusError, UnknownLabel
from patchlab.taxonomy import DaspCategory, ExploitabilityStatus

# Same shape as the dataset's canonical reentrancy example: the marker sits
# on line 5 and flags the call on line 6.
LISTING_STYLE_SOURCE = """\
contract Reentrancy {
  mapping (address => uint) userBalance;

  function withdrawBalance() {
    // <yes> <report> REENTRANCY
    if(!(msg.sender.call.value(userBalance[msg.sender])())){
      throw;
    }
    userBalance[msg.sender] = 0;
  }
}
"""

# Hand-written 12-line synthetic fixture; counted by hand before the parser
# existed: markers on lines 3 and 9 flag lines 4 and 10.
TWO_MARKER_SOURCE = """\
contract Two {
  uint x;
  // <yes> <report> ARITHMETIC
  function bump() { x = x + 1; }
  function noop() {}
  uint y;
  address owner;

  // <yes> <report> REENTRANCY
  function out() { msg.sender.call.value(1)(); }
  function last() {}
}
"""


def test_listing_style_marker_flags_next_line():
    assert parse_annotations(LISTING_STYLE_SOURCE) == [(6, DaspCategory.REENTRANCY)]


def test_no_markers_yields_empty():
    assert parse_annotations("contract A { function f() {} }") == []


def test_two_markers_hand_counted():
    assert parse_annotations(TWO_MARKER_SOURCE) == [
        (4, DaspCategory.ARITHMETIC),
        (10, DaspCategory.REENTRANCY),
    ]


def test_marker_skips_blank_lines():
    source = "// <yes> <report> ARITHMETIC\n\n\nuint x;\n"
    assert parse_annotations(source) == [(4, DaspCategory.ARITHMETIC)]


def test_marker_with_nothing_after_is_dropped():
    assert parse_annotations("uint x;\n// <yes> <report> ARITHMETIC\n") == []


def test_whitespace_variants_accepted():
    source = "//<yes>  <report>   REENTRANCY\ncall();\n"
    assert parse_annotations(source) == [(2, DaspCategory.REENTRANCY)]


def test_unknown_marker_label_is_error():
    with pytest.raises(UnknownLabel):
        parse_annotations("// <yes> <report> GAS_GRIEFING\nx;\n")


@given(st.text(alphabet=st.characters(blacklist_categories=("Cs",)), max_size=300))
def test_parse_annotations_is_pure_and_sorted(source):
    try:
        first = parse_annotations(source)
    except UnknownLabel:
        return
    assert first == parse_annotations(source)
    assert first == sorted(first, key=lambda e: e[0])


def test_case_requires_exactly_one_representation():
    with pytest.raises(CorpusError):
        ContractCase(id="x", ground_truth=DaspCategory.OTHER)
    with pytest.raises(CorpusError):
        ContractCase(id="x", ground_truth=DaspCategory.OTHER,
                     source="contract A {}", runtime_bytecode=b"\x00")


def test_case_rejects_out_of_range_annotation():
    with pytest.raises(CorpusError):
        ContractCase(id="x", ground_truth=DaspCategory.ARITHMETIC,
                     source="short\n", annotated_lines=((9, DaspCategory.ARITHMETIC),))


def test_case_ground_truth_must_match_some_annotation():
    with pytest.raises(CorpusError):
        ContractCase(id="x", ground_truth=DaspCategory.REENTRANCY,
                     source="a\nb\n", annotated_lines=((1, DaspCategory.ARITHMETIC),))


def _write_corpus(tmp_path, manifest: str | None = None):
    reentrancy = tmp_path / "reentrancy"
    reentrancy.mkdir()
    (reentrancy / "vault.sol").write_text(LISTING_STYLE_SOURCE)
    arithmetic = tmp_path / "arithmetic"
    arithmetic.mkdir()
    (arithmetic / "token.sol").write_text(
        "contract T {\n  // <yes> <report> ARITHMETIC\n  uint x;\n}\n")
    if manifest:
        (tmp_path / "manifest.yaml").write_text(manifest)
    return tmp_path


def test_load_corpus_from_category_directories(tmp_path):
    corpus = load_corpus(_write_corpus(tmp_path))
    assert len(corpus) == 2
    vault = corpus.get("vault")
    assert vault.ground_truth is DaspCategory.REENTRANCY
    assert vault.annotated_lines == ((6, DaspCategory.REENTRANCY),)
    assert corpus.get("token").ground_truth is DaspCategory.ARITHMETIC


def test_manifest_overrides_exploitability(tmp_path):
    corpus = load_corpus(_write_corpus(
        tmp_path, "vault:\n  exploitability: theoretical_problem\n"))
    assert corpus.get("vault").exploitability is ExploitabilityStatus.THEORETICAL_PROBLEM
    counts = corpus.exploitability_counts()
    assert sum(counts.values()) == len(corpus)  # partition invariant


def test_unknown_category_directory_rejected(tmp_path):
    bad = tmp_path / "gas_verygrief"
    bad.mkdir()
    with pytest.raises(CorpusError):
        load_corpus(tmp_path)
