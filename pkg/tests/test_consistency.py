"""Consistency semantics: patch-level all-instances-cleared and
contract-level any-patch OR, cross-checked against brute-force scans."""

from hypothesis import given, strategies as st

from patchlab.consistency import contract_consistent, patch_consistent
from patchlab.detection import Defect, DetectionReport
from patchlab.taxonomy import DaspCategory

RE = DaspCategory.REENTRANCY


def report_of(categories) -> DetectionReport:
    return DetectionReport(
        "x.sol", tuple(Defect((i + 1,), c, c.value) for i, c in enumerate(categories)))


def test_all_instances_cleared():
    assert patch_consistent(report_of([RE, RE]), report_of([]), RE) is True


def test_partial_clearing_is_inconsistent():
    assert patch_consistent(report_of([RE, RE]), report_of([RE]), RE) is False


def test_nothing_detected_means_inconsistent():
    assert patch_consistent(report_of([]), report_of([]), RE) is False


def test_other_categories_ignored():
    before = report_of([RE, DaspCategory.ARITHMETIC])
    after = report_of([DaspCategory.ARITHMETIC, DaspCategory.ACCESS_CONTROL])
    assert patch_consistent(before, after, RE) is True


def test_contract_level_or():
    assert contract_consistent([False, True, False]) is True
    assert contract_consistent([]) is False
    assert contract_consistent([False] * 5) is False


_categories = st.sampled_from(sorted(DaspCategory, key=lambda c: c.value))


@given(st.lists(_categories, max_size=8), st.lists(_categories, max_size=8), _categories)
def test_patch_consistency_equals_brute_force(before_cats, after_cats, target):
    before, after = report_of(before_cats), report_of(after_cats)
    # brute force: count target instances by scanning defect lists
    detected_before = sum(1 for c in before_cats if c == target)
    detected_after = sum(1 for c in after_cats if c == target)
    expected = detected_before >= 1 and detected_after == 0
    assert patch_consistent(before, after, target) == expected


@given(st.lists(st.booleans(), max_size=12))
def test_contract_consistency_equals_brute_force_or(verdicts):
    brute = False
    for verdict in verdicts:
        brute = brute or verdict
    assert contract_consistent(verdicts) == brute


@given(st.lists(st.booleans(), max_size=12))
def test_contract_true_implies_some_patch_true(verdicts):
    if contract_consistent(verdicts):
        assert any(verdicts)
