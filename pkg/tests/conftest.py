import pytest

from factforge.fixtures import perturb_page_dump, truncate_dump, write_fixture
from factforge.pipeline import BuildConfig, compute, load_pack, write_release
from factforge.views import LanguagePack


@pytest.fixture(scope="session")
def fixture_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("fixture")
    write_fixture(root)
    perturb_page_dump(root / "pages" / "en.xml", root / "perturbed" / "en.xml")
    truncate_dump(root / "pages" / "en.xml", root / "truncated" / "en.xml")
    return root


@pytest.fixture(scope="session")
def built(fixture_dir):
    """One full build (with benchmark outputs) shared by read-only tests."""
    cfg = BuildConfig.load(fixture_dir / "config.json")
    state = compute(cfg)
    out = fixture_dir / "out"
    manifest = write_release(state, out, bench=True)
    return state, out, manifest


@pytest.fixture(scope="session")
def packs():
    return {l: load_pack(l) for l in ("en", "de", "zh")}


@pytest.fixture
def en(packs) -> LanguagePack:
    return packs["en"]


@pytest.fixture(scope="session")
def built_relaxed(fixture_dir):
    cfg = BuildConfig.load(fixture_dir / "config_relaxed.json")
    return compute(cfg)


ACCEPTANCE = [
    ("test_determinism_end_to_end", "determinism: byte-identical rebuilds under 60 s"),
    ("test_pointer_closure", "pointer closure: Exact / Drift / Fail classification"),
    ("test_qualifier_order_invariance", "qualifier order invariance"),
    ("test_strict_no_false_merge", "strict no-false-merge, relaxed merge reasons"),
    ("test_split_statistics", "split fractions and bucket boundaries"),
    ("test_kgc_leakage", "KGC leakage and planted collisions"),
    ("test_filtered_ranking_oracle", "filtered ranking vs brute force"),
    ("test_mkqa_executor_equivalence", "MKQA executor vs traversal oracle"),
    ("test_mfc_metrics", "MFC metrics and label ratio"),
    ("test_confidence_bounds", "confidence bounds and monotonicity"),
    ("test_relation_rederivation", "relation re-derivation and hop cap"),
    ("test_diagnostics_closed_forms", "diagnostics closed forms"),
]
_acceptance_outcomes: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.rsplit("::", 1)[-1]
    if report.failed:
        _acceptance_outcomes[name] = "FAIL"
    elif report.when == "call" and report.passed:
        _acceptance_outcomes.setdefault(name, "PASS")


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_outcomes:
        return
    terminalreporter.section("acceptance")
    for i, (name, label) in enumerate(ACCEPTANCE, 1):
        terminalreporter.write_line(f"[{i:2d}] {_acceptance_outcomes.get(name, 'NOT RUN'):7s} {label}")
