import pytest

from drgkit import kernels
from drgkit.catalog import bundled_catalog_path, load_catalog, parse_catalog

SMALL_TABLE = """code,description
11,TRACHEOSTOMY FOR FACE MOUTH AND NECK DIAGNOSES WITH MCC
12,TRACHEOSTOMY FOR FACE MOUTH AND NECK DIAGNOSES WITH CC
13,TRACHEOSTOMY FOR FACE MOUTH AND NECK DIAGNOSES WITHOUT CC/MCC
52,SPINAL DISORDERS AND INJURIES WITH CC/MCC
53,SPINAL DISORDERS AND INJURIES WITHOUT CC/MCC
56,DEGENERATIVE NERVOUS SYSTEM DISORDERS WITH MCC
57,DEGENERATIVE NERVOUS SYSTEM DISORDERS WITHOUT MCC
69,TRANSIENT ISCHEMIA
"""


@pytest.fixture(scope="session")
def catalog():
    return load_catalog(bundled_catalog_path())


@pytest.fixture(scope="session")
def small_catalog():
    return parse_catalog(SMALL_TABLE)


@pytest.fixture(params=sorted(kernels.available_backends()))
def backend(request):
    return kernels.available_backends()[request.param]


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
