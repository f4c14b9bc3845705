import pytest

# criterion id -> (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE: dict[str, tuple[str, str]] = {}


def pytest_addoption(parser):
    parser.addoption("--run-full", action="store_true", default=False, help="run full-length posterior experiments")


def pytest_configure(config):
    config.addinivalue_line("markers", "full: full-length posterior experiments")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-full"):
        return
    skip = pytest.mark.skip(reason="full-length run; use --run-full")
    for item in items:
        if "full" in item.keywords:
            item.add_marker(skip)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(k.split()[0].rstrip("abcdefghijklmnopqrstuvwxyz")), k)):
        status, detail = ACCEPTANCE[key]
        tr.write_line(f"{status:4s}  criterion {key}: {detail}")
