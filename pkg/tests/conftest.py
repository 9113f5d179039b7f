import pytest

_RECORDS_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_RECORDS_KEY] = []


@pytest.fixture
def record(request):
    """Record one acceptance check as ``(criterion, label, passed, detail)`` and print it."""
    store = request.config.stash[_RECORDS_KEY]

    def _record(criterion, label, passed, detail=""):
        store.append((criterion, label, bool(passed), detail))
        print(f"criterion {criterion} [{label}]: {'PASS' if passed else 'FAIL'} {detail}")
        return passed

    return _record


def pytest_terminal_summary(terminalreporter, config):
    store = config.stash.get(_RECORDS_KEY, [])
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    by_criterion = {}
    for crit, label, passed, detail in store:
        by_criterion.setdefault(crit, []).append((label, passed, detail))
    for crit in sorted(by_criterion):
        checks = by_criterion[crit]
        ok = all(p for _, p, _ in checks)
        terminalreporter.write_line(f"criterion {crit}: {'PASS' if ok else 'FAIL'} ({len(checks)} checks)")
        for label, passed, detail in checks:
            terminalreporter.write_line(f"    {'PASS' if passed else 'FAIL'}  {label}  {detail}")
