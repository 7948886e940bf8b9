import pytest

_RESULTS = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_RESULTS] = {}


@pytest.fixture
def acceptance(request):
    """Record the outcome of one acceptance criterion; printed in the terminal summary."""
    results = request.config.stash[_RESULTS]

    def record(number, passed, detail):
        results[number] = (bool(passed), detail)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_RESULTS, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        passed, detail = results[number]
        terminalreporter.write_line(f"ACCEPTANCE {number} {'PASS' if passed else 'FAIL'}: {detail}")
