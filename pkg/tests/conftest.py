from collections import OrderedDict

import pytest

# criterion number -> (title, [outcome per test])
_CRITERIA: "OrderedDict[int, list]" = OrderedDict()
_TITLES = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion this test checks")


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m is not None:
            n, title = m.args
            _TITLES[n] = title
            _CRITERIA.setdefault(n, [])


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _CRITERIA[m.args[0]].append((item.name, rep.passed))


def pytest_terminal_summary(terminalreporter):
    if not any(_CRITERIA.values()):
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        results = _CRITERIA[n]
        if not results:
            continue
        ok = all(passed for _, passed in results)
        failed = [name for name, passed in results if not passed]
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {_TITLES[n]}"
        if failed:
            line += f"  (failed: {', '.join(failed)})"
        tr.write_line(line, green=ok, red=not ok)
