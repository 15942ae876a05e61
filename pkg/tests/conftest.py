import pytest

from urbanpatrol.cli import make_plan
from urbanpatrol.scenario import bundled, load_scenario

_CRITERIA = []


@pytest.fixture(scope="session")
def paper_scenario():
    return load_scenario(bundled())


@pytest.fixture(scope="session")
def paper_plan(paper_scenario):
    return make_plan(paper_scenario)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        detail = dict(item.user_properties).get("detail", "")
        if rep.passed and not hasattr(rep, "wasxfail"):
            verdict = "PASS"
        elif hasattr(rep, "wasxfail") and rep.skipped:
            verdict = "FAIL (expected)"
        else:
            verdict = "FAIL"
        _CRITERIA.append((mark.args[0], mark.args[1], verdict, detail))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num, title, verdict, detail in sorted(_CRITERIA, key=lambda c: c[0]):
        line = f"{verdict} criterion {num}: {title}"
        terminalreporter.write_line(line + (f" [{detail}]" if detail else ""))
