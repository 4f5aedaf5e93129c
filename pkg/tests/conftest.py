import re

_RESULTS = {}


def pytest_runtest_logreport(report):
    m = re.search(r"::test_criterion_(\d+)", report.nodeid)
    if not m or report.when not in ("setup", "call"):
        return
    if report.when == "setup" and report.passed:
        return
    detail = dict(report.user_properties).get("detail", "")
    _RESULTS[int(m.group(1))] = ("PASS" if report.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_RESULTS):
        status, detail = _RESULTS[k]
        terminalreporter.write_line(f"criterion {k}: {status}  {detail}".rstrip())
