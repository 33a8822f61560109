import pytest

ACCEPTANCE_RESULTS = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE_RESULTS):
        passed, detail = ACCEPTANCE_RESULTS[num]
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if passed else 'FAIL'}  {detail}")


@pytest.fixture
def record_criterion():
    def record(num, passed, detail):
        ACCEPTANCE_RESULTS[num] = (bool(passed), detail)
        print(f"criterion {num:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
    return record
