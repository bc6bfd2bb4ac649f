import os

import pytest

from _report import LINES


def pytest_terminal_summary(terminalreporter):
    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)


def pytest_report_header(config):
    from statvar._accel import USING_NUMBA
    return f"statvar kernels: {'numba' if USING_NUMBA else 'numpy'} (STATVAR_NUMBA={os.environ.get('STATVAR_NUMBA', 'unset')})"


@pytest.fixture(scope="session")
def catalog():
    from statvar import catalog
    return catalog
