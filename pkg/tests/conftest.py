import shlex
import sys
import textwrap

import pytest

STUBS = {
    "sum": """
        import sys
        for line in sys.stdin:
            print(repr(sum(float(v) for v in line.split())), flush=True)
    """,
    "nan": """
        import sys
        for line in sys.stdin:
            print("nan", flush=True)
    """,
    "garbage": """
        import sys
        for line in sys.stdin:
            print("not-a-number", flush=True)
    """,
    "sleep": """
        import sys, time
        for line in sys.stdin:
            time.sleep(30)
    """,
    "exit": """
        import sys
        sys.stdin.readline()
        sys.exit(7)
    """,
    "sphere": """
        import sys
        for line in sys.stdin:
            print(repr(sum(float(v) ** 2 for v in line.split())), flush=True)
    """,
    "flaky": """
        import sys
        for i, line in enumerate(sys.stdin):
            if i == 40:
                print("nan", flush=True)
            else:
                print(repr(sum(float(v) ** 2 for v in line.split())), flush=True)
    """,
}


@pytest.fixture
def stub(tmp_path):
    """Return a shell command running the named blackbox stub."""

    def make(name):
        path = tmp_path / f"{name}_stub.py"
        path.write_text(textwrap.dedent(STUBS[name]))
        return f"{shlex.quote(sys.executable)} {shlex.quote(str(path))}"

    return make


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
