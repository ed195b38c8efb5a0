import contextlib

import pytest

_results = pytest.StashKey[dict]()


class _Outcome:
    detail = ""


@pytest.fixture
def criterion(request):
    """Context manager that records one acceptance criterion as PASS, FAIL or SKIP."""
    results = request.config.stash.setdefault(_results, {})

    @contextlib.contextmanager
    def record(number, title):
        out = _Outcome()
        status = "FAIL"
        try:
            yield out
            status = "PASS"
        except pytest.skip.Exception as exc:
            status, out.detail = "SKIP", str(exc.msg)
            raise
        except BaseException as exc:
            out.detail = out.detail or f"{type(exc).__name__}: {exc}".splitlines()[0]
            raise
        finally:
            line = f"criterion {number:>2} {status}: {title}" + (f" ({out.detail})" if out.detail else "")
            results[number] = line
            print(line)

    return record


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash.get(_results, {})
    if results:
        terminalreporter.section("acceptance criteria")
        for number in sorted(results):
            terminalreporter.write_line(results[number])
