import numpy as np
import pytest

from tfmsep import harness

ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def benchmark_config():
    """Synthetic benchmark: the desk profile (10 s at 16 kHz, hop 64) with seed 0."""
    return harness.RunConfig.desk().with_overrides(seed=0)


@pytest.fixture(scope="session")
def benchmark_sources(benchmark_config):
    return harness.load_sources(benchmark_config)


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line for an acceptance criterion and print it."""
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, [])
    capman = request.config.pluginmanager.getplugin("capturemanager")

    def record(number, title, checks):
        failed = [name for name, ok in checks if not ok]
        line = (f"criterion {number} {'PASS' if not failed else 'FAIL'}: {title}"
                + (f" (failed: {', '.join(failed)})" if failed else ""))
        lines.append(line)
        with capman.global_and_fixture_disabled():
            print("\n" + line)
        return not failed

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
