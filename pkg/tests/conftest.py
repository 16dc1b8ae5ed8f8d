import numpy as np
import pytest

from atbqc.synth import benchmark_params, generate_dataset
from atbqc.harness import HarnessConfig, evaluate


@pytest.fixture(scope="session")
def benchmark():
    """The 10 x 60 labelled benchmark (TB rate 0.3), with its generator records."""
    return generate_dataset(benchmark_params(seed=0))


@pytest.fixture(scope="session")
def benchmark_report(benchmark):
    ds, _ = benchmark
    return evaluate(ds, cfg=HarnessConfig(seed=0))


@pytest.fixture(scope="session")
def clean_dataset():
    return generate_dataset(benchmark_params(seed=3, c1_incomplete_rate=0.0, c1_frame_rate=0.0,
                                             c2_tb_rate=0.0, c2_frame_rate=0.0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line for an acceptance criterion and return the outcome."""
    def _verdict(n, title, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] {n:>2}. {title}: {detail}"
        print(line)
        ACCEPTANCE_LINES.append((n, line))
        return ok
    return _verdict


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
