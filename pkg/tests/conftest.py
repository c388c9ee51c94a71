from __future__ import annotations

import time

import numpy as np
import pytest

from neutrex import decoder, scoring, synth

# Filled by tests/test_acceptance.py; printed after the run so each criterion
# gets exactly one visible pass/fail line.
ACCEPTANCE_RESULTS: list[tuple[int, bool, str]] = []

_SUITE_T0 = time.perf_counter()
SUITE_TIME_BUDGET_S = 60.0


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    elapsed = time.perf_counter() - _SUITE_T0
    terminalreporter.section("acceptance criteria")
    for idx, ok, desc in sorted(ACCEPTANCE_RESULTS):
        if idx == 10:
            # The runtime half of this criterion is only known at the end.
            ok = ok and elapsed < SUITE_TIME_BUDGET_S
            desc = f"{desc}; suite took {elapsed:.1f}s (budget {SUITE_TIME_BUDGET_S:.0f}s)"
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"ACCEPTANCE {idx}: {status} - {desc}")


@pytest.fixture
def toy_assets():
    rng = np.random.default_rng(101)
    return synth.make_random_assets(rng, num_vertices=12, n_beta=4, n_psi=6)


@pytest.fixture(scope="session")
def head_assets():
    return synth.make_head_assets()


@pytest.fixture(scope="session")
def head_anchor(head_assets):
    rng = np.random.default_rng(11)
    codes = [
        decoder.ParamCode(
            sample_id=f"neutral{i:02d}",
            beta=np.zeros(head_assets.n_beta),
            pose=np.concatenate([np.zeros(3), [abs(rng.normal(scale=0.01)), 0.0, 0.0]]),
            psi=rng.normal(scale=0.02, size=head_assets.n_psi),
        )
        for i in range(8)
    ]
    return scoring.build_anchor(head_assets, codes)
