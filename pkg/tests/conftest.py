import math

import pytest
from hypothesis import settings

from holopulse.gates import GateParams

settings.register_profile("default", max_examples=50, deadline=None)
settings.load_profile("default")

NAMED_GATES = {
    "sigma_x": GateParams.sigma_x(),
    "sigma_y": GateParams.sigma_y(),
    "sigma_z": GateParams.sigma_z(),
    "hadamard": GateParams.hadamard(),
}

# criterion id -> list of (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[str, list] = {}


@pytest.fixture(params=list(NAMED_GATES), ids=list(NAMED_GATES))
def named_gate(request):
    return NAMED_GATES[request.param]


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(ACCEPTANCE, key=lambda c: int(c[1:])):
        items = ACCEPTANCE[crit]
        ok = all(p for p, _ in items)
        failed = [d for p, d in items if not p]
        detail = "; ".join(failed) if failed else f"{len(items)} check(s)"
        terminalreporter.write_line(f"{crit}: {'PASS' if ok else 'FAIL'} ({detail})")


TWO_PI = 2.0 * math.pi
