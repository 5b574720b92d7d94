import math

import pytest

from fluxshift.constants import GHZ, H, MILLI, PHI0
from fluxshift.params import CouplingParams, DeviceParams, FluxQubitParams, ResonatorParams

# device tuned to the target 3.45 GHz line and 2.1 GHz/Phi0 slope
L_LINE = 1.0e-9
C_CAP = 1.0 / ((2 * math.pi * 4.0e9) ** 2 * L_LINE)
I_C = 0.867e-6
PHI_SQ_BIAS = -0.3141 * PHI0


@pytest.fixture
def resonator():
    return ResonatorParams.from_lc(L_LINE, C_CAP, I_C)


@pytest.fixture
def qubit():
    return FluxQubitParams(1.30 * GHZ * H, 640e-9, -3)


@pytest.fixture
def nominal_coupling():
    return CouplingParams(12.1e-12, 2 * math.pi * 2.1e9 / PHI0)


@pytest.fixture
def device_factory(resonator, qubit, nominal_coupling):
    def make(bias_mphi0=0.0, **kwargs):
        kwargs.setdefault("resonator_linewidth", 20e6)
        kwargs.setdefault("qubit_linewidth", 40e6)
        return DeviceParams.with_bias(
            resonator, qubit, nominal_coupling, PHI_SQ_BIAS, bias_mphi0 * MILLI * PHI0, **kwargs
        )

    return make


@pytest.fixture
def device(device_factory):
    return device_factory(0.0)


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
