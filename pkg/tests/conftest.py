import pytest

from posme import Params, derive_seed, gen, prove
from posme.witness import serialize_proof

SEED = derive_seed(b"test-task", b"nonce-1")


@pytest.fixture(scope="session")
def seed():
    return SEED


@pytest.fixture(scope="session")
def run8():
    """N = 256, rho = 4, d = 8."""
    log, arena = gen(SEED, Params.from_rho(8, 4), strict=False)
    return log, arena


@pytest.fixture(scope="session")
def run10():
    log, arena = gen(SEED, Params.from_rho(10, 4), strict=False)
    return log, arena


@pytest.fixture(scope="session")
def run14():
    log, _ = gen(derive_seed(b"mix", b"14"), Params.from_rho(14, 4), strict=False)
    return log


@pytest.fixture(scope="session")
def proof_r2(run8):
    p = prove(run8[0], 8, 2, strict=False)
    return p, serialize_proof(p)


@pytest.fixture(scope="session")
def proof_r3(run8):
    p = prove(run8[0], 4, 3, strict=False)
    return p, serialize_proof(p)


_ACCEPTANCE: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
