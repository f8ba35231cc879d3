import numpy as np
import pytest

from chawkes.model import ModelSpec, lob_preset

TWO_MARK_FERTILITY = [[0.2, 0.3], [0.1, 0.4]]


def poisson_spec(rate=1.0):
    return ModelSpec(p=1, q=0, beta=1.0, fertility=[[0.0]], mu0=[rate])


def two_mark_spec():
    return ModelSpec(p=2, q=0, beta=1.0, fertility=TWO_MARK_FERTILITY, mu0=[0.5, 0.5])


def birth_death_spec(up, down):
    return ModelSpec(
        p=2, q=1, beta=1.0, fertility=np.zeros((2, 2)), mu0=[up, down],
        constraints=[[[]], [[1]]], jumps=[[1], [-1]],
    )


def ergodic_lob(aleph=0.1):
    return lob_preset([0.1, 0.2, 0.2, 0.1], aleph * np.eye(4))


def symmetric_lob():
    # Invariant under the bid/ask relabelling 1<->4, 2<->3.
    fert = np.array([
        [0.10, 0.05, 0.02, 0.03],
        [0.04, 0.12, 0.01, 0.02],
        [0.02, 0.01, 0.12, 0.04],
        [0.03, 0.02, 0.05, 0.10],
    ])
    return lob_preset([0.1, 0.2, 0.2, 0.1], fert)


@pytest.fixture
def lob():
    return ergodic_lob()


def two_block_lob():
    """Two independent order-book blocks, one constraint component each."""
    base = ergodic_lob()
    p = 8
    fert = np.zeros((p, p))
    fert[:4, :4] = base.fertility
    fert[4:, 4:] = base.fertility
    constraints, jumps = [], []
    for block in range(2):
        for i in range(4):
            row = [[], []]
            row[block] = sorted(base.constraints[i][0])
            constraints.append(row)
            jump = [0, 0]
            jump[block] = int(base.jumps[i, 0])
            jumps.append(jump)
    return ModelSpec(p=p, q=2, beta=1.0, fertility=fert, mu0=np.tile(base.mu0, 2),
                     constraints=constraints, jumps=jumps)


# -- acceptance reporting ----------------------------------------------------------

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
