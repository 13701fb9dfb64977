"""Shared fixtures.

Sim-backed tests reuse session-scoped results where possible so the
expensive runs happen once; everything is seeded, so reruns are
bit-identical.
"""

import pytest

from rachcap.config import SystemConfig


@pytest.fixture(scope="session")
def cfg():
    """Stock configuration: 54 preambles, an opportunity every 5
    subframes, 9 retransmissions."""
    return SystemConfig()


@pytest.fixture(scope="session")
def cfg_d1():
    """Same, but an opportunity every subframe."""
    return SystemConfig(delta_rao=1)


def report(label: str, ok: bool, detail: str = "") -> bool:
    """One status line per checked claim, kept in captured stdout so a
    red test shows exactly which sub-claim broke and by how much."""
    tag = "PASS" if ok else "FAIL"
    print(f"[{tag}] {label}" + (f": {detail}" if detail else ""))
    return ok
