"""Shared fixtures: seeded generators and a CLI invoker."""

import numpy as np
import pytest

from ppbell import cli


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def doubled_point():
    """A random doubled-phase-space batch with alpha_plus independent of alpha*."""
    from ppbell.phasespace import PhasePoint

    g = np.random.default_rng(7).standard_normal((16, 32))
    return PhasePoint(alpha=g[:4] + 1j * g[4:8], alpha_plus=g[8:12] + 1j * g[12:])


@pytest.fixture
def invoke():
    """Run the CLI in-process; returns the exit code like a shell would see."""

    def _invoke(*argv):
        try:
            return cli.main([str(a) for a in argv])
        except SystemExit as exc:  # argparse errors
            return int(exc.code)

    return _invoke
