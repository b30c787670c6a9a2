"""Shared fixtures: canonical processes and cached decompositions.

The scans are the expensive part of most tests, so the canonical ones are
computed once per session and shared; every consumer treats them as
read-only.
"""

import os

os.environ.setdefault("QCOARSE_WORKERS", "4")

import numpy as np
import pytest

from qcoarse.expsum import scan_epsilon, scan_epsilon_multi
from qcoarse.processes import (AlternatingPoisson, BimodalGaussian,
                               Exponential, unit_rate)
from qcoarse.qmodel import build_unitary

DT = 1e-3


@pytest.fixture(scope="session")
def expo():
    return Exponential(2.0)


@pytest.fixture(scope="session")
def ap():
    return AlternatingPoisson(2.0)


@pytest.fixture(scope="session")
def bm():
    # unit mean firing rate, same parameters the two-mode example uses
    return unit_rate(BimodalGaussian(1.0, 1.0, np.sqrt(5.0), np.sqrt(33.8),
                                     1.0, 1.0))


@pytest.fixture(scope="session")
def exp_scan(expo):
    # exactly representable by one term; a single small eps suffices
    return scan_epsilon(expo, 1, eps_list=[1e-10])


@pytest.fixture(scope="session")
def ap_scans(ap):
    return scan_epsilon_multi(ap, [1, 2, 4, 8])


@pytest.fixture(scope="session")
def bm_scans(bm):
    return scan_epsilon_multi(bm, [4, 8])


@pytest.fixture(scope="session")
def exp_model(exp_scan):
    return build_unitary(exp_scan[0], DT)


@pytest.fixture(scope="session")
def ap_model(ap_scans):
    return build_unitary(ap_scans[4][0], DT)


@pytest.fixture(scope="session")
def bm_model(bm_scans):
    return build_unitary(bm_scans[8][0], DT)


@pytest.fixture(scope="session")
def example_models(exp_model, ap_model, bm_model):
    """The three canonical models, keyed for per-model assertions."""
    return {"exponential": exp_model, "alternating_poisson": ap_model,
            "bimodal_gaussian": bm_model}
