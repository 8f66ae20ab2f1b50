import numpy as np
import pytest

from volfunctionals import testfn


def random_psd(rng, d, lo=0.1, hi=10.0):
    """Random SPD matrix with eigenvalues drawn uniformly in [lo, hi]."""
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    return (q * rng.uniform(lo, hi, size=d)) @ q.T


def builtins_for(d):
    fns = [testfn.identity_component(0, 0, dim=d), testfn.trace_power(1, d),
           testfn.trace_power(2, d), testfn.trace_power(3, d)]
    if d == 1:
        fns += [testfn.power(1), testfn.power(2), testfn.power(3), testfn.power(2.5)]
    else:
        fns += [testfn.identity_component(0, 1, dim=d), testfn.entry_product(0, 1, 0, 1, dim=d),
                testfn.entry_product(0, 0, 1, 1, dim=d), testfn.entry_product(0, 1, 1, 1, dim=d)]
    return fns


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
