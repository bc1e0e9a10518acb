import numpy as np
import pytest


def assert_grads_close(analytic, numeric, rtol=1e-4, floor=1e-7):
    """Per-coordinate relative agreement with an absolute floor near zero."""
    for a, n in zip(analytic, numeric):
        a = np.asarray(a)
        n = np.asarray(n)
        denom = np.maximum(np.abs(a), np.abs(n))
        bad = np.abs(a - n) > rtol * denom + floor
        assert not bad.any(), (
            f"gradient mismatch at {np.argwhere(bad)[:5]}: "
            f"analytic {a[bad][:5]} vs numeric {n[bad][:5]}"
        )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
