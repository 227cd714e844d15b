import numpy as np
import pytest

from spikectrl.tensor import set_default_dtype


@pytest.fixture(autouse=True)
def _float64_default():
    set_default_dtype("float64")
    yield
    set_default_dtype("float64")


def central_difference(f, arrays, eps=1e-6):
    """Gradient of scalar-valued f by central differences, per array entry."""
    grads = []
    for arr in arrays:
        g = np.zeros_like(arr)
        flat = arr.ravel()
        gflat = g.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = f()
            flat[i] = orig - eps
            lo = f()
            flat[i] = orig
            gflat[i] = (hi - lo) / (2.0 * eps)
        grads.append(g)
    return grads


def relative_error(a, b, floor=1e-10):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


def grad_close(analytic, reference, rtol, atol=1e-9):
    """Gradient agreement with an absolute floor at the FD noise level."""
    a = np.asarray(analytic, dtype=float)
    r = np.asarray(reference, dtype=float)
    return np.all(np.abs(a - r) <= rtol * np.maximum(np.abs(a), np.abs(r))
                  + atol)
