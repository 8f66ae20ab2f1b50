"""Symmetric-matrix helpers.

Spot covariances are plain ``numpy`` arrays of shape ``(d, d)``, or stacks of
shape ``(..., d, d)``. Fourth-order derivative tensors have shape
``(..., d, d, d, d)`` and are indexed ``[j, k, l, m]``.
"""

import numpy as np

from .errors import DimensionError, NumericalError


def _check_square(m):
    m = np.asarray(m, dtype=float)
    if m.ndim < 2 or m.shape[-1] != m.shape[-2]:
        raise DimensionError(f"expected square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NumericalError("matrix has non-finite entries")
    return m


def symmetrize(m):
    """Return ``(m + m.T) / 2`` (acts on the last two axes of a stack)."""
    m = _check_square(m)
    return 0.5 * (m + np.swapaxes(m, -1, -2))


def outer_product_increment(x):
    """Rank-one matrix ``x x^T`` for a d-vector or a stack of them (..., d)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    if not np.all(np.isfinite(x)):
        raise NumericalError("increment has non-finite entries")
    # Elementwise products are exactly symmetric: x_j * x_k == x_k * x_j.
    return x[..., :, None] * x[..., None, :]


def frobenius(m):
    return np.sqrt(np.sum(np.asarray(m, dtype=float) ** 2, axis=(-2, -1)))


def min_eigenvalue(m):
    """Smallest eigenvalue of a symmetric matrix or of each matrix in a stack."""
    m = _check_square(m)
    if m.shape[-1] == 1:
        return m[..., 0, 0].copy()
    return np.linalg.eigvalsh(m)[..., 0]


def is_psd(m, tol=0.0):
    """True iff the smallest eigenvalue is >= ``-tol * (1 + ||m||_F)``.

    Vectorized over stacks, in which case a boolean array is returned.
    """
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    m = _check_square(m)
    out = min_eigenvalue(m) >= -tol * (1.0 + frobenius(m))
    return bool(out) if np.ndim(out) == 0 else out


def psd_tolerance(m):
    """Rounding slack for averages of rank-one PSD terms: ``d * eps``.

    ``is_psd(m, psd_tolerance(m))`` applies ``d * eps * (1 + ||m||)``.
    """
    d = np.shape(m)[-1]
    return d * np.finfo(float).eps


def is_tensor4_symmetric(t, atol=0.0):
    """Check the (j,k)<->(k,j), (l,m)<->(m,l) and (jk)<->(lm) symmetries."""
    t = np.asarray(t, dtype=float)
    ok = np.allclose(t, np.swapaxes(t, -4, -3), rtol=0, atol=atol)
    ok &= np.allclose(t, np.swapaxes(t, -2, -1), rtol=0, atol=atol)
    pair = np.moveaxis(t, (-4, -3), (-2, -1))
    ok &= np.allclose(t, pair, rtol=0, atol=atol)
    return bool(ok)


def sym_basis(d, a, b):
    """The symmetrized indicator ``(E_ab + E_ba) / 2``."""
    e = np.zeros((d, d))
    e[a, b] += 0.5
    e[b, a] += 0.5
    return e
