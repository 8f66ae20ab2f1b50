"""Test functions g on nonnegative symmetric matrices, with derivatives.

Derivative convention: the entries ``x[j, k]`` and ``x[k, j]`` are one
coordinate, and the gradient is the symmetric matrix ``G`` for which

    g(x + e) = g(x) + sum_{j,k} G[j, k] e[j, k] + o(|e|)

for every symmetric perturbation ``e``, with the sum over all ordered pairs.
The Hessian ``H[j, k, l, m]`` is the analogous symmetric second-order
coefficient. Under this convention the bias correction and the asymptotic
variance are full sums over all ``d**4`` ordered index tuples.

All callables act on stacks: ``value`` maps ``(..., d, d)`` to ``(...)``,
``grad`` to ``(..., d, d)`` and ``hess`` to ``(..., d, d, d, d)``.
"""

from dataclasses import dataclass
from math import gamma, pi, sqrt
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, DimensionError, DomainError, NumericalError
from .matcore import min_eigenvalue, sym_basis


@dataclass(frozen=True)
class TestFunction:
    """A functional ``g`` with its first two derivatives.

    ``smooth_on_boundary`` is False when ``g`` is only C^3 on positive
    definite matrices; evaluation at singular matrices then raises.
    """

    __test__ = False  # keep pytest from collecting this class

    name: str
    dim: int
    value: Callable
    grad: Optional[Callable] = None
    hess: Optional[Callable] = None
    growth_order: float = 1.0
    smooth_on_boundary: bool = True
    nonnegative: bool = False

    def __call__(self, x):
        x = self._prepare(x)
        return self.value(x)

    def gradient(self, x):
        if self.grad is None:
            raise NotImplementedError(f"{self.name} has no gradient")
        return self.grad(self._prepare(x))

    def hessian(self, x):
        if self.hess is None:
            raise NotImplementedError(f"{self.name} has no Hessian")
        return self.hess(self._prepare(x))

    def _prepare(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim < 2 or x.shape[-2:] != (self.dim, self.dim):
            raise DimensionError(
                f"{self.name} expects {self.dim}x{self.dim} matrices, got {x.shape}"
            )
        if not self.smooth_on_boundary:
            bad = np.atleast_1d(min_eigenvalue(x) <= 0)
            if bad.any():
                idx = int(np.flatnonzero(bad)[0])
                raise DomainError(
                    f"{self.name} is only smooth on positive definite matrices; "
                    f"singular argument at index {idx}",
                    index=idx,
                )
        return x


def eval_with_derivatives(g, x):
    """Return ``(g(x), grad g(x), hess g(x))`` for one matrix or a stack."""
    val = g(x)
    grad = g.gradient(x)
    hess = g.hessian(x)
    if not (np.all(np.isfinite(val)) and np.all(np.isfinite(grad)) and np.all(np.isfinite(hess))):
        raise NumericalError(f"{g.name}: non-finite derivative at the given point")
    return val, grad, hess


# ---------------------------------------------------------------------------
# built-in functions


def identity_component(a=0, b=0, dim=None):
    """``g(x) = x[a, b]``; linear, so the Hessian vanishes."""
    d = dim if dim is not None else max(a, b) + 1
    if not (0 <= a < d and 0 <= b < d):
        raise ConfigError(f"identity indices ({a},{b}) out of range for d={d}")
    basis = sym_basis(d, a, b)

    def value(x):
        return x[..., a, b].copy()

    def grad(x):
        return np.broadcast_to(basis, x.shape).copy()

    def hess(x):
        return np.zeros(x.shape[:-2] + (d, d, d, d))

    return TestFunction(
        name=f"identity:a={a},b={b}",
        dim=d,
        value=value,
        grad=grad,
        hess=hess,
        growth_order=1.0,
        nonnegative=(a == b),
    )


def power(p):
    """One-dimensional power ``g(x) = x**p``; ``p = 2`` is the quarticity."""
    p = float(p)
    if p <= 0:
        raise ConfigError("power exponent must be positive")
    integer = p.is_integer()

    def value(x):
        return x[..., 0, 0] ** p

    def grad(x):
        return (p * x[..., 0, 0] ** (p - 1))[..., None, None] if p != 1 else np.ones_like(x)

    def hess(x):
        if p == 1:
            h = np.zeros(x.shape[:-2])
        else:
            h = p * (p - 1) * x[..., 0, 0] ** (p - 2)
        return h[..., None, None, None, None]

    return TestFunction(
        name=f"power:p={p:g}",
        dim=1,
        value=value,
        grad=grad,
        hess=hess,
        growth_order=max(p, 1.0),
        # Integer powers are polynomials; other powers are C^3 only away from 0.
        smooth_on_boundary=integer,
        nonnegative=True,
    )


def trace_power(q, dim):
    """``g(x) = trace(x**q)`` for an integer ``q >= 1``."""
    if int(q) != q or q < 1:
        raise ConfigError("trace_power needs an integer q >= 1")
    q = int(q)
    d = int(dim)

    def value(x):
        return np.trace(np.linalg.matrix_power(x, q), axis1=-2, axis2=-1)

    def grad(x):
        m = q * np.linalg.matrix_power(x, q - 1)
        return 0.5 * (m + np.swapaxes(m, -1, -2))  # exact symmetry despite rounding

    def hess(x):
        out = np.zeros(x.shape[:-2] + (d, d, d, d))
        if q < 2:
            return out
        pows = [np.linalg.matrix_power(x, r) for r in range(q - 1)]
        for r in range(q - 1):
            a, b = pows[r], pows[q - 2 - r]
            out += np.einsum("...jl,...mk->...jklm", a, b)
            out += np.einsum("...jm,...lk->...jklm", a, b)
        return 0.5 * q * out

    return TestFunction(
        name=f"trace_power:q={q}",
        dim=d,
        value=value,
        grad=grad,
        hess=hess,
        growth_order=float(q),
        nonnegative=True,
    )


def entry_product(a, b, e, f, dim=None):
    """``g(x) = x[a, b] * x[e, f]``, e.g. a covariance times a variance."""
    d = dim if dim is not None else max(a, b, e, f) + 1
    if not all(0 <= i < d for i in (a, b, e, f)):
        raise ConfigError(f"entry_product indices out of range for d={d}")
    sab, sef = sym_basis(d, a, b), sym_basis(d, e, f)
    h = np.einsum("jk,lm->jklm", sab, sef)
    h = h + np.einsum("jk,lm->jklm", sef, sab)

    def value(x):
        return x[..., a, b] * x[..., e, f]

    def grad(x):
        return x[..., e, f, None, None] * sab + x[..., a, b, None, None] * sef

    def hess(x):
        return np.broadcast_to(h, x.shape[:-2] + h.shape).copy()

    return TestFunction(
        name=f"entry_product:a={a},b={b},e={e},f={f}",
        dim=d,
        value=value,
        grad=grad,
        hess=hess,
        growth_order=2.0,
        nonnegative=(a == b and e == f) or (a == e and b == f),
    )


# ---------------------------------------------------------------------------
# contractions with the Gaussian covariance structure


def gaussian_contraction(t, x):
    """``sum_{jklm} t[j,k,l,m] (x[j,l] x[k,m] + x[j,m] x[k,l])``, vectorized."""
    cov = x[..., :, None, :, None] * x[..., None, :, None, :]  # x_jl x_km
    cov = cov + x[..., :, None, None, :] * x[..., None, :, :, None]  # x_jm x_kl
    return np.sum(t * cov, axis=(-4, -3, -2, -1))


def avar_function(g):
    """The asymptotic-variance integrand

    ``hbar(x) = sum_{jklm} dg_jk(x) dg_lm(x) (x_jl x_km + x_jm x_kl)``.

    It equals ``2 trace(G x G x)`` with ``G`` the symmetric gradient, hence is
    nonnegative on PSD matrices. The result supports evaluation only.
    """
    if g.grad is None:
        raise ConfigError(f"{g.name} has no gradient; cannot build its variance function")

    def value(x):
        m = g.grad(x) @ x
        return 2.0 * np.sum(m * np.swapaxes(m, -1, -2), axis=(-2, -1))

    return TestFunction(
        name=f"hbar[{g.name}]",
        dim=g.dim,
        value=value,
        growth_order=max(2 * g.growth_order - 2, 0.0),
        smooth_on_boundary=g.smooth_on_boundary,
        nonnegative=True,
    )


def bias_function(g):
    """``f(x) = sum_{jklm} d2g_jklm(x) (x_jl x_km + x_jm x_kl)``.

    ``V(f) / (2 theta)`` is the statistical-error bias of the theta window and
    ``f / (2 k_n)`` is the per-window correction in the debiased estimators.
    """
    if g.hess is None:
        raise ConfigError(f"{g.name} has no Hessian; cannot build its bias function")

    def value(x):
        return gaussian_contraction(g.hess(x), x)

    return TestFunction(
        name=f"bias[{g.name}]",
        dim=g.dim,
        value=value,
        growth_order=g.growth_order,
        smooth_on_boundary=g.smooth_on_boundary,
    )


def gaussian_contraction_fd(fn, x, h=1e-3):
    """Finite-difference version of ``gaussian_contraction(hess fn(x), x)``.

    Works for evaluation-only functions. With ``x = A A^T`` the contraction
    is ``2 * sum_{a<=b} w_ab * D^2 fn(x)[A B_ab A^T]`` over the symmetric unit
    basis ``B_ab`` (``w = 1`` on the diagonal, ``1/2`` off it). The bumped points
    ``A (I +/- h B) A^T`` stay positive semidefinite for ``h < 1``.
    """
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    w, v = np.linalg.eigh(x)
    a = v * np.sqrt(np.clip(w, 0.0, None))[..., None, :]
    base = fn(x)
    total = np.zeros(np.shape(base))
    for i in range(d):
        for j in range(i, d):
            b = sym_basis(d, i, j) * (1.0 if i == j else 2.0)
            step = h * (a @ b @ np.swapaxes(a, -1, -2))
            second = (fn(x + step) - 2.0 * base + fn(x - step)) / (h * h)
            total += second if i == j else 0.5 * second
    return 2.0 * total


def gaussian_abs_moment(q):
    """q-th absolute moment of a standard normal: ``2^{q/2} Gamma((q+1)/2) / sqrt(pi)``."""
    if q < 0:
        raise ValueError("q must be nonnegative")
    return 2.0 ** (q / 2.0) * gamma((q + 1.0) / 2.0) / sqrt(pi)


# ---------------------------------------------------------------------------
# finite-difference verification


def check_derivatives(g, x, h=1e-5):
    """Max relative error between analytic and central-difference derivatives.

    Off-diagonal coordinates are bumped at ``(j, k)`` and ``(k, j)`` together,
    which moves ``g`` by twice the ``[j, k]`` gradient entry. Errors are
    scaled by ``max(1, max |analytic|)`` per derivative order.
    """
    if h <= 0:
        raise ValueError("step must be positive")
    x = np.asarray(x, dtype=float)
    d = g.dim
    fd_grad = np.zeros((d, d))
    fd_hess = np.zeros((d, d, d, d))
    for j in range(d):
        for k in range(j, d):
            bump = np.zeros((d, d))
            bump[j, k] = bump[k, j] = h
            scale = 2.0 * h if j == k else 4.0 * h
            fd_grad[j, k] = fd_grad[k, j] = (g(x + bump) - g(x - bump)) / scale
            if g.hess is not None:
                dg = (g.gradient(x + bump) - g.gradient(x - bump)) / scale
                fd_hess[:, :, j, k] = fd_hess[:, :, k, j] = dg

    grad = g.gradient(x)
    err = np.max(np.abs(fd_grad - grad)) / max(1.0, np.max(np.abs(grad)))
    if g.hess is not None:
        hess = g.hessian(x)
        err = max(err, np.max(np.abs(fd_hess - hess)) / max(1.0, np.max(np.abs(hess))))
    return float(err)


# ---------------------------------------------------------------------------
# name-based construction, e.g. "power:p=2" or "identity:a=0,b=1"


def _parse_params(body):
    params = {}
    if not body:
        return params
    for item in body.split(","):
        if "=" not in item:
            raise ConfigError(f"bad function parameter {item!r}; expected key=value")
        key, val = item.split("=", 1)
        params[key.strip()] = float(val)
    return params


def parse_function(spec, dim=1):
    """Build a built-in test function from its textual name."""
    name, _, body = spec.strip().partition(":")
    params = _parse_params(body)
    try:
        if name == "identity":
            return identity_component(int(params.get("a", 0)), int(params.get("b", 0)), dim=dim)
        if name == "power":
            if dim != 1:
                raise ConfigError("power functions are one-dimensional")
            return power(params.get("p", 1.0))
        if name == "trace_power":
            return trace_power(params.get("q", 1.0), dim)
        if name == "entry_product":
            idx = [int(params[k]) for k in ("a", "b", "e", "f")]
            return entry_product(*idx, dim=dim)
    except KeyError as exc:
        raise ConfigError(f"missing parameter {exc} in function spec {spec!r}") from None
    raise ConfigError(f"unknown function {name!r}")


def power_exponent(g):
    """The exponent of a ``power:p=...`` function, else None."""
    if g.name.startswith("power:"):
        return _parse_params(g.name.split(":", 1)[1])["p"]
    return None
