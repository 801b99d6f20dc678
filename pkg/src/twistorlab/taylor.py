"""Exact truncated multivariate Taylor arithmetic.

A ``TaylorScalar`` stores the Taylor coefficients of a scalar function at a
chart point, in all chart directions, up to a truncation order in {0,1,2,3}.
Coefficients are stored (not derivatives), so the product of two jets is a
plain truncated convolution and the algebra is exact at the truncation order:
for polynomial inputs of degree <= order every coefficient is exact up to
roundoff.

Coefficient arrays carry an arbitrary leading batch shape, so one jet can
hold the expansion of a field at many sample points at once; all operations
are vectorised over the batch.
"""

from __future__ import annotations

import functools
import itertools
import math
from typing import Callable, Sequence

import numpy as np

from .errors import OrderBudgetError, SingularMetricError

MAX_ORDER = 3


@functools.lru_cache(maxsize=None)
def jet_space(dim: int, order: int) -> "JetSpace":
    if dim < 1:
        raise ValueError(f"jet dimension must be >= 1, got {dim}")
    if not 0 <= order <= MAX_ORDER:
        raise OrderBudgetError(
            f"truncation order {order} outside supported range [0, {MAX_ORDER}]"
        )
    return JetSpace(dim, order)


class JetSpace:
    """Monomial bookkeeping for jets of a fixed (dim, order).

    Precomputes the monomial list (sorted by total degree, so truncation is a
    prefix slice), the index triples for truncated products, and the
    coefficient shuffles implementing d/dx_i.
    """

    def __init__(self, dim: int, order: int):
        self.dim = dim
        self.order = order

        mono: list[tuple[int, ...]] = []
        self._ncoef_at: list[int] = []
        for deg in range(order + 1):
            for combo in itertools.combinations_with_replacement(range(dim), deg):
                exp = [0] * dim
                for axis in combo:
                    exp[axis] += 1
                mono.append(tuple(exp))
            self._ncoef_at.append(len(mono))
        self.mono = tuple(mono)
        self.ncoef = len(mono)
        self.index = {m: i for i, m in enumerate(mono)}
        self.degree = np.array([sum(m) for m in mono])
        self.var_index = [
            self.index[tuple(1 if j == i else 0 for j in range(dim))]
            for i in range(dim)
        ] if order >= 1 else []

        # ordered pairs (i, j) with deg_i + deg_j <= order, sorted by target k
        triples = []
        for i, a in enumerate(mono):
            for j, b in enumerate(mono):
                if self.degree[i] + self.degree[j] <= order:
                    k = self.index[tuple(x + y for x, y in zip(a, b))]
                    triples.append((k, i, j))
        triples.sort()
        ks = np.array([t[0] for t in triples])
        self._mul_i = np.array([t[1] for t in triples])
        self._mul_j = np.array([t[2] for t in triples])
        self._mul_unique_k, starts = np.unique(ks, return_index=True)
        self._mul_starts = starts

        # per-axis derivative shuffle: coeff of (alpha - e_axis) <- coeff(alpha) * alpha_axis
        self._deriv: list[tuple[np.ndarray, np.ndarray, np.ndarray]] = []
        for axis in range(dim):
            src, dst, fac = [], [], []
            for i, a in enumerate(mono):
                if a[axis] >= 1:
                    b = list(a)
                    b[axis] -= 1
                    src.append(i)
                    dst.append(self.index[tuple(b)])
                    fac.append(a[axis])
            self._deriv.append(
                (np.array(src, dtype=int), np.array(dst, dtype=int),
                 np.array(fac, dtype=float))
            )

    def ncoef_at(self, order: int) -> int:
        return self._ncoef_at[order]

    def multiply(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        prod = a[..., self._mul_i] * b[..., self._mul_j]
        out = np.zeros(prod.shape[:-1] + (self.ncoef,))
        out[..., self._mul_unique_k] = np.add.reduceat(prod, self._mul_starts, axis=-1)
        return out


class TaylorScalar:
    """One scalar function germ, truncated at ``space.order``.

    The order-0 coefficient always equals the plain evaluation of the
    function at the base point.
    """

    __slots__ = ("space", "c")
    __array_ufunc__ = None  # keep numpy from elementwise-absorbing us

    def __init__(self, space: JetSpace, coeffs: np.ndarray):
        self.space = space
        self.c = coeffs

    # -- construction -----------------------------------------------------

    @classmethod
    def constant(cls, space: JetSpace, values) -> "TaylorScalar":
        values = np.asarray(values, dtype=float)
        c = np.zeros(values.shape + (space.ncoef,))
        c[..., 0] = values
        return cls(space, c)

    @classmethod
    def variable(cls, space: JetSpace, values, axis: int) -> "TaylorScalar":
        if space.order < 1:
            raise OrderBudgetError("variable seed needs order >= 1")
        out = cls.constant(space, values)
        out.c[..., space.var_index[axis]] = 1.0
        return out

    # -- views ------------------------------------------------------------

    @property
    def order(self) -> int:
        return self.space.order

    @property
    def value(self) -> np.ndarray:
        return self.c[..., 0]

    def gradient(self) -> np.ndarray:
        """First partials, shape batch + (dim,)."""
        if self.order < 1:
            raise OrderBudgetError("gradient needs order >= 1")
        return self.c[..., self.space.var_index]

    def hessian(self) -> np.ndarray:
        """Second partials, shape batch + (dim, dim)."""
        if self.order < 2:
            raise OrderBudgetError("hessian needs order >= 2")
        n = self.space.dim
        out = np.empty(self.c.shape[:-1] + (n, n))
        for i in range(n):
            for j in range(i, n):
                e = [0] * n
                e[i] += 1
                e[j] += 1
                fac = 2.0 if i == j else 1.0
                out[..., i, j] = out[..., j, i] = fac * self.c[..., self.space.index[tuple(e)]]
        return out

    def third(self) -> np.ndarray:
        """Third partials, shape batch + (dim, dim, dim)."""
        if self.order < 3:
            raise OrderBudgetError("third derivatives need order >= 3")
        n = self.space.dim
        out = np.empty(self.c.shape[:-1] + (n, n, n))
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    e = [0] * n
                    e[i] += 1
                    e[j] += 1
                    e[k] += 1
                    fac = float(math.prod(math.factorial(m) for m in e))
                    out[..., i, j, k] = fac * self.c[..., self.space.index[tuple(e)]]
        return out

    def truncated(self, order: int) -> "TaylorScalar":
        if order > self.order:
            raise OrderBudgetError(
                f"cannot raise truncation order {self.order} -> {order}"
            )
        if order == self.order:
            return self
        sp = jet_space(self.space.dim, order)
        return TaylorScalar(sp, self.c[..., : sp.ncoef])

    def derivative(self, axis: int) -> "TaylorScalar":
        """d/dx_axis as a jet of one lower order (exact at that order)."""
        if self.order < 1:
            raise OrderBudgetError("cannot differentiate an order-0 jet")
        sp = jet_space(self.space.dim, self.order - 1)
        src, dst, fac = self.space._deriv[axis]
        out = np.zeros(self.c.shape[:-1] + (sp.ncoef,))
        out[..., dst] = self.c[..., src] * fac
        return TaylorScalar(sp, out)

    # -- ring operations ---------------------------------------------------

    def _align(self, other: "TaylorScalar") -> tuple["TaylorScalar", "TaylorScalar"]:
        if self.space.dim != other.space.dim:
            raise ValueError("jet dimension mismatch")
        order = min(self.order, other.order)
        return self.truncated(order), other.truncated(order)

    def __add__(self, other):
        if isinstance(other, TaylorScalar):
            a, b = self._align(other)
            return TaylorScalar(a.space, a.c + b.c)
        return self._add_const(other)

    __radd__ = __add__

    def __neg__(self):
        return TaylorScalar(self.space, -self.c)

    def __sub__(self, other):
        if isinstance(other, TaylorScalar):
            a, b = self._align(other)
            return TaylorScalar(a.space, a.c - b.c)
        return self._add_const(-np.asarray(other, dtype=float))

    def __rsub__(self, other):
        return (-self)._add_const(other)

    def _add_const(self, v) -> "TaylorScalar":
        v = np.asarray(v, dtype=float)
        batch = np.broadcast_shapes(self.c.shape[:-1], v.shape)
        out = np.broadcast_to(self.c, batch + (self.space.ncoef,)).copy()
        out[..., 0] += v
        return TaylorScalar(self.space, out)

    def __mul__(self, other):
        if isinstance(other, TaylorScalar):
            a, b = self._align(other)
            return TaylorScalar(a.space, a.space.multiply(a.c, b.c))
        v = np.asarray(other, dtype=float)
        return TaylorScalar(self.space, self.c * v[..., None])

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, TaylorScalar):
            return self * other._power_general(-1.0)
        v = np.asarray(other, dtype=float)
        return TaylorScalar(self.space, self.c / v[..., None])

    def __rtruediv__(self, other):
        return self._power_general(-1.0) * other

    def __pow__(self, p):
        if isinstance(p, (int, np.integer)) and p >= 0:
            out = TaylorScalar.constant(self.space, np.ones(self.c.shape[:-1]))
            for _ in range(int(p)):
                out = out * self
            return out
        return self._power_general(float(p))

    # -- composition with elementary functions ------------------------------

    def _compose(self, dk: Sequence[np.ndarray]) -> "TaylorScalar":
        """Horner evaluation of sum_k dk[k] * (self - self.value)^k."""
        h = TaylorScalar(self.space, self.c.copy())
        h.c[..., 0] = 0.0
        out = TaylorScalar.constant(self.space, np.broadcast_to(
            dk[self.order], self.c.shape[:-1]).copy())
        for k in range(self.order - 1, -1, -1):
            out = out * h
            out = out._add_const(dk[k])
        return out

    def _power_general(self, p: float) -> "TaylorScalar":
        a0 = self.value
        if np.any(a0 == 0.0):
            raise SingularMetricError("power/reciprocal of jet with zero value")
        if p != int(p) and np.any(a0 < 0.0):
            raise ValueError("fractional power of negative jet value")
        dk = []
        coef = np.ones_like(a0)
        fact = 1.0
        for k in range(self.order + 1):
            dk.append(coef * np.power(a0, p - k) / fact)
            coef = coef * (p - k)
            fact *= k + 1
        return self._compose(dk)

    def sin(self) -> "TaylorScalar":
        a0 = self.value
        table = [np.sin(a0), np.cos(a0), -np.sin(a0), -np.cos(a0)]
        dk = [table[k % 4] / math.factorial(k) for k in range(self.order + 1)]
        return self._compose(dk)

    def cos(self) -> "TaylorScalar":
        a0 = self.value
        table = [np.cos(a0), -np.sin(a0), -np.cos(a0), np.sin(a0)]
        dk = [table[k % 4] / math.factorial(k) for k in range(self.order + 1)]
        return self._compose(dk)

    def exp(self) -> "TaylorScalar":
        e = np.exp(self.value)
        dk = [e / math.factorial(k) for k in range(self.order + 1)]
        return self._compose(dk)

    def log(self) -> "TaylorScalar":
        a0 = self.value
        if np.any(a0 <= 0.0):
            raise ValueError("log of non-positive jet value")
        dk = [np.log(a0)]
        for k in range(1, self.order + 1):
            dk.append(((-1.0) ** (k - 1)) / (k * np.power(a0, k)))
        return self._compose(dk)

    def sqrt(self) -> "TaylorScalar":
        return self._power_general(0.5)

    def compose_univariate(self, derivs: Sequence[np.ndarray]) -> "TaylorScalar":
        """Compose with a univariate g given g^(k) at the jet's value.

        ``derivs[k]`` is the k-th plain derivative of g (not divided by k!).
        Needed for tabulated profiles where g is a spline.
        """
        if len(derivs) < self.order + 1:
            raise OrderBudgetError("not enough derivatives for composition")
        dk = [np.asarray(derivs[k], dtype=float) / math.factorial(k)
              for k in range(self.order + 1)]
        return self._compose(dk)


# -- generic scalar functions (floats, arrays, or jets) ----------------------

def sin(x):
    return x.sin() if isinstance(x, TaylorScalar) else np.sin(x)


def cos(x):
    return x.cos() if isinstance(x, TaylorScalar) else np.cos(x)


def exp(x):
    return x.exp() if isinstance(x, TaylorScalar) else np.exp(x)


def log(x):
    return x.log() if isinstance(x, TaylorScalar) else np.log(x)


def sqrt(x):
    return x.sqrt() if isinstance(x, TaylorScalar) else np.sqrt(x)


def seeds_at(points: np.ndarray, order: int) -> list[TaylorScalar]:
    """Coordinate variable jets at a batch of points, shape (B, dim)."""
    points = np.asarray(points, dtype=float)
    if points.ndim != 2:
        raise ValueError("points must have shape (B, dim)")
    space = jet_space(points.shape[1], order)
    return [TaylorScalar.variable(space, points[:, i], i)
            for i in range(points.shape[1])]


# -- object arrays of jets ----------------------------------------------------

def component(nested, idx: tuple[int, ...]):
    """Pick nested[idx] from a list-of-lists component structure."""
    out = nested
    for i in idx:
        out = out[i]
    return out


def jet_array(entries, space: JetSpace, batch_shape: tuple[int, ...],
              shape: tuple[int, ...] | None = None) -> np.ndarray:
    """Coerce a nested structure of jets/numbers into an object ndarray of jets.

    ``shape`` is the tensor shape; inferring it from the nesting alone would
    mis-detect batch-shaped ndarray leaves, so callers that allow such leaves
    must pass it.
    """
    if shape is None:
        probe = entries
        shape = ()
        while isinstance(probe, (list, tuple)):
            shape = shape + (len(probe),)
            probe = probe[0]
    arr = np.empty(shape, dtype=object)
    for idx in itertools.product(*(range(s) for s in shape)) if shape else [()]:
        e = component(entries, idx)
        if isinstance(e, TaylorScalar):
            arr[idx] = e.truncated(min(e.order, space.order))
        else:
            v = np.broadcast_to(np.asarray(e, dtype=float), batch_shape)
            arr[idx] = TaylorScalar.constant(space, v)
    return arr


def _extract(a: np.ndarray, fn: Callable[[TaylorScalar], np.ndarray],
             extra: int) -> np.ndarray:
    """Stack fn(entry) over an object array; batch axes move to the front."""
    flat = a.reshape(-1)
    stacked = np.stack([fn(e) for e in flat])  # (prod(s), batch..., extra...)
    stacked = stacked.reshape(a.shape + stacked.shape[1:])
    # (s..., batch..., e...) -> (batch..., e..., s...)
    ns = a.ndim
    nb = stacked.ndim - ns - extra
    perm = (tuple(range(ns, ns + nb)) + tuple(range(ns + nb, stacked.ndim))
            + tuple(range(ns)))
    return np.transpose(stacked, perm)


def jet_values(a: np.ndarray) -> np.ndarray:
    """(batch..., s...) array of order-0 coefficients."""
    return _extract(a, lambda e: e.value, extra=0)


def jet_partials(a: np.ndarray) -> np.ndarray:
    """(batch..., dim, s...) array of first partials."""
    return _extract(a, lambda e: e.gradient(), extra=1)


def jet_map(a: np.ndarray, fn) -> np.ndarray:
    out = np.empty(a.shape, dtype=object)
    of, af = out.reshape(-1), a.reshape(-1)
    for i, e in enumerate(af):
        of[i] = fn(e)
    return out


def jet_derivative_stack(a: np.ndarray, dim: int) -> np.ndarray:
    """Object array (dim, *a.shape) of coordinate partials (order drops by 1)."""
    out = np.empty((dim,) + a.shape, dtype=object)
    for axis in range(dim):
        of, af = out[axis].reshape(-1), a.reshape(-1)
        for i, e in enumerate(af):
            of[i] = e.derivative(axis)
    return out


def jet_matvec(A: np.ndarray, v: np.ndarray) -> np.ndarray:
    n, m = A.shape
    out = np.empty(n, dtype=object)
    for i in range(n):
        acc = A[i, 0] * v[0]
        for j in range(1, m):
            acc = acc + A[i, j] * v[j]
        out[i] = acc
    return out


def jet_matmul(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    n, k = A.shape
    k2, m = B.shape
    out = np.empty((n, m), dtype=object)
    for i in range(n):
        for j in range(m):
            acc = A[i, 0] * B[0, j]
            for l in range(1, k):
                acc = acc + A[i, l] * B[l, j]
            out[i, j] = acc
    return out


def jet_inv(A: np.ndarray, space: JetSpace, batch_shape: tuple[int, ...]) -> np.ndarray:
    """Gauss-Jordan inverse of a jet matrix.

    No pivoting: intended for symmetric positive-definite metric matrices,
    whose leading minors keep the pivots away from zero.
    """
    n = A.shape[0]
    M = np.empty((n, 2 * n), dtype=object)
    for i in range(n):
        for j in range(n):
            M[i, j] = A[i, j]
            M[i, n + j] = TaylorScalar.constant(space, np.full(batch_shape, 1.0 if i == j else 0.0))
    for col in range(n):
        piv = M[col, col]
        if np.any(np.abs(piv.value) < 1e-300):
            raise SingularMetricError(f"zero pivot in metric inversion at column {col}")
        pinv = piv ** -1
        for j in range(col, 2 * n):
            M[col, j] = M[col, j] * pinv
        for row in range(n):
            if row == col:
                continue
            f = M[row, col]
            if isinstance(f, TaylorScalar) and not np.any(f.c):
                continue
            for j in range(col, 2 * n):
                M[row, j] = M[row, j] - f * M[col, j]
    return M[:, n:].copy()


def antiderivative_along_axis(jet: TaylorScalar, axis: int,
                              const_values: np.ndarray) -> TaylorScalar:
    """Formal antiderivative along one coordinate, for jets depending only on it.

    The monomials of ``jet`` must all be pure powers of ``axis``; every other
    integration constant would be ambiguous.
    """
    space = jet.space
    if space.order >= MAX_ORDER:
        raise OrderBudgetError("antiderivative would exceed the order budget")
    out_space = jet_space(space.dim, space.order + 1)
    out = TaylorScalar.constant(out_space, np.asarray(const_values, dtype=float))
    for i, alpha in enumerate(space.mono):
        coeffs = jet.c[..., i]
        if not np.any(coeffs):
            continue
        if sum(alpha) != alpha[axis]:
            raise ValueError("jet depends on axes other than the integration axis")
        beta = list(alpha)
        beta[axis] += 1
        out.c[..., out_space.index[tuple(beta)]] = coeffs / beta[axis]
    return out
