"""Typed tensor fields on a chart and the first-order natural operators.

p-forms are stored with fully antisymmetric covariant component arrays
(simplicity over memory; the engine caps the chart dimension at 6). All
frame-summed operators (codifferential, rough Laplacian) contract against the
orthonormal frame of the evaluation point rather than coordinate indices with
metric factors.

Sign conventions:

    (a ∧ b)(X, Y)   = a(X) b(Y) - a(Y) b(X)
    delta           = -sum_i e_i ⌟ nabla_{e_i}      (validated operationally:
                      nabla*nabla u = Δu/2 must hold on Killing 1-forms)
    nabla*nabla     = -sum_i nabla^2_{e_i, e_i}
    Δ               = d delta + delta d
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import taylor
from .chart import Geometry, MetricField
from .errors import OrderBudgetError, ValenceError
from .taylor import TaylorScalar, jet_space

COV, CON = "d", "u"


def _perm_sign(perm: Sequence[int]) -> int:
    inv = sum(1 for i in range(len(perm)) for j in range(i + 1, len(perm))
              if perm[i] > perm[j])
    return -1 if inv % 2 else 1


class TensorField:
    """A (p,q)-tensor field given by a component function on chart scalars.

    ``fn`` maps a list of per-axis scalars (floats or Taylor jets) to a
    nested component structure of shape (n,)*len(valence); ``valence`` lists
    slots as "d" (covariant) or "u" (contravariant). Forms set
    ``alternating`` and store fully antisymmetric components.
    """

    def __init__(self, valence: Sequence[str], fn: Callable,
                 alternating: bool = False, name: str = ""):
        self.valence = tuple(valence)
        if any(k not in (COV, CON) for k in self.valence):
            raise ValenceError(f"bad valence spec {valence!r}")
        self.fn = fn
        self.alternating = alternating
        if alternating and any(k != COV for k in self.valence):
            raise ValenceError("alternating fields must be fully covariant")
        self.name = name

    @property
    def rank(self) -> int:
        return len(self.valence)

    def jets(self, points: np.ndarray, order: int, dim: int) -> "JetTensor":
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        seeds = taylor.seeds_at(pts, order)
        raw = self.fn(seeds)
        space = jet_space(dim, order)
        comps = taylor.jet_array(raw, space, (pts.shape[0],))
        if comps.shape != (dim,) * self.rank:
            raise ValenceError(
                f"field '{self.name}' returned shape {comps.shape}, "
                f"expected {(dim,) * self.rank}"
            )
        return JetTensor(self.valence, comps, space, alternating=self.alternating)

    def values(self, points: np.ndarray, dim: int) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        xs = [pts[:, i] for i in range(dim)]
        raw = self.fn(xs)
        B = pts.shape[0]
        out = np.empty((B,) + (dim,) * self.rank)
        for idx in itertools.product(range(dim), repeat=self.rank):
            e = taylor.component(raw, idx)
            v = e.value if isinstance(e, TaylorScalar) else np.asarray(e, dtype=float)
            out[(slice(None),) + idx] = np.broadcast_to(v, (B,))
        return out


def vector_field(fn: Callable, name: str = "") -> TensorField:
    return TensorField((CON,), fn, name=name)


def one_form(fn: Callable, name: str = "") -> TensorField:
    return TensorField((COV,), fn, alternating=True, name=name)


def constant_vector_field(dim: int, components: Sequence[float],
                          name: str = "") -> TensorField:
    comp = tuple(float(c) for c in components)

    def fn(x):
        return list(comp)

    return TensorField((CON,), fn, name=name or f"const{comp}")


@dataclass
class JetTensor:
    """Tensor component jets at a batch of points."""

    valence: tuple[str, ...]
    comps: np.ndarray  # object array of TaylorScalar, shape (n,)*rank
    space: taylor.JetSpace
    alternating: bool = False

    @property
    def order(self) -> int:
        return self.space.order

    @property
    def dim(self) -> int:
        return self.space.dim

    def value(self) -> np.ndarray:
        return taylor.jet_values(self.comps)

    def partials(self) -> np.ndarray:
        return taylor.jet_partials(self.comps)

    def map(self, fn) -> "JetTensor":
        return JetTensor(self.valence, taylor.jet_map(self.comps, fn),
                         self.space, self.alternating)


def covariant_derivative_jets(T: JetTensor, geo: Geometry) -> JetTensor:
    """nabla T as jets; a new covariant slot is prepended, order drops by 1.

    For each contravariant slot i:  + Γ^i_{a m} T^{..m..}
    for each covariant slot j:      - Γ^m_{a j} T_{..m..}
    """
    if T.order < 1:
        raise OrderBudgetError(
            "covariant derivative needs component jets of order >= 1; "
            "the requested chain exceeds the order-3 metric budget"
        )
    n = T.dim
    out_order = T.order - 1
    gamma = taylor.jet_map(geo.gamma_jets,
                           lambda e: e.truncated(min(e.order, out_order)))
    comps = T.comps
    out = np.empty((n,) + comps.shape, dtype=object)
    rank = len(T.valence)
    for a in range(n):
        for idx in itertools.product(range(n), repeat=rank):
            acc = comps[idx].derivative(a)
            for slot, kind in enumerate(T.valence):
                for m in range(n):
                    midx = idx[:slot] + (m,) + idx[slot + 1:]
                    if kind == CON:
                        acc = acc + gamma[idx[slot], a, m] * comps[midx]
                    else:
                        acc = acc - gamma[m, a, idx[slot]] * comps[midx]
            out[(a,) + idx] = acc
    return JetTensor((COV,) + T.valence, out, jet_space(n, out_order))


def exterior_derivative_jets(T: JetTensor) -> JetTensor:
    """d of an alternating jet tensor; metric-independent, order drops by 1."""
    if not T.alternating and T.valence:
        raise ValenceError("exterior derivative needs an alternating field")
    if T.order < 1:
        raise OrderBudgetError("exterior derivative needs order >= 1 jets")
    n = T.dim
    p = len(T.valence)
    stacked = taylor.jet_derivative_stack(T.comps, n)  # (a, i_1..i_p)
    out = np.empty((n,) * (p + 1), dtype=object)
    for idx in itertools.product(range(n), repeat=p + 1):
        acc = None
        for a in range(p + 1):
            rest = idx[:a] + idx[a + 1:]
            term = stacked[(idx[a],) + rest]
            if a % 2 == 1:
                term = -term
            acc = term if acc is None else acc + term
        out[idx] = acc
    return JetTensor((COV,) * (p + 1), out, jet_space(n, T.order - 1),
                     alternating=True)


def trace_first_two_jets(T: JetTensor, geo: Geometry) -> JetTensor:
    """g^{ab} T_{a b ...} with jet-valued inverse metric (both slots covariant)."""
    n = T.dim
    ginv = taylor.jet_map(geo.ginv_jets,
                          lambda e: e.truncated(min(e.order, T.order)))
    rest = T.comps.shape[2:]
    out = np.empty(rest, dtype=object)
    for idx in itertools.product(range(n), repeat=len(rest)):
        acc = None
        for a in range(n):
            for b in range(n):
                term = ginv[a, b] * T.comps[(a, b) + idx]
                acc = term if acc is None else acc + term
        out[idx] = acc
    if not rest:
        return JetTensor((), out.reshape(()), T.space)
    return JetTensor(T.valence[2:], out, T.space)


def codifferential_jets(omega: JetTensor, geo: Geometry) -> JetTensor:
    """delta omega as jets: -g^{ab} (nabla omega)_{a b ...}."""
    nab = covariant_derivative_jets(omega, geo)
    tr = trace_first_two_jets(nab, geo)
    return JetTensor(tr.valence, taylor.jet_map(tr.comps, lambda e: -e),
                     tr.space, alternating=bool(tr.valence))


# -- pointwise multilinear algebra (batched float arrays) ---------------------

def alt(T: np.ndarray) -> np.ndarray:
    """Full antisymmetrisation over all axes after the batch axis."""
    k = T.ndim - 1
    if k <= 1:
        return T
    out = np.zeros_like(T)
    for perm in itertools.permutations(range(k)):
        axes = (0,) + tuple(1 + p for p in perm)
        out += _perm_sign(perm) * np.transpose(T, axes)
    return out / math.factorial(k)


def wedge(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Wedge of batched forms; degree-0 factors multiply pointwise."""
    p, q = a.ndim - 1, b.ndim - 1
    if p == 0:
        return a.reshape(a.shape + (1,) * q) * b
    if q == 0:
        return a * b.reshape(b.shape + (1,) * p)
    outer = a.reshape(a.shape + (1,) * q) * b.reshape(b.shape[:1] + (1,) * p + b.shape[1:])
    factor = math.factorial(p + q) / (math.factorial(p) * math.factorial(q))
    return factor * alt(outer)


def interior(X: np.ndarray, omega: np.ndarray) -> np.ndarray:
    """X ⌟ omega for a contravariant X (B, n) and a p-form (B, n, ..., n)."""
    if omega.ndim < 2:
        raise ValenceError("interior product needs a form of degree >= 1")
    return np.einsum('bi,bi...->b...', X, omega)


def sharp(geo_or_ginv, omega: np.ndarray) -> np.ndarray:
    ginv = geo_or_ginv.ginv if isinstance(geo_or_ginv, Geometry) else geo_or_ginv
    return np.einsum('bij,bj->bi', ginv, omega)


def flat(geo_or_g, X: np.ndarray) -> np.ndarray:
    g = geo_or_g.g if isinstance(geo_or_g, Geometry) else geo_or_g
    return np.einsum('bij,bj->bi', g, X)


def form_norm_sq(geo: Geometry, omega: np.ndarray) -> np.ndarray:
    """|omega|^2 with the form normalisation (1/p! times full contraction)."""
    p = omega.ndim - 1
    up = omega
    for slot in range(p):
        up = np.moveaxis(
            np.einsum('bij,bj...->bi...', geo.ginv, np.moveaxis(up, slot + 1, 1)),
            1, slot + 1)
    axes = tuple(range(1, p + 1))
    return np.einsum(omega, [0, *axes], up, [0, *axes], [0]) / math.factorial(p)


def tensor_norm_sq(geo: Geometry, T: np.ndarray, valence: Sequence[str]) -> np.ndarray:
    """Full metric contraction |T|^2 without combinatorial factors."""
    other = T
    for slot, kind in enumerate(valence):
        mat = geo.ginv if kind == COV else geo.g
        other = np.moveaxis(
            np.einsum('bij,bj...->bi...', mat, np.moveaxis(other, slot + 1, 1)),
            1, slot + 1)
    axes = tuple(range(1, len(valence) + 1))
    return np.einsum(T, [0, *axes], other, [0, *axes], [0])


# -- operator entry points -----------------------------------------------------

def _form_jets(omega: TensorField, metric: MetricField, points, order: int) -> JetTensor:
    return omega.jets(points, order, metric.dim)


def exterior_derivative(omega: TensorField, metric: MetricField,
                        points: np.ndarray) -> np.ndarray:
    """d(omega) values at points, shape (B, n, ..., n) with p+1 slots."""
    if omega.rank >= metric.dim:
        raise ValenceError("exterior derivative needs p < n")
    jt = _form_jets(omega, metric, points, order=1)
    return exterior_derivative_jets(jt).value()


def codifferential(omega: TensorField, metric: MetricField,
                   points: np.ndarray) -> np.ndarray:
    """delta(omega) values; frame-summed -e_i ⌟ nabla_{e_i} omega."""
    if omega.rank < 1:
        raise ValenceError("codifferential needs a form of degree >= 1")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    geo = Geometry(metric, pts, order=2)
    jt = _form_jets(omega, metric, pts, order=1)
    nab = covariant_derivative_jets(jt, geo).value()  # (B, a, i_1..i_p)
    E = geo.frame
    return -np.einsum('bpa,bqa,bpq...->b...', E, E, nab)


def covariant_derivative(T: TensorField, X: np.ndarray, metric: MetricField,
                         points: np.ndarray) -> np.ndarray:
    """(nabla_X T) values; X is a constant coordinate-component vector or (B,n)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    geo = Geometry(metric, pts, order=2)
    jt = T.jets(pts, 1, metric.dim)
    nab = covariant_derivative_jets(jt, geo).value()
    Xb = np.broadcast_to(np.asarray(X, dtype=float), (pts.shape[0], metric.dim))
    return np.einsum('ba,ba...->b...', Xb, nab)


def second_covariant_derivative(T: TensorField, X: np.ndarray, Y: np.ndarray,
                                metric: MetricField, points: np.ndarray) -> np.ndarray:
    """nabla^2_{X,Y} T = (nabla nabla T)(X, Y, ...) values."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    geo = Geometry(metric, pts, order=3)
    jt = T.jets(pts, 2, metric.dim)
    nab2 = covariant_derivative_jets(
        covariant_derivative_jets(jt, geo), geo).value()
    B = pts.shape[0]
    Xb = np.broadcast_to(np.asarray(X, dtype=float), (B, metric.dim))
    Yb = np.broadcast_to(np.asarray(Y, dtype=float), (B, metric.dim))
    return np.einsum('ba,bc,bac...->b...', Xb, Yb, nab2)


def laplacians_on_1forms(omega: TensorField, metric: MetricField,
                         points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(rough, hodge) Laplacian values of a 1-form field.

    rough = nabla*nabla omega = -sum_i nabla^2_{e_i,e_i} omega
    hodge = d delta omega + delta d omega
    """
    if omega.rank != 1:
        raise ValenceError("laplacians_on_1forms needs a 1-form")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    geo = Geometry(metric, pts, order=3)
    jt = omega.jets(pts, 2, metric.dim)
    return laplacians_from_jets(jt, geo)


def laplacians_from_jets(jt: JetTensor, geo: Geometry) -> tuple[np.ndarray, np.ndarray]:
    """Laplacians of a 1-form given its order-2 jets on a prepared geometry."""
    E = geo.frame
    nab = covariant_derivative_jets(jt, geo)
    nab2 = covariant_derivative_jets(nab, geo).value()  # (B, a, b, j)
    rough = -np.einsum('bpa,bqa,bpqj->bj', E, E, nab2)

    delta_jet = codifferential_jets(jt, geo)  # scalar jet, order 1
    d_delta = delta_jet.comps[()].gradient()  # (B, n)

    d_omega = exterior_derivative_jets(jt)  # 2-form, order 1
    nab_d = covariant_derivative_jets(d_omega, geo).value()  # (B, a, i, j)
    delta_d = -np.einsum('bpa,bqa,bpqj->bj', E, E, nab_d)
    return rough, d_delta + delta_d


# -- 2-forms as skew endomorphisms ---------------------------------------------

@dataclass
class TwoFormAsEndo:
    """A 2-form u and its metric-associated skew endomorphism U.

    Linked by U(X) = u(X, .)^sharp, i.e. <U X, Y> = u(X, Y). The form norm
    |u|^2 = (1/2) <u(e_i), u(e_i)> differs from the tensor norm by a factor
    of 2 (sqrt(2) on norms).
    """

    form: np.ndarray  # (B, n, n) covariant, antisymmetric
    endo: np.ndarray  # (B, n, n) mixed components U^i_j

    @classmethod
    def from_form(cls, form: np.ndarray, geo: Geometry) -> "TwoFormAsEndo":
        endo = np.einsum('bik,bjk->bij', geo.ginv, form)
        return cls(form=form, endo=endo)

    @classmethod
    def from_endo(cls, endo: np.ndarray, geo: Geometry) -> "TwoFormAsEndo":
        # u_ij = <U d_i, d_j> = g_jm U^m_i
        form = np.einsum('bjm,bmi->bij', geo.g, endo)
        return cls(form=form, endo=endo)

    def form_frame(self, geo: Geometry) -> np.ndarray:
        return geo.to_frame(self.form, (COV, COV))

    def endo_frame(self, geo: Geometry) -> np.ndarray:
        return np.einsum('bpi,bij,bjq->bpq', geo.coframe, self.endo, geo.frame)

    def norm_form_sq(self, geo: Geometry) -> np.ndarray:
        return form_norm_sq(geo, self.form)

    def norm_tensor_sq(self, geo: Geometry) -> np.ndarray:
        return 2.0 * form_norm_sq(geo, self.form)

    def reconstruction_residual(self, geo: Geometry) -> np.ndarray:
        """Normalised residual of u = (1/2) e_i ∧ u(e_i)^flat over the frame."""
        uf = self.form_frame(geo)
        Uf = self.endo_frame(geo)
        n = uf.shape[-1]
        recon = np.zeros_like(uf)
        for a in range(n):
            ea = np.zeros_like(uf[:, :, 0])
            ea[:, a] = 1.0
            recon += 0.5 * wedge(ea, Uf[:, :, a])
        num = np.sqrt(np.einsum('bij,bij->b', uf - recon, uf - recon))
        den = np.sqrt(np.einsum('bij,bij->b', uf, uf)) + 1e-30
        return num / den
