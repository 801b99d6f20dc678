"""Coordinate charts, metric fields and the fundamental curvature quantities.

Curvature sign convention, fixed once for the whole engine:

    R(X,Y)Z := nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z

With this choice the round sphere has positive sectional curvature and the
second covariant derivative of any Killing field ξ equals R(X,ξ)Y with a
positive sign; the test suite asserts the latter on round-sphere rotation
fields, so a convention regression cannot pass silently.

Component layout (batch axis first everywhere):

    gamma[b,k,i,j]      Christoffel Γ^k_ij
    curv[b,i,j,k,l]     l-component of R(∂_i,∂_j)∂_k
    riem_low[b,i,j,k,l] <R(∂_i,∂_j)∂_k, ∂_l>
    ricci[b,i,j]        Ric(∂_i,∂_j)
    frame[b,:,a]        orthonormal e_a in coordinate components
    coframe[b,a,:]      dual coframe θ^a
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from . import taylor
from .errors import DomainError, SingularMetricError
from .taylor import TaylorScalar, jet_space


@dataclass(frozen=True)
class ChartDomain:
    """Open coordinate box with per-axis exclusion margins.

    Margins keep sample points away from coordinate singularities (poles of
    polar charts, the ends of join profiles). Periodic axes are angle
    coordinates without endpoint singularities and normally carry margin 0.
    """

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    margin: tuple[float, ...]
    periodic: tuple[bool, ...]

    def __post_init__(self):
        n = len(self.lower)
        if n < 2:
            raise ValueError(f"chart dimension must be >= 2, got {n}")
        if not (len(self.upper) == len(self.margin) == len(self.periodic) == n):
            raise ValueError("lower/upper/margin/periodic lengths differ")
        for i in range(n):
            if self.margin[i] < 0:
                raise ValueError(f"margin[{i}] must be >= 0")
            if self.lower[i] + 2.0 * self.margin[i] >= self.upper[i]:
                raise ValueError(
                    f"axis {i}: sampling region empty "
                    f"(lower + 2*margin >= upper)"
                )

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def sample_lower(self) -> np.ndarray:
        return np.asarray(self.lower) + np.asarray(self.margin)

    @property
    def sample_upper(self) -> np.ndarray:
        return np.asarray(self.upper) - np.asarray(self.margin)

    def contains(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        lo, hi = self.sample_lower, self.sample_upper
        return np.all((pts >= lo) & (pts <= hi), axis=1)

    def require_interior(self, points: np.ndarray) -> None:
        ok = self.contains(points)
        if not np.all(ok):
            bad = np.atleast_2d(points)[~ok][0]
            raise DomainError(
                f"point {tuple(round(float(x), 6) for x in bad)} outside the "
                f"margined interior of the chart"
            )


def make_flat_domain(dim: int, size: float = 1.0) -> ChartDomain:
    return ChartDomain(
        lower=(0.0,) * dim,
        upper=(size,) * dim,
        margin=(0.05 * size,) * dim,
        periodic=(False,) * dim,
    )


class MetricField:
    """Smooth map from chart point to a symmetric positive-definite matrix.

    ``fn`` receives a list of per-axis scalars (plain float arrays or
    ``TaylorScalar`` jets, interchangeably thanks to the generic arithmetic in
    :mod:`twistorlab.taylor`) and returns the n x n component matrix as a
    nested sequence. Constructors in :mod:`twistorlab.families` produce
    exactly symmetric output, so g_ij == g_ji holds with no roundoff.
    """

    def __init__(self, domain: ChartDomain, fn: Callable, name: str = ""):
        self.domain = domain
        self.fn = fn
        self.name = name

    @property
    def dim(self) -> int:
        return self.domain.dim

    def matrix(self, points: np.ndarray) -> np.ndarray:
        """Plain float evaluation, shape (B, n, n)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        xs = [pts[:, i] for i in range(self.dim)]
        raw = self.fn(xs)
        B, n = pts.shape[0], self.dim
        out = np.empty((B, n, n))
        for i in range(n):
            for j in range(n):
                out[:, i, j] = np.broadcast_to(np.asarray(raw[i][j], dtype=float), (B,))
        return out

    def jets(self, points: np.ndarray, order: int) -> np.ndarray:
        """Metric component jets as an (n, n) object array."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        seeds = taylor.seeds_at(pts, order)
        raw = self.fn(seeds)
        space = jet_space(self.dim, order)
        return taylor.jet_array(raw, space, (pts.shape[0],))

    def validate(self, points: np.ndarray) -> None:
        """Check exact symmetry and positive definiteness at sample points."""
        g = self.matrix(points)
        asym = np.abs(g - np.swapaxes(g, 1, 2)).max()
        if asym != 0.0:
            raise SingularMetricError(
                f"metric '{self.name}' not exactly symmetric (max dev {asym:g})"
            )
        try:
            np.linalg.cholesky(g)
        except np.linalg.LinAlgError as exc:
            raise SingularMetricError(
                f"metric '{self.name}' not positive definite at a sample point"
            ) from exc


@dataclass
class FramePoint:
    """Metric data and an orthonormal frame at one chart point.

    ``frame[:, a]`` holds the coordinate components of e_a; the co-frame rows
    are the dual basis. ``dgamma``/``d2gamma`` are present when the owning
    geometry was built with enough differentiation order.
    """

    point: np.ndarray
    metric: np.ndarray
    inverse_metric: np.ndarray
    christoffel: np.ndarray
    frame: np.ndarray
    coframe: np.ndarray
    dgamma: np.ndarray | None = None
    d2gamma: np.ndarray | None = None


class Geometry:
    """Batched metric geometry at a set of chart points.

    All quantities are derived lazily from one jet evaluation of the metric
    at truncation order ``order`` (1 for Christoffel symbols, 2 for
    curvature, 3 for second covariant derivatives of curvature-level
    objects). Instances are immutable after construction and safe for
    concurrent read-only use.
    """

    def __init__(self, metric: MetricField, points: np.ndarray, order: int = 2,
                 validate: bool = True):
        self.metric = metric
        self.points = np.atleast_2d(np.asarray(points, dtype=float))
        self.order = order
        self.n = metric.dim
        self.B = self.points.shape[0]
        metric.domain.require_interior(self.points)
        if validate:
            metric.validate(self.points)

    # -- jets --------------------------------------------------------------

    @cached_property
    def seeds(self) -> list[TaylorScalar]:
        return taylor.seeds_at(self.points, self.order)

    @cached_property
    def g_jets(self) -> np.ndarray:
        space = jet_space(self.n, self.order)
        return taylor.jet_array(self.metric.fn(self.seeds), space, (self.B,))

    @cached_property
    def ginv_jets(self) -> np.ndarray:
        space = jet_space(self.n, self.order)
        return taylor.jet_inv(self.g_jets, space, (self.B,))

    @cached_property
    def gamma_jets(self) -> np.ndarray:
        """Christoffel jets Γ^k_ij at order ``order - 1``, object (n,n,n)."""
        n = self.n
        dg = taylor.jet_derivative_stack(self.g_jets, n)  # (l, i, j)
        ginv = taylor.jet_map(self.ginv_jets, lambda e: e.truncated(self.order - 1))
        out = np.empty((n, n, n), dtype=object)
        for i in range(n):
            for j in range(i, n):
                # S_l = d_i g_jl + d_j g_il - d_l g_ij
                for k in range(n):
                    acc = None
                    for l in range(n):
                        s = dg[i, j, l] + dg[j, i, l] - dg[l, i, j]
                        term = ginv[k, l] * s
                        acc = term if acc is None else acc + term
                    out[k, i, j] = out[k, j, i] = 0.5 * acc
        return out

    # -- plain arrays --------------------------------------------------------

    @cached_property
    def g(self) -> np.ndarray:
        return taylor.jet_values(self.g_jets)

    @cached_property
    def ginv(self) -> np.ndarray:
        return np.linalg.inv(self.g)

    @cached_property
    def dg(self) -> np.ndarray:
        """(B, a, i, j) partials of the metric."""
        return taylor.jet_partials(self.g_jets)

    @cached_property
    def gamma(self) -> np.ndarray:
        return taylor.jet_values(self.gamma_jets)

    @cached_property
    def dgamma(self) -> np.ndarray:
        """(B, a, k, i, j) partials of Γ; needs order >= 2."""
        return taylor.jet_partials(self.gamma_jets)

    @cached_property
    def d2gamma(self) -> np.ndarray:
        """(B, a1, a2, k, i, j) second partials of Γ; needs order >= 3."""
        return taylor._extract(self.gamma_jets, lambda e: e.hessian(), extra=2)

    @cached_property
    def curv(self) -> np.ndarray:
        """(B, i, j, k, l): l-component of R(∂_i,∂_j)∂_k."""
        dG, G = self.dgamma, self.gamma
        out = np.einsum('biljk->bijkl', dG) - np.einsum('bjlik->bijkl', dG)
        out += np.einsum('blim,bmjk->bijkl', G, G)
        out -= np.einsum('bljm,bmik->bijkl', G, G)
        return out

    @cached_property
    def riem_low(self) -> np.ndarray:
        return np.einsum('bijkm,bml->bijkl', self.curv, self.g)

    @cached_property
    def ricci(self) -> np.ndarray:
        """Ricci as a symmetric bilinear form, (B, i, j)."""
        return np.einsum('biaci->bac', self.curv)

    @cached_property
    def ricci_endo(self) -> np.ndarray:
        """Ricci as an endomorphism (index raised on the first slot)."""
        return np.einsum('bim,bmj->bij', self.ginv, self.ricci)

    @cached_property
    def scal(self) -> np.ndarray:
        return np.einsum('bij,bij->b', self.ginv, self.ricci)

    @cached_property
    def frame(self) -> np.ndarray:
        """Gram-Schmidt orthonormal frame in fixed axis order, (B, i, a)."""
        B, n, g = self.B, self.n, self.g
        E = np.zeros((B, n, n))
        for a in range(n):
            v = np.zeros((B, n))
            v[:, a] = 1.0
            for b in range(a):
                proj = np.einsum('bi,bij,bj->b', v, g, E[:, :, b])
                v -= proj[:, None] * E[:, :, b]
            norm = np.sqrt(np.einsum('bi,bij,bj->b', v, g, v))
            if np.any(norm < 1e-150):
                raise SingularMetricError("degenerate metric in frame construction")
            E[:, :, a] = v / norm[:, None]
        return E

    @cached_property
    def coframe(self) -> np.ndarray:
        return np.linalg.inv(self.frame)

    # -- frame conversion -----------------------------------------------------

    def to_frame(self, comps: np.ndarray, valence: Sequence[str]) -> np.ndarray:
        """Convert coordinate components to orthonormal-frame components.

        ``valence`` lists each tensor slot as "d" (covariant) or "u"
        (contravariant); the batch axis is first and is left alone.
        """
        out = comps
        for slot, kind in enumerate(valence):
            axis = slot + 1
            moved = np.moveaxis(out, axis, -1)
            # covariant slot: w_a = w_i E^i_a ; contravariant: v^a = θ^a_i v^i
            if kind == "d":
                moved = np.einsum('b...i,bia->b...a', moved, self.frame)
            else:
                moved = np.einsum('b...i,bai->b...a', moved, self.coframe)
            out = np.moveaxis(moved, -1, axis)
        return out

    def frame_point(self, index: int) -> FramePoint:
        return FramePoint(
            point=self.points[index].copy(),
            metric=self.g[index],
            inverse_metric=self.ginv[index],
            christoffel=self.gamma[index],
            frame=self.frame[index],
            coframe=self.coframe[index],
            dgamma=self.dgamma[index] if self.order >= 2 else None,
            d2gamma=self.d2gamma[index] if self.order >= 3 else None,
        )

    def sectional(self, i: int, j: int) -> np.ndarray:
        """Sectional curvature of the coordinate plane span(∂_i, ∂_j)."""
        if i == j:
            raise ValueError("sectional curvature needs two distinct axes")
        g = self.g
        num = self.riem_low[:, i, j, j, i]
        den = g[:, i, i] * g[:, j, j] - g[:, i, j] ** 2
        return num / den


# -- single-point convenience wrappers ----------------------------------------

def _as_batch(point: np.ndarray) -> tuple[np.ndarray, bool]:
    pt = np.asarray(point, dtype=float)
    if pt.ndim == 1:
        return pt[None, :], True
    return pt, False


def christoffel(metric: MetricField, point: np.ndarray) -> np.ndarray:
    """Γ^k_ij at a point (or batch of points), indices (k, i, j)."""
    pts, single = _as_batch(point)
    geo = Geometry(metric, pts, order=1)
    return geo.gamma[0] if single else geo.gamma


def riemann(metric: MetricField, point: np.ndarray) -> np.ndarray:
    """Curvature components: [i,j,k,l] is the l-component of R(∂_i,∂_j)∂_k."""
    pts, single = _as_batch(point)
    geo = Geometry(metric, pts, order=2)
    return geo.curv[0] if single else geo.curv


def ricci(metric: MetricField, point: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Ricci tensor as (bilinear form, endomorphism)."""
    pts, single = _as_batch(point)
    geo = Geometry(metric, pts, order=2)
    if single:
        return geo.ricci[0], geo.ricci_endo[0]
    return geo.ricci, geo.ricci_endo


def orthonormal_frame(metric: MetricField, point: np.ndarray) -> FramePoint:
    pts, single = _as_batch(point)
    geo = Geometry(metric, pts, order=2)
    return geo.frame_point(0)


def sectional_curvature(metric: MetricField, point: np.ndarray,
                        i: int, j: int) -> np.ndarray:
    pts, single = _as_batch(point)
    geo = Geometry(metric, pts, order=2)
    K = geo.sectional(i, j)
    return K[0] if single else K
