"""Constructors for the metric families under study.

Every family is a chart, an exactly symmetric positive-definite metric given
by a closed-form component function, and (where meaningful) a distinguished
vector field. The join and torus families are driven by profile functions
gamma/lambda of one chart coordinate; smooth closure of the chart at its
singular ends is decided by a least-squares expansion analyzer, never
assumed.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.integrate
import scipy.interpolate

from . import taylor
from .chart import ChartDomain, Geometry, MetricField
from .errors import BoundaryConditionError, QuadratureError
from .forms import TensorField, one_form, vector_field
from .taylor import TaylorScalar, sin, cos


# -- profile functions ---------------------------------------------------------

class ProfileFunction:
    """Scalar profile on (0, l), evaluable on floats and Taylor jets."""

    name = "profile"
    tabulated = False

    def __call__(self, s):
        raise NotImplementedError

    def params(self) -> dict:
        return {}


class SinProfile(ProfileFunction):
    name = "sin"

    def __call__(self, s):
        return sin(s)


class CosProfile(ProfileFunction):
    name = "cos"

    def __call__(self, s):
        return cos(s)


class ConstantProfile(ProfileFunction):
    name = "constant"

    def __init__(self, value: float):
        self.value = float(value)

    def __call__(self, s):
        return self.value + 0.0 * s

    def params(self):
        return {"value": self.value}


class PolynomialProfile(ProfileFunction):
    """sum_k coeffs[k] * s^k, evaluated by Horner's rule."""

    name = "polynomial"

    def __init__(self, coeffs: Sequence[float]):
        self.coeffs = tuple(float(c) for c in coeffs)

    def __call__(self, s):
        acc = self.coeffs[-1] + 0.0 * s
        for c in reversed(self.coeffs[:-1]):
            acc = acc * s + c
        return acc

    def params(self):
        return {"coeffs": list(self.coeffs)}


class PerturbedSinProfile(ProfileFunction):
    """sin(s) * (1 + eps * sin(s)^2): the shipped non-round join profile."""

    name = "perturbed_sin"

    def __init__(self, epsilon: float):
        self.epsilon = float(epsilon)

    def __call__(self, s):
        w = sin(s)
        return w * (1.0 + self.epsilon * w * w)

    def params(self):
        return {"epsilon": self.epsilon}


class TabulatedProfile(ProfileFunction):
    """Quintic-spline interpolant of sampled profile data (C^3).

    Smoothness verdicts from the analyzer are approximate on tabulated data;
    the analyzer flags results accordingly.
    """

    name = "tabulated"
    tabulated = True

    def __init__(self, xs: Sequence[float], ys: Sequence[float]):
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        if xs.size < 8:
            raise ValueError("tabulated profile needs at least 8 samples")
        self._spline = scipy.interpolate.make_interp_spline(xs, ys, k=5)
        self._derivs = [self._spline.derivative(k) for k in range(1, 4)]

    def __call__(self, s):
        if isinstance(s, TaylorScalar):
            s0 = s.value
            table = [self._spline(s0)] + [d(s0) for d in self._derivs]
            return s.compose_univariate(table[: s.order + 1])
        return self._spline(np.asarray(s, dtype=float))

    def params(self):
        return {"knots": int(self._spline.t.size)}


class IntegralProfile(ProfileFunction):
    """lambda(s) = c * integral_s^l gamma(t) dt.

    The value comes from adaptive quadrature (absolute tolerance 1e-12); all
    Taylor coefficients above order zero are exact images of gamma's own jet
    through lambda' = -c*gamma, so no differentiation noise enters.
    """

    name = "integral"

    def __init__(self, gamma: ProfileFunction, l: float, c: float):
        if c <= 0:
            raise ValueError("integral profile needs c > 0")
        self.gamma = gamma
        self.l = float(l)
        self.c = float(c)

    def _quad(self, s0: np.ndarray) -> np.ndarray:
        out = np.empty_like(np.atleast_1d(np.asarray(s0, dtype=float)))
        flat_in = np.atleast_1d(np.asarray(s0, dtype=float))
        for i, s in enumerate(flat_in):
            val, err = scipy.integrate.quad(
                lambda t: float(self.gamma(t)), s, self.l,
                epsabs=1e-12, epsrel=1e-12, limit=200)
            if not np.isfinite(val) or err > 1e-9:
                raise QuadratureError(
                    f"quadrature for lambda({s:g}) did not converge "
                    f"(estimated error {err:g})")
            out[i] = self.c * val
        return out.reshape(np.shape(s0))

    def __call__(self, s):
        if isinstance(s, TaylorScalar):
            if s.order == 0:
                return TaylorScalar.constant(s.space, self._quad(s.value))
            axis_grad = s.gradient()
            axes = np.nonzero(np.any(axis_grad != 0.0, axis=0))[0]
            if axes.size != 1:
                raise ValueError("integral profile expects a single-axis seed")
            g = -self.c * self.gamma(s.truncated(s.order - 1))
            return taylor.antiderivative_along_axis(g, int(axes[0]),
                                                    self._quad(s.value))
        return self._quad(s)

    def params(self):
        return {"gamma": self.gamma.name, "l": self.l, "c": self.c,
                **{f"gamma.{k}": v for k, v in self.gamma.params().items()}}


def lambda_from_gamma(gamma: ProfileFunction, l: float, c: float) -> IntegralProfile:
    """The decreasing warp lambda(s) = c * int_s^l gamma, with lambda(l) = 0."""
    return IntegralProfile(gamma, l, c)


def profile_from_config(kind: str, **kw) -> ProfileFunction:
    if kind == "sin":
        return SinProfile()
    if kind == "cos":
        return CosProfile()
    if kind == "constant":
        return ConstantProfile(kw["value"])
    if kind == "polynomial":
        return PolynomialProfile(kw["coeffs"])
    if kind == "perturbed_sin":
        return PerturbedSinProfile(kw.get("epsilon", 0.1))
    if kind == "tabulated":
        return TabulatedProfile(kw["xs"], kw["ys"])
    raise ValueError(f"unknown profile kind '{kind}'")


# -- smoothness boundary analyzer ------------------------------------------------

FORBIDDEN_TOL = 1e-6


@dataclass
class AnalyzerResult:
    passed: bool
    status: str  # "ok" or "inconclusive"
    end: str
    mode: str
    coefficients: np.ndarray
    forbidden: dict[str, float]
    max_forbidden: float
    cond: float
    window: float
    num_points: int
    approximate: bool = False
    message: str = ""


def smoothness_analyzer(gamma: ProfileFunction, l: float, c: float, end: str,
                        mode: str, num_points: int = 40,
                        window: float | None = None,
                        degree: int = 10) -> AnalyzerResult:
    """Decide whether a profile closes the chart smoothly at one end.

    Fits gamma near the end by a degree-``degree`` polynomial in the distance
    t to the end and inspects the expansion pattern:

      * origin (both modes) and far end in gcvf mode:
        gamma(t) = t * (1 + t^2 * a(t^2)); so the constant and even
        coefficients must vanish and the linear coefficient must be 1
        (equivalently gamma^2 = t^2 + t^4 h(t^2)).
      * far end in join mode: gamma(l - t) = 1/c + t^2 b(t^2); so the odd
        coefficients must vanish and the constant must equal 1/c.

    An ill-conditioned fit yields status "inconclusive", never a silent pass.
    """
    if end not in ("origin", "far"):
        raise ValueError("end must be 'origin' or 'far'")
    if mode not in ("join", "gcvf"):
        raise ValueError("mode must be 'join' or 'gcvf'")
    w = window if window is not None else min(0.3, 0.3 * l)
    ts = w * (np.arange(1, num_points + 1) / num_points)
    xs = ts if end == "origin" else l - ts
    ys = np.asarray(gamma(xs), dtype=float)

    tau = ts / w
    V = np.vander(tau, degree + 1, increasing=True)
    sv = np.linalg.svd(V, compute_uv=False)
    cond = sv[0] / sv[-1] if sv[-1] > 0 else np.inf
    if cond > 1e10 or num_points < degree + 2:
        return AnalyzerResult(
            passed=False, status="inconclusive", end=end, mode=mode,
            coefficients=np.zeros(degree + 1), forbidden={},
            max_forbidden=np.inf, cond=cond, window=w, num_points=num_points,
            approximate=gamma.tabulated,
            message="expansion fit ill-conditioned")
    chat, *_ = np.linalg.lstsq(V, ys, rcond=None)
    coeff = chat / w ** np.arange(degree + 1)

    forbidden: dict[str, float] = {}
    if mode == "gcvf" or end == "origin":
        forbidden["t^0"] = abs(coeff[0])
        forbidden["t^1 - 1"] = abs(coeff[1] - 1.0)
        forbidden["t^2"] = abs(coeff[2])
        forbidden["t^4"] = abs(coeff[4])
    else:
        forbidden["t^0 - 1/c"] = abs(coeff[0] - 1.0 / c) / max(1.0, 1.0 / c)
        forbidden["t^1"] = abs(coeff[1])
        forbidden["t^3"] = abs(coeff[3])
        forbidden["t^5"] = abs(coeff[5])
    worst = max(forbidden.values())
    return AnalyzerResult(
        passed=worst <= FORBIDDEN_TOL, status="ok", end=end, mode=mode,
        coefficients=coeff, forbidden=forbidden, max_forbidden=worst,
        cond=cond, window=w, num_points=num_points,
        approximate=gamma.tabulated,
        message="" if worst <= FORBIDDEN_TOL else
        f"forbidden coefficient magnitude {worst:.3g} exceeds {FORBIDDEN_TOL:g}")


# -- chart assembly helpers ------------------------------------------------------

def _unit_sphere_diag(angles: list) -> list:
    """Diagonal of the round S^m metric in nested polar angles (m = len)."""
    out = [1.0]
    acc = None
    for t in angles[:-1]:
        acc = sin(t) ** 2 if acc is None else acc * sin(t) ** 2
        out.append(acc)
    return out


def _diag(entries: list) -> list:
    n = len(entries)
    return [[entries[i] if i == j else 0.0 for j in range(n)] for i in range(n)]


def _polar_axes(m: int) -> tuple[list, list, list, list]:
    """Domain data for the nested polar angles of S^m."""
    lower, upper, margin, periodic = [], [], [], []
    for j in range(m - 1):
        lower.append(0.0)
        upper.append(math.pi)
        margin.append(max(0.05 * math.pi, 0.05))
        periodic.append(False)
    lower.append(0.0)
    upper.append(2.0 * math.pi)
    margin.append(0.0)
    periodic.append(True)
    return lower, upper, margin, periodic


def _singular_axis(length: float) -> float:
    return max(0.05 * length, 0.05)


# -- families --------------------------------------------------------------------

@dataclass
class Family:
    """One constructed instance: chart metric, distinguished field, metadata."""

    kind: str
    n: int
    params: dict
    metric: MetricField
    xi: TensorField | None
    killing_fields: dict[str, TensorField] = field(default_factory=dict)
    expected: dict = field(default_factory=dict)
    profiles: dict = field(default_factory=dict)
    profile_axis: int | None = None
    boundary_checks: list = field(default_factory=list)


def _apply_corruption(fn: Callable, domain: ChartDomain, corruption: str) -> Callable:
    """Testing hook: conformally scale g by (1 + 0.1 sin theta) along the
    last periodic coordinate, which breaks the Killing property of the
    circle field but keeps the metric smooth and positive definite."""
    if corruption != "killing_break":
        raise ValueError(f"unknown corruption '{corruption}'")
    periodic_axes = [i for i, p in enumerate(domain.periodic) if p]
    axis = periodic_axes[-1] if periodic_axes else domain.dim - 1

    def corrupted(x):
        fac = 1.0 + 0.1 * sin(x[axis])
        g = fn(x)
        n = len(g)
        return [[g[i][j] * fac for j in range(n)] for i in range(n)]

    return corrupted


def make_flat(n: int, corruption: str | None = None) -> Family:
    """Identity metric on a unit box; the oracle baseline."""
    dom = ChartDomain(lower=(0.0,) * n, upper=(1.0,) * n,
                      margin=(0.05,) * n, periodic=(False,) * n)

    def fn(x):
        return _diag([1.0] * n)

    if corruption:
        raise ValueError("flat family does not support corruption")
    metric = MetricField(dom, fn, name=f"flat{n}")
    xi = vector_field(lambda x: [1.0] + [0.0] * (n - 1), name="translation")
    return Family(kind="flat", n=n, params={}, metric=metric, xi=xi,
                  killing_fields={"translation": xi},
                  expected={"sectional": 0.0, "scal": 0.0})


def _sphere_embedding_components(n: int) -> list[list[tuple[int, str]]]:
    """Factorised ambient embedding of the radius-rho geodesic polar chart.

    Component 0 is rho*cos(r/rho); component mu >= 1 is rho*sin(r/rho) times
    the nested polar factors of S^{n-1}. Each chart axis appears in at most
    one factor per component, so the Jacobian has a closed product form and
    the rotation-field solve stays inside the order-3 Taylor budget.
    """
    comps = [[(0, "cos")]]
    for mu in range(1, n + 1):
        fac = [(0, "sin")] + [(j, "sin") for j in range(1, mu)]
        if mu <= n - 1:
            fac.append((mu, "cos"))
        comps.append(fac)
    return comps


def _emb_eval(comps, x, radius):
    """Ambient position P and Jacobian J = dP/dx as scalar structures."""
    n = len(x)
    P, J = [], []
    for fac in comps:
        axes_in = {ax for ax, _ in fac}
        val = None
        for ax, kind in fac:
            arg = x[ax] * (1.0 / radius) if ax == 0 else x[ax]
            f = sin(arg) if kind == "sin" else cos(arg)
            val = f if val is None else val * f
        P.append(radius * val)
        row = []
        for a in range(n):
            if a not in axes_in:
                row.append(0.0)
                continue
            d = None
            for ax, kind in fac:
                arg = x[ax] * (1.0 / radius) if ax == 0 else x[ax]
                if ax == a:
                    scale = (1.0 / radius) if ax == 0 else 1.0
                    f = cos(arg) * scale if kind == "sin" else sin(arg) * (-scale)
                else:
                    f = sin(arg) if kind == "sin" else cos(arg)
                d = f if d is None else d * f
            row.append(radius * d)
        J.append(row)
    return P, J


def _rotation_field(metric_fn, comps, radius, mu, nu, n) -> TensorField:
    """Chart components of the ambient rotation generator in plane (mu, nu).

    The ambient velocity A.P is tangent to the sphere, so the chart
    components solve J xi = A P exactly; with pullback metric g = J^T J this
    is xi = g^{-1} J^T (A P), evaluated in whichever scalar arithmetic the
    caller supplies.
    """

    def fn(x):
        P, J = _emb_eval(comps, x, radius)
        m = n + 1
        V = [0.0] * m
        V[mu] = P[nu]
        V[nu] = -1.0 * P[mu]
        w = []
        for a in range(n):
            acc = None
            for b in (mu, nu):
                if isinstance(J[b][a], float) and J[b][a] == 0.0:
                    continue
                term = J[b][a] * V[b]
                acc = term if acc is None else acc + term
            w.append(0.0 if acc is None else acc)
        graw = metric_fn(x)
        if isinstance(x[0], TaylorScalar):
            space = x[0].space
            batch = x[0].c.shape[:-1]
            G = taylor.jet_array(graw, space, batch, shape=(n, n))
            Ginv = taylor.jet_inv(G, space, batch)
            wj = taylor.jet_array(w, space, batch, shape=(n,))
            return list(taylor.jet_matvec(Ginv, wj))
        B = np.shape(x[0]) or (1,)
        g = np.empty(B + (n, n))
        for i in range(n):
            for j in range(n):
                g[..., i, j] = np.broadcast_to(np.asarray(graw[i][j], dtype=float), B)
        wv = np.empty(B + (n,))
        for a in range(n):
            wv[..., a] = np.broadcast_to(np.asarray(w[a], dtype=float), B)
        sol = np.linalg.solve(g, wv[..., None])[..., 0]
        return [sol[..., a] for a in range(n)]

    return TensorField(("u",), fn, name=f"rot{mu}{nu}")


def make_round_sphere(n: int, radius: float = 1.0,
                      corruption: str | None = None
                      ) -> tuple[MetricField, list[TensorField]]:
    """Geodesic polar chart of the round n-sphere plus rotation Killing fields.

    g = dr^2 + radius^2 sin^2(r/radius) g_{S^{n-1}} with nested polar
    coordinates on the S^{n-1} factor.
    """
    if n < 2 or radius <= 0:
        raise ValueError("need n >= 2 and radius > 0")
    rho = float(radius)
    lo, up, mg, per = _polar_axes(n - 1)
    dom = ChartDomain(
        lower=(0.0, *lo), upper=(math.pi * rho, *up),
        margin=(_singular_axis(math.pi * rho), *mg),
        periodic=(False, *per))

    def fn(x):
        r = x[0]
        warp = (rho * sin(r * (1.0 / rho))) ** 2
        entries = [1.0] + [warp * e for e in _unit_sphere_diag(list(x[1:]))]
        return _diag(entries)

    mfn = _apply_corruption(fn, dom, corruption) if corruption else fn
    metric = MetricField(dom, mfn, name=f"sphere{n}_r{radius:g}")
    comps = _sphere_embedding_components(n)
    pairs = list(itertools.combinations(range(n + 1), 2))
    fields = [_rotation_field(fn, comps, rho, mu, nu, n) for mu, nu in pairs]
    return metric, fields


def round_sphere_family(n: int, radius: float = 1.0,
                        corruption: str | None = None) -> Family:
    metric, fields = make_round_sphere(n, radius, corruption)
    named = {f.name: f for f in fields}
    K = 1.0 / radius ** 2
    return Family(
        kind="round_sphere", n=n, params={"radius": radius},
        metric=metric, xi=fields[0], killing_fields=named,
        expected={"sectional": K, "scal": n * (n - 1) * K,
                  "ricci_eigenvalue": (n - 1) * K, "f": -K},
        profile_axis=0)


def make_sasakian_sphere(k: float, corruption: str | None = None
                         ) -> tuple[MetricField, TensorField]:
    """Round S^3 of curvature k with its Hopf field, in Hopf coordinates.

    g = (1/k)(d eta^2 + cos^2(eta) d phi1^2 + sin^2(eta) d phi2^2) and
    xi = d/d phi1 + d/d phi2, a Killing field of constant length 1/sqrt(k).
    """
    if k <= 0:
        raise ValueError("need k > 0")
    dom = ChartDomain(
        lower=(0.0, 0.0, 0.0),
        upper=(math.pi / 2.0, 2.0 * math.pi, 2.0 * math.pi),
        margin=(_singular_axis(math.pi / 2.0), 0.0, 0.0),
        periodic=(False, True, True))
    inv_k = 1.0 / k

    def fn(x):
        eta = x[0]
        return _diag([inv_k, inv_k * cos(eta) ** 2, inv_k * sin(eta) ** 2])

    mfn = _apply_corruption(fn, dom, corruption) if corruption else fn
    metric = MetricField(dom, mfn, name=f"hopf_k{k:g}")
    xi = vector_field(lambda x: [0.0, 1.0, 1.0], name="hopf")
    return metric, xi


def sasakian_sphere_family(k: float, corruption: str | None = None) -> Family:
    metric, xi = make_sasakian_sphere(k, corruption)
    return Family(
        kind="sasakian_sphere", n=3, params={"k": k},
        metric=metric, xi=xi, killing_fields={"hopf": xi},
        expected={"k": k, "xi_norm": 1.0 / math.sqrt(k), "f": -k,
                  "sectional": k, "classification": "f-constant"},
        profile_axis=0)


def make_warped_mapping_torus(n: int, a: float,
                              corruption: str | None = None
                              ) -> tuple[MetricField, TensorField]:
    """S^1 x S^{n-1} with g = lambda(r)^2 dtheta^2 + g_{S^{n-1}(1)}.

    The warp lambda(r) = a + cos(r) (a > 1 keeps it positive) restricts the
    gradient of the sphere height function, so grad(lambda) is a gradient
    conformal field on the round base and the gluing isometry is the
    identity: only local, tensorial conditions are exercised here.
    """
    if n < 3:
        raise ValueError("warped mapping torus needs n >= 3")
    if a <= 1.0:
        raise ValueError(f"warp positivity requires a > 1, got a = {a:g}")
    lo, up, mg, per = _polar_axes(n - 2)
    dom = ChartDomain(
        lower=(0.0, 0.0, *lo), upper=(1.0, math.pi, *up),
        margin=(0.0, _singular_axis(math.pi), *mg),
        periodic=(True, False, *per))

    def fn(x):
        r = x[1]
        lam = a + cos(r)
        warp = sin(r) ** 2
        entries = [lam ** 2, 1.0] + [warp * e for e in
                                     _unit_sphere_diag(list(x[2:]))]
        return _diag(entries)

    mfn = _apply_corruption(fn, dom, corruption) if corruption else fn
    metric = MetricField(dom, mfn, name=f"torus{n}_a{a:g}")
    xi = vector_field(lambda x: [1.0] + [0.0] * (n - 1), name="circle")
    return metric, xi


def warped_mapping_torus_family(n: int, a: float,
                                corruption: str | None = None) -> Family:
    metric, xi = make_warped_mapping_torus(n, a, corruption)

    class _Lam(ProfileFunction):
        name = "a_plus_cos"

        def __call__(self, s):
            return a + cos(s)

        def params(self):
            return {"a": a}

    return Family(
        kind="warped_mapping_torus", n=n, params={"a": a},
        metric=metric, xi=xi, killing_fields={"circle": xi},
        expected={"classification": "rank-2"},
        profiles={"lambda": _Lam()}, profile_axis=1)


def make_gcvf_factor(m: int, gamma: ProfileFunction, l: float, c: float = 1.0
                     ) -> tuple[MetricField, TensorField]:
    """Rotationally symmetric factor ds^2 + gamma^2(s) g_{S^{m-1}} with its
    conformal gradient field X = c * gamma(s) * d/ds (so |X| = c*gamma and
    nabla_Y X = c*gamma'(s) Y for every Y)."""
    if m < 2:
        raise ValueError("factor dimension must be >= 2")
    for end in ("origin", "far"):
        res = smoothness_analyzer(gamma, l, c, end, mode="gcvf")
        if not res.passed:
            raise BoundaryConditionError(
                f"gcvf profile rejected at {end} end: "
                f"{res.message or res.status}", end=end)
    lo, up, mg, per = _polar_axes(m - 1)
    dom = ChartDomain(
        lower=(0.0, *lo), upper=(l, *up),
        margin=(_singular_axis(l), *mg), periodic=(False, *per))

    def fn(x):
        warp = gamma(x[0]) ** 2
        entries = [1.0] + [warp * e for e in _unit_sphere_diag(list(x[1:]))]
        return _diag(entries)

    metric = MetricField(dom, fn, name=f"gcvf{m}_{gamma.name}")
    X = vector_field(lambda x: [c * gamma(x[0])] + [0.0] * (m - 1),
                     name="conformal_gradient")
    return metric, X


def gcvf_factor_family(m: int, gamma: ProfileFunction, l: float,
                       c: float = 1.0) -> Family:
    metric, X = make_gcvf_factor(m, gamma, l, c)
    checks = [smoothness_analyzer(gamma, l, c, end, "gcvf")
              for end in ("origin", "far")]
    dl = one_form(lambda x: [c * gamma(x[0])] + [0.0] * (m - 1),
                  name="d_lambda")
    fam = Family(
        kind="gcvf_factor", n=m, params={"l": l, "c": c,
                                         "gamma": gamma.name,
                                         **{f"gamma.{k}": v for k, v in gamma.params().items()}},
        metric=metric, xi=None, killing_fields={},
        expected={"c": c}, profiles={"gamma": gamma},
        profile_axis=0, boundary_checks=checks)
    fam.gradient_field = X
    fam.d_lambda = dl
    return fam


def make_riemannian_join(n: int, gamma: ProfileFunction, l: float, c: float,
                         corruption: str | None = None
                         ) -> tuple[MetricField, TensorField, IntegralProfile]:
    """g = ds^2 + gamma^2(s) g_{S^{n-2}} + lambda^2(s) dtheta^2 on
    (0,l) x S^{n-2} x S^1, with lambda = c * int_s^l gamma and xi = d/dtheta.

    Construction refuses profiles that fail the smooth-closure analyzer at
    either end, reporting which end failed.
    """
    if n < 3:
        raise ValueError("join needs n >= 3")
    for end in ("origin", "far"):
        res = smoothness_analyzer(gamma, l, c, end, mode="join")
        if not res.passed:
            raise BoundaryConditionError(
                f"join profile rejected: {end} boundary condition "
                f"({res.message or res.status})", end=end)
    lam = lambda_from_gamma(gamma, l, c)
    lo, up, mg, per = _polar_axes(n - 2)
    dom = ChartDomain(
        lower=(0.0, *lo, 0.0), upper=(l, *up, 2.0 * math.pi),
        margin=(_singular_axis(l), *mg, 0.0),
        periodic=(False, *per, True))

    def fn(x):
        warp = gamma(x[0]) ** 2
        lam2 = lam(x[0]) ** 2
        entries = ([1.0] + [warp * e for e in _unit_sphere_diag(list(x[1:-1]))]
                   + [lam2])
        return _diag(entries)

    mfn = _apply_corruption(fn, dom, corruption) if corruption else fn
    metric = MetricField(dom, mfn, name=f"join{n}_{gamma.name}")
    xi = vector_field(lambda x: [0.0] * (n - 1) + [1.0], name="circle")
    return metric, xi, lam


def riemannian_join_family(n: int, gamma: ProfileFunction, l: float, c: float,
                           corruption: str | None = None) -> Family:
    metric, xi, lam = make_riemannian_join(n, gamma, l, c, corruption)
    checks = [smoothness_analyzer(gamma, l, c, end, "join")
              for end in ("origin", "far")]
    expected = {"c": c, "classification": "rank-2"}
    if gamma.name == "sin" and abs(l - math.pi / 2.0) < 1e-12 and abs(c - 1.0) < 1e-12:
        expected.update({"sectional": 1.0, "scal": float(n * (n - 1)),
                         "lambda_closed_form": "cos"})
    return Family(
        kind="riemannian_join", n=n,
        params={"l": l, "c": c, "gamma": gamma.name,
                **{f"gamma.{k}": v for k, v in gamma.params().items()}},
        metric=metric, xi=xi, killing_fields={"circle": xi},
        expected=expected, profiles={"gamma": gamma, "lambda": lam},
        profile_axis=0, boundary_checks=checks)


# -- declarative specs -----------------------------------------------------------

CASE_TAGS = ("flat", "round_sphere", "sasakian_sphere", "warped_mapping_torus",
             "riemannian_join", "gcvf_factor")


@dataclass
class FamilySpec:
    """Declarative description of one family instance."""

    kind: str
    n: int = 0
    params: dict = field(default_factory=dict)
    samples: int = 200
    seed: int = 42

    def __post_init__(self):
        if self.kind not in CASE_TAGS:
            raise ValueError(f"unknown family kind '{self.kind}'")

    def _gamma(self) -> ProfileFunction:
        kind = self.params.get("gamma", "sin")
        kw = {}
        if "epsilon" in self.params:
            kw["epsilon"] = self.params["epsilon"]
        if "coeffs" in self.params:
            kw["coeffs"] = self.params["coeffs"]
        if "value" in self.params:
            kw["value"] = self.params["value"]
        return profile_from_config(kind, **kw)

    def build(self) -> Family:
        p = self.params
        corruption = p.get("corruption")
        if self.kind == "flat":
            return make_flat(self.n or 3)
        if self.kind == "round_sphere":
            return round_sphere_family(self.n or 3, p.get("radius", 1.0),
                                       corruption)
        if self.kind == "sasakian_sphere":
            return sasakian_sphere_family(p.get("k", 1.0), corruption)
        if self.kind == "warped_mapping_torus":
            return warped_mapping_torus_family(self.n or 4, p.get("a", 2.0),
                                               corruption)
        if self.kind == "riemannian_join":
            gamma = self._gamma()
            l = p.get("l", math.pi / 2.0)
            c = p.get("c", 1.0)
            return riemannian_join_family(self.n or 4, gamma, l, c, corruption)
        if self.kind == "gcvf_factor":
            gamma = self._gamma()
            return gcvf_factor_family(self.n or 3, gamma,
                                      p.get("l", math.pi), p.get("c", 1.0))
        raise ValueError(f"unknown family kind '{self.kind}'")
