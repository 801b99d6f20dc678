"""Curvature engine tests against closed forms and the finite-difference oracle."""

import math

import numpy as np
import pytest

from fd_oracle import fd_christoffel, fd_ricci, fd_riemann
from twistorlab import taylor
from twistorlab.chart import (
    ChartDomain,
    Geometry,
    MetricField,
    christoffel,
    make_flat_domain,
    orthonormal_frame,
    ricci,
    riemann,
    sectional_curvature,
)
from twistorlab.errors import DomainError, SingularMetricError


def flat_metric(n):
    dom = make_flat_domain(n)

    def fn(x):
        return [[1.0 if i == j else 0.0 for j in range(n)] for i in range(n)]

    return MetricField(dom, fn, name="flat")


def sphere2_metric():
    """Round S^2 in geodesic polar coordinates: dr^2 + sin^2(r) dθ^2."""
    dom = ChartDomain(lower=(0.0, 0.0), upper=(math.pi, 2 * math.pi),
                      margin=(0.16, 0.0), periodic=(False, True))

    def fn(x):
        r, _ = x
        s2 = taylor.sin(r) ** 2
        return [[1.0, 0.0], [0.0, s2]]

    return MetricField(dom, fn, name="sphere2")


def warped_exp_metric():
    """dt^2 + e^{2t} dx^2 on a box."""
    dom = ChartDomain(lower=(-1.0, 0.0), upper=(1.0, 1.0),
                      margin=(0.1, 0.05), periodic=(False, False))

    def fn(x):
        t, _ = x
        return [[1.0, 0.0], [0.0, taylor.exp(2.0 * t)]]

    return MetricField(dom, fn, name="warped_exp")


def product_line_sphere():
    """dt^2 + g_{S^2} on (t, r, θ)."""
    dom = ChartDomain(lower=(0.0, 0.0, 0.0), upper=(1.0, math.pi, 2 * math.pi),
                      margin=(0.05, 0.16, 0.0), periodic=(False, False, True))

    def fn(x):
        _, r, _ = x
        return [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, taylor.sin(r) ** 2]]

    return MetricField(dom, fn, name="line_x_sphere")


def sample_box(domain, count, rng):
    lo, hi = domain.sample_lower, domain.sample_upper
    return lo + (hi - lo) * rng.random((count, domain.dim))


class TestChristoffel:
    def test_flat_all_zero(self):
        m = flat_metric(3)
        G = christoffel(m, np.array([0.3, 0.5, 0.7]))
        assert np.all(G == 0.0)

    def test_sphere_closed_forms_at_r1(self):
        # Γ^r_θθ = -sin r cos r, Γ^θ_rθ = cot r (frozen closed forms),
        # cross-checked against the finite-difference oracle
        m = sphere2_metric()
        pt = np.array([1.0, 2.0])
        G = christoffel(m, pt)
        assert G[0, 1, 1] == pytest.approx(-math.sin(1.0) * math.cos(1.0), abs=1e-14)
        assert G[1, 0, 1] == pytest.approx(1.0 / math.tan(1.0), abs=1e-13)
        assert G[1, 1, 0] == G[1, 0, 1]
        G_fd = fd_christoffel(m, pt[None, :])[0]
        assert np.allclose(G, G_fd, atol=1e-9)

    def test_warped_product_closed_forms(self):
        # Γ^t_xx = -e^{2t}, Γ^x_tx = 1, against the finite-difference oracle
        m = warped_exp_metric()
        pt = np.array([0.4, 0.5])
        G = christoffel(m, pt)
        assert G[0, 1, 1] == pytest.approx(-math.exp(0.8), rel=1e-13)
        assert G[1, 0, 1] == pytest.approx(1.0, abs=1e-13)
        G_fd = fd_christoffel(m, pt[None, :])[0]
        assert np.allclose(G, G_fd, atol=1e-8)

    def test_symmetry_in_lower_indices(self):
        m = sphere2_metric()
        rng = np.random.default_rng(0)
        pts = sample_box(m.domain, 20, rng)
        geo = Geometry(m, pts, order=1)
        assert np.allclose(geo.gamma, np.swapaxes(geo.gamma, 2, 3), atol=0.0)

    def test_point_outside_margin_rejected(self):
        m = sphere2_metric()
        with pytest.raises(DomainError):
            christoffel(m, np.array([0.01, 1.0]))

    def test_singular_metric_rejected(self):
        dom = make_flat_domain(2)

        def fn(x):
            return [[x[0] - x[0], 0.0], [0.0, 1.0]]  # degenerate g_00 = 0

        m = MetricField(dom, fn, name="degenerate")
        with pytest.raises(SingularMetricError):
            christoffel(m, np.array([0.5, 0.5]))


class TestRiemann:
    def test_flat_zero(self):
        m = flat_metric(3)
        R = riemann(m, np.array([0.2, 0.4, 0.6]))
        assert np.all(R == 0.0)

    def test_sphere_sectional_curvature_one(self):
        m = sphere2_metric()
        rng = np.random.default_rng(1)
        pts = sample_box(m.domain, 50, rng)
        K = sectional_curvature(m, pts, 0, 1)
        assert np.allclose(K, 1.0, rtol=1e-10)

    def test_product_mixed_plane_flat(self):
        m = product_line_sphere()
        rng = np.random.default_rng(2)
        pts = sample_box(m.domain, 20, rng)
        geo = Geometry(m, pts)
        assert np.allclose(geo.sectional(0, 1), 0.0, atol=1e-12)
        assert np.allclose(geo.sectional(0, 2), 0.0, atol=1e-12)
        assert np.allclose(geo.sectional(1, 2), 1.0, rtol=1e-10)

    def test_lowered_tensor_symmetries(self):
        m = warped_exp_metric()
        rng = np.random.default_rng(3)
        pts = sample_box(m.domain, 30, rng)
        geo = Geometry(m, pts)
        Rl = geo.riem_low
        scale = np.abs(Rl).max() + 1e-30
        assert np.abs(Rl + np.einsum('bjikl->bijkl', Rl)).max() / scale < 1e-9
        assert np.abs(Rl + np.einsum('bijlk->bijkl', Rl)).max() / scale < 1e-9
        assert np.abs(Rl - np.einsum('bklij->bijkl', Rl)).max() / scale < 1e-9

    def test_first_bianchi(self):
        m = sphere2_metric()
        rng = np.random.default_rng(4)
        pts = sample_box(m.domain, 30, rng)
        geo = Geometry(m, pts)
        R = geo.curv
        cyc = R + np.einsum('bjkil->bijkl', R) + np.einsum('bkijl->bijkl', R)
        scale = np.abs(R).max() + 1e-30
        assert np.abs(cyc).max() / scale < 1e-9

    def test_fd_oracle_agreement(self):
        for m in (sphere2_metric(), warped_exp_metric(), product_line_sphere()):
            rng = np.random.default_rng(5)
            pts = sample_box(m.domain, 10, rng)
            geo = Geometry(m, pts)
            R_fd = fd_riemann(m, pts)
            scale = np.abs(geo.curv).max() + 1.0
            assert np.abs(geo.curv - R_fd).max() / scale < 1e-6, m.name


class TestRicci:
    def test_flat_zero(self):
        m = flat_metric(4)
        form, endo = ricci(m, np.array([0.5, 0.5, 0.5, 0.5]))
        assert np.all(form == 0.0) and np.all(endo == 0.0)

    def test_sphere_ricci_is_identity_times_nminus1(self):
        m = sphere2_metric()
        rng = np.random.default_rng(6)
        pts = sample_box(m.domain, 20, rng)
        geo = Geometry(m, pts)
        # n = 2: Ric = (n-1) g = g
        assert np.allclose(geo.ricci, geo.g, rtol=1e-10)
        eye = np.broadcast_to(np.eye(2), geo.ricci_endo.shape)
        assert np.allclose(geo.ricci_endo, eye, atol=1e-10)

    def test_fd_oracle_agreement(self):
        m = sphere2_metric()
        rng = np.random.default_rng(7)
        pts = sample_box(m.domain, 10, rng)
        geo = Geometry(m, pts)
        ric_fd = fd_ricci(m, pts)
        assert np.abs(geo.ricci - ric_fd).max() < 1e-6


class TestFrame:
    def test_euclidean_frame_is_coordinate_basis(self):
        m = flat_metric(3)
        fp = orthonormal_frame(m, np.array([0.5, 0.5, 0.5]))
        assert np.allclose(fp.frame, np.eye(3), atol=0.0)
        assert np.allclose(fp.coframe, np.eye(3), atol=0.0)

    def test_diagonal_metric_rescaling(self):
        dom = make_flat_domain(2)

        def fn(x):
            return [[4.0, 0.0], [0.0, 9.0]]

        m = MetricField(dom, fn, name="diag49")
        fp = orthonormal_frame(m, np.array([0.5, 0.5]))
        assert np.allclose(fp.frame, np.diag([0.5, 1.0 / 3.0]), atol=1e-15)

    def test_orthonormality_on_curved_metric(self):
        m = warped_exp_metric()
        rng = np.random.default_rng(8)
        pts = sample_box(m.domain, 40, rng)
        geo = Geometry(m, pts)
        gram = np.einsum('bia,bij,bjc->bac', geo.frame, geo.g, geo.frame)
        eye = np.broadcast_to(np.eye(2), gram.shape)
        assert np.abs(gram - eye).max() <= 1e-12


def test_metric_compatibility_of_connection():
    """nabla g = 0: d_a g_ij - Γ^m_ai g_mj - Γ^m_aj g_im vanishes."""
    m = sphere2_metric()
    rng = np.random.default_rng(9)
    pts = sample_box(m.domain, 30, rng)
    geo = Geometry(m, pts, order=1)
    nabla_g = (geo.dg
               - np.einsum('bmai,bmj->baij', geo.gamma, geo.g)
               - np.einsum('bmaj,bim->baij', geo.gamma, geo.g))
    assert np.abs(nabla_g).max() < 1e-9


def test_domain_invariants():
    with pytest.raises(ValueError):
        ChartDomain(lower=(0.0,), upper=(1.0,), margin=(0.0,), periodic=(False,))
    with pytest.raises(ValueError):
        ChartDomain(lower=(0.0, 0.0), upper=(1.0, 0.2), margin=(0.0, 0.1),
                    periodic=(False, False))
