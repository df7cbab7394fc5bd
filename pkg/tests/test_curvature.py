import numpy as np
import pytest

import oracles
from contactqi.curvature import (KINDS, curvature, curvature_at, derived_tensor, einstein_fit,
                                 flatness_test, frame_components)
from contactqi.expr import parse
from contactqi.manifold import ChartManifold, Interval


def test_scalar_curvature_values(entries):
    expected = {"m1_corrected": -2.0, "sphere3": 6.0, "euclidean3": 0.0}
    for name, r in expected.items():
        M = entries[name].manifold
        cb = curvature(M, M.sample_points(100, 5))
        assert np.max(np.abs(cb.scalar - r)) <= 1e-10


@pytest.mark.parametrize("name", ["m1_corrected", "sphere3", "m2"])
def test_riemann_matches_finite_difference_oracle(entries, name):
    M = entries[name].manifold
    pts = M.sample_points(6, 11, window=(-2, 2))
    cb = curvature(M, pts)
    for p, R, r in zip(pts, cb.riemann, cb.scalar):
        R_fd = oracles.riemann(M.metric_at, p)
        scale = max(1.0, np.max(np.abs(R)))
        assert np.max(np.abs(R - R_fd)) <= 1e-6 * scale
        assert abs(oracles.scalar_curvature(M.metric_at, p) - r) <= 1e-6 * max(1.0, abs(r))


def test_christoffel_matches_oracle(m1):
    p = np.array([0.3, -0.7, 1.1])
    cb = curvature_at(m1.manifold, p)
    assert np.allclose(cb.christoffel[0], oracles.christoffel(m1.manifold.metric_at, p), atol=1e-10)


def test_riemann_symmetries(entries):
    for name in ("m1_corrected", "sphere3", "m2"):
        M = entries[name].manifold
        cb = curvature(M, M.sample_points(20, 2, window=(-2, 2)))
        R = cb.lowered_riemann()
        scale = max(1.0, np.max(np.abs(R)))
        assert np.max(np.abs(R + np.swapaxes(R, 2, 3))) <= 1e-9 * scale       # R_lijk = -R_ljik
        assert np.max(np.abs(R + np.swapaxes(R, 1, 4))) <= 1e-9 * scale       # R_lijk = -R_kijl
        bianchi = R + np.einsum("nlijk->nljki", R) + np.einsum("nlijk->nlkij", R)
        assert np.max(np.abs(bianchi)) <= 1e-9 * scale


def test_sphere_sectional_curvature_sign(sphere):
    """g(R(X,Y)Y, X) = +1 on the unit sphere with this sign convention."""
    M = sphere.manifold
    pts = M.sample_points(10, 0)
    cb = curvature(M, pts)
    F = M.orthonormal_frame(pts)
    X, Y = F[:, :, 0], F[:, :, 1]
    K = np.einsum("nlijk,ni,nj,nk,nlm,nm->n", cb.riemann, X, Y, Y, cb.g, X)
    assert np.allclose(K, 1.0, atol=1e-10)


def test_ricci_of_example_is_eta_einstein(m1):
    M, S = m1.manifold, m1.structure
    pts = M.sample_points(100, 0)
    fit = einstein_fit(M, pts, S.fields(pts).eta)
    assert fit.eta_einstein and not fit.einstein
    assert fit.a == pytest.approx(-2, abs=1e-9)
    assert fit.b == pytest.approx(4, abs=1e-9)


def test_sphere_is_einstein(sphere):
    M = sphere.manifold
    fit = einstein_fit(M, M.sample_points(100, 0))
    assert fit.einstein and fit.a == pytest.approx(2, abs=1e-9)


def test_weyl_vanishes_in_dimension_three(entries):
    for entry in entries.values():
        M = entry.manifold
        res = flatness_test("weyl", M, M.sample_points(500, 0))
        assert res.flat and res.max_residual <= 1e-8, (entry.name, res)


def test_sphere_flatness_profile(sphere):
    M = sphere.manifold
    pts = M.sample_points(100, 0)
    flat = {k: flatness_test(k, M, pts).flat for k in KINDS}
    assert flat == {"weyl": True, "concircular": True, "conharmonic": False, "projective": True}


def test_euclidean_all_flat(entries):
    M = entries["euclidean3"].manifold
    pts = M.sample_points(20, 0)
    cb = curvature(M, pts)
    assert np.max(np.abs(cb.riemann)) <= 1e-12
    assert all(flatness_test(k, M, pts).flat for k in KINDS)


def test_derived_tensors_in_coordinates(m1):
    """The coordinate-built tensors agree with the frame-built flatness residuals."""
    M = m1.manifold
    pts = M.sample_points(30, 0)
    F = M.orthonormal_frame(pts)
    for kind in KINDS:
        T = frame_components(derived_tensor(kind, M, pts), "uddd", F)
        assert np.max(np.abs(T)) == pytest.approx(flatness_test(kind, M, pts).max_residual, rel=1e-9, abs=1e-12)


def test_derived_tensor_needs_dimension_three():
    xy = ("x", "y")
    g = tuple(tuple(parse(s, xy) for s in row) for row in [["1", "0"], ["0", "1"]])
    M = ChartManifold("plane", xy, (Interval(), Interval()), g)
    with pytest.raises(ValueError):
        derived_tensor("weyl", M, [[0.0, 0.0]])
    with pytest.raises(ValueError):
        derived_tensor("nonsense", ChartManifold("e", ("x", "y", "z"), (Interval(),) * 3,
                                                 tuple(tuple(parse("1" if i == j else "0", xy) for j in range(3))
                                                       for i in range(3))), [[0.0, 0.0, 0.0]])


def test_hyperbolic_half_space_has_constant_negative_curvature():
    """Upper half space g = (dx^2+dy^2+dz^2)/z^2: r = -6 (independent textbook value)."""
    xyz = ("x", "y", "z")
    g = tuple(tuple(parse("1/z^2" if i == j else "0", xyz) for j in range(3)) for i in range(3))
    M = ChartManifold("h3", xyz, (Interval(), Interval(), Interval(0, 5)), g)
    pts = M.sample_points(50, 0)
    cb = curvature(M, pts)
    assert np.allclose(cb.scalar, -6, atol=1e-9)
    assert flatness_test("concircular", M, pts).flat
