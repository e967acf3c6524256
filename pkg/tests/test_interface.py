import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from iimns.errors import GeometryDegenerate, MissingTangentialDerivative, MultipleCrossings, RootNotBracketed
from iimns.grid import GridSpec
from iimns.interface import (
    INSIDE,
    OUTSIDE,
    Circle,
    Ellipse,
    ForceDensity,
    Motion,
    RestTrace,
    SampledCurve,
    classify,
    crossing_events,
    find_intersections,
    force_profile,
    irregular_mask,
    jumps_from_force,
    node_points,
    surface_divergence_ftan,
)
from iimns.harness.cases import get_case


# ---- geometry --------------------------------------------------------------------

def test_circle_frame():
    c = Circle(0.5)
    th = np.linspace(0, 2 * np.pi, 7)
    n, t = c.normal(th, 0.0), c.tangent(th, 0.0)
    np.testing.assert_allclose(np.sum(n * t, -1), 0.0, atol=1e-15)
    np.testing.assert_allclose(np.linalg.norm(n, axis=-1), 1.0)
    # outward normal on a counterclockwise circle
    np.testing.assert_allclose(n, np.stack([np.cos(th), np.sin(th)], -1), atol=1e-14)
    np.testing.assert_allclose(c.curvature(th, 0.0), 2.0)
    assert c.arclength(np.pi) == pytest.approx(0.5 * np.pi)


def test_ellipse_arclength_and_closest_point():
    e = Ellipse(1.0, 0.6, angle=0.3)
    # spectral arclength vs trapezoidal quadrature of the speed
    th = np.linspace(0, 2 * np.pi, 20001)
    ref = np.trapezoid(e.speed(th, 0.0), th)
    assert e.arclength(2 * np.pi) == pytest.approx(ref, rel=1e-8)
    p = e.position(np.array([0.7, 2.0, 4.0]), 0.0) + 0.05 * e.normal(np.array([0.7, 2.0, 4.0]), 0.0)
    np.testing.assert_allclose(e.signed_distance(p, 0.0), 0.05, atol=1e-10)
    np.testing.assert_allclose(e.closest_theta(p, 0.0), [0.7, 2.0, 4.0], atol=1e-9)


def test_sampled_curve_reproduces_circle():
    th = 2 * np.pi * np.arange(64) / 64
    pts = np.stack([np.cos(th), np.sin(th)], -1)[::-1]  # clockwise input gets reoriented
    s = SampledCurve(pts)
    q = np.array([[0.3, 0.2], [1.4, -0.1], [-0.2, -0.9]])
    np.testing.assert_allclose(s.signed_distance(q, 0.0), np.linalg.norm(q, axis=-1) - 1.0, atol=1e-5)


def test_motion_laws():
    c = Circle(0.5, motion=Motion("translate", (0.4, -0.2)))
    np.testing.assert_allclose(c.center(2.0), [0.8, -0.4])
    np.testing.assert_allclose(c.velocity(np.array([0.0, 1.0]), 1.0), [[0.4, -0.2]] * 2)
    e = Ellipse(1.0, 0.5, motion=Motion("rotate", omega=np.pi / 2))
    np.testing.assert_allclose(e.position(0.0, 1.0), [0.0, 1.0], atol=1e-14)
    with pytest.raises(ValueError):
        Motion("wobble")


def test_validate_rejects_degenerate_curves():
    spec = GridSpec(16)
    with pytest.raises(GeometryDegenerate):
        classify(spec, Circle(3.1), 0.0)
    th = 2 * np.pi * np.arange(40) / 40
    eight = np.stack([np.sin(th), np.sin(th) * np.cos(th)], -1)
    with pytest.raises(GeometryDegenerate):
        classify(spec, SampledCurve(eight), 0.0)


# ---- classification ----------------------------------------------------------------

def test_classify_conventions():
    spec = GridSpec(8)
    sides = classify(spec, Circle(0.5), 0.0)
    assert sides.side[8, 8] == INSIDE
    # node (4h, 0) lies exactly on a circle of radius pi/2
    on = classify(spec, Circle(np.pi / 2), 0.0)
    assert on.signed_distance[12, 8] == 0.0
    assert on.side[12, 8] == INSIDE
    assert sides.side[0, 0] == OUTSIDE and sides.outside[0, 0]


def test_classify_sign_changes_per_gridline():
    spec = GridSpec(64)
    side = classify(spec, Circle(0.5), 0.0).side
    for axis in (0, 1):
        s = np.moveaxis(side, axis, 0)
        changes = np.sum(s != np.roll(s, -1, axis=0), axis=0)
        X = spec.x1d
        through = np.abs(X) < 0.5
        assert np.all(changes[through] == 2)
        assert np.all(changes[np.abs(X) > 0.5] == 0)


def test_classify_stable_under_refinement():
    geo = Ellipse(1.2, 0.7, angle=0.4, center=(0.3, -0.2))
    coarse = classify(GridSpec(16), geo, 0.0).side
    fine = classify(GridSpec(32), geo, 0.0).side
    np.testing.assert_array_equal(fine[::2, ::2], coarse)


# ---- intersections ---------------------------------------------------------------------

def test_intersections_against_analytic_circle():
    spec = GridSpec(32)
    r = 0.5
    inter = find_intersections(spec, Circle(r), 0.0)
    X = spec.x1d
    n_lines = np.count_nonzero(np.abs(X) < r)
    assert len(inter) == 2 * 2 * n_lines
    assert np.all((inter.h_plus >= 0) & (inter.h_plus <= spec.h))
    # the crossing on the line through the center
    for rec in inter:
        other = X[rec.base[1 - rec.axis]]
        expected = np.sqrt(r**2 - other**2)
        along = rec.x_star[rec.axis]
        assert abs(abs(along) - expected) < 1e-12
        assert rec.x_star[1 - rec.axis] == pytest.approx(other, abs=1e-12)
        x_up = X[(rec.base[rec.axis] + 1) % spec.M]
        assert rec.h_plus == pytest.approx(x_up - along, abs=1e-12)
        assert abs(np.dot(rec.normal, rec.tangent)) < 1e-14


def test_intersections_lie_on_curve():
    spec = GridSpec(32)
    geo = Ellipse(1.1, 0.6, angle=0.5, center=(0.2, 0.1))
    inter = find_intersections(spec, geo, 0.0)
    assert np.max(np.abs(geo.signed_distance(inter.x_star, 0.0))) < 1e-10
    assert np.all((inter.h_plus >= 0) & (inter.h_plus <= spec.h))
    np.testing.assert_allclose(geo.position(inter.theta, 0.0), inter.x_star, atol=1e-9)
    # every irregular node is an end of some crossed segment
    mask = irregular_mask(classify(spec, geo, 0.0))
    ends = np.zeros_like(mask)
    ends[tuple(inter.base.T)] = True
    ends[tuple(inter.upper.T)] = True
    np.testing.assert_array_equal(mask, ends)


def test_no_record_between_equal_signs():
    # small circle crossing the segment [0, h] on y = 0 twice, both ends outside
    spec = GridSpec(16)
    inter = find_intersections(spec, Circle(0.05, center=(spec.h / 2, 0.0)), 0.0)
    assert len(inter) == 0


def test_inconsistent_sides_raise():
    spec = GridSpec(16)
    geo = Circle(0.5)
    sides = classify(spec, geo, 0.0)
    fake = type(sides)(spec, np.where(np.arange(spec.M)[:, None] < 3, INSIDE, OUTSIDE).astype(np.int8)
                       * np.ones(spec.shape, np.int8), sides.signed_distance)
    with pytest.raises(RootNotBracketed):
        find_intersections(spec, geo, 0.0, fake)


# ---- crossing events --------------------------------------------------------------------

def test_static_has_no_crossings():
    ev = crossing_events(GridSpec(16), Circle(0.5), 0.0, 0.1)
    assert len(ev.nodes) == 0


def test_translating_circle_crossings_match_classification():
    spec = GridSpec(32)
    geo = Circle(1.0, motion=Motion("translate", (0.4, 0.2)))
    t0, t1 = 0.3, 0.3 + 0.5 * spec.h
    ev = crossing_events(spec, geo, t0, t1)
    diff = classify(spec, geo, t0).side != classify(spec, geo, t1).side
    got = np.zeros(spec.shape, bool)
    got[tuple(ev.nodes.T)] = True
    np.testing.assert_array_equal(got, diff)
    assert len(ev.nodes) > 0
    assert np.all((ev.fraction >= 0) & (ev.fraction <= 1))
    assert np.all(ev.side_before != ev.side_after)
    # the curve passes within O(tau^2) of each node at its crossing time
    tc = ev.crossing_time
    pts = node_points(spec)[tuple(ev.nodes.T)]
    d = np.array([geo.signed_distance(p, t) for p, t in zip(pts, tc)])
    assert np.max(np.abs(d)) < 1e-3


def test_crossing_exactly_at_t_next():
    spec = GridSpec(8)
    geo = Circle(np.pi / 2, center=(-0.125, 0.0), motion=Motion("translate", (1.0, 0.0)))
    ev = crossing_events(spec, geo, 0.0, 0.125)
    hit = [k for k, n in enumerate(ev.nodes) if tuple(n) == (12, 8)]
    assert hit and ev.fraction[hit[0]] == 1.0


def test_multiple_crossings_raise():
    spec = GridSpec(16)
    geo = Ellipse(1.0, 0.5, motion=Motion("rotate", omega=np.pi))
    with pytest.raises(MultipleCrossings):
        crossing_events(spec, geo, 0.0, 1.0)


# ---- force density and jumps -----------------------------------------------------------

def test_surface_divergence():
    c = Circle(0.5)
    th = np.linspace(0, 2 * np.pi, 9)
    assert np.max(np.abs(surface_divergence_ftan(c, force_profile(c, "normal", a0=1.0, a1=0.3), th, 0.0))) < 1e-12
    assert np.max(np.abs(surface_divergence_ftan(c, force_profile(c, "tangential", b0=2.0), th, 0.0))) < 1e-12
    prof = force_profile(c, "tangential", b1=1.0)
    np.testing.assert_allclose(surface_divergence_ftan(c, prof, th, 0.0), np.cos(th) / 0.5, atol=1e-12)
    # spectral route without the analytic derivative
    spectral = ForceDensity(prof.f, None)
    np.testing.assert_allclose(surface_divergence_ftan(c, spectral, th, 0.0), np.cos(th) / 0.5, atol=1e-10)
    with pytest.raises(MissingTangentialDerivative):
        surface_divergence_ftan(c, ForceDensity(None, None), th, 0.0)


def test_pure_normal_force_jumps():
    c = Circle(0.5)
    th = np.linspace(0, 2 * np.pi, 12, endpoint=False)
    j = jumps_from_force(c, force_profile(c, "normal", a0=1.5), RestTrace(), th, 0.0)
    n = c.normal(th, 0.0)
    np.testing.assert_allclose(j.jump_p, 1.5, atol=1e-12)
    np.testing.assert_allclose(np.einsum("kij,kj->ki", j.jump_Du, n), 0.0, atol=1e-12)
    np.testing.assert_allclose(np.sum(j.jump_Dp * n, -1), 0.0, atol=1e-12)
    assert np.all(j.jump_u == 0)


def test_jump_self_consistency_for_mixed_force():
    geo = Ellipse(1.0, 0.7, angle=0.2)
    force = force_profile(geo, "mixed", a0=0.4, a1=0.3, b0=0.1, b1=0.5, m=3)
    th = np.linspace(0, 2 * np.pi, 40, endpoint=False)
    j = jumps_from_force(geo, force, RestTrace(), th, 0.0)
    n, t = geo.normal(th, 0.0), geo.tangent(th, 0.0)
    f = force(th, 0.0)
    f_tan = np.sum(f * t, -1)[:, None] * t
    np.testing.assert_allclose(np.einsum("kij,kj->ki", j.jump_Du, n), -f_tan, atol=1e-8)
    np.testing.assert_allclose(j.jump_p, np.sum(f * n, -1), atol=1e-12)
    np.testing.assert_allclose(np.sum(j.jump_Dp * n, -1), surface_divergence_ftan(geo, force, th, 0.0), atol=1e-8)
    # tangential derivatives of continuous u vanish
    np.testing.assert_allclose(np.einsum("kij,kj->ki", j.jump_Du, t), 0.0, atol=1e-12)
    np.testing.assert_allclose(np.sum(j.jump_advection * n, -1), 0.0, atol=1e-8)


@pytest.mark.parametrize("name", ["static-circle", "moving-circle"])
def test_derived_jumps_match_analytic(name):
    case = get_case(name)
    th = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    for t in (0.0, 0.17):
        a = case.jumps_at_theta(th, t)
        d = jumps_from_force(case.geometry, case.force, case.velocity_trace(), th, t, case.body_force_jumps())
        for key in ("jump_u", "jump_Du", "jump_D2u", "jump_p", "jump_Dp", "jump_D2p", "jump_ut",
                    "jump_advection", "jump_D_advection", "jump_g", "jump_Dg"):
            np.testing.assert_allclose(getattr(d, key), getattr(a, key), atol=1e-8, err_msg=key)


def test_compatibility_quadrature():
    case = get_case("static-circle")
    n = 256
    th = 2 * np.pi * np.arange(n) / n
    geo = case.geometry
    j = jumps_from_force(geo, case.force, case.velocity_trace(), th, 0.3, case.body_force_jumps())
    dpdn = np.sum(j.jump_Dp * geo.normal(th, 0.3), -1)
    assert abs(np.sum(dpdn * geo.speed(th, 0.3)) * 2 * np.pi / n) < 1e-8


# ---- properties --------------------------------------------------------------------------

@given(st.floats(0.3, 1.5), st.floats(0.3, 1.5), st.floats(0, np.pi), st.floats(-0.5, 0.5), st.floats(-0.5, 0.5))
def test_intersection_invariants(a, b, angle, cx, cy):
    spec = GridSpec(16)
    geo = Ellipse(a, b, angle, (cx, cy))
    inter = find_intersections(spec, geo, 0.0)
    assert np.all((inter.h_plus >= 0) & (inter.h_plus <= spec.h))
    assert np.max(np.abs(geo.signed_distance(inter.x_star, 0.0)), initial=0.0) < 1e-10
    np.testing.assert_allclose(np.linalg.norm(inter.normal, axis=-1), 1.0)
    assert np.max(np.abs(np.sum(inter.normal * inter.tangent, -1)), initial=0.0) < 1e-12
