import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from iimns.grid import (
    GridFunction,
    GridSpec,
    VectorGridFunction,
    backward_diff,
    centered_diff,
    divergence_h,
    forward_diff,
    gradient_h,
    laplacian_h,
    mean,
    subtract_mean,
    wide_laplacian,
)

from conftest import cos_mode, random_scalar, random_vector


def loop_stencil(values, h, taps):
    """Reference: apply ``{(di, dj): weight}`` node by node with explicit periodic indexing."""
    M = values.shape[0]
    out = np.zeros_like(values)
    for i in range(M):
        for j in range(M):
            out[i, j] = sum(w * values[(i + di) % M, (j + dj) % M] for (di, dj), w in taps.items())
    return out


# ---- GridSpec ---------------------------------------------------------------

def test_spec_geometry():
    spec = GridSpec(8)
    assert spec.h == pytest.approx(np.pi / 8)
    assert spec.M == 16 and spec.shape == (16, 16) and spec.d == 2
    assert spec.x1d[0] == pytest.approx(-np.pi) and spec.x1d[8] == 0.0
    assert spec.L / spec.h == pytest.approx(8)


@pytest.mark.parametrize("N", [2, 5, 7.5])
def test_spec_rejects_bad_N(N):
    with pytest.raises(ValueError):
        GridSpec(N)


def test_gridfunction_read_only_and_periodic():
    spec = GridSpec(4)
    f = GridFunction(spec, np.arange(64.0).reshape(8, 8))
    with pytest.raises(ValueError):
        f.values[0, 0] = 1.0
    assert f.at(-4, -4) == 0.0
    assert f.at(3, 0) == f.at(3 - 8, 0) == f.at(3 + 8, 8)


def test_vector_components_share_spec():
    a, b = GridSpec(4).zeros(), GridSpec(6).zeros()
    with pytest.raises(ValueError):
        VectorGridFunction.from_components(a, b)


# ---- centered differences ---------------------------------------------------

def test_centered_diff_constant_is_zero():
    spec = GridSpec(8)
    assert centered_diff(GridFunction(spec, np.full(spec.shape, 3.7)), 0).max_norm() == 0.0


def test_centered_diff_of_cosine_mode():
    spec = GridSpec(16)
    f = cos_mode(spec, 1, 0)
    X, _ = spec.mesh
    expected = -np.sin(X) * np.sin(spec.h) / spec.h
    np.testing.assert_allclose(centered_diff(f, 0).values, expected, atol=1e-13)


def test_centered_diff_exact_on_linear_data_away_from_seam():
    spec = GridSpec(8)
    X, _ = spec.mesh
    d = centered_diff(GridFunction(spec, 2.5 * X), 0).values
    np.testing.assert_allclose(d[1:-1], 2.5, rtol=1e-13)


def test_centered_diff_matches_loop_oracle(rng):
    spec = GridSpec(4)
    f = random_scalar(spec, rng)
    h = spec.h
    for axis, taps in ((0, {(1, 0): 1, (-1, 0): -1}), (1, {(0, 1): 1, (0, -1): -1})):
        ref = loop_stencil(f.values, h, {k: v / (2 * h) for k, v in taps.items()})
        np.testing.assert_allclose(centered_diff(f, axis).values, ref, atol=1e-13)


# ---- Laplacians -------------------------------------------------------------

def test_laplacian_constant_is_zero():
    spec = GridSpec(8)
    assert laplacian_h(GridFunction(spec, np.full(spec.shape, -2.0))).max_norm() == 0.0


def test_laplacian_eigenvalue_k11_N8():
    spec = GridSpec(8)
    h = np.pi / 8
    sigma = -(4 / h**2) * 2 * np.sin(h / 2) ** 2
    f = cos_mode(spec, 1, 1)
    np.testing.assert_allclose(laplacian_h(f).values, sigma * f.values, atol=1e-12)


def test_laplacian_matches_loop_oracle(rng):
    spec = GridSpec(4)
    f = random_scalar(spec, rng)
    w = 1 / spec.h**2
    taps = {(0, 0): -4 * w, (1, 0): w, (-1, 0): w, (0, 1): w, (0, -1): w}
    np.testing.assert_allclose(laplacian_h(f).values, loop_stencil(f.values, spec.h, taps), atol=1e-12)


def test_laplacian_mean_zero(rng):
    f = random_scalar(GridSpec(16), rng)
    assert abs(mean(laplacian_h(f))) < 1e-12


def test_wide_laplacian_kills_checkerboard():
    spec = GridSpec(8)
    i, j = np.indices(spec.shape)
    f = GridFunction(spec, (-1.0) ** (i + j))
    assert wide_laplacian(f).max_norm() < 1e-12


def test_wide_laplacian_eigenvalue_k20_N8():
    spec = GridSpec(8)
    h = spec.h
    f = cos_mode(spec, 2, 0)
    np.testing.assert_allclose(wide_laplacian(f).values, -np.sin(2 * h) ** 2 / h**2 * f.values, atol=1e-12)


def test_wide_laplacian_matches_loop_oracle(rng):
    spec = GridSpec(4)
    f = random_scalar(spec, rng)
    w = 1 / (2 * spec.h) ** 2
    taps = {(0, 0): -4 * w, (2, 0): w, (-2, 0): w, (0, 2): w, (0, -2): w}
    np.testing.assert_allclose(wide_laplacian(f).values, loop_stencil(f.values, spec.h, taps), atol=1e-12)


def test_div_grad_is_wide_laplacian(rng):
    f = random_scalar(GridSpec(16), rng)
    np.testing.assert_allclose(divergence_h(gradient_h(f)).values, wide_laplacian(f).values, atol=1e-10)


def test_gradient_of_constant_and_divergence_of_checkerboard():
    spec = GridSpec(8)
    assert gradient_h(GridFunction(spec, np.ones(spec.shape))).max_norm() == 0.0
    i, j = np.indices(spec.shape)
    cb = (-1.0) ** (i + j)
    v = VectorGridFunction(spec, np.stack([cb, 2 * cb]))
    assert divergence_h(v).max_norm() < 1e-12


# ---- one-sided differences ----------------------------------------------------

def test_one_sided_differences(rng):
    spec = GridSpec(8)
    f = random_scalar(spec, rng)
    assert forward_diff(GridFunction(spec, np.ones(spec.shape)), 1).max_norm() == 0.0
    assert abs(np.sum(forward_diff(f, 0).values)) < 1e-11
    second = backward_diff(forward_diff(f, 0), 0).values
    w = 1 / spec.h**2
    ref = loop_stencil(f.values, spec.h, {(1, 0): w, (0, 0): -2 * w, (-1, 0): w})
    np.testing.assert_allclose(second, ref, atol=1e-11)


# ---- means --------------------------------------------------------------------

def test_means(rng):
    spec = GridSpec(8)
    c = GridFunction(spec, np.full(spec.shape, 1.25))
    assert mean(c) == pytest.approx(1.25)
    assert subtract_mean(c).max_norm() < 1e-15
    assert abs(mean(cos_mode(spec, 2, 3))) < 1e-15
    f = random_scalar(spec, rng)
    assert abs(mean(subtract_mean(f))) <= 1e-14 * f.max_norm()


# ---- properties -----------------------------------------------------------------

fields = arrays(np.float64, (8, 8), elements=st.floats(-1e3, 1e3))
OPS = [
    lambda f: centered_diff(f, 0), lambda f: centered_diff(f, 1), lambda f: forward_diff(f, 0),
    lambda f: backward_diff(f, 1), laplacian_h, wide_laplacian,
]


@given(fields, st.sampled_from(range(len(OPS))), st.sampled_from(range(len(OPS))))
def test_operators_commute(a, i, j):
    f = GridFunction(GridSpec(4), a)
    lhs, rhs = OPS[i](OPS[j](f)).values, OPS[j](OPS[i](f)).values
    scale = 1 + np.max(np.abs(a)) / GridSpec(4).h ** 4
    np.testing.assert_allclose(lhs, rhs, atol=1e-12 * scale)


@given(fields)
def test_div_grad_identity_property(a):
    f = GridFunction(GridSpec(4), a)
    scale = 1 + np.max(np.abs(a)) / GridSpec(4).h ** 2
    np.testing.assert_allclose(divergence_h(gradient_h(f)).values, wide_laplacian(f).values, atol=1e-12 * scale)


@given(fields, st.sampled_from(range(len(OPS))))
def test_operators_preserve_mean_zero(a, i):
    f = subtract_mean(GridFunction(GridSpec(4), a))
    scale = 1 + np.max(np.abs(a)) / GridSpec(4).h ** 2
    assert abs(mean(OPS[i](f))) <= 1e-12 * scale


@given(fields, st.integers(-8, 8), st.integers(-8, 8), st.sampled_from(range(len(OPS))))
def test_translation_equivariance(a, s1, s2, i):
    spec = GridSpec(4)
    roll = lambda v: np.roll(np.roll(v, s1, 0), s2, 1)
    lhs = OPS[i](GridFunction(spec, roll(a))).values
    rhs = roll(OPS[i](GridFunction(spec, a)).values)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12 * (1 + np.max(np.abs(a)) / spec.h**2))
