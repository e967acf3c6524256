from dataclasses import replace

import numpy as np
import pytest

import iimns.solver as solver_mod
from iimns.corrections import CorrectionField
from iimns.errors import ConfigError, Diverged
from iimns.grid import GridFunction, GridSpec, VectorGridFunction, divergence_h, gradient_h, laplacian_h
from iimns.interface import Circle, classify, force_profile, node_points
from iimns.solver import (
    Solver,
    SolverConfig,
    SolverState,
    _Context,
    advection_extrapolated,
    build_bundle,
    first_step,
    initial_pressure,
    pressure_solve,
    read_snapshot,
    recover_pressure_at,
    run,
    step,
    write_snapshot,
)
from iimns.harness.cases import get_case


def tg_velocity(spec, t):
    X, Y = spec.mesh
    e = np.exp(-2 * t)
    return np.stack([-np.cos(X) * np.sin(Y) * e, np.sin(X) * np.cos(Y) * e])


def tg_pressure(spec, t):
    X, Y = spec.mesh
    return -0.25 * (np.cos(2 * X) + np.cos(2 * Y)) * np.exp(-4 * t)


def mod_const(a, b):
    d = a - b
    return float(np.max(np.abs(d - d.mean())))


def zero_config(N=8, **kw):
    return SolverConfig(GridSpec(N), 0.5, kw.pop("T", 0.5), **kw)


# ---- config ----------------------------------------------------------------------

def test_config_validation():
    spec = GridSpec(8)
    with pytest.raises(ConfigError):
        SolverConfig(spec, lam=0.0)
    with pytest.raises(ConfigError):
        SolverConfig(spec, T=-1.0)
    with pytest.raises(ConfigError):
        SolverConfig(spec, jump_mode="guess")
    with pytest.raises(ConfigError):
        SolverConfig(spec, geometry=Circle(1.0))
    cfg = SolverConfig(spec, lam=0.5, T=1.0)
    assert cfg.tau == pytest.approx(0.5 * spec.h)
    assert cfg.n_steps == int(1.0 // cfg.tau)


# ---- advection and pressure --------------------------------------------------------

def test_advection_extrapolation_basics():
    spec = GridSpec(8)
    c = VectorGridFunction(spec, np.stack([np.full(spec.shape, 0.3), np.full(spec.shape, -1.0)]))
    assert advection_extrapolated(c, c).max_norm() == 0.0
    u = VectorGridFunction(spec, tg_velocity(spec, 0.0))
    plain = np.einsum("a...,ai...->i...", u.values, np.stack([gradient_h(u[i]).values for i in range(2)], 1))
    np.testing.assert_allclose(advection_extrapolated(u, u).values, plain, atol=1e-14)


def test_advection_taylor_green_second_order():
    errs = []
    for N in (16, 32, 64):
        spec = GridSpec(N)
        X, Y = spec.mesh
        u = VectorGridFunction(spec, tg_velocity(spec, 0.0))
        exact = -0.5 * np.stack([np.sin(2 * X), np.sin(2 * Y)])  # u . grad u = -grad p at t = 0
        errs.append(np.max(np.abs(advection_extrapolated(u, u).values - exact)))
    assert np.all(np.log2(np.array(errs[:-1]) / np.array(errs[1:])) > 1.9)


def test_pressure_solve_zero_and_mean():
    spec = GridSpec(8)
    e = CorrectionField.empty(spec)
    assert pressure_solve(spec.zeros(), e, e).max_norm() == 0.0
    rng = np.random.default_rng(1)
    C5 = CorrectionField.accumulate(spec, [[1, 2], [3, 3]], rng.standard_normal(2))
    diag = {}
    div = rng.standard_normal(spec.shape)
    p = pressure_solve(GridFunction(spec, div - div.mean()), e, C5, diag)
    assert abs(np.mean(p.values)) < 1e-14
    assert abs(diag["rhs_mean"]) <= 1e-13 * diag["rhs_norm"]


def test_pressure_solve_taylor_green():
    errs = []
    for N in (16, 32, 64):
        spec = GridSpec(N)
        u = VectorGridFunction(spec, tg_velocity(spec, 0.0))
        adv = advection_extrapolated(u, u)
        div = divergence_h(adv)
        e = CorrectionField.empty(spec)
        errs.append(mod_const(pressure_solve(div, e, e).values, tg_pressure(spec, 0.0)))
    assert np.all(np.log2(np.array(errs[:-1]) / np.array(errs[1:])) > 1.9)


# ---- steps ---------------------------------------------------------------------------

def test_zero_state_is_preserved():
    res = run(zero_config(T=1.0))
    assert res.final.n > 2
    assert res.final.u_n.max_norm() == 0.0 and res.final.p_half.max_norm() == 0.0


def test_constant_velocity_is_preserved():
    const = lambda pts: np.broadcast_to([0.7, -0.2], pts.shape)
    res = run(zero_config(T=1.0, u0=const))
    np.testing.assert_allclose(res.final.u_n.values[0], 0.7, atol=1e-13)
    np.testing.assert_allclose(res.final.u_n.values[1], -0.2, atol=1e-13)


def test_T_zero_returns_initial_state():
    res = run(SolverConfig(GridSpec(8), T=0.0, case=get_case("taylor-green")))
    assert res.final.n == 0 and res.times == [0.0]
    np.testing.assert_allclose(res.final.u_n.values, tg_velocity(GridSpec(8), 0.0), atol=1e-14)


def test_helmholtz_residual_and_pressure_mean_every_step():
    res = run(SolverConfig(GridSpec(32), 0.5, 0.2, case=get_case("static-circle")))
    for d in res.diagnostics[1:]:
        assert d["helmholtz_residual"] < 1e-10
        assert abs(d["rhs_mean"]) < 1e-13
    assert abs(np.mean(res.final.p_half.values)) < 1e-13


def test_step_matches_exact_taylor_green_locally():
    # one step from exact data: local error O(tau^3 + tau h^2)
    errs = []
    case = get_case("taylor-green")
    for N in (16, 32, 64):
        spec = GridSpec(N)
        cfg = SolverConfig(spec, 0.5, 1.0, case=case)
        tau = cfg.tau
        ctx = _Context(cfg)
        t1 = 0.3
        u_nm1 = VectorGridFunction(spec, tg_velocity(spec, t1 - tau))
        u_n = VectorGridFunction(spec, tg_velocity(spec, t1))
        st = SolverState(u_n, u_nm1, GridFunction(spec, tg_pressure(spec, t1 - tau / 2)), t1, 5)
        new = step(st, build_bundle(ctx, st), cfg, ctx)
        errs.append(np.max(np.abs(new.u_n.values - tg_velocity(spec, t1 + tau))))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 2.5) and rates[-1] > 2.8


def test_first_step_zero_and_degenerate_weights():
    cfg = zero_config(16)
    s = Solver(cfg)
    st0 = s.initial_state()
    assert first_step(st0, build_bundle(s.ctx, st0), cfg, s.ctx).u_n.max_norm() == 0.0
    # with u^{n-1} = u^n and the level-0 pressure, step reduces to the first step's update
    case = get_case("taylor-green")
    cfg = SolverConfig(GridSpec(16), 0.5, 1.0, case=case)
    s = Solver(cfg)
    st0 = s.initial_state()
    a = first_step(st0, build_bundle(s.ctx, st0), cfg, s.ctx)
    assert a.n == 1 and a.u_nm1 is st0.u_n


def test_initial_pressure_piecewise_constant_for_normal_force():
    geo = Circle(1.0)
    for N in (16, 32):
        spec = GridSpec(N)
        cfg = SolverConfig(spec, geometry=geo, force=force_profile(geo, "normal", a0=1.5), jump_mode="derived")
        st = Solver(cfg).initial_state()
        exact = np.where(classify(spec, geo, 0.0).side > 0, 0.0, -1.5)
        assert mod_const(st.p_half.values, exact) <= 1e-2 * spec.h**2
        assert abs(np.mean(st.p_half.values)) < 1e-14


def test_initial_and_recovered_pressure_zero():
    cfg = zero_config(8)
    s = Solver(cfg)
    st = s.initial_state()
    b = build_bundle(s.ctx, st)
    assert initial_pressure(st.u_n, b, cfg, s.ctx).max_norm() == 0.0
    assert recover_pressure_at(st, 0.0, b, cfg, s.ctx).max_norm() == 0.0


def test_recovered_pressure_taylor_green():
    case = get_case("taylor-green")
    errs = []
    for N in (16, 32, 64):
        spec = GridSpec(N)
        s = Solver(SolverConfig(spec, 0.5, 0.2, case=case))
        u = VectorGridFunction(spec, tg_velocity(spec, 0.2))
        st = SolverState(u, u, spec.zeros(), 0.2, 3)
        b = solver_mod.build_level_bundle(s.ctx, u.values, 0.2)
        errs.append(mod_const(recover_pressure_at(st, 0.2, b, s.config, s.ctx).values, tg_pressure(spec, 0.2)))
    assert np.all(np.log2(np.array(errs[:-1]) / np.array(errs[1:])) > 1.9)


def test_taylor_green_run_error_scales_with_h2():
    case = get_case("taylor-green")
    errs = {}
    for N in (32, 64):
        spec = GridSpec(N)
        res = run(SolverConfig(spec, 0.5, 0.5, case=case))
        errs[N] = np.max(np.abs(res.final.u_n.values - tg_velocity(spec, res.final.t_n)))
        assert errs[N] < 0.5 * spec.h**2
    assert np.log2(errs[32] / errs[64]) > 1.9


def test_linearity_in_correction_bundle():
    case = get_case("static-circle")
    spec = GridSpec(16)
    cfg = SolverConfig(spec, 0.5, 1.0, case=case)
    s = Solver(cfg)
    st = s.advance(s.initial_state())
    b = build_bundle(s.ctx, st)

    def scaled(c):
        kw = {k: v.scaled(c) for k, v in b.fields().items()}
        return replace(b, **kw)

    u0 = step(st, scaled(0.0), cfg, s.ctx).u_n.values
    u1 = step(st, scaled(1.0), cfg, s.ctx).u_n.values
    u2 = step(st, scaled(2.0), cfg, s.ctx).u_n.values
    np.testing.assert_allclose(u2 - u0, 2 * (u1 - u0), atol=1e-10 * np.max(np.abs(u1 - u0)))


def test_moving_interface_runs():
    res = run(SolverConfig(GridSpec(32), 0.5, 0.15, case=get_case("moving-circle")))
    assert all(d.get("C1_nodes", 1) > 0 for d in res.diagnostics[1:])
    assert np.all(np.isfinite(res.final.u_n.values))


def test_divergence_raises(monkeypatch):
    monkeypatch.setattr(solver_mod, "DIVERGENCE_FACTOR", 1e-3)
    with pytest.raises(Diverged) as info:
        run(SolverConfig(GridSpec(8), 0.5, 0.5, case=get_case("taylor-green")))
    assert info.value.step == 1


# ---- monitor and snapshots ----------------------------------------------------------

def test_monitor_sees_every_state():
    seen = []
    cfg = SolverConfig(GridSpec(8), 0.5, 0.4, case=get_case("taylor-green"))
    run(cfg, lambda st, s: seen.append(st.n))
    assert seen == list(range(cfg.n_steps + 1))


@pytest.mark.parametrize("fmt", ["csv", "bin"])
def test_snapshots(tmp_path, fmt):
    cfg = SolverConfig(GridSpec(8), 0.5, 0.4, case=get_case("taylor-green"), snapshot_times=(0.0, 0.2),
                       snapshot_dir=str(tmp_path), snapshot_format=fmt)
    res = run(cfg)
    files = sorted(tmp_path.iterdir())
    assert len(files) == 2 and len(res.snapshots) == 2
    if fmt == "bin":
        meta, vals = read_snapshot(files[1])
        assert meta["N"] == "8" and meta["field"] == "u"
        np.testing.assert_array_equal(vals, res.snapshots[1][1])
    else:
        header = files[0].read_text().splitlines()[0]
        assert header.startswith("# N=8,") and "field=u" in header
        data = np.loadtxt(files[0], delimiter=",", skiprows=2)
        assert data.shape == (256, 6)


def test_write_snapshot_rejects_format(tmp_path):
    with pytest.raises(ConfigError):
        write_snapshot(tmp_path / "x", GridSpec(4), 0.0, "u", np.zeros((8, 8)), "hdf5")
