"""Time stepping for periodic incompressible flow with an immersed interface.

One step from ``t_n`` to ``t_{n+1}``:

1. advection ``3/2 F^n - 1/2 F^{n-1}`` with ``F = u . grad_h u + C2`` at each level;
2. pressure at ``t_{n+1/2}`` from ``Lap_h p = -div_h(F - g) - C4 + C5 - m``;
3. Crank-Nicolson diffusion, solved with the FFT resolvent.

Node values always refer to the side the node is on at their own time
level.  The momentum equation is posed on the side at ``t_{n+1}``; terms
computed on another side are referred to it by C7 (and by C1 for the time
difference), and the forcing in the Poisson equation is referred to the
mid-step sides by C7p.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .corrections import (
    CorrectionBundle,
    CorrectionField,
    SideMismatch,
    build_C1,
    build_C2,
    build_C3,
    build_C4,
    build_C5,
    build_C6,
    build_C7,
    side_mismatch_nodes,
)
from .errors import ConfigError, Diverged
from .grid import (
    DIM,
    GridFunction,
    GridSpec,
    VectorGridFunction,
    centered_diff_array,
    divergence_array,
    gradient_array,
    laplacian_array,
)
from .interface import (
    INSIDE,
    OUTSIDE,
    BodyForceJumps,
    ForceDensity,
    InterfaceGeometry,
    Intersections,
    JumpSet,
    SideField,
    VelocityTrace,
    classify,
    crossing_events,
    find_intersections,
    jumps_from_force,
    node_points,
)
from .spectral import apply_multiplier, inverse_laplacian_symbol, resolvent_symbol

log = logging.getLogger(__name__)

ANALYTIC, DERIVED = "analytic", "derived"
DIVERGENCE_FACTOR = 1e6


# --------------------------------------------------------------------------
# jump providers


class JumpProvider:
    """Supplies jumps at interface points ``X(theta, t)``."""

    def __call__(self, theta, points, t) -> JumpSet:
        raise NotImplementedError


@dataclass
class AnalyticJumps(JumpProvider):
    """Closed-form jumps from an object with ``jumps(points, t)``."""

    source: object

    def __call__(self, theta, points, t):
        return self.source.jumps(points, t)


@dataclass
class DerivedJumps(JumpProvider):
    """Jumps built from the force density along the curve."""

    geometry: InterfaceGeometry
    force: ForceDensity
    trace: Optional[VelocityTrace] = None
    body_force: Optional[BodyForceJumps] = None

    def __call__(self, theta, points, t):
        return jumps_from_force(self.geometry, self.force, self.trace, theta, t, self.body_force)


class GridTrace(VelocityTrace):
    """Velocity trace from the inside grid values by local least-squares linear fits."""

    def __init__(self, spec: GridSpec, geometry: InterfaceGeometry, radius: int = 3):
        self.spec, self.geometry, self.radius = spec, geometry, radius
        self.u = None
        self.t = None

    def update(self, u: np.ndarray, t: float):
        self.u, self.t = u, t

    def _fit(self, points, t):
        spec, r = self.spec, self.radius
        pts = np.asarray(points, float).reshape(-1, 2)
        out_v = np.zeros((len(pts), 2))
        out_g = np.zeros((len(pts), 2, 2))
        if self.u is None:
            return out_v.reshape(np.shape(points)), out_g.reshape(np.shape(points)[:-1] + (2, 2))
        offs = np.arange(-r, r + 1)
        for k, p in enumerate(pts):
            c = np.rint((spec.wrap(p) + spec.L) / spec.h).astype(int)
            ii = (c[0] + offs[:, None]) % spec.M
            jj = (c[1] + offs[None, :]) % spec.M
            ii, jj = np.broadcast_arrays(ii, jj)
            xy = np.stack([spec.x1d[ii], spec.x1d[jj]], -1).reshape(-1, 2)
            rel = spec.wrap(xy - p)
            keep = self.geometry.signed_distance(xy, t) <= 0
            A = np.column_stack([np.ones(keep.sum()), rel[keep]])
            vals = self.u[:, ii.ravel()[keep], jj.ravel()[keep]].T
            coef, *_ = np.linalg.lstsq(A, vals, rcond=None)
            out_v[k] = coef[0]
            out_g[k] = coef[1:].T
        return out_v.reshape(np.shape(points)), out_g.reshape(np.shape(points)[:-1] + (2, 2))

    def value(self, points, t):
        return self._fit(points, t)[0]

    def inside_gradient(self, points, t):
        return self._fit(points, t)[1]


# --------------------------------------------------------------------------
# configuration and state


@dataclass
class SolverConfig:
    """Run parameters.

    ``case`` (a manufactured case) supplies geometry, force, body force,
    initial velocity and analytic jumps in one object; the individual fields
    override or replace it.  ``body_force(points, t, side)`` returns the force
    evaluated with the formula of ``side``.
    """

    spec: GridSpec
    lam: float = 0.5
    T: float = 0.0
    case: Optional[object] = None
    geometry: Optional[InterfaceGeometry] = None
    force: Optional[ForceDensity] = None
    body_force: Optional[Callable] = None
    u0: Optional[Callable] = None
    jump_mode: str = ANALYTIC
    jump_provider: Optional[JumpProvider] = None
    enable_C1: bool = True
    enable_C7: bool = True
    snapshot_times: tuple = ()
    snapshot_dir: Optional[str] = None
    snapshot_format: str = "csv"

    def __post_init__(self):
        if not self.lam > 0:
            raise ConfigError(f"lambda must be positive, got {self.lam}")
        if self.T < 0:
            raise ConfigError(f"T must be nonnegative, got {self.T}")
        if self.jump_mode not in (ANALYTIC, DERIVED):
            raise ConfigError(f"jump_mode must be {ANALYTIC!r} or {DERIVED!r}")
        if self.case is not None:
            self.geometry = self.geometry or self.case.geometry
            self.force = self.force or self.case.force
            self.body_force = self.body_force or self.case.body_force
            if self.u0 is None:
                case = self.case
                self.u0 = lambda pts: case.velocity(pts, 0.0)
        if self.geometry is not None and self.jump_provider is None:
            if self.jump_mode == ANALYTIC:
                if self.case is None:
                    raise ConfigError("analytic jumps need a manufactured case")
                self.jump_provider = AnalyticJumps(self.case)
            else:
                if self.force is None:
                    raise ConfigError("derived jumps need a force density")
                trace = self.case.velocity_trace() if self.case is not None else None
                bfj = self.case.body_force_jumps() if self.case is not None else None
                self.jump_provider = DerivedJumps(self.geometry, self.force, trace, bfj)

    @property
    def tau(self) -> float:
        return self.lam * self.spec.h

    @property
    def n_steps(self) -> int:
        return int(math.floor(self.T / self.tau + 1e-9))


@dataclass(frozen=True, eq=False)
class SolverState:
    """``u^n``, ``u^{n-1}``, the latest mean-zero pressure and the time level."""

    u_n: VectorGridFunction
    u_nm1: Optional[VectorGridFunction]
    p_half: GridFunction
    t_n: float
    n: int
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class Level:
    """Interface data at one time: sides, crossings of gridlines and jumps there."""

    t: float
    sides: SideField
    inter: Optional[Intersections]
    jumps: Optional[JumpSet]


class _Context:
    """Per-run cache of interface levels and body-force fields."""

    def __init__(self, config: SolverConfig):
        self.config = config
        self.spec = config.spec
        self.geometry = config.geometry
        self._levels: dict[float, Level] = {}
        self.points = node_points(self.spec)

    def level(self, t: float) -> Level:
        key = round(t, 14)
        if key in self._levels:
            return self._levels[key]
        spec = self.spec
        if self.geometry is None:
            side = np.full(spec.shape, OUTSIDE, np.int8)
            lev = Level(t, SideField(spec, side, np.full(spec.shape, np.inf)), None, None)
        else:
            sides = classify(spec, self.geometry, t)
            inter = find_intersections(spec, self.geometry, t, sides)
            pts = self.geometry.position(inter.theta, t).reshape(-1, 2)
            jumps = self.config.jump_provider(inter.theta, pts, t) if len(inter) else None
            lev = Level(t, sides, inter, jumps)
        if len(self._levels) > 8:
            self._levels.pop(next(iter(self._levels)))
        self._levels[key] = lev
        return lev

    def body_force(self, t: float, side: np.ndarray) -> np.ndarray:
        if self.config.body_force is None:
            return np.zeros((DIM,) + self.spec.shape)
        g = self.config.body_force(self.points, t, side)
        return np.moveaxis(np.asarray(g, float), -1, 0)

    def extension_jumps(self, nodes: np.ndarray, t: float) -> JumpSet:
        """Jumps at the interface points closest to the given nodes, with signed offsets."""
        x = self.spec.x1d[nodes]
        th = self.geometry.closest_theta(x, t)
        pts = self.geometry.position(th, t).reshape(-1, 2)
        js = self.config.jump_provider(th, pts, t)
        d = self.geometry.signed_distance(x, t)
        n = self.geometry.normal(th, t).reshape(-1, 2)
        return js, d, n


def _tensor_along(T, d, n):
    """``T + d (T' . n)`` helper: contract the last axis of a derivative jump with ``n``."""
    return np.einsum("k...j,kj->k...", T, n) * d.reshape((-1,) + (1,) * (T.ndim - 2))


def _ext_forcing(ctx, nodes, t):
    """Extended jump of the advection term ``u . grad u`` at nodes."""
    js, d, n = ctx.extension_jumps(nodes, t)
    return js.jump_advection + _tensor_along(js.jump_D_advection, d, n)


def _ext_pressure_gradient(ctx, nodes, t):
    js, d, n = ctx.extension_jumps(nodes, t)
    return js.jump_Dp + _tensor_along(js.jump_D2p, d, n)


def _ext_laplacian(ctx, nodes, t):
    js, _, _ = ctx.extension_jumps(nodes, t)
    return js.jump_laplacian_u


# --------------------------------------------------------------------------
# building blocks


def _advection_plain(u: np.ndarray, h: float) -> np.ndarray:
    g = gradient_array(u, h)  # g[a, i] = d_a u_i
    return np.einsum("a...,ai...->i...", u, g)


def advection_at_level(u: np.ndarray, level: Level, spec: GridSpec):
    """``u . grad_h u`` and its correction C2 at one time level."""
    plain = _advection_plain(u, spec.h)
    if level.inter is None or not len(level.inter):
        return plain, CorrectionField.empty(spec, "C2", True)
    C2 = build_C2(level.jumps, level.inter, spec, u)
    return plain, C2


def advection_extrapolated(u_n, u_nm1, C2: Optional[CorrectionField] = None):
    """``3/2 u^n . grad_h u^n - 1/2 u^{n-1} . grad_h u^{n-1} + C2``."""
    spec = u_n.spec
    out = 1.5 * _advection_plain(u_n.values, spec.h) - 0.5 * _advection_plain(u_nm1.values, spec.h)
    if C2 is not None:
        out = out + C2.to_dense()
    return VectorGridFunction(spec, out)


def pressure_solve(advection_div: GridFunction, C4: CorrectionField, C5: CorrectionField,
                   diagnostics: Optional[dict] = None) -> GridFunction:
    """Solve ``Lap_h p = -(div + C4) + C5 - m`` with ``m = mean(-C4 + C5)``.

    ``advection_div`` is the plain centered divergence of the explicit forcing.
    The returned pressure has mean zero; ``diagnostics`` (if given) receives
    ``m`` and the mean of the right-hand side after subtraction.
    """
    spec = advection_div.spec
    corr = C5.to_dense() - C4.to_dense()
    m = float(np.mean(corr))
    rhs = -advection_div.values + corr - m
    rhs_mean = float(np.mean(rhs))
    if diagnostics is not None:
        diagnostics["m"] = m
        diagnostics["rhs_mean"] = rhs_mean
        diagnostics["rhs_norm"] = float(np.max(np.abs(rhs)))
    p = apply_multiplier(rhs, inverse_laplacian_symbol()(spec))
    return GridFunction(spec, p - np.mean(p))


def _empty_bundle(spec, t_n, t_next):
    e_v = CorrectionField.empty(spec, "", True)
    e_s = CorrectionField.empty(spec)
    return CorrectionBundle(spec, t_n, t_next, e_v, e_v, e_v, e_s, e_s, e_v, e_v, e_v)


def _poisson_pieces(lev: Level, spec):
    if lev.inter is None or not len(lev.inter):
        return CorrectionField.empty(spec, "C4"), CorrectionField.empty(spec, "C5"), \
            CorrectionField.empty(spec, "C6", True)
    return (build_C4(lev.jumps, lev.inter, spec), build_C5(lev.jumps, lev.inter, spec),
            build_C6(lev.jumps, lev.inter, spec))


def _C3(lev: Level, spec):
    if lev.inter is None or not len(lev.inter):
        return CorrectionField.empty(spec, "C3", True)
    return build_C3(lev.jumps, lev.inter, spec)


def build_level_bundle(ctx: _Context, u: np.ndarray, t: float) -> CorrectionBundle:
    """Single-level bundle (C2, C4, C5, C6 at ``t``) for pressure recovery."""
    spec = ctx.spec
    lev = ctx.level(t)
    _, C2 = advection_at_level(u, lev, spec)
    C4, C5, C6 = _poisson_pieces(lev, spec)
    b = _empty_bundle(spec, t, t)
    return replace(b, C2=C2, C4=C4, C5=C5, C6=C6)


def build_bundle(ctx: _Context, state: SolverState) -> CorrectionBundle:
    """All corrections for the step from ``state.t_n`` to ``t_n + tau``."""
    cfg, spec = ctx.config, ctx.spec
    tau = cfg.tau
    t_n = state.t_n
    t_next, t_half = t_n + tau, t_n + 0.5 * tau
    first = state.n == 0 or state.u_nm1 is None
    lev_n, lev_next = ctx.level(t_n), ctx.level(t_next)
    u_n = state.u_n.values

    # advection levels: (weight, level, velocity)
    levels = [(1.0, lev_n, u_n)] if first else [
        (1.5, lev_n, u_n), (-0.5, ctx.level(t_n - tau), state.u_nm1.values)]
    C2 = CorrectionField.empty(spec, "C2", True)
    for w, lev, u in levels:
        C2 = C2 + advection_at_level(u, lev, spec)[1].scaled(w)
    C2 = replace(C2, name="C2")

    C3 = replace(_C3(lev_n, spec).scaled(0.5) + _C3(lev_next, spec).scaled(0.5), name="C3")

    lev_p = lev_n if first else ctx.level(t_half)
    if first:
        C4 = CorrectionField.empty(spec, "C4")
        C5 = CorrectionField.empty(spec, "C5")
        C6 = _poisson_pieces(lev_p, spec)[2]
    else:
        C4, C5, C6 = _poisson_pieces(lev_p, spec)

    B = lev_next.sides.side
    C1 = CorrectionField.empty(spec, "C1", True)
    C7 = CorrectionField.empty(spec, "C7", True)
    C7p = CorrectionField.empty(spec, "C7p", True)
    if ctx.geometry is not None:
        if cfg.enable_C1:
            ev = crossing_events(spec, ctx.geometry, t_n, t_next)
            if len(ev):
                tc = ev.crossing_time
                x = spec.x1d[ev.nodes]
                th = np.array([ctx.geometry.closest_theta(x[k], tc[k]) for k in range(len(ev))])
                pts = np.array([ctx.geometry.position(th[k], tc[k]) for k in range(len(ev))])
                js = _jumps_at_times(ctx, th, pts, tc)
                C1 = build_C1(ev, js, spec)
        terms, pterms = [], []
        for w, lev, _ in levels:
            nodes, to = side_mismatch_nodes(lev.sides.side, B)
            if len(nodes):
                terms.append(SideMismatch(nodes, to, _ext_forcing(ctx, nodes, lev.t), -w, "advection"))
            nodes, to = side_mismatch_nodes(lev.sides.side, lev_p.sides.side)
            if len(nodes) and not first:
                pterms.append(SideMismatch(nodes, to, _ext_forcing(ctx, nodes, lev.t), w, "forcing"))
        nodes, to = side_mismatch_nodes(lev_p.sides.side, B)
        if len(nodes):
            terms.append(SideMismatch(nodes, to, _ext_pressure_gradient(ctx, nodes, lev_p.t), -1.0,
                                      "pressure"))
        nodes, to = side_mismatch_nodes(lev_n.sides.side, B)
        if len(nodes):
            terms.append(SideMismatch(nodes, to, _ext_laplacian(ctx, nodes, t_n), 0.5, "diffusion"))
        if cfg.enable_C7:
            C7 = build_C7(spec, terms)
        C7p = build_C7(spec, pterms, "C7p")
    return CorrectionBundle(spec, t_n, t_next, C1, C2, C3, C4, C5, C6, C7, C7p)


def _jumps_at_times(ctx, theta, points, times) -> JumpSet:
    """Jump records at points that each carry their own time."""
    parts = [ctx.config.jump_provider(theta[k:k + 1], points[k:k + 1], float(times[k]))
             for k in range(len(times))]
    from dataclasses import fields as dc_fields
    kw = {}
    for f in dc_fields(JumpSet):
        vals = [getattr(p, f.name) for p in parts]
        kw[f.name] = None if any(v is None for v in vals) else np.concatenate(vals)
    return JumpSet(**kw)


# --------------------------------------------------------------------------
# the scheme


class Solver:
    """Stateful driver owning the interface cache for one configuration."""

    def __init__(self, config: SolverConfig):
        self.config = config
        self.ctx = _Context(config)
        self.spec = config.spec
        self.u0_norm = None
        self.history: list[dict] = []

    # pressure ------------------------------------------------------------
    def _forcing(self, u_levels, lev_p: Level, t_g: float, C2: CorrectionField, C7p):
        """Explicit forcing ``F - g`` on the pressure level's sides."""
        F = sum(w * _advection_plain(u, self.spec.h) for w, u in u_levels) + C2.to_dense()
        if C7p is not None:
            F = F + C7p.to_dense()
        return F - self.ctx.body_force(t_g, lev_p.sides.side)

    def pressure_at(self, u: np.ndarray, t: float, diagnostics: Optional[dict] = None) -> GridFunction:
        """Single-level pressure for velocity ``u`` at time ``t``."""
        b = build_level_bundle(self.ctx, u, t)
        lev = self.ctx.level(t)
        G = self._forcing([(1.0, u)], lev, t, b.C2, None)
        div = GridFunction(self.spec, divergence_array(G, self.spec.h))
        return pressure_solve(div, b.C4, b.C5, diagnostics)

    # steps ---------------------------------------------------------------
    def initial_state(self) -> SolverState:
        cfg = self.config
        if cfg.u0 is None:
            u0 = np.zeros((DIM,) + self.spec.shape)
        else:
            u0 = np.moveaxis(np.asarray(cfg.u0(node_points(self.spec)), float), -1, 0)
        self.u0_norm = float(np.max(np.abs(u0)))
        self._refresh_trace(u0, 0.0)
        diag = {}
        p0 = self.pressure_at(u0, 0.0, diag)
        return SolverState(VectorGridFunction(self.spec, u0), None, p0, 0.0, 0, diag)

    def _refresh_trace(self, u: np.ndarray, t: float):
        # grid-fitted traces lag one step; cached levels hold jumps from the old fit
        trace = getattr(self.config.jump_provider, "trace", None)
        if isinstance(trace, GridTrace):
            trace.update(u, t)
            self.ctx._levels.clear()

    def advance(self, state: SolverState, bundle: Optional[CorrectionBundle] = None) -> SolverState:
        if bundle is None:
            self._refresh_trace(state.u_n.values, state.t_n)
            bundle = build_bundle(self.ctx, state)
        if state.n == 0 or state.u_nm1 is None:
            new = first_step(state, bundle, self.config, self.ctx)
        else:
            new = step(state, bundle, self.config, self.ctx)
        self._check(new)
        return new

    def _check(self, state: SolverState):
        u = state.u_n.values
        bound = DIVERGENCE_FACTOR * (1.0 + (self.u0_norm or 0.0))
        if not np.all(np.isfinite(u)) or np.max(np.abs(u)) > bound:
            raise Diverged(f"velocity blew up at step {state.n} (t = {state.t_n:.6g})", step=state.n)


def _rhs_and_solve(state, bundle, config, ctx, adv, gradp, lev_p):
    spec = config.spec
    h, tau = spec.h, config.tau
    t_half = state.t_n + 0.5 * tau
    lev_next = ctx.level(state.t_n + tau)
    u = state.u_n.values
    g = ctx.body_force(t_half, lev_next.sides.side)
    inner = (-adv - gradp + 0.5 * laplacian_array(u, h) + bundle.C3.to_dense()
             + bundle.C1.to_dense() + bundle.C7.to_dense() + g)
    rhs = u + tau * inner
    u_new = apply_multiplier(rhs, resolvent_symbol(tau)(spec))
    resid = u_new - 0.5 * tau * laplacian_array(u_new, h) - rhs
    diag = {"helmholtz_residual": float(np.max(np.abs(resid))) / max(1.0, float(np.max(np.abs(rhs)))),
            "divergence": float(np.max(np.abs(divergence_array(u_new, h))))}
    return u_new, diag


def step(state: SolverState, bundle: CorrectionBundle, config: SolverConfig,
         ctx: Optional[_Context] = None) -> SolverState:
    """Advance ``n >= 1`` with extrapolated advection and a mid-step pressure."""
    ctx = ctx or _Context(config)
    spec, tau = config.spec, config.tau
    if state.u_nm1 is None:
        raise ValueError("step needs u^{n-1}; use first_step for n = 0")
    t_half = state.t_n + 0.5 * tau
    lev_p = ctx.level(t_half)
    adv = advection_extrapolated(state.u_n, state.u_nm1, bundle.C2).values
    G = adv + (bundle.C7p.to_dense() if bundle.C7p is not None else 0.0) \
        - ctx.body_force(t_half, lev_p.sides.side)
    diag: dict = {}
    p = pressure_solve(GridFunction(spec, divergence_array(G, spec.h)), bundle.C4, bundle.C5, diag)
    gradp = gradient_array(p.values, spec.h) + bundle.C6.to_dense()
    u_new, d2 = _rhs_and_solve(state, bundle, config, ctx, adv, gradp, lev_p)
    diag.update(d2)
    diag["C1_nodes"], diag["C7_nodes"] = len(bundle.C1), len(bundle.C7)
    return SolverState(VectorGridFunction(spec, u_new), state.u_n, p, state.t_n + tau, state.n + 1, diag)


def first_step(state0: SolverState, bundle: CorrectionBundle, config: SolverConfig,
               ctx: Optional[_Context] = None) -> SolverState:
    """First step: advection and pressure gradient taken at level 0 only."""
    ctx = ctx or _Context(config)
    spec, tau = config.spec, config.tau
    lev0 = ctx.level(state0.t_n)
    u = state0.u_n.values
    adv = _advection_plain(u, spec.h) + bundle.C2.to_dense()
    gradp = gradient_array(state0.p_half.values, spec.h) + bundle.C6.to_dense()
    u_new, diag = _rhs_and_solve(state0, bundle, config, ctx, adv, gradp, lev0)
    diag.update({"m": state0.diagnostics.get("m", 0.0), "rhs_mean": state0.diagnostics.get("rhs_mean", 0.0),
                 "C1_nodes": len(bundle.C1), "C7_nodes": len(bundle.C7)})
    return SolverState(VectorGridFunction(spec, u_new), state0.u_n, state0.p_half,
                       state0.t_n + tau, 1, diag)


def initial_pressure(u0: VectorGridFunction, bundle0: CorrectionBundle, config: SolverConfig,
                     ctx: Optional[_Context] = None, diagnostics: Optional[dict] = None) -> GridFunction:
    """Pressure at ``t = 0`` from the single-level Poisson equation."""
    ctx = ctx or _Context(config)
    spec = config.spec
    t = bundle0.t_n
    lev = ctx.level(t)
    G = _advection_plain(u0.values, spec.h) + bundle0.C2.to_dense() - ctx.body_force(t, lev.sides.side)
    return pressure_solve(GridFunction(spec, divergence_array(G, spec.h)), bundle0.C4, bundle0.C5,
                          diagnostics)


def recover_pressure_at(state: SolverState, t_n: float, bundle: CorrectionBundle, config: SolverConfig,
                        ctx: Optional[_Context] = None) -> GridFunction:
    """Pressure at ``t_n`` from ``u^n`` (single-level Poisson solve, mean zero)."""
    return initial_pressure(state.u_n, bundle, config, ctx)


# --------------------------------------------------------------------------
# driver


@dataclass
class RunResult:
    final: SolverState
    times: list
    diagnostics: list
    snapshots: list


def write_snapshot(path, spec: GridSpec, t: float, name: str, values: np.ndarray, fmt: str = "csv"):
    """Dump node values with a header ``N, L, t, field``.

    ``csv``: header line then one row per node ``i, j, x, y, value...``.
    ``bin``: a text header line terminated by newline, then little-endian float64 values.
    """
    values = np.asarray(values, float)
    comps = values.reshape((-1,) + spec.shape)
    header = f"N={spec.N},L={spec.L!r},t={t!r},field={name},components={len(comps)}"
    path = Path(path)
    if fmt == "csv":
        X, Y = spec.mesh
        cols = [np.indices(spec.shape)[0].ravel(), np.indices(spec.shape)[1].ravel(), X.ravel(), Y.ravel()]
        cols += [c.ravel() for c in comps]
        with open(path, "w") as fh:
            fh.write("# " + header + "\n")
            fh.write("i,j,x,y," + ",".join(f"{name}{k}" for k in range(len(comps))) + "\n")
            np.savetxt(fh, np.column_stack(cols), delimiter=",", fmt=["%d", "%d", "%.17g", "%.17g"] + ["%.17g"] * len(comps))
    elif fmt == "bin":
        with open(path, "wb") as fh:
            fh.write((header + "\n").encode())
            fh.write(comps.astype("<f8").tobytes())
    else:
        raise ConfigError(f"unknown snapshot format {fmt!r}")


def read_snapshot(path):
    """Inverse of ``write_snapshot`` for the binary format: ``(header dict, values)``."""
    with open(path, "rb") as fh:
        header = fh.readline().decode().strip()
        data = np.frombuffer(fh.read(), "<f8")
    meta = dict(item.split("=", 1) for item in header.split(","))
    N, ncomp = int(meta["N"]), int(meta["components"])
    return meta, data.reshape(ncomp, 2 * N, 2 * N)


def run(config: SolverConfig, monitor: Optional[Callable[[SolverState, "Solver"], None]] = None) -> RunResult:
    """Integrate from ``t = 0`` to the last step ``t_n <= T``.

    ``monitor`` is called with every state including the initial one.
    """
    solver = Solver(config)
    state = solver.initial_state()
    times, diags, snaps = [0.0], [dict(state.diagnostics)], []
    pending = sorted(config.snapshot_times)
    if monitor:
        monitor(state, solver)

    def snapshot(st):
        while pending and pending[0] <= st.t_n + 1e-12:
            pending.pop(0)
            snaps.append((st.t_n, st.u_n.values.copy()))
            if config.snapshot_dir:
                Path(config.snapshot_dir).mkdir(parents=True, exist_ok=True)
                ext = "csv" if config.snapshot_format == "csv" else "bin"
                write_snapshot(Path(config.snapshot_dir) / f"u_{st.n:05d}.{ext}", config.spec, st.t_n, "u",
                               st.u_n.values, config.snapshot_format)

    snapshot(state)
    for _ in range(config.n_steps):
        try:
            state = solver.advance(state)
        except Exception:
            log.error("failed while advancing to step %d (t = %.6g)", state.n + 1, state.t_n + config.tau)
            raise
        times.append(state.t_n)
        diags.append(dict(state.diagnostics))
        snapshot(state)
        if monitor:
            monitor(state, solver)
    return RunResult(state, times, diags, snaps)
