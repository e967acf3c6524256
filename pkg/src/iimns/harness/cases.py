"""Manufactured solutions with exact piecewise velocity and pressure.

Each side's velocity and pressure are sympy expressions in ``(x, y, t)``;
all derivatives, the advection term and the body force
``g = v_t + v . grad v + grad q - Lap v`` are derived symbolically and
lambdified once per case.  Jumps at interface points are the differences of
the two side evaluations.

The interface cases use a circle of radius ``R`` centered at ``c(t)``.  With
``xi = x - c(t)`` and ``phi = |xi|^2 - R^2`` the stream functions are

    inside:  U1 y - U2 x + a(t) (kappa |xi|^2 / 2 + phi^2 chi(xi))
    outside: U1 y - U2 x + a(t) Phi(|xi|),

where ``Phi'`` is a compactly supported bump with ``Phi'(R) = kappa R`` and
``Phi''(R) = 0``.  The pressure is a smooth periodic ``q+`` outside and
``q+ - A - phi B`` inside, with ``B`` chosen so the normal pressure jump equals
the arclength derivative of the tangential force.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
import sympy as sp

from ..errors import ConstructionInvalid
from ..interface import (
    INSIDE,
    OUTSIDE,
    BodyForceJumps,
    Circle,
    ForceDensity,
    InterfaceGeometry,
    JumpSet,
    Motion,
    VelocityTrace,
    _fourier_eval,
    _spectral_derivative,
)

X, Y, T = sp.symbols("x y t", real=True)
RHO = sp.Symbol("rho", positive=True)
NB = 5  # radial derivatives supplied numerically: beta, beta', ..., beta''''
B_SYMS = sp.symbols(f"b0:{NB}")
_BETA = sp.Function("beta")

_GROUPS = {
    "v": ("v",),
    "q": ("q",),
    "g": ("g",),
    "jumps": ("v", "Dv", "D2v", "vt", "q", "Dq", "D2q", "F", "DF", "D2F", "g", "Dg", "D2g"),
}
_SHAPES = {"v": (2,), "Dv": (2, 2), "D2v": (2, 2, 2), "vt": (2,), "q": (), "Dq": (2,),
           "D2q": (2, 2), "F": (2,), "DF": (2, 2), "D2F": (2, 2, 2), "g": (2,), "Dg": (2, 2),
           "D2g": (2, 2, 2)}


def _grad(e):
    return [sp.diff(e, X), sp.diff(e, Y)]


def _derived(v, q):
    """All symbolic quantities of one side, flattened in ``_SHAPES`` order."""
    Dv = [_grad(vi) for vi in v]
    D2v = [[_grad(d) for d in row] for row in Dv]
    vt = [sp.diff(vi, T) for vi in v]
    Dq = _grad(q)
    D2q = [_grad(d) for d in Dq]
    F = [v[0] * Dv[i][0] + v[1] * Dv[i][1] for i in range(2)]
    DF = [_grad(Fi) for Fi in F]
    D2F = [[_grad(d) for d in row] for row in DF]
    lap = [D2v[i][0][0] + D2v[i][1][1] for i in range(2)]
    g = [vt[i] + F[i] + Dq[i] - lap[i] for i in range(2)]
    Dg = [_grad(gi) for gi in g]
    D2g = [[_grad(d) for d in row] for row in Dg]
    return {"v": v, "Dv": Dv, "D2v": D2v, "vt": vt, "q": q, "Dq": Dq, "D2q": D2q, "F": F,
            "DF": DF, "D2F": D2F, "g": g, "Dg": Dg, "D2g": D2g}


def _flatten(e):
    if isinstance(e, (list, tuple)):
        return [s for item in e for s in _flatten(item)]
    return [e]


def _beta_order(a):
    """Derivative order if ``a`` is (a substitution into) a derivative of beta, else None."""
    if isinstance(a, sp.Subs):
        a = a.expr
    if isinstance(a, sp.Derivative) and a.expr.func == _BETA:
        return a.derivative_count
    return None


def _replace_beta(e):
    # substitutions first, otherwise their inner derivative would be replaced alone
    e = e.replace(lambda a: isinstance(a, sp.Subs) and _beta_order(a) is not None,
                  lambda a: B_SYMS[_beta_order(a)])
    e = e.replace(lambda a: _beta_order(a) is not None, lambda a: B_SYMS[_beta_order(a)])
    return e.replace(lambda a: getattr(a, "func", None) == _BETA, lambda a: B_SYMS[0])


class _SideFunctions:
    """Lambdified groups of one side's quantities."""

    def __init__(self, v, q):
        data = _derived(v, q)
        self._fns = {}
        for gname, keys in _GROUPS.items():
            flat = [_replace_beta(s) for k in keys for s in _flatten(data[k])]
            self._fns[gname] = (keys, sp.lambdify((X, Y, T, *B_SYMS), flat, modules="numpy", cse=True))

    def eval(self, group, x, y, t, radial):
        keys, fn = self._fns[group]
        raw = fn(x, y, t, *radial)
        shape = np.shape(x)
        out, pos = {}, 0
        for k in keys:
            n = int(np.prod(_SHAPES[k], dtype=int))
            vals = [np.broadcast_to(np.asarray(raw[pos + i], float), shape) for i in range(n)]
            pos += n
            arr = np.stack(vals, axis=-1) if n > 1 or _SHAPES[k] else vals[0]
            out[k] = arr.reshape(shape + _SHAPES[k])
        return out


@lru_cache(maxsize=None)
def _bump_radial(R: float, r0: float, kappa: float):
    """``beta(rho) = Phi'(r)/r`` at ``rho = r^2`` and its rho-derivatives, zero beyond ``r0``."""
    rho = sp.Symbol("rho", positive=True)
    r = sp.sqrt(rho)
    u = (r - R) / (r0 - R)
    expr = kappa * R * (1 - u**2) ** 6 / r
    fns = [sp.lambdify(rho, sp.diff(expr, rho, n), "numpy") for n in range(NB)]

    def radial(rho_vals):
        rho_vals = np.asarray(rho_vals, float)
        # the 1/r factor makes the outside extension singular at the center; deep inside it is
        # never used, so it is cut to zero there
        inside = (rho_vals < r0**2) & (rho_vals > (R / 4) ** 2)
        safe = np.where(inside, rho_vals, R**2)
        return [np.where(inside, np.broadcast_to(f(safe), rho_vals.shape), 0.0) for f in fns]

    return radial


def _zero_radial(rho_vals):
    z = np.zeros(np.shape(rho_vals))
    return [z] * NB


@dataclass
class ExactTrace(VelocityTrace):
    """Exact velocity and inside gradient of a case on its interface."""

    case: "ManufacturedCase"

    def value(self, points, t):
        return self.case.side_eval("jumps", points, t, INSIDE)["v"]

    def inside_gradient(self, points, t):
        return self.case.side_eval("jumps", points, t, INSIDE)["Dv"]


class ManufacturedCase:
    """Exact piecewise solution, interface, force density and body force.

    ``geometry`` is None for interface-free cases, where the outside
    functions describe the whole domain.
    """

    def __init__(self, name: str, sides: dict, geometry: Optional[InterfaceGeometry] = None,
                 radial: Optional[dict] = None, L: float = np.pi, description: str = "",
                 validate: bool = True):
        self.name = name
        self.geometry = geometry
        self.L = L
        self.description = description
        self._sides = {s: _SideFunctions(*vq) for s, vq in sides.items()}
        self._radial = radial or {}
        self.force = ForceDensity(self._force, None, f"{name}-force") if geometry is not None else None
        if validate:
            self.validate()

    # ---------------------------------------------------------------- evaluation
    @property
    def has_interface(self) -> bool:
        return self.geometry is not None

    def _lab(self, points, t):
        p = np.asarray(points, float)
        if self.geometry is None:
            return p
        return self.geometry.wrap_point(p, t)

    def side_eval(self, group, points, t, side):
        """Quantities of ``group`` from the ``side`` formulas (smooth extensions off that side)."""
        p = self._lab(points, t)
        key = side if side in self._sides else OUTSIDE
        x, y = p[..., 0], p[..., 1]
        if self.geometry is not None:
            c = self.geometry.center(t)
            rho = (x - c[0]) ** 2 + (y - c[1]) ** 2
        else:
            rho = np.zeros(np.shape(x))
        radial = self._radial.get(key, _zero_radial)(rho)
        return self._sides[key].eval(group, x, y, t, radial)

    def sides(self, points, t):
        points = np.asarray(points, float)
        if self.geometry is None:
            return np.full(points.shape[:-1], OUTSIDE, np.int8)
        sd = self.geometry.signed_distance(points, t)
        return np.where(sd > 0, OUTSIDE, INSIDE).astype(np.int8)

    def _piecewise(self, group, key, points, t, side):
        side = self.sides(points, t) if side is None else np.broadcast_to(side, np.shape(points)[:-1])
        out = None
        for s in (INSIDE, OUTSIDE):
            mask = side == s
            if not np.any(mask):
                continue
            vals = self.side_eval(group, np.asarray(points, float)[mask], t, s)[key]
            if out is None:
                out = np.zeros(np.shape(points)[:-1] + vals.shape[1:])
            out[mask] = vals
        return out

    def velocity(self, points, t, side=None):
        """Exact velocity; ``side`` selects the formula per point (default: true side)."""
        return self._piecewise("v", "v", points, t, side)

    def pressure(self, points, t, side=None):
        return self._piecewise("q", "q", points, t, side)

    def body_force(self, points, t, side=None):
        return self._piecewise("g", "g", points, t, side)

    # ---------------------------------------------------------------- jumps
    def jumps(self, points, t) -> JumpSet:
        """Exact jumps (outside minus inside) at interface points."""
        o = self.side_eval("jumps", points, t, OUTSIDE)
        i = self.side_eval("jumps", points, t, INSIDE)
        d = {k: o[k] - i[k] for k in o}
        return JumpSet(d["v"], d["Dv"], d["D2v"], d["q"], d["Dq"], d["D2q"], d["vt"], d["F"],
                       d["DF"], d["D2F"], d["g"], d["Dg"], d["D2g"])

    def jumps_at_theta(self, theta, t) -> JumpSet:
        return self.jumps(self.geometry.position(np.asarray(theta, float), t), t)

    def _force(self, theta, t):
        """Force density read off from the exact jumps: ``f = [q] n - [dv/dn]``."""
        theta = np.asarray(theta, float)
        j = self.jumps_at_theta(theta, t)
        n = self.geometry.normal(theta, t)
        dn_v = np.einsum("...ij,...j->...i", j.jump_Du, n)
        return j.jump_p[..., None] * n - dn_v

    def body_force_jumps(self) -> BodyForceJumps:
        def jg(points, t):
            return self.jumps(points, t).jump_g

        def jdiv(points, t):
            return np.einsum("...ii->...", self.jumps(points, t).jump_Dg)

        def jD(points, t):
            return self.jumps(points, t).jump_Dg

        return BodyForceJumps(jg, jdiv, jD)

    def velocity_trace(self) -> ExactTrace:
        return ExactTrace(self)

    # ---------------------------------------------------------------- checks
    def validation_report(self, n: int = 256, times=(0.0, 0.1, 0.25), seed: int = 0) -> dict:
        """Residuals of the construction invariants (all should vanish)."""
        rep = {}
        rng = np.random.default_rng(seed)
        pts = rng.uniform(-self.L, self.L, size=(64, 2))
        div = 0.0
        for t in times:
            for s in self._sides:
                Dv = self.side_eval("jumps", pts, t, s)["Dv"]
                div = max(div, float(np.max(np.abs(Dv[:, 0, 0] + Dv[:, 1, 1]))))
        rep["divergence"] = div
        if self.geometry is None:
            return rep
        th = 2 * np.pi * np.arange(n) / n
        geo = self.geometry
        ju = jn = comp = adv_n = kin = 0.0
        for t in times:
            j = self.jumps_at_theta(th, t)
            nrm, tan = geo.normal(th, t), geo.tangent(th, t)
            sp_ = geo.speed(th, t)
            ju = max(ju, float(np.max(np.abs(j.jump_u))))
            phi = (self._force(th, t) * tan).sum(-1)
            dphi_ds = _spectral_derivative(phi) / sp_
            dpdn = (j.jump_Dp * nrm).sum(-1)
            jn = max(jn, float(np.max(np.abs(dpdn - dphi_ds))))
            comp = max(comp, abs(float(np.sum(dpdn * sp_) * 2 * np.pi / n)))
            adv_n = max(adv_n, float(np.max(np.abs((j.jump_advection * nrm).sum(-1)))))
            v = self.side_eval("v", geo.position(th, t), t, INSIDE)["v"]
            kin = max(kin, float(np.max(np.abs(((v - geo.velocity(th, t)) * nrm).sum(-1)))))
        rep.update({"jump_u": ju, "normal_pressure_jump": jn, "compatibility": comp,
                    "advection_normal_jump": adv_n, "kinematic": kin})
        return rep

    def validate(self, tol: float = 1e-10):
        rep = self.validation_report()
        bad = {k: v for k, v in rep.items() if not v <= tol}
        if bad:
            detail = ", ".join(f"{k}={v:.3e}" for k, v in bad.items())
            raise ConstructionInvalid(f"case {self.name!r} fails its invariants: {detail}")
        return rep


# --------------------------------------------------------------------------
# shipped cases


def taylor_green() -> ManufacturedCase:
    """Decaying Taylor-Green vortex; no interface, zero body force."""
    e2, e4 = sp.exp(-2 * T), sp.exp(-4 * T)
    v = [-sp.cos(X) * sp.sin(Y) * e2, sp.sin(X) * sp.cos(Y) * e2]
    q = -sp.Rational(1, 4) * (sp.cos(2 * X) + sp.cos(2 * Y)) * e4
    return ManufacturedCase("taylor-green", {OUTSIDE: (v, q)}, None,
                            description="Taylor-Green vortex, no interface")


def _circle_case(name, U, amplitude, corrupt=0.0, R=1.0, r0=2.5, kappa=1.0, description="",
                 validate=True):
    U1, U2 = (sp.nsimplify(u) for u in U)
    xi1, xi2 = X - U1 * T, Y - U2 * T
    rho = xi1**2 + xi2**2
    phi = rho - R**2
    a = amplitude
    chi = sp.Rational(1, 10) + sp.Rational(1, 5) * xi1 - sp.Rational(3, 20) * xi2 + sp.Rational(1, 10) * xi1 * xi2
    chi_theta = -xi2 * sp.diff(chi, X) + xi1 * sp.diff(chi, Y)

    psi_in = U1 * Y - U2 * X + a * (kappa * rho / 2 + phi**2 * chi)
    v_in = [sp.diff(psi_in, Y) + corrupt, -sp.diff(psi_in, X)]
    beta = _BETA(rho)
    v_out = [U1 + a * beta * xi2, U2 - a * beta * xi1]

    b = 1 + sp.sin(T) / 2
    q_out = b * (sp.sin(X) * sp.cos(Y) / 2 + sp.cos(2 * Y) / 4)
    A = a * (sp.Rational(1, 2) + sp.Rational(3, 10) * xi1 + sp.Rational(1, 5) * xi1 * xi2)
    D = -8 * R * a * chi_theta
    Bf = (D - (xi1 * sp.diff(A, X) + xi2 * sp.diff(A, Y)) / R) / (2 * R)
    q_in = q_out - A - phi * Bf

    motion = Motion("translate", tuple(float(u) for u in U)) if any(U) else Motion()
    geo = Circle(R, (0.0, 0.0), motion)
    radial = {OUTSIDE: _bump_radial(float(R), float(r0), float(kappa))}
    return ManufacturedCase(name, {INSIDE: (v_in, q_in), OUTSIDE: (v_out, q_out)}, geo, radial,
                            description=description, validate=validate)


def static_circle(corrupt: float = 0.0, validate: bool = True) -> ManufacturedCase:
    """Fixed unit circle with time-varying swirl, tangential force and pressure jump."""
    return _circle_case("static-circle", (0.0, 0.0), 1 + sp.sin(2 * T) / 2, corrupt,
                        description="static unit circle, time-dependent jumps", validate=validate)


def moving_circle(corrupt: float = 0.0, velocity=(0.4, 0.2), validate: bool = True) -> ManufacturedCase:
    """Unit circle translating with the fluid's normal velocity; jumps fixed in its frame."""
    return _circle_case("moving-circle", velocity, sp.Integer(1), corrupt,
                        description="unit circle translating at constant velocity", validate=validate)


CASES: dict[str, Callable[[], ManufacturedCase]] = {
    "taylor-green": taylor_green,
    "static-circle": static_circle,
    "moving-circle": moving_circle,
}
ALIASES = {"tg": "taylor-green", "m2": "static-circle", "m3": "moving-circle"}


def get_case(name: str) -> ManufacturedCase:
    """Shipped case by name (or alias ``tg``, ``m2``, ``m3``); built once per process."""
    key = ALIASES.get(name.lower(), name.lower())
    if key not in CASES:
        valid = ", ".join(sorted(CASES))
        raise KeyError(f"unknown case {name!r}; valid cases: {valid}")
    return _build(key)


@lru_cache(maxsize=None)
def _build(key: str) -> ManufacturedCase:
    return CASES[key]()
