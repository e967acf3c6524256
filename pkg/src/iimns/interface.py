"""Interface geometry, grid classification and jump conditions.

Curves are closed, counterclockwise, and move by a prescribed rigid
motion.  The outward normal is the tangent rotated clockwise, and jumps
are always outside minus inside.  Nodes exactly on the curve count as
inside.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from typing import Callable, Iterator, Optional

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import (
    GeometryDegenerate,
    MissingTangentialDerivative,
    MultipleCrossings,
    RootNotBracketed,
)
from .grid import GridSpec, shift

INSIDE, OUTSIDE = -1, 1


# --------------------------------------------------------------------------
# motion and geometry


@dataclass(frozen=True)
class Motion:
    """Rigid motion law: ``static``, ``translate`` (velocity) or ``rotate`` (omega)."""

    kind: str = "static"
    velocity: tuple[float, float] = (0.0, 0.0)
    omega: float = 0.0

    def __post_init__(self):
        if self.kind not in ("static", "translate", "rotate"):
            raise ValueError(f"unknown motion kind {self.kind!r}")

    @property
    def U(self) -> np.ndarray:
        return np.asarray(self.velocity, float) if self.kind == "translate" else np.zeros(2)

    @property
    def w(self) -> float:
        return self.omega if self.kind == "rotate" else 0.0

    @property
    def is_static(self) -> bool:
        return self.kind == "static" or (not np.any(self.U) and self.w == 0.0)


def _rot(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s], [s, c]])


def _perp(v):
    """Rotate by +90 degrees."""
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


class InterfaceGeometry:
    """Closed curve ``X(theta, t) = c(t) + Rot(omega t) B(theta)``, theta in ``[0, 2 pi)``.

    Subclasses provide the body-frame curve ``B`` and its first two
    theta-derivatives.  ``L`` is the half-period of the box the curve lives in.
    """

    kind = "curve"

    def __init__(self, center=(0.0, 0.0), motion: Motion = Motion(), L: float = np.pi):
        self.center0 = np.asarray(center, float)
        self.motion = motion
        self.L = float(L)

    # body frame
    def body(self, theta):
        raise NotImplementedError

    def dbody(self, theta):
        raise NotImplementedError

    def d2body(self, theta):
        raise NotImplementedError

    # lab frame
    def center(self, t: float) -> np.ndarray:
        return self.center0 + self.motion.U * t

    def _R(self, t):
        return _rot(self.motion.w * t)

    def position(self, theta, t):
        return self.center(t) + self.body(np.asarray(theta, float)) @ self._R(t).T

    def dpos(self, theta, t):
        return self.dbody(np.asarray(theta, float)) @ self._R(t).T

    def d2pos(self, theta, t):
        return self.d2body(np.asarray(theta, float)) @ self._R(t).T

    def velocity(self, theta, t):
        """Material velocity of the curve point with parameter theta."""
        rel = self.body(np.asarray(theta, float)) @ self._R(t).T
        return self.motion.U + self.motion.w * _perp(rel)

    def speed(self, theta, t):
        return np.linalg.norm(self.dpos(theta, t), axis=-1)

    def tangent(self, theta, t):
        d = self.dpos(theta, t)
        return d / np.linalg.norm(d, axis=-1, keepdims=True)

    def normal(self, theta, t):
        tt = self.tangent(theta, t)
        return np.stack([tt[..., 1], -tt[..., 0]], axis=-1)

    def curvature(self, theta, t):
        d, dd = self.dpos(theta, t), self.d2pos(theta, t)
        cross = d[..., 0] * dd[..., 1] - d[..., 1] * dd[..., 0]
        return cross / np.linalg.norm(d, axis=-1) ** 3

    def arclength(self, theta, t=0.0, n=256):
        """Arclength from theta = 0, computed spectrally from the speed."""
        th = 2 * np.pi * np.arange(n) / n
        sp = self.speed(th, t)
        c = np.fft.rfft(sp) / n
        theta = np.asarray(theta, float)
        out = c[0].real * theta
        m = np.arange(1, len(c))
        w = np.where(m == n // 2, 1.0, 2.0)
        # integral of Re(c_m e^{i m theta}) from 0
        terms = (c[1:, None] * (np.exp(1j * np.outer(m, theta.ravel())) - 1) / (1j * m[:, None])).real
        out = out + (w[:, None] * terms).sum(axis=0).reshape(theta.shape)
        return out

    def wrap_point(self, p, t):
        """Periodic image of ``p`` closest to the curve center."""
        c = self.center(t)
        rel = np.mod(np.asarray(p, float) - c + self.L, 2 * self.L) - self.L
        return c + rel

    def closest_theta(self, p, t, n_seed=512, iters=8):
        """Parameter of the closest curve point (Newton from a sampled seed)."""
        p = self.wrap_point(p, t)
        shp = p.shape[:-1]
        q = p.reshape(-1, 2)
        seeds = 2 * np.pi * np.arange(n_seed) / n_seed
        X = self.position(seeds, t)
        best = np.empty(len(q), dtype=int)
        for lo in range(0, len(q), 4096):
            d2 = ((q[lo:lo + 4096, None, :] - X[None, :, :]) ** 2).sum(-1)
            best[lo:lo + 4096] = np.argmin(d2, axis=1)
        th = seeds[best]
        for _ in range(iters):
            diff = self.position(th, t) - q
            d1, d2 = self.dpos(th, t), self.d2pos(th, t)
            g = (diff * d1).sum(-1)
            gp = (d1 * d1).sum(-1) + (diff * d2).sum(-1)
            step = np.where(gp > 0, g / np.where(gp > 0, gp, 1.0), 0.0)
            th = th - np.clip(step, -np.pi / n_seed * 4, np.pi / n_seed * 4)
        return np.mod(th, 2 * np.pi).reshape(shp)

    def closest_point(self, p, t):
        th = self.closest_theta(p, t)
        return th, self.position(th, t)

    def signed_distance(self, p, t):
        """Distance to the curve, positive outside."""
        p = self.wrap_point(p, t)
        th = self.closest_theta(p, t)
        diff = p - self.position(th, t)
        d = np.linalg.norm(diff, axis=-1)
        s = (diff * self.normal(th, t)).sum(-1)
        return np.where(s > 0, d, -d)

    def validate(self, spec: GridSpec, t: float, n=512):
        th = 2 * np.pi * np.arange(n) / n
        rel = self.position(th, t) - self.center(t)
        extent = np.max(np.abs(rel))
        if extent >= spec.L - spec.h:
            raise GeometryDegenerate(
                f"curve extends {extent:.4g} from its center; images closer than 2h (L={spec.L})")
        try:
            from shapely.geometry import LinearRing
        except ImportError:  # pragma: no cover
            return
        if not LinearRing(rel).is_simple:
            raise GeometryDegenerate("curve self-intersects")


class Circle(InterfaceGeometry):
    kind = "circle"

    def __init__(self, radius=1.0, center=(0.0, 0.0), motion: Motion = Motion(), L=np.pi):
        super().__init__(center, motion, L)
        self.radius = float(radius)

    def body(self, theta):
        return self.radius * np.stack([np.cos(theta), np.sin(theta)], axis=-1)

    def dbody(self, theta):
        return self.radius * np.stack([-np.sin(theta), np.cos(theta)], axis=-1)

    def d2body(self, theta):
        return -self.body(theta)

    def closest_theta(self, p, t, **_):
        rel = (self.wrap_point(p, t) - self.center(t)) @ self._R(t)
        return np.mod(np.arctan2(rel[..., 1], rel[..., 0]), 2 * np.pi)

    def signed_distance(self, p, t):
        rel = self.wrap_point(p, t) - self.center(t)
        return np.linalg.norm(rel, axis=-1) - self.radius

    def arclength(self, theta, t=0.0, n=256):
        return self.radius * np.asarray(theta, float)


class Ellipse(InterfaceGeometry):
    kind = "ellipse"

    def __init__(self, a=1.0, b=0.6, angle=0.0, center=(0.0, 0.0), motion: Motion = Motion(), L=np.pi):
        super().__init__(center, motion, L)
        self.a, self.b, self.angle = float(a), float(b), float(angle)
        self._Q = _rot(self.angle)

    def body(self, theta):
        return np.stack([self.a * np.cos(theta), self.b * np.sin(theta)], axis=-1) @ self._Q.T

    def dbody(self, theta):
        return np.stack([-self.a * np.sin(theta), self.b * np.cos(theta)], axis=-1) @ self._Q.T

    def d2body(self, theta):
        return -self.body(theta)


class SampledCurve(InterfaceGeometry):
    """Curve through body-frame sample points, interpolated by a periodic cubic spline."""

    kind = "spline"

    def __init__(self, points, center=(0.0, 0.0), motion: Motion = Motion(), L=np.pi):
        super().__init__(center, motion, L)
        pts = np.asarray(points, float)
        area = 0.5 * np.sum(pts[:, 0] * np.roll(pts[:, 1], -1) - np.roll(pts[:, 0], -1) * pts[:, 1])
        if area < 0:
            pts = pts[::-1]
        th = 2 * np.pi * np.arange(len(pts) + 1) / len(pts)
        closed = np.vstack([pts, pts[:1]])
        self._spline = CubicSpline(th, closed, bc_type="periodic", axis=0)

    def body(self, theta):
        return self._spline(np.mod(theta, 2 * np.pi))

    def dbody(self, theta):
        return self._spline(np.mod(theta, 2 * np.pi), 1)

    def d2body(self, theta):
        return self._spline(np.mod(theta, 2 * np.pi), 2)


# --------------------------------------------------------------------------
# classification and intersections


@dataclass(frozen=True, eq=False)
class SideField:
    """Per-node side label (+1 outside, -1 inside) and signed distance."""

    spec: GridSpec
    side: np.ndarray
    signed_distance: np.ndarray

    @property
    def outside(self) -> np.ndarray:
        return self.side == OUTSIDE


def node_points(spec: GridSpec) -> np.ndarray:
    X, Y = spec.mesh
    return np.stack([X, Y], axis=-1)


def classify(spec: GridSpec, geometry: InterfaceGeometry, t: float) -> SideField:
    """Label every node inside/outside of the curve at time ``t``."""
    geometry.validate(spec, t)
    sd = geometry.signed_distance(node_points(spec), t)
    side = np.where(sd > 0, OUTSIDE, INSIDE).astype(np.int8)
    return SideField(spec, side, sd)


@dataclass(frozen=True)
class IntersectionRecord:
    axis: int
    base: tuple[int, int]
    x_star: np.ndarray
    h_plus: float
    normal: np.ndarray
    tangent: np.ndarray
    theta: float
    arclength_coordinate: float
    base_side: int


@dataclass(frozen=True, eq=False)
class Intersections:
    """All interface/gridline crossings at one time, stored as parallel arrays.

    ``base`` holds storage indices of the lower node of each crossed segment
    (the node with ``x_j <= x*`` along ``axis``); ``upper`` is its neighbor.
    """

    spec: GridSpec
    t: float
    axis: np.ndarray
    base: np.ndarray
    upper: np.ndarray
    x_star: np.ndarray
    h_plus: np.ndarray
    theta: np.ndarray
    normal: np.ndarray
    tangent: np.ndarray
    arclength: np.ndarray
    base_side: np.ndarray

    def __len__(self):
        return len(self.axis)

    def __iter__(self) -> Iterator[IntersectionRecord]:
        for i in range(len(self)):
            yield IntersectionRecord(
                int(self.axis[i]), (int(self.base[i, 0]), int(self.base[i, 1])), self.x_star[i],
                float(self.h_plus[i]), self.normal[i], self.tangent[i], float(self.theta[i]),
                float(self.arclength[i]), int(self.base_side[i]))

    def __getitem__(self, i) -> IntersectionRecord:
        return list(self)[i] if isinstance(i, int) else NotImplemented


def find_intersections(spec: GridSpec, geometry: InterfaceGeometry, t: float,
                       sides: Optional[SideField] = None, iters: int = 60) -> Intersections:
    """Locate every crossing of the curve with a gridline segment between opposite-side nodes."""
    if sides is None:
        sides = classify(spec, geometry, t)
    h, M = spec.h, spec.M
    axes, bases, starts, svals = [], [], [], []
    for a in (0, 1):
        mask = sides.side != shift(sides.side, 1, a)
        idx = np.argwhere(mask)
        axes.append(np.full(len(idx), a))
        bases.append(idx)
        starts.append(spec.x1d[idx])
        svals.append(sides.side[mask])
    axis = np.concatenate(axes)
    base = np.concatenate(bases).reshape(-1, 2)
    x0 = np.concatenate(starts).reshape(-1, 2)
    base_side = np.concatenate(svals).astype(np.int8)
    e = np.zeros((len(axis), 2))
    e[np.arange(len(axis)), axis] = 1.0

    lo = np.zeros(len(axis))
    hi = np.full(len(axis), h)
    if len(axis):
        d0 = geometry.signed_distance(x0, t)
        d1 = geometry.signed_distance(x0 + h * e, t)
        ok = (np.where(d0 > 0, 1, -1) == base_side) & (np.where(d1 > 0, 1, -1) == -base_side)
        if not np.all(ok):
            raise RootNotBracketed(f"{np.count_nonzero(~ok)} segments without a sign change")
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            dm = geometry.signed_distance(x0 + mid[:, None] * e, t)
            same = np.where(dm > 0, 1, -1) == base_side
            lo = np.where(same, mid, lo)
            hi = np.where(same, hi, mid)
    s_star = 0.5 * (lo + hi)
    xs = spec.wrap(x0 + s_star[:, None] * e)
    theta = geometry.closest_theta(xs, t) if len(axis) else np.zeros(0)
    upper = base.copy()
    upper[np.arange(len(axis)), axis] = (upper[np.arange(len(axis)), axis] + 1) % M
    return Intersections(
        spec, t, axis, base, upper, xs, h - s_star, theta,
        geometry.normal(theta, t).reshape(-1, 2), geometry.tangent(theta, t).reshape(-1, 2),
        np.asarray(geometry.arclength(theta, t)).reshape(-1), base_side)


def irregular_mask(sides: SideField) -> np.ndarray:
    """Nodes with at least one five-point stencil arm crossing the curve."""
    s = sides.side
    mask = np.zeros(s.shape, bool)
    for a in (0, 1):
        for o in (1, -1):
            mask |= s != shift(s, o, a)
    return mask


@dataclass(frozen=True, eq=False)
class CrossingEvents:
    """Nodes whose side changes during ``[t_n, t_next]``.

    ``fraction`` is the crossing time as a fraction of the step.
    """

    t_n: float
    t_next: float
    nodes: np.ndarray
    fraction: np.ndarray
    side_before: np.ndarray
    side_after: np.ndarray

    def __len__(self):
        return len(self.fraction)

    def __iter__(self):
        for i in range(len(self)):
            yield (tuple(int(v) for v in self.nodes[i]), float(self.fraction[i]),
                   int(self.side_before[i]), int(self.side_after[i]))

    @property
    def crossing_time(self):
        return self.t_n + self.fraction * (self.t_next - self.t_n)


def crossing_events(spec: GridSpec, geometry: InterfaceGeometry, t_n: float, t_next: float,
                    samples: int = 4) -> CrossingEvents:
    """Nodes crossed by the moving curve in ``(t_n, t_next]``."""
    if not t_next > t_n:
        raise ValueError("t_next must exceed t_n")
    empty = CrossingEvents(t_n, t_next, np.zeros((0, 2), int), np.zeros(0), np.zeros(0, np.int8),
                           np.zeros(0, np.int8))
    if geometry.motion.is_static:
        return empty
    pts = node_points(spec)
    times = t_n + (t_next - t_n) * np.arange(samples + 1) / samples
    sd = [geometry.signed_distance(pts, tt) for tt in times]
    labels = [np.where(d > 0, OUTSIDE, INSIDE) for d in sd]
    changes = sum((labels[i] != labels[i + 1]).astype(int) for i in range(samples))
    if np.any(changes > 1):
        raise MultipleCrossings(
            f"{np.count_nonzero(changes > 1)} nodes change side more than once in [{t_n}, {t_next}]")
    crossed = labels[0] != labels[-1]
    idx = np.argwhere(crossed)
    if not len(idx):
        return empty
    p = pts[crossed]
    d0, d1 = sd[0][crossed], sd[-1][crossed]
    tm = 0.5 * (t_n + t_next)
    dm = geometry.signed_distance(p, tm)
    lab0 = labels[0][crossed]
    first_half = np.where(dm > 0, OUTSIDE, INSIDE) != lab0
    a = np.where(first_half, d0, dm)
    b = np.where(first_half, dm, d1)
    off = np.where(first_half, 0.0, 0.5)
    with np.errstate(divide="ignore", invalid="ignore"):
        frac_half = np.where(a != b, a / (a - b), 1.0)
    frac = np.clip(off + 0.5 * frac_half, 0.0, 1.0)
    frac = np.where(d1 == 0.0, 1.0, frac)
    return CrossingEvents(t_n, t_next, idx, frac, lab0.astype(np.int8),
                          labels[-1][crossed].astype(np.int8))


# --------------------------------------------------------------------------
# force density and jumps


@dataclass(frozen=True)
class ForceDensity:
    """Force per unit length ``f(theta, t)``; ``dphi_dtheta`` is the optional
    theta-derivative of the tangential component ``phi = f . tangent``."""

    f: Optional[Callable] = None
    dphi_dtheta: Optional[Callable] = None
    name: str = "force"

    def __call__(self, theta, t):
        if self.f is None:
            raise MissingTangentialDerivative("force density has no evaluator")
        return self.f(theta, t)


def force_profile(geometry: InterfaceGeometry, name: str = "mixed", a0=0.0, a1=0.0, b0=0.0, b1=0.0,
                  m: int = 1, decay: float = 0.0) -> ForceDensity:
    """Named analytic force profiles.

    ``mixed``: ``f = (a0 + a1 cos m theta) n + (b0 + b1 sin m theta) t``, times
    ``exp(-decay t)``.  ``normal`` and ``tangential`` are the same family with
    the other part zero.
    """
    if name == "normal":
        b0 = b1 = 0.0
    elif name == "tangential":
        a0 = a1 = 0.0
    elif name != "mixed":
        raise ValueError(f"unknown force profile {name!r}; valid: mixed, normal, tangential")

    def f(theta, t):
        theta = np.asarray(theta, float)
        amp = np.exp(-decay * t)
        fn = (a0 + a1 * np.cos(m * theta))[..., None]
        ft = (b0 + b1 * np.sin(m * theta))[..., None]
        return amp * (fn * geometry.normal(theta, t) + ft * geometry.tangent(theta, t))

    def dphi(theta, t):
        return np.exp(-decay * t) * b1 * m * np.cos(m * np.asarray(theta, float))

    return ForceDensity(f, dphi, name)


def _spectral_derivative(samples, order=1):
    n = samples.shape[0]
    m = np.fft.fftfreq(n, 1.0 / n)
    if n % 2 == 0 and order % 2:
        m[n // 2] = 0.0
    c = np.fft.fft(samples, axis=0)
    mult = (1j * m) ** order
    return np.fft.ifft(c * mult.reshape((-1,) + (1,) * (samples.ndim - 1)), axis=0).real


def _fourier_eval(samples, theta):
    """Trigonometric interpolant of periodic samples evaluated at ``theta``."""
    n = samples.shape[0]
    c = np.fft.fft(samples, axis=0) / n
    m = np.fft.fftfreq(n, 1.0 / n)
    th = np.asarray(theta, float).ravel()
    E = np.exp(1j * np.outer(th, m))
    if n % 2 == 0:
        E[:, n // 2] = np.cos(n / 2 * th)
    out = (E @ c.reshape(n, -1)).real
    return out.reshape(np.shape(theta) + samples.shape[1:])


def surface_divergence_ftan(geometry: InterfaceGeometry, force: ForceDensity, theta, t, n=256):
    """Arclength derivative of the tangential force component at ``theta``."""
    if force.dphi_dtheta is not None:
        return force.dphi_dtheta(theta, t) / geometry.speed(theta, t)
    if force.f is None:
        raise MissingTangentialDerivative("no force evaluator or tangential derivative")
    th = 2 * np.pi * np.arange(n) / n
    phi = (force(th, t) * geometry.tangent(th, t)).sum(-1)
    return _fourier_eval(_spectral_derivative(phi), theta) / geometry.speed(theta, t)


JUMP_FIELDS = ("jump_u", "jump_Du", "jump_D2u", "jump_p", "jump_Dp", "jump_D2p", "jump_ut",
               "jump_advection", "jump_D_advection", "jump_D2_advection", "jump_g", "jump_Dg",
               "jump_D2g")


@dataclass(frozen=True, eq=False)
class JumpSet:
    """Jumps (outside minus inside) at one or many interface points.

    Arrays carry a leading batch shape.  Index conventions:
    ``jump_Du[..., i, j] = [d u_i / d x_j]`` and
    ``jump_D2u[..., i, j, k] = [d^2 u_i / d x_j d x_k]``.  The advection entries
    refer to ``u . grad u``, the ``g`` entries to the body force; ``None``
    marks an entry the provider cannot supply.
    """

    jump_u: np.ndarray
    jump_Du: np.ndarray
    jump_D2u: np.ndarray
    jump_p: np.ndarray
    jump_Dp: np.ndarray
    jump_D2p: np.ndarray
    jump_ut: np.ndarray
    jump_advection: np.ndarray
    jump_D_advection: Optional[np.ndarray] = None
    jump_D2_advection: Optional[np.ndarray] = None
    jump_g: Optional[np.ndarray] = None
    jump_Dg: Optional[np.ndarray] = None
    jump_D2g: Optional[np.ndarray] = None

    def __getitem__(self, idx) -> "JumpSet":
        return replace(self, **{f.name: (None if getattr(self, f.name) is None
                                         else getattr(self, f.name)[idx]) for f in fields(self)})

    def __len__(self):
        return len(self.jump_p)

    def scaled(self, c: float) -> "JumpSet":
        return replace(self, **{f.name: (None if getattr(self, f.name) is None
                                         else c * getattr(self, f.name)) for f in fields(self)})

    @property
    def jump_forcing(self):
        """Jump of ``u . grad u - g``, the explicit forcing the pressure sees."""
        return self.jump_advection - (0.0 if self.jump_g is None else self.jump_g)

    @property
    def jump_D_forcing(self):
        if self.jump_D_advection is None:
            return None
        return self.jump_D_advection - (0.0 if self.jump_Dg is None else self.jump_Dg)

    @property
    def jump_D2_forcing(self):
        if self.jump_D2_advection is None:
            return None
        return self.jump_D2_advection - (0.0 if self.jump_D2g is None else self.jump_D2g)

    @property
    def jump_laplacian_u(self):
        return np.einsum("...ijj->...i", self.jump_D2u)


class VelocityTrace:
    """Velocity on the interface: values and inside one-sided gradients.

    ``gradient[..., i, j] = d u_i / d x_j`` on the inside.
    """

    def value(self, points, t):
        raise NotImplementedError

    def inside_gradient(self, points, t):
        raise NotImplementedError


class RestTrace(VelocityTrace):
    """Fluid at rest."""

    def value(self, points, t):
        return np.zeros(np.shape(points))

    def inside_gradient(self, points, t):
        return np.zeros(np.shape(points)[:-1] + (2, 2))


@dataclass
class BodyForceJumps:
    """Jumps of a piecewise body force at interface points (zero for smooth forces)."""

    g: Callable = None
    div: Callable = None
    Dg: Callable = None

    def jump_g(self, points, t):
        return np.zeros(np.shape(points)) if self.g is None else self.g(points, t)

    def jump_D(self, points, t):
        return None if self.Dg is None else self.Dg(points, t)

    def jump_div(self, points, t):
        return np.zeros(np.shape(points)[:-1]) if self.div is None else self.div(points, t)


def _frame_tensor(a, b, c, t, n):
    """``a t t + b (t n + n t) + c n n`` with per-point scalars broadcast."""
    tt = np.einsum("...j,...k->...jk", t, t)
    tn = np.einsum("...j,...k->...jk", t, n)
    nn = np.einsum("...j,...k->...jk", n, n)
    return (a[..., None, None] * tt + b[..., None, None] * (tn + np.swapaxes(tn, -1, -2))
            + c[..., None, None] * nn)


def jumps_from_force(geometry: InterfaceGeometry, force: ForceDensity,
                     state_velocity: Optional[VelocityTrace], theta, t: float,
                     body_force: Optional[BodyForceJumps] = None, n: int = 256) -> JumpSet:
    """Build every jump at curve parameters ``theta`` from the force density.

    First-derivative jumps follow from ``[u] = 0``, ``[du/dn] = -f_tan``,
    ``[p] = f.n``, ``[dp/dn] = d(f.t)/ds`` and the vanishing tangential
    derivative of continuous quantities.  Second derivatives come from
    differentiating those relations along the curve (spectrally in theta),
    with the normal-normal parts fixed by the momentum equation and by the
    pressure Poisson equation.  The third-order advection jump is not derived.
    """
    if force.f is None:
        raise MissingTangentialDerivative("no force evaluator available")
    state_velocity = state_velocity or RestTrace()
    body_force = body_force or BodyForceJumps()
    theta = np.asarray(theta, float)

    th = 2 * np.pi * np.arange(n) / n
    sp = geometry.speed(th, t)
    fs = force(th, t)
    phi = (fs * geometry.tangent(th, t)).sum(-1)
    P = (fs * geometry.normal(th, t)).sum(-1)
    dphi_s = _spectral_derivative(phi) / sp
    if force.dphi_dtheta is not None:
        dphi_s = force.dphi_dtheta(th, t) / sp
    dP_s = _spectral_derivative(P) / sp
    d2phi_s = _spectral_derivative(dphi_s) / sp
    d2P_s = _spectral_derivative(dP_s) / sp
    on = lambda s: _fourier_eval(s, theta)  # noqa: E731
    phi, P, phi_s, P_s, phi_ss, P_ss = map(on, (phi, P, dphi_s, dP_s, d2phi_s, d2P_s))

    tt = geometry.tangent(theta, t)
    nn = geometry.normal(theta, t)
    kap = geometry.curvature(theta, t)
    X = geometry.position(theta, t)

    jump_u = np.zeros(theta.shape + (2,))
    dn_u = -phi[..., None] * tt
    jump_Du = np.einsum("...i,...j->...ij", dn_u, nn)
    jump_Dp = phi_s[..., None] * nn + P_s[..., None] * tt

    g_j = body_force.jump_g(X, t)
    lap_u = jump_Dp - g_j
    u_tt = -kap[..., None] * phi[..., None] * tt
    u_tn = -phi_s[..., None] * tt + (kap * phi)[..., None] * nn
    u_nn = lap_u - u_tt
    jump_D2u = np.stack([_frame_tensor(u_tt[..., i], u_tn[..., i], u_nn[..., i], tt, nn)
                         for i in range(2)], axis=-3)

    u = state_velocity.value(X, t)
    G = state_velocity.inside_gradient(X, t)
    J = jump_Du
    tr_jump = 2 * np.einsum("...ij,...ji->...", G, J) + np.einsum("...ij,...ji->...", J, J)
    lap_p = body_force.jump_div(X, t) - tr_jump
    p_tt = P_ss + kap * phi_s
    p_tn = phi_ss - kap * P_s
    p_nn = lap_p - p_tt
    jump_D2p = _frame_tensor(p_tt, p_tn, p_nn, tt, nn)

    jump_adv = np.einsum("...j,...ij->...i", u, J)
    jump_ut = -jump_adv
    # [d_k (u_j d_j u_i)] = [d_k u_j d_j u_i] + u_j [d_k d_j u_i]
    prod = (np.einsum("...jk,...ij->...ik", J, G) + np.einsum("...jk,...ij->...ik", G, J)
            + np.einsum("...jk,...ij->...ik", J, J))
    jump_D_adv = prod + np.einsum("...j,...ikj->...ik", u, jump_D2u)
    return JumpSet(jump_u, jump_Du, jump_D2u, P, jump_Dp, jump_D2p, jump_ut, jump_adv,
                   jump_D_adv, None, g_j, body_force.jump_D(X, t), None)
