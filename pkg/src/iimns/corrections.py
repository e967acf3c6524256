"""Sparse correction fields for difference stencils that cross the interface.

Each crossing of a gridline segment gives one stencil arm at each of its two
end nodes.  For an arm from node ``x_j`` to the neighbor ``x_j + dir h e_a``
on the other side, the neighbor's sampled value differs from the smooth
extension of the node's own side by ``s T`` with

    T = [v] + d [d_a v] + (d^2 / 2) [d_aa v],   d = neighbor - x*,

and ``s = +1`` when the node is inside.  Corrections are stored as sparse
side-band fields added to plain operator outputs.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import MissingJumps
from .grid import DIM, GridSpec
from .interface import CrossingEvents, Intersections, IntersectionRecord, JumpSet


@dataclass(frozen=True, eq=False)
class CorrectionField:
    """Sparse map node -> correction, stored as unique ``nodes`` and ``values``.

    ``values`` has shape ``(K,)`` for scalar fields and ``(K, 2)`` for vector
    fields.  Node indices are storage indices.
    """

    spec: GridSpec
    nodes: np.ndarray
    values: np.ndarray
    name: str = ""
    vector: bool = False

    @classmethod
    def empty(cls, spec: GridSpec, name: str = "", vector: bool = False) -> "CorrectionField":
        shape = (0, DIM) if vector else (0,)
        return cls(spec, np.zeros((0, 2), int), np.zeros(shape), name, vector)

    @classmethod
    def accumulate(cls, spec: GridSpec, nodes, values, name: str = "", vector: bool = False,
                   drop_zeros: bool = True) -> "CorrectionField":
        """Sum contributions landing on the same node."""
        nodes = np.asarray(nodes, int).reshape(-1, 2)
        values = np.asarray(values, float)
        if len(nodes) == 0:
            return cls.empty(spec, name, vector)
        flat = nodes[:, 0] * spec.M + nodes[:, 1]
        uniq, inv = np.unique(flat, return_inverse=True)
        acc = np.zeros((len(uniq),) + values.shape[1:])
        np.add.at(acc, inv, values)
        keep = np.ones(len(uniq), bool)
        if drop_zeros:
            keep = np.any(acc.reshape(len(uniq), -1) != 0.0, axis=1)
        uniq, acc = uniq[keep], acc[keep]
        return cls(spec, np.stack([uniq // spec.M, uniq % spec.M], axis=1), acc, name, vector)

    def __len__(self):
        return len(self.nodes)

    @property
    def is_empty(self) -> bool:
        return len(self) == 0

    def support(self) -> set[tuple[int, int]]:
        return {(int(a), int(b)) for a, b in self.nodes}

    def to_dense(self) -> np.ndarray:
        M = self.spec.M
        if self.vector:
            out = np.zeros((DIM, M, M))
            for c in range(DIM):
                out[c][self.nodes[:, 0], self.nodes[:, 1]] = self.values[:, c]
        else:
            out = np.zeros((M, M))
            out[self.nodes[:, 0], self.nodes[:, 1]] = self.values
        return out

    def scaled(self, c: float) -> "CorrectionField":
        return CorrectionField(self.spec, self.nodes, c * self.values, self.name, self.vector)

    def __add__(self, other: "CorrectionField") -> "CorrectionField":
        if other.spec != self.spec or other.vector != self.vector:
            raise ValueError("incompatible correction fields")
        return CorrectionField.accumulate(
            self.spec, np.vstack([self.nodes, other.nodes]),
            np.concatenate([self.values, other.values]), self.name, self.vector)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values))) if len(self) else 0.0


@dataclass(frozen=True, eq=False)
class CorrectionBundle:
    """Corrections for one time interval ``(t_n, t_next)``.

    ``C7p`` refers the explicit forcing used in the pressure Poisson equation
    to the mid-step sides; it sits alongside ``C7``, which does the same for
    the momentum equation.
    """

    spec: GridSpec
    t_n: float
    t_next: float
    C1: CorrectionField
    C2: CorrectionField
    C3: CorrectionField
    C4: CorrectionField
    C5: CorrectionField
    C6: CorrectionField
    C7: CorrectionField
    C7p: Optional[CorrectionField] = None

    def fields(self) -> dict[str, CorrectionField]:
        out = {k: getattr(self, k) for k in ("C1", "C2", "C3", "C4", "C5", "C6", "C7")}
        if self.C7p is not None:
            out["C7p"] = self.C7p
        return out


def dump_csv(bundle: CorrectionBundle, path) -> None:
    """Write ``(i, j, field, component, value)`` rows for every entry."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j", "field", "component", "value"])
        for name, fld in bundle.fields().items():
            for node, val in zip(fld.nodes, fld.values):
                comps = enumerate(np.atleast_1d(val))
                for c, v in comps:
                    w.writerow([int(node[0]), int(node[1]), name, c, repr(float(v))])


# --------------------------------------------------------------------------
# stencil arms


@dataclass(frozen=True, eq=False)
class Arms:
    """Both end nodes of every crossed segment, as parallel arrays of length 2K."""

    node: np.ndarray
    axis: np.ndarray
    direction: np.ndarray
    s: np.ndarray
    d: np.ndarray
    rec: np.ndarray


def stencil_arms(inter: Intersections) -> Arms:
    K = len(inter)
    h = inter.spec.h
    lower_side = inter.base_side.astype(int)
    node = np.vstack([inter.base, inter.upper])
    axis = np.concatenate([inter.axis, inter.axis])
    direction = np.concatenate([np.ones(K, int), -np.ones(K, int)])
    side = np.concatenate([lower_side, -lower_side])
    d = np.concatenate([inter.h_plus, -(h - inter.h_plus)])
    rec = np.concatenate([np.arange(K), np.arange(K)])
    arms = Arms(node, axis, direction, -side, d, rec)
    _warn_crowded(inter.spec, arms)
    return arms


def _warn_crowded(spec, arms):
    if not len(arms.axis):
        return
    key = (arms.node[:, 0] * spec.M + arms.node[:, 1]) * 2 + arms.axis
    _, counts = np.unique(key, return_counts=True)
    if np.any(counts > 2):
        warnings.warn("a node has more than two crossings along one axis; interface under-resolved",
                      RuntimeWarning, stacklevel=3)


def _taylor(arms: Arms, j0, j1, j2):
    """``T`` per arm from per-record jump value and axial derivatives."""
    r = arms.rec
    d = arms.d
    out = j0[r] + d * j1[r]
    if j2 is not None:
        out = out + 0.5 * d**2 * j2[r]
    return out


# --------------------------------------------------------------------------
# single-crossing stencil corrections


def _scalar_jumps(jump, quantity, axis):
    if isinstance(jump, JumpSet):
        if quantity == "p":
            return float(jump.jump_p), float(jump.jump_Dp[axis]), float(jump.jump_D2p[axis, axis])
        if quantity in ("u0", "u1"):
            i = int(quantity[1])
            return (float(jump.jump_u[i]), float(jump.jump_Du[i, axis]),
                    float(jump.jump_D2u[i, axis, axis]))
        raise ValueError(f"unknown quantity {quantity!r}")
    v, dv, d2v = jump
    return float(v), float(dv), float(d2v)


def _arm_of(rec: IntersectionRecord, side_of_node: int, h: float):
    """Offset to the far node and arm direction for the node on ``side_of_node``."""
    if side_of_node == rec.base_side:
        return rec.h_plus, 1
    return -(h - rec.h_plus), -1


def stencil_correction_first(jump, rec: IntersectionRecord, side_of_node: int, h: float,
                             quantity: str = "p") -> float:
    """Correction to add to a centered first difference at the node on ``side_of_node``.

    ``jump`` is a JumpSet at the crossing (with ``quantity`` one of ``p``,
    ``u0``, ``u1``) or a triple ``([v], [v_a], [v_aa])`` along the gridline.
    """
    v, dv, d2v = _scalar_jumps(jump, quantity, rec.axis)
    d, direction = _arm_of(rec, side_of_node, h)
    s = -side_of_node
    return -direction * s * (v + d * dv + 0.5 * d**2 * d2v) / (2 * h)


def stencil_correction_second(jump, rec: IntersectionRecord, side_of_node: int, h: float,
                              quantity: str = "p") -> float:
    """Correction to add to a three-point second difference at the node on ``side_of_node``."""
    v, dv, d2v = _scalar_jumps(jump, quantity, rec.axis)
    d, _ = _arm_of(rec, side_of_node, h)
    s = -side_of_node
    return -s * (v + d * dv + 0.5 * d**2 * d2v) / h**2


# --------------------------------------------------------------------------
# batched builders


def _check_batch(jumps: JumpSet, inter: Intersections, *names):
    if len(jumps.jump_p) != len(inter):
        raise MissingJumps(f"{len(jumps.jump_p)} jump records for {len(inter)} intersections")
    for n in names:
        if getattr(jumps, n) is None:
            raise MissingJumps(f"jump set lacks {n}")


def gradient_correction(jumps: JumpSet, inter: Intersections, arms: Optional[Arms] = None):
    """Per-arm corrections to the centered gradient of each velocity component.

    Returns ``(arms, values)`` with ``values[k, i]`` the correction to
    ``d_a u_i`` at ``arms.node[k]`` along ``arms.axis[k]``.
    """
    arms = arms or stencil_arms(inter)
    h = inter.spec.h
    vals = np.zeros((len(arms.axis), DIM))
    for i in range(DIM):
        T = _taylor(arms, jumps.jump_u[:, i], _pick(jumps.jump_Du[:, i], arms),
                    _pick(jumps.jump_D2u[:, i], arms))
        vals[:, i] = -arms.direction * arms.s * T / (2 * h)
    return arms, vals


def _pick(tensor, arms):
    """Per-record axial component, returned indexed by record (uses each record's axis)."""
    K = tensor.shape[0]
    ax = np.zeros(K, int)
    ax[arms.rec] = arms.axis
    idx = np.arange(K)
    if tensor.ndim == 2:
        return tensor[idx, ax]
    return tensor[idx, ax, ax]


def build_C2(jumps: JumpSet, inter: Intersections, spec: GridSpec, u: np.ndarray) -> CorrectionField:
    """Correction to ``u . grad_h u`` from the jumps of the velocity gradient.

    ``u`` is the node velocity array of shape ``(2, M, M)``.
    """
    if not len(inter):
        return CorrectionField.empty(spec, "C2", True)
    _check_batch(jumps, inter, "jump_Du", "jump_D2u")
    arms, g = gradient_correction(jumps, inter)
    ua = u[arms.axis, arms.node[:, 0], arms.node[:, 1]]
    return CorrectionField.accumulate(spec, arms.node, ua[:, None] * g, "C2", True)


def build_C3(jumps: JumpSet, inter: Intersections, spec: GridSpec) -> CorrectionField:
    """Correction to the five-point Laplacian of each velocity component."""
    if not len(inter):
        return CorrectionField.empty(spec, "C3", True)
    _check_batch(jumps, inter, "jump_Du", "jump_D2u")
    arms = stencil_arms(inter)
    vals = np.zeros((len(arms.axis), DIM))
    for i in range(DIM):
        T = _taylor(arms, jumps.jump_u[:, i], _pick(jumps.jump_Du[:, i], arms),
                    _pick(jumps.jump_D2u[:, i], arms))
        vals[:, i] = -arms.s * T / spec.h**2
    return CorrectionField.accumulate(spec, arms.node, vals, "C3", True)


def _forcing_axial(jumps: JumpSet, arms: Arms):
    """Per-record ``[F_a]``, ``[d_a F_a]`` and ``[d_aa F_a]`` for the explicit forcing."""
    K = len(jumps.jump_p)
    ax = np.zeros(K, int)
    ax[arms.rec] = arms.axis
    idx = np.arange(K)
    F, DF, D2F = jumps.jump_forcing, jumps.jump_D_forcing, jumps.jump_D2_forcing
    j0 = F[idx, ax]
    j1 = DF[idx, ax, ax]
    j2 = None if D2F is None else D2F[idx, ax, ax, ax]
    return j0, j1, j2


def build_C4(jumps: JumpSet, inter: Intersections, spec: GridSpec) -> CorrectionField:
    """Derivative part of the correction to the centered divergence of the forcing.

    The forcing is ``u . grad u - g``.  The value part ``[F_a]`` enters C5.
    Without second-derivative jumps the correction is first order in the offset.
    """
    if not len(inter):
        return CorrectionField.empty(spec, "C4")
    _check_batch(jumps, inter, "jump_D_advection")
    arms = stencil_arms(inter)
    _, j1, j2 = _forcing_axial(jumps, arms)
    T = _taylor(arms, np.zeros_like(j1), j1, j2)
    return CorrectionField.accumulate(spec, arms.node, -arms.direction * arms.s * T / (2 * spec.h), "C4")


def build_C5(jumps: JumpSet, inter: Intersections, spec: GridSpec) -> CorrectionField:
    """Correction for the pressure Poisson right-hand side.

    Holds the Laplacian correction from ``[p]``, ``[Dp]``, ``[D^2 p]`` plus the
    value part of the divergence correction from ``[u . grad u - g]``, so that
    ``Lap_h p = -div_h F - C4 + C5`` up to the mean.
    """
    if not len(inter):
        return CorrectionField.empty(spec, "C5")
    _check_batch(jumps, inter)
    arms = stencil_arms(inter)
    Tp = _taylor(arms, jumps.jump_p, _pick(jumps.jump_Dp, arms), _pick(jumps.jump_D2p, arms))
    j0 = _pick(jumps.jump_forcing, arms)
    vals = arms.s * Tp / spec.h**2 + arms.direction * arms.s * j0[arms.rec] / (2 * spec.h)
    return CorrectionField.accumulate(spec, arms.node, vals, "C5")


def build_C6(jumps: JumpSet, inter: Intersections, spec: GridSpec) -> CorrectionField:
    """Correction to the centered pressure gradient."""
    if not len(inter):
        return CorrectionField.empty(spec, "C6", True)
    _check_batch(jumps, inter)
    arms = stencil_arms(inter)
    Tp = _taylor(arms, jumps.jump_p, _pick(jumps.jump_Dp, arms), _pick(jumps.jump_D2p, arms))
    vals = np.zeros((len(arms.axis), DIM))
    vals[np.arange(len(arms.axis)), arms.axis] = -arms.direction * arms.s * Tp / (2 * spec.h)
    return CorrectionField.accumulate(spec, arms.node, vals, "C6", True)


def build_C1(crossings: CrossingEvents, jumps_at_crossing: JumpSet, spec: GridSpec) -> CorrectionField:
    """Time-derivative correction at nodes the interface sweeps over in one step.

    A node changing side at fraction ``theta`` of the step starts from a value
    on the old side; the difference quotient then misses ``theta [u_t]`` with
    the sign of the new side.
    """
    if not len(crossings):
        return CorrectionField.empty(spec, "C1", True)
    if len(jumps_at_crossing.jump_ut) != len(crossings):
        raise MissingJumps("need one jump record per crossing event")
    sB = crossings.side_after.astype(float)
    vals = -(crossings.fraction * sB)[:, None] * jumps_at_crossing.jump_ut
    return CorrectionField.accumulate(spec, crossings.nodes, vals, "C1", True)


@dataclass(frozen=True)
class SideMismatch:
    """One term of the time-crossing correction.

    ``nodes`` carry values computed on ``side_from`` while the equation is
    posed on ``side_to``; ``jump`` holds the extended jump (outside minus
    inside) of the term at each node, and ``weight`` the term's coefficient
    on the right-hand side.
    """

    nodes: np.ndarray
    side_to: np.ndarray
    jump: np.ndarray
    weight: float
    label: str = ""


def build_C7(spec: GridSpec, terms: Sequence[SideMismatch], name: str = "C7") -> CorrectionField:
    """Refer each explicit right-hand-side term to the equation's side at the nodes it was
    computed on the other side; terms with zero jumps contribute nothing."""
    nodes, vals = [], []
    for term in terms:
        if len(term.nodes) == 0:
            continue
        nodes.append(np.asarray(term.nodes).reshape(-1, 2))
        vals.append(term.weight * term.side_to.astype(float)[:, None] * term.jump)
    if not nodes:
        return CorrectionField.empty(spec, name, True)
    return CorrectionField.accumulate(spec, np.vstack(nodes), np.vstack(vals), name, True)


def side_mismatch_nodes(side_from: np.ndarray, side_to: np.ndarray):
    """Storage indices of nodes whose labels differ, and the target labels there."""
    idx = np.argwhere(side_from != side_to)
    return idx, side_to[idx[:, 0], idx[:, 1]]
