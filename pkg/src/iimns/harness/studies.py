"""Convergence, consistency and operator-norm studies with CSV reports."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from ..corrections import build_C3, build_C4, build_C5, build_C6, gradient_correction, CorrectionField
from ..grid import GridSpec, divergence_array, gradient_array, laplacian_array
from ..interface import classify, find_intersections, irregular_mask, node_points
from ..solver import ANALYTIC, Solver, SolverConfig, _advection_plain, _poisson_pieces, run
from ..spectral import (
    A_symbol,
    centered_symbol,
    cn_step_symbol,
    constant_symbol,
    forward_symbol,
    inverse_laplacian_symbol,
    inverse_wide_laplacian_symbol,
    lemma_a1_bound,
    maxnorm_of_matrix_multiplier,
    maxnorm_of_multiplier,
    resolvent_symbol,
)


def rate(e_coarse: float, e_fine: float) -> float:
    """Observed order ``log2(e_N / e_2N)``; nan when either error vanishes."""
    if e_coarse <= 0 or e_fine <= 0:
        return float("nan")
    return math.log2(e_coarse / e_fine)


def _write_csv(rows: list[dict], columns: Sequence[str], path=None) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: ("" if r.get(k) is None else r.get(k)) for k in columns})
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


# --------------------------------------------------------------------------
# convergence


@dataclass
class ErrorReport:
    """Per-grid errors and the rates between successive grids."""

    case: str
    lam: float
    T: float
    rows: list[dict] = field(default_factory=list)

    COLUMNS = ("case", "N", "h", "tau", "steps", "velocity_error", "pressure_error",
               "pressure_error_midrange", "max_abs_m", "velocity_rate", "pressure_rate", "pair")

    def rates(self) -> list[dict]:
        return [r for r in self.rows if r.get("pair")]

    def velocity_rate(self, N_coarse: int, N_fine: int) -> float:
        a = next(r for r in self.rows if r["N"] == N_coarse)
        b = next(r for r in self.rows if r["N"] == N_fine)
        return rate(a["velocity_error"], b["velocity_error"])

    def pressure_rate(self, N_coarse: int, N_fine: int) -> float:
        a = next(r for r in self.rows if r["N"] == N_coarse)
        b = next(r for r in self.rows if r["N"] == N_fine)
        return rate(a["pressure_error"], b["pressure_error"])

    def to_csv(self, path=None) -> str:
        return _write_csv(self.rows, self.COLUMNS, path)


def pressure_error(p: np.ndarray, q: np.ndarray) -> tuple[float, float]:
    """Max error modulo a constant: mean-shift value and midrange-shift value."""
    d = p - q
    mean_shift = float(np.max(np.abs(d - d.mean())))
    mid_shift = float(0.5 * (d.max() - d.min()))
    return mean_shift, mid_shift


def convergence_study(case, N_list: Iterable[int], lam: float = 0.5, T: float = 0.25,
                      n_pressure: int = 5, **config_kw) -> ErrorReport:
    """Run ``case`` on each grid; velocity error over all steps, pressure at ``n_pressure`` times."""
    N_list = sorted(int(n) for n in N_list)
    report = ErrorReport(case.name, lam, T)
    prev = None
    for N in N_list:
        spec = GridSpec(N, case.L)
        cfg = SolverConfig(spec, lam, T, case=case, **config_kw)
        pts = node_points(spec)
        steps = cfg.n_steps
        p_steps = sorted({int(round(k * steps / max(n_pressure - 1, 1))) for k in range(n_pressure)})
        acc = {"u": 0.0, "p": 0.0, "pm": 0.0, "m": 0.0}

        def monitor(state, solver):
            exact = np.moveaxis(case.velocity(pts, state.t_n), -1, 0)
            acc["u"] = max(acc["u"], float(np.max(np.abs(state.u_n.values - exact))))
            acc["m"] = max(acc["m"], abs(state.diagnostics.get("m", 0.0)))
            if state.n in p_steps:
                p = solver.pressure_at(state.u_n.values, state.t_n)
                e, em = pressure_error(p.values, case.pressure(pts, state.t_n))
                acc["p"], acc["pm"] = max(acc["p"], e), max(acc["pm"], em)

        run(cfg, monitor)
        row = {"case": case.name, "N": N, "h": spec.h, "tau": cfg.tau, "steps": steps,
               "velocity_error": acc["u"], "pressure_error": acc["p"],
               "pressure_error_midrange": acc["pm"], "max_abs_m": acc["m"]}
        if prev is not None:
            row["velocity_rate"] = rate(prev["velocity_error"], row["velocity_error"])
            row["pressure_rate"] = rate(prev["pressure_error"], row["pressure_error"])
            row["pair"] = f"{prev['N']}-{N}"
        report.rows.append(row)
        prev = row
    return report


# --------------------------------------------------------------------------
# consistency of corrected operators on the exact solution


@dataclass
class ConsistencyReport:
    case: str
    t: float
    rows: list[dict] = field(default_factory=list)

    COLUMNS = ("case", "operator", "N", "h", "regular_error", "irregular_error", "all_error",
               "regular_order", "irregular_order", "all_order")

    def order(self, operator: str, which: str = "irregular") -> list[float]:
        vals = [r[f"{which}_order"] for r in self.rows if r["operator"] == operator and
                r.get(f"{which}_order") is not None]
        return vals

    def to_csv(self, path=None) -> str:
        return _write_csv(self.rows, self.COLUMNS, path)


def _sample(case, spec, t, sides):
    """Exact quantities at every node on its own side."""
    pts = node_points(spec)
    out = {}
    for s in np.unique(sides):
        mask = sides == s
        vals = case.side_eval("jumps", pts[mask], t, int(s))
        for k, v in vals.items():
            if k not in out:
                out[k] = np.zeros(spec.shape + v.shape[1:])
            out[k][mask] = v
    return out


def consistency_errors(case, N: int, t: float = 0.1) -> dict[str, tuple[float, float, float]]:
    """Max errors (regular, irregular, all) of corrected operators applied to exact samples.

    Operators: ``gradient`` (centered first differences of each velocity
    component), ``pressure_gradient``, ``laplacian`` (five-point Laplacian of
    the velocity), ``pressure_laplacian``, ``advection`` and ``poisson``
    (residual of the corrected pressure equation).
    """
    spec = GridSpec(N, case.L)
    h = spec.h
    geo = case.geometry
    if geo is not None:
        sides = classify(spec, geo, t)
        inter = find_intersections(spec, geo, t, sides)
        pts = geo.position(inter.theta, t).reshape(-1, 2)
        jumps = case.jumps(pts, t)
        irr = irregular_mask(sides)
        side = sides.side
    else:
        inter, jumps = None, None
        irr = np.zeros(spec.shape, bool)
        side = np.ones(spec.shape, np.int8)
    ex = _sample(case, spec, t, side)
    v = np.moveaxis(ex["v"], -1, 0)
    q = ex["q"]

    def dense(field):
        return field.to_dense() if field is not None else 0.0

    have = inter is not None and len(inter)
    # gradient: grad[a, i] = d_a v_i
    grad = gradient_array(v, h)
    if have:
        arms, gc = gradient_correction(jumps, inter)
        corr = np.zeros_like(grad)
        np.add.at(corr, (arms.axis, slice(None), arms.node[:, 0], arms.node[:, 1]), gc)
        grad = grad + corr
    grad_exact = np.moveaxis(ex["Dv"], (-2, -1), (1, 0))  # -> [a, i]
    lap = laplacian_array(v, h) + (dense(build_C3(jumps, inter, spec)) if have else 0.0)
    lap_exact = np.moveaxis(np.einsum("...ijj->...i", ex["D2v"]), -1, 0)
    gq = gradient_array(q, h) + (dense(build_C6(jumps, inter, spec)) if have else 0.0)
    gq_exact = np.moveaxis(ex["Dq"], -1, 0)
    # pressure Laplacian alone: C5 minus its forcing part
    if have:
        from ..corrections import stencil_arms, _taylor, _pick
        arms = stencil_arms(inter)
        Tp = _taylor(arms, jumps.jump_p, _pick(jumps.jump_Dp, arms), _pick(jumps.jump_D2p, arms))
        Cp = CorrectionField.accumulate(spec, arms.node, -arms.s * Tp / h**2).to_dense()
    else:
        Cp = 0.0
    lapq = laplacian_array(q, h) + Cp
    lapq_exact = np.einsum("...jj->...", ex["D2q"])
    adv = _advection_plain(v, h)
    if have:
        adv = adv + build_C2_dense(jumps, inter, spec, v)
    adv_exact = np.moveaxis(ex["F"], -1, 0)
    G = np.moveaxis(ex["F"] - ex["g"], -1, 0)
    if have:
        C4, C5, _ = _poisson_pieces(_Lev(inter, jumps), spec)
        pois = laplacian_array(q, h) + divergence_array(G, h) + C4.to_dense() - C5.to_dense()
    else:
        pois = laplacian_array(q, h) + divergence_array(G, h)

    def split(err):
        err = np.abs(err)
        if err.ndim > 2:
            err = err.reshape((-1,) + spec.shape).max(axis=0)
        reg = float(err[~irr].max()) if np.any(~irr) else 0.0
        ir = float(err[irr].max()) if np.any(irr) else 0.0
        return reg, ir, float(err.max())

    return {
        "gradient": split(grad - grad_exact),
        "pressure_gradient": split(gq - gq_exact),
        "laplacian": split(lap - lap_exact),
        "pressure_laplacian": split(lapq - lapq_exact),
        "advection": split(adv - adv_exact),
        "poisson": split(pois),
    }


@dataclass
class _Lev:
    inter: object
    jumps: object


def build_C2_dense(jumps, inter, spec, v):
    from ..corrections import build_C2
    return build_C2(jumps, inter, spec, v).to_dense()


def consistency_study(case, N_list: Iterable[int], t: float = 0.1) -> ConsistencyReport:
    N_list = sorted(int(n) for n in N_list)
    rep = ConsistencyReport(case.name, t)
    prev = {}
    for N in N_list:
        errs = consistency_errors(case, N, t)
        for op, (reg, ir, al) in errs.items():
            row = {"case": case.name, "operator": op, "N": N, "h": GridSpec(N, case.L).h,
                   "regular_error": reg, "irregular_error": ir, "all_error": al}
            if op in prev:
                p = prev[op]
                row["regular_order"] = rate(p[0], reg)
                row["irregular_order"] = rate(p[1], ir)
                row["all_order"] = rate(p[2], al)
            rep.rows.append(row)
            prev[op] = (reg, ir, al)
    return rep


# --------------------------------------------------------------------------
# mean of the pressure corrections


def mean_correction_study(case, N_list: Iterable[int], t: float = 0.1) -> list[dict]:
    """``m = mean(-C4 + C5)`` at time ``t`` on each grid."""
    rows = []
    for N in sorted(int(n) for n in N_list):
        spec = GridSpec(N, case.L)
        s = Solver(SolverConfig(spec, 0.5, 0.0, case=case))
        C4, C5, _ = _poisson_pieces(s.ctx.level(t), spec)
        m = float(np.mean(C5.to_dense() - C4.to_dense()))
        scale = max(C4.max_abs(), C5.max_abs(), 1.0)
        rows.append({"case": case.name, "N": N, "h": spec.h, "m": m, "scale": scale})
    return rows


# --------------------------------------------------------------------------
# operator norms


def _fwd(a):
    return forward_symbol(a)


def operator_symbols(tau: Optional[float] = None) -> dict:
    """Named scalar multipliers whose max-norms the study tracks."""
    inv = inverse_laplacian_symbol()
    return {
        "A": A_symbol(),
        "inv_laplacian": inv,
        "D_inv_laplacian": _fwd(0) * inv,
        "Dc_inv_laplacian": centered_symbol(0) * inv,
        "D2_inv_laplacian": _fwd(0) * _fwd(0) * inv,
        "DxDy_inv_laplacian": _fwd(0) * _fwd(1) * inv,
    }


def projection_symbols(kind: str):
    """2x2 symbol matrix of ``P0`` (``exact``) or ``P~`` (``approximate``)."""
    inv = inverse_wide_laplacian_symbol() if kind == "exact" else inverse_laplacian_symbol()
    d = [centered_symbol(0), centered_symbol(1)]
    one = constant_symbol(1.0)
    zero = constant_symbol(0.0)
    return [[(one if a == b else zero) - d[a] * d[b] * inv for b in range(2)] for a in range(2)]


@dataclass
class NormReport:
    rows: list[dict] = field(default_factory=list)
    COLUMNS = ("operator", "N", "h", "n", "value", "fitted_bound")

    def values(self, operator: str, n: Optional[int] = None) -> dict[int, float]:
        return {r["N"]: r["value"] for r in self.rows if r["operator"] == operator and
                (n is None or r["n"] == n)}

    def to_csv(self, path=None) -> str:
        return _write_csv(self.rows, self.COLUMNS, path)


def log_fit(h: np.ndarray, values: np.ndarray) -> tuple[float, float, float]:
    """Least-squares ``c1 + c2 |log h|``; returns ``(c1, c2, max relative residual)``."""
    x = np.abs(np.log(h))
    A = np.column_stack([np.ones_like(x), x])
    (c1, c2), *_ = np.linalg.lstsq(A, values, rcond=None)
    resid = np.max(np.abs(A @ [c1, c2] - values) / np.abs(values))
    return float(c1), float(c2), float(resid)


def cn_norm_sequences(spec: GridSpec, lam: float, n_list: Sequence[int]):
    """``||S^n||`` and ``||D S^n R|| sqrt(n tau)`` (forward difference) for each ``n``."""
    tau = lam * spec.h
    S = cn_step_symbol(tau)(spec)
    Rv = resolvent_symbol(tau)(spec)
    D = forward_symbol(0)(spec)
    out_s, out_d = [], []
    n_list = sorted(n_list)
    power = np.ones_like(S)
    cur = 0
    for n in n_list:
        power = power * S ** (n - cur)
        cur = n
        out_s.append(maxnorm_of_multiplier(power, spec))
        out_d.append(maxnorm_of_multiplier(D * power * Rv, spec) * math.sqrt(n * tau))
    return out_s, out_d


def operator_norm_study(N_list: Iterable[int], n_list: Iterable[int] = (1, 2, 4, 8, 16, 32, 64, 128, 256),
                        lam: float = 0.5, include_bound: bool = True) -> NormReport:
    """Exact max-norms (kernel l1 sums) of the tracked operators on each grid."""
    N_list = sorted(int(n) for n in N_list)
    n_list = sorted(int(n) for n in n_list)
    rep = NormReport()
    for N in N_list:
        spec = GridSpec(N)
        for name, sym in operator_symbols().items():
            rep.rows.append({"operator": name, "N": N, "h": spec.h, "n": "", "value": maxnorm_of_multiplier(sym, spec)})
        for kind, name in (("exact", "P0"), ("approximate", "P_tilde")):
            rep.rows.append({"operator": name, "N": N, "h": spec.h, "n": "",
                             "value": maxnorm_of_matrix_multiplier(projection_symbols(kind), spec)})
        if include_bound:
            rep.rows.append({"operator": "A_lattice_bound", "N": N, "h": spec.h, "n": "",
                             "value": lemma_a1_bound(A_symbol(), spec, 2)})
        s_vals, d_vals = cn_norm_sequences(spec, lam, n_list)
        for n, sv, dv in zip(n_list, s_vals, d_vals):
            rep.rows.append({"operator": "S^n", "N": N, "h": spec.h, "n": n, "value": sv})
            rep.rows.append({"operator": "D S^n R sqrt(n tau)", "N": N, "h": spec.h, "n": n, "value": dv})
    # fitted bounds: a constant for h-uniform operators, c1 + c2|log h| for the others
    by_op: dict[str, list[dict]] = {}
    for r in rep.rows:
        by_op.setdefault(r["operator"], []).append(r)
    for op, rows in by_op.items():
        vals = np.array([r["value"] for r in rows])
        if op in ("D2_inv_laplacian", "DxDy_inv_laplacian", "P_tilde") and len({r["N"] for r in rows}) > 1:
            c1, c2, _ = log_fit(np.array([r["h"] for r in rows]), vals)
            for r in rows:
                r["fitted_bound"] = f"{c1:.6g} + {c2:.6g}|log h|"
        else:
            for r in rows:
                r["fitted_bound"] = float(vals.max())
    return rep


def dense_laplacian(spec: GridSpec) -> np.ndarray:
    """Five-point periodic Laplacian as a dense matrix (row-major node ordering)."""
    M = spec.M
    n = M * M
    L = np.zeros((n, n))
    idx = np.arange(n).reshape(M, M)
    for (di, dj) in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        nb = np.roll(np.roll(idx, -di, 0), -dj, 1)
        L[idx.ravel(), nb.ravel()] += 1.0
    L[idx.ravel(), idx.ravel()] -= 4.0
    return L / spec.h**2


def brute_force_inverse_laplacian_norm(spec: GridSpec, n_random: int = 200, seed: int = 0) -> dict:
    """Max-norm of the inverse Laplacian from a dense pseudo-inverse (largest row sum).

    Also reports the best value over ``n_random`` random sign vectors, a lower bound.
    """
    L = dense_laplacian(spec)
    Linv = np.linalg.pinv(L, hermitian=True)
    row = float(np.max(np.abs(Linv).sum(axis=1)))
    rng = np.random.default_rng(seed)
    signs = rng.choice([-1.0, 1.0], size=(L.shape[0], n_random))
    sampled = float(np.max(np.abs(Linv @ signs)))
    return {"row_sum": row, "random_sign_lower_bound": sampled}
