"""Fourier diagonalization of periodic grid operators.

Every constant-coefficient difference operator on the periodic grid is a
Fourier multiplier.  This module evaluates those multipliers on the full
``2N x 2N`` frequency lattice, inverts the discrete Laplacians on their
ranges, applies the exact and approximate discrete projections and the
Crank-Nicolson operators, and computes maximum-norm operator norms exactly
as the l1 sum of the convolution kernel.

Frequencies are stored in numpy FFT order, ``k = -N .. N-1`` after
relabelling, and enter the symbols through ``xi = k h pi / L = k pi / N``.
"""

from __future__ import annotations

import operator
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import NotInRange, NotMeanZero
from .grid import DIM, GridFunction, GridSpec, VectorGridFunction

MEAN_TOL = 1e-10
RANGE_TOL = 1e-10


@lru_cache(maxsize=32)
def _lattice(N: int):
    k = np.fft.fftfreq(2 * N, 1.0 / (2 * N))
    k1, k2 = np.meshgrid(k, k, indexing="ij")
    k1.flags.writeable = False
    k2.flags.writeable = False
    return k1, k2


def wavenumbers(spec: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """Integer frequencies ``(k1, k2)`` in FFT storage order."""
    return _lattice(spec.N)


def _xi(spec):
    k1, k2 = wavenumbers(spec)
    return k1 * np.pi / spec.N, k2 * np.pi / spec.N


# --------------------------------------------------------------------------
# symbols


@dataclass(frozen=True)
class Symbol:
    """Fourier multiplier, evaluated on the frequency lattice of a grid.

    ``evaluator(k1, k2, spec)`` returns the multiplier values; it must be
    ``2N``-periodic in each integer frequency.
    """

    evaluator: Callable[[np.ndarray, np.ndarray, GridSpec], np.ndarray]
    name: str = "symbol"

    def __call__(self, spec: GridSpec) -> np.ndarray:
        k1, k2 = wavenumbers(spec)
        return np.broadcast_to(self.evaluator(k1, k2, spec), k1.shape)

    def _combine(self, other, op, sym):
        if isinstance(other, Symbol):
            return Symbol(lambda k1, k2, s: op(self.evaluator(k1, k2, s), other.evaluator(k1, k2, s)),
                          f"({self.name}{sym}{other.name})")
        return Symbol(lambda k1, k2, s: op(self.evaluator(k1, k2, s), other), f"({self.name}{sym}{other})")

    def __mul__(self, other):
        return self._combine(other, operator.mul, "*")

    __rmul__ = __mul__

    def __add__(self, other):
        return self._combine(other, operator.add, "+")

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, operator.sub, "-")

    def __pow__(self, n: int):
        return Symbol(lambda k1, k2, s: self.evaluator(k1, k2, s) ** n, f"{self.name}^{n}")

    def inverse(self) -> "Symbol":
        """Reciprocal, set to zero where the symbol vanishes."""

        def ev(k1, k2, s):
            v = np.broadcast_to(np.asarray(self.evaluator(k1, k2, s)), np.shape(k1))
            out = np.zeros(v.shape, dtype=complex if np.iscomplexobj(v) else float)
            nz = np.abs(v) > 1e-12 * max(np.max(np.abs(v)), 1e-300)
            out[nz] = 1.0 / v[nz]
            return out

        return Symbol(ev, f"{self.name}^-1")


def constant_symbol(c=1.0) -> Symbol:
    return Symbol(lambda k1, k2, s: np.full(np.shape(k1), c, dtype=float), f"{c}")


def laplacian_symbol() -> Symbol:
    """``sigma(kh) = -(4/h^2) sum sin^2(xi/2)``."""

    def ev(k1, k2, s):
        x1, x2 = k1 * np.pi / s.N, k2 * np.pi / s.N
        return -4.0 / s.h**2 * (np.sin(x1 / 2) ** 2 + np.sin(x2 / 2) ** 2)

    return Symbol(ev, "sigma")


def wide_laplacian_symbol() -> Symbol:
    """``sigma0(kh) = -(1/h^2) sum sin^2(xi)``."""

    def ev(k1, k2, s):
        x1, x2 = k1 * np.pi / s.N, k2 * np.pi / s.N
        return -1.0 / s.h**2 * (np.sin(x1) ** 2 + np.sin(x2) ** 2)

    return Symbol(ev, "sigma0")


def _axis_xi(k1, k2, s, axis):
    return (k1 if axis == 0 else k2) * np.pi / s.N


def centered_symbol(axis: int) -> Symbol:
    return Symbol(lambda k1, k2, s: 1j * np.sin(_axis_xi(k1, k2, s, axis)) / s.h, f"D{axis}")


def forward_symbol(axis: int) -> Symbol:
    return Symbol(lambda k1, k2, s: (np.exp(1j * _axis_xi(k1, k2, s, axis)) - 1) / s.h, f"D{axis}+")


def backward_symbol(axis: int) -> Symbol:
    return Symbol(lambda k1, k2, s: (1 - np.exp(-1j * _axis_xi(k1, k2, s, axis))) / s.h, f"D{axis}-")


def inverse_laplacian_symbol() -> Symbol:
    def ev(k1, k2, s):
        sig = laplacian_symbol().evaluator(k1, k2, s)
        out = np.zeros_like(sig)
        nz = (k1 != 0) | (k2 != 0)
        out[nz] = 1.0 / sig[nz]
        return out

    return Symbol(ev, "Lap^-1")


def _null0(k1, k2, N):
    return ((k1 == 0) | (k1 == -N)) & ((k2 == 0) | (k2 == -N))


def inverse_wide_laplacian_symbol() -> Symbol:
    def ev(k1, k2, s):
        sig = wide_laplacian_symbol().evaluator(k1, k2, s)
        out = np.zeros_like(sig)
        nz = ~_null0(k1, k2, s.N)
        out[nz] = 1.0 / sig[nz]
        return out

    return Symbol(ev, "Lap0^-1")


def A_symbol() -> Symbol:
    """Symbol of ``(Lap_h - Lap_0) Lap_h^-1``: ``(s1^4 + s2^4)/(s1^2 + s2^2)``, 0 at k = 0."""

    def ev(k1, k2, s):
        s1 = np.sin(k1 * np.pi / s.N / 2) ** 2
        s2 = np.sin(k2 * np.pi / s.N / 2) ** 2
        den = s1 + s2
        out = np.zeros(np.shape(k1))
        nz = den > 0
        out[nz] = (s1[nz] ** 2 + s2[nz] ** 2) / den[nz]
        return out

    return Symbol(ev, "A")


def resolvent_symbol(tau: float) -> Symbol:
    """``R = (I - tau/2 Lap_h)^-1``."""
    lap = laplacian_symbol()
    return Symbol(lambda k1, k2, s: 1.0 / (1.0 - 0.5 * tau * lap.evaluator(k1, k2, s)), "R")


def cn_step_symbol(tau: float) -> Symbol:
    """``S = (I + tau/2 Lap_h)(I - tau/2 Lap_h)^-1``."""
    lap = laplacian_symbol()

    def ev(k1, k2, s):
        sig = lap.evaluator(k1, k2, s)
        return (1.0 + 0.5 * tau * sig) / (1.0 - 0.5 * tau * sig)

    return Symbol(ev, "S")


# --------------------------------------------------------------------------
# transforms


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Discrete Fourier coefficients ``f_hat(k) = sum_j f(x_j) exp(-i k x_j pi/L)``."""

    spec: GridSpec
    coeffs: np.ndarray

    @property
    def k(self):
        return wavenumbers(self.spec)

    def at(self, k1: int, k2: int) -> complex:
        M = self.spec.M
        return complex(self.coeffs[k1 % M, k2 % M])


def _phase(spec):
    k1, k2 = wavenumbers(spec)
    return np.where((k1 + k2) % 2 == 0, 1.0, -1.0)


def dft(f: GridFunction) -> Spectrum:
    """Forward transform summed over the logical nodes ``-N <= j < N``."""
    return Spectrum(f.spec, _phase(f.spec) * np.fft.fft2(f.values))


def idft(s: Spectrum) -> GridFunction:
    """Inverse of :func:`dft`; the real part is returned."""
    return GridFunction(s.spec, np.real(np.fft.ifft2(s.coeffs * _phase(s.spec))))


def apply_multiplier(values: np.ndarray, multiplier: np.ndarray) -> np.ndarray:
    """Apply a lattice multiplier over the two trailing axes of ``values``."""
    out = np.fft.ifft2(np.fft.fft2(values) * multiplier)
    if np.iscomplexobj(values):
        return out
    return out.real


def _values(f):
    return f.values if isinstance(f, (GridFunction, VectorGridFunction)) else np.asarray(f)


def _rewrap(f, values):
    if isinstance(f, VectorGridFunction):
        return VectorGridFunction(f.spec, values)
    return GridFunction(f.spec, values)


def _check_mean_zero(values, tol=MEAN_TOL):
    scale = np.max(np.abs(values)) if values.size else 0.0
    m = abs(float(np.mean(values)))
    if m > tol * scale:
        raise NotMeanZero(f"mean {m:.3e} exceeds {tol:g} * max norm {scale:.3e}")


# --------------------------------------------------------------------------
# inverse Laplacians and projections


def solve_laplacian_h(f: GridFunction, tol: float = MEAN_TOL) -> GridFunction:
    """Mean-zero ``g`` with ``laplacian_h(g) = f``; ``f`` must have mean zero."""
    _check_mean_zero(f.values, tol)
    return GridFunction(f.spec, apply_multiplier(f.values, inverse_laplacian_symbol()(f.spec)))


def null_mode_content(f: GridFunction) -> float:
    """Largest amplitude of ``f`` on the 2^d null modes of the wide Laplacian."""
    k1, k2 = wavenumbers(f.spec)
    fh = np.fft.fft2(f.values) / f.spec.M**DIM
    return float(np.max(np.abs(fh[_null0(k1, k2, f.spec.N)])))


def solve_wide_laplacian(f: GridFunction, tol: float = RANGE_TOL) -> GridFunction:
    """Solve ``wide_laplacian(g) = f`` on the range ``X_0``.

    Raises NotInRange when ``f`` has null-mode content above ``tol`` times its
    max norm; the null-mode components of the result are zero.
    """
    content = null_mode_content(f)
    scale = f.max_norm()
    if content > tol * scale:
        raise NotInRange(f"null-mode amplitude {content:.3e} exceeds {tol:g} * {scale:.3e}")
    return GridFunction(f.spec, apply_multiplier(f.values, inverse_wide_laplacian_symbol()(f.spec)))


def _gradient_part(v: VectorGridFunction, inverse: Symbol) -> np.ndarray:
    """``grad_h inverse div_h v`` evaluated in Fourier space."""
    spec = v.spec
    d = [centered_symbol(a)(spec) for a in range(DIM)]
    vh = np.fft.fft2(v.values)
    div = sum(d[a] * vh[a] for a in range(DIM)) * inverse(spec)
    return np.stack([np.fft.ifft2(d[a] * div).real for a in range(DIM)])


def project_P0(v: VectorGridFunction) -> VectorGridFunction:
    """Exact discrete projection ``v - grad_h Lap_0^-1 div_h v``."""
    return VectorGridFunction(v.spec, v.values - _gradient_part(v, inverse_wide_laplacian_symbol()))


def project_tildeP(v: VectorGridFunction) -> VectorGridFunction:
    """Approximate projection ``v - grad_h Lap_h^-1 div_h v``."""
    return VectorGridFunction(v.spec, v.values - _gradient_part(v, inverse_laplacian_symbol()))


def apply_A(f, tol: float = MEAN_TOL):
    """Apply ``A = (Lap_h - Lap_0) Lap_h^-1`` to a mean-zero field (or each component)."""
    vals = _values(f)
    for comp in vals.reshape((-1,) + vals.shape[-2:]):
        _check_mean_zero(comp, tol)
    return _rewrap(f, apply_multiplier(vals, A_symbol()(f.spec)))


def cn_resolvent(f, tau: float):
    """Apply ``R = (I - tau/2 Lap_h)^-1`` to a scalar or vector grid function."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    return _rewrap(f, apply_multiplier(_values(f), resolvent_symbol(tau)(f.spec)))


def cn_power(f, tau: float, n: int, with_resolvent: bool = False):
    """Apply ``S^n`` (or ``S^n R`` when ``with_resolvent``)."""
    if not tau > 0 or n < 0:
        raise ValueError("need tau > 0 and n >= 0")
    mult = cn_step_symbol(tau)(f.spec) ** n
    if with_resolvent:
        mult = mult * resolvent_symbol(tau)(f.spec)
    return _rewrap(f, apply_multiplier(_values(f), mult))


# --------------------------------------------------------------------------
# maximum-norm operator norms


def kernel(symbol, spec: GridSpec) -> np.ndarray:
    """Convolution kernel ``a_j`` of a multiplier (inverse transform of its values)."""
    vals = symbol(spec) if isinstance(symbol, Symbol) else np.asarray(symbol)
    return np.fft.ifft2(vals)


def maxnorm_of_multiplier(symbol, spec: GridSpec) -> float:
    """Induced max-norm of a multiplier operator: ``sum_j |a_j|``.

    For a convolution on the periodic grid this l1 sum is attained by the
    sign pattern of the kernel, so the value is exact.
    """
    return float(np.sum(np.abs(kernel(symbol, spec))))


def maxnorm_of_matrix_multiplier(symbols, spec: GridSpec) -> float:
    """Max-norm of a ``d x d`` multiplier acting on vector fields.

    The norm on vector fields takes the max over nodes and components, so
    it is the largest row sum of the componentwise kernel l1 norms.
    """
    rows = [sum(maxnorm_of_multiplier(s, spec) for s in row) for row in symbols]
    return max(rows)


def _forward_lattice_diff(values, axis, dxi, s_order):
    out = values
    for _ in range(s_order):
        out = (np.roll(out, -1, axis=axis) - out) / dxi
    return out


def lemma_a1_sums(symbol, spec: GridSpec, s_order: int) -> tuple[float, float]:
    """Lattice sums ``(M0^2, M1^2)`` of a symbol.

    ``M0^2 = sum_j |a_j|^2`` and ``M1^2 = sum_nu sum_j |beta_nu(j)|^(2s) |a_j|^2``,
    both computed on the frequency side from ``|sigma|^2`` and
    ``|(D_nu^+)^s sigma|^2`` (forward divided differences in ``xi``).
    """
    vals = symbol(spec) if isinstance(symbol, Symbol) else np.asarray(symbol)
    dxi = np.pi / spec.N
    norm = 1.0 / spec.M**DIM
    m0 = norm * float(np.sum(np.abs(vals) ** 2))
    m1 = norm * sum(float(np.sum(np.abs(_forward_lattice_diff(vals, ax, dxi, s_order)) ** 2))
                    for ax in range(DIM))
    return m0, m1


def lemma_a1_rhs(symbol, spec: GridSpec, s_order: int) -> float:
    """The bound's right-hand side with unit constant, ``M1'^(d/2s) M0^(1 - d/2s)``.

    ``M1'^2 = M1^2 + M0^2`` so that the first factor controls ``(1 + |j|^2s)``.
    """
    if s_order * 2 <= DIM:
        raise ValueError("s_order must exceed d/2")
    m0, m1 = lemma_a1_sums(symbol, spec, s_order)
    p = DIM / (2 * s_order)
    return (m1 + m0) ** (p / 2) * m0 ** ((1 - p) / 2)


def lemma_a1_bound(symbol, spec: GridSpec, s_order: int = 2) -> float:
    """Rigorous upper bound for the max-norm of a multiplier from lattice sums.

    Cauchy-Schwarz with the weight ``w_j = 1 + lam sum_nu |beta_nu(j)|^(2s)``
    gives ``sum |a_j| <= sqrt((M0^2 + lam M1^2) Z(lam))`` with
    ``Z(lam) = sum_j 1 / w_j``; the bound is minimized over ``lam``.  Its
    scaling in ``M0, M1`` is that of :func:`lemma_a1_rhs`, with the constant
    made explicit.
    """
    if s_order * 2 <= DIM:
        raise ValueError("s_order must exceed d/2")
    m0, m1 = lemma_a1_sums(symbol, spec, s_order)
    if m0 == 0.0:
        return 0.0
    k1, k2 = wavenumbers(spec)
    dxi = np.pi / spec.N
    beta = sum((2 * np.abs(np.sin(k * np.pi / (2 * spec.N))) / dxi) ** (2 * s_order) for k in (k1, k2))

    def log_bound(loglam):
        lam = np.exp(loglam)
        return 0.5 * (np.log(m0 + lam * m1) + np.log(np.sum(1.0 / (1.0 + lam * beta))))

    lo, hi = -80.0, 80.0
    res = minimize_scalar(log_bound, bounds=(lo, hi), method="bounded", options={"xatol": 1e-6})
    best = min(res.fun, log_bound(lo), log_bound(hi))
    return float(np.exp(best))
