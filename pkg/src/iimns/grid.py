"""Periodic Cartesian grid, grid functions and finite-difference operators.

The grid covers ``[-L, L)^2`` with nodes ``x_j = j h`` for ``-N <= j < N``
and ``h = L / N``.  Storage index ``i = j + N`` runs over ``0 .. 2N-1``;
all operators wrap around, so no ghost layers are kept.

Axis 0 of every array is the x direction, axis 1 the y direction.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

DIM = 2


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid with ``2N`` nodes per axis and spacing ``L/N``."""

    N: int
    L: float = np.pi

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 4 or self.N % 2:
            raise ValueError(f"N must be an even integer >= 4, got {self.N}")
        if not self.L > 0:
            raise ValueError(f"L must be positive, got {self.L}")

    @property
    def h(self) -> float:
        return self.L / self.N

    @property
    def d(self) -> int:
        return DIM

    @property
    def M(self) -> int:
        """Number of stored nodes per axis (one full period)."""
        return 2 * self.N

    @property
    def shape(self) -> tuple[int, int]:
        return (self.M, self.M)

    @cached_property
    def x1d(self) -> np.ndarray:
        return (np.arange(self.M) - self.N) * self.h

    @cached_property
    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Node coordinates ``(X, Y)`` with ``ij`` indexing."""
        return np.meshgrid(self.x1d, self.x1d, indexing="ij")

    def wrap(self, x):
        """Map coordinates into the fundamental period ``[-L, L)``."""
        return np.mod(np.asarray(x) + self.L, 2 * self.L) - self.L

    def zeros(self) -> "GridFunction":
        return GridFunction(self, np.zeros(self.shape))

    def from_function(self, fn) -> "GridFunction":
        X, Y = self.mesh
        return GridFunction(self, np.broadcast_to(fn(X, Y), self.shape))


def _as_values(other):
    if isinstance(other, (GridFunction, VectorGridFunction)):
        return other.values
    return other


class _FieldArithmetic:
    """Elementwise arithmetic shared by scalar and vector grid functions."""

    def _new(self, values):
        return type(self)(self.spec, values)

    def _check(self, other):
        if isinstance(other, _FieldArithmetic) and other.spec != self.spec:
            raise ValueError("grid functions live on different grids")

    def __add__(self, other):
        self._check(other)
        return self._new(self.values + _as_values(other))

    __radd__ = __add__

    def __sub__(self, other):
        self._check(other)
        return self._new(self.values - _as_values(other))

    def __rsub__(self, other):
        return self._new(_as_values(other) - self.values)

    def __mul__(self, other):
        self._check(other)
        return self._new(self.values * _as_values(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        self._check(other)
        return self._new(self.values / _as_values(other))

    def __neg__(self):
        return self._new(-self.values)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def max_norm(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0


@dataclass(frozen=True, eq=False)
class GridFunction(_FieldArithmetic):
    """Real periodic scalar field stored over one period; read-only."""

    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.spec.shape:
            raise ValueError(f"expected shape {self.spec.shape}, got {v.shape}")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def at(self, j1: int, j2: int) -> float:
        """Value at logical (periodic) index ``j``, ``-N <= j < N`` or any shift."""
        M, N = self.spec.M, self.spec.N
        return float(self.values[(j1 + N) % M, (j2 + N) % M])


@dataclass(frozen=True, eq=False)
class VectorGridFunction(_FieldArithmetic):
    """``d`` scalar components on one grid, stored as an array ``(2, 2N, 2N)``."""

    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (DIM,) + self.spec.shape:
            raise ValueError(f"expected shape {(DIM,) + self.spec.shape}, got {v.shape}")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def from_components(cls, *components: GridFunction) -> "VectorGridFunction":
        spec = components[0].spec
        if any(c.spec != spec for c in components):
            raise ValueError("components must share one GridSpec")
        return cls(spec, np.stack([c.values for c in components]))

    @property
    def components(self) -> tuple[GridFunction, ...]:
        return tuple(GridFunction(self.spec, c) for c in self.values)

    def __getitem__(self, i) -> GridFunction:
        return GridFunction(self.spec, self.values[i])

    def __len__(self):
        return DIM


# --------------------------------------------------------------------------
# array kernels (used directly by the solver)


def shift(a: np.ndarray, offset: int, axis: int) -> np.ndarray:
    """``out[j] = a[j + offset]`` along spatial ``axis`` with periodic wrap.

    ``axis`` 0/1 refer to the two trailing (spatial) array axes.
    """
    if axis >= 0:
        axis -= DIM
    return np.roll(a, -offset, axis=axis)


def centered_diff_array(a, h, axis):
    return (shift(a, 1, axis) - shift(a, -1, axis)) / (2 * h)


def laplacian_array(a, h):
    out = -2 * DIM * a
    for ax in (-2, -1):
        out = out + shift(a, 1, ax) + shift(a, -1, ax)
    return out / h**2


def wide_laplacian_array(a, h):
    out = -2 * DIM * a
    for ax in (-2, -1):
        out = out + shift(a, 2, ax) + shift(a, -2, ax)
    return out / (2 * h) ** 2


def gradient_array(a, h):
    return np.stack([centered_diff_array(a, h, ax) for ax in (-2, -1)])


def divergence_array(v, h):
    return centered_diff_array(v[0], h, -2) + centered_diff_array(v[1], h, -1)


# --------------------------------------------------------------------------
# grid-function operators


def centered_diff(f: GridFunction, axis: int) -> GridFunction:
    """Centered first difference ``(f(j+e) - f(j-e)) / 2h`` along ``axis``."""
    return GridFunction(f.spec, centered_diff_array(f.values, f.spec.h, axis))


def forward_diff(f: GridFunction, axis: int) -> GridFunction:
    h = f.spec.h
    return GridFunction(f.spec, (shift(f.values, 1, axis) - f.values) / h)


def backward_diff(f: GridFunction, axis: int) -> GridFunction:
    h = f.spec.h
    return GridFunction(f.spec, (f.values - shift(f.values, -1, axis)) / h)


def laplacian_h(f: GridFunction) -> GridFunction:
    """Five-point Laplacian; symbol ``-(4/h^2) sum sin^2(k h pi / 2L)``."""
    return GridFunction(f.spec, laplacian_array(f.values, f.spec.h))


def wide_laplacian(f: GridFunction) -> GridFunction:
    """Second differences with step ``2h``; equals ``divergence_h(gradient_h(f))``.

    The coefficient is ``(2h)^-2``, the one consistent with the symbol
    ``-(1/h^2) sum sin^2(k h pi / L)``.
    """
    return GridFunction(f.spec, wide_laplacian_array(f.values, f.spec.h))


def gradient_h(f: GridFunction) -> VectorGridFunction:
    return VectorGridFunction(f.spec, gradient_array(f.values, f.spec.h))


def divergence_h(v: VectorGridFunction) -> GridFunction:
    return GridFunction(v.spec, divergence_array(v.values, v.spec.h))


def mean(f) -> float:
    return float(np.mean(_as_values(f)))


def subtract_mean(f: GridFunction) -> GridFunction:
    return GridFunction(f.spec, f.values - np.mean(f.values))
