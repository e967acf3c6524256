"""Grid operators, the two discrete projections, and how they relate.

The exact projection P0 uses the wide Laplacian (centered divergence of the
centered gradient) and is idempotent.  The approximate projection tildeP
uses the compact five-point Laplacian instead; it is not idempotent, but it
differs from P0 only through the operator A = (Lap_h - Lap_0) Lap_h^-1
acting on the gradient part.
"""

import numpy as np

from iimns.grid import GridSpec, VectorGridFunction, divergence_h
from iimns.spectral import apply_A, project_P0, project_tildeP

spec = GridSpec(32)
rng = np.random.default_rng(0)
v = VectorGridFunction(spec, rng.standard_normal((2,) + spec.shape))

p0 = project_P0(v)
tp = project_tildeP(v)
print(f"grid: {spec.M} x {spec.M} nodes, h = {spec.h:.4f}")
print(f"max |div_h P0 v|           = {divergence_h(p0).max_norm():.2e}   (P0 output is discretely divergence free)")
print(f"max |div_h tildeP v|       = {divergence_h(tp).max_norm():.2e}   (tildeP output is not)")
print(f"max |P0 P0 v - P0 v|       = {np.max(np.abs(project_P0(p0).values - p0.values)):.2e}")
print(f"max |tildeP tildeP v - tildeP v| = {np.max(np.abs(project_tildeP(tp).values - tp.values)):.2e}")

grad_part = VectorGridFunction(spec, v.values - p0.values)
rebuilt = p0.values + apply_A(grad_part).values
print(f"max |tildeP v - (P0 v + A (I - P0) v)| = {np.max(np.abs(tp.values - rebuilt)):.2e}")
