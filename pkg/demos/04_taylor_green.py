"""Smooth baseline: the decaying Taylor-Green vortex with no interface.

With no interface every correction is empty and the scheme is plain
second order in space and time.
"""

from iimns.harness.cases import get_case
from iimns.harness.studies import convergence_study

rep = convergence_study(get_case("taylor-green"), [32, 64, 128], lam=0.5, T=0.5)
for r in rep.rows:
    print(f"N = {r['N']:>4}: velocity error {r['velocity_error']:.3e}, pressure error {r['pressure_error']:.3e}"
          + (f", rates {r['velocity_rate']:.2f} / {r['pressure_rate']:.2f}" if r.get("pair") else ""))
