"""Static interface carrying a force: velocity kinks and a pressure jump.

The circle is fixed, but the force on it and hence the jumps change in
time.  Velocity and pressure both converge at second order in the max norm
over all nodes, including the ones next to the interface.
"""

from iimns.harness.cases import get_case
from iimns.harness.studies import convergence_study

rep = convergence_study(get_case("static-circle"), [32, 64, 128], lam=0.5, T=0.25)
for r in rep.rows:
    print(f"N = {r['N']:>4}: velocity error {r['velocity_error']:.3e}, pressure error {r['pressure_error']:.3e}, "
          f"max |m| {r['max_abs_m']:.1e}"
          + (f", rates {r['velocity_rate']:.2f} / {r['pressure_rate']:.2f}" if r.get("pair") else ""))
