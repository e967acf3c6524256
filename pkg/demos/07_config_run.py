"""A run described by a config file: a translating ellipse with a normal force.

Without a manufactured case the jumps are derived from the interface force
and the computed velocity.  The same file works with the command line:
``iimns run --config <file> --out results``.
"""

import numpy as np

from iimns.harness.config import load_config, solver_config
from iimns.solver import run

CONFIG = """
n: 32
lambda: 0.5
T: 0.5
geometry:
  kind: ellipse
  a: 1.3
  b: 0.8
  motion: {kind: translate, velocity: [0.3, 0.1]}
force:
  profile: normal
  a0: 0.5
  a1: 0.3
  m: 2
"""

cfg = solver_config(load_config(CONFIG))


def monitor(state, solver):
    if state.n % 5 == 0:
        d = state.diagnostics
        print(f"step {state.n:>3}  t = {state.t_n:.3f}  max |u| = {np.max(np.abs(state.u_n.values)):.4f}  "
              f"C1 nodes {d.get('C1_nodes', 0):>3}  |div u| = {d.get('divergence', 0.0):.2e}")


res = run(cfg, monitor)
p = res.final.p_half.values
print(f"pressure range at the end: {p.min():.4f} .. {p.max():.4f}")
