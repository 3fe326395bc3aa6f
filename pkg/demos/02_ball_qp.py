"""Constrained quadratic program over an intersection of balls.

Ten nodes each own one ball constraint; nine of them also hold a convex
quadratic. Two presets are swept over the step-size grid and the best cell
of each is rerun with a trace.

    python demos/02_ball_qp.py
"""

import numpy as np

from graphsplit.bench import DEFAULT_GRID, ball_qp_reference, gen_ball_qp, sweep
from graphsplit.presets import make_preset
from graphsplit.solver import SolverConfig, solve

inst, problem = gen_ball_qp(n=10, d=20, seed=1)
ref = ball_qp_reference(inst, cross_check_iters=2000)
print(f"reference: |x*| = {np.linalg.norm(ref.x):.4f}, KKT residual {ref.kkt_residual:.1e}, "
      f"active balls {np.flatnonzero(ref.multipliers).tolist()}, "
      f"independent cross-check gap {ref.cross_check_gap:.1e}")

for name, params in [("seq_fb", {}), ("complete", {"variant": 1})]:
    pre = make_preset(name, n=inst.n, **params)
    grid = sweep(problem, pre.scheme, DEFAULT_GRID, DEFAULT_GRID, iters=500, x_star=ref.x, error_tol=1e-8)
    best = grid.best
    res = solve(pre.scheme, problem, SolverConfig(best.gamma, best.lam, max_iters=500, record_every=100),
                x_star=ref.x)
    print(f"\n{name}: best gamma_hat={best.gamma_hat} lambda_hat={best.lambda_hat} "
          f"(1e-8 after {best.iters_to_tol} iterations)")
    for row in res.trace:
        print(f"  k={row.k:4d}  relative error {row.relative_error:.3e}  residual {row.residual:.3e}")
