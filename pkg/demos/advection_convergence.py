"""
Convergence of linear advection
===============================

Advect ``sin(pi x)`` on (-1, 1) to T = 5 with second-order upwind
operators and refine by adding elements.
"""

from upwindsbp.experiments import ExperimentSpec, format_convergence_table, run_convergence

# (order, K, N): K elements with N nodes each
ladder = [(2, K, 20) for K in (1, 2, 4, 8, 16)]
spec = ExperimentSpec("advection_convergence", ladder, "lax_friedrichs", jobs=4)
report = run_convergence(spec)

# errors fall by four per refinement once the mesh resolves the wave
print(format_convergence_table(report))

# the same rows as CSV
print(report.to_csv())
