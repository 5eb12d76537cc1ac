"""
Kelvin-Helmholtz instability, first seconds
===========================================

Run the shear layer on a 4 x 4 mesh of 16 x 16-node elements for a
short time, logging mass and kinetic energy.
"""

from upwindsbp.experiments import build_layout, ic_khi
from upwindsbp.semidisc import Semidiscretization
from upwindsbp.splittings import Equation
from upwindsbp.timeint import IntegratorConfig, integrate, record_functionals

eq = Equation("euler", dim=2)
layout = build_layout(2, 4, 16, (-1.0, 1.0), dim=2)
semi = Semidiscretization(layout, eq, "van_leer_haenel")
X, Y = layout.coordinates()
u0 = ic_khi(X, Y, eq.gas)

cfg = IntegratorConfig(t_end=1.0, abstol=1e-6, reltol=1e-6, log_every=20)
res = integrate(semi, u0, cfg, lambda t, u: record_functionals(semi, u, t))

# mass is conserved to roundoff while kinetic energy changes slowly
t, mass = res.log.series("mass_0")
_, ekin = res.log.series("kinetic_energy")
for ti, mi, ei in zip(t, mass, ekin):
    print(f"t = {ti:6.3f}   mass = {mi:.15f}   kinetic energy = {ei:.6f}")
print("crashed:", res.crashed, " accepted steps:", res.log.accepted, " rejected:", res.log.rejected)
