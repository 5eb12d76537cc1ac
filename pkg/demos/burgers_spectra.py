"""
Spectra of Burgers semidiscretizations
======================================

Linearize Burgers' equation around a random nonnegative state. With
upwind operators every eigenvalue sits in the closed left half plane;
the central operator gives a purely imaginary spectrum.
"""

import numpy as np

from upwindsbp.analysis import burgers_stability_table, jacobian, spectrum
from upwindsbp.operators import make_order2_periodic
from upwindsbp.semidisc import MeshLayout, Semidiscretization
from upwindsbp.splittings import Equation

rng = np.random.default_rng(1)
op = make_order2_periodic(40, 0.0, 1.0)
state = rng.uniform(0.0, 1.0, (1, 40, 1))

# fully upwind: rhs = -D- (u^2 / 2)
upwind = Semidiscretization(MeshLayout.from_reference(op, 1, (0.0, 1.0)), Equation("burgers"),
                            "fully_upwind")
sp = spectrum(jacobian(upwind, state))
print("upwind  max Re:", sp.max_real_part, " spectral radius:", sp.spectral_radius)

# central: the average of D+ and D-
central = Semidiscretization(MeshLayout.from_reference(op.central(), 1, (0.0, 1.0)),
                             Equation("burgers"), "fully_upwind")
sp = spectrum(jacobian(central, state))
print("central max |Re|:", np.abs(sp.eigenvalues.real).max())

# the stability table across orders, element counts and node counts
for row in burgers_stability_table([2, 3, 4], [1, 2], [13, 14]):
    print(f"order {row.order} K={row.K} N={row.N} {row.splitting:13s} max Re {row.max_real_part: .2e}")
