"""
Upwind SBP operators
====================

Build the explicit operators, check the summation-by-parts identity and
the dissipation of ``M (D+ - D-)``, then couple two DGSEM elements.
"""

import numpy as np

from upwindsbp.operators import (
    central_decomposition,
    couple,
    derive_periodic_upwind,
    make_dgsem_p2,
    make_order2_bounded,
    upwind_stencil,
    verify,
)

# second-order pair on [0, 1] with 12 nodes
op = make_order2_bounded(12, 0.0, 1.0)
M, dp, dm = op.dense()

# M D+ + D-^T M only sees the two boundary nodes
B = M @ dp + dm.T @ M
print("boundary matrix corners:", B[0, 0], B[-1, -1])
print("largest interior entry:", np.abs(B[1:-1, 1:-1]).max())

# the difference of the two derivatives is a dissipation operator
diss = M @ (dp - dm)
print("max eigenvalue of M(D+ - D-):", np.linalg.eigvalsh((diss + diss.T) / 2).max())

# D+ and D- split into a classical central operator plus dissipation
parts = central_decomposition(op)
print("central + dissipation == D+:", np.allclose(parts.central + parts.dissipation, dp))

# every check in one report
rep = verify(op)
print("checks:", rep.checks)

# periodic stencils of higher order come from exact rational weights
offsets, weights = upwind_stencil(4)
print("order-4 D+ stencil:", dict(zip(offsets, map(str, weights))))
print("order-4 passes:", verify(derive_periodic_upwind(4, 32, 0.0, 1.0)).passed)

# two DGSEM elements coupled by upwind interface terms
el = make_dgsem_p2(-1.0, 1.0)
pair = couple(el, el.rescaled(1.0, 3.0))
M2, dp2, dm2 = pair.dense()
print("eigenvalues of M(D+ - D-):", np.round(np.linalg.eigvals(M2 @ (dp2 - dm2)).real, 12))
