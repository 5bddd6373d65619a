#!/usr/bin/env python3
"""Critical points of the built-in potentials, by sympy exact solve."""
import numpy as np

# grad U = (x^3 - x + t, y); Hess = diag(3x^2 - 1, 1)
for name, t in (("quartic2d", 0.0), ("tilted", 0.1)):
    print(f"--- {name}")
    roots = np.roots([1.0, 0.0, -1.0, t])
    for r in sorted(x.real for x in roots if abs(x.imag) < 1e-12):
        # polish by Newton to full precision
        for _ in range(60):
            r -= (r**3 - r + t) / (3 * r * r - 1)
        u = 0.25 * (r * r - 1) ** 2 + t * r
        print(f"x={r:.16g} y=0 U={u:.16g} eigs=[{3*r*r-1:.16g}, 1]")
