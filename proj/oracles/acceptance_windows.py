#!/usr/bin/env python3
"""Pre-flight numbers for the grid acceptance windows.

1. Refinement Cauchy order with grid-aligned rectangular regions vs balls.
2. cap_pde / cap_asym at eps in {0.15, 0.10, 0.07}, grid h = sqrt(eps)/8,
   Z = Z_laplace (both drifts).
3. Laplace integral ratio at eps = 0.07 (A = small ball at m1).
"""
import numpy as np
from grid_capacity import Ops, ball_mask, solve, dirichlet_form, M_I, M_NR, U

box = (-2.0, 2.0, -1.5, 1.5)

def rect_mask(ops, xr, yr):
    X, Y = np.meshgrid(ops.x, ops.y)
    return ((X >= xr[0] - 1e-12) & (X <= xr[1] + 1e-12) &
            (Y >= yr[0] - 1e-12) & (Y <= yr[1] + 1e-12)).ravel()

print("--- refinement with aligned rectangles (M=I, eps=0.1)")
prev = None
for nx, ny in ((81, 61), (161, 121), (321, 241)):
    ops = Ops(nx, ny, box, 0.1, M_I)
    L = ops.assemble(+1.0)
    mA = rect_mask(ops, (-1.3, -0.7), (-0.3, 0.3))
    mB = rect_mask(ops, (0.7, 1.3), (-0.3, 0.3))
    cap = dirichlet_form(ops, solve(L, mA, mB))
    print(f"cap({nx}x{ny}) = {cap:.16g}" + ("" if prev is None else f"  diff={cap-prev:.6e}"))
    prev = cap

print("--- criterion-4 style ratios, h = sqrt(eps)/8")
for eps in (0.15, 0.10, 0.07):
    h_target = np.sqrt(eps) / 8
    nx = int(np.ceil(4.0 / h_target)) + 1
    # keep the 4:3 aspect exactly uniform
    while (nx - 1) % 4:
        nx += 1
    ny = (nx - 1) * 3 // 4 + 1
    Zl = 2 * (2 * np.pi * eps) / np.sqrt(2.0)
    for M, om, name in ((M_I, 1.0, "M=I"), (M_NR, np.sqrt(2.0), "nonrev")):
        ops = Ops(nx, ny, box, eps, M)
        L = ops.assemble(+1.0)
        mA = ball_mask(ops, (-1.0, 0.0), 0.3)
        mB = ball_mask(ops, (1.0, 0.0), 0.3)
        cap = dirichlet_form(ops, solve(L, mA, mB)) / Zl
        asym = np.exp(-0.25 / eps) * (2 * np.pi * eps) / (2 * np.pi) / Zl * om
        print(f"eps={eps} {name}: grid {nx}x{ny} h={4/(nx-1):.4f} cap_pde={cap:.8g} "
              f"cap_asym={asym:.8g} ratio={cap/asym:.6f}")

print("--- criterion-7 Laplace integral, eps=0.07")
for eps in (0.07,):
    nx, ny = 161, 121
    ops = Ops(nx, ny, box, eps, M_I)
    Ls = ops.assemble(-1.0)
    mA = ball_mask(ops, (-1.0, 0.0), 0.3)   # m1 = shallower; tie - lexicographic
    mB = ball_mask(ops, (1.0, 0.0), 0.3)
    hs = solve(Ls, mA, mB)
    lhs = (hs * np.exp(-ops.Un / eps)).sum() * ops.h ** 2
    rhs = (2 * np.pi * eps) / np.sqrt(2.0)
    print(f"eps={eps}: int h* e^-U/eps = {lhs:.10g} laplace = {rhs:.10g} ratio = {lhs/rhs:.6f}")
