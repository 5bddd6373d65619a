#!/usr/bin/env python3
"""Independent reference implementation of the grid capacity pipeline.

Scheme (as in the toolkit, re-derived from scratch in scipy):
  nodes (i,j) -> n = j*nx + i on a uniform grid, spacing h, measure
  m_u = exp(-U_u/eps) h^2.
  Symmetric part: edge conductance s_e = exp(-U(mid)/eps) * S_dd.
  Antisymmetric part: plaquette circulations theta_P = -(a/2) exp(-U(center)/eps),
  a = (M_xy - M_yx)/2, superposed into directed edge weights abar_e
  (x-edge: theta(above) - theta(below); y-edge: theta(left) - theta(right)).
  Generator: (L f)_u = (eps/m_u) sum_edges (s_e + a_uv)(f_v - f_u);
  adjoint = same with a -> -a.
  Capacity: cap_dirichlet = (eps/Z) h^2 sum_e s_e (grad h)_e^2,
  cap_flux = -(1/Z) sum_{u in A} m_u (L h)_u (net inflow of the M-flow of h).

Outputs frozen into tests/test_grid.cpp; tolerances there reflect
cross-implementation (scipy splu vs Eigen SparseLU) agreement.
"""
import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spl

M_I = np.eye(2)
M_NR = np.array([[1.0, 1.0], [-1.0, 1.0]])

def U(x, y):
    return 0.25 * (x * x - 1) ** 2 + 0.5 * y * y

class Ops:
    def __init__(self, nx, ny, box, eps, M):
        x0, x1, y0, y1 = box
        h = (x1 - x0) / (nx - 1)
        assert abs((y1 - y0) / (ny - 1) - h) < 1e-12
        self.nx, self.ny, self.h, self.eps = nx, ny, h, eps
        self.x = x0 + h * np.arange(nx)
        self.y = y0 + h * np.arange(ny)
        X, Y = np.meshgrid(self.x, self.y)          # [ny, nx]
        self.Un = U(X, Y).ravel()
        self.m = np.exp(-self.Un / eps) * h * h
        S = (M + M.T) / 2
        assert abs(S[0, 1]) < 1e-14
        a = (M[0, 1] - M[1, 0]) / 2
        # edge midpoint potentials
        Uxe = U(X[:, :-1] + h / 2, Y[:, :-1])        # [ny, nx-1]
        Uye = U(X[:-1, :], Y[:-1, :] + h / 2)        # [ny-1, nx]
        self.sx = np.exp(-Uxe / eps) * S[0, 0]
        self.sy = np.exp(-Uye / eps) * S[1, 1]
        Uc = U(X[:-1, :-1] + h / 2, Y[:-1, :-1] + h / 2)  # [ny-1, nx-1]
        th = -(a / 2) * np.exp(-Uc / eps)
        abx = np.zeros_like(Uxe)                     # x-edge: above - below
        abx[:-1, :] += th
        abx[1:, :] -= th
        aby = np.zeros_like(Uye)                     # y-edge: left - right
        aby[:, 1:] += th
        aby[:, :-1] -= th
        self.abx, self.aby = abx, aby

    def idx(self, i, j):
        return j * self.nx + i

    def assemble(self, sign):
        nx, ny, eps = self.nx, self.ny, self.eps
        N = nx * ny
        rows, cols, vals = [], [], []
        def add(u, w, c):
            rows.append(u); cols.append(w); vals.append(c)
            rows.append(u); cols.append(u); vals.append(-c)
        J, I = np.meshgrid(np.arange(ny), np.arange(nx - 1), indexing="ij")
        for j in range(ny):
            for i in range(nx - 1):
                u, w = self.idx(i, j), self.idx(i + 1, j)
                s, ab = self.sx[j, i], sign * self.abx[j, i]
                add(u, w, eps * (s + ab) / self.m[u])
                add(w, u, eps * (s - ab) / self.m[w])
        for j in range(ny - 1):
            for i in range(nx):
                u, w = self.idx(i, j), self.idx(i, j + 1)
                s, ab = self.sy[j, i], sign * self.aby[j, i]
                add(u, w, eps * (s + ab) / self.m[u])
                add(w, u, eps * (s - ab) / self.m[w])
        return sp.csr_matrix((vals, (rows, cols)), shape=(N, N))

def ball_mask(ops, c, r):
    X, Y = np.meshgrid(ops.x, ops.y)
    return ((X - c[0]) ** 2 + (Y - c[1]) ** 2 <= r * r).ravel()

def solve(L, maskA, maskB):
    N = L.shape[0]
    interior = ~(maskA | maskB)
    h = np.zeros(N)
    h[maskA] = 1.0
    A = L[interior][:, interior]
    b = -(L[interior][:, maskA] @ np.ones(maskA.sum()))
    lu = spl.splu(A.tocsc())
    x = lu.solve(b)
    x += lu.solve(b - A @ x)          # one refinement step
    h[interior] = x
    return h

def dirichlet_form(ops, h):
    hh = h.reshape(ops.ny, ops.nx)
    gx = (hh[:, 1:] - hh[:, :-1]) / ops.h
    gy = (hh[1:, :] - hh[:-1, :]) / ops.h
    return ops.eps * ops.h ** 2 * ((ops.sx * gx * gx).sum() + (ops.sy * gy * gy).sum())

def run(nx, ny, box, eps, M, name):
    ops = Ops(nx, ny, box, eps, M)
    L = ops.assemble(+1.0)
    Ls = ops.assemble(-1.0)
    mA = ball_mask(ops, (-1.0, 0.0), 0.3)
    mB = ball_mask(ops, (1.0, 0.0), 0.3)
    h = solve(L, mA, mB)
    hs = solve(Ls, mA, mB)
    cap_d = dirichlet_form(ops, h)
    cap_ds = dirichlet_form(ops, hs)
    cap_flux = -(ops.m[mA] * (L @ h)[mA]).sum()
    cap_flux_s = -(ops.m[mA] * (Ls @ hs)[mA]).sum()
    # swap: equilibrium potential toward B
    h_swap = solve(L, mB, mA)
    cap_swap = dirichlet_form(ops, h_swap)
    # adjointness residual of the algebraic identity D L* = L^T D
    D = sp.diags(ops.m)
    adj = abs(D @ Ls - L.T @ D).max()
    print(f"--- {name} eps={eps} grid {nx}x{ny}")
    print(f"cap_dirichlet = {cap_d:.16g}")
    print(f"cap_flux      = {cap_flux:.16g}   rel diff {(cap_flux-cap_d)/cap_d:.3e}")
    print(f"cap_adjoint   = {cap_ds:.16g}   rel diff {(cap_ds-cap_d)/cap_d:.3e}")
    print(f"cap_adj_flux  = {cap_flux_s:.16g}")
    print(f"cap_swap      = {cap_swap:.16g}   rel diff {(cap_swap-cap_d)/cap_d:.3e}")
    print(f"adjoint identity residual = {adj:.3e}")
    probes = [(-0.5, 0.0), (0.0, 0.0), (0.5, 0.0), (0.3, 0.4), (-0.2, -0.3)]
    for px, py in probes:
        i = int(round((px - ops.x[0]) / ops.h)); j = int(round((py - ops.y[0]) / ops.h))
        print(f"h({px},{py}) = {h[ops.idx(i,j)]:.16g}")
    # Prop 3 with f == 1: u solves L u = -1 off B, u = 0 on B
    N = nx * ny
    notB = ~mB
    A = L[notB][:, notB]
    lu = spl.splu(A.tocsc())
    b = -np.ones(notB.sum())
    uu = lu.solve(b)
    uu += lu.solve(b - A @ uu)
    u = np.zeros(N); u[notB] = uu
    nu = -(ops.m * (Ls @ hs)) / cap_ds   # un-normalized by Z=1; nodes in A
    lhs = (u[mA] * nu[mA]).sum()
    rhs = (hs * 1.0 * ops.m).sum() / cap_ds
    print(f"prop3 f=1: lhs={lhs:.16g} rhs={rhs:.16g} rel defect={(lhs-rhs)/rhs:.3e}")
    print(f"eq measure mass = {nu[mA].sum():.16g} (cap*/cap = {cap_ds/cap_d:.16g})")
    return cap_d

box = (-2.0, 2.0, -1.5, 1.5)

if __name__ == "__main__":
    c1 = run(161, 121, box, 0.1, M_I, "M=I")
    c2 = run(161, 121, box, 0.1, M_NR, "nonrev")
    # refinement sequence for the Cauchy test (M=I)
    for nx, ny in ((81, 61), (161, 121), (321, 241)):
        ops = Ops(nx, ny, box, 0.1, M_I)
        L = ops.assemble(+1.0)
        mA = ball_mask(ops, (-1.0, 0.0), 0.3); mB = ball_mask(ops, (1.0, 0.0), 0.3)
        print(f"cap({nx}x{ny}) = {dirichlet_form(ops, solve(L, mA, mB)):.16g}")
