#!/usr/bin/env python3
"""Reference values for the saddle algebra on the pinned drift matrices.

Conventions: L = Hess U at the saddle (one negative eigenvalue). mu is the
unique eigenvalue of -LM with positive real part, i.e. LM v = -mu v. v is the
unit eigenvector, sign-fixed so its first nonzero component is positive.
alpha = mu / (v.M v), omega = mu / sqrt(-det L). Checks: v.L^{-1}v = -1/alpha,
det(L + 2 alpha v v^T) = -det L, L + alpha v v^T PSD with kernel along L^{-1}v.
"""
import numpy as np

def analyze(L, M):
    w, V = np.linalg.eig(L @ M)
    neg = [i for i in range(len(w)) if w[i].real < 0]
    assert len(neg) == 1, (L, M, w)
    i = neg[0]
    assert abs(w[i].imag) <= 1e-12 * (1 + abs(w[i].real))
    mu = -w[i].real
    v = V[:, i].real.copy()
    v /= np.linalg.norm(v)
    for c in v:
        if abs(c) > 1e-12:
            if c < 0:
                v = -v
            break
    alpha = mu / (v @ M @ v)
    omega = mu / np.sqrt(-np.linalg.det(L))
    return mu, v, alpha, omega

def report(name, L, M):
    mu, v, alpha, omega = analyze(L, M)
    bl1 = v @ np.linalg.solve(L, v)
    B2 = L + 2 * alpha * np.outer(v, v)
    B3 = L + alpha * np.outer(v, v)
    print(f"--- {name}")
    print(f"mu      = {mu:.16g}")
    print(f"v       = {np.array2string(v, precision=16)}")
    print(f"alpha   = {alpha:.16g}")
    print(f"omega   = {omega:.16g}")
    print(f"v.L^-1v = {bl1:.16g}   (-1/alpha = {-1/alpha:.16g})")
    print(f"det(L+2avv)={np.linalg.det(B2):.16g}  -detL={-np.linalg.det(L):.16g}")
    print(f"eigs(L+avv)={np.sort(np.linalg.eigvalsh(B3))}")

Lq = np.diag([-1.0, 1.0])  # quartic2d saddle Hessian
report("M=I", Lq, np.eye(2))
for g in (0.5, 1.0, 2.0):
    report(f"M=[[1,{g}],[{-g},1]]", Lq, np.array([[1.0, g], [-g, 1.0]]))
    print(f"sqrt(1+g^2) = {np.sqrt(1+g*g):.16g}")
M2 = np.array([[2.0, 1.0], [0.0, 1.0]])
print("--- decompose M=[[2,1],[0,1]]")
S = (M2 + M2.T) / 2
print("S =", S, " eig:", np.linalg.eigvalsh(S))
K = np.linalg.cholesky(S)  # not the symmetric root; compute that separately
w, Q = np.linalg.eigh(S)
Ksym = Q @ np.diag(np.sqrt(w)) @ Q.T
print("K_sym =", np.array2string(Ksym, precision=16))
print("K_sym@K_sym - S max|.| =", np.abs(Ksym @ Ksym - S).max())
