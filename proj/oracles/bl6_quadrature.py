#!/usr/bin/env python3
"""Reference for the saddle-box Gaussian integral on the quartic double well.

I(eps) = int_{B_eps} grad p . M grad p  e^{-(U-H)/eps} dz,
grad p = C^{-1} e^{-alpha (z.v)^2 / 2 eps} v,  C = sqrt(2 pi eps / alpha),
B_eps = C_eps cap {U < H + lambda1 delta^2 / 4},
C_eps = [-delta, delta] x [-sqrt(2 lambda1/lambda2) delta, ...] in the saddle
eigenbasis (here already the coordinate axes), delta = K sqrt(eps log(1/eps)).
Reference value (2 pi eps)^{d/2-1} omega; for d = 2 that is just omega.
"""
import numpy as np
from scipy import integrate

H = 0.25
lam1 = lam2 = 1.0

def U(x, y):
    return 0.25 * (x * x - 1) ** 2 + 0.5 * y * y

def analyze(M):
    L = np.diag([-1.0, 1.0])
    w, V = np.linalg.eig(L @ M)
    i = int(np.argmin(w.real))
    mu = -w[i].real
    v = V[:, i].real
    v /= np.linalg.norm(v)
    if v[0] < 0:
        v = -v
    alpha = mu / (v @ M @ v)
    omega = mu / 1.0
    return mu, v, alpha, omega

def bl6(eps, M, K):
    mu, v, alpha, omega = analyze(M)
    delta = K * np.sqrt(eps * np.log(1 / eps))
    ybox = np.sqrt(2 * lam1 / lam2) * delta
    thr = H + 0.25 * lam1 * delta * delta
    C2 = 2 * np.pi * eps / alpha
    vMv = v @ M @ v

    def integrand(y, x):
        if U(x, y) >= thr:
            return 0.0
        zv = x * v[0] + y * v[1]
        return (vMv / C2) * np.exp(-alpha * zv * zv / eps) * np.exp(-(U(x, y) - H) / eps)

    val, err = integrate.dblquad(integrand, -delta, delta, -ybox, ybox,
                                 epsabs=1e-12, epsrel=1e-10)
    return val, omega, val / omega

for M, name in ((np.eye(2), "M=I"), (np.array([[1.0, 1.0], [-1.0, 1.0]]), "nonrev")):
    print(f"--- {name}")
    for eps in (0.2, 0.1, 0.05, 0.02):
        val, om, ratio = bl6(eps, M, K=2.0)
        print(f"eps={eps}: I={val:.12g} omega={om:.12g} ratio={ratio:.12g}")
