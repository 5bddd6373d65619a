#!/usr/bin/env python3
"""Reference values for the asymptotic predictions on the quartic double well.

U = (x^2-1)^2/4 + y^2/2: minima (+-1,0) with Hess = diag(2,1), saddle (0,0)
with Hess = diag(-1,1), barrier H = 1/4, well depths h1 = h2 = 0.

Z_laplace(eps)   = sum_wells (2 pi eps)^{d/2} e^{-h_i/eps} / sqrt(det Hess U(m_i))
T_eps            = Z^{-1} e^{-H/eps} (2 pi eps)^{d/2} / (2 pi)
cap_asym         = T_eps * sum_gates omega
mean_hit         = 2 pi e^{(H-h1)/eps} / (sqrt(det Hess U(m1)) * sum omega)
"""
import numpy as np
from scipy import integrate

d = 2
H, h1 = 0.25, 0.0
detH_m = 2.0          # both wells
detL_neg = 1.0        # -det Hess at saddle

def U(x, y):
    return 0.25 * (x * x - 1) ** 2 + 0.5 * y * y

def Z_laplace(eps):
    return 2 * (2 * np.pi * eps) ** (d / 2) / np.sqrt(detH_m)

def Z_quad(eps, box=(-2, 2, -1.5, 1.5)):
    f = lambda y, x: np.exp(-U(x, y) / eps)
    val, _ = integrate.dblquad(f, box[0], box[1], box[2], box[3], epsabs=1e-14, epsrel=1e-12)
    return val

def T_eps(eps, Z):
    return np.exp(-H / eps) * (2 * np.pi * eps) ** (d / 2) / (2 * np.pi) / Z

def mean_hit(eps, omega_sum):
    return 2 * np.pi * np.exp((H - h1) / eps) / (np.sqrt(detH_m) * omega_sum)

for eps in (0.15, 0.1, 0.07, 0.05):
    Zl, Zq = Z_laplace(eps), Z_quad(eps)
    print(f"eps={eps}: Z_laplace={Zl:.16g} Z_quad={Zq:.16g} rel_diff={(Zq-Zl)/Zl:.3e}")
    for name, om in (("M=I", 1.0), ("nonrev", np.sqrt(2.0))):
        t = T_eps(eps, Zl)
        print(f"  {name}: T_eps={t:.16g} cap_asym={t*om:.16g} mean_hit={mean_hit(eps, om):.16g}")
# Arrhenius defect of the analytic prediction: |eps log mean - (H-h1)|
for eps in (0.05, 0.02, 0.01):
    m = mean_hit(eps, 1.0)
    print(f"eps={eps}: eps*log(mean)={eps*np.log(m):.12g} defect={abs(eps*np.log(m)-(H-h1)):.12g} "
          f"bound 5*eps*|log eps|={5*eps*abs(np.log(eps)):.12g}")
