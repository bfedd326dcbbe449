"""Tour of the four smoothing kernels.

Each kernel replaces max(t, 0) by a C^2 function P(eps, t) obtained by
convolving with a probability density, and |t| by M(eps, t) = P(t) + P(-t).
The approximation error is bounded by k*eps (resp. 2*k*eps) where k is the
density's absolute mean.
"""
import numpy as np

from vi_ident import KERNEL_NAMES, get_kernel, modulus_smooth, plus_smooth

eps = 0.1
ts = np.array([-0.5, -0.1, 0.0, 0.1, 0.5])

print(f"smoothed plus function at eps = {eps}")
print(f"{'t':>8} " + " ".join(f"{name:>18}" for name in KERNEL_NAMES))
for t in ts:
    row = [plus_smooth(get_kernel(name), eps, t).value for name in KERNEL_NAMES]
    print(f"{t:8.2f} " + " ".join(f"{v:18.12f}" for v in row))

print()
print("worst-case gaps over t in [-10, 10] against the guaranteed bounds")
t_grid = np.linspace(-10, 10, 2001)
for name in KERNEL_NAMES:
    kernel = get_kernel(name)
    k = kernel.absolute_mean_k
    gap_p = np.abs(plus_smooth(kernel, eps, t_grid).value - np.maximum(t_grid, 0)).max()
    gap_m = np.abs(modulus_smooth(kernel, eps, t_grid).value - np.abs(t_grid)).max()
    print(
        f"  {name:18s} k = {k:.6f}   |P-p| = {gap_p:.2e} <= {k * eps:.2e}"
        f"   |M-m| = {gap_m:.2e} <= {2 * k * eps:.2e}"
    )

print()
print("the second derivative is the rescaled density rho(t/eps)/eps:")
kernel = get_kernel("sigmoid")
for t in (0.0, 0.05, 0.2):
    print(f"  P_tt(eps, {t:4.2f}) = {plus_smooth(kernel, eps, t).second_derivative:.6f}")
