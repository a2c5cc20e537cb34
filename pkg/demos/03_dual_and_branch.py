"""The penalty curve, its inverse, and the solution branch.

P(lam) = |rho_bar - rho_hat(lam)|^2 grows strictly with lam, so fixing a
budget kappa picks out a unique lam. That lam is the largest principal
eigenvalue reachable within distance sqrt(kappa) of rho_bar. Along the way
the solution norm grows continuously from zero at the threshold, and the
solution depends continuously on the reference kernel.
"""
import numpy as np

from hartree_iop import GridSpec, HartreeProblem, Kernel, build_grid, build_potential
from hartree_iop.iop import branch_sweep, dual_solve, iop_solve, kernel_perturbation_probe
from hartree_iop.spectral import eigenpair

grid = build_grid(GridSpec(1, 12.0, 401, 0.5))
prob = HartreeProblem(build_potential(grid, "harmonic_plus", c=1.0))
rho_bar = Kernel.gaussian_product(grid, 0.5, 1.0)
l1 = eigenpair(prob, rho_bar, tol=1e-12).lambda1

lams = l1 + np.concatenate([[0.0], 0.1 * np.arange(1, 21)])
points = branch_sweep(prob, rho_bar, lams)
print("   lam - l1   |u|_L2    energy     residual")
for p in points[::4]:
    print(f"   {p.lam - l1:6.2f}   {p.u_norm_l2:.5f}  {p.energy:+.5f}  {p.pde_residual:.1e}")
ratio = [p.u_norm_l2**2 / (p.lam - l1) for p in points[1:4]]
print("near the threshold |u|^2 / (lam - l1) levels off at", np.round(ratio, 4))

lam0 = l1 + 1.3
kappa = iop_solve(prob, lam0, rho_bar).phat
dual = dual_solve(prob, kappa, rho_bar)
print(f"\nbudget kappa = {kappa:.6f} gives lam* = {dual.lambda_star:.10f} "
      f"(forward lam = {lam0:.10f}) after {dual.evaluations} solves")

sigma0 = Kernel.gaussian_product(grid, 0.1, 1.0, center=0.5)
rep = kernel_perturbation_probe(prob, rho_bar, l1 + 1.0, [2.0**-k * sigma0 for k in range(0, 21, 4)])
print("\nperturbing rho_bar by shrinking multiples of a Gaussian bump")
for s, d in zip(rep.sigma_norms, rep.distances):
    print(f"   |sigma| = {s:.2e}   |u(sigma) - u(0)| = {d:.2e}   ratio {d / s:.3f}")
