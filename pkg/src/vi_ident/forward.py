"""Forward solvers for the friction model.

Two routes to a discrete solution:

* :func:`solve_vi_oracle` minimizes the nonsmooth energy
  ``1/2 u^T K u - l^T u + sum_i w_i f_i |u_i|`` (the convex program equivalent
  to the variational inequality of the second kind) by a primal-dual active
  set method over the three per-node subdifferential cases.  It terminates
  finitely and serves as the epsilon-independent ground truth.

* :func:`solve_regularized` solves the smoothed variational equation
  ``K u + gamma^*(f M'_eps(gamma u)) = l`` by a damped Newton method; the
  Jacobian ``K + gamma^* diag(w f M''_eps(gamma u)) gamma`` is SPD because
  M'' >= 0, so the Newton direction always descends the smoothed energy.

:func:`solution_map` dispatches on ``eps`` (0 means oracle) and caches the
assembled operator per coefficient vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .discretization import (
    DiscreteOperator,
    Mesh,
    ParameterField,
    assemble_operator,
    full_part,
)
from .errors import SolverError
from .kernels import KernelSpec, modulus_smooth

__all__ = [
    "ForwardState",
    "Problem",
    "solve_vi_oracle",
    "solve_regularized",
    "solution_map",
    "smoothed_energy",
    "nonsmooth_energy",
]


@dataclass(frozen=True)
class ForwardState:
    """A converged forward solution.

    ``u`` is the full nodal vector (zeros on the Dirichlet set); ``eps`` is 0
    for the unregularized oracle solution.  Histories hold one entry per
    accepted iterate for diagnostics.
    """

    u: np.ndarray
    residual_norm: float
    iterations: int
    eps: float
    residual_history: tuple = ()
    energy_history: tuple = ()


@dataclass
class Problem:
    """Mesh, bilinear form, and source bundled with an assembly cache.

    The cache maps coefficient bytes to assembled operators; identification
    drivers re-solve at unchanged ``e`` for sensitivities and adjoints, so the
    last few operators are kept around.
    """

    mesh: Mesh
    form: str = "grad_grad"
    source: Callable | float = 1.0
    _cache: dict = field(default_factory=dict, repr=False)
    _cache_cap: int = field(default=8, repr=False)
    _mass_gram: object = field(default=None, repr=False)
    _v_gram: object = field(default=None, repr=False)

    def operator(self, e: ParameterField) -> DiscreteOperator:
        key = e.values.tobytes()
        op = self._cache.get(key)
        if op is None:
            op = assemble_operator(self.mesh, e, self.form, self.source)
            if len(self._cache) >= self._cache_cap:
                self._cache.pop(next(iter(self._cache)))
            self._cache[key] = op
        return op


def _check_friction(f: ParameterField, mesh: Mesh) -> np.ndarray:
    vals = f.values
    if vals.shape != (mesh.friction_nodes.size,):
        raise ValueError("friction field length must match the friction node count")
    if vals.min(initial=0.0) < 0.0:
        raise ValueError("friction coefficient must be nonnegative")
    return vals


def nonsmooth_energy(op: DiscreteOperator, mesh: Mesh, f: ParameterField, u_free: np.ndarray) -> float:
    """Discrete energy 1/2 u^T K u - l^T u + sum_i w_i f_i |u_i|."""
    wf = mesh.friction_weights * f.values
    ud = u_free[mesh.friction_free_positions]
    return float(0.5 * u_free @ (op.matrix @ u_free) - op.load @ u_free + wf @ np.abs(ud))


def smoothed_energy(
    op: DiscreteOperator,
    mesh: Mesh,
    f: ParameterField,
    kernel: KernelSpec,
    eps: float,
    u_free: np.ndarray,
) -> float:
    """Energy with |.| replaced by the smoothed modulus M_eps."""
    wf = mesh.friction_weights * f.values
    ud = u_free[mesh.friction_free_positions]
    M = modulus_smooth(kernel, eps, ud).value
    return float(0.5 * u_free @ (op.matrix @ u_free) - op.load @ u_free + wf @ M)


def _prox_residual(op, mesh, f, u_free) -> float:
    """Norm of the scaled proximal-gradient step; zero exactly at the minimizer."""
    K, l = op.matrix, op.load
    wf = mesh.friction_weights * f.values
    tau = 1.0 / max(abs(K).sum(axis=1).max(), 1.0)
    z = u_free - tau * (K @ u_free - l)
    prox = z.copy()
    pos = mesh.friction_free_positions
    zd = z[pos]
    prox[pos] = np.sign(zd) * np.maximum(np.abs(zd) - tau * wf, 0.0)
    return float(np.linalg.norm(u_free - prox) / tau)


def solve_vi_oracle(
    op: DiscreteOperator,
    mesh: Mesh,
    f: ParameterField,
    tol: float = 1e-10,
    max_iter: int | None = None,
) -> ForwardState:
    """Solve the variational inequality by primal-dual active set.

    Each friction node is classified as slip+ (u > 0, multiplier at +w f),
    slip- (u < 0, multiplier at -w f), or stick (u = 0, multiplier free in
    the box); the classification is updated from the indicator
    ``xi = mu + c u`` until it is a fixed point.  A damping line search keeps
    the energy non-increasing.  Stops when the proximal-gradient residual
    drops below ``tol``.

    Raises
    ------
    SolverError
        If the residual has not dropped below ``tol`` within the cap
        (2 |D| + 10 by default).
    """
    fvals = _check_friction(f, mesh)
    K = op.matrix.tocsc()
    l = op.load
    n = l.size
    pos = mesh.friction_free_positions
    wf = mesh.friction_weights * fvals
    cap = max_iter if max_iter is not None else 2 * pos.size + 10
    c_weight = 1.0

    # Start from the frictionless solve: exact when f = 0, a good sign
    # predictor otherwise.
    lu_full = splu(K)
    u = lu_full.solve(l)
    mu = l - K @ u
    status = np.sign(np.where(np.abs(mu[pos] + c_weight * u[pos]) <= wf, 0.0, mu[pos] + c_weight * u[pos]))
    energy = nonsmooth_energy(op, mesh, f, u)
    energies = [energy]
    residual = _prox_residual(op, mesh, f, u)
    iterations = 0

    while residual > tol:
        if iterations >= cap:
            raise SolverError(
                f"active-set solver did not converge in {cap} iterations "
                f"(residual {residual:.3e})",
                residual=residual,
            )
        iterations += 1

        stick = pos[status == 0.0]
        rhs = l.copy()
        rhs[pos] -= wf * status
        keep = np.ones(n, dtype=bool)
        keep[stick] = False
        ki = np.flatnonzero(keep)
        u_trial = np.zeros(n)
        if ki.size:
            sub = K[np.ix_(ki, ki)].tocsc()
            u_trial[ki] = splu(sub).solve(rhs[ki])

        # Energy-monotone damping between the previous and the trial point.
        theta = 1.0
        u_new = u_trial
        e_new = nonsmooth_energy(op, mesh, f, u_new)
        while e_new > energy + 1e-14 * (1.0 + abs(energy)) and theta > 1e-8:
            theta *= 0.5
            u_new = (1.0 - theta) * u + theta * u_trial
            e_new = nonsmooth_energy(op, mesh, f, u_new)
        u = u_new
        energy = e_new
        energies.append(energy)

        mu = l - K @ u
        xi = mu[pos] + c_weight * u[pos]
        status = np.sign(np.where(np.abs(xi) <= wf, 0.0, xi))
        residual = _prox_residual(op, mesh, f, u)

    return ForwardState(
        u=full_part(mesh, u),
        residual_norm=residual,
        iterations=iterations,
        eps=0.0,
        energy_history=tuple(energies),
    )


def solve_regularized(
    op: DiscreteOperator,
    mesh: Mesh,
    f: ParameterField,
    kernel: KernelSpec,
    eps: float,
    tol: float = 1e-12,
    max_iter: int = 100,
    u0_full: np.ndarray | None = None,
) -> ForwardState:
    """Newton solve of the regularized variational equation.

    The residual is ``R(u) = K u + gamma^*(w f M'_eps(gamma u)) - l`` on the
    free dofs; an Armijo backtracking line search on the smoothed energy
    guards against the large curvature ``M'' ~ 1/eps`` far from the solution.
    Warm-starts from ``u0_full`` when given.  Cold starts use the frictionless
    linear solve, improved by a short epsilon-continuation warm-up (solving at
    a few larger epsilon levels first) so that small-epsilon stick problems
    start inside the Newton basin; the reported iteration count and residual
    history cover the target-epsilon solve only.
    """
    _check_friction(f, mesh)
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")

    if u0_full is not None:
        try:
            return _newton_regularized(
                op, mesh, f, kernel, eps, tol, max_iter, np.asarray(u0_full, dtype=float)
            )
        except SolverError:
            pass  # a poor warm start: fall through to the robust cold path

    u_start = full_part(mesh, splu(op.matrix.tocsc()).solve(op.load))
    if np.any(f.values > 0.0):
        level = 1e-1
        while level > 3.0 * eps:
            warm = _newton_regularized(
                op, mesh, f, kernel, level, max(tol, 1e-9), max_iter, u_start
            )
            u_start = warm.u
            level /= 10.0
    return _newton_regularized(op, mesh, f, kernel, eps, tol, max_iter, u_start)


def _newton_regularized(
    op: DiscreteOperator,
    mesh: Mesh,
    f: ParameterField,
    kernel: KernelSpec,
    eps: float,
    tol: float,
    max_iter: int,
    u0_full: np.ndarray,
) -> ForwardState:
    """One damped-Newton run at a fixed eps from the given full-vector start."""
    fvals = f.values
    K = op.matrix.tocsc()
    l = op.load
    pos = mesh.friction_free_positions
    wf = mesh.friction_weights * fvals
    u = np.asarray(u0_full, dtype=float)[mesh.free_nodes]

    def residual_vec(u_free):
        sm = modulus_smooth(kernel, eps, u_free[pos])
        r = K @ u_free - l
        r[pos] += wf * sm.first_derivative
        return r, sm

    r, sm = residual_vec(u)
    rnorm = float(np.linalg.norm(r))
    history = [rnorm]
    energy = smoothed_energy(op, mesh, f, kernel, eps, u)
    iterations = 0
    stalled = 0

    while rnorm > tol:
        if iterations >= max_iter or stalled >= 2:
            reason = "stalled at the attainable precision" if stalled >= 2 else f"did not converge in {max_iter} iterations"
            raise SolverError(
                f"Newton {reason} (residual {rnorm:.3e}, tol {tol:.1e})",
                residual=rnorm,
            )
        iterations += 1
        rnorm_prev = rnorm
        J = K + sp.diags(
            np.bincount(pos, weights=wf * sm.second_derivative, minlength=l.size)
        ).tocsc()
        d = splu(J).solve(-r)

        # Full step first: near the solution Newton contracts the residual and
        # the energy decrease underflows double precision, so the Armijo test
        # is reserved for the globalization phase.
        u_trial = u + d
        r_trial, sm_trial = residual_vec(u_trial)
        rn_trial = float(np.linalg.norm(r_trial))
        if rn_trial <= 0.9 * rnorm:
            u, r, sm, rnorm = u_trial, r_trial, sm_trial, rn_trial
            energy = smoothed_energy(op, mesh, f, kernel, eps, u)
        else:
            slope = float(r @ d)  # = grad E . d, negative since J is SPD
            step = 1.0
            while True:
                u_trial = u + step * d
                e_trial = smoothed_energy(op, mesh, f, kernel, eps, u_trial)
                if e_trial <= energy + 1e-4 * step * slope or step < 1e-12:
                    break
                step *= 0.5
            u = u_trial
            energy = e_trial
            r, sm = residual_vec(u)
            rnorm = float(np.linalg.norm(r))
        history.append(rnorm)
        # Residual no longer improving: double precision is exhausted, so
        # fail fast instead of looping to the iteration cap.
        stalled = stalled + 1 if rnorm >= 0.9999 * rnorm_prev else 0

    return ForwardState(
        u=full_part(mesh, u),
        residual_norm=rnorm,
        iterations=iterations,
        eps=float(eps),
        residual_history=tuple(history),
    )


def solution_map(
    e: ParameterField,
    f: ParameterField,
    eps: float,
    problem: Problem,
    kernel: KernelSpec | None = None,
    tol: float | None = None,
    u0_full: np.ndarray | None = None,
) -> ForwardState:
    """Evaluate S(e, f) (eps = 0) or S_eps(e, f) (eps > 0).

    The assembled operator is cached on the problem per coefficient vector.
    """
    op = problem.operator(e)
    if eps == 0:
        return solve_vi_oracle(op, problem.mesh, f, **({"tol": tol} if tol is not None else {}))
    if kernel is None:
        raise ValueError("a kernel is required for eps > 0")
    kwargs = {"tol": tol} if tol is not None else {}
    return solve_regularized(op, problem.mesh, f, kernel, eps, u0_full=u0_full, **kwargs)
