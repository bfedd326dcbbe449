"""Forward sensitivities, adjoint state, and reduced gradients.

At a converged regularized solution u the linearized operator

    J = T(e) + gamma^* diag(w f M''_eps(gamma u)) gamma

is symmetric positive definite and shared by every sensitivity direction and
by the adjoint equation, so one sparse factorization (:class:`LinearizedMap`)
serves them all.  Directional derivatives of the solution map solve

    J du = -T(delta_e) u            (ellipticity direction)
    J du = -gamma^*(delta_f M'_eps(gamma u))   (friction direction)

and the adjoint state solves J p = Riesz(observation - u), from which the
reduced gradients of the output-least-squares objective follow without any
further forward solves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .discretization import (
    Mesh,
    ParameterField,
    elementwise_energy,
    free_part,
    full_part,
    h1_gram,
    mass_matrix,
    matrix_for_direction,
    trace_adjoint,
)
from .forward import ForwardState, Problem, solution_map
from .kernels import KernelSpec, modulus_smooth

__all__ = [
    "Sensitivity",
    "OptimalityBundle",
    "LinearizedMap",
    "sensitivity_e",
    "sensitivity_f",
    "adjoint_solve",
    "reduced_gradients",
    "reduced_objective",
    "misfit_riesz_matrix",
]


@dataclass(frozen=True)
class Sensitivity:
    """A directional derivative of the regularized solution map."""

    direction_kind: str  # "ellipticity" or "friction"
    delta_u: np.ndarray  # full nodal vector


@dataclass(frozen=True)
class OptimalityBundle:
    """Adjoint state, reduced gradients, and projected-gradient residuals.

    The stationarity residuals are ``norm(x - clip(x - grad, box))`` in the
    Euclidean norm of the coefficient vectors; they vanish exactly at a
    discrete KKT point of the box-constrained problem.
    """

    adjoint_p: np.ndarray
    grad_e: np.ndarray
    grad_f: np.ndarray
    stationarity_e: float
    stationarity_f: float


class LinearizedMap:
    """Factorized Newton Jacobian at a converged regularized state.

    Reused across sensitivity and adjoint solves; building it twice for the
    same state gives results identical to reuse (pure function of the state).
    """

    def __init__(
        self,
        state: ForwardState,
        problem: Problem,
        e: ParameterField,
        f: ParameterField,
        kernel: KernelSpec,
        eps: float,
    ):
        mesh = problem.mesh
        op = problem.operator(e)
        self.mesh = mesh
        self.problem = problem
        self.u_free = free_part(mesh, state.u)
        pos = mesh.friction_free_positions
        self.smooth = modulus_smooth(kernel, eps, self.u_free[pos])
        wf = mesh.friction_weights * f.values
        diag = np.bincount(pos, weights=wf * self.smooth.second_derivative, minlength=op.load.size)
        self.matrix = (op.matrix + sp.diags(diag)).tocsc()
        self._lu = splu(self.matrix)

    def solve(self, rhs_free: np.ndarray) -> np.ndarray:
        return self._lu.solve(rhs_free)


def _linmap(state, problem, e, f, kernel, eps, linmap):
    return linmap if linmap is not None else LinearizedMap(state, problem, e, f, kernel, eps)


def sensitivity_e(
    state: ForwardState,
    problem: Problem,
    e: ParameterField,
    f: ParameterField,
    kernel: KernelSpec,
    eps: float,
    delta_e: np.ndarray,
    linmap: LinearizedMap | None = None,
) -> Sensitivity:
    """Derivative of the solution map along an ellipticity direction."""
    lm = _linmap(state, problem, e, f, kernel, eps, linmap)
    mesh = problem.mesh
    T_dir = matrix_for_direction(mesh, delta_e, problem.form)
    rhs = -(T_dir @ lm.u_free)
    return Sensitivity("ellipticity", full_part(mesh, lm.solve(rhs)))


def sensitivity_f(
    state: ForwardState,
    problem: Problem,
    e: ParameterField,
    f: ParameterField,
    kernel: KernelSpec,
    eps: float,
    delta_f: np.ndarray,
    linmap: LinearizedMap | None = None,
) -> Sensitivity:
    """Derivative of the solution map along a friction direction."""
    lm = _linmap(state, problem, e, f, kernel, eps, linmap)
    mesh = problem.mesh
    delta_f = np.asarray(delta_f, dtype=float)
    rhs_full = -trace_adjoint(mesh, delta_f * lm.smooth.first_derivative)
    return Sensitivity("friction", full_part(mesh, lm.solve(free_part(mesh, rhs_full))))


def misfit_riesz_matrix(problem: Problem, misfit_norm: str = "L2") -> sp.csr_matrix:
    """Gram matrix turning a free-dof residual into the misfit Riesz vector."""
    if misfit_norm == "L2":
        if problem._mass_gram is None:
            problem._mass_gram = mass_matrix(problem.mesh)
        return problem._mass_gram
    if misfit_norm == "V":
        if problem._v_gram is None:
            problem._v_gram = h1_gram(problem.mesh)
        return problem._v_gram
    raise ValueError(f"misfit_norm must be 'L2' or 'V', got {misfit_norm!r}")


def adjoint_solve(
    state: ForwardState,
    problem: Problem,
    e: ParameterField,
    f: ParameterField,
    kernel: KernelSpec,
    eps: float,
    observation: np.ndarray,
    misfit_norm: str = "L2",
    linmap: LinearizedMap | None = None,
) -> np.ndarray:
    """Adjoint state p solving J p = Riesz(observation - u).

    The system matrix is the same SPD Jacobian as for the sensitivities (the
    problem is self-adjoint), so reusing a :class:`LinearizedMap` is exact.
    """
    lm = _linmap(state, problem, e, f, kernel, eps, linmap)
    mesh = problem.mesh
    G = misfit_riesz_matrix(problem, misfit_norm)
    resid = free_part(mesh, np.asarray(observation, dtype=float)) - lm.u_free
    return full_part(mesh, lm.solve(G @ resid))


def reduced_gradients(
    state: ForwardState,
    adjoint_p: np.ndarray,
    problem: Problem,
    e: ParameterField,
    f: ParameterField,
    kernel: KernelSpec,
    eps: float,
    alpha: float,
    beta: float,
) -> OptimalityBundle:
    """Reduced gradients of the regularized output-least-squares objective.

    grad_e per element: alpha (G_e e)_j + t(1_j; u, p);
    grad_f per friction node: beta (G_f f)_i + w_i M'_eps(u_i) p_i.
    """
    mesh = problem.mesh
    u_free = free_part(mesh, state.u)
    pos = mesh.friction_free_positions
    sm = modulus_smooth(kernel, eps, u_free[pos])
    p_free = free_part(mesh, adjoint_p)

    grad_e = alpha * np.asarray(e.reg_inner_product @ e.values) + elementwise_energy(
        mesh, problem.form, state.u, np.asarray(adjoint_p, dtype=float)
    )
    grad_f = beta * np.asarray(f.reg_inner_product @ f.values) + (
        mesh.friction_weights * sm.first_derivative * p_free[pos]
    )

    st_e = float(np.linalg.norm(e.values - e.project(e.values - grad_e)))
    st_f = float(np.linalg.norm(f.values - f.project(f.values - grad_f)))
    return OptimalityBundle(
        adjoint_p=np.asarray(adjoint_p, dtype=float),
        grad_e=grad_e,
        grad_f=grad_f,
        stationarity_e=st_e,
        stationarity_f=st_f,
    )


def reduced_objective(
    e: ParameterField,
    f: ParameterField,
    problem: Problem,
    observation: np.ndarray,
    kernel: KernelSpec,
    eps: float,
    alpha: float,
    beta: float,
    misfit_norm: str = "L2",
    tol: float | None = None,
    u0_full: np.ndarray | None = None,
):
    """Evaluate the reduced objective; returns (value, misfit, state).

    value = 1/2 ||u_eps - observation||^2 + alpha/2 |e|_E^2 + beta/2 |f|_F^2
    with the misfit norm chosen by ``misfit_norm``.
    """
    mesh = problem.mesh
    state = solution_map(e, f, eps, problem, kernel, tol=tol, u0_full=u0_full)
    G = misfit_riesz_matrix(problem, misfit_norm)
    resid = free_part(mesh, state.u) - free_part(mesh, np.asarray(observation, dtype=float))
    misfit = 0.5 * float(resid @ (G @ resid))
    reg = 0.5 * alpha * float(e.values @ (e.reg_inner_product @ e.values))
    reg += 0.5 * beta * float(f.values @ (f.reg_inner_product @ f.values))
    return misfit + reg, misfit, state
