"""Regularized output-least-squares identification of (e, f).

The driver minimizes

    J_eps(e, f) + alpha/2 |e|_E^2 + beta/2 |f|_F^2,
    J_eps(e, f) = 1/2 ||S_eps(e, f) - observation||^2,

over the admissible boxes by a projected-gradient method: a spectral
(Barzilai-Borwein) trial step seeds a monotone Armijo backtracking search, so
the objective history is non-increasing and every iterate stays feasible.
Stationarity is measured by the projected-gradient residuals, which vanish
exactly at discrete KKT points of the box-constrained problem.

:func:`continuation_identify` repeats the minimization over a decreasing
epsilon schedule with warm starts, recording the parameter distances used by
the convergence report.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .adjoint import LinearizedMap, adjoint_solve, reduced_gradients, reduced_objective
from .discretization import ParameterField, reg_inner
from .errors import ConfigError, SolverError
from .forward import ForwardState, Problem, solution_map
from .kernels import KernelSpec

__all__ = [
    "IdentificationConfig",
    "IdentificationResult",
    "identify",
    "continuation_identify",
    "continuation_distances",
    "synthesize_observation",
]


@dataclass(frozen=True)
class IdentificationConfig:
    """Driver settings.

    ``initial_step``, ``backtrack`` and ``sufficient_decrease`` are the Armijo
    line-search parameters; ``eps_schedule`` is only consulted by
    :func:`continuation_identify` and must be strictly decreasing.
    """

    alpha: float = 1e-8
    beta: float = 1e-8
    eps_schedule: tuple[float, ...] = (1e-2,)
    max_iters: int = 500
    initial_step: float = 1.0
    backtrack: float = 0.5
    sufficient_decrease: float = 1e-4
    stop_tol: float = 1e-9
    noise_level: float = 0.0
    misfit_norm: str = "L2"
    forward_tol: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "eps_schedule", tuple(float(x) for x in self.eps_schedule))
        if self.alpha < 0 or self.beta < 0:
            raise ConfigError("alpha and beta must be nonnegative")
        sched = self.eps_schedule
        if any(x <= 0 for x in sched) or any(later >= earlier for earlier, later in zip(sched[:-1], sched[1:])):
            raise ConfigError("eps_schedule must be positive and strictly decreasing")
        if not 0 < self.backtrack < 1 or not 0 < self.sufficient_decrease < 1:
            raise ConfigError("Armijo constants must lie in (0, 1)")
        if self.initial_step <= 0:
            raise ConfigError("initial_step must be positive")
        if self.noise_level < 0:
            raise ConfigError("noise_level must be nonnegative")


@dataclass(frozen=True)
class IdentificationResult:
    e_hat: ParameterField
    f_hat: ParameterField
    objective_history: tuple[float, ...]
    stationarity_history: tuple[tuple[float, float], ...]
    final_state: ForwardState
    eps_used: float
    misfit: float = field(default=float("nan"))


def identify(
    config: IdentificationConfig,
    problem: Problem,
    observation: np.ndarray,
    e0: ParameterField,
    f0: ParameterField,
    kernel: KernelSpec,
    eps: float,
    free_e: bool = True,
    free_f: bool = True,
    u0_full: np.ndarray | None = None,
) -> IdentificationResult:
    """Projected-gradient minimization of the regularized objective at fixed eps.

    Parameters held fixed (``free_e``/``free_f`` False) contribute zero
    gradient and zero stationarity residual.  A forward-solver failure inside
    an iteration raises ``SolverError`` with the offending iterate attached as
    ``err.iterate = {"iteration", "e", "f"}``; the iterate reached so far is
    not silently kept.
    """
    e, f = e0, f0
    iteration = 0

    def evaluate(e_, f_, warm):
        try:
            value, misfit, state = reduced_objective(
                e_, f_, problem, observation, kernel, eps,
                config.alpha, config.beta, config.misfit_norm,
                tol=config.forward_tol, u0_full=warm,
            )
        except SolverError as err:
            err.iterate = {
                "iteration": iteration,
                "e": np.array(e_.values, copy=True),
                "f": np.array(f_.values, copy=True),
            }
            raise
        return value, misfit, state

    def gradients(e_, f_, state):
        lm = LinearizedMap(state, problem, e_, f_, kernel, eps)
        p = adjoint_solve(
            state, problem, e_, f_, kernel, eps, observation, config.misfit_norm, linmap=lm
        )
        bundle = reduced_gradients(
            state, p, problem, e_, f_, kernel, eps, config.alpha, config.beta
        )
        ge = bundle.grad_e if free_e else np.zeros_like(bundle.grad_e)
        gf = bundle.grad_f if free_f else np.zeros_like(bundle.grad_f)
        st_e = bundle.stationarity_e if free_e else 0.0
        st_f = bundle.stationarity_f if free_f else 0.0
        return ge, gf, st_e, st_f

    obj, misfit, state = evaluate(e, f, u0_full)
    ge, gf, st_e, st_f = gradients(e, f, state)
    objective_history = [obj]
    stationarity_history = [(st_e, st_f)]
    step = config.initial_step

    for iteration in range(1, config.max_iters + 1):
        if max(st_e, st_f) <= config.stop_tol:
            break

        accepted = False
        trial_step = step
        while trial_step >= 1e-14:
            ye = e.project(e.values - trial_step * ge) if free_e else e.values
            yf = f.project(f.values - trial_step * gf) if free_f else f.values
            de = ye - e.values
            df = yf - f.values
            pred = float(ge @ de + gf @ df)
            if pred >= 0.0:
                break  # projected direction no longer descends: stationary
            e_try = e.with_values(ye)
            f_try = f.with_values(yf)
            obj_try, misfit_try, state_try = evaluate(e_try, f_try, state.u)
            if obj_try <= obj + config.sufficient_decrease * pred:
                accepted = True
                break
            trial_step *= config.backtrack
        if not accepted:
            break  # line search exhausted at machine scale: report current point

        ge_new, gf_new, st_e, st_f = gradients(e_try, f_try, state_try)
        # Spectral (BB1) step from the accepted move seeds the next search.
        s = np.concatenate([de, df])
        y = np.concatenate([ge_new - ge, gf_new - gf])
        sy = float(s @ y)
        step = float(s @ s) / sy if sy > 1e-300 else config.initial_step
        step = min(max(step, 1e-10), 1e10)

        e, f = e_try, f_try
        obj, misfit, state = obj_try, misfit_try, state_try
        ge, gf = ge_new, gf_new
        objective_history.append(obj)
        stationarity_history.append((st_e, st_f))

    return IdentificationResult(
        e_hat=e,
        f_hat=f,
        objective_history=tuple(objective_history),
        stationarity_history=tuple(stationarity_history),
        final_state=state,
        eps_used=float(eps),
        misfit=misfit,
    )


def continuation_identify(
    config: IdentificationConfig,
    problem: Problem,
    observation: np.ndarray,
    e0: ParameterField,
    f0: ParameterField,
    kernel: KernelSpec,
    free_e: bool = True,
    free_f: bool = True,
) -> list[IdentificationResult]:
    """Run identify over the decreasing eps schedule with warm starts."""
    if not config.eps_schedule:
        raise ConfigError("eps_schedule must not be empty")
    results: list[IdentificationResult] = []
    e, f = e0, f0
    warm = None
    for eps in config.eps_schedule:
        res = identify(
            config, problem, observation, e, f, kernel, eps,
            free_e=free_e, free_f=free_f, u0_full=warm,
        )
        results.append(res)
        e, f = res.e_hat, res.f_hat
        warm = res.final_state.u
    return results


def _param_distance(a: IdentificationResult, b: IdentificationResult) -> float:
    de = a.e_hat.values - b.e_hat.values
    df = a.f_hat.values - b.f_hat.values
    d2 = reg_inner(a.e_hat, de, de) + reg_inner(a.f_hat, df, df)
    return float(np.sqrt(d2))


def continuation_distances(results: list[IdentificationResult]) -> dict:
    """Distances between continuation levels, in the regularization norms.

    Returns ``successive`` (length len-1), ``to_final`` (distance of each
    level's optimum to the last one), and the flag ``successive_decreasing``
    used by the convergence report.
    """
    successive = [
        _param_distance(a, b) for a, b in zip(results[:-1], results[1:])
    ]
    to_final = [_param_distance(r, results[-1]) for r in results]
    decreasing = all(b <= a for a, b in zip(successive[:-1], successive[1:]))
    return {
        "successive": successive,
        "to_final": to_final,
        "successive_decreasing": bool(decreasing) if len(successive) > 1 else True,
    }


def synthesize_observation(
    problem: Problem,
    e_true: ParameterField,
    f_true: ParameterField,
    noise_level: float = 0.0,
    seed: int = 0,
) -> np.ndarray:
    """Oracle solution at the true parameters plus seeded uniform noise.

    The noise is componentwise uniform in [-a, a] with amplitude
    ``a = noise_level * max|u|``, added on the free nodes only so the
    observation keeps a zero trace on the Dirichlet set.
    """
    state = solution_map(e_true, f_true, 0.0, problem)
    u = state.u.copy()
    if noise_level > 0.0:
        rng = np.random.default_rng(seed)
        amp = noise_level * float(np.abs(u).max())
        u[problem.mesh.free_nodes] += rng.uniform(-amp, amp, size=problem.mesh.free_nodes.size)
    return u
